//! Stiffness matrices, load vectors and the assembled linear systems.
//!
//! The interaction integral of an element pair `(E1, E2)` is taken in the
//! difference variable `z = y - x`:
//!
//! ```text
//! int_E1 int_E2 F(x, y) gamma(|y - x|) dy dx = int gamma(|z|) H(z) dz,
//! H(z) = int_{E1 ∩ (E2 - z)} F(x, x + z) dx.
//! ```
//!
//! On the structured mesh all edges point along `(1,0)`, `(0,1)` or `(1,1)`,
//! so `H` is a polynomial of degree at most four on every triangle of the same
//! lattice in `z`. `H` is evaluated exactly (polygon clipping plus a rule exact
//! for quadratics) and the outer integral is done in polar coordinates about
//! `z = 0`, cut exactly at the horizon. Rays that start at the origin use an
//! interpolating cubic in the radius and integrate the monomials against the
//! radial profile in closed form, which removes the singularity of fractional
//! kernels. Where hats jump across an interface the integral diverges for
//! `s >= 1/2`; that single monomial is cut at `jump_cutoff * h`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::dense::{DenseMatrix, LuFactor};
use crate::error::{Error, Result};
use crate::geometry::{AffineBasis, Point, Polygon};
use crate::kernel::{KernelSpec, Shape};
use crate::mesh::{BoundaryTreatment, DofMap, Mesh, Region};
use crate::quadrature::{triangle_points, GaussLegendre};
use crate::sparse::{CsrMatrix, PatternAccumulator};

/// Quadrature parameters of the pair integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    /// Gauss-Legendre points per smooth angular piece.
    pub angular_points: usize,
    /// Gauss-Legendre points along rays that do not start at the origin.
    pub radial_points: usize,
    /// Cutoff radius, in units of `h`, for the divergent part of split-hat jumps.
    pub jump_cutoff: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { angular_points: 12, radial_points: 10, jump_cutoff: 0.1 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.angular_points == 0 || self.radial_points == 0 {
            return Err(Error::InvalidConfig("quadrature rules need at least one point".into()));
        }
        if !(self.jump_cutoff > 0.0) || !self.jump_cutoff.is_finite() {
            return Err(Error::InvalidConfig(format!("jump cutoff must be positive, got {}", self.jump_cutoff)));
        }
        Ok(())
    }

    /// Same rule with twice as many points in both directions.
    pub fn refined(&self) -> Self {
        Self { angular_points: 2 * self.angular_points, radial_points: 2 * self.radial_points, ..*self }
    }
}

/// Local matrices of one ordered element pair for a unit-coefficient shape.
///
/// Rows index test functions and columns trial functions: the three hats of
/// `E1` followed by the three hats of `E2` (just three when `E1 = E2`). With
/// `gamma_12` the kernel seen from `E1` and `gamma_21` from `E2`, the pair
/// contributes `c_12 * first - c_21 * second`, or `c * combined` when both
/// pieces coincide.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMatrices {
    pub n: usize,
    pub first: [f64; 36],
    pub second: [f64; 36],
    pub combined: [f64; 36],
}

impl LocalMatrices {
    fn zero(n: usize) -> Self {
        Self { n, first: [0.0; 36], second: [0.0; 36], combined: [0.0; 36] }
    }
}

fn lattice_triangle(t: usize, i: i64, j: i64, h: f64) -> [Point; 3] {
    let p = |a: i64, b: i64| Point::new(a as f64 * h, b as f64 * h);
    if t == 0 {
        [p(i, j), p(i + 1, j), p(i + 1, j + 1)]
    } else {
        [p(i, j), p(i + 1, j + 1), p(i, j + 1)]
    }
}

/// Integrates element pairs of a structured mesh with spacing `h`.
#[derive(Clone, Debug)]
pub struct PairIntegrator {
    h: f64,
    quad: QuadratureConfig,
    angular: GaussLegendre,
    radial: GaussLegendre,
    tau: [f64; 4],
    /// Inverse Vandermonde matrix of `tau`, row-major.
    vinv: [f64; 16],
}

impl PairIntegrator {
    pub fn new(h: f64, quad: QuadratureConfig) -> Result<Self> {
        quad.validate()?;
        let tau: [f64; 4] =
            core::array::from_fn(|i| 0.5 * (1.0 - (core::f64::consts::PI * (2.0 * i as f64 + 1.0) / 8.0).cos()));
        let mut v = DenseMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                v[(i, j)] = tau[i].powi(j as i32);
            }
        }
        let lu = LuFactor::new(&v)?;
        let mut vinv = [0.0; 16];
        for c in 0..4 {
            let mut e = [0.0; 4];
            e[c] = 1.0;
            lu.solve_in_place(&mut e);
            for r in 0..4 {
                vinv[r * 4 + c] = e[r];
            }
        }
        Ok(Self {
            h,
            quad,
            angular: GaussLegendre::new(quad.angular_points),
            radial: GaussLegendre::new(quad.radial_points),
            tau,
            vinv,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Local matrices for `E1` of type `t1` in cell `(0, 0)` and `E2` of type `t2`
    /// in cell `(di, dj)`; `None` when the pair does not interact.
    pub fn integrate(&self, t1: usize, t2: usize, di: i64, dj: i64, shape: &Shape) -> Option<LocalMatrices> {
        let h = self.h;
        let e1 = lattice_triangle(t1, 0, 0, h);
        let e2 = lattice_triangle(t2, di, dj, h);
        let identical = t1 == t2 && di == 0 && dj == 0;
        let sampler = Sampler::new(&e1, &e2, identical);
        let delta = shape.delta();
        let eps = self.quad.jump_cutoff * h;
        let mut acc = Accum::new(sampler.n);
        let mut any = false;

        for cj in [dj - 1, dj] {
            for ci in [di - 1, di] {
                for ct in 0..2 {
                    let cell = lattice_triangle(ct, ci, cj, h);
                    let c = crate::geometry::centroid(&cell);
                    if cell_distance(&cell) >= delta || sampler.area(c) <= 1e-14 * h * h {
                        continue;
                    }
                    any = true;
                    self.integrate_cell(&cell, &sampler, shape, delta, eps, &mut acc);
                }
            }
        }
        if !any {
            return None;
        }
        let mut out = LocalMatrices::zero(sampler.n);
        let nn = sampler.n * sampler.n;
        for k in 0..nn {
            out.first[k] = 0.5 * acc.a[k];
            out.second[k] = 0.5 * acc.b[k];
            out.combined[k] = 0.5 * (acc.a[k] - acc.b[k]);
        }
        Some(out)
    }

    fn integrate_cell(
        &self,
        cell: &[Point; 3],
        sampler: &Sampler,
        shape: &Shape,
        delta: f64,
        eps: f64,
        acc: &mut Accum,
    ) {
        let h = self.h;
        let at_origin = cell.iter().position(|p| p.norm() < 1e-9 * h);
        let c = crate::geometry::centroid(cell);
        let refd = c * (1.0 / c.norm());
        let angle = |p: Point| refd.cross(p).atan2(refd.dot(p));

        let mut breaks: Vec<f64> = Vec::with_capacity(12);
        let mut lo_t = f64::INFINITY;
        let mut hi_t = f64::NEG_INFINITY;
        for (k, p) in cell.iter().enumerate() {
            if Some(k) == at_origin {
                continue;
            }
            let a = angle(*p);
            lo_t = lo_t.min(a);
            hi_t = hi_t.max(a);
            breaks.push(a);
        }
        for k in 0..3 {
            let p = cell[k];
            let q = cell[(k + 1) % 3];
            let e = q - p;
            // |p + t e|^2 = delta^2
            let qa = e.dot(e);
            let qb = 2.0 * p.dot(e);
            let qc = p.dot(p) - delta * delta;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc <= 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
                if t > 0.0 && t < 1.0 {
                    breaks.push(angle(p + e * t));
                }
            }
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        let perp = refd.perp();
        let mut ws = [0.0; 10];
        for w in breaks.windows(2) {
            let (a, b) = (w[0].max(lo_t), w[1].min(hi_t));
            if b - a < 1e-14 {
                continue;
            }
            for (theta, wt) in self.angular.mapped(a, b) {
                let dir = refd * theta.cos() + perp * theta.sin();
                let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
                let mut empty = false;
                for k in 0..3 {
                    let p = cell[k];
                    let q = cell[(k + 1) % 3];
                    if at_origin.is_some() && (Some(k) == at_origin || Some((k + 1) % 3) == at_origin) {
                        continue;
                    }
                    let n = (q - p).perp();
                    let ne = n.dot(dir);
                    let np = n.dot(p);
                    if ne > 1e-15 {
                        lo = lo.max(np / ne);
                    } else if ne < -1e-15 {
                        hi = hi.min(np / ne);
                    } else if np > 0.0 {
                        empty = true;
                    }
                }
                hi = hi.min(delta);
                if empty || !(hi > lo) {
                    continue;
                }
                if at_origin.is_some() {
                    // H(r) = r * sum_j q_j (r / hi)^j; integrate monomials in closed form
                    let mut m = [0.0; 4];
                    for (j, mj) in m.iter_mut().enumerate() {
                        *mj = match *shape {
                            Shape::Constant { .. } => hi.powi(3) / (j as f64 + 3.0),
                            Shape::Fractional { s, .. } => {
                                let p = j as f64 + 1.0 - 2.0 * s;
                                if j > 0 || s < 0.5 {
                                    hi.powf(1.0 - 2.0 * s) / p
                                } else if (s - 0.5).abs() < 1e-14 {
                                    (hi / eps).ln()
                                } else {
                                    (eps.powf(1.0 - 2.0 * s) - hi.powf(1.0 - 2.0 * s)) / (2.0 * s - 1.0)
                                }
                            }
                        };
                    }
                    for i in 0..4 {
                        let mut w = 0.0;
                        for j in 0..4 {
                            w += m[j] * self.vinv[j * 4 + i];
                        }
                        let r = self.tau[i] * hi;
                        ws[i] = wt * w / r;
                        sampler.accumulate(dir * r, ws[i], acc);
                    }
                } else {
                    for (r, wr) in self.radial.mapped(lo, hi) {
                        let w = wt * wr * r * shape.radial(r);
                        sampler.accumulate(dir * r, w, acc);
                    }
                }
            }
        }
    }
}

fn cell_distance(cell: &[Point; 3]) -> f64 {
    if crate::geometry::contains(cell, Point::default(), 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|k| crate::geometry::point_segment_distance(Point::default(), cell[k], cell[(k + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

struct Accum {
    a: [f64; 36],
    b: [f64; 36],
}

impl Accum {
    fn new(_n: usize) -> Self {
        Self { a: [0.0; 36], b: [0.0; 36] }
    }
}

/// Evaluates `H(z)` for all local test/trial combinations.
struct Sampler {
    e1: [Point; 3],
    e2: [Point; 3],
    b1: AffineBasis,
    b2: AffineBasis,
    identical: bool,
    n: usize,
}

impl Sampler {
    fn new(e1: &[Point; 3], e2: &[Point; 3], identical: bool) -> Self {
        Self {
            e1: *e1,
            e2: *e2,
            b1: AffineBasis::new(e1),
            b2: AffineBasis::new(e2),
            identical,
            n: if identical { 3 } else { 6 },
        }
    }

    fn overlap(&self, z: Point) -> Polygon {
        let shifted = [self.e2[0] - z, self.e2[1] - z, self.e2[2] - z];
        let mut poly = Polygon::from_triangle(&self.e1);
        poly.clip_triangle(&shifted);
        poly
    }

    fn area(&self, z: Point) -> f64 {
        self.overlap(z).area()
    }

    /// Add `weight * H(z)` to the accumulators, without the factor 1/2.
    fn accumulate(&self, z: Point, weight: f64, acc: &mut Accum) {
        if weight == 0.0 {
            return;
        }
        let poly = self.overlap(z);
        let n = self.n;
        poly.for_each_quadratic_point(|x, w| {
            let a = self.b1.eval(x);
            let b = self.b2.eval(x + z);
            let w = w * weight;
            let mut av = [0.0; 6];
            let mut bv = [0.0; 6];
            if self.identical {
                av[..3].copy_from_slice(&a);
                bv[..3].copy_from_slice(&b);
            } else {
                av[..3].copy_from_slice(&a);
                bv[3..].copy_from_slice(&b);
            }
            let mut d = [0.0; 6];
            for u in 0..n {
                d[u] = av[u] - bv[u];
            }
            for t in 0..n {
                let wa = w * av[t];
                let wb = w * bv[t];
                let row = t * n;
                for u in 0..n {
                    acc.a[row + u] += wa * d[u];
                    acc.b[row + u] += wb * d[u];
                }
            }
        });
    }
}

/// Assembly switches.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AssemblyOptions {
    /// Drop interactions between two points of the interaction layer.
    pub skip_layer_pairs: bool,
}

/// Assembled linear system `A u = b` with `b = f - A_I g`.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    /// Unknown-by-unknown block.
    pub a: CsrMatrix,
    /// Unknown-by-prescribed block.
    pub a_i: CsrMatrix,
    pub f: Vec<f64>,
    /// Prescribed values on DOFs `interior_count..`.
    pub g: Vec<f64>,
    pub b: Vec<f64>,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.a.nrows
    }

    /// `A u - b`.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.a.mul_vec(u);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }

    pub fn residual_norm(&self, u: &[f64]) -> f64 {
        norm2(&self.residual(u))
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Caches local matrices by pair geometry and kernel shape.
struct PairCache {
    reach: i64,
    shapes: Vec<Shape>,
    slots: Vec<Option<Option<Box<LocalMatrices>>>>,
}

impl PairCache {
    fn new(reach: i64) -> Self {
        Self { reach, shapes: Vec::new(), slots: Vec::new() }
    }

    fn shape_index(&mut self, s: &Shape) -> usize {
        if let Some(k) = self.shapes.iter().position(|x| x.key() == s.key()) {
            return k;
        }
        self.shapes.push(*s);
        let side = (2 * self.reach + 1) as usize;
        self.slots.extend((0..4 * side * side).map(|_| None));
        self.shapes.len() - 1
    }

    fn get(
        &mut self,
        integ: &PairIntegrator,
        t1: usize,
        t2: usize,
        di: i64,
        dj: i64,
        shape: &Shape,
    ) -> Option<&LocalMatrices> {
        let si = self.shape_index(shape);
        let side = (2 * self.reach + 1) as usize;
        let idx = ((si * 4 + t1 * 2 + t2) * side + (di + self.reach) as usize) * side + (dj + self.reach) as usize;
        if self.slots[idx].is_none() {
            self.slots[idx] = Some(integ.integrate(t1, t2, di, dj, shape).map(Box::new));
        }
        self.slots[idx].as_ref().unwrap().as_deref()
    }
}

/// The nonlocal bilinear form on all DOFs, rows restricted to unknowns.
///
/// Entry `(k, l)` is `A(phi_l, phi_k)` with
/// `A(u, v) = 1/2 ∬ (v(x) gamma(x,y) - v(y) gamma(y,x)) (u(x) - u(y)) dy dx`,
/// which is the usual symmetric form whenever the kernel is symmetric.
pub fn assemble_operator(
    mesh: &Mesh,
    dofmap: &DofMap,
    spec: &KernelSpec,
    quad: &QuadratureConfig,
    options: AssemblyOptions,
) -> Result<CsrMatrix> {
    if spec.subdomain_count() < mesh.subdomain_count {
        return Err(Error::InvalidKernel(format!(
            "kernel table covers {} subdomains, mesh has {}",
            spec.subdomain_count(),
            mesh.subdomain_count
        )));
    }
    let h = mesh.h;
    let integ = PairIntegrator::new(h, *quad)?;
    let delta = spec.max_delta();
    let reach = (delta / h - 1e-9).ceil() as i64 + 1;
    let mut cache = PairCache::new(reach);

    let n_free = dofmap.interior_count;
    let nx = mesh.nx as i64;
    let ny = mesh.ny as i64;
    let stencil = reach + 1;
    let mut columns = Vec::with_capacity(n_free);
    for k in 0..n_free {
        let v = dofmap.dofs[k].vertex;
        let (vi, vj) = ((v % (mesh.nx + 1)) as i64, (v / (mesh.nx + 1)) as i64);
        let mut cols = Vec::new();
        for j in (vj - stencil).max(0)..=(vj + stencil).min(ny) {
            for i in (vi - stencil).max(0)..=(vi + stencil).min(nx) {
                cols.extend_from_slice(&dofmap.vertex_to_dofs[(j * (nx + 1) + i) as usize]);
            }
        }
        columns.push(cols);
    }
    let mut acc = PatternAccumulator::new(dofmap.len(), columns);

    let has_free: Vec<bool> = dofmap.element_dofs.iter().map(|d| d.iter().any(|&x| dofmap.is_free(x))).collect();

    for e1 in 0..mesh.element_count() {
        let (i1, j1, t1) = mesh.element_cell(e1);
        let r1 = mesh.element_region[e1];
        for dj in -reach..=reach {
            let j2 = j1 as i64 + dj;
            if j2 < 0 || j2 >= ny {
                continue;
            }
            for di in -reach..=reach {
                let i2 = i1 as i64 + di;
                if i2 < 0 || i2 >= nx {
                    continue;
                }
                for t2 in 0..2 {
                    let e2 = mesh.element_at(i2 as usize, j2 as usize, t2);
                    if !has_free[e1] && !has_free[e2] {
                        continue;
                    }
                    let r2 = mesh.element_region[e2];
                    if options.skip_layer_pairs && r1 == Region::Interaction && r2 == Region::Interaction {
                        continue;
                    }
                    let p12 = *spec.piece(r1, r2)?;
                    let p21 = *spec.piece(r2, r1)?;
                    let identical = e1 == e2;
                    let n = if identical { 3 } else { 6 };
                    let mut local = [0.0; 36];
                    if p12 == p21 {
                        let c = p12.coefficient();
                        if c == 0.0 {
                            continue;
                        }
                        match cache.get(&integ, t1, t2, di, dj, &p12.shape()) {
                            Some(m) => {
                                for k in 0..n * n {
                                    local[k] = c * m.combined[k];
                                }
                            }
                            None => continue,
                        }
                    } else {
                        let mut touched = false;
                        if let Some(m) = cache.get(&integ, t1, t2, di, dj, &p12.shape()) {
                            touched = true;
                            for k in 0..n * n {
                                local[k] += p12.coefficient() * m.first[k];
                            }
                        }
                        if let Some(m) = cache.get(&integ, t1, t2, di, dj, &p21.shape()) {
                            touched = true;
                            for k in 0..n * n {
                                local[k] -= p21.coefficient() * m.second[k];
                            }
                        }
                        if !touched {
                            continue;
                        }
                    }
                    let mut dofs = [0usize; 6];
                    dofs[..3].copy_from_slice(&dofmap.element_dofs[e1]);
                    if !identical {
                        dofs[3..].copy_from_slice(&dofmap.element_dofs[e2]);
                    }
                    for t in 0..n {
                        let row = dofs[t];
                        if !dofmap.is_free(row) {
                            continue;
                        }
                        for u in 0..n {
                            let v = local[t * n + u];
                            if v != 0.0 {
                                acc.add(row, dofs[u], v);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(acc.finish())
}

/// Local matrix of the element pair `(e1, e2)` of `mesh` with the kernel
/// pieces seen from each side, in the local hat ordering of [`LocalMatrices`].
pub fn integrate_element_pair(
    mesh: &Mesh,
    e1: usize,
    e2: usize,
    spec: &KernelSpec,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let integ = PairIntegrator::new(mesh.h, *quad)?;
    let (i1, j1, t1) = mesh.element_cell(e1);
    let (i2, j2, t2) = mesh.element_cell(e2);
    let (di, dj) = (i2 as i64 - i1 as i64, j2 as i64 - j1 as i64);
    let r1 = mesh.element_region[e1];
    let r2 = mesh.element_region[e2];
    let p12 = *spec.piece(r1, r2)?;
    let p21 = *spec.piece(r2, r1)?;
    let n = if e1 == e2 { 3 } else { 6 };
    let mut out = vec![0.0; n * n];
    if p12 == p21 {
        if let Some(m) = integ.integrate(t1, t2, di, dj, &p12.shape()) {
            for k in 0..n * n {
                out[k] = p12.coefficient() * m.combined[k];
            }
        }
    } else {
        if let Some(m) = integ.integrate(t1, t2, di, dj, &p12.shape()) {
            for k in 0..n * n {
                out[k] += p12.coefficient() * m.first[k];
            }
        }
        if let Some(m) = integ.integrate(t1, t2, di, dj, &p21.shape()) {
            for k in 0..n * n {
                out[k] -= p21.coefficient() * m.second[k];
            }
        }
    }
    Ok(out)
}

/// Split the unknown rows of a full operator into the unknown and prescribed column blocks.
fn split_columns(full: &CsrMatrix, n_free: usize) -> (CsrMatrix, CsrMatrix) {
    let n_bnd = full.ncols - n_free;
    let mut ta = Vec::new();
    let mut ti = Vec::new();
    for i in 0..full.nrows {
        for (j, v) in full.row(i) {
            if j < n_free {
                ta.push((i, j, v));
            } else {
                ti.push((i, j - n_free, v));
            }
        }
    }
    (CsrMatrix::from_triplets(full.nrows, n_free, &ta), CsrMatrix::from_triplets(full.nrows, n_bnd, &ti))
}

/// `int_Omega f phi_k` over the unknowns; `forcing(x, subdomain)`.
pub fn load_vector(mesh: &Mesh, dofmap: &DofMap, forcing: &dyn Fn(Point, usize) -> f64) -> Vec<f64> {
    let mut f = vec![0.0; dofmap.interior_count];
    for e in 0..mesh.element_count() {
        let Region::Subdomain(s) = mesh.element_region[e] else { continue };
        let pts = mesh.element_points(e);
        let basis = AffineBasis::new(&pts);
        for (q, w) in triangle_points(&pts) {
            let fv = forcing(q, s);
            if fv == 0.0 {
                continue;
            }
            let vals = basis.eval(q);
            for (a, &d) in dofmap.element_dofs[e].iter().enumerate() {
                if dofmap.is_free(d) {
                    f[d] += w * fv * vals[a];
                }
            }
        }
    }
    f
}

/// Assemble the Dirichlet problem: `A u = f - A_I g` with `g` interpolated at
/// the prescribed vertices.
pub fn assemble_dirichlet(
    mesh: &Mesh,
    dofmap: &DofMap,
    spec: &KernelSpec,
    quad: &QuadratureConfig,
    forcing: &dyn Fn(Point, usize) -> f64,
    boundary: &dyn Fn(Point) -> f64,
) -> Result<SparseSystem> {
    if dofmap.treatment != BoundaryTreatment::Dirichlet {
        return Err(Error::InvalidConfig("Dirichlet assembly needs a Dirichlet DOF map".into()));
    }
    let full = assemble_operator(mesh, dofmap, spec, quad, AssemblyOptions::default())?;
    let n_free = dofmap.interior_count;
    let (a, a_i) = split_columns(&full, n_free);
    let g: Vec<f64> = dofmap.boundary_dof_range().map(|d| boundary(mesh.vertices[dofmap.dofs[d].vertex])).collect();
    let f = load_vector(mesh, dofmap, forcing);
    let ag = a_i.mul_vec(&g);
    let b = f.iter().zip(&ag).map(|(x, y)| x - y).collect();
    Ok(SparseSystem { a, a_i, f, g, b })
}

/// Assemble the Neumann problem: nonlocal form plus `int_Omega kappa u v`,
/// right-hand side `int_Omega f v + int_I g^N v`.
///
/// `kappa[i - 1]` and `neumann_data[i - 1]` belong to subdomain / boundary part `i`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_neumann(
    mesh: &Mesh,
    dofmap: &DofMap,
    spec: &KernelSpec,
    quad: &QuadratureConfig,
    kappa: &[f64],
    forcing: &dyn Fn(Point, usize) -> f64,
    neumann_data: &[f64],
    options: AssemblyOptions,
) -> Result<SparseSystem> {
    if dofmap.treatment != BoundaryTreatment::Neumann {
        return Err(Error::InvalidConfig("Neumann assembly needs a Neumann DOF map".into()));
    }
    if kappa.len() < mesh.subdomain_count {
        return Err(Error::InvalidConfig("one kappa value per subdomain required".into()));
    }
    if let Some(k) = kappa.iter().find(|k| !(**k > 0.0)) {
        return Err(Error::InvalidConfig(format!("kappa must be positive, got {k}")));
    }
    let full = assemble_operator(mesh, dofmap, spec, quad, options)?;
    let n = dofmap.interior_count;
    let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(full.nnz() + 9 * mesh.element_count());
    for i in 0..n {
        t.extend(full.row(i).map(|(j, v)| (i, j, v)));
    }
    let mut rhs = load_vector(mesh, dofmap, forcing);
    for e in 0..mesh.element_count() {
        let pts = mesh.element_points(e);
        let area = crate::geometry::signed_area(pts[0], pts[1], pts[2]);
        let dofs = dofmap.element_dofs[e];
        match mesh.element_region[e] {
            Region::Subdomain(s) => {
                let k = kappa[s - 1];
                for a in 0..3 {
                    for b in 0..3 {
                        let m = if a == b { area / 6.0 } else { area / 12.0 };
                        t.push((dofs[a], dofs[b], k * m));
                    }
                }
            }
            Region::Interaction => {
                let part = mesh.element_boundary_part[e].unwrap_or(0);
                let gn = if part >= 1 { neumann_data.get(part - 1).copied().unwrap_or(0.0) } else { 0.0 };
                if gn != 0.0 {
                    for &d in &dofs {
                        rhs[d] += gn * area / 3.0;
                    }
                }
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &t);
    Ok(SparseSystem { a, a_i: CsrMatrix::zeros(n, 0), f: rhs.clone(), g: Vec::new(), b: rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{four_over_pi_delta4, scaling_constant, Piece};
    use crate::mesh::{build_dof_map, build_mesh, DomainLayout, Rect};

    fn shape_const(delta: f64) -> Shape {
        Shape::Constant { delta }
    }

    #[test]
    fn far_pairs_vanish() {
        let integ = PairIntegrator::new(0.1, QuadratureConfig::default()).unwrap();
        assert!(integ.integrate(0, 0, 5, 0, &shape_const(0.1)).is_none());
        assert!(integ.integrate(0, 1, 2, 2, &shape_const(0.1)).is_none());
        assert!(integ.integrate(0, 1, 1, 1, &shape_const(0.1)).is_some());
    }

    #[test]
    fn identical_pair_matches_closed_form_for_constant_kernel() {
        let h = 0.1;
        let q = QuadratureConfig::default();
        let a = PairIntegrator::new(h, q).unwrap().integrate(0, 0, 0, 0, &shape_const(0.5)).unwrap();
        let b = PairIntegrator::new(h, q.refined()).unwrap().integrate(0, 0, 0, 0, &shape_const(0.5)).unwrap();
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| a.combined[i * 3 + j]).sum();
            assert!(row.abs() < 1e-15);
            for j in 0..3 {
                assert!((a.combined[i * 3 + j] - a.combined[j * 3 + i]).abs() < 1e-15);
                assert!((a.combined[i * 3 + j] - b.combined[i * 3 + j]).abs() <= 1e-8 * a.combined[0].abs());
            }
        }
        // whole element inside the horizon: a_ab = |E| int psi_a psi_b - int psi_a int psi_b
        let area = 0.5 * h * h;
        let mass = |i: usize, j: usize| if i == j { area / 6.0 } else { area / 12.0 };
        for i in 0..3 {
            for j in 0..3 {
                let exact = area * mass(i, j) - (area / 3.0) * (area / 3.0);
                assert!((a.combined[i * 3 + j] - exact).abs() < 1e-10 * exact.abs(), "{i}{j}");
            }
        }
    }

    #[test]
    fn dirichlet_operator_annihilates_constants() {
        let layout = DomainLayout::three_region(0.5, 0.5);
        let mesh = build_mesh(&layout, 0.125, 0.2).unwrap();
        let dm = build_dof_map(&mesh, BoundaryTreatment::Dirichlet).unwrap();
        let c = scaling_constant(0.5, 0.2).unwrap();
        let spec = KernelSpec::uniform(3, Piece::fractional(c, 0.5, 0.2).unwrap());
        let full =
            assemble_operator(&mesh, &dm, &spec, &QuadratureConfig::default(), AssemblyOptions::default()).unwrap();
        for i in 0..full.nrows {
            let s: f64 = full.row(i).map(|(_, v)| v).sum();
            let abs: f64 = full.row(i).map(|(_, v)| v.abs()).sum();
            assert!(s.abs() <= 1e-10 * abs, "row {i}: {s} vs {abs}");
        }
        let n = dm.interior_count;
        let free: Vec<usize> = (0..n).collect();
        let a = full.submatrix(&free, &free);
        assert!(a.asymmetry() <= 1e-12 * a.max_abs());
    }

    #[test]
    fn constant_kernel_whole_mesh_symmetry() {
        let mesh = build_mesh(&DomainLayout::single(Rect::UNIT), 0.25, 0.3).unwrap();
        let dm = build_dof_map(&mesh, BoundaryTreatment::Dirichlet).unwrap();
        let spec = KernelSpec::uniform(1, Piece::constant(four_over_pi_delta4(0.3).unwrap(), 0.3).unwrap());
        let sys = assemble_dirichlet(&mesh, &dm, &spec, &QuadratureConfig::default(), &|_, _| 1.0, &|_| 0.0).unwrap();
        assert!(sys.a.asymmetry() <= 1e-10 * sys.a.max_abs());
        let ev = sys.a.to_dense().symmetric_eigenvalues();
        assert!(ev[0] > 0.0);
    }
}
