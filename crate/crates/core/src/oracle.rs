//! Brute-force dense references for small problems.
//!
//! Assembly here does not reuse the production pair integrator and knows
//! nothing about the grid structure. Every element pair within the horizon
//! is integrated in the difference variable `z = y - x`: the overlap
//! `E1 ∩ (E2 - z)` is clipped directly and integrated with a fan of
//! degree-5 triangle rules, and the `z` integral is done in polar
//! coordinates with angular breakpoints at every intersection of the lines
//! where the overlap changes shape and radial breakpoints at every crossing
//! of those lines.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly::{QuadratureConfig, SparseSystem};
use crate::dense::{DenseMatrix, LuFactor};
use crate::error::{Error, Result};
use crate::geometry::{signed_area, AffineBasis, Point};
use crate::kernel::{KernelSpec, Piece, Profile};
use crate::mesh::{BoundaryTreatment, Dof, DofMap, Mesh, Region};
use crate::quadrature::{triangle_points, GaussLegendre};
use crate::schwarz::{BlockPartition, Variant};

/// Largest system the oracle will build.
pub const ORACLE_LIMIT: usize = 5000;

/// Dense counterpart of [`SparseSystem`].
#[derive(Clone, Debug)]
pub struct DenseSystem {
    /// Unknown-by-unknown matrix.
    pub matrix: DenseMatrix,
    /// Unknown-by-prescribed coupling.
    pub coupling: DenseMatrix,
    pub rhs: Vec<f64>,
    pub labels: Vec<Dof>,
}

impl DenseSystem {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Dense copy of a sparse system.
    pub fn from_sparse(system: &SparseSystem, dofmap: &DofMap) -> Result<Self> {
        check_size(system.dim())?;
        Ok(Self {
            matrix: system.a.to_dense(),
            coupling: system.a_i.to_dense(),
            rhs: system.b.clone(),
            labels: dofmap.dofs.clone(),
        })
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > ORACLE_LIMIT {
        return Err(Error::TooLarge { size: n, limit: ORACLE_LIMIT });
    }
    Ok(())
}

/// Right-hand side data for [`dense_assemble`].
pub enum DenseProblem<'a> {
    /// `f` per subdomain and prescribed layer values.
    Dirichlet { forcing: &'a dyn Fn(Point, usize) -> f64, boundary: &'a dyn Fn(Point) -> f64 },
    /// Reaction coefficients per subdomain, forcing, and flux data per boundary part.
    Neumann { kappa: &'a [f64], forcing: &'a dyn Fn(Point, usize) -> f64, neumann_data: &'a [f64] },
}

/// Oracle accuracy settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    /// Gauss points per angular wedge.
    pub angular_points: usize,
    /// Gauss points per radial piece away from the origin.
    pub radial_points: usize,
}

impl OracleConfig {
    /// Four times the production resolution.
    pub fn refined(quad: &QuadratureConfig) -> Self {
        Self { angular_points: 4 * quad.angular_points, radial_points: 4 * quad.radial_points }
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self::refined(&QuadratureConfig::default())
    }
}

/// Assemble the dense system by brute force over all element pairs.
///
/// Handles constant kernels and fractional kernels with `s < 1/2`; for
/// `s >= 1/2` single pair integrals diverge and an error is returned.
pub fn dense_assemble(
    mesh: &Mesh,
    dofmap: &DofMap,
    spec: &KernelSpec,
    config: &OracleConfig,
    problem: &DenseProblem,
) -> Result<DenseSystem> {
    let n = dofmap.interior_count;
    check_size(n)?;
    if spec.subdomain_count() < mesh.subdomain_count {
        return Err(Error::InvalidKernel("kernel table is smaller than the layout".into()));
    }
    if config.angular_points == 0 || config.radial_points == 0 {
        return Err(Error::InvalidConfig("oracle point counts must be positive".into()));
    }
    let total = dofmap.len();
    let mut full = DenseMatrix::zeros(total, total);
    let ang = GaussLegendre::new(config.angular_points);
    let rad = GaussLegendre::new(config.radial_points);
    let ne = mesh.element_count();
    for e1 in 0..ne {
        let p1 = mesh.element_points(e1);
        let r1 = mesh.element_region[e1];
        for e2 in 0..ne {
            let p2 = mesh.element_points(e2);
            let r2 = mesh.element_region[e2];
            let p12 = spec.piece(r1, r2)?;
            let p21 = spec.piece(r2, r1)?;
            let gap = triangle_distance(&p1, &p2);
            if gap >= p12.delta.max(p21.delta) {
                continue;
            }
            let pair = Pair::new(p1, p2, e1 == e2);
            let nl = pair.n;
            let mut local = [0.0; 36];
            if p12 == p21 {
                let m = pair.integrate(p12, Mode::Combined, &ang, &rad)?;
                local[..nl * nl].copy_from_slice(&m[..nl * nl]);
            } else {
                let a = pair.integrate(p12, Mode::First, &ang, &rad)?;
                let b = pair.integrate(p21, Mode::Second, &ang, &rad)?;
                for k in 0..nl * nl {
                    local[k] = a[k] - b[k];
                }
            }
            let mut dofs = [0usize; 6];
            dofs[..3].copy_from_slice(&dofmap.element_dofs[e1]);
            if nl == 6 {
                dofs[3..].copy_from_slice(&dofmap.element_dofs[e2]);
            }
            for t in 0..nl {
                for u in 0..nl {
                    full[(dofs[t], dofs[u])] += local[t * nl + u];
                }
            }
        }
    }

    let free: Vec<usize> = (0..n).collect();
    let fixed: Vec<usize> = (n..total).collect();
    let mut matrix = full.select(&free, &free);
    let coupling = full.select(&free, &fixed);
    let mut rhs = vec![0.0; n];
    let forcing = match problem {
        DenseProblem::Dirichlet { forcing, .. } | DenseProblem::Neumann { forcing, .. } => *forcing,
    };
    if matches!(problem, DenseProblem::Neumann { .. }) != (dofmap.treatment == BoundaryTreatment::Neumann) {
        return Err(Error::InvalidConfig("problem type and DOF map disagree".into()));
    }
    for e in 0..ne {
        let pts = mesh.element_points(e);
        let basis = AffineBasis::new(&pts);
        let dofs = dofmap.element_dofs[e];
        match mesh.element_region[e] {
            Region::Subdomain(s) => {
                for (q, w) in triangle_points(&pts) {
                    let v = basis.eval(q);
                    let fv = forcing(q, s);
                    for a in 0..3 {
                        if dofs[a] < n {
                            rhs[dofs[a]] += w * fv * v[a];
                        }
                    }
                }
                if let DenseProblem::Neumann { kappa, .. } = problem {
                    let k = *kappa
                        .get(s - 1)
                        .ok_or_else(|| Error::InvalidConfig("one kappa value per subdomain required".into()))?;
                    // P1 mass matrix by quadrature
                    for (q, w) in triangle_points(&pts) {
                        let v = basis.eval(q);
                        for a in 0..3 {
                            for b in 0..3 {
                                matrix[(dofs[a], dofs[b])] += k * w * v[a] * v[b];
                            }
                        }
                    }
                }
            }
            Region::Interaction => {
                if let DenseProblem::Neumann { neumann_data, .. } = problem {
                    let part = mesh.element_boundary_part[e].unwrap_or(0);
                    let g = if part >= 1 { neumann_data.get(part - 1).copied().unwrap_or(0.0) } else { 0.0 };
                    for (q, w) in triangle_points(&pts) {
                        let v = basis.eval(q);
                        for a in 0..3 {
                            if dofs[a] < n {
                                rhs[dofs[a]] += w * g * v[a];
                            }
                        }
                    }
                }
            }
        }
    }
    if let DenseProblem::Dirichlet { boundary, .. } = problem {
        let g: Vec<f64> = fixed.iter().map(|&d| boundary(mesh.vertices[dofmap.dofs[d].vertex])).collect();
        let cg = coupling.mul_vec(&g);
        for (r, v) in rhs.iter_mut().zip(cg) {
            *r -= v;
        }
    }
    Ok(DenseSystem { matrix, coupling, rhs, labels: dofmap.dofs.clone() })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// `(v(x) - v(y)) (u(x) - u(y))`
    Combined,
    /// `v(x) (u(x) - u(y))`
    First,
    /// `v(y) (u(x) - u(y))`
    Second,
}

/// A line `n . z = c` in the difference plane.
#[derive(Clone, Copy)]
struct Line {
    n: Point,
    c: f64,
}

struct Pair {
    e1: [Point; 3],
    e2: [Point; 3],
    b1: AffineBasis,
    b2: AffineBasis,
    identical: bool,
    n: usize,
    lines: Vec<Line>,
}

impl Pair {
    fn new(e1: [Point; 3], e2: [Point; 3], identical: bool) -> Self {
        // the overlap changes shape when a vertex of one triangle crosses an edge line of the other
        let mut lines: Vec<Line> = Vec::new();
        let mut push = |n: Point, c: f64| {
            let s = n.norm();
            let (n, c) = (n * (1.0 / s), c / s);
            if !lines.iter().any(|l| {
                ((l.n - n).norm() < 1e-12 && (l.c - c).abs() < 1e-12)
                    || ((l.n + n).norm() < 1e-12 && (l.c + c).abs() < 1e-12)
            }) {
                lines.push(Line { n, c });
            }
        };
        for i in 0..3 {
            let (a, b) = (e1[i], e1[(i + 1) % 3]);
            let n = (b - a).perp();
            for v in &e2 {
                push(n, n.dot(*v - a));
            }
            let (a, b) = (e2[i], e2[(i + 1) % 3]);
            let n = (b - a).perp();
            for v in &e1 {
                push(n, n.dot(a - *v));
            }
        }
        Self {
            e1,
            e2,
            b1: AffineBasis::new(&e1),
            b2: AffineBasis::new(&e2),
            identical,
            n: if identical { 3 } else { 6 },
            lines,
        }
    }

    /// `H(z)` for all local index pairs, added to `out` with weight `w`.
    fn accumulate(&self, z: Point, w: f64, mode: Mode, out: &mut [f64; 36]) {
        let poly = clip(&self.e1, &[self.e2[0] - z, self.e2[1] - z, self.e2[2] - z]);
        if poly.len() < 3 {
            return;
        }
        let n = self.n;
        for k in 1..poly.len() - 1 {
            let t = [poly[0], poly[k], poly[k + 1]];
            if signed_area(t[0], t[1], t[2]) <= 0.0 {
                continue;
            }
            for (x, wq) in triangle_points(&t) {
                let a = self.b1.eval(x);
                let b = self.b2.eval(x + z);
                let mut av = [0.0; 6];
                let mut bv = [0.0; 6];
                av[..3].copy_from_slice(&a);
                if self.identical {
                    bv[..3].copy_from_slice(&b);
                } else {
                    bv[3..].copy_from_slice(&b);
                }
                let ww = w * wq;
                for t in 0..n {
                    let test = match mode {
                        Mode::Combined => av[t] - bv[t],
                        Mode::First => av[t],
                        Mode::Second => bv[t],
                    };
                    if test == 0.0 {
                        continue;
                    }
                    for u in 0..n {
                        out[t * n + u] += ww * test * (av[u] - bv[u]);
                    }
                }
            }
        }
    }

    /// `1/2 int gamma(|z|) H(z) dz` in polar coordinates.
    fn integrate(&self, piece: &Piece, mode: Mode, ang: &GaussLegendre, rad: &GaussLegendre) -> Result<[f64; 36]> {
        let delta = piece.delta;
        let coef = piece.coefficient();
        let mut out = [0.0; 36];
        if coef == 0.0 {
            return Ok(out);
        }
        let mut angles: Vec<f64> = vec![-PI, PI];
        let mut add_angle = |p: Point| {
            if p.norm() > 1e-14 {
                angles.push(p.y.atan2(p.x));
            }
        };
        for (i, l) in self.lines.iter().enumerate() {
            if l.c.abs() < 1e-14 {
                // through the origin: both directions along the line
                add_angle(l.n.perp());
                add_angle(-l.n.perp());
            }
            // circle crossings: z = c n + t n_perp, |z| = delta
            let t2 = delta * delta - l.c * l.c;
            if t2 > 0.0 {
                let t = t2.sqrt();
                add_angle(l.n * l.c + l.n.perp() * t);
                add_angle(l.n * l.c - l.n.perp() * t);
            }
            for m in &self.lines[i + 1..] {
                let det = l.n.cross(m.n);
                if det.abs() < 1e-12 {
                    continue;
                }
                let p = Point::new((l.c * m.n.y - m.c * l.n.y) / det, (l.n.x * m.c - m.n.x * l.c) / det);
                if p.norm() < delta {
                    add_angle(p);
                }
            }
        }
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        let mut cuts: Vec<f64> = Vec::new();
        for w in angles.windows(2) {
            if w[1] - w[0] < 1e-14 {
                continue;
            }
            for (theta, wt) in ang.mapped(w[0], w[1]) {
                let e = Point::new(theta.cos(), theta.sin());
                cuts.clear();
                cuts.push(0.0);
                for l in &self.lines {
                    let ne = l.n.dot(e);
                    if ne.abs() > 1e-15 {
                        let r = l.c / ne;
                        if r > 0.0 && r < delta {
                            cuts.push(r);
                        }
                    }
                }
                cuts.push(delta);
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                for seg in cuts.windows(2) {
                    let (lo, hi) = (seg[0], seg[1]);
                    if hi - lo < 1e-15 {
                        continue;
                    }
                    let mid = e * (0.5 * (lo + hi));
                    let probe = clip(&self.e1, &[self.e2[0] - mid, self.e2[1] - mid, self.e2[2] - mid]);
                    if probe.len() < 3 {
                        continue;
                    }
                    match piece.profile {
                        Profile::Constant(_) => {
                            for (r, wr) in rad.mapped(lo, hi) {
                                self.accumulate(e * r, 0.5 * coef * wt * wr * r, mode, &mut out);
                            }
                        }
                        Profile::Fractional { s, .. } if lo > 0.0 => {
                            for (r, wr) in rad.mapped(lo, hi) {
                                self.accumulate(e * r, 0.5 * coef * wt * wr * r.powf(-1.0 - 2.0 * s), mode, &mut out);
                            }
                        }
                        Profile::Fractional { s, .. } => {
                            if s >= 0.5 {
                                return Err(Error::InvalidKernel(format!(
                                    "the brute-force integrator needs s < 1/2 (got {s})"
                                )));
                            }
                            // H(r e) = r p(r) with cubic p on [0, hi]; interpolate at four nodes
                            let nodes = [0.2, 0.45, 0.7, 0.95];
                            let vand = DenseMatrix::from_rows(&[
                                &[1.0, nodes[0], nodes[0].powi(2), nodes[0].powi(3)],
                                &[1.0, nodes[1], nodes[1].powi(2), nodes[1].powi(3)],
                                &[1.0, nodes[2], nodes[2].powi(2), nodes[2].powi(3)],
                                &[1.0, nodes[3], nodes[3].powi(2), nodes[3].powi(3)],
                            ]);
                            let lu = LuFactor::new(&vand.transpose())?;
                            // moments of r^{j+1} r^{-1-2s} over [0, hi] in the scaled variable
                            let mom: Vec<f64> =
                                (0..4).map(|j| hi.powf(1.0 - 2.0 * s) / (j as f64 + 1.0 - 2.0 * s)).collect();
                            // weights w_i with sum_i w_i tau_i^j = mom_j
                            let w = lu.solve(&mom);
                            for (tau, wi) in nodes.iter().zip(w) {
                                let r = tau * hi;
                                self.accumulate(e * r, 0.5 * coef * wt * wi / r, mode, &mut out);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Sutherland-Hodgman clip of triangle `a` against counter-clockwise triangle `b`.
fn clip(a: &[Point; 3], b: &[Point; 3]) -> Vec<Point> {
    let mut poly: Vec<Point> = a.to_vec();
    for i in 0..3 {
        let (p, q) = (b[i], b[(i + 1) % 3]);
        let d = q - p;
        let side = |x: Point| d.cross(x - p);
        let mut next = Vec::with_capacity(poly.len() + 2);
        for k in 0..poly.len() {
            let cur = poly[k];
            let prev = poly[(k + poly.len() - 1) % poly.len()];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    next.push(prev + (cur - prev) * (sp / (sp - sc)));
                }
                next.push(cur);
            } else if sp >= 0.0 {
                next.push(prev + (cur - prev) * (sp / (sp - sc)));
            }
        }
        poly = next;
        if poly.len() < 3 {
            break;
        }
    }
    poly
}

/// Distance between two triangles (zero when they overlap or touch).
fn triangle_distance(a: &[Point; 3], b: &[Point; 3]) -> f64 {
    if clip(a, b).len() >= 3 {
        return 0.0;
    }
    let seg = |p: Point, s: Point, t: Point| {
        let e = t - s;
        let l = e.dot(e);
        let u = if l > 0.0 { ((p - s).dot(e) / l).clamp(0.0, 1.0) } else { 0.0 };
        (p - (s + e * u)).norm()
    };
    let mut d = f64::INFINITY;
    for i in 0..3 {
        for j in 0..3 {
            d = d.min(seg(a[i], b[j], b[(j + 1) % 3]));
            d = d.min(seg(b[j], a[i], a[(i + 1) % 3]));
        }
    }
    d
}

/// Solve the dense system by LU.
pub fn dense_solve(system: &DenseSystem) -> Result<Vec<f64>> {
    Ok(LuFactor::new(&system.matrix)?.solve(&system.rhs))
}

/// `k` textbook block iterations from `u0`; returns `u0, u1, ..., uk`.
pub fn dense_block_iterate(
    system: &DenseSystem,
    partition: &BlockPartition,
    variant: Variant,
    u0: &[f64],
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = system.dim();
    if partition.dim() != n || u0.len() != n {
        return Err(Error::Dimension(format!("system has {n} unknowns")));
    }
    let mut factors = Vec::new();
    for (b, idx) in partition.blocks.iter().enumerate() {
        factors.push(LuFactor::new(&system.matrix.select(idx, idx)).map_err(|e| match e {
            Error::SingularMatrix { pivot, .. } => Error::SingularMatrix { block: b, pivot },
            other => other,
        })?);
    }
    let mut iterates = vec![u0.to_vec()];
    let mut u = u0.to_vec();
    for _ in 0..k {
        let old = u.clone();
        for (b, idx) in partition.blocks.iter().enumerate() {
            let src = match variant {
                Variant::Multiplicative => &u,
                Variant::Additive => &old,
            };
            let mut rhs = Vec::with_capacity(idx.len());
            for &r in idx {
                let mut s = system.rhs[r];
                for c in 0..n {
                    if partition.block_of[c] != b {
                        s -= system.matrix[(r, c)] * src[c];
                    }
                }
                rhs.push(s);
            }
            factors[b].solve_in_place(&mut rhs);
            for (&i, v) in idx.iter().zip(rhs) {
                u[i] = v;
            }
        }
        iterates.push(u.clone());
    }
    Ok(iterates)
}

/// `||A x - b||_2`.
pub fn dense_residual(system: &DenseSystem, x: &[f64]) -> f64 {
    let ax = system.matrix.mul_vec(x);
    ax.iter().zip(&system.rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `||A - B||_F / ||B||_F`.
pub fn relative_frobenius(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let diff: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    (diff / b.frobenius().powi(2)).sqrt()
}
