//! GMRES with block Jacobi / block Gauss-Seidel left preconditioning, and
//! condition number estimates of the preconditioned operator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly::norm2;
use crate::dense::{DenseMatrix, LuFactor};
use crate::error::{Error, Result};
use crate::schwarz::{BlockPartition, IterationTrace};
use crate::sparse::CsrMatrix;

/// Anything that can compute `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreconditionerKind {
    None,
    /// `M = diag(A_11, ..., A_nn)`.
    BlockJacobi,
    /// `M` = block lower triangle of `A`, diagonal included.
    BlockGaussSeidel,
}

/// Factored block preconditioner `M`; `apply` computes `M^-1 v`.
#[derive(Clone, Debug)]
pub struct Preconditioner {
    kind: PreconditionerKind,
    partition: BlockPartition,
    factors: Vec<LuFactor>,
    /// Rows of `A` restricted to strictly lower blocks (for Gauss-Seidel).
    lower: Option<CsrMatrix>,
}

impl Preconditioner {
    pub fn new(kind: PreconditionerKind, a: &CsrMatrix, partition: &BlockPartition) -> Result<Self> {
        if partition.dim() != a.nrows {
            return Err(Error::Dimension(format!(
                "partition covers {} unknowns, matrix has {}",
                partition.dim(),
                a.nrows
            )));
        }
        let mut factors = Vec::new();
        if kind != PreconditionerKind::None {
            for (b, idx) in partition.blocks.iter().enumerate() {
                let lu = LuFactor::new(&a.submatrix(idx, idx).to_dense()).map_err(|e| match e {
                    Error::SingularMatrix { pivot, .. } => Error::SingularMatrix { block: b, pivot },
                    other => other,
                })?;
                factors.push(lu);
            }
        }
        let lower = (kind == PreconditionerKind::BlockGaussSeidel).then(|| {
            let mut t = Vec::new();
            for i in 0..a.nrows {
                let bi = partition.block_of[i];
                t.extend(a.row(i).filter(|&(j, _)| partition.block_of[j] < bi).map(|(j, v)| (i, j, v)));
            }
            CsrMatrix::from_triplets(a.nrows, a.ncols, &t)
        });
        Ok(Self { kind, partition: partition.clone(), factors, lower })
    }

    /// The identity preconditioner.
    pub fn identity(n: usize) -> Self {
        Self { kind: PreconditionerKind::None, partition: BlockPartition::single(n), factors: Vec::new(), lower: None }
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    /// `out = M^-1 v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        match self.kind {
            PreconditionerKind::None => out.copy_from_slice(v),
            PreconditionerKind::BlockJacobi => {
                for (b, idx) in self.partition.blocks.iter().enumerate() {
                    let mut x: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
                    self.factors[b].solve_in_place(&mut x);
                    for (&i, xi) in idx.iter().zip(x) {
                        out[i] = xi;
                    }
                }
            }
            PreconditionerKind::BlockGaussSeidel => {
                let lower = self.lower.as_ref().expect("lower part present");
                for (b, idx) in self.partition.blocks.iter().enumerate() {
                    let mut x: Vec<f64> = idx
                        .iter()
                        .map(|&i| {
                            let mut s = v[i];
                            for (j, a) in lower.row(i) {
                                s -= a * out[j];
                            }
                            s
                        })
                        .collect();
                    self.factors[b].solve_in_place(&mut x);
                    for (&i, xi) in idx.iter().zip(x) {
                        out[i] = xi;
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresConfig {
    /// Stop when `||M^-1 (b - A x)|| <= tol * ||M^-1 b||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Restart length; `None` keeps the full Krylov basis.
    pub restart: Option<usize>,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 1000, restart: None }
    }
}

#[derive(Clone, Debug)]
pub struct GmresResult {
    pub x: Vec<f64>,
    /// Relative preconditioned residuals, entry `k` after `k` iterations.
    pub trace: IterationTrace,
    /// `||b - A x||_2` of the returned iterate.
    pub true_residual: f64,
}

/// Left-preconditioned GMRES with modified Gram-Schmidt and one
/// reorthogonalization pass when cancellation is detected.
pub fn gmres(
    a: &dyn LinearOperator,
    b: &[f64],
    precond: Option<&Preconditioner>,
    x0: Option<&[f64]>,
    config: &GmresConfig,
) -> Result<GmresResult> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Dimension(format!("right-hand side has length {}, expected {n}", b.len())));
    }
    if let Some(p) = precond {
        if p.dim() != n {
            return Err(Error::Dimension("preconditioner size differs from the matrix".into()));
        }
    }
    if !(config.tol > 0.0) || config.restart == Some(0) {
        return Err(Error::InvalidConfig("GMRES needs a positive tolerance and restart length".into()));
    }
    let minv = |v: &[f64], out: &mut [f64]| match precond {
        Some(p) => p.apply(v, out),
        None => out.copy_from_slice(v),
    };
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(_) => return Err(Error::Dimension("initial guess has the wrong length".into())),
        None => vec![0.0; n],
    };
    let mut tmp = vec![0.0; n];
    let mut w = vec![0.0; n];
    minv(b, &mut tmp);
    let bnorm = norm2(&tmp);
    let mut trace = IterationTrace::default();
    let residual_of = |x: &[f64], tmp: &mut [f64], out: &mut [f64]| {
        a.apply(x, tmp);
        for (t, bi) in tmp.iter_mut().zip(b) {
            *t = bi - *t;
        }
        minv(tmp, out);
    };
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        trace.residuals.push(0.0);
        trace.converged = true;
        return Ok(GmresResult { x, trace, true_residual: 0.0 });
    }
    let m = config.restart.unwrap_or(config.max_iter).min(config.max_iter).max(1);
    let mut total = 0usize;
    let mut first = true;
    loop {
        let mut r = vec![0.0; n];
        residual_of(&x, &mut tmp, &mut r);
        let beta = norm2(&r);
        if first {
            trace.residuals.push(beta / bnorm);
            first = false;
        }
        if beta / bnorm <= config.tol {
            trace.converged = true;
            break;
        }
        if total >= config.max_iter {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut done = false;
        for j in 0..m {
            if total >= config.max_iter {
                break;
            }
            a.apply(&basis[j], &mut tmp);
            minv(&tmp, &mut w);
            let wnorm0 = norm2(&w);
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                col[i] = hij;
                axpy(-hij, v, &mut w);
            }
            let mut wnorm = norm2(&w);
            if wnorm < 0.7 * wnorm0 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    col[i] += c;
                    axpy(-c, v, &mut w);
                }
                wnorm = norm2(&w);
            }
            col[j + 1] = wnorm;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let rho = col[j].hypot(col[j + 1]);
            if rho <= f64::EPSILON * wnorm0.max(f64::MIN_POSITIVE) {
                return Err(Error::Breakdown { iteration: total + 1, residual: g[j].abs() / bnorm });
            }
            let (c, s) = (col[j] / rho, col[j + 1] / rho);
            cs.push(c);
            sn.push(s);
            col[j] = rho;
            col[j + 1] = 0.0;
            g.push(-s * g[j]);
            g[j] *= c;
            hess.push(col);
            total += 1;
            let rel = g[j + 1].abs() / bnorm;
            trace.residuals.push(rel);
            trace.iterations = total;
            let invariant = wnorm <= 1e-14 * wnorm0;
            if rel <= config.tol || invariant {
                done = true;
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }
        // back substitution on the triangular factor
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (l, yl) in y.iter().enumerate().skip(i + 1) {
                s -= hess[l][i] * yl;
            }
            y[i] = s / hess[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut x);
        }
        if done {
            trace.converged = true;
            break;
        }
        if total >= config.max_iter {
            break;
        }
    }
    a.apply(&x, &mut tmp);
    let true_residual = norm2(&tmp.iter().zip(b).map(|(ax, bi)| bi - ax).collect::<Vec<_>>());
    Ok(GmresResult { x, trace, true_residual })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateMethod {
    /// All singular values of the dense preconditioned matrix.
    Dense,
    /// Power and inverse power iteration on `B^T B`.
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionEstimate {
    pub value: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub method: EstimateMethod,
    /// Estimated relative error of `value` (zero for the dense method).
    pub relative_error: f64,
}

/// Largest size handled with a dense singular value decomposition.
pub const DENSE_ESTIMATE_LIMIT: usize = 5000;

/// 2-norm condition number of `M^-1 A`.
pub fn condition_estimate(a: &CsrMatrix, precond: &Preconditioner) -> Result<ConditionEstimate> {
    let n = a.nrows;
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if n <= DENSE_ESTIMATE_LIMIT {
        let b = preconditioned_dense(a, precond);
        let sv = b.singular_values();
        let (smax, smin) = (sv[0], sv[n - 1]);
        if !(smin > smax * 1e-15) {
            return Err(Error::SingularMatrix { block: 0, pivot: n - 1 });
        }
        return Ok(ConditionEstimate {
            value: smax / smin,
            sigma_max: smax,
            sigma_min: smin,
            method: EstimateMethod::Dense,
            relative_error: 0.0,
        });
    }
    iterative_estimate(a, precond)
}

/// Dense `M^-1 A`, built column by column.
pub fn preconditioned_dense(a: &CsrMatrix, precond: &Preconditioner) -> DenseMatrix {
    let n = a.nrows;
    let at = a.transpose();
    let mut out = DenseMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    let mut z = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        for (i, v) in at.row(j) {
            col[i] = v;
        }
        precond.apply(&col, &mut z);
        for i in 0..n {
            out[(i, j)] = z[i];
        }
    }
    out
}

/// `B^T v` for `B = M^-1 A`, via GMRES on `M^T` with the exact block structure
/// replaced by an explicit transpose solve.
struct Transposed<'a> {
    at: CsrMatrix,
    mt: CsrMatrix,
    precond: &'a Preconditioner,
}

impl Transposed<'_> {
    fn apply(&self, v: &[f64], tol: f64) -> Result<Vec<f64>> {
        // y = M^-T v solves M^T y = v
        let y = match self.precond.kind() {
            PreconditionerKind::None => v.to_vec(),
            _ => gmres(&self.mt, v, None, None, &GmresConfig { tol, max_iter: 2000, restart: Some(200) })?.x,
        };
        Ok(self.at.mul_vec(&y))
    }
}

fn iterative_estimate(a: &CsrMatrix, precond: &Preconditioner) -> Result<ConditionEstimate> {
    let n = a.nrows;
    let at = a.transpose();
    let mt = explicit_preconditioner(a, precond).transpose();
    let tr = Transposed { at, mt, precond };
    let bapply = |x: &[f64]| {
        let ax = a.mul_vec(x);
        let mut out = vec![0.0; n];
        precond.apply(&ax, &mut out);
        out
    };
    let start: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();

    // largest singular value: power iteration on B^T B
    let mut v = normalized(&start);
    let mut smax = 0.0;
    let mut smax_prev = 0.0;
    for _ in 0..500 {
        let w = tr.apply(&bapply(&v), 1e-12)?;
        let lam = norm2(&w);
        smax_prev = smax;
        smax = lam.sqrt();
        v = normalized(&w);
        if (smax - smax_prev).abs() <= 1e-4 * smax {
            break;
        }
    }
    let err_max = (smax - smax_prev).abs() / smax;

    // smallest singular value: inverse power iteration, (B^T B)^-1 = B^-1 B^-T
    let cfg = GmresConfig { tol: 1e-12, max_iter: 5000, restart: Some(300) };
    let mut v = normalized(&start);
    let mut smin = 0.0;
    let mut smin_prev = 0.0;
    for _ in 0..200 {
        // z = B^-T v  <=>  A^T M^-T z = v  <=>  A^T y = v, z = M^T y
        let y = gmres(&tr.at, &v, None, None, &cfg)?.x;
        let z = tr.mt.mul_vec(&y);
        // w = B^-1 z  <=>  M^-1 A w = z  <=>  A w = M z
        let mz = explicit_preconditioner(a, precond).mul_vec(&z);
        let w = gmres(a, &mz, Some(precond), None, &cfg)?.x;
        let mu = norm2(&w);
        smin_prev = smin;
        smin = 1.0 / mu.sqrt();
        v = normalized(&w);
        if (smin - smin_prev).abs() <= 1e-4 * smin {
            break;
        }
    }
    let err_min = (smin - smin_prev).abs() / smin;
    Ok(ConditionEstimate {
        value: smax / smin,
        sigma_max: smax,
        sigma_min: smin,
        method: EstimateMethod::Iterative,
        relative_error: err_max + err_min,
    })
}

/// The matrix `M` itself (block diagonal or block lower triangle of `A`).
pub fn explicit_preconditioner(a: &CsrMatrix, precond: &Preconditioner) -> CsrMatrix {
    let p = &precond.partition;
    let mut t = Vec::new();
    for i in 0..a.nrows {
        let bi = p.block_of[i];
        for (j, v) in a.row(i) {
            let keep = match precond.kind {
                PreconditionerKind::None => i == j,
                PreconditionerKind::BlockJacobi => p.block_of[j] == bi,
                PreconditionerKind::BlockGaussSeidel => p.block_of[j] <= bi,
            };
            if keep {
                t.push((i, j, if precond.kind == PreconditionerKind::None { 1.0 } else { v }));
            }
        }
        if precond.kind == PreconditionerKind::None && a.get(i, i) == 0.0 {
            t.push((i, i, 1.0));
        }
    }
    CsrMatrix::from_triplets(a.nrows, a.ncols, &t)
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s = norm2(v);
    v.iter().map(|x| x / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, lower: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, lower));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let a = tridiag(30, -2.0);
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x);
        let res = gmres(&a, &b, None, None, &GmresConfig::default()).unwrap();
        assert!(res.trace.converged);
        assert!(res.true_residual < 1e-8);
        for (u, v) in x.iter().zip(&res.x) {
            assert!((u - v).abs() < 1e-8);
        }
        let restarted = gmres(&a, &b, None, None, &GmresConfig { restart: Some(5), ..Default::default() }).unwrap();
        assert!(restarted.trace.converged);
    }

    #[test]
    fn gauss_seidel_on_block_lower_system_takes_one_step() {
        let n = 12;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0 + i as f64));
            for j in 0..i {
                t.push((i, j, 0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let p = BlockPartition::from_blocks(n, vec![(0..4).collect(), (4..9).collect(), (9..12).collect()]).unwrap();
        let m = Preconditioner::new(PreconditionerKind::BlockGaussSeidel, &a, &p).unwrap();
        let b = vec![1.0; n];
        let res = gmres(&a, &b, Some(&m), None, &GmresConfig::default()).unwrap();
        assert_eq!(res.trace.iterations, 1);
        let k = condition_estimate(&a, &m).unwrap();
        assert!((k.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn iterative_estimate_agrees_with_dense() {
        let a = tridiag(40, -1.5);
        let p = BlockPartition::from_blocks(40, vec![(0..20).collect(), (20..40).collect()]).unwrap();
        for kind in [PreconditionerKind::None, PreconditionerKind::BlockJacobi, PreconditionerKind::BlockGaussSeidel] {
            let m = Preconditioner::new(kind, &a, &p).unwrap();
            let d = condition_estimate(&a, &m).unwrap();
            let it = iterative_estimate(&a, &m).unwrap();
            assert!((d.value - it.value).abs() / d.value < 0.05, "{kind:?}: {} vs {}", d.value, it.value);
        }
    }
}
