//! Nonoverlapping Schwarz iterations over the subdomain block partition.
//!
//! The multiplicative method is block Gauss-Seidel and the additive method
//! block Jacobi on `A u = b`, with blocks given by DOF ownership.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly::SparseSystem;
use crate::dense::{DenseMatrix, LuFactor};
use crate::error::{Error, Result};
use crate::krylov::{gmres, GmresConfig};
use crate::mesh::DofMap;
use crate::sparse::CsrMatrix;

/// Disjoint index sets covering all unknowns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    pub blocks: Vec<Vec<usize>>,
    pub block_of: Vec<usize>,
}

impl BlockPartition {
    /// Build from explicit blocks; they must be nonempty, disjoint and cover `0..n`.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; n];
        for (b, idx) in blocks.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::InvalidConfig(format!("block {b} is empty")));
            }
            for &i in idx {
                if i >= n || block_of[i] != usize::MAX {
                    return Err(Error::InvalidConfig(format!("index {i} is out of range or in two blocks")));
                }
                block_of[i] = b;
            }
        }
        if let Some(i) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidConfig(format!("index {i} belongs to no block")));
        }
        Ok(Self { blocks, block_of })
    }

    /// One block holding everything.
    pub fn single(n: usize) -> Self {
        Self { blocks: vec![(0..n).collect()], block_of: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.block_of.len()
    }
}

/// Group the unknowns by owning subdomain.
///
/// Fails when a basis function is supported outside its owner's elements
/// (interfaces not split) or when a subdomain has no unknowns.
pub fn partition_dofs(dofmap: &DofMap) -> Result<BlockPartition> {
    for (e, dofs) in dofmap.element_dofs.iter().enumerate() {
        let Some(owner) = dofmap.element_owner[e] else { continue };
        for &d in dofs {
            if let Some(o) = dofmap.dofs[d].owner {
                if o != owner {
                    return Err(Error::InvalidConfig(format!(
                        "DOF {d} owned by subdomain {o} is supported on element {e} of subdomain {owner}"
                    )));
                }
            }
        }
    }
    let n = dofmap.interior_count;
    let mut blocks = vec![Vec::new(); dofmap.subdomain_count];
    for d in 0..n {
        let o = dofmap.dofs[d].owner.expect("unknowns have owners");
        blocks[o - 1].push(d);
    }
    BlockPartition::from_blocks(n, blocks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Block Gauss-Seidel: blocks solved in order with the newest values.
    Multiplicative,
    /// Block Jacobi: all blocks solved from the previous iterate.
    Additive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerSolver {
    /// Dense LU per block, factored once.
    Direct,
    /// Unpreconditioned GMRES per block solve.
    Gmres,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchwarzConfig {
    pub variant: Variant,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub max_outer: usize,
    pub inner_solver: InnerSolver,
    /// Damping of the additive update, `u + theta (u_new - u)`.
    pub theta: f64,
}

impl Default for SchwarzConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Multiplicative,
            outer_tol: 1e-9,
            inner_tol: 1e-12,
            max_outer: 10_000,
            inner_solver: InnerSolver::Direct,
            theta: 1.0,
        }
    }
}

impl SchwarzConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_tol > 0.0 && self.inner_tol <= self.outer_tol && self.outer_tol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerances must satisfy 0 < inner ({}) <= outer ({}) < 1",
                self.inner_tol, self.outer_tol
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 2.0) {
            return Err(Error::InvalidConfig(format!("theta must lie in (0, 2], got {}", self.theta)));
        }
        Ok(())
    }
}

/// Residual history of an iterative solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    /// `residuals[k]` is the residual after `k` iterations.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Wall time per phase in seconds; filled in by callers that own a clock.
    pub phase_times: Vec<(String, f64)>,
}

impl IterationTrace {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

/// Per-block solvers for the diagonal blocks `A_ii`.
#[derive(Clone, Debug)]
pub struct BlockSolvers {
    kind: InnerSolver,
    factors: Vec<LuFactor>,
    matrices: Vec<CsrMatrix>,
    inner_tol: f64,
}

impl BlockSolvers {
    pub fn new(a: &CsrMatrix, partition: &BlockPartition, kind: InnerSolver, inner_tol: f64) -> Result<Self> {
        let mut factors = Vec::new();
        let mut matrices = Vec::new();
        for (b, idx) in partition.blocks.iter().enumerate() {
            let block = a.submatrix(idx, idx);
            match kind {
                InnerSolver::Direct => {
                    let lu = LuFactor::new(&block.to_dense()).map_err(|e| match e {
                        Error::SingularMatrix { pivot, .. } => Error::SingularMatrix { block: b, pivot },
                        other => other,
                    })?;
                    factors.push(lu);
                }
                InnerSolver::Gmres => matrices.push(block),
            }
        }
        Ok(Self { kind, factors, matrices, inner_tol })
    }

    /// Solve `A_bb x = rhs` in place; `rhs` holds the current block values as a
    /// starting guess for the iterative solver in `guess`.
    pub fn solve(&self, b: usize, rhs: &mut [f64], guess: &[f64]) -> Result<()> {
        match self.kind {
            InnerSolver::Direct => {
                self.factors[b].solve_in_place(rhs);
                Ok(())
            }
            InnerSolver::Gmres => {
                let cfg = GmresConfig { tol: self.inner_tol, max_iter: 10 * rhs.len() + 100, restart: None };
                let res = gmres(&self.matrices[b], rhs, None, Some(guess), &cfg)?;
                rhs.copy_from_slice(&res.x);
                Ok(())
            }
        }
    }
}

/// `b_r - sum_{c not in block} a_rc u_c` for every row `r` of `block`, in column order.
fn block_rhs(a: &CsrMatrix, rhs: &[f64], partition: &BlockPartition, block: usize, u: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for &r in &partition.blocks[block] {
        let mut s = rhs[r];
        for (c, v) in a.row(r) {
            if partition.block_of[c] != block {
                s -= v * u[c];
            }
        }
        out.push(s);
    }
}

/// Run the multiplicative or additive method selected in `config`.
pub fn schwarz(
    system: &SparseSystem,
    partition: &BlockPartition,
    config: &SchwarzConfig,
    u0: Option<&[f64]>,
) -> Result<(Vec<f64>, IterationTrace)> {
    config.validate()?;
    let n = system.dim();
    if partition.dim() != n {
        return Err(Error::Dimension(format!("partition covers {} unknowns, system has {n}", partition.dim())));
    }
    let solvers = BlockSolvers::new(&system.a, partition, config.inner_solver, config.inner_tol)?;
    let mut u = match u0 {
        Some(u0) if u0.len() == n => u0.to_vec(),
        Some(u0) => return Err(Error::Dimension(format!("initial guess has length {}, expected {n}", u0.len()))),
        None => vec![0.0; n],
    };
    let mut trace = IterationTrace::default();
    let r0 = system.residual_norm(&u);
    trace.residuals.push(r0);
    if !r0.is_finite() {
        return Err(Error::Diverged { iteration: 0, residual: r0 });
    }
    if r0 < config.outer_tol {
        trace.converged = true;
        return Ok((u, trace));
    }
    let mut buf = Vec::new();
    let mut grown = 0usize;
    let mut next = vec![0.0; n];
    for k in 1..=config.max_outer {
        match config.variant {
            Variant::Multiplicative => {
                for b in 0..partition.len() {
                    block_rhs(&system.a, &system.b, partition, b, &u, &mut buf);
                    let guess: Vec<f64> = partition.blocks[b].iter().map(|&i| u[i]).collect();
                    solvers.solve(b, &mut buf, &guess)?;
                    for (&i, &x) in partition.blocks[b].iter().zip(&buf) {
                        u[i] = x;
                    }
                }
            }
            Variant::Additive => {
                for b in 0..partition.len() {
                    block_rhs(&system.a, &system.b, partition, b, &u, &mut buf);
                    let guess: Vec<f64> = partition.blocks[b].iter().map(|&i| u[i]).collect();
                    solvers.solve(b, &mut buf, &guess)?;
                    for (&i, &x) in partition.blocks[b].iter().zip(&buf) {
                        next[i] = x;
                    }
                }
                if config.theta == 1.0 {
                    u.copy_from_slice(&next);
                } else {
                    for (ui, ni) in u.iter_mut().zip(&next) {
                        *ui += config.theta * (ni - *ui);
                    }
                }
            }
        }
        let r = system.residual_norm(&u);
        trace.residuals.push(r);
        trace.iterations = k;
        if !r.is_finite() {
            return Err(Error::Diverged { iteration: k, residual: r });
        }
        if r < config.outer_tol {
            trace.converged = true;
            break;
        }
        if r > 10.0 * r0 {
            grown += 1;
            if grown >= 50 {
                return Err(Error::Diverged { iteration: k, residual: r });
            }
        } else {
            grown = 0;
        }
    }
    Ok((u, trace))
}

/// Block Gauss-Seidel iteration.
pub fn multiplicative_schwarz(
    system: &SparseSystem,
    partition: &BlockPartition,
    config: &SchwarzConfig,
    u0: Option<&[f64]>,
) -> Result<(Vec<f64>, IterationTrace)> {
    schwarz(system, partition, &SchwarzConfig { variant: Variant::Multiplicative, ..*config }, u0)
}

/// Block Jacobi iteration.
pub fn additive_schwarz(
    system: &SparseSystem,
    partition: &BlockPartition,
    config: &SchwarzConfig,
    u0: Option<&[f64]>,
) -> Result<(Vec<f64>, IterationTrace)> {
    schwarz(system, partition, &SchwarzConfig { variant: Variant::Additive, ..*config }, u0)
}

/// Least-squares fit of `log10(residual)` against the iteration index:
/// returns `(slope, r_squared)` over the trace entries that are positive.
pub fn log_linear_fit(residuals: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> =
        residuals.iter().enumerate().filter(|(_, r)| **r > 0.0).map(|(k, r)| (k as f64, r.log10())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (0.0, 1.0);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Dense matrix of a system block, used by tests and the oracle.
pub fn dense_block(a: &CsrMatrix, partition: &BlockPartition, i: usize, j: usize) -> DenseMatrix {
    a.submatrix(&partition.blocks[i], &partition.blocks[j]).to_dense()
}
