//! The numerical experiments: kernels, layouts and data of the Dirichlet,
//! Neumann, patch-test and GMRES runs, and the h-convergence study.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use nlschwarz_core::assembly::{assemble_dirichlet, assemble_neumann, AssemblyOptions, QuadratureConfig, SparseSystem};
use nlschwarz_core::fe::{full_vector, interpolate, l2_distance, max_nodal_error, NormDomain};
use nlschwarz_core::geometry::Point;
use nlschwarz_core::kernel::{four_over_pi_delta4, scaling_constant, KernelSpec, Piece};
use nlschwarz_core::krylov::{condition_estimate, gmres, GmresConfig, Preconditioner, PreconditionerKind};
use nlschwarz_core::mesh::{
    build_dof_map, build_mesh, BoundarySplit, BoundaryTreatment, DofMap, DomainLayout, Mesh, Region,
};
use nlschwarz_core::schwarz::{
    partition_dofs, schwarz, BlockPartition, InnerSolver, IterationTrace, SchwarzConfig, Variant,
};

use crate::config::{ExperimentConfig, PatchKind, SolverKind};
use crate::io::{BenchRow, ConvergenceRow};

/// Split position of the default layouts.
pub const SPLIT: f64 = 0.5;
/// Split position used by the h-study, a multiple of every mesh size in it.
pub const STUDY_SPLIT: f64 = 0.4;
/// Mesh sizes of the h-study series.
pub const STUDY_SIZES: [f64; 3] = [0.2, 0.1, 0.05];

/// Unit square: bottom band `y < y_split` is subdomain 3, the top half is cut
/// at `x_split` into subdomains 1 (left) and 2 (right).
pub fn dirichlet_layout(split: f64) -> DomainLayout {
    DomainLayout::three_region(split, split)
}

/// Unit square cut vertically into subdomain 1 (left) and 2 (right).
pub fn two_region_layout(split: f64) -> DomainLayout {
    DomainLayout::two_region(split)
}

/// Two-region layout whose interaction layer is split between the subdomains.
pub fn neumann_layout(split: f64) -> DomainLayout {
    DomainLayout::two_region(split).with_boundary_split(BoundarySplit::NearestSubdomain)
}

/// Singular symmetric kernel: `4 c` within subdomains 1 and 2, `7 c` within 3,
/// `5 c` whenever a point lies in the layer and `10 c` between subdomains.
pub fn dirichlet_kernel(delta: f64, s: f64) -> Result<KernelSpec> {
    let c = scaling_constant(s, delta)?;
    let piece = |m: f64| Piece::fractional(m * c, s, delta);
    let mut k = KernelSpec::uniform(3, piece(10.0)?);
    k.set(Region::Subdomain(1), Region::Subdomain(1), piece(4.0)?)?;
    k.set(Region::Subdomain(2), Region::Subdomain(2), piece(4.0)?)?;
    k.set(Region::Subdomain(3), Region::Subdomain(3), piece(7.0)?)?;
    k.set(Region::Interaction, Region::Interaction, piece(5.0)?)?;
    for i in 1..=3 {
        k.set_symmetric(Region::Interaction, Region::Subdomain(i), piece(5.0)?)?;
    }
    Ok(k)
}

/// Constant kernel `4 / (pi delta^4)` on the ball.
pub fn neumann_kernel(delta: f64) -> Result<KernelSpec> {
    Ok(KernelSpec::uniform(2, Piece::constant(four_over_pi_delta4(delta)?, delta)?))
}

/// Coupled kernel: the constant kernel with horizon `delta1` seen from
/// subdomain 1 and the fractional kernel of order `s` with horizon `delta2`
/// seen from subdomain 2. Layer points use the kernel of the subdomain they
/// interact with, so only pairs across the interface are nonsymmetric.
pub fn coupled_kernel(delta1: f64, delta2: f64, s: f64) -> Result<KernelSpec> {
    let g1 = Piece::constant(four_over_pi_delta4(delta1)?, delta1)?;
    let g2 = Piece::fractional(scaling_constant(s, delta2)?, s, delta2)?;
    let (i, s1, s2) = (Region::Interaction, Region::Subdomain(1), Region::Subdomain(2));
    let mut k = KernelSpec::new(2);
    k.set(s1, s1, g1)?;
    k.set(s1, s2, g1)?;
    k.set_symmetric(s1, i, g1)?;
    k.set(s2, s2, g2)?;
    k.set(s2, s1, g2)?;
    k.set_symmetric(s2, i, g2)?;
    k.set(i, i, g1)?;
    Ok(k)
}

/// Mesh, DOF map, assembled system and block partition of one run.
pub struct Discretization {
    pub mesh: Mesh,
    pub dofmap: DofMap,
    pub kernel: KernelSpec,
    pub system: SparseSystem,
    pub partition: BlockPartition,
    pub assembly_seconds: f64,
}

impl Discretization {
    /// Coefficients of all DOFs: the unknowns followed by prescribed values.
    pub fn full(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(full_vector(&self.dofmap, u, &self.system.g)?)
    }
}

fn finish(mesh: Mesh, dofmap: DofMap, kernel: KernelSpec, system: SparseSystem, t0: Instant) -> Result<Discretization> {
    let partition = partition_dofs(&dofmap)?;
    Ok(Discretization { mesh, dofmap, kernel, system, partition, assembly_seconds: t0.elapsed().as_secs_f64() })
}

/// Dirichlet problem with forcing `forcing[i - 1]` on subdomain `i` and `g = 0`.
pub fn dirichlet_problem(split: f64, h: f64, delta: f64, s: f64, forcing: [f64; 3]) -> Result<Discretization> {
    let t0 = Instant::now();
    let kernel = dirichlet_kernel(delta, s)?;
    let mesh = build_mesh(&dirichlet_layout(split), h, delta)?;
    let dofmap = build_dof_map(&mesh, BoundaryTreatment::Dirichlet)?;
    let f = move |_: Point, i: usize| forcing[i - 1];
    let system = assemble_dirichlet(&mesh, &dofmap, &kernel, &QuadratureConfig::default(), &f, &|_| 0.0)?;
    finish(mesh, dofmap, kernel, system, t0)
}

/// Piecewise data of the Neumann problem, indexed by subdomain / layer part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeumannData {
    pub kappa: [f64; 2],
    pub forcing: [f64; 2],
    /// Flux data `g^N`; not given for the reference setup and taken as zero.
    pub flux: [f64; 2],
}

impl Default for NeumannData {
    fn default() -> Self {
        Self { kappa: [1.0, 10.0], forcing: [10.0, 1.0], flux: [0.0, 0.0] }
    }
}

pub fn neumann_problem(split: f64, h: f64, delta: f64, data: &NeumannData) -> Result<Discretization> {
    let t0 = Instant::now();
    let kernel = neumann_kernel(delta)?;
    let mesh = build_mesh(&neumann_layout(split), h, delta)?;
    let dofmap = build_dof_map(&mesh, BoundaryTreatment::Neumann)?;
    let forcing = data.forcing;
    let f = move |_: Point, i: usize| forcing[i - 1];
    let system = assemble_neumann(
        &mesh,
        &dofmap,
        &kernel,
        &QuadratureConfig::default(),
        &data.kappa,
        &f,
        &data.flux,
        AssemblyOptions::default(),
    )?;
    finish(mesh, dofmap, kernel, system, t0)
}

/// Exact solution of the patch test.
pub fn patch_solution(kind: PatchKind) -> fn(Point) -> f64 {
    match kind {
        PatchKind::Linear => |p| p.x + p.y,
        PatchKind::Quadratic => |p| p.x * p.x,
    }
}

/// `-Delta p` of the patch solution.
fn patch_negative_laplacian(kind: PatchKind) -> f64 {
    match kind {
        PatchKind::Linear => 0.0,
        PatchKind::Quadratic => -2.0,
    }
}

/// Coupled-kernel patch test on the two-region layout: boundary data `p` and
/// forcing `(m_i / 2) (-Delta p)` with `m_i` the second moment of the kernel
/// seen from subdomain `i`.
pub fn patch_problem(split: f64, h: f64, delta: f64, s: f64, kind: PatchKind) -> Result<Discretization> {
    let t0 = Instant::now();
    let kernel = coupled_kernel(delta, delta, s)?;
    let mesh = build_mesh(&two_region_layout(split), h, delta)?;
    let dofmap = build_dof_map(&mesh, BoundaryTreatment::Dirichlet)?;
    let lap = patch_negative_laplacian(kind);
    let moments = [
        kernel.piece(Region::Subdomain(1), Region::Subdomain(1))?.second_moment(),
        kernel.piece(Region::Subdomain(2), Region::Subdomain(2))?.second_moment(),
    ];
    let f = move |_: Point, i: usize| 0.5 * moments[i - 1] * lap;
    let g = patch_solution(kind);
    let system = assemble_dirichlet(&mesh, &dofmap, &kernel, &QuadratureConfig::default(), &f, &g)?;
    finish(mesh, dofmap, kernel, system, t0)
}

/// GMRES benchmark problem: coupled kernel, `f = 10`, `g = 0`.
pub fn bench_problem(h: f64, delta1: f64, delta2: f64, s: f64) -> Result<Discretization> {
    let t0 = Instant::now();
    let kernel = coupled_kernel(delta1, delta2, s)?;
    let mesh = build_mesh(&two_region_layout(SPLIT), h, kernel.max_delta())?;
    let dofmap = build_dof_map(&mesh, BoundaryTreatment::Dirichlet)?;
    let system = assemble_dirichlet(&mesh, &dofmap, &kernel, &QuadratureConfig::default(), &|_, _| 10.0, &|_| 0.0)?;
    finish(mesh, dofmap, kernel, system, t0)
}

/// Solver settings shared by all runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveParams {
    pub solver: SolverKind,
    pub tol: f64,
    pub inner_tol: f64,
    pub max_iters: usize,
    pub theta: f64,
}

impl SolveParams {
    pub fn from_config(c: &ExperimentConfig) -> Self {
        Self { solver: c.solver, tol: c.tolerance(), inner_tol: c.inner_tol, max_iters: c.max_iters, theta: c.theta }
    }
}

pub fn preconditioner_kind(solver: SolverKind) -> Option<PreconditionerKind> {
    match solver {
        SolverKind::Gmres => Some(PreconditionerKind::None),
        SolverKind::GmresBj => Some(PreconditionerKind::BlockJacobi),
        SolverKind::GmresBgs => Some(PreconditionerKind::BlockGaussSeidel),
        SolverKind::Multiplicative | SolverKind::Additive => None,
    }
}

/// Solve the assembled system; the trace holds absolute residuals for Schwarz
/// and relative preconditioned residuals for GMRES.
pub fn solve(disc: &Discretization, params: &SolveParams, u0: Option<&[f64]>) -> Result<(Vec<f64>, IterationTrace)> {
    let t0 = Instant::now();
    let (u, mut trace) = match preconditioner_kind(params.solver) {
        None => {
            let variant = match params.solver {
                SolverKind::Additive => Variant::Additive,
                _ => Variant::Multiplicative,
            };
            let config = SchwarzConfig {
                variant,
                outer_tol: params.tol,
                inner_tol: params.inner_tol,
                max_outer: params.max_iters,
                inner_solver: InnerSolver::Direct,
                theta: params.theta,
            };
            schwarz(&disc.system, &disc.partition, &config, u0)?
        }
        Some(kind) => {
            let p = Preconditioner::new(kind, &disc.system.a, &disc.partition)?;
            let config = GmresConfig { tol: params.tol, max_iter: params.max_iters, restart: None };
            let r = gmres(&disc.system.a, &disc.system.b, Some(&p), u0, &config)?;
            (r.x, r.trace)
        }
    };
    trace.phase_times.push(("assembly".into(), disc.assembly_seconds));
    trace.phase_times.push(("solve".into(), t0.elapsed().as_secs_f64()));
    Ok((u, trace))
}

/// Outcome of a single solve.
pub struct RunReport {
    pub disc: Discretization,
    /// Coefficients of all DOFs.
    pub solution: Vec<f64>,
    pub trace: IterationTrace,
}

pub fn run_dirichlet(c: &ExperimentConfig) -> Result<RunReport> {
    let disc = dirichlet_problem(SPLIT, c.mesh_size(), c.delta, c.order(), [5.0, 5.0, 1.0])?;
    let (u, trace) = solve(&disc, &SolveParams::from_config(c), None)?;
    let solution = disc.full(&u)?;
    Ok(RunReport { disc, solution, trace })
}

pub fn run_neumann(c: &ExperimentConfig) -> Result<RunReport> {
    if c.solver != SolverKind::Multiplicative {
        bail!("the Neumann experiment supports the multiplicative solver only");
    }
    let disc = neumann_problem(SPLIT, c.mesh_size(), c.delta, &NeumannData::default())?;
    let (u, trace) = solve(&disc, &SolveParams::from_config(c), None)?;
    let solution = disc.full(&u)?;
    Ok(RunReport { disc, solution, trace })
}

pub struct PatchReport {
    pub run: RunReport,
    /// `max |u_k - p(x_k)|` over the unknowns.
    pub max_error: f64,
    /// `||u_h - Pi_h p||` over the domain and the layer.
    pub l2_error: f64,
}

/// Patch test from `u = p` on the layer and `u = 0` in the domain.
pub fn run_patch_test(c: &ExperimentConfig) -> Result<PatchReport> {
    let disc = patch_problem(SPLIT, c.mesh_size(), c.delta, c.order(), c.patch)?;
    let (u, trace) = solve(&disc, &SolveParams::from_config(c), None)?;
    let solution = disc.full(&u)?;
    let p = patch_solution(c.patch);
    let exact = interpolate(&disc.mesh, &disc.dofmap, &p);
    let max_error = max_nodal_error(&disc.mesh, &disc.dofmap, &solution, &p);
    let l2_error =
        l2_distance((&disc.mesh, &disc.dofmap, &solution), (&disc.mesh, &disc.dofmap, &exact), NormDomain::WithLayer)?;
    Ok(PatchReport { run: RunReport { disc, solution, trace }, max_error, l2_error })
}

/// One point of the GMRES sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchPoint {
    pub h: f64,
    pub s: f64,
    pub delta2: f64,
}

/// Mesh-size, order and horizon sweeps, each varying one parameter from the
/// base point `(h, s, delta2)`; shared points appear once.
pub fn bench_sweep(base_s: f64, delta: f64) -> Vec<BenchPoint> {
    let fine = 0.025;
    let mut pts = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        pts.push(BenchPoint { h, s: base_s, delta2: delta });
    }
    for s in [0.2, 0.5, 0.8] {
        pts.push(BenchPoint { h: fine, s, delta2: delta });
    }
    for d2 in [0.1, 0.05, 0.025] {
        pts.push(BenchPoint { h: fine, s: base_s, delta2: d2 });
    }
    let mut unique: Vec<BenchPoint> = Vec::new();
    for p in pts {
        if !unique.contains(&p) {
            unique.push(p);
        }
    }
    unique
}

pub const BENCH_SOLVERS: [SolverKind; 3] = [SolverKind::Gmres, SolverKind::GmresBj, SolverKind::GmresBgs];

pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub converged: bool,
}

/// Iterations and condition numbers of GMRES with each preconditioner.
pub fn bench_point(p: &BenchPoint, delta1: f64, params: &SolveParams) -> Result<(Vec<BenchRow>, bool)> {
    let disc = bench_problem(p.h, delta1, p.delta2, p.s)
        .with_context(|| format!("assembling h={}, s={}, delta2={}", p.h, p.s, p.delta2))?;
    let mut rows = Vec::new();
    let mut converged = true;
    for solver in BENCH_SOLVERS {
        let (_, trace) = solve(&disc, &SolveParams { solver, ..*params }, None)?;
        converged &= trace.converged;
        let kind = preconditioner_kind(solver).expect("GMRES variant");
        let prec = Preconditioner::new(kind, &disc.system.a, &disc.partition)?;
        let cond = condition_estimate(&disc.system.a, &prec)?;
        rows.push(BenchRow {
            h: p.h,
            s: p.s,
            delta2: p.delta2,
            solver: solver.name().into(),
            iterations: trace.iterations,
            cond_estimate: cond.value,
        });
    }
    Ok((rows, converged))
}

/// Full sweep, or the single point given by `h`, `s` and `delta2` when any is set.
pub fn run_gmres_bench(c: &ExperimentConfig) -> Result<BenchReport> {
    let points = if c.h.is_some() || c.s.is_some() || c.delta2.is_some() {
        vec![BenchPoint { h: c.mesh_size(), s: c.order(), delta2: c.horizon2() }]
    } else {
        bench_sweep(c.order(), c.delta)
    };
    let params = SolveParams::from_config(c);
    let mut rows = Vec::new();
    let mut converged = true;
    for p in &points {
        let (r, ok) = bench_point(p, c.delta, &params)?;
        rows.extend(r);
        converged &= ok;
    }
    Ok(BenchReport { rows, converged })
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn loglog_slope(h: &[f64], err: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h.iter().zip(err).map(|(h, e)| (h.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub struct StudyReport {
    pub rows: Vec<ConvergenceRow>,
    pub converged: bool,
}

impl StudyReport {
    pub fn slope(&self, series: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.series == series).map(|r| r.slope)
    }
}

/// Which series an h-study computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    Dirichlet,
    Neumann,
    Patch,
}

impl Series {
    pub const ALL: [Series; 3] = [Series::Dirichlet, Series::Neumann, Series::Patch];

    pub fn name(self) -> &'static str {
        match self {
            Series::Dirichlet => "dirichlet",
            Series::Neumann => "neumann",
            Series::Patch => "patch-test",
        }
    }
}

fn study_problem(series: Series, c: &ExperimentConfig, h: f64) -> Result<Discretization> {
    match series {
        Series::Dirichlet => dirichlet_problem(STUDY_SPLIT, h, c.delta, 0.5, [5.0, 5.0, 1.0]),
        Series::Neumann => neumann_problem(STUDY_SPLIT, h, c.delta, &NeumannData::default()),
        Series::Patch => patch_problem(STUDY_SPLIT, h, c.delta, 0.6, PatchKind::Linear),
    }
}

/// L2 distances over domain and layer to the reference solution (the nodal
/// interpolant of the exact solution for the patch test), with fitted slopes.
pub fn run_h_study_series(c: &ExperimentConfig, series: &[Series]) -> Result<StudyReport> {
    let mut params = SolveParams::from_config(c);
    params.solver = SolverKind::Multiplicative;
    let mut rows = Vec::new();
    let mut converged = true;
    for &s in series {
        let reference = study_problem(s, c, c.reference_h)?;
        let ref_u = match s {
            Series::Patch => interpolate(&reference.mesh, &reference.dofmap, &patch_solution(PatchKind::Linear)),
            _ => {
                let (u, trace) = solve(&reference, &params, None)?;
                converged &= trace.converged;
                reference.full(&u)?
            }
        };
        let mut errs = Vec::new();
        for &h in &STUDY_SIZES {
            let disc = study_problem(s, c, h)?;
            let (u, trace) = solve(&disc, &params, None)?;
            converged &= trace.converged;
            let full = disc.full(&u)?;
            let e = l2_distance(
                (&reference.mesh, &reference.dofmap, &ref_u),
                (&disc.mesh, &disc.dofmap, &full),
                NormDomain::WithLayer,
            )?;
            errs.push(e);
        }
        let slope = loglog_slope(&STUDY_SIZES, &errs);
        for (&h, &e) in STUDY_SIZES.iter().zip(&errs) {
            rows.push(ConvergenceRow { series: s.name().into(), h, l2_error: e, slope });
        }
    }
    Ok(StudyReport { rows, converged })
}

pub fn run_h_study(c: &ExperimentConfig) -> Result<StudyReport> {
    run_h_study_series(c, &Series::ALL)
}
