mod common;

use common::*;
use nlschwarz_core::geometry::Point;
use nlschwarz_core::kernel::{KernelSpec, Piece};
use nlschwarz_core::mesh::{build_dof_map, build_mesh, BoundaryTreatment, DomainLayout, Rect, Region};
use nlschwarz_core::oracle::{dense_assemble, relative_frobenius, DenseProblem, DenseSystem, OracleConfig};

fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let n: f64 = b.iter().map(|y| y * y).sum();
    (d / n).sqrt()
}

/// Relative Frobenius distances of `A`, `A_I` and the relative distance of `b`.
fn agreement(setup: &Setup, config: &OracleConfig) -> (f64, f64, f64) {
    let oracle = dense_assemble(
        &setup.mesh,
        &setup.dofmap,
        &setup.kernel,
        config,
        &DenseProblem::Dirichlet { forcing: &forcing, boundary: &boundary },
    )
    .unwrap();
    let prod = DenseSystem::from_sparse(&setup.system, &setup.dofmap).unwrap();
    (
        relative_frobenius(&prod.matrix, &oracle.matrix),
        relative_frobenius(&prod.coupling, &oracle.coupling),
        rel_vec(&prod.rhs, &oracle.rhs),
    )
}

fn assert_agrees(name: &str, setup: &Setup) {
    assert_agrees_with(name, setup, &OracleConfig::default());
}

fn assert_agrees_with(name: &str, setup: &Setup, config: &OracleConfig) {
    assert!(setup.system.dim() <= 100, "{name}: {} unknowns", setup.system.dim());
    let (a, ai, b) = agreement(setup, config);
    assert!(a <= 1e-8 && ai <= 1e-8 && b <= 1e-8, "{name}: A {a:e}, A_I {ai:e}, b {b:e}");
}

#[test]
fn constant_kernel_single_domain() {
    let k = KernelSpec::uniform(1, constant(0.3));
    assert_agrees("single", &dirichlet(DomainLayout::single(Rect::UNIT), 0.25, k));
}

#[test]
fn constant_kernel_with_split_interfaces() {
    let k = KernelSpec::uniform(3, constant(0.2));
    assert_agrees("three-region", &dirichlet(DomainLayout::three_region(0.5, 0.5), 0.25, k));
}

#[test]
fn fractional_kernels_below_one_half() {
    assert_agrees(
        "s=0.3",
        &dirichlet(DomainLayout::two_region(0.5), 0.25, KernelSpec::uniform(2, fractional(0.3, 0.25))),
    );
    assert_agrees(
        "s=0.45",
        &dirichlet(DomainLayout::single(Rect::UNIT), 0.25, KernelSpec::uniform(1, fractional(0.45, 0.5))),
    );
    assert_agrees(
        "weights s=0.2",
        &dirichlet(DomainLayout::three_region(0.5, 0.5), 0.25, three_region_kernel(0.2, 0.1)),
    );
}

#[test]
fn nonsymmetric_kernel_with_two_horizons() {
    let k = coupled_kernel(constant(0.1), fractional(0.2, 0.05));
    // the singular piece with a horizon below h needs a finer oracle rule
    let fine = OracleConfig { angular_points: 96, radial_points: 80 };
    assert_agrees_with("coupled h=0.1", &dirichlet(DomainLayout::two_region(0.5), 0.1, k), &fine);
    let mut k = KernelSpec::uniform(2, constant(0.25));
    let (s1, s2) = (Region::Subdomain(1), Region::Subdomain(2));
    k.set(s2, s1, Piece::constant(3.0, 0.2).unwrap()).unwrap();
    k.set(s2, s2, Piece::constant(3.0, 0.2).unwrap()).unwrap();
    k.set(s2, Region::Interaction, Piece::constant(3.0, 0.2).unwrap()).unwrap();
    assert_agrees("piecewise constant", &dirichlet(DomainLayout::two_region(0.5), 0.25, k));
}

#[test]
fn neumann_oracle_matches_production() {
    let s = neumann(0.25, 0.1);
    let oracle = dense_assemble(
        &s.mesh,
        &s.dofmap,
        &s.kernel,
        &OracleConfig::default(),
        &DenseProblem::Neumann { kappa: &KAPPA, forcing: &forcing, neumann_data: &FLUX },
    )
    .unwrap();
    let prod = DenseSystem::from_sparse(&s.system, &s.dofmap).unwrap();
    assert!(relative_frobenius(&prod.matrix, &oracle.matrix) <= 1e-8);
    assert!(rel_vec(&prod.rhs, &oracle.rhs) <= 1e-8);
}

#[test]
fn oracle_refuses_singular_pair_integrals() {
    let k = KernelSpec::uniform(2, fractional(0.6, 0.1));
    let mesh = build_mesh(&DomainLayout::two_region(0.5), 0.25, 0.1).unwrap();
    let dofs = build_dof_map(&mesh, BoundaryTreatment::Dirichlet).unwrap();
    let f = |_: Point, _: usize| 1.0;
    let g = |_: Point| 0.0;
    let problem = DenseProblem::Dirichlet { forcing: &f, boundary: &g };
    assert!(dense_assemble(&mesh, &dofs, &k, &OracleConfig::default(), &problem).is_err());
}

#[test]
fn zero_kernel_gives_zero_matrix() {
    let k = KernelSpec::uniform(1, Piece::constant(0.0, 0.2).unwrap());
    let mesh = build_mesh(&DomainLayout::single(Rect::UNIT), 0.25, 0.2).unwrap();
    let dofs = build_dof_map(&mesh, BoundaryTreatment::Dirichlet).unwrap();
    let problem = DenseProblem::Dirichlet { forcing: &forcing, boundary: &boundary };
    let o = dense_assemble(&mesh, &dofs, &k, &OracleConfig::default(), &problem).unwrap();
    assert_eq!(o.matrix.max_abs(), 0.0);
    assert_eq!(o.coupling.max_abs(), 0.0);
}

#[test]
fn oracle_is_symmetric_for_symmetric_kernels() {
    let s = dirichlet(DomainLayout::three_region(0.5, 0.5), 0.25, three_region_kernel(0.3, 0.1));
    let problem = DenseProblem::Dirichlet { forcing: &forcing, boundary: &boundary };
    let o = dense_assemble(&s.mesh, &s.dofmap, &s.kernel, &OracleConfig::default(), &problem).unwrap();
    let t = o.matrix.transpose();
    assert!(relative_frobenius(&o.matrix, &t) <= 1e-12);
}

#[test]
fn small_meshes_stay_within_the_dense_limit() {
    for (name, s) in small_setups() {
        assert!(s.system.dim() <= 100, "{name}");
    }
}
