mod common;

use common::*;
use nlschwarz_core::error::Error;
use nlschwarz_core::krylov::{gmres, GmresConfig, Preconditioner, PreconditionerKind};
use nlschwarz_core::mesh::{build_dof_map_with, build_mesh, BoundaryTreatment, DomainLayout};
use nlschwarz_core::oracle::{
    dense_assemble, dense_block_iterate, dense_residual, dense_solve, DenseProblem, DenseSystem, OracleConfig,
};
use nlschwarz_core::schwarz::{partition_dofs, schwarz, BlockPartition, InnerSolver, SchwarzConfig, Variant};

/// Iterate `k` of the production Schwarz loop, run from scratch.
fn production_iterate(s: &Setup, p: &BlockPartition, variant: Variant, u0: &[f64], k: usize) -> Vec<f64> {
    let config = SchwarzConfig {
        variant,
        outer_tol: 1e-300,
        inner_tol: 1e-300,
        max_outer: k,
        inner_solver: InnerSolver::Direct,
        theta: 1.0,
    };
    schwarz(&s.system, p, &config, Some(u0)).unwrap().0
}

#[test]
fn schwarz_iterates_match_dense_block_iteration_bitwise() {
    for (name, s) in small_setups() {
        let p = partition_dofs(&s.dofmap).unwrap();
        let dense = DenseSystem::from_sparse(&s.system, &s.dofmap).unwrap();
        let u0: Vec<f64> = (0..s.system.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        for variant in [Variant::Multiplicative, Variant::Additive] {
            let oracle = dense_block_iterate(&dense, &p, variant, &u0, 6).unwrap();
            assert_eq!(oracle[0], u0);
            for (k, expected) in oracle.iter().enumerate().skip(1) {
                let got = production_iterate(&s, &p, variant, &u0, k);
                let same = got.iter().zip(expected).all(|(a, b)| a.to_bits() == b.to_bits());
                assert!(same, "{name} {variant:?} iterate {k}");
            }
        }
    }
}

#[test]
fn gauss_seidel_beats_jacobi_after_ten_sweeps() {
    let s = dirichlet(DomainLayout::three_region(0.5, 0.5), 0.25, three_region_kernel(0.5, 0.1));
    let p = partition_dofs(&s.dofmap).unwrap();
    let dense = DenseSystem::from_sparse(&s.system, &s.dofmap).unwrap();
    let u0 = vec![0.0; dense.dim()];
    let gs = dense_block_iterate(&dense, &p, Variant::Multiplicative, &u0, 10).unwrap();
    let jac = dense_block_iterate(&dense, &p, Variant::Additive, &u0, 10).unwrap();
    assert!(dense_residual(&dense, &gs[10]) <= dense_residual(&dense, &jac[10]));
}

#[test]
fn schwarz_and_gmres_reach_the_dense_solution() {
    for (name, s) in small_setups() {
        let p = partition_dofs(&s.dofmap).unwrap();
        let dense = DenseSystem::from_sparse(&s.system, &s.dofmap).unwrap();
        let exact = dense_solve(&dense).unwrap();
        let scale = exact.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let close = |u: &[f64]| u.iter().zip(&exact).all(|(a, b)| (a - b).abs() <= 1e-8 * scale.max(1.0));
        let config = SchwarzConfig { outer_tol: 1e-12, ..Default::default() };
        let (u, trace) = schwarz(&s.system, &p, &config, None).unwrap();
        assert!(trace.converged && close(&u), "{name}: multiplicative");
        if s.dofmap.treatment == BoundaryTreatment::Dirichlet {
            let (u, trace) =
                schwarz(&s.system, &p, &SchwarzConfig { variant: Variant::Additive, ..config }, None).unwrap();
            assert!(trace.converged && close(&u), "{name}: additive");
        }
        for kind in [PreconditionerKind::None, PreconditionerKind::BlockJacobi, PreconditionerKind::BlockGaussSeidel] {
            let prec = Preconditioner::new(kind, &s.system.a, &p).unwrap();
            let r =
                gmres(&s.system.a, &s.system.b, Some(&prec), None, &GmresConfig { tol: 1e-13, ..Default::default() })
                    .unwrap();
            assert!(r.trace.converged && close(&r.x), "{name}: GMRES {kind:?}");
        }
    }
}

#[test]
fn neumann_solution_matches_the_oracle_solve() {
    let s = neumann(0.25, 0.1);
    let oracle = dense_assemble(
        &s.mesh,
        &s.dofmap,
        &s.kernel,
        &OracleConfig::default(),
        &DenseProblem::Neumann { kappa: &KAPPA, forcing: &forcing, neumann_data: &FLUX },
    )
    .unwrap();
    let exact = dense_solve(&oracle).unwrap();
    let p = partition_dofs(&s.dofmap).unwrap();
    let (u, trace) = schwarz(&s.system, &p, &SchwarzConfig { outer_tol: 1e-12, ..Default::default() }, None).unwrap();
    assert!(trace.converged);
    let err = u.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 1e-8, "max difference {err:e}");
}

#[test]
fn zero_data_converges_immediately() {
    let mut s = dirichlet(DomainLayout::three_region(0.5, 0.5), 0.25, three_region_kernel(0.5, 0.1));
    s.system.b.iter_mut().for_each(|x| *x = 0.0);
    let p = partition_dofs(&s.dofmap).unwrap();
    let (u, trace) = schwarz(&s.system, &p, &SchwarzConfig::default(), None).unwrap();
    assert!(trace.converged);
    assert_eq!(trace.iterations, 0);
    assert!(u.iter().all(|x| *x == 0.0));
}

#[test]
fn partitions_follow_subdomains() {
    let (two, three) = (small_setups().remove(2), small_setups().remove(0));
    for (name, s, blocks) in [(two.0, two.1, 2), (three.0, three.1, 3)] {
        let p = partition_dofs(&s.dofmap).unwrap();
        assert_eq!(p.len(), blocks, "{name}");
        assert_eq!(p.dim(), s.system.dim());
        for (b, idx) in p.blocks.iter().enumerate() {
            assert!(idx.iter().all(|&d| s.dofmap.dofs[d].owner == Some(b + 1) && p.block_of[d] == b));
        }
    }
}

#[test]
fn unsplit_interfaces_cannot_be_partitioned() {
    let mesh = build_mesh(&DomainLayout::two_region(0.5), 0.25, 0.1).unwrap();
    let dofs = build_dof_map_with(&mesh, BoundaryTreatment::Dirichlet, false).unwrap();
    assert!(partition_dofs(&dofs).is_err());
}

#[test]
fn invalid_block_partitions_are_rejected() {
    assert!(BlockPartition::from_blocks(3, vec![vec![0, 1], vec![2]]).is_ok());
    assert!(BlockPartition::from_blocks(3, vec![vec![0, 1], vec![1, 2]]).is_err());
    assert!(BlockPartition::from_blocks(3, vec![vec![0, 1]]).is_err());
    assert!(BlockPartition::from_blocks(3, vec![vec![0, 1, 2], vec![]]).is_err());
}

#[test]
fn invalid_schwarz_settings_are_rejected() {
    let s = dirichlet(DomainLayout::three_region(0.5, 0.5), 0.25, three_region_kernel(0.5, 0.1));
    let p = partition_dofs(&s.dofmap).unwrap();
    let bad = SchwarzConfig { inner_tol: 1e-6, outer_tol: 1e-9, ..Default::default() };
    assert!(matches!(schwarz(&s.system, &p, &bad, None), Err(Error::InvalidConfig(_))));
    let bad = SchwarzConfig { theta: 0.0, ..Default::default() };
    assert!(matches!(schwarz(&s.system, &p, &bad, None), Err(Error::InvalidConfig(_))));
}
