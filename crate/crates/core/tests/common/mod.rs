#![allow(dead_code)]

use nlschwarz_core::assembly::{assemble_dirichlet, assemble_neumann, AssemblyOptions, QuadratureConfig, SparseSystem};
use nlschwarz_core::geometry::Point;
use nlschwarz_core::kernel::{four_over_pi_delta4, scaling_constant, KernelSpec, Piece};
use nlschwarz_core::mesh::{
    build_dof_map, build_mesh, BoundarySplit, BoundaryTreatment, DofMap, DomainLayout, Mesh, Region,
};

pub fn constant(delta: f64) -> Piece {
    Piece::constant(four_over_pi_delta4(delta).unwrap(), delta).unwrap()
}

pub fn fractional(s: f64, delta: f64) -> Piece {
    Piece::fractional(scaling_constant(s, delta).unwrap(), s, delta).unwrap()
}

/// Symmetric three-region kernel with weights 4/7/5/10.
pub fn three_region_kernel(s: f64, delta: f64) -> KernelSpec {
    let c = scaling_constant(s, delta).unwrap();
    let p = |m: f64| Piece::fractional(m * c, s, delta).unwrap();
    let mut k = KernelSpec::uniform(3, p(10.0));
    k.set(Region::Subdomain(1), Region::Subdomain(1), p(4.0)).unwrap();
    k.set(Region::Subdomain(2), Region::Subdomain(2), p(4.0)).unwrap();
    k.set(Region::Subdomain(3), Region::Subdomain(3), p(7.0)).unwrap();
    k.set(Region::Interaction, Region::Interaction, p(5.0)).unwrap();
    for i in 1..=3 {
        k.set_symmetric(Region::Interaction, Region::Subdomain(i), p(5.0)).unwrap();
    }
    k
}

/// Row-owner coupling of two pieces on the two-region layout.
pub fn coupled_kernel(g1: Piece, g2: Piece) -> KernelSpec {
    let (i, s1, s2) = (Region::Interaction, Region::Subdomain(1), Region::Subdomain(2));
    let mut k = KernelSpec::new(2);
    k.set(s1, s1, g1).unwrap();
    k.set(s1, s2, g1).unwrap();
    k.set_symmetric(s1, i, g1).unwrap();
    k.set(s2, s2, g2).unwrap();
    k.set(s2, s1, g2).unwrap();
    k.set_symmetric(s2, i, g2).unwrap();
    k.set(i, i, g1).unwrap();
    k
}

pub fn forcing(p: Point, i: usize) -> f64 {
    1.0 + i as f64 + 0.5 * p.x
}

pub fn boundary(p: Point) -> f64 {
    p.x - 2.0 * p.y
}

pub struct Setup {
    pub mesh: Mesh,
    pub dofmap: DofMap,
    pub kernel: KernelSpec,
    pub system: SparseSystem,
}

pub fn dirichlet(layout: DomainLayout, h: f64, kernel: KernelSpec) -> Setup {
    let mesh = build_mesh(&layout, h, kernel.max_delta()).unwrap();
    let dofmap = build_dof_map(&mesh, BoundaryTreatment::Dirichlet).unwrap();
    let system =
        assemble_dirichlet(&mesh, &dofmap, &kernel, &QuadratureConfig::default(), &forcing, &boundary).unwrap();
    Setup { mesh, dofmap, kernel, system }
}

pub const KAPPA: [f64; 2] = [1.0, 10.0];
pub const FLUX: [f64; 2] = [0.5, -0.25];

pub fn neumann(h: f64, delta: f64) -> Setup {
    let layout = DomainLayout::two_region(0.5).with_boundary_split(BoundarySplit::NearestSubdomain);
    let kernel = KernelSpec::uniform(2, constant(delta));
    let mesh = build_mesh(&layout, h, delta).unwrap();
    let dofmap = build_dof_map(&mesh, BoundaryTreatment::Neumann).unwrap();
    let system = assemble_neumann(
        &mesh,
        &dofmap,
        &kernel,
        &QuadratureConfig::default(),
        &KAPPA,
        &forcing,
        &FLUX,
        AssemblyOptions::default(),
    )
    .unwrap();
    Setup { mesh, dofmap, kernel, system }
}

/// Small meshes used throughout: every one has at most 100 unknowns.
pub fn small_setups() -> Vec<(&'static str, Setup)> {
    vec![
        (
            "three-region s=0.5 h=0.25",
            dirichlet(DomainLayout::three_region(0.5, 0.5), 0.25, three_region_kernel(0.5, 0.1)),
        ),
        (
            "three-region s=0.5 h=0.1",
            dirichlet(DomainLayout::three_region(0.5, 0.5), 0.1, three_region_kernel(0.5, 0.1)),
        ),
        (
            "coupled s=0.6 h=0.1",
            dirichlet(DomainLayout::two_region(0.5), 0.1, coupled_kernel(constant(0.1), fractional(0.6, 0.1))),
        ),
        (
            "coupled delta2=0.05 h=0.1",
            dirichlet(DomainLayout::two_region(0.5), 0.1, coupled_kernel(constant(0.1), fractional(0.5, 0.05))),
        ),
        ("neumann h=0.25", neumann(0.25, 0.1)),
    ]
}
