mod common;

use std::f64::consts::PI;

use common::*;
use nlschwarz_core::geometry::Point;
use nlschwarz_core::kernel::{KernelSpec, Piece};
use nlschwarz_core::mesh::{DomainLayout, Rect, Region};
use nlschwarz_core::oracle::DenseSystem;
use proptest::prelude::*;

/// `int_{B_delta} z_1^2 gamma(|z|) dz` by quadrature in polar coordinates:
/// trapezoid in the angle (exact for `cos^2`) and composite Simpson in
/// `t` with `r = delta t^4`, which removes the singularity at the origin.
fn numerical_second_moment(p: &Piece) -> f64 {
    let delta = p.shape().delta();
    let m = 64;
    let angular: f64 =
        (0..m).map(|i| (2.0 * PI * i as f64 / m as f64).cos().powi(2)).sum::<f64>() * 2.0 * PI / m as f64;
    let n = 4000;
    let g = |t: f64| {
        if t == 0.0 {
            return 0.0;
        }
        let r = delta * t.powi(4);
        let dr = 4.0 * delta * t.powi(3);
        r.powi(3) * p.value(r) * dr
    };
    let step = 1.0 / n as f64;
    let mut radial = g(0.0) + g(1.0);
    for i in 1..n {
        radial += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * step);
    }
    angular * radial * step / 3.0
}

#[test]
fn second_moments_agree_with_quadrature() {
    let pieces =
        [constant(0.1), fractional(0.5, 0.1), fractional(0.6, 0.1), fractional(0.2, 0.05), fractional(0.8, 0.025)];
    for p in pieces {
        assert!((p.second_moment() - 1.0).abs() <= 1e-12);
        let q = numerical_second_moment(&p);
        assert!((q - 1.0).abs() <= 1e-6, "{p:?}: {q}");
    }
}

fn point() -> impl Strategy<Value = Point> {
    (-0.2f64..1.2, -0.2f64..1.2).prop_map(|(x, y)| Point::new(x, y))
}

fn region() -> impl Strategy<Value = Region> {
    prop_oneof![Just(Region::Interaction), (1usize..=3).prop_map(Region::Subdomain)]
}

proptest! {
    #[test]
    fn symmetric_kernels_are_symmetric(x in point(), y in point(), rx in region(), ry in region(), s in 0.05f64..0.95) {
        let k = three_region_kernel(s, 0.3);
        prop_assert!(k.is_symmetric());
        let a = k.eval(x, y, rx, ry).unwrap();
        let b = k.eval(y, x, ry, rx).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn kernels_vanish_beyond_the_horizon(x in point(), angle in 0.0f64..6.3, extra in 1e-9f64..0.5, delta in 0.01f64..0.3) {
        let y = Point::new(x.x + (delta + extra) * angle.cos(), x.y + (delta + extra) * angle.sin());
        let k = KernelSpec::uniform(1, Piece::fractional(1.0, 0.5, delta).unwrap());
        prop_assert_eq!(k.eval(x, y, Region::Subdomain(1), Region::Subdomain(1)).unwrap(), 0.0);
        let c = Piece::constant(2.0, delta).unwrap();
        prop_assert_eq!(c.value((x - y).norm()), 0.0);
        prop_assert_eq!(c.value(delta * 0.5), 2.0);
    }
}

fn relative_asymmetry(s: &Setup) -> f64 {
    s.system.a.asymmetry() / s.system.a.max_abs()
}

#[test]
fn symmetric_kernels_give_symmetric_spd_matrices() {
    let setups = [
        dirichlet(DomainLayout::three_region(0.5, 0.5), 0.25, three_region_kernel(0.5, 0.1)),
        dirichlet(DomainLayout::single(Rect::UNIT), 0.25, KernelSpec::uniform(1, constant(0.3))),
        neumann(0.25, 0.1),
    ];
    for s in &setups {
        assert!(relative_asymmetry(s) <= 1e-10);
        let d = DenseSystem::from_sparse(&s.system, &s.dofmap).unwrap();
        let ev = d.matrix.symmetric_eigenvalues();
        assert!(ev.iter().all(|&l| l > 0.0), "min eigenvalue {:e}", ev.iter().cloned().fold(f64::INFINITY, f64::min));
    }
}

#[test]
fn constants_are_in_the_nullspace_of_the_nonlocal_form() {
    let setups = [
        dirichlet(DomainLayout::three_region(0.5, 0.5), 0.1, three_region_kernel(0.5, 0.1)),
        dirichlet(DomainLayout::two_region(0.5), 0.1, coupled_kernel(constant(0.1), fractional(0.6, 0.1))),
    ];
    for s in &setups {
        let ones_free = vec![1.0; s.system.a.ncols];
        let ones_fixed = vec![1.0; s.system.a_i.ncols];
        let r1 = s.system.a.mul_vec(&ones_free);
        let r2 = s.system.a_i.mul_vec(&ones_fixed);
        let worst = r1.iter().zip(&r2).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        assert!(worst <= 1e-10 * s.system.a.max_abs(), "row sum {worst:e}");
    }
}
