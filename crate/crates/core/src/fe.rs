//! Finite element functions: interpolation, point evaluation and norms.
//!
//! Coefficient vectors here cover every DOF of the map: unknowns first, then
//! prescribed values.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{centroid, AffineBasis, Point};
use crate::mesh::{DofMap, Mesh, Region};
use crate::quadrature::triangle_points;

/// Concatenate unknowns and prescribed values into one coefficient vector.
pub fn full_vector(dofmap: &DofMap, unknowns: &[f64], prescribed: &[f64]) -> Result<Vec<f64>> {
    if unknowns.len() != dofmap.interior_count || unknowns.len() + prescribed.len() != dofmap.len() {
        return Err(Error::Dimension("coefficient lengths do not match the DOF map".into()));
    }
    let mut v = unknowns.to_vec();
    v.extend_from_slice(prescribed);
    Ok(v)
}

/// Nodal interpolant of `f`; split DOFs all take the vertex value.
pub fn interpolate(mesh: &Mesh, dofmap: &DofMap, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
    dofmap.dofs.iter().map(|d| f(mesh.vertices[d.vertex])).collect()
}

/// Value of the FE function on element `e` at `p` (affine extension outside `e`).
pub fn evaluate_on(mesh: &Mesh, dofmap: &DofMap, coeffs: &[f64], e: usize, p: Point) -> f64 {
    let vals = AffineBasis::new(&mesh.element_points(e)).eval(p);
    dofmap.element_dofs[e].iter().zip(vals).map(|(&d, v)| coeffs[d] * v).sum()
}

/// Value at `p`, taken from the element that [`Mesh::locate`] returns.
pub fn evaluate(mesh: &Mesh, dofmap: &DofMap, coeffs: &[f64], p: Point) -> Option<f64> {
    mesh.locate(p).map(|e| evaluate_on(mesh, dofmap, coeffs, e, p))
}

/// Integration domain of the L2 norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormDomain {
    /// The subdomains only.
    Domain,
    /// The subdomains and the interaction layer.
    WithLayer,
}

impl NormDomain {
    fn skips(self, region: Region) -> bool {
        self == NormDomain::Domain && region == Region::Interaction
    }
}

/// `||u_h - f||_{L2}` over `domain`.
pub fn l2_error(mesh: &Mesh, dofmap: &DofMap, coeffs: &[f64], f: &dyn Fn(Point) -> f64, domain: NormDomain) -> f64 {
    let mut s = 0.0;
    for e in 0..mesh.element_count() {
        if domain.skips(mesh.element_region[e]) {
            continue;
        }
        let pts = mesh.element_points(e);
        for (q, w) in triangle_points(&pts) {
            let d = evaluate_on(mesh, dofmap, coeffs, e, q) - f(q);
            s += w * d * d;
        }
    }
    s.sqrt()
}

/// `max |u_k - f(x_k)|` over the unknowns.
pub fn max_nodal_error(mesh: &Mesh, dofmap: &DofMap, coeffs: &[f64], f: &dyn Fn(Point) -> f64) -> f64 {
    (0..dofmap.interior_count).map(|k| (coeffs[k] - f(mesh.vertices[dofmap.dofs[k].vertex])).abs()).fold(0.0, f64::max)
}

/// `||u_fine - u_coarse||_{L2}` over `domain` of the fine mesh, which must be
/// nested in the coarse one.
pub fn l2_distance(
    fine: (&Mesh, &DofMap, &[f64]),
    coarse: (&Mesh, &DofMap, &[f64]),
    domain: NormDomain,
) -> Result<f64> {
    let (fm, fd, fu) = fine;
    let (cm, cd, cu) = coarse;
    let mut s = 0.0;
    for e in 0..fm.element_count() {
        if domain.skips(fm.element_region[e]) {
            continue;
        }
        let pts = fm.element_points(e);
        // the barycentre picks the coarse element without ambiguity on shared edges
        let ce = cm
            .locate(centroid(&pts))
            .ok_or_else(|| Error::InvalidMesh("fine mesh is not covered by the coarse mesh".into()))?;
        for (q, w) in triangle_points(&pts) {
            let d = evaluate_on(fm, fd, fu, e, q) - evaluate_on(cm, cd, cu, ce, q);
            s += w * d * d;
        }
    }
    Ok(s.sqrt())
}
