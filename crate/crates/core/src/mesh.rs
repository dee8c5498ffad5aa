//! Structured triangulations of a padded rectangle, region labels and the
//! split-aware degree-of-freedom map.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{centroid, Point};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };

    pub fn contains_strict(&self, p: Point) -> bool {
        p.x > self.x0 && p.x < self.x1 && p.y > self.y0 && p.y < self.y1
    }

    /// Closest point of the rectangle.
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1))
    }
}

/// Rule assigning points of the domain to subdomain ids `1..=n`.
#[derive(Clone, Debug, PartialEq)]
pub enum Splitter {
    /// One subdomain.
    Single,
    /// Strips separated by the given increasing abscissae; strip `k` (from the left) gets id `k + 1`.
    VerticalStrips(Vec<f64>),
    /// Bottom band `y < y_split` is subdomain 3, the top half is cut at `x_split`
    /// into subdomain 1 (left) and 2 (right).
    ThreeRegion { x_split: f64, y_split: f64 },
}

impl Splitter {
    pub fn count(&self) -> usize {
        match self {
            Splitter::Single => 1,
            Splitter::VerticalStrips(xs) => xs.len() + 1,
            Splitter::ThreeRegion { .. } => 3,
        }
    }

    pub fn subdomain_of(&self, p: Point) -> usize {
        match self {
            Splitter::Single => 1,
            Splitter::VerticalStrips(xs) => 1 + xs.iter().filter(|&&x| p.x > x).count(),
            Splitter::ThreeRegion { x_split, y_split } => {
                if p.y < *y_split {
                    3
                } else if p.x < *x_split {
                    1
                } else {
                    2
                }
            }
        }
    }

    fn coordinates(&self) -> Vec<(f64, bool)> {
        match self {
            Splitter::Single => Vec::new(),
            Splitter::VerticalStrips(xs) => xs.iter().map(|&x| (x, true)).collect(),
            Splitter::ThreeRegion { x_split, y_split } => vec![(*x_split, true), (*y_split, false)],
        }
    }
}

/// Rule partitioning the interaction layer for Neumann problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundarySplit {
    /// A layer point belongs to the subdomain of its closest point in the domain.
    NearestSubdomain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainLayout {
    pub domain: Rect,
    pub splitter: Splitter,
    pub boundary_split: Option<BoundarySplit>,
}

impl DomainLayout {
    pub fn single(domain: Rect) -> Self {
        Self { domain, splitter: Splitter::Single, boundary_split: None }
    }

    /// Unit square cut vertically at `x_split` into a left and a right subdomain.
    pub fn two_region(x_split: f64) -> Self {
        Self { domain: Rect::UNIT, splitter: Splitter::VerticalStrips(vec![x_split]), boundary_split: None }
    }

    /// Unit square with a bottom band and a top half cut in two.
    pub fn three_region(x_split: f64, y_split: f64) -> Self {
        Self { domain: Rect::UNIT, splitter: Splitter::ThreeRegion { x_split, y_split }, boundary_split: None }
    }

    pub fn with_boundary_split(mut self, split: BoundarySplit) -> Self {
        self.boundary_split = Some(split);
        self
    }

    pub fn subdomain_count(&self) -> usize {
        self.splitter.count()
    }
}

/// Element label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    Interaction,
    Subdomain(usize),
}

impl Region {
    /// Dense index: 0 for the interaction layer, `i` for subdomain `i`.
    pub fn index(self) -> usize {
        match self {
            Region::Interaction => 0,
            Region::Subdomain(i) => i,
        }
    }
}

/// Vertex label derived from the adjacent elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexRegion {
    Subdomain(usize),
    Interface,
    Interaction,
}

/// Structured triangulation of the padded domain.
///
/// Each grid square is cut along its `(1, 1)` diagonal into a lower triangle
/// (type 0) and an upper triangle (type 1). Element `2 * (j * nx + i) + t`
/// lives in cell `(i, j)`.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub element_region: Vec<Region>,
    /// Neumann partition id of interaction elements (`None` for domain elements
    /// or when the layout has no boundary split).
    pub element_boundary_part: Vec<Option<usize>>,
    pub vertex_region: Vec<VertexRegion>,
    pub h: f64,
    pub layer_width: f64,
    pub subdomain_count: usize,
    pub domain: Rect,
    /// Lower-left corner of the padded grid.
    pub origin: Point,
    /// Number of cells in x and y.
    pub nx: usize,
    pub ny: usize,
    vertex_elements: Vec<Vec<usize>>,
}

fn cells_for(length: f64, h: f64, what: &str) -> Result<usize> {
    let n = (length / h).round();
    if n < 1.0 || (n * h - length).abs() > 1e-9 * length.max(1.0) {
        return Err(Error::InvalidMesh(format!("{what} of length {length} is not a multiple of h = {h}")));
    }
    Ok(n as usize)
}

/// Build the structured mesh of `layout.domain` padded by `ceil(delta / h) * h`.
pub fn build_mesh(layout: &DomainLayout, h: f64, delta: f64) -> Result<Mesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidConfig(format!("mesh size must be positive, got {h}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidConfig(format!("horizon must be positive, got {delta}")));
    }
    let d = layout.domain;
    let cx = cells_for(d.x1 - d.x0, h, "domain width")?;
    let cy = cells_for(d.y1 - d.y0, h, "domain height")?;
    for (c, vertical) in layout.splitter.coordinates() {
        let base = if vertical { d.x0 } else { d.y0 };
        let off = c - base;
        let k = (off / h).round();
        if (k * h - off).abs() > 1e-9 || k <= 0.0 || k >= if vertical { cx as f64 } else { cy as f64 } {
            return Err(Error::InvalidMesh(format!(
                "subdomain splitter at {c} is not aligned with the grid of size {h}"
            )));
        }
    }
    let layers = (delta / h - 1e-9).ceil().max(1.0) as usize;
    let layer_width = layers as f64 * h;
    let nx = cx + 2 * layers;
    let ny = cy + 2 * layers;
    let origin = Point::new(d.x0 - layer_width, d.y0 - layer_width);

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point::new(d.x0 + (i as f64 - layers as f64) * h, d.y0 + (j as f64 - layers as f64) * h));
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let n_el = 2 * nx * ny;
    let mut triangles = Vec::with_capacity(n_el);
    let mut element_region = Vec::with_capacity(n_el);
    let mut element_boundary_part = Vec::with_capacity(n_el);
    for j in 0..ny {
        for i in 0..nx {
            let lower = [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)];
            let upper = [vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)];
            for tri in [lower, upper] {
                let c = centroid(&[vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
                if d.contains_strict(c) {
                    element_region.push(Region::Subdomain(layout.splitter.subdomain_of(c)));
                    element_boundary_part.push(None);
                } else {
                    element_region.push(Region::Interaction);
                    element_boundary_part.push(
                        layout
                            .boundary_split
                            .map(|BoundarySplit::NearestSubdomain| layout.splitter.subdomain_of(d.clamp(c))),
                    );
                }
                triangles.push(tri);
            }
        }
    }

    let mut vertex_elements = vec![Vec::new(); vertices.len()];
    for (e, tri) in triangles.iter().enumerate() {
        for &v in tri {
            vertex_elements[v].push(e);
        }
    }
    let mut vertex_region = Vec::with_capacity(vertices.len());
    for (v, els) in vertex_elements.iter().enumerate() {
        if els.is_empty() {
            return Err(Error::InvalidMesh(format!("vertex {v} has no adjacent element")));
        }
        let mut label: Option<usize> = None;
        let mut interface = false;
        let mut interaction = false;
        for &e in els {
            match element_region[e] {
                Region::Interaction => interaction = true,
                Region::Subdomain(s) => match label {
                    None => label = Some(s),
                    Some(l) if l != s => interface = true,
                    _ => {}
                },
            }
        }
        vertex_region.push(if interaction {
            VertexRegion::Interaction
        } else if interface {
            VertexRegion::Interface
        } else {
            VertexRegion::Subdomain(label.unwrap_or(0))
        });
    }

    Ok(Mesh {
        vertices,
        triangles,
        element_region,
        element_boundary_part,
        vertex_region,
        h,
        layer_width,
        subdomain_count: layout.subdomain_count(),
        domain: d,
        origin,
        nx,
        ny,
        vertex_elements,
    })
}

impl Mesh {
    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn element_points(&self, e: usize) -> [Point; 3] {
        let t = self.triangles[e];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Cell indices and triangle type of element `e`.
    pub fn element_cell(&self, e: usize) -> (usize, usize, usize) {
        let c = e / 2;
        (c % self.nx, c / self.nx, e % 2)
    }

    pub fn element_at(&self, i: usize, j: usize, t: usize) -> usize {
        2 * (j * self.nx + i) + t
    }

    pub fn vertex_elements(&self, v: usize) -> &[usize] {
        &self.vertex_elements[v]
    }

    /// Element containing `p` (ties broken towards the lower-left), if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.h;
        let fy = (p.y - self.origin.y) / self.h;
        if fx < -1e-9 || fy < -1e-9 || fx > self.nx as f64 + 1e-9 || fy > self.ny as f64 + 1e-9 {
            return None;
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        let lx = fx - i as f64;
        let ly = fy - j as f64;
        Some(self.element_at(i, j, if ly <= lx { 0 } else { 1 }))
    }
}

/// How interaction-layer vertices are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTreatment {
    /// Layer values are prescribed data.
    Dirichlet,
    /// Layer values are unknowns, grouped by the layout's boundary split.
    Neumann,
}

/// One degree of freedom: a (possibly split) hat function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dof {
    pub vertex: usize,
    /// Owning subdomain, `None` for prescribed (Dirichlet) values.
    pub owner: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct DofMap {
    pub dofs: Vec<Dof>,
    pub vertex_to_dofs: Vec<Vec<usize>>,
    /// For each element, the DOF whose basis function restricts to the local hat
    /// of each of its three vertices.
    pub element_dofs: Vec<[usize; 3]>,
    /// Subdomain owning each element's local hats; `None` for prescribed elements.
    pub element_owner: Vec<Option<usize>>,
    /// Number of unknowns; DOFs `interior_count..` are prescribed.
    pub interior_count: usize,
    pub treatment: BoundaryTreatment,
    pub subdomain_count: usize,
    /// Whether each DOF's vertex touches the interaction layer.
    pub in_layer: Vec<bool>,
}

impl DofMap {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn boundary_dof_range(&self) -> core::ops::Range<usize> {
        self.interior_count..self.dofs.len()
    }

    pub fn is_free(&self, dof: usize) -> bool {
        dof < self.interior_count
    }
}

/// Build the DOF map with interface splitting.
pub fn build_dof_map(mesh: &Mesh, treatment: BoundaryTreatment) -> Result<DofMap> {
    build_dof_map_with(mesh, treatment, true)
}

/// Build the DOF map; with `split = false` interface vertices keep a single
/// hat owned by their smallest adjacent subdomain.
pub fn build_dof_map_with(mesh: &Mesh, treatment: BoundaryTreatment, split: bool) -> Result<DofMap> {
    let n_el = mesh.element_count();
    let mut element_owner = Vec::with_capacity(n_el);
    for e in 0..n_el {
        element_owner.push(match (mesh.element_region[e], treatment) {
            (Region::Subdomain(s), _) => Some(s),
            (Region::Interaction, BoundaryTreatment::Dirichlet) => None,
            (Region::Interaction, BoundaryTreatment::Neumann) => match mesh.element_boundary_part[e] {
                Some(p) => Some(p),
                None => {
                    return Err(Error::InvalidConfig("a Neumann problem needs a layout with a boundary split".into()))
                }
            },
        });
    }

    // owners per vertex; None marks a prescribed vertex
    let nv = mesh.vertex_count();
    let mut vertex_owners: Vec<Option<Vec<usize>>> = Vec::with_capacity(nv);
    for v in 0..nv {
        let els = mesh.vertex_elements(v);
        if els.is_empty() {
            return Err(Error::InvalidMesh(format!("vertex {v} has no adjacent element")));
        }
        if els.iter().any(|&e| element_owner[e].is_none()) {
            vertex_owners.push(None);
            continue;
        }
        let mut owners: Vec<usize> = els.iter().filter_map(|&e| element_owner[e]).collect();
        owners.sort_unstable();
        owners.dedup();
        if !split {
            owners.truncate(1);
        }
        vertex_owners.push(Some(owners));
    }

    let mut dofs = Vec::new();
    let mut vertex_to_dofs = vec![Vec::new(); nv];
    for (v, owners) in vertex_owners.iter().enumerate() {
        if let Some(owners) = owners {
            for &o in owners {
                vertex_to_dofs[v].push(dofs.len());
                dofs.push(Dof { vertex: v, owner: Some(o) });
            }
        }
    }
    let interior_count = dofs.len();
    for (v, owners) in vertex_owners.iter().enumerate() {
        if owners.is_none() {
            vertex_to_dofs[v].push(dofs.len());
            dofs.push(Dof { vertex: v, owner: None });
        }
    }

    let mut element_dofs = Vec::with_capacity(n_el);
    for e in 0..n_el {
        let mut local = [0usize; 3];
        for (a, &v) in mesh.triangles[e].iter().enumerate() {
            let cands = &vertex_to_dofs[v];
            local[a] = if cands.len() == 1 {
                cands[0]
            } else {
                let owner = element_owner[e];
                *cands
                    .iter()
                    .find(|&&d| dofs[d].owner == owner)
                    .ok_or_else(|| Error::InvalidMesh(format!("no DOF of vertex {v} for element {e}")))?
            };
        }
        element_dofs.push(local);
    }

    let in_layer = dofs.iter().map(|d| mesh.vertex_region[d.vertex] == VertexRegion::Interaction).collect();

    Ok(DofMap {
        dofs,
        vertex_to_dofs,
        element_dofs,
        element_owner,
        interior_count,
        treatment,
        subdomain_count: mesh.subdomain_count,
        in_layer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AffineBasis;
    use crate::quadrature::triangle_points;

    #[test]
    fn padding_arithmetic() {
        let m = build_mesh(&DomainLayout::two_region(0.5), 0.5, 0.1).unwrap();
        assert_eq!(m.layer_width, 0.5);
        assert_eq!(m.element_count(), 32);
        assert_eq!(m.origin, Point::new(-0.5, -0.5));

        let m = build_mesh(&DomainLayout::single(Rect::UNIT), 0.1, 0.1).unwrap();
        assert!((m.layer_width - 0.1).abs() < 1e-15);
        assert_eq!(m.vertex_count(), 169);
        assert_eq!(m.element_count(), 288);
    }

    #[test]
    fn argument_errors() {
        assert!(build_mesh(&DomainLayout::single(Rect::UNIT), 0.1, 0.0).is_err());
        assert!(build_mesh(&DomainLayout::single(Rect::UNIT), -0.1, 0.1).is_err());
        assert!(matches!(build_mesh(&DomainLayout::two_region(0.5), 0.2, 0.1), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn interface_and_triple_point_splitting() {
        let m = build_mesh(&DomainLayout::three_region(0.5, 0.5), 0.25, 0.25).unwrap();
        let dm = build_dof_map(&m, BoundaryTreatment::Dirichlet).unwrap();
        let find = |x: f64, y: f64| {
            m.vertices.iter().position(|p| (p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12).unwrap()
        };
        let owners =
            |v: usize| -> Vec<Option<usize>> { dm.vertex_to_dofs[v].iter().map(|&d| dm.dofs[d].owner).collect() };
        assert_eq!(owners(find(0.25, 0.75)), vec![Some(1)]);
        assert_eq!(owners(find(0.5, 0.75)), vec![Some(1), Some(2)]);
        assert_eq!(owners(find(0.5, 0.5)), vec![Some(1), Some(2), Some(3)]);
        assert_eq!(m.vertex_region[find(0.5, 0.5)], VertexRegion::Interface);
        assert_eq!(owners(find(0.0, 0.5)), vec![None]);
    }

    #[test]
    fn split_hats_form_a_partition_of_unity() {
        for treatment in [BoundaryTreatment::Dirichlet, BoundaryTreatment::Neumann] {
            let layout = DomainLayout::three_region(0.5, 0.5).with_boundary_split(BoundarySplit::NearestSubdomain);
            let m = build_mesh(&layout, 0.125, 0.1).unwrap();
            let dm = build_dof_map(&m, treatment).unwrap();
            for e in 0..m.element_count() {
                let pts = m.element_points(e);
                let basis = AffineBasis::new(&pts);
                for (q, _) in triangle_points(&pts) {
                    let vals = basis.eval(q);
                    let mut total = 0.0;
                    for a in 0..3 {
                        let _ = dm.element_dofs[e][a];
                        total += vals[a];
                    }
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn refinement_quadruples_interior_vertices() {
        let count = |h: f64| {
            let m = build_mesh(&DomainLayout::single(Rect::UNIT), h, 0.1).unwrap();
            m.vertex_region.iter().filter(|r| matches!(r, VertexRegion::Subdomain(_))).count() as f64
        };
        let r = count(0.025) / count(0.05);
        assert!(r > 3.5 && r < 4.5, "ratio {r}");
    }

    #[test]
    fn neumann_layer_dofs_follow_the_boundary_split() {
        let layout = DomainLayout::two_region(0.5).with_boundary_split(BoundarySplit::NearestSubdomain);
        let m = build_mesh(&layout, 0.25, 0.25).unwrap();
        let dm = build_dof_map(&m, BoundaryTreatment::Neumann).unwrap();
        assert_eq!(dm.interior_count, dm.len());
        for (d, dof) in dm.dofs.iter().enumerate() {
            let p = m.vertices[dof.vertex];
            if dm.in_layer[d] && dm.vertex_to_dofs[dof.vertex].len() == 1 {
                let want = if p.x < 0.5 { 1 } else { 2 };
                assert_eq!(dof.owner, Some(want), "vertex at {p:?}");
            }
        }
    }

    #[test]
    fn locate_finds_the_containing_element() {
        let m = build_mesh(&DomainLayout::single(Rect::UNIT), 0.25, 0.25).unwrap();
        for &(x, y) in &[(0.1, 0.05), (0.1, 0.2), (0.9, 1.1), (-0.2, -0.01)] {
            let p = Point::new(x, y);
            let e = m.locate(p).unwrap();
            assert!(crate::geometry::contains(&m.element_points(e), p, 1e-12));
        }
    }
}
