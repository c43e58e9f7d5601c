//! Structured triangular meshes of rectangles, checkerboard partitions into
//! non-overlapping subdomains, and the indexing of skeleton degrees of freedom.
//!
//! Degrees of freedom are mesh vertices (P1). Vertex `(i, j)` of the grid has
//! id `j * (nx + 1) + i`; every cell is split along its rising diagonal into
//! two counterclockwise triangles.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::fields::SkeletonLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum EdgeTag {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: EdgeTag,
}

/// Whether a tagging must produce both tag kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagMode {
    Uniform,
    Mixed,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

pub fn build_rect_mesh(nx: usize, ny: usize, width: f64, height: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Mesh(format!("cell counts must be positive, got {nx}x{ny}")));
    }
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(Error::Mesh(format!(
            "rectangle sides must be positive and finite, got {width}x{height}"
        )));
    }
    let hx = width / nx as f64;
    let hy = height / ny as f64;
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 * hx, j as f64 * hy]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    let mut edge = |a, b| {
        boundary_edges.push(BoundaryEdge {
            vertices: [a, b],
            tag: EdgeTag::Dirichlet,
        })
    };
    for i in 0..nx {
        edge(vid(i, 0), vid(i + 1, 0));
    }
    for j in 0..ny {
        edge(vid(nx, j), vid(nx, j + 1));
    }
    for i in (0..nx).rev() {
        edge(vid(i + 1, ny), vid(i, ny));
    }
    for j in (0..ny).rev() {
        edge(vid(0, j + 1), vid(0, j));
    }
    Ok(Mesh {
        nx,
        ny,
        width,
        height,
        vertices,
        triangles,
        boundary_edges,
    })
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn hx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.height / self.ny as f64
    }

    /// Grid cell `(i, j)` that contains triangle `t`.
    pub fn cell_of_triangle(&self, t: usize) -> (usize, usize) {
        let c = t / 2;
        (c % self.nx, c / self.nx)
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_midpoint(&self, e: &BoundaryEdge) -> [f64; 2] {
        let a = self.vertices[e.vertices[0]];
        let b = self.vertices[e.vertices[1]];
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        let a = self.vertices[e.vertices[0]];
        let b = self.vertices[e.vertices[1]];
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    /// Sorted ids of the vertices on the outer boundary.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary_edges.iter().flat_map(|e| e.vertices).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Checks positivity of areas and the edge incidence counts.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            let a = self.signed_area(t);
            if !(a > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} has non-positive area {a:e}")));
            }
        }
        let counts = edge_counts(self.triangles.iter());
        for (e, &c) in &counts {
            if c > 2 {
                return Err(Error::Mesh(format!("edge {e:?} shared by {c} triangles")));
            }
        }
        let mut boundary: Vec<(usize, usize)> = counts
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(&e, _)| e)
            .collect();
        boundary.sort_unstable();
        let mut listed: Vec<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|e| sorted_pair(e.vertices[0], e.vertices[1]))
            .collect();
        listed.sort_unstable();
        if boundary != listed {
            return Err(Error::Mesh("boundary edge list disagrees with triangle incidence".into()));
        }
        Ok(())
    }

    /// Tags every boundary edge from a predicate on its midpoint.
    pub fn tag_boundary<F>(&self, predicate: F, mode: TagMode) -> Result<Mesh>
    where
        F: Fn([f64; 2]) -> EdgeTag,
    {
        let mut out = self.clone();
        for e in &mut out.boundary_edges {
            let m = self.edge_midpoint(e);
            e.tag = predicate(m);
        }
        if mode == TagMode::Mixed {
            let nd = out.count_tag(EdgeTag::Dirichlet);
            let nn = out.count_tag(EdgeTag::Neumann);
            if nd == 0 || nn == 0 {
                return Err(Error::Mesh(format!(
                    "mixed conditions need both a Dirichlet and a Neumann part, got {nd} D edges and {nn} N edges"
                )));
            }
        }
        Ok(out)
    }

    pub fn count_tag(&self, tag: EdgeTag) -> usize {
        self.boundary_edges.iter().filter(|e| e.tag == tag).count()
    }

    /// Plain-text node/element listing, one record per line.
    pub fn write_listing<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# nodes {}", self.vertices.len())?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(w, "node {i} {:.17e} {:.17e}", v[0], v[1])?;
        }
        writeln!(w, "# elements {}", self.triangles.len())?;
        for (t, tri) in self.triangles.iter().enumerate() {
            writeln!(w, "elem {t} {} {} {}", tri[0], tri[1], tri[2])?;
        }
        writeln!(w, "# boundary_edges {}", self.boundary_edges.len())?;
        for e in &self.boundary_edges {
            let tag = match e.tag {
                EdgeTag::Dirichlet => "D",
                EdgeTag::Neumann => "N",
            };
            writeln!(w, "bedge {} {} {tag}", e.vertices[0], e.vertices[1])?;
        }
        Ok(())
    }
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn edge_counts<'a>(tris: impl Iterator<Item = &'a [usize; 3]>) -> BTreeMap<(usize, usize), usize> {
    let mut counts = BTreeMap::new();
    for t in tris {
        for k in 0..3 {
            *counts.entry(sorted_pair(t[k], t[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    counts
}

/// Checkerboard partition of a structured mesh. Subdomains are numbered from 0
/// row by row; block `j + 1` of a skeleton field belongs to subdomain `j`.
#[derive(Debug, Clone)]
pub struct Partition {
    pub px: usize,
    pub py: usize,
    pub subdomain_of_triangle: Vec<usize>,
    pub triangles: Vec<Vec<usize>>,
    pub interior_dofs: Vec<Vec<usize>>,
    pub boundary_dofs: Vec<Vec<usize>>,
    pub gamma_dofs: Vec<usize>,
    local_of: Vec<HashMap<usize, usize>>,
}

pub fn partition_checkerboard(mesh: &Mesh, px: usize, py: usize) -> Result<Partition> {
    if px == 0 || py == 0 {
        return Err(Error::Partition(format!("partition grid must be positive, got {px}x{py}")));
    }
    if mesh.nx % px != 0 || mesh.ny % py != 0 {
        return Err(Error::Partition(format!(
            "a {px}x{py} partition does not divide the {}x{} mesh: px must divide nx and py must divide ny",
            mesh.nx, mesh.ny
        )));
    }
    let (bx, by) = (mesh.nx / px, mesh.ny / py);
    let n_sub = px * py;
    let mut subdomain_of_triangle = Vec::with_capacity(mesh.triangles.len());
    let mut triangles = vec![Vec::new(); n_sub];
    for t in 0..mesh.triangles.len() {
        let (i, j) = mesh.cell_of_triangle(t);
        let s = (j / by) * px + i / bx;
        subdomain_of_triangle.push(s);
        triangles[s].push(t);
    }
    let mut interior_dofs = Vec::with_capacity(n_sub);
    let mut boundary_dofs = Vec::with_capacity(n_sub);
    let mut local_of = Vec::with_capacity(n_sub);
    for tris in &triangles {
        let counts = edge_counts(tris.iter().map(|&t| &mesh.triangles[t]));
        let mut bnd: Vec<usize> = counts
            .iter()
            .filter(|(_, &c)| c == 1)
            .flat_map(|(&(a, b), _)| [a, b])
            .collect();
        bnd.sort_unstable();
        bnd.dedup();
        let mut all: Vec<usize> = tris.iter().flat_map(|&t| mesh.triangles[t]).collect();
        all.sort_unstable();
        all.dedup();
        let interior: Vec<usize> = all.into_iter().filter(|v| bnd.binary_search(v).is_err()).collect();
        let map: HashMap<usize, usize> = interior
            .iter()
            .chain(bnd.iter())
            .enumerate()
            .map(|(k, &v)| (v, k))
            .collect();
        interior_dofs.push(interior);
        boundary_dofs.push(bnd);
        local_of.push(map);
    }
    Ok(Partition {
        px,
        py,
        subdomain_of_triangle,
        triangles,
        interior_dofs,
        boundary_dofs,
        gamma_dofs: mesh.boundary_vertices(),
        local_of,
    })
}

impl Partition {
    pub fn n_subdomains(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_interior(&self, j: usize) -> usize {
        self.interior_dofs[j].len()
    }

    pub fn n_local(&self, j: usize) -> usize {
        self.interior_dofs[j].len() + self.boundary_dofs[j].len()
    }

    /// Vertex ids of the closure of subdomain `j`, interior first, boundary last.
    pub fn local_dofs(&self, j: usize) -> Vec<usize> {
        self.interior_dofs[j]
            .iter()
            .chain(self.boundary_dofs[j].iter())
            .copied()
            .collect()
    }

    /// Position of mesh vertex `v` in the local ordering of subdomain `j`.
    pub fn local_index(&self, j: usize, v: usize) -> Option<usize> {
        self.local_of[j].get(&v).copied()
    }

    pub fn subdomain_area(&self, mesh: &Mesh, j: usize) -> f64 {
        self.triangles[j].iter().map(|&t| mesh.signed_area(t)).sum()
    }
}

/// Global indexing of the skeleton Σ, the union of all subdomain boundaries.
#[derive(Debug, Clone)]
pub struct SkeletonIndex {
    pub skeleton_dofs: Vec<usize>,
    /// `block_map[b][k]` is the skeleton position of local dof `k` of block `b`;
    /// block 0 is the outer boundary Γ.
    pub block_map: Vec<Vec<usize>>,
    /// Vertices shared by at least three subdomains.
    pub cross_points: Vec<usize>,
    /// Number of subdomains whose boundary contains each skeleton dof.
    pub multiplicity: Vec<usize>,
}

pub fn skeleton_index(partition: &Partition) -> SkeletonIndex {
    let mut dofs: Vec<usize> = partition
        .boundary_dofs
        .iter()
        .flatten()
        .chain(partition.gamma_dofs.iter())
        .copied()
        .collect();
    dofs.sort_unstable();
    dofs.dedup();
    let pos: HashMap<usize, usize> = dofs.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut block_map = Vec::with_capacity(partition.n_subdomains() + 1);
    block_map.push(partition.gamma_dofs.iter().map(|v| pos[v]).collect::<Vec<_>>());
    let mut multiplicity = vec![0; dofs.len()];
    for bnd in &partition.boundary_dofs {
        let m: Vec<usize> = bnd.iter().map(|v| pos[v]).collect();
        for &k in &m {
            multiplicity[k] += 1;
        }
        block_map.push(m);
    }
    let cross_points = dofs
        .iter()
        .zip(multiplicity.iter())
        .filter(|(_, &m)| m >= 3)
        .map(|(&v, _)| v)
        .collect();
    SkeletonIndex {
        skeleton_dofs: dofs,
        block_map,
        cross_points,
        multiplicity,
    }
}

impl SkeletonIndex {
    pub fn n_skeleton(&self) -> usize {
        self.skeleton_dofs.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.block_map.len()
    }

    pub fn layout(&self) -> SkeletonLayout {
        SkeletonLayout::new(self.block_map.iter().map(Vec::len))
    }

    /// Skeleton dofs shared by at least two subdomains.
    pub fn interface_dofs(&self) -> Vec<usize> {
        self.skeleton_dofs
            .iter()
            .zip(self.multiplicity.iter())
            .filter(|(_, &m)| m >= 2)
            .map(|(&v, _)| v)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn near(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14
    }

    #[test]
    fn mesh_counts() {
        let m = build_rect_mesh(1, 1, 1.0, 1.0).unwrap();
        assert_eq!((m.triangles.len(), m.n_vertices()), (2, 4));
        let m = build_rect_mesh(2, 2, 1.0, 1.0).unwrap();
        assert_eq!((m.triangles.len(), m.n_vertices(), m.boundary_edges.len()), (8, 9, 8));
        m.validate().unwrap();
    }

    #[test]
    fn area_sums_to_one() {
        let m = build_rect_mesh(4, 4, 1.0, 1.0).unwrap();
        let a: f64 = (0..m.triangles.len()).map(|t| m.signed_area(t)).sum();
        assert!((a - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(matches!(build_rect_mesh(0, 2, 1.0, 1.0), Err(Error::Mesh(_))));
    }

    #[test]
    fn two_by_two_partition_of_coarsest_mesh() {
        let m = build_rect_mesh(2, 2, 1.0, 1.0).unwrap();
        let p = partition_checkerboard(&m, 2, 2).unwrap();
        assert_eq!(p.n_subdomains(), 4);
        let s = skeleton_index(&p);
        assert_eq!(s.cross_points.len(), 1);
        assert!(near(m.vertices[s.cross_points[0]], [0.5, 0.5]));
        assert_eq!(s.skeleton_dofs, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn single_subdomain_skeleton_is_gamma() {
        let m = build_rect_mesh(4, 4, 1.0, 1.0).unwrap();
        let p = partition_checkerboard(&m, 1, 1).unwrap();
        let s = skeleton_index(&p);
        assert_eq!(s.skeleton_dofs, p.gamma_dofs);
        assert_eq!(p.boundary_dofs[0], p.gamma_dofs);
        assert!(s.cross_points.is_empty());
    }

    #[test]
    fn strip_interface_has_three_vertices() {
        let m = build_rect_mesh(4, 2, 1.0, 1.0).unwrap();
        let p = partition_checkerboard(&m, 2, 1).unwrap();
        let s = skeleton_index(&p);
        let iface = s.interface_dofs();
        assert_eq!(iface.len(), 3);
        assert!(iface.iter().all(|&v| (m.vertices[v][0] - 0.5).abs() < 1e-14));
    }

    #[test]
    fn cross_point_of_four_by_four() {
        let m = build_rect_mesh(4, 4, 1.0, 1.0).unwrap();
        let p = partition_checkerboard(&m, 2, 2).unwrap();
        let s = skeleton_index(&p);
        assert_eq!(s.cross_points.len(), 1);
        assert!(near(m.vertices[s.cross_points[0]], [0.5, 0.5]));
    }

    #[test]
    fn non_divisible_partition_rejected() {
        let m = build_rect_mesh(4, 4, 1.0, 1.0).unwrap();
        let err = partition_checkerboard(&m, 3, 1).unwrap_err();
        assert!(err.to_string().contains("divide"));
    }

    #[test]
    fn tagging_examples() {
        let m = build_rect_mesh(4, 4, 1.0, 1.0).unwrap();
        let all_d = |_: [f64; 2]| EdgeTag::Dirichlet;
        assert!(m.tag_boundary(all_d, TagMode::Mixed).is_err());
        let t = m.tag_boundary(all_d, TagMode::Uniform).unwrap();
        assert_eq!(t.count_tag(EdgeTag::Neumann), 0);

        let bottom_n = |x: [f64; 2]| if x[1].abs() < 1e-12 { EdgeTag::Neumann } else { EdgeTag::Dirichlet };
        let t = m.tag_boundary(bottom_n, TagMode::Mixed).unwrap();
        assert_eq!(t.count_tag(EdgeTag::Neumann), 4);

        let m2 = build_rect_mesh(2, 2, 1.0, 1.0).unwrap();
        let left_d = |x: [f64; 2]| if x[0].abs() < 1e-12 { EdgeTag::Dirichlet } else { EdgeTag::Neumann };
        let t = m2.tag_boundary(left_d, TagMode::Mixed).unwrap();
        assert_eq!(t.count_tag(EdgeTag::Dirichlet), 2);
    }

    #[test]
    fn local_ordering_is_interior_then_boundary() {
        let m = build_rect_mesh(4, 4, 1.0, 1.0).unwrap();
        let p = partition_checkerboard(&m, 2, 2).unwrap();
        for j in 0..4 {
            let dofs = p.local_dofs(j);
            assert_eq!(dofs.len(), 9);
            assert_eq!(p.n_interior(j), 1);
            for (k, v) in dofs.iter().enumerate() {
                assert_eq!(p.local_index(j, *v), Some(k));
            }
        }
    }

    #[test]
    fn listing_has_one_record_per_entity() {
        let m = build_rect_mesh(2, 1, 2.0, 1.0).unwrap();
        let mut buf = Vec::new();
        m.write_listing(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("node ")).count(), 6);
        assert_eq!(text.lines().filter(|l| l.starts_with("elem ")).count(), 4);
        assert_eq!(text.lines().filter(|l| l.starts_with("bedge ")).count(), 6);
    }
}
