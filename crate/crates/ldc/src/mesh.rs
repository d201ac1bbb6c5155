//! Uniform triangulations of the singular polygonal benchmark domains,
//! nested refinement, submesh extraction and composite partitions.
//!
//! All meshes are structured: a square lattice over the bounding box of a
//! [`Region`], each grid square split along its lower-left to upper-right
//! diagonal. Coordinates are dyadic rationals, so lattice arithmetic and
//! point location are exact in f64.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};

const ABSENT: u32 = u32::MAX;

/// Planar region with exact membership predicates.
///
/// `LShape { half: a }` is `(-a,a)^2 \ [0,a]x[-a,0]`; `Slit { half: a }` is
/// `(-a,a)^2 \ {0}x[-a,0]` (a zero-width cut). The singular point of both is
/// the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    LShape { half: f64 },
    Slit { half: f64 },
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Region {
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        match *self {
            Region::LShape { half } | Region::Slit { half } => (-half, half, -half, half),
            Region::Rect { x0, x1, y0, y1 } => (x0, x1, y0, y1),
        }
    }

    /// Membership in the open region (excludes the boundary, the L-cut and
    /// the slit segment).
    pub fn contains_open(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::LShape { half } => x.abs() < half && y.abs() < half && !(x >= 0.0 && y <= 0.0),
            Region::Slit { half } => x.abs() < half && y.abs() < half && !(x == 0.0 && y <= 0.0),
            Region::Rect { x0, x1, y0, y1 } => x0 < x && x < x1 && y0 < y && y < y1,
        }
    }

    /// Membership in the closure (boundary, cut edges and slit included).
    pub fn contains_closure(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::LShape { half } => x.abs() <= half && y.abs() <= half && !(x > 0.0 && y < 0.0),
            Region::Slit { half } => x.abs() <= half && y.abs() <= half,
            Region::Rect { x0, x1, y0, y1 } => x0 <= x && x <= x1 && y0 <= y && y <= y1,
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Region::LShape { half } => 3.0 * half * half,
            Region::Slit { half } => 4.0 * half * half,
            Region::Rect { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
        }
    }

    /// The boundary as straight segments (outer sides, cut edges, slit).
    pub fn boundary_segments(&self) -> Vec<[[f64; 2]; 2]> {
        match *self {
            Region::LShape { half: a } => vec![
                [[-a, -a], [-a, a]],
                [[-a, a], [a, a]],
                [[a, 0.0], [a, a]],
                [[-a, -a], [0.0, -a]],
                [[0.0, -a], [0.0, 0.0]],
                [[0.0, 0.0], [a, 0.0]],
            ],
            Region::Slit { half: a } => vec![
                [[-a, -a], [-a, a]],
                [[-a, a], [a, a]],
                [[a, -a], [a, a]],
                [[-a, -a], [a, -a]],
                [[0.0, -a], [0.0, 0.0]],
            ],
            Region::Rect { x0, x1, y0, y1 } => vec![
                [[x0, y0], [x1, y0]],
                [[x1, y0], [x1, y1]],
                [[x0, y1], [x1, y1]],
                [[x0, y0], [x0, y1]],
            ],
        }
    }

    /// Axis coordinates that must lie on grid lines for a mesh of this
    /// region to be conforming.
    fn breakpoints(&self) -> (Vec<f64>, Vec<f64>) {
        match *self {
            Region::LShape { half } | Region::Slit { half } => {
                (vec![-half, 0.0, half], vec![-half, 0.0, half])
            }
            Region::Rect { x0, x1, y0, y1 } => (vec![x0, x1], vec![y0, y1]),
        }
    }
}

/// The computational domains of the benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    /// `(-1,1)^2 \ [0,1]x[-1,0]`, re-entrant corner at the origin.
    LShape,
    /// `(-1,1)^2 \ {0}x[-1,0]`, slit tip at the origin.
    Slit,
    /// `(-a,a)^2`.
    Square {
        half: f64,
    },
    Rectangle {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    },
}

impl DomainSpec {
    pub fn region(&self) -> Region {
        match *self {
            DomainSpec::LShape => Region::LShape { half: 1.0 },
            DomainSpec::Slit => Region::Slit { half: 1.0 },
            DomainSpec::Square { half } => Region::Rect {
                x0: -half,
                x1: half,
                y0: -half,
                y1: half,
            },
            DomainSpec::Rectangle { x0, x1, y0, y1 } => Region::Rect { x0, x1, y0, y1 },
        }
    }
}

/// A correction subdomain together with its level index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdomainSpec {
    pub kind: SubdomainKind,
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubdomainKind {
    ScaledLShape { scale: f64 },
    ScaledSlit { scale: f64 },
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl SubdomainSpec {
    pub fn region(&self) -> Region {
        match self.kind {
            SubdomainKind::ScaledLShape { scale } => Region::LShape { half: scale },
            SubdomainKind::ScaledSlit { scale } => Region::Slit { half: scale },
            SubdomainKind::Rect { x0, x1, y0, y1 } => Region::Rect { x0, x1, y0, y1 },
        }
    }
}

/// Provenance of a vertex of a refined mesh relative to its parent mesh.
#[derive(Debug, Clone, Copy)]
pub enum VertexOrigin {
    /// Coincides with a parent vertex.
    Vertex(u32),
    /// Midpoint of the parent edge between the two vertices.
    EdgeMid(u32, u32),
}

/// Conforming triangulation of a [`Region`] on a uniform square lattice.
///
/// Immutable after construction; share via `Arc` across scheme steps.
pub struct Mesh {
    region: Region,
    spacing: f64,
    origin: (f64, f64),
    nx: usize,
    ny: usize,
    vertices: Vec<[f64; 2]>,
    vertex_ij: Vec<(u32, u32)>,
    lattice: Vec<u32>,
    triangles: Vec<[u32; 3]>,
    tri_of_cell: Vec<[u32; 2]>,
    dirichlet: Vec<bool>,
    dof_map: Vec<u32>,
    n_unknowns: usize,
    parent_tri: Option<Vec<u32>>,
    vertex_origin: Option<Vec<VertexOrigin>>,
}

fn lattice_coord(x: f64, origin: f64, spacing: f64) -> Option<i64> {
    let t = (x - origin) / spacing;
    let r = t.round();
    if (t - r).abs() <= 1e-9 {
        Some(r as i64)
    } else {
        None
    }
}

impl Mesh {
    /// Builds the triangulation of `region` at grid step `spacing`.
    pub fn build(region: Region, spacing: f64) -> Result<Mesh> {
        if spacing.is_nan() || spacing <= 0.0 {
            return Err(Error::Config(format!("invalid spacing {spacing}")));
        }
        let (x0, x1, y0, y1) = region.bbox();
        let (bpx, bpy) = region.breakpoints();
        for &bx in &bpx {
            if lattice_coord(bx, x0, spacing).is_none() {
                return Err(Error::Alignment(format!(
                    "x-breakpoint {bx} not on grid lines of step {spacing}"
                )));
            }
        }
        for &by in &bpy {
            if lattice_coord(by, y0, spacing).is_none() {
                return Err(Error::Alignment(format!(
                    "y-breakpoint {by} not on grid lines of step {spacing}"
                )));
            }
        }
        let nx = lattice_coord(x1, x0, spacing).unwrap() as usize;
        let ny = lattice_coord(y1, y0, spacing).unwrap() as usize;
        if nx == 0 || ny == 0 {
            return Err(Error::Config("degenerate region".into()));
        }

        let mut lattice = vec![ABSENT; (nx + 1) * (ny + 1)];
        let mut vertices = Vec::new();
        let mut vertex_ij = Vec::new();
        let mut dirichlet = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                let x = x0 + i as f64 * spacing;
                let y = y0 + j as f64 * spacing;
                if region.contains_closure(x, y) {
                    lattice[j * (nx + 1) + i] = vertices.len() as u32;
                    vertices.push([x, y]);
                    vertex_ij.push((i as u32, j as u32));
                    dirichlet.push(!region.contains_open(x, y));
                }
            }
        }

        let mut triangles = Vec::new();
        let mut tri_of_cell = vec![[ABSENT; 2]; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let cx = x0 + (i as f64 + 0.5) * spacing;
                let cy = y0 + (j as f64 + 0.5) * spacing;
                if !region.contains_open(cx, cy) {
                    continue;
                }
                let at = |ii: usize, jj: usize| lattice[jj * (nx + 1) + ii];
                let sw = at(i, j);
                let se = at(i + 1, j);
                let ne = at(i + 1, j + 1);
                let nw = at(i, j + 1);
                if sw == ABSENT || se == ABSENT || ne == ABSENT || nw == ABSENT {
                    return Err(Error::Alignment(format!(
                        "cell ({i},{j}) intersects the region boundary"
                    )));
                }
                tri_of_cell[j * nx + i] = [triangles.len() as u32, triangles.len() as u32 + 1];
                triangles.push([sw, se, ne]);
                triangles.push([sw, ne, nw]);
            }
        }

        let mut dof_map = vec![ABSENT; vertices.len()];
        let mut n_unknowns = 0;
        for (v, &d) in dirichlet.iter().enumerate() {
            if !d {
                dof_map[v] = n_unknowns as u32;
                n_unknowns += 1;
            }
        }

        Ok(Mesh {
            region,
            spacing,
            origin: (x0, y0),
            nx,
            ny,
            vertices,
            vertex_ij,
            lattice,
            triangles,
            tri_of_cell,
            dirichlet,
            dof_map,
            n_unknowns,
            parent_tri: None,
            vertex_origin: None,
        })
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Mesh size: the maximum element diameter.
    pub fn h(&self) -> f64 {
        self.spacing * std::f64::consts::SQRT_2
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn dirichlet(&self) -> &[bool] {
        &self.dirichlet
    }

    /// Interior-vertex to contiguous unknown index; `u32::MAX` on Dirichlet
    /// vertices.
    pub fn dof_map(&self) -> &[u32] {
        &self.dof_map
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn parent_tri(&self) -> Option<&[u32]> {
        self.parent_tri.as_deref()
    }

    pub fn vertex_origin(&self) -> Option<&[VertexOrigin]> {
        self.vertex_origin.as_deref()
    }

    pub fn tri_area(&self) -> f64 {
        self.spacing * self.spacing * 0.5
    }

    fn lattice_at(&self, i: i64, j: i64) -> u32 {
        if i < 0 || j < 0 || i > self.nx as i64 || j > self.ny as i64 {
            return ABSENT;
        }
        self.lattice[j as usize * (self.nx + 1) + i as usize]
    }

    /// Vertex id at the given point, if the point is a mesh vertex.
    pub fn vertex_at(&self, x: f64, y: f64) -> Option<u32> {
        let i = lattice_coord(x, self.origin.0, self.spacing)?;
        let j = lattice_coord(y, self.origin.1, self.spacing)?;
        let v = self.lattice_at(i, j);
        (v != ABSENT).then_some(v)
    }

    /// Evaluates the piecewise-linear function with nodal `values` (one per
    /// vertex) at `(x, y)`. Returns `None` outside the mesh.
    ///
    /// Points on cell edges are consistent from either side because the
    /// interpolant is continuous.
    pub fn eval_linear(&self, values: &[f64], x: f64, y: f64) -> Option<f64> {
        debug_assert_eq!(values.len(), self.vertices.len());
        let fi = (x - self.origin.0) / self.spacing;
        let fj = (y - self.origin.1) / self.spacing;
        let bi = fi.floor() as i64;
        let bj = fj.floor() as i64;
        for (ci, cj) in [(bi, bj), (bi - 1, bj), (bi, bj - 1), (bi - 1, bj - 1)] {
            if ci < 0 || cj < 0 || ci >= self.nx as i64 || cj >= self.ny as i64 {
                continue;
            }
            if self.tri_of_cell[cj as usize * self.nx + ci as usize][0] == ABSENT {
                continue;
            }
            let u = fi - ci as f64;
            let v = fj - cj as f64;
            if !(-1e-12..=1.0 + 1e-12).contains(&u) || !(-1e-12..=1.0 + 1e-12).contains(&v) {
                continue;
            }
            let g = |di: i64, dj: i64| values[self.lattice_at(ci + di, cj + dj) as usize];
            let (fsw, fse, fne, fnw) = (g(0, 0), g(1, 0), g(1, 1), g(0, 1));
            return Some(if v <= u {
                fsw + u * (fse - fsw) + v * (fne - fse)
            } else {
                fsw + u * (fne - fnw) + v * (fnw - fsw)
            });
        }
        None
    }

    /// Plain-text dump: one header line with the vertex and triangle counts,
    /// then `x y dirichlet_flag` lines, then `i j k` triangle lines.
    pub fn write_dump<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.vertices.len(), self.triangles.len())?;
        for (v, d) in self.vertices.iter().zip(&self.dirichlet) {
            writeln!(w, "{} {} {}", v[0], v[1], u8::from(*d))?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Builds the uniform triangulation of `domain` with `n` grid subdivisions
/// per unit length (grid step `1/n`).
pub fn build_mesh(domain: &DomainSpec, n: u32) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::Config(format!("grid subdivisions n={n} < 2")));
    }
    Mesh::build(domain.region(), 1.0 / n as f64)
}

/// Regular red refinement: every triangle is split into four congruent
/// children through the edge midpoints. The parent map and per-vertex
/// provenance are filled; `h` halves.
pub fn refine_uniform(m: &Mesh) -> Mesh {
    let mut fine = Mesh::build(m.region, m.spacing * 0.5)
        .expect("refinement of a valid mesh cannot lose alignment");

    let mut origins = Vec::with_capacity(fine.vertices.len());
    for &(i, j) in &fine.vertex_ij {
        let (i, j) = (i as i64, j as i64);
        let o = match (i % 2, j % 2) {
            (0, 0) => VertexOrigin::Vertex(m.lattice_at(i / 2, j / 2)),
            (1, 0) => VertexOrigin::EdgeMid(
                m.lattice_at((i - 1) / 2, j / 2),
                m.lattice_at((i + 1) / 2, j / 2),
            ),
            (0, 1) => VertexOrigin::EdgeMid(
                m.lattice_at(i / 2, (j - 1) / 2),
                m.lattice_at(i / 2, (j + 1) / 2),
            ),
            // cell center: midpoint of the SW-NE diagonal edge
            _ => VertexOrigin::EdgeMid(
                m.lattice_at((i - 1) / 2, (j - 1) / 2),
                m.lattice_at((i + 1) / 2, (j + 1) / 2),
            ),
        };
        match o {
            VertexOrigin::Vertex(a) => debug_assert_ne!(a, ABSENT),
            VertexOrigin::EdgeMid(a, b) => debug_assert!(a != ABSENT && b != ABSENT),
        }
        origins.push(o);
    }

    let mut parents = Vec::with_capacity(fine.triangles.len());
    for t in &fine.triangles {
        let cx = (fine.vertices[t[0] as usize][0]
            + fine.vertices[t[1] as usize][0]
            + fine.vertices[t[2] as usize][0])
            / 3.0;
        let cy = (fine.vertices[t[0] as usize][1]
            + fine.vertices[t[1] as usize][1]
            + fine.vertices[t[2] as usize][1])
            / 3.0;
        let fu = (cx - m.origin.0) / m.spacing;
        let fv = (cy - m.origin.1) / m.spacing;
        let (pi, pj) = (fu.floor() as usize, fv.floor() as usize);
        let (u, v) = (fu - pi as f64, fv - pj as f64);
        let pair = m.tri_of_cell[pj * m.nx + pi];
        let p = if v <= u { pair[0] } else { pair[1] };
        debug_assert_ne!(p, ABSENT);
        parents.push(p);
    }

    fine.vertex_origin = Some(origins);
    fine.parent_tri = Some(parents);
    fine
}

/// Restriction of `m` to an aligned subdomain.
///
/// The returned mesh carries Dirichlet marks on the whole subdomain boundary
/// (the internal ring and any part shared with the global boundary); the
/// second component maps local vertex ids to vertex ids of `m`.
pub fn extract_submesh(m: &Mesh, sub: &SubdomainSpec) -> Result<(Mesh, Vec<u32>)> {
    let region = sub.region();
    let local = Mesh::build(region, m.spacing).map_err(|e| match e {
        Error::Alignment(s) => Error::Alignment(format!("subdomain level {}: {s}", sub.level)),
        other => other,
    })?;
    let (lx0, _, ly0, _) = region.bbox();
    let di = lattice_coord(lx0, m.origin.0, m.spacing)
        .ok_or_else(|| Error::Alignment("subdomain origin not on mesh grid lines".into()))?;
    let dj = lattice_coord(ly0, m.origin.1, m.spacing)
        .ok_or_else(|| Error::Alignment("subdomain origin not on mesh grid lines".into()))?;

    let mut correspondence = Vec::with_capacity(local.vertices.len());
    for (v, &(i, j)) in local.vertex_ij.iter().enumerate() {
        let g = m.lattice_at(i as i64 + di, j as i64 + dj);
        if g == ABSENT {
            return Err(Error::Alignment(format!(
                "subdomain vertex {:?} missing from the parent mesh",
                local.vertices[v]
            )));
        }
        if !local.dirichlet[v] && m.dirichlet[g as usize] {
            return Err(Error::Alignment(format!(
                "global boundary crosses the subdomain interior at {:?}",
                local.vertices[v]
            )));
        }
        correspondence.push(g);
    }
    for j in 0..local.ny {
        for i in 0..local.nx {
            if local.tri_of_cell[j * local.nx + i][0] == ABSENT {
                continue;
            }
            let gi = (i as i64 + di) as usize;
            let gj = (j as i64 + dj) as usize;
            if m.tri_of_cell[gj * m.nx + gi][0] == ABSENT {
                return Err(Error::Alignment(format!(
                    "subdomain cell ({i},{j}) not covered by the parent mesh"
                )));
            }
        }
    }
    Ok((local, correspondence))
}

/// A non-overlapping cover of the domain by cells of the base mesh and of
/// nested correction meshes: every point belongs to the finest mesh whose
/// subdomain contains it, so all scheme iterates are a single linear
/// polynomial on each cell.
pub struct CompositePartition {
    pub base: Arc<Mesh>,
    pub corrections: Vec<(SubdomainSpec, Arc<Mesh>)>,
    /// `(source, triangle)` where source 0 is the base mesh and `k >= 1` is
    /// `corrections[k-1]`.
    pub cells: Vec<(u32, u32)>,
    pub total_area: f64,
}

impl CompositePartition {
    pub fn mesh(&self, source: u32) -> &Arc<Mesh> {
        if source == 0 {
            &self.base
        } else {
            &self.corrections[source as usize - 1].1
        }
    }
}

/// Assembles the partition for a base mesh and an ordered stack of
/// correction meshes. A cell stays active unless a later (finer) subdomain
/// covers it. Fails if the active cells do not tile the domain exactly.
pub fn composite_partition(
    base: Arc<Mesh>,
    corrections: &[(SubdomainSpec, Arc<Mesh>)],
) -> Result<CompositePartition> {
    let mut cells = Vec::new();
    let mut total_area = 0.0;
    let n_sources = corrections.len() + 1;
    for src in 0..n_sources {
        let mesh: &Mesh = if src == 0 {
            &base
        } else {
            &corrections[src - 1].1
        };
        let later: Vec<Region> = corrections[src..].iter().map(|(s, _)| s.region()).collect();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let cx = (mesh.vertices[tri[0] as usize][0]
                + mesh.vertices[tri[1] as usize][0]
                + mesh.vertices[tri[2] as usize][0])
                / 3.0;
            let cy = (mesh.vertices[tri[0] as usize][1]
                + mesh.vertices[tri[1] as usize][1]
                + mesh.vertices[tri[2] as usize][1])
                / 3.0;
            if later.iter().any(|r| r.contains_closure(cx, cy)) {
                continue;
            }
            cells.push((src as u32, t as u32));
            total_area += mesh.tri_area();
        }
    }
    let domain_area = base.region.area();
    if (total_area - domain_area).abs() > 1e-12 * domain_area {
        return Err(Error::Partition(format!(
            "active cells cover area {total_area}, domain area is {domain_area}"
        )));
    }
    Ok(CompositePartition {
        base,
        corrections: corrections.to_vec(),
        cells,
        total_area,
    })
}

/// Closed-form unknown count for a uniform mesh of `region` at `spacing`,
/// used for schedule budgeting without building the mesh.
pub fn unknowns_for(region: Region, spacing: f64) -> Result<usize> {
    let count = |len: f64| -> Result<i64> {
        lattice_coord(len, 0.0, spacing)
            .ok_or_else(|| Error::Alignment(format!("length {len} not a multiple of {spacing}")))
    };
    Ok(match region {
        Region::LShape { half } => {
            let n = count(half)?;
            ((3 * n - 1) * (n - 1)) as usize
        }
        Region::Slit { half } => {
            let n = count(half)?;
            ((2 * n - 1) * (2 * n - 1) - n) as usize
        }
        Region::Rect { x0, x1, y0, y1 } => {
            let nx = count(x1 - x0)?;
            let ny = count(y1 - y0)?;
            ((nx - 1) * (ny - 1)) as usize
        }
    })
}
