//! Structured simplicial meshes of the unit square/cube with nested uniform
//! refinement (Kuhn subdivision: 2 triangles per square cell, 6 tetrahedra
//! per cube cell) and O(1) point location.

use std::io::Write;

use crate::error::{Error, Result};

const MEMORY_BUDGET_BYTES: usize = 1_500_000_000;

#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    dim: usize,
    level: u32,
    /// nodes per side = 2^level + 1
    n_side: usize,
    /// vertex coordinates, stride `dim`
    vertices: Vec<f64>,
    /// simplex vertex indices, stride `dim + 1`, positively oriented
    simplices: Vec<u32>,
    boundary: Vec<bool>,
    /// vertex-order permutations of one cell, fixed ordering
    perms: Vec<Vec<usize>>,
}

impl SimplicialMesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Grid spacing h = 2^{-level}.
    pub fn h(&self) -> f64 {
        1.0 / (self.n_side - 1) as f64
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len() / self.dim
    }

    pub fn n_simplices(&self) -> usize {
        self.simplices.len() / (self.dim + 1)
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.dim..(i + 1) * self.dim]
    }

    pub fn simplex(&self, e: usize) -> &[u32] {
        let s = self.dim + 1;
        &self.simplices[e * s..(e + 1) * s]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.iter().filter(|b| **b).count()
    }

    /// Signed volume of a simplex (positive for all simplices by construction).
    pub fn simplex_volume(&self, e: usize) -> f64 {
        let vs = self.simplex(e);
        let d = self.dim;
        let v0 = self.vertex(vs[0] as usize);
        let mut cols = [[0.0f64; 3]; 3];
        for k in 1..=d {
            let vk = self.vertex(vs[k] as usize);
            for r in 0..d {
                cols[k - 1][r] = vk[r] - v0[r];
            }
        }
        let det = match d {
            2 => cols[0][0] * cols[1][1] - cols[0][1] * cols[1][0],
            3 => {
                cols[0][0] * (cols[1][1] * cols[2][2] - cols[1][2] * cols[2][1])
                    - cols[1][0] * (cols[0][1] * cols[2][2] - cols[0][2] * cols[2][1])
                    + cols[2][0] * (cols[0][1] * cols[1][2] - cols[0][2] * cols[1][1])
            }
            _ => unreachable!(),
        };
        det / factorial(d) as f64
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_simplices()).map(|e| self.simplex_volume(e)).sum()
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product::<u64>().max(1)
}

/// (d-1)-volume of a facet given by d points in R^d.
fn facet_volume(points: &[&[f64]], dim: usize) -> f64 {
    match dim {
        2 => {
            let dx = points[1][0] - points[0][0];
            let dy = points[1][1] - points[0][1];
            (dx * dx + dy * dy).sqrt()
        }
        3 => {
            let mut u = [0.0; 3];
            let mut v = [0.0; 3];
            for k in 0..3 {
                u[k] = points[1][k] - points[0][k];
                v[k] = points[2][k] - points[0][k];
            }
            let cx = u[1] * v[2] - u[2] * v[1];
            let cy = u[2] * v[0] - u[0] * v[2];
            let cz = u[0] * v[1] - u[1] * v[0];
            0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
        }
        _ => unreachable!(),
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(rest: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            cur.push(v);
            rec(rest, cur, out);
            cur.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    out
}

fn perm_sign(p: &[usize]) -> i32 {
    let mut sign = 1;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            if p[i] > p[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Tensor grid of (2^level + 1)^dim nodes, each cell split into dim!
/// positively oriented path simplices along the main diagonal.
pub fn unit_cube_mesh(dim: usize, level: u32) -> Result<SimplicialMesh> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidArgument(format!(
            "mesh dimension must be 2 or 3, got {dim}"
        )));
    }
    let cells_per_side = 1usize
        .checked_shl(level)
        .ok_or(Error::MeshTooLarge { dim, level })?;
    let n_side = cells_per_side + 1;
    let nv = n_side.pow(dim as u32);
    let ns = cells_per_side.pow(dim as u32) * factorial(dim) as usize;
    let bytes = nv * dim * 8 + ns * (dim + 1) * 4 + nv;
    if bytes > MEMORY_BUDGET_BYTES {
        return Err(Error::MeshTooLarge { dim, level });
    }

    let h = 1.0 / cells_per_side as f64;
    let mut vertices = Vec::with_capacity(nv * dim);
    let mut boundary = Vec::with_capacity(nv);

    // node index: x fastest, then y, then z
    let idx = |coords: &[usize]| -> usize {
        let mut i = 0;
        for k in (0..dim).rev() {
            i = i * n_side + coords[k];
        }
        i
    };

    let mut coords = vec![0usize; dim];
    'vertices: loop {
        let mut on_boundary = false;
        for k in 0..dim {
            vertices.push(coords[k] as f64 * h);
            if coords[k] == 0 || coords[k] == n_side - 1 {
                on_boundary = true;
            }
        }
        boundary.push(on_boundary);
        let mut k = 0;
        loop {
            coords[k] += 1;
            if coords[k] < n_side {
                break;
            }
            coords[k] = 0;
            k += 1;
            if k == dim {
                break 'vertices;
            }
        }
    }

    let perms = permutations(dim);
    let mut simplices = Vec::with_capacity(ns * (dim + 1));
    let mut cell = vec![0usize; dim];
    'cells: loop {
        for perm in &perms {
            // path simplex: v0 = cell corner, then walk one axis at a time
            let mut walk = cell.clone();
            let mut verts = Vec::with_capacity(dim + 1);
            verts.push(idx(&walk) as u32);
            for &axis in perm {
                walk[axis] += 1;
                verts.push(idx(&walk) as u32);
            }
            if perm_sign(perm) < 0 {
                verts.swap(dim - 1, dim);
            }
            simplices.extend_from_slice(&verts);
        }
        let mut k = 0;
        loop {
            cell[k] += 1;
            if cell[k] < cells_per_side {
                break;
            }
            cell[k] = 0;
            k += 1;
            if k == dim {
                break 'cells;
            }
        }
    }

    Ok(SimplicialMesh {
        dim,
        level,
        n_side,
        vertices,
        simplices,
        boundary,
        perms,
    })
}

/// The level-(i+1) structured mesh; its vertex set contains the input's.
pub fn refine(mesh: &SimplicialMesh) -> Result<SimplicialMesh> {
    unit_cube_mesh(mesh.dim, mesh.level + 1)
}

impl SimplicialMesh {
    /// Locate the simplex containing x and its barycentric coordinates there.
    pub fn locate(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let d = self.dim;
        let cells = self.n_side - 1;
        let hc = cells as f64;
        let mut cell = vec![0usize; d];
        let mut local = vec![0.0f64; d];
        for k in 0..d {
            let scaled = (x[k].clamp(0.0, 1.0)) * hc;
            let mut c = scaled.floor() as usize;
            if c >= cells {
                c = cells - 1;
            }
            cell[k] = c;
            local[k] = (scaled - c as f64).clamp(0.0, 1.0);
        }
        // the containing path simplex sorts local coordinates descendingly
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| local[b].partial_cmp(&local[a]).unwrap());
        let perm_index = self
            .perms
            .iter()
            .position(|p| p == &order)
            .expect("permutation exists");

        let mut cell_linear = 0usize;
        for k in (0..d).rev() {
            cell_linear = cell_linear * cells + cell[k];
        }
        let simplex = cell_linear * self.perms.len() + perm_index;

        // barycentric weights of the path simplex: differences of the sorted
        // local coordinates
        let mut sorted: Vec<f64> = order.iter().map(|&k| local[k]).collect();
        sorted.push(0.0);
        let mut bary = Vec::with_capacity(d + 1);
        bary.push(1.0 - sorted[0]);
        for k in 0..d {
            bary.push(sorted[k] - sorted[k + 1]);
        }
        // account for the orientation swap of odd permutations
        if perm_sign(&self.perms[perm_index]) < 0 {
            bary.swap(d - 1, d);
        }
        (simplex, bary)
    }

    /// Smallest inradius/diameter ratio over all simplices.
    pub fn shape_regularity(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for e in 0..self.n_simplices() {
            let vol = self.simplex_volume(e);
            let vs = self.simplex(e);
            let d = self.dim;
            // surface measure: sum of facet volumes; inradius = d·vol/surface
            let mut surface = 0.0;
            let mut diam: f64 = 0.0;
            for skip in 0..=d {
                let facet: Vec<&[f64]> = (0..=d)
                    .filter(|k| *k != skip)
                    .map(|k| self.vertex(vs[k] as usize))
                    .collect();
                surface += facet_volume(&facet, d);
            }
            for i in 0..=d {
                for j in (i + 1)..=d {
                    let a = self.vertex(vs[i] as usize);
                    let b = self.vertex(vs[j] as usize);
                    let dist2: f64 = (0..d).map(|k| (a[k] - b[k]).powi(2)).sum();
                    diam = diam.max(dist2.sqrt());
                }
            }
            let inradius = self.dim as f64 * vol / surface;
            worst = worst.min(inradius / diam);
        }
        worst
    }

    /// Plain-text export: vertex table then simplex table.
    pub fn write_text(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# vertices {} dim {}", self.n_vertices(), self.dim)?;
        writeln!(w, "# index x y{}", if self.dim == 3 { " z" } else { "" })?;
        for i in 0..self.n_vertices() {
            let v = self.vertex(i);
            write!(w, "{i}")?;
            for c in v {
                write!(w, " {c:.17e}")?;
            }
            writeln!(w)?;
        }
        writeln!(w, "# simplices {} nodes-per-simplex {}", self.n_simplices(), self.dim + 1)?;
        for e in 0..self.n_simplices() {
            let s = self.simplex(e);
            let parts: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", parts.join(" "))?;
        }
        Ok(())
    }

    /// ASCII legacy unstructured-grid export for external viewers.
    pub fn write_vtk(&self, w: &mut impl Write, point_data: Option<(&str, usize, &[f64])>) -> Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "structured simplicial mesh level {}", self.level)?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.n_vertices())?;
        for i in 0..self.n_vertices() {
            let v = self.vertex(i);
            let z = if self.dim == 3 { v[2] } else { 0.0 };
            writeln!(w, "{:.17e} {:.17e} {:.17e}", v[0], v[1], z)?;
        }
        let s = self.dim + 1;
        writeln!(w, "CELLS {} {}", self.n_simplices(), self.n_simplices() * (s + 1))?;
        for e in 0..self.n_simplices() {
            let parts: Vec<String> = self.simplex(e).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{} {}", s, parts.join(" "))?;
        }
        writeln!(w, "CELL_TYPES {}", self.n_simplices())?;
        let ct = if self.dim == 3 { 10 } else { 5 };
        for _ in 0..self.n_simplices() {
            writeln!(w, "{ct}")?;
        }
        if let Some((name, comps, values)) = point_data {
            writeln!(w, "POINT_DATA {}", self.n_vertices())?;
            writeln!(w, "FIELD solution 1")?;
            writeln!(w, "{name} {comps} {} double", self.n_vertices())?;
            for i in 0..self.n_vertices() {
                let parts: Vec<String> = (0..comps)
                    .map(|c| format!("{:.17e}", values[i * comps + c]))
                    .collect();
                writeln!(w, "{}", parts.join(" "))?;
            }
        }
        Ok(())
    }
}
