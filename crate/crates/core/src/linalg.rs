//! Sparse symmetric matrices, cotangent stiffness and envelope Cholesky.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::surface::SurfaceMesh;

/// Symmetric matrix in CSR form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseSym {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut trips: Vec<(usize, usize, f64)>) -> Self {
        trips.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(trips.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last = None;
        for (r, c, v) in trips {
            if last == Some((r, c)) {
                if let Some(x) = vals.last_mut() {
                    *x += v;
                }
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSym { n, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).filter(|&(j, _)| j == i).map(|(_, v)| v).sum())
            .collect()
    }

    /// `self + s * diag(d)`.
    pub fn add_diagonal(&self, s: f64, d: &[f64]) -> SparseSym {
        let mut out = self.clone();
        for i in 0..self.n {
            let mut found = false;
            for p in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.cols[p] == i {
                    out.vals[p] += s * d[i];
                    found = true;
                }
            }
            if !found {
                let mut trips: Vec<(usize, usize, f64)> = (0..self.n)
                    .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
                    .collect();
                trips.extend((0..self.n).map(|r| (r, r, s * d[r])));
                return SparseSym::from_triplets(self.n, trips);
            }
        }
        out
    }
}

/// Per-triangle cotangent weights `½ cot θ` for the edges opposite each vertex.
fn triangle_cotangents(mesh: &SurfaceMesh, t: usize) -> Result<[f64; 3]> {
    let tri = mesh.tris[t];
    let p = [&mesh.points[tri[0]], &mesh.points[tri[1]], &mesh.points[tri[2]]];
    let mut out = [0.0; 3];
    for k in 0..3 {
        let e1 = p[k].delta_to(p[(k + 1) % 3]);
        let e2 = p[k].delta_to(p[(k + 2) % 3]);
        let cross = e1.re * e2.im - e1.im * e2.re;
        let dot = e1.re * e2.re + e1.im * e2.im;
        if !(cross.abs() > 0.0) || !cross.is_finite() {
            return Err(Error::MeshQuality(format!("degenerate triangle {tri:?}")));
        }
        out[k] = 0.5 * dot / cross.abs();
    }
    Ok(out)
}

/// Cotangent stiffness matrix over glued vertices.
///
/// Computed from disk coordinates only, so it is the same for every
/// conformal factor on the mesh.
pub fn stiffness_matrix(mesh: &SurfaceMesh) -> Result<SparseSym> {
    let local: Vec<[f64; 3]> = (0..mesh.tris.len())
        .into_par_iter()
        .map(|t| triangle_cotangents(mesh, t))
        .collect::<Result<_>>()?;
    let mut trips = Vec::with_capacity(mesh.tris.len() * 9);
    let mut negative = 0usize;
    for (tri, w) in mesh.tris.iter().zip(&local) {
        for k in 0..3 {
            let i = mesh.rep[tri[(k + 1) % 3]];
            let j = mesh.rep[tri[(k + 2) % 3]];
            if w[k] < 0.0 {
                negative += 1;
            }
            if i == j {
                continue;
            }
            trips.push((i, j, -w[k]));
            trips.push((j, i, -w[k]));
            trips.push((i, i, w[k]));
            trips.push((j, j, w[k]));
        }
    }
    if negative > 0 {
        log::debug!("{negative} negative cotangent weights in stiffness assembly");
    }
    Ok(SparseSym::from_triplets(mesh.n_rep, trips))
}

/// Reverse Cuthill–McKee ordering; returns `perm[new] = old`.
pub fn rcm_ordering(a: &SparseSym) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs = |start: usize, visited: &mut Vec<bool>, out: &mut Vec<usize>| {
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            out.push(v);
            let mut nb: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nb.sort_by_key(|&j| (degree[j], j));
            for j in nb {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: last vertex of a BFS from the seed, twice
        let mut start = seed;
        for _ in 0..2 {
            let mut tmp_vis = visited.clone();
            let mut tmp = Vec::new();
            bfs(start, &mut tmp_vis, &mut tmp);
            let far = tmp.len().saturating_sub(1);
            let tail = tmp[far.saturating_sub(tmp.len() / 10)..].to_vec();
            start = tail.into_iter().min_by_key(|&j| (degree[j], j)).unwrap_or(start);
        }
        bfs(start, &mut visited, &mut order);
    }
    order.reverse();
    order
}

/// Cholesky factor stored by rows inside the matrix envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.n;
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(perm[i]).map(|(j, _)| inv[j]).filter(|&j| j <= i).min().unwrap_or(i))
            .collect();
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(perm[i]) {
                let jn = inv[j];
                if jn <= i {
                    data[start[i] + jn - first[i]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (head, row_i) = data.split_at_mut(start[i]);
                let row_j = &head[start[j]..start[j + 1]];
                let s: f64 = row_i[k0 - fi..j - fi]
                    .iter()
                    .zip(&row_j[k0 - fj..j - fj])
                    .map(|(x, y)| x * y)
                    .sum();
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - s) / ljj;
            }
            let row_i = &mut data[start[i]..start[i + 1]];
            let (off, diag) = row_i.split_at_mut(i - fi);
            let d = diag[0] - off.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::Numeric(format!(
                    "matrix not positive definite at pivot {i} ({d:e})"
                )));
            }
            diag[0] = d.sqrt();
        }
        Ok(EnvelopeCholesky { perm, first, start, data })
    }

    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for (k, l) in (fi..i).zip(&row[..i - fi]) {
                y[k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_mesh, build_octagon_domain};

    fn laplacian_1d(n: usize) -> SparseSym {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 0.1 * i as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseSym::from_triplets(n, t)
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let a = laplacian_1d(50);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = f.solve(&b);
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SparseSym::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::Numeric(_))));
    }

    #[test]
    fn stiffness_kills_constants() {
        let d = build_octagon_domain();
        let m = build_mesh(&d, 3).unwrap();
        let k = stiffness_matrix(&m).unwrap();
        let ones = vec![1.0; k.n];
        let r = k.mul_vec(&ones);
        assert!(r.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-10);
        let x: Vec<f64> = (0..k.n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        assert!(k.quad_form(&x) > 0.0);
    }

    #[test]
    fn rcm_is_permutation() {
        let d = build_octagon_domain();
        let m = build_mesh(&d, 2).unwrap();
        let k = stiffness_matrix(&m).unwrap();
        let mut p = rcm_ordering(&k);
        p.sort_unstable();
        assert_eq!(p, (0..k.n).collect::<Vec<_>>());
    }
}
