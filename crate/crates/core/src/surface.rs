//! Genus-2 base surface: regular octagon with opposite sides glued, and its meshes.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyp::{self, DiskPoint, LocalPoint, MobiusTransform};

pub const MAX_LEVEL: usize = 8;
/// Spatial tolerance for matching glued boundary vertices (disk coordinates).
pub const GLUE_TOLERANCE: f64 = 1e-9;
/// Ratio between consecutive rings of a graded refinement.
pub const RING_RATIO: f64 = 0.6;

/// `cosh R0 = cot²(π/8)`.
pub fn octagon_circumradius() -> f64 {
    let c = 1.0 / FRAC_PI_8.tan();
    (c * c).acosh()
}

/// Distance from the center to each side: `cosh r = cot(π/8)`.
pub fn octagon_inradius() -> f64 {
    (1.0 / FRAC_PI_8.tan()).acosh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidePairing {
    /// Side mapped by `transform` onto `target`.
    pub source: usize,
    pub target: usize,
    pub transform: MobiusTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalDomain {
    pub vertices: Vec<DiskPoint>,
    pub pairings: Vec<SidePairing>,
    pub area: f64,
    pub circumradius: f64,
    pub inradius: f64,
}

impl FundamentalDomain {
    /// Translation along the normal of side `j` by twice the inradius.
    ///
    /// Maps side `(j + 4) mod 8` onto side `j`.
    pub fn generator(&self, j: usize) -> MobiusTransform {
        MobiusTransform::translation((j % 8) as f64 * FRAC_PI_4, 2.0 * self.inradius)
    }

    /// Signed distance beyond side `k` (positive outside the octagon).
    pub fn side_excess(&self, z: Complex64, k: usize) -> f64 {
        let w = z * Complex64::from_polar(1.0, -(k as f64) * FRAC_PI_4);
        let w = MobiusTransform::translation(0.0, -self.inradius).apply_c(w);
        (2.0 * w.re / (1.0 - w.norm_sqr())).asinh()
    }

    /// Largest signed distance beyond any side; `<= 0` inside the closed octagon.
    pub fn max_excess(&self, z: Complex64) -> (usize, f64) {
        (0..8)
            .map(|k| (k, self.side_excess(z, k)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    }

    /// Move `z` into the closed octagon with deck transformations.
    ///
    /// Returns the reduced point and the transform that produced it.
    pub fn reduce(&self, z: Complex64) -> Result<(Complex64, MobiusTransform)> {
        let mut w = z;
        let mut acc = MobiusTransform::identity();
        for _ in 0..256 {
            let (k, e) = self.max_excess(w);
            if e <= 1e-13 {
                return Ok((w, acc));
            }
            let g = self.generator(k + 4);
            w = g.apply_c(w);
            acc = g.compose(&acc);
        }
        Err(Error::Range(format!("could not reduce ({}, {}) to the octagon", z.re, z.im)))
    }

    /// Whether the hyperbolic ball of radius `r` about `z` lies in the open octagon.
    pub fn contains_ball(&self, z: Complex64, r: f64) -> bool {
        (0..8).all(|k| self.side_excess(z, k) < -r)
    }
}

/// Regular octagon with angles π/4 centered at the origin, opposite sides paired.
pub fn build_octagon_domain() -> FundamentalDomain {
    let circumradius = octagon_circumradius();
    let inradius = octagon_inradius();
    let rad = (0.5 * circumradius).tanh();
    let vertices: Vec<DiskPoint> = (0..8)
        .map(|k| {
            let a = (2.0 * k as f64 - 1.0) * FRAC_PI_8;
            DiskPoint { x: rad * a.cos(), y: rad * a.sin() }
        })
        .collect();
    let origin = LocalPoint::at(Complex64::new(0.0, 0.0));
    let area = (0..8)
        .map(|k| {
            hyp::triangle_area(
                &origin,
                &LocalPoint::at(vertices[k].to_complex()),
                &LocalPoint::at(vertices[(k + 1) % 8].to_complex()),
            )
        })
        .sum();
    let pairings = (0..4)
        .map(|j| SidePairing {
            source: j + 4,
            target: j,
            transform: MobiusTransform::translation(j as f64 * FRAC_PI_4, 2.0 * inradius),
        })
        .collect();
    FundamentalDomain { vertices, pairings, area, circumradius, inradius }
}

/// Translation lengths of the side-pairing transforms.
pub fn generator_translation_lengths(domain: &FundamentalDomain) -> Result<Vec<f64>> {
    domain
        .pairings
        .iter()
        .map(|p| p.transform.translation_length())
        .collect()
}

/// Glued triangle mesh of the octagon.
///
/// Vertices are stored per local copy; `rep` maps each copy to its glued vertex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub points: Vec<LocalPoint>,
    pub rep: Vec<usize>,
    pub n_rep: usize,
    pub tris: Vec<[usize; 3]>,
    /// Glued edges as pairs of local vertex indices.
    pub edges: Vec<[usize; 2]>,
    pub len_sigma: Vec<f64>,
    pub area_sigma: Vec<f64>,
    pub level: usize,
    /// Boundary edges of the octagon with their side index.
    pub boundary: Vec<([usize; 2], usize)>,
}

#[derive(Serialize)]
struct MeshExport<'a> {
    level: usize,
    vertices: Vec<[f64; 2]>,
    tris: &'a [[usize; 3]],
    rep: &'a [usize],
    edges: &'a [[usize; 2]],
    len_sigma: &'a [f64],
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let next = self.0[i];
            self.0[i] = r;
            i = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl SurfaceMesh {
    pub fn n_vertices(&self) -> usize {
        self.n_rep
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.tris.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_rep as i64 - self.edges.len() as i64 + self.tris.len() as i64
    }

    pub fn total_sigma_area(&self) -> f64 {
        self.area_sigma.iter().sum()
    }

    pub fn point(&self, i: usize) -> Complex64 {
        self.points[i].z()
    }

    /// One local copy for each glued vertex.
    pub fn representatives(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.n_rep];
        for (i, &r) in self.rep.iter().enumerate() {
            if out[r] == usize::MAX {
                out[r] = i;
            }
        }
        out
    }

    /// Lumped σ-area per glued vertex (one third of each incident triangle).
    pub fn vertex_sigma_areas(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_rep];
        for (t, a) in self.tris.iter().zip(&self.area_sigma) {
            for &i in t {
                m[self.rep[i]] += a / 3.0;
            }
        }
        m
    }

    /// Adjacency lists over glued vertices, weighted by `weight(edge index)`.
    pub fn adjacency<F: Fn(usize) -> f64>(&self, weight: F) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_rep];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let (ra, rb) = (self.rep[a], self.rep[b]);
            if ra == rb {
                continue;
            }
            let w = weight(e);
            adj[ra].push((rb, w));
            adj[rb].push((ra, w));
        }
        adj
    }

    pub fn to_json(&self) -> Result<String> {
        let export = MeshExport {
            level: self.level,
            vertices: self.points.iter().map(|p| [p.z().re, p.z().im]).collect(),
            tris: &self.tris,
            rep: &self.rep,
            edges: &self.edges,
            len_sigma: &self.len_sigma,
        };
        Ok(serde_json::to_string(&export)?)
    }

    /// Rebuild gluing, edges and σ-quantities after the local structure changed.
    fn finalize(&mut self, domain: &FundamentalDomain) -> Result<()> {
        let n = self.points.len();
        let mut uf = UnionFind((0..n).collect());
        // boundary vertices per side, in local indices
        let mut side_verts: Vec<Vec<usize>> = vec![Vec::new(); 8];
        for &([a, b], s) in &self.boundary {
            side_verts[s].push(a);
            side_verts[s].push(b);
        }
        for v in side_verts.iter_mut() {
            v.sort_unstable();
            v.dedup();
        }
        // partner[i] on a source side = matching local vertex on the target side
        let mut partner: HashMap<(usize, usize), usize> = HashMap::new();
        for p in &domain.pairings {
            let targets = &side_verts[p.target];
            if side_verts[p.source].len() != targets.len() {
                return Err(Error::Topology(format!(
                    "side {} has {} vertices but side {} has {}",
                    p.source,
                    side_verts[p.source].len(),
                    p.target,
                    targets.len()
                )));
            }
            for &i in &side_verts[p.source] {
                let img = p.transform.apply_c(self.points[i].z());
                let (best, dist) = targets
                    .iter()
                    .map(|&j| (j, (self.points[j].z() - img).norm()))
                    .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                if dist > GLUE_TOLERANCE {
                    return Err(Error::Topology(format!(
                        "boundary vertex {i} on side {} has no partner (gap {dist:e})",
                        p.source
                    )));
                }
                uf.union(i, best);
                partner.insert((p.source, i), best);
            }
        }
        let mut compact = HashMap::new();
        self.rep = (0..n)
            .map(|i| {
                let r = uf.find(i);
                let next = compact.len();
                *compact.entry(r).or_insert(next)
            })
            .collect();
        self.n_rep = compact.len();

        // glued edge keys: boundary edges on source sides use the target copy
        let mut source_edge: HashMap<(usize, usize), [usize; 2]> = HashMap::new();
        for &([a, b], s) in &self.boundary {
            if s >= 4 {
                let pa = partner[&(s, a)];
                let pb = partner[&(s, b)];
                source_edge.insert((a.min(b), a.max(b)), [pa.min(pb), pa.max(pb)]);
            }
        }
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut count: Vec<usize> = Vec::new();
        let mut edges = Vec::new();
        for t in &self.tris {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key0 = (a.min(b), a.max(b));
                let key = source_edge.get(&key0).copied().unwrap_or([key0.0, key0.1]);
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    count.push(0);
                    edges.len() - 1
                });
                count[idx] += 1;
            }
        }
        if let Some(pos) = count.iter().position(|&c| c != 2) {
            return Err(Error::Topology(format!(
                "edge {:?} has {} incident triangles",
                edges[pos], count[pos]
            )));
        }
        self.len_sigma = edges
            .iter()
            .map(|&[a, b]| self.points[a].distance(&self.points[b]))
            .collect();
        self.edges = edges;
        self.area_sigma = self
            .tris
            .iter()
            .map(|t| hyp::triangle_area(&self.points[t[0]], &self.points[t[1]], &self.points[t[2]]))
            .collect();
        self.check_quality()
    }

    fn check_quality(&self) -> Result<()> {
        for (t, &area) in self.tris.iter().zip(&self.area_sigma) {
            let p = [&self.points[t[0]], &self.points[t[1]], &self.points[t[2]]];
            let longest = (0..3)
                .map(|k| p[k].distance(p[(k + 1) % 3]))
                .fold(0.0, f64::max);
            if !(area > 0.0) || area < 1e-14 * longest * longest {
                return Err(Error::MeshQuality(format!("degenerate triangle {t:?}")));
            }
            let d1 = p[0].delta_to(p[1]);
            let d2 = p[0].delta_to(p[2]);
            if (d1.conj() * d2).im <= 0.0 {
                return Err(Error::MeshQuality(format!("inverted triangle {t:?}")));
            }
        }
        Ok(())
    }

    /// Index of the local vertex closest to `z`.
    pub fn nearest_vertex(&self, z: Complex64) -> usize {
        (0..self.points.len())
            .min_by(|&a, &b| {
                let da = (self.points[a].z() - z).norm();
                let db = (self.points[b].z() - z).norm();
                da.partial_cmp(&db).unwrap_or(Ordering::Equal)
            })
            .unwrap_or(0)
    }
}

/// Fan from the center followed by `level` rounds of 4-way subdivision.
///
/// New vertices are placed at hyperbolic midpoints, so side vertices are
/// carried onto side vertices by the pairings.
pub fn build_mesh(domain: &FundamentalDomain, level: usize) -> Result<SurfaceMesh> {
    if level > MAX_LEVEL {
        return Err(Error::Domain(format!("mesh level {level} exceeds {MAX_LEVEL}")));
    }
    let mut pts: Vec<Complex64> = vec![Complex64::new(0.0, 0.0)];
    pts.extend(domain.vertices.iter().map(|v| v.to_complex()));
    let mut tris: Vec<[usize; 3]> = (0..8).map(|k| [0, k + 1, (k + 1) % 8 + 1]).collect();
    let mut boundary: Vec<([usize; 2], usize)> = (0..8).map(|k| ([k + 1, (k + 1) % 8 + 1], k)).collect();

    for _ in 0..level {
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, pts: &mut Vec<Complex64>| -> usize {
            let key = (a.min(b), a.max(b));
            *mids.entry(key).or_insert_with(|| {
                pts.push(hyp::hyperbolic_midpoint(pts[a], pts[b]));
                pts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for &[a, b, c] in &tris {
            let ab = mid(a, b, &mut pts);
            let bc = mid(b, c, &mut pts);
            let ca = mid(c, a, &mut pts);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        tris = next;
        boundary = boundary
            .iter()
            .flat_map(|&([a, b], s)| {
                let m = mids[&(a.min(b), a.max(b))];
                [([a, m], s), ([m, b], s)]
            })
            .collect();
    }
    let mut mesh = SurfaceMesh {
        points: pts.into_iter().map(LocalPoint::at).collect(),
        rep: Vec::new(),
        n_rep: 0,
        tris,
        edges: Vec::new(),
        len_sigma: Vec::new(),
        area_sigma: Vec::new(),
        level,
        boundary,
    };
    mesh.finalize(domain)?;
    Ok(mesh)
}

/// Replace the star of `anchor` by geometrically shrinking rings.
///
/// Rings are scaled copies (ratio [`RING_RATIO`], in the isometric chart
/// centered at the anchor) of the anchor's link, continued until the ring
/// radius drops below `min_radius`. New vertices are stored relative to the
/// anchor so that arbitrarily small rings stay exactly representable.
pub fn refine_around(
    mesh: &SurfaceMesh,
    domain: &FundamentalDomain,
    anchor: usize,
    min_radius: f64,
) -> Result<SurfaceMesh> {
    if !(min_radius > 0.0) {
        return Err(Error::Domain(format!("refinement radius {min_radius} must be positive")));
    }
    if mesh.boundary.iter().any(|&([a, b], _)| a == anchor || b == anchor) {
        return Err(Error::Domain(format!("anchor {anchor} lies on the octagon boundary")));
    }
    let star: Vec<usize> = (0..mesh.tris.len())
        .filter(|&t| mesh.tris[t].contains(&anchor))
        .collect();
    if star.is_empty() {
        return Err(Error::Domain(format!("anchor {anchor} is not a mesh vertex")));
    }
    // link edges (b, c) oriented counter-clockwise around the anchor
    let mut next_of: HashMap<usize, usize> = HashMap::new();
    for &t in &star {
        let tri = mesh.tris[t];
        let k = tri.iter().position(|&v| v == anchor).unwrap_or(0);
        next_of.insert(tri[(k + 1) % 3], tri[(k + 2) % 3]);
    }
    let start = mesh.tris[star[0]]
        .iter()
        .copied()
        .find(|&v| v != anchor)
        .unwrap_or(0);
    let mut link = vec![start];
    loop {
        let n = *next_of
            .get(link.last().unwrap_or(&start))
            .ok_or_else(|| Error::Topology(format!("open link around vertex {anchor}")))?;
        if n == start {
            break;
        }
        if link.len() > star.len() {
            return Err(Error::Topology(format!("non-manifold link around vertex {anchor}")));
        }
        link.push(n);
    }

    let center = mesh.points[anchor].z();
    let to0 = MobiusTransform::recenter(center);
    let ws: Vec<Complex64> = link.iter().map(|&v| to0.apply_c(mesh.points[v].z())).collect();
    let outer = ws.iter().map(|w| w.norm()).fold(f64::INFINITY, f64::min);
    let s = 1.0 - center.norm_sqr();

    let mut out = mesh.clone();
    out.points[anchor] = LocalPoint::at(center);
    out.tris = mesh
        .tris
        .iter()
        .enumerate()
        .filter(|(t, _)| !star.contains(t))
        .map(|(_, &t)| t)
        .collect();
    let mut ring = link.clone();
    let mut scale = 1.0;
    while 2.0 * (scale * outer).atanh() >= min_radius {
        scale *= RING_RATIO;
        let inner: Vec<usize> = ws
            .iter()
            .map(|w| {
                let w = w * scale;
                // recenter^{-1}(w) - center = w (1 - |c|^2) / (1 + conj(c) w)
                let offset = w * s / (Complex64::new(1.0, 0.0) + center.conj() * w);
                out.points.push(LocalPoint::with_offset(center, offset));
                out.points.len() - 1
            })
            .collect();
        let n = ring.len();
        for i in 0..n {
            let j = (i + 1) % n;
            out.tris.push([ring[i], ring[j], inner[j]]);
            out.tris.push([ring[i], inner[j], inner[i]]);
        }
        ring = inner;
    }
    let n = ring.len();
    for i in 0..n {
        out.tris.push([anchor, ring[i], ring[(i + 1) % n]]);
    }
    out.finalize(domain)?;
    Ok(out)
}

/// Graded refinement around the mesh vertex located at `z`.
///
/// The vertex is snapped to `z` exactly so that ring offsets are measured
/// from the same base point used by fields anchored at `z`.
pub fn refine_at(mesh: &SurfaceMesh, domain: &FundamentalDomain, z: Complex64, min_radius: f64) -> Result<SurfaceMesh> {
    let i = mesh.nearest_vertex(z);
    if (mesh.point(i) - z).norm() > 1e-12 {
        return Err(Error::Domain(format!("({}, {}) is not a mesh vertex", z.re, z.im)));
    }
    let mut m = mesh.clone();
    m.points[i] = LocalPoint::at(z);
    refine_around(&m, domain, i, min_radius)
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal)
    }
}

/// Single-source shortest path lengths over an adjacency list.
pub fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(HeapItem(nd, w));
            }
        }
    }
    dist
}

/// Largest shortest-path distance over all vertex pairs.
pub fn graph_diameter(adj: &[Vec<(usize, f64)>]) -> f64 {
    (0..adj.len())
        .into_par_iter()
        .map(|s| dijkstra(adj, s).into_iter().fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// The base hyperbolic surface σ and its cached constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperbolicSurface {
    pub domain: FundamentalDomain,
    pub total_area: f64,
    pub systole: f64,
    pub inj_radius: f64,
    pub base_spectrum: Vec<f64>,
    pub diameter_estimate: f64,
}

impl HyperbolicSurface {
    /// Regular octagon surface with diameter estimated on a mesh of `diameter_level`.
    pub fn regular_octagon(diameter_level: usize) -> Result<Self> {
        let domain = build_octagon_domain();
        let lengths = generator_translation_lengths(&domain)?;
        let systole = lengths.iter().copied().fold(f64::INFINITY, f64::min);
        let mesh = build_mesh(&domain, diameter_level)?;
        let diameter_estimate = graph_diameter(&mesh.adjacency(|e| mesh.len_sigma[e]));
        Ok(HyperbolicSurface {
            domain,
            total_area: 4.0 * PI,
            systole,
            inj_radius: 0.5 * systole,
            base_spectrum: Vec::new(),
            diameter_estimate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn octagon_constants() {
        let d = build_octagon_domain();
        assert!((d.circumradius - 2.4485).abs() < 1e-4);
        assert!((d.area - 4.0 * PI).abs() < 1e-8);
        assert!((d.inradius - 1.5286).abs() < 1e-4);
    }

    #[test]
    fn pairings_match_side_endpoints() {
        let d = build_octagon_domain();
        for p in &d.pairings {
            let s0 = d.vertices[p.source].to_complex();
            let s1 = d.vertices[(p.source + 1) % 8].to_complex();
            let t0 = d.vertices[p.target].to_complex();
            let t1 = d.vertices[(p.target + 1) % 8].to_complex();
            assert!((p.transform.apply_c(s0) - t1).norm() < 1e-10);
            assert!((p.transform.apply_c(s1) - t0).norm() < 1e-10);
        }
    }

    #[test]
    fn pairings_are_isometries_on_sides() {
        let d = build_octagon_domain();
        for p in &d.pairings {
            let a = d.vertices[p.source].to_complex();
            let b = d.vertices[(p.source + 1) % 8].to_complex();
            let m = hyp::hyperbolic_midpoint(a, b);
            let n = hyp::hyperbolic_midpoint(a, m);
            let before = hyp::distance_c(m, n);
            let after = hyp::distance_c(p.transform.apply_c(m), p.transform.apply_c(n));
            assert!((before - after).abs() < 1e-10);
            assert!(d.side_excess(p.transform.apply_c(n), p.target).abs() < 1e-10);
        }
    }

    #[test]
    fn translation_lengths() {
        let d = build_octagon_domain();
        let l = generator_translation_lengths(&d).unwrap();
        let expected = 2.0 * (1.0 + 2f64.sqrt()).acosh();
        for &x in &l {
            assert!((x - expected).abs() < 1e-10);
        }
        assert!((expected - 3.0571).abs() < 1e-4);
    }

    #[test]
    fn non_hyperbolic_pairing_rejected() {
        let mut d = build_octagon_domain();
        d.pairings[0].transform = MobiusTransform::rotation(0.3);
        assert!(matches!(generator_translation_lengths(&d), Err(Error::Construction(_))));
    }

    #[test]
    fn euler_characteristic_levels() {
        let d = build_octagon_domain();
        let m0 = build_mesh(&d, 0).unwrap();
        assert_eq!((m0.n_vertices(), m0.n_edges(), m0.n_faces()), (2, 12, 8));
        for level in 0..=4 {
            assert_eq!(build_mesh(&d, level).unwrap().euler_characteristic(), -2);
        }
        assert!(build_mesh(&d, 9).is_err());
    }

    #[test]
    fn sigma_area_converges() {
        let d = build_octagon_domain();
        let m = build_mesh(&d, 3).unwrap();
        assert!((m.total_sigma_area() / (4.0 * PI) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn reduce_brings_points_into_domain() {
        let d = build_octagon_domain();
        let g = d.generator(2);
        let z = Complex64::new(0.1, -0.05);
        let (w, t) = d.reduce(g.apply_c(z)).unwrap();
        assert!((w - z).norm() < 1e-10);
        assert!((t.apply_c(g.apply_c(z)) - z).norm() < 1e-10);
        let far = d.generator(1).compose(&d.generator(6)).apply_c(Complex64::new(0.3, 0.2));
        let (w, _) = d.reduce(far).unwrap();
        assert!(d.max_excess(w).1 <= 1e-12);
    }

    #[test]
    fn refinement_keeps_topology() {
        let d = build_octagon_domain();
        let m = build_mesh(&d, 2).unwrap();
        let r = refine_around(&m, &d, 0, 1e-30).unwrap();
        assert_eq!(r.euler_characteristic(), -2);
        assert!((r.total_sigma_area() - m.total_sigma_area()).abs() < 0.05);
        let q = hyp::hyperbolic_midpoint(Complex64::new(0.0, 0.0), d.vertices[0].to_complex());
        let qi = r.nearest_vertex(q);
        assert!((r.point(qi) - q).norm() < 1e-12);
        let r2 = refine_around(&r, &d, qi, 1e-40).unwrap();
        assert_eq!(r2.euler_characteristic(), -2);
        assert!(r2.area_sigma.iter().all(|&a| a > 0.0));
        let corner = 1;
        assert!(refine_around(&m, &d, corner, 1e-3).is_err());
    }

    #[test]
    fn diameter_estimate_reasonable() {
        let s = HyperbolicSurface::regular_octagon(3).unwrap();
        assert!(s.diameter_estimate > 2.4 && s.diameter_estimate < 3.2);
        assert!((s.inj_radius - 1.5286).abs() < 1e-4);
    }

    #[test]
    fn mesh_json_fields() {
        let d = build_octagon_domain();
        let m = build_mesh(&d, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        for key in ["vertices", "tris", "rep", "len_sigma"] {
            assert!(v.get(key).is_some());
        }
    }
}
