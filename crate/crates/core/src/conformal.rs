//! Conformal metrics `g = e^{2u} σ` on the base surface.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyp::{self, LocalPoint, MobiusTransform};
use crate::linalg;
use crate::quad;
use crate::surface::{HyperbolicSurface, SurfaceMesh};

/// Default tolerance of the nonpositivity test for analytic fields.
pub const NONPOSITIVITY_TOL_ANALYTIC: f64 = 1e-6;
/// Default tolerance of the nonpositivity test for mesh-sampled fields.
pub const NONPOSITIVITY_TOL_MESH: f64 = 1e-2;
pub const BISECTION_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;

/// A radial profile `f(r)` contributing to `u`, with its first two derivatives.
pub trait Profile: Send + Sync + fmt::Debug {
    /// `[f, f', f'']` at distance `r >= 0`.
    fn eval(&self, r: f64) -> [f64; 3];
    /// The profile vanishes identically for `r >= support`.
    fn support(&self) -> f64;
    /// Radii where the profile changes regime, increasing, ending at `support`.
    fn breakpoints(&self) -> Vec<f64>;
}

/// Where a profile is centered: a point, or a closed geodesic lifted to a diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Anchor {
    Point(Complex64),
    Geodesic { direction: f64, length: f64 },
}

impl Anchor {
    /// σ-distance from the anchor (unsigned for geodesics).
    pub fn distance(&self, p: &LocalPoint) -> f64 {
        match *self {
            Anchor::Point(c) => LocalPoint::at(c).distance(p),
            Anchor::Geodesic { direction, .. } => hyp::signed_distance_to_diameter(p.z(), direction).abs(),
        }
    }

    /// σ-area element of the chart, integrated over the angular variable.
    pub fn jacobian(&self, r: f64) -> f64 {
        match *self {
            Anchor::Point(_) => 2.0 * std::f64::consts::PI * r.sinh(),
            Anchor::Geodesic { length, .. } => 2.0 * length * r.cosh(),
        }
    }

    /// σ-Laplacian of `f(distance)` given `[f, f', f'']`.
    pub fn laplacian(&self, r: f64, d: [f64; 3]) -> f64 {
        match self {
            Anchor::Point(_) => {
                if r == 0.0 {
                    2.0 * d[2]
                } else {
                    d[2] + d[1] / r.tanh()
                }
            }
            Anchor::Geodesic { .. } => d[2] + r.tanh() * d[1],
        }
    }

    /// Euclidean gradient of the distance function at `p` (disk coordinates).
    pub fn distance_gradient(&self, p: &LocalPoint) -> Complex64 {
        let z = p.z();
        match *self {
            Anchor::Point(c) => {
                let w = LocalPoint::at(c).recentered(p);
                let n = w.norm();
                if n == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                MobiusTransform::recenter(c).derivative(z).conj() * (w / n) * (2.0 / (1.0 - n * n))
            }
            Anchor::Geodesic { direction, .. } => {
                let s = hyp::signed_distance_to_diameter(z, direction);
                hyp::signed_distance_to_diameter_grad(z, direction) * s.signum()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Term {
    pub anchor: Anchor,
    pub profile: Arc<dyn Profile>,
}

/// `u = offset + Σ profile_i(dist(anchor_i, ·))` with disjoint supports.
#[derive(Debug, Clone)]
pub struct AnalyticField {
    pub offset: f64,
    pub terms: Vec<Term>,
}

impl AnalyticField {
    pub fn constant(c: f64) -> Self {
        AnalyticField { offset: c, terms: Vec::new() }
    }

    pub fn value(&self, p: &LocalPoint) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|t| {
                    let r = t.anchor.distance(p);
                    if r < t.profile.support() {
                        t.profile.eval(r)[0]
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
    }

    pub fn laplacian(&self, p: &LocalPoint) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let r = t.anchor.distance(p);
                if r < t.profile.support() {
                    t.anchor.laplacian(r, t.profile.eval(r))
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn gradient(&self, p: &LocalPoint) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let r = t.anchor.distance(p);
                if r < t.profile.support() {
                    t.anchor.distance_gradient(p) * t.profile.eval(r)[1]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .sum()
    }

    /// `(min, max)` of `u` over the surface.
    pub fn extremes(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for t in &self.terms {
            let (a, b) = profile_range(t.profile.as_ref(), |_, d| d[0]);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (self.offset + lo, self.offset + hi)
    }

    /// Minimum of `Δ_σ u + 1` over the profile scan.
    pub fn min_laplacian_plus_one(&self) -> f64 {
        let mut m = 1.0f64;
        for t in &self.terms {
            let anchor = t.anchor;
            let (lo, _) = profile_range(t.profile.as_ref(), |r, d| 1.0 + anchor.laplacian(r, d));
            m = m.min(lo);
        }
        m
    }

    /// `∫ e^{2u} dv_σ` by chart integrals of each profile.
    pub fn area(&self, base_area: f64) -> f64 {
        let e0 = (2.0 * self.offset).exp();
        let mut total = e0 * base_area;
        for t in &self.terms {
            let f = |r: f64| (((2.0 * (self.offset + t.profile.eval(r)[0])).exp()) - e0) * t.anchor.jacobian(r);
            total += radial_integral(t.profile.as_ref(), &f);
        }
        total
    }

    /// `∫ Δ_σ u dv_σ` term by term in charts; zero up to quadrature for closed supports.
    pub fn laplacian_integral(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let f = |r: f64| t.anchor.laplacian(r, t.profile.eval(r)) * t.anchor.jacobian(r);
                radial_integral(t.profile.as_ref(), &f)
            })
            .sum()
    }
}

/// Integral over `[0, support]` split at the profile's breakpoints.
pub fn radial_integral<F: Fn(f64) -> f64>(profile: &dyn Profile, f: &F) -> f64 {
    let mut lo = 0.0;
    let mut total = 0.0;
    for b in profile.breakpoints() {
        if b > lo {
            total += quad::integrate_radial(f, lo, b);
            lo = b;
        }
    }
    total
}

/// Scan `g(r, f(r))` over the support of a profile and refine both extremes.
pub fn profile_range<G: Fn(f64, [f64; 3]) -> f64>(profile: &dyn Profile, g: G) -> (f64, f64) {
    let h = |r: f64| g(r, profile.eval(r));
    let mut samples: Vec<f64> = vec![0.0];
    let mut lo = 0.0;
    for b in profile.breakpoints() {
        if b <= lo {
            continue;
        }
        let n = 256;
        if lo > 0.0 && b / lo > 4.0 {
            let (la, lb) = (lo.ln(), b.ln());
            samples.extend((1..=n).map(|i| (la + (lb - la) * i as f64 / n as f64).exp()));
        } else {
            samples.extend((1..=n).map(|i| lo + (b - lo) * i as f64 / n as f64));
        }
        lo = b;
    }
    let values: Vec<f64> = samples.iter().map(|&r| h(r)).collect();
    let refine = |sign: f64| -> f64 {
        let (mut best, mut bv) = (0, sign * values[0]);
        for (i, &v) in values.iter().enumerate() {
            if sign * v > bv {
                best = i;
                bv = sign * v;
            }
        }
        let a = samples[best.saturating_sub(1)];
        let b = samples[(best + 1).min(samples.len() - 1)];
        let mut out = bv;
        // golden-section search for a local optimum around the best sample
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x0, mut x1) = (a, b);
        for _ in 0..100 {
            let c = x1 - gr * (x1 - x0);
            let d = x0 + gr * (x1 - x0);
            let (fc, fd) = (sign * h(c), sign * h(d));
            out = out.max(fc).max(fd);
            if fc > fd {
                x1 = d;
            } else {
                x0 = c;
            }
        }
        sign * out
    };
    (refine(-1.0), refine(1.0))
}

/// Field given by one value per glued mesh vertex, linear on triangles.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub mesh: Arc<SurfaceMesh>,
    pub values: Vec<f64>,
    /// Discrete σ-Laplacian per glued vertex, `-(K u)_i / M_i`.
    pub laplacian: Vec<f64>,
}

impl SampledField {
    pub fn new(mesh: Arc<SurfaceMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_rep {
            return Err(Error::Domain(format!(
                "{} samples for {} mesh vertices",
                values.len(),
                mesh.n_rep
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite sample".into()));
        }
        let k = linalg::stiffness_matrix(&mesh)?;
        let m = mesh.vertex_sigma_areas();
        let ku = k.mul_vec(&values);
        let laplacian = ku.iter().zip(&m).map(|(a, b)| -a / b).collect();
        Ok(SampledField { mesh, values, laplacian })
    }

    /// Triangle containing `z` and its barycentric coordinates.
    fn locate(&self, z: Complex64) -> Option<(usize, [f64; 3])> {
        let mesh = &self.mesh;
        mesh.tris.iter().enumerate().find_map(|(t, tri)| {
            let p = LocalPoint::at(z);
            let a = mesh.points[tri[0]];
            let e1 = a.delta_to(&mesh.points[tri[1]]);
            let e2 = a.delta_to(&mesh.points[tri[2]]);
            let q = a.delta_to(&p);
            let det = e1.re * e2.im - e1.im * e2.re;
            let l1 = (q.re * e2.im - q.im * e2.re) / det;
            let l2 = (e1.re * q.im - e1.im * q.re) / det;
            let l0 = 1.0 - l1 - l2;
            let tol = -1e-12;
            (l0 >= tol && l1 >= tol && l2 >= tol).then_some((t, [l0, l1, l2]))
        })
    }

    pub fn value_at(&self, z: Complex64) -> Result<f64> {
        let (t, l) = self
            .locate(z)
            .ok_or_else(|| Error::Range(format!("({}, {}) is not covered by the mesh", z.re, z.im)))?;
        let tri = self.mesh.tris[t];
        Ok((0..3).map(|k| l[k] * self.values[self.mesh.rep[tri[k]]]).sum())
    }

    pub fn gradient_at(&self, z: Complex64) -> Result<Complex64> {
        let (t, _) = self
            .locate(z)
            .ok_or_else(|| Error::Range(format!("({}, {}) is not covered by the mesh", z.re, z.im)))?;
        let tri = self.mesh.tris[t];
        let a = self.mesh.points[tri[0]];
        let e1 = a.delta_to(&self.mesh.points[tri[1]]);
        let e2 = a.delta_to(&self.mesh.points[tri[2]]);
        let u: Vec<f64> = tri.iter().map(|&i| self.values[self.mesh.rep[i]]).collect();
        let (d1, d2) = (u[1] - u[0], u[2] - u[0]);
        let det = e1.re * e2.im - e1.im * e2.re;
        let gx = (d1 * e2.im - d2 * e1.im) / det;
        let gy = (e1.re * d2 - e2.re * d1) / det;
        Ok(Complex64::new(gx, gy))
    }
}

#[derive(Debug, Clone)]
pub enum ScalarField {
    Analytic(AnalyticField),
    Sampled(SampledField),
}

impl ScalarField {
    /// `u` at a point of the closed octagon.
    pub fn value(&self, p: &LocalPoint) -> Result<f64> {
        match self {
            ScalarField::Analytic(f) => Ok(f.value(p)),
            ScalarField::Sampled(f) => f.value_at(p.z()),
        }
    }

    /// Euclidean gradient of `u` in disk coordinates.
    pub fn gradient(&self, p: &LocalPoint) -> Result<Complex64> {
        match self {
            ScalarField::Analytic(f) => Ok(f.gradient(p)),
            ScalarField::Sampled(f) => f.gradient_at(p.z()),
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, ScalarField::Analytic(_))
    }
}

/// Serialized description of a metric: enough to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDescriptor {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub area: f64,
    pub max_u: f64,
}

impl MetricDescriptor {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `g = e^{2u} σ` with cached extremes and area.
#[derive(Debug, Clone)]
pub struct ConformalMetric {
    pub base: Arc<HyperbolicSurface>,
    pub field: ScalarField,
    pub max_u: f64,
    pub min_u: f64,
    pub area: f64,
    pub descriptor: MetricDescriptor,
}

impl ConformalMetric {
    pub fn new(base: Arc<HyperbolicSurface>, field: ScalarField, mut descriptor: MetricDescriptor) -> Result<Self> {
        let (min_u, max_u, area) = match &field {
            ScalarField::Analytic(f) => {
                let (lo, hi) = f.extremes();
                (lo, hi, f.area(base.total_area))
            }
            ScalarField::Sampled(f) => {
                let lo = f.values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi, mesh_area(&field, &f.mesh, QuadratureRule::Centroid)?)
            }
        };
        if !(area > 0.0 && area.is_finite()) {
            return Err(Error::Numeric(format!("metric area {area} is not positive and finite")));
        }
        descriptor.area = area;
        descriptor.max_u = max_u;
        Ok(ConformalMetric { base, field, max_u, min_u, area, descriptor })
    }

    /// Metric with constant conformal factor `e^{2c}`.
    pub fn constant(base: Arc<HyperbolicSurface>, c: f64) -> Result<Self> {
        let family = if c == 0.0 { "hyperbolic" } else { "constant" };
        let descriptor = MetricDescriptor {
            family: family.into(),
            params: BTreeMap::new(),
            c,
            area: 0.0,
            max_u: 0.0,
        };
        Self::new(base, ScalarField::Analytic(AnalyticField::constant(c)), descriptor)
    }

    /// `u` at every glued vertex of `mesh`.
    pub fn vertex_values(&self, mesh: &SurfaceMesh) -> Result<Vec<f64>> {
        match &self.field {
            ScalarField::Sampled(f) if f.mesh.n_rep == mesh.n_rep => {
                Ok(f.values.clone())
            }
            _ => mesh
                .representatives()
                .par_iter()
                .map(|&i| self.field.value(&mesh.points[i]))
                .collect(),
        }
    }

    /// `K_g(p) = -e^{-2u} (1 + Δ_σ u)`.
    pub fn gaussian_curvature(&self, p: &LocalPoint) -> Result<f64> {
        match &self.field {
            ScalarField::Analytic(f) => {
                let k = -(-2.0 * f.value(p)).exp() * (1.0 + f.laplacian(p));
                if !k.is_finite() {
                    return Err(Error::Numeric("curvature is not finite".into()));
                }
                Ok(k)
            }
            ScalarField::Sampled(f) => {
                let z = p.z();
                let i = f.mesh.nearest_vertex(z);
                if (f.mesh.point(i) - z).norm() > 1e-12 {
                    return Err(Error::Domain("sampled curvature is defined at mesh vertices only".into()));
                }
                let r = f.mesh.rep[i];
                Ok(-(-2.0 * f.values[r]).exp() * (1.0 + f.laplacian[r]))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum QuadratureRule {
    #[default]
    Centroid,
    ThreePoint,
}

/// `∫ e^{2u} dv_σ` by per-triangle quadrature on `mesh`.
pub fn mesh_area(field: &ScalarField, mesh: &SurfaceMesh, rule: QuadratureRule) -> Result<f64> {
    let per_tri: Vec<f64> = (0..mesh.tris.len())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.tris[t];
            let p: Vec<LocalPoint> = tri.iter().map(|&i| mesh.points[i]).collect();
            let w = match (field, rule) {
                (ScalarField::Sampled(f), QuadratureRule::Centroid) => {
                    let u = tri.iter().map(|&i| f.values[mesh.rep[i]]).sum::<f64>() / 3.0;
                    (2.0 * u).exp()
                }
                (ScalarField::Sampled(f), QuadratureRule::ThreePoint) => {
                    let u: Vec<f64> = tri.iter().map(|&i| f.values[mesh.rep[i]]).collect();
                    ((u[0] + u[1]).exp() + (u[1] + u[2]).exp() + (u[2] + u[0]).exp()) / 3.0
                }
                (ScalarField::Analytic(f), QuadratureRule::Centroid) => {
                    let c = p[0].lerp(&p[1], 0.5).lerp(&p[2], 1.0 / 3.0);
                    (2.0 * f.value(&c)).exp()
                }
                (ScalarField::Analytic(f), QuadratureRule::ThreePoint) => {
                    (0..3)
                        .map(|k| (2.0 * f.value(&p[k].lerp(&p[(k + 1) % 3], 0.5))).exp())
                        .sum::<f64>()
                        / 3.0
                }
            };
            Ok(mesh.area_sigma[t] * w)
        })
        .collect::<Result<_>>()?;
    Ok(per_tri.iter().sum())
}

/// `∫ e^{2u} dv_σ`.
pub fn total_area(metric: &ConformalMetric) -> f64 {
    metric.area
}

/// Bisection for the constant `C` giving area `target`.
///
/// `area_of` must be continuous and monotone on `[lo, hi]`.
pub fn normalize_area<F: Fn(f64) -> Result<f64>>(area_of: F, lo: f64, hi: f64, target: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = area_of(a)? - target;
    let fb = area_of(b)? - target;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Normalization(format!(
            "bracket [{lo}, {hi}] does not straddle area {target} (areas {} and {})",
            fa + target,
            fb + target
        )));
    }
    let increasing = fb > 0.0;
    for _ in 0..BISECTION_MAX_ITER {
        let m = 0.5 * (a + b);
        let fm = area_of(m)? - target;
        if (fm > 0.0) == increasing {
            b = m;
        } else {
            a = m;
        }
        if (b - a).abs() < BISECTION_TOL && fm.abs() < 1e-8 * target {
            return Ok(m);
        }
    }
    let m = 0.5 * (a + b);
    let fm = area_of(m)? - target;
    if fm.abs() < 1e-8 * target {
        Ok(m)
    } else {
        Err(Error::Normalization(format!("bisection stalled with area error {fm:e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonpositivityReport {
    /// Minimum of `Δ_σ u + 1` over the sample set.
    pub min_value: f64,
    pub tol: f64,
    pub pass: bool,
    pub samples: usize,
}

/// Checks `Δ_σ u ≥ -1` on the profile scan (analytic) or at vertices (sampled).
pub fn nonpositivity_check(metric: &ConformalMetric, tol: f64) -> NonpositivityReport {
    let (min_value, samples) = match &metric.field {
        ScalarField::Analytic(f) => (f.min_laplacian_plus_one(), 1 + 512 * f.terms.len()),
        ScalarField::Sampled(f) => (
            f.laplacian.iter().map(|l| l + 1.0).fold(f64::INFINITY, f64::min),
            f.laplacian.len(),
        ),
    };
    NonpositivityReport { min_value, tol, pass: min_value >= -tol, samples }
}

/// `½ log(A / (4π tanh²(inj/2)))`.
pub fn schwarz_bound(area: f64, inj: f64) -> Result<f64> {
    if !(inj > 0.0) || !(area > 0.0) {
        return Err(Error::Domain(format!("need positive area and radius, got {area}, {inj}")));
    }
    let t = (0.5 * inj).tanh();
    Ok(0.5 * (area / (4.0 * std::f64::consts::PI * t * t)).ln())
}

pub fn schwarz_upper_bound(surface: &HyperbolicSurface) -> Result<f64> {
    schwarz_bound(surface.total_area, surface.inj_radius)
}

/// `∫ K_g dv_g`, which should equal `2πχ = -4π`.
pub fn gauss_bonnet(metric: &ConformalMetric, mesh: &SurfaceMesh) -> Result<f64> {
    let sigma_area = mesh.total_sigma_area();
    match &metric.field {
        ScalarField::Analytic(f) => {
            // each term is radial in its own chart, so ∫ Δu is a 1-d integral
            let lap = f.laplacian_integral();
            let v = -sigma_area - lap;
            if !v.is_finite() {
                return Err(Error::Numeric("Gauss–Bonnet integral is not finite".into()));
            }
            Ok(v)
        }
        ScalarField::Sampled(s) => {
            let m = mesh.vertex_sigma_areas();
            Ok(-(0..m.len()).map(|i| (1.0 + s.laplacian[i]) * m[i]).sum::<f64>())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::build_mesh;
    use std::f64::consts::PI;

    fn base() -> Arc<HyperbolicSurface> {
        Arc::new(HyperbolicSurface::regular_octagon(2).unwrap())
    }

    #[derive(Debug)]
    struct LogCosh;

    impl Profile for LogCosh {
        fn eval(&self, r: f64) -> [f64; 3] {
            let c = (0.5 * r).cosh();
            let t = (0.5 * r).tanh();
            [2.0 * c.ln(), t, 0.5 / (c * c)]
        }
        fn support(&self) -> f64 {
            f64::INFINITY
        }
        fn breakpoints(&self) -> Vec<f64> {
            vec![1.0]
        }
    }

    #[test]
    fn constant_metric_curvature_and_area() {
        let b = base();
        let m0 = ConformalMetric::constant(b.clone(), 0.0).unwrap();
        let p = LocalPoint::at(Complex64::new(0.2, 0.1));
        assert_eq!(m0.gaussian_curvature(&p).unwrap(), -1.0);
        assert!((m0.area - 4.0 * PI).abs() < 1e-12);
        let c = 0.3;
        let mc = ConformalMetric::constant(b.clone(), c).unwrap();
        assert!((mc.gaussian_curvature(&p).unwrap() + (-2.0 * c).exp()).abs() < 1e-15);
        let half = ConformalMetric::constant(b, 0.5 * 2f64.ln()).unwrap();
        assert!((half.area - 8.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn log_cosh_curvature_matches_symbolic() {
        let field = AnalyticField {
            offset: 0.0,
            terms: vec![Term { anchor: Anchor::Point(Complex64::new(0.0, 0.0)), profile: Arc::new(LogCosh) }],
        };
        for &r in &[0.0, 0.4, 1.0] {
            let z = Complex64::new((0.5 * r as f64).tanh(), 0.0);
            let p = LocalPoint::at(z);
            let k = -(-2.0 * field.value(&p)).exp() * (1.0 + field.laplacian(&p));
            let c = (0.5 * r as f64).cosh();
            assert!((k + 2.0 / c.powi(4)).abs() < 1e-4, "r={r} k={k}");
        }
    }

    #[test]
    fn nonpositivity_of_constants() {
        let m = ConformalMetric::constant(base(), 0.0).unwrap();
        let r = nonpositivity_check(&m, NONPOSITIVITY_TOL_ANALYTIC);
        assert!(r.pass);
        assert_eq!(r.min_value, 1.0);
    }

    #[test]
    fn normalize_constant_family() {
        let c = normalize_area(|c| Ok((2.0 * c).exp() * 4.0 * PI), -1.0, 1.0, 4.0 * PI).unwrap();
        assert!(c.abs() < 1e-9);
        let err = normalize_area(|c| Ok((2.0 * c).exp() * 4.0 * PI), 1.0, 2.0, 4.0 * PI);
        assert!(matches!(err, Err(Error::Normalization(_))));
    }

    #[test]
    fn schwarz_values() {
        let b = schwarz_bound(4.0 * PI, 1.5286).unwrap();
        assert!((b - 0.441).abs() < 1e-3);
        let inj = 1.2;
        let t = (0.5f64 * inj).tanh();
        assert!(schwarz_bound(4.0 * PI * t * t, inj).unwrap().abs() < 1e-14);
        assert!(schwarz_bound(5.0, 1.0).unwrap() < schwarz_bound(6.0, 1.0).unwrap());
    }

    #[test]
    fn gauss_bonnet_constants() {
        let b = base();
        let mesh = build_mesh(&b.domain, 3).unwrap();
        for c in [0.0, 0.7] {
            let m = ConformalMetric::constant(b.clone(), c).unwrap();
            let gb = gauss_bonnet(&m, &mesh).unwrap();
            assert!((gb / (-4.0 * PI) - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn area_scales_exactly_with_constant_shift() {
        let b = base();
        let mesh = build_mesh(&b.domain, 3).unwrap();
        let f0 = ScalarField::Analytic(AnalyticField::constant(0.0));
        let f1 = ScalarField::Analytic(AnalyticField::constant(0.25));
        let a0 = mesh_area(&f0, &mesh, QuadratureRule::Centroid).unwrap();
        let a1 = mesh_area(&f1, &mesh, QuadratureRule::Centroid).unwrap();
        assert!((a1 / a0 - 0.5f64.exp()).abs() < 1e-13);
        assert!((a0 / (4.0 * PI) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn sampled_field_roundtrip() {
        let b = base();
        let mesh = Arc::new(build_mesh(&b.domain, 3).unwrap());
        let values = vec![0.1; mesh.n_rep];
        let f = SampledField::new(mesh.clone(), values).unwrap();
        assert!(f.laplacian.iter().all(|l| l.abs() < 1e-8));
        let m = ConformalMetric::new(
            b,
            ScalarField::Sampled(f),
            MetricDescriptor { family: "sampled".into(), params: BTreeMap::new(), c: 0.0, area: 0.0, max_u: 0.0 },
        )
        .unwrap();
        let gb = gauss_bonnet(&m, &mesh).unwrap();
        assert!((gb / (-4.0 * PI) - 1.0).abs() < 0.01);
        let r = nonpositivity_check(&m, NONPOSITIVITY_TOL_MESH);
        assert!(r.pass);
        let v = m.field.value(&LocalPoint::at(Complex64::new(0.05, 0.02))).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
    }

    #[test]
    fn descriptor_roundtrip_is_bit_stable() {
        let d = MetricDescriptor {
            family: "stretcher".into(),
            params: [("eps".to_string(), 0.2), ("delta".to_string(), 0.01)].into_iter().collect(),
            c: 1.0000000000123457,
            area: 4.0 * PI,
            max_u: 101.37,
        };
        let s = d.to_json().unwrap();
        let back = MetricDescriptor::from_json(&s).unwrap();
        assert_eq!(back, d);
        assert!(s.contains("\"C\""));
    }
}
