//! Explicit conformal families: systole shrinker, diameter stretcher, dumbbell,
//! a nonpositively curved radial family, and rotationally symmetric cylinder necks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::{
    normalize_area, AnalyticField, Anchor, ConformalMetric, MetricDescriptor, Profile, ScalarField, Term,
};
use crate::error::{Error, Result};
use crate::hyp;
use crate::quad;
use crate::surface::{build_mesh, refine_at, HyperbolicSurface, SurfaceMesh};

/// Default ε grid of parameter sweeps.
pub const DEFAULT_EPS_GRID: [f64; 2] = [0.2, 0.1];
/// Default δ grid of parameter sweeps.
pub const DEFAULT_DELTA_GRID: [f64; 4] = [0.2, 0.1, 0.05, 0.01];
/// Support radius of the nonpositive radial family.
pub const RADIAL_SUPPORT: f64 = 1.4;

/// `[φ, φ', φ'']` of the plateau bump with half-width `a` at `t`.
///
/// `φ = 1` on `|t| <= a/2`, `φ = 0` on `|t| >= a`.
pub fn bump_derivs(t: f64, a: f64) -> [f64; 3] {
    let x = t.abs();
    if x <= 0.5 * a {
        return [1.0, 0.0, 0.0];
    }
    if x >= a {
        return [0.0, 0.0, 0.0];
    }
    let s = 2.0 - 2.0 * x / a;
    let g = 1.0 / s - 1.0 / (1.0 - s);
    let psi = if g > 0.0 {
        let e = (-g).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + g.exp())
    };
    let pq = 1.0 / (2.0 + 2.0 * g.cosh());
    let g1 = -1.0 / (s * s) - 1.0 / ((1.0 - s) * (1.0 - s));
    let g2 = 2.0 / (s * s * s) - 2.0 / ((1.0 - s) * (1.0 - s) * (1.0 - s));
    let d1 = -pq * g1;
    let d2 = -d1 * (0.5 * g).tanh() * g1 - pq * g2;
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    [psi, sign * d1 * (-2.0 / a), d2 * 4.0 / (a * a)]
}

/// The plateau bump `φ(t; a)`.
pub fn bump(t: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("bump half-width {a} must be positive")));
    }
    Ok(bump_derivs(t, a)[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Hyperbolic,
    Constant,
    Shrinker,
    Stretcher,
    Dumbbell,
    NonpositiveRadial,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Hyperbolic => "hyperbolic",
            FamilyKind::Constant => "constant",
            FamilyKind::Shrinker => "shrinker",
            FamilyKind::Stretcher => "stretcher",
            FamilyKind::Dumbbell => "dumbbell",
            FamilyKind::NonpositiveRadial => "nonpositive_radial",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hyperbolic" => FamilyKind::Hyperbolic,
            "constant" => FamilyKind::Constant,
            "shrinker" | "systole_shrinker" => FamilyKind::Shrinker,
            "stretcher" | "diameter_stretcher" => FamilyKind::Stretcher,
            "dumbbell" => FamilyKind::Dumbbell,
            "nonpositive_radial" => FamilyKind::NonpositiveRadial,
            other => return Err(Error::Usage(format!("unknown family '{other}'"))),
        })
    }
}

/// Parameters of a family member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub kind: FamilyKind,
    pub eps: f64,
    pub delta: f64,
    pub amplitude: f64,
}

impl FamilyParams {
    pub fn new(kind: FamilyKind, eps: f64, delta: f64) -> Self {
        FamilyParams { kind, eps, delta, amplitude: 1.0 }
    }

    fn to_map(self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match self.kind {
            FamilyKind::Hyperbolic | FamilyKind::Constant => {}
            FamilyKind::NonpositiveRadial => {
                m.insert("amplitude".into(), self.amplitude);
                m.insert("radius".into(), RADIAL_SUPPORT);
            }
            _ => {
                m.insert("eps".into(), self.eps);
                m.insert("delta".into(), self.delta);
            }
        }
        m
    }

    fn from_descriptor(d: &MetricDescriptor) -> Result<Self> {
        let kind: FamilyKind = d.family.parse()?;
        let get = |k: &str, default: f64| d.params.get(k).copied().unwrap_or(default);
        Ok(FamilyParams { kind, eps: get("eps", 0.0), delta: get("delta", 0.0), amplitude: get("amplitude", 1.0) })
    }
}

/// Collar profile `(-L - C) φ(s; δ)` around the systole.
#[derive(Debug, Clone)]
pub struct ShrinkerProfile {
    pub log_ratio: f64,
    pub c: f64,
    pub delta: f64,
}

impl Profile for ShrinkerProfile {
    fn eval(&self, s: f64) -> [f64; 3] {
        let d = bump_derivs(s, self.delta);
        let k = -self.log_ratio - self.c;
        [k * d[0], k * d[1], k * d[2]]
    }

    fn support(&self) -> f64 {
        self.delta
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.5 * self.delta, self.delta]
    }
}

/// Two-zone neck `log ρ - log C` around a point.
#[derive(Debug, Clone)]
pub struct StretcherProfile {
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
    /// Inner scale `e^{-1/δ}`.
    pub a: f64,
    /// `(ε/2)^{-δ/2} (A δ / 16π)^{1/2}`.
    pub k: f64,
    /// `1 - δ/2`.
    pub beta: f64,
    /// `(a/2)^{-β}`.
    pub p: f64,
}

impl StretcherProfile {
    pub fn new(eps: f64, delta: f64, c: f64, area: f64) -> Self {
        let a = (-1.0 / delta).exp();
        let beta = 1.0 - 0.5 * delta;
        StretcherProfile {
            eps,
            delta,
            c,
            a,
            k: (0.5 * eps).powf(-0.5 * delta) * (area * delta / (16.0 * PI)).sqrt(),
            beta,
            p: (0.5 * a).powf(-beta),
        }
    }

    /// `[ρ, ρ', ρ'']` at distance `r`.
    pub fn rho(&self, r: f64) -> [f64; 3] {
        if r >= self.eps {
            return [self.c, 0.0, 0.0];
        }
        let h = if r <= 0.5 * self.a {
            [self.p, 0.0, 0.0]
        } else {
            let pa = bump_derivs(r, self.a);
            let q = r.powf(-self.beta);
            let q1 = -self.beta * q / r;
            let q2 = self.beta * (self.beta + 1.0) * q / (r * r);
            [
                pa[0] * self.p + (1.0 - pa[0]) * q,
                pa[1] * (self.p - q) + (1.0 - pa[0]) * q1,
                pa[2] * (self.p - q) - 2.0 * pa[1] * q1 + (1.0 - pa[0]) * q2,
            ]
        };
        let pe = bump_derivs(r, self.eps);
        let kh = self.k * h[0];
        [
            pe[0] * kh + (1.0 - pe[0]) * self.c,
            pe[1] * (kh - self.c) + pe[0] * self.k * h[1],
            pe[2] * (kh - self.c) + 2.0 * pe[1] * self.k * h[1] + pe[0] * self.k * h[2],
        ]
    }

    /// Analytic radial g-length from `r = a` to `r = ε/2`.
    pub fn neck_length(&self) -> f64 {
        2.0 * self.k / self.delta * ((0.5 * self.eps).powf(0.5 * self.delta) - self.a.powf(0.5 * self.delta))
    }

    /// Chart g-area of the σ-ball of radius `ε/2`.
    pub fn inner_ball_area(&self) -> f64 {
        let f = |r: f64| {
            let rho = self.rho(r)[0];
            rho * rho * 2.0 * PI * r.sinh()
        };
        let mut total = 0.0;
        let mut lo = 0.0;
        for b in [0.5 * self.a, self.a, 0.5 * self.eps] {
            total += quad::integrate_radial(&f, lo, b);
            lo = b;
        }
        total
    }
}

impl Profile for StretcherProfile {
    fn eval(&self, r: f64) -> [f64; 3] {
        if r >= self.eps {
            return [0.0; 3];
        }
        let rho = self.rho(r);
        let f1 = rho[1] / rho[0];
        [rho[0].ln() - self.c.ln(), f1, rho[2] / rho[0] - f1 * f1]
    }

    fn support(&self) -> f64 {
        self.eps
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.5 * self.a, self.a, 0.5 * self.eps, self.eps]
    }
}

/// The lower bound `δ^{-1/2} (A/4π)^{1/2} (1 - (ε/2)^{-δ/2} e^{-1/2})` on the neck length.
pub fn neck_length_bound(eps: f64, delta: f64, area: f64) -> f64 {
    delta.powf(-0.5) * (area / (4.0 * PI)).sqrt() * (1.0 - (0.5 * eps).powf(-0.5 * delta) * (-0.5f64).exp())
}

/// `u - C = amp ∫_r^R tanh(t/2) φ(t; R) dt`, so `Δ_σ u ≥ -amp`.
#[derive(Debug, Clone)]
pub struct RadialNonposProfile {
    pub amplitude: f64,
    pub radius: f64,
    step: f64,
    table: Vec<f64>,
}

impl RadialNonposProfile {
    const NODES: usize = 4096;

    pub fn new(amplitude: f64, radius: f64) -> Self {
        let step = radius / Self::NODES as f64;
        let mut table = vec![0.0; Self::NODES + 1];
        for i in (0..Self::NODES).rev() {
            let lo = i as f64 * step;
            table[i] = table[i + 1] + quad::integrate(|t| Self::slope(t, radius), lo, lo + step, 1);
        }
        RadialNonposProfile { amplitude, radius, step, table }
    }

    fn slope(t: f64, radius: f64) -> f64 {
        (0.5 * t).tanh() * bump_derivs(t, radius)[0]
    }
}

impl Profile for RadialNonposProfile {
    fn eval(&self, r: f64) -> [f64; 3] {
        if r >= self.radius {
            return [0.0; 3];
        }
        let i = ((r / self.step) as usize).min(Self::NODES - 1);
        let x0 = i as f64 * self.step;
        let t = (r - x0) / self.step;
        let (y0, y1) = (self.table[i], self.table[i + 1]);
        let (d0, d1) = (-Self::slope(x0, self.radius) * self.step, -Self::slope(x0 + self.step, self.radius) * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        let g = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1;
        let b = bump_derivs(r, self.radius);
        let th = (0.5 * r).tanh();
        let ch = (0.5 * r).cosh();
        let amp = self.amplitude;
        [amp * g, -amp * th * b[0], -amp * (0.5 * b[0] / (ch * ch) + th * b[1])]
    }

    fn support(&self) -> f64 {
        self.radius
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.5 * self.radius, self.radius]
    }
}

/// Neck data of a stretcher-type member, for analytic quantities.
#[derive(Debug, Clone)]
pub struct NeckData {
    pub profile: StretcherProfile,
    pub centers: Vec<Complex64>,
}

/// A constructed, area-normalized family member.
#[derive(Debug, Clone)]
pub struct Member {
    pub params: FamilyParams,
    pub metric: ConformalMetric,
    pub neck: Option<NeckData>,
    /// The systole as a diameter (shrinker only).
    pub geodesic: Option<Anchor>,
}

impl Member {
    /// Points around which meshes are graded.
    pub fn point_anchors(&self) -> Vec<Complex64> {
        self.neck.as_ref().map(|n| n.centers.clone()).unwrap_or_default()
    }

    /// Base mesh of `level`, graded around neck centers down to below the inner scale.
    pub fn mesh(&self, level: usize) -> Result<SurfaceMesh> {
        let domain = &self.metric.base.domain;
        let mut mesh = build_mesh(domain, level)?;
        if let Some(neck) = &self.neck {
            for &c in &neck.centers {
                mesh = refine_at(&mesh, domain, c, 0.25 * neck.profile.a)?;
            }
        }
        Ok(mesh)
    }
}

/// Second neck center of the dumbbell: halfway from the origin to a corner.
pub fn dumbbell_second_center(surface: &HyperbolicSurface) -> Complex64 {
    hyp::hyperbolic_midpoint(Complex64::new(0.0, 0.0), surface.domain.vertices[0].to_complex())
}

/// Width of the embedded collar about a simple closed geodesic of length `l`.
pub fn collar_width(l: f64) -> f64 {
    (1.0 / (0.5 * l).sinh()).asinh()
}

fn descriptor(params: FamilyParams, c: f64) -> MetricDescriptor {
    MetricDescriptor { family: params.kind.name().into(), params: params.to_map(), c, area: 0.0, max_u: 0.0 }
}

fn check_stretcher(surface: &HyperbolicSurface, eps: f64, delta: f64, centers: &[Complex64]) -> Result<()> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(Error::Parameter(format!("need ε > 0 and δ > 0, got {eps}, {delta}")));
    }
    if !(delta < -1.0 / ((eps).ln() - 2f64.ln())) || eps >= 2.0 {
        return Err(Error::Parameter(format!("δ = {delta} violates (ε/2)^(-δ) < e for ε = {eps}")));
    }
    for &c in centers {
        if !surface.domain.contains_ball(c, eps) {
            return Err(Error::Parameter(format!("the {eps}-ball about ({}, {}) leaves the octagon", c.re, c.im)));
        }
    }
    for (i, &p) in centers.iter().enumerate() {
        for &q in &centers[i + 1..] {
            if hyp::distance_c(p, q) <= 2.0 * eps {
                return Err(Error::Parameter(format!("neck centers closer than 2ε = {}", 2.0 * eps)));
            }
        }
    }
    Ok(())
}

fn stretcher_field(centers: &[Complex64], eps: f64, delta: f64, c: f64, area: f64) -> AnalyticField {
    let profile = Arc::new(StretcherProfile::new(eps, delta, c, area));
    AnalyticField {
        offset: c.ln(),
        terms: centers
            .iter()
            .map(|&z| Term { anchor: Anchor::Point(z), profile: profile.clone() as Arc<dyn Profile> })
            .collect(),
    }
}

fn shrinker_field(surface: &HyperbolicSurface, eps: f64, delta: f64, c: f64) -> AnalyticField {
    let profile = ShrinkerProfile { log_ratio: (surface.systole / eps).ln(), c, delta };
    AnalyticField {
        offset: c,
        terms: vec![Term {
            anchor: Anchor::Geodesic { direction: 0.0, length: surface.systole },
            profile: Arc::new(profile),
        }],
    }
}

fn radial_field(amplitude: f64, c: f64) -> AnalyticField {
    AnalyticField {
        offset: c,
        terms: vec![Term {
            anchor: Anchor::Point(Complex64::new(0.0, 0.0)),
            profile: Arc::new(RadialNonposProfile::new(amplitude, RADIAL_SUPPORT)),
        }],
    }
}

/// Field of a family member for a given normalization constant.
fn field_for(surface: &HyperbolicSurface, params: FamilyParams, c: f64) -> Result<AnalyticField> {
    let area = surface.total_area;
    Ok(match params.kind {
        FamilyKind::Hyperbolic | FamilyKind::Constant => AnalyticField::constant(c),
        FamilyKind::Shrinker => shrinker_field(surface, params.eps, params.delta, c),
        FamilyKind::Stretcher => stretcher_field(&[Complex64::new(0.0, 0.0)], params.eps, params.delta, c, area),
        FamilyKind::Dumbbell => stretcher_field(
            &[Complex64::new(0.0, 0.0), dumbbell_second_center(surface)],
            params.eps,
            params.delta,
            c,
            area,
        ),
        FamilyKind::NonpositiveRadial => radial_field(params.amplitude, c),
    })
}

fn validate(surface: &HyperbolicSurface, params: FamilyParams) -> Result<()> {
    match params.kind {
        FamilyKind::Hyperbolic | FamilyKind::Constant => Ok(()),
        FamilyKind::Shrinker => {
            let (eps, delta) = (params.eps, params.delta);
            if !(eps > 0.0 && eps < surface.systole) {
                return Err(Error::Parameter(format!("ε = {eps} must lie in (0, sys = {})", surface.systole)));
            }
            if !(delta > 0.0) {
                return Err(Error::Parameter(format!("δ = {delta} must be positive")));
            }
            if 2.0 * surface.systole * delta.sinh() > 0.5 * surface.total_area {
                return Err(Error::Parameter(format!("collar of width {delta} has σ-area above A/2")));
            }
            if delta >= collar_width(surface.systole) {
                return Err(Error::Parameter(format!(
                    "δ = {delta} exceeds the embedded collar width {}",
                    collar_width(surface.systole)
                )));
            }
            Ok(())
        }
        FamilyKind::Stretcher => check_stretcher(surface, params.eps, params.delta, &[Complex64::new(0.0, 0.0)]),
        FamilyKind::Dumbbell => check_stretcher(
            surface,
            params.eps,
            params.delta,
            &[Complex64::new(0.0, 0.0), dumbbell_second_center(surface)],
        ),
        FamilyKind::NonpositiveRadial => {
            if !(0.0..=1.0).contains(&params.amplitude) {
                return Err(Error::Parameter(format!("amplitude {} must lie in [0, 1]", params.amplitude)));
            }
            Ok(())
        }
    }
}

fn bracket(kind: FamilyKind) -> (f64, f64) {
    let h = 0.5 * 2f64.ln();
    match kind {
        FamilyKind::Stretcher | FamilyKind::Dumbbell => (0.5, 1.42),
        FamilyKind::Shrinker => (-h - 0.01, h + 0.01),
        _ => (-2.0, 2.0),
    }
}

fn assemble(surface: Arc<HyperbolicSurface>, params: FamilyParams, c: f64) -> Result<Member> {
    let field = field_for(&surface, params, c)?;
    let neck = match params.kind {
        FamilyKind::Stretcher | FamilyKind::Dumbbell => Some(NeckData {
            profile: StretcherProfile::new(params.eps, params.delta, c, surface.total_area),
            centers: field
                .terms
                .iter()
                .filter_map(|t| match t.anchor {
                    Anchor::Point(z) => Some(z),
                    _ => None,
                })
                .collect(),
        }),
        _ => None,
    };
    let geodesic = field.terms.iter().map(|t| t.anchor).find(|a| matches!(a, Anchor::Geodesic { .. }));
    let metric = ConformalMetric::new(surface, ScalarField::Analytic(field), descriptor(params, c))?;
    Ok(Member { params, metric, neck, geodesic })
}

/// Build a member with `C` chosen so that the g-area equals the σ-area.
pub fn build_member(surface: Arc<HyperbolicSurface>, params: FamilyParams) -> Result<Member> {
    validate(&surface, params)?;
    let c = match params.kind {
        FamilyKind::Hyperbolic => 0.0,
        _ => {
            let (lo, hi) = bracket(params.kind);
            let target = surface.total_area;
            normalize_area(|c| Ok(field_for(&surface, params, c)?.area(target)), lo, hi, target)?
        }
    };
    assemble(surface, params, c)
}

/// Build a member with a prescribed constant `C` (no normalization).
pub fn build_with_constant(surface: Arc<HyperbolicSurface>, params: FamilyParams, c: f64) -> Result<Member> {
    validate(&surface, params)?;
    assemble(surface, params, c)
}

/// Rebuild the member described by `d` exactly.
pub fn from_descriptor(surface: Arc<HyperbolicSurface>, d: &MetricDescriptor) -> Result<Member> {
    let params = FamilyParams::from_descriptor(d)?;
    build_with_constant(surface, params, d.c)
}

/// Systole shrinker: `l_g(γ) = ε` on the systole `γ`.
pub fn systole_shrinker(surface: Arc<HyperbolicSurface>, eps: f64, delta: f64) -> Result<Member> {
    build_member(surface, FamilyParams::new(FamilyKind::Shrinker, eps, delta))
}

/// Diameter stretcher with its neck at the octagon center.
pub fn diameter_stretcher(surface: Arc<HyperbolicSurface>, eps: f64, delta: f64) -> Result<Member> {
    build_member(surface, FamilyParams::new(FamilyKind::Stretcher, eps, delta))
}

/// Dumbbell: stretcher necks at the center and halfway to a corner.
pub fn dumbbell(surface: Arc<HyperbolicSurface>, eps: f64, delta: f64) -> Result<Member> {
    build_member(surface, FamilyParams::new(FamilyKind::Dumbbell, eps, delta))
}

/// Nonpositively curved radial member centered at the octagon center.
pub fn nonpositive_radial(surface: Arc<HyperbolicSurface>, amplitude: f64) -> Result<Member> {
    let mut p = FamilyParams::new(FamilyKind::NonpositiveRadial, 0.0, 0.0);
    p.amplitude = amplitude;
    build_member(surface, p)
}

/// Test function of a dumbbell neck: 1 inside `r <= a`, linear in g-distance
/// down to 0 at `r = ε/2`.
#[derive(Debug, Clone)]
pub struct DumbbellTest {
    pub profile: StretcherProfile,
}

impl DumbbellTest {
    fn denom(&self) -> f64 {
        let e = 0.5 * self.profile.delta;
        (0.5 * self.profile.eps).powf(e) - self.profile.a.powf(e)
    }

    pub fn value(&self, r: f64) -> f64 {
        let p = &self.profile;
        if r <= p.a {
            1.0
        } else if r >= 0.5 * p.eps {
            0.0
        } else {
            let e = 0.5 * p.delta;
            ((0.5 * p.eps).powf(e) - r.powf(e)) / self.denom()
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let p = &self.profile;
        if r <= p.a || r >= 0.5 * p.eps {
            0.0
        } else {
            let e = 0.5 * p.delta;
            -e * r.powf(e - 1.0) / self.denom()
        }
    }

    /// `∫ |∇f|² dv_σ` in the polar chart.
    pub fn energy(&self) -> f64 {
        let f = |r: f64| {
            let d = self.derivative(r);
            d * d * 2.0 * PI * r.sinh()
        };
        quad::integrate_radial(&f, self.profile.a, 0.5 * self.profile.eps)
    }

    /// `∫ e^{2u} f² dv_σ` in the polar chart.
    pub fn mass(&self) -> f64 {
        let f = |r: f64| {
            let rho = self.profile.rho(r)[0];
            let v = self.value(r);
            rho * rho * v * v * 2.0 * PI * r.sinh()
        };
        let p = &self.profile;
        let mut total = 0.0;
        let mut lo = 0.0;
        for b in [0.5 * p.a, p.a, 0.5 * p.eps] {
            total += quad::integrate_radial(&f, lo, b);
            lo = b;
        }
        total
    }

    pub fn rayleigh(&self) -> f64 {
        self.energy() / self.mass()
    }

    /// `A / (4 (R₂ - R₁)²)` with `R₂ - R₁` the neck length.
    pub fn energy_bound(&self, area: f64) -> f64 {
        let l = self.profile.neck_length();
        area / (4.0 * l * l)
    }
}

/// Rotationally symmetric metric `dr² + f(r)² dθ²` on a cylinder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderMetric {
    pub a: f64,
    pub neck: f64,
    pub match_radius: f64,
    /// Constant part of `f''`.
    pub eta: f64,
    pub bump_height: f64,
    pub bump_center: f64,
    pub bump_width: f64,
    pub ramp_width: f64,
}

fn unit_bump(t: f64) -> [f64; 3] {
    bump_derivs(t - 0.5, 0.5)
}

fn unit_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        bump_derivs(1.0 - t, 1.0)[0]
    }
}

impl CylinderMetric {
    /// `f''(r)` for `|r| <= match_radius`.
    fn second(&self, r: f64) -> f64 {
        let r = r.abs();
        let g_end = self.a * self.match_radius.cosh();
        let tb = (r - (self.bump_center - 0.5 * self.bump_width)) / self.bump_width;
        let ts = (r - (self.match_radius - self.ramp_width)) / self.ramp_width;
        self.eta + self.bump_height * unit_bump(tb)[0] + (g_end - self.eta) * unit_step(ts)
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b = vec![
            self.bump_center - 0.5 * self.bump_width,
            self.bump_center + 0.5 * self.bump_width,
            self.match_radius - self.ramp_width,
            self.match_radius - 0.5 * self.ramp_width,
            self.match_radius,
        ];
        b.retain(|&x| x > 0.0);
        b.sort_by(|x, y| x.total_cmp(y));
        b
    }

    fn integrate_to<F: Fn(f64) -> f64>(&self, f: F, r: f64) -> f64 {
        let mut total = 0.0;
        let mut lo = 0.0;
        for b in self.breaks().into_iter().chain(std::iter::once(f64::INFINITY)) {
            let hi = b.min(r);
            if hi > lo {
                total += quad::integrate(&f, lo, hi, 8);
            }
            lo = hi;
            if lo >= r {
                break;
            }
        }
        total
    }

    /// `[f, f', f'']` at `r`.
    pub fn profile(&self, r: f64) -> [f64; 3] {
        let x = r.abs();
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        if x >= self.match_radius {
            return [self.a * x.cosh(), sign * self.a * x.sinh(), self.a * x.cosh()];
        }
        let f1 = self.integrate_to(|t| self.second(t), x);
        let f0 = self.neck + self.integrate_to(|t| (x - t) * self.second(t), x);
        [f0, sign * f1, self.second(x)]
    }

    /// Gaussian curvature `-f''/f`.
    pub fn curvature(&self, r: f64) -> f64 {
        let p = self.profile(r);
        -p[2] / p[0]
    }

    /// Half-width of the almost flat part around the neck.
    pub fn plateau_width(&self) -> f64 {
        (self.bump_center - 0.5 * self.bump_width).max(0.0)
    }
}

/// Convex even profile with `f(0) = target_neck` matching `a cosh r` for `|r| >= match_radius`.
pub fn cylinder_profile(a: f64, target_neck: f64, match_radius: f64) -> Result<CylinderMetric> {
    if !(target_neck > 0.0 && target_neck < a && match_radius > 0.0) {
        return Err(Error::Parameter(format!(
            "need 0 < neck < a and match radius > 0, got neck {target_neck}, a {a}, radius {match_radius}"
        )));
    }
    let m = match_radius;
    let g_end = a * m.cosh();
    let eta = 0.02 * target_neck;
    let ramp = (m / 6.0).min(0.5);
    let width = (m / 6.0).min(0.5);
    // moments of the unit step and bump
    let i1 = quad::integrate(unit_step, 0.0, 1.0, 16);
    let i2 = quad::integrate(|t| (1.0 - t) * unit_step(t), 0.0, 1.0, 16);
    let j1 = quad::integrate(|t| unit_bump(t)[0], 0.0, 1.0, 16);
    // f'(m) = a sinh m fixes the bump mass; f(m) = a cosh m fixes its center
    let mass = a * m.sinh() - eta * m - (g_end - eta) * ramp * i1;
    if !(mass > 0.0) {
        return Err(Error::Parameter("no convex interpolation: ramp alone overshoots f'".into()));
    }
    let height = mass / (width * j1);
    let rest = a * m.cosh() - target_neck - 0.5 * eta * m * m - (g_end - eta) * ramp * ramp * i2;
    let center = m - rest / mass;
    if center - 0.5 * width < 0.0 || center + 0.5 * width > m - ramp {
        return Err(Error::Parameter(format!(
            "no convex interpolation with match radius {m}: bump centered at {center}"
        )));
    }
    Ok(CylinderMetric {
        a,
        neck: target_neck,
        match_radius: m,
        eta,
        bump_height: height,
        bump_center: center,
        bump_width: width,
        ramp_width: ramp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{nonpositivity_check, schwarz_upper_bound, NONPOSITIVITY_TOL_ANALYTIC};

    fn surface() -> Arc<HyperbolicSurface> {
        Arc::new(HyperbolicSurface::regular_octagon(2).unwrap())
    }

    #[test]
    fn bump_examples() {
        assert_eq!(bump(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(bump(1.5, 1.0).unwrap(), 0.0);
        assert!(bump(0.3, 0.0).is_err());
        for &t in &[0.1, 0.55, 0.7, 0.93] {
            assert_eq!(bump(t, 1.0).unwrap(), bump(-t, 1.0).unwrap());
        }
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let a = 0.8;
        for &t in &[0.45, 0.5, 0.6, 0.7, -0.55] {
            let h = 1e-5;
            let d = bump_derivs(t, a);
            let fd1 = (bump_derivs(t + h, a)[0] - bump_derivs(t - h, a)[0]) / (2.0 * h);
            let fd2 = (bump_derivs(t + h, a)[1] - bump_derivs(t - h, a)[1]) / (2.0 * h);
            assert!((d[1] - fd1).abs() < 1e-6 * (1.0 + fd1.abs()), "t={t}");
            assert!((d[2] - fd2).abs() < 1e-5 * (1.0 + fd2.abs()), "t={t}");
        }
    }

    #[test]
    fn stretcher_profile_derivatives() {
        let p = StretcherProfile::new(0.2, 0.1, 1.0, 4.0 * PI);
        for &r in &[0.6 * p.a, 0.8 * p.a, 0.02, 0.12, 0.15, 0.19] {
            let h = 1e-6 * r;
            let d = p.eval(r);
            let fd1 = (p.eval(r + h)[0] - p.eval(r - h)[0]) / (2.0 * h);
            let fd2 = (p.eval(r + h)[1] - p.eval(r - h)[1]) / (2.0 * h);
            assert!((d[1] - fd1).abs() < 1e-5 * (1.0 + fd1.abs()), "r={r}");
            assert!((d[2] - fd2).abs() < 1e-4 * (1.0 + fd2.abs()), "r={r}");
        }
    }

    #[test]
    fn neck_length_examples() {
        assert!((neck_length_bound(0.2, 0.01, 4.0 * PI) - 3.864).abs() < 1e-3);
        assert!((neck_length_bound(0.2, 0.05, 4.0 * PI) - 1.599).abs() < 1e-3);
        let p = StretcherProfile::new(0.2, 0.01, 1.0, 4.0 * PI);
        assert!((p.neck_length() / neck_length_bound(0.2, 0.01, 4.0 * PI) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shrinker_member() {
        let s = surface();
        let m = systole_shrinker(s.clone(), 0.2, 0.1).unwrap();
        assert!((m.metric.area / s.total_area - 1.0).abs() < 1e-8);
        assert!(!nonpositivity_check(&m.metric, NONPOSITIVITY_TOL_ANALYTIC).pass);
        assert!(systole_shrinker(s.clone(), 3.5, 0.1).is_err());
        assert!(systole_shrinker(s, 0.2, 0.6).is_err());
    }

    #[test]
    fn shrinker_constant_vanishes_with_delta() {
        let s = surface();
        let c1 = systole_shrinker(s.clone(), 0.2, 0.1).unwrap().metric.descriptor.c;
        let c2 = systole_shrinker(s.clone(), 0.2, 0.01).unwrap().metric.descriptor.c;
        let c3 = systole_shrinker(s, 0.2, 0.001).unwrap().metric.descriptor.c;
        assert!(c3.abs() < c2.abs() && c2.abs() < c1.abs());
    }

    #[test]
    fn stretcher_member() {
        let s = surface();
        let m = diameter_stretcher(s.clone(), 0.2, 0.05).unwrap();
        assert!((m.metric.area / s.total_area - 1.0).abs() < 1e-8);
        let neck = m.neck.as_ref().unwrap();
        assert!(neck.profile.inner_ball_area() <= s.total_area / 4.0);
        assert!(diameter_stretcher(s.clone(), 0.2, 0.5).is_err());
        let c_small = diameter_stretcher(s.clone(), 0.02, 0.05).unwrap().metric.descriptor.c;
        let c_large = m.metric.descriptor.c;
        assert!((c_small - 1.0).abs() < (c_large - 1.0).abs());
    }

    #[test]
    fn dumbbell_member() {
        let s = surface();
        let m = dumbbell(s.clone(), 0.2, 0.05).unwrap();
        assert_eq!(m.point_anchors().len(), 2);
        let t = DumbbellTest { profile: m.neck.unwrap().profile };
        assert!(t.energy() <= t.energy_bound(s.total_area));
        assert!((t.profile.neck_length() - 1.599).abs() < 1e-3);
        assert!(dumbbell(s, 0.7, 0.05).is_err());
    }

    #[test]
    fn radial_member() {
        let s = surface();
        let zero = nonpositive_radial(s.clone(), 0.0).unwrap();
        assert!(zero.metric.max_u.abs() < 1e-9 && zero.metric.min_u.abs() < 1e-9);
        let m = nonpositive_radial(s.clone(), 1.0).unwrap();
        let r = nonpositivity_check(&m.metric, NONPOSITIVITY_TOL_ANALYTIC);
        assert!(r.pass, "min {}", r.min_value);
        assert!(m.metric.max_u <= schwarz_upper_bound(&s).unwrap());
    }

    #[test]
    fn radial_profile_consistent() {
        let p = RadialNonposProfile::new(0.7, RADIAL_SUPPORT);
        for &r in &[0.01, 0.3, 0.8, 1.0, 1.3] {
            let h = 1e-5;
            let fd = (p.eval(r + h)[0] - p.eval(r - h)[0]) / (2.0 * h);
            assert!((p.eval(r)[1] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn cylinder_profile_properties() {
        let a = 3.0571 / (2.0 * PI);
        let c = cylinder_profile(a, 0.3 * a, 3.0).unwrap();
        assert!((c.profile(0.0)[0] - 0.3 * a).abs() < 1e-12);
        for i in 0..=600 {
            let r = -3.0 + i as f64 * 0.01;
            let p = c.profile(r);
            assert!(p[2] > 0.0);
            assert!(c.curvature(r) < 0.0);
        }
        let end = c.profile(3.0 - 1e-9);
        assert!((end[0] - a * 3f64.cosh()).abs() < 1e-8);
        assert!((end[1] - a * 3f64.sinh()).abs() < 1e-8);
        for &r in &[3.0, 3.5, -4.0] {
            assert!((c.curvature(r) + 1.0).abs() < 1e-12);
        }
        let w = c.plateau_width();
        assert!(w > 0.5);
        for i in 0..=50 {
            assert!(c.curvature(w * i as f64 / 50.0).abs() < 0.1);
        }
        assert!(cylinder_profile(a, 1.2 * a, 3.0).is_err());
        assert!(cylinder_profile(a, 0.3 * a, 0.5).is_err());
    }

    #[test]
    fn descriptor_rebuild_is_exact() {
        let s = surface();
        let m = dumbbell(s.clone(), 0.2, 0.1).unwrap();
        let d = m.metric.descriptor.clone();
        let back = from_descriptor(s, &MetricDescriptor::from_json(&d.to_json().unwrap()).unwrap()).unwrap();
        assert_eq!(back.metric.descriptor, d);
    }
}
