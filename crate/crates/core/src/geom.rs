//! Lengths, geodesics, diameters and chart integrals of `u`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{ConformalMetric, ScalarField};
use crate::error::{Error, Result};
use crate::hyp::{self, LocalPoint, MobiusTransform};
use crate::quad;
use crate::surface::{self, FundamentalDomain, SurfaceMesh};

/// g-length step of the geodesic integrator.
pub const GEODESIC_STEP: f64 = 1e-3;
/// Largest polar radius for circle and region integrals.
pub const CHART_MAX_RADIUS: f64 = 8.0;
pub const CIRCLE_NODES: usize = 1024;
pub const RADIAL_NODES: usize = 1024;
/// Gauss points per curve segment.
const SEGMENT_NODES: usize = 8;

/// A curve sampled in the disk; consecutive samples are joined by σ-geodesic segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub samples: Vec<LocalPoint>,
    pub closed: bool,
    /// g-speed recorded by the integrator, one per sample.
    pub speed: Option<Vec<f64>>,
}

impl Curve {
    pub fn new(samples: Vec<LocalPoint>, closed: bool) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Domain("a curve needs at least two samples".into()));
        }
        if let Some(p) = samples.iter().find(|p| !(p.z().norm() < 1.0)) {
            return Err(Error::Range(format!("sample {} is outside the disk", p.z())));
        }
        Ok(Curve { samples, closed, speed: None })
    }

    /// The closed geodesic through opposite side midpoints along `direction`.
    pub fn side_axis(domain: &FundamentalDomain, side: usize, n: usize) -> Result<Self> {
        let m = (0.5 * domain.inradius).tanh();
        let dir = Complex64::from_polar(1.0, (side % 8) as f64 * std::f64::consts::FRAC_PI_4);
        let n = n.max(1);
        let samples = (0..=n)
            .map(|i| {
                let s = (2.0 * i as f64 / n as f64 - 1.0) * domain.inradius;
                let x = if i == 0 { -m } else if i == n { m } else { (0.5 * s).tanh() };
                LocalPoint::at(dir * x)
            })
            .collect();
        Curve::new(samples, true)
    }

    /// σ-radial segment from `r0` to `r1` about `center`, geometrically spaced when `r0 > 0`.
    pub fn radial(center: Complex64, theta: f64, r0: f64, r1: f64, n: usize) -> Result<Self> {
        if !(r0 >= 0.0 && r1 > r0) {
            return Err(Error::Domain(format!("invalid radial range [{r0}, {r1}]")));
        }
        let n = n.max(1);
        let c = LocalPoint::at(center);
        let samples = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let r = if r0 > 0.0 { r0 * (r1 / r0).powf(t) } else { r1 * t };
                polar_point(&c, r, theta)
            })
            .collect();
        Curve::new(samples, false)
    }

    /// σ-length of the sampled polyline.
    pub fn sigma_length(&self) -> f64 {
        self.samples.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

/// Point at σ-polar coordinates `(r, theta)` about `center`, sharing its base.
pub fn polar_point(center: &LocalPoint, r: f64, theta: f64) -> LocalPoint {
    let v = Complex64::from_polar((0.5 * r).tanh(), theta);
    let c = center.z();
    let shift = v * (1.0 - c.norm_sqr()) / (Complex64::new(1.0, 0.0) + c.conj() * v);
    LocalPoint::with_offset(center.base, center.offset + shift)
}

/// `u` at a disk point, reduced to the octagon when it lies outside.
pub fn u_at(metric: &ConformalMetric, p: &LocalPoint) -> Result<f64> {
    let z = p.z();
    if !(z.norm() < 1.0) {
        return Err(Error::Range(format!("point {z} is outside the disk")));
    }
    let domain = &metric.base.domain;
    if z.norm() < (0.5 * domain.inradius).tanh() || domain.max_excess(z).1 <= 1e-12 {
        metric.field.value(p)
    } else {
        let (w, _) = domain.reduce(z)?;
        metric.field.value(&LocalPoint::at(w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveIntegrals {
    pub sigma_length: f64,
    pub g_length: f64,
    /// `∫ u dl_σ`.
    pub u_integral: f64,
}

impl CurveIntegrals {
    /// `l_σ exp(∫ u dl_σ / l_σ)`, the Jensen lower bound on the g-length.
    pub fn jensen_bound(&self) -> f64 {
        self.sigma_length * (self.u_integral / self.sigma_length).exp()
    }
}

/// σ-length, g-length and `∫ u dl_σ` along `c`.
pub fn curve_integrals(metric: &ConformalMetric, c: &Curve) -> Result<CurveIntegrals> {
    let (x, w) = quad::gauss_legendre(SEGMENT_NODES);
    let parts: Vec<(f64, f64, f64)> = c
        .samples
        .par_windows(2)
        .map(|seg| {
            let d = seg[0].distance(&seg[1]);
            let (mut gl, mut ui) = (0.0, 0.0);
            for (xi, wi) in x.iter().zip(&w) {
                let p = hyp::geodesic_interpolate(&seg[0], &seg[1], 0.5 * (xi + 1.0));
                let u = u_at(metric, &p)?;
                gl += 0.5 * d * wi * u.exp();
                ui += 0.5 * d * wi * u;
            }
            Ok((d, gl, ui))
        })
        .collect::<Result<_>>()?;
    let mut out = CurveIntegrals { sigma_length: 0.0, g_length: 0.0, u_integral: 0.0 };
    for (d, gl, ui) in parts {
        out.sigma_length += d;
        out.g_length += gl;
        out.u_integral += ui;
    }
    Ok(out)
}

/// `l_g(c) = ∫ e^u dl_σ`.
pub fn curve_length(metric: &ConformalMetric, c: &Curve) -> Result<f64> {
    Ok(curve_integrals(metric, c)?.g_length)
}

/// Total factor `w = u + log λ` and its Euclidean gradient at `p` (octagon point).
fn total_factor(metric: &ConformalMetric, p: &LocalPoint) -> Result<(f64, Complex64)> {
    let z = p.z();
    let s = 1.0 - z.norm_sqr();
    if !(s > 0.0) {
        return Err(Error::Range(format!("trajectory left the disk at {z}")));
    }
    let u = metric.field.value(p)?;
    let gu = metric.field.gradient(p)?;
    Ok((u + (2.0 / s).ln(), gu + z * (2.0 / s)))
}

fn acceleration(grad_w: Complex64, v: Complex64) -> Complex64 {
    let dot = grad_w.re * v.re + grad_w.im * v.im;
    -2.0 * dot * v + v.norm_sqr() * grad_w
}

/// Unit-speed g-geodesic of g-length `length` from `start` in direction `direction`.
///
/// Classical RK4 in g-arclength for `z'' = -2(∇w·z')z' + |z'|²∇w`. The state is
/// moved back into the octagon by side pairings; samples are returned as a
/// continuous lift in the disk.
pub fn geodesic_shoot(metric: &ConformalMetric, start: &LocalPoint, direction: f64, length: f64) -> Result<Curve> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::Domain(format!("shooting length {length} must be positive")));
    }
    let domain = &metric.base.domain;
    let steps = (length / GEODESIC_STEP).ceil() as usize;
    let h = length / steps as f64;

    let mut acc = MobiusTransform::identity();
    let mut base = *start;
    if domain.max_excess(start.z()).1 > 1e-12 {
        let (w, t) = domain.reduce(start.z())?;
        base = LocalPoint::at(w);
        acc = t;
    }
    let mut off = Complex64::new(0.0, 0.0);
    let (w0, _) = total_factor(metric, &base)?;
    let mut v = Complex64::from_polar((-w0).exp(), direction);
    let lifted = |acc: &MobiusTransform, base: &LocalPoint, off: Complex64| -> LocalPoint {
        let p = LocalPoint::with_offset(base.base, base.offset + off);
        if *acc == MobiusTransform::identity() {
            p
        } else {
            LocalPoint::at(acc.inverse().apply_c(p.z()))
        }
    };

    let mut samples = Vec::with_capacity(steps + 1);
    let mut speed = Vec::with_capacity(steps + 1);
    samples.push(lifted(&acc, &base, off));
    speed.push(w0.exp() * v.norm());

    let field = |off: Complex64, base: &LocalPoint| -> Result<Complex64> {
        Ok(total_factor(metric, &LocalPoint::with_offset(base.base, base.offset + off))?.1)
    };
    for _ in 0..steps {
        let k1x = v;
        let k1v = acceleration(field(off, &base)?, v);
        let k2x = v + 0.5 * h * k1v;
        let k2v = acceleration(field(off + 0.5 * h * k1x, &base)?, k2x);
        let k3x = v + 0.5 * h * k2v;
        let k3v = acceleration(field(off + 0.5 * h * k2x, &base)?, k3x);
        let k4x = v + h * k3v;
        let k4v = acceleration(field(off + h * k3x, &base)?, k4x);
        off += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);

        let z = base.z() + off;
        if !(z.norm() < 1.0) || !v.norm().is_finite() {
            return Err(Error::Range("geodesic left the evaluable region".into()));
        }
        let (k, e) = domain.max_excess(z);
        if e > 0.0 {
            let g = domain.generator(k + 4);
            v *= g.derivative(z);
            base = LocalPoint::at(g.apply_c(z));
            off = Complex64::new(0.0, 0.0);
            acc = g.compose(&acc);
        }
        let p = lifted(&acc, &base, off);
        if !(p.z().norm() < 1.0 - 1e-12) {
            return Err(Error::Range("geodesic lift reached the disk boundary".into()));
        }
        let (w, _) = total_factor(metric, &LocalPoint::with_offset(base.base, base.offset + off))?;
        samples.push(p);
        speed.push(w.exp() * v.norm());
    }
    let mut c = Curve::new(samples, false)?;
    c.speed = Some(speed);
    Ok(c)
}

/// `e^u` at the σ-midpoint of every mesh edge times its σ-length.
pub fn edge_g_lengths(metric: &ConformalMetric, mesh: &SurfaceMesh) -> Result<Vec<f64>> {
    mesh.edges
        .par_iter()
        .zip(&mesh.len_sigma)
        .map(|(&[a, b], &l)| {
            let mid = hyp::geodesic_interpolate(&mesh.points[a], &mesh.points[b], 0.5);
            Ok(l * metric.field.value(&mid)?.exp())
        })
        .collect()
}

/// Largest graph distance between glued vertices with g-edge lengths.
pub fn diameter_estimate(metric: &ConformalMetric, mesh: &SurfaceMesh) -> Result<f64> {
    let lens = edge_g_lengths(metric, mesh)?;
    let adj = mesh.adjacency(|e| lens[e]);
    if surface::dijkstra(&adj, 0).iter().any(|d| !d.is_finite()) {
        return Err(Error::Topology("edge graph is disconnected".into()));
    }
    Ok(surface::graph_diameter(&adj))
}

/// Largest g-graph distance between mesh vertices within σ-distance `radius` of `center`.
pub fn ball_graph_diameter(metric: &ConformalMetric, mesh: &SurfaceMesh, center: Complex64, radius: f64) -> Result<f64> {
    let lens = edge_g_lengths(metric, mesh)?;
    let adj = mesh.adjacency(|e| lens[e]);
    let c = LocalPoint::at(center);
    let mut inside: Vec<usize> = mesh
        .points
        .iter()
        .zip(&mesh.rep)
        .filter(|(p, _)| c.distance(p) < radius)
        .map(|(_, &r)| r)
        .collect();
    inside.sort_unstable();
    inside.dedup();
    if inside.is_empty() {
        return Err(Error::Domain("no mesh vertex in the ball".into()));
    }
    let worst = inside
        .par_iter()
        .map(|&s| {
            let d = surface::dijkstra(&adj, s);
            inside.iter().map(|&t| d[t]).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    if !worst.is_finite() {
        return Err(Error::Topology("edge graph is disconnected".into()));
    }
    Ok(worst)
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r < CHART_MAX_RADIUS) {
        return Err(Error::Range(format!("radius {r} outside the polar chart (0, {CHART_MAX_RADIUS})")));
    }
    Ok(())
}

/// Trapezoid mean of `u` over the σ-circle of radius `r`, times `2π`.
fn circle_sum(metric: &ConformalMetric, c: &LocalPoint, r: f64, n: usize) -> Result<f64> {
    let vals: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| u_at(metric, &polar_point(c, r, 2.0 * PI * j as f64 / n as f64)))
        .collect::<Result<_>>()?;
    Ok(2.0 * PI / n as f64 * vals.iter().sum::<f64>())
}

/// `∫_{S_σ(center, R)} u dl_σ`.
pub fn circle_integral_u(metric: &ConformalMetric, center: Complex64, r: f64) -> Result<f64> {
    circle_integral_u_with(metric, center, r, CIRCLE_NODES)
}

pub fn circle_integral_u_with(metric: &ConformalMetric, center: Complex64, r: f64, n_theta: usize) -> Result<f64> {
    check_radius(r)?;
    Ok(r.sinh() * circle_sum(metric, &LocalPoint::at(center), r, n_theta.max(1))?)
}

/// `2π sinh R (max u - 2 log cosh(R/2))`.
pub fn circle_lower_bound(max_u: f64, r: f64) -> f64 {
    2.0 * PI * r.sinh() * (max_u - 2.0 * (0.5 * r).cosh().ln())
}

/// `-2π - 4π((cosh R + 1) log cosh(R/2) - cosh R / 2)`.
pub fn region_lower_bound(r: f64) -> f64 {
    let c = r.cosh();
    -2.0 * PI - 4.0 * PI * ((c + 1.0) * (0.5 * r).cosh().ln() - 0.5 * c)
}

/// `(∬_{B_σ(center, R)} u dv_σ, explicit lower bound)`.
pub fn region_integral_u(metric: &ConformalMetric, center: Complex64, r: f64) -> Result<(f64, f64)> {
    region_integral_u_with(metric, center, r, RADIAL_NODES, CIRCLE_NODES)
}

pub fn region_integral_u_with(
    metric: &ConformalMetric,
    center: Complex64,
    r: f64,
    n_r: usize,
    n_theta: usize,
) -> Result<(f64, f64)> {
    check_radius(r)?;
    let c = LocalPoint::at(center);
    let n_r = n_r.max(1);
    let h = r / n_r as f64;
    let rings: Vec<f64> = (0..=n_r)
        .into_par_iter()
        .map(|i| {
            let ri = i as f64 * h;
            if i == 0 {
                return Ok(0.0);
            }
            let w = if i == n_r { 0.5 } else { 1.0 };
            Ok(w * ri.sinh() * circle_sum(metric, &c, ri, n_theta.max(1))?)
        })
        .collect::<Result<_>>()?;
    Ok((h * rings.iter().sum::<f64>(), region_lower_bound(r)))
}

/// Fermi coordinates about the systole axis: `r` signed distance, `θ` arclength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderChart {
    pub core_length: f64,
    pub half_width: f64,
    pub n_r: usize,
    pub n_theta: usize,
    /// Direction of the lifted axis through the origin.
    pub direction: f64,
}

impl CylinderChart {
    pub fn new(core_length: f64, half_width: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        if !(core_length > 0.0 && half_width > 0.0) || n_r < 2 || n_theta < 2 {
            return Err(Error::Domain("invalid cylinder chart".into()));
        }
        Ok(CylinderChart { core_length, half_width, n_r, n_theta, direction: 0.0 })
    }

    /// Chart about the systole through sides 0 and 4, out to the embedded collar width.
    pub fn systole(domain: &FundamentalDomain, n_r: usize, n_theta: usize) -> Result<Self> {
        let l = 2.0 * domain.inradius;
        Self::new(l, (1.0 / (0.5 * l).sinh()).asinh(), n_r, n_theta)
    }

    pub fn point(&self, r: f64, theta: f64) -> LocalPoint {
        let t = MobiusTransform::translation(self.direction, theta);
        let w = Complex64::from_polar((0.5 * r).tanh(), self.direction + 0.5 * PI);
        LocalPoint::at(t.apply_c(w))
    }
}

/// Green's identity on the collar band `-ρ < r < -ε` for a chart function `f(r, θ)`.
///
/// Both sides are discretized independently at the chart's grid: the left with
/// the trapezoid rule on `Δ_σ f cosh r` (supplied by `laplacian`), the right with
/// centered differences of `∫ f dθ`. Returns `|LHS - RHS|`.
pub fn collar_green_residual_fn<F, L>(f: F, laplacian: L, chart: &CylinderChart, eps: f64, rho: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
    L: Fn(f64, f64) -> Result<f64> + Sync,
{
    if !(0.0 <= eps && eps < rho && rho < chart.half_width) {
        return Err(Error::Range(format!(
            "collar band ({eps}, {rho}) must satisfy 0 <= eps < rho < {}",
            chart.half_width
        )));
    }
    let l = chart.core_length;
    let nt = chart.n_theta;
    let dt = l / nt as f64;
    let theta = |j: usize| -0.5 * l + j as f64 * dt;
    let ring = |g: &(dyn Fn(f64, f64) -> Result<f64> + Sync), r: f64| -> Result<f64> {
        let s: Vec<f64> = (0..nt).into_par_iter().map(|j| g(r, theta(j))).collect::<Result<_>>()?;
        Ok(dt * s.iter().sum::<f64>())
    };
    let hr = (rho - eps) / chart.n_r as f64;
    let lhs_rows: Vec<f64> = (0..=chart.n_r)
        .map(|i| {
            let r = -rho + i as f64 * hr;
            let w = if i == 0 || i == chart.n_r { 0.5 } else { 1.0 };
            Ok(w * r.cosh() * ring(&laplacian, r)?)
        })
        .collect::<Result<_>>()?;
    let lhs = hr * lhs_rows.iter().sum::<f64>();
    let deriv = |r: f64| -> Result<f64> { Ok((ring(&f, r + hr)? - ring(&f, r - hr)?) / (2.0 * hr)) };
    let rhs = eps.cosh() * deriv(-eps)? - rho.cosh() * deriv(-rho)?;
    Ok((lhs - rhs).abs())
}

/// Green residual of `u` on the collar band, using the analytic Laplacian when available.
pub fn collar_green_residual(metric: &ConformalMetric, chart: &CylinderChart, eps: f64, rho: f64) -> Result<f64> {
    let f = |r: f64, t: f64| u_at(metric, &chart.point(r, t));
    match &metric.field {
        ScalarField::Analytic(a) => {
            let lap = |r: f64, t: f64| {
                let p = chart.point(r, t);
                let z = p.z();
                let domain = &metric.base.domain;
                if domain.max_excess(z).1 <= 1e-12 {
                    Ok(a.laplacian(&p))
                } else {
                    Ok(a.laplacian(&LocalPoint::at(domain.reduce(z)?.0)))
                }
            };
            collar_green_residual_fn(f, lap, chart, eps, rho)
        }
        ScalarField::Sampled(_) => {
            let h = 1e-3;
            let lap = |r: f64, t: f64| {
                let frr = (f(r + h, t)? - 2.0 * f(r, t)? + f(r - h, t)?) / (h * h);
                let fr = (f(r + h, t)? - f(r - h, t)?) / (2.0 * h);
                let ftt = (f(r, t + h)? - 2.0 * f(r, t)? + f(r, t - h)?) / (h * h);
                Ok(frr + r.tanh() * fr + ftt / (r.cosh() * r.cosh()))
            };
            collar_green_residual_fn(f, lap, chart, eps, rho)
        }
    }
}

/// Green's identity on the σ-ball about `center`: `∬ Δu dv_σ` against
/// `sinh R · d/dR ∫ u dθ`, on an `n × n` polar grid. Returns `|LHS - RHS|`.
pub fn polar_green_residual(metric: &ConformalMetric, center: Complex64, r: f64, n: usize) -> Result<f64> {
    check_radius(r + r / n as f64)?;
    let a = match &metric.field {
        ScalarField::Analytic(a) => a,
        ScalarField::Sampled(_) => {
            return Err(Error::Usage("polar Green residual needs an analytic field".into()));
        }
    };
    let c = LocalPoint::at(center);
    let domain = &metric.base.domain;
    let lap = |p: &LocalPoint| -> Result<f64> {
        if domain.max_excess(p.z()).1 <= 1e-12 {
            Ok(a.laplacian(p))
        } else {
            Ok(a.laplacian(&LocalPoint::at(domain.reduce(p.z())?.0)))
        }
    };
    let h = r / n as f64;
    let dt = 2.0 * PI / n as f64;
    let rows: Vec<f64> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let ri = i as f64 * h;
            let w = if i == n { 0.5 } else { 1.0 };
            let s = (0..n)
                .map(|j| lap(&polar_point(&c, ri, j as f64 * dt)))
                .sum::<Result<f64>>()?;
            Ok(w * ri.sinh() * dt * s)
        })
        .collect::<Result<_>>()?;
    let lhs = h * rows.iter().sum::<f64>();
    let rhs = r.sinh() * (circle_sum(metric, &c, r + h, n)? - circle_sum(metric, &c, r - h, n)?) / (2.0 * h);
    Ok((lhs - rhs).abs())
}

/// `3 W` with `W = sqrt(max f) (2π A / ε)^{1/2}`.
pub fn conjugate_free_diameter_bound(max_det_factor: f64, eps: f64, area: f64) -> f64 {
    3.0 * max_det_factor.sqrt() * (2.0 * PI * area / eps).sqrt()
}

/// Curve table with columns `s, x, y, u, speed`.
///
/// `s` is cumulative g-length; `speed` is the recorded g-speed, or `e^u`
/// (g-speed per unit σ-length) for curves without one.
pub fn curve_csv(metric: &ConformalMetric, c: &Curve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["s", "x", "y", "u", "speed"])?;
    let mut s = 0.0;
    for (i, p) in c.samples.iter().enumerate() {
        if i > 0 {
            let seg = Curve::new(vec![c.samples[i - 1], *p], false)?;
            s += curve_length(metric, &seg)?;
        }
        let u = u_at(metric, p)?;
        let speed = c.speed.as_ref().map(|v| v[i]).unwrap_or(u.exp());
        let z = p.z();
        w.write_record([s, z.re, z.im, u, speed].iter().map(|x| format!("{x:e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numeric(e.to_string()))
}
