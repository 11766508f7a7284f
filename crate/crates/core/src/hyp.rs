//! Hyperbolic plane primitives in the Poincaré disk model.
//!
//! The metric is normalized to curvature -1, i.e. `(2 / (1 - |z|^2))^2 |dz|^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default finite-difference step, in hyperbolic length units.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

const BOUNDARY_GUARD: f64 = 1e-15;

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    pub x: f64,
    pub y: f64,
}

impl DiskPoint {
    pub const ORIGIN: DiskPoint = DiskPoint { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Result<Self> {
        let p = DiskPoint { x, y };
        p.check()?;
        Ok(p)
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    fn check(self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite()) || self.norm_sqr() >= 1.0 - BOUNDARY_GUARD {
            return Err(Error::Domain(format!(
                "point ({}, {}) is not strictly inside the unit disk",
                self.x, self.y
            )));
        }
        Ok(())
    }
}

/// A disk point stored as `base + offset`.
///
/// Mesh vertices clustered around a refinement center keep their offsets
/// relative to that center, so differences between nearby vertices stay
/// exact even when they are far below the resolution of the absolute
/// coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPoint {
    pub base: Complex64,
    pub offset: Complex64,
}

impl LocalPoint {
    pub fn at(z: Complex64) -> Self {
        LocalPoint {
            base: z,
            offset: Complex64::new(0.0, 0.0),
        }
    }

    pub fn with_offset(base: Complex64, offset: Complex64) -> Self {
        LocalPoint { base, offset }
    }

    /// Absolute position (rounded).
    pub fn z(&self) -> Complex64 {
        self.base + self.offset
    }

    /// `other - self`, exact when both share a base.
    pub fn delta_to(&self, other: &LocalPoint) -> Complex64 {
        if self.base == other.base {
            other.offset - self.offset
        } else {
            other.z() - self.z()
        }
    }

    /// Point `self + t (other - self)` in the Euclidean disk chart.
    pub fn lerp(&self, other: &LocalPoint, t: f64) -> LocalPoint {
        if self.base == other.base {
            LocalPoint::with_offset(self.base, self.offset + (other.offset - self.offset) * t)
        } else {
            LocalPoint::at(self.z() + (other.z() - self.z()) * t)
        }
    }

    /// Image of `other` under the disk isometry sending `self` to 0.
    pub fn recentered(&self, other: &LocalPoint) -> Complex64 {
        let num = self.delta_to(other);
        let den = Complex64::new(1.0, 0.0) - self.z().conj() * other.z();
        num / den
    }

    pub fn distance(&self, other: &LocalPoint) -> f64 {
        2.0 * self.recentered(other).norm().min(1.0 - f64::EPSILON).atanh()
    }
}

/// Isometry distance between two disk coordinates, no validation.
pub(crate) fn distance_c(p: Complex64, q: Complex64) -> f64 {
    let w = (q - p) / (Complex64::new(1.0, 0.0) - p.conj() * q);
    2.0 * w.norm().min(1.0 - f64::EPSILON).atanh()
}

/// Hyperbolic distance between two disk points.
pub fn disk_distance(p: DiskPoint, q: DiskPoint) -> Result<f64> {
    p.check()?;
    q.check()?;
    Ok(distance_c(p.to_complex(), q.to_complex()))
}

/// Conformal factor `2 / (1 - |z|^2)` of the hyperbolic metric.
pub fn poincare_factor(p: DiskPoint) -> Result<f64> {
    p.check()?;
    Ok(lambda(p.to_complex()))
}

pub(crate) fn lambda(z: Complex64) -> f64 {
    2.0 / (1.0 - z.norm_sqr())
}

/// Area of a hyperbolic disk of radius `radius`.
pub fn ball_area_hyp(radius: f64) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::Domain(format!("negative radius {radius}")));
    }
    // 2π(cosh R - 1) = 4π sinh²(R/2), the latter without cancellation.
    let s = (0.5 * radius).sinh();
    Ok(4.0 * PI * s * s)
}

/// Möbius map `z -> (a z + b) / (c z + d)` preserving the unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusTransform {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl MobiusTransform {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if det.norm() < 1e-300 {
            return Err(Error::Domain("singular Möbius transform".into()));
        }
        let t = MobiusTransform { a, b, c, d }.normalized();
        // det = 1 and disk-preserving forces d = ±conj(a), c = ±conj(b).
        let plus = (t.d - t.a.conj()).norm() + (t.c - t.b.conj()).norm();
        let minus = (t.d + t.a.conj()).norm() + (t.c + t.b.conj()).norm();
        let scale = t.a.norm() + t.b.norm();
        if plus.min(minus) > 1e-9 * scale {
            return Err(Error::Domain("transform does not preserve the unit disk".into()));
        }
        Ok(t)
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        MobiusTransform { a: one, b: zero, c: zero, d: one }
    }

    /// Rotation by `angle` about the origin.
    pub fn rotation(angle: f64) -> Self {
        let h = Complex64::from_polar(1.0, 0.5 * angle);
        let zero = Complex64::new(0.0, 0.0);
        MobiusTransform { a: h, b: zero, c: zero, d: h.conj() }
    }

    /// Hyperbolic translation by `distance` along the diameter at angle `direction`.
    pub fn translation(direction: f64, distance: f64) -> Self {
        let e = Complex64::from_polar(1.0, direction);
        let ch = (0.5 * distance).cosh();
        let sh = (0.5 * distance).sinh();
        // e ∘ (z ch + sh) / (z sh + ch) ∘ e^{-1}
        MobiusTransform {
            a: Complex64::new(ch, 0.0),
            b: e * sh,
            c: e.conj() * sh,
            d: Complex64::new(ch, 0.0),
        }
    }

    /// Isometry sending `center` to the origin.
    pub fn recenter(center: Complex64) -> Self {
        let s = 1.0 / (1.0 - center.norm_sqr()).sqrt();
        MobiusTransform {
            a: Complex64::new(s, 0.0),
            b: -center * s,
            c: -center.conj() * s,
            d: Complex64::new(s, 0.0),
        }
    }

    /// Scale so that `ad - bc = 1`.
    pub fn normalized(self) -> Self {
        let det = self.a * self.d - self.b * self.c;
        let s = det.sqrt().inv();
        MobiusTransform {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
        }
    }

    pub fn apply_c(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Complex derivative at `z`.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let den = self.c * z + self.d;
        (self.a * self.d - self.b * self.c) / (den * den)
    }

    pub fn compose(&self, inner: &MobiusTransform) -> MobiusTransform {
        MobiusTransform {
            a: self.a * inner.a + self.b * inner.c,
            b: self.a * inner.b + self.b * inner.d,
            c: self.c * inner.a + self.d * inner.c,
            d: self.c * inner.b + self.d * inner.d,
        }
        .normalized()
    }

    pub fn inverse(&self) -> MobiusTransform {
        MobiusTransform {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
        .normalized()
    }

    /// `|trace|` of the determinant-one representative.
    pub fn abs_trace(&self) -> f64 {
        let t = self.normalized();
        (t.a + t.d).norm()
    }

    /// Translation length of a hyperbolic element: `cosh(l/2) = |tr|/2`.
    pub fn translation_length(&self) -> Result<f64> {
        let half = 0.5 * self.abs_trace();
        if half <= 1.0 + 1e-12 {
            return Err(Error::Construction(format!(
                "transform is not hyperbolic (|trace|/2 = {half})"
            )));
        }
        Ok(2.0 * half.acosh())
    }
}

/// Apply a disk isometry to a point.
pub fn mobius_apply(t: &MobiusTransform, p: DiskPoint) -> Result<DiskPoint> {
    p.check()?;
    let w = t.apply_c(p.to_complex());
    DiskPoint::from_complex(w).map_err(|_| {
        Error::Precision(format!("image ({}, {}) is numerically on the boundary", w.re, w.im))
    })
}

/// Geodesic polar chart around a center point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarChart {
    pub center: DiskPoint,
    pub max_radius: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl PolarChart {
    pub fn new(center: DiskPoint, max_radius: f64, n_r: usize, n_theta: usize) -> Result<Self> {
        center.check()?;
        if !(max_radius > 0.0) || n_r < 8 || n_theta < 8 {
            return Err(Error::Domain(format!(
                "invalid polar chart (radius {max_radius}, grid {n_r}x{n_theta})"
            )));
        }
        Ok(PolarChart { center, max_radius, n_r, n_theta })
    }

    /// Disk coordinate of the point with polar coordinates `(r, theta)`.
    pub fn point(&self, r: f64, theta: f64) -> Complex64 {
        let w = Complex64::from_polar((0.5 * r).tanh(), theta);
        MobiusTransform::recenter(self.center.to_complex())
            .inverse()
            .apply_c(w)
    }

    /// Outward unit radial direction (Euclidean, in disk coordinates) at `(r, theta)`.
    pub fn radial_direction(&self, r: f64, theta: f64) -> Complex64 {
        let inv = MobiusTransform::recenter(self.center.to_complex()).inverse();
        let w = Complex64::from_polar((0.5 * r).tanh(), theta);
        let d = inv.derivative(w) * Complex64::from_polar(1.0, theta);
        d / d.norm()
    }
}

/// Central-difference hyperbolic Laplacian of `field(r, theta)` at `(r, theta)`.
///
/// Uses `u_rr + coth(r) u_r + u_θθ / sinh²(r)`. For `r < 10 h` the polar form
/// is singular and a 5-point stencil in the conformal disk chart centered at
/// the chart origin is used instead (`Δ_σ = (1-|w|²)²/4 · Δ_E`).
pub fn polar_laplacian<F>(field: F, chart: &PolarChart, r: f64, theta: f64, h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    if !(h > 0.0) || r < 0.0 || r + h >= chart.max_radius {
        return Err(Error::Range(format!(
            "stencil at r = {r} with h = {h} leaves chart of radius {}",
            chart.max_radius
        )));
    }
    if r < 10.0 * h {
        let eval = |w: Complex64| {
            let rr = 2.0 * w.norm().atanh();
            field(rr, w.arg())
        };
        let w0 = Complex64::from_polar((0.5 * r).tanh(), theta);
        let hw = 0.5 * h;
        let ex = Complex64::new(hw, 0.0);
        let ey = Complex64::new(0.0, hw);
        let lap_e = (eval(w0 + ex) + eval(w0 - ex) + eval(w0 + ey) + eval(w0 - ey) - 4.0 * eval(w0))
            / (hw * hw);
        let s = 1.0 - w0.norm_sqr();
        return Ok(0.25 * s * s * lap_e);
    }
    if r - h <= 0.0 {
        return Err(Error::Range(format!("stencil at r = {r} crosses the chart center")));
    }
    let f0 = field(r, theta);
    let frp = field(r + h, theta);
    let frm = field(r - h, theta);
    let ftp = field(r, theta + h);
    let ftm = field(r, theta - h);
    let u_rr = (frp - 2.0 * f0 + frm) / (h * h);
    let u_r = (frp - frm) / (2.0 * h);
    let u_tt = (ftp - 2.0 * f0 + ftm) / (h * h);
    let sh = r.sinh();
    Ok(u_rr + u_r * r.cosh() / sh + u_tt / (sh * sh))
}

/// Hyperbolic midpoint of the geodesic segment `[p, q]`.
pub fn hyperbolic_midpoint(p: Complex64, q: Complex64) -> Complex64 {
    let to0 = MobiusTransform::recenter(p);
    let w = to0.apply_c(q);
    let r = w.norm();
    if r == 0.0 {
        return p;
    }
    let m = w * (half_tanh(r) / r);
    to0.inverse().apply_c(m)
}

/// Point at fraction `t` of the geodesic segment `[p, q]`, sharing the base of `p`.
pub fn geodesic_interpolate(p: &LocalPoint, q: &LocalPoint, t: f64) -> LocalPoint {
    let w = p.recentered(q);
    let r = w.norm();
    if r == 0.0 || t == 0.0 {
        return *p;
    }
    let d = 2.0 * r.min(1.0 - f64::EPSILON).atanh();
    let v = w * ((0.5 * t * d).tanh() / r);
    let c = p.z();
    let shift = v * (1.0 - c.norm_sqr()) / (Complex64::new(1.0, 0.0) + c.conj() * v);
    LocalPoint::with_offset(p.base, p.offset + shift)
}

/// `tanh(atanh(r) / 2)`, the disk radius at half the hyperbolic distance.
fn half_tanh(r: f64) -> f64 {
    r / (1.0 + (1.0 - r * r).sqrt())
}

/// Area of the geodesic triangle with the given vertices.
///
/// Sends the first vertex to the origin, then `tan(Δ/2) = Im(w̄₂w₃)/(1 - Re(w̄₂w₃))`,
/// which stays accurate for very small triangles.
pub fn triangle_area(p1: &LocalPoint, p2: &LocalPoint, p3: &LocalPoint) -> f64 {
    let w2 = p1.recentered(p2);
    let w3 = p1.recentered(p3);
    let prod = w2.conj() * w3;
    2.0 * prod.im.abs().atan2(1.0 - prod.re)
}

/// Signed hyperbolic distance from `z` to the diameter at angle `direction`.
///
/// Positive on the counter-clockwise side.
pub fn signed_distance_to_diameter(z: Complex64, direction: f64) -> f64 {
    let w = z * Complex64::from_polar(1.0, -direction);
    (2.0 * w.im / (1.0 - w.norm_sqr())).asinh()
}

/// Euclidean gradient (as a complex number) of the signed distance to a diameter.
pub fn signed_distance_to_diameter_grad(z: Complex64, direction: f64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, -direction);
    let w = z * rot;
    let s = 1.0 - w.norm_sqr();
    let q = 2.0 * w.im / s;
    let dq_dx = 4.0 * w.im * w.re / (s * s);
    let dq_dy = 2.0 / s + 4.0 * w.im * w.im / (s * s);
    let k = 1.0 / (1.0 + q * q).sqrt();
    // gradient in rotated frame, rotate back
    Complex64::new(dq_dx * k, dq_dy * k) * rot.conj()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> DiskPoint {
        DiskPoint::new(x, y).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(disk_distance(p(0.0, 0.0), p(0.0, 0.0)).unwrap(), 0.0);
        let d = disk_distance(p(0.0, 0.0), p(0.5, 0.0)).unwrap();
        assert!((d - 3f64.ln()).abs() < 1e-14);
        assert!(disk_distance(p(0.0, 0.0), DiskPoint { x: 1.0, y: 0.0 }).is_err());
    }

    #[test]
    fn factor_examples() {
        assert_eq!(poincare_factor(p(0.0, 0.0)).unwrap(), 2.0);
        assert!((poincare_factor(p(0.5, 0.0)).unwrap() - 2.0 / 0.75).abs() < 1e-14);
        let mut last = 0.0;
        for i in 0..99 {
            let v = poincare_factor(p(i as f64 / 100.0, 0.0)).unwrap();
            assert!(v > last);
            last = v;
        }
        assert!(poincare_factor(DiskPoint { x: 0.0, y: -1.0 }).is_err());
    }

    #[test]
    fn ball_area_examples() {
        assert_eq!(ball_area_hyp(0.0).unwrap(), 0.0);
        assert!((ball_area_hyp(1.0).unwrap() - 2.0 * PI * (1f64.cosh() - 1.0)).abs() < 1e-12);
        assert!((ball_area_hyp(1.0).unwrap() - 3.4123).abs() < 1e-4);
        let r = 1e-4;
        assert!((ball_area_hyp(r).unwrap() / (PI * r * r) - 1.0).abs() < 1e-8);
        assert!(ball_area_hyp(-0.1).is_err());
    }

    #[test]
    fn mobius_examples() {
        let q = p(0.3, 0.0);
        assert_eq!(mobius_apply(&MobiusTransform::identity(), q).unwrap(), q);
        let r = mobius_apply(&MobiusTransform::rotation(PI), q).unwrap();
        assert!((r.x + 0.3).abs() < 1e-15 && r.y.abs() < 1e-15);
        let t = MobiusTransform::translation(0.4, 1.3);
        let a = p(0.1, -0.2);
        let b = p(-0.4, 0.5);
        let d0 = disk_distance(a, b).unwrap();
        let d1 = disk_distance(mobius_apply(&t, a).unwrap(), mobius_apply(&t, b).unwrap()).unwrap();
        assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn mobius_rejects_non_disk_maps() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        assert!(MobiusTransform::new(one * 2.0, zero, zero, one).is_err());
        assert!(MobiusTransform::new(zero, zero, zero, zero).is_err());
        let t = MobiusTransform::translation(1.0, 2.0);
        assert!(MobiusTransform::new(t.a * 3.0, t.b * 3.0, t.c * 3.0, t.d * 3.0).is_ok());
    }

    #[test]
    fn translation_moves_by_distance() {
        let t = MobiusTransform::translation(0.7, 2.5);
        let img = t.apply_c(Complex64::new(0.0, 0.0));
        assert!((distance_c(Complex64::new(0.0, 0.0), img) - 2.5).abs() < 1e-12);
        assert!((t.translation_length().unwrap() - 2.5).abs() < 1e-12);
        assert!(MobiusTransform::rotation(1.0).translation_length().is_err());
    }

    #[test]
    fn midpoint_halves_distance() {
        let a = Complex64::new(0.2, 0.5);
        let b = Complex64::new(-0.6, 0.1);
        let m = hyperbolic_midpoint(a, b);
        let d = distance_c(a, b);
        assert!((distance_c(a, m) - 0.5 * d).abs() < 1e-12);
        assert!((distance_c(m, b) - 0.5 * d).abs() < 1e-12);
    }

    #[test]
    fn small_triangle_area_is_accurate() {
        // Near the origin the metric is 4|dz|^2, so area ~ 4 * euclidean area.
        let s = 1e-30;
        let t = triangle_area(
            &LocalPoint::at(Complex64::new(0.0, 0.0)),
            &LocalPoint::at(Complex64::new(s, 0.0)),
            &LocalPoint::at(Complex64::new(0.0, s)),
        );
        assert!((t / (4.0 * 0.5 * s * s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polar_laplacian_radial_oracles() {
        let chart = PolarChart::new(DiskPoint::ORIGIN, 3.0, 16, 16).unwrap();
        // Δ(2 log cosh(r/2)) = 1/(1+cosh r) + cosh r/(1+cosh r) = 1
        let f = |r: f64, _t: f64| 2.0 * (0.5 * r).cosh().ln();
        for &r in &[0.0, 0.005, 0.3, 1.0, 2.0] {
            let v = polar_laplacian(f, &chart, r, 0.4, DEFAULT_FD_STEP).unwrap();
            assert!((v - 1.0).abs() < 1e-5, "r={r} v={v}");
        }
        // Δ ln sinh r = -csch² r + coth² r = 1
        let g = |r: f64, _t: f64| r.sinh().ln();
        let v = polar_laplacian(g, &chart, 1.0, 0.0, 1e-3).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
        let c = |_r: f64, _t: f64| 3.7;
        assert!(polar_laplacian(c, &chart, 1.0, 0.0, 1e-3).unwrap().abs() < 1e-8);
        assert!(polar_laplacian(c, &chart, 2.9995, 0.0, 1e-3).is_err());
    }

    #[test]
    fn polar_laplacian_second_order() {
        let chart = PolarChart::new(DiskPoint::ORIGIN, 3.0, 16, 16).unwrap();
        // non-radial field with known Laplacian: u = cos θ · tanh(r/2)^1 is
        // harmonic in the disk chart (it is Re w), hence σ-harmonic.
        let f = |r: f64, t: f64| (0.5 * r).tanh() * t.cos() + r * r;
        // Δ(r²) = 2 + 2 r coth r
        let exact = |r: f64| 2.0 + 2.0 * r * r.cosh() / r.sinh();
        let r = 1.2;
        let e1 = (polar_laplacian(f, &chart, r, 0.7, 4e-2).unwrap() - exact(r)).abs();
        let e2 = (polar_laplacian(f, &chart, r, 0.7, 2e-2).unwrap() - exact(r)).abs();
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn diameter_distance_gradient_matches_fd() {
        let z = Complex64::new(0.3, -0.2);
        let dir = 0.6;
        let g = signed_distance_to_diameter_grad(z, dir);
        let h = 1e-6;
        let fx = (signed_distance_to_diameter(z + Complex64::new(h, 0.0), dir)
            - signed_distance_to_diameter(z - Complex64::new(h, 0.0), dir))
            / (2.0 * h);
        let fy = (signed_distance_to_diameter(z + Complex64::new(0.0, h), dir)
            - signed_distance_to_diameter(z - Complex64::new(0.0, h), dir))
            / (2.0 * h);
        assert!((g.re - fx).abs() < 1e-8 && (g.im - fy).abs() < 1e-8);
    }

    #[test]
    fn geodesic_interpolation_splits_distance() {
        let a = LocalPoint::at(Complex64::new(0.3, -0.2));
        let b = LocalPoint::at(Complex64::new(-0.5, 0.4));
        let d = a.distance(&b);
        for t in [0.0, 0.25, 0.5, 1.0] {
            let m = geodesic_interpolate(&a, &b, t);
            assert!((a.distance(&m) - t * d).abs() < 1e-12);
            assert!((m.distance(&b) - (1.0 - t) * d).abs() < 1e-12);
        }
        let mid = geodesic_interpolate(&a, &b, 0.5).z();
        assert!((mid - hyperbolic_midpoint(a.z(), b.z())).norm() < 1e-14);
    }
}