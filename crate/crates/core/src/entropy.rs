//! Closed-form entropy bounds for conformal metrics.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conformal::{AnalyticField, ConformalMetric, Profile, ScalarField, Term};
use crate::error::{Error, Result};

/// Metric and topological entropy of a curvature -1 surface.
pub const BASE_ENTROPY: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyBounds {
    /// `∫ e^u dv_σ / A`.
    pub katok_factor: f64,
    /// Upper bound on `h_μ(g)`.
    pub h_mu_upper: f64,
    /// Lower bound on `h_top(g)`.
    pub h_top_lower: f64,
    pub universal_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coding_upper: Option<f64>,
}

/// `∫ e^u dv_σ / A` by the same chart quadrature as the area.
pub fn katok_factor(metric: &ConformalMetric) -> Result<f64> {
    let a = metric.area;
    let integral = match &metric.field {
        ScalarField::Analytic(f) => {
            // ∫ e^u is the area functional of u / 2
            let half = AnalyticField {
                offset: 0.5 * f.offset,
                terms: f
                    .terms
                    .iter()
                    .map(|t| Term { anchor: t.anchor, profile: Arc::new(Halved(t.profile.clone())) })
                    .collect(),
            };
            half.area(metric.base.total_area)
        }
        ScalarField::Sampled(s) => {
            let m = s.mesh.vertex_sigma_areas();
            m.iter().zip(&s.values).map(|(w, u)| w * u.exp()).sum()
        }
    };
    let k = integral / a;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Numeric(format!("Katok factor {k} is not positive")));
    }
    Ok(k)
}

#[derive(Debug)]
struct Halved(Arc<dyn Profile>);

impl Profile for Halved {
    fn eval(&self, r: f64) -> [f64; 3] {
        let d = self.0.eval(r);
        [0.5 * d[0], 0.5 * d[1], 0.5 * d[2]]
    }
    fn support(&self) -> f64 {
        self.0.support()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints()
    }
}

/// Katok's bounds `h_μ(g) ≤ h_μ(σ) κ` and `h_top(g) ≥ h_top(σ) / κ`.
pub fn katok_bounds(metric: &ConformalMetric, chi: i64) -> Result<EntropyBounds> {
    katok_bounds_with_base(metric, chi, BASE_ENTROPY, BASE_ENTROPY)
}

pub fn katok_bounds_with_base(metric: &ConformalMetric, chi: i64, h_mu: f64, h_top: f64) -> Result<EntropyBounds> {
    let k = katok_factor(metric)?;
    Ok(EntropyBounds {
        katok_factor: k,
        h_mu_upper: h_mu * k,
        h_top_lower: h_top / k,
        universal_gap: universal_gap(metric.area, chi)?,
        coding_upper: None,
    })
}

/// `sqrt(2π|χ| / A)`.
pub fn universal_gap(area: f64, chi: i64) -> Result<f64> {
    if chi >= 0 {
        return Err(Error::Domain(format!("Euler characteristic {chi} is not negative")));
    }
    if !(area > 0.0) {
        return Err(Error::Domain(format!("area {area} is not positive")));
    }
    Ok((2.0 * PI * chi.unsigned_abs() as f64 / area).sqrt())
}

/// `Γ(n/2 + 1)` for integer `n >= 0`, exact recursion on half-integers.
fn gamma_half_plus_one(n: u32) -> f64 {
    let (mut g, mut x) = if n % 2 == 0 { (1.0, 1.0) } else { (0.5 * PI.sqrt(), 1.5) };
    let target = 0.5 * n as f64 + 1.0;
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Volume of the Euclidean `n`-ball of radius `r`.
pub fn ball_volume(r: f64, n: u32) -> f64 {
    (r * PI.sqrt()).powi(n as i32) / gamma_half_plus_one(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodingBound {
    pub eps: f64,
    pub ball_volume: f64,
    pub n_balls: u64,
    pub bound: f64,
}

/// `(log N) / ε` with `ε = ρ/4` and `N = ⌊V / ν(ε, n)⌋`.
pub fn coding_entropy_bound(volume: f64, n: u32, rho: f64) -> Result<CodingBound> {
    if !(volume > 0.0 && rho > 0.0) || n < 2 {
        return Err(Error::Parameter(format!("invalid coding inputs V = {volume}, n = {n}, rho = {rho}")));
    }
    let eps = 0.25 * rho;
    let nu = ball_volume(eps, n);
    let ratio = volume / nu;
    // absorb round-off when V / ν is an integer
    let snapped = ratio.round();
    let count = if (ratio - snapped).abs() <= 1e-12 * ratio { snapped } else { ratio.floor() };
    if !(count >= 2.0) {
        return Err(Error::Parameter(format!("ball volume {nu} leaves N = {count} < 2")));
    }
    if count > u64::MAX as f64 {
        return Err(Error::Numeric("ball count overflows".into()));
    }
    Ok(CodingBound { eps, ball_volume: nu, n_balls: count as u64, bound: count.ln() / eps })
}
