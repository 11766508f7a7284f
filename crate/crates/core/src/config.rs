//! Run configuration, read from JSON.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilyParams};
use crate::surface::MAX_LEVEL;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quadrature {
    pub circle_nodes: usize,
    pub radial_nodes: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { circle_nodes: 1024, radial_nodes: 1024 }
    }
}

/// Relative slacks by the kind of fact being checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Matrix-level identities.
    pub exact: f64,
    pub quadrature: f64,
    pub mesh: f64,
    /// Absolute slack on `1 + Δu ≥ 0` for analytic fields.
    pub nonpositivity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { exact: 0.0, quadrature: 0.01, mesh: 0.05, nonpositivity: 1e-6 }
    }
}

/// Cartesian parameter grid of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyGrid {
    pub family: FamilyKind,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub amplitude: Vec<f64>,
}

impl FamilyGrid {
    /// Members in row order: `eps` outermost, then `delta`, then `amplitude`.
    pub fn members(&self) -> Vec<FamilyParams> {
        let or_one = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let mut out = Vec::new();
        for &e in &or_one(&self.eps, 0.0) {
            for &d in &or_one(&self.delta, 0.0) {
                for &a in &or_one(&self.amplitude, 1.0) {
                    let mut p = FamilyParams::new(self.family, e, d);
                    p.amplitude = a;
                    out.push(p);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<String>,
    pub sweep: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub level: usize,
    /// Mesh level of the σ-diameter reference.
    pub diameter_level: usize,
    /// Highest eigenvalue index computed.
    pub spectrum_k: usize,
    pub radii: Vec<f64>,
    pub quadrature: Quadrature,
    pub tolerances: Tolerances,
    pub grids: Vec<FamilyGrid>,
    pub outputs: Outputs,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            version: CONFIG_VERSION,
            level: 4,
            diameter_level: 4,
            spectrum_k: 10,
            radii: vec![0.5, 1.0],
            quadrature: Quadrature::default(),
            tolerances: Tolerances::default(),
            grids: Vec::new(),
            outputs: Outputs::default(),
        }
    }
}

impl Config {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(s).map_err(|e| Error::Usage(format!("invalid config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Usage(format!("unsupported config version {}", self.version)));
        }
        if self.level > MAX_LEVEL || self.diameter_level > MAX_LEVEL {
            return Err(Error::Usage(format!("mesh level above {MAX_LEVEL}")));
        }
        if self.spectrum_k == 0 || self.quadrature.circle_nodes < 8 || self.quadrature.radial_nodes < 8 {
            return Err(Error::Usage("spectrum_k and quadrature sizes must be positive (nodes >= 8)".into()));
        }
        let t = &self.tolerances;
        if ![t.exact, t.quadrature, t.mesh, t.nonpositivity].iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(Error::Usage("tolerances must be finite and nonnegative".into()));
        }
        if !self.radii.iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err(Error::Usage("radii must be positive".into()));
        }
        for g in &self.grids {
            if ![&g.eps, &g.delta, &g.amplitude].iter().all(|v| v.iter().all(|x| x.is_finite() && *x >= 0.0)) {
                return Err(Error::Usage(format!("grid for {} has invalid values", g.family)));
            }
        }
        Ok(())
    }

    /// All grid members in file order.
    pub fn members(&self) -> Vec<FamilyParams> {
        self.grids.iter().flat_map(|g| g.members()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        let back = Config::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn grid_expansion_order() {
        let c = Config::from_json(
            r#"{"version": 1, "grids": [{"family": "dumbbell", "eps": [0.2], "delta": [0.2, 0.1, 0.05]},
                {"family": "nonpositive_radial", "amplitude": [0.5, 1.0]}]}"#,
        )
        .unwrap();
        let m = c.members();
        assert_eq!(m.len(), 5);
        assert_eq!(m[1].delta, 0.1);
        assert_eq!(m[4].amplitude, 1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(Config::from_json(r#"{"version": 2}"#).is_err());
        assert!(Config::from_json(r#"{"version": 1, "level": 9}"#).is_err());
        assert!(Config::from_json(r#"{"version": 1, "bogus": 1}"#).is_err());
        assert!(Config::from_json(r#"{"version": 1, "tolerances": {"mesh": -1}}"#).is_err());
    }
}
