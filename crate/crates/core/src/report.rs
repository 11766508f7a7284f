//! Bound checks collected into a pass/fail report, and parameter sweeps.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{self, ConformalMetric};
use crate::config::Config;
use crate::entropy::{self, EntropyBounds};
use crate::error::{Error, Result};
use crate::families::{self, FamilyKind, FamilyParams, Member};
use crate::geom::{self, Curve};
use crate::hyp::LocalPoint;
use crate::spectral;
use crate::surface::{HyperbolicSurface, SurfaceMesh};

/// Euler characteristic of the genus-two surface.
pub const CHI: i64 = -2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    /// Absolute slack allowed against the relation.
    pub slack: f64,
    /// Signed distance from violation before slack: positive when the relation holds strictly.
    pub margin: f64,
    pub status: Status,
    /// Whether a failure of this entry fails the report.
    pub enforced: bool,
    pub refs: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReportEntry {
    /// Compare `lhs` and `rhs` with relative slack `rel` (scaled by the larger magnitude).
    pub fn compare(name: &str, lhs: f64, rhs: f64, relation: Relation, rel: f64, refs: &str) -> Self {
        let margin = match relation {
            Relation::Ge => lhs - rhs,
            Relation::Le => rhs - lhs,
            Relation::Eq => -(lhs - rhs).abs(),
        };
        let slack = rel * lhs.abs().max(rhs.abs());
        let ok = margin.is_finite() && margin >= -slack;
        ReportEntry {
            name: name.into(),
            lhs,
            rhs,
            relation,
            slack,
            margin,
            status: if ok { Status::Pass } else { Status::Fail },
            enforced: true,
            refs: refs.into(),
            error: None,
        }
    }

    fn failed(name: &str, relation: Relation, refs: &str, err: &Error) -> Self {
        ReportEntry {
            name: name.into(),
            lhs: 0.0,
            rhs: 0.0,
            relation,
            slack: 0.0,
            margin: 0.0,
            status: Status::Fail,
            enforced: true,
            refs: refs.into(),
            error: Some(err.to_string()),
        }
    }

    fn not_applicable(name: &str, relation: Relation, refs: &str, why: &str) -> Self {
        ReportEntry {
            name: name.into(),
            lhs: 0.0,
            rhs: 0.0,
            relation,
            slack: 0.0,
            margin: 0.0,
            status: Status::NotApplicable,
            enforced: false,
            refs: refs.into(),
            error: Some(why.into()),
        }
    }

    fn informational(mut self) -> Self {
        self.enforced = false;
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub level: usize,
    pub vertices: usize,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub metadata: ReportMetadata,
    pub entries: Vec<ReportEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyBounds>,
    pub passed: bool,
}

impl BoundsReport {
    pub fn entry(&self, name: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Enforced entries that failed.
    pub fn failures(&self) -> Vec<&ReportEntry> {
        self.entries.iter().filter(|e| e.enforced && !e.passed()).collect()
    }
}

struct Builder {
    entries: Vec<ReportEntry>,
}

impl Builder {
    fn check<F>(&mut self, name: &str, relation: Relation, rel: f64, refs: &str, f: F) -> Option<(f64, f64)>
    where
        F: FnOnce() -> Result<(f64, f64)>,
    {
        match f() {
            Ok((l, r)) => {
                self.entries.push(ReportEntry::compare(name, l, r, relation, rel, refs));
                Some((l, r))
            }
            Err(e) => {
                self.entries.push(ReportEntry::failed(name, relation, refs, &e));
                None
            }
        }
    }

    fn skip(&mut self, name: &str, relation: Relation, refs: &str, why: &str) {
        self.entries.push(ReportEntry::not_applicable(name, relation, refs, why));
    }

    fn soften_last(&mut self) {
        if let Some(e) = self.entries.last_mut() {
            *e = e.clone().informational();
        }
    }
}

/// Point where `u` is largest among the octagon center, point anchors and mesh vertices.
pub fn argmax_u(metric: &ConformalMetric, mesh: &SurfaceMesh, anchors: &[Complex64]) -> Result<Complex64> {
    let mut best = (Complex64::new(0.0, 0.0), metric.field.value(&LocalPoint::at(Complex64::new(0.0, 0.0)))?);
    for &a in anchors {
        let v = metric.field.value(&LocalPoint::at(a))?;
        if v > best.1 {
            best = (a, v);
        }
    }
    let vals = metric.vertex_values(mesh)?;
    for (i, &r) in mesh.representatives().iter().enumerate() {
        if vals[i] > best.1 {
            best = (mesh.point(r), vals[i]);
        }
    }
    Ok(best.0)
}

fn nonpositive_family(kind: FamilyKind) -> bool {
    matches!(kind, FamilyKind::Hyperbolic | FamilyKind::Constant | FamilyKind::NonpositiveRadial)
}

/// Run every bound check for `member` on its mesh at `config.level`.
pub fn verify_member(member: &Member, config: &Config) -> BoundsReport {
    let metric = &member.metric;
    let surface = &metric.base;
    let tol = &config.tolerances;
    let mut b = Builder { entries: Vec::new() };
    let mesh = member.mesh(config.level);

    b.check("area", Relation::Eq, tol.quadrature, "int e^{2u} dv_sigma = A", || {
        Ok((conformal::total_area(metric), surface.total_area))
    });

    let mesh = match mesh {
        Ok(m) => Some(m),
        Err(e) => {
            b.entries.push(ReportEntry::failed("mesh", Relation::Eq, "glued octagon mesh", &e));
            None
        }
    };

    // systems shared by the spectral entries
    let spectra = mesh.as_ref().map(|mesh| -> Result<_> {
        let sys = spectral::assemble(metric, mesh)?;
        let flat = sys.with_values(mesh, vec![0.0; sys.dim])?;
        let k = config.spectrum_k.min(sys.dim - 1);
        let res = spectral::eigenvalues(&sys, k)?;
        let base = spectral::eigenvalues(&flat, k)?;
        Ok((sys, res, base))
    });

    if let Some(mesh) = &mesh {
        b.check("mass_total", Relation::Eq, tol.mesh, "sum of lumped masses = A", || {
            let sys = match &spectra {
                Some(Ok((s, _, _))) => s.total_mass(),
                Some(Err(e)) => return Err(Error::Numeric(e.to_string())),
                None => unreachable!(),
            };
            Ok((sys, surface.total_area))
        });
        b.check("gauss_bonnet", Relation::Eq, tol.quadrature, "int K_g dv_g = 2 pi chi", || {
            Ok((conformal::gauss_bonnet(metric, mesh)?, 2.0 * PI * CHI as f64))
        });
    }

    let np = conformal::nonpositivity_check(metric, tol.nonpositivity);
    b.entries.push(ReportEntry::compare(
        "nonpositivity",
        np.min_value,
        -np.tol,
        Relation::Ge,
        0.0,
        "1 + Laplacian_sigma u >= 0, i.e. K_g <= 0",
    ));
    if !nonpositive_family(member.params.kind) {
        b.soften_last();
    }
    let curved_ok = np.pass;
    let why = "metric has positive curvature somewhere";

    if curved_ok {
        b.check("schwarz", Relation::Le, tol.quadrature, "max u <= 1/2 log(A / (4 pi tanh^2(inj/2)))", || {
            Ok((metric.max_u, conformal::schwarz_upper_bound(surface)?))
        });
    } else {
        b.skip("schwarz", Relation::Le, "max u <= 1/2 log(A / (4 pi tanh^2(inj/2)))", why);
    }

    let center = mesh.as_ref().map(|m| argmax_u(metric, m, &member.point_anchors()));
    for &r in &config.radii {
        let cname = format!("circle_integral_R{r}");
        let rname = format!("region_integral_R{r}");
        let crefs = "int_{S(x_max,R)} u dl >= 2 pi sinh R (max u - 2 log cosh(R/2))";
        let rrefs = "int_{B(x_max,R)} u dv >= -2 pi - 4 pi ((cosh R + 1) log cosh(R/2) - cosh R / 2)";
        if !curved_ok {
            b.skip(&cname, Relation::Ge, crefs, why);
            b.skip(&rname, Relation::Ge, rrefs, why);
            continue;
        }
        let c = match &center {
            Some(Ok(c)) => Ok(*c),
            Some(Err(e)) => Err(Error::Numeric(e.to_string())),
            None => Err(Error::Topology("mesh unavailable".into())),
        };
        b.check(&cname, Relation::Ge, tol.quadrature, crefs, || {
            let c = c.as_ref().map_err(|e| Error::Numeric(e.to_string()))?;
            let lhs = geom::circle_integral_u_with(metric, *c, r, config.quadrature.circle_nodes)?;
            Ok((lhs, geom::circle_lower_bound(metric.max_u, r)))
        });
        b.check(&rname, Relation::Ge, tol.quadrature, rrefs, || {
            let c = c.as_ref().map_err(|e| Error::Numeric(e.to_string()))?;
            geom::region_integral_u_with(metric, *c, r, config.quadrature.radial_nodes, config.quadrature.circle_nodes)
        });
    }

    let spec_err = |e: &Error| Error::Numeric(e.to_string());
    let srefs = "e^{-2 max u} lambda_k(sigma) <= lambda_k(g) <= e^{-2 min u} lambda_k(sigma)";
    match &spectra {
        Some(Ok((sys, res, base))) => {
            b.check("eigen_residual", Relation::Le, 0.0, "max ||K v - lambda M v|| / ||v||", || {
                Ok((res.residuals.iter().copied().fold(0.0, f64::max), spectral::RESIDUAL_BOUND))
            });
            b.check("spectral_sandwich", Relation::Eq, 0.0, srefs, || {
                let s = spectral::conformal_eigen_sandwich(metric, sys, base, res, config.spectrum_k)?;
                Ok((s.violations as f64, 0.0))
            });
        }
        Some(Err(e)) => {
            b.entries.push(ReportEntry::failed("eigen_residual", Relation::Le, "max ||K v - lambda M v||", e));
            b.entries.push(ReportEntry::failed("spectral_sandwich", Relation::Eq, srefs, e));
        }
        None => {}
    }

    let drefs = "lambda_1(g) <= R(f_1) + R(f_2)";
    let erefs = "int |grad f_1|^2 dv_sigma <= A / (4 (R_2 - R_1)^2)";
    if member.params.kind == FamilyKind::Dumbbell {
        match (&spectra, &mesh) {
            (Some(Ok((sys, res, _))), Some(mesh)) => {
                let bound = spectral::dumbbell_test_bound(member, mesh, sys);
                b.check("dumbbell_min_max", Relation::Le, 0.0, drefs, || {
                    let d = bound.as_ref().map_err(spec_err)?;
                    Ok((res.eigenvalues[1], d.sum + 1e-8))
                });
                b.check("dumbbell_energy", Relation::Le, tol.mesh, erefs, || {
                    let d = bound.as_ref().map_err(spec_err)?;
                    Ok((d.energy, d.energy_bound))
                });
            }
            (Some(Err(e)), _) => {
                b.entries.push(ReportEntry::failed("dumbbell_min_max", Relation::Le, drefs, e));
                b.entries.push(ReportEntry::failed("dumbbell_energy", Relation::Le, erefs, e));
            }
            _ => {}
        }
    } else {
        b.skip("dumbbell_min_max", Relation::Le, drefs, "not a dumbbell");
        b.skip("dumbbell_energy", Relation::Le, erefs, "not a dumbbell");
    }

    let nrefs = "radial g-length from e^{-1/delta} to eps/2 >= delta^{-1/2} (A/4 pi)^{1/2} (1 - (eps/2)^{-delta/2} e^{-1/2})";
    match &member.neck {
        Some(neck) => {
            b.check("neck_length", Relation::Ge, tol.quadrature, nrefs, || {
                let p = &neck.profile;
                let c = Curve::radial(neck.centers[0], 0.0, p.a, 0.5 * p.eps, 64 + (4.0 / p.delta) as usize * 8)?;
                Ok((geom::curve_length(metric, &c)?, families::neck_length_bound(p.eps, p.delta, surface.total_area)))
            });
        }
        None => b.skip("neck_length", Relation::Ge, nrefs, "no neck"),
    }

    let gamma = Curve::side_axis(&surface.domain, 0, 128);
    let ci = gamma.and_then(|g| geom::curve_integrals(metric, &g));
    b.check("jensen_systole", Relation::Ge, 1e-9, "l_g(gamma) >= l_sigma(gamma) exp(mean of u on gamma)", || {
        let ci = ci.as_ref().map_err(spec_err)?;
        Ok((ci.g_length, ci.jensen_bound()))
    });
    let lrefs = "l_g(gamma) = eps";
    if member.params.kind == FamilyKind::Shrinker {
        b.check("systole_length", Relation::Eq, 1e-6, lrefs, || {
            let ci = ci.as_ref().map_err(spec_err)?;
            Ok((ci.g_length, member.params.eps))
        });
    } else {
        b.skip("systole_length", Relation::Eq, lrefs, "not a shrinker");
    }

    let ent = entropy::katok_bounds(metric, CHI);
    b.check("katok_factor", Relation::Le, 1e-9, "int e^u dv_sigma / A <= 1", || {
        let e = ent.as_ref().map_err(spec_err)?;
        Ok((e.katok_factor, 1.0))
    });

    let entries = b.entries;
    let passed = entries.iter().all(|e| !e.enforced || e.passed());
    BoundsReport {
        metadata: ReportMetadata {
            family: metric.descriptor.family.clone(),
            params: metric.descriptor.params.clone(),
            c: metric.descriptor.c,
            level: config.level,
            vertices: mesh.as_ref().map(|m| m.n_rep).unwrap_or(0),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        },
        entries,
        entropy: ent.ok(),
        passed,
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub eps: f64,
    pub delta: f64,
    pub amplitude: f64,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub area: Option<f64>,
    pub max_u: Option<f64>,
    pub lambda1: Option<f64>,
    pub length_gamma: Option<f64>,
    pub diameter: Option<f64>,
    pub katok_factor: Option<f64>,
    pub dumbbell_bound: Option<f64>,
    pub error: String,
}

fn sweep_member(surface: &Arc<HyperbolicSurface>, params: FamilyParams, level: usize) -> SweepRow {
    let mut row = SweepRow {
        family: params.kind.name().into(),
        eps: params.eps,
        delta: params.delta,
        amplitude: params.amplitude,
        c: None,
        area: None,
        max_u: None,
        lambda1: None,
        length_gamma: None,
        diameter: None,
        katok_factor: None,
        dumbbell_bound: None,
        error: String::new(),
    };
    let run = |row: &mut SweepRow| -> Result<()> {
        let member = families::build_member(surface.clone(), params)?;
        let m = &member.metric;
        row.c = Some(m.descriptor.c);
        row.area = Some(m.area);
        row.max_u = Some(m.max_u);
        row.katok_factor = Some(entropy::katok_factor(m)?);
        row.length_gamma = Some(geom::curve_length(m, &Curve::side_axis(&surface.domain, 0, 128)?)?);
        let mesh = member.mesh(level)?;
        let sys = spectral::assemble(m, &mesh)?;
        let res = spectral::eigenvalues(&sys, 1)?;
        row.lambda1 = Some(res.eigenvalues[1]);
        if params.kind == FamilyKind::Dumbbell {
            row.dumbbell_bound = Some(spectral::dumbbell_test_bound(&member, &mesh, &sys)?.sum);
        }
        row.diameter = Some(geom::diameter_estimate(m, &mesh)?);
        Ok(())
    };
    if let Err(e) = run(&mut row) {
        log::warn!("sweep member {} eps={} delta={} failed: {e}", row.family, row.eps, row.delta);
        row.error = e.to_string();
    }
    row
}

/// One row per grid member, in grid order.
pub fn sweep(surface: &Arc<HyperbolicSurface>, members: &[FamilyParams], level: usize) -> Result<Vec<SweepRow>> {
    if members.is_empty() {
        return Err(Error::Usage("sweep grid is empty".into()));
    }
    Ok(members.par_iter().map(|&p| sweep_member(surface, p, level)).collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numeric(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilyParams;

    fn surf() -> Arc<HyperbolicSurface> {
        Arc::new(HyperbolicSurface::regular_octagon(2).unwrap())
    }

    fn cfg(level: usize) -> Config {
        Config { level, spectrum_k: 6, radii: vec![1.0], ..Config::default() }
    }

    #[test]
    fn compare_semantics() {
        let e = ReportEntry::compare("x", 1.0, 2.0, Relation::Le, 0.0, "");
        assert_eq!(e.status, Status::Pass);
        assert_eq!(e.margin, 1.0);
        let e = ReportEntry::compare("x", 1.0, 2.0, Relation::Ge, 0.0, "");
        assert_eq!(e.status, Status::Fail);
        let e = ReportEntry::compare("x", 1.0, 1.005, Relation::Eq, 0.01, "");
        assert_eq!(e.status, Status::Pass);
        let e = ReportEntry::compare("x", f64::NAN, 1.0, Relation::Ge, 0.5, "");
        assert_eq!(e.status, Status::Fail);
    }

    #[test]
    fn hyperbolic_report_passes() {
        let m = families::build_member(surf(), FamilyParams::new(FamilyKind::Hyperbolic, 0.0, 0.0)).unwrap();
        let r = verify_member(&m, &cfg(3));
        assert!(r.passed, "{:#?}", r.failures());
        assert!(r.entries.iter().filter(|e| e.enforced).all(|e| e.status == Status::Pass));
        assert_eq!(r.entry("schwarz").unwrap().status, Status::Pass);
    }

    #[test]
    fn shrinker_report_marks_schwarz_not_applicable() {
        let m = families::systole_shrinker(surf(), 0.1, 0.1).unwrap();
        let r = verify_member(&m, &cfg(3));
        assert_eq!(r.entry("nonpositivity").unwrap().status, Status::Fail);
        assert_eq!(r.entry("schwarz").unwrap().status, Status::NotApplicable);
        assert_eq!(r.entry("systole_length").unwrap().status, Status::Pass);
        assert!(r.passed, "{:#?}", r.failures());
    }

    #[test]
    fn report_json_is_stable() {
        let m = families::nonpositive_radial(surf(), 0.7).unwrap();
        let a = verify_member(&m, &cfg(3)).to_json().unwrap();
        let b = verify_member(&m, &cfg(3)).to_json().unwrap();
        assert_eq!(a, b);
        let back: BoundsReport = serde_json::from_str(&a).unwrap();
        assert!(back.passed);
    }

    #[test]
    fn empty_sweep_is_a_usage_error() {
        let e = sweep(&surf(), &[], 3).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn sweep_rows_record_failures() {
        let bad = FamilyParams::new(FamilyKind::Shrinker, 10.0, 0.1);
        let good = FamilyParams::new(FamilyKind::Shrinker, 0.2, 0.1);
        let rows = sweep(&surf(), &[bad, good], 2).unwrap();
        assert!(!rows[0].error.is_empty() && rows[0].lambda1.is_none());
        assert!(rows[1].error.is_empty());
        assert!((rows[1].length_gamma.unwrap() / 0.2 - 1.0).abs() < 1e-6);
        let csv = sweep_csv(&rows).unwrap();
        assert!(csv.starts_with("family,eps,delta,amplitude,C,area,max_u,lambda1,length_gamma,diameter,katok_factor,dumbbell_bound,error\n"));
    }
}
