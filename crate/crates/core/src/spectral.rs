//! Discrete Laplace spectrum of `g = e^{2u} σ` on a glued mesh.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::conformal::ConformalMetric;
use crate::error::{Error, Result};
use crate::families::{DumbbellTest, Member};
use crate::linalg::{self, EnvelopeCholesky, SparseSym};
use crate::surface::SurfaceMesh;

pub const SHIFT: f64 = 1e-3;
pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_MAX_ITER: usize = 500;
/// Contract on `‖K v - λ M v‖` for unit `v`.
pub const RESIDUAL_BOUND: f64 = 1e-8;
/// Relative slack absorbing eigensolver round-off in matrix-level inequalities.
pub const SOLVER_SLACK: f64 = 1e-9;

/// Stiffness (metric independent) and lumped mass (`e^{2u}`-weighted).
#[derive(Debug, Clone)]
pub struct SpectralSystem {
    pub stiffness: SparseSym,
    pub mass: Vec<f64>,
    pub dim: usize,
    pub level: usize,
    /// Vertex values of `u` used for the mass.
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub level: usize,
    pub iterations: usize,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
}

impl SpectralSystem {
    /// System for vertex values `u` (one per glued vertex).
    pub fn from_values(mesh: &SurfaceMesh, stiffness: SparseSym, u: Vec<f64>) -> Result<Self> {
        if u.len() != mesh.n_rep {
            return Err(Error::Domain(format!("{} values for {} vertices", u.len(), mesh.n_rep)));
        }
        let sigma = mesh.vertex_sigma_areas();
        let mass: Vec<f64> = sigma.iter().zip(&u).map(|(m, v)| m * (2.0 * v).exp()).collect();
        if let Some(i) = mass.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Numeric(format!("mass entry {i} is {}", mass[i])));
        }
        Ok(SpectralSystem { dim: mesh.n_rep, stiffness, mass, level: mesh.level, u })
    }

    /// Same stiffness, mass reweighted for a different conformal factor.
    pub fn with_values(&self, mesh: &SurfaceMesh, u: Vec<f64>) -> Result<Self> {
        Self::from_values(mesh, self.stiffness.clone(), u)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// Cotangent stiffness and `e^{2u}`-weighted lumped mass of `metric` on `mesh`.
pub fn assemble(metric: &ConformalMetric, mesh: &SurfaceMesh) -> Result<SpectralSystem> {
    let k = linalg::stiffness_matrix(mesh)?;
    SpectralSystem::from_values(mesh, k, metric.vertex_values(mesh)?)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn m_dot(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(m).map(|((x, y), w)| x * y * w).sum()
}

/// M-orthonormalize the columns (modified Gram–Schmidt, twice).
fn m_orthonormalize(mass: &[f64], cols: &mut Vec<Vec<f64>>) {
    for _ in 0..2 {
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
        for mut v in cols.drain(..) {
            for q in &kept {
                let c = m_dot(mass, q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            let n = m_dot(mass, &v, &v).sqrt();
            if n > 1e-300 {
                v.iter_mut().for_each(|x| *x /= n);
                kept.push(v);
            }
        }
        *cols = kept;
    }
}

fn unit_residual(sys: &SpectralSystem, v: &[f64], lambda: f64) -> f64 {
    let kv = sys.stiffness.mul_vec(v);
    let n = dot(v, v).sqrt();
    kv.iter()
        .zip(v)
        .zip(&sys.mass)
        .map(|((a, x), m)| {
            let r = a - lambda * m * x;
            r * r
        })
        .sum::<f64>()
        .sqrt()
        / n
}

/// Smallest `k + 1` eigenpairs of `K v = λ M v`.
///
/// Subspace iteration with the factorization of `K + μM`, followed by
/// Rayleigh–Ritz on the iterated block.
pub fn eigenvalues(sys: &SpectralSystem, k: usize) -> Result<SpectralResult> {
    let n = sys.dim;
    if k + 1 > n {
        return Err(Error::Domain(format!("requested {} eigenvalues of a {n}-dimensional system", k + 1)));
    }
    let want = k + 1;
    let block = (2 * want).max(want + 8).min(n);
    let shifted = sys.stiffness.add_diagonal(SHIFT, &sys.mass);
    let chol = EnvelopeCholesky::factor(&shifted)?;

    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let t = (i as f64 + 1.0) * (j as f64 + 1.0);
                    (t * 0.618_033_988_75).fract() - 0.5 + if j == 0 { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    m_orthonormalize(&sys.mass, &mut x);

    let mut prev = vec![f64::INFINITY; want];
    let mut stagnant = 0;
    for iter in 1..=EIGEN_MAX_ITER {
        let mut y: Vec<Vec<f64>> = x
            .iter()
            .map(|v| {
                let mv: Vec<f64> = v.iter().zip(&sys.mass).map(|(a, b)| a * b).collect();
                chol.solve(&mv)
            })
            .collect();
        m_orthonormalize(&sys.mass, &mut y);
        let b = y.len();
        if b < want {
            return Err(Error::Numeric("iteration block collapsed".into()));
        }
        let ky: Vec<Vec<f64>> = y.iter().map(|v| sys.stiffness.mul_vec(v)).collect();
        let h = DMatrix::from_fn(b, b, |i, j| 0.5 * (dot(&y[i], &ky[j]) + dot(&y[j], &ky[i])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        x = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (i, yi) in y.iter().enumerate() {
                    let w = eig.eigenvectors[(i, c)];
                    v.iter_mut().zip(yi).for_each(|(a, b)| *a += w * b);
                }
                v
            })
            .collect();
        let lambdas: Vec<f64> = order.iter().take(want).map(|&c| eig.eigenvalues[c]).collect();
        let residuals: Vec<f64> = (0..want).map(|i| unit_residual(sys, &x[i], lambdas[i])).collect();
        let scale = lambdas.iter().fold(1.0f64, |a, l| a.max(l.abs()));
        let converged = residuals.iter().all(|&r| r < EIGEN_TOL * scale);
        let change = lambdas
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max);
        stagnant = if change < 1e-15 { stagnant + 1 } else { 0 };
        prev = lambdas.clone();
        if converged || stagnant >= 3 {
            if let Some((i, r)) = residuals.iter().enumerate().find(|(_, r)| **r >= RESIDUAL_BOUND) {
                return Err(Error::Numeric(format!("eigenpair {i} stalled with residual {r:e}")));
            }
            return Ok(SpectralResult {
                eigenvalues: lambdas,
                residuals,
                level: sys.level,
                iterations: iter,
                vectors: x.into_iter().take(want).collect(),
            });
        }
    }
    Err(Error::Numeric(format!("eigensolver did not converge in {EIGEN_MAX_ITER} iterations")))
}

/// `fᵀKf / fᵀMf`.
pub fn rayleigh(sys: &SpectralSystem, f: &[f64]) -> Result<f64> {
    let den = m_dot(&sys.mass, f, f);
    if !(den > 0.0) {
        return Err(Error::Domain("Rayleigh quotient of the zero vector".into()));
    }
    Ok(sys.stiffness.quad_form(f) / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichEntry {
    pub k: usize,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub min_u: f64,
    pub max_u: f64,
    pub entries: Vec<SandwichEntry>,
    pub violations: usize,
}

/// `e^{-2 max u} λ_k(σ) ≤ λ_k(g) ≤ e^{-2 min u} λ_k(σ)` for the computed `k`.
///
/// Bounds on `u` are widened by the vertex values so that the inequality is
/// the matrix-level one; [`SOLVER_SLACK`] absorbs eigensolver round-off.
pub fn conformal_eigen_sandwich(
    metric: &ConformalMetric,
    sys: &SpectralSystem,
    base: &SpectralResult,
    result: &SpectralResult,
    k: usize,
) -> Result<SandwichReport> {
    if base.level != result.level || base.level != sys.level {
        return Err(Error::Usage("spectra were computed on different meshes".into()));
    }
    let kmax = k.min(base.eigenvalues.len() - 1).min(result.eigenvalues.len() - 1);
    let vmax = sys.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = sys.u.iter().copied().fold(f64::INFINITY, f64::min);
    let max_u = metric.max_u.max(vmax);
    let min_u = metric.min_u.min(vmin);
    let entries: Vec<SandwichEntry> = (0..=kmax)
        .map(|i| {
            let ls = base.eigenvalues[i];
            let lower = (-2.0 * max_u).exp() * ls;
            let upper = (-2.0 * min_u).exp() * ls;
            let value = result.eigenvalues[i];
            let slack = SOLVER_SLACK * upper.abs().max(value.abs()) + 1e-12;
            SandwichEntry { k: i, lower, value, upper, holds: value >= lower - slack && value <= upper + slack }
        })
        .collect();
    let violations = entries.iter().filter(|e| !e.holds).count();
    Ok(SandwichReport { min_u, max_u, entries, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumbbellBound {
    /// Mesh Rayleigh quotients of the two neck test functions.
    pub rayleigh: [f64; 2],
    /// Chart Rayleigh quotients of the same functions.
    pub chart_rayleigh: [f64; 2],
    /// Chart Dirichlet energy of one test function.
    pub energy: f64,
    /// `A / (4 (R₂ - R₁)²)`.
    pub energy_bound: f64,
    pub neck_length: f64,
    pub sum: f64,
}

/// `R(f₁) + R(f₂)` for the dumbbell neck test functions on `mesh`.
pub fn dumbbell_test_bound(member: &Member, mesh: &SurfaceMesh, sys: &SpectralSystem) -> Result<DumbbellBound> {
    let neck = member
        .neck
        .as_ref()
        .filter(|n| n.centers.len() == 2)
        .ok_or_else(|| Error::Parameter("dumbbell bound needs a two-neck member".into()))?;
    let test = DumbbellTest { profile: neck.profile.clone() };
    let reps = mesh.representatives();
    let funcs: Vec<Vec<f64>> = neck
        .centers
        .iter()
        .map(|&c| {
            let center = crate::hyp::LocalPoint::at(c);
            reps.iter().map(|&i| test.value(center.distance(&mesh.points[i]))).collect()
        })
        .collect();
    let overlap = funcs[0].iter().zip(&funcs[1]).any(|(a, b)| *a != 0.0 && *b != 0.0);
    if overlap {
        return Err(Error::Parameter("test function supports overlap".into()));
    }
    let r1 = rayleigh(sys, &funcs[0])?;
    let r2 = rayleigh(sys, &funcs[1])?;
    let chart = test.rayleigh();
    let area = member.metric.base.total_area;
    Ok(DumbbellBound {
        rayleigh: [r1, r2],
        chart_rayleigh: [chart, chart],
        energy: test.energy(),
        energy_bound: test.energy_bound(area),
        neck_length: neck.profile.neck_length(),
        sum: r1 + r2,
    })
}

/// Spectrum CSV with columns `k,lambda,residual,level`.
pub fn spectrum_csv(result: &SpectralResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "lambda", "residual", "level"])?;
    for (i, (l, r)) in result.eigenvalues.iter().zip(&result.residuals).enumerate() {
        w.write_record([i.to_string(), l.to_string(), format!("{r:e}"), result.level.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numeric(e.to_string()))
}
