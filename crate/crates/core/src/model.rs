//! Parameters, the energy functional and its first two variations.
//!
//! The functional on mean-zero fields is
//!
//! ```text
//! J(v) = ½∫|∇v|² − λ₁ log∫e^v − (λ₂/γ) log∫e^{−γv}
//! ```
//!
//! whose critical points are exactly the solutions of
//! `−Δv = λ₁e^v/∫e^v − λ₂e^{−γv}/∫e^{−γv} − κ`, `κ = (λ₁−λ₂)/|Σ|`.
//! Every exponential integral is evaluated with the maximum factored out, so
//! strongly concentrated fields never overflow.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::torus::{Field, TorusGrid};

/// `(λ₁, λ₂, γ)` together with the derived constant `κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    lambda1: f64,
    lambda2: f64,
    gamma: f64,
    kappa: f64,
}

impl Parameters {
    /// `volume` is `|Σ|` of the torus the parameters will be used on.
    pub fn new(lambda1: f64, lambda2: f64, gamma: f64, volume: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "gamma must lie in (0, 1], got {gamma}"
            )));
        }
        if !(volume.is_finite() && volume > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "volume must be > 0, got {volume}"
            )));
        }
        Ok(Self {
            lambda1,
            lambda2,
            gamma,
            kappa: (lambda1 - lambda2) / volume,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Same γ and volume, species swapped. Only meaningful as a symmetry
    /// when γ = 1.
    pub fn swapped(&self, volume: f64) -> Result<Self> {
        Self::new(self.lambda2, self.lambda1, self.gamma, volume)
    }
}

/// The vortex-intensity distribution `τδ₁ + (1−τ)δ_{−γ}` with total weight λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoAtomMeasure {
    lambda: f64,
    tau: f64,
    gamma: f64,
}

impl TwoAtomMeasure {
    pub fn new(lambda: f64, tau: f64, gamma: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "lambda must be > 0, got {lambda}"
            )));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParameters(format!(
                "tau must lie in (0, 1) (degenerate single-species measure), got {tau}"
            )));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "gamma must lie in (0, 1], got {gamma}"
            )));
        }
        Ok(Self { lambda, tau, gamma })
    }

    /// Inverse of [`atoms_to_pair`]: `λ = λ₁ + λ₂/γ`, `τ = λ₁/λ`.
    pub fn from_pair(p: &Parameters) -> Result<Self> {
        let lambda = p.lambda1 + p.lambda2 / p.gamma;
        Self::new(lambda, p.lambda1 / lambda, p.gamma)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Parameters induced by a two-atom measure: `λ₁ = λτ`, `λ₂ = λγ(1−τ)`.
pub fn atoms_to_pair(m: &TwoAtomMeasure, volume: f64) -> Result<Parameters> {
    Parameters::new(
        m.lambda * m.tau,
        m.lambda * m.gamma * (1.0 - m.tau),
        m.gamma,
        volume,
    )
}

/// Largest λ for which the two-atom functional is bounded below:
/// `8π·min{1/τ, 1/(γ²(1−τ))}`.
pub fn mt_threshold(m: &TwoAtomMeasure) -> f64 {
    let positive = 1.0 / m.tau;
    let negative = 1.0 / (m.gamma * m.gamma * (1.0 - m.tau));
    8.0 * PI * positive.min(negative)
}

/// `log ∫ e^{a·v}` with the maximum of `a·v` factored out.
pub fn log_int_exp(grid: &TorusGrid, v: &[f64], a: f64) -> f64 {
    let m = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(a * x));
    let shifted: f64 = v.iter().map(|&x| (a * x - m).exp()).sum();
    m + (grid.volume() * shifted / v.len() as f64).ln()
}

/// `e^{a·v} / ∫e^{a·v}` pointwise.
pub fn normalized_exp(grid: &TorusGrid, v: &[f64], a: f64) -> Vec<f64> {
    let m = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(a * x));
    let mut w: Vec<f64> = v.iter().map(|&x| (a * x - m).exp()).collect();
    let total = grid.quadrature(&w);
    for x in &mut w {
        *x /= total;
    }
    w
}

/// `J(v)` by grid quadrature.
pub fn functional_j(v: &Field, p: &Parameters) -> Result<f64> {
    v.check_finite()?;
    let g = v.grid();
    let mut j = 0.5 * g.dirichlet_energy(v);
    if p.lambda1 != 0.0 {
        j -= p.lambda1 * log_int_exp(g, v.values(), 1.0);
    }
    if p.lambda2 != 0.0 {
        j -= p.lambda2 / p.gamma * log_int_exp(g, v.values(), -p.gamma);
    }
    Ok(j)
}

/// Right-hand side `λ₁e^v/∫e^v − λ₂e^{−γv}/∫e^{−γv} − κ`, projected to zero
/// mean (it has zero mean analytically).
pub fn source(v: &Field, p: &Parameters) -> Result<Field> {
    v.check_finite()?;
    let g = v.grid();
    let rho1 = normalized_exp(g, v.values(), 1.0);
    let rho2 = normalized_exp(g, v.values(), -p.gamma);
    let values = rho1
        .iter()
        .zip(&rho2)
        .map(|(a, b)| p.lambda1 * a - p.lambda2 * b - p.kappa)
        .collect();
    Ok(Field::new(g.clone(), values)?.projected())
}

/// L²-representative of `J'(v)`: `−Δv − (λ₁e^v/∫e^v − λ₂e^{−γv}/∫e^{−γv} − κ)`,
/// projected to zero mean. Vanishes exactly at solutions.
pub fn gradient_j(v: &Field, p: &Parameters) -> Result<Field> {
    let g = v.grid();
    let lap = g.laplacian(v)?;
    let s = source(v, p)?;
    Ok(lap.lin_comb(-1.0, &s, -1.0).projected())
}

/// The second variation `J''(v)` frozen at one point, for repeated
/// application inside Krylov solvers.
#[derive(Debug, Clone)]
pub struct Hessian {
    rho1: Vec<f64>,
    rho2: Vec<f64>,
    c1: f64,
    c2: f64,
}

impl Hessian {
    pub fn at(v: &Field, p: &Parameters) -> Result<Self> {
        v.check_finite()?;
        let g = v.grid();
        Ok(Self {
            rho1: normalized_exp(g, v.values(), 1.0),
            rho2: normalized_exp(g, v.values(), -p.gamma),
            c1: p.lambda1,
            c2: p.lambda2 * p.gamma,
        })
    }

    /// Mean-zero representative of `J''(v)[φ]`:
    /// `−Δφ − λ₁ρ₁(φ − ⟨φ⟩₁) − γλ₂ρ₂(φ − ⟨φ⟩₂)`, where ρᵢ are the normalized
    /// densities and `⟨φ⟩ᵢ = ∫ρᵢφ`.
    pub fn apply(&self, phi: &Field) -> Result<Field> {
        let g = phi.grid();
        let avg1 = weighted_mean(g, &self.rho1, phi.values());
        let avg2 = weighted_mean(g, &self.rho2, phi.values());
        let lap = g.laplacian(phi)?;
        let values = lap
            .values()
            .iter()
            .zip(phi.values())
            .zip(self.rho1.iter().zip(&self.rho2))
            .map(|((l, f), (r1, r2))| -l - self.c1 * r1 * (f - avg1) - self.c2 * r2 * (f - avg2))
            .collect();
        Ok(Field::new(g.clone(), values)?.projected())
    }
}

fn weighted_mean(g: &TorusGrid, rho: &[f64], f: &[f64]) -> f64 {
    let s: f64 = rho.iter().zip(f).map(|(r, x)| r * x).sum();
    g.volume() * s / f.len() as f64
}

/// `J''(v)[φ]` (see [`Hessian::apply`]).
pub fn hessian_apply(v: &Field, phi: &Field, p: &Parameters) -> Result<Field> {
    Hessian::at(v, p)?.apply(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusGrid;

    #[test]
    fn parameter_validation() {
        assert!(Parameters::new(1.0, 2.0, 0.0, 1.0).is_err());
        assert!(Parameters::new(1.0, 2.0, 1.5, 1.0).is_err());
        assert!(Parameters::new(-1.0, 2.0, 0.5, 1.0).is_err());
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        assert_eq!(p.kappa() * 1.0, p.lambda1() - p.lambda2());
    }

    #[test]
    fn j_vanishes_at_zero() {
        let g = TorusGrid::unit(16).unwrap();
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        assert_eq!(functional_j(&Field::zeros(&g), &p).unwrap(), 0.0);
    }

    #[test]
    fn gradient_vanishes_at_zero_exactly() {
        let g = TorusGrid::unit(16).unwrap();
        for (l1, l2, gam) in [(30.0, 5.0, 0.5), (3.0, 60.0, 0.25), (12.5, 12.5, 1.0)] {
            let p = Parameters::new(l1, l2, gam, 1.0).unwrap();
            let r = gradient_j(&Field::zeros(&g), &p).unwrap();
            assert!(r.max_abs() < 1e-13, "{}", r.max_abs());
        }
    }

    #[test]
    fn overflow_safe_evaluation() {
        let g = TorusGrid::unit(16).unwrap();
        let p = Parameters::new(30.0, 5.0, 1.0, 1.0).unwrap();
        let mut v = Field::from_fn(&g, |x, y| {
            900.0 * (-(x - 0.5).powi(2) - (y - 0.5).powi(2)).exp()
        });
        v.project_mean_zero();
        assert!(functional_j(&v, &p).unwrap().is_finite());
        let r = gradient_j(&v, &p).unwrap();
        assert!(r.check_finite().is_ok());
        let h = hessian_apply(&v, &v, &p).unwrap();
        assert!(h.check_finite().is_ok());
    }

    #[test]
    fn threshold_examples() {
        let m = TwoAtomMeasure::new(1.0, 0.5, 1.0).unwrap();
        assert!((mt_threshold(&m) - 16.0 * PI).abs() < 1e-12);
        let m = TwoAtomMeasure::new(1.0, 0.5, 0.5).unwrap();
        assert!((mt_threshold(&m) - 16.0 * PI).abs() < 1e-12);
        assert!(TwoAtomMeasure::new(1.0, 0.0, 0.5).is_err());
        assert!(TwoAtomMeasure::new(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn threshold_approaches_8pi_from_above() {
        let mut last = f64::INFINITY;
        for tau in [0.9, 0.99, 0.999, 0.9999] {
            let t = mt_threshold(&TwoAtomMeasure::new(1.0, tau, 0.7).unwrap());
            assert!(t > 8.0 * PI && t < last);
            last = t;
        }
        assert!((last - 8.0 * PI) / (8.0 * PI) < 2e-4);
    }

    #[test]
    fn atoms_to_pair_examples() {
        let p = atoms_to_pair(&TwoAtomMeasure::new(100.0, 0.5, 1.0).unwrap(), 1.0).unwrap();
        assert_eq!((p.lambda1(), p.lambda2()), (50.0, 50.0));
        let p = atoms_to_pair(&TwoAtomMeasure::new(100.0, 0.3, 0.5).unwrap(), 1.0).unwrap();
        assert!((p.lambda1() - 30.0).abs() < 1e-12 && (p.lambda2() - 35.0).abs() < 1e-12);
        let back = TwoAtomMeasure::from_pair(&p).unwrap();
        assert!((back.lambda() - 100.0).abs() < 1e-12 && (back.tau() - 0.3).abs() < 1e-14);
    }
}
