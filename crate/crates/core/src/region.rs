//! The admissible parameter region and the blow-up mass parabola.
//!
//! For a torus with `M = μ₁|Σ|` in the window `8π < M < 16π(1+γ)` the region
//! consists of `(λ₁, λ₂)` with
//!
//! 1. `λ₁, λ₂ ≥ 0` and `max{λ₁, γλ₂} > 8π`,
//! 2. `λ₁ ∉ 8πℕ` and `λ₂ ∉ (8π/γ)ℕ`,
//! 3. `λ₁ + γλ₂ < M`.
//!
//! Geometrically this is the union of two open triangles `T₁` and `T₂` minus
//! the resonance lines.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Absolute distance (in λ units) within which a value counts as resonant.
pub const RESONANCE_TOL: f64 = 1e-9;

const EIGHT_PI: f64 = 8.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSpec {
    gamma: f64,
    mu1_vol: f64,
}

impl RegionSpec {
    /// Rejects surfaces outside `8π < μ₁|Σ| < 16π(1+γ)`.
    pub fn new(gamma: f64, mu1_vol: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidRegion(format!(
                "gamma must lie in (0, 1], got {gamma}"
            )));
        }
        if !ipmu_holds(gamma, mu1_vol) {
            return Err(Error::InvalidRegion(format!(
                "mu1*|Sigma| = {mu1_vol} outside (8pi, 16pi(1+gamma)) = ({}, {})",
                EIGHT_PI,
                16.0 * PI * (1.0 + gamma)
            )));
        }
        Ok(Self { gamma, mu1_vol })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu1_vol(&self) -> f64 {
        self.mu1_vol
    }
}

/// The eigenvalue window `8π < μ₁|Σ| < 16π(1+γ)`.
pub fn ipmu_holds(gamma: f64, mu1_vol: f64) -> bool {
    EIGHT_PI < mu1_vol && mu1_vol < 16.0 * PI * (1.0 + gamma)
}

/// Whether `x` lies within [`RESONANCE_TOL`] of `period·k` for some `k ≥ 1`.
pub fn is_resonant(x: f64, period: f64) -> bool {
    let k = (x / period).round();
    k >= 1.0 && (x - period * k).abs() <= RESONANCE_TOL
}

/// Clause-by-clause evaluation of the membership predicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub nonnegative: bool,
    pub supercritical: bool,
    pub lambda1_nonresonant: bool,
    pub lambda2_nonresonant: bool,
    pub below_eigenvalue: bool,
}

impl Membership {
    pub fn inside(&self) -> bool {
        self.nonnegative
            && self.supercritical
            && self.lambda1_nonresonant
            && self.lambda2_nonresonant
            && self.below_eigenvalue
    }
}

pub fn membership(spec: &RegionSpec, l1: f64, l2: f64) -> Membership {
    let g = spec.gamma;
    Membership {
        nonnegative: l1 >= 0.0 && l2 >= 0.0,
        supercritical: l1.max(g * l2) > EIGHT_PI,
        lambda1_nonresonant: !is_resonant(l1, EIGHT_PI),
        lambda2_nonresonant: !is_resonant(l2, EIGHT_PI / g),
        below_eigenvalue: l1 + g * l2 < spec.mu1_vol,
    }
}

pub fn contains(spec: &RegionSpec, l1: f64, l2: f64) -> bool {
    l1.is_finite() && l2.is_finite() && membership(spec, l1, l2).inside()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub vertices: [(f64, f64); 3],
}

impl Triangle {
    pub fn new(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Result<Self> {
        let t = Self {
            vertices: [a, b, c],
        };
        if t.signed_area().abs() <= f64::EPSILON * (1.0 + a.0.abs() + a.1.abs()) {
            return Err(Error::InvalidRegion("degenerate triangle".into()));
        }
        Ok(t)
    }

    pub fn signed_area(&self) -> f64 {
        let [a, b, c] = self.vertices;
        0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1))
    }

    /// Strict interior test (points on edges are outside).
    pub fn contains_open(&self, x: f64, y: f64) -> bool {
        let [a, b, c] = self.vertices;
        let orient = self.signed_area().signum();
        let edge = |p: (f64, f64), q: (f64, f64)| {
            orient * ((q.0 - p.0) * (y - p.1) - (x - p.0) * (q.1 - p.1)) > 0.0
        };
        edge(a, b) && edge(b, c) && edge(c, a)
    }
}

/// `T₁` (species-1 supercritical) and `T₂` (species-2 supercritical).
pub fn triangles(spec: &RegionSpec) -> (Triangle, Triangle) {
    let (g, m) = (spec.gamma, spec.mu1_vol);
    let t1 = Triangle::new((EIGHT_PI, 0.0), (m, 0.0), (EIGHT_PI, (m - EIGHT_PI) / g));
    let t2 = Triangle::new(
        (0.0, EIGHT_PI / g),
        (0.0, m / g),
        (m - EIGHT_PI, EIGHT_PI / g),
    );
    // (ipmu) guarantees m > 8π, so neither triangle is degenerate
    (
        t1.expect("T1 non-degenerate"),
        t2.expect("T2 non-degenerate"),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Residual of the mass parabola `(x−y)² − 8π(x + y/γ)`.
pub fn parabola_residual(x: f64, y: f64, gamma: f64) -> f64 {
    (x - y).powi(2) - EIGHT_PI * (x + y / gamma)
}

/// Roots in `x` of the parabola for given `y`:
/// `x±(y) = y + 4π ± √(8π(1+1/γ)y + 16π²)`.
pub fn parabola_x(y: f64, gamma: f64, branch: Branch) -> Result<f64> {
    let disc = EIGHT_PI * (1.0 + 1.0 / gamma) * y + 16.0 * PI * PI;
    if !(disc >= 0.0) || y < 0.0 {
        return Err(Error::Domain(format!("parabola_x needs y >= 0, got {y}")));
    }
    Ok(y + 4.0 * PI + branch.sign() * disc.sqrt())
}

/// Roots in `y` of the parabola for given `x`:
/// `y±(x) = x + 4π/γ ± √(8π(1+1/γ)x + 16π²/γ²)`.
pub fn parabola_y(x: f64, gamma: f64, branch: Branch) -> Result<f64> {
    let disc = EIGHT_PI * (1.0 + 1.0 / gamma) * x + 16.0 * PI * PI / (gamma * gamma);
    if !(disc >= 0.0) || x < 0.0 {
        return Err(Error::Domain(format!("parabola_y needs x >= 0, got {x}")));
    }
    Ok(x + 4.0 * PI / gamma + branch.sign() * disc.sqrt())
}

/// `x̄ = x₊(8π/γ) = 8π(1 + 2/γ)`.
pub fn x_bar(gamma: f64) -> f64 {
    EIGHT_PI * (1.0 + 2.0 / gamma)
}

/// `ȳ = y₊(8π) = 8π(2 + 1/γ)`.
pub fn y_bar(gamma: f64) -> f64 {
    EIGHT_PI * (2.0 + 1.0 / gamma)
}

/// Minimum of `x + γy` over the parabola with `x ≥ 8π`, `y ≥ 8π/γ`:
/// `16π(1+γ)`.
pub fn alpha_gamma(gamma: f64) -> f64 {
    16.0 * PI * (1.0 + gamma)
}
