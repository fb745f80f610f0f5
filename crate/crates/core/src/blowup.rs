//! Concentration diagnostics for computed fields.
//!
//! The two vortex densities `μ₁ = λ₁e^v/∫e^v` and `μ₂ = λ₂e^{−γv}/∫e^{−γv}`
//! are split into ball contents around detected peaks (finite-field stand-ins
//! for the blow-up masses `m₁(p)`, `m₂(p)`) and a remainder. Each candidate is
//! checked against the quadratic mass identity `8π(m₁ + m₂/γ) = (m₁ − m₂)²`
//! and the lower bounds `m₁ ≥ 8π`, `m₂ ≥ 8π/γ`, `m₁ + γm₂ ≥ 16π(1+γ)`.
//! On a finite grid these are reported, not enforced.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{normalized_exp, Parameters};
use crate::torus::{Field, Point, TorusGrid};

pub const DEFAULT_BALL_RADIUS: f64 = 0.2;
pub const DEFAULT_THRESHOLD: f64 = 10.0;

/// `(λ₁e^v/∫e^v, λ₂e^{−γv}/∫e^{−γv})` at the grid nodes.
pub fn densities(v: &Field, p: &Parameters) -> Result<(Vec<f64>, Vec<f64>)> {
    v.check_finite()?;
    let g = v.grid();
    let mut d1 = normalized_exp(g, v.values(), 1.0);
    let mut d2 = normalized_exp(g, v.values(), -p.gamma());
    d1.iter_mut().for_each(|x| *x *= p.lambda1());
    d2.iter_mut().for_each(|x| *x *= p.lambda2());
    Ok((d1, d2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: usize,
    pub point: Point,
    pub species: Species,
    /// Peak density divided by the mean density of its species.
    pub contrast: f64,
}

fn strict_local_maxima(grid: &TorusGrid, d: &[f64]) -> Vec<usize> {
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    let at = |i: isize, j: isize| d[(j.rem_euclid(ny) * nx + i.rem_euclid(nx)) as usize];
    let mut out = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = at(i, j);
            let strict = (-1..=1)
                .all(|dj| (-1..=1).all(|di| (di == 0 && dj == 0) || at(i + di, j + dj) < c));
            if strict {
                out.push((j * nx + i) as usize);
            }
        }
    }
    out
}

/// Strict (8-neighbour, periodic) local maxima of either density exceeding
/// `threshold_factor` times its mean, merged greedily in decreasing contrast
/// so that kept points are at least `merge_radius` apart.
pub fn detect_candidates(
    grid: &TorusGrid,
    density1: &[f64],
    density2: &[f64],
    threshold_factor: f64,
    merge_radius: f64,
) -> Vec<Candidate> {
    let mut raw = Vec::new();
    for (d, species) in [(density1, Species::Positive), (density2, Species::Negative)] {
        let mean = grid.mean(d);
        if mean <= 0.0 {
            continue;
        }
        for node in strict_local_maxima(grid, d) {
            let contrast = d[node] / mean;
            if contrast > threshold_factor {
                raw.push(Candidate {
                    node,
                    point: grid.node(node),
                    species,
                    contrast,
                });
            }
        }
    }
    raw.sort_by(|a, b| b.contrast.total_cmp(&a.contrast).then(a.node.cmp(&b.node)));
    let mut kept: Vec<Candidate> = Vec::new();
    for c in raw {
        if kept
            .iter()
            .all(|k| grid.distance(k.point, c.point) >= merge_radius)
        {
            kept.push(c);
        }
    }
    kept
}

/// Nodes within `radius` of `center` (inclusive).
fn ball_nodes(grid: &TorusGrid, center: Point, radius: f64) -> impl Iterator<Item = usize> + '_ {
    (0..grid.len()).filter(move |&i| grid.distance(grid.node(i), center) <= radius)
}

fn ball_integral(grid: &TorusGrid, d: &[f64], center: Point, radius: f64) -> f64 {
    let s: f64 = ball_nodes(grid, center, radius).map(|i| d[i]).sum();
    grid.volume() * s / grid.len() as f64
}

fn check_radius(grid: &TorusGrid, radius: f64) -> Result<()> {
    if radius > 0.0 && radius < grid.injectivity_radius() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "ball radius {radius} must lie in (0, {})",
            grid.injectivity_radius()
        )))
    }
}

/// Ball contents `(∫_B μ₁, ∫_B μ₂)` around `point`.
pub fn local_masses(v: &Field, p: &Parameters, point: Point, radius: f64) -> Result<(f64, f64)> {
    let g = v.grid();
    check_radius(g, radius)?;
    let (d1, d2) = densities(v, p)?;
    Ok((
        ball_integral(g, &d1, point, radius),
        ball_integral(g, &d2, point, radius),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `8π(m₁ + m₂/γ) − (m₁ − m₂)²`.
    pub residual: f64,
    pub m1_bound: bool,
    pub m2_bound: bool,
    pub sum_bound: bool,
}

pub fn identity_check(m1: f64, m2: f64, gamma: f64, tol: f64) -> IdentityCheck {
    let eight_pi = 8.0 * PI;
    IdentityCheck {
        residual: eight_pi * (m1 + m2 / gamma) - (m1 - m2) * (m1 - m2),
        m1_bound: m1 >= eight_pi - tol,
        m2_bound: m2 >= eight_pi / gamma - tol,
        sum_bound: m1 + gamma * m2 >= 16.0 * PI * (1.0 + gamma) - tol,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMass {
    pub candidate: Candidate,
    pub radius: f64,
    pub m1: f64,
    pub m2: f64,
    pub identity: IdentityCheck,
}

#[derive(Debug, Clone)]
pub struct MassReport {
    pub candidates: Vec<CandidateMass>,
    pub density1: Vec<f64>,
    pub density2: Vec<f64>,
    /// `(∫μ₁, ∫μ₂)` over the whole torus.
    pub totals: (f64, f64),
    /// Mass outside every candidate ball, per species.
    pub remainder: (f64, f64),
}

impl MassReport {
    /// Candidate with the highest density contrast.
    pub fn dominant(&self) -> Option<&CandidateMass> {
        self.candidates
            .iter()
            .max_by(|a, b| a.candidate.contrast.total_cmp(&b.candidate.contrast))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisConfig {
    pub ball_radius: f64,
    pub threshold: f64,
    /// Slack for the lower-bound flags.
    pub bound_tol: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            ball_radius: DEFAULT_BALL_RADIUS,
            threshold: DEFAULT_THRESHOLD,
            bound_tol: 1e-6,
        }
    }
}

/// Full mass report for `v`. Overlapping candidate balls are counted once in
/// the remainder.
pub fn analyze(v: &Field, p: &Parameters, cfg: &AnalysisConfig) -> Result<MassReport> {
    let g = v.grid();
    check_radius(g, cfg.ball_radius)?;
    let (d1, d2) = densities(v, p)?;
    let cands = detect_candidates(g, &d1, &d2, cfg.threshold, cfg.ball_radius);
    let mut covered = vec![false; g.len()];
    let candidates = cands
        .into_iter()
        .map(|c| {
            for i in ball_nodes(g, c.point, cfg.ball_radius) {
                covered[i] = true;
            }
            let m1 = ball_integral(g, &d1, c.point, cfg.ball_radius);
            let m2 = ball_integral(g, &d2, c.point, cfg.ball_radius);
            CandidateMass {
                candidate: c,
                radius: cfg.ball_radius,
                m1,
                m2,
                identity: identity_check(m1, m2, p.gamma(), cfg.bound_tol),
            }
        })
        .collect();
    let outside = |d: &[f64]| -> f64 {
        let s: f64 = d
            .iter()
            .zip(&covered)
            .filter(|(_, &c)| !c)
            .map(|(x, _)| x)
            .sum();
        g.volume() * s / g.len() as f64
    };
    Ok(MassReport {
        candidates,
        totals: (g.quadrature(&d1), g.quadrature(&d2)),
        remainder: (outside(&d1), outside(&d2)),
        density1: d1,
        density2: d2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbles::{bubble_v, BubbleSpec};

    #[test]
    fn zero_field_has_uniform_densities_and_no_candidates() {
        let g = TorusGrid::unit(64).unwrap();
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        let (d1, d2) = densities(&Field::zeros(&g), &p).unwrap();
        assert!(d1.iter().all(|&x| (x - 30.0).abs() < 1e-12));
        assert!(d2.iter().all(|&x| (x - 5.0).abs() < 1e-12));
        assert!(detect_candidates(&g, &d1, &d2, 10.0, 0.2).is_empty());
        let (m1, m2) = local_masses(&Field::zeros(&g), &p, Point::new(0.3, 0.3), 0.2).unwrap();
        let area = PI * 0.04;
        assert!((m1 / (30.0 * area) - 1.0).abs() < 0.02);
        assert!((m2 / (5.0 * area) - 1.0).abs() < 0.02);
    }

    #[test]
    fn radius_checks() {
        let g = TorusGrid::unit(16).unwrap();
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        assert!(local_masses(&Field::zeros(&g), &p, Point::new(0.0, 0.0), 0.5).is_err());
        assert!(local_masses(&Field::zeros(&g), &p, Point::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn one_and_two_bubbles() {
        let g = TorusGrid::unit(128).unwrap();
        let p = Parameters::new(30.0, 5.0, 1.0, 1.0).unwrap();
        let c1 = Point::new(0.25, 0.25);
        let b1 = bubble_v(&BubbleSpec::new(0.02, c1, 0.2, &g).unwrap(), &g);
        let (d1, d2) = densities(&b1, &p).unwrap();
        let found = detect_candidates(&g, &d1, &d2, 10.0, 0.2);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].node, g.nearest_node(c1));
        assert_eq!(found[0].species, Species::Positive);

        let c2 = Point::new(0.75, 0.7);
        let b2 = bubble_v(&BubbleSpec::new(0.02, c2, 0.2, &g).unwrap(), &g);
        let both = b1.lin_comb(1.0, &b2, 1.0);
        let (d1, d2) = densities(&both, &p).unwrap();
        let found = detect_candidates(&g, &d1, &d2, 10.0, 0.2);
        assert_eq!(found.len(), 2);

        // negation moves the concentration to the other species
        let (d1, d2) = densities(&b1.scaled(-1.0), &p).unwrap();
        let found = detect_candidates(&g, &d1, &d2, 10.0, 0.2);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].species, Species::Negative);
    }

    #[test]
    fn identity_exact_points() {
        let e = 8.0 * PI;
        let c = identity_check(e, 0.0, 0.7, 0.0);
        assert_eq!(c.residual, 0.0);
        assert!(c.m1_bound && !c.m2_bound && !c.sum_bound);
        for g in [0.5, 1.0] {
            let c = identity_check(0.0, e / g, g, 0.0);
            assert_eq!(c.residual, 0.0);
            assert!(c.m2_bound && !c.m1_bound);
        }
    }

    #[test]
    fn identity_symmetric_for_gamma_one() {
        for (a, b) in [(3.0, 7.0), (25.0, 80.0), (100.0, 1.0)] {
            let x = identity_check(a, b, 1.0, 0.0).residual;
            let y = identity_check(b, a, 1.0, 0.0).residual;
            assert_eq!(x, y);
        }
    }

    #[test]
    fn analysis_partitions_mass() {
        let g = TorusGrid::unit(128).unwrap();
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        let v = bubble_v(
            &BubbleSpec::new(0.03, Point::new(0.5, 0.5), 0.25, &g).unwrap(),
            &g,
        );
        let rep = analyze(&v, &p, &AnalysisConfig::default()).unwrap();
        assert_eq!(rep.candidates.len(), 1);
        let c = &rep.candidates[0];
        assert!(c.m1 >= 0.0 && c.m1 <= 30.0 && c.m2 >= 0.0 && c.m2 <= 5.0);
        assert!((rep.totals.0 - 30.0).abs() <= 1e-9 * 30.0);
        assert!((rep.totals.1 - 5.0).abs() <= 1e-9 * 5.0);
        assert!((c.m1 + rep.remainder.0 - 30.0).abs() <= 1e-9 * 30.0);
        assert!((c.m2 + rep.remainder.1 - 5.0).abs() <= 1e-9 * 5.0);
    }
}
