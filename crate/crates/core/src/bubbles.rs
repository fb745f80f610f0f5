//! Liouville-bubble test functions.
//!
//! `u_ε = log ε²/(ε² + d(p, p₀)²)²` inside the geodesic ball `B_{r₀}(p₀)`,
//! continued by its boundary value outside, and `v_ε` its mean-zero
//! projection. As ε → 0 the Dirichlet energy grows like `16π log(1/ε²)`
//! while `log∫e^{v_ε}` grows like `log(1/ε²)`; these rates drive `J` to −∞
//! along `v_ε` once λ₁ > 8π, and along `−v_ε/γ` once λ₂ > 8π/γ.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{functional_j, log_int_exp, Parameters};
use crate::torus::{Field, Grid, Point, TorusGrid};

/// Default cap radius on the unit torus.
pub const DEFAULT_R0: f64 = 0.25;

/// Relative slope drift between the two halves of a sweep above which the
/// sweep is flagged as unresolved.
pub const SLOPE_DRIFT_TOL: f64 = 0.05;

const MIN_SWEEP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleSpec {
    eps: f64,
    p0: Point,
    r0: f64,
}

impl BubbleSpec {
    /// Requires `0 < eps < r0 < injectivity radius` of `grid`.
    pub fn new(eps: f64, p0: Point, r0: f64, grid: &TorusGrid) -> Result<Self> {
        let inj = grid.injectivity_radius();
        if !(eps > 0.0 && eps < r0 && r0 < inj) {
            return Err(Error::InvalidBubble(format!(
                "need 0 < eps < r0 < {inj} (got eps = {eps}, r0 = {r0})"
            )));
        }
        Ok(Self { eps, p0, r0 })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn p0(&self) -> Point {
        self.p0
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    fn profile(&self, d: f64) -> f64 {
        let e2 = self.eps * self.eps;
        let d = d.min(self.r0);
        (e2 / (e2 + d * d).powi(2)).ln()
    }
}

/// `u_ε` sampled at the grid nodes (not mean-zero).
pub fn bubble_u(spec: &BubbleSpec, grid: &TorusGrid) -> Vec<f64> {
    grid.distance_to_point(spec.p0)
        .into_iter()
        .map(|d| spec.profile(d))
        .collect()
}

/// `v_ε = u_ε − ⨍u_ε`.
pub fn bubble_v(spec: &BubbleSpec, grid: &Grid) -> Field {
    Field::from_parts(grid.clone(), bubble_u(spec, grid)).projected()
}

/// Grid node nearest to the centre of the fundamental domain.
pub fn default_center(grid: &TorusGrid) -> Point {
    grid.node(grid.nearest_node(Point::new(0.5 * grid.lx(), 0.5 * grid.ly())))
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Quantities measured on one member of an ε-sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionRow {
    pub eps: f64,
    /// `log(1/ε²)`, the regression abscissa.
    pub log_inv_eps2: f64,
    /// `⨍u_ε`.
    pub mean_u: f64,
    pub dirichlet: f64,
    pub log_int_exp: f64,
    pub log_int_exp_neg_gamma: f64,
    pub log_int_exp_neg_one: f64,
    pub j_v: f64,
    pub j_negv_over_gamma: f64,
}

impl ExpansionRow {
    fn measure(spec: &BubbleSpec, grid: &Grid, p: &Parameters) -> Result<Self> {
        let u = bubble_u(spec, grid);
        let mean_u = grid.mean(&u);
        let v = Field::from_parts(grid.clone(), u).projected();
        let reflected = v.scaled(-1.0 / p.gamma());
        Ok(Self {
            eps: spec.eps,
            log_inv_eps2: -(spec.eps * spec.eps).ln(),
            mean_u,
            dirichlet: grid.dirichlet_energy(&v),
            log_int_exp: log_int_exp(grid, v.values(), 1.0),
            log_int_exp_neg_gamma: log_int_exp(grid, v.values(), -p.gamma()),
            log_int_exp_neg_one: log_int_exp(grid, v.values(), -1.0),
            j_v: functional_j(&v, p)?,
            j_negv_over_gamma: functional_j(&reflected, p)?,
        })
    }
}

/// Fitted slope and intercept against `log(1/ε²)`, with the predicted slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub expected: f64,
}

impl SlopeFit {
    /// Relative error against the prediction, or absolute error when the
    /// prediction is zero.
    pub fn error(&self) -> f64 {
        if self.expected == 0.0 {
            self.slope.abs()
        } else {
            ((self.slope - self.expected) / self.expected).abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub rows: Vec<ExpansionRow>,
    pub mean_u: SlopeFit,
    pub dirichlet: SlopeFit,
    pub log_int_exp: SlopeFit,
    pub log_int_exp_neg_gamma: SlopeFit,
    pub log_int_exp_neg_one: SlopeFit,
    pub j_v: SlopeFit,
    pub j_negv_over_gamma: SlopeFit,
    /// Smallest ε is below four grid spacings.
    pub core_unresolved: bool,
    /// Dropping the largest ε (equivalently, halving every ε) moves some
    /// slope by more than [`SLOPE_DRIFT_TOL`].
    pub slope_drift: bool,
}

impl ExpansionReport {
    pub fn fits(&self) -> [(&'static str, SlopeFit); 7] {
        [
            ("mean_u", self.mean_u),
            ("dirichlet", self.dirichlet),
            ("logIntExp", self.log_int_exp),
            ("logIntExpNegGamma", self.log_int_exp_neg_gamma),
            ("logIntExpNegOne", self.log_int_exp_neg_one),
            ("J_v", self.j_v),
            ("J_negv_over_gamma", self.j_negv_over_gamma),
        ]
    }
}

/// Extracts one measured quantity from a row.
type Column = fn(&ExpansionRow) -> f64;

/// Column extractors paired with their predicted slopes.
fn columns(p: &Parameters) -> [(Column, f64); 7] {
    let g = p.gamma();
    [
        (|r| r.mean_u, -1.0),
        (|r| r.dirichlet, 16.0 * PI),
        (|r| r.log_int_exp, 1.0),
        (|r| r.log_int_exp_neg_gamma, 0.0),
        (|r| r.log_int_exp_neg_one, 0.0),
        (|r| r.j_v, 8.0 * PI - p.lambda1()),
        (|r| r.j_negv_over_gamma, (8.0 * PI / g - p.lambda2()) / g),
    ]
}

fn fit_all(rows: &[ExpansionRow], p: &Parameters) -> Vec<SlopeFit> {
    let xs: Vec<f64> = rows.iter().map(|r| r.log_inv_eps2).collect();
    columns(p)
        .iter()
        .map(|(col, expected)| {
            let ys: Vec<f64> = rows.iter().map(col).collect();
            let (slope, intercept) = fit_line(&xs, &ys);
            SlopeFit {
                slope,
                intercept,
                expected: *expected,
            }
        })
        .collect()
}

/// Measures the bubble expansions over a decreasing geometric ε-sequence and
/// fits their growth rates in `log(1/ε²)`.
pub fn verify_expansions(
    family: &[BubbleSpec],
    grid: &Grid,
    p: &Parameters,
) -> Result<ExpansionReport> {
    if family.len() < MIN_SWEEP {
        return Err(Error::Precondition(format!(
            "need at least {MIN_SWEEP} bubbles, got {}",
            family.len()
        )));
    }
    let ratio = family[1].eps / family[0].eps;
    let geometric = ratio < 1.0
        && family
            .windows(2)
            .all(|w| ((w[1].eps / w[0].eps) - ratio).abs() <= 1e-9 * ratio);
    if !geometric {
        return Err(Error::Precondition(
            "eps values must form a decreasing geometric sequence".into(),
        ));
    }

    let rows = family
        .par_iter()
        .map(|spec| ExpansionRow::measure(spec, grid, p))
        .collect::<Result<Vec<_>>>()?;

    let all = fit_all(&rows, p);
    let coarse = fit_all(&rows[..rows.len() - 1], p);
    let fine = fit_all(&rows[1..], p);
    let slope_drift = coarse.iter().zip(&fine).any(|(a, b)| {
        let diff = (a.slope - b.slope).abs();
        if a.expected == 0.0 {
            diff > SLOPE_DRIFT_TOL
        } else {
            diff > SLOPE_DRIFT_TOL * a.expected.abs()
        }
    });
    let (hx, hy) = grid.spacing();
    let smallest = family.iter().map(|s| s.eps).fold(f64::INFINITY, f64::min);

    Ok(ExpansionReport {
        rows,
        mean_u: all[0],
        dirichlet: all[1],
        log_int_exp: all[2],
        log_int_exp_neg_gamma: all[3],
        log_int_exp_neg_one: all[4],
        j_v: all[5],
        j_negv_over_gamma: all[6],
        core_unresolved: smallest < 4.0 * hx.max(hy),
        slope_drift,
    })
}

/// Geometric family `eps_start·ratio^k`, `k = 0..count`, sharing `p0`, `r0`.
pub fn geometric_family(
    eps_start: f64,
    ratio: f64,
    count: usize,
    p0: Point,
    r0: f64,
    grid: &TorusGrid,
) -> Result<Vec<BubbleSpec>> {
    (0..count)
        .map(|k| BubbleSpec::new(eps_start * ratio.powi(k as i32), p0, r0, grid))
        .collect()
}

/// Which exponential the downhill bubble concentrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownhillBranch {
    /// `v₁ = v_ε` (λ₁ > 8π).
    Positive,
    /// `v₁ = −v_ε/γ` (γλ₂ > 8π).
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownhillConfig {
    pub eps_start: f64,
    /// Factor applied to ε after each failed attempt.
    pub eps_ratio: f64,
    pub eps_min: f64,
    pub r0: f64,
    /// Bubble centre; `None` uses [`default_center`].
    pub center: Option<Point>,
}

impl Default for DownhillConfig {
    fn default() -> Self {
        Self {
            eps_start: 0.125,
            eps_ratio: std::f64::consts::FRAC_1_SQRT_2,
            eps_min: 1e-8,
            r0: DEFAULT_R0,
            center: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Downhill {
    pub field: Field,
    pub eps: f64,
    pub branch: DownhillBranch,
    pub j_value: f64,
    pub dirichlet_norm: f64,
}

/// A mean-zero `v₁` with `J(v₁) < 0` and Dirichlet norm at least 1, found by
/// shrinking ε along the bubble family.
pub fn downhill_endpoint(p: &Parameters, grid: &Grid, cfg: &DownhillConfig) -> Result<Downhill> {
    let branch = if p.lambda1() > 8.0 * PI {
        DownhillBranch::Positive
    } else if p.gamma() * p.lambda2() > 8.0 * PI {
        DownhillBranch::Negative
    } else {
        return Err(Error::Precondition(format!(
            "max(lambda1, gamma*lambda2) = {} does not exceed 8pi",
            p.lambda1().max(p.gamma() * p.lambda2())
        )));
    };
    if !(cfg.eps_ratio > 0.0 && cfg.eps_ratio < 1.0) {
        return Err(Error::Config(format!(
            "eps_ratio must lie in (0, 1), got {}",
            cfg.eps_ratio
        )));
    }
    let center = cfg.center.unwrap_or_else(|| default_center(grid));
    let mut eps = cfg.eps_start;
    while eps >= cfg.eps_min {
        let spec = BubbleSpec::new(eps, center, cfg.r0, grid)?;
        let v = bubble_v(&spec, grid);
        let field = match branch {
            DownhillBranch::Positive => v,
            DownhillBranch::Negative => v.scaled(-1.0 / p.gamma()),
        };
        let j_value = functional_j(&field, p)?;
        let dirichlet_norm = grid.dirichlet_energy(&field).sqrt();
        if j_value < 0.0 && dirichlet_norm >= 1.0 {
            return Ok(Downhill {
                field,
                eps,
                branch,
                j_value,
                dirichlet_norm,
            });
        }
        eps *= cfg.eps_ratio;
    }
    Err(Error::GeometryFailure(format!(
        "no bubble with J < 0 for eps >= {} on a {}x{} grid",
        cfg.eps_min,
        grid.nx(),
        grid.ny()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        TorusGrid::unit(n).unwrap()
    }

    #[test]
    fn spec_validation() {
        let g = unit(32);
        let c = Point::new(0.5, 0.5);
        assert!(BubbleSpec::new(0.1, c, 0.25, &g).is_ok());
        assert!(BubbleSpec::new(0.3, c, 0.25, &g).is_err());
        assert!(BubbleSpec::new(0.1, c, 0.5, &g).is_err());
        assert!(BubbleSpec::new(0.0, c, 0.25, &g).is_err());
    }

    #[test]
    fn profile_values() {
        let g = unit(64);
        let c = Point::new(0.5, 0.5);
        let s = BubbleSpec::new(0.05, c, 0.25, &g).unwrap();
        let u = bubble_u(&s, &g);
        let at_center = u[g.nearest_node(c)];
        assert!((at_center + 2.0 * 0.05f64.ln()).abs() < 1e-12);
        let e2: f64 = 0.05 * 0.05;
        let cap = (e2 / (e2 + 0.0625f64).powi(2)).ln();
        assert!((s.profile(0.25) - cap).abs() < 1e-15);
        assert!((s.profile(0.25 - 1e-12) - cap).abs() < 1e-9);
        assert_eq!(s.profile(0.4), cap);
        let imax = u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(imax, g.nearest_node(c));
    }

    #[test]
    fn off_node_center_peaks_at_nearest_node() {
        let g = unit(64);
        let c = Point::new(0.3012, 0.7049);
        let s = BubbleSpec::new(0.02, c, 0.25, &g).unwrap();
        let u = bubble_u(&s, &g);
        let f = Field::from_parts(g.clone(), u);
        assert_eq!(f.argmax(), g.nearest_node(c));
    }

    #[test]
    fn v_is_mean_zero_and_grows_at_center() {
        let g = unit(128);
        let c = Point::new(0.5, 0.5);
        let mut last = f64::NEG_INFINITY;
        for k in 3..7 {
            let s = BubbleSpec::new(2f64.powi(-k), c, 0.25, &g).unwrap();
            let v = bubble_v(&s, &g);
            assert!(v.mean().abs() <= 1e-12 * v.max_abs());
            let peak = v.values()[g.nearest_node(c)];
            assert!(peak > last);
            last = peak;
        }
    }

    #[test]
    fn fit_line_recovers_exact_lines() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let (a, b) = fit_line(&xs, &ys);
        assert!((a - 3.0).abs() < 1e-12 && (b + 2.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_preconditions() {
        let g = unit(64);
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        let c = Point::new(0.5, 0.5);
        let short = geometric_family(0.1, 0.5, 4, c, 0.25, &g).unwrap();
        assert!(verify_expansions(&short, &g, &p).is_err());
        let mut bad = geometric_family(0.1, 0.5, 5, c, 0.25, &g).unwrap();
        bad.swap(0, 1);
        assert!(verify_expansions(&bad, &g, &p).is_err());
    }

    #[test]
    fn mean_of_u_tracks_log_eps2() {
        let g = unit(256);
        let p = Parameters::new(30.0, 60.0, 0.5, 1.0).unwrap();
        let fam = geometric_family(1.0 / 32.0, 0.5, 6, Point::new(0.5, 0.5), 0.25, &g).unwrap();
        let rep = verify_expansions(&fam, &g, &p).unwrap();
        assert!((rep.mean_u.slope + 1.0).abs() < 0.02, "{:?}", rep.mean_u);
        assert!(rep.core_unresolved);
    }

    #[test]
    fn downhill_rejects_subcritical() {
        let g = unit(64);
        let p = Parameters::new(10.0, 10.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            downhill_endpoint(&p, &g, &DownhillConfig::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn downhill_both_branches() {
        let g = unit(64);
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        let d = downhill_endpoint(&p, &g, &DownhillConfig::default()).unwrap();
        assert_eq!(d.branch, DownhillBranch::Positive);
        assert!(d.j_value < 0.0 && d.dirichlet_norm >= 1.0);
        assert!(functional_j(&d.field, &p).unwrap() < 0.0);

        let p = Parameters::new(5.0, 60.0, 0.5, 1.0).unwrap();
        let d = downhill_endpoint(&p, &g, &DownhillConfig::default()).unwrap();
        assert_eq!(d.branch, DownhillBranch::Negative);
        assert!(d.j_value < 0.0 && d.dirichlet_norm >= 1.0);
        assert!(d.field.min() < -d.field.max());
    }
}
