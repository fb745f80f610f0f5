//! Mountain-pass critical points of `J`.
//!
//! Zero is a strict local minimum of `J` whenever `λ₁ + γλ₂ < μ₁|Σ|`, and a
//! shrinking bubble supplies an endpoint `v₁` with `J(v₁) < 0`. The solver
//! deforms the segment `[0, v₁]` downhill until its highest node sits near a
//! saddle, climbs that node onto the saddle, and finishes with Newton–GMRES on
//! the Euler–Lagrange residual.
//!
//! All descent steps use the gradient with respect to the Dirichlet inner
//! product, `(−Δ)⁻¹∇J`, so step sizes are independent of grid resolution.

use std::f64::consts::PI;

use crate::bubbles::{downhill_endpoint, DownhillConfig};
use crate::error::{Error, Result};
use crate::krylov::{gmres, GmresConfig};
use crate::model::{functional_j, gradient_j, Hessian, Parameters};
use crate::region::{contains, RegionSpec};
use crate::torus::{Field, Grid, TorusGrid};

/// Below this Dirichlet norm a converged field counts as the trivial solution.
pub const NONTRIVIAL_NORM: f64 = 1e-3;

/// Coarsest grid accepted by [`mountain_pass`].
pub const MIN_RESOLUTION: usize = 64;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Nodes on the deformed path, endpoints included.
    pub path_nodes: usize,
    /// Initial descent step (in the Dirichlet metric).
    pub path_step: f64,
    /// Cap for the adaptively grown step.
    pub max_path_step: f64,
    /// Dual-norm gradient size at which the peak node is handed to Newton.
    pub switch_tol: f64,
    /// Residual tolerance relative to `λ₁ + λ₂`.
    pub newton_tol: f64,
    /// Budget for path deformation sweeps (descent and climbing together).
    pub max_sweeps: usize,
    pub max_newton: usize,
    pub gmres: GmresConfig,
    pub downhill: DownhillConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            path_nodes: 33,
            path_step: 1e-2,
            max_path_step: 0.5,
            switch_tol: 1e-3,
            newton_tol: 1e-9,
            max_sweeps: 200,
            max_newton: 40,
            gmres: GmresConfig::default(),
            downhill: DownhillConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("path_step", self.path_step),
            ("max_path_step", self.max_path_step),
            ("switch_tol", self.switch_tol),
            ("newton_tol", self.newton_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.path_nodes < 16 {
            return Err(Error::Config(format!(
                "path_nodes must be >= 16, got {}",
                self.path_nodes
            )));
        }
        Ok(())
    }

    /// Absolute L² residual tolerance for parameters `p`.
    pub fn residual_tol(&self, p: &Parameters) -> f64 {
        let scale = p.lambda1() + p.lambda2();
        self.newton_tol * if scale > 0.0 { scale } else { 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDescriptor {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl From<&TorusGrid> for GridDescriptor {
    fn from(g: &TorusGrid) -> Self {
        Self {
            nx: g.nx(),
            ny: g.ny(),
            lx: g.lx(),
            ly: g.ly(),
        }
    }
}

/// A candidate solution with its diagnostics.
#[derive(Debug, Clone)]
pub struct SolveRecord {
    pub field: Field,
    /// L² norm of `gradient_j(field)`.
    pub residual_norm: f64,
    pub j_value: f64,
    /// Newton iterations.
    pub iterations: usize,
    /// Path deformation sweeps spent before Newton (0 for warm starts).
    pub sweeps: usize,
    pub parameters: Parameters,
    pub grid: GridDescriptor,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub sup_norm: f64,
    pub dirichlet_norm: f64,
    /// Fraction of nodes where the field is positive.
    pub positive_fraction: f64,
}

impl SolveRecord {
    fn build(
        field: Field,
        p: &Parameters,
        history: Vec<f64>,
        iterations: usize,
        converged: bool,
    ) -> Result<Self> {
        let g = field.grid().clone();
        let residual_norm = *history.last().expect("history is never empty");
        let positive = field.values().iter().filter(|&&v| v > 0.0).count();
        Ok(Self {
            j_value: functional_j(&field, p)?,
            sup_norm: field.max_abs(),
            dirichlet_norm: g.dirichlet_energy(&field).sqrt(),
            positive_fraction: positive as f64 / g.len() as f64,
            residual_norm,
            iterations,
            sweeps: 0,
            parameters: *p,
            grid: GridDescriptor::from(g.as_ref()),
            converged,
            residual_history: history,
            field,
        })
    }

    pub fn is_nontrivial(&self) -> bool {
        self.dirichlet_norm >= NONTRIVIAL_NORM
    }
}

/// Nodes of a path from 0 to the downhill endpoint.
#[derive(Debug, Clone)]
pub struct PathState {
    pub nodes: Vec<Field>,
    pub energies: Vec<f64>,
    pub peak: usize,
}

impl PathState {
    /// Straight segment `t·v₁`, `t ∈ [0, 1]`.
    pub fn linear(end: &Field, count: usize, p: &Parameters) -> Result<Self> {
        let nodes: Vec<Field> = (0..count)
            .map(|i| end.scaled(i as f64 / (count - 1) as f64))
            .collect();
        Self::from_nodes(nodes, p)
    }

    fn from_nodes(nodes: Vec<Field>, p: &Parameters) -> Result<Self> {
        let energies = nodes
            .iter()
            .map(|v| functional_j(v, p))
            .collect::<Result<Vec<_>>>()?;
        let peak = argmax(&energies);
        Ok(Self {
            nodes,
            energies,
            peak,
        })
    }

    pub fn peak_energy(&self) -> f64 {
        self.energies[self.peak]
    }

    fn peak_is_interior(&self) -> bool {
        self.peak > 0 && self.peak + 1 < self.nodes.len()
    }

    /// Redistributes nodes uniformly in Dirichlet arclength on either side of
    /// the peak, which keeps its index and position.
    fn reinterpolate(&mut self, p: &Parameters) -> Result<()> {
        let n = self.nodes.len();
        let g = self.nodes[0].grid().clone();
        let mut arc = vec![0.0; n];
        for i in 1..n {
            let d = self.nodes[i].lin_comb(1.0, &self.nodes[i - 1], -1.0);
            arc[i] = arc[i - 1] + g.dirichlet_energy(&d).sqrt();
        }
        let k = self.peak;
        let mut targets = Vec::with_capacity(n);
        for i in 0..=k {
            targets.push(arc[k] * i as f64 / k as f64);
        }
        for i in k + 1..n {
            let t = (i - k) as f64 / (n - 1 - k) as f64;
            targets.push(arc[k] + t * (arc[n - 1] - arc[k]));
        }
        let mut fresh = Vec::with_capacity(n);
        let mut seg = 0;
        for (i, &s) in targets.iter().enumerate() {
            if i == 0 || i == k || i == n - 1 {
                fresh.push(self.nodes[i].clone());
                continue;
            }
            while seg + 2 < n && arc[seg + 1] < s {
                seg += 1;
            }
            let len = arc[seg + 1] - arc[seg];
            let t = if len > 0.0 {
                ((s - arc[seg]) / len).clamp(0.0, 1.0)
            } else {
                0.0
            };
            fresh.push(self.nodes[seg].lin_comb(1.0 - t, &self.nodes[seg + 1], t));
        }
        let peak = self.peak;
        *self = Self::from_nodes(fresh, p)?;
        // the pinned node keeps the peak unless a neighbour overtook it
        if self.energies[peak] >= self.energies[self.peak] {
            self.peak = peak;
        }
        Ok(())
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Gradient of `J` in the Dirichlet metric and its norm.
fn sobolev_gradient(v: &Field, p: &Parameters) -> Result<(Field, f64)> {
    let g = v.grid().clone();
    let r = gradient_j(v, p)?;
    let norm = g.h_minus_one_norm(&r);
    Ok((g.inv_laplacian_unchecked(&r), norm))
}

fn check_preconditions(p: &Parameters, grid: &TorusGrid) -> Result<RegionSpec> {
    if grid.nx() < MIN_RESOLUTION || grid.ny() < MIN_RESOLUTION {
        return Err(Error::Precondition(format!(
            "grid {}x{} is coarser than {MIN_RESOLUTION}x{MIN_RESOLUTION}",
            grid.nx(),
            grid.ny()
        )));
    }
    let spec = RegionSpec::new(p.gamma(), grid.mu1() * grid.volume())
        .map_err(|e| Error::Precondition(e.to_string()))?;
    if !contains(&spec, p.lambda1(), p.lambda2()) {
        return Err(Error::Precondition(format!(
            "(lambda1, lambda2) = ({}, {}) is outside the admissible region for gamma = {}",
            p.lambda1(),
            p.lambda2(),
            p.gamma()
        )));
    }
    Ok(spec)
}

/// Outcome of path deformation, before Newton.
#[derive(Debug, Clone)]
pub struct Deformation {
    pub path: PathState,
    pub sweeps: usize,
    /// Dual norm of the residual at the returned peak node.
    pub peak_gradient: f64,
}

/// Deforms the path towards a minimum-energy path while its highest node
/// climbs along the path tangent onto the saddle.
///
/// Every interior node moves by `−step·G`, with `G` the Dirichlet gradient;
/// the highest node instead uses `G − 2⟨G,τ⟩τ` for the unit tangent `τ`.
/// Afterwards the nodes are redistributed to uniform arclength on either side
/// of the highest one. A sweep is accepted when it lowers the path maximum or
/// the gradient at the highest node; otherwise the step is halved.
pub fn deform_path(path: PathState, p: &Parameters, cfg: &SolverConfig) -> Result<Deformation> {
    let mut path = path;
    let g = path.nodes[0].grid().clone();
    let n = path.nodes.len();
    let geometry = |path: &PathState| -> Result<()> {
        if path.peak_is_interior() {
            Ok(())
        } else {
            Err(Error::GeometryFailure(format!(
                "path maximum collapsed onto endpoint {}",
                path.peak
            )))
        }
    };
    geometry(&path)?;

    let gradients = |path: &PathState| -> Result<(Vec<Field>, f64)> {
        let mut out = Vec::with_capacity(n);
        let mut peak_norm = 0.0;
        for (i, node) in path.nodes.iter().enumerate() {
            if i == 0 || i + 1 == n {
                out.push(Field::zeros(&g));
                continue;
            }
            let (gi, ni) = sobolev_gradient(node, p)?;
            if i == path.peak {
                peak_norm = ni;
            }
            out.push(gi);
        }
        Ok((out, peak_norm))
    };

    let mut step = cfg.path_step;
    let mut sweeps = 0;
    let (mut grads, mut gnorm) = gradients(&path)?;
    while gnorm >= cfg.switch_tol && sweeps < cfg.max_sweeps {
        sweeps += 1;
        let k = path.peak;
        let tangent = {
            let t = path.nodes[k + 1].lin_comb(1.0, &path.nodes[k - 1], -1.0);
            let len = g.dirichlet_energy(&t).sqrt();
            t.scaled(1.0 / len)
        };
        let mut nodes = path.nodes.clone();
        for i in 1..n - 1 {
            if i == k {
                let along = g.dirichlet_inner(&grads[k], &tangent);
                let mut dir = grads[k].clone();
                dir.axpy(-2.0 * along, &tangent);
                nodes[i].axpy(-step, &dir);
            } else {
                nodes[i].axpy(-step, &grads[i]);
            }
            nodes[i].project_mean_zero();
        }
        let mut trial = PathState::from_nodes(nodes, p)?;
        trial.peak = k;
        trial.reinterpolate(p)?;
        let (trial_grads, trial_norm) = gradients(&trial)?;
        if trial.peak_is_interior()
            && (trial.peak_energy() < path.peak_energy() || trial_norm < gnorm)
        {
            path = trial;
            grads = trial_grads;
            gnorm = trial_norm;
            step = (step * 1.5).min(cfg.max_path_step);
        } else {
            step *= 0.5;
            if step < 1e-10 {
                break;
            }
        }
    }
    geometry(&path)?;
    Ok(Deformation {
        path,
        sweeps,
        peak_gradient: gnorm,
    })
}

/// Computes a nontrivial mountain-pass solution at `p`.
pub fn mountain_pass(p: &Parameters, grid: &Grid, cfg: &SolverConfig) -> Result<SolveRecord> {
    cfg.validate()?;
    check_preconditions(p, grid)?;
    let endpoint = downhill_endpoint(p, grid, &cfg.downhill)?;
    let mut path = PathState::linear(&endpoint.field, cfg.path_nodes, p)?;
    if p.gamma() == 1.0 && p.lambda1() == p.lambda2() {
        // v ↦ −v symmetry: nudge interior nodes off symmetric configurations
        let c = crate::bubbles::default_center(grid);
        let (lx, ly) = (grid.lx(), grid.ly());
        let bump = Field::from_fn(grid, |x, y| {
            (2.0 * PI * (x - c.x) / lx).cos() * (2.0 * PI * (y - c.y) / ly).cos()
        })
        .projected();
        let n = path.nodes.len();
        for node in &mut path.nodes[1..n - 1] {
            node.axpy(1e-6, &bump);
        }
        path = PathState::from_nodes(path.nodes, p)?;
    }
    let deformation = deform_path(path, p, cfg)?;
    let start = deformation.path.nodes[deformation.path.peak].clone();
    let mut record = newton_refine(&start, p, cfg)?;
    record.sweeps = deformation.sweeps;
    if !record.is_nontrivial() {
        return Err(Error::GeometryFailure(format!(
            "Newton converged to the trivial solution (Dirichlet norm {:e})",
            record.dirichlet_norm
        )));
    }
    if record.j_value <= 0.0 {
        return Err(Error::GeometryFailure(format!(
            "critical level {} is not above J(0) = 0",
            record.j_value
        )));
    }
    Ok(record)
}

/// Newton's method on `gradient_j(v) = 0` over mean-zero fields, with
/// GMRES applied to `(−Δ)⁻¹J''(v)` and backtracking on the residual norm.
pub fn newton_refine(v0: &Field, p: &Parameters, cfg: &SolverConfig) -> Result<SolveRecord> {
    let g = v0.grid().clone();
    let tol = cfg.residual_tol(p);
    let mut v = v0.clone().projected();
    let mut r = gradient_j(&v, p)?;
    let mut rn = g.l2_norm(&r);
    let mut history = vec![rn];
    let mut iterations = 0;

    while rn > tol {
        if iterations >= cfg.max_newton {
            let record = SolveRecord::build(v, p, history, iterations, false)?;
            return Err(Error::Stagnation(Box::new(record)));
        }
        iterations += 1;
        let hess = Hessian::at(&v, p)?;
        let rhs = g.inv_laplacian_unchecked(&r).scaled(-1.0);
        // Squared forcing: the Krylov residual is measured after the
        // preconditioner, which damps the high modes of the L² residual.
        let forcing = (rn * rn).clamp(1e-13, 1e-2);
        let lin = gmres(
            |phi| Ok(g.inv_laplacian_unchecked(&hess.apply(phi)?)),
            &rhs,
            &GmresConfig {
                rel_tol: forcing,
                ..cfg.gmres
            },
        )?;
        let newton_dir =
            (lin.rel_residual < 0.5).then(|| without_translations(&g, &v, lin.solution));
        // fall back to J-descent if the Krylov solve made no progress
        let directions = newton_dir.into_iter().chain(std::iter::once(rhs.clone()));

        let mut accepted = None;
        for dir in directions {
            let mut alpha = 1.0;
            for _ in 0..30 {
                let trial = v.lin_comb(1.0, &dir, alpha).projected();
                if let Ok(tr) = gradient_j(&trial, p) {
                    let tn = g.l2_norm(&tr);
                    if tn < rn {
                        accepted = Some((trial, tr, tn));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        match accepted {
            Some((nv, nr, nn)) => {
                v = nv;
                r = nr;
                rn = nn;
                history.push(rn);
            }
            None => {
                let record = SolveRecord::build(v, p, history, iterations, false)?;
                return Err(Error::Stagnation(Box::new(record)));
            }
        }
    }
    SolveRecord::build(v, p, history, iterations, true)
}

/// Removes from `d` its Dirichlet-orthogonal components along `∂ₓv` and
/// `∂ᵧv`. `J` is invariant under translations, so these directions span (near)
/// null modes of the Hessian; left in, rounding noise along them produces huge
/// Newton steps that only shift the solution.
fn without_translations(g: &TorusGrid, v: &Field, mut d: Field) -> Field {
    let Ok((tx, ty)) = g.gradient(v) else {
        return d;
    };
    let mut basis: Vec<Field> = Vec::with_capacity(2);
    for mut t in [tx, ty] {
        for b in &basis {
            let c = g.dirichlet_inner(&t, b);
            t.axpy(-c, b);
        }
        let n = g.dirichlet_energy(&t).sqrt();
        if n > 1e-12 * (1.0 + v.max_abs()) {
            basis.push(t.scaled(1.0 / n));
        }
    }
    for b in &basis {
        let c = g.dirichlet_inner(&d, b);
        d.axpy(-c, b);
    }
    d
}

/// Re-solves `record` on another grid of the same torus, starting from the
/// spectral interpolant of its field.
pub fn refine_on(record: &SolveRecord, target: &Grid, cfg: &SolverConfig) -> Result<SolveRecord> {
    let warm = record.field.grid().resample(&record.field, target)?;
    newton_refine(&warm, &record.parameters, cfg)
}

/// Parameters `t` of the way from `a` to `b`.
fn interpolate_params(a: &Parameters, b: &Parameters, t: f64, volume: f64) -> Result<Parameters> {
    let mix = |x: f64, y: f64| if t == 1.0 { y } else { x + t * (y - x) };
    Parameters::new(
        mix(a.lambda1(), b.lambda1()),
        mix(a.lambda2(), b.lambda2()),
        mix(a.gamma(), b.gamma()),
        volume,
    )
}

/// Warm-started Newton along the straight segment from the parameters of
/// `start` to `p_end`. Returns one record per step (not including `start`);
/// failed steps are kept with `converged == false` and the walk continues
/// from the last converged solution.
pub fn continue_from(
    start: &SolveRecord,
    p_end: &Parameters,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<Vec<SolveRecord>> {
    let grid = start.field.grid().clone();
    let p0 = start.parameters;
    let mut out = Vec::with_capacity(steps);
    let mut prev: Option<Field> = None;
    let mut last = start.field.clone();
    for i in 1..=steps {
        let p = interpolate_params(&p0, p_end, i as f64 / steps as f64, grid.volume())?;
        let guess = match &prev {
            Some(older) => last.lin_comb(2.0, older, -1.0),
            None => last.clone(),
        };
        let attempt = newton_refine(&guess, &p, cfg).or_else(|e| match e {
            Error::Stagnation(_) if prev.is_some() => newton_refine(&last, &p, cfg),
            other => Err(other),
        });
        match attempt {
            Ok(rec) => {
                prev = Some(last);
                last = rec.field.clone();
                out.push(rec);
            }
            Err(Error::Stagnation(rec)) => {
                prev = None;
                out.push(*rec);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Mountain-pass solve at `p_start` followed by warm-started continuation
/// towards `p_end`. Every parameter point except possibly the last must lie in
/// the admissible region.
pub fn continuation(
    p_start: &Parameters,
    p_end: &Parameters,
    steps: usize,
    grid: &Grid,
    cfg: &SolverConfig,
) -> Result<Vec<SolveRecord>> {
    if p_start == p_end || steps == 0 {
        return Ok(vec![mountain_pass(p_start, grid, cfg)?]);
    }
    for i in 0..steps {
        let p = interpolate_params(p_start, p_end, i as f64 / steps as f64, grid.volume())?;
        check_preconditions(&p, grid)?;
    }
    let first = mountain_pass(p_start, grid, cfg)?;
    let rest = continue_from(&first, p_end, steps, cfg)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(first);
    out.extend(rest);
    Ok(out)
}

/// Periodic shift placing the maximum of `f` at node `(0, 0)`.
pub fn aligned_to_peak(f: &Field) -> Field {
    let nx = f.grid().nx();
    let idx = f.argmax();
    f.shift(-((idx % nx) as isize), -((idx / nx) as isize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let cfg = SolverConfig {
            path_nodes: 8,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            newton_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn newton_from_zero_is_immediate() {
        let g = TorusGrid::unit(64).unwrap();
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        let rec = newton_refine(&Field::zeros(&g), &p, &SolverConfig::default()).unwrap();
        assert_eq!(rec.iterations, 0);
        assert!(rec.converged && !rec.is_nontrivial());
    }

    #[test]
    fn rejects_outside_region_and_coarse_grids() {
        let g = TorusGrid::unit(64).unwrap();
        let cfg = SolverConfig::default();
        let p = Parameters::new(36.0, 10.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            mountain_pass(&p, &g, &cfg),
            Err(Error::Precondition(_))
        ));
        let p = Parameters::new(20.0, 5.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            mountain_pass(&p, &g, &cfg),
            Err(Error::Precondition(_))
        ));
        let coarse = TorusGrid::unit(32).unwrap();
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            mountain_pass(&p, &coarse, &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn linear_path_has_interior_peak() {
        let g = TorusGrid::unit(64).unwrap();
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        let end = downhill_endpoint(&p, &g, &DownhillConfig::default()).unwrap();
        let path = PathState::linear(&end.field, 33, &p).unwrap();
        assert_eq!(path.energies[0], 0.0);
        assert!(path.energies[32] < 0.0);
        assert!(path.peak_is_interior() && path.peak_energy() > 0.0);
    }

    #[test]
    fn reinterpolation_keeps_count_endpoints_and_peak() {
        let g = TorusGrid::unit(64).unwrap();
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        let end = downhill_endpoint(&p, &g, &DownhillConfig::default()).unwrap();
        let mut path = PathState::linear(&end.field, 20, &p).unwrap();
        let k = path.peak;
        path.nodes[k].axpy(0.3, &end.field.scaled(0.01));
        let peak_before = path.nodes[k].clone();
        path.reinterpolate(&p).unwrap();
        assert_eq!(path.nodes.len(), 20);
        assert_eq!(path.nodes[0].max_abs(), 0.0);
        assert_eq!(path.nodes[19].values(), end.field.values());
        assert_eq!(path.nodes[k].values(), peak_before.values());
    }

    #[test]
    fn alignment_moves_peak_to_origin() {
        let g = TorusGrid::unit(16).unwrap();
        let f = Field::from_fn(&g, |x, y| -((x - 0.25).powi(2) + (y - 0.75).powi(2)));
        let a = aligned_to_peak(&f);
        assert_eq!(a.argmax(), 0);
        assert_eq!(a.max(), f.max());
    }
}
