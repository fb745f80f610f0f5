mod common;

use std::sync::OnceLock;

use common::{rel_close, smooth};
use sinh_poisson::minimax::{
    continuation, continue_from, mountain_pass, newton_refine, refine_on, SolveRecord, SolverConfig,
};
use sinh_poisson::model::gradient_j;
use sinh_poisson::{Error, Field, Parameters, Result, TorusGrid};

fn ok<T>(r: Result<T>) -> T {
    r.unwrap_or_else(|e| panic!("{e}"))
}

fn base() -> &'static SolveRecord {
    static CELL: OnceLock<SolveRecord> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = TorusGrid::unit(128).unwrap();
        let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
        ok(mountain_pass(&p, &g, &SolverConfig::default()))
    })
}

/// First Fourier coefficient along each axis.
fn first_modes(f: &Field) -> [(f64, f64); 2] {
    let g = f.grid();
    let tau = 2.0 * std::f64::consts::PI;
    let mut out = [(0.0, 0.0); 2];
    for (idx, v) in f.values().iter().enumerate() {
        let p = g.node(idx);
        for (k, phase) in [tau * p.x / g.lx(), tau * p.y / g.ly()]
            .into_iter()
            .enumerate()
        {
            out[k].0 += v * phase.cos();
            out[k].1 -= v * phase.sin();
        }
    }
    out
}

/// Sup distance between `a` and `b` after undoing the continuous translation
/// read off the first Fourier modes.
fn distance_modulo_translation(a: &Field, b: &Field) -> f64 {
    let g = a.grid();
    let (ma, mb) = (first_modes(a), first_modes(b));
    let shift = |k: usize, period: f64| {
        let (ar, ai) = ma[k];
        let (br, bi) = mb[k];
        // arg(â / b̂)
        let angle = (ai * br - ar * bi).atan2(ar * br + ai * bi);
        -period * angle / (2.0 * std::f64::consts::PI)
    };
    let moved = g.translate(a, shift(0, g.lx()), shift(1, g.ly())).unwrap();
    moved.distance_sup(b)
}

fn check_record(r: &SolveRecord, cfg: &SolverConfig) {
    let g = r.field.grid();
    let recomputed = g.l2_norm(&gradient_j(&r.field, &r.parameters).unwrap());
    assert!(r.converged);
    assert!(r.residual_norm <= cfg.residual_tol(&r.parameters));
    assert!(
        recomputed <= 2.0 * r.residual_norm,
        "{recomputed} vs {}",
        r.residual_norm
    );
    assert!(r.is_nontrivial() && r.j_value > 0.0);
    assert!(r.field.is_mean_zero());
}

#[test]
fn mountain_pass_record_is_consistent() {
    let r = base();
    check_record(r, &SolverConfig::default());
    assert!(r.sweeps > 0);
    assert!(r.positive_fraction > 0.0 && r.positive_fraction < 1.0);
}

#[test]
fn newton_basin_and_quadratic_tail() {
    let r = base();
    let g = r.field.grid();
    let cfg = SolverConfig {
        newton_tol: 1e-11,
        ..SolverConfig::default()
    };
    for seed in 0..3 {
        let kick = smooth(g, seed, 6, 1e-3);
        let again = ok(newton_refine(
            &r.field.lin_comb(1.0, &kick, 1.0),
            &r.parameters,
            &cfg,
        ));
        // the kick may move the solution along its translation orbit
        let gap = distance_modulo_translation(&again.field, &r.field);
        assert!(
            gap <= 1e-6,
            "gap {gap} history {:?}",
            again.residual_history
        );
        let h = &again.residual_history;
        assert!(h.len() >= 3, "{h:?}");
        assert!(h.windows(2).all(|w| w[1] < w[0]));
        // later steps reach the rounding floor of the residual (~4e-11)
        let order = (h[2] / h[1]).ln() / (h[1] / h[0]).ln();
        assert!(order > 1.6, "history {h:?} order {order}");
    }
}

#[test]
fn zero_length_continuation_matches_mountain_pass() {
    let r = base();
    let g = r.field.grid().clone();
    let out = ok(continuation(
        &r.parameters,
        &r.parameters,
        5,
        &g,
        &SolverConfig::default(),
    ));
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].field.values(), r.field.values());
    assert_eq!(out[0].j_value, r.j_value);
}

#[test]
fn continuation_reversal_returns_to_start() {
    let cfg = SolverConfig {
        newton_tol: 2e-12,
        ..SolverConfig::default()
    };
    let start = base();
    let r = &ok(newton_refine(&start.field, &start.parameters, &cfg));
    let far = Parameters::new(28.0, 6.0, 0.5, 1.0).unwrap();
    let there = ok(continue_from(r, &far, 4, &cfg));
    assert!(there.iter().all(|x| x.converged));
    let back = ok(continue_from(there.last().unwrap(), &r.parameters, 4, &cfg));
    let end = back.last().unwrap();
    assert!(end.converged);
    assert_eq!(end.parameters, r.parameters);
    assert!(
        end.field.distance_sup(&r.field) <= 1e-6,
        "dist {}",
        end.field.distance_sup(&r.field)
    );
    for x in there.iter().chain(&back) {
        check_record(x, &cfg);
    }
}

#[test]
fn doubled_resolution_keeps_the_level() {
    let r = base();
    let fine = TorusGrid::unit(256).unwrap();
    let cfg = SolverConfig::default();
    let refined = ok(refine_on(r, &fine, &cfg));
    check_record(&refined, &cfg);
    assert!(rel_close(refined.j_value, r.j_value, 1e-4));
}

#[test]
fn rejects_parameters_outside_the_region() {
    let g = TorusGrid::unit(64).unwrap();
    let cfg = SolverConfig::default();
    for (l1, l2, gamma) in [
        (30.0, 30.0, 1.0),
        (20.0, 15.0, 1.0),
        (8.0 * std::f64::consts::PI, 1.0, 0.5),
    ] {
        let p = Parameters::new(l1, l2, gamma, 1.0).unwrap();
        assert!(matches!(
            mountain_pass(&p, &g, &cfg),
            Err(Error::Precondition(_))
        ));
    }
    let coarse = TorusGrid::unit(32).unwrap();
    let p = Parameters::new(30.0, 5.0, 0.5, 1.0).unwrap();
    assert!(matches!(
        mountain_pass(&p, &coarse, &cfg),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn stagnation_reports_last_iterate() {
    let r = base();
    let g = r.field.grid();
    let cfg = SolverConfig {
        max_newton: 1,
        ..SolverConfig::default()
    };
    let start = smooth(g, 9, 3, 2.0);
    match newton_refine(&start, &r.parameters, &cfg) {
        Err(Error::Stagnation(rec)) => {
            assert!(!rec.converged);
            assert_eq!(rec.iterations, 1);
            assert!(rec.residual_history[1] < rec.residual_history[0]);
        }
        other => panic!(
            "expected stagnation, got {:?}",
            other.map(|r| r.residual_norm)
        ),
    }
    let zero = ok(newton_refine(&Field::zeros(g), &r.parameters, &cfg));
    assert_eq!(zero.iterations, 0);
}
