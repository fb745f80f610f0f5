//! Restarted GMRES for matrix-free operators on fields.

use crate::error::Result;
use crate::torus::Field;

#[derive(Debug, Clone, Copy)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iter: usize,
    /// Stop when `‖b − Ax‖ ≤ rel_tol·‖b‖`.
    pub rel_tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 60,
            max_iter: 300,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub solution: Field,
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖`.
    pub rel_residual: f64,
    pub converged: bool,
}

fn dot(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

fn norm(a: &Field) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` from `x = 0`.
pub fn gmres<A>(apply: A, b: &Field, cfg: &GmresConfig) -> Result<GmresOutcome>
where
    A: Fn(&Field) -> Result<Field>,
{
    let b_norm = norm(b);
    let mut x = Field::zeros(b.grid());
    if b_norm == 0.0 {
        return Ok(GmresOutcome {
            solution: x,
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        });
    }
    let m = cfg.restart.max(1);
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let ax = apply(&x)?;
        let r = b.lin_comb(1.0, &ax, -1.0);
        let beta = norm(&r);
        let mut rel = beta / b_norm;
        if rel <= cfg.rel_tol {
            break;
        }

        let mut basis: Vec<Field> = vec![r.scaled(1.0 / beta)];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            if iterations >= cfg.max_iter {
                break;
            }
            iterations += 1;
            let mut w = apply(&basis[k])?;
            for (i, q) in basis.iter().enumerate() {
                h[i][k] = dot(&w, q);
                w.axpy(-h[i][k], q);
            }
            // one reorthogonalization pass
            for (i, q) in basis.iter().enumerate() {
                let c = dot(&w, q);
                h[i][k] += c;
                w.axpy(-c, q);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;

            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;

            rel = g[k + 1].abs() / b_norm;
            if rel <= cfg.rel_tol || hn == 0.0 {
                break;
            }
            basis.push(w.scaled(1.0 / hn));
        }

        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (yi, q) in y.iter().zip(&basis) {
            x.axpy(*yi, q);
        }
        if rel <= cfg.rel_tol || k_used == 0 {
            break;
        }
    }

    let ax = apply(&x)?;
    let rel_residual = norm(&b.lin_comb(1.0, &ax, -1.0)) / b_norm;
    Ok(GmresOutcome {
        solution: x,
        iterations,
        converged: rel_residual <= cfg.rel_tol * 10.0,
        rel_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TorusGrid;

    #[test]
    fn solves_indefinite_diagonal_system() {
        let g = TorusGrid::unit(8).unwrap();
        let diag: Vec<f64> = (0..64)
            .map(|i| {
                if i % 7 == 0 {
                    -1.0 - i as f64
                } else {
                    1.0 + i as f64 * 0.1
                }
            })
            .collect();
        let b = Field::from_fn(&g, |x, y| (x * 3.0).sin() + y);
        let op = |f: &Field| -> Result<Field> {
            Ok(Field::new(
                g.clone(),
                f.values().iter().zip(&diag).map(|(v, d)| v * d).collect(),
            )
            .unwrap())
        };
        let out = gmres(
            op,
            &b,
            &GmresConfig {
                restart: 80,
                max_iter: 200,
                rel_tol: 1e-12,
            },
        )
        .unwrap();
        assert!(out.converged);
        for ((x, d), bv) in out.solution.values().iter().zip(&diag).zip(b.values()) {
            assert!((x * d - bv).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs() {
        let g = TorusGrid::unit(8).unwrap();
        let out = gmres(
            |f| Ok(f.clone()),
            &Field::zeros(&g),
            &GmresConfig::default(),
        )
        .unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.solution.max_abs(), 0.0);
    }
}
