//! Support vector machines trained by sequential minimal optimization with
//! second-order working-set selection.
//!
//! The solver handles the common dual
//! `min ½ αᵀQα + pᵀα  s.t.  yᵀα = 0,  0 ≤ α ≤ C`
//! with `Q_ij = y_i y_j K_ij`. ε-SVR doubles the variables; C-SVC uses them
//! directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// Polynomial kernel `(x·x′ + 1)^degree`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyKernel {
    pub degree: u32,
}

impl PolyKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        (dot + 1.0).powi(self.degree as i32)
    }

    /// Symmetric Gram matrix of `rows`, row-major.
    pub fn gram(&self, rows: &[&[f64]]) -> Vec<f64> {
        let n = rows.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.eval(rows[i], rows[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
}

/// Solves the dual over `len` variables whose kernel entries come from the
/// `l × l` matrix `gram` at index `v % l`.
fn solve(gram: &[f64], l: usize, y: &[f64], p: &[f64], opt: SolverOptions) -> Solution {
    let len = y.len();
    let c = opt.c;
    let kidx = |v: usize| v % l;
    let q_column = |i: usize, out: &mut [f64]| {
        let row = &gram[kidx(i) * l..(kidx(i) + 1) * l];
        for (j, o) in out.iter_mut().enumerate() {
            *o = y[i] * y[j] * row[kidx(j)];
        }
    };
    let qd: Vec<f64> = (0..len).map(|i| gram[kidx(i) * l + kidx(i)]).collect();
    let mut alpha = vec![0.0; len];
    let mut g = p.to_vec();
    let mut qi = vec![0.0; len];
    let mut qj = vec![0.0; len];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;

    while iterations < opt.max_iterations {
        // First index: maximal violating pair component.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..len {
            if y[t] > 0.0 {
                if !upper(alpha[t]) && -g[t] >= gmax {
                    gmax = -g[t];
                    i_sel = Some(t);
                }
            } else if !lower(alpha[t]) && g[t] >= gmax {
                gmax = g[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };
        q_column(i, &mut qi);
        // Second index: largest guaranteed objective decrease.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..len {
            let (grad_diff, quad) = if y[t] > 0.0 {
                if lower(alpha[t]) {
                    continue;
                }
                gmax2 = gmax2.max(g[t]);
                (gmax + g[t], qd[i] + qd[t] - 2.0 * y[i] * qi[t])
            } else {
                if upper(alpha[t]) {
                    continue;
                }
                gmax2 = gmax2.max(-g[t]);
                (gmax - g[t], qd[i] + qd[t] + 2.0 * y[i] * qi[t])
            };
            if grad_diff > 0.0 {
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else { break };
        if gmax + gmax2 < opt.tolerance {
            break;
        }
        iterations += 1;
        q_column(j, &mut qj);

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qi[j]).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qi[j]).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..len {
            g[t] += qi[t] * di + qj[t] * dj;
        }
    }
    if iterations == opt.max_iterations {
        log::warn!("SMO stopped at the iteration limit ({iterations})");
    }

    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut sum_free = 0.0;
    for t in 0..len {
        let yg = y[t] * g[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };
    Solution {
        alpha,
        rho,
        iterations,
    }
}

/// A trained kernel machine: `f(x) = Σ coef_i K(sv_i, x) − rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMachine {
    pub kernel: PolyKernel,
    pub support: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl KernelMachine {
    fn from_coefficients(kernel: PolyKernel, rows: &[&[f64]], coef: Vec<f64>, rho: f64) -> Self {
        let (support, coef) = rows
            .iter()
            .zip(coef)
            .filter(|(_, c)| *c != 0.0)
            .map(|(r, c)| (r.to_vec(), c))
            .unzip();
        KernelMachine {
            kernel,
            support,
            coef,
            rho,
        }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * self.kernel.eval(s, x))
            .sum::<f64>()
            - self.rho
    }
}

fn check_rows(rows: &[&[f64]], n_targets: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptySplit("training"));
    }
    if rows.len() != n_targets {
        return Err(Error::LengthMismatch(rows.len(), n_targets));
    }
    Ok(())
}

/// ε-SVR on a precomputed Gram matrix of `rows`.
pub fn fit_svr(
    rows: &[&[f64]],
    gram: &[f64],
    targets: &[f64],
    kernel: PolyKernel,
    epsilon: f64,
    opt: SolverOptions,
) -> Result<KernelMachine> {
    check_rows(rows, targets.len())?;
    let l = rows.len();
    let mut y = vec![1.0; 2 * l];
    y[l..].fill(-1.0);
    let p: Vec<f64> = targets
        .iter()
        .map(|z| epsilon - z)
        .chain(targets.iter().map(|z| epsilon + z))
        .collect();
    let sol = solve(gram, l, &y, &p, opt);
    log::debug!("SVR converged in {} iterations", sol.iterations);
    let coef = (0..l).map(|i| sol.alpha[i] - sol.alpha[i + l]).collect();
    Ok(KernelMachine::from_coefficients(
        kernel, rows, coef, sol.rho,
    ))
}

/// C-SVC with labels in {−1, +1}.
pub fn fit_svc(
    rows: &[&[f64]],
    gram: &[f64],
    labels: &[bool],
    kernel: PolyKernel,
    opt: SolverOptions,
) -> Result<KernelMachine> {
    check_rows(rows, labels.len())?;
    let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    let p = vec![-1.0; rows.len()];
    let sol = solve(gram, rows.len(), &y, &p, opt);
    log::debug!("SVC converged in {} iterations", sol.iterations);
    let coef = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).collect();
    Ok(KernelMachine::from_coefficients(
        kernel, rows, coef, sol.rho,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts(tol: f64) -> SolverOptions {
        SolverOptions {
            c: 10.0,
            tolerance: tol,
            max_iterations: 10_000_000,
        }
    }

    fn quadratic_problem(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = [0.6, -0.3, 0.5];
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys = xs
            .iter()
            .map(|x| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().powi(2))
            .collect();
        (xs, ys)
    }

    #[test]
    fn svr_fits_quadratic() {
        let (xs, ys) = quadratic_problem(1, 200);
        let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let k = PolyKernel { degree: 2 };
        let m = fit_svr(&rows, &k.gram(&rows), &ys, k, 0.01, opts(1e-3)).unwrap();
        let (tx, ty) = quadratic_problem(2, 200);
        let mse = tx
            .iter()
            .zip(&ty)
            .map(|(x, y)| (m.decision(x) - y).powi(2))
            .sum::<f64>()
            / 200.0;
        assert!(mse.sqrt() < 0.05, "rmse {}", mse.sqrt());
    }

    #[test]
    fn svr_order_invariant() {
        let (xs, ys) = quadratic_problem(3, 80);
        let k = PolyKernel { degree: 2 };
        let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let a = fit_svr(&rows, &k.gram(&rows), &ys, k, 0.01, opts(1e-6)).unwrap();
        let mut order: Vec<usize> = (0..80).collect();
        order.reverse();
        order.swap(3, 40);
        let rows2: Vec<&[f64]> = order.iter().map(|&i| xs[i].as_slice()).collect();
        let ys2: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        let b = fit_svr(&rows2, &k.gram(&rows2), &ys2, k, 0.01, opts(1e-6)).unwrap();
        let (tx, _) = quadratic_problem(4, 50);
        for x in &tx {
            assert!((a.decision(x) - b.decision(x)).abs() < 1e-4);
        }
    }

    #[test]
    fn svc_separates_linear_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                vec![
                    rng.random_range(-1.0f64..1.0),
                    rng.random_range(-1.0f64..1.0),
                ]
            })
            .filter(|x| (x[0] + x[1]).abs() > 0.1)
            .collect();
        let labels: Vec<bool> = xs.iter().map(|x| x[0] + x[1] > 0.0).collect();
        let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let k = PolyKernel { degree: 2 };
        let m = fit_svc(&rows, &k.gram(&rows), &labels, k, opts(1e-3)).unwrap();
        for (x, &l) in xs.iter().zip(&labels) {
            assert_eq!(m.decision(x) > 0.0, l);
        }
    }

    #[test]
    fn empty_rejected() {
        let k = PolyKernel { degree: 2 };
        assert!(matches!(
            fit_svr(&[], &[], &[], k, 0.1, opts(1e-3)),
            Err(Error::EmptySplit(_))
        ));
    }
}
