//! Projected Newton on the Lagrange dual of
//!
//! ```text
//! max  -Σ p log p   s.t.  Σ p = 1,  G p = 0,  K p <= 0
//! ```
//!
//! The primal is recovered in closed form, `p ∝ exp(-Mᵀθ)`, so every iterate is strictly
//! positive and has the product form dictated by stationarity. The dual objective is
//! `D(θ) = log Σ exp(-Mᵀθ)` with `θ_k >= 0` on inequality rows. Weak duality gives
//! `D(θ) >= H(p*) >= 0` for feasible problems, so any `D(θ) < 0` certifies infeasibility.

use nalgebra::{DMatrix, DVector};

use super::SolverConfig;

/// Residual at which the Newton loop stops early.
const TARGET_RESIDUAL: f64 = 1e-12;
/// Residual that must be reached for a result to be certified.
pub(crate) const CERTIFIED_RESIDUAL: f64 = 1e-8;
const STALL_RESIDUAL: f64 = 1e-6;
const STALL_WINDOW: usize = 1000;
const SNAP_TO_ZERO: f64 = 1e-14;

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub coef: Vec<(usize, f64)>,
    pub inequality: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct DualOutcome {
    pub probs: Vec<f64>,
    /// Duality gap `D(θ) - H(p)`, equal to the complementary-slackness term.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum DualFailure {
    Infeasible { row: usize, violation: f64 },
    NotConverged { residual: f64, iterations: usize },
}

struct Evaluation {
    log_z: f64,
    probs: Vec<f64>,
    values: Vec<f64>,
}

struct Problem<'a> {
    rows: &'a [Row],
    /// Per atom: (row, coefficient) pairs.
    columns: Vec<Vec<(usize, f64)>>,
}

impl Problem<'_> {
    fn evaluate(&self, theta: &[f64]) -> Evaluation {
        let mut s: Vec<f64> = self
            .columns
            .iter()
            .map(|col| -col.iter().map(|&(k, c)| theta[k] * c).sum::<f64>())
            .collect();
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in s.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        let log_z = max + total.ln();
        s.iter_mut().for_each(|x| *x /= total);
        let values = self.row_values(&s);
        Evaluation {
            log_z,
            probs: s,
            values,
        }
    }

    fn row_values(&self, probs: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coef.iter().map(|&(i, c)| c * probs[i]).sum())
            .collect()
    }

    fn residual(&self, values: &[f64]) -> (f64, usize) {
        let mut worst = (0.0, 0);
        for (k, (row, v)) in self.rows.iter().zip(values).enumerate() {
            let r = if row.inequality { v.max(0.0) } else { v.abs() };
            if r > worst.0 {
                worst = (r, k);
            }
        }
        worst
    }

    fn complementarity(&self, theta: &[f64], values: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(theta.iter().zip(values))
            .filter(|(row, _)| row.inequality)
            .map(|(_, (t, v))| (t * v).abs())
            .fold(0.0, f64::max)
    }
}

/// Rows whose coefficients are all non-positive are implied by `p >= 0` when they are
/// inequalities; all-zero rows carry no information either way.
pub(crate) fn prune_rows(rows: Vec<Row>) -> (Vec<Row>, Vec<usize>) {
    let mut kept = Vec::new();
    let mut origin = Vec::new();
    for (k, mut row) in rows.into_iter().enumerate() {
        row.coef.retain(|(_, c)| *c != 0.0);
        let redundant = row.coef.is_empty() || (row.inequality && row.coef.iter().all(|(_, c)| *c <= 0.0));
        if !redundant {
            kept.push(row);
            origin.push(k);
        }
    }
    (kept, origin)
}

pub(crate) fn solve(n_atoms: usize, rows: Vec<Row>, config: &SolverConfig) -> Result<DualOutcome, DualFailure> {
    let (rows, origin) = prune_rows(rows);
    solve_pruned(n_atoms, &rows, config).map_err(|f| match f {
        DualFailure::Infeasible { row, violation } => DualFailure::Infeasible {
            row: origin.get(row).copied().unwrap_or(row),
            violation,
        },
        other => other,
    })
}

fn solve_pruned(n_atoms: usize, rows: &[Row], config: &SolverConfig) -> Result<DualOutcome, DualFailure> {
    let m = rows.len();
    if m == 0 {
        return Ok(DualOutcome {
            probs: vec![1.0 / n_atoms as f64; n_atoms],
            gap: 0.0,
            iterations: 0,
        });
    }
    let mut columns = vec![Vec::new(); n_atoms];
    for (k, row) in rows.iter().enumerate() {
        for &(i, c) in &row.coef {
            columns[i].push((k, c));
        }
    }
    let problem = Problem { rows, columns };

    let mut theta = vec![0.0; m];
    let mut eval = problem.evaluate(&theta);
    let mut best_residual = f64::INFINITY;
    let mut last_improvement = 0;
    let mut iterations = 0;

    loop {
        let (residual, worst) = problem.residual(&eval.values);
        let comp = problem.complementarity(&theta, &eval.values);
        if eval.log_z < -1e-9 {
            return Err(DualFailure::Infeasible {
                row: worst,
                violation: residual,
            });
        }
        if residual <= TARGET_RESIDUAL && comp <= TARGET_RESIDUAL {
            break;
        }
        if residual < 0.999 * best_residual {
            best_residual = residual;
            last_improvement = iterations;
        } else if iterations - last_improvement > STALL_WINDOW {
            if residual > STALL_RESIDUAL {
                return Err(DualFailure::Infeasible {
                    row: worst,
                    violation: residual,
                });
            }
            break;
        }
        if iterations >= config.max_iters {
            break;
        }
        iterations += 1;

        // Inequality multipliers pinned at zero whose constraint is slack stay fixed.
        let free: Vec<usize> = (0..m)
            .filter(|&k| !(rows[k].inequality && theta[k] <= 0.0 && eval.values[k] <= 0.0))
            .collect();
        if free.is_empty() {
            break;
        }
        let step = newton_direction(&problem, &eval, &free);
        match line_search(&problem, &theta, &eval, &free, &step) {
            Some((next_theta, next_eval)) => {
                theta = next_theta;
                eval = next_eval;
            }
            None => {
                // Retry along the plain gradient before giving up.
                let grad: Vec<f64> = free.iter().map(|&k| eval.values[k]).collect();
                match line_search(&problem, &theta, &eval, &free, &grad) {
                    Some((next_theta, next_eval)) => {
                        theta = next_theta;
                        eval = next_eval;
                    }
                    None => break,
                }
            }
        }
    }

    let mut probs = eval.probs;
    for p in probs.iter_mut() {
        if *p < SNAP_TO_ZERO {
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let values = problem.row_values(&probs);
    let (residual, worst) = problem.residual(&values);
    let gap = theta.iter().zip(&values).map(|(t, v)| t * v).sum::<f64>().abs();
    if eval.log_z < -1e-9 {
        return Err(DualFailure::Infeasible {
            row: worst,
            violation: residual,
        });
    }
    if residual > CERTIFIED_RESIDUAL || gap > config.convex_tol.max(CERTIFIED_RESIDUAL) {
        return Err(DualFailure::NotConverged { residual, iterations });
    }
    Ok(DualOutcome {
        probs,
        gap,
        iterations,
    })
}

/// Solves `(H_FF + δI) d = r_F`, the Newton step for minimizing `D` over the free set.
fn newton_direction(problem: &Problem, eval: &Evaluation, free: &[usize]) -> Vec<f64> {
    let nf = free.len();
    let mut slot = vec![usize::MAX; problem.rows.len()];
    for (i, &k) in free.iter().enumerate() {
        slot[k] = i;
    }
    let mut h = DMatrix::<f64>::zeros(nf, nf);
    let mut local: Vec<(usize, f64)> = Vec::new();
    for (col, &p) in problem.columns.iter().zip(&eval.probs) {
        if p == 0.0 {
            continue;
        }
        local.clear();
        local.extend(col.iter().filter(|(k, _)| slot[*k] != usize::MAX).map(|&(k, c)| (slot[k], c)));
        for &(i, ci) in &local {
            for &(j, cj) in &local {
                h[(i, j)] += p * ci * cj;
            }
        }
    }
    let r = DVector::from_iterator(nf, free.iter().map(|&k| eval.values[k]));
    h -= &r * r.transpose();
    let scale = (0..nf).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
    let mut delta = 1e-12 * scale;
    loop {
        let mut reg = h.clone();
        for i in 0..nf {
            reg[(i, i)] += delta;
        }
        if let Some(chol) = reg.cholesky() {
            let d = chol.solve(&r);
            if d.iter().all(|x| x.is_finite()) {
                return d.iter().copied().collect();
            }
        }
        delta *= 100.0;
        if delta > 1e6 * scale {
            return r.iter().copied().collect();
        }
    }
}

/// Armijo backtracking along the projected path `θ + α d` with inequality multipliers clipped at 0.
fn line_search(
    problem: &Problem,
    theta: &[f64],
    eval: &Evaluation,
    free: &[usize],
    dir: &[f64],
) -> Option<(Vec<f64>, Evaluation)> {
    const ARMIJO: f64 = 1e-4;
    let mut alpha = 1.0;
    for _ in 0..80 {
        let mut next = theta.to_vec();
        for (&k, d) in free.iter().zip(dir) {
            next[k] += alpha * d;
            if problem.rows[k].inequality && next[k] < 0.0 {
                next[k] = 0.0;
            }
        }
        // ∇D = -values
        let decrease: f64 = free
            .iter()
            .map(|&k| eval.values[k] * (next[k] - theta[k]))
            .sum();
        if decrease <= 0.0 {
            alpha *= 0.5;
            continue;
        }
        let candidate = problem.evaluate(&next);
        if !candidate.log_z.is_finite() {
            alpha *= 0.5;
            continue;
        }
        if candidate.log_z <= eval.log_z - ARMIJO * decrease {
            return Some((next, candidate));
        }
        // Below rounding level of D, judge the step by the residual instead.
        if decrease <= 1e-14 * eval.log_z.abs().max(1.0)
            && problem.residual(&candidate.values).0 < problem.residual(&eval.values).0
        {
            return Some((next, candidate));
        }
        alpha *= 0.5;
    }
    None
}
