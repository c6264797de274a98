//! Entropy maximization over a single conditional distribution.
//!
//! Three independent routes: water-filling for boxes, away-step conditional gradient
//! over a vertex list, and the dual Newton kernel for halfspace descriptions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{Halfspace, SIMPLEX_TOL};

use super::dual::{self, DualFailure, Row};
use super::{entropy, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub probs: Vec<f64>,
    pub entropy: f64,
    pub iterations: usize,
    /// Upper bound on `H* - H(probs)` (zero for the closed-form box solution).
    pub certificate: f64,
}

impl LocalSolution {
    fn new(probs: Vec<f64>, iterations: usize, certificate: f64) -> Self {
        let entropy = entropy(&probs);
        Self {
            probs,
            entropy,
            iterations,
            certificate,
        }
    }
}

fn clip_sum(t: f64, lower: &[f64], upper: &[f64]) -> f64 {
    lower.iter().zip(upper).map(|(l, u)| t.clamp(*l, *u)).sum()
}

/// Maximum-entropy point of `{r : Σr = 1, l <= r <= u}`.
///
/// The maximizer is `r_j = clip(t, l_j, u_j)` for the level `t` at which the clipped
/// vector sums to one; `t` is bracketed by bisection and then solved exactly on the
/// identified free set.
pub fn maxent_box(lower: &[f64], upper: &[f64], config: &SolverConfig) -> Result<LocalSolution> {
    let d = lower.len();
    if d == 0 || upper.len() != d {
        return Err(Error::invalid("box bounds must be non-empty and of equal length"));
    }
    if lower.iter().chain(upper).any(|x| !x.is_finite()) || lower.iter().zip(upper).any(|(l, u)| l > u || *l < 0.0 || *u > 1.0) {
        return Err(Error::Infeasible("box bounds violate 0 <= l <= u <= 1".into()));
    }
    let sl: f64 = lower.iter().sum();
    let su: f64 = upper.iter().sum();
    if sl > 1.0 + SIMPLEX_TOL || su < 1.0 - SIMPLEX_TOL {
        return Err(Error::Infeasible(format!("box misses the simplex (Σl = {sl}, Σu = {su})")));
    }

    let mut lo = lower.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = upper.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut iterations = 0;
    while hi - lo > config.bisection_tol && iterations < config.max_iters {
        let mid = 0.5 * (lo + hi);
        if clip_sum(mid, lower, upper) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let t = 0.5 * (lo + hi);

    // Recompute the level exactly from the coordinates that are strictly inside their box.
    let free: Vec<usize> = (0..d).filter(|&j| lower[j] < t && t < upper[j]).collect();
    let mut r: Vec<f64> = (0..d).map(|j| t.clamp(lower[j], upper[j])).collect();
    if !free.is_empty() {
        let fixed: f64 = (0..d).filter(|j| !free.contains(j)).map(|j| r[j]).sum();
        let level = (1.0 - fixed) / free.len() as f64;
        if free.iter().all(|&j| lower[j] <= level && level <= upper[j]) {
            for &j in &free {
                r[j] = level;
            }
        }
    }
    let total: f64 = r.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        // Only reachable when no coordinate is free; spread the rounding over slack coordinates.
        let excess = total - 1.0;
        if let Some(j) = (0..d).max_by(|&a, &b| {
            let slack = |k: usize| if excess > 0.0 { r[k] - lower[k] } else { upper[k] - r[k] };
            slack(a).total_cmp(&slack(b))
        }) {
            r[j] = (r[j] - excess).clamp(lower[j], upper[j]);
        }
    }
    Ok(LocalSolution::new(r, iterations, 0.0))
}

/// Maximum-entropy point of the convex hull of `vertices` by away-step conditional gradient
/// with exact line search, each step followed by a Newton step over the active vertices.
/// The returned certificate is the final Frank-Wolfe gap.
pub fn maxent_vrep(vertices: &[Vec<f64>], config: &SolverConfig) -> Result<LocalSolution> {
    let Some(first) = vertices.first() else {
        return Err(Error::invalid("vertex list is empty"));
    };
    let d = first.len();
    for v in vertices {
        if v.len() != d {
            return Err(Error::invalid("vertices have different lengths"));
        }
        let s: f64 = v.iter().sum();
        if v.iter().any(|x| !x.is_finite() || *x < -SIMPLEX_TOL) || (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("vertex {v:?} is not on the simplex")));
        }
    }

    // Coordinates that vanish on every vertex vanish at the optimum.
    let support: Vec<usize> = (0..d)
        .filter(|&j| vertices.iter().any(|v| v[j] > 1e-15))
        .collect();
    let mut points: Vec<Vec<f64>> = Vec::new();
    for v in vertices {
        let reduced: Vec<f64> = support.iter().map(|&j| v[j].max(0.0)).collect();
        let s: f64 = reduced.iter().sum();
        let reduced: Vec<f64> = reduced.iter().map(|x| x / s).collect();
        if !points
            .iter()
            .any(|p| p.iter().zip(&reduced).all(|(a, b)| (a - b).abs() <= 1e-15))
        {
            points.push(reduced);
        }
    }
    let expand = |r: &[f64]| {
        let mut out = vec![0.0; d];
        for (k, &j) in support.iter().enumerate() {
            out[j] = r[k];
        }
        out
    };
    if points.len() == 1 {
        return Ok(LocalSolution::new(expand(&points[0]), 0, 0.0));
    }

    let m = points.len();
    let k = support.len();
    let mut weights = vec![1.0 / m as f64; m];
    let combine = |w: &[f64]| {
        let mut r = vec![0.0; k];
        for (wi, p) in w.iter().zip(&points) {
            if *wi > 0.0 {
                for j in 0..k {
                    r[j] += wi * p[j];
                }
            }
        }
        r
    };
    let mut r = combine(&weights);
    let mut gap = f64::INFINITY;
    let mut best_gap = f64::INFINITY;
    let mut since_best = 0;
    let mut iterations = 0;
    let target = (config.convex_tol * 1e-6).max(1e-15);

    while iterations < config.max_iters {
        let grad: Vec<f64> = r.iter().map(|x| -x.max(1e-300).ln()).collect();
        let score = |p: &[f64]| p.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>();
        let at_r = score(&r);
        let (fw, fw_score) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, score(p)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        gap = fw_score - at_r;
        if gap <= target {
            break;
        }
        if gap < best_gap * 0.999 {
            best_gap = gap;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 200 {
                break;
            }
        }
        let (away, away_score) = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| (i, score(&points[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("some weight is positive");
        let away_gap = at_r - away_score;
        iterations += 1;

        if gap >= away_gap {
            let dir: Vec<f64> = points[fw].iter().zip(&r).map(|(p, x)| p - x).collect();
            let step = line_search(&r, &dir, 1.0);
            weights.iter_mut().for_each(|w| *w *= 1.0 - step);
            weights[fw] += step;
        } else {
            let wa = weights[away];
            let max_step = wa / (1.0 - wa);
            let dir: Vec<f64> = r.iter().zip(&points[away]).map(|(x, p)| x - p).collect();
            let step = line_search(&r, &dir, max_step);
            weights.iter_mut().for_each(|w| *w *= 1.0 + step);
            weights[away] -= step * 1.0;
            if step >= max_step || weights[away] < 1e-18 {
                weights[away] = 0.0;
            }
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        r = combine(&weights);
        if corrective_step(&points, &mut weights, &r) {
            r = combine(&weights);
        }
    }

    if gap > config.convex_tol {
        return Err(Error::NotConverged(format!(
            "conditional gradient stopped with gap {gap:.3e} after {iterations} iterations"
        )));
    }
    let probs = expand(&r);
    Ok(LocalSolution::new(probs, iterations, gap.max(0.0)))
}

/// Corrective step: Newton's method for the entropy maximizer over the affine hull of the
/// active vertices, then the farthest point towards it that is still in the hull of all
/// vertices. Weights are re-derived by non-negative least squares, which also keeps the
/// active set at most `d + 1` vertices.
fn corrective_step(points: &[Vec<f64>], weights: &mut [f64], r: &[f64]) -> bool {
    let active: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if active.len() < 2 {
        return false;
    }
    let Some(target) = affine_maximizer(points, &active, r) else {
        return false;
    };
    let mut gamma = 1.0;
    for _ in 0..30 {
        let candidate: Vec<f64> = r.iter().zip(&target).map(|(x, t)| x + gamma * (t - x)).collect();
        if let Some(w) = hull_weights(points, &candidate) {
            if entropy(&combine_points(points, &w)) < entropy(r) {
                return false;
            }
            weights.copy_from_slice(&w);
            return true;
        }
        gamma *= 0.5;
    }
    false
}

fn combine_points(points: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; points[0].len()];
    for (wi, p) in w.iter().zip(points) {
        if *wi > 0.0 {
            for (x, v) in r.iter_mut().zip(p) {
                *x += wi * v;
            }
        }
    }
    r
}

/// Maximizer of the entropy over `r + span{v_i - v_j : i, j active}`, by damped Newton.
fn affine_maximizer(points: &[Vec<f64>], active: &[usize], r: &[f64]) -> Option<Vec<f64>> {
    let d = r.len();
    let base = &points[active[0]];
    let diffs = DMatrix::from_fn(d, active.len() - 1, |j, c| points[active[c + 1]][j] - base[j]);
    let svd = diffs.svd(true, false);
    let u = svd.u?;
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&c| svd.singular_values[c] > 1e-12 * top.max(1.0))
        .collect();
    if cols.is_empty() {
        return None;
    }
    let basis = DMatrix::from_fn(d, cols.len(), |j, c| u[(j, cols[c])]);
    let q = cols.len();
    let mut x = r.to_vec();
    for _ in 0..100 {
        let live: Vec<usize> = (0..d).filter(|&j| x[j] > 0.0).collect();
        let mut grad = DVector::<f64>::zeros(q);
        let mut hess = DMatrix::<f64>::zeros(q, q);
        for &j in &live {
            let g = -x[j].ln() - 1.0;
            for a in 0..q {
                grad[a] += basis[(j, a)] * g;
                for b in 0..q {
                    hess[(a, b)] += basis[(j, a)] * basis[(j, b)] / x[j];
                }
            }
        }
        let step = hess.cholesky()?.solve(&grad);
        let dir: Vec<f64> = (0..d).map(|j| (0..q).map(|a| basis[(j, a)] * step[a]).sum()).collect();
        if dir.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let limit = (0..d)
            .filter(|&j| dir[j] < 0.0)
            .map(|j| x[j] / -dir[j])
            .fold(f64::INFINITY, f64::min);
        let gamma = line_search(&x, &dir, limit.min(1.0));
        if gamma <= 0.0 {
            break;
        }
        let mut size = 0.0f64;
        for j in 0..d {
            x[j] += gamma * dir[j];
            size = size.max((gamma * dir[j]).abs());
        }
        if size <= 1e-16 {
            break;
        }
    }
    Some(x)
}

/// Convex weights reproducing `r` from `points` within 1e-13, if any exist.
fn hull_weights(points: &[Vec<f64>], r: &[f64]) -> Option<Vec<f64>> {
    let d = r.len();
    let a = DMatrix::from_fn(d + 1, points.len(), |j, i| if j < d { points[i][j] } else { 1.0 });
    let b = DVector::from_iterator(d + 1, r.iter().copied().chain(std::iter::once(1.0)));
    let mut w = nnls(&a, &b);
    w.iter_mut().filter(|x| **x < 1e-12).for_each(|x| *x = 0.0);
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let residual = (&a * DVector::from_column_slice(&w) - &b).amax();
    (residual <= 1e-13).then_some(w)
}

/// Lawson-Hanson non-negative least squares, `min ‖Ax - b‖ subject to x >= 0`.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Vec<f64> {
    let n = a.ncols();
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
        let z = sub.svd(true, true).solve(b, 1e-14).unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut full = DVector::<f64>::zeros(n);
        for (c, &i) in idx.iter().enumerate() {
            full[i] = z[c];
        }
        full
    };
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let Some(j) = (0..n)
            .filter(|&i| !passive[i] && w[i] > 1e-15)
            .max_by(|&i, &k| w[i].total_cmp(&w[k]))
        else {
            break;
        };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive);
            let blocking: Vec<usize> = (0..n).filter(|&i| passive[i] && z[i] <= 0.0).collect();
            if blocking.is_empty() {
                x = z;
                break;
            }
            let alpha = blocking
                .iter()
                .map(|&i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= 1e-18 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    x.iter().map(|v| v.max(0.0)).collect()
}

/// Maximizer of `φ(γ) = H(r + γ d)` on `[0, max_step]`; `d` sums to zero.
fn line_search(r: &[f64], dir: &[f64], max_step: f64) -> f64 {
    // φ'(γ) = -Σ d_j log(r_j + γ d_j), decreasing in γ.
    let slope = |g: f64| -> f64 {
        r.iter()
            .zip(dir)
            .filter(|(_, d)| **d != 0.0)
            .map(|(x, d)| -d * (x + g * d).max(0.0).ln())
            .sum()
    };
    if slope(0.0) <= 0.0 {
        return 0.0;
    }
    let end = slope(max_step);
    if end >= 0.0 {
        return max_step;
    }
    let curvature = |g: f64| -> f64 {
        r.iter()
            .zip(dir)
            .filter(|(_, d)| **d != 0.0)
            .map(|(x, d)| d * d / (x + g * d).max(1e-300))
            .sum()
    };
    let (mut lo, mut hi) = (0.0, max_step);
    let mut g = 0.5 * max_step;
    for _ in 0..200 {
        let s = slope(g);
        if s > 0.0 {
            lo = g;
        } else {
            hi = g;
        }
        if s == 0.0 || hi - lo <= 1e-17 * max_step.max(1.0) {
            break;
        }
        let newton = g + s / curvature(g);
        g = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    g
}

/// Maximum-entropy point of `{r in simplex : a·r <= b}` via the dual Newton kernel.
/// The certificate is the duality gap at a point whose constraint residual is at most 1e-8.
pub fn maxent_hrep(halfspaces: &[Halfspace], d: usize, config: &SolverConfig) -> Result<LocalSolution> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if let Some(h) = halfspaces.iter().find(|h| h.a.len() != d) {
        return Err(Error::invalid(format!("halfspace normal has length {}, expected {d}", h.a.len())));
    }
    // a·r - b·Σr <= 0
    let rows = halfspaces
        .iter()
        .map(|h| Row {
            coef: h.a.iter().enumerate().map(|(j, a)| (j, a - h.b)).collect(),
            inequality: true,
        })
        .collect();
    match dual::solve(d, rows, config) {
        Ok(out) => Ok(LocalSolution::new(out.probs, out.iterations, out.gap)),
        Err(DualFailure::Infeasible { row, .. }) => Err(Error::Infeasible(format!(
            "halfspace set is empty (halfspace {row} cannot be met)"
        ))),
        Err(DualFailure::NotConverged { residual, iterations }) => Err(Error::NotConverged(format!(
            "halfspace solve reached residual {residual:.3e} after {iterations} iterations"
        ))),
    }
}

/// Feasibility of a halfspace set intersected with the simplex.
pub fn hrep_feasible(halfspaces: &[Halfspace], d: usize) -> bool {
    !matches!(
        maxent_hrep(halfspaces, d, &SolverConfig::default()),
        Err(Error::Infeasible(_))
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::vertices_box_simplex;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn box_halfspaces(l: &[f64], u: &[f64]) -> Vec<Halfspace> {
        let d = l.len();
        let mut hs = Vec::new();
        for j in 0..d {
            let mut a = vec![0.0; d];
            a[j] = 1.0;
            hs.push(Halfspace::new(a.clone(), u[j]));
            a[j] = -1.0;
            hs.push(Halfspace::new(a, -l[j]));
        }
        hs
    }

    #[test]
    fn table_one_rows() {
        let cases: [(&[f64], &[f64], &[f64]); 5] = [
            (&[0.2, 0.3], &[0.7, 0.8], &[0.5, 0.5]),
            (&[0.3, 0.6], &[0.4, 0.7], &[0.4, 0.6]),
            (&[0.3, 0.5], &[0.5, 0.7], &[0.5, 0.5]),
            (&[0.7, 0.0, 0.0], &[0.9, 0.3, 0.3], &[0.7, 0.15, 0.15]),
            (&[0.6, 0.1, 0.1], &[0.8, 0.3, 0.3], &[0.6, 0.2, 0.2]),
        ];
        for (l, u, want) in cases {
            let got = maxent_box(l, u, &cfg()).unwrap();
            assert!(close(&got.probs, want, 1e-12), "{l:?} {u:?} -> {:?}", got.probs);
        }
    }

    #[test]
    fn unconstrained_box_is_uniform() {
        let got = maxent_box(&[0.0; 4], &[1.0; 4], &cfg()).unwrap();
        assert!(close(&got.probs, &[0.25; 4], 1e-15));
    }

    #[test]
    fn infeasible_box_is_an_error() {
        assert!(matches!(maxent_box(&[0.6, 0.6], &[0.7, 0.7], &cfg()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn vrep_examples() {
        let got = maxent_vrep(&[vec![1.0, 0.0], vec![0.0, 1.0]], &cfg()).unwrap();
        assert!(close(&got.probs, &[0.5, 0.5], 1e-10));
        let got = maxent_vrep(&[vec![0.7, 0.3]], &cfg()).unwrap();
        assert_eq!(got.probs, vec![0.7, 0.3]);
        let got = maxent_vrep(&[vec![0.3, 0.7], vec![0.4, 0.6]], &cfg()).unwrap();
        assert!(close(&got.probs, &[0.4, 0.6], 1e-10));
        assert!(maxent_vrep(&[], &cfg()).is_err());
    }

    #[test]
    fn vrep_keeps_structural_zeros() {
        let got = maxent_vrep(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], &cfg()).unwrap();
        assert!(close(&got.probs, &[0.5, 0.5, 0.0], 1e-10));
    }

    #[test]
    fn hrep_examples() {
        let got = maxent_hrep(&[], 3, &cfg()).unwrap();
        assert!(close(&got.probs, &[1.0 / 3.0; 3], 1e-12));
        let hs = box_halfspaces(&[0.7, 0.0, 0.0], &[0.9, 0.3, 0.3]);
        let got = maxent_hrep(&hs, 3, &cfg()).unwrap();
        assert!(close(&got.probs, &[0.7, 0.15, 0.15], 1e-9));
        let got = maxent_hrep(&[Halfspace::new(vec![-1.0, 0.0], -0.6)], 2, &cfg()).unwrap();
        assert!(close(&got.probs, &[0.6, 0.4], 1e-9));
    }

    #[test]
    fn hrep_one_dimensional_grid_oracle() {
        // r1 >= 0.6: brute force over a grid of r1 values
        let best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .filter(|r1| *r1 >= 0.6)
            .max_by(|a, b| entropy(&[*a, 1.0 - a]).total_cmp(&entropy(&[*b, 1.0 - b])))
            .unwrap();
        assert!((best - 0.6).abs() < 1e-12);
        let got = maxent_hrep(&[Halfspace::new(vec![-1.0, 0.0], -0.6)], 2, &cfg()).unwrap();
        assert!((got.probs[0] - best).abs() < 1e-9);
    }

    #[test]
    fn hrep_infeasible() {
        let hs = vec![Halfspace::new(vec![-1.0, 0.0], -0.8), Halfspace::new(vec![1.0, 0.0], 0.1)];
        assert!(matches!(maxent_hrep(&hs, 2, &cfg()), Err(Error::Infeasible(_))));
        assert!(!hrep_feasible(&hs, 2));
    }

    #[test]
    fn three_routes_agree_on_table_one_box() {
        let (l, u) = ([0.6, 0.1, 0.1], [0.8, 0.3, 0.3]);
        let a = maxent_box(&l, &u, &cfg()).unwrap().probs;
        let b = maxent_vrep(&vertices_box_simplex(&l, &u).unwrap(), &cfg()).unwrap().probs;
        let c = maxent_hrep(&box_halfspaces(&l, &u), 3, &cfg()).unwrap().probs;
        assert!(close(&a, &b, 1e-8) && close(&a, &c, 1e-8), "{a:?} {b:?} {c:?}");
    }

    #[test]
    fn line_search_finds_interior_maximum() {
        // H(0.2 + γ·0.6, 0.8 - γ·0.6) peaks at γ = 0.5
        let g = line_search(&[0.2, 0.8], &[0.6, -0.6], 1.0);
        assert!((g - 0.5).abs() < 1e-12);
    }
}
