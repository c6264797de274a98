//! Conversions between vertex and halfspace descriptions of convex subsets of the
//! probability simplex.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{Halfspace, SIMPLEX_TOL};

const FEAS_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-12;
/// Largest simplex dimension for vertex/facet conversion.
pub const MAX_CONVERSION_DIM: usize = 4;
const MAX_COMBINATIONS: usize = 2_000_000;

/// Halfspace description split into equalities `a·r = b` and inequalities `a·r <= b`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HRep {
    pub equalities: Vec<Halfspace>,
    pub inequalities: Vec<Halfspace>,
}

fn push_unique(out: &mut Vec<Vec<f64>>, v: Vec<f64>, tol: f64) {
    if !out
        .iter()
        .any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= tol))
    {
        out.push(v);
    }
}

/// Exact vertex set of `{r : Σr = 1, l <= r <= u}`.
///
/// Every vertex has at least `d - 1` coordinates at a bound, so it suffices to fix each
/// coordinate in turn as the free one and try every lower/upper assignment of the rest.
pub fn vertices_box_simplex(lower: &[f64], upper: &[f64]) -> Result<Vec<Vec<f64>>> {
    let d = lower.len();
    if d == 0 || upper.len() != d {
        return Err(Error::invalid("box bounds must be non-empty and of equal length"));
    }
    if d > 24 {
        return Err(Error::CapExceeded {
            what: "box-simplex dimension".into(),
            size: d as u128,
            cap: 24,
        });
    }
    let sl: f64 = lower.iter().sum();
    let su: f64 = upper.iter().sum();
    if sl > 1.0 + SIMPLEX_TOL || su < 1.0 - SIMPLEX_TOL || lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Err(Error::Infeasible(format!("box with Σl = {sl}, Σu = {su} misses the simplex")));
    }
    let mut out = Vec::new();
    for free in 0..d {
        for mask in 0u32..(1 << (d - 1)) {
            let mut r = vec![0.0; d];
            let mut bit = 0;
            for j in 0..d {
                if j == free {
                    continue;
                }
                r[j] = if mask >> bit & 1 == 1 { upper[j] } else { lower[j] };
                bit += 1;
            }
            let rest: f64 = r.iter().sum();
            let x = 1.0 - rest;
            if x >= lower[free] - DEDUP_TOL && x <= upper[free] + DEDUP_TOL {
                r[free] = x.clamp(lower[free], upper[free]);
                push_unique(&mut out, r, DEDUP_TOL);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Infeasible("box-simplex region is empty".into()));
    }
    Ok(out)
}

/// Vertices of `{r : Σr = 1, r >= 0, a·r <= b for each halfspace}` by enumerating
/// every choice of `d - 1` tight constraints.
pub fn hrep_vertices(halfspaces: &[Halfspace], d: usize) -> Result<Vec<Vec<f64>>> {
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if let Some(h) = halfspaces.iter().find(|h| h.a.len() != d) {
        return Err(Error::invalid(format!("halfspace normal has length {}, expected {d}", h.a.len())));
    }
    let mut constraints: Vec<(Vec<f64>, f64)> = halfspaces.iter().map(|h| (h.a.clone(), h.b)).collect();
    for j in 0..d {
        let mut a = vec![0.0; d];
        a[j] = -1.0;
        constraints.push((a, 0.0));
    }
    let combos = binomial(constraints.len(), d - 1);
    if combos > MAX_COMBINATIONS as u128 {
        return Err(Error::CapExceeded {
            what: "halfspace vertex enumeration".into(),
            size: combos,
            cap: MAX_COMBINATIONS as u128,
        });
    }
    let mut out = Vec::new();
    for chosen in (0..constraints.len()).combinations(d - 1) {
        let mut m = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        for j in 0..d {
            m[(0, j)] = 1.0;
        }
        rhs[0] = 1.0;
        for (row, &c) in chosen.iter().enumerate() {
            for j in 0..d {
                m[(row + 1, j)] = constraints[c].0[j];
            }
            rhs[row + 1] = constraints[c].1;
        }
        let sv = m.clone().singular_values();
        if sv.min() <= 1e-9 * sv.max() {
            continue;
        }
        let Some(x) = m.full_piv_lu().solve(&rhs) else { continue };
        if !x.iter().all(|v| v.is_finite()) {
            continue;
        }
        let feasible = constraints.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
            lhs <= b + FEAS_TOL
        });
        if feasible {
            let v: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
            push_unique(&mut out, v, 1e-9);
        }
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Facet description of the convex hull of simplex points, `d <= 4`.
///
/// The hull may be lower dimensional; its affine hull is returned as equalities and the
/// facets within that affine hull as inequalities.
pub fn vrep_facets(vertices: &[Vec<f64>]) -> Result<HRep> {
    let Some(first) = vertices.first() else {
        return Err(Error::invalid("vertex list is empty"));
    };
    let d = first.len();
    if d > MAX_CONVERSION_DIM {
        return Err(Error::CapExceeded {
            what: "vertex-to-facet conversion dimension".into(),
            size: d as u128,
            cap: MAX_CONVERSION_DIM as u128,
        });
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    for v in vertices {
        push_unique(&mut points, v.clone(), DEDUP_TOL);
    }
    let origin = DVector::from_column_slice(&points[0]);
    let diffs = DMatrix::from_fn(points.len().max(2) - 1, d, |i, j| {
        points.get(i + 1).map(|p| p[j] - points[0][j]).unwrap_or(0.0)
    });
    // Rows of vᵀ are an orthonormal basis of R^d ordered by singular value.
    let svd = diffs.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let rank = svd.singular_values.iter().filter(|s| **s > 1e-10).count();
    let basis: Vec<DVector<f64>> = order[..rank].iter().map(|&i| v_t.row(i).transpose()).collect();
    let complement = orthogonal_complement(&basis, d);

    let mut hrep = HRep::default();
    for n in &complement {
        let b = n.dot(&origin);
        hrep.equalities.push(Halfspace::new(n.iter().copied().collect(), b));
    }
    if rank == 0 {
        return Ok(hrep);
    }
    let coords: Vec<DVector<f64>> = points
        .iter()
        .map(|p| {
            let x = DVector::from_column_slice(p) - &origin;
            DVector::from_iterator(rank, basis.iter().map(|b| b.dot(&x)))
        })
        .collect();
    let mut facets: Vec<(DVector<f64>, f64)> = Vec::new();
    for subset in (0..coords.len()).combinations(rank) {
        let normal = if rank == 1 {
            DVector::from_element(1, 1.0)
        } else {
            let m = DMatrix::from_fn(rank - 1, rank, |i, j| coords[subset[i + 1]][j] - coords[subset[0]][j]);
            let s = m.svd(false, true);
            if s.singular_values.iter().filter(|x| **x > 1e-10).count() < rank - 1 {
                continue;
            }
            // The null direction is the row of vᵀ orthogonal to every difference.
            let vt = s.v_t.expect("requested");
            let full = orthogonal_complement(&(0..vt.nrows()).map(|i| vt.row(i).transpose()).collect::<Vec<_>>(), rank);
            match full.into_iter().next() {
                Some(n) => n,
                None => continue,
            }
        };
        let b = normal.dot(&coords[subset[0]]);
        let side: Vec<f64> = coords.iter().map(|c| normal.dot(c) - b).collect();
        let (normal, b) = if side.iter().all(|s| *s <= 1e-10) {
            (normal, b)
        } else if side.iter().all(|s| *s >= -1e-10) {
            (-normal, -b)
        } else {
            continue;
        };
        if !facets.iter().any(|(n, c)| (n - &normal).amax() < 1e-9 && (c - b).abs() < 1e-9) {
            facets.push((normal, b));
        }
    }
    for (normal, b) in facets {
        // Lift back: c·B(r - origin) <= b
        let mut a = DVector::<f64>::zeros(d);
        for (c, basis_vec) in normal.iter().zip(&basis) {
            a += basis_vec * *c;
        }
        let rhs = b + a.dot(&origin);
        hrep.inequalities.push(Halfspace::new(a.iter().copied().collect(), rhs));
    }
    Ok(hrep)
}

/// Orthonormal basis of the complement of span(`basis`) in R^d (Gram-Schmidt on unit vectors).
fn orthogonal_complement(basis: &[DVector<f64>], d: usize) -> Vec<DVector<f64>> {
    let mut span: Vec<DVector<f64>> = Vec::new();
    for b in basis {
        let mut v = b.clone();
        for s in &span {
            v -= s * s.dot(&v);
        }
        if v.norm() > 1e-10 {
            span.push(v.normalize());
        }
    }
    let mut out = Vec::new();
    for j in 0..d {
        let mut v = DVector::<f64>::zeros(d);
        v[j] = 1.0;
        for s in span.iter().chain(&out) {
            v -= s * s.dot(&v);
        }
        if v.norm() > 1e-8 {
            let v = v.normalize();
            out.push(v);
        }
        if span.len() + out.len() == d {
            break;
        }
    }
    out
}
