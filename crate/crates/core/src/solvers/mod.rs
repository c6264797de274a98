//! Entropy maximization kernels.

mod dual;
mod joint;
mod local;
mod polytope;

pub use joint::{freezing_constraints, linearize, maxent_joint, JointSolution, LinearizedConstraint, Relation};
pub(crate) use joint::maxent_joint_in;
pub use local::{hrep_feasible, maxent_box, maxent_hrep, maxent_vrep, LocalSolution};
pub use polytope::{hrep_vertices, vertices_box_simplex, vrep_facets, HRep, MAX_CONVERSION_DIM};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Width of the final bracket on the water-filling level.
    pub bisection_tol: f64,
    /// Duality / Frank-Wolfe gap that certifies an iterative solve.
    pub convex_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            bisection_tol: 1e-12,
            convex_tol: 1e-9,
            max_iters: 100_000,
        }
    }
}

impl SolverConfig {
    pub fn validated(self) -> Result<Self> {
        if !(self.bisection_tol > 0.0 && self.convex_tol > 0.0 && self.max_iters > 0) {
            return Err(Error::invalid("solver tolerances and iteration cap must be positive"));
        }
        Ok(self)
    }
}

/// Shannon entropy in nats, with `0·log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|x| **x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

/// Like [`entropy`] but rejects negative entries.
pub fn checked_entropy(p: &[f64]) -> Result<f64> {
    if let Some(x) = p.iter().find(|x| x.is_nan() || **x < 0.0) {
        return Err(Error::invalid(format!("negative probability {x}")));
    }
    Ok(entropy(p))
}
