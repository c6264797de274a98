//! Sequential maximum-entropy selection of a single joint distribution from a credal
//! network, together with the global maximum-entropy oracle, exact inference, credal
//! query bounds and I-map checks used to cross-validate it.

pub mod error;
pub mod exec;
pub mod fixtures;
pub mod format;
pub mod imap;
pub mod inference;
pub mod model;
pub mod network;
pub mod sequential;
pub mod solvers;

pub use error::{Error, Result};
pub use exec::Execution;
pub use format::{parse_network, render_joint, render_network};
pub use imap::{build_gkb, cond_independent, separates, verify_imap, ImapReport, UndirectedGraph};
pub use inference::{cond_prob, credal_bounds, joint_of_bn, Bounds, Query};
pub use model::{enumerate_atomic_events, AtomicEvent, ConjunctiveEvent, EventSpace, JointTable, Variable};
pub use network::{
    Bound, Conditional, ConditionalSet, ConvexSpec, CredalNetwork, Halfspace, KnowledgeBase, PointBayesNet,
    TableBody, ValidationReport, Violation,
};
pub use sequential::{
    body_contains, global_me_model, me_model, select_sequential, select_sequential_direct, SelectionResult,
};
pub use solvers::{entropy, maxent_box, maxent_hrep, maxent_joint, maxent_vrep, SolverConfig};
