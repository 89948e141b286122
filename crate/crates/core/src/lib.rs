//! Finite-horizon Dec-POMDPs with belief-dependent rewards, solved by
//! nonlinear policy graph improvement over layered finite-state controllers.

pub mod baselines;
pub mod belief;
pub mod domains;
pub mod error;
pub mod generate;
pub mod model;
pub mod policy;
pub mod solver;

pub use belief::{Belief, JointHistory};
pub use error::{Error, ParseError, Result};
pub use model::{parse_problem, serialize_problem, Problem};
pub use policy::{evaluate, JointPolicy, LocalPolicy, PolicyNode};
pub use solver::{solve, Mode, SolveReport, SolverConfig};
