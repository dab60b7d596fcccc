//! Reachability and online control synthesis for partially unknown control-affine systems.
//!
//! From `f(x0)`, `G(x0)` and Lipschitz bounds alone, [`proxy`] builds a scalar-gain
//! surrogate whose reachable set is guaranteed reachable by the true system.
//! [`synthesizer`] then steers the true system to a point of that set, learning
//! local velocities from its own trajectory in short cycles ([`learner`]).

pub mod casestudy;
pub mod config;
pub mod dynamics;
pub mod io;
pub mod learner;
pub mod plant;
pub mod proxy;
pub mod synthesizer;
pub mod verify;

pub use dynamics::{AffineField, ControlAffineField, FnField, Lipschitz, PiecewiseConstantControl, Trajectory};
pub use learner::{BoundConstants, CycleConfig};
pub use plant::{Plant, Simulator};
pub use proxy::{GrsBoundary, ProxyParams, RadiusVariant};
pub use synthesizer::{LocalModel, SynthesisConfig, SynthesisResult, Termination, Variant};
