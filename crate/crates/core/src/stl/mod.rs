//! Signal temporal logic over population trajectories.
//!
//! Formulas are parsed by [`parse_stl`] into the core syntax (atoms,
//! negation, conjunction, bounded until) and evaluated with exact
//! dense-time interval algebra on the piecewise-constant signals produced
//! by the simulator. Until windows are closed intervals. Behaviour past the
//! end of a trajectory is fail-closed: atoms are false there, so a formula
//! whose horizon exceeds the trajectory is rejected up front.
//!
//! `D(x)` is the change of `x` at the most recent jump (zero before the
//! first jump).

mod ast;
mod monitor;
mod parser;
mod signal;

pub use ast::{Atom, CmpOp, Expr, Interval, StlFormula};
pub use monitor::{atom_signal, monitor, CompiledFormula};
pub use parser::parse_stl;
pub use signal::{BoolSignal, Span};
