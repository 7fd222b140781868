//! Column generation for the capacitated vehicle routing problem over the
//! ng-route relaxation, stabilized with two families of dual-optimal
//! inequalities: swap bounds between customer pairs and per-position
//! removal rebates on columns.
//!
//! The crate is organised bottom-up:
//!
//! * [`instance`] — CVRPLIB parsing/serialization, rounded Euclidean
//!   distances, ng neighborhoods.
//! * [`columns`] — routes, costs, and the swap/remove edits the bounds are
//!   defined through.
//! * [`lp`] — a small dense revised simplex (two-phase, warm-startable)
//!   plus the factorization helpers shared with the rebate QP.
//! * [`pricing`] — the ng-route labeling DP and the exhaustive oracles
//!   used to test it.
//! * [`doi`] — swap bounds, removal rebates (greedy, LP-tight, and
//!   QP-smoothed variants), and the rounding grids.
//! * [`rmp`] — the restricted master problem in plain and stabilized
//!   forms.
//! * [`driver`] — the column-generation loop, the relaxed-bound removal
//!   loop with certification, and run traces.
//! * [`synth`] — a deterministic generator for benchmark-style instances.

pub mod columns;
pub mod doi;
pub mod driver;
pub mod instance;
pub mod lp;
pub mod pricing;
pub mod rmp;
pub mod synth;

#[cfg(test)]
pub(crate) mod testutil;

pub use columns::Route;
pub use driver::{CgTrace, RunConfig, SolveOutcome, TraceRow};
pub use instance::{Instance, Neighborhoods};
pub use rmp::DoiMode;
