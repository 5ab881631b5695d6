//! Stepwise synthesis of bounded feedback for systems in block
//! chain-of-integrators form.
//!
//! A system is split into blocks that are driven to zero one at a time. Each
//! step applies a positional control that zeroes its block while the blocks
//! finished earlier stay at rest. See the guide in `book/` for a tour.
//!
//! ```
//! use std::collections::BTreeMap;
//! use stepsynth::scenarios::lookup;
//! use stepsynth::sim::{simulate, IntegratorConfig};
//!
//! let scn = lookup("polyodd:3", &BTreeMap::new())?;
//! let x0 = (scn.from_z)(&[1.0, 1.0, 1.0]);
//! let (_, summary) = simulate(&scn, &x0, &IntegratorConfig::default())?;
//! assert!((summary.step_times[0] - 2.025).abs() < 1e-6);
//! # Ok::<(), stepsynth::error::Error>(())
//! ```

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod ctrl_fn;
pub mod error;
pub mod gramian;
pub mod mappability;
pub mod numerics;
pub mod output;
pub mod scenarios;
pub mod sim;
pub mod stepwise;

// The guide's code listings run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/gramians.md")]
    mod gramians {}
    #[doc = include_str!("../../../book/src/controllability-function.md")]
    mod controllability_function {}
    #[doc = include_str!("../../../book/src/stepwise.md")]
    mod stepwise {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/mappability.md")]
    mod mappability {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
