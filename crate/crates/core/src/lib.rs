//! Test martingales for the mean of a bounded random variable.
//!
//! The crate builds anytime-valid sequential tests of `H0: E(T) >= mu` (and
//! its mirror images) from products of betting factors, and derives from
//! them running confidence upper bounds, confidence intervals, power and
//! run-length analysis, and a seeded simulation harness.
//!
//! ```
//! use tmart::{Decision, SequentialTest, StakePolicy, TestConfig};
//!
//! let cfg = TestConfig::bounded(0.05, 0.0, 1.0, 0.05);
//! let mut test = SequentialTest::new(cfg, StakePolicy::Constant(0.6)).unwrap();
//! let mut stop = None;
//! for k in 1..=1000 {
//!     if test.push(0.02).unwrap().decision == Decision::Reject {
//!         stop = Some(k);
//!         break;
//!     }
//! }
//! assert_eq!(stop, Some(160));
//! ```

pub mod analysis;
pub mod confidence;
pub mod config;
pub mod error;
pub mod martingale;
pub mod mixture;
pub mod numeric;
pub mod sequential;
pub mod serde_ext;
pub mod session;
pub mod simulation;

pub use confidence::{BoundResult, BoundTracker, CPolicy, Interval, IntervalResult, IntervalTracker, Mode};
pub use config::{Branch, Side, TestConfig};
pub use error::{Error, Result};
pub use martingale::{decision, factor, two_sided_value, Decision, MartingaleState, StakePolicy};
pub use mixture::{Density, MixtureSpec, MixtureState};
pub use sequential::{SequentialTest, TestSnapshot};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/martingales.md")]
    mod martingales {}
    #[doc = include_str!("../../../book/src/mixtures.md")]
    mod mixtures {}
    #[doc = include_str!("../../../book/src/confidence.md")]
    mod confidence {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
}
