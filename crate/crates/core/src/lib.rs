//! Non-adaptive quantitative group testing (QGT) over irregular sparse
//! bipartite graphs.
//!
//! Every right node of a random right-regular bipartite graph carries `s`
//! tests described by a signature matrix: one all-ones counting row stacked
//! on the parity-check matrix of a binary `t`-error-correcting BCH code.
//! Recovery is a peeling decoder: any right node holding at most `t`
//! unidentified defectives is resolved by syndrome decoding, and the
//! identified items are subtracted from every other test they took part in.
//!
//! The crate is organised as:
//!
//! * [`bch`]: GF(2^q) arithmetic, BCH parity-check matrices and syndrome decoding.
//! * [`graph`]: degree profiles and the configuration-model graph sampler.
//! * [`qgt`]: signature matrices, test plans, encoding and peeling recovery.
//! * [`design`]: density evolution, the degree-profile LP, the `c(t,d)`
//!   search and the planner.
//! * [`sim`]: the Monte Carlo error-probability harness.

pub mod bch;
pub mod design;
pub mod error;
pub mod graph;
pub mod qgt;
pub mod sim;

pub use error::{QgtError, Result};
