//! Partially-projected regularized zero-forcing (PP-RZF) precoding for a
//! multiuser cognitive-radio downlink.
//!
//! A secondary base station with `N` antennas serves `K` single-antenna
//! secondary users while keeping the average interference received by `L`
//! primary users below a threshold. The precoder inverts a channel that has
//! been partially projected onto the null space of the primary-user channels;
//! the regularization `alpha` and the projection weight `beta` trade
//! inter-user interference, noise enhancement and primary-user leakage.
//!
//! The crate provides:
//!
//! * [`channel`]: channel sampling and the projection operator,
//! * [`precoder`]: the precoder, its power normalization and instantaneous SINR,
//! * [`montecarlo`]: reproducible ergodic estimates over channel draws,
//! * [`detequiv`]: large-system deterministic equivalents and their closed-form
//!   special cases,
//! * [`optimize`]: `(alpha, beta)` search on the deterministic equivalent and a
//!   Monte-Carlo reference optimizer,
//! * [`oracle`]: Monte-Carlo probes for the random-matrix identities the
//!   deterministic equivalents rest on.

pub mod channel;
pub mod detequiv;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod optimize;
pub mod oracle;
pub mod precoder;
pub mod scenario;

pub use channel::{
    partially_project, sample_channels, ChannelRealization, Constraint, NetworkConfig, RngSpec,
};
pub use detequiv::{
    corollary1_sinr, de_sinr, e_alpha_derivative, solve_fixed_point, zeta_closed_form, DeResult,
    FixedPointState, MpParams,
};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use montecarlo::{
    ergodic_sum_rate_mc, estimate_expectations, ExpectationEstimate, McEstimate, NuMode,
};
pub use optimize::{
    optimize_alpha_given_beta, optimize_joint, optimize_mc, proposition1_relation, OptResult,
};
pub use precoder::{
    build_precoder, instantaneous_sinr, sum_rate_instantaneous, Binding, PrecoderOutput,
    PrecoderParams,
};
pub use scenario::{ConstraintCase, Scenario};
