//! Base controller, virtual-controller chain and barrier candidates.

pub mod backstepping;
pub mod class_k;
pub mod constraint;
pub mod sontag;

pub use backstepping::{
    build_cbf, cbf_relative_degree2, check_rank_on_constraint, virtual_controller_chain,
    BarrierValues, CandidateMetadata, CbfBuilder, CbfCandidate, FeedbackTerms,
    VirtualControllerChain,
};
pub use class_k::ClassK;
pub use constraint::{GradientReport, OutputConstraint};
pub use sontag::{sontag_controller, sontag_phi, SontagController};
