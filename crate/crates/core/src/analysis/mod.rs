//! Global closed-loop analysis: spectrum of `F`, equilibrium prediction,
//! input-to-state envelope and network coherence.

mod coherence;
mod equilibrium;
mod global;
mod iss;
mod spectral;

pub use coherence::{analytical_coherence, coherence, empirical_deviation, standard_laplacian_spectrum, CoherenceReport};
pub use equilibrium::{
    disagreement_state, predict_equilibrium, predict_equilibrium_balanced, projected_disagreement, EquilibriumPrediction,
};
pub use global::{assemble_global, GlobalSystem};
pub use iss::{iss_envelope, phi_max, IssBound};
pub use spectral::{
    exp_bound_constants, exp_bound_for, spectral_report, spectral_report_for, BoundMethod, ExpBound, SpectralReport,
};
