//! Branching-ratio expansion of photon reabsorption on a reduced
//! one-dimensional Λ system, and scaling fits of its second-order terms.

mod franck_condon;
mod model;
mod scaling;
mod sylvester;

pub use franck_condon::{franck_condon, laguerre, CouplingTensor, Direction};
pub use model::{
    a2a_bad_correlation, compute_order_terms, exact_probabilities, ExactProbabilities, InitialLevel,
    LambdaSystemSpec, OrderTerms, OutcomeClasses, ReducedBREModel,
};
pub use scaling::*;

/// Direction-averaged coupling tensor of `model` at the Lamb-Dicke parameter of `spec`.
pub fn build_alpha(model: &ReducedBREModel, spec: &LambdaSystemSpec) -> CouplingTensor {
    CouplingTensor::new(model.levels, spec.eta)
}
