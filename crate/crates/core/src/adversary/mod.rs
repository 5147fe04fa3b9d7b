//! Hard instance families and the adaptive adversary against nonclairvoyant
//! algorithms.

mod generators;
mod nonclairvoyant;

pub use generators::{gen_metric, gen_pages, gen_random, gen_spatial, gen_star_deadlines, gen_star_rates, immediate, RandomParams};
pub use nonclairvoyant::{nonclairvoyant_adversary, AdversaryPhase, AdversaryReport};
