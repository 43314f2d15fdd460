//! Approximate Brenier maps for targets without a closed reduction.

mod entropic;
mod pushforward;
mod semidiscrete;

pub use entropic::{entropic_map, EntropicMap, EntropicOptions};
pub use pushforward::{pushforward_test, PushforwardReport};
pub use semidiscrete::{quantize, sd_map_eval, semidiscrete_solve, DiscreteMeasure, SemiDiscreteOptions, SemiDiscretePlan};
