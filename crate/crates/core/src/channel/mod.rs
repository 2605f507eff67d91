//! Channel model inputs: fading laws, array correlation, scenarios and random draws.

mod draw;
mod fading;
mod scenario;
mod ula;
pub mod wire;

pub use draw::{assemble_channel, power_check, ChannelDraw, ChannelSampler, PowerCheck};
pub use fading::{cv_of, sample_amplitudes, sample_fading, FadingSpec};
pub use scenario::{
    build_scenario, LosSource, MatrixSource, RawScenario, RawUser, RecipeUser, ScenarioRecipe,
    ScenarioSpec, UserSpec, NORMALIZATION_TOLERANCE,
};
pub use ula::ula_correlation;
