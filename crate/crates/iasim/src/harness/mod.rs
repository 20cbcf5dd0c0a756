//! Scenario configuration, the Monte-Carlo sweep engine, the experiment
//! suite and the CSV/SVG emitters behind the CLI.

mod output;
mod scenario;
mod studies;
mod sweep;
pub mod validate;

pub use output::{emit_csv, emit_svg};
pub use scenario::{load_scenario, parse_scenario, CsitConfig, Receiver, Scenario};
pub use studies::{
    precoder_scaling_study, prop2_experiment, quantizer_study, scaling_scenario, QuantizerRow,
    QuantizerStudy, ScalingRow, ScalingStudy,
};
pub use sweep::{run_sweep, SweepResult};
