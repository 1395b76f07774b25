//! Experiment drivers: run configuration, synthetic data, per-family
//! scenario runs, the dataset-size sweep and plot emission.

mod config;
mod plot;
mod run;
mod synth;

pub use config::{FamilyId, OutputFormat, RunConfig, SweepSpec};
pub use plot::{
    emit_plot, fmt_annotation, fmt_sig12, parse_curves_csv, parse_heatmap_csv, render_csv, render_svg, Curves,
    Heatmap, PlotData, PlotFormat, PALETTE,
};
pub use run::{
    build_dataset, curves_of, family_seed, fit_and_predict, load_frame, run_family, run_scenario, scenario_slice,
    size_sweep, write_family, write_json, write_model, write_sweep, CellFailure, FamilyRun, FamilyStatus, FittedModel, HeldOut, Manifest,
    ScenarioOutcome, SweepResult, MANIFEST_VERSION,
};
pub use synth::{gen_synthetic, gen_synthetic_spec, planted_weights, SynthKind, SynthSpec, BAYES_80_NOISE};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("nothing to plot")]
    EmptyData,
    #[error("format: {0}")]
    Format(String),
    #[error("gradient check failed: max relative error {0:e}")]
    GradCheck(f64),
}

impl BenchError {
    pub fn code(&self) -> &'static str {
        match self {
            BenchError::Config(_) => "CONFIG",
            BenchError::EmptyData => "EMPTY_DATA",
            BenchError::Format(_) => "FORMAT",
            BenchError::GradCheck(_) => "GRADCHECK_FAILED",
        }
    }
}
