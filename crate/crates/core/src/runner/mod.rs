//! Experiment orchestration: training runs, λ sweeps, loss inspection and reports.

mod config;
mod experiment;
mod inspect;
mod report;
mod sweep;
mod train;

pub use config::{RunConfig, OUTPUT_ROOT_ENV};
pub use experiment::{load_manifest, manifest_path, run_experiment, RunManifest, SeedSummary, MANIFEST_FILE};
pub use inspect::{format_inspect_csv, loss_inspect, parse_sequences, InspectMode, InspectOptions, LossRow};
pub use report::{emit_report, load_comparable, summarize, svg_polylines, MethodSummary, Report};
pub use sweep::{ablate_lambda, LambdaGrid, SweepPoint, SweepReport, DEFAULT_GRID, SWEEP_KINDS};
pub use train::{read_metrics_csv, train_seed, Checkpoint, MetricsRow, SeedOutcome};
