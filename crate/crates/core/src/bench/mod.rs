//! Benchmark protocol: synthetic low-rank data, sampling and noise, error
//! metrics, PGM images and CSV reports.

pub mod data;
pub mod experiment;
pub mod pgm;

pub use data::{
    add_noise, freedom_ratio, gen_low_rank, gen_mask, low_rank_approx, relative_error, rms,
    sample_count,
};
pub use experiment::{
    build_instance, run_experiment, run_once, run_table, ExperimentRow, ExperimentSpec,
    ExperimentTable, ProblemInstance, Report, REPORT_HEADER,
};
pub use pgm::{encode_pgm, load_grayscale, parse_pgm, save_grayscale};
