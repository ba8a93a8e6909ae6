//! Synthetic domain-generalization harness: data, toy models, leave-one-out.

mod data;
mod model;
mod protocol;
mod report;

pub use data::{generate_base, generate_domains, rotate_planes, Dataset, DomainData, ShiftKind, SyntheticSpec};
pub use model::{
    argmax_rows, fit_domain_model, Activation, ToyModel, LAYER1_BIAS, LAYER1_WEIGHT, LAYER2_BIAS, LAYER2_WEIGHT,
};
pub use protocol::{accuracy, balanced_accuracy, leave_one_out, leave_one_out_at_lambda, EvalResult, Experiment, FitConfig, ENSEMBLE, EXPERT, ZERO_SHOT};
pub use report::{read_results_csv, results_to_csv, summary_table, ResultRow, SummaryTable};
