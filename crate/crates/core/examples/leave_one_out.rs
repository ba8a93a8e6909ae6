//! Runs every merge method on the synthetic rotation suite and prints the
//! method × target table.
//!
//! ```text
//! cargo run --release --example leave_one_out -- [seeds] [shift_strength]
//! ```

use subspace_merge::harness::{summary_table, Experiment, FitConfig, ResultRow, SyntheticSpec};
use subspace_merge::merge::{MergeConfig, Method, ScoreVariant};

fn main() -> subspace_merge::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let strength: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.5);

    let spec = SyntheticSpec {
        n_classes: 8,
        input_dim: 16,
        hidden_dim: 32,
        samples_per_domain: 200,
        shift_strength: strength,
        ..SyntheticSpec::default()
    };
    let fit = FitConfig { epochs: 400, lr: 1.0, ..FitConfig::default() };

    let mut methods: Vec<MergeConfig> = ScoreVariant::ALL.iter().map(|&v| MergeConfig::score(v)).collect();
    methods.extend(Method::ALL.iter().filter(|&&m| m != Method::Score).map(|&m| MergeConfig::with_method(m)));

    let mut rows = Vec::new();
    for seed in 0..seeds {
        let exp = Experiment::prepare(&spec.with_seed(seed), &fit)?;
        rows.extend(exp.leave_one_out(&methods)?.iter().map(|r| ResultRow::from_eval(seed, r, false)));
    }
    print!("{}", summary_table(&rows).to_markdown());
    Ok(())
}
