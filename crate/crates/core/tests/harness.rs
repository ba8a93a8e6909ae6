use subspace_merge::harness::{summary_table, EvalResult, Experiment, FitConfig, ResultRow, SyntheticSpec, EXPERT, ZERO_SHOT};
use subspace_merge::merge::{MergeConfig, Method, ScoreVariant};

fn all_methods() -> Vec<MergeConfig> {
    let mut methods: Vec<MergeConfig> = ScoreVariant::ALL.iter().map(|&v| MergeConfig::score(v)).collect();
    methods.extend(Method::ALL.iter().filter(|&&m| m != Method::Score).map(|&m| MergeConfig::with_method(m)));
    methods
}

fn cell<'a>(results: &'a [EvalResult], target: &str, label: &str) -> &'a EvalResult {
    results.iter().find(|r| r.target_domain == target && r.label() == label).unwrap()
}

fn is_merge(label: &str) -> bool {
    ![ZERO_SHOT, EXPERT, "ensemble"].contains(&label)
}

#[test]
fn unshifted_sources_do_not_hurt() {
    let spec = SyntheticSpec { n_domains: 3, n_classes: 3, shift_strength: 0.0, samples_per_domain: 300, ..SyntheticSpec::default() };
    let fit = FitConfig { pretrain_epochs: 0, epochs: 300, ..FitConfig::default() };
    for seed in 0..3 {
        let exp = Experiment::prepare(&spec.with_seed(seed), &fit).unwrap();
        let results = exp.leave_one_out(&all_methods()).unwrap();
        // offdiag_only drops the shared diagonal by design, so it is not held to this bound
        for r in results.iter().filter(|r| is_merge(&r.label()) && r.label() != "score/offdiag_only") {
            let zs = cell(&results, &r.target_domain, ZERO_SHOT).accuracy;
            assert!(r.accuracy >= zs, "seed {seed} {} on {}: {} < zero-shot {zs}", r.label(), r.target_domain, r.accuracy);
        }
    }
}

#[test]
fn expert_bounds_merges_and_merging_beats_nothing() {
    let spec = SyntheticSpec { n_classes: 8, input_dim: 16, hidden_dim: 32, samples_per_domain: 200, shift_strength: 0.5, ..SyntheticSpec::default() };
    let fit = FitConfig { epochs: 400, lr: 1.0, ..FitConfig::default() };
    let mut rows = Vec::new();
    for seed in 0..3 {
        let exp = Experiment::prepare(&spec.with_seed(seed), &fit).unwrap();
        let results = exp.leave_one_out(&all_methods()).unwrap();
        for r in results.iter().filter(|r| is_merge(&r.label())) {
            let expert = cell(&results, &r.target_domain, EXPERT).accuracy;
            assert!(expert >= r.accuracy, "seed {seed} {} on {}: {} > expert {expert}", r.label(), r.target_domain, r.accuracy);
        }
        rows.extend(results.iter().map(|r| ResultRow::from_eval(seed, r, false)));
    }
    let table = summary_table(&rows);
    let best = table.rows.iter().filter(|(l, _, _)| is_merge(l)).map(|(_, _, avg)| *avg).fold(f64::MIN, f64::max);
    assert!(best >= table.mean_of(ZERO_SHOT).unwrap());
}
