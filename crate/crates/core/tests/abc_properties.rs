use std::sync::OnceLock;

use contactnet::abc::{
    abc_reject, build_reference_table, regression_adjust, simulate_row, AdjustOptions, PosteriorSample, ReferenceTable,
};
use contactnet::priors::{sample_prior, PriorConfig};
use contactnet::rng::{self, Purpose};
use contactnet::stats;
use contactnet::survey::{run_survey, SummaryKey, SummaryVector, SurveyDesign};
use contactnet::ModelParams;
use proptest::prelude::*;

const BURN_IN: u32 = 300;

fn prior() -> PriorConfig {
    PriorConfig {
        n_fixed: 300.0,
        ..PriorConfig::default()
    }
}

fn design() -> SurveyDesign {
    SurveyDesign {
        m: 100,
        ..SurveyDesign::default()
    }
}

fn table() -> &'static ReferenceTable {
    static TABLE: OnceLock<ReferenceTable> = OnceLock::new();
    TABLE.get_or_init(|| build_reference_table(&prior(), &design(), 3000, BURN_IN, 77, 1).unwrap())
}

/// Prior-predictive test items from seeds disjoint from the table's.
fn test_items(count: u64) -> Vec<(ModelParams, SummaryVector)> {
    (0..count)
        .map(|i| {
            let theta = sample_prior(&prior(), &mut rng::stream(991, Purpose::TestSet, i));
            let s = run_survey(&theta, &design(), BURN_IN, rng::child_seed(992, i)).unwrap();
            (theta, s)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn shrinking_acceptance_never_widens_tolerance(
        paired in 0.0f64..1.0,
        concurrent in 0.0f64..0.3,
        days in 0.0f64..364.0,
        small in 0.001f64..0.2,
        factor in 1.0f64..5.0,
    ) {
        let observed = SummaryVector::from_values([
            (SummaryKey::FracPaired, paired),
            (SummaryKey::FracConcurrent, concurrent),
            (SummaryKey::MeanSteadyDuration, days),
        ]);
        let narrow = abc_reject(table(), &observed, small).unwrap();
        let wide = abc_reject(table(), &observed, (small * factor).min(1.0)).unwrap();
        prop_assert!(narrow.epsilon() <= wide.epsilon());
        prop_assert!(narrow.samples.iter().all(|s| s.distance >= 0.0));
    }

    #[test]
    fn adjustment_is_idempotent_on_a_perfect_fit(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = rng::stream(seed, Purpose::Predictive, 0);
        use rand::Rng;
        let coef: Vec<[f64; 6]> = (0..dim).map(|_| std::array::from_fn(|_| rng.random_range(-0.1..0.1))).collect();
        let observed: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
        let samples: Vec<PosteriorSample> = (0..40)
            .map(|i| {
                let s: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
                let theta = std::array::from_fn(|c| 0.5 + (0..dim).map(|j| coef[j][c] * s[j]).sum::<f64>());
                PosteriorSample {
                    seed: i,
                    theta_raw: ModelParams::with_probabilities(100.0, theta),
                    theta_adjusted: None,
                    distance: 0.0,
                    summaries: s,
                }
            })
            .collect();
        let once = regression_adjust(&samples, &observed, AdjustOptions::default()).unwrap();
        let again_input: Vec<PosteriorSample> = once
            .samples
            .iter()
            .map(|s| PosteriorSample { theta_raw: s.theta(), theta_adjusted: None, ..s.clone() })
            .collect();
        let twice = regression_adjust(&again_input, &observed, AdjustOptions::default()).unwrap();
        for (a, b) in once.samples.iter().zip(&twice.samples) {
            for (x, y) in a.theta().probabilities().iter().zip(b.theta().probabilities()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn rho_posterior_is_narrower_than_its_prior() {
    let prior_sd = prior().rho.variance().sqrt();
    let items = test_items(100);
    let narrower = items
        .iter()
        .filter(|(_, s)| {
            let r = abc_reject(table(), s, 0.03).unwrap();
            let rho: Vec<f64> = r.samples.iter().map(|x| x.theta().rho).collect();
            stats::std_dev(&rho) < prior_sd
        })
        .count();
    assert!(narrower >= 95, "{narrower} of 100");
}

#[test]
fn mu_posterior_matches_prior_for_cross_sectional_summaries() {
    let table = table();
    let table_mu: Vec<f64> = table.rows.iter().map(|r| r.theta.mu).collect();
    let items = test_items(100);
    let same = items
        .iter()
        .filter(|(_, s)| {
            let r = abc_reject(table, s, 0.03).unwrap();
            let mu: Vec<f64> = r.samples.iter().map(|x| x.theta().mu).collect();
            stats::ks_two_sample(&mu, &table_mu).1 > 0.01
        })
        .count();
    assert!(same >= 80, "{same} of 100");
}

#[test]
fn rows_regenerate_bit_exactly() {
    let table = table();
    for row in table.rows.iter().step_by(500) {
        assert_eq!(&simulate_row(&table.meta, row.seed).unwrap(), row);
    }
}
