use contactnet::abc::posterior_quantiles;
use contactnet::params::Param;
use contactnet::priors::{prior_density, sample_prior, PriorConfig};
use contactnet::rng::{self, Purpose};
use contactnet::ModelParams;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn draws_match_the_density() {
    let prior = PriorConfig::default();
    let mut rng = rng::stream(1, Purpose::Prior, 0);
    let draws: Vec<ModelParams> = (0..100_000).map(|_| sample_prior(&prior, &mut rng)).collect();
    let bins = 40;
    for p in Param::ALL {
        let shape = prior.shape(p);
        // bins of equal width over the bulk of the prior, tails pooled
        let (lo, hi) = (shape.quantile(0.001), shape.quantile(0.999));
        let width = (hi - lo) / bins as f64;
        let mut observed = vec![0.0; bins + 2];
        for d in &draws {
            let x = d.get(p);
            let i = if x < lo {
                0
            } else if x >= hi {
                bins + 1
            } else {
                1 + (((x - lo) / width) as usize).min(bins - 1)
            };
            observed[i] += 1.0;
        }
        // expected mass per bin from the density, by Simpson's rule
        let mass = |a: f64, b: f64| {
            let steps = 64;
            let h = (b - a) / steps as f64;
            let f = |x: f64| shape.density(x);
            let mut sum = f(a) + f(b);
            for k in 1..steps {
                sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            sum * h / 3.0
        };
        let mut expected = vec![shape.cdf(lo)];
        expected.extend((0..bins).map(|i| mass(lo + i as f64 * width, lo + (i + 1) as f64 * width)));
        expected.push(1.0 - shape.cdf(hi));
        let n = draws.len() as f64;
        let chi2: f64 = observed
            .iter()
            .zip(&expected)
            .map(|(o, e)| (o - n * e).powi(2) / (n * e))
            .sum();
        let p_value = 1.0 - ChiSquared::new((bins + 1) as f64).unwrap().cdf(chi2);
        assert!(p_value > 0.01, "{}: chi2 {chi2:.1}, p {p_value:.4}", p.name());
    }
}

#[test]
fn joint_density_is_the_product() {
    let prior = PriorConfig::default();
    let theta = prior.mean();
    let product: f64 = Param::ALL.iter().map(|&p| prior.shape(p).density(theta.get(p))).product();
    assert!((prior_density(&prior, &theta) - product).abs() <= 1e-9 * product);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn waiting_time_median_is_the_transformed_median(seed in any::<u64>(), a in 1.0f64..5.0, b in 1.0f64..200.0) {
        let mut prior = PriorConfig::default();
        for p in Param::ALL {
            prior.set_shape(p, contactnet::priors::BetaShape { a, b });
        }
        let mut rng = rng::stream(seed, Purpose::Prior, 0);
        // odd count, so the median is an order statistic
        let draws: Vec<ModelParams> = (0..1001).map(|_| sample_prior(&prior, &mut rng)).collect();
        for row in posterior_quantiles(&draws, &[0.5]).unwrap() {
            if let Some(w) = row.wait_weeks {
                let m = row.probability;
                prop_assert!((w - (1.0 - m) / m).abs() <= 1e-9 * w.max(1.0));
            }
        }
    }
}
