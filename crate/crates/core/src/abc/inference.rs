use nalgebra::DMatrix;
use rand::Rng;

use crate::params::Param;
use crate::rng::{self, Purpose};
use crate::stats;
use crate::survey::{run_survey, SummaryKey, SummaryLayout, SummaryVector, SurveyDesign};
use crate::{Error, ModelParams, Result};

use super::parallel_map;
use super::table::ReferenceTable;

const DAYS_PER_YEAR: f64 = 365.0;

/// Present entries of `raw` in canonical order, durations in years so every
/// coordinate lies on roughly the unit interval.
pub fn normalize_summaries(raw: &SummaryVector) -> (SummaryLayout, Vec<f64>) {
    let values = raw
        .present()
        .map(|(k, v)| if k.is_duration() { v / DAYS_PER_YEAR } else { v })
        .collect();
    (raw.layout(), values)
}

fn normalized_on(raw: &SummaryVector, layout: SummaryLayout) -> Option<Vec<f64>> {
    layout
        .keys()
        .map(|k| raw.get(k).map(|v| if k.is_duration() { v / DAYS_PER_YEAR } else { v }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub seed: u64,
    pub theta_raw: ModelParams,
    pub theta_adjusted: Option<ModelParams>,
    /// Euclidean distance between normalized summaries.
    pub distance: f64,
    /// Normalized summaries of the accepted row.
    pub summaries: Vec<f64>,
}

impl PosteriorSample {
    /// The adjusted draw when available, otherwise the raw draw.
    pub fn theta(&self) -> ModelParams {
        self.theta_adjusted.unwrap_or(self.theta_raw)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub layout: SummaryLayout,
    /// Normalized observed summaries on `layout`.
    pub observed: Vec<f64>,
    pub samples: Vec<PosteriorSample>,
    /// Rows lacking one of the observed summaries.
    pub excluded: usize,
    /// Rows distances were computed for.
    pub compared: usize,
}

impl Rejection {
    /// Largest accepted distance, the induced tolerance.
    pub fn epsilon(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.distance)
    }
}

/// Keeps the `ceil(accept_fraction * rows)` rows closest to `observed`.
///
/// Distances use the summaries present in `observed`; rows missing any of
/// them are excluded and counted. Ties are broken by ascending row seed.
pub fn abc_reject(table: &ReferenceTable, observed: &SummaryVector, accept_fraction: f64) -> Result<Rejection> {
    if !(accept_fraction > 0.0 && accept_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "acceptance fraction {accept_fraction} outside (0, 1]"
        )));
    }
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let (layout, obs) = normalize_summaries(observed);
    if layout.is_empty() {
        return Err(Error::LayoutMismatch("observed summaries are empty".into()));
    }
    let mut scored = Vec::with_capacity(table.len());
    let mut excluded = 0;
    for row in &table.rows {
        match normalized_on(&row.summaries, layout) {
            Some(t) => {
                let d = t.iter().zip(&obs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                scored.push((d, row.seed, row.theta, t));
            }
            None => excluded += 1,
        }
    }
    if scored.is_empty() {
        let missing: Vec<&str> = layout
            .keys()
            .filter(|k| table.rows.iter().all(|r| r.summaries.get(*k).is_none()))
            .map(SummaryKey::name)
            .collect();
        return Err(Error::LayoutMismatch(format!(
            "no table row has all observed summaries {layout} (never present: {})",
            missing.join(", ")
        )));
    }
    let compared = scored.len();
    let keep = ((accept_fraction * compared as f64) - 1e-9).ceil().max(1.0) as usize;
    scored.sort_by(|a, b| stats::total_cmp_pair(&(a.0, a.1), &(b.0, b.1)));
    scored.truncate(keep.min(compared));
    let samples = scored
        .into_iter()
        .map(|(distance, seed, theta, summaries)| PosteriorSample {
            seed,
            theta_raw: theta,
            theta_adjusted: None,
            distance,
            summaries,
        })
        .collect();
    Ok(Rejection {
        layout,
        observed: obs,
        samples,
        excluded,
        compared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdjustOptions {
    /// Regress logit-transformed probabilities instead of raw ones.
    pub logit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adjustment {
    pub samples: Vec<PosteriorSample>,
    /// Set when the design was rank-deficient and samples are unadjusted.
    pub fallback: bool,
    /// Adjusted probabilities clipped back into [0, 1].
    pub clamped: usize,
    /// Summary columns dropped because they were constant over the sample.
    pub constant_columns: usize,
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Linear regression adjustment `theta_i + f(t_obs) - f(t_i)`, with `f` fit
/// by least squares (with intercept) on the accepted samples.
///
/// Summary columns that are constant across the sample carry no information
/// about `f` and are dropped; if the remaining design is still singular the
/// samples are returned unadjusted with `fallback` set.
pub fn regression_adjust(
    samples: &[PosteriorSample],
    observed: &[f64],
    options: AdjustOptions,
) -> Result<Adjustment> {
    let dim = observed.len();
    if samples.len() <= dim + 1 {
        return Err(Error::TooFewSamples {
            needed: dim + 1,
            got: samples.len(),
        });
    }
    if samples.iter().any(|s| s.summaries.len() != dim) {
        return Err(Error::LayoutMismatch("sample and observed dimensions differ".into()));
    }
    let columns: Vec<usize> = (0..dim)
        .filter(|&j| {
            let first = samples[0].summaries[j];
            samples.iter().any(|s| s.summaries[j] != first)
        })
        .collect();
    let k = samples.len();
    let p = columns.len() + 1;
    let mean: Vec<f64> = columns
        .iter()
        .map(|&j| samples.iter().map(|s| s.summaries[j]).sum::<f64>() / k as f64)
        .collect();
    // centered columns keep the intercept from dominating the conditioning
    let x = DMatrix::from_fn(k, p, |i, c| {
        if c == 0 {
            1.0
        } else {
            samples[i].summaries[columns[c - 1]] - mean[c - 1]
        }
    });
    let forward = |v: f64| if options.logit { logit(v) } else { v };
    let y = DMatrix::from_fn(k, Param::ALL.len(), |i, c| forward(samples[i].theta_raw.probabilities()[c]));

    let mut unadjusted = samples.to_vec();
    for s in &mut unadjusted {
        s.theta_adjusted = Some(s.theta_raw);
    }
    let fallback = Adjustment {
        samples: unadjusted,
        fallback: true,
        clamped: 0,
        constant_columns: dim - columns.len(),
    };

    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (k.max(p) as f64) * f64::EPSILON;
    if svd.rank(tol) < p {
        return Ok(fallback);
    }
    let coef = match svd.solve(&y, tol) {
        Ok(c) => c,
        Err(_) => return Ok(fallback),
    };

    let mut clamped = 0;
    let mut out = samples.to_vec();
    for s in &mut out {
        let mut adjusted = [0.0; 6];
        for (c, a) in adjusted.iter_mut().enumerate() {
            let shift: f64 = columns
                .iter()
                .enumerate()
                .map(|(r, &j)| coef[(r + 1, c)] * (observed[j] - s.summaries[j]))
                .sum();
            let v = forward(s.theta_raw.probabilities()[c]) + shift;
            let v = if options.logit { expit(v) } else { v };
            *a = if (0.0..=1.0).contains(&v) {
                v
            } else {
                clamped += 1;
                v.clamp(0.0, 1.0)
            };
        }
        s.theta_adjusted = Some(ModelParams::with_probabilities(s.theta_raw.n, adjusted));
    }
    Ok(Adjustment {
        samples: out,
        fallback: false,
        clamped,
        constant_columns: dim - columns.len(),
    })
}

/// Empirical quantiles of one parameter, on the probability scale and as an
/// expected waiting time `(1 - p) / p` in weeks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileRow {
    pub param: Param,
    pub level: f64,
    pub probability: f64,
    /// Quantile of the transformed draws; `None` for the concurrency factor.
    pub wait_weeks: Option<f64>,
}

pub fn posterior_quantiles(samples: &[ModelParams], levels: &[f64]) -> Result<Vec<QuantileRow>> {
    if samples.is_empty() {
        return Err(Error::EmptyPosterior);
    }
    let mut out = Vec::with_capacity(Param::ALL.len() * levels.len());
    for param in Param::ALL {
        let probs = stats::sorted(&samples.iter().map(|s| s.get(param)).collect::<Vec<_>>());
        let waits = param.has_waiting_time().then(|| {
            stats::sorted(
                &probs
                    .iter()
                    .map(|&p| if p > 0.0 { (1.0 - p) / p } else { f64::INFINITY })
                    .collect::<Vec<_>>(),
            )
        });
        for &level in levels {
            out.push(QuantileRow {
                param,
                level,
                probability: stats::quantile_sorted(&probs, level),
                wait_weeks: waits.as_ref().map(|w| stats::quantile_sorted(w, level)),
            });
        }
    }
    Ok(out)
}

/// Survey summaries simulated at draws picked uniformly from `samples`.
/// Replicate `r` is a pure function of `(seed, r)`.
pub fn posterior_predictive(
    samples: &[ModelParams],
    design: &SurveyDesign,
    burn_in: u32,
    replicates: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<SummaryVector>> {
    if samples.is_empty() {
        return Err(Error::EmptyPosterior);
    }
    parallel_map(workers, replicates, |r| {
        let pick = rng::stream(seed, Purpose::Predictive, r as u64).random_range(0..samples.len());
        run_survey(&samples[pick], design, burn_in, rng::child_seed(seed, r as u64))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::{TableMeta, TableRow};
    use crate::priors::PriorConfig;

    fn table_from(rows: Vec<(u64, [f64; 6], SummaryVector)>) -> ReferenceTable {
        let meta = TableMeta::new(&PriorConfig::default(), &SurveyDesign::default(), 10, 0);
        ReferenceTable {
            meta: TableMeta { rows: rows.len(), ..meta },
            rows: rows
                .into_iter()
                .map(|(seed, p, summaries)| TableRow {
                    seed,
                    theta: ModelParams::with_probabilities(100.0, p),
                    summaries,
                })
                .collect(),
        }
    }

    fn sv(paired: f64, days: f64) -> SummaryVector {
        SummaryVector::from_values([(SummaryKey::FracPaired, paired), (SummaryKey::MeanSteadyDuration, days)])
    }

    #[test]
    fn normalization_divides_durations_only() {
        let (layout, v) = normalize_summaries(&sv(0.64, 203.0));
        assert_eq!(layout.len(), 2);
        assert_eq!(v[0], 0.64);
        assert!((v[1] - 0.5562).abs() < 5e-5);
        assert_eq!(normalize_summaries(&sv(0.1, 365.0)).1[1], 1.0);
    }

    #[test]
    fn rejection_keeps_closest_with_seed_ties() {
        let p = [0.1; 6];
        let table = table_from(vec![
            (5, p, sv(0.5, 100.0)),
            (3, p, sv(0.5, 100.0)),
            (1, p, sv(0.9, 100.0)),
            (2, p, SummaryVector::from_values([(SummaryKey::FracPaired, 0.5)])),
        ]);
        let r = abc_reject(&table, &sv(0.5, 100.0), 0.5).unwrap();
        assert_eq!(r.excluded, 1);
        assert_eq!(r.compared, 3);
        let seeds: Vec<u64> = r.samples.iter().map(|s| s.seed).collect();
        assert_eq!(seeds, vec![3, 5]);
        assert_eq!(r.samples[0].distance, 0.0);
        let all = abc_reject(&table, &sv(0.5, 100.0), 1.0).unwrap();
        assert_eq!(all.samples.len(), 3);
        assert!(matches!(
            abc_reject(&table, &SummaryVector::from_values([(SummaryKey::FracRetainedNodes, 1.0)]), 0.5),
            Err(Error::LayoutMismatch(_))
        ));
        let empty = table_from(vec![]);
        assert!(matches!(abc_reject(&empty, &sv(0.5, 1.0), 0.5), Err(Error::EmptyTable)));
    }

    #[test]
    fn one_percent_of_twenty_thousand_is_two_hundred() {
        let rows = (0..20_000u64)
            .map(|i| (i, [0.1; 6], sv(i as f64 / 20_000.0, 10.0)))
            .collect();
        let r = abc_reject(&table_from(rows), &sv(0.0, 10.0), 0.01).unwrap();
        assert_eq!(r.samples.len(), 200);
    }

    fn sample(theta: [f64; 6], t: Vec<f64>) -> PosteriorSample {
        PosteriorSample {
            seed: 0,
            theta_raw: ModelParams::with_probabilities(100.0, theta),
            theta_adjusted: None,
            distance: 0.0,
            summaries: t,
        }
    }

    #[test]
    fn identical_summaries_leave_samples_unchanged() {
        let s: Vec<PosteriorSample> = (0..10)
            .map(|i| sample([0.01 * f64::from(i); 6], vec![0.3, 0.4]))
            .collect();
        let adj = regression_adjust(&s, &[0.3, 0.4], AdjustOptions::default()).unwrap();
        assert!(!adj.fallback);
        assert_eq!(adj.constant_columns, 2);
        for (a, b) in adj.samples.iter().zip(&s) {
            assert_eq!(a.theta(), b.theta_raw);
        }
    }

    #[test]
    fn too_few_samples() {
        let s = vec![sample([0.1; 6], vec![0.1, 0.2]); 3];
        assert!(matches!(
            regression_adjust(&s, &[0.1, 0.2], AdjustOptions::default()),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn collinear_summaries_fall_back() {
        let s: Vec<PosteriorSample> = (0..10)
            .map(|i| {
                let t = f64::from(i) / 10.0;
                sample([0.1; 6], vec![t, 2.0 * t])
            })
            .collect();
        let adj = regression_adjust(&s, &[0.5, 1.0], AdjustOptions::default()).unwrap();
        assert!(adj.fallback);
        assert!(adj.samples.iter().all(|x| x.theta() == x.theta_raw));
    }

    #[test]
    fn quantile_examples() {
        let one = [ModelParams::stockholm(10.0)];
        let q = posterior_quantiles(&one, &[0.025, 0.5, 0.975]).unwrap();
        for row in q.chunks(3) {
            assert!(row.iter().all(|r| r.probability == row[0].probability));
        }
        let deciles: Vec<ModelParams> = (1..=10)
            .map(|i| ModelParams::with_probabilities(10.0, [f64::from(i) / 10.0; 6]))
            .collect();
        let q = posterior_quantiles(&deciles, &[0.5]).unwrap();
        assert!((q[0].probability - 0.55).abs() < 1e-12);
        assert!(q.iter().find(|r| r.param == Param::Xi).unwrap().wait_weeks.is_none());
        assert!(matches!(posterior_quantiles(&[], &[0.5]), Err(Error::EmptyPosterior)));
    }

    #[test]
    fn predictive_seeding_and_degenerate_theta() {
        let mut theta = ModelParams::stockholm(150.0);
        theta.rho = 0.0;
        let d = SurveyDesign {
            m: 40,
            ..SurveyDesign::default()
        };
        let reps = posterior_predictive(&[theta], &d, 80, 3, 11, 1).unwrap();
        assert!(reps.iter().all(|r| r.get(SummaryKey::FracPaired) == Some(0.0)));
        let again = posterior_predictive(&[theta], &d, 80, 3, 11, 2).unwrap();
        assert_eq!(reps, again);
        assert!(posterior_predictive(&[], &d, 80, 1, 0, 1).is_err());
    }
}
