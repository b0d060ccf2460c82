use rand::Rng;

use crate::params::Param;
use crate::priors::PriorConfig;
use crate::rng::{self, Purpose};
use crate::stats;
use crate::survey::{SummaryKey, SummaryLayout, SummarySet, SurveyDesign};
use crate::{Error, Result};

use super::inference::{abc_reject, regression_adjust, AdjustOptions};
use super::table::{lag_rows, row_seed, ReferenceTable, TableMeta};

/// Settings of the survey-lag study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub prior: PriorConfig,
    /// Respondents and recall windows; `waves` and `lag` are set per lag.
    pub design: SurveyDesign,
    pub lags: Vec<u32>,
    pub sets: Vec<SummarySet>,
    pub table_rows: usize,
    pub test_size: usize,
    pub accept_fraction: f64,
    pub adjust: bool,
    pub burn_in: u32,
    pub master_seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseRow {
    pub set: SummarySet,
    pub lag: u32,
    pub param: Param,
    pub rmse: f64,
    pub se: f64,
    /// Test items that entered the estimate.
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<RmseRow>,
    /// `(set, lag, count)` of test items skipped because their survey lacked
    /// a summary the design should produce.
    pub skipped: Vec<(SummarySet, u32, usize)>,
    /// `(set, lag, count)` of regression fits that fell back to raw draws.
    pub fallbacks: Vec<(SummarySet, u32, usize)>,
}

impl StudyReport {
    pub fn get(&self, set: SummarySet, lag: u32, param: Param) -> Option<&RmseRow> {
        self.rows
            .iter()
            .find(|r| r.set == set && r.lag == lag && r.param == param)
    }
}

/// Summaries a design with this lag can produce within `set`.
fn effective_layout(set: SummarySet, lag: u32) -> SummaryLayout {
    let layout = set.layout();
    if lag == 0 {
        SummaryLayout::from_keys(layout.keys().filter(|k| !k.is_longitudinal()))
    } else {
        layout
    }
}

fn test_seed(master: u64, index: usize) -> u64 {
    rng::stream(master, Purpose::TestSet, index as u64).random()
}

/// RMSE of posterior-mean estimates over a prior-predictive test set, per
/// summary set, lag and parameter.
///
/// Reference table and test set are simulated once; each seed's trajectory
/// is surveyed at every lag.
pub fn rmse_study(config: &StudyConfig) -> Result<StudyReport> {
    if config.lags.is_empty() || config.sets.is_empty() {
        return Err(Error::InvalidConfig("study needs at least one lag and one summary set".into()));
    }
    if config.table_rows == 0 || config.test_size == 0 {
        return Err(Error::InvalidConfig("study needs a non-empty table and test set".into()));
    }
    let table_seeds: Vec<u64> = (0..config.table_rows as u64)
        .map(|i| row_seed(config.master_seed, i))
        .collect();
    let test_seeds: Vec<u64> = (0..config.test_size).map(|i| test_seed(config.master_seed, i)).collect();
    let run = |seeds: &[u64]| {
        lag_rows(
            &config.prior,
            &config.design,
            &config.lags,
            config.burn_in,
            seeds,
            config.workers,
        )
    };
    let table_rows = run(&table_seeds)?;
    let test_rows = run(&test_seeds)?;

    let mut report = StudyReport {
        rows: Vec::new(),
        skipped: Vec::new(),
        fallbacks: Vec::new(),
    };
    for (k, &lag) in config.lags.iter().enumerate() {
        let mut meta = TableMeta::new(&config.prior, &config.design.with_lag(lag), config.burn_in, config.master_seed);
        meta.rows = table_rows.len();
        let table = ReferenceTable {
            meta,
            rows: table_rows.iter().map(|r| r[k]).collect(),
        };
        for &set in &config.sets {
            let layout = effective_layout(set, lag);
            let mut errors: Vec<Vec<f64>> = vec![Vec::new(); Param::ALL.len()];
            let (mut skipped, mut fallbacks) = (0, 0);
            for item in &test_rows {
                let truth = item[k].theta;
                let observed = item[k].summaries.restricted(layout);
                if observed.layout() != layout {
                    skipped += 1;
                    continue;
                }
                let rejection = match abc_reject(&table, &observed, config.accept_fraction) {
                    Ok(r) => r,
                    Err(Error::LayoutMismatch(_)) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let samples = if config.adjust {
                    match regression_adjust(&rejection.samples, &rejection.observed, AdjustOptions::default()) {
                        Ok(adj) => {
                            fallbacks += usize::from(adj.fallback);
                            adj.samples
                        }
                        Err(Error::TooFewSamples { .. }) => {
                            fallbacks += 1;
                            rejection.samples
                        }
                        Err(e) => return Err(e),
                    }
                } else {
                    rejection.samples
                };
                for p in Param::ALL {
                    let est = stats::mean(&samples.iter().map(|s| s.theta().get(p)).collect::<Vec<_>>());
                    errors[p.index()].push(est - truth.get(p));
                }
            }
            for p in Param::ALL {
                let e = &errors[p.index()];
                let (rmse, se) = if e.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    stats::rmse_with_se(e)
                };
                report.rows.push(RmseRow {
                    set,
                    lag,
                    param: p,
                    rmse,
                    se,
                    items: e.len(),
                });
            }
            report.skipped.push((set, lag, skipped));
            report.fallbacks.push((set, lag, fallbacks));
        }
    }
    Ok(report)
}

/// Keys of a summary set that a design with `lag` can produce.
pub fn study_keys(set: SummarySet, lag: u32) -> Vec<SummaryKey> {
    effective_layout(set, lag).keys().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_zero_drops_retention() {
        assert_eq!(study_keys(SummarySet::Longitudinal, 0).len(), 4);
        assert_eq!(study_keys(SummarySet::Longitudinal, 4).len(), 6);
        assert_eq!(study_keys(SummarySet::Tlfb, 0).len(), 5);
    }

    #[test]
    fn tiny_study_runs() {
        let config = StudyConfig {
            prior: PriorConfig {
                n_fixed: 100.0,
                ..PriorConfig::default()
            },
            design: SurveyDesign {
                m: 30,
                ..SurveyDesign::default()
            },
            lags: vec![0, 3],
            sets: SummarySet::ALL.to_vec(),
            table_rows: 30,
            test_size: 3,
            accept_fraction: 0.5,
            adjust: false,
            burn_in: 60,
            master_seed: 1,
            workers: 1,
        };
        let report = rmse_study(&config).unwrap();
        assert_eq!(report.rows.len(), 2 * 3 * 6);
        assert!(report.rows.iter().all(|r| r.items + 3 >= 3));
        let again = rmse_study(&StudyConfig { workers: 2, ..config }).unwrap();
        assert_eq!(report, again);
    }
}
