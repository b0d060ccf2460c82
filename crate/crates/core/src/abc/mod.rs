//! Rejection ABC on survey summaries.
//!
//! A [`ReferenceTable`] pairs prior draws with the summaries of a simulated
//! survey. Rejection keeps the rows closest to the observed summaries;
//! regression adjustment then corrects the accepted draws for the remaining
//! mismatch.

mod inference;
mod study;
mod table;

pub use inference::{
    abc_reject, normalize_summaries, posterior_predictive, posterior_quantiles, regression_adjust,
    AdjustOptions, Adjustment, PosteriorSample, QuantileRow, Rejection,
};
pub use study::{rmse_study, study_keys, RmseRow, StudyConfig, StudyReport};
pub use table::{
    build_lag_tables, build_reference_table, build_rows, meta_path, simulate_row, ReferenceTable, TableMeta, TableRow,
};

use rayon::prelude::*;

use crate::Result;

/// Maps `f` over `0..n` on `workers` threads; results keep index order.
pub(crate) fn parallel_map<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}
