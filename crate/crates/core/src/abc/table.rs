use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::params::Param;
use crate::priors::{sample_prior, PriorConfig};
use crate::rng::{self, Purpose};
use crate::survey::{fmt_f64, run_survey, run_survey_lags, SummaryKey, SummaryVector, SurveyDesign};
use crate::{Error, ModelParams, Result};

use super::parallel_map;

const FORMAT_VERSION: u32 = 1;
const ABSENT: &str = "NA";

/// Everything needed to regenerate a table row from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub format_version: u32,
    pub master_seed: u64,
    pub burn_in: u32,
    pub rows: usize,
    pub prior_hash: String,
    pub design: SurveyDesign,
    pub prior: PriorConfig,
}

impl TableMeta {
    pub fn new(prior: &PriorConfig, design: &SurveyDesign, burn_in: u32, master_seed: u64) -> Self {
        TableMeta {
            format_version: FORMAT_VERSION,
            master_seed,
            burn_in,
            rows: 0,
            prior_hash: prior.hash(),
            design: *design,
            prior: *prior,
        }
    }

    /// Same generating process, ignoring the row count.
    pub fn compatible(&self, other: &TableMeta) -> bool {
        TableMeta { rows: 0, ..self.clone() } == TableMeta { rows: 0, ..other.clone() }
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("metadata serializes")
    }

    pub fn from_text(text: &str) -> std::result::Result<TableMeta, String> {
        let meta: TableMeta = toml::from_str(text).map_err(|e| e.to_string())?;
        if meta.format_version != FORMAT_VERSION {
            return Err(format!("unsupported table format {}", meta.format_version));
        }
        if meta.prior_hash != meta.prior.hash() {
            return Err("prior hash does not match prior".into());
        }
        Ok(meta)
    }
}

/// One prior draw with the summaries of its simulated survey (natural units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub seed: u64,
    pub theta: ModelParams,
    pub summaries: SummaryVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub meta: TableMeta,
    pub rows: Vec<TableRow>,
}

/// Seed of row `index` of a table generated under `master`.
pub(crate) fn row_seed(master: u64, index: u64) -> u64 {
    rng::child_seed(master, index)
}

fn draw_theta(prior: &PriorConfig, seed: u64) -> ModelParams {
    sample_prior(prior, &mut rng::stream(seed, Purpose::Prior, 0))
}

/// Regenerates a row from its seed.
pub fn simulate_row(meta: &TableMeta, seed: u64) -> Result<TableRow> {
    let theta = draw_theta(&meta.prior, seed);
    let summaries = run_survey(&theta, &meta.design, meta.burn_in, seed).map_err(|e| Error::RowFailed {
        seed,
        source: Box::new(e),
    })?;
    Ok(TableRow { seed, theta, summaries })
}

/// Rows `range` of the table described by `meta`.
pub fn build_rows(meta: &TableMeta, range: std::ops::Range<usize>, workers: usize) -> Result<Vec<TableRow>> {
    let start = range.start;
    parallel_map(workers, range.len(), |i| {
        simulate_row(meta, row_seed(meta.master_seed, (start + i) as u64))
    })
}

pub fn build_reference_table(
    prior: &PriorConfig,
    design: &SurveyDesign,
    rows: usize,
    burn_in: u32,
    master_seed: u64,
    workers: usize,
) -> Result<ReferenceTable> {
    if rows == 0 {
        return Err(Error::InvalidConfig("reference table needs at least one row".into()));
    }
    prior.validate()?;
    design.validate()?;
    let mut meta = TableMeta::new(prior, design, burn_in, master_seed);
    let rows = build_rows(&meta, 0..rows, workers)?;
    meta.rows = rows.len();
    Ok(ReferenceTable { meta, rows })
}

/// One table per lag, sharing prior draws and trajectories. Table `k` is
/// identical to `build_reference_table` with `design.with_lag(lags[k])`.
pub fn build_lag_tables(
    prior: &PriorConfig,
    design: &SurveyDesign,
    lags: &[u32],
    rows: usize,
    burn_in: u32,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<ReferenceTable>> {
    prior.validate()?;
    design.validate()?;
    let seeds: Vec<u64> = (0..rows as u64).map(|i| row_seed(master_seed, i)).collect();
    let per_seed = lag_rows(prior, design, lags, burn_in, &seeds, workers)?;
    Ok(lags
        .iter()
        .enumerate()
        .map(|(k, &lag)| {
            let mut meta = TableMeta::new(prior, &design.with_lag(lag), burn_in, master_seed);
            meta.rows = rows;
            ReferenceTable {
                meta,
                rows: per_seed.iter().map(|r| r[k]).collect(),
            }
        })
        .collect())
}

/// For each seed, the rows it produces at every lag.
pub(crate) fn lag_rows(
    prior: &PriorConfig,
    design: &SurveyDesign,
    lags: &[u32],
    burn_in: u32,
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<Vec<TableRow>>> {
    parallel_map(workers, seeds.len(), |i| {
        let seed = seeds[i];
        let theta = draw_theta(prior, seed);
        let surveys = run_survey_lags(&theta, design, lags, burn_in, seed).map_err(|e| Error::RowFailed {
            seed,
            source: Box::new(e),
        })?;
        Ok(surveys
            .into_iter()
            .map(|summaries| TableRow { seed, theta, summaries })
            .collect())
    })
}

fn header() -> Vec<&'static str> {
    let mut h = vec!["seed", "n"];
    h.extend(Param::ALL.map(Param::name));
    h.extend(SummaryKey::ALL.map(SummaryKey::name));
    h
}

fn record(row: &TableRow) -> Vec<String> {
    let mut r = vec![row.seed.to_string(), fmt_f64(row.theta.n)];
    r.extend(row.theta.probabilities().map(fmt_f64));
    r.extend(
        SummaryKey::ALL.map(|k| row.summaries.get(k).map_or_else(|| ABSENT.to_string(), fmt_f64)),
    );
    r
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<TableRow, String> {
    if rec.len() != header().len() {
        return Err(format!("expected {} fields, found {}", header().len(), rec.len()));
    }
    let num = |i: usize| -> std::result::Result<f64, String> {
        rec[i].parse::<f64>().map_err(|e| format!("field {}: {e}", header()[i]))
    };
    let seed = rec[0].parse::<u64>().map_err(|e| format!("seed: {e}"))?;
    let mut probs = [0.0; 6];
    for (j, p) in probs.iter_mut().enumerate() {
        *p = num(2 + j)?;
    }
    let theta = ModelParams::with_probabilities(num(1)?, probs);
    let mut summaries = SummaryVector::default();
    for (j, k) in SummaryKey::ALL.into_iter().enumerate() {
        let i = 8 + j;
        if &rec[i] != ABSENT {
            summaries.set(k, num(i)?, 1);
        }
    }
    Ok(TableRow { seed, theta, summaries })
}

/// Path of the metadata record that accompanies `table`.
pub fn meta_path(table: &Path) -> PathBuf {
    let mut s = table.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

impl ReferenceTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows as delimited text with a header line.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header()).expect("in-memory write");
        for row in &self.rows {
            w.write_record(record(row)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii output")
    }

    pub fn rows_from_csv(text: &str) -> std::result::Result<Vec<TableRow>, String> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let found: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
        if found != header() {
            return Err("unexpected reference table header".into());
        }
        r.records()
            .enumerate()
            .map(|(i, rec)| parse_row(&rec.map_err(|e| e.to_string())?).map_err(|e| format!("row {}: {e}", i + 1)))
            .collect()
    }

    /// Writes the table and its metadata sidecar atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_csv().as_bytes())?;
        crate::io::write_atomic(&meta_path(path), self.meta.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<ReferenceTable> {
        let mp = meta_path(path);
        let meta_text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        let meta = TableMeta::from_text(&meta_text).map_err(|m| Error::parse(&mp, m))?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rows = ReferenceTable::rows_from_csv(&text).map_err(|m| Error::parse(path, m))?;
        if rows.len() != meta.rows {
            return Err(Error::parse(
                path,
                format!("metadata records {} rows, file holds {}", meta.rows, rows.len()),
            ));
        }
        Ok(ReferenceTable { meta, rows })
    }

    /// Appends rows to an existing table file, then rewrites the metadata.
    /// The CSV is only ever extended, so an interrupted append leaves the
    /// metadata pointing at the last complete chunk.
    pub fn append(path: &Path, meta: &TableMeta, rows: &[TableRow]) -> Result<TableMeta> {
        let mp = meta_path(path);
        let on_disk = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        let mut current = TableMeta::from_text(&on_disk).map_err(|m| Error::parse(&mp, m))?;
        if !current.compatible(meta) {
            return Err(Error::InvalidConfig(format!(
                "{} was generated with different settings",
                path.display()
            )));
        }
        truncate_to_rows(path, current.rows)?;
        let mut file = std::fs::OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for row in rows {
            w.write_record(record(row)).expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory write");
        file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        file.sync_all().map_err(|e| Error::io(path, e))?;
        current.rows += rows.len();
        crate::io::write_atomic(&mp, current.to_text().as_bytes())?;
        Ok(current)
    }
}

/// Drops any partial chunk left after the first `rows` data lines.
fn truncate_to_rows(path: &Path, rows: usize) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut keep = 0u64;
    let mut line = String::new();
    for _ in 0..=rows {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if read == 0 || !line.ends_with('\n') {
            return Err(Error::parse(path, format!("fewer than {rows} complete rows")));
        }
        keep += read as u64;
    }
    let file = std::fs::OpenOptions::new()
        .write(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.set_len(keep).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (PriorConfig, SurveyDesign) {
        let prior = PriorConfig {
            n_fixed: 120.0,
            ..PriorConfig::default()
        };
        let design = SurveyDesign {
            m: 30,
            ..SurveyDesign::default()
        };
        (prior, design)
    }

    #[test]
    fn rows_are_reproducible_and_chunkable() {
        let (prior, design) = small();
        let full = build_reference_table(&prior, &design, 6, 60, 5, 1).unwrap();
        let again = build_reference_table(&prior, &design, 6, 60, 5, 2).unwrap();
        assert_eq!(full, again);
        let meta = full.meta.clone();
        let mut halves = build_rows(&meta, 3..6, 1).unwrap();
        halves.extend(build_rows(&meta, 0..3, 1).unwrap());
        halves.sort_by_key(|r| r.seed);
        let mut rows = full.rows.clone();
        rows.sort_by_key(|r| r.seed);
        assert_eq!(halves, rows);
        let regen = simulate_row(&meta, full.rows[4].seed).unwrap();
        assert_eq!(regen, full.rows[4]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let (prior, design) = small();
        let table = build_reference_table(&prior, &design, 4, 60, 9, 1).unwrap();
        let rows = ReferenceTable::rows_from_csv(&table.to_csv()).unwrap();
        for (a, b) in rows.iter().zip(&table.rows) {
            assert_eq!(a.theta, b.theta);
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.summaries.layout(), b.summaries.layout());
            for (k, v) in b.summaries.present() {
                assert_eq!(a.summaries.get(k).unwrap().to_bits(), v.to_bits());
            }
        }
        let meta = TableMeta::from_text(&table.meta.to_text()).unwrap();
        assert_eq!(meta, table.meta);
    }

    #[test]
    fn append_extends_and_checks_settings() {
        let (prior, design) = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let full = build_reference_table(&prior, &design, 4, 60, 1, 1).unwrap();
        let mut first = full.clone();
        first.rows.truncate(2);
        first.meta.rows = 2;
        first.save(&path).unwrap();
        let rest = build_rows(&full.meta, 2..4, 1).unwrap();
        ReferenceTable::append(&path, &full.meta, &rest).unwrap();
        let back = ReferenceTable::load(&path).unwrap();
        assert_eq!(back.meta, full.meta);
        assert_eq!(back.to_csv(), full.to_csv());
        let other = TableMeta::new(&prior, &design, 61, 1);
        assert!(ReferenceTable::append(&path, &other, &rest).is_err());
    }

    #[test]
    fn lag_tables_match_separate_tables() {
        let (prior, design) = small();
        let prior = PriorConfig {
            mu: crate::priors::BetaShape::new(2.0, 100.0),
            ..prior
        };
        let lags = [0, 5];
        let shared = build_lag_tables(&prior, &design, &lags, 3, 60, 2, 1).unwrap();
        for (k, &lag) in lags.iter().enumerate() {
            let alone = build_reference_table(&prior, &design.with_lag(lag), 3, 60, 2, 1).unwrap();
            assert_eq!(shared[k], alone);
        }
    }
}
