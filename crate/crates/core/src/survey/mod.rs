//! Virtual survey instruments applied to simulated populations.
//!
//! Respondents are sampled uniformly from the population at the first wave
//! and followed (closed cohort) through later waves. At each wave the
//! cross-sectional summaries are computed from the current network and the
//! recall window of the event log; between consecutive waves node and edge
//! retention are measured.

mod summary;

use std::collections::{HashMap, HashSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use summary::{SummaryKey, SummaryLayout, SummarySet, SummaryVector, DAYS_PER_WEEK};
pub(crate) use summary::fmt_f64;

use crate::rng::{self, Purpose, SimRng};
use crate::sim::{EventLog, Network, NodeId, Simulator, SteadyEdge};
use crate::{Error, ModelParams, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurveyDesign {
    /// Respondents sampled at the first wave.
    pub m: usize,
    pub waves: u32,
    /// Weeks between consecutive waves.
    pub lag: u32,
    /// Timeline follow-back recall window in weeks.
    pub tlfb_window: u32,
    /// Weeks covered by the "casual contact recently?" question.
    pub casual_recall: u32,
    /// Per-wave probability that a remaining respondent stops participating.
    pub dropout: f64,
    /// Where reported steady-relationship durations start.
    pub duration_origin: DurationOrigin,
}

/// Start of a reported steady-relationship duration. Either way durations
/// end at dissolution or at the survey and are capped at the recall window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurationOrigin {
    /// The later of formation and the window start (left truncation).
    #[default]
    Window,
    /// Formation, even when it precedes the window.
    Formation,
}

impl std::str::FromStr for DurationOrigin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => Ok(DurationOrigin::Window),
            "formation" => Ok(DurationOrigin::Formation),
            _ => Err(Error::InvalidConfig(format!("unknown duration origin {s:?}"))),
        }
    }
}

impl Default for SurveyDesign {
    fn default() -> Self {
        SurveyDesign {
            m: 403,
            waves: 1,
            lag: 0,
            tlfb_window: 52,
            casual_recall: 1,
            dropout: 0.0,
            duration_origin: DurationOrigin::Window,
        }
    }
}

impl SurveyDesign {
    /// Two waves `lag` weeks apart, or a single wave when `lag` is zero.
    pub fn with_lag(self, lag: u32) -> Self {
        SurveyDesign {
            waves: if lag == 0 { 1 } else { 2 },
            lag,
            ..self
        }
    }

    /// Event-log retention needed to answer the recall questions.
    pub fn required_retention(&self) -> u32 {
        self.tlfb_window.max(self.casual_recall).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.m < 1 {
            return bad("survey needs at least one respondent");
        }
        if self.waves < 1 {
            return bad("survey needs at least one wave");
        }
        if self.waves > 1 && self.lag < 1 {
            return bad("lag between waves must be at least one week");
        }
        if self.tlfb_window < 1 || self.casual_recall < 1 {
            return bad("recall windows must cover at least one week");
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return bad("dropout must be a probability");
        }
        Ok(())
    }
}

/// Uniform sample of `m` distinct nodes, returned in ascending order.
pub fn sample_cohort<R: Rng + ?Sized>(state: &Network, m: usize, rng: &mut R) -> Result<Vec<NodeId>> {
    if m > state.len() {
        return Err(Error::CohortTooLarge {
            requested: m,
            available: state.len(),
        });
    }
    let nodes = state.nodes();
    let mut cohort: Vec<NodeId> = index::sample(rng, nodes.len(), m)
        .into_iter()
        .map(|i| nodes[i])
        .collect();
    cohort.sort_unstable();
    Ok(cohort)
}

/// Cross-sectional summaries for `cohort` at the network's current step.
///
/// * durations: every steady relationship involving a cohort member that was
///   active during the recall window contributes its length inside the
///   window (from the window start or from formation, see
///   [`DurationOrigin`], censored at the survey and capped at the window);
/// * casual gaps: window length divided by the respondent's number of casual
///   contacts in the window, averaged over respondents with at least one
///   contact, grouped by steady status at the survey;
/// * last-week fractions: share of singles (partnered) with a casual
///   contact in the last `casual_recall` weeks.
pub fn cross_sectional_summaries(
    state: &Network,
    log: &EventLog,
    cohort: &[NodeId],
    design: &SurveyDesign,
) -> Result<SummaryVector> {
    let t = state.step();
    let window = design.tlfb_window;
    let window_start = t.saturating_sub(window);
    if log.retention() < design.required_retention() {
        return Err(Error::InvalidConfig(format!(
            "event log keeps {} weeks of casual history, survey needs {}",
            log.retention(),
            design.required_retention()
        )));
    }
    if log.record_from() > window_start {
        return Err(Error::InvalidConfig(format!(
            "event log starts at step {}, recall window at {window_start}",
            log.record_from()
        )));
    }

    let mut out = SummaryVector::default();
    let position: HashMap<NodeId, usize> = cohort.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut degree = Vec::with_capacity(cohort.len());
    for &id in cohort {
        degree.push(state.degree(id).ok_or_else(|| {
            Error::InvalidConfig(format!("respondent {id} is not in the population"))
        })?);
    }
    let m = cohort.len() as u64;
    if m > 0 {
        let paired = degree.iter().filter(|&&k| k >= 1).count() as f64;
        let concurrent = degree.iter().filter(|&&k| k >= 2).count() as f64;
        out.set(SummaryKey::FracPaired, paired / m as f64, m);
        out.set(SummaryKey::FracConcurrent, concurrent / m as f64, m);
    }

    let involves = |e: &SteadyEdge| position.contains_key(&e.a) || position.contains_key(&e.b);
    let reported = |e: &SteadyEdge, end: u32| {
        let len = match design.duration_origin {
            DurationOrigin::Window => end - e.formed_at.max(window_start),
            DurationOrigin::Formation => end - e.formed_at,
        };
        u64::from(len.min(window))
    };
    let mut total_len = 0u64;
    let mut relationships = 0u64;
    for e in state.steady_edges().iter().filter(|e| involves(e)) {
        total_len += reported(e, t);
        relationships += 1;
    }
    for d in log.dissolved() {
        if d.dissolved_at > window_start && d.dissolved_at <= t && involves(&d.edge) {
            total_len += reported(&d.edge, d.dissolved_at);
            relationships += 1;
        }
    }
    if relationships > 0 {
        let mean_weeks = total_len as f64 / relationships as f64;
        out.set(SummaryKey::MeanSteadyDuration, mean_weeks * DAYS_PER_WEEK, relationships);
    }

    let recall_start = t.saturating_sub(design.casual_recall);
    let mut contacts = vec![0u32; cohort.len()];
    let mut recent = vec![false; cohort.len()];
    for step in log.casual_history().filter(|c| c.step > window_start && c.step <= t) {
        let is_recent = step.step > recall_start;
        for &(a, b) in &step.pairs {
            for id in [a, b] {
                if let Some(&i) = position.get(&id) {
                    contacts[i] += 1;
                    recent[i] |= is_recent;
                }
            }
        }
    }
    let window_days = f64::from(window) * DAYS_PER_WEEK;
    for (partnered, gap_key, recent_key) in [
        (false, SummaryKey::MeanCasualGapSingle, SummaryKey::FracSingleCasualLastweek),
        (true, SummaryKey::MeanCasualGapPaired, SummaryKey::FracPairedCasualLastweek),
    ] {
        let group: Vec<usize> = (0..cohort.len()).filter(|&i| (degree[i] > 0) == partnered).collect();
        if group.is_empty() {
            continue;
        }
        let with_recent = group.iter().filter(|&&i| recent[i]).count();
        out.set(recent_key, with_recent as f64 / group.len() as f64, group.len() as u64);
        let gaps: Vec<f64> = group
            .iter()
            .filter(|&&i| contacts[i] > 0)
            .map(|&i| window_days / f64::from(contacts[i]))
            .collect();
        if !gaps.is_empty() {
            out.set(gap_key, crate::stats::mean(&gaps), gaps.len() as u64);
        }
    }
    Ok(out)
}

/// Retention between two waves.
#[derive(Debug, Clone, PartialEq)]
pub struct Longitudinal {
    /// Retention fractions; all other entries absent.
    pub summary: SummaryVector,
    /// Cohort members still taking part, the next wave's cohort.
    pub survivors: Vec<NodeId>,
}

/// Node and steady-edge retention from one wave to the next.
///
/// `edges_at_wave` are the steady edges incident to the cohort at the
/// earlier wave; an edge counts as retained when the same relationship
/// (same pair, same formation step) is still present in `next`.
pub fn longitudinal_summaries(cohort: &[NodeId], edges_at_wave: &[SteadyEdge], next: &Network) -> Longitudinal {
    longitudinal_with_dropout(cohort, edges_at_wave, next, &HashSet::new())
}

fn longitudinal_with_dropout(
    cohort: &[NodeId],
    edges_at_wave: &[SteadyEdge],
    next: &Network,
    dropped: &HashSet<NodeId>,
) -> Longitudinal {
    let mut summary = SummaryVector::default();
    let responds = |id: NodeId| next.contains(id) && !dropped.contains(&id);
    let survivors: Vec<NodeId> = cohort.iter().copied().filter(|&id| responds(id)).collect();
    if !cohort.is_empty() {
        let frac = survivors.len() as f64 / cohort.len() as f64;
        summary.set(SummaryKey::FracRetainedNodes, frac, cohort.len() as u64);
        if !edges_at_wave.is_empty() {
            let members: HashSet<NodeId> = cohort.iter().copied().collect();
            let retained = edges_at_wave
                .iter()
                .filter(|e| {
                    let answered = (members.contains(&e.a) && responds(e.a))
                        || (members.contains(&e.b) && responds(e.b));
                    answered && next.incident_edges(e.a).any(|cur| cur == **e)
                })
                .count();
            summary.set(
                SummaryKey::FracRetainedEdges,
                retained as f64 / edges_at_wave.len() as f64,
                edges_at_wave.len() as u64,
            );
        }
    }
    Longitudinal { summary, survivors }
}

/// Steady edges with at least one endpoint in `cohort`, sorted.
pub fn cohort_edges(state: &Network, cohort: &[NodeId]) -> Vec<SteadyEdge> {
    let members: HashSet<NodeId> = cohort.iter().copied().collect();
    let mut edges: Vec<SteadyEdge> = state
        .steady_edges()
        .iter()
        .copied()
        .filter(|e| members.contains(&e.a) || members.contains(&e.b))
        .collect();
    edges.sort_unstable();
    edges
}

/// A simulation positioned at the first survey wave.
struct Field {
    sim: Simulator,
    survey_rng: SimRng,
    first_wave: u32,
}

impl Field {
    fn open(params: &ModelParams, design: &SurveyDesign, burn_in: u32, seed: u64) -> Result<Field> {
        design.validate()?;
        let window_start = burn_in.saturating_sub(design.required_retention());
        let log = EventLog::new(design.required_retention(), window_start);
        let mut sim = Simulator::new(*params, rng::stream(seed, Purpose::Simulation, 0), log)?
            .with_casual_from(window_start + 1);
        sim.run_to(burn_in);
        Ok(Field {
            sim,
            survey_rng: rng::stream(seed, Purpose::Survey, 0),
            first_wave: burn_in,
        })
    }

    fn advance_to(&mut self, step: u32, design: &SurveyDesign) {
        self.sim.run_to(step);
        // older records can no longer fall inside any recall window
        let horizon = step.saturating_sub(design.required_retention());
        if self.sim.log().record_from() < horizon {
            self.sim.log_mut().forget_before(horizon);
        }
    }

    fn cross_section(&self, cohort: &[NodeId], design: &SurveyDesign) -> Result<SummaryVector> {
        cross_sectional_summaries(self.sim.network(), self.sim.log(), cohort, design)
    }
}

/// Simulates burn-in, then surveys the population `design.waves` times,
/// `design.lag` weeks apart, starting at step `burn_in`.
///
/// Cross-sectional entries are averaged over waves weighted by their
/// respondent counts; retention entries are averaged over consecutive wave
/// pairs weighted by cohort (edge) counts.
pub fn run_survey(params: &ModelParams, design: &SurveyDesign, burn_in: u32, seed: u64) -> Result<SummaryVector> {
    let mut field = Field::open(params, design, burn_in, seed)?;
    let mut cohort = sample_cohort(field.sim.network(), design.m, &mut field.survey_rng)?;
    let mut parts = Vec::with_capacity(2 * design.waves as usize);
    parts.push(field.cross_section(&cohort, design)?);
    for wave in 1..design.waves {
        let edges = cohort_edges(field.sim.network(), &cohort);
        field.advance_to(field.first_wave + wave * design.lag, design);
        let mut dropped = HashSet::new();
        if design.dropout > 0.0 {
            for &id in &cohort {
                if field.survey_rng.random::<f64>() < design.dropout {
                    dropped.insert(id);
                }
            }
        }
        let long = longitudinal_with_dropout(&cohort, &edges, field.sim.network(), &dropped);
        cohort = long.survivors;
        parts.push(long.summary);
        parts.push(field.cross_section(&cohort, design)?);
    }
    Ok(SummaryVector::weighted_mean(&parts))
}

/// Two-wave surveys at several lags sharing one trajectory and one cohort.
///
/// Entry `i` of the result equals
/// `run_survey(params, &design.with_lag(lags[i]), burn_in, seed)`; lag 0 is a
/// single wave. Only designs without dropout are supported.
pub fn run_survey_lags(
    params: &ModelParams,
    design: &SurveyDesign,
    lags: &[u32],
    burn_in: u32,
    seed: u64,
) -> Result<Vec<SummaryVector>> {
    if design.dropout > 0.0 {
        return Err(Error::InvalidConfig("shared-trajectory lag surveys need zero dropout".into()));
    }
    let base = design.with_lag(1);
    let mut field = Field::open(params, &base, burn_in, seed)?;
    let cohort = sample_cohort(field.sim.network(), design.m, &mut field.survey_rng)?;
    let first = field.cross_section(&cohort, &base)?;
    let edges = cohort_edges(field.sim.network(), &cohort);

    let mut order: Vec<usize> = (0..lags.len()).collect();
    order.sort_by_key(|&i| lags[i]);
    let mut out = vec![SummaryVector::default(); lags.len()];
    for i in order {
        let lag = lags[i];
        if lag == 0 {
            out[i] = first;
            continue;
        }
        field.advance_to(field.first_wave + lag, &base);
        let long = longitudinal_summaries(&cohort, &edges, field.sim.network());
        let second = field.cross_section(&long.survivors, &base)?;
        out[i] = SummaryVector::weighted_mean([&first, &long.summary, &second]);
    }
    Ok(out)
}

/// Fraction paired among surviving members of a cohort sampled at step
/// `burn_in`, for lags `0..=max_lag`. `None` once the cohort has emptied.
pub fn cohort_paired_trajectory(
    params: &ModelParams,
    m: usize,
    burn_in: u32,
    max_lag: u32,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    let mut sim = Simulator::new(*params, rng::stream(seed, Purpose::Simulation, 0), EventLog::new(0, u32::MAX))?
        .with_casual_from(u32::MAX);
    sim.run_to(burn_in);
    let mut survey_rng = rng::stream(seed, Purpose::Survey, 0);
    let mut cohort = sample_cohort(sim.network(), m, &mut survey_rng)?;
    let mut out = Vec::with_capacity(max_lag as usize + 1);
    for lag in 0..=max_lag {
        sim.run_to(burn_in + lag);
        let net = sim.network();
        cohort.retain(|&id| net.contains(id));
        if cohort.is_empty() {
            out.push(None);
            continue;
        }
        let paired = cohort.iter().filter(|&&id| net.degree(id) > Some(0)).count();
        out.push(Some(paired as f64 / cohort.len() as f64));
    }
    Ok(out)
}
