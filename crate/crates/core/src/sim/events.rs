use std::collections::VecDeque;

use super::network::{NodeId, SteadyEdge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DissolutionCause {
    /// Broke up with probability sigma.
    Natural,
    /// At least one partner left the population.
    Migration,
}

impl DissolutionCause {
    pub fn as_str(self) -> &'static str {
        match self {
            DissolutionCause::Natural => "natural",
            DissolutionCause::Migration => "migration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dissolution {
    pub edge: SteadyEdge,
    /// The step during which the edge disappeared; it is absent from the
    /// state at this step.
    pub dissolved_at: u32,
    pub cause: DissolutionCause,
}

impl Dissolution {
    /// Number of steps the edge existed.
    pub fn length(&self) -> u32 {
        self.dissolved_at - self.edge.formed_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Departure {
    pub node: NodeId,
    pub step: u32,
}

/// Casual contacts formed at one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CasualStep {
    pub step: u32,
    pub pairs: Vec<(NodeId, NodeId)>,
}

/// History needed to emulate recall-based survey instruments.
///
/// Dissolutions and departures are recorded for steps strictly after
/// `record_from`. Casual contacts are kept for the most recent `retention`
/// steps only.
#[derive(Debug, Clone)]
pub struct EventLog {
    record_from: u32,
    retention: u32,
    dissolved: Vec<Dissolution>,
    departed: Vec<Departure>,
    casual: VecDeque<CasualStep>,
}

impl EventLog {
    pub fn new(retention: u32, record_from: u32) -> Self {
        EventLog {
            record_from,
            retention,
            dissolved: Vec::new(),
            departed: Vec::new(),
            casual: VecDeque::with_capacity(retention as usize + 1),
        }
    }

    pub fn retention(&self) -> u32 {
        self.retention
    }

    pub fn record_from(&self) -> u32 {
        self.record_from
    }

    pub fn dissolved(&self) -> &[Dissolution] {
        &self.dissolved
    }

    pub fn departed(&self) -> &[Departure] {
        &self.departed
    }

    /// Retained casual history, oldest step first.
    pub fn casual_history(&self) -> impl DoubleEndedIterator<Item = &CasualStep> + ExactSizeIterator {
        self.casual.iter()
    }

    /// Oldest step with casual history, if any.
    pub fn casual_history_start(&self) -> Option<u32> {
        self.casual.front().map(|c| c.step)
    }

    /// Drops dissolution and departure records at or before `step`.
    pub fn forget_before(&mut self, step: u32) {
        self.dissolved.retain(|d| d.dissolved_at > step);
        self.departed.retain(|d| d.step > step);
        self.record_from = self.record_from.max(step);
    }

    pub(crate) fn records(&self, step: u32) -> bool {
        step > self.record_from
    }

    pub(crate) fn push_dissolution(&mut self, d: Dissolution) {
        if self.records(d.dissolved_at) {
            self.dissolved.push(d);
        }
    }

    pub(crate) fn push_departure(&mut self, d: Departure) {
        if self.records(d.step) {
            self.departed.push(d);
        }
    }

    /// Appends the casual contacts of `step`, evicting history beyond the
    /// retention window. The evicted buffer is handed back for reuse.
    pub(crate) fn push_casual(&mut self, step: u32, pairs: &[(NodeId, NodeId)]) {
        if self.retention == 0 {
            return;
        }
        let mut buf = if self.casual.len() as u32 >= self.retention {
            self.casual.pop_front().map(|c| c.pairs).unwrap_or_default()
        } else {
            Vec::with_capacity(pairs.len())
        };
        buf.clear();
        buf.extend_from_slice(pairs);
        self.casual.push_back(CasualStep { step, pairs: buf });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn casual_history_is_bounded() {
        let mut log = EventLog::new(3, 0);
        for t in 1..=10 {
            log.push_casual(t, &[(t as u64, t as u64 + 1)]);
            assert!(log.casual_history().len() <= 3);
        }
        let steps: Vec<u32> = log.casual_history().map(|c| c.step).collect();
        assert_eq!(steps, vec![8, 9, 10]);
        assert_eq!(log.casual_history().last().unwrap().pairs, vec![(10, 11)]);
    }

    #[test]
    fn records_only_after_threshold() {
        let mut log = EventLog::new(0, 5);
        let edge = SteadyEdge::new(1, 2, 0);
        for t in [4, 5, 6] {
            log.push_dissolution(Dissolution {
                edge,
                dissolved_at: t,
                cause: DissolutionCause::Natural,
            });
            log.push_departure(Departure { node: 1, step: t });
        }
        assert_eq!(log.dissolved().len(), 1);
        assert_eq!(log.departed().len(), 1);
        log.push_casual(6, &[(1, 2)]);
        assert_eq!(log.casual_history().len(), 0);
        log.forget_before(6);
        assert!(log.dissolved().is_empty());
    }
}
