//! Discrete-time network evolution.
//!
//! Each step runs four phases in order:
//!
//! 1. every node leaves with probability `mu` (taking its steady edges with
//!    it), all casual edges are cleared and each surviving steady edge
//!    dissolves with probability `sigma`;
//! 2. `Poisson(mu * n)` new nodes arrive with fresh identifiers;
//! 3. each node joins the steady pool with probability `rho * xi^k`, where
//!    `k` is its steady degree after phase 1; the pool is paired at random
//!    and the pairs become steady edges stamped with the new step index;
//! 4. each node joins the casual pool with probability `omega0` if it has
//!    no steady edge and `omega1` otherwise; the pool is paired at random
//!    and the pairs are the casual edges of this step.

mod events;
mod network;
mod pairing;
mod sampling;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

pub use events::{CasualStep, Departure, Dissolution, DissolutionCause, EventLog};
pub use network::{Network, NodeId, SteadyEdge};
pub use pairing::random_pairs;

use crate::rng::{self, Purpose, SimRng};
use crate::{Error, ModelParams, Result};
use pairing::pair_up;
use sampling::{bernoulli, BernoulliSelector};

/// Burn-in used throughout: 30 years of weekly steps.
pub const DEFAULT_BURN_IN: u32 = 1560;
/// Casual-contact retention matching a 12-month recall window.
pub const DEFAULT_RETENTION: u32 = 52;

/// Per-parameter samplers, built once per simulation.
#[derive(Debug, Clone)]
struct Rates {
    leave: BernoulliSelector,
    dissolve: BernoulliSelector,
    seek_steady: BernoulliSelector,
    seek_casual: BernoulliSelector,
    xi: f64,
    omega0: f64,
    omega1: f64,
    omega_max: f64,
    arrivals: Option<Poisson<f64>>,
}

impl Rates {
    fn new(p: &ModelParams) -> Result<Self> {
        p.validate()?;
        let omega_max = p.omega0.max(p.omega1);
        let lambda = p.mu * p.n;
        let arrivals = if lambda > 0.0 {
            Some(Poisson::new(lambda).map_err(|_| Error::InvalidParameter {
                name: "n",
                value: p.n,
                reason: "arrival rate mu * n is not a valid Poisson mean",
            })?)
        } else {
            None
        };
        Ok(Rates {
            leave: BernoulliSelector::new(p.mu),
            dissolve: BernoulliSelector::new(p.sigma),
            seek_steady: BernoulliSelector::new(p.rho),
            seek_casual: BernoulliSelector::new(omega_max),
            xi: p.xi,
            omega0: p.omega0,
            omega1: p.omega1,
            omega_max,
            arrivals,
        })
    }

    fn arrivals<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.arrivals.as_ref().map_or(0, |d| d.sample(rng) as u64)
    }
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    idx: Vec<u32>,
    pool: Vec<u32>,
    pairs: Vec<(u32, u32)>,
}

/// Slots seeking a steady partner: each node is drawn with probability
/// `rho * xi^k` for steady degree `k`.
fn fill_steady_pool<R: Rng + ?Sized>(net: &Network, rates: &Rates, rng: &mut R, scratch: &mut Scratch) {
    rates.seek_steady.select(net.len(), rng, &mut scratch.idx);
    scratch.pool.clear();
    for &s in &scratch.idx {
        let k = net.adj[s as usize].len();
        if k == 0 || bernoulli(rates.xi.powi(k as i32), rng) {
            scratch.pool.push(s);
        }
    }
}

/// Nodes that would enter the steady pool of the next step, as drawn by the
/// simulator itself. Exposed for checking entry frequencies.
pub fn steady_pool<R: Rng + ?Sized>(state: &Network, params: &ModelParams, rng: &mut R) -> Result<Vec<NodeId>> {
    let rates = Rates::new(params)?;
    let mut scratch = Scratch::default();
    fill_steady_pool(state, &rates, rng, &mut scratch);
    Ok(scratch.pool.iter().map(|&s| state.ids[s as usize]).collect())
}

fn advance<R: Rng + ?Sized>(
    net: &mut Network,
    rates: &Rates,
    rng: &mut R,
    log: &mut EventLog,
    scratch: &mut Scratch,
    casual: bool,
) {
    let t = net.step + 1;
    net.casual.clear();

    // Phase 1: departures, then natural dissolution of surviving edges.
    rates.leave.select(net.len(), rng, &mut scratch.idx);
    for &s in scratch.idx.iter().rev() {
        let s = s as usize;
        while let Some(link) = net.adj[s].last().copied() {
            let edge = net.detach_edge(link.edge as usize);
            log.push_dissolution(Dissolution {
                edge,
                dissolved_at: t,
                cause: DissolutionCause::Migration,
            });
        }
        let node = net.remove_isolated_slot(s);
        log.push_departure(Departure { node, step: t });
    }
    rates.dissolve.select(net.edges.len(), rng, &mut scratch.idx);
    for &e in scratch.idx.iter().rev() {
        let edge = net.detach_edge(e as usize);
        log.push_dissolution(Dissolution {
            edge,
            dissolved_at: t,
            cause: DissolutionCause::Natural,
        });
    }

    // Phase 2: arrivals.
    for _ in 0..rates.arrivals(rng) {
        net.add_node();
    }

    // Phase 3: steady pool. Candidates are drawn at rate rho and thinned by
    // xi^k, so every entry decision uses the post-dissolution degree.
    fill_steady_pool(net, rates, rng, scratch);
    pair_up(&mut scratch.pool, rng, &mut scratch.pairs);
    for &(sa, sb) in &scratch.pairs {
        let (sa, sb) = (sa as usize, sb as usize);
        let b = net.ids[sb];
        if net.adj[sa].iter().any(|l| l.partner == b) {
            continue;
        }
        net.link(sa, sb, t);
    }

    // Phase 4: casual pool, using degrees after this step's pairings.
    if casual {
        rates.seek_casual.select(net.len(), rng, &mut scratch.idx);
        scratch.pool.clear();
        for &s in &scratch.idx {
            let p = if net.adj[s as usize].is_empty() {
                rates.omega0
            } else {
                rates.omega1
            };
            if bernoulli(p / rates.omega_max, rng) {
                scratch.pool.push(s);
            }
        }
        pair_up(&mut scratch.pool, rng, &mut scratch.pairs);
        for &(sa, sb) in &scratch.pairs {
            let (a, b) = (net.ids[sa as usize], net.ids[sb as usize]);
            net.casual.push(if a < b { (a, b) } else { (b, a) });
        }
        log.push_casual(t, &net.casual);
    }

    net.step = t;
}

/// Applies one full step (all four phases) to `state` in place.
pub fn step<R: Rng + ?Sized>(
    state: &mut Network,
    params: &ModelParams,
    rng: &mut R,
    log: &mut EventLog,
) -> Result<()> {
    let rates = Rates::new(params)?;
    advance(state, &rates, rng, log, &mut Scratch::default(), true);
    Ok(())
}

/// Owns one replicate: its network, event log and random stream.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ModelParams,
    rates: Rates,
    net: Network,
    log: EventLog,
    rng: SimRng,
    scratch: Scratch,
    casual_from: u32,
}

impl Simulator {
    /// Starts from `Poisson(n)` isolated nodes drawn from `rng`.
    pub fn new(params: ModelParams, mut rng: SimRng, log: EventLog) -> Result<Self> {
        let rates = Rates::new(&params)?;
        let initial = Poisson::new(params.n).map_err(|_| Error::InvalidParameter {
            name: "n",
            value: params.n,
            reason: "not a valid Poisson mean",
        })?;
        let count = initial.sample(&mut rng) as usize;
        let net = Network::with_isolated_nodes(count);
        Ok(Simulator {
            params,
            rates,
            net,
            log,
            rng,
            scratch: Scratch::default(),
            casual_from: 0,
        })
    }

    pub fn from_network(params: ModelParams, net: Network, rng: SimRng, log: EventLog) -> Result<Self> {
        let rates = Rates::new(&params)?;
        Ok(Simulator {
            params,
            rates,
            net,
            log,
            rng,
            scratch: Scratch::default(),
            casual_from: 0,
        })
    }

    /// Casual contacts are only generated for steps `>= step`. Earlier casual
    /// edges are cleared before anything can observe them, so skipping them
    /// leaves every recorded quantity with the same distribution.
    pub fn with_casual_from(mut self, step: u32) -> Self {
        self.casual_from = step;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut EventLog {
        &mut self.log
    }

    pub fn step(&mut self) {
        let casual = self.net.step + 1 >= self.casual_from;
        advance(
            &mut self.net,
            &self.rates,
            &mut self.rng,
            &mut self.log,
            &mut self.scratch,
            casual,
        );
    }

    /// Steps until the network reaches step index `target`.
    pub fn run_to(&mut self, target: u32) {
        while self.net.step < target {
            self.step();
        }
    }

    pub fn into_parts(self) -> (Network, EventLog) {
        (self.net, self.log)
    }
}

/// Length and recording settings of a single trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSettings {
    pub total_steps: u32,
    pub burn_in: u32,
    /// Steps of casual history kept in the event log.
    pub retention: u32,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            total_steps: DEFAULT_BURN_IN,
            burn_in: DEFAULT_BURN_IN,
            retention: DEFAULT_RETENTION,
        }
    }
}

/// Runs `total_steps` steps from `Poisson(n)` isolated nodes. Dissolutions and
/// departures after `burn_in` are logged; casual history covers the last
/// `retention` steps. Deterministic in `(params, settings, seed)`.
pub fn simulate(params: &ModelParams, settings: &SimSettings, seed: u64) -> Result<(Network, EventLog)> {
    simulate_replicate(params, settings, seed, 0)
}

/// As [`simulate`], using stream `replicate` of the master seed.
pub fn simulate_replicate(
    params: &ModelParams,
    settings: &SimSettings,
    master_seed: u64,
    replicate: u64,
) -> Result<(Network, EventLog)> {
    if settings.total_steps < settings.burn_in {
        return Err(Error::InvalidConfig(format!(
            "total steps {} shorter than burn-in {}",
            settings.total_steps, settings.burn_in
        )));
    }
    let rng = rng::stream(master_seed, Purpose::Simulation, replicate);
    let log = EventLog::new(settings.retention, settings.burn_in);
    let casual_from = settings
        .total_steps
        .saturating_sub(settings.retention.max(1))
        + 1;
    let mut sim = Simulator::new(*params, rng, log)?.with_casual_from(casual_from);
    sim.run_to(settings.total_steps);
    Ok(sim.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64, rho: f64, xi: f64, sigma: f64, w0: f64, w1: f64) -> ModelParams {
        ModelParams {
            n: 200.0,
            mu,
            rho,
            xi,
            sigma,
            omega0: w0,
            omega1: w1,
        }
    }

    fn five_edges() -> Network {
        let edges = (0..5).map(|i| SteadyEdge::new(2 * i, 2 * i + 1, 0));
        Network::from_parts(3, 0..12, edges).unwrap()
    }

    #[test]
    fn zero_rates_freeze_the_network() {
        let p = params(0.0, 0.0, 0.5, 0.0, 0.0, 0.0);
        let mut net = five_edges();
        let before = (net.sorted_nodes(), net.sorted_steady_edges());
        let mut log = EventLog::new(4, 0);
        let mut rng = rng::stream(3, Purpose::Simulation, 0);
        step(&mut net, &p, &mut rng, &mut log).unwrap();
        assert_eq!(net.step(), 4);
        assert_eq!((net.sorted_nodes(), net.sorted_steady_edges()), before);
        assert!(net.casual_edges().is_empty());
    }

    #[test]
    fn certain_departure_replaces_everyone() {
        let p = ModelParams {
            n: 10.0,
            ..params(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        };
        let mut net = Network::with_isolated_nodes(10);
        let mut log = EventLog::new(0, 0);
        let mut rng = rng::stream(9, Purpose::Simulation, 0);
        step(&mut net, &p, &mut rng, &mut log).unwrap();
        assert!(net.nodes().iter().all(|&id| id >= 10));
        assert_eq!(log.departed().len(), 10);
        net.check_invariants().unwrap();
    }

    #[test]
    fn certain_dissolution_without_formation() {
        let p = params(0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
        let mut net = five_edges();
        let mut log = EventLog::new(0, 0);
        let mut rng = rng::stream(1, Purpose::Simulation, 0);
        step(&mut net, &p, &mut rng, &mut log).unwrap();
        assert!(net.steady_edges().is_empty());
        assert_eq!(log.dissolved().len(), 5);
        assert!(log
            .dissolved()
            .iter()
            .all(|d| d.cause == DissolutionCause::Natural && d.dissolved_at == 4));
    }

    #[test]
    fn migration_dissolutions_are_labelled() {
        let p = params(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut net = five_edges();
        let mut log = EventLog::new(0, 0);
        let mut rng = rng::stream(1, Purpose::Simulation, 0);
        step(&mut net, &p, &mut rng, &mut log).unwrap();
        assert_eq!(log.dissolved().len(), 5);
        assert!(log
            .dissolved()
            .iter()
            .all(|d| d.cause == DissolutionCause::Migration && d.length() > 0));
    }

    #[test]
    fn everyone_seeking_pairs_everyone() {
        let p = params(0.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        let mut net = Network::with_isolated_nodes(8);
        let mut log = EventLog::new(2, 0);
        let mut rng = rng::stream(2, Purpose::Simulation, 0);
        step(&mut net, &p, &mut rng, &mut log).unwrap();
        assert_eq!(net.steady_edges().len(), 4);
        assert_eq!(net.casual_edges().len(), 4);
        assert!(net.steady_edges().iter().all(|e| e.formed_at == 1));
        // serial monogamy: nobody seeks a second partner
        step(&mut net, &p, &mut rng, &mut log).unwrap();
        assert_eq!(net.steady_edges().len(), 4);
        assert_eq!(net.max_degree(), 1);
        net.check_invariants().unwrap();
    }

    #[test]
    fn duplicate_proposals_are_discarded() {
        // two nodes, already joined, both always seek: proposal repeats the pair
        let p = params(0.0, 1.0, 1.0, 0.0, 0.0, 0.0);
        let mut net = Network::from_parts(0, [0, 1], [SteadyEdge::new(0, 1, 0)]).unwrap();
        let mut log = EventLog::new(0, 0);
        let mut rng = rng::stream(2, Purpose::Simulation, 0);
        for _ in 0..5 {
            step(&mut net, &p, &mut rng, &mut log).unwrap();
        }
        assert_eq!(net.steady_edges().len(), 1);
        assert_eq!(net.steady_edges()[0].formed_at, 0);
    }

    #[test]
    fn closed_static_population() {
        let p = params(0.0, 0.0, 0.3, 0.2, 0.4, 0.2);
        let settings = SimSettings {
            total_steps: 300,
            burn_in: 100,
            retention: 10,
        };
        let (net, log) = simulate(&p, &settings, 4).unwrap();
        assert_eq!(net.next_id() as usize, net.len());
        assert!(net.steady_edges().is_empty());
        assert!(log.departed().is_empty());
        assert_eq!(log.casual_history().len(), 10);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = params(0.01, 0.05, 0.3, 0.03, 0.4, 0.2);
        let settings = SimSettings {
            total_steps: 400,
            burn_in: 300,
            retention: 20,
        };
        let (a, la) = simulate(&p, &settings, 77).unwrap();
        let (b, lb) = simulate(&p, &settings, 77).unwrap();
        assert_eq!(a.sorted_nodes(), b.sorted_nodes());
        assert_eq!(a.sorted_steady_edges(), b.sorted_steady_edges());
        assert_eq!(a.casual_edges(), b.casual_edges());
        assert_eq!(la.dissolved(), lb.dissolved());
        let (c, _) = simulate(&p, &settings, 78).unwrap();
        assert_ne!(a.sorted_steady_edges(), c.sorted_steady_edges());
    }

    #[test]
    fn rejects_bad_settings_and_params() {
        let p = params(0.01, 0.05, 0.3, 0.03, 0.4, 0.2);
        let bad = SimSettings {
            total_steps: 10,
            burn_in: 20,
            retention: 1,
        };
        assert!(simulate(&p, &bad, 0).is_err());
        let mut q = p;
        q.rho = -0.1;
        assert!(simulate(&q, &SimSettings::default(), 0).is_err());
    }

    #[test]
    fn invariants_hold_along_a_trajectory() {
        let p = params(0.02, 0.2, 0.7, 0.1, 0.5, 0.3);
        let mut sim = Simulator::new(p, rng::stream(5, Purpose::Simulation, 0), EventLog::new(5, 0)).unwrap();
        for _ in 0..300 {
            sim.step();
            sim.network().check_invariants().unwrap();
        }
        assert!(sim.log().dissolved().iter().all(|d| d.dissolved_at > d.edge.formed_at));
    }
}
