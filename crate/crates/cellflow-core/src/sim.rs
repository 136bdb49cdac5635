//! Flow-level discrete-event simulator: a single processor-sharing cell
//! with impatient flows, or a network of cells exchanging handover flows.
//!
//! Between events every active flow in a cell drains at `C / L(t)`.
//! Completions are recomputed rather than queued: each cell tracks the
//! cumulative per-flow service `v` (its virtual time), a flow arriving at
//! `v0` with volume `X` finishes when `v` reaches `v0 + X`, and the next
//! completion instant follows from the current sharing level. Sojourn
//! expiries and arrivals live in ordinary time. Ties break deterministically
//! as completion, then expiry, then arrival, then flow slot.
//!
//! The first tenth of the horizon warms the system up: state evolves but
//! counters and integrals stay untouched. Every estimator is a plain ratio
//! of post-warm-up totals.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution as _;
use rand_distr::Exp;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::CellScenario;
use crate::network::NetworkTopology;

const WARM_UP_FRACTION: f64 = 0.1;
const NEVER: f64 = f64::INFINITY;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(
        "network runs need exponential volumes and sojourns for mobile classes; \
         class {class:?} has a {family} {quantity} law"
    )]
    UnsupportedDistribution {
        class: String,
        quantity: &'static str,
        family: &'static str,
    },
    #[error("replication needs at least two runs, got {runs}")]
    TooFewRuns { runs: usize },
}

/// How a single-cell run treats the outside world.
#[derive(Debug, Clone, PartialEq)]
pub enum CellMode {
    /// Flows whose sojourn expires are lost with their remaining volume.
    Impatience,
    /// The cell additionally receives Poisson handover-in streams, one rate
    /// per class, with volumes drawn fresh from the class law (exact when
    /// volumes are exponential).
    OpenCell { handover_in: Vec<f64> },
}

/// A flow preloaded at time zero. Synthetic seeds never expire; they leave
/// only by finishing their volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialFlow {
    pub class: usize,
    pub volume: f64,
}

/// Snapshot of one in-flight flow at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub class: usize,
    pub cell: usize,
    pub remaining_volume: f64,
    /// Absolute expiry instant; infinite for static flows.
    pub sojourn_deadline: f64,
    pub arrival_time: f64,
}

/// Post-warm-up totals for one class in one cell. The identity
/// `in_flight_start + arrivals = completions + handovers_out + in_flight_end`
/// holds exactly for every run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassCounters {
    pub fresh_arrivals: u64,
    pub handover_arrivals: u64,
    pub completions: u64,
    pub handovers_out: u64,
    pub in_flight_start: u64,
    pub in_flight_end: u64,
    /// Time-integrated occupancy over the measured window.
    pub occupancy_integral: f64,
    /// Bits served to this class over the measured window.
    pub carried_volume: f64,
}

impl ClassCounters {
    pub fn arrivals(&self) -> u64 {
        self.fresh_arrivals + self.handover_arrivals
    }
}

/// One cell's measured totals for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    /// Length of the measured window (horizon minus warm-up).
    pub duration: f64,
    /// Measured time during which the cell served at least one flow.
    pub busy_time: f64,
    /// Events applied in this cell over the whole run, warm-up included.
    pub events: u64,
    pub classes: Vec<ClassCounters>,
}

impl SimStats {
    pub fn mean_occupancy(&self, class: usize) -> f64 {
        self.classes[class].occupancy_integral / self.duration
    }

    /// Per-flow throughput estimate: bits served per flow-second.
    pub fn throughput(&self, class: usize) -> f64 {
        let c = &self.classes[class];
        c.carried_volume / c.occupancy_integral
    }

    /// Fraction of admitted flows that left before finishing.
    pub fn handover_probability(&self, class: usize) -> f64 {
        let c = &self.classes[class];
        c.handovers_out as f64 / c.arrivals() as f64
    }

    /// Rate of handover flows entering this cell.
    pub fn handover_in_rate(&self, class: usize) -> f64 {
        self.classes[class].handover_arrivals as f64 / self.duration
    }
}

/// Horizon that yields roughly `target_events` events at the given total
/// flow arrival rate: each flow contributes an arrival and an exit.
/// Handover re-entries add events beyond the estimate.
pub fn horizon_for_events(total_arrival_rate: f64, target_events: u64) -> f64 {
    assert!(
        total_arrival_rate > 0.0,
        "event budget needs a positive arrival rate"
    );
    target_events as f64 / (2.0 * total_arrival_rate)
}

/// Independent run seeds from one master seed, by a splitmix64 scramble of
/// the run index.
pub fn run_seeds(master_seed: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64)
        .map(|i| splitmix64(master_seed ^ (i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulate one cell. Expired flows are counted as handovers out and leave
/// the cell's books either way; the mode only decides whether extra
/// handover-in streams feed the cell.
pub fn run_cell(scenario: &CellScenario, mode: &CellMode, horizon: f64, seed: u64) -> SimStats {
    run_cell_detailed(scenario, mode, horizon, seed, &[]).0
}

/// `run_cell` plus scripted initial flows and the end-of-run in-flight
/// snapshot.
pub fn run_cell_detailed(
    scenario: &CellScenario,
    mode: &CellMode,
    horizon: f64,
    seed: u64,
    initial_flows: &[InitialFlow],
) -> (SimStats, Vec<Flow>) {
    if scenario.static_load() >= 1.0 {
        log::warn!(
            "static offered load {} is not below 1; collecting transient statistics",
            scenario.static_load()
        );
    }
    let handover_in = match mode {
        CellMode::Impatience => None,
        CellMode::OpenCell { handover_in } => {
            assert_eq!(
                handover_in.len(),
                scenario.classes.len(),
                "one handover-in rate per class"
            );
            Some(handover_in.as_slice())
        }
    };
    let cells = std::slice::from_ref(scenario);
    let seeds: Vec<InternalSeed> = initial_flows
        .iter()
        .map(|f| InternalSeed {
            cell: 0,
            class: f.class,
            volume: f.volume,
        })
        .collect();
    let mut engine = Engine::new(cells, None, handover_in, horizon, seed, &seeds);
    let (mut stats, flows) = engine.run();
    (stats.pop().expect("one cell"), flows)
}

/// Simulate a network: expired flows keep their remaining volume, move to a
/// neighbor drawn from the routing row, and draw a fresh sojourn there.
/// Mobile classes must have exponential volumes and sojourns; with them the
/// per-cell resampling is exact.
pub fn run_network(
    topology: &NetworkTopology,
    horizon: f64,
    seed: u64,
) -> Result<Vec<SimStats>, SimError> {
    check_network_laws(topology)?;
    let mut engine = Engine::new(
        &topology.cells,
        Some(&topology.routing),
        None,
        horizon,
        seed,
        &[],
    );
    Ok(engine.run().0)
}

fn check_network_laws(topology: &NetworkTopology) -> Result<(), SimError> {
    for cell in &topology.cells {
        for class in &cell.classes {
            if !class.is_mobile() {
                continue;
            }
            if !class.volume_dist.is_exponential() {
                return Err(SimError::UnsupportedDistribution {
                    class: class.name.clone(),
                    quantity: "volume",
                    family: class.volume_dist.family_name(),
                });
            }
            let sojourn = class.sojourn_dist.as_ref().expect("mobile class");
            if !sojourn.is_exponential() {
                return Err(SimError::UnsupportedDistribution {
                    class: class.name.clone(),
                    quantity: "sojourn",
                    family: sojourn.family_name(),
                });
            }
        }
    }
    Ok(())
}

/// One KPI aggregated over runs: mean of the run estimates and a
/// half-width of two sample standard deviations of those estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpiEstimate {
    pub mean: f64,
    pub half_width: f64,
}

impl KpiEstimate {
    fn from_runs(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            half_width: 2.0 * var.sqrt(),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEstimate {
    pub throughput: KpiEstimate,
    pub handover_probability: KpiEstimate,
    pub mean_occupancy: KpiEstimate,
    pub handover_in_rate: KpiEstimate,
}

/// Replication aggregate for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub classes: Vec<ClassEstimate>,
    pub runs: usize,
    /// Measured window of each run.
    pub duration: f64,
    /// Mean events per run in this cell.
    pub mean_events: f64,
}

fn summarize(per_run: &[SimStats]) -> SimSummary {
    let n_classes = per_run[0].classes.len();
    let classes = (0..n_classes)
        .map(|k| {
            let collect = |f: &dyn Fn(&SimStats) -> f64| {
                KpiEstimate::from_runs(&per_run.iter().map(f).collect::<Vec<_>>())
            };
            ClassEstimate {
                throughput: collect(&|s| s.throughput(k)),
                handover_probability: collect(&|s| s.handover_probability(k)),
                mean_occupancy: collect(&|s| s.mean_occupancy(k)),
                handover_in_rate: collect(&|s| s.handover_in_rate(k)),
            }
        })
        .collect();
    SimSummary {
        classes,
        runs: per_run.len(),
        duration: per_run[0].duration,
        mean_events: per_run.iter().map(|s| s.events as f64).sum::<f64>() / per_run.len() as f64,
    }
}

/// Replicated single-cell runs with seeds derived from `master_seed`.
pub fn replicate_cell(
    scenario: &CellScenario,
    mode: &CellMode,
    horizon: f64,
    master_seed: u64,
    runs: usize,
) -> Result<SimSummary, SimError> {
    replicate_cell_with_seeds(scenario, mode, horizon, &run_seeds(master_seed, runs))
}

/// Replication with caller-chosen run seeds.
pub fn replicate_cell_with_seeds(
    scenario: &CellScenario,
    mode: &CellMode,
    horizon: f64,
    seeds: &[u64],
) -> Result<SimSummary, SimError> {
    if seeds.len() < 2 {
        return Err(SimError::TooFewRuns { runs: seeds.len() });
    }
    let per_run: Vec<SimStats> = seeds
        .par_iter()
        .map(|&s| run_cell(scenario, mode, horizon, s))
        .collect();
    Ok(summarize(&per_run))
}

/// Replicated network runs; one summary per cell.
pub fn replicate_network(
    topology: &NetworkTopology,
    horizon: f64,
    master_seed: u64,
    runs: usize,
) -> Result<Vec<SimSummary>, SimError> {
    if runs < 2 {
        return Err(SimError::TooFewRuns { runs });
    }
    check_network_laws(topology)?;
    let per_run: Vec<Vec<SimStats>> = run_seeds(master_seed, runs)
        .par_iter()
        .map(|&s| run_network(topology, horizon, s).expect("laws already checked"))
        .collect();
    let summaries = (0..topology.cells.len())
        .map(|i| {
            let cell_runs: Vec<SimStats> = per_run.iter().map(|r| r[i].clone()).collect();
            summarize(&cell_runs)
        })
        .collect();
    Ok(summaries)
}

struct InternalSeed {
    cell: usize,
    class: usize,
    volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapKey {
    /// Completion heaps order by finish virtual time, the expiry heap by
    /// absolute expiry time.
    order: f64,
    slot: u32,
    gen: u32,
}

impl Eq for HeapKey {}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order
            .total_cmp(&other.order)
            .then(self.slot.cmp(&other.slot))
            .then(self.gen.cmp(&other.gen))
    }
}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Slot {
    gen: u32,
    alive: bool,
    class: u32,
    cell: u32,
    finish_v: f64,
    deadline: f64,
    arrival_time: f64,
}

struct CellState {
    /// Cumulative per-flow service, bits; advances at `C / L` while busy.
    v: f64,
    live: Vec<u32>,
    live_total: u32,
    completions: BinaryHeap<Reverse<HeapKey>>,
}

#[derive(Clone, Copy, PartialEq)]
enum StreamKind {
    Fresh,
    HandoverIn,
}

struct Stream {
    cell: u32,
    class: u32,
    rate: f64,
    kind: StreamKind,
    next_t: f64,
}

#[derive(Clone, Copy)]
enum Event {
    Completion { cell: usize },
    Expiry,
    Arrival { stream: usize },
}

struct Engine<'a> {
    cells: &'a [CellScenario],
    routing: Option<&'a [Vec<Vec<f64>>]>,
    horizon: f64,
    warm_start: f64,
    rng: ChaCha12Rng,
    slots: Vec<Slot>,
    free: Vec<u32>,
    states: Vec<CellState>,
    expiries: BinaryHeap<Reverse<HeapKey>>,
    streams: Vec<Stream>,
    stats: Vec<SimStats>,
    t: f64,
    snapshot_taken: bool,
}

impl<'a> Engine<'a> {
    fn new(
        cells: &'a [CellScenario],
        routing: Option<&'a [Vec<Vec<f64>>]>,
        handover_in: Option<&[f64]>,
        horizon: f64,
        seed: u64,
        initial_flows: &[InternalSeed],
    ) -> Self {
        assert!(
            horizon.is_finite() && horizon > 0.0,
            "horizon must be positive"
        );
        let mut engine = Self {
            cells,
            routing,
            horizon,
            warm_start: WARM_UP_FRACTION * horizon,
            rng: ChaCha12Rng::seed_from_u64(seed),
            slots: Vec::new(),
            free: Vec::new(),
            states: cells
                .iter()
                .map(|c| CellState {
                    v: 0.0,
                    live: vec![0; c.classes.len()],
                    live_total: 0,
                    completions: BinaryHeap::new(),
                })
                .collect(),
            expiries: BinaryHeap::new(),
            streams: Vec::new(),
            stats: cells
                .iter()
                .map(|c| SimStats {
                    duration: horizon - WARM_UP_FRACTION * horizon,
                    busy_time: 0.0,
                    events: 0,
                    classes: vec![ClassCounters::default(); c.classes.len()],
                })
                .collect(),
            t: 0.0,
            snapshot_taken: false,
        };
        for flow in initial_flows {
            engine.spawn(flow.cell, flow.class, flow.volume, NEVER, 0.0);
        }
        for (i, cell) in cells.iter().enumerate() {
            for (k, class) in cell.classes.iter().enumerate() {
                if class.arrival_rate > 0.0 {
                    let first = engine.exp_sample(class.arrival_rate);
                    engine.streams.push(Stream {
                        cell: i as u32,
                        class: k as u32,
                        rate: class.arrival_rate,
                        kind: StreamKind::Fresh,
                        next_t: first,
                    });
                }
            }
        }
        if let Some(rates) = handover_in {
            for (k, &rate) in rates.iter().enumerate() {
                if rate > 0.0 {
                    let first = engine.exp_sample(rate);
                    engine.streams.push(Stream {
                        cell: 0,
                        class: k as u32,
                        rate,
                        kind: StreamKind::HandoverIn,
                        next_t: first,
                    });
                }
            }
        }
        engine
    }

    fn exp_sample(&mut self, rate: f64) -> f64 {
        self.t + Exp::new(rate).expect("positive rate").sample(&mut self.rng)
    }

    fn spawn(&mut self, cell: usize, class: usize, volume: f64, deadline: f64, arrival: f64) {
        let state = &mut self.states[cell];
        let finish_v = state.v + volume;
        let slot = match self.free.pop() {
            Some(s) => {
                let entry = &mut self.slots[s as usize];
                entry.gen = entry.gen.wrapping_add(1);
                entry.alive = true;
                entry.class = class as u32;
                entry.cell = cell as u32;
                entry.finish_v = finish_v;
                entry.deadline = deadline;
                entry.arrival_time = arrival;
                s
            }
            None => {
                self.slots.push(Slot {
                    gen: 0,
                    alive: true,
                    class: class as u32,
                    cell: cell as u32,
                    finish_v,
                    deadline,
                    arrival_time: arrival,
                });
                (self.slots.len() - 1) as u32
            }
        };
        let gen = self.slots[slot as usize].gen;
        state.live[class] += 1;
        state.live_total += 1;
        state.completions.push(Reverse(HeapKey {
            order: finish_v,
            slot,
            gen,
        }));
        if deadline.is_finite() {
            self.expiries.push(Reverse(HeapKey {
                order: deadline,
                slot,
                gen,
            }));
        }
    }

    fn kill(&mut self, slot: u32) {
        let entry = &mut self.slots[slot as usize];
        entry.alive = false;
        let state = &mut self.states[entry.cell as usize];
        state.live[entry.class as usize] -= 1;
        state.live_total -= 1;
        self.free.push(slot);
    }

    fn valid(slots: &[Slot], key: &HeapKey) -> bool {
        let s = &slots[key.slot as usize];
        s.gen == key.gen && s.alive
    }

    /// Physical time of the cell's next completion, after discarding stale
    /// heap entries.
    fn next_completion(&mut self, cell: usize) -> Option<(f64, HeapKey)> {
        let state = &mut self.states[cell];
        while let Some(Reverse(key)) = state.completions.peek() {
            if Self::valid(&self.slots, key) {
                let key = *key;
                let share = state.live_total as f64 / self.cells[cell].capacity;
                let dt = (key.order - state.v).max(0.0) * share;
                return Some((self.t + dt, key));
            }
            state.completions.pop();
        }
        None
    }

    fn next_expiry(&mut self) -> Option<(f64, HeapKey)> {
        while let Some(Reverse(key)) = self.expiries.peek() {
            if Self::valid(&self.slots, key) {
                return Some((key.order, *key));
            }
            self.expiries.pop();
        }
        None
    }

    /// Advance physical time, virtual times, and the measured integrals.
    fn advance(&mut self, to: f64) {
        let dt = to - self.t;
        if dt <= 0.0 {
            self.t = to;
            return;
        }
        let lo = self.t.max(self.warm_start);
        let hi = to.min(self.horizon);
        let window = (hi - lo).max(0.0);
        for (cell, state) in self.states.iter_mut().enumerate() {
            if state.live_total == 0 {
                continue;
            }
            let rate = self.cells[cell].capacity / state.live_total as f64;
            state.v += rate * dt;
            if window > 0.0 {
                let stats = &mut self.stats[cell];
                stats.busy_time += window;
                for (k, &n) in state.live.iter().enumerate() {
                    let counters = &mut stats.classes[k];
                    counters.occupancy_integral += n as f64 * window;
                    counters.carried_volume += n as f64 * rate * window;
                }
            }
        }
        self.t = to;
    }

    /// Cell a routed flow continues in, or `None` when the row is zero and
    /// the flow leaves the simulated network.
    fn sample_destination(&mut self, row: &[f64]) -> Option<usize> {
        let mut last = None;
        let mut cum = 0.0;
        let u = self.rng.random::<f64>();
        for (i, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            cum += p;
            last = Some(i);
            if u < cum {
                return Some(i);
            }
        }
        last
    }

    fn snapshot_start(&mut self) {
        for (state, stats) in self.states.iter().zip(&mut self.stats) {
            for (k, &n) in state.live.iter().enumerate() {
                stats.classes[k].in_flight_start = n as u64;
            }
        }
        self.snapshot_taken = true;
    }

    fn run(&mut self) -> (Vec<SimStats>, Vec<Flow>) {
        loop {
            // Pick the earliest pending event; ties resolve by the fixed
            // rank order and then by slot or stream index.
            let mut best: Option<(f64, u8, u32, u32, Event)> = None;
            for cell in 0..self.states.len() {
                if let Some((time, key)) = self.next_completion(cell) {
                    let cand = (time, 0, cell as u32, key.slot, Event::Completion { cell });
                    if better(&best, &cand) {
                        best = Some(cand);
                    }
                }
            }
            if let Some((time, key)) = self.next_expiry() {
                let cand = (time, 1, key.slot, 0, Event::Expiry);
                if better(&best, &cand) {
                    best = Some(cand);
                }
            }
            for (i, stream) in self.streams.iter().enumerate() {
                let cand = (stream.next_t, 2, i as u32, 0, Event::Arrival { stream: i });
                if better(&best, &cand) {
                    best = Some(cand);
                }
            }

            let Some((time, _, _, _, event)) = best else {
                self.advance(self.horizon);
                break;
            };
            if time > self.horizon {
                self.advance(self.horizon);
                break;
            }
            self.advance(time);
            if !self.snapshot_taken && time >= self.warm_start {
                self.snapshot_start();
            }
            let counted = time >= self.warm_start;
            match event {
                Event::Completion { cell } => {
                    let Reverse(key) = self.states[cell].completions.pop().expect("peeked");
                    let class = self.slots[key.slot as usize].class as usize;
                    self.kill(key.slot);
                    self.stats[cell].events += 1;
                    if counted {
                        self.stats[cell].classes[class].completions += 1;
                    }
                }
                Event::Expiry => {
                    let Reverse(key) = self.expiries.pop().expect("peeked");
                    let (cell, class, remaining) = {
                        let s = &self.slots[key.slot as usize];
                        let cell = s.cell as usize;
                        let remaining = (s.finish_v - self.states[cell].v).max(0.0);
                        (cell, s.class as usize, remaining)
                    };
                    self.kill(key.slot);
                    self.stats[cell].events += 1;
                    if counted {
                        self.stats[cell].classes[class].handovers_out += 1;
                    }
                    if let Some(routing) = self.routing {
                        if let Some(dest) = self.sample_destination(&routing[class][cell]) {
                            let sojourn = self.cells[dest].classes[class]
                                .sojourn_dist
                                .as_ref()
                                .expect("expiring flows are mobile");
                            let deadline = self.t + sojourn.sample(&mut self.rng);
                            self.spawn(dest, class, remaining, deadline, self.t);
                            if counted {
                                self.stats[dest].classes[class].handover_arrivals += 1;
                            }
                        }
                    }
                }
                Event::Arrival { stream } => {
                    let (cell, class, kind, rate) = {
                        let s = &self.streams[stream];
                        (s.cell as usize, s.class as usize, s.kind, s.rate)
                    };
                    let spec = &self.cells[cell].classes[class];
                    let volume = spec.volume_dist.sample(&mut self.rng);
                    let deadline = match &spec.sojourn_dist {
                        Some(d) => self.t + d.sample(&mut self.rng),
                        None => NEVER,
                    };
                    self.spawn(cell, class, volume, deadline, self.t);
                    self.streams[stream].next_t = self.exp_sample(rate);
                    self.stats[cell].events += 1;
                    if counted {
                        let counters = &mut self.stats[cell].classes[class];
                        match kind {
                            StreamKind::Fresh => counters.fresh_arrivals += 1,
                            StreamKind::HandoverIn => counters.handover_arrivals += 1,
                        }
                    }
                }
            }
        }
        if !self.snapshot_taken {
            self.snapshot_start();
        }
        for (state, stats) in self.states.iter().zip(&mut self.stats) {
            for (k, &n) in state.live.iter().enumerate() {
                stats.classes[k].in_flight_end = n as u64;
            }
        }
        let flows = self
            .slots
            .iter()
            .filter(|s| s.alive)
            .map(|s| Flow {
                class: s.class as usize,
                cell: s.cell as usize,
                remaining_volume: s.finish_v - self.states[s.cell as usize].v,
                sojourn_deadline: s.deadline,
                arrival_time: s.arrival_time,
            })
            .collect();
        (std::mem::take(&mut self.stats), flows)
    }
}

fn better(best: &Option<(f64, u8, u32, u32, Event)>, cand: &(f64, u8, u32, u32, Event)) -> bool {
    match best {
        None => true,
        Some(b) => (cand.0, cand.1, cand.2, cand.3) < (b.0, b.1, b.2, b.3),
    }
}
