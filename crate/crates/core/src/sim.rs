//! Continuous-time simulation of the packing process.
//!
//! Arrivals of type `i` form a Poisson process of rate `p_i r`; every live
//! item departs at rate 1. The next event is drawn from the competing
//! exponential clocks: total rate `r + N`, arrival with probability
//! `r / (r + N)`, otherwise a departure of a uniformly chosen live item.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::ModelError;
use crate::gap_index::FitIndex;
use crate::model::{Configuration, ItemId, ItemKind, ModelParams};
use crate::snapshot::parse_snapshot;

/// Seed of one replication's random stream. The ChaCha8 stream number is
/// the replication index, so replications never share randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StreamSeed {
    pub master: u64,
    pub stream: u64,
}

impl StreamSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Arrival(ItemKind),
    Departure(ItemId),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub at: f64,
}

/// What an applied event did.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaRecord {
    pub event: Event,
    pub item: ItemId,
    pub kind: ItemKind,
    /// Placement start for arrivals; start of the freed cells for departures.
    pub start: usize,
}

#[derive(Clone, Debug)]
pub struct SimState {
    params: ModelParams,
    config: Configuration,
    index: FitIndex,
    clock: f64,
    rng: ChaCha8Rng,
    events: u64,
}

impl SimState {
    pub fn new(params: ModelParams, config: Configuration, seed: StreamSeed) -> Self {
        let mut index = FitIndex::with_capacity(config.extent() + 2);
        for item in config.items() {
            index.set_occupied(item.start, item.kind.size());
        }
        Self {
            params,
            config,
            index,
            clock: 0.0,
            rng: seed.rng(),
            events: 0,
        }
    }

    #[inline]
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    #[inline]
    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn index(&self) -> &FitIndex {
        &self.index
    }

    #[inline]
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn live_items(&self) -> usize {
        self.config.len()
    }

    /// Events applied so far.
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    /// Samples the next event. The clock moves when the event is applied.
    pub fn draw_next_event(&mut self) -> Event {
        let r = self.params.r();
        let live = self.config.len();
        let total = r + live as f64;
        let wait: f64 = self.rng.sample::<f64, _>(Exp1) / total;
        let u = self.rng.random::<f64>() * total;
        let kind = if u < r || live == 0 {
            if u < self.params.arrival_rate(ItemKind::One) {
                EventKind::Arrival(ItemKind::One)
            } else {
                EventKind::Arrival(ItemKind::Two)
            }
        } else {
            let slot = self.rng.random_range(0..live);
            let item = self.config.item_at_slot(slot).expect("slot below live count");
            EventKind::Departure(item.id)
        };
        Event { kind, at: self.clock + wait }
    }

    /// Applies an event drawn for the current state and advances the clock to it.
    pub fn apply_event(&mut self, event: Event) -> DeltaRecord {
        debug_assert!(event.at >= self.clock, "events must not go back in time");
        self.clock = event.at;
        self.events += 1;
        match event.kind {
            EventKind::Arrival(kind) => {
                let start = self.index.leftmost_fit(kind.size());
                let item = self
                    .config
                    .place_at(kind, start)
                    .expect("fit index and configuration disagree");
                self.index.set_occupied(start, kind.size());
                DeltaRecord { event, item, kind, start }
            }
            EventKind::Departure(id) => {
                let item = self
                    .config
                    .remove_item(id)
                    .unwrap_or_else(|e| panic!("departure of non-live item: {e}"));
                self.index.set_free(item.start, item.kind.size());
                DeltaRecord { event, item: id, kind: item.kind, start: item.start }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Empty,
    /// All 2-items packed from the origin, then all 1-items, no gaps.
    Opposite,
    /// Configuration in the text pixmap format.
    Snapshot(String),
}

/// Configuration with `round(p2 r)` 2-items on the left and `round(p1 r)` 1-items right after.
pub fn opposite_configuration(params: &ModelParams) -> Configuration {
    let twos = params.arrival_rate(ItemKind::Two).round() as usize;
    let ones = params.arrival_rate(ItemKind::One).round() as usize;
    let mut config = Configuration::new();
    for k in 0..twos {
        config.place_at(ItemKind::Two, 2 * k).expect("packing is gapless");
    }
    for k in 0..ones {
        config.place_at(ItemKind::One, 2 * twos + k).expect("packing is gapless");
    }
    config
}

pub fn make_initial(
    init: &InitialState,
    params: ModelParams,
    seed: StreamSeed,
) -> Result<SimState, ModelError> {
    let config = match init {
        InitialState::Empty => Configuration::new(),
        InitialState::Opposite => opposite_configuration(&params),
        InitialState::Snapshot(text) => parse_snapshot(text)?,
    };
    Ok(SimState::new(params, config, seed))
}

/// Receives the state before every change.
pub trait Observer {
    /// The current state holds over `[state.clock(), state.clock() + hold)`.
    fn observe(&mut self, state: &SimState, hold: f64);

    fn on_delta(&mut self, _state: &SimState, _delta: &DeltaRecord) {}

    /// Called once with the state at the horizon.
    fn finish(&mut self, _state: &SimState) {}
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub state: SimState,
    pub events: u64,
    pub arrivals: [u64; 2],
    pub departures: u64,
}

/// Runs until the clock reaches `horizon`. The event that would cross the
/// horizon is discarded (exponential clocks are memoryless).
pub fn simulate(mut state: SimState, horizon: f64, observers: &mut [&mut dyn Observer]) -> RunResult {
    let mut arrivals = [0u64; 2];
    let mut departures = 0u64;
    let first_event = state.events;
    while state.clock < horizon {
        let event = state.draw_next_event();
        let hold = event.at.min(horizon) - state.clock;
        for observer in observers.iter_mut() {
            observer.observe(&state, hold);
        }
        if event.at >= horizon {
            state.clock = horizon;
            break;
        }
        let delta = state.apply_event(event);
        match event.kind {
            EventKind::Arrival(kind) => arrivals[kind.size() - 1] += 1,
            EventKind::Departure(_) => departures += 1,
        }
        for observer in observers.iter_mut() {
            observer.on_delta(&state, &delta);
        }
    }
    for observer in observers.iter_mut() {
        observer.finish(&state);
    }
    RunResult {
        events: state.events - first_event,
        state,
        arrivals,
        departures,
    }
}

/// Records `f(state)` at the times `start, start + period, ...` up to the horizon.
pub struct PeriodicSampler<T, F> {
    next: f64,
    period: f64,
    sample: F,
    pub samples: Vec<(f64, T)>,
}

impl<T, F: FnMut(&SimState) -> T> PeriodicSampler<T, F> {
    pub fn new(start: f64, period: f64, sample: F) -> Self {
        assert!(period > 0.0, "sampling period must be positive");
        Self { next: start, period, sample, samples: Vec::new() }
    }
}

impl<T, F: FnMut(&SimState) -> T> Observer for PeriodicSampler<T, F> {
    fn observe(&mut self, state: &SimState, hold: f64) {
        let end = state.clock() + hold;
        while self.next < end {
            if self.next >= state.clock() {
                let value = (self.sample)(state);
                self.samples.push((self.next, value));
            }
            self.next += self.period;
        }
    }

    fn finish(&mut self, state: &SimState) {
        // A sample time equal to the horizon sees the final state.
        if self.next <= state.clock() + 1e-9 * self.period {
            let value = (self.sample)(state);
            self.samples.push((self.next, value));
            self.next += self.period;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(r: f64) -> ModelParams {
        ModelParams::new(r, 0.5).unwrap()
    }

    #[test]
    fn empty_system_always_arrives() {
        let mut state = SimState::new(params(1.0), Configuration::new(), StreamSeed::new(3, 0));
        for _ in 0..1000 {
            let event = state.draw_next_event();
            assert!(matches!(event.kind, EventKind::Arrival(_)));
            assert!(event.at > 0.0);
        }
    }

    #[test]
    fn event_mix_with_one_live_item() {
        // r = 1, N = 1: P(arrival) = 1/2, P(type-1 arrival) = 1/4.
        let mut config = Configuration::new();
        config.place_first_fit(ItemKind::One);
        let mut state = SimState::new(params(1.0), config, StreamSeed::new(11, 0));
        let n = 200_000;
        let (mut arrivals, mut ones) = (0, 0);
        for _ in 0..n {
            match state.draw_next_event().kind {
                EventKind::Arrival(kind) => {
                    arrivals += 1;
                    ones += usize::from(kind == ItemKind::One);
                }
                EventKind::Departure(id) => assert_eq!(id, ItemId(0)),
            }
        }
        let pa = arrivals as f64 / n as f64;
        let p1 = ones as f64 / n as f64;
        assert!((pa - 0.5).abs() < 4.0 * (0.25f64 / n as f64).sqrt());
        assert!((p1 - 0.25).abs() < 4.0 * (0.1875f64 / n as f64).sqrt());
    }

    #[test]
    fn apply_arrival_and_departure() {
        let mut state = SimState::new(params(2.0), Configuration::new(), StreamSeed::new(0, 0));
        let delta = state.apply_event(Event { kind: EventKind::Arrival(ItemKind::Two), at: 0.5 });
        assert_eq!((delta.start, delta.item), (0, ItemId(0)));
        assert_eq!(state.config().extent(), 2);
        assert_eq!(state.clock(), 0.5);
        state.apply_event(Event { kind: EventKind::Departure(ItemId(0)), at: 0.7 });
        assert!(state.config().is_empty());
        assert_eq!(state.index().leftmost_fit(2), 0);
    }

    #[test]
    fn opposite_initial_states() {
        let config = opposite_configuration(&ModelParams::new(4.0, 0.5).unwrap());
        assert_eq!(config.count(ItemKind::Two), 2);
        assert_eq!(config.count(ItemKind::One), 2);
        assert_eq!(config.count_left_of(ItemKind::Two, 4), 2);
        assert_eq!(config.occupied_in(6), 6);
        assert_eq!(config.extent(), 6);

        let config = opposite_configuration(&ModelParams::new(5000.0, 0.5).unwrap());
        assert_eq!(config.count_left_of(ItemKind::Two, 5000), 2500);
        assert_eq!(config.count_left_of(ItemKind::One, 5000), 0);
        assert_eq!(config.count_left_of(ItemKind::One, 7500), 2500);
        assert_eq!(config.extent(), 7500);
        assert!(config.holes(7500).is_empty());
    }

    #[test]
    fn empty_init_and_zero_horizon() {
        let state = make_initial(&InitialState::Empty, params(10.0), StreamSeed::new(1, 0)).unwrap();
        assert_eq!(state.config().extent(), 0);
        let result = simulate(state, 0.0, &mut []);
        assert_eq!(result.events, 0);
        assert!(result.state.config().is_empty());
    }

    #[test]
    fn malformed_snapshot_is_rejected() {
        let init = InitialState::Snapshot("12x".into());
        assert!(make_initial(&init, params(10.0), StreamSeed::new(1, 0)).is_err());
    }

    #[test]
    fn periodic_sampler_hits_every_grid_time() {
        let state = make_initial(&InitialState::Opposite, params(20.0), StreamSeed::new(5, 0)).unwrap();
        let mut sampler = PeriodicSampler::new(0.0, 1.0, |s: &SimState| s.live_items());
        let result = simulate(state, 10.0, &mut [&mut sampler]);
        let times: Vec<f64> = sampler.samples.iter().map(|(t, _)| *t).collect();
        assert_eq!(times, (0..=10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(sampler.samples[0].1, 20);
        assert_eq!(sampler.samples[10].1, result.state.live_items());
    }
}
