//! Window statistics of a configuration.
//!
//! Holes and items count toward a window only when they lie completely
//! inside it. Empty runs crossing a window edge (including the unbounded
//! tail) are clipped: they contribute to the 2-item capacity `D` and to the
//! empty-space accounting, never to the odd-hole counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;
use crate::model::{cells, CellState, Configuration, ItemKind, ModelParams};

/// Distance cap `i` of the `U^{i,delta}` pair counts; `Infinite` means uncapped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairCap {
    Finite(u32),
    Infinite,
}

impl PairCap {
    /// Whether two holes `distance` cells apart are within the cap (`distance <= 2i`).
    #[inline]
    pub fn admits(self, distance: usize) -> bool {
        match self {
            PairCap::Finite(i) => distance <= 2 * i as usize,
            PairCap::Infinite => true,
        }
    }
}

impl fmt::Display for PairCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairCap::Finite(i) => write!(f, "{i}"),
            PairCap::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for PairCap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(PairCap::Infinite);
        }
        match s.parse::<u32>() {
            Ok(i) if i >= 1 => Ok(PairCap::Finite(i)),
            _ => Err(format!("pair cap must be a positive integer or 'inf', got {s:?}")),
        }
    }
}

impl Serialize for PairCap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            PairCap::Finite(i) => serializer.serialize_u32(*i),
            PairCap::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PairCap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(i) => i.to_string().parse().map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Observation window `[0, y r)` with the sub-window `[(p1 + delta) r, y r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub y: f64,
    pub delta: f64,
    pub caps: Vec<PairCap>,
}

impl WindowSpec {
    pub fn new(y: f64, delta: f64, caps: Vec<PairCap>) -> Result<Self, ModelError> {
        if !(y.is_finite() && y > 0.0) {
            return Err(ModelError::InvalidParams(format!("window y must be positive, got {y}")));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "delta must be non-negative, got {delta}"
            )));
        }
        Ok(Self { y, delta, caps })
    }

    /// Checks `delta < y - p1`, required for the `G^delta` and `U` statistics.
    pub fn check_sub_window(&self, params: &ModelParams) -> Result<(), ModelError> {
        if self.delta < self.y - params.p1() {
            Ok(())
        } else {
            Err(ModelError::InvalidParams(format!(
                "delta = {} must be below y - p1 = {}",
                self.delta,
                self.y - params.p1()
            )))
        }
    }

    pub fn bounds(&self, params: &ModelParams) -> WindowBounds {
        let r = params.r();
        WindowBounds {
            window: cells(self.y, r),
            lower: cells(params.p1(), r),
            sub_start: cells(params.p1() + self.delta, r),
            packed: params.packed_extent(),
        }
    }
}

/// Integer cell bounds derived from a [`WindowSpec`], all rounded down.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowBounds {
    /// `y r`
    pub window: usize,
    /// `p1 r`
    pub lower: usize,
    /// `(p1 + delta) r`
    pub sub_start: usize,
    /// `(p1 + 2 p2) r`
    pub packed: usize,
}

/// Counts over a half-open cell range `[lo, hi)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WindowCounts {
    /// 1-items completely inside.
    pub ones: usize,
    /// 2-items completely inside.
    pub twos: usize,
    /// Occupied cells.
    pub occupied: usize,
    /// Number of 2-items that fit into the empty cells of the range.
    pub two_capacity: usize,
    /// Odd-size holes completely inside.
    pub odd_holes: usize,
}

/// Scans `[lo, hi)` once and returns its [`WindowCounts`].
pub fn window_counts(config: &Configuration, lo: usize, hi: usize) -> WindowCounts {
    let mut counts = WindowCounts::default();
    if hi <= lo {
        return counts;
    }
    let cells = config.cells();
    let scan_end = hi.min(cells.len());
    // Start of the empty segment being scanned, and whether it is bounded on the left.
    let mut run: Option<(usize, bool)> = None;
    for c in lo..scan_end {
        match cells[c] {
            CellState::Empty => {
                if run.is_none() {
                    let bounded = c == 0 || (c > lo || !cells[c - 1].is_empty());
                    run = Some((c, bounded));
                }
                continue;
            }
            CellState::One => counts.ones += 1,
            CellState::TwoHead => {}
            CellState::TwoTail => {
                if c > lo {
                    counts.twos += 1;
                }
            }
        }
        counts.occupied += 1;
        if let Some((start, bounded)) = run.take() {
            let len = c - start;
            counts.two_capacity += len / 2;
            if bounded && len % 2 == 1 {
                counts.odd_holes += 1;
            }
        }
    }
    // Whatever is left is clipped at `hi` or runs into the tail.
    let trailing_start = match run {
        Some((start, _)) => start,
        None => scan_end,
    };
    if hi > trailing_start {
        let len = hi - trailing_start;
        if hi < cells.len() && !cells[hi].is_empty() {
            // Bounded hole ending exactly at `hi`.
            let bounded = run.is_none_or(|(_, b)| b);
            if bounded && len % 2 == 1 {
                counts.odd_holes += 1;
            }
        }
        counts.two_capacity += len / 2;
    }
    counts
}

/// Distances `hR.start - hL.end` of the odd-hole pairs in `[a, b)` counted by `U`:
/// both holes odd and completely inside, the right one of size 1, and only
/// 2-items and even holes in between.
///
/// Any odd hole between two others breaks the "only even holes" condition, so
/// only consecutive odd holes can pair.
pub fn pair_distances(config: &Configuration, a: usize, b: usize) -> Vec<usize> {
    let mut distances = Vec::new();
    let cells = config.cells();
    let end = b.min(cells.len());
    if end <= a {
        return distances;
    }
    // End of the most recent odd hole with nothing but 2-items and even holes since.
    let mut open_left: Option<usize> = None;
    let mut run: Option<(usize, bool)> = None;
    let mut c = a;
    while c < end {
        let cell = cells[c];
        if cell.is_empty() {
            if run.is_none() {
                run = Some((c, c == 0 || c > a || !cells[c - 1].is_empty()));
            }
            c += 1;
            continue;
        }
        if let Some((start, bounded)) = run.take() {
            let len = c - start;
            if !bounded {
                open_left = None;
            } else if len % 2 == 1 {
                if let (1, Some(left_end)) = (len, open_left) {
                    distances.push(start - left_end);
                }
                open_left = Some(c);
            }
        }
        match cell {
            CellState::One => open_left = None,
            CellState::TwoHead if c + 1 >= end => open_left = None,
            _ => {}
        }
        c += 1;
    }
    // A run reaching `end` is clipped or the tail. A hole ending exactly at `b`
    // is complete only if cell `b` is occupied.
    if let Some((start, bounded)) = run {
        if end == b && b < cells.len() && !cells[b].is_empty() && bounded {
            let len = b - start;
            if len == 1 {
                if let Some(left_end) = open_left {
                    distances.push(start - left_end);
                }
            }
        }
    }
    distances
}

/// `U^{i,delta}`-style count of odd-hole pairs in `[a, b)` within the cap.
pub fn count_pairs(config: &Configuration, a: usize, b: usize, cap: PairCap) -> usize {
    pair_distances(config, a, b)
        .into_iter()
        .filter(|&d| cap.admits(d))
        .count()
}

/// Empty cells below `(p1 + 2 p2) r`, the region the optimal packing fills.
pub fn wasted_space(config: &Configuration, params: &ModelParams) -> usize {
    let packed = params.packed_extent();
    packed - config.occupied_in(packed)
}

/// All window statistics at one instant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ObservableSnapshot {
    /// `F1(y r)`
    pub y: usize,
    /// `F2(y r)`
    pub z: usize,
    /// Occupied cells in `[0, y r)`.
    pub x: usize,
    /// 2-item capacity of the empty space in `[0, y r)`.
    pub d: usize,
    /// Odd holes in `[0, y r)`.
    pub g: usize,
    /// Odd holes in `[0, p1 r)`.
    pub g1: usize,
    /// Odd holes in `[(p1 + delta) r, y r)`.
    pub g_delta: usize,
    /// `U^{i,delta}` for each requested cap, in request order.
    pub u: Vec<(PairCap, usize)>,
    /// Empty cells in `[0, (p1 + 2 p2) r)`.
    pub wasted: usize,
    pub g1_zero: bool,
    pub g_zero_d_pos: bool,
}

pub fn snapshot_observables(
    config: &Configuration,
    params: &ModelParams,
    window: &WindowSpec,
) -> ObservableSnapshot {
    snapshot_detail(config, params, window).snapshot
}

/// A snapshot together with the raw counts of `[0, p1 r)` and `[0, (p1 + 2 p2) r)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotDetail {
    pub snapshot: ObservableSnapshot,
    pub lower: WindowCounts,
    pub packed: WindowCounts,
}

pub fn snapshot_detail(
    config: &Configuration,
    params: &ModelParams,
    window: &WindowSpec,
) -> SnapshotDetail {
    let bounds = window.bounds(params);
    let main = window_counts(config, 0, bounds.window);
    let lower = window_counts(config, 0, bounds.lower);
    let packed = window_counts(config, 0, bounds.packed);
    let sub = window_counts(config, bounds.sub_start, bounds.window);
    let distances = pair_distances(config, bounds.sub_start, bounds.window);
    let u = window
        .caps
        .iter()
        .map(|&cap| (cap, distances.iter().filter(|&&d| cap.admits(d)).count()))
        .collect();
    let snapshot = ObservableSnapshot {
        y: main.ones,
        z: main.twos,
        x: main.occupied,
        d: main.two_capacity,
        g: main.odd_holes,
        g1: lower.odd_holes,
        g_delta: sub.odd_holes,
        u,
        wasted: bounds.packed - packed.occupied,
        g1_zero: lower.odd_holes == 0,
        g_zero_d_pos: main.odd_holes == 0 && main.two_capacity > 0,
    };
    SnapshotDetail { snapshot, lower, packed }
}

/// Space-and-mass rescaled occupancy profile `f_i(x) = F_i(r x) / r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RescaledProfile {
    pub ones: Vec<(f64, f64)>,
    pub twos: Vec<(f64, f64)>,
}

/// Evaluates the rescaled profile at `x = 0, step, 2 step, ...` up to `extent / r + step`.
pub fn rescaled_profile(config: &Configuration, r: f64, step: f64) -> RescaledProfile {
    assert!(step > 0.0, "grid step must be positive");
    // prefix[k][c] = items of type k completely inside [0, c)
    let cells_slice = config.cells();
    let mut prefix = [vec![0usize; cells_slice.len() + 1], vec![0usize; cells_slice.len() + 1]];
    for (c, cell) in cells_slice.iter().enumerate() {
        prefix[0][c + 1] = prefix[0][c] + usize::from(*cell == CellState::One);
        prefix[1][c + 1] = prefix[1][c] + usize::from(*cell == CellState::TwoTail);
    }
    let x_max = config.extent() as f64 / r + step;
    let steps = (x_max / step * (1.0 + 4.0 * f64::EPSILON)).floor() as usize;
    let mut profile = RescaledProfile {
        ones: Vec::with_capacity(steps + 1),
        twos: Vec::with_capacity(steps + 1),
    };
    for k in 0..=steps {
        let x = k as f64 * step;
        let cell = cells(x, r).min(cells_slice.len());
        profile.ones.push((x, prefix[0][cell] as f64 / r));
        profile.twos.push((x, prefix[1][cell] as f64 / r));
    }
    profile
}

/// Count of a type over the whole axis, scaled by `1/r`.
pub fn total_scaled(config: &Configuration, kind: ItemKind, r: f64) -> f64 {
    config.count(kind) as f64 / r
}
