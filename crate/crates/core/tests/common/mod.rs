#![allow(dead_code)]

//! Full-scan reference computations shared by the oracle tests.

use ffpack::model::cells;
use ffpack::{snapshot_observables, Configuration, ItemKind, ModelParams, PairCap, WindowSpec};
use rand::Rng;

/// Per-cell view rebuilt from the item list only.
pub struct Lattice {
    /// `Some((kind, start))` of the owning item.
    pub cells: Vec<Option<(ItemKind, usize)>>,
    pub items: Vec<(ItemKind, usize)>,
}

impl Lattice {
    pub fn of(config: &Configuration) -> Self {
        let items: Vec<_> = config.items().map(|it| (it.kind, it.start)).collect();
        let extent = items.iter().map(|&(k, s)| s + k.size()).max().unwrap_or(0);
        let mut cells = vec![None; extent];
        for &(kind, start) in &items {
            for c in start..start + kind.size() {
                assert!(cells[c].is_none());
                cells[c] = Some((kind, start));
            }
        }
        Self { cells, items }
    }

    pub fn occupied(&self, c: usize) -> bool {
        self.cells.get(c).is_some_and(|x| x.is_some())
    }

    /// Maximal empty runs bounded on both sides, as `(start, end)`.
    pub fn holes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut c = 0;
        while c < self.cells.len() {
            if self.occupied(c) {
                c += 1;
                continue;
            }
            let s = c;
            while c < self.cells.len() && !self.occupied(c) {
                c += 1;
            }
            out.push((s, c));
        }
        out
    }

    /// Every maximal empty run including the tail, the tail ending at `usize::MAX`.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        let mut runs = self.holes();
        runs.push((self.cells.len(), usize::MAX));
        runs
    }

    pub fn items_inside(&self, kind: ItemKind, hi: usize) -> usize {
        self.items.iter().filter(|&&(k, s)| k == kind && s + k.size() <= hi).count()
    }

    pub fn odd_holes_in(&self, lo: usize, hi: usize) -> usize {
        self.holes()
            .into_iter()
            .filter(|&(s, e)| s >= lo && e <= hi && (e - s) % 2 == 1)
            .count()
    }

    pub fn capacity_below(&self, hi: usize) -> usize {
        self.runs()
            .into_iter()
            .map(|(s, e)| e.min(hi).saturating_sub(s) / 2)
            .sum()
    }

    pub fn occupied_below(&self, hi: usize) -> usize {
        (0..hi).filter(|&c| self.occupied(c)).count()
    }

    /// All qualifying pairs by brute force over every pair of odd holes.
    pub fn pair_distances(&self, a: usize, b: usize) -> Vec<usize> {
        let holes = self.holes();
        let even: Vec<_> = holes.iter().copied().filter(|&(s, e)| (e - s) % 2 == 0).collect();
        let odd: Vec<_> = holes
            .iter()
            .copied()
            .filter(|&(s, e)| (e - s) % 2 == 1 && s >= a && e <= b)
            .collect();
        let mut out = Vec::new();
        for &(ls, le) in &odd {
            for &(rs, re) in &odd {
                if re - rs != 1 || ls >= rs || le > rs {
                    continue;
                }
                let covered = (le..rs).all(|c| match self.cells[c] {
                    Some((ItemKind::Two, s)) => s >= le && s + 2 <= rs,
                    Some((ItemKind::One, _)) => false,
                    None => even.iter().any(|&(es, ee)| es <= c && c < ee),
                });
                if covered {
                    out.push(rs - le);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

pub fn random_configuration(rng: &mut impl Rng, len: usize) -> Configuration {
    let mut config = Configuration::new();
    let p_empty = rng.random_range(0.02..0.6);
    let p_one = rng.random_range(0.05..0.6);
    let mut c = 0;
    while c < len {
        let u: f64 = rng.random();
        if u < p_empty {
            c += 1;
        } else if u < p_empty + (1.0 - p_empty) * p_one {
            config.place_at(ItemKind::One, c).unwrap();
            c += 1;
        } else {
            config.place_at(ItemKind::Two, c).unwrap();
            c += 2;
        }
    }
    // Remove a few items so ids and insertion order are not start order.
    for _ in 0..rng.random_range(0..4) {
        if config.is_empty() {
            break;
        }
        let id = config.item_at_slot(rng.random_range(0..config.len())).unwrap().id;
        config.remove_item(id).unwrap();
    }
    config
}

/// Draws window parameters, a configuration and compares every snapshot
/// field with the full-scan values. Returns a description of the first
/// disagreement.
pub fn check_random_snapshot(rng: &mut impl Rng, caps: &[PairCap]) -> Result<(), String> {
    let r = rng.random_range(4.0..120.0);
    let p1 = rng.random_range(0.1..0.9);
    let params = ModelParams::new(r, p1).unwrap();
    let y = rng.random_range(p1 + 0.02..2.2);
    let delta = rng.random_range(0.0..(y - p1));
    let window = WindowSpec::new(y, delta, caps.to_vec()).unwrap();
    let len = rng.random_range(0..(3.0 * r) as usize + 2);
    let config = random_configuration(rng, len);
    let lattice = Lattice::of(&config);

    let w = cells(y, r);
    let lower = cells(p1, r);
    let sub = cells(p1 + delta, r);
    let packed = cells(p1 + 2.0 * (1.0 - p1), r);
    let s = snapshot_observables(&config, &params, &window);
    let distances = lattice.pair_distances(sub, w);
    let mut expected_u = Vec::new();
    for &(cap, _) in &s.u {
        expected_u.push((cap, distances.iter().filter(|&&d| cap.admits(d)).count()));
    }
    let checks = [
        ("Y", s.y, lattice.items_inside(ItemKind::One, w)),
        ("Z", s.z, lattice.items_inside(ItemKind::Two, w)),
        ("X", s.x, lattice.occupied_below(w)),
        ("D", s.d, lattice.capacity_below(w)),
        ("G", s.g, lattice.odd_holes_in(0, w)),
        ("G1", s.g1, lattice.odd_holes_in(0, lower)),
        ("Gdelta", s.g_delta, lattice.odd_holes_in(sub, w)),
        ("wasted", s.wasted, packed - lattice.occupied_below(packed)),
    ];
    for (name, got, want) in checks {
        if got != want {
            return Err(format!("{name}: {got} != {want} (r={r} p1={p1} y={y} delta={delta})"));
        }
    }
    if s.u != expected_u {
        return Err(format!("U: {:?} != {:?} (r={r} p1={p1} y={y} delta={delta})", s.u, expected_u));
    }
    if s.g1_zero != (s.g1 == 0) || s.g_zero_d_pos != (s.g == 0 && s.d > 0) {
        return Err("indicator flags disagree with counts".into());
    }
    Ok(())
}
