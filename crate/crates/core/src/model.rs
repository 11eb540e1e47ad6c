//! Lattice occupancy model for first-fit packing on the half-axis.
//!
//! Cells are the unit intervals `[k, k + 1)` for `k >= 0`. A 1-item occupies
//! one cell, a 2-item two adjacent cells. Everything to the right of
//! [`Configuration::extent`] is empty.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Item type. The discriminant is the item size in cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ItemKind {
    One,
    Two,
}

impl ItemKind {
    pub const ALL: [ItemKind; 2] = [ItemKind::One, ItemKind::Two];

    #[inline]
    pub const fn size(self) -> usize {
        match self {
            ItemKind::One => 1,
            ItemKind::Two => 2,
        }
    }

    /// Type number as written in traces and tables (1 or 2).
    pub const fn number(self) -> u8 {
        self.size() as u8
    }

    pub fn from_number(n: u64) -> Option<Self> {
        match n {
            1 => Some(ItemKind::One),
            2 => Some(ItemKind::Two),
            _ => None,
        }
    }
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemId(pub u64);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Arrival-rate scale and type mix. Sizes are fixed at 1 and 2 cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    r: f64,
    p1: f64,
}

impl ModelParams {
    pub fn new(r: f64, p1: f64) -> Result<Self, ModelError> {
        if !(r.is_finite() && r > 0.0) {
            return Err(ModelError::InvalidParams(format!("r must be positive, got {r}")));
        }
        if !(p1 > 0.0 && p1 < 1.0) {
            return Err(ModelError::InvalidParams(format!(
                "p1 must lie strictly between 0 and 1, got {p1}"
            )));
        }
        Ok(Self { r, p1 })
    }

    #[inline]
    pub fn r(&self) -> f64 {
        self.r
    }

    #[inline]
    pub fn p1(&self) -> f64 {
        self.p1
    }

    #[inline]
    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn probability(&self, kind: ItemKind) -> f64 {
        match kind {
            ItemKind::One => self.p1(),
            ItemKind::Two => self.p2(),
        }
    }

    /// Arrival rate `p_i * r` of the given type.
    pub fn arrival_rate(&self, kind: ItemKind) -> f64 {
        self.probability(kind) * self.r
    }

    /// Space filled by the optimal packing, `(p1 + 2 p2) r`, as a cell count.
    pub fn packed_extent(&self) -> usize {
        cells(self.p1() + 2.0 * self.p2(), self.r)
    }
}

/// `floor(y * r)` as a cell index. Products are nudged by a relative epsilon
/// so that values like `0.1 * 50.0` do not round down to 4.
pub fn cells(y: f64, r: f64) -> usize {
    let x = y * r;
    if x <= 0.0 {
        return 0;
    }
    (x * (1.0 + 4.0 * f64::EPSILON)).floor() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub kind: ItemKind,
    pub start: usize,
}

impl Item {
    #[inline]
    pub fn end(&self) -> usize {
        self.start + self.kind.size()
    }
}

/// Maximal empty run bounded by occupied cells (or the origin on the left).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hole {
    pub start: usize,
    pub len: usize,
}

impl Hole {
    #[inline]
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    #[inline]
    pub fn is_odd(&self) -> bool {
        self.len % 2 == 1
    }
}

/// What occupies a single cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum CellState {
    #[default]
    Empty,
    One,
    /// Left cell of a 2-item.
    TwoHead,
    /// Right cell of a 2-item.
    TwoTail,
}

impl CellState {
    #[inline]
    pub fn is_empty(self) -> bool {
        self == CellState::Empty
    }
}

/// Occupancy state of the half-axis.
///
/// Holds two views that are kept consistent: the live items (insertion
/// ordered, O(1) swap-removal so the simulator can draw a uniform departure)
/// and a per-cell occupancy array covering `[0, extent)`.
#[derive(Clone, Debug, Default)]
pub struct Configuration {
    items: IndexMap<ItemId, Item>,
    cells: Vec<CellState>,
    owners: Vec<ItemId>,
    extent: usize,
    counts: [usize; 2],
    next_id: u64,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.extent == other.extent
            && self.next_id == other.next_id
            && self.cells[..self.extent] == other.cells[..other.extent]
            && self.items.len() == other.items.len()
            && self.items.iter().zip(other.items.iter()).all(|(a, b)| a == b)
    }
}

impl Eq for Configuration {}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of live items.
    #[inline]
    pub fn len(&self) -> usize {
        self.items.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// One past the last occupied cell, 0 when empty.
    #[inline]
    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn count(&self, kind: ItemKind) -> usize {
        self.counts[kind.size() - 1]
    }

    /// Id the next placed item will receive. Ids are never reused.
    pub fn next_id(&self) -> ItemId {
        ItemId(self.next_id)
    }

    #[inline]
    pub fn cell(&self, index: usize) -> CellState {
        self.cells.get(index).copied().unwrap_or_default()
    }

    #[inline]
    pub fn is_occupied(&self, index: usize) -> bool {
        !self.cell(index).is_empty()
    }

    /// Cell states for `[0, extent)`.
    #[inline]
    pub fn cells(&self) -> &[CellState] {
        &self.cells[..self.extent]
    }

    pub fn owner(&self, index: usize) -> Option<ItemId> {
        if self.is_occupied(index) {
            Some(self.owners[index])
        } else {
            None
        }
    }

    pub fn item(&self, id: ItemId) -> Option<&Item> {
        self.items.get(&id)
    }

    /// Live item by dense slot, `0 <= slot < len()`.
    pub fn item_at_slot(&self, slot: usize) -> Option<&Item> {
        self.items.get_index(slot).map(|(_, item)| item)
    }

    pub fn items(&self) -> impl Iterator<Item = &Item> + '_ {
        self.items.values()
    }

    /// Items ordered by start cell.
    pub fn items_by_start(&self) -> Vec<Item> {
        let mut items: Vec<Item> = self.items.values().copied().collect();
        items.sort_unstable_by_key(|item| item.start);
        items
    }

    /// Total occupied cells.
    pub fn occupied_total(&self) -> usize {
        self.counts[0] + 2 * self.counts[1]
    }

    /// Leftmost `s` such that `[s, s + size)` is empty, by direct scan.
    pub fn first_fit_start(&self, size: usize) -> usize {
        let mut run = 0;
        for (i, cell) in self.cells().iter().enumerate() {
            if cell.is_empty() {
                run += 1;
                if run == size {
                    return i + 1 - size;
                }
            } else {
                run = 0;
            }
        }
        self.extent - run
    }

    /// Places an item of `kind` at the leftmost empty interval that fits it.
    pub fn place_first_fit(&mut self, kind: ItemKind) -> (ItemId, usize) {
        let start = self.first_fit_start(kind.size());
        let id = self
            .place_at(kind, start)
            .expect("first-fit start is always vacant");
        (id, start)
    }

    /// Places an item of `kind` occupying `[start, start + size)`.
    pub fn place_at(&mut self, kind: ItemKind, start: usize) -> Result<ItemId, ModelError> {
        let end = start + kind.size();
        if (start..end).any(|c| self.is_occupied(c)) {
            return Err(ModelError::Overlap { start, len: kind.size() });
        }
        if self.cells.len() < end {
            let target = end.max(self.cells.len() * 2);
            self.cells.resize(target, CellState::Empty);
            self.owners.resize(target, ItemId(0));
        }
        let id = ItemId(self.next_id);
        self.next_id += 1;
        match kind {
            ItemKind::One => self.cells[start] = CellState::One,
            ItemKind::Two => {
                self.cells[start] = CellState::TwoHead;
                self.cells[start + 1] = CellState::TwoTail;
            }
        }
        self.owners[start..end].fill(id);
        self.items.insert(id, Item { id, kind, start });
        self.counts[kind.size() - 1] += 1;
        self.extent = self.extent.max(end);
        Ok(id)
    }

    /// Removes a live item and frees its cells.
    pub fn remove_item(&mut self, id: ItemId) -> Result<Item, ModelError> {
        let item = self
            .items
            .swap_remove(&id)
            .ok_or(ModelError::UnknownItem(id))?;
        self.cells[item.start..item.end()].fill(CellState::Empty);
        self.counts[item.kind.size() - 1] -= 1;
        if item.end() == self.extent {
            let mut e = item.start;
            while e > 0 && self.cells[e - 1].is_empty() {
                e -= 1;
            }
            self.extent = e;
        }
        Ok(item)
    }

    /// Holes lying completely within `[0, bound)`, ordered by start.
    pub fn holes(&self, bound: usize) -> Vec<Hole> {
        let limit = bound.min(self.extent);
        let mut holes = Vec::new();
        let mut run_start = None;
        for (i, cell) in self.cells[..limit].iter().enumerate() {
            match (cell.is_empty(), run_start) {
                (true, None) => run_start = Some(i),
                (false, Some(s)) => {
                    holes.push(Hole { start: s, len: i - s });
                    run_start = None;
                }
                _ => {}
            }
        }
        // A run reaching `limit` is the tail, crosses `bound`, or ends exactly at it.
        if let Some(s) = run_start {
            if self.is_occupied(limit) {
                holes.push(Hole { start: s, len: limit - s });
            }
        }
        holes
    }

    /// `F_i(x)`: items of `kind` lying completely within `[0, x)`.
    pub fn count_left_of(&self, kind: ItemKind, x: usize) -> usize {
        let limit = x.min(self.extent);
        let last_cell = match kind {
            ItemKind::One => CellState::One,
            ItemKind::Two => CellState::TwoTail,
        };
        self.cells[..limit].iter().filter(|&&c| c == last_cell).count()
    }

    /// Occupied cells with index below `bound`.
    pub fn occupied_in(&self, bound: usize) -> usize {
        let limit = bound.min(self.extent);
        self.cells[..limit].iter().filter(|c| !c.is_empty()).count()
    }
}
