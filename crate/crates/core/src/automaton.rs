//! Threshold growth on the square lattice.
//!
//! Sites of a finite rectangle activate when enough already-active sites
//! sit on the four axis arms around them. This module computes closures
//! (eventually active sets) for the plain threshold rule and for an
//! enhanced rectangle-filling rule, decides internal spanning, decomposes
//! spanned rectangles through a deterministic merge procedure, evaluates
//! a corner-seed nucleation event exactly and by sampling, and estimates
//! spanning probabilities by exhaustive enumeration or seeded Monte
//! Carlo.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::CoreError;
use crate::gap;
use crate::math;

/// Lattice site, addressed as `(x, y)`.
pub type Site = (i64, i64);

/// Two-sided 99% normal quantile used for the confidence intervals here.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// Largest square side accepted by the exhaustive spanning enumeration.
pub const MAX_EXHAUSTIVE_SIDE: u32 = 5;

/// Cap on grid cells so a malformed rectangle cannot trigger an absurd
/// allocation.
const MAX_GRID_CELLS: i64 = 1 << 28;

/// Update rule family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// A site activates once at least `theta` sites of its cross
    /// neighborhood are active.
    Original,
    /// Rectangle-filling rules: any `k` active sites sharing a cross
    /// neighborhood activate their whole bounding rectangle, and any
    /// site with two active nearest neighbors activates.
    Enhanced,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Enhanced => "enhanced",
        }
    }
}

/// Growth-rule parameters: arm length `k` (the cross neighborhood spans
/// `k - 1` sites along each axis direction, `4(k-1)` sites total),
/// activation threshold `theta`, and rule variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelParams {
    k: u32,
    theta: u32,
    variant: Variant,
}

impl ModelParams {
    /// Plain threshold rule with the default threshold `theta = k`.
    pub fn original(k: u32) -> Result<Self, CoreError> {
        Self::new(k, k, Variant::Original)
    }

    /// Rectangle-filling rule. `theta` is not consulted by this variant.
    pub fn enhanced(k: u32) -> Result<Self, CoreError> {
        Self::new(k, k, Variant::Enhanced)
    }

    /// Free choice of threshold. Thresholds below `k` let a seed escape
    /// its bounding rectangle (closure then reports the escape as an
    /// error), and thresholds above `2k - 2` freeze every finite seed
    /// that lacks a fully occupied `k` by `k` square, so the interesting
    /// regime is `theta = k`.
    pub fn new(k: u32, theta: u32, variant: Variant) -> Result<Self, CoreError> {
        if k < 2 {
            return Err(CoreError::BadParameter {
                what: "neighborhood parameter k must be at least 2",
            });
        }
        if theta == 0 {
            return Err(CoreError::BadParameter {
                what: "activation threshold must be positive",
            });
        }
        Ok(ModelParams { k, theta, variant })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn theta(&self) -> u32 {
        self.theta
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Offsets of the cross neighborhood, `4(k-1)` sites.
    pub fn neighborhood(&self) -> Vec<Site> {
        let mut offs = Vec::with_capacity(4 * (self.k as usize - 1));
        for v in 1..self.k as i64 {
            offs.extend_from_slice(&[(v, 0), (-v, 0), (0, v), (0, -v)]);
        }
        offs
    }
}

/// Axis-aligned block of sites `{a..=c} x {b..=d}`. Constructors check
/// the corner order; code that builds values directly must keep
/// `a <= c` and `b <= d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rectangle {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Rectangle {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self, CoreError> {
        if a > c || b > d {
            return Err(CoreError::BadParameter {
                what: "rectangle corners out of order",
            });
        }
        Ok(Rectangle { a, b, c, d })
    }

    /// The square `{1..=side} x {1..=side}`.
    pub fn square(side: i64) -> Result<Self, CoreError> {
        Self::new(1, 1, side, side)
    }

    /// Smallest rectangle containing all of `sites`; `None` when empty.
    pub fn bounding(sites: &[Site]) -> Option<Self> {
        let (&first, rest) = sites.split_first()?;
        let mut r = Rectangle {
            a: first.0,
            b: first.1,
            c: first.0,
            d: first.1,
        };
        for &(x, y) in rest {
            r.a = r.a.min(x);
            r.b = r.b.min(y);
            r.c = r.c.max(x);
            r.d = r.d.max(y);
        }
        Some(r)
    }

    pub fn width(&self) -> i64 {
        self.c - self.a + 1
    }

    pub fn height(&self) -> i64 {
        self.d - self.b + 1
    }

    /// Longer side length.
    pub fn long(&self) -> i64 {
        self.width().max(self.height())
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn contains(&self, z: Site) -> bool {
        self.a <= z.0 && z.0 <= self.c && self.b <= z.1 && z.1 <= self.d
    }

    pub fn contains_rect(&self, other: &Rectangle) -> bool {
        self.a <= other.a && other.c <= self.c && self.b <= other.b && other.d <= self.d
    }

    pub fn union_bbox(&self, other: &Rectangle) -> Rectangle {
        Rectangle {
            a: self.a.min(other.a),
            b: self.b.min(other.b),
            c: self.c.max(other.c),
            d: self.d.max(other.d),
        }
    }

    /// Rectangle grown by `margin` on every side.
    pub fn grow(&self, margin: i64) -> Rectangle {
        Rectangle {
            a: self.a - margin,
            b: self.b - margin,
            c: self.c + margin,
            d: self.d + margin,
        }
    }

    /// Smallest sup-norm distance between a site of `self` and a site of
    /// `other`; zero when they overlap. The minimum factors through the
    /// axes, so it is the larger of the two interval gaps.
    pub fn dist(&self, other: &Rectangle) -> i64 {
        fn axis_gap(lo1: i64, hi1: i64, lo2: i64, hi2: i64) -> i64 {
            (lo2 - hi1).max(lo1 - hi2).max(0)
        }
        axis_gap(self.a, self.c, other.a, other.c).max(axis_gap(self.b, self.d, other.b, other.d))
    }

    /// Row-major iterator over the sites.
    pub fn sites(&self) -> impl Iterator<Item = Site> {
        let (a, c) = (self.a, self.c);
        (self.b..=self.d).flat_map(move |y| (a..=c).map(move |x| (x, y)))
    }
}

/// Finite grid holding one configuration: the initial (occupied) sites
/// and the current (active) sites, with active always a superset of
/// occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    bounds: Rectangle,
    width: usize,
    occupied: Vec<u64>,
    active: Vec<u64>,
}

fn bit_get(bits: &[u64], i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

/// Sets bit `i`; true when it was previously clear.
fn bit_set(bits: &mut [u64], i: usize) -> bool {
    let word = &mut bits[i / 64];
    let mask = 1u64 << (i % 64);
    let fresh = *word & mask == 0;
    *word |= mask;
    fresh
}

impl Grid {
    pub fn new(bounds: Rectangle) -> Result<Self, CoreError> {
        if bounds.area() > MAX_GRID_CELLS {
            return Err(CoreError::BadParameter {
                what: "grid bounds exceed the supported cell count",
            });
        }
        let words = (bounds.area() as usize).div_ceil(64);
        Ok(Grid {
            bounds,
            width: bounds.width() as usize,
            occupied: vec![0; words],
            active: vec![0; words],
        })
    }

    pub fn from_occupied(bounds: Rectangle, sites: &[Site]) -> Result<Self, CoreError> {
        let mut grid = Self::new(bounds)?;
        for &z in sites {
            grid.occupy(z)?;
        }
        Ok(grid)
    }

    pub fn bounds(&self) -> Rectangle {
        self.bounds
    }

    fn idx(&self, z: Site) -> Option<usize> {
        if !self.bounds.contains(z) {
            return None;
        }
        Some((z.1 - self.bounds.b) as usize * self.width + (z.0 - self.bounds.a) as usize)
    }

    /// Marks a site occupied (and therefore active).
    pub fn occupy(&mut self, z: Site) -> Result<(), CoreError> {
        let i = self.idx(z).ok_or(CoreError::BadParameter {
            what: "site lies outside the grid bounds",
        })?;
        bit_set(&mut self.occupied, i);
        bit_set(&mut self.active, i);
        Ok(())
    }

    fn mark_active(&mut self, z: Site) -> bool {
        match self.idx(z) {
            Some(i) => bit_set(&mut self.active, i),
            None => false,
        }
    }

    pub fn is_occupied(&self, z: Site) -> bool {
        self.idx(z).is_some_and(|i| bit_get(&self.occupied, i))
    }

    pub fn is_active(&self, z: Site) -> bool {
        self.idx(z).is_some_and(|i| bit_get(&self.active, i))
    }

    pub fn occupied_count(&self) -> u64 {
        self.occupied.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn active_count(&self) -> u64 {
        self.active.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn fully_active(&self) -> bool {
        self.active_count() == self.bounds.area() as u64
    }

    pub fn occupied_sites(&self) -> Vec<Site> {
        self.collect_sites(&self.occupied)
    }

    pub fn active_sites(&self) -> Vec<Site> {
        self.collect_sites(&self.active)
    }

    fn collect_sites(&self, bits: &[u64]) -> Vec<Site> {
        self.bounds
            .sites()
            .enumerate()
            .filter(|&(i, _)| bit_get(bits, i))
            .map(|(_, z)| z)
            .collect()
    }

    /// Run-length encoding of the occupied sites, rows bottom to top
    /// separated by `/`, runs as `<len>#` (occupied) or `<len>.` (empty).
    pub fn occupied_rle(&self) -> String {
        self.rle(&self.occupied)
    }

    /// Run-length encoding of the active sites in the same format.
    pub fn active_rle(&self) -> String {
        self.rle(&self.active)
    }

    fn rle(&self, bits: &[u64]) -> String {
        let mut out = String::new();
        for y in self.bounds.b..=self.bounds.d {
            if y > self.bounds.b {
                out.push('/');
            }
            let mut run_char = ' ';
            let mut run_len = 0u64;
            for x in self.bounds.a..=self.bounds.c {
                let i = self.idx((x, y)).expect("row iteration stays in bounds");
                let ch = if bit_get(bits, i) { '#' } else { '.' };
                if ch == run_char {
                    run_len += 1;
                } else {
                    if run_len > 0 {
                        out.push_str(&format!("{run_len}{run_char}"));
                    }
                    run_char = ch;
                    run_len = 1;
                }
            }
            out.push_str(&format!("{run_len}{run_char}"));
        }
        out
    }
}

/// Eventually active set of `grid`, returned as a grid with the same
/// bounds.
///
/// Evolution is simulated on a frame extended by a margin ring. Neither
/// rule variant can activate a site outside the bounding rectangle of
/// the already active set when `theta >= k`, and the ring is inspected
/// after the fixed point is reached, so any escape (possible only for
/// `theta < k`) surfaces as `InvariantViolated` rather than a silently
/// clipped answer.
pub fn closure(grid: &Grid, params: &ModelParams) -> Result<Grid, CoreError> {
    let margin = (params.k as i64 - 1).max(1);
    let mut work = Grid::new(grid.bounds.grow(margin))?;
    let mut queue = grid.occupied_sites();
    for &z in &queue {
        work.occupy(z)?;
    }
    while let Some(z) = queue.pop() {
        match params.variant {
            Variant::Original => step_original(&mut work, params, z, &mut queue),
            Variant::Enhanced => step_enhanced(&mut work, params, z, &mut queue),
        }
    }
    for z in work.bounds.sites() {
        if !grid.bounds.contains(z) && work.is_active(z) {
            return Err(CoreError::InvariantViolated {
                what: "growth escaped the bounding rectangle of its seed",
            });
        }
    }
    let mut out = grid.clone();
    for z in grid.bounds.sites() {
        if work.is_active(z) {
            out.mark_active(z);
        }
    }
    Ok(out)
}

fn cross_offsets(reach: i64) -> impl Iterator<Item = Site> {
    (1..=reach).flat_map(|v| [(v, 0), (-v, 0), (0, v), (0, -v)])
}

fn try_activate(work: &mut Grid, queue: &mut Vec<Site>, z: Site) {
    if work.mark_active(z) {
        queue.push(z);
    }
}

/// Threshold rule: re-examine every inactive site whose cross
/// neighborhood contains the newly active `z`.
fn step_original(work: &mut Grid, params: &ModelParams, z: Site, queue: &mut Vec<Site>) {
    let reach = params.k as i64 - 1;
    for (dx, dy) in cross_offsets(reach) {
        let cand = (z.0 + dx, z.1 + dy);
        if work.is_active(cand) || work.idx(cand).is_none() {
            continue;
        }
        let mut count = 0;
        for (ex, ey) in cross_offsets(reach) {
            if work.is_active((cand.0 + ex, cand.1 + ey)) {
                count += 1;
                if count >= params.theta {
                    break;
                }
            }
        }
        if count >= params.theta {
            try_activate(work, queue, cand);
        }
    }
}

const NEAREST: [Site; 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Rectangle-filling rules, triggered by the newly active `z`: the pair
/// rule re-examines the nearest neighbors of `z`, and the fill rule
/// enumerates, for every anchor whose cross neighborhood contains `z`,
/// the `k`-subsets of active neighborhood sites that include `z` and
/// activates each subset's bounding rectangle.
fn step_enhanced(work: &mut Grid, params: &ModelParams, z: Site, queue: &mut Vec<Site>) {
    for (dx, dy) in NEAREST {
        let cand = (z.0 + dx, z.1 + dy);
        if work.is_active(cand) || work.idx(cand).is_none() {
            continue;
        }
        let active_nn = NEAREST
            .iter()
            .filter(|(ex, ey)| work.is_active((cand.0 + ex, cand.1 + ey)))
            .count();
        if active_nn >= 2 {
            try_activate(work, queue, cand);
        }
    }

    let reach = params.k as i64 - 1;
    let need = params.k as usize - 1;
    let mut others: Vec<Site> = Vec::new();
    let mut chosen: Vec<Site> = Vec::new();
    for (dx, dy) in cross_offsets(reach) {
        let anchor = (z.0 + dx, z.1 + dy);
        others.clear();
        for (ex, ey) in cross_offsets(reach) {
            let w = (anchor.0 + ex, anchor.1 + ey);
            if w != z && work.is_active(w) {
                others.push(w);
            }
        }
        if others.len() < need {
            continue;
        }
        for_each_subset(&others, need, 0, &mut chosen, &mut |subset| {
            let mut bbox = Rectangle {
                a: z.0,
                b: z.1,
                c: z.0,
                d: z.1,
            };
            for &(x, y) in subset {
                bbox.a = bbox.a.min(x);
                bbox.b = bbox.b.min(y);
                bbox.c = bbox.c.max(x);
                bbox.d = bbox.d.max(y);
            }
            for site in bbox.sites() {
                try_activate(work, queue, site);
            }
        });
    }
}

/// Calls `visit` with every `need`-element subset of `pool`, in index
/// order.
fn for_each_subset<F: FnMut(&[Site])>(
    pool: &[Site],
    need: usize,
    start: usize,
    chosen: &mut Vec<Site>,
    visit: &mut F,
) {
    if chosen.len() == need {
        visit(chosen);
        return;
    }
    let remaining = need - chosen.len();
    if pool.len() - start < remaining {
        return;
    }
    for i in start..=pool.len() - remaining {
        chosen.push(pool[i]);
        for_each_subset(pool, need, i + 1, chosen, visit);
        chosen.pop();
    }
}

/// Whether the occupied sites inside `rect` eventually activate all of
/// `rect`. Sites outside `rect` are ignored: spanning is a property of
/// the configuration restricted to the region.
pub fn is_internally_spanned(
    rect: Rectangle,
    occupied: &[Site],
    params: &ModelParams,
) -> Result<bool, CoreError> {
    let inside: Vec<Site> = occupied.iter().copied().filter(|&z| rect.contains(z)).collect();
    let grid = Grid::from_occupied(rect, &inside)?;
    Ok(closure(&grid, params)?.fully_active())
}

/// Necessary condition for spanning: no `k` consecutive columns of
/// `rect` and no `k` consecutive rows are entirely unoccupied.
pub fn traversability_check(rect: Rectangle, occupied: &[Site], k: u32) -> Result<bool, CoreError> {
    if k == 0 {
        return Err(CoreError::BadParameter {
            what: "run length k must be at least 1",
        });
    }
    let mut col_occupied = vec![false; rect.width() as usize];
    let mut row_occupied = vec![false; rect.height() as usize];
    for &z in occupied {
        if rect.contains(z) {
            col_occupied[(z.0 - rect.a) as usize] = true;
            row_occupied[(z.1 - rect.b) as usize] = true;
        }
    }
    let longest_gap = |flags: &[bool]| {
        let mut best = 0u32;
        let mut run = 0u32;
        for &f in flags {
            run = if f { 0 } else { run + 1 };
            best = best.max(run);
        }
        best
    };
    Ok(longest_gap(&col_occupied) < k && longest_gap(&row_occupied) < k)
}

/// Rectangle in a merge state together with the occupied sites
/// responsible for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanEntry {
    /// Closure of `witness`.
    pub rect: Rectangle,
    /// Subset of the input sites whose closure is `rect`; disjoint from
    /// every sibling entry's witness.
    pub witness: Vec<Site>,
}

/// One merge performed by [`span_algorithm`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeStep {
    /// Entries whose rectangles formed the merged group, sorted by
    /// rectangle.
    pub members: Vec<SpanEntry>,
    /// Replacement entry: the group's bounding rectangle with the union
    /// of the member witnesses.
    pub merged: SpanEntry,
    /// Non-member entries removed because the merged rectangle contains
    /// them.
    pub absorbed: Vec<SpanEntry>,
}

/// Full trace of a rectangle-merging run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanOutcome {
    /// Surviving entries once no mergeable group remains, sorted by
    /// rectangle.
    pub final_set: Vec<SpanEntry>,
    pub steps: Vec<MergeStep>,
}

/// Builds the closure of `occupied` under the enhanced rule bottom-up.
///
/// Starting from singleton rectangles, repeatedly find a group of
/// `2..=k` of the current rectangles, pairwise within sup-norm distance
/// `2k`, whose union activates its whole bounding box; replace the group
/// (and any other rectangle inside that box) by the box, keeping the
/// union of the members' witnesses. The union of the final rectangles
/// equals the enhanced closure of the input, and when that closure is a
/// full rectangle the last step exhibits it as a merge of `2..=k`
/// disjointly witnessed strict sub-rectangles.
///
/// Whether a group qualifies depends only on its members, so validated
/// candidates are kept in pools across merges. Pair groups are tried
/// first and larger groups are enumerated only once no pair qualifies
/// (pairs do almost all of the merging, and enumerating triples over a
/// dense set of singletons is the one genuinely expensive step); within
/// a stage each step picks the candidate with the smallest bounding box,
/// ties broken by rectangle order, which makes runs reproducible.
pub fn span_algorithm(occupied: &[Site], params: &ModelParams) -> Result<SpanOutcome, CoreError> {
    if params.variant != Variant::Enhanced {
        return Err(CoreError::BadParameter {
            what: "rectangle merging is defined for the enhanced variant",
        });
    }
    let mut sites: Vec<Site> = occupied.to_vec();
    sites.sort_unstable();
    sites.dedup();
    if sites.is_empty() {
        return Err(CoreError::BadParameter {
            what: "rectangle merging needs at least one occupied site",
        });
    }

    let max_group = params.k as usize;
    let reach = 2 * params.k as i64;
    let mut entries: BTreeMap<u32, SpanEntry> = BTreeMap::new();
    for (i, &z) in sites.iter().enumerate() {
        entries.insert(
            i as u32,
            SpanEntry {
                rect: Rectangle {
                    a: z.0,
                    b: z.1,
                    c: z.0,
                    d: z.1,
                },
                witness: vec![z],
            },
        );
    }
    let mut next_id = sites.len() as u32;

    let mut pair_pool: Vec<GroupCandidate> = Vec::new();
    let ids: Vec<u32> = entries.keys().copied().collect();
    collect_groups(&entries, &ids, None, 2, 2, reach, params, &mut pair_pool)?;
    let mut big_pool: Option<Vec<GroupCandidate>> = None;

    let mut steps: Vec<MergeStep> = Vec::new();
    loop {
        prune_dead(&mut pair_pool, &entries);
        let mut best = take_best(&pair_pool);
        if best.is_none() && max_group >= 3 {
            if big_pool.is_none() {
                let ids: Vec<u32> = entries.keys().copied().collect();
                let mut pool = Vec::new();
                collect_groups(&entries, &ids, None, 3, max_group, reach, params, &mut pool)?;
                big_pool = Some(pool);
            }
            let pool = big_pool.as_mut().expect("initialized above");
            prune_dead(pool, &entries);
            best = take_best(pool);
        }
        let Some(best) = best else {
            break;
        };

        let members: Vec<SpanEntry> = {
            let mut m: Vec<SpanEntry> =
                best.ids.iter().map(|id| entries[id].clone()).collect();
            m.sort_by_key(|e| e.rect);
            m
        };
        let merged_rect = members
            .iter()
            .skip(1)
            .fold(members[0].rect, |acc, e| acc.union_bbox(&e.rect));
        let mut witness: Vec<Site> = members.iter().flat_map(|e| e.witness.iter().copied()).collect();
        witness.sort_unstable();
        witness.dedup();
        let merged = SpanEntry {
            rect: merged_rect,
            witness,
        };
        if !is_internally_spanned(merged_rect, &merged.witness, params)? {
            return Err(CoreError::InvariantViolated {
                what: "merged rectangle is not the closure of its witness",
            });
        }

        let absorbed_ids: Vec<u32> = entries
            .iter()
            .filter(|(_, e)| merged_rect.contains_rect(&e.rect))
            .map(|(&id, _)| id)
            .collect();
        let absorbed: Vec<SpanEntry> = absorbed_ids
            .iter()
            .filter(|id| !best.ids.contains(id))
            .map(|id| entries[id].clone())
            .collect();
        for id in &absorbed_ids {
            entries.remove(id);
        }
        let new_id = next_id;
        next_id += 1;
        entries.insert(new_id, merged.clone());
        steps.push(MergeStep {
            members,
            merged,
            absorbed,
        });

        let ids: Vec<u32> = entries.keys().copied().collect();
        collect_groups(&entries, &ids, Some(new_id), 2, 2, reach, params, &mut pair_pool)?;
        if let Some(pool) = big_pool.as_mut() {
            collect_groups(&entries, &ids, Some(new_id), 3, max_group, reach, params, pool)?;
        }
    }

    let mut final_set: Vec<SpanEntry> = entries.into_values().collect();
    final_set.sort_by_key(|e| e.rect);
    Ok(SpanOutcome { final_set, steps })
}

/// Validated merge candidate: the member ids, the bounding box area used
/// as the primary selection key, and the sorted member rectangles used
/// as the tie breaker.
struct GroupCandidate {
    ids: Vec<u32>,
    area: i64,
    rect_key: Vec<Rectangle>,
}

fn prune_dead(pool: &mut Vec<GroupCandidate>, entries: &BTreeMap<u32, SpanEntry>) {
    pool.retain(|cand| cand.ids.iter().all(|id| entries.contains_key(id)));
}

/// Smallest candidate by (bounding box area, sorted member rectangles).
/// Entry rectangles are pairwise distinct, so the key never ties.
fn take_best(pool: &[GroupCandidate]) -> Option<GroupCandidate> {
    pool.iter()
        .min_by(|p, q| p.area.cmp(&q.area).then_with(|| p.rect_key.cmp(&q.rect_key)))
        .map(|cand| GroupCandidate {
            ids: cand.ids.clone(),
            area: cand.area,
            rect_key: cand.rect_key.clone(),
        })
}

/// Appends to `pool` every pairwise-close group of `min_group` to
/// `max_group` entries (drawn from `ids`, required to contain `anchor`
/// when given) whose union activates its bounding box.
#[allow(clippy::too_many_arguments)]
fn collect_groups(
    entries: &BTreeMap<u32, SpanEntry>,
    ids: &[u32],
    anchor: Option<u32>,
    min_group: usize,
    max_group: usize,
    reach: i64,
    params: &ModelParams,
    pool: &mut Vec<GroupCandidate>,
) -> Result<(), CoreError> {
    #[allow(clippy::too_many_arguments)]
    fn extend(
        entries: &BTreeMap<u32, SpanEntry>,
        ids: &[u32],
        start: usize,
        chosen: &mut Vec<u32>,
        min_group: usize,
        max_group: usize,
        reach: i64,
        params: &ModelParams,
        pool: &mut Vec<GroupCandidate>,
    ) -> Result<(), CoreError> {
        if chosen.len() >= min_group {
            if let Some(cand) = validate_group(entries, chosen, params)? {
                pool.push(cand);
            }
        }
        if chosen.len() == max_group {
            return Ok(());
        }
        for (pos, &id) in ids.iter().enumerate().skip(start) {
            if chosen.contains(&id) {
                continue;
            }
            let rect = entries[&id].rect;
            if chosen
                .iter()
                .all(|c| entries[c].rect.dist(&rect) <= reach)
            {
                chosen.push(id);
                extend(
                    entries, ids, pos + 1, chosen, min_group, max_group, reach, params, pool,
                )?;
                chosen.pop();
            }
        }
        Ok(())
    }

    let mut chosen: Vec<u32> = Vec::new();
    if let Some(anchor_id) = anchor {
        chosen.push(anchor_id);
    }
    extend(
        entries, ids, 0, &mut chosen, min_group, max_group, reach, params, pool,
    )
}

/// Checks the bounding-box condition for a pairwise-close group: the
/// union of the member rectangles, taken as fully active, must close to
/// the whole box.
fn validate_group(
    entries: &BTreeMap<u32, SpanEntry>,
    ids: &[u32],
    params: &ModelParams,
) -> Result<Option<GroupCandidate>, CoreError> {
    let mut rects: Vec<Rectangle> = ids.iter().map(|id| entries[id].rect).collect();
    rects.sort_unstable();
    let bbox = rects
        .iter()
        .skip(1)
        .fold(rects[0], |acc, r| acc.union_bbox(r));
    let mut grid = Grid::new(bbox)?;
    for r in &rects {
        for z in r.sites() {
            grid.occupy(z)?;
        }
    }
    if !closure(&grid, params)?.fully_active() {
        return Ok(None);
    }
    Ok(Some(GroupCandidate {
        ids: ids.to_vec(),
        area: bbox.area(),
        rect_key: rects,
    }))
}

/// Locates an internally spanned sub-rectangle of `rect` with long side
/// in `[ell, 2*ell + 2k]` by walking down the merge decomposition: a
/// spanned rectangle longer than the window always has a merge member
/// with long side at least `(long - 2k) / 2 >= ell` (the two extreme
/// members overlap the ends and sit within distance `2k` of each other),
/// so descending into the longest member terminates inside the window.
pub fn long_side_descent(
    rect: Rectangle,
    occupied: &[Site],
    params: &ModelParams,
    ell: i64,
) -> Result<Rectangle, CoreError> {
    if params.variant != Variant::Enhanced {
        return Err(CoreError::BadParameter {
            what: "the long-side decomposition is defined for the enhanced variant",
        });
    }
    if ell < 1 {
        return Err(CoreError::BadParameter {
            what: "requested long side must be positive",
        });
    }
    if rect.long() < ell {
        return Err(CoreError::BadParameter {
            what: "rectangle is shorter than the requested long side",
        });
    }
    let mut inside: Vec<Site> = occupied.iter().copied().filter(|&z| rect.contains(z)).collect();
    inside.sort_unstable();
    inside.dedup();
    if !is_internally_spanned(rect, &inside, params)? {
        return Err(CoreError::NotApplicable {
            what: "rectangle is not internally spanned",
        });
    }

    let window = 2 * ell + 2 * params.k as i64;
    let mut cur_rect = rect;
    let mut cur_occ = inside;
    loop {
        if cur_rect.long() <= window {
            return Ok(cur_rect);
        }
        let outcome = span_algorithm(&cur_occ, params)?;
        if outcome.final_set.len() != 1 || outcome.final_set[0].rect != cur_rect {
            return Err(CoreError::InvariantViolated {
                what: "merge run failed to reproduce a spanned rectangle",
            });
        }
        let last = outcome.steps.last().ok_or(CoreError::InvariantViolated {
            what: "spanned rectangle above the window produced no merge steps",
        })?;
        let best = last
            .members
            .iter()
            .min_by_key(|e| (core::cmp::Reverse(e.rect.long()), e.rect))
            .expect("merge steps have at least two members");
        if best.rect.long() < ell {
            return Err(CoreError::InvariantViolated {
                what: "merge members fell below the requested long side",
            });
        }
        cur_rect = best.rect;
        cur_occ = best.witness.clone();
    }
}

/// Exact probability of the corner-seed event on the `m` by `m` square:
/// the `k` by `k` corner square fully occupied, the far corner sites
/// `(m, 1)` and `(1, m)` occupied, and both interleaved ladders (column
/// `k + i` occupied at height at most `i`, respectively the transpose)
/// free of `k` consecutive misses.
///
/// The ladder events are independent across `i` with miss probability
/// `(1 - s)^i`, so each ladder contributes one finite no-`k`-run factor.
/// A single-entry ladder (`m = k + 2`) cannot contain `k >= 2`
/// consecutive misses, so its factor is exactly one.
pub fn nucleation_probability(k: u32, m: u32, s: f64) -> Result<f64, CoreError> {
    check_nucleation_shape(k, m)?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(CoreError::OutOfDomain {
            what: "occupation density",
            value: s,
        });
    }
    let ladder = gap::survival_log_finite(k, s, (m - k - 1) as u64)?;
    Ok(math::exp((k as f64 * k as f64 + 2.0) * math::ln(s) + 2.0 * ladder))
}

fn check_nucleation_shape(k: u32, m: u32) -> Result<(), CoreError> {
    if k < 2 {
        return Err(CoreError::BadParameter {
            what: "neighborhood parameter k must be at least 2",
        });
    }
    if m < k + 2 {
        return Err(CoreError::BadParameter {
            what: "square side must be at least k + 2",
        });
    }
    Ok(())
}

/// Whether the corner-seed event holds for the occupied set of `grid`,
/// interpreted relative to the grid's lower-left corner. The grid must
/// be square with side at least `k + 2`.
pub fn nucleation_event_holds(grid: &Grid, k: u32) -> Result<bool, CoreError> {
    let bounds = grid.bounds();
    let m = bounds.width();
    if bounds.height() != m {
        return Err(CoreError::BadParameter {
            what: "corner-seed event needs a square grid",
        });
    }
    check_nucleation_shape(k, u32::try_from(m).unwrap_or(0))?;
    let at = |x: i64, y: i64| grid.is_occupied((bounds.a + x - 1, bounds.b + y - 1));

    let k = k as i64;
    for y in 1..=k {
        for x in 1..=k {
            if !at(x, y) {
                return Ok(false);
            }
        }
    }
    if !at(m, 1) || !at(1, m) {
        return Ok(false);
    }

    let ladder_clear = |swap: bool| {
        let mut misses = 0i64;
        for i in 1..=m - k - 1 {
            let hit = (1..=i).any(|j| if swap { at(j, k + i) } else { at(k + i, j) });
            if hit {
                misses = 0;
            } else {
                misses += 1;
                if misses >= k {
                    return false;
                }
            }
        }
        true
    };
    Ok(ladder_clear(false) && ladder_clear(true))
}

/// Outcome of repeated corner-seed sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NucleationSample {
    /// Trials on which the event held. Every such trial was verified to
    /// span its square under the plain threshold rule.
    pub occurrences: u64,
    pub trials: u64,
}

/// Samples density-`s` squares and counts corner-seed occurrences; each
/// occurrence is verified by simulation to span the whole square under
/// the plain threshold rule, and a failure to span is reported as
/// `InvariantViolated`. Trial `t` draws its sites from the stream `t` of
/// a counter-based generator seeded with `seed`, so the outcome depends
/// only on `(seed, trials)`.
pub fn sample_nucleation(
    k: u32,
    m: u32,
    s: f64,
    trials: u64,
    seed: u64,
) -> Result<NucleationSample, CoreError> {
    check_nucleation_shape(k, m)?;
    check_density(s)?;
    if trials == 0 {
        return Err(CoreError::BadParameter {
            what: "sampling needs at least one trial",
        });
    }
    let bounds = Rectangle::square(m as i64)?;
    let params = ModelParams::original(k)?;
    let mut occurrences = 0;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let sites = sample_occupied(bounds, s, &mut rng);
        let grid = Grid::from_occupied(bounds, &sites)?;
        if nucleation_event_holds(&grid, k)? {
            occurrences += 1;
            if !closure(&grid, &params)?.fully_active() {
                return Err(CoreError::InvariantViolated {
                    what: "corner-seed occurrence failed to span its square",
                });
            }
        }
    }
    Ok(NucleationSample { occurrences, trials })
}

fn check_density(s: f64) -> Result<(), CoreError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(CoreError::OutOfDomain {
            what: "occupation density",
            value: s,
        });
    }
    Ok(())
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn next_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Draws an independent density-`s` configuration, consuming one uniform
/// per site in row-major order.
fn sample_occupied(bounds: Rectangle, s: f64, rng: &mut ChaCha8Rng) -> Vec<Site> {
    bounds.sites().filter(|_| next_unit(rng) < s).collect()
}

/// Reconstructs the configuration that trial `trial` of a sampling run
/// with this `seed` would draw on an `l` by `l` square, for inspection
/// or snapshot output.
pub fn sample_trial_grid(l: u32, s: f64, seed: u64, trial: u64) -> Result<Grid, CoreError> {
    if l == 0 {
        return Err(CoreError::BadParameter {
            what: "square side must be positive",
        });
    }
    check_density(s)?;
    let bounds = Rectangle::square(l as i64)?;
    let mut rng = trial_rng(seed, trial);
    let sites = sample_occupied(bounds, s, &mut rng);
    Grid::from_occupied(bounds, &sites)
}

/// Two-sided Wilson score interval for `successes` out of `trials` at
/// normal quantile `z`. `trials` must be positive.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * math::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte Carlo spanning estimate with its 99% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanningEstimate {
    pub trials: u64,
    pub spanned: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Estimates the probability that an `l` by `l` square with independent
/// density-`s` occupation is internally spanned. Trial `t` draws from
/// stream `t` of a counter-based generator seeded with `seed`, so the
/// result depends only on `(seed, trials)` and not on evaluation order.
pub fn monte_carlo_spanning(
    l: u32,
    s: f64,
    trials: u64,
    seed: u64,
    params: &ModelParams,
) -> Result<SpanningEstimate, CoreError> {
    if l == 0 {
        return Err(CoreError::BadParameter {
            what: "square side must be positive",
        });
    }
    if trials == 0 {
        return Err(CoreError::BadParameter {
            what: "sampling needs at least one trial",
        });
    }
    check_density(s)?;
    let bounds = Rectangle::square(l as i64)?;
    let mut spanned = 0u64;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let sites = sample_occupied(bounds, s, &mut rng);
        let grid = Grid::from_occupied(bounds, &sites)?;
        if closure(&grid, params)?.fully_active() {
            spanned += 1;
        }
    }
    let estimate = spanned as f64 / trials as f64;
    let (ci_low, ci_high) = wilson_interval(spanned, trials, Z_99);
    Ok(SpanningEstimate {
        trials,
        spanned,
        estimate,
        ci_low,
        ci_high,
    })
}

/// Counts of spanning configurations of an `l` by `l` square, indexed by
/// the number of occupied sites, over all `2^(l*l)` configurations.
pub fn exhaustive_spanning_counts(l: u32, params: &ModelParams) -> Result<Vec<u64>, CoreError> {
    if l == 0 {
        return Err(CoreError::BadParameter {
            what: "square side must be positive",
        });
    }
    if l > MAX_EXHAUSTIVE_SIDE {
        return Err(CoreError::BadParameter {
            what: "side too large for exhaustive enumeration",
        });
    }
    let bounds = Rectangle::square(l as i64)?;
    let order: Vec<Site> = bounds.sites().collect();
    let cells = order.len();
    let mut counts = vec![0u64; cells + 1];
    for mask in 0u64..1 << cells {
        let sites: Vec<Site> = order
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask >> i & 1 == 1)
            .map(|(_, &z)| z)
            .collect();
        let grid = Grid::from_occupied(bounds, &sites)?;
        if closure(&grid, params)?.fully_active() {
            counts[mask.count_ones() as usize] += 1;
        }
    }
    Ok(counts)
}

/// Exact spanning probability of an `l` by `l` square at density `s`,
/// summing `counts[j] * s^j * (1-s)^(cells-j)` over the exhaustive
/// counts.
pub fn exhaustive_spanning_probability(
    l: u32,
    s: f64,
    params: &ModelParams,
) -> Result<f64, CoreError> {
    check_density(s)?;
    let counts = exhaustive_spanning_counts(l, params)?;
    let cells = counts.len() - 1;
    let mut s_pow = vec![0.0f64; cells + 1];
    let mut t_pow = vec![0.0f64; cells + 1];
    s_pow[0] = 1.0;
    t_pow[0] = 1.0;
    for j in 1..=cells {
        s_pow[j] = s_pow[j - 1] * s;
        t_pow[j] = t_pow[j - 1] * (1.0 - s);
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(j, &c)| c as f64 * s_pow[j] * t_pow[cells - j])
        .sum())
}

/// One cell of a coupled spanning sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub k: u32,
    pub variant: Variant,
    pub l: u32,
    pub s: f64,
    /// Scaling coordinate `s * ln(l)`.
    pub s_log_l: f64,
    pub trials: u64,
    pub spanned: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

/// Spanning estimates over a grid of sides and densities with one shared
/// random field per trial: every `(variant, l, s)` cell reuses the same
/// per-site uniforms, so estimates are non-decreasing in `s` by
/// construction and the enhanced rule never falls below the plain rule
/// on the same draws. Rows are emitted variant-major, then by side, then
/// by density.
pub fn threshold_sweep(
    k: u32,
    l_list: &[u32],
    s_list: &[f64],
    variants: &[Variant],
    trials: u64,
    seed: u64,
) -> Result<Vec<SweepRow>, CoreError> {
    if l_list.is_empty() || s_list.is_empty() || variants.is_empty() {
        return Err(CoreError::BadParameter {
            what: "sweep needs at least one side, density, and variant",
        });
    }
    if l_list.contains(&0) {
        return Err(CoreError::BadParameter {
            what: "square side must be positive",
        });
    }
    for &s in s_list {
        check_density(s)?;
    }
    if trials == 0 {
        return Err(CoreError::BadParameter {
            what: "sampling needs at least one trial",
        });
    }
    let params: Vec<ModelParams> = variants
        .iter()
        .map(|&variant| ModelParams::new(k, k, variant))
        .collect::<Result<_, _>>()?;

    let l_max = *l_list.iter().max().expect("list checked non-empty") as i64;
    let mut field = vec![0.0f64; (l_max * l_max) as usize];
    let mut tallies = vec![0u64; variants.len() * l_list.len() * s_list.len()];
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        for u in field.iter_mut() {
            *u = next_unit(&mut rng);
        }
        for (vi, p) in params.iter().enumerate() {
            for (li, &l) in l_list.iter().enumerate() {
                for (si, &s) in s_list.iter().enumerate() {
                    let bounds = Rectangle::square(l as i64)?;
                    let sites: Vec<Site> = bounds
                        .sites()
                        .filter(|&(x, y)| field[((y - 1) * l_max + (x - 1)) as usize] < s)
                        .collect();
                    let grid = Grid::from_occupied(bounds, &sites)?;
                    if closure(&grid, p)?.fully_active() {
                        tallies[(vi * l_list.len() + li) * s_list.len() + si] += 1;
                    }
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(tallies.len());
    for (vi, &variant) in variants.iter().enumerate() {
        for (li, &l) in l_list.iter().enumerate() {
            for (si, &s) in s_list.iter().enumerate() {
                let spanned = tallies[(vi * l_list.len() + li) * s_list.len() + si];
                let estimate = spanned as f64 / trials as f64;
                let (ci_low, ci_high) = wilson_interval(spanned, trials, Z_99);
                rows.push(SweepRow {
                    k,
                    variant,
                    l,
                    s,
                    s_log_l: s * math::ln(l as f64),
                    trials,
                    spanned,
                    estimate,
                    ci_low,
                    ci_high,
                    seed,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_core::RngCore;

    fn rect(a: i64, b: i64, c: i64, d: i64) -> Rectangle {
        Rectangle::new(a, b, c, d).unwrap()
    }

    /// Active set of the closure, as a sorted site list.
    fn closed_sites(bounds: Rectangle, occupied: &[Site], params: &ModelParams) -> Vec<Site> {
        let grid = Grid::from_occupied(bounds, occupied).unwrap();
        let mut sites = closure(&grid, params).unwrap().active_sites();
        sites.sort_unstable();
        sites
    }

    /// Random density-`s` subset of `bounds` drawn from a dedicated
    /// stream, for reproducible instance generation.
    fn random_sites(bounds: Rectangle, s: f64, seed: u64, trial: u64) -> Vec<Site> {
        let mut rng = trial_rng(seed, trial);
        sample_occupied(bounds, s, &mut rng)
    }

    /// Collects occupied sets that internally span `bounds` under the
    /// enhanced rule, scanning trial streams until `want` are found.
    fn spanned_instances(
        bounds: Rectangle,
        s: f64,
        k: u32,
        want: usize,
        max_trials: u64,
    ) -> Vec<Vec<Site>> {
        let params = ModelParams::enhanced(k).unwrap();
        let mut found = Vec::new();
        for trial in 0..max_trials {
            let sites = random_sites(bounds, s, 2024, trial);
            if is_internally_spanned(bounds, &sites, &params).unwrap() {
                found.push(sites);
                if found.len() == want {
                    break;
                }
            }
        }
        assert_eq!(found.len(), want, "not enough spanned instances in budget");
        found
    }

    #[test]
    fn rectangle_distance_and_bounding_boxes() {
        let unit = rect(0, 0, 0, 0);
        assert_eq!(unit.dist(&rect(0, 0, 2, 2)), 0, "overlap has distance zero");
        assert_eq!(unit.dist(&rect(1, 0, 1, 0)), 1);
        assert_eq!(unit.dist(&rect(2, 2, 2, 2)), 2, "diagonal counts the larger gap");
        assert_eq!(unit.dist(&rect(5, 1, 6, 1)), 5);
        assert_eq!(rect(0, 0, 1, 3).long(), 4);
        assert_eq!(rect(0, 0, 1, 3).area(), 8);
        assert_eq!(
            Rectangle::bounding(&[(3, -1), (0, 2), (1, 1)]),
            Some(rect(0, -1, 3, 2))
        );
        assert!(Rectangle::bounding(&[]).is_none());
        assert!(rect(0, 0, 3, 3).contains_rect(&rect(1, 1, 2, 2)));
        assert!(!rect(0, 0, 3, 3).contains_rect(&rect(1, 1, 4, 2)));
        assert!(Rectangle::new(2, 0, 1, 0).is_err());
    }

    #[test]
    fn grid_occupancy_and_run_length_encoding() {
        let mut grid = Grid::new(rect(1, 1, 4, 2)).unwrap();
        grid.occupy((2, 1)).unwrap();
        grid.occupy((3, 1)).unwrap();
        grid.occupy((1, 2)).unwrap();
        assert_eq!(grid.occupied_count(), 3);
        assert_eq!(grid.occupied_rle(), "1.2#1./1#3.");
        assert_eq!(grid.active_rle(), grid.occupied_rle());
        assert_eq!(grid.occupied_sites(), vec![(2, 1), (3, 1), (1, 2)]);
        assert!(grid.occupy((5, 1)).is_err());
        assert!(!grid.is_occupied((0, 0)), "out of bounds reads as empty");
    }

    #[test]
    fn empty_seed_stays_empty() {
        for params in [
            ModelParams::original(2).unwrap(),
            ModelParams::enhanced(3).unwrap(),
        ] {
            let grid = Grid::new(rect(1, 1, 6, 6)).unwrap();
            assert_eq!(closure(&grid, &params).unwrap().active_count(), 0);
        }
    }

    #[test]
    fn diagonal_pair_spans_a_two_square_but_adjacent_pair_does_not() {
        let params = ModelParams::original(2).unwrap();
        let square = rect(1, 1, 2, 2);
        // Each off-diagonal site sees both diagonal sites as nearest
        // neighbors, so the threshold of two is met.
        assert!(is_internally_spanned(square, &[(1, 1), (2, 2)], &params).unwrap());
        assert!(is_internally_spanned(square, &[(2, 1), (1, 2)], &params).unwrap());
        // An adjacent pair gives every empty site only one active
        // neighbor.
        assert!(!is_internally_spanned(square, &[(1, 1), (1, 2)], &params).unwrap());
        let fixed = closed_sites(square, &[(1, 1), (1, 2)], &params);
        assert_eq!(fixed, vec![(1, 1), (1, 2)]);
    }

    #[test]
    fn threshold_rule_stalls_where_filling_rules_proceed() {
        // The main diagonal of a 3-square gives every empty site exactly
        // two active sites in its arms, one short of the k = 3
        // threshold, but the pair rule of the enhanced variant fires.
        let square = rect(1, 1, 3, 3);
        let diag = [(1, 1), (2, 2), (3, 3)];
        let original = closed_sites(square, &diag, &ModelParams::original(3).unwrap());
        assert_eq!(original, vec![(1, 1), (2, 2), (3, 3)]);
        let enhanced = closed_sites(square, &diag, &ModelParams::enhanced(3).unwrap());
        assert_eq!(enhanced.len(), 9, "enhanced closure fills the square");
    }

    #[test]
    fn enhanced_closure_of_connected_sets_is_their_bounding_box() {
        for &k in &[2u32, 3] {
            let params = ModelParams::enhanced(k).unwrap();
            for trial in 0..12 {
                // A nearest-neighbor walk is connected by construction.
                let mut rng = trial_rng(77, trial);
                let mut z = (0i64, 0i64);
                let mut sites = vec![z];
                for _ in 0..18 {
                    let (dx, dy) = NEAREST[(rng.next_u64() % 4) as usize];
                    z = (z.0 + dx, z.1 + dy);
                    sites.push(z);
                }
                sites.sort_unstable();
                sites.dedup();
                let bbox = Rectangle::bounding(&sites).unwrap();
                let active = closed_sites(bbox.grow(2), &sites, &params);
                let expected: Vec<Site> = bbox.sites().collect();
                let mut expected_sorted = expected;
                expected_sorted.sort_unstable();
                assert_eq!(active, expected_sorted, "k={k} trial={trial}");
            }
        }
    }

    #[test]
    fn closure_is_monotone_in_the_seed() {
        let bounds = rect(1, 1, 9, 9);
        for params in [
            ModelParams::original(2).unwrap(),
            ModelParams::enhanced(2).unwrap(),
            ModelParams::original(3).unwrap(),
        ] {
            for trial in 0..10 {
                let small = random_sites(bounds, 0.2, 31, trial);
                let mut large = small.clone();
                large.extend(random_sites(bounds, 0.1, 32, trial));
                let lo = closed_sites(bounds, &small, &params);
                let hi = closed_sites(bounds, &large, &params);
                assert!(
                    lo.iter().all(|z| hi.binary_search(z).is_ok()),
                    "larger seed lost part of the closure"
                );
            }
        }
    }

    #[test]
    fn enhanced_closure_dominates_the_threshold_rule() {
        let bounds = rect(1, 1, 10, 10);
        for &k in &[2u32, 3] {
            let original = ModelParams::original(k).unwrap();
            let enhanced = ModelParams::enhanced(k).unwrap();
            for trial in 0..10 {
                let sites = random_sites(bounds, 0.3, 101, trial);
                let plain = closed_sites(bounds, &sites, &original);
                let rich = closed_sites(bounds, &sites, &enhanced);
                assert!(
                    plain.iter().all(|z| rich.binary_search(z).is_ok()),
                    "k={k} trial={trial}"
                );
            }
        }
    }

    #[test]
    fn wide_empty_bands_block_spanning() {
        let k = 2u32;
        let square = rect(1, 1, 8, 8);
        // Fully occupied except columns 4 and 5: traversability fails
        // and so does spanning.
        let gapped: Vec<Site> = square.sites().filter(|&(x, _)| x != 4 && x != 5).collect();
        assert!(!traversability_check(square, &gapped, k).unwrap());
        assert!(!is_internally_spanned(square, &gapped, &ModelParams::enhanced(k).unwrap()).unwrap());
        let full: Vec<Site> = square.sites().collect();
        assert!(traversability_check(square, &full, k).unwrap());
        // A single empty column is narrower than k.
        let narrow: Vec<Site> = square.sites().filter(|&(x, _)| x != 4).collect();
        assert!(traversability_check(square, &narrow, k).unwrap());
        // Spanning implies traversability on sampled instances.
        for sites in spanned_instances(rect(1, 1, 7, 7), 0.4, 2, 4, 400) {
            assert!(traversability_check(rect(1, 1, 7, 7), &sites, 2).unwrap());
        }
    }

    #[test]
    fn singletons_and_near_pairs_merge_as_expected() {
        let params = ModelParams::enhanced(2).unwrap();
        let single = span_algorithm(&[(4, 4)], &params).unwrap();
        assert!(single.steps.is_empty());
        assert_eq!(single.final_set.len(), 1);
        assert_eq!(single.final_set[0].rect, rect(4, 4, 4, 4));

        let pair = span_algorithm(&[(1, 1), (2, 2)], &params).unwrap();
        assert_eq!(pair.steps.len(), 1);
        assert_eq!(pair.final_set.len(), 1);
        assert_eq!(pair.final_set[0].rect, rect(1, 1, 2, 2));
        assert_eq!(pair.final_set[0].witness, vec![(1, 1), (2, 2)]);

        // Beyond distance 2k the pair cannot interact.
        let far = span_algorithm(&[(1, 1), (10, 10)], &params).unwrap();
        assert!(far.steps.is_empty());
        assert_eq!(far.final_set.len(), 2);
    }

    #[test]
    fn merge_union_reproduces_the_enhanced_closure() {
        let bounds = rect(1, 1, 25, 25);
        for &(k, s) in &[(2u32, 0.10f64), (3, 0.15)] {
            let params = ModelParams::enhanced(k).unwrap();
            for trial in 0..8 {
                let sites = random_sites(bounds, s, 500 + k as u64, trial);
                if sites.is_empty() {
                    continue;
                }
                let outcome = span_algorithm(&sites, &params).unwrap();
                let mut covered: Vec<Site> = outcome
                    .final_set
                    .iter()
                    .flat_map(|e| e.rect.sites())
                    .collect();
                covered.sort_unstable();
                covered.dedup();
                let active = closed_sites(bounds, &sites, &params);
                assert_eq!(covered, active, "k={k} trial={trial}");
            }
        }
    }

    #[test]
    fn final_merge_step_decomposes_a_spanned_rectangle() {
        for &(k, side, s) in &[(2u32, 8i64, 0.35f64), (3, 8, 0.52)] {
            let params = ModelParams::enhanced(k).unwrap();
            let square = rect(1, 1, side, side);
            for sites in spanned_instances(square, s, k, 4, 900) {
                let outcome = span_algorithm(&sites, &params).unwrap();
                assert_eq!(outcome.final_set.len(), 1);
                assert_eq!(outcome.final_set[0].rect, square);
                let last = outcome.steps.last().expect("spanning needs merges");
                assert_eq!(last.merged.rect, square);
                let members = &last.members;
                assert!(members.len() >= 2 && members.len() <= k as usize);
                for (i, m) in members.iter().enumerate() {
                    assert!(square.contains_rect(&m.rect) && m.rect != square, "strict inclusion");
                    assert!(
                        is_internally_spanned(m.rect, &m.witness, &params).unwrap(),
                        "member must be spanned by its witness"
                    );
                    for other in &members[i + 1..] {
                        assert!(m.rect.dist(&other.rect) <= 2 * k as i64);
                        assert!(
                            m.witness.iter().all(|z| !other.witness.contains(z)),
                            "witnesses must be disjoint"
                        );
                    }
                }
                // The member rectangles alone regenerate the square.
                let union: Vec<Site> = members.iter().flat_map(|e| e.rect.sites()).collect();
                assert!(is_internally_spanned(square, &union, &params).unwrap());
            }
        }
    }

    #[test]
    fn long_side_descent_lands_in_the_window() {
        let k = 2u32;
        let params = ModelParams::enhanced(k).unwrap();
        let square = rect(1, 1, 12, 12);
        for sites in spanned_instances(square, 0.34, k, 3, 2000) {
            for ell in [3i64, 5] {
                let found = long_side_descent(square, &sites, &params, ell).unwrap();
                assert!(square.contains_rect(&found));
                assert!(found.long() >= ell && found.long() <= 2 * ell + 2 * k as i64);
                let inside: Vec<Site> =
                    sites.iter().copied().filter(|&z| found.contains(z)).collect();
                assert!(is_internally_spanned(found, &inside, &params).unwrap());
            }
        }
        // A rectangle already inside the window comes back unchanged.
        let small = rect(1, 1, 5, 5);
        for sites in spanned_instances(small, 0.4, k, 1, 400) {
            assert_eq!(long_side_descent(small, &sites, &params, 5).unwrap(), small);
        }
        assert!(matches!(
            long_side_descent(square, &[(1, 1)], &params, 3),
            Err(CoreError::NotApplicable { .. })
        ));
    }

    #[test]
    fn corner_seed_probability_matches_full_enumeration() {
        // Smallest admissible square for k = 2: the single-entry ladders
        // impose no constraint, so the probability is exactly s^6 over
        // the corner square and the two far corners.
        let bounds = rect(1, 1, 4, 4);
        let order: Vec<Site> = bounds.sites().collect();
        for &s in &[0.3f64, 0.6] {
            let mut total = 0.0f64;
            for mask in 0u32..1 << 16 {
                let sites: Vec<Site> = order
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &z)| z)
                    .collect();
                let grid = Grid::from_occupied(bounds, &sites).unwrap();
                if nucleation_event_holds(&grid, 2).unwrap() {
                    let occ = mask.count_ones() as i32;
                    total += s.powi(occ) * (1.0 - s).powi(16 - occ);
                }
            }
            let exact = nucleation_probability(2, 4, s).unwrap();
            assert!((exact - total).abs() <= 1e-12 * total, "s={s}");
            assert!((exact - s.powi(6)).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn corner_seed_probability_matches_relevant_site_enumeration() {
        // k = 2, m = 5: the event reads exactly twelve sites; the other
        // thirteen marginalize out of the enumeration. Each ladder has
        // entries failing with (1-s) and (1-s)^2, so a ladder is clear
        // unless both entries miss: factor 1 - (1-s)^3.
        let relevant: [Site; 12] = [
            (1, 1), (2, 1), (1, 2), (2, 2),
            (5, 1), (1, 5),
            (3, 1), (4, 1), (4, 2),
            (1, 3), (1, 4), (2, 4),
        ];
        let bounds = rect(1, 1, 5, 5);
        for &s in &[0.25f64, 0.5] {
            let mut total = 0.0f64;
            for mask in 0u32..1 << 12 {
                let sites: Vec<Site> = relevant
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &z)| z)
                    .collect();
                let grid = Grid::from_occupied(bounds, &sites).unwrap();
                if nucleation_event_holds(&grid, 2).unwrap() {
                    let occ = mask.count_ones() as i32;
                    total += s.powi(occ) * (1.0 - s).powi(12 - occ);
                }
            }
            let exact = nucleation_probability(2, 5, s).unwrap();
            let hand = s.powi(6) * (1.0 - (1.0 - s).powi(3)).powi(2);
            assert!((exact - total).abs() <= 1e-12 * total, "s={s}");
            assert!((exact - hand).abs() <= 1e-12 * exact, "s={s}");
        }
    }

    #[test]
    fn corner_seed_samples_match_the_exact_rate_and_always_span() {
        let (k, m, s) = (2u32, 8u32, 0.6f64);
        let sample = sample_nucleation(k, m, s, 20_000, 42).unwrap();
        // sample_nucleation verifies spanning internally on every
        // occurrence; here the rate must bracket the exact value.
        let exact = nucleation_probability(k, m, s).unwrap();
        let (lo, hi) = wilson_interval(sample.occurrences, sample.trials, Z_99);
        assert!(
            lo <= exact && exact <= hi,
            "exact {exact} outside [{lo}, {hi}] with {} hits",
            sample.occurrences
        );
    }

    #[test]
    fn corner_seed_rate_dominates_the_infinite_ladder_limit() {
        for &(k, s) in &[(2u32, 0.3f64), (2, 0.1), (3, 0.3)] {
            let est = gap::survival_log(k, s, 1e-10).unwrap();
            let lower = est.log_prob + math::ln_1p(-est.conditional_tail);
            let m = 20u32;
            let ladder = gap::survival_log_finite(k, s, (m - k - 1) as u64).unwrap();
            assert!(ladder >= lower - 1e-12);
            let exact = nucleation_probability(k, m, s).unwrap();
            let floor =
                math::exp((k as f64 * k as f64 + 2.0) * math::ln(s) + 2.0 * lower);
            assert!(exact >= floor * (1.0 - 1e-12), "k={k} s={s}");
        }
    }

    #[test]
    fn monte_carlo_is_deterministic_and_brackets_exact_values() {
        let params = ModelParams::original(2).unwrap();
        let a = monte_carlo_spanning(3, 0.4, 5_000, 9, &params).unwrap();
        let b = monte_carlo_spanning(3, 0.4, 5_000, 9, &params).unwrap();
        assert_eq!(a, b, "same seed must reproduce the estimate");
        let sure = monte_carlo_spanning(4, 1.0, 50, 9, &params).unwrap();
        assert_eq!(sure.estimate, 1.0);
        for &(l, s) in &[(2u32, 0.5f64), (3, 0.3), (3, 0.5)] {
            let exact = exhaustive_spanning_probability(l, s, &params).unwrap();
            let mc = monte_carlo_spanning(l, s, 20_000, 42, &params).unwrap();
            assert!(
                mc.ci_low <= exact && exact <= mc.ci_high,
                "L={l} s={s}: exact {exact} outside [{}, {}]",
                mc.ci_low,
                mc.ci_high
            );
        }
    }

    #[test]
    fn trial_snapshots_reproduce_the_sampling_run() {
        let params = ModelParams::original(2).unwrap();
        let est = monte_carlo_spanning(3, 0.4, 64, 7, &params).unwrap();
        let mut spanned = 0;
        for trial in 0..64 {
            let grid = sample_trial_grid(3, 0.4, 7, trial).unwrap();
            if closure(&grid, &params).unwrap().fully_active() {
                spanned += 1;
            }
        }
        assert_eq!(spanned, est.spanned);
    }

    #[test]
    fn two_square_spanning_counts_match_the_diagonal_rule() {
        // A 2-square spans exactly when a full diagonal is occupied:
        // two configurations of size two, all four of size three, and
        // the full square.
        for params in [
            ModelParams::original(2).unwrap(),
            ModelParams::enhanced(2).unwrap(),
        ] {
            let counts = exhaustive_spanning_counts(2, &params).unwrap();
            assert_eq!(counts, vec![0, 0, 2, 4, 1]);
            let p = exhaustive_spanning_probability(2, 0.5, &params).unwrap();
            assert!((p - 7.0 / 16.0).abs() < 1e-15);
        }
        let single = exhaustive_spanning_counts(1, &ModelParams::original(2).unwrap()).unwrap();
        assert_eq!(single, vec![0, 1], "a 1-square spans exactly when occupied");
    }

    #[test]
    fn coupled_sweep_is_monotone_where_coupling_guarantees_it() {
        let rows = threshold_sweep(
            2,
            &[2, 4],
            &[0.2, 0.35, 0.5],
            &[Variant::Original, Variant::Enhanced],
            800,
            7,
        )
        .unwrap();
        assert_eq!(rows.len(), 12);
        for row in &rows {
            assert!(row.spanned <= row.trials);
            assert!(row.ci_low <= row.estimate && row.estimate <= row.ci_high);
            let expect = row.s * math::ln(row.l as f64);
            assert!((row.s_log_l - expect).abs() < 1e-15);
        }
        // Within a (variant, l) block the shared field forces density
        // monotonicity trial by trial.
        for block in rows.chunks(3) {
            assert!(block[0].spanned <= block[1].spanned);
            assert!(block[1].spanned <= block[2].spanned);
        }
        // The enhanced rule never loses to the plain rule on one field.
        let (plain, rich) = rows.split_at(6);
        for (p, r) in plain.iter().zip(rich) {
            assert_eq!((p.l, p.s), (r.l, r.s));
            assert!(p.spanned <= r.spanned);
        }
    }

    #[test]
    fn grown_seeds_only_grow_and_stay_boxed() {
        // Re-running the closure on its own output changes nothing.
        let bounds = rect(1, 1, 9, 9);
        let params = ModelParams::enhanced(2).unwrap();
        for trial in 0..6 {
            let sites = random_sites(bounds, 0.25, 404, trial);
            let once = closed_sites(bounds, &sites, &params);
            let twice = closed_sites(bounds, &once, &params);
            assert_eq!(once, twice);
            if let Some(bbox) = Rectangle::bounding(&sites) {
                assert!(once.iter().all(|&z| bbox.contains(z)));
            }
        }
    }

    proptest! {
        #[test]
        fn enhanced_always_contains_original(
            sites in prop::collection::vec((0i64..6, 0i64..6), 0..14),
            k in 2u32..4,
        ) {
            let bounds = rect(0, 0, 5, 5);
            let plain = closed_sites(bounds, &sites, &ModelParams::original(k).unwrap());
            let rich = closed_sites(bounds, &sites, &ModelParams::enhanced(k).unwrap());
            prop_assert!(plain.iter().all(|z| rich.binary_search(z).is_ok()));
        }

        #[test]
        fn spanning_implies_traversability(
            sites in prop::collection::vec((0i64..6, 0i64..6), 4..20),
            k in 2u32..4,
        ) {
            let bounds = rect(0, 0, 5, 5);
            let params = ModelParams::enhanced(k).unwrap();
            if is_internally_spanned(bounds, &sites, &params).unwrap() {
                prop_assert!(traversability_check(bounds, &sites, k).unwrap());
            }
        }
    }
}
