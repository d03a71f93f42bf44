//! Interference graphs and the schedules (independent sets) they admit.
//!
//! Nodes are indexed from 0 internally; every textual representation (file
//! format, `Display`, CSV headers) is 1-based to match the usual drawings of
//! the diamond and broken-diamond networks.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{self, LpOutcome};

/// Hard cap on nodes for exhaustive enumeration.
pub const ENUMERATION_LIMIT: usize = 30;
/// Hard cap on maximal schedules for set-cover enumeration.
pub const COVER_LIMIT: usize = 20;
/// Graphs are stored as 64-bit adjacency masks.
pub const MAX_NODES: usize = 64;
/// Absolute tolerance on `t* - 1` separating interior, boundary and outside.
pub const TAU_CAP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferenceGraph {
    n: usize,
    adj: Vec<u64>,
    labels: Option<Vec<String>>,
}

impl InterferenceGraph {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_NODES {
            return Err(Error::InvalidGraph(format!("node count {n} outside 1..={MAX_NODES}")));
        }
        Ok(Self { n, adj: vec![0; n], labels: None })
    }

    /// Builds a graph from 0-based edge pairs. Duplicate pairs are stored once.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(n)?;
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop at node {}", i + 1)));
        }
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidGraph(format!(
                "edge ({}, {}) references a node outside 1..={}",
                i + 1,
                j + 1,
                self.n
            )));
        }
        self.adj[i] |= 1 << j;
        self.adj[j] |= 1 << i;
        Ok(())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidGraph(format!(
                "{} labels supplied for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => (i + 1).to_string(),
        }
    }

    pub fn full_mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    /// Edges as sorted 0-based pairs with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i] >> j & 1 == 1
    }

    /// The interference set of node `i` as a bit mask.
    pub fn neighbor_mask(&self, i: usize) -> u64 {
        self.adj[i]
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        bits(self.adj[i]).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].count_ones() as usize
    }

    pub fn is_independent(&self, mask: u64) -> bool {
        bits(mask).all(|i| self.adj[i] & mask == 0)
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut g = Self::new(n)?;
        for i in 0..n {
            for j in (i + 1)..n {
                g.add_edge(i, j)?;
            }
        }
        Ok(g)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let mut g = Self::new(n)?;
        for i in 0..n {
            g.add_edge(i, (i + 1) % n)?;
        }
        Ok(g)
    }

    /// Complete partite graph: nodes are numbered component by component and
    /// every pair of nodes in different components interferes.
    pub fn complete_partite(component_sizes: &[usize]) -> Result<(Self, Vec<Vec<usize>>)> {
        let n: usize = component_sizes.iter().sum();
        let mut g = Self::new(n)?;
        let mut components = Vec::with_capacity(component_sizes.len());
        let mut next = 0;
        for &size in component_sizes {
            if size == 0 {
                return Err(invalid("component_sizes", "components must be nonempty"));
            }
            components.push((next..next + size).collect::<Vec<_>>());
            next += size;
        }
        for (a, ca) in components.iter().enumerate() {
            for cb in &components[a + 1..] {
                for &i in ca {
                    for &j in cb {
                        g.add_edge(i, j)?;
                    }
                }
            }
        }
        Ok((g, components))
    }

    /// The diamond network generalised to `k` components of the given sizes
    /// (`sizes.len()` must equal `k`, or be a single size repeated `k` times).
    pub fn diamond(k: usize, sizes: &[usize]) -> Result<(Self, Vec<Vec<usize>>)> {
        if k < 2 {
            return Err(invalid("k", "a diamond needs at least two components"));
        }
        let sizes: Vec<usize> = match sizes.len() {
            1 => vec![sizes[0]; k],
            len if len == k => sizes.to_vec(),
            len => {
                return Err(invalid(
                    "component_sizes",
                    format!("expected 1 or {k} sizes, got {len}"),
                ))
            }
        };
        Self::complete_partite(&sizes)
    }

    /// The six-node diamond with the edge between nodes 4 and 5 removed.
    pub fn broken_diamond() -> Self {
        let (mut g, _) = Self::diamond(3, &[2]).expect("static topology");
        g.adj[3] &= !(1 << 4);
        g.adj[4] &= !(1 << 3);
        g
    }

    /// Five-node example whose unique minimal cover is `{1}, {2,3}, {4,5}`:
    /// node 1 interferes with everyone and nodes 2..5 admit the maximal
    /// schedules {2,3}, {3,4} and {4,5}.
    pub fn star_of_cliques() -> Self {
        let mut g = Self::new(5).expect("static topology");
        for j in 1..5 {
            g.add_edge(0, j).expect("static topology");
        }
        // 0-based: 1-3, 1-4, 2-4 are the only conflicts among nodes 2..5.
        for (i, j) in [(1, 3), (1, 4), (2, 4)] {
            g.add_edge(i, j).expect("static topology");
        }
        g
    }

    /// Parses the text format:
    ///
    /// ```text
    /// n = 3
    /// edges = [[1, 2], [2, 3]]
    /// labels = ["a", "b", "c"]   # optional
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            #[serde(default)]
            edges: Vec<[usize; 2]>,
            labels: Option<Vec<String>>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut g = Self::new(raw.n)?;
        for [i, j] in raw.edges {
            if i == 0 || j == 0 {
                return Err(Error::InvalidGraph("node ids are 1-based".into()));
            }
            g.add_edge(i - 1, j - 1)?;
        }
        match raw.labels {
            Some(labels) => g.with_labels(labels),
            None => Ok(g),
        }
    }

    pub fn to_text(&self) -> String {
        let edges: Vec<String> =
            self.edges().iter().map(|(i, j)| format!("[{}, {}]", i + 1, j + 1)).collect();
        let mut s = format!("n = {}\nedges = [{}]\n", self.n, edges.join(", "));
        if let Some(labels) = &self.labels {
            let quoted: Vec<String> = labels.iter().map(|l| format!("{l:?}")).collect();
            s.push_str(&format!("labels = [{}]\n", quoted.join(", ")));
        }
        s
    }
}

pub(crate) fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// An independent set, kept as a bit mask over the nodes of its source graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    mask: u64,
    n: usize,
}

impl Schedule {
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self { mask, n }
    }

    pub fn from_members(members: &[usize], n: usize) -> Self {
        Self { mask: members.iter().fold(0, |m, &i| m | 1 << i), n }
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn members(&self) -> Vec<usize> {
        bits(self.mask).collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// Incidence vector in `{0,1}^N`.
    pub fn incidence(&self) -> Vec<u8> {
        (0..self.n).map(|i| (self.mask >> i & 1) as u8).collect()
    }
}

/// Canonical order: lexicographic on the sorted member lists, which lists
/// `{1,2}` before `{3,4}` before `{4,5}` before `{5,6}`.
impl Ord for Schedule {
    fn cmp(&self, other: &Self) -> Ordering {
        self.members().cmp(&other.members()).then(self.n.cmp(&other.n))
    }
}

impl PartialOrd for Schedule {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.members().iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

fn check_enumeration_size(g: &InterferenceGraph) -> Result<()> {
    if g.n() > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit { n: g.n(), limit: ENUMERATION_LIMIT });
    }
    Ok(())
}

/// All independent sets, including the empty set, in canonical order.
pub fn enumerate_independent_sets(g: &InterferenceGraph) -> Result<Vec<Schedule>> {
    check_enumeration_size(g)?;
    let mut out = Vec::new();
    branch_independent(g, g.full_mask(), 0, &mut out);
    let mut sets: Vec<Schedule> = out.into_iter().map(|m| Schedule::from_mask(m, g.n())).collect();
    sets.sort();
    Ok(sets)
}

/// Branches on the candidate with the highest degree inside the candidate set.
fn branch_independent(g: &InterferenceGraph, candidates: u64, current: u64, out: &mut Vec<u64>) {
    if candidates == 0 {
        out.push(current);
        return;
    }
    let pivot = bits(candidates)
        .max_by_key(|&v| ((g.neighbor_mask(v) & candidates).count_ones(), std::cmp::Reverse(v)))
        .expect("nonempty candidates");
    let rest = candidates & !(1 << pivot);
    if g.neighbor_mask(pivot) & candidates == 0 {
        // Isolated within the candidates: both branches are always feasible.
        branch_independent(g, rest, current, out);
        branch_independent(g, rest, current | 1 << pivot, out);
        return;
    }
    branch_independent(g, rest, current, out);
    branch_independent(g, rest & !g.neighbor_mask(pivot), current | 1 << pivot, out);
}

/// Inclusion-maximal independent sets in canonical order (Bron–Kerbosch with
/// pivoting on the complement graph).
pub fn maximal_schedules(g: &InterferenceGraph) -> Result<Vec<Schedule>> {
    check_enumeration_size(g)?;
    let full = g.full_mask();
    let compat: Vec<u64> = (0..g.n()).map(|i| !g.neighbor_mask(i) & full & !(1 << i)).collect();
    let mut out = Vec::new();
    bron_kerbosch(&compat, 0, full, 0, &mut out);
    let mut sets: Vec<Schedule> = out.into_iter().map(|m| Schedule::from_mask(m, g.n())).collect();
    sets.sort();
    Ok(sets)
}

fn bron_kerbosch(compat: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
    if p == 0 {
        if x == 0 {
            out.push(r);
        }
        return;
    }
    let pivot = bits(p | x).max_by_key(|&u| (compat[u] & p).count_ones()).expect("p | x nonempty");
    for v in bits(p & !compat[pivot]) {
        bron_kerbosch(compat, r | 1 << v, p & compat[v], x & compat[v], out);
        p &= !(1 << v);
        x |= 1 << v;
    }
}

/// Maximum-size independent sets `S*` and their cardinality `m*`.
pub fn maximum_schedules(g: &InterferenceGraph) -> Result<(usize, Vec<Schedule>)> {
    let maximal = maximal_schedules(g)?;
    let m_star = maximal.iter().map(Schedule::len).max().unwrap_or(0);
    Ok((m_star, maximal.into_iter().filter(|s| s.len() == m_star).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityStatus {
    Interior,
    Boundary,
    Outside,
}

impl fmt::Display for CapacityStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CapacityStatus::Interior => "interior",
            CapacityStatus::Boundary => "boundary",
            CapacityStatus::Outside => "outside",
        })
    }
}

/// Result of the time-sharing LP. `load_factor` is `f64::INFINITY` for the
/// all-zero load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityVerdict {
    pub status: CapacityStatus,
    pub load_factor: f64,
    /// Optimal time-sharing weights over [`maximal_schedules`], when finite.
    pub weights: Vec<f64>,
}

/// Largest `t` such that `t·rho` is dominated by a convex combination of
/// maximal schedules.
pub fn capacity_membership(g: &InterferenceGraph, rho: &[f64]) -> Result<CapacityVerdict> {
    if rho.len() != g.n() {
        return Err(invalid("rho", format!("expected {} entries, got {}", g.n(), rho.len())));
    }
    if let Some(bad) = rho.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(invalid("rho", format!("entries must be finite and nonnegative, got {bad}")));
    }
    let schedules = maximal_schedules(g)?;
    let k = schedules.len();
    // Variables: w_1..w_k, t.
    let mut c = vec![0.0; k + 1];
    c[k] = 1.0;
    let mut a = vec![{
        let mut row = vec![1.0; k + 1];
        row[k] = 0.0;
        row
    }];
    let mut b = vec![1.0];
    for (i, &r) in rho.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let mut row: Vec<f64> =
            schedules.iter().map(|s| if s.contains(i) { -1.0 } else { 0.0 }).collect();
        row.push(r);
        a.push(row);
        b.push(0.0);
    }
    match lp::maximize(&c, &a, &b) {
        LpOutcome::Unbounded => Ok(CapacityVerdict {
            status: CapacityStatus::Interior,
            load_factor: f64::INFINITY,
            weights: Vec::new(),
        }),
        LpOutcome::Optimal { value, x } => {
            let status = if value - 1.0 > TAU_CAP {
                CapacityStatus::Interior
            } else if value - 1.0 >= -TAU_CAP {
                CapacityStatus::Boundary
            } else {
                CapacityStatus::Outside
            };
            Ok(CapacityVerdict { status, load_factor: value, weights: x[..k].to_vec() })
        }
    }
}

/// A k-duplicate graph together with the per-node data carried over from the
/// base graph and the collection (base node) each node belongs to.
#[derive(Clone, Debug)]
pub struct DuplicateGraph<T> {
    pub graph: InterferenceGraph,
    pub node_data: Vec<T>,
    /// `collection[v]` is the base node whose duplicate collection holds `v`.
    pub collection: Vec<usize>,
}

/// Adds `k` duplicates of every node. Duplicate `j` (1-based) of base node
/// `i` gets index `n + i·k + (j−1)`; it interferes with every neighbour of `i`
/// and all of their duplicates, and never with its own collection.
pub fn duplicate_graph<T: Clone>(
    g: &InterferenceGraph,
    k: usize,
    base: &[T],
) -> Result<DuplicateGraph<T>> {
    if k == 0 {
        return Err(invalid("k", "need at least one duplicate"));
    }
    if base.len() != g.n() {
        return Err(invalid("base_params", format!("expected {} entries", g.n())));
    }
    let n = g.n();
    let total = n * (k + 1);
    if total > MAX_NODES {
        return Err(Error::SizeLimit { n: total, limit: MAX_NODES });
    }
    let mut collection: Vec<usize> = (0..n).collect();
    for i in 0..n {
        collection.extend(std::iter::repeat_n(i, k));
    }
    let mut out = InterferenceGraph::new(total)?;
    for u in 0..total {
        for v in (u + 1)..total {
            if g.has_edge(collection[u], collection[v]) {
                out.add_edge(u, v)?;
            }
        }
    }
    let mut labels = Vec::with_capacity(total);
    for i in 0..n {
        labels.push(g.label(i));
    }
    for i in 0..n {
        for j in 1..=k {
            labels.push(format!("{}'{}", g.label(i), j));
        }
    }
    let node_data = collection.iter().map(|&i| base[i].clone()).collect();
    Ok(DuplicateGraph { graph: out.with_labels(labels)?, node_data, collection })
}

/// Contracts every duplicate collection back to a single node.
pub fn collapse(g: &InterferenceGraph, collection: &[usize]) -> Result<InterferenceGraph> {
    let n = collection.iter().max().map_or(0, |m| m + 1);
    let mut out = InterferenceGraph::new(n)?;
    for (u, v) in g.edges() {
        let (a, b) = (collection[u], collection[v]);
        if a == b {
            return Err(Error::InvalidGraph("edge inside a duplicate collection".into()));
        }
        out.add_edge(a, b)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    /// Maximal schedules in canonical order; covers index into this list.
    pub schedules: Vec<Schedule>,
    /// Every inclusion-minimal cover of the node set.
    pub covers: Vec<Vec<usize>>,
    pub unique: bool,
    /// Schedules left out of the unique minimal cover (empty unless `unique`).
    pub excluded: Vec<usize>,
    /// Members of the unique cover that share no node with any other maximal
    /// schedule.
    pub disjoint_from_all_others: Vec<usize>,
}

impl CoverReport {
    /// Unique minimal cover with at least one excluded maximal schedule.
    pub fn has_instability_signature(&self) -> bool {
        self.unique && !self.excluded.is_empty()
    }
}

pub fn minimal_set_covers(g: &InterferenceGraph) -> Result<CoverReport> {
    let schedules = maximal_schedules(g)?;
    let k = schedules.len();
    if k > COVER_LIMIT {
        return Err(Error::TooManySchedules { count: k, limit: COVER_LIMIT });
    }
    let full = g.full_mask();
    let masks: Vec<u64> = schedules.iter().map(Schedule::mask).collect();
    let union = |sel: u32| bits(sel as u64).fold(0u64, |acc, j| acc | masks[j]);
    let mut covers = Vec::new();
    for sel in 1u32..(1u32 << k) {
        if union(sel) != full {
            continue;
        }
        let minimal = bits(sel as u64).all(|j| union(sel & !(1 << j)) != full);
        if minimal {
            covers.push(bits(sel as u64).collect::<Vec<_>>());
        }
    }
    covers.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    let unique = covers.len() == 1;
    let (excluded, disjoint) = if unique {
        let cover: BTreeSet<usize> = covers[0].iter().copied().collect();
        let excluded = (0..k).filter(|j| !cover.contains(j)).collect();
        let disjoint = covers[0]
            .iter()
            .copied()
            .filter(|&j| (0..k).all(|o| o == j || masks[o] & masks[j] == 0))
            .collect();
        (excluded, disjoint)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(CoverReport { schedules, covers, unique, excluded, disjoint_from_all_others: disjoint })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_independent(g: &InterferenceGraph) -> Vec<u64> {
        (0..1u64 << g.n()).filter(|&m| g.is_independent(m)).collect()
    }

    fn sets(g: &InterferenceGraph, list: &[&[usize]]) -> Vec<Schedule> {
        let mut v: Vec<Schedule> =
            list.iter().map(|m| Schedule::from_members(&m.iter().map(|i| i - 1).collect::<Vec<_>>(), g.n())).collect();
        v.sort();
        v
    }

    #[test]
    fn single_node_has_two_sets() {
        let g = InterferenceGraph::new(1).unwrap();
        let all = enumerate_independent_sets(&g).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all[0].is_empty());
    }

    #[test]
    fn broken_diamond_maximal_schedules() {
        let g = InterferenceGraph::broken_diamond();
        let m = maximal_schedules(&g).unwrap();
        assert_eq!(m, sets(&g, &[&[1, 2], &[3, 4], &[4, 5], &[5, 6]]));
        // enumeration agrees with the maximal filter of the full list
        let all = enumerate_independent_sets(&g).unwrap();
        let maximal: Vec<Schedule> = all
            .iter()
            .copied()
            .filter(|s| (0..6).all(|v| s.contains(v) || !g.is_independent(s.mask() | 1 << v)))
            .collect();
        let mut maximal = maximal;
        maximal.sort();
        assert_eq!(maximal, m);
    }

    #[test]
    fn diamond_maximum_sets_are_components() {
        let (g, comps) = InterferenceGraph::diamond(3, &[2]).unwrap();
        let brute = brute_force_independent(&g);
        let m_star = brute.iter().map(|m| m.count_ones()).max().unwrap();
        let maxima: Vec<u64> = brute.iter().copied().filter(|m| m.count_ones() == m_star).collect();
        assert_eq!(m_star, 2);
        assert_eq!(maxima.len(), 3);
        let (m, s) = maximum_schedules(&g).unwrap();
        assert_eq!(m, 2);
        let expected: Vec<Schedule> = comps.iter().map(|c| Schedule::from_members(c, 6)).collect();
        assert_eq!(s, expected);
    }

    #[test]
    fn complete_graph_gives_singletons() {
        let g = InterferenceGraph::complete(5).unwrap();
        let m = maximal_schedules(&g).unwrap();
        assert_eq!(m.len(), 5);
        assert!(m.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn five_cycle_has_five_pairs() {
        let g = InterferenceGraph::cycle(5).unwrap();
        let brute: Vec<u64> = brute_force_independent(&g)
            .into_iter()
            .filter(|&m| (0..5).all(|v| m >> v & 1 == 1 || !g.is_independent(m | 1 << v)))
            .collect();
        let m = maximal_schedules(&g).unwrap();
        assert_eq!(m.len(), brute.len());
        assert_eq!(m.len(), 5);
        assert!(m.iter().all(|s| s.len() == 2));
    }

    #[test]
    fn size_limit_is_explicit() {
        let g = InterferenceGraph::new(31).unwrap();
        assert!(matches!(enumerate_independent_sets(&g), Err(Error::SizeLimit { n: 31, .. })));
        assert!(matches!(maximal_schedules(&g), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn rejects_self_loops_and_stores_edges_once() {
        let mut g = InterferenceGraph::new(3).unwrap();
        assert!(g.add_edge(1, 1).is_err());
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 0).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert_eq!(g.neighbors(1), vec![0]);
    }

    #[test]
    fn capacity_zero_load_is_unbounded() {
        let g = InterferenceGraph::broken_diamond();
        let v = capacity_membership(&g, &[0.0; 6]).unwrap();
        assert_eq!(v.status, CapacityStatus::Interior);
        assert!(v.load_factor.is_infinite());
    }

    #[test]
    fn capacity_section6_load() {
        let g = InterferenceGraph::broken_diamond();
        let rho: Vec<f64> = [0.4, 0.4, 0.4, 0.4, 0.2, 0.2].iter().map(|k| 0.97 * k).collect();
        let v = capacity_membership(&g, &rho).unwrap();
        assert_eq!(v.status, CapacityStatus::Interior);
        assert!((v.load_factor - 1.0 / 0.97).abs() < 1e-12, "{}", v.load_factor);
    }

    #[test]
    fn capacity_two_node_complete_outside() {
        let g = InterferenceGraph::complete(2).unwrap();
        let v = capacity_membership(&g, &[0.6, 0.6]).unwrap();
        assert_eq!(v.status, CapacityStatus::Outside);
        assert!((v.load_factor - 1.0 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn capacity_boundary_and_errors() {
        let g = InterferenceGraph::complete(2).unwrap();
        let v = capacity_membership(&g, &[0.5, 0.5]).unwrap();
        assert_eq!(v.status, CapacityStatus::Boundary);
        assert!(capacity_membership(&g, &[0.5, -0.1]).is_err());
        assert!(capacity_membership(&g, &[0.5]).is_err());
    }

    #[test]
    fn duplicate_of_isolated_node() {
        let g = InterferenceGraph::new(1).unwrap();
        let d = duplicate_graph(&g, 3, &[()]).unwrap();
        assert_eq!(d.graph.n(), 4);
        assert!(d.graph.edges().is_empty());
    }

    #[test]
    fn duplicate_of_two_node_complete_graph() {
        let g = InterferenceGraph::complete(2).unwrap();
        let d = duplicate_graph(&g, 1, &[1.0, 2.0]).unwrap();
        // nodes: 0 = 1, 1 = 2, 2 = 1', 3 = 2'
        assert_eq!(d.graph.edges(), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert_eq!(d.node_data, vec![1.0, 2.0, 1.0, 2.0]);
        let m = maximal_schedules(&d.graph).unwrap();
        assert_eq!(m, vec![Schedule::from_members(&[0, 2], 4), Schedule::from_members(&[1, 3], 4)]);
    }

    #[test]
    fn duplicate_preserves_maximal_schedule_structure() {
        let g = InterferenceGraph::broken_diamond();
        let base = maximal_schedules(&g).unwrap();
        let d = duplicate_graph(&g, 2, &[(); 6]).unwrap();
        let dup = maximal_schedules(&d.graph).unwrap();
        assert_eq!(dup.len(), 4);
        let mut lifted: Vec<Schedule> = base
            .iter()
            .map(|s| {
                let members: Vec<usize> =
                    (0..d.graph.n()).filter(|&v| s.contains(d.collection[v])).collect();
                Schedule::from_members(&members, d.graph.n())
            })
            .collect();
        lifted.sort();
        assert_eq!(dup, lifted);
        assert_eq!(collapse(&d.graph, &d.collection).unwrap(), g);
    }

    #[test]
    fn covers_complete_graph() {
        let g = InterferenceGraph::complete(3).unwrap();
        let r = minimal_set_covers(&g).unwrap();
        assert!(r.unique);
        assert_eq!(r.covers, vec![vec![0, 1, 2]]);
        assert!(r.excluded.is_empty());
        assert!(!r.has_instability_signature());
    }

    #[test]
    fn covers_broken_diamond() {
        let g = InterferenceGraph::broken_diamond();
        let r = minimal_set_covers(&g).unwrap();
        // canonical order: {1,2}, {3,4}, {4,5}, {5,6}
        assert!(r.unique);
        assert_eq!(r.covers, vec![vec![0, 1, 3]]);
        assert_eq!(r.excluded, vec![2]);
        assert_eq!(r.schedules[2], Schedule::from_members(&[3, 4], 6));
        assert_eq!(r.disjoint_from_all_others, vec![0]);
        assert!(r.has_instability_signature());
    }

    #[test]
    fn covers_star_of_cliques() {
        let g = InterferenceGraph::star_of_cliques();
        let r = minimal_set_covers(&g).unwrap();
        assert!(r.unique);
        let cover: Vec<String> = r.covers[0].iter().map(|&j| r.schedules[j].to_string()).collect();
        assert_eq!(cover, vec!["{1}", "{2,3}", "{4,5}"]);
        assert_eq!(r.excluded.len(), 1);
        assert_eq!(r.schedules[r.excluded[0]].to_string(), "{3,4}");
    }

    #[test]
    fn text_format_round_trip() {
        let g = InterferenceGraph::broken_diamond();
        let parsed = InterferenceGraph::parse(&g.to_text()).unwrap();
        assert_eq!(parsed, g);
        assert!(InterferenceGraph::parse("n = 2\nedges = [[0, 1]]").is_err());
        assert!(InterferenceGraph::parse("n = 2\nedges = [[1, 1]]").is_err());
    }
}
