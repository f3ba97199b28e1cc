//! Left-irregular, right-regular bipartite graphs.
//!
//! Left nodes are items, right nodes are pools of exactly `r` items. Graphs
//! are drawn from the configuration model: left degrees are sampled from the
//! node-perspective profile, the stub total is repaired to match `M·r`, the
//! stubs are matched uniformly at random, and any multi-edges are removed by
//! random edge swaps.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{QgtError, Result};

/// Edge-perspective left-degree distribution `λ_1 … λ_d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeProfile {
    lambda: Vec<f64>,
    avg_degree: f64,
}

impl DegreeProfile {
    /// `lambda[i - 1]` is the fraction of edges attached to degree-`i` nodes.
    ///
    /// The input must be nonnegative and sum to 1 within `1e-9`; it is then
    /// renormalised to sum to exactly one.
    pub fn from_lambda(lambda: &[f64]) -> Result<Self> {
        if lambda.is_empty() {
            return Err(QgtError::Profile("empty degree profile".into()));
        }
        if let Some((i, v)) = lambda
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(QgtError::Profile(format!(
                "lambda_{} = {v} is negative or not finite",
                i + 1
            )));
        }
        let sum: f64 = lambda.iter().sum();
        if sum <= 0.0 {
            return Err(QgtError::Profile("degree profile sums to zero".into()));
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(QgtError::Profile(format!(
                "degree profile sums to {sum}, not 1"
            )));
        }
        let lambda: Vec<f64> = lambda.iter().map(|v| v / sum).collect();
        let inv_avg: f64 = lambda
            .iter()
            .enumerate()
            .map(|(i, l)| l / (i + 1) as f64)
            .sum();
        Ok(Self {
            lambda,
            avg_degree: 1.0 / inv_avg,
        })
    }

    /// Profile with all edges on degree-`i` nodes.
    pub fn regular(i: usize) -> Self {
        let mut lambda = vec![0.0; i];
        lambda[i - 1] = 1.0;
        Self::from_lambda(&lambda).expect("unit vector is a valid profile")
    }

    /// Maximum left degree `d`.
    pub fn max_degree(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `λ_i` (1-based degree), zero beyond `d`.
    pub fn lambda_at(&self, degree: usize) -> f64 {
        if degree == 0 {
            0.0
        } else {
            self.lambda.get(degree - 1).copied().unwrap_or(0.0)
        }
    }

    /// Average left degree `ℓ = 1 / Σ λ_i / i`.
    pub fn avg_degree(&self) -> f64 {
        self.avg_degree
    }

    /// Node-perspective distribution `L_i = ℓ · λ_i / i`.
    pub fn node_fractions(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .enumerate()
            .map(|(i, l)| self.avg_degree * l / (i + 1) as f64)
            .collect()
    }

    /// `(degree, λ_degree)` for every degree with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.lambda
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0.0)
            .map(|(i, &l)| (i + 1, l))
    }
}

/// One edge seen from its left endpoint: right node and slot within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Incidence {
    pub node: u32,
    pub pos: u32,
}

/// Bipartite graph with `n` left nodes and `m` right nodes of degree `r`.
///
/// Right adjacency is stored flat; the order inside each right node is the
/// column order of the signature matrix and is therefore semantic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    n: usize,
    m: usize,
    r: usize,
    right_adj: Vec<u32>,
    left_offsets: Vec<usize>,
    left_inc: Vec<Incidence>,
}

const SWAP_PASSES: usize = 64;
const SWAP_ATTEMPTS: usize = 256;
const RESAMPLE_ATTEMPTS: u64 = 8;

impl BipartiteGraph {
    /// Builds a graph from explicit right-node neighbour lists.
    pub fn from_right_adj(n: usize, lists: &[Vec<u32>]) -> Result<Self> {
        let m = lists.len();
        if m == 0 {
            return Err(QgtError::GraphConstruction("no right nodes".into()));
        }
        let r = lists[0].len();
        let mut flat = Vec::with_capacity(m * r);
        for (i, list) in lists.iter().enumerate() {
            if list.len() != r {
                return Err(QgtError::GraphConstruction(format!(
                    "right node {i} has {} neighbours, expected {r}",
                    list.len()
                )));
            }
            flat.extend_from_slice(list);
        }
        Self::from_flat(n, m, r, flat)
    }

    fn from_flat(n: usize, m: usize, r: usize, right_adj: Vec<u32>) -> Result<Self> {
        if r == 0 {
            return Err(QgtError::GraphConstruction("right degree is zero".into()));
        }
        if n > u32::MAX as usize || m > u32::MAX as usize {
            return Err(QgtError::GraphConstruction("graph too large".into()));
        }
        debug_assert_eq!(right_adj.len(), m * r);
        let mut deg = vec![0usize; n];
        // last right node (plus one) that listed each item
        let mut seen = vec![0u32; n];
        for (i, nbrs) in right_adj.chunks_exact(r).enumerate() {
            for &v in nbrs {
                if v as usize >= n {
                    return Err(QgtError::GraphConstruction(format!(
                        "right node {i} references left node {v} >= N = {n}"
                    )));
                }
                if std::mem::replace(&mut seen[v as usize], i as u32 + 1) == i as u32 + 1 {
                    return Err(QgtError::GraphConstruction(format!(
                        "right node {i} lists left node {v} twice"
                    )));
                }
                deg[v as usize] += 1;
            }
        }
        let mut left_offsets = Vec::with_capacity(n + 1);
        left_offsets.push(0);
        for d in &deg {
            left_offsets.push(left_offsets.last().unwrap() + d);
        }
        let mut fill = left_offsets[..n].to_vec();
        let mut left_inc = vec![Incidence { node: 0, pos: 0 }; m * r];
        for (i, nbrs) in right_adj.chunks_exact(r).enumerate() {
            for (a, &v) in nbrs.iter().enumerate() {
                let slot = &mut fill[v as usize];
                left_inc[*slot] = Incidence {
                    node: i as u32,
                    pos: a as u32,
                };
                *slot += 1;
            }
        }
        Ok(Self {
            n,
            m,
            r,
            right_adj,
            left_offsets,
            left_inc,
        })
    }

    /// Samples a graph from the configuration model; deterministic in `seed`.
    ///
    /// Requires `N ≤ M·r ≤ N·min(d, M)`. Degree repair stays at or above the
    /// profile's smallest degree whenever the edge budget allows it. Right
    /// neighbour lists come out in ascending order.
    pub fn sample(
        n: usize,
        m: usize,
        r: usize,
        profile: &DegreeProfile,
        seed: u64,
    ) -> Result<Self> {
        if r == 0 || m == 0 || n == 0 {
            return Err(QgtError::GraphConstruction(format!(
                "degenerate dimensions N = {n}, M = {m}, r = {r}"
            )));
        }
        if r > n {
            return Err(QgtError::GraphConstruction(format!(
                "right degree r = {r} exceeds N = {n}"
            )));
        }
        let dmax = profile.max_degree().min(m);
        let dmin = profile.support().map(|(i, _)| i).next().unwrap_or(1).min(dmax);
        let edges = m.checked_mul(r).ok_or_else(|| {
            QgtError::GraphConstruction("edge count overflows".into())
        })?;
        if edges < n || edges > n * dmax {
            return Err(QgtError::GraphConstruction(format!(
                "M·r = {edges} outside the repairable range [{n}, {}]",
                n * dmax
            )));
        }
        let mut last_err = None;
        for attempt in 0..RESAMPLE_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(attempt);
            // keep the profile's minimum degree unless the budget forces lower
            let floor = if edges >= n * dmin { dmin } else { 1 };
            match Self::sample_once(n, m, r, (floor, dmax), profile, &mut rng) {
                Ok(g) => return Ok(g),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap())
    }

    fn sample_once(
        n: usize,
        m: usize,
        r: usize,
        (dmin, dmax): (usize, usize),
        profile: &DegreeProfile,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let weights = profile.node_fractions();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| QgtError::Profile(format!("cannot sample degrees: {e}")))?;
        let mut deg: Vec<usize> = (0..n)
            .map(|_| (dist.sample(rng) + 1).clamp(dmin, dmax))
            .collect();
        repair_degrees(&mut deg, m * r, (dmin, dmax), rng);

        let mut slots: Vec<u32> = Vec::with_capacity(m * r);
        for (v, &d) in deg.iter().enumerate() {
            slots.extend(std::iter::repeat_n(v as u32, d));
        }
        slots.shuffle(rng);

        if !remove_multi_edges(&mut slots, &deg, r, rng) {
            return Err(QgtError::GraphConstruction(
                "multi-edge removal did not converge".into(),
            ));
        }
        slots.chunks_exact_mut(r).for_each(|c| c.sort_unstable());
        Self::from_flat(n, m, r, slots)
    }

    /// Left node count `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Right node count `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Right degree `r`.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn num_edges(&self) -> usize {
        self.right_adj.len()
    }

    #[inline]
    pub fn right_neighbors(&self, node: usize) -> &[u32] {
        &self.right_adj[node * self.r..(node + 1) * self.r]
    }

    #[inline]
    pub fn incidences(&self, item: usize) -> &[Incidence] {
        &self.left_inc[self.left_offsets[item]..self.left_offsets[item + 1]]
    }

    pub fn left_degree(&self, item: usize) -> usize {
        self.left_offsets[item + 1] - self.left_offsets[item]
    }

    pub fn right_adj_lists(&self) -> Vec<Vec<u32>> {
        self.right_adj.chunks_exact(self.r).map(|c| c.to_vec()).collect()
    }

    /// `hist[i]` = number of left nodes of degree `i`.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let mut hist = Vec::new();
        for j in 0..self.n {
            let d = self.left_degree(j);
            if hist.len() <= d {
                hist.resize(d + 1, 0);
            }
            hist[d] += 1;
        }
        hist
    }

    /// Full edge-set comparison of the left and right views.
    pub fn is_consistent(&self) -> bool {
        let mut from_right: Vec<(u32, u32, u32)> = Vec::with_capacity(self.num_edges());
        for i in 0..self.m {
            for (a, &v) in self.right_neighbors(i).iter().enumerate() {
                from_right.push((v, i as u32, a as u32));
            }
        }
        let mut from_left: Vec<(u32, u32, u32)> = Vec::with_capacity(self.num_edges());
        for j in 0..self.n {
            for inc in self.incidences(j) {
                from_left.push((j as u32, inc.node, inc.pos));
            }
        }
        from_right.sort_unstable();
        from_left.sort_unstable();
        from_right == from_left
    }
}

// Nudges randomly chosen degrees by ±1 within [dmin, dmax] until they sum to `target`.
fn repair_degrees(
    deg: &mut [usize],
    target: usize,
    (dmin, dmax): (usize, usize),
    rng: &mut impl Rng,
) {
    let total: usize = deg.iter().sum();
    if total < target {
        let mut open: Vec<usize> = (0..deg.len()).filter(|&v| deg[v] < dmax).collect();
        for _ in 0..target - total {
            let k = rng.random_range(0..open.len());
            let v = open[k];
            deg[v] += 1;
            if deg[v] == dmax {
                open.swap_remove(k);
            }
        }
    } else if total > target {
        let mut open: Vec<usize> = (0..deg.len()).filter(|&v| deg[v] > dmin).collect();
        for _ in 0..total - target {
            let k = rng.random_range(0..open.len());
            let v = open[k];
            deg[v] -= 1;
            if deg[v] == dmin {
                open.swap_remove(k);
            }
        }
    }
}

// Edge-swap passes until no right node lists an item twice. Each item keeps
// the list of slots it occupies, so membership tests cost O(degree).
fn remove_multi_edges(slots: &mut [u32], deg: &[usize], r: usize, rng: &mut impl Rng) -> bool {
    let mut offsets = Vec::with_capacity(deg.len() + 1);
    offsets.push(0);
    for d in deg {
        offsets.push(offsets.last().unwrap() + d);
    }
    let mut fill = offsets[..deg.len()].to_vec();
    let mut item_slots = vec![0usize; slots.len()];
    for (slot, &v) in slots.iter().enumerate() {
        item_slots[fill[v as usize]] = slot;
        fill[v as usize] += 1;
    }
    let mut slots_of = ItemSlots { offsets, item_slots };

    // A successful swap never creates a new repeat, so after the first scan
    // only slots whose swap failed need another look.
    let mut pending = slots_of.duplicate_slots(r, slots.len() / r);
    for _ in 0..SWAP_PASSES {
        if pending.is_empty() {
            return true;
        }
        pending.retain(|&slot| {
            slots_of.in_node_except(slots[slot], slot / r, r, slot)
                && !swap_out(slots, &mut slots_of, r, slot, rng)
        });
    }
    pending.is_empty()
}

struct ItemSlots {
    offsets: Vec<usize>,
    item_slots: Vec<usize>,
}

impl ItemSlots {
    fn of(&self, v: u32) -> &[usize] {
        &self.item_slots[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    fn in_node(&self, v: u32, node: usize, r: usize) -> bool {
        self.of(v).iter().any(|&s| s / r == node)
    }

    fn in_node_except(&self, v: u32, node: usize, r: usize, skip: usize) -> bool {
        self.of(v).iter().any(|&s| s != skip && s / r == node)
    }

    fn moved(&mut self, v: u32, from: usize, to: usize) {
        let range = self.offsets[v as usize]..self.offsets[v as usize + 1];
        let s = self.item_slots[range]
            .iter_mut()
            .find(|s| **s == from)
            .expect("slot belongs to item");
        *s = to;
    }

    // Every slot whose item already appears earlier in the same right node.
    fn duplicate_slots(&self, r: usize, m: usize) -> Vec<usize> {
        let mut mark = vec![u32::MAX; m];
        let mut dups = Vec::new();
        for v in 0..self.offsets.len() - 1 {
            for &s in self.of(v as u32) {
                if std::mem::replace(&mut mark[s / r], v as u32) == v as u32 {
                    dups.push(s);
                }
            }
        }
        dups
    }
}

// Swaps the item in `slot` with a random slot elsewhere, if that leaves both
// right nodes free of repeats. Returns whether a swap happened.
fn swap_out(
    slots: &mut [u32],
    slots_of: &mut ItemSlots,
    r: usize,
    slot: usize,
    rng: &mut impl Rng,
) -> bool {
    let node = slot / r;
    let u = slots[slot];
    for _ in 0..SWAP_ATTEMPTS {
        let other = rng.random_range(0..slots.len());
        let other_node = other / r;
        if other_node == node {
            continue;
        }
        let v = slots[other];
        if slots_of.in_node(v, node, r) || slots_of.in_node(u, other_node, r) {
            continue;
        }
        slots.swap(slot, other);
        slots_of.moved(u, slot, other);
        slots_of.moved(v, other, slot);
        return true;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn profile_identities() {
        let p = DegreeProfile::from_lambda(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.avg_degree(), 3.0);
        assert_eq!(p.node_fractions(), vec![0.0, 0.0, 1.0]);

        let p = DegreeProfile::from_lambda(&[0.0, 1.0]).unwrap();
        assert_eq!(p.avg_degree(), 2.0);

        let p = DegreeProfile::from_lambda(&[0.0, 0.0, 0.785, 0.215]).unwrap();
        // 1 / (0.785/3 + 0.215/4)
        assert!((p.avg_degree() - 3.1705).abs() < 1e-3);
        let node_sum: f64 = p.node_fractions().iter().sum();
        assert!((node_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn profile_errors() {
        assert!(DegreeProfile::from_lambda(&[0.5, -0.1, 0.6]).is_err());
        assert!(DegreeProfile::from_lambda(&[0.0, 0.0]).is_err());
        assert!(DegreeProfile::from_lambda(&[0.5, 0.4]).is_err());
        assert!(DegreeProfile::from_lambda(&[]).is_err());
    }

    #[test]
    fn worked_example_graph_is_admissible() {
        // adjacency T of the 14-item, 3-node example, 0-indexed
        let lists = vec![
            vec![1, 3, 4, 8, 9, 12, 13],
            vec![2, 3, 6, 7, 9, 11, 12],
            vec![0, 3, 5, 7, 9, 10, 12],
        ];
        let g = BipartiteGraph::from_right_adj(14, &lists).unwrap();
        assert_eq!(g.degree_histogram(), vec![0, 10, 1, 3]);
        assert!(g.is_consistent());
        // L(x) = 10/14 x + 1/14 x^2 + 3/14 x^3  →  λ_i = i L_i / ℓ
        let ell = (10.0 + 2.0 + 9.0) / 14.0;
        let lambda: Vec<f64> = [10.0, 1.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, c)| (i + 1) as f64 * c / 14.0 / ell)
            .collect();
        let p = DegreeProfile::from_lambda(&lambda).unwrap();
        assert!((p.avg_degree() * 14.0 - (3 * 7) as f64).abs() < 1e-9);
    }

    #[test]
    fn from_right_adj_rejects_bad_lists() {
        assert!(BipartiteGraph::from_right_adj(5, &[vec![0, 1, 1]]).is_err());
        assert!(BipartiteGraph::from_right_adj(5, &[vec![0, 1, 5]]).is_err());
        assert!(BipartiteGraph::from_right_adj(5, &[vec![0, 1], vec![2]]).is_err());
    }

    #[test]
    fn degree_one_profile_gives_partition() {
        let g = BipartiteGraph::sample(40, 5, 8, &DegreeProfile::regular(1), 3).unwrap();
        assert_eq!(g.degree_histogram(), vec![0, 40]);
        let mut all: Vec<u32> = (0..5).flat_map(|i| g.right_neighbors(i).to_vec()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<u32>>());
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = DegreeProfile::from_lambda(&[0.0, 0.6, 0.4]).unwrap();
        let a = BipartiteGraph::sample(500, 40, 30, &p, 11).unwrap();
        let b = BipartiteGraph::sample(500, 40, 30, &p, 11).unwrap();
        let c = BipartiteGraph::sample(500, 40, 30, &p, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn infeasible_edge_budget_rejected() {
        let p = DegreeProfile::regular(3);
        assert!(BipartiteGraph::sample(100, 2, 10, &p, 0).is_err());
        assert!(BipartiteGraph::sample(100, 20, 20, &p, 0).is_err());
    }

    #[test]
    fn degree_histogram_matches_profile() {
        // χ² goodness of fit against L at N = 10^5
        let p = DegreeProfile::from_lambda(&[0.0, 0.5, 0.3, 0.2]).unwrap();
        let n = 100_000usize;
        let r = 1000usize;
        let m = (n as f64 * p.avg_degree() / r as f64).round() as usize;
        let g = BipartiteGraph::sample(n, m, r, &p, 2024).unwrap();
        let hist = g.degree_histogram();
        let expected: Vec<f64> = p.node_fractions().iter().map(|l| l * n as f64).collect();
        let chi2: f64 = (2..=4)
            .map(|d| {
                let o = *hist.get(d).unwrap_or(&0) as f64;
                let e = expected[d - 1];
                (o - e).powi(2) / e
            })
            .sum();
        assert_eq!(hist.get(1).copied().unwrap_or(0), 0);
        // 3 categories → 2 degrees of freedom; p = 0.001 critical value
        assert!(chi2 < 13.816, "chi2 = {chi2}, hist = {hist:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sampled_graphs_satisfy_structure(
            n in 20usize..400,
            r in 3usize..20,
            d in 2usize..6,
            seed in any::<u64>(),
        ) {
            let mut lambda = vec![0.0; d];
            lambda[d - 1] = 0.5;
            lambda[0] = 0.5;
            let p = DegreeProfile::from_lambda(&lambda).unwrap();
            let m = ((n as f64 * p.avg_degree()) / r as f64).ceil() as usize;
            prop_assume!(r <= n && m * r <= n * d.min(m) && m * r >= n);
            let g = BipartiteGraph::sample(n, m, r, &p, seed).unwrap();
            prop_assert_eq!(g.num_edges(), m * r);
            prop_assert!(g.is_consistent());
            for i in 0..m {
                let nb = g.right_neighbors(i);
                prop_assert_eq!(nb.len(), r);
                prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
            }
            let total: usize = (0..n).map(|j| g.left_degree(j)).sum();
            prop_assert_eq!(total, m * r);
            for j in 0..n {
                let dj = g.left_degree(j);
                prop_assert!((1..=d).contains(&dj));
            }
        }
    }
}
