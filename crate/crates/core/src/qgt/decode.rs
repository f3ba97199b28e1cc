//! Peeling recovery.
//!
//! Each iteration looks at the right nodes whose residual count changed in
//! the previous iteration (all nodes in the first one), resolves every such
//! node holding at most `t` unidentified defectives by BCH syndrome
//! decoding, and only then subtracts the newly identified items from all of
//! their tests. Resolution within an iteration therefore sees the residuals
//! as they were when the iteration started, which is the schedule density
//! evolution describes.

use std::collections::HashSet;

use serde::Serialize;

use super::{TestPlan, TestResults};
use crate::error::{QgtError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeOutcome {
    /// Items declared defective, ascending.
    pub identified: Vec<u32>,
    /// Iterations that resolved at least one right node.
    pub iterations: usize,
    pub resolved_nodes: usize,
    pub unresolved_nodes: usize,
    /// Some unresolved node still holds more than `t` defectives.
    pub stalled: bool,
    /// Syndrome-decoding failures (and inconsistent residuals) encountered.
    pub failed_nodes: usize,
    /// Cumulative identified count after each iteration.
    pub identified_per_iteration: Vec<usize>,
}

impl DecodeOutcome {
    /// Every right node was resolved.
    pub fn is_complete(&self) -> bool {
        self.unresolved_nodes == 0
    }
}

/// Step-wise peeling state over one plan and one results vector.
pub struct Peeler<'a> {
    plan: &'a TestPlan,
    residual: Vec<i64>,
    resolved: Vec<bool>,
    queued: Vec<bool>,
    pending: Vec<u32>,
    identified: HashSet<u32>,
    order: Vec<u32>,
    iterations: usize,
    resolved_nodes: usize,
    failed_nodes: usize,
    trace: Vec<usize>,
    syndrome: Vec<u32>,
    scratch: Vec<i64>,
}

impl<'a> Peeler<'a> {
    pub fn new(plan: &'a TestPlan, y: &TestResults) -> Result<Self> {
        let m = plan.graph().m();
        if y.values().len() != plan.num_tests() {
            return Err(QgtError::DimensionMismatch {
                expected: plan.num_tests(),
                found: y.values().len(),
            });
        }
        Ok(Self {
            plan,
            residual: y.values().iter().map(|&v| v as i64).collect(),
            resolved: vec![false; m],
            queued: vec![true; m],
            pending: (0..m as u32).collect(),
            identified: HashSet::new(),
            order: Vec::new(),
            iterations: 0,
            resolved_nodes: 0,
            failed_nodes: 0,
            trace: Vec::new(),
            syndrome: vec![0; plan.t()],
            scratch: vec![0; plan.s()],
        })
    }

    /// Residual results after subtracting every identified item.
    pub fn residual(&self) -> &[i64] {
        &self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Identified items in ascending order.
    pub fn identified(&self) -> Vec<u32> {
        let mut v = self.order.clone();
        v.sort_unstable();
        v
    }

    /// Runs one iteration; returns whether any right node was resolved.
    pub fn step(&mut self) -> bool {
        let t = self.plan.t() as i64;
        let s = self.plan.s();
        let mut frontier = std::mem::take(&mut self.pending);
        for &node in &frontier {
            self.queued[node as usize] = false;
        }
        frontier.retain(|&node| {
            let count = self.residual[node as usize * s];
            !self.resolved[node as usize] && count <= t
        });
        if frontier.is_empty() {
            return false;
        }
        frontier.sort_unstable();

        let mut progress = false;
        let mut fresh = Vec::new();
        for &node in &frontier {
            let node = node as usize;
            let count = self.residual[node * s];
            if count < 0 {
                self.failed_nodes += 1;
                continue;
            }
            if count == 0 {
                self.mark_resolved(node);
                progress = true;
                continue;
            }
            match self.resolve(node, count as usize) {
                Some(positions) => {
                    let nbrs = self.plan.graph().right_neighbors(node);
                    for pos in positions {
                        let item = nbrs[pos];
                        if self.identified.insert(item) {
                            fresh.push(item);
                        }
                    }
                    self.mark_resolved(node);
                    progress = true;
                }
                None => self.failed_nodes += 1,
            }
        }

        let graph = self.plan.graph();
        let sig = self.plan.signature();
        for &item in &fresh {
            self.order.push(item);
            for inc in graph.incidences(item as usize) {
                let node = inc.node as usize;
                sig.accumulate(&mut self.residual[node * s..(node + 1) * s], inc.pos as usize, -1);
                if !self.resolved[node] && !self.queued[node] {
                    self.queued[node] = true;
                    self.pending.push(inc.node);
                }
            }
        }
        if progress {
            self.iterations += 1;
            self.trace.push(self.order.len());
        }
        progress
    }

    fn mark_resolved(&mut self, node: usize) {
        self.resolved[node] = true;
        self.resolved_nodes += 1;
    }

    // Positions (within the node) of its `count` remaining defectives, if
    // the syndrome decodes and the located columns reproduce the residual
    // block exactly.
    fn resolve(&mut self, node: usize, count: usize) -> Option<Vec<usize>> {
        let s = self.plan.s();
        let sig = self.plan.signature();
        let q = sig.q() as usize;
        let block = &self.residual[node * s..(node + 1) * s];
        for (k, word) in self.syndrome.iter_mut().enumerate() {
            *word = block[1 + k * q..1 + (k + 1) * q]
                .iter()
                .fold(0u32, |acc, &v| (acc << 1) | (v & 1) as u32);
        }
        let positions = sig.parity().decode(&self.syndrome, count).ok()?;
        self.scratch.iter_mut().for_each(|v| *v = 0);
        for &pos in &positions {
            sig.accumulate(&mut self.scratch, pos, 1);
        }
        if self.scratch != block {
            return None;
        }
        Some(positions)
    }

    pub fn finish(self) -> DecodeOutcome {
        let t = self.plan.t() as i64;
        let s = self.plan.s();
        let mut unresolved = 0;
        let mut stalled = false;
        for (node, &done) in self.resolved.iter().enumerate() {
            if !done {
                unresolved += 1;
                stalled |= self.residual[node * s] > t;
            }
        }
        let mut identified = self.order;
        identified.sort_unstable();
        DecodeOutcome {
            identified,
            iterations: self.iterations,
            resolved_nodes: self.resolved_nodes,
            unresolved_nodes: unresolved,
            stalled,
            failed_nodes: self.failed_nodes,
            identified_per_iteration: self.trace,
        }
    }
}

/// Runs peeling to completion; `max_iterations` defaults to `M + 1`.
pub fn peel_decode(
    plan: &TestPlan,
    y: &TestResults,
    max_iterations: Option<usize>,
) -> Result<DecodeOutcome> {
    let limit = max_iterations.unwrap_or(plan.graph().m() + 1);
    let mut peeler = Peeler::new(plan, y)?;
    while peeler.iterations() < limit && peeler.step() {}
    Ok(peeler.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BipartiteGraph, DegreeProfile};
    use crate::qgt::tests::worked_example_plan;
    use crate::qgt::{encode, SupportVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_example_trace() {
        let plan = worked_example_plan();
        let x = SupportVector::new(14, vec![3, 7, 10]).unwrap();
        let y = encode(&plan, &x).unwrap();
        let mut p = Peeler::new(&plan, &y).unwrap();

        assert!(p.step());
        assert_eq!(p.identified(), vec![3]);
        assert_eq!(&p.residual()[4..], &[1, 0, 1, 1, 2, 1, 2, 2]);
        assert!(p.step());
        assert_eq!(p.identified(), vec![3, 7]);
        assert_eq!(&p.residual()[8..], &[1, 1, 1, 1]);
        assert!(p.step());
        assert_eq!(p.identified(), vec![3, 7, 10]);
        assert!(!p.step());

        let out = p.finish();
        assert_eq!(out.iterations, 3);
        assert!(!out.stalled);
        assert_eq!(out.failed_nodes, 0);
        assert_eq!(out.identified_per_iteration, vec![1, 2, 3]);
        assert!(out.is_complete());
    }

    #[test]
    fn zero_results_take_one_iteration() {
        let plan = worked_example_plan();
        let y = TestResults::from_values(vec![0; 12]);
        let out = peel_decode(&plan, &y, None).unwrap();
        assert!(out.identified.is_empty());
        assert_eq!(out.iterations, 1);
        assert!(!out.stalled);
        assert_eq!(out.resolved_nodes, 3);
    }

    #[test]
    fn overloaded_node_stalls() {
        // two right nodes over 6 items; items 0 and 1 appear only in node 0
        let lists = vec![vec![0, 1, 2, 3], vec![2, 3, 4, 5]];
        let g = BipartiteGraph::from_right_adj(6, &lists).unwrap();
        let plan = TestPlan::new(g, 1).unwrap();
        let x = SupportVector::new(6, vec![0, 1]).unwrap();
        let y = encode(&plan, &x).unwrap();

        // exhaustive search: {0, 1} is the only support giving y
        let mut consistent = Vec::new();
        for mask in 0u32..64 {
            let cand: Vec<u32> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
            let s = SupportVector::new(6, cand.clone()).unwrap();
            if encode(&plan, &s).unwrap() == y {
                consistent.push(cand);
            }
        }
        assert_eq!(consistent, vec![vec![0, 1]]);

        let out = peel_decode(&plan, &y, None).unwrap();
        assert!(out.stalled);
        assert!(out.identified.is_empty());
        assert_eq!(out.resolved_nodes, 1);
    }

    #[test]
    fn wrong_length_rejected() {
        let plan = worked_example_plan();
        let y = TestResults::from_values(vec![0; 11]);
        assert!(peel_decode(&plan, &y, None).is_err());
    }

    #[test]
    fn inconsistent_results_never_panic() {
        let plan = worked_example_plan();
        // parity rows that no single column produces
        let y = TestResults::from_values(vec![1, 1, 1, 1, 0, 0, 0, 0, 2, 0, 0, 0]);
        let out = peel_decode(&plan, &y, None).unwrap();
        assert!(out.failed_nodes > 0 || out.stalled || !out.is_complete());
    }

    #[test]
    fn max_iterations_limits_work() {
        let plan = worked_example_plan();
        let x = SupportVector::new(14, vec![3, 7, 10]).unwrap();
        let y = encode(&plan, &x).unwrap();
        let out = peel_decode(&plan, &y, Some(1)).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.identified, vec![3]);
        assert!(!out.is_complete());
    }

    fn random_instance(seed: u64) -> (TestPlan, SupportVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = rng.random_range(1..=3);
        let n = rng.random_range(30..300);
        let r = rng.random_range(6..40).min(n / 3);
        let p = DegreeProfile::from_lambda(&[0.0, 0.5, 0.5]).unwrap();
        let m = ((n as f64 * p.avg_degree()) / r as f64).ceil() as usize;
        let plan = TestPlan::sample(n, m, r, t, &p, seed).unwrap();
        let k = rng.random_range(0..n / 4);
        let mut items: Vec<u32> = (0..n as u32).collect();
        rand::seq::SliceRandom::shuffle(items.as_mut_slice(), &mut rng);
        items.truncate(k);
        (plan, SupportVector::new(n, items).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn peeling_invariants(seed in any::<u64>()) {
            let (plan, x) = random_instance(seed);
            let y = encode(&plan, &x).unwrap();
            let mut peeler = Peeler::new(&plan, &y).unwrap();
            let mut last_trace = 0;
            while peeler.step() {
                let found = peeler.identified();
                // no false positives, at every iteration
                prop_assert!(found.iter().all(|&j| x.contains(j)));
                prop_assert!(found.len() >= last_trace);
                last_trace = found.len();
                // residual equals the encoding of what is still unidentified
                let rest: Vec<u32> = x
                    .defectives()
                    .iter()
                    .copied()
                    .filter(|j| found.binary_search(j).is_err())
                    .collect();
                let y_rest = encode(&plan, &SupportVector::new(x.n(), rest).unwrap()).unwrap();
                let expect: Vec<i64> = y_rest.values().iter().map(|&v| v as i64).collect();
                prop_assert_eq!(peeler.residual(), expect.as_slice());
            }
            let out = peeler.finish();
            prop_assert_eq!(out.failed_nodes, 0);
            if !out.stalled {
                prop_assert_eq!(out.identified.as_slice(), x.defectives());
            }
        }
    }
}
