//! Testing and recovery: signature matrices, test plans, encoding of a
//! defective set into integer test results, and peeling recovery.

mod decode;
pub mod io;

use std::sync::Arc;

use serde::Serialize;

use crate::bch::{build_parity_check, ParityCheckMatrix};
use crate::error::{QgtError, Result};
use crate::graph::{BipartiteGraph, DegreeProfile};

pub use decode::{peel_decode, DecodeOutcome, Peeler};

/// `U = [1; H_t]`: an all-ones counting row over the BCH parity-check rows.
#[derive(Debug, Clone)]
pub struct SignatureMatrix {
    parity: ParityCheckMatrix,
}

/// Builds the `s × r` signature matrix, `s = t·q + 1`.
pub fn build_signature(t: usize, r: usize) -> Result<SignatureMatrix> {
    Ok(SignatureMatrix {
        parity: build_parity_check(t, r)?,
    })
}

impl SignatureMatrix {
    pub fn t(&self) -> usize {
        self.parity.t()
    }

    pub fn q(&self) -> u32 {
        self.parity.q()
    }

    /// Rows per right node.
    pub fn s(&self) -> usize {
        self.parity.rows() + 1
    }

    pub fn r(&self) -> usize {
        self.parity.r()
    }

    pub fn parity(&self) -> &ParityCheckMatrix {
        &self.parity
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> u8 {
        if row == 0 {
            1
        } else {
            self.parity.bit(row - 1, col)
        }
    }

    /// Column `u_col` as a dense 0/1 vector of length `s`.
    pub fn column(&self, col: usize) -> Vec<u8> {
        (0..self.s()).map(|row| self.entry(row, col)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.s())
            .map(|row| (0..self.r()).map(|c| self.entry(row, c)).collect())
            .collect()
    }

    /// `block += sign · u_col`, with `block` one right node's `s` results.
    #[inline]
    pub(crate) fn accumulate(&self, block: &mut [i64], col: usize, sign: i64) {
        let q = self.q() as usize;
        block[0] += sign;
        for (k, &word) in self.parity.column(col).iter().enumerate() {
            let rows = &mut block[1 + k * q..1 + (k + 1) * q];
            for (j, v) in rows.iter_mut().enumerate() {
                *v += sign * ((word >> (q - 1 - j)) & 1) as i64;
            }
        }
    }
}

/// A graph plus the signature matrix it is read with.
#[derive(Debug, Clone)]
pub struct TestPlan {
    graph: BipartiteGraph,
    signature: Arc<SignatureMatrix>,
    seed: Option<u64>,
}

impl TestPlan {
    pub fn new(graph: BipartiteGraph, t: usize) -> Result<Self> {
        let signature = Arc::new(build_signature(t, graph.r())?);
        Self::with_signature(graph, signature)
    }

    /// Reuses an existing signature; its width must equal the right degree.
    pub fn with_signature(graph: BipartiteGraph, signature: Arc<SignatureMatrix>) -> Result<Self> {
        if signature.r() != graph.r() {
            return Err(QgtError::DimensionMismatch {
                expected: graph.r(),
                found: signature.r(),
            });
        }
        Ok(Self {
            graph,
            signature,
            seed: None,
        })
    }

    /// Samples a fresh graph and attaches the signature for `(t, r)`.
    pub fn sample(
        n: usize,
        m: usize,
        r: usize,
        t: usize,
        profile: &DegreeProfile,
        seed: u64,
    ) -> Result<Self> {
        let signature = Arc::new(build_signature(t, r)?);
        let graph = BipartiteGraph::sample(n, m, r, profile, seed)?;
        let mut plan = Self::with_signature(graph, signature)?;
        plan.seed = Some(seed);
        Ok(plan)
    }

    pub fn graph(&self) -> &BipartiteGraph {
        &self.graph
    }

    pub fn signature(&self) -> &SignatureMatrix {
        &self.signature
    }

    pub fn shared_signature(&self) -> Arc<SignatureMatrix> {
        Arc::clone(&self.signature)
    }

    pub fn t(&self) -> usize {
        self.signature.t()
    }

    pub fn s(&self) -> usize {
        self.signature.s()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn set_seed(&mut self, seed: Option<u64>) {
        self.seed = seed;
    }

    /// Total number of tests, `m = M·s`.
    pub fn num_tests(&self) -> usize {
        self.graph.m() * self.s()
    }

    /// Dense `m × N` measurement matrix. Test and debugging use only.
    pub fn measurement_matrix(&self) -> Vec<Vec<u8>> {
        let s = self.s();
        let mut a = vec![vec![0u8; self.graph.n()]; self.num_tests()];
        for i in 0..self.graph.m() {
            for (pos, &item) in self.graph.right_neighbors(i).iter().enumerate() {
                for row in 0..s {
                    a[i * s + row][item as usize] = self.signature.entry(row, pos);
                }
            }
        }
        a
    }
}

/// The set of defective items, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportVector {
    n: usize,
    defectives: Vec<u32>,
}

impl SupportVector {
    pub fn new(n: usize, mut defectives: Vec<u32>) -> Result<Self> {
        defectives.sort_unstable();
        if defectives.windows(2).any(|w| w[0] == w[1]) {
            return Err(QgtError::InvalidParameter(
                "defective indices must be unique".into(),
            ));
        }
        if let Some(&last) = defectives.last() {
            if last as usize >= n {
                return Err(QgtError::InvalidParameter(format!(
                    "defective index {last} out of range for N = {n}"
                )));
            }
        }
        Ok(Self { n, defectives })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            defectives: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn defectives(&self) -> &[u32] {
        &self.defectives
    }

    pub fn len(&self) -> usize {
        self.defectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defectives.is_empty()
    }

    pub fn contains(&self, item: u32) -> bool {
        self.defectives.binary_search(&item).is_ok()
    }
}

/// Integer test outcomes, `M` consecutive blocks of `s` entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct TestResults {
    values: Vec<u32>,
}

impl TestResults {
    pub fn from_values(values: Vec<u32>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u32> {
        self.values
    }

    pub fn block(&self, node: usize, s: usize) -> &[u32] {
        &self.values[node * s..(node + 1) * s]
    }
}

/// `y = A x` computed from the graph and signature without forming `A`.
pub fn encode(plan: &TestPlan, x: &SupportVector) -> Result<TestResults> {
    let g = plan.graph();
    if x.n() != g.n() {
        return Err(QgtError::DimensionMismatch {
            expected: g.n(),
            found: x.n(),
        });
    }
    // Walk the defectives' edges only: O(K·deg·s) rather than O(N).
    let s = plan.s();
    let sig = plan.signature();
    let mut acc = vec![0i64; plan.num_tests()];
    for &item in x.defectives() {
        for inc in g.incidences(item as usize) {
            let node = inc.node as usize;
            sig.accumulate(&mut acc[node * s..(node + 1) * s], inc.pos as usize, 1);
        }
    }
    let values = acc.into_iter().map(|v| v as u32).collect();
    Ok(TestResults { values })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The 14-item, 3-node, t = 1 plan of the worked example (0-indexed).
    pub(crate) fn worked_example_plan() -> TestPlan {
        let lists = vec![
            vec![1, 3, 4, 8, 9, 12, 13],
            vec![2, 3, 6, 7, 9, 11, 12],
            vec![0, 3, 5, 7, 9, 10, 12],
        ];
        TestPlan::new(BipartiteGraph::from_right_adj(14, &lists).unwrap(), 1).unwrap()
    }

    #[test]
    fn worked_example_signature() {
        let u = build_signature(1, 7).unwrap();
        assert_eq!(u.s(), 4);
        let expected = vec![
            vec![1, 1, 1, 1, 1, 1, 1],
            vec![0, 0, 1, 0, 1, 1, 1],
            vec![0, 1, 0, 1, 1, 1, 0],
            vec![1, 0, 0, 1, 0, 1, 1],
        ];
        assert_eq!(u.to_dense(), expected);
    }

    #[test]
    fn signature_shapes() {
        let u = build_signature(2, 15).unwrap();
        assert_eq!((u.s(), u.r()), (9, 15));
        let u = build_signature(3, 1609).unwrap();
        assert_eq!(u.s(), 3 * 11 + 1);
        assert!(build_signature(5, 7).is_err());
    }

    #[test]
    fn worked_example_encoding() {
        let plan = worked_example_plan();
        // items 4, 8, 11 in 1-indexed terms
        let x = SupportVector::new(14, vec![3, 7, 10]).unwrap();
        let y = encode(&plan, &x).unwrap();
        assert_eq!(y.values(), &[1, 0, 1, 0, 2, 0, 2, 1, 3, 1, 3, 2]);
    }

    #[test]
    fn empty_support_encodes_to_zero() {
        let plan = worked_example_plan();
        let y = encode(&plan, &SupportVector::empty(14)).unwrap();
        assert!(y.values().iter().all(|&v| v == 0));
        assert_eq!(y.values().len(), 12);
    }

    #[test]
    fn single_degree_one_item() {
        let plan = worked_example_plan();
        // item 11 (0-indexed 10) sits only in node 2 at position 5
        let y = encode(&plan, &SupportVector::new(14, vec![10]).unwrap()).unwrap();
        assert_eq!(y.block(0, 4), &[0, 0, 0, 0]);
        assert_eq!(y.block(1, 4), &[0, 0, 0, 0]);
        let col: Vec<u32> = plan.signature().column(5).iter().map(|&b| b as u32).collect();
        assert_eq!(y.block(2, 4), col.as_slice());
    }

    #[test]
    fn encode_matches_dense_product() {
        let p = DegreeProfile::from_lambda(&[0.0, 0.5, 0.5]).unwrap();
        let plan = TestPlan::sample(60, 12, 12, 2, &p, 9).unwrap();
        let x = SupportVector::new(60, vec![1, 5, 17, 33, 59]).unwrap();
        let y = encode(&plan, &x).unwrap();
        let a = plan.measurement_matrix();
        let dense: Vec<u32> = a
            .iter()
            .map(|row| x.defectives().iter().map(|&j| row[j as usize] as u32).sum())
            .collect();
        assert_eq!(y.values(), dense.as_slice());
    }

    #[test]
    fn dimension_mismatch() {
        let plan = worked_example_plan();
        assert!(encode(&plan, &SupportVector::empty(13)).is_err());
        assert!(SupportVector::new(14, vec![14]).is_err());
        assert!(SupportVector::new(14, vec![2, 2]).is_err());
    }
}
