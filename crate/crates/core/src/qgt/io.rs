//! JSON file formats for plans, supports, results and decode outcomes.
//!
//! Item identifiers in every file are 1-based, as in the worked examples;
//! everything in memory is 0-based. Plans carry a `version` field and only
//! version 1 is accepted. Supports and results are bare JSON integer arrays.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{DecodeOutcome, SupportVector, TestPlan, TestResults};
use crate::bch::{extension_degree, MAX_T};
use crate::error::{QgtError, Result};
use crate::graph::BipartiteGraph;

pub const PLAN_VERSION: u64 = 1;

/// On-disk test plan. The signature matrix is rebuilt from `(t, r)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanFile {
    pub version: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub r: usize,
    pub t: usize,
    pub q: u32,
    pub seed: Option<u64>,
    pub right_adj: Vec<Vec<u32>>,
}

impl PlanFile {
    pub fn from_plan(plan: &TestPlan) -> Self {
        let g = plan.graph();
        Self {
            version: PLAN_VERSION,
            n: g.n(),
            m: g.m(),
            r: g.r(),
            t: plan.t(),
            q: plan.signature().q(),
            seed: plan.seed(),
            right_adj: g
                .right_adj_lists()
                .into_iter()
                .map(|l| l.into_iter().map(|v| v + 1).collect())
                .collect(),
        }
    }

    pub fn into_plan(self) -> Result<TestPlan> {
        if self.version != PLAN_VERSION {
            return Err(unsupported_version(self.version));
        }
        if !(1..=MAX_T).contains(&self.t) {
            return Err(QgtError::Format(format!("t = {} outside 1..=4", self.t)));
        }
        if self.right_adj.len() != self.m {
            return Err(QgtError::Format(format!(
                "M = {} but right_adj has {} nodes",
                self.m,
                self.right_adj.len()
            )));
        }
        if self.r < 3 {
            return Err(QgtError::Format(format!("r = {} is below 3", self.r)));
        }
        if self.q != extension_degree(self.r) {
            return Err(QgtError::Format(format!(
                "q = {} inconsistent with r = {} (expected {})",
                self.q,
                self.r,
                extension_degree(self.r)
            )));
        }
        let mut lists = Vec::with_capacity(self.m);
        for (i, list) in self.right_adj.into_iter().enumerate() {
            if list.len() != self.r {
                return Err(QgtError::Format(format!(
                    "right node {} has {} neighbours, expected r = {}",
                    i + 1,
                    list.len(),
                    self.r
                )));
            }
            lists.push(to_zero_based(list, self.n)?);
        }
        let graph = BipartiteGraph::from_right_adj(self.n, &lists)
            .map_err(|e| QgtError::Format(e.to_string()))?;
        let mut plan = TestPlan::new(graph, self.t)?;
        plan.set_seed(self.seed);
        Ok(plan)
    }
}

fn unsupported_version(v: u64) -> QgtError {
    QgtError::Format(format!(
        "unsupported plan version {v} (this build reads version {PLAN_VERSION})"
    ))
}

fn to_zero_based(items: Vec<u32>, n: usize) -> Result<Vec<u32>> {
    items
        .into_iter()
        .map(|v| {
            if v == 0 || v as usize > n {
                Err(QgtError::Format(format!(
                    "item {v} outside 1..={n}"
                )))
            } else {
                Ok(v - 1)
            }
        })
        .collect()
}

pub fn plan_to_json(plan: &TestPlan) -> String {
    serde_json::to_string(&PlanFile::from_plan(plan)).expect("plan serialises")
}

/// Parses a plan, checking the version before anything else.
pub fn plan_from_json(text: &str) -> Result<TestPlan> {
    let value: Value = serde_json::from_str(text)?;
    match value.get("version").and_then(Value::as_u64) {
        Some(PLAN_VERSION) => {}
        Some(v) => return Err(unsupported_version(v)),
        None => return Err(QgtError::Format("plan has no integer \"version\"".into())),
    }
    let file: PlanFile = serde_json::from_value(value)?;
    file.into_plan()
}

pub fn support_to_json(x: &SupportVector) -> String {
    let ids: Vec<u32> = x.defectives().iter().map(|v| v + 1).collect();
    serde_json::to_string(&ids).expect("array serialises")
}

pub fn support_from_json(text: &str, n: usize) -> Result<SupportVector> {
    let ids: Vec<u32> = serde_json::from_str(text)?;
    SupportVector::new(n, to_zero_based(ids, n)?)
}

pub fn results_to_json(y: &TestResults) -> String {
    serde_json::to_string(y.values()).expect("array serialises")
}

/// Parses results and checks the length against the plan.
pub fn results_from_json(text: &str, plan: &TestPlan) -> Result<TestResults> {
    let values: Vec<u32> = serde_json::from_str(text)?;
    if values.len() != plan.num_tests() {
        return Err(QgtError::Format(format!(
            "results have {} entries, plan expects M·s = {}",
            values.len(),
            plan.num_tests()
        )));
    }
    Ok(TestResults::from_values(values))
}

/// Decode outcome with 1-based item identifiers.
pub fn outcome_to_json(outcome: &DecodeOutcome) -> String {
    let mut out = outcome.clone();
    out.identified.iter_mut().for_each(|v| *v += 1);
    serde_json::to_string_pretty(&out).expect("outcome serialises")
}
