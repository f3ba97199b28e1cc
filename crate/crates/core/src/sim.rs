//! Monte Carlo estimation of the per-defective error probability.
//!
//! Every trial draws a fresh graph and a fresh i.i.d. support, encodes,
//! decodes and counts defectives missing from the decoder output. Trial `i`
//! uses the ChaCha stream `i` of the master seed, so results do not depend
//! on how trials are spread over threads.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bch::{extension_degree, MAX_T};
use crate::design::{make_plan, DesignResult, MAX_R};
use crate::error::{QgtError, Result};
use crate::graph::{BipartiteGraph, DegreeProfile};
use crate::qgt::{build_signature, encode, peel_decode, SignatureMatrix, SupportVector, TestPlan};

/// Each of the `n` items is included independently with probability `gamma`.
pub fn sample_support<R: Rng + ?Sized>(n: usize, gamma: f64, rng: &mut R) -> Result<SupportVector> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(QgtError::InvalidParameter(format!("γ = {gamma} outside (0, 1)")));
    }
    let defectives = (0..n as u32).filter(|_| rng.random_bool(gamma)).collect();
    SupportVector::new(n, defectives)
}

pub fn sample_support_seeded(n: usize, gamma: f64, seed: u64) -> Result<SupportVector> {
    sample_support(n, gamma, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Wilson score interval at 95% for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialConfig {
    #[serde(rename = "N")]
    pub n: usize,
    /// Expected number of defectives; `γ = K/N`.
    #[serde(rename = "K")]
    pub k: f64,
    pub t: usize,
    pub d: usize,
    /// Explicit `(M, r)` instead of the planner's choice.
    pub nodes_override: Option<(usize, usize)>,
    pub trials: usize,
    pub seed: u64,
}

impl TrialConfig {
    pub fn gamma(&self) -> f64 {
        self.k / self.n as f64
    }

    fn validate(&self, design: &DesignResult) -> Result<()> {
        if self.trials == 0 {
            return Err(QgtError::InvalidParameter("trials must be at least 1".into()));
        }
        if !(1..=MAX_T).contains(&self.t) {
            return Err(QgtError::UnsupportedT(self.t));
        }
        if design.t != self.t || design.d != self.d {
            return Err(QgtError::InvalidParameter(format!(
                "design is for (t, d) = ({}, {}), config asks for ({}, {})",
                design.t, design.d, self.t, self.d
            )));
        }
        let g = self.gamma();
        if !(g > 0.0 && g < 1.0) {
            return Err(QgtError::InvalidParameter(format!("K/N = {g} outside (0, 1)")));
        }
        Ok(())
    }
}

/// Concrete graph dimensions used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Realization {
    #[serde(rename = "M")]
    pub m_nodes: usize,
    pub r: usize,
    pub s: usize,
}

impl Realization {
    pub fn m(&self) -> usize {
        self.m_nodes * self.s
    }
}

fn realization(t: usize, m_nodes: usize, r: usize) -> Realization {
    Realization {
        m_nodes,
        r,
        s: t * extension_degree(r) as usize + 1,
    }
}

/// Right degree from edge balance `Mr ≈ ℓN`, kept within what left
/// degrees `≤ d` and the field tables allow.
fn balanced_r(n: usize, m_nodes: usize, design: &DesignResult) -> Option<usize> {
    let cap = (n * design.d.min(m_nodes) / m_nodes).min(MAX_R).min(n);
    let r = ((design.ell * n as f64 / m_nodes as f64).round() as usize).min(cap);
    (r >= 3 && m_nodes * r >= n).then_some(r)
}

/// Largest `M` with `M·s(r(M)) ≤ m`, where `r(M)` comes from edge balance.
pub fn realize_m(m: usize, n: usize, design: &DesignResult) -> Option<Realization> {
    let s_of = |nodes: usize| {
        balanced_r(n, nodes, design).map(|r| realization(design.t, nodes, r))
    };
    let mut nodes = (m / (design.t * 3 + 1)).max(1);
    let mut seen = Vec::new();
    loop {
        let next = match s_of(nodes) {
            Some(real) => m / real.s,
            None => nodes.saturating_sub(1),
        };
        if next == 0 {
            return None;
        }
        if next == nodes || seen.contains(&next) {
            // settle on the largest realisable count within budget
            let mut best = next.min(nodes);
            loop {
                match s_of(best) {
                    Some(real) if real.m() <= m => return Some(real),
                    _ if best > 1 => best -= 1,
                    _ => return None,
                }
            }
        }
        seen.push(nodes);
        nodes = next;
    }
}

/// Planner dimensions, or the explicit override.
pub fn realize_config(config: &TrialConfig, design: &DesignResult) -> Result<Realization> {
    match config.nodes_override {
        Some((m_nodes, r)) => {
            if m_nodes == 0 || r < 3 {
                return Err(QgtError::InvalidParameter(format!(
                    "override needs M ≥ 1 and r ≥ 3 (got M = {m_nodes}, r = {r})"
                )));
            }
            Ok(realization(config.t, m_nodes, r))
        }
        None => {
            let k = config.k.round().max(1.0) as u64;
            let plan = make_plan(config.n as u64, k, design)?;
            Ok(realization(config.t, plan.m_nodes, plan.r))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    /// Tests actually used, `M·s`.
    pub m: usize,
    pub m_requested: Option<usize>,
    #[serde(rename = "M")]
    pub m_nodes: usize,
    pub r: usize,
    pub s: usize,
    pub trials: usize,
    pub total_defectives: u64,
    pub unidentified: u64,
    pub error_prob: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub full_recoveries: u64,
    pub full_recovery_rate: f64,
    pub mean_iterations: f64,
    pub false_positives: u64,
    pub wall_time_secs: f64,
    /// Set when the requested `m` could not be realised; counters are zero.
    pub skipped: Option<String>,
}

#[derive(Debug, Default, Clone, Copy)]
struct Counts {
    defectives: u64,
    unidentified: u64,
    full: u64,
    iterations: u64,
    false_positives: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            defectives: self.defectives + o.defectives,
            unidentified: self.unidentified + o.unidentified,
            full: self.full + o.full,
            iterations: self.iterations + o.iterations,
            false_positives: self.false_positives + o.false_positives,
        }
    }
}

/// RNG for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct Instance {
    plan: TestPlan,
    support: SupportVector,
}

fn draw_instance(
    n: usize,
    real: Realization,
    signature: &Arc<SignatureMatrix>,
    profile: &DegreeProfile,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Instance> {
    let graph_seed = rng.next_u64();
    let graph = BipartiteGraph::sample(n, real.m_nodes, real.r, profile, graph_seed)?;
    let mut plan = TestPlan::with_signature(graph, Arc::clone(signature))?;
    plan.set_seed(Some(graph_seed));
    let support = sample_support(n, gamma, rng)?;
    Ok(Instance { plan, support })
}

fn run_one(
    config: &TrialConfig,
    real: Realization,
    signature: &Arc<SignatureMatrix>,
    profile: &DegreeProfile,
    index: u64,
) -> Result<Counts> {
    let mut rng = trial_rng(config.seed, index);
    let inst = draw_instance(config.n, real, signature, profile, config.gamma(), &mut rng)?;
    let y = encode(&inst.plan, &inst.support)?;
    let out = peel_decode(&inst.plan, &y, None)?;
    let false_positives = out
        .identified
        .iter()
        .filter(|&&v| !inst.support.contains(v))
        .count() as u64;
    let hit = out.identified.len() as u64 - false_positives;
    let total = inst.support.len() as u64;
    Ok(Counts {
        defectives: total,
        unidentified: total - hit,
        full: (hit == total) as u64,
        iterations: out.iterations as u64,
        false_positives,
    })
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| QgtError::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `config.trials` trials at the given dimensions. `jobs = 0` uses the
/// ambient rayon pool.
pub fn run_trials_at(
    config: &TrialConfig,
    design: &DesignResult,
    real: Realization,
    jobs: usize,
) -> Result<SimReport> {
    config.validate(design)?;
    let start = Instant::now();
    let signature = Arc::new(build_signature(config.t, real.r)?);
    let profile = &design.lambda_star;
    let counts = with_pool(jobs, || {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|i| run_one(config, real, &signature, profile, i))
            .try_reduce(Counts::default, |a, b| Ok(a + b))
    })??;
    let (ci_lo, ci_hi) = wilson_interval(counts.unidentified, counts.defectives);
    Ok(SimReport {
        m: real.m(),
        m_requested: None,
        m_nodes: real.m_nodes,
        r: real.r,
        s: real.s,
        trials: config.trials,
        total_defectives: counts.defectives,
        unidentified: counts.unidentified,
        error_prob: if counts.defectives == 0 {
            0.0
        } else {
            counts.unidentified as f64 / counts.defectives as f64
        },
        ci_lo,
        ci_hi,
        full_recoveries: counts.full,
        full_recovery_rate: counts.full as f64 / config.trials as f64,
        mean_iterations: counts.iterations as f64 / config.trials as f64,
        false_positives: counts.false_positives,
        wall_time_secs: start.elapsed().as_secs_f64(),
        skipped: None,
    })
}

/// Runs at the planner's dimensions (or the override).
pub fn run_trials(config: &TrialConfig, design: &DesignResult, jobs: usize) -> Result<SimReport> {
    config.validate(design)?;
    let real = realize_config(config, design)?;
    run_trials_at(config, design, real, jobs)
}

fn skipped_report(m: usize, reason: String) -> SimReport {
    SimReport {
        m: 0,
        m_requested: Some(m),
        m_nodes: 0,
        r: 0,
        s: 0,
        trials: 0,
        total_defectives: 0,
        unidentified: 0,
        error_prob: f64::NAN,
        ci_lo: f64::NAN,
        ci_hi: f64::NAN,
        full_recoveries: 0,
        full_recovery_rate: f64::NAN,
        mean_iterations: f64::NAN,
        false_positives: 0,
        wall_time_secs: 0.0,
        skipped: Some(reason),
    }
}

/// One report per requested test budget. Budgets that cannot be realised
/// yield a report with `skipped` set.
pub fn run_sweep(
    config: &TrialConfig,
    design: &DesignResult,
    m_values: &[usize],
    jobs: usize,
) -> Result<Vec<SimReport>> {
    config.validate(design)?;
    m_values
        .iter()
        .map(|&m| match realize_m(m, config.n, design) {
            Some(real) => {
                let mut rep = run_trials_at(config, design, real, jobs)?;
                rep.m_requested = Some(m);
                Ok(rep)
            }
            None => Ok(skipped_report(
                m,
                format!("m = {m} does not admit M ≥ 1 with a valid right degree"),
            )),
        })
        .collect()
}

pub const CSV_HEADER: &str = "m,error_prob,ci_lo,ci_hi,full_recovery,trials";

pub fn sweep_csv(reports: &[SimReport]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in reports {
        match &r.skipped {
            Some(_) => out.push_str(&format!(
                "{},skipped,,,,0\n",
                r.m_requested.unwrap_or(r.m)
            )),
            None => out.push_str(&format!(
                "{},{:.6e},{:.6e},{:.6e},{:.6},{}\n",
                r.m, r.error_prob, r.ci_lo, r.ci_hi, r.full_recovery_rate, r.trials
            )),
        }
    }
    out
}

/// Per-round unresolved counts of one instance, measured two ways.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoundCounts {
    /// Edges whose left item is defective and not resolved through any of
    /// its other right nodes, after rounds `0..=rounds` (index 0 = start).
    pub active_edges: Vec<u64>,
    /// Defective items not yet resolved, after the same rounds.
    pub unresolved_items: Vec<u64>,
    pub total_edges: u64,
}

/// Extrinsic message passing on the graph: a right node clears an edge when
/// at most `t − 1` of its other edges are active; an edge stays active while
/// its item is defective and none of the item's other right nodes clears it.
/// The fraction of active edges is the quantity density evolution tracks.
pub fn message_passing_rounds(
    graph: &BipartiteGraph,
    support: &SupportVector,
    t: usize,
    rounds: usize,
) -> RoundCounts {
    let r = graph.r();
    let edges = graph.num_edges();
    let mut defective = vec![false; graph.n()];
    for &v in support.defectives() {
        defective[v as usize] = true;
    }
    // edge index = node·r + position
    let mut active: Vec<bool> = (0..graph.m())
        .flat_map(|c| graph.right_neighbors(c).iter().map(|&v| defective[v as usize]))
        .collect();
    let mut clears = vec![false; edges];
    let mut out = RoundCounts {
        total_edges: edges as u64,
        ..Default::default()
    };
    out.active_edges.push(active.iter().filter(|&&a| a).count() as u64);
    out.unresolved_items.push(support.len() as u64);
    for _ in 0..rounds {
        for c in 0..graph.m() {
            let block = &active[c * r..(c + 1) * r];
            let count = block.iter().filter(|&&a| a).count();
            for (pos, &a) in block.iter().enumerate() {
                clears[c * r + pos] = (count - a as usize) < t;
            }
        }
        let mut unresolved = 0;
        for &v in support.defectives() {
            let inc = graph.incidences(v as usize);
            let cleared = inc
                .iter()
                .filter(|e| clears[e.node as usize * r + e.pos as usize])
                .count();
            unresolved += (cleared == 0) as u64;
            for e in inc {
                let idx = e.node as usize * r + e.pos as usize;
                active[idx] = cleared - clears[idx] as usize == 0;
            }
        }
        out.active_edges.push(active.iter().filter(|&&a| a).count() as u64);
        out.unresolved_items.push(unresolved);
    }
    out
}

/// Per-round empirical unresolved fractions pooled over trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeTracking {
    pub gamma: f64,
    pub psi: f64,
    /// `γφ_j` from the Poisson recursion, `j = 0..=rounds`.
    pub predicted: Vec<f64>,
    /// Fraction of edges carrying an unresolved defective.
    pub empirical: Vec<f64>,
    /// Binomial standard deviation of `empirical` under `predicted`.
    pub sigma: Vec<f64>,
    /// Unresolved defective items per item, from the peeling decoder.
    pub peeling_unresolved: Vec<f64>,
    /// The same from message passing; equals `peeling_unresolved`.
    pub message_passing_unresolved: Vec<f64>,
    pub total_edges: u64,
    pub total_items: u64,
}

/// Compares the Poisson DE trajectory with pooled empirical fractions over
/// `trials` fresh instances at dimensions `(M, r)`.
pub fn de_tracking(
    n: usize,
    gamma: f64,
    design: &DesignResult,
    real: Realization,
    rounds: usize,
    trials: usize,
    seed: u64,
) -> Result<DeTracking> {
    let signature = Arc::new(build_signature(design.t, real.r)?);
    let psi = real.r as f64 * gamma;
    let per_trial: Vec<(RoundCounts, Vec<u64>)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let inst = draw_instance(n, real, &signature, &design.lambda_star, gamma, &mut rng)?;
            let mp = message_passing_rounds(inst.plan.graph(), &inst.support, design.t, rounds);
            let y = encode(&inst.plan, &inst.support)?;
            let out = peel_decode(&inst.plan, &y, None)?;
            let total = inst.support.len() as u64;
            let peel: Vec<u64> = (0..=rounds)
                .map(|j| {
                    let found = match j {
                        0 => 0,
                        _ => out
                            .identified_per_iteration
                            .get(j - 1)
                            .or(out.identified_per_iteration.last())
                            .copied()
                            .unwrap_or(0),
                    };
                    total - found as u64
                })
                .collect();
            Ok((mp, peel))
        })
        .collect::<Result<_>>()?;

    let total_edges: u64 = per_trial.iter().map(|(m, _)| m.total_edges).sum();
    let total_items = (n * trials) as u64;
    let sum_at = |f: &dyn Fn(&(RoundCounts, Vec<u64>)) -> u64| -> f64 {
        per_trial.iter().map(f).sum::<u64>() as f64
    };
    let traj = crate::design::poisson_trajectory(psi, design.t, &design.lambda_star, rounds);
    let predicted: Vec<f64> = traj.iter().map(|phi| gamma * phi).collect();
    let empirical = (0..=rounds)
        .map(|j| sum_at(&|(m, _)| m.active_edges[j]) / total_edges as f64)
        .collect();
    let sigma = predicted
        .iter()
        .map(|p| (p * (1.0 - p) / total_edges as f64).sqrt())
        .collect();
    let peeling_unresolved = (0..=rounds)
        .map(|j| sum_at(&|(_, p)| p[j]) / total_items as f64)
        .collect();
    let message_passing_unresolved = (0..=rounds)
        .map(|j| sum_at(&|(m, _)| m.unresolved_items[j]) / total_items as f64)
        .collect();
    Ok(DeTracking {
        gamma,
        psi,
        predicted,
        empirical,
        sigma,
        peeling_unresolved,
        message_passing_unresolved,
        total_edges,
        total_items,
    })
}
