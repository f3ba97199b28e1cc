//! Degree-profile design: density evolution, the profile LP, the outer
//! search over ψ that yields `c(t,d)`, and the planner that turns a design
//! into concrete `(M, r, s, m)` for a population.

mod de;
mod simplex;

use rayon::prelude::*;
use serde::Serialize;

use crate::bch::{extension_degree, MAX_T};
use crate::error::{QgtError, Result};
use crate::graph::DegreeProfile;

pub use de::{
    binomial_tail, de_step_exact, de_step_poisson, poisson_tail, poisson_trajectory, DeParams,
    PhiGrid,
};
pub use simplex::{minimize, LinearProgram, LpOutcome};

/// Margin on the DE constraint: `φ' ≤ (1 − δ)φ`.
pub const DELTA: f64 = 1e-3;
pub const MAX_D: usize = 32;
const PSI_LO: f64 = 0.05;
const PSI_STEP: f64 = 0.02;
const PSI_TOL: f64 = 1e-4;
/// Largest right degree the field tables support.
pub const MAX_R: usize = (1 << crate::bch::MAX_Q) - 1;

/// Smallest left degree the LP may use. At `t = 1` degree-2 items close
/// cycles that never peel, so mass there is excluded.
pub fn min_lp_degree(t: usize) -> usize {
    if t == 1 {
        3
    } else {
        2
    }
}

/// Optimal profile at a fixed ψ and `f(ψ) = −ψ Σ λ_i/i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub profile: DegreeProfile,
    pub f: f64,
}

/// Minimises `−ψ Σ λ_i/i` over profiles on degrees `min_lp_degree(t)..=d`
/// subject to the Poisson DE step staying below `(1 − δ)φ` on the grid.
pub fn lp_optimize_profile(
    t: usize,
    d: usize,
    psi: f64,
    grid: &PhiGrid,
    delta: f64,
) -> Result<LpSolution> {
    if !(psi > 0.0) || !psi.is_finite() {
        return Err(QgtError::InvalidParameter(format!("ψ = {psi} must be positive")));
    }
    let lo = min_lp_degree(t);
    if d < lo {
        return Err(QgtError::Infeasible(format!(
            "no admissible left degree for t = {t}, d = {d}"
        )));
    }
    let degrees: Vec<usize> = (lo..=d).collect();
    let a_ub = grid
        .points()
        .iter()
        .map(|&phi| {
            let base = poisson_tail(psi * phi, t);
            degrees.iter().map(|&i| base.powi(i as i32 - 1)).collect()
        })
        .collect();
    let lp = LinearProgram {
        cost: degrees.iter().map(|&i| -psi / i as f64).collect(),
        a_ub,
        b_ub: grid.points().iter().map(|&phi| (1.0 - delta) * phi).collect(),
        a_eq: vec![vec![1.0; degrees.len()]],
        b_eq: vec![1.0],
    };
    match minimize(&lp) {
        LpOutcome::Optimal { x, objective } => {
            let mut lambda = vec![0.0; d];
            for (&i, &v) in degrees.iter().zip(&x) {
                lambda[i - 1] = v;
            }
            Ok(LpSolution {
                profile: DegreeProfile::from_lambda(&lambda)?,
                f: objective,
            })
        }
        LpOutcome::Infeasible => Err(QgtError::Infeasible(format!(
            "no profile meets the DE constraint at ψ = {psi}"
        ))),
        LpOutcome::Unbounded => unreachable!("profile LP is bounded"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub psi: f64,
    /// `None` where the LP is infeasible.
    pub f: Option<f64>,
}

/// Optimised design for a given `(t, d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignResult {
    pub t: usize,
    pub d: usize,
    pub psi_star: f64,
    pub lambda_star: DegreeProfile,
    pub c: f64,
    /// Average left degree ℓ of `lambda_star`.
    pub ell: f64,
    pub trace: Vec<TracePoint>,
}

fn check_td(t: usize, d: usize) -> Result<()> {
    if !(1..=MAX_T).contains(&t) {
        return Err(QgtError::UnsupportedT(t));
    }
    if !(2..=MAX_D).contains(&d) {
        return Err(QgtError::InvalidParameter(format!("d = {d} outside 2..={MAX_D}")));
    }
    Ok(())
}

/// Minimises `f(ψ)` by a coarse scan over `[0.05, 4t+4]` in steps of 0.02,
/// followed by golden-section refinement to `1e-4` around the best scan
/// point. `c = −1/f(ψ*)`.
pub fn optimize_psi(t: usize, d: usize) -> Result<DesignResult> {
    check_td(t, d)?;
    if d < min_lp_degree(t) {
        return Err(QgtError::Infeasible(format!(
            "no admissible left degree for t = {t}, d = {d}"
        )));
    }
    let grid = PhiGrid::standard();
    let eval = |psi: f64| lp_optimize_profile(t, d, psi, &grid, DELTA).ok().map(|s| s.f);

    // Feasibility is monotone: the Poisson tail grows with ψ, so a profile
    // feasible at ψ stays feasible below it. Once a scan point is
    // infeasible every larger ψ is too.
    let hi = 4.0 * t as f64 + 4.0;
    let steps = ((hi - PSI_LO) / PSI_STEP + 1e-9).floor() as usize;
    let chunk = 4 * rayon::current_num_threads().max(2);
    let mut trace: Vec<TracePoint> = Vec::with_capacity(steps + 64);
    let mut k0 = 0;
    while k0 <= steps {
        let k1 = (k0 + chunk).min(steps + 1);
        let points: Vec<TracePoint> = (k0..k1)
            .into_par_iter()
            .map(|k| {
                let psi = PSI_LO + PSI_STEP * k as f64;
                TracePoint { psi, f: eval(psi) }
            })
            .collect();
        let done = points.iter().any(|p| p.f.is_none());
        trace.extend(points);
        if done {
            break;
        }
        k0 = k1;
    }

    let value = |p: &TracePoint| p.f.unwrap_or(f64::INFINITY);
    let best = trace
        .iter()
        .copied()
        .filter(|p| p.f.is_some())
        .min_by(|a, b| value(a).total_cmp(&value(b)))
        .ok_or_else(|| QgtError::Infeasible(format!("no feasible ψ for t = {t}, d = {d}")))?;

    let mut best = best;
    let (mut a, mut b) = ((best.psi - PSI_STEP).max(PSI_LO / 2.0), best.psi + PSI_STEP);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let probe = |psi: f64, trace: &mut Vec<TracePoint>, best: &mut TracePoint| {
        let p = TracePoint { psi, f: eval(psi) };
        trace.push(p);
        if value(&p) < value(best) {
            *best = p;
        }
        value(&p)
    };
    let mut c1 = b - g * (b - a);
    let mut c2 = a + g * (b - a);
    let mut f1 = probe(c1, &mut trace, &mut best);
    let mut f2 = probe(c2, &mut trace, &mut best);
    while b - a > PSI_TOL {
        if f1 < f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - g * (b - a);
            f1 = probe(c1, &mut trace, &mut best);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + g * (b - a);
            f2 = probe(c2, &mut trace, &mut best);
        }
    }

    let sol = lp_optimize_profile(t, d, best.psi, &grid, DELTA)?;
    Ok(DesignResult {
        t,
        d,
        psi_star: best.psi,
        c: -1.0 / sol.f,
        ell: sol.profile.avg_degree(),
        lambda_star: sol.profile,
        trace,
    })
}

/// Concrete plan parameters for a population of `N` items with `K`
/// expected defectives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "K")]
    pub k: u64,
    pub t: usize,
    pub d: usize,
    pub c: f64,
    pub ell: f64,
    /// `c·K` before rounding up.
    pub m_nodes_exact: f64,
    /// `ℓN/(cK)` before rounding.
    pub r_exact: f64,
    #[serde(rename = "M")]
    pub m_nodes: usize,
    pub r: usize,
    pub q: u32,
    pub s: usize,
    pub m: usize,
    /// Notes on every clamp applied beyond the plain roundings.
    pub adjustments: Vec<String>,
}

/// `M = ⌈cK⌉`, `r = round(ℓN/(cK))` (at least 3), `s = t·q + 1`, `m = M·s`.
///
/// `r` is lowered when needed so that `M·r ≤ N·min(d, M)`.
pub fn make_plan(n: u64, k: u64, design: &DesignResult) -> Result<Plan> {
    if k < 1 || k >= n {
        return Err(QgtError::OutOfRegime(format!("need 1 ≤ K < N (N = {n}, K = {k})")));
    }
    let ck = design.c * k as f64;
    let r_exact = design.ell * n as f64 / ck;
    let mut m_nodes = ck.ceil() as usize;
    let mut r = r_exact.round() as usize;
    let mut adjustments = Vec::new();
    if r < 3 {
        adjustments.push(format!("r raised from {r} to 3"));
        r = 3;
    }
    if r > MAX_R {
        let m_new = (design.ell * n as f64 / MAX_R as f64).ceil() as usize;
        adjustments.push(format!(
            "r clamped from {r} to {MAX_R}; M raised from {m_nodes} to {}",
            m_new.max(m_nodes)
        ));
        r = MAX_R;
        m_nodes = m_new.max(m_nodes);
    }
    // left degrees are capped at d, so the edge budget M·r must fit in N·d
    let cap = (n as u128 * design.d.min(m_nodes) as u128 / m_nodes as u128) as usize;
    if r > cap {
        adjustments.push(format!("r lowered from {r} to {cap} to fit left degree ≤ {}", design.d));
        r = cap;
    }
    if r < 3 || r as u64 > n || ((m_nodes * r) as u64) < n {
        return Err(QgtError::OutOfRegime(format!(
            "K = {k} too close to N = {n}: no right degree ≥ 3 fits M = {m_nodes} with left degree ≤ {}",
            design.d
        )));
    }
    let q = extension_degree(r);
    let s = design.t * q as usize + 1;
    Ok(Plan {
        n,
        k,
        t: design.t,
        d: design.d,
        c: design.c,
        ell: design.ell,
        m_nodes_exact: ck,
        r_exact,
        m_nodes,
        r,
        q,
        s,
        m: m_nodes * s,
        adjustments,
    })
}

/// Test count from the asymptotic formula `cK(t·log2(ℓN/(cK) + 1) + 1)`.
pub fn analytic_tests(n: f64, k: f64, t: usize, c: f64, ell: f64) -> f64 {
    let ck = c * k;
    ck * (t as f64 * (ell * n / ck + 1.0).log2() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// `1.19 K log2(4.74 N/K)`.
    RegularGraph,
    /// `((1+√θ)/(1−√θ)) K ln(N/K)`, `θ = ln K / ln N`.
    Greedy,
}

pub fn baseline_tests(scheme: Baseline, n: f64, k: f64) -> Result<f64> {
    if !(k > 1.0 && k < n) {
        return Err(QgtError::OutOfRegime(format!(
            "baseline formulas need 1 < K < N (N = {n}, K = {k})"
        )));
    }
    Ok(match scheme {
        Baseline::RegularGraph => 1.19 * k * (4.74 * n / k).log2(),
        Baseline::Greedy => {
            let rt = (k.ln() / n.ln()).sqrt();
            (1.0 + rt) / (1.0 - rt) * k * (n / k).ln()
        }
    })
}

/// Degrees swept for the table of a given `t`.
pub fn table_degrees(t: usize) -> std::ops::RangeInclusive<usize> {
    if t == 1 {
        2..=18
    } else {
        2..=17
    }
}

/// One table row; `design` is `None` where no profile is feasible.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub t: usize,
    pub d: usize,
    pub design: Option<DesignResult>,
}

pub fn table_rows(t: usize) -> Result<Vec<TableRow>> {
    if !(1..=MAX_T).contains(&t) {
        return Err(QgtError::UnsupportedT(t));
    }
    table_degrees(t)
        .map(|d| match optimize_psi(t, d) {
            Ok(r) => Ok(TableRow { t, d, design: Some(r) }),
            Err(e) if e.is_infeasible() => Ok(TableRow { t, d, design: None }),
            Err(e) => Err(e),
        })
        .collect()
}

/// CSV with columns `t,d,c,ell,lambda_2..lambda_dmax`.
pub fn tables_csv(rows: &[TableRow]) -> String {
    let dmax = rows.iter().map(|r| r.d).max().unwrap_or(2);
    let mut out = String::from("t,d,c,ell");
    for i in 2..=dmax {
        out.push_str(&format!(",lambda_{i}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{}", row.t, row.d));
        match &row.design {
            Some(res) => {
                out.push_str(&format!(",{:.4},{:.4}", res.c, res.ell));
                for i in 2..=dmax {
                    let l = res.lambda_star.lambda_at(i);
                    if l > 1e-9 {
                        out.push_str(&format!(",{l:.4}"));
                    } else {
                        out.push(',');
                    }
                }
            }
            None => {
                out.push_str(",infeasible,");
                out.push_str(&",".repeat(dmax - 1));
            }
        }
        out.push('\n');
    }
    out
}

/// Default maximum left degree: the largest table column for `t`.
pub fn default_degree(t: usize) -> usize {
    *table_degrees(t).end()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    #[serde(rename = "K")]
    pub k: f64,
    /// Analytic test counts for t = 1, 2, 3 (in that order).
    pub proposed: Vec<f64>,
    pub regular: f64,
    pub greedy: f64,
}

/// Analytic test counts of the proposed scheme (one design per entry of
/// `designs`) against both baselines.
pub fn compare_rows(n: f64, ks: &[f64], designs: &[DesignResult]) -> Result<Vec<CompareRow>> {
    ks.iter()
        .map(|&k| {
            Ok(CompareRow {
                k,
                proposed: designs
                    .iter()
                    .map(|d| analytic_tests(n, k, d.t, d.c, d.ell))
                    .collect(),
                regular: baseline_tests(Baseline::RegularGraph, n, k)?,
                greedy: baseline_tests(Baseline::Greedy, n, k)?,
            })
        })
        .collect()
}

pub fn compare_csv(rows: &[CompareRow], designs: &[DesignResult]) -> String {
    let mut out = String::from("K");
    for d in designs {
        out.push_str(&format!(",m_t{}", d.t));
    }
    out.push_str(",m_regular,m_greedy\n");
    for row in rows {
        out.push_str(&format!("{}", row.k));
        for m in &row.proposed {
            out.push_str(&format!(",{m:.1}"));
        }
        out.push_str(&format!(",{:.1},{:.1}\n", row.regular, row.greedy));
    }
    out
}
