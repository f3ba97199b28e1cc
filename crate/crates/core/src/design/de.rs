//! Density evolution for the peeling decoder on a left-irregular,
//! right-regular ensemble.

use serde::Serialize;

use crate::error::{QgtError, Result};
use crate::graph::DegreeProfile;

/// Ascending grid of normalised residual probabilities in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiGrid(Vec<f64>);

impl PhiGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(QgtError::InvalidParameter("empty φ grid".into()));
        }
        if points.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(QgtError::InvalidParameter("φ grid must lie in (0, 1]".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QgtError::InvalidParameter(
                "φ grid must be strictly increasing".into(),
            ));
        }
        Ok(Self(points))
    }

    /// `n` points spaced evenly in log scale from `lo` to `hi`, endpoints included.
    pub fn log_spaced(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 || !(lo > 0.0 && lo < hi) {
            return Err(QgtError::InvalidParameter(format!(
                "bad log grid ({n}, {lo}, {hi})"
            )));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let mut pts: Vec<f64> = (0..n)
            .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
            .collect();
        pts[0] = lo;
        pts[n - 1] = hi;
        Self::new(pts)
    }

    /// 500 points on `[1e-6, 1]`.
    pub fn standard() -> Self {
        Self::log_spaced(500, 1e-6, 1.0).expect("valid grid")
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

/// Finite-length DE parameters. `psi = r·gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeParams {
    pub t: usize,
    pub gamma: f64,
    pub r: usize,
    pub psi: f64,
    pub phi_grid: PhiGrid,
}

impl DeParams {
    pub fn new(t: usize, gamma: f64, r: usize, phi_grid: PhiGrid) -> Result<Self> {
        if t == 0 {
            return Err(QgtError::InvalidParameter("t must be at least 1".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(QgtError::InvalidParameter(format!("γ = {gamma} outside (0, 1)")));
        }
        if r == 0 {
            return Err(QgtError::InvalidParameter("r must be positive".into()));
        }
        Ok(Self {
            t,
            gamma,
            r,
            psi: r as f64 * gamma,
            phi_grid,
        })
    }
}

/// `P(Pois(x) ≥ t)`, accurate for small `x`.
pub fn poisson_tail(x: f64, t: usize) -> f64 {
    if t == 0 {
        return 1.0;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.0 {
        let e = (-x).exp();
        let mut term = e;
        for k in 1..=t {
            term *= x / k as f64;
        }
        let mut sum = 0.0;
        let mut k = t;
        while term > sum * 1e-17 {
            sum += term;
            k += 1;
            term *= x / k as f64;
        }
        return sum;
    }
    let mut term = (-x).exp();
    let mut cdf = 0.0;
    for k in 0..t {
        cdf += term;
        term *= x / (k + 1) as f64;
    }
    (1.0 - cdf).max(0.0)
}

/// `P(Bin(n, p) ≥ t)`.
pub fn binomial_tail(n: usize, p: f64, t: usize) -> f64 {
    if t == 0 {
        return 1.0;
    }
    if t > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let ln_q = (-p).ln_1p();
    let mut cdf = 0.0;
    let mut coef = 1.0;
    for k in 0..t {
        cdf += coef * p.powi(k as i32) * (ln_q * (n - k) as f64).exp();
        coef *= (n - k) as f64 / (k + 1) as f64;
    }
    (1.0 - cdf).max(0.0)
}

fn profile_sum(profile: &DegreeProfile, base: f64) -> f64 {
    profile
        .support()
        .map(|(i, l)| l * base.powi(i as i32 - 1))
        .sum()
}

/// One step of the finite-`r` recursion on `p`:
/// `γ Σ λ_i (1 − Σ_{k<t} C(r−1,k) pᵏ (1−p)^{r−1−k})^{i−1}`.
pub fn de_step_exact(p: f64, params: &DeParams, profile: &DegreeProfile) -> f64 {
    let base = binomial_tail(params.r.saturating_sub(1), p, params.t);
    params.gamma * profile_sum(profile, base)
}

/// One step of the Poisson-limit recursion on `φ`:
/// `Σ λ_i (1 − Σ_{k<t} (ψφ)ᵏ e^{−ψφ}/k!)^{i−1}`.
pub fn de_step_poisson(phi: f64, psi: f64, t: usize, profile: &DegreeProfile) -> f64 {
    profile_sum(profile, poisson_tail(psi * phi, t))
}

/// `φ_0 = 1, φ_1, …, φ_steps` under the Poisson recursion.
pub fn poisson_trajectory(psi: f64, t: usize, profile: &DegreeProfile, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut phi = 1.0;
    out.push(phi);
    for _ in 0..steps {
        phi = de_step_poisson(phi, psi, t, profile);
        out.push(phi);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|v| v as f64).product()
    }

    #[test]
    fn grid_shape() {
        let g = PhiGrid::standard();
        let p = g.points();
        assert_eq!(p.len(), 500);
        assert_eq!(p[0], 1e-6);
        assert_eq!(p[499], 1.0);
        let ratio = p[1] / p[0];
        assert!(p.windows(2).all(|w| (w[1] / w[0] - ratio).abs() < 1e-9));
        assert!(PhiGrid::new(vec![0.5, 0.5]).is_err());
        assert!(PhiGrid::new(vec![0.0, 0.5]).is_err());
        assert!(PhiGrid::new(vec![0.5, 1.5]).is_err());
    }

    #[test]
    fn poisson_tail_matches_direct_sum() {
        for t in 1..=4 {
            for &x in &[1e-7f64, 1e-3, 0.3, 0.99, 1.0, 2.5, 10.0] {
                let direct: f64 = 1.0
                    - (0..t)
                        .map(|k| x.powi(k as i32) * (-x).exp() / factorial(k))
                        .sum::<f64>();
                let got = poisson_tail(x, t);
                assert!((got - direct).abs() < 1e-12, "t={t} x={x}");
                if x < 1e-2 {
                    // leading term dominates
                    let lead = x.powi(t as i32) / factorial(t);
                    assert!((got / lead - 1.0).abs() < 2.0 * x, "t={t} x={x}");
                }
            }
        }
    }

    #[test]
    fn binomial_tail_small_cases() {
        // Bin(3, 0.5) ≥ 2 = 4/8
        assert!((binomial_tail(3, 0.5, 2) - 0.5).abs() < 1e-15);
        assert!((binomial_tail(4, 0.25, 1) - (1.0 - 0.75f64.powi(4))).abs() < 1e-15);
        assert_eq!(binomial_tail(2, 0.3, 3), 0.0);
        assert_eq!(binomial_tail(5, 1.0, 3), 1.0);
    }

    #[test]
    fn endpoint_values() {
        let prof = DegreeProfile::from_lambda(&[0.0, 0.4, 0.6]).unwrap();
        assert_eq!(de_step_poisson(0.0, 2.0, 1, &prof), 0.0);
        let params = DeParams::new(1, 0.1, 8, PhiGrid::standard()).unwrap();
        assert_eq!(de_step_exact(0.0, &params, &prof), 0.0);
        assert!((de_step_exact(1.0, &params, &prof) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn degree_two_threshold_at_psi_one() {
        // t=1, λ_2 = 1: φ ↦ 1 − e^{−ψφ} has a positive fixed point iff ψ > 1.
        let prof = DegreeProfile::regular(2);
        let below = poisson_trajectory(0.9, 1, &prof, 5000);
        assert!(*below.last().unwrap() < 1e-3);
        let above = poisson_trajectory(1.2, 1, &prof, 5000);
        let fixed = *above.last().unwrap();
        assert!(fixed > 0.3);
        assert!((1.0 - (-1.2 * fixed).exp() - fixed).abs() < 1e-9);
    }

    #[test]
    fn exact_recursion_against_tree_monte_carlo() {
        use rand::{Rng, SeedableRng};
        // t=1, r=8, λ=(0,0,1), γ=0.1, p=0.05. A defective edge stays
        // unresolved if each of its 2 other right nodes has another
        // unresolved defective among its 7 remaining neighbours.
        let prof = DegreeProfile::regular(3);
        let params = DeParams::new(1, 0.1, 8, PhiGrid::standard()).unwrap();
        let p = 0.05;
        let want = de_step_exact(p, &params, &prof);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let mut hits = 0u32;
        for _ in 0..n {
            if !rng.random_bool(params.gamma) {
                continue;
            }
            let stuck = (0..2).all(|_| (0..7).any(|_| rng.random_bool(p)));
            hits += stuck as u32;
        }
        let est = hits as f64 / n as f64;
        let sd = (want * (1.0 - want) / n as f64).sqrt();
        assert!((est - want).abs() < 5.0 * sd, "est {est} want {want}");
    }

    #[test]
    fn poisson_and_exact_agree_at_large_r() {
        let prof = DegreeProfile::from_lambda(&[0.0, 0.3, 0.5, 0.2]).unwrap();
        let grid = PhiGrid::log_spaced(200, 1e-6, 1.0).unwrap();
        for t in 1..=3 {
            let psi = 1.1 * t as f64;
            let r = 512;
            let gamma = psi / r as f64;
            let params = DeParams::new(t, gamma, r, grid.clone()).unwrap();
            for &phi in grid.points() {
                let exact = de_step_exact(gamma * phi, &params, &prof) / gamma;
                let pois = de_step_poisson(phi, psi, t, &prof);
                assert!((exact - pois).abs() < 1e-3, "t={t} φ={phi}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn poisson_step_monotone(
            psi in 0.1f64..10.0,
            t in 1usize..=4,
            w in proptest::collection::vec(0.0f64..1.0, 2..8),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let mut lam = vec![0.0];
            lam.extend(w);
            proptest::prop_assume!(lam.iter().sum::<f64>() > 1e-3);
            let s: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|v| *v /= s);
            let prof = DegreeProfile::from_lambda(&lam).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(
                de_step_poisson(lo, psi, t, &prof) <= de_step_poisson(hi, psi, t, &prof) + 1e-15
            );
        }
    }
}
