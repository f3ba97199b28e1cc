//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min cᵀx` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, `x ≥ 0`.

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    // objective row, same width; last entry is minus the objective value
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    fn rhs(&self, row: usize) -> f64 {
        self.at(row, self.width - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.at(pr, pc);
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        prow.iter_mut().for_each(|v| *v *= inv);
        prow[pc] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        eliminate(&mut self.obj);
        self.basis[pr] = pc;
    }

    /// Runs Bland's rule over columns `< allowed`. Returns false if unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        loop {
            let Some(pc) = (0..allowed).find(|&j| self.obj[j] < -EPS) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, pc);
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - EPS
                                || (ratio <= br + EPS && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((pr, _)) => self.pivot(pr, pc),
                None => return false,
            }
        }
    }
}

pub fn minimize(lp: &LinearProgram) -> LpOutcome {
    let n = lp.cost.len();
    let n_ub = lp.a_ub.len();
    let n_eq = lp.a_eq.len();
    let rows = n_ub + n_eq;
    debug_assert_eq!(lp.b_ub.len(), n_ub);
    debug_assert_eq!(lp.b_eq.len(), n_eq);

    // Columns: originals, one slack per ub row, then artificials where needed.
    let needs_art: Vec<bool> = (0..rows)
        .map(|i| i >= n_ub || lp.b_ub[i] < 0.0)
        .collect();
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let art_start = n + n_ub;
    let width = art_start + n_art + 1;
    let mut data = vec![0.0; rows * width];
    let mut basis = vec![0; rows];
    let mut next_art = art_start;
    for i in 0..rows {
        let row = &mut data[i * width..(i + 1) * width];
        let (coeffs, b) = if i < n_ub {
            (&lp.a_ub[i], lp.b_ub[i])
        } else {
            (&lp.a_eq[i - n_ub], lp.b_eq[i - n_ub])
        };
        debug_assert_eq!(coeffs.len(), n);
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (dst, &a) in row.iter_mut().zip(coeffs) {
            *dst = sign * a;
        }
        if i < n_ub {
            row[n + i] = sign;
        }
        row[width - 1] = sign * b;
        if needs_art[i] {
            row[next_art] = 1.0;
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = n + i;
        }
    }

    let mut tab = Tableau {
        rows,
        width,
        data,
        obj: vec![0.0; width],
        basis,
    };

    if n_art > 0 {
        // Phase 1: minimise the sum of artificials, expressed in non-basic terms.
        for i in 0..rows {
            if needs_art[i] {
                for j in 0..width {
                    tab.obj[j] -= tab.at(i, j);
                }
            }
        }
        for j in art_start..width - 1 {
            tab.obj[j] = 0.0;
        }
        tab.optimize(art_start);
        let scale = 1.0 + lp.b_eq.iter().chain(&lp.b_ub).fold(0.0f64, |m, v| m.max(v.abs()));
        if -tab.obj[width - 1] > 1e-9 * scale {
            return LpOutcome::Infeasible;
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..rows {
            if tab.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| tab.at(i, j).abs() > EPS) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    // Phase 2 objective in terms of the current basis.
    tab.obj.iter_mut().for_each(|v| *v = 0.0);
    tab.obj[..n].copy_from_slice(&lp.cost);
    for i in 0..rows {
        let b = tab.basis[i];
        let cb = if b < n { lp.cost[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                tab.obj[j] -= cb * tab.at(i, j);
            }
        }
    }
    if !tab.optimize(art_start) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for i in 0..rows {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpOutcome::Optimal { x, objective }
}
