//! Small polynomials over GF(2^q) and root finding for error locators.
//!
//! Coefficient vectors are stored lowest degree first with no trailing
//! zeros; the zero polynomial is the empty vector.

use super::field::FieldContext;

pub type Poly = Vec<u32>;

fn trim(p: &mut Poly) {
    while p.last() == Some(&0) {
        p.pop();
    }
}

fn degree(p: &[u32]) -> Option<usize> {
    if p.is_empty() {
        None
    } else {
        Some(p.len() - 1)
    }
}

fn add(a: &[u32], b: &[u32]) -> Poly {
    let mut out = vec![0; a.len().max(b.len())];
    for (i, &c) in a.iter().enumerate() {
        out[i] ^= c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[i] ^= c;
    }
    trim(&mut out);
    out
}

fn mul(f: &FieldContext, a: &[u32], b: &[u32]) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] ^= f.mul(x, y);
        }
    }
    trim(&mut out);
    out
}

/// Quotient and remainder of `a / b`; `b` must be nonzero.
fn div_rem(f: &FieldContext, a: &[u32], b: &[u32]) -> (Poly, Poly) {
    let db = degree(b).expect("division by zero polynomial");
    let lead_inv = f.inv(b[db]);
    let mut rem: Poly = a.to_vec();
    trim(&mut rem);
    if rem.len() < b.len() {
        return (Vec::new(), rem);
    }
    let mut quot = vec![0; rem.len() - db];
    while let Some(dr) = degree(&rem) {
        if dr < db {
            break;
        }
        let coef = f.mul(rem[dr], lead_inv);
        let shift = dr - db;
        quot[shift] = coef;
        for (i, &c) in b.iter().enumerate() {
            rem[shift + i] ^= f.mul(coef, c);
        }
        trim(&mut rem);
    }
    trim(&mut quot);
    (quot, rem)
}

fn rem(f: &FieldContext, a: &[u32], b: &[u32]) -> Poly {
    div_rem(f, a, b).1
}

fn monic(f: &FieldContext, mut p: Poly) -> Poly {
    if let Some(d) = degree(&p) {
        let inv = f.inv(p[d]);
        for c in p.iter_mut() {
            *c = f.mul(*c, inv);
        }
    }
    p
}

fn gcd(f: &FieldContext, a: &[u32], b: &[u32]) -> Poly {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    trim(&mut x);
    trim(&mut y);
    while !y.is_empty() {
        let r = rem(f, &x, &y);
        x = y;
        y = r;
    }
    monic(f, x)
}

// (Σ a_i x^i)^2 = Σ a_i^2 x^{2i} in characteristic two.
fn square_mod(f: &FieldContext, a: &[u32], m: &[u32]) -> Poly {
    let mut sq = vec![0; 2 * a.len().max(1) - 1];
    for (i, &c) in a.iter().enumerate() {
        sq[2 * i] = f.square(c);
    }
    trim(&mut sq);
    rem(f, &sq, m)
}

/// Evaluates `p` at `x` by Horner's rule.
pub fn eval(f: &FieldContext, p: &[u32], x: u32) -> u32 {
    p.iter().rev().fold(0, |acc, &c| f.mul(acc, x) ^ c)
}

/// Distinct roots of `p` in GF(2^q), or `None` unless `p` splits into
/// distinct linear factors over the field.
///
/// First checks `x^(2^q) ≡ x (mod p)`, which holds exactly when `p` divides
/// `x^(2^q) - x`. Then splits recursively with the trace maps
/// `Tr(βx)` for `β` running over the polynomial basis `1, α, …, α^(q-1)`.
/// Cost is `O(q · deg²)` field operations, independent of the code length.
pub fn split_roots(f: &FieldContext, p: &[u32]) -> Option<Vec<u32>> {
    let mut p = p.to_vec();
    trim(&mut p);
    let deg = degree(&p)?;
    if deg == 0 {
        return Some(Vec::new());
    }
    let p = monic(f, p);
    // x^(2^q) mod p
    let mut y: Poly = rem(f, &[0, 1], &p);
    for _ in 0..f.q() {
        y = square_mod(f, &y, &p);
    }
    let x_mod = rem(f, &[0, 1], &p);
    if y != x_mod {
        return None;
    }
    let mut roots = Vec::with_capacity(deg);
    if !split_into(f, &p, &mut roots) {
        return None;
    }
    roots.sort_unstable();
    Some(roots)
}

// `p` is monic and a product of distinct linear factors.
fn split_into(f: &FieldContext, p: &[u32], roots: &mut Vec<u32>) -> bool {
    match degree(p) {
        None | Some(0) => return true,
        Some(1) => {
            roots.push(p[0]);
            return true;
        }
        _ => {}
    }
    for k in 0..f.q() {
        let beta = f.antilog(k);
        // Tr(βx) = Σ_{i<q} (βx)^(2^i) mod p
        let mut term = rem(f, &[0, beta], p);
        let mut trace = term.clone();
        for _ in 1..f.q() {
            term = square_mod(f, &term, p);
            trace = add(&trace, &term);
        }
        let g = gcd(f, p, &trace);
        let dg = degree(&g).unwrap_or(0);
        if dg > 0 && dg < p.len() - 1 {
            let (h, r) = div_rem(f, p, &g);
            debug_assert!(r.is_empty());
            let h = monic(f, h);
            return split_into(f, &g, roots) && split_into(f, &h, roots);
        }
    }
    false
}

/// Brute-force root search over `α^0 … α^(len-1)`, reporting exponents.
///
/// This is the classic Chien search, `O(len · deg)`; the decoder uses
/// [`split_roots`] instead and keeps this as an independent cross-check.
pub fn chien_search(f: &FieldContext, p: &[u32], len: usize) -> Vec<usize> {
    (0..len)
        .filter(|&i| eval(f, p, f.alpha_pow(i as u64)) == 0)
        .collect()
}

/// `Π (x - r_i)` for the given roots.
pub fn from_roots(f: &FieldContext, roots: &[u32]) -> Poly {
    roots.iter().fold(vec![1], |acc, &r| mul(f, &acc, &[r, 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bch::field::make_field;

    #[test]
    fn splits_products_of_distinct_linears() {
        let f = make_field(10).unwrap();
        for roots in [
            vec![5u32],
            vec![1, 2],
            vec![3, 900, 17],
            vec![1, 2, 3, 4],
            vec![1023, 512, 7, 100],
        ] {
            let p = from_roots(&f, &roots);
            let mut want = roots.clone();
            want.sort_unstable();
            assert_eq!(split_roots(&f, &p), Some(want));
        }
    }

    #[test]
    fn rejects_repeated_or_irreducible() {
        let f = make_field(4).unwrap();
        // (x + 3)^2
        let p = from_roots(&f, &[3, 3]);
        assert_eq!(split_roots(&f, &p), None);
        // some x^2 + x + c has no root in the field
        let irreducible = (1..16u32)
            .find(|&c| (0..16u32).all(|z| f.mul(z, z) ^ z ^ c != 0))
            .unwrap();
        assert_eq!(split_roots(&f, &[irreducible, 1, 1]), None);
    }

    #[test]
    fn chien_matches_split() {
        let f = make_field(6).unwrap();
        let roots: Vec<u32> = [4u64, 9, 40].iter().map(|&e| f.alpha_pow(e)).collect();
        let p = from_roots(&f, &roots);
        assert_eq!(chien_search(&f, &p, 63), vec![4, 9, 40]);
        let mut logs: Vec<u32> = split_roots(&f, &p)
            .unwrap()
            .iter()
            .map(|&x| f.log(x).unwrap())
            .collect();
        logs.sort_unstable();
        assert_eq!(logs, vec![4, 9, 40]);
    }
}
