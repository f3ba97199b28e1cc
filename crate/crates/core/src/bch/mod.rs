//! Binary BCH parity-check matrices over GF(2^q) and their syndrome decoder.
//!
//! Row block `k` (for `k < t`) of a parity-check matrix holds the bits of
//! `α^((2k+1)·i)` in column `i`, most significant bit first. For `t = 1`
//! and `r = 2^q - 1` this is the Hamming matrix with column `i` equal to
//! `α^i`. Lengths that are not of the form `2^q - 1` use the shortened code
//! made of the first `r` columns.

mod field;
pub mod poly;

use std::sync::Arc;

use thiserror::Error;

pub use field::{make_field, shared_field, FieldContext, MAX_Q, MIN_Q};

use crate::error::{QgtError, Result};

/// Largest supported error-correction capability.
pub const MAX_T: usize = 4;

/// Why a syndrome could not be decoded.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeFailure {
    #[error("expected weight {weight} exceeds correction capability t = {t}")]
    WeightTooLarge { weight: usize, t: usize },
    #[error("syndrome has {found} bits, expected {expected}")]
    SyndromeLength { expected: usize, found: usize },
    #[error("error-locator polynomial has no admissible set of roots")]
    NoLocator,
    #[error("error locator points at position {position}, outside the shortened length {r}")]
    OutOfRange { position: usize, r: usize },
    #[error("located columns do not reproduce the syndrome")]
    Inconsistent,
}

/// Smallest `q >= 3` with `2^q - 1 >= r`.
pub fn extension_degree(r: usize) -> u32 {
    let mut q = MIN_Q;
    while ((1usize << q) - 1) < r {
        q += 1;
    }
    q
}

/// Parity-check matrix `H_t` of a (possibly shortened) binary BCH code.
///
/// Columns are stored as packed syndromes: `t` field elements per column,
/// element `k` being `α^((2k+1)·i)`.
#[derive(Debug, Clone)]
pub struct ParityCheckMatrix {
    t: usize,
    r: usize,
    field: Arc<FieldContext>,
    columns: Vec<u32>,
}

/// Builds `H_t` with `r` columns over GF(2^q), `q = max(3, ⌈log2(r+1)⌉)`.
pub fn build_parity_check(t: usize, r: usize) -> Result<ParityCheckMatrix> {
    if !(1..=MAX_T).contains(&t) {
        return Err(QgtError::UnsupportedT(t));
    }
    if r < 3 {
        return Err(QgtError::InvalidParameter(format!(
            "code length r = {r} must be at least 3"
        )));
    }
    let q = extension_degree(r);
    let field = shared_field(q)?;
    let order = field.order() as u64;
    let mut columns = Vec::with_capacity(r * t);
    for i in 0..r as u64 {
        for k in 0..t as u64 {
            columns.push(field.alpha_pow(((2 * k + 1) * i) % order));
        }
    }
    Ok(ParityCheckMatrix {
        t,
        r,
        field,
        columns,
    })
}

impl ParityCheckMatrix {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn q(&self) -> u32 {
        self.field.q()
    }

    /// Length `2^q - 1` of the unshortened code.
    pub fn n(&self) -> usize {
        self.field.order() as usize
    }

    /// Number of columns actually kept.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Row count `R = t·q`.
    pub fn rows(&self) -> usize {
        self.t * self.q() as usize
    }

    pub fn field(&self) -> &FieldContext {
        &self.field
    }

    /// Packed column `i`: `t` field elements.
    #[inline]
    pub fn column(&self, i: usize) -> &[u32] {
        &self.columns[i * self.t..(i + 1) * self.t]
    }

    /// Entry at (`row`, `col`) as 0/1.
    #[inline]
    pub fn bit(&self, row: usize, col: usize) -> u8 {
        let q = self.q() as usize;
        let (block, j) = (row / q, row % q);
        ((self.column(col)[block] >> (q - 1 - j)) & 1) as u8
    }

    pub fn row(&self, row: usize) -> Vec<u8> {
        (0..self.r).map(|c| self.bit(row, c)).collect()
    }

    /// Dense row-major copy; only sensible for small `r`.
    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.rows()).map(|j| self.row(j)).collect()
    }

    /// XOR of the given columns, packed.
    pub fn syndrome_of(&self, cols: &[usize]) -> Vec<u32> {
        let mut syn = vec![0u32; self.t];
        for &c in cols {
            for (s, &v) in syn.iter_mut().zip(self.column(c)) {
                *s ^= v;
            }
        }
        syn
    }

    /// Packs a length-`R` binary vector (row order) into `t` field elements.
    pub fn pack(&self, bits: &[u8]) -> Result<Vec<u32>, DecodeFailure> {
        if bits.len() != self.rows() {
            return Err(DecodeFailure::SyndromeLength {
                expected: self.rows(),
                found: bits.len(),
            });
        }
        let q = self.q() as usize;
        Ok(bits
            .chunks(q)
            .map(|block| block.iter().fold(0u32, |acc, &b| (acc << 1) | (b & 1) as u32))
            .collect())
    }

    pub fn unpack(&self, syn: &[u32]) -> Vec<u8> {
        let q = self.q() as usize;
        syn.iter()
            .flat_map(|&s| (0..q).map(move |j| ((s >> (q - 1 - j)) & 1) as u8))
            .collect()
    }

    /// Decodes a packed syndrome known to come from exactly `weight` columns.
    ///
    /// Runs Peterson–Gorenstein–Zierler on the `weight × weight` Hankel
    /// system of power sums, finds the locator roots by trace splitting, and
    /// re-derives the syndrome from the located columns before returning
    /// them in ascending order.
    pub fn decode(&self, syn: &[u32], weight: usize) -> Result<Vec<usize>, DecodeFailure> {
        if syn.len() != self.t {
            return Err(DecodeFailure::SyndromeLength {
                expected: self.rows(),
                found: syn.len() * self.q() as usize,
            });
        }
        if weight > self.t {
            return Err(DecodeFailure::WeightTooLarge { weight, t: self.t });
        }
        if weight == 0 {
            return if syn.iter().all(|&s| s == 0) {
                Ok(Vec::new())
            } else {
                Err(DecodeFailure::Inconsistent)
            };
        }
        let f = &*self.field;
        let locators = if weight == 1 {
            if syn[0] == 0 {
                return Err(DecodeFailure::NoLocator);
            }
            vec![syn[0]]
        } else {
            let lambda = self.locator(syn, weight).ok_or(DecodeFailure::NoLocator)?;
            // x^v + Λ1 x^(v-1) + … + Λv, whose roots are the locators X_j
            let mut p: Vec<u32> = lambda.iter().rev().copied().collect();
            p.push(1);
            let roots = poly::split_roots(f, &p).ok_or(DecodeFailure::NoLocator)?;
            if roots.len() != weight || roots.contains(&0) {
                return Err(DecodeFailure::NoLocator);
            }
            roots
        };
        let mut positions = Vec::with_capacity(weight);
        for x in locators {
            let pos = f.log(x).ok_or(DecodeFailure::NoLocator)? as usize;
            if pos >= self.r {
                return Err(DecodeFailure::OutOfRange {
                    position: pos,
                    r: self.r,
                });
            }
            positions.push(pos);
        }
        positions.sort_unstable();
        if self.syndrome_of(&positions) != syn {
            return Err(DecodeFailure::Inconsistent);
        }
        Ok(positions)
    }

    // Solves Σ_{i=1..v} Λ_i S_{j+v-i} = S_{j+v}, j = 1..v.
    fn locator(&self, syn: &[u32], v: usize) -> Option<Vec<u32>> {
        let f = &*self.field;
        let mut s = vec![0u32; 2 * v + 1];
        for j in 1..=2 * v {
            s[j] = if j % 2 == 1 {
                syn[(j - 1) / 2]
            } else {
                f.square(s[j / 2])
            };
        }
        let mut a: Vec<Vec<u32>> = (1..=v)
            .map(|j| {
                let mut row: Vec<u32> = (1..=v).map(|i| s[j + v - i]).collect();
                row.push(s[j + v]);
                row
            })
            .collect();
        for col in 0..v {
            let piv = (col..v).find(|&r| a[r][col] != 0)?;
            a.swap(col, piv);
            let inv = f.inv(a[col][col]);
            for c in col..=v {
                a[col][c] = f.mul(a[col][c], inv);
            }
            for r in 0..v {
                if r != col && a[r][col] != 0 {
                    let factor = a[r][col];
                    for c in col..=v {
                        let sub = f.mul(factor, a[col][c]);
                        a[r][c] ^= sub;
                    }
                }
            }
        }
        Some(a.into_iter().map(|row| row[v]).collect())
    }
}

/// Decodes a binary syndrome vector (length `R`, row order of `h`).
pub fn syndrome_decode(
    h: &ParityCheckMatrix,
    syndrome: &[u8],
    expected_weight: usize,
) -> Result<Vec<usize>, DecodeFailure> {
    let packed = h.pack(syndrome)?;
    h.decode(&packed, expected_weight)
}
