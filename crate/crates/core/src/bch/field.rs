//! Log/antilog arithmetic in GF(2^q).

use std::sync::{Arc, OnceLock};

use crate::error::{QgtError, Result};

pub const MIN_Q: u32 = 3;
pub const MAX_Q: u32 = 20;

/// One fixed primitive polynomial per extension degree, indexed by `q - 3`.
/// Bit `i` is the coefficient of `x^i`.
const PRIMITIVE_POLYNOMIALS: [u32; 18] = [
    0x0000_000B, // x^3 + x + 1
    0x0000_0013, // x^4 + x + 1
    0x0000_0025, // x^5 + x^2 + 1
    0x0000_0043, // x^6 + x + 1
    0x0000_0083, // x^7 + x + 1
    0x0000_011D, // x^8 + x^4 + x^3 + x^2 + 1
    0x0000_0211, // x^9 + x^4 + 1
    0x0000_0409, // x^10 + x^3 + 1
    0x0000_0805, // x^11 + x^2 + 1
    0x0000_1053, // x^12 + x^6 + x^4 + x + 1
    0x0000_201B, // x^13 + x^4 + x^3 + x + 1
    0x0000_4443, // x^14 + x^10 + x^6 + x + 1
    0x0000_8003, // x^15 + x + 1
    0x0001_100B, // x^16 + x^12 + x^3 + x + 1
    0x0002_0009, // x^17 + x^3 + 1
    0x0004_0081, // x^18 + x^7 + 1
    0x0008_0027, // x^19 + x^5 + x^2 + x + 1
    0x0010_0009, // x^20 + x^3 + 1
];

/// Arithmetic tables for GF(2^q) generated from a fixed primitive polynomial.
///
/// Elements are represented as `u32` bit vectors in the polynomial basis
/// `1, α, α², …`; `α` is the class of `x`.
#[derive(Clone)]
pub struct FieldContext {
    q: u32,
    poly: u32,
    order: u32,
    log: Vec<u32>,
    // Doubled so that `exp[log a + log b]` never needs a reduction.
    exp: Vec<u32>,
}

impl std::fmt::Debug for FieldContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldContext")
            .field("q", &self.q)
            .field("primitive_polynomial", &format_args!("{:#x}", self.poly))
            .finish()
    }
}

/// Builds the tables for GF(2^q).
pub fn make_field(q: u32) -> Result<FieldContext> {
    if !(MIN_Q..=MAX_Q).contains(&q) {
        return Err(QgtError::FieldDegree(q));
    }
    let poly = PRIMITIVE_POLYNOMIALS[(q - MIN_Q) as usize];
    let size = 1usize << q;
    let order = (size - 1) as u32;
    let mut exp = vec![0u32; 2 * size];
    let mut log = vec![0u32; size];
    let mut x = 1u32;
    for i in 0..order {
        exp[i as usize] = x;
        log[x as usize] = i;
        x <<= 1;
        if x & (1 << q) != 0 {
            x ^= poly;
        }
    }
    debug_assert_eq!(x, 1, "polynomial {poly:#x} is not primitive");
    for i in order as usize..2 * size {
        exp[i] = exp[i - order as usize];
    }
    Ok(FieldContext {
        q,
        poly,
        order,
        log,
        exp,
    })
}

/// Process-wide cache of fields; tables for q = 20 are a few MB each.
pub fn shared_field(q: u32) -> Result<Arc<FieldContext>> {
    static CACHE: [OnceLock<Arc<FieldContext>>; 18] = [const { OnceLock::new() }; 18];
    if !(MIN_Q..=MAX_Q).contains(&q) {
        return Err(QgtError::FieldDegree(q));
    }
    let slot = &CACHE[(q - MIN_Q) as usize];
    if let Some(f) = slot.get() {
        return Ok(Arc::clone(f));
    }
    let field = Arc::new(make_field(q)?);
    Ok(Arc::clone(slot.get_or_init(|| field)))
}

impl FieldContext {
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn primitive_polynomial(&self) -> u32 {
        self.poly
    }

    /// Size of the multiplicative group, `2^q - 1`.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// `α^e` for any exponent.
    #[inline]
    pub fn alpha_pow(&self, e: u64) -> u32 {
        self.exp[(e % self.order as u64) as usize]
    }

    /// Discrete logarithm base `α`; `None` for zero.
    #[inline]
    pub fn log(&self, x: u32) -> Option<u32> {
        if x == 0 {
            None
        } else {
            Some(self.log[x as usize])
        }
    }

    #[inline]
    pub fn antilog(&self, i: u32) -> u32 {
        self.exp[i as usize]
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
        }
    }

    #[inline]
    pub fn square(&self, a: u32) -> u32 {
        self.mul(a, a)
    }

    /// Panics on zero.
    #[inline]
    pub fn inv(&self, a: u32) -> u32 {
        assert!(a != 0, "inverse of zero in GF(2^{})", self.q);
        self.exp[(self.order - self.log[a as usize]) as usize]
    }

    #[inline]
    pub fn div(&self, a: u32, b: u32) -> u32 {
        self.mul(a, self.inv(b))
    }

    pub fn pow(&self, a: u32, e: u64) -> u32 {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let l = self.log[a as usize] as u64;
        self.exp[((l * (e % self.order as u64)) % self.order as u64) as usize]
    }
}
