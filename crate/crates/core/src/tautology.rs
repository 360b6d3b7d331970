//! ±1 sequence laboratory.
//!
//! [`bell_statistic`] evaluates `|⟨ab⟩ + ⟨ab′⟩| + |⟨a′b⟩ − ⟨a′b′⟩|` on four
//! aligned sequences; it can never exceed 2. [`rearranged_statistic`] takes
//! four separately measured runs, permutes them into alignment, and
//! evaluates the same bound. Because the shared columns only approximately
//! match after permutation, that value can exceed 2.

use alloc::vec;
use alloc::vec::Vec;

use crate::stream::RandomStream;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TautologyError {
    #[error("sequence is empty")]
    Empty,
    #[error("element {index} is {value}, expected +1 or -1")]
    NotDichotomic { index: usize, value: i8 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// Non-empty sequence of ±1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DichotomicSeq(Vec<i8>);

impl DichotomicSeq {
    pub fn new(values: Vec<i8>) -> Result<Self, TautologyError> {
        if values.is_empty() {
            return Err(TautologyError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| v.abs() != 1) {
            return Err(TautologyError::NotDichotomic { index, value });
        }
        Ok(DichotomicSeq(values))
    }

    /// `true` ↦ +1.
    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Result<Self, TautologyError> {
        Self::new(bits.into_iter().map(|b| if b { 1 } else { -1 }).collect())
    }

    pub fn random(stream: &mut RandomStream, len: usize) -> Result<Self, TautologyError> {
        Self::from_bools((0..len).map(|_| stream.next_bool()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn count_plus(&self) -> usize {
        self.0.iter().filter(|&&v| v == 1).count()
    }

    /// Positions where both sequences agree.
    pub fn agreement(&self, other: &DichotomicSeq) -> Result<usize, TautologyError> {
        same_len(self, other)?;
        Ok(self.0.iter().zip(&other.0).filter(|(x, y)| x == y).count())
    }

    /// `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> DichotomicSeq {
        DichotomicSeq(perm.iter().map(|&i| self.0[i]).collect())
    }

    /// `Σ xᵢ yᵢ`.
    fn dot(&self, other: &DichotomicSeq) -> i64 {
        self.0.iter().zip(&other.0).map(|(&x, &y)| (x * y) as i64).sum()
    }
}

fn same_len(x: &DichotomicSeq, y: &DichotomicSeq) -> Result<(), TautologyError> {
    if x.len() != y.len() {
        return Err(TautologyError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(())
}

/// Four aligned sequences a, a′, b, b′ of equal length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DichotomicQuad {
    a: DichotomicSeq,
    a_prime: DichotomicSeq,
    b: DichotomicSeq,
    b_prime: DichotomicSeq,
}

impl DichotomicQuad {
    pub fn new(
        a: DichotomicSeq,
        a_prime: DichotomicSeq,
        b: DichotomicSeq,
        b_prime: DichotomicSeq,
    ) -> Result<Self, TautologyError> {
        same_len(&a, &a_prime)?;
        same_len(&a, &b)?;
        same_len(&a, &b_prime)?;
        Ok(DichotomicQuad { a, a_prime, b, b_prime })
    }

    pub fn random(stream: &mut RandomStream, len: usize) -> Result<Self, TautologyError> {
        let a = DichotomicSeq::random(stream, len)?;
        let a_prime = DichotomicSeq::random(stream, len)?;
        let b = DichotomicSeq::random(stream, len)?;
        let b_prime = DichotomicSeq::random(stream, len)?;
        Self::new(a, a_prime, b, b_prime)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same permutation applied to all four sequences.
    pub fn permuted(&self, perm: &[usize]) -> DichotomicQuad {
        DichotomicQuad {
            a: self.a.permuted(perm),
            a_prime: self.a_prime.permuted(perm),
            b: self.b.permuted(perm),
            b_prime: self.b_prime.permuted(perm),
        }
    }
}

/// `|⟨ab⟩ + ⟨ab′⟩| + |⟨a′b⟩ − ⟨a′b′⟩|`, computed from integer sums so the
/// bound of 2 is checked without rounding.
pub fn bell_statistic(quad: &DichotomicQuad) -> f64 {
    bell_numerator(quad) as f64 / quad.len() as f64
}

/// `N ×` [`bell_statistic`], exact.
pub fn bell_numerator(quad: &DichotomicQuad) -> u64 {
    let first = quad.a.dot(&quad.b) + quad.a.dot(&quad.b_prime);
    let second = quad.a_prime.dot(&quad.b) - quad.a_prime.dot(&quad.b_prime);
    first.unsigned_abs() + second.unsigned_abs()
}

/// Permutation `perm` such that `seq.permuted(&perm)` agrees with `reference`
/// in as many positions as possible.
///
/// Each reference position, scanned left to right, takes the first unused
/// element of `seq` with the same value, falling back to the first unused
/// element of the other value. This reaches the optimum
/// `min(p_s, p_r) + min(m_s, m_r)` (counts of +1 and −1).
pub fn matching_permutation(seq: &DichotomicSeq, reference: &DichotomicSeq) -> Result<Vec<usize>, TautologyError> {
    same_len(seq, reference)?;
    let (plus, minus): (Vec<usize>, Vec<usize>) = (0..seq.len()).partition(|&i| seq.0[i] == 1);
    let (mut next_plus, mut next_minus) = (plus.into_iter().peekable(), minus.into_iter().peekable());
    let perm = reference
        .0
        .iter()
        .map(|&want| {
            let (same, other) = if want == 1 {
                (&mut next_plus, &mut next_minus)
            } else {
                (&mut next_minus, &mut next_plus)
            };
            same.next().or_else(|| other.next()).expect("lengths are equal")
        })
        .collect();
    Ok(perm)
}

pub fn rearrange_to_match(seq: &DichotomicSeq, reference: &DichotomicSeq) -> Result<DichotomicSeq, TautologyError> {
    Ok(seq.permuted(&matching_permutation(seq, reference)?))
}

/// A run's trials as atomic pairs: `first` is the left outcome column,
/// `second` the right one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub first: DichotomicSeq,
    pub second: DichotomicSeq,
}

impl Run {
    pub fn new(first: DichotomicSeq, second: DichotomicSeq) -> Result<Self, TautologyError> {
        same_len(&first, &second)?;
        Ok(Run { first, second })
    }

    pub fn random(stream: &mut RandomStream, len: usize) -> Result<Self, TautologyError> {
        let first = DichotomicSeq::random(stream, len)?;
        let second = DichotomicSeq::random(stream, len)?;
        Self::new(first, second)
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn permuted(&self, perm: &[usize]) -> Run {
        Run {
            first: self.first.permuted(perm),
            second: self.second.permuted(perm),
        }
    }
}

/// Four separately measured runs: `(a(1), b(1))`, `(a(2), b′(2))`,
/// `(a′(3), b(3))`, `(a′(4), b′(4))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FourRunData {
    pub runs: [Run; 4],
}

impl FourRunData {
    pub fn new(runs: [Run; 4]) -> Result<Self, TautologyError> {
        for r in &runs[1..] {
            if r.len() != runs[0].len() {
                return Err(TautologyError::LengthMismatch {
                    left: runs[0].len(),
                    right: r.len(),
                });
            }
        }
        Ok(FourRunData { runs })
    }

    pub fn random(stream: &mut RandomStream, len: usize) -> Result<Self, TautologyError> {
        let runs = [
            Run::random(stream, len)?,
            Run::random(stream, len)?,
            Run::random(stream, len)?,
            Run::random(stream, len)?,
        ];
        Self::new(runs)
    }

    pub fn len(&self) -> usize {
        self.runs[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RearrangedOutcome {
    pub value: f64,
    /// Fraction of positions where `b(1)` and the aligned `b̃(3)` agree.
    pub b_match_fraction: f64,
    /// The four runs after alignment (run 1 is untouched).
    pub aligned: FourRunData,
}

/// Aligns the four runs and evaluates
/// `⟨|a(1)| |b(1) + b̃′(2)|⟩ + ⟨|ã′(4)| |b̃(3) − b̃′(2)|⟩`.
///
/// Alignment, each step permuting a whole run:
/// 1. run 2 so that `a(2)` best matches `a(1)`;
/// 2. run 4 so that `b′(4)` best matches `b̃′(2)`;
/// 3. run 3 so that `a′(3)` best matches `ã′(4)`.
pub fn rearranged_statistic(data: &FourRunData) -> Result<RearrangedOutcome, TautologyError> {
    let [r1, r2, r3, r4] = &data.runs;
    let r2 = r2.permuted(&matching_permutation(&r2.first, &r1.first)?);
    let r4 = r4.permuted(&matching_permutation(&r4.second, &r2.second)?);
    let r3 = r3.permuted(&matching_permutation(&r3.first, &r4.first)?);

    let (a1, b1) = (r1.first.values(), r1.second.values());
    let b2 = r2.second.values();
    let b3 = r3.second.values();
    let a4 = r4.first.values();
    let sum: i64 = (0..data.len())
        .map(|i| {
            let left = (a1[i] as i64).abs() * (b1[i] as i64 + b2[i] as i64).abs();
            let right = (a4[i] as i64).abs() * (b3[i] as i64 - b2[i] as i64).abs();
            left + right
        })
        .sum();
    let n = data.len() as f64;
    let b_match_fraction = r1.second.agreement(&r3.second)? as f64 / n;
    Ok(RearrangedOutcome {
        value: sum as f64 / n,
        b_match_fraction,
        aligned: FourRunData {
            runs: [r1.clone(), r2, r3, r4],
        },
    })
}

/// Every ±1 sequence of length `len`, in binary counting order
/// (bit set ↦ −1). Only sensible for small `len`.
pub fn all_sequences(len: usize) -> Vec<DichotomicSeq> {
    (0u64..1 << len)
        .map(|bits| {
            let mut v = vec![1i8; len];
            for (i, x) in v.iter_mut().enumerate() {
                if bits >> i & 1 == 1 {
                    *x = -1;
                }
            }
            DichotomicSeq(v)
        })
        .collect()
}
