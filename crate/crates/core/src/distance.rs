//! Pairwise row distances and the maximum interpoint distance
//! `M_{n,q} = max_{i<j} (Σ_k |X_ik − X_jk|^q)^{1/q}`.
//!
//! Two kernels are provided. `Naive` accumulates every pair directly and
//! works for any `q ≥ 1`. `BlockedGram` is restricted to `q = 2` and uses
//! `‖x−y‖² = ‖x‖² + ‖y‖² − 2⟨x,y⟩` over square tiles of row pairs, which
//! turns the scan into dense dot products. The Gram route is only used to
//! locate the farthest pair; its reported distance is recomputed directly
//! from the two rows.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

pub const DEFAULT_TILE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Naive,
    BlockedGram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    pub q: f64,
    pub kernel: Kernel,
    pub tile: usize,
}

impl DistanceSpec {
    pub fn naive(q: f64) -> Self {
        Self {
            q,
            kernel: Kernel::Naive,
            tile: DEFAULT_TILE,
        }
    }

    pub fn blocked_gram(tile: usize) -> Self {
        Self {
            q: 2.0,
            kernel: Kernel::BlockedGram,
            tile,
        }
    }

    /// Gram kernel for `q = 2`, naive otherwise.
    pub fn fastest(q: f64) -> Self {
        if q == 2.0 {
            Self::blocked_gram(DEFAULT_TILE)
        } else {
            Self::naive(q)
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        if self.kernel == Kernel::BlockedGram {
            if self.q != 2.0 {
                return Err(Error::Spec(format!("BlockedGram requires q = 2, got q = {}", self.q)));
            }
            if self.tile == 0 {
                return Err(Error::param("tile must be positive"));
            }
        }
        Ok(())
    }
}

/// Farthest pair with its distance. Indices are 0-based and `arg_i < arg_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxDistanceResult {
    /// `M_{n,q}^q`, the maximized `Σ_k |X_ik − X_jk|^q`.
    pub value_pow_q: f64,
    /// `M_{n,q}`.
    pub value: f64,
    pub arg_i: usize,
    pub arg_j: usize,
}

impl MaxDistanceResult {
    fn from_pair(value_pow_q: f64, arg_i: usize, arg_j: usize, q: f64) -> Self {
        let value = if q == 2.0 {
            value_pow_q.sqrt()
        } else if q == 1.0 {
            value_pow_q
        } else {
            value_pow_q.powf(1.0 / q)
        };
        Self {
            value_pow_q,
            value,
            arg_i,
            arg_j,
        }
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::param(format!("q must be a finite real >= 1, got {q}")));
    }
    Ok(())
}

#[inline]
fn pow_q_sum(a: &[f64], b: &[f64], q: f64) -> f64 {
    if q == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    } else if q == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(q)).sum()
    }
}

/// `Σ_k |a_k − b_k|^q`.
pub fn qnorm_pow_q_distance(a: &[f64], b: &[f64], q: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    check_q(q)?;
    Ok(pow_q_sum(a, b, q))
}

/// Running maximum with ties resolved toward the lexicographically
/// smallest `(i, j)`. Combining two of these is associative and
/// commutative, so parallel reductions are schedule-independent.
#[derive(Debug, Clone, Copy)]
struct Best {
    value: f64,
    i: usize,
    j: usize,
}

impl Best {
    const NONE: Best = Best {
        value: f64::NEG_INFINITY,
        i: usize::MAX,
        j: usize::MAX,
    };

    fn cmp_rank(&self, other: &Best) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| (other.i, other.j).cmp(&(self.i, self.j)))
    }

    fn merge(self, other: Best) -> Best {
        if other.cmp_rank(&self) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    #[inline]
    fn offer(&mut self, value: f64, i: usize, j: usize) {
        // Callers visit pairs in increasing (i, j) order within a scan.
        if value > self.value {
            *self = Best { value, i, j };
        }
    }
}

/// Computes `M_{n,q}` and an attaining pair.
pub fn max_interpoint(matrix: &DataMatrix, spec: &DistanceSpec) -> Result<MaxDistanceResult> {
    spec.validate()?;
    matrix.require_pairs()?;
    match spec.kernel {
        Kernel::Naive => Ok(naive_max(matrix, spec.q)),
        Kernel::BlockedGram => blocked_gram_max_sq(matrix, spec.tile),
    }
}

fn naive_max(matrix: &DataMatrix, q: f64) -> MaxDistanceResult {
    let p = matrix.rows();
    let best = (0..p - 1)
        .into_par_iter()
        .map(|i| {
            let row_i = matrix.row(i);
            let mut best = Best::NONE;
            for j in i + 1..p {
                best.offer(pow_q_sum(row_i, matrix.row(j), q), i, j);
            }
            best
        })
        .reduce(|| Best::NONE, Best::merge);
    MaxDistanceResult::from_pair(best.value, best.i, best.j, q)
}

/// Maximum squared Euclidean distance through the Gram identity, scanning
/// `tile × tile` blocks of row pairs.
///
/// Rows are column-centered before forming inner products; squared
/// distances are translation invariant and centering keeps the
/// `‖x‖² + ‖y‖² − 2⟨x,y⟩` cancellation small. Negative values from the
/// remaining cancellation are clamped at zero. Every inner product is
/// evaluated with the same fixed summation order whatever the tile size,
/// so the result does not depend on `tile` or on the thread schedule.
pub fn blocked_gram_max_sq(matrix: &DataMatrix, tile: usize) -> Result<MaxDistanceResult> {
    if tile == 0 {
        return Err(Error::param("tile must be positive"));
    }
    matrix.require_pairs()?;
    let p = matrix.rows();
    let n = matrix.cols();

    let centered = column_centered(matrix);
    let norms: Vec<f64> = centered.chunks_exact(n).map(|row| dot(row, row)).collect();

    let blocks = p.div_ceil(tile);
    let tiles: Vec<(usize, usize)> = (0..blocks)
        .flat_map(|bi| (bi..blocks).map(move |bj| (bi, bj)))
        .collect();
    let scan = Scan {
        data: &centered,
        norms: &norms,
        n,
    };
    let best = tiles
        .par_iter()
        .map(|&(bi, bj)| {
            let rows_i = bi * tile..((bi + 1) * tile).min(p);
            let rows_j = bj * tile..((bj + 1) * tile).min(p);
            scan.block(rows_i, rows_j)
        })
        .reduce(|| Best::NONE, Best::merge);

    let exact = pow_q_sum(matrix.row(best.i), matrix.row(best.j), 2.0);
    Ok(MaxDistanceResult::from_pair(exact, best.i, best.j, 2.0))
}

fn column_centered(matrix: &DataMatrix) -> Vec<f64> {
    let n = matrix.cols();
    let p = matrix.rows() as f64;
    let mut means = vec![0.0; n];
    for row in matrix.iter_rows() {
        for (m, x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= p);
    matrix
        .iter_rows()
        .flat_map(|row| row.iter().zip(&means).map(|(x, m)| x - m))
        .collect()
}

const LANES: usize = 4;

#[inline(always)]
fn finish(acc: [f64; LANES], tail: f64) -> f64 {
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .fold(0.0, |s, v| s + v);
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    finish(acc, tail)
}

/// Four inner products sharing the left operand. Each result is
/// bit-identical to `dot(a, b[r])`.
#[inline(always)]
fn dot4(a: &[f64], b: [&[f64]; 4]) -> [f64; 4] {
    let mut acc = [[0.0; LANES]; 4];
    let full = a.len() / LANES * LANES;
    let mut k = 0;
    while k < full {
        let x = &a[k..k + LANES];
        for r in 0..4 {
            let y = &b[r][k..k + LANES];
            for l in 0..LANES {
                acc[r][l] += x[l] * y[l];
            }
        }
        k += LANES;
    }
    let mut out = [0.0; 4];
    for r in 0..4 {
        let tail = a[full..]
            .iter()
            .zip(&b[r][full..])
            .map(|(x, y)| x * y)
            .fold(0.0, |s, v| s + v);
        out[r] = finish(acc[r], tail);
    }
    out
}

struct Scan<'a> {
    data: &'a [f64],
    norms: &'a [f64],
    n: usize,
}

impl Scan<'_> {
    fn block(&self, rows_i: std::ops::Range<usize>, rows_j: std::ops::Range<usize>) -> Best {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the CPU supports AVX2, checked just above.
                return unsafe { self.block_avx2(rows_i, rows_j) };
            }
        }
        self.block_generic(rows_i, rows_j)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn block_avx2(&self, rows_i: std::ops::Range<usize>, rows_j: std::ops::Range<usize>) -> Best {
        self.block_body(rows_i, rows_j)
    }

    fn block_generic(&self, rows_i: std::ops::Range<usize>, rows_j: std::ops::Range<usize>) -> Best {
        self.block_body(rows_i, rows_j)
    }

    // No FMA is enabled on any path, so both instantiations round identically.
    #[inline(always)]
    fn block_body(&self, rows_i: std::ops::Range<usize>, rows_j: std::ops::Range<usize>) -> Best {
        let n = self.n;
        let row = |r: usize| &self.data[r * n..(r + 1) * n];
        let mut best = Best::NONE;
        for i in rows_i {
            let a = row(i);
            let norm_i = self.norms[i];
            let mut j = rows_j.start.max(i + 1);
            while j + 4 <= rows_j.end {
                let dots = dot4(a, [row(j), row(j + 1), row(j + 2), row(j + 3)]);
                for (r, d) in dots.iter().enumerate() {
                    let sq = (norm_i + self.norms[j + r] - 2.0 * d).max(0.0);
                    best.offer(sq, i, j + r);
                }
                j += 4;
            }
            while j < rows_j.end {
                let sq = (norm_i + self.norms[j] - 2.0 * dot(a, row(j))).max(0.0);
                best.offer(sq, i, j);
                j += 1;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DataMatrix {
        DataMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn pair_distance_examples() {
        assert_eq!(qnorm_pow_q_distance(&[0.0, 0.0], &[3.0, 4.0], 2.0).unwrap(), 25.0);
        assert_eq!(qnorm_pow_q_distance(&[0.0, 0.0], &[1.0, 2.0], 1.0).unwrap(), 3.0);
        let a = [1.5, -2.0, 7.25];
        assert_eq!(qnorm_pow_q_distance(&a, &a, 3.3).unwrap(), 0.0);
    }

    #[test]
    fn pair_distance_errors() {
        assert!(matches!(
            qnorm_pow_q_distance(&[0.0], &[1.0, 2.0], 2.0),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            qnorm_pow_q_distance(&[0.0], &[1.0], 0.5),
            Err(Error::Parameter(_))
        ));
        assert!(qnorm_pow_q_distance(&[0.0], &[1.0], f64::NAN).is_err());
    }

    #[test]
    fn max_examples() {
        let x = m(&[&[0.0, 0.0], &[3.0, 4.0], &[6.0, 8.0]]);
        for spec in [DistanceSpec::naive(2.0), DistanceSpec::blocked_gram(1)] {
            let r = max_interpoint(&x, &spec).unwrap();
            assert_eq!(r.value_pow_q, 100.0);
            assert_eq!(r.value, 10.0);
            assert_eq!((r.arg_i, r.arg_j), (0, 2));
        }

        let y = m(&[&[0.0, 0.0], &[1.0, 2.0], &[-1.0, -1.0]]);
        let r = max_interpoint(&y, &DistanceSpec::naive(1.0)).unwrap();
        assert_eq!(r.value_pow_q, 5.0);
        assert_eq!((r.arg_i, r.arg_j), (1, 2));
    }

    #[test]
    fn identical_rows_give_zero() {
        let x = m(&[&[1.0, -3.0, 2.0], &[1.0, -3.0, 2.0]]);
        for spec in [
            DistanceSpec::naive(1.0),
            DistanceSpec::naive(2.5),
            DistanceSpec::blocked_gram(64),
        ] {
            let r = max_interpoint(&x, &spec).unwrap();
            assert_eq!(r.value, 0.0);
            assert_eq!((r.arg_i, r.arg_j), (0, 1));
        }
    }

    #[test]
    fn ties_go_to_smallest_pair() {
        // Unit square corners: both diagonals have squared length 2.
        let x = m(&[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        for spec in [
            DistanceSpec::naive(2.0),
            DistanceSpec::blocked_gram(1),
            DistanceSpec::blocked_gram(3),
        ] {
            let r = max_interpoint(&x, &spec).unwrap();
            assert_eq!((r.arg_i, r.arg_j), (0, 2));
        }
    }

    #[test]
    fn spec_errors() {
        let x = m(&[&[0.0], &[1.0]]);
        let bad = DistanceSpec {
            q: 3.0,
            kernel: Kernel::BlockedGram,
            tile: 8,
        };
        assert!(matches!(max_interpoint(&x, &bad), Err(Error::Spec(_))));
        assert!(matches!(blocked_gram_max_sq(&x, 0), Err(Error::Parameter(_))));
        let one = m(&[&[0.0, 1.0]]);
        assert!(matches!(
            max_interpoint(&one, &DistanceSpec::naive(2.0)),
            Err(Error::InsufficientRows { rows: 1 })
        ));
    }

    #[test]
    fn tile_sizes_agree_exactly() {
        let vals: Vec<f64> = (0..37 * 9)
            .map(|k| ((k * 7919 % 1009) as f64 / 97.0).sin() * 3.0)
            .collect();
        let x = DataMatrix::new(37, 9, vals).unwrap();
        let reference = blocked_gram_max_sq(&x, 64).unwrap();
        for tile in [1, 2, 3, 4, 5, 7, 16, 36, 37, 100] {
            assert_eq!(blocked_gram_max_sq(&x, tile).unwrap(), reference);
        }
        let naive = max_interpoint(&x, &DistanceSpec::naive(2.0)).unwrap();
        assert!((naive.value_pow_q - reference.value_pow_q).abs() <= 1e-9 * naive.value_pow_q);
    }

    #[test]
    fn dot4_matches_dot() {
        let a: Vec<f64> = (0..13).map(|k| (k as f64).cos()).collect();
        let bs: Vec<Vec<f64>> = (0..4)
            .map(|r| (0..13).map(|k| ((k * (r + 2)) as f64).sin()).collect())
            .collect();
        let four = dot4(&a, [&bs[0], &bs[1], &bs[2], &bs[3]]);
        for r in 0..4 {
            assert_eq!(four[r].to_bits(), dot(&a, &bs[r]).to_bits());
        }
    }
}
