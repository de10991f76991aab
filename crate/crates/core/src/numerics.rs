//! Numerical primitives shared by the rest of the crate: stable reductions,
//! a small row-major matrix, and a seeded random stream keyed by a label path.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default guard for vector normalization.
pub const NORM_EPSILON: f64 = 1e-12;

/// Bound applied to cosines before `acos`.
pub const ACOS_CLAMP: f64 = 1.0 - 1e-7;

/// `ln Σ exp(v_i)`, shifted by the maximum so large inputs cannot overflow.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::contract("log_sum_exp of an empty sequence"));
    }
    Ok(log_sum_exp_unchecked(values))
}

pub(crate) fn log_sum_exp_unchecked(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns `v / max(‖v‖₂, epsilon)`.
pub fn l2_normalize(v: &[f64], epsilon: f64) -> Vec<f64> {
    let denom = l2_norm(v).max(epsilon);
    v.iter().map(|x| x / denom).collect()
}

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish_non_exhaustive()
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::contract(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self · otherᵀ`, i.e. every row of `self` dotted with every row of `other`.
    pub fn matmul_transpose(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::contract(format!(
                "matmul_transpose: {}x{} against {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            let dst = out.row_mut(i);
            for (j, d) in dst.iter_mut().enumerate() {
                *d = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::contract(format!(
                "matmul: {}x{} against {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let dst = out.row_mut(i);
            for (p, &a_ip) in a.iter().enumerate() {
                if a_ip == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(p)) {
                    *d += a_ip * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn transpose_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::contract(format!(
                "transpose_matmul: {}x{} against {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for n in 0..self.rows {
            let a = self.row(n);
            let b = other.row(n);
            for (i, &a_ni) in a.iter().enumerate() {
                if a_ni == 0.0 {
                    continue;
                }
                for (d, &b_nj) in out.row_mut(i).iter_mut().zip(b) {
                    *d += a_ni * b_nj;
                }
            }
        }
        Ok(out)
    }
}

/// Deterministic random stream identified by a seed and a label path such as
/// `"epoch3/candidate1/shuffle"`.
///
/// The value is immutable. [`RngStream::rng`] hands out a fresh generator whose
/// key is derived from `(seed, label)`, so two holders of equal streams draw
/// identical sequences no matter which thread they run on.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    label: String,
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        RngStream {
            seed,
            label: label.into(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Sub-stream with `segment` appended to the label path.
    pub fn child(&self, segment: impl AsRef<str>) -> RngStream {
        let label = if self.label.is_empty() {
            segment.as_ref().to_owned()
        } else {
            format!("{}/{}", self.label, segment.as_ref())
        };
        RngStream {
            seed: self.seed,
            label,
        }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(self.label.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(key)
    }
}

/// `n` draws from `N(mu, sigma²)`.
pub fn sample_gaussian(stream: &RngStream, mu: f64, sigma: f64, n: usize) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::contract(format!("sigma must be > 0, got {sigma}")));
    }
    let mut rng = stream.rng();
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            mu + sigma * z
        })
        .collect())
}

/// Formats like C's `%.17g`: 17 significant digits, which round-trips every `f64`.
pub fn fmt_g17(x: f64) -> String {
    const PRECISION: i32 = 17;
    if x.is_nan() {
        return "nan".to_owned();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_owned();
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = strip_trailing_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        strip_trailing_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn strip_trailing_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_sum_exp_small_cases() {
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let big = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((big - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!(matches!(log_sum_exp(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn log_sum_exp_matches_naive_sum() {
        let stream = RngStream::new(7, "lse");
        let v = sample_gaussian(&stream, 0.0, 2.0, 10).unwrap();
        let naive = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        let stable = log_sum_exp(&v).unwrap();
        assert!(((stable - naive) / naive).abs() < 1e-12);
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(l2_normalize(&[3.0, 4.0], NORM_EPSILON), vec![0.6, 0.8]);
        assert_eq!(l2_normalize(&[0.0, 0.0], NORM_EPSILON), vec![0.0, 0.0]);
        let v = sample_gaussian(&RngStream::new(1, "v"), 0.0, 1.0, 17).unwrap();
        assert!((l2_norm(&l2_normalize(&v, NORM_EPSILON)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_contract_and_determinism() {
        let s = RngStream::new(3, "g");
        assert!(sample_gaussian(&s, 0.0, 0.0, 3).is_err());
        assert!(sample_gaussian(&s, 0.0, -1.0, 3).is_err());
        assert!(sample_gaussian(&s, 0.0, 1.0, 0).unwrap().is_empty());
        assert_eq!(
            sample_gaussian(&s, 0.5, 1.0, 64).unwrap(),
            sample_gaussian(&s, 0.5, 1.0, 64).unwrap()
        );
        assert_ne!(
            sample_gaussian(&s, 0.0, 1.0, 8).unwrap(),
            sample_gaussian(&s.child("other"), 0.0, 1.0, 8).unwrap()
        );
    }

    #[test]
    fn gaussian_moments() {
        let draws = sample_gaussian(&RngStream::new(11, "moments"), 0.0, 1.0, 100_000).unwrap();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn child_labels_compose() {
        let s = RngStream::new(1, "").child("epoch3").child("shuffle");
        assert_eq!(s.label(), "epoch3/shuffle");
        assert_eq!(s, RngStream::new(1, "epoch3/shuffle"));
    }

    #[test]
    fn matmul_variants_agree() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.as_slice(), &[4.0, 5.0, 10.0, 11.0]);
        let bt = DenseMatrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(a.matmul_transpose(&bt).unwrap(), ab);
        let at = DenseMatrix::from_rows(&[vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(at.transpose_matmul(&b).unwrap(), ab);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn g17_format() {
        assert_eq!(fmt_g17(0.5), "0.5");
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-73128.0), "-73128");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(1e300), "1.0000000000000001e+300");
        assert_eq!(fmt_g17(-0.0), "-0");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(fmt_g17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn log_sum_exp_finite_for_large_magnitudes(v in proptest::collection::vec(-1e6f64..1e6, 1..20)) {
            let r = log_sum_exp(&v).unwrap();
            prop_assert!(r.is_finite());
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r >= max && r <= max + (v.len() as f64).ln() + 1e-9);
        }

        #[test]
        fn normalize_is_idempotent(v in proptest::collection::vec(-100.0f64..100.0, 1..16)) {
            prop_assume!(l2_norm(&v) > 1e-6);
            let once = l2_normalize(&v, NORM_EPSILON);
            let twice = l2_normalize(&once, NORM_EPSILON);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
