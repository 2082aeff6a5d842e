//! Scalar kernels, the dense row-major [`Matrix`], and the seeded generator.
//!
//! Every reduction in this module runs in ascending index order with a single
//! accumulator per output, so results are bit-identical from run to run and
//! between the single-vector and batched code paths.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sum of absolute values.
pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x.abs())
}

/// Euclidean norm, accumulated as a plain sum of squares.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

/// Inner product. Callers are responsible for matching lengths.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Cosine similarity clamped to `[-1, 1]`.
///
/// Returns 0 when either vector has zero norm: a silenced activation simply
/// contributes nothing to the sums that use it.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(cosine_from_parts(dot(a, b), l2_norm(a), l2_norm(b)))
}

/// Cosine from a precomputed inner product and the two norms.
#[inline]
pub(crate) fn cosine_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        check_dims(rows, cols)?;
        Ok(Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} elements supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
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

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.cols..(p + 1) * self.cols]
    }

    pub fn row_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.cols..(p + 1) * self.cols]
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.data[p * self.cols + q]
    }

    pub fn set(&mut self, p: usize, q: usize, value: f64) {
        self.data[p * self.cols + q] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self · x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dim(format!(
                "input of length {} for a matrix with {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|p| dot(self.row(p), x)).collect())
    }

    /// `self · x` for every `x` in `inputs`, one output vector per input.
    ///
    /// Register-blocked over rows and inputs, but each output element is
    /// still a single ascending-order accumulation, so the result equals
    /// [`Matrix::apply`] bit for bit.
    pub fn apply_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        const RB: usize = 4;
        const SB: usize = 8;

        if let Some(bad) = inputs.iter().find(|x| x.len() != self.cols) {
            return Err(Error::dim(format!(
                "input of length {} for a matrix with {} columns",
                bad.len(),
                self.cols
            )));
        }
        let (n, m) = self.shape();
        let mut out = vec![vec![0.0; n]; inputs.len()];
        let mut packed = vec![0.0; m * SB];

        for s0 in (0..inputs.len()).step_by(SB) {
            let sb = SB.min(inputs.len() - s0);
            packed.iter_mut().for_each(|v| *v = 0.0);
            for (t, x) in inputs[s0..s0 + sb].iter().enumerate() {
                for (j, &v) in x.iter().enumerate() {
                    packed[j * SB + t] = v;
                }
            }

            let mut p = 0;
            while p + RB <= n {
                let w: [&[f64]; RB] = std::array::from_fn(|r| self.row(p + r));
                let mut acc = [[0.0f64; SB]; RB];
                for (j, xs) in packed.chunks_exact(SB).enumerate() {
                    for r in 0..RB {
                        let wj = w[r][j];
                        for t in 0..SB {
                            acc[r][t] += wj * xs[t];
                        }
                    }
                }
                for r in 0..RB {
                    for t in 0..sb {
                        out[s0 + t][p + r] = acc[r][t];
                    }
                }
                p += RB;
            }
            for p in p..n {
                let w = self.row(p);
                let mut acc = [0.0f64; SB];
                for (j, xs) in packed.chunks_exact(SB).enumerate() {
                    for t in 0..SB {
                        acc[t] += w[j] * xs[t];
                    }
                }
                for (row, v) in out[s0..s0 + sb].iter_mut().zip(&acc) {
                    row[p] = *v;
                }
            }
        }
        Ok(out)
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::dim(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// Deterministic random source.
///
/// The stream is ChaCha with 8 rounds, keyed through `seed_from_u64` of
/// `rand_core` (a PCG32 expansion of the 64-bit seed into the 256-bit key).
/// Uniform doubles take the top 53 bits of a `u64`; bounded integers use
/// Lemire's widening-multiply rejection method; normals use Box-Muller with
/// the sine branch cached for the next call.
#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. `bound` must be nonzero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let product = u128::from(self.next_u64()) * u128::from(bound);
            if (product as u64) >= threshold {
                return (product >> 64) as u64;
            }
        }
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Fisher-Yates, walking from the last element down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Child seed for an independent stream, via the SplitMix64 finalizer.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gaussian weights with mean 0 and variance `2 / rows`, drawn row-major.
///
/// `rows` is the layer's output width.
pub fn kaiming_init(rows: usize, cols: usize, rng: &mut SeededRng) -> Result<Matrix> {
    check_dims(rows, cols)?;
    let std = (2.0 / rows as f64).sqrt();
    let data = (0..rows * cols).map(|_| std * rng.normal()).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Unit-norm Gaussian vector, handy for synthetic instances.
pub fn random_unit_vector(len: usize, rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
        let norm = l2_norm(&v);
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
