//! Dense numeric kernels shared by every other module.
//!
//! Storage is `f32`; reductions (dot products, softmax denominators, entropies, norms)
//! accumulate in `f64`. All loops run in a fixed order so results are bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Row-stochastic tolerance used when validating probability rows.
pub const STOCHASTIC_TOL: f64 = 1e-5;

/// Probabilities below this are treated as exact zeros in entropy (`0 log 0 = 0`).
const ENTROPY_ZERO: f64 = 1e-12;

/// Norms below this make cosine similarity collapse to zero.
const COSINE_NORM_FLOOR: f64 = 1e-12;

/// Row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "Matrix::new",
                format!(
                    "{rows}x{cols} needs {} values, got {}",
                    rows * cols,
                    data.len()
                ),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dims(
                    "Matrix::from_rows",
                    format!("row {i} has {} values, expected {cols}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f32]> {
        // chunks_exact panics on a zero chunk size
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Copies the listed rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Copies a contiguous block of columns `[start, start + width)`.
    pub fn column_block(&self, start: usize, width: usize) -> Self {
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + width]);
        }
        Self {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        matmul(self, rhs)
    }
}

/// Matrix product with a fixed `i, j, k` loop order and `f64` accumulation.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::dims(
            "matmul",
            format!("{}x{} * {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let (n, inner, m) = (a.rows, a.cols, b.cols);
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        let a_row = a.row(i);
        for j in 0..m {
            let mut acc = 0.0f64;
            for (k, &av) in a_row.iter().enumerate().take(inner) {
                acc += av as f64 * b.data[k * m + j] as f64;
            }
            out.data[i * m + j] = acc as f32;
        }
    }
    Ok(out)
}

/// Numerically stabilised softmax of each row.
pub fn row_softmax(logits: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(logits.rows, logits.cols);
    for r in 0..logits.rows {
        softmax_into(logits.row(r), out.row_mut(r));
    }
    out
}

/// Softmax of a single slice, written into `out`.
pub fn softmax_into(logits: &[f32], out: &mut [f32]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let mut denom = 0.0f64;
    for &v in logits {
        denom += (v as f64 - max).exp();
    }
    for (o, &v) in out.iter_mut().zip(logits) {
        *o = ((v as f64 - max).exp() / denom) as f32;
    }
}

/// Fails unless every row is non-negative and sums to one within [`STOCHASTIC_TOL`].
pub fn check_row_stochastic(probs: &Matrix) -> Result<()> {
    for (r, row) in probs.row_iter().enumerate() {
        let mut sum = 0.0f64;
        let mut min = f64::INFINITY;
        for &p in row {
            let p = p as f64;
            sum += p;
            min = min.min(p);
        }
        if !sum.is_finite() || (sum - 1.0).abs() > STOCHASTIC_TOL || min < 0.0 {
            return Err(Error::NotStochastic { row: r, sum, min });
        }
    }
    Ok(())
}

/// Negative entropy `sum_j p_j log p_j` of every row.
///
/// Values lie in `[-log(cols), 0]`; entries below `1e-12` contribute nothing.
pub fn row_neg_entropy(probs: &Matrix) -> Result<Vec<f64>> {
    check_row_stochastic(probs)?;
    Ok(probs
        .row_iter()
        .map(|row| {
            row.iter()
                .map(|&p| p as f64)
                .filter(|&p| p >= ENTROPY_ZERO)
                .map(|p| p * p.ln())
                .sum::<f64>()
        })
        .collect())
}

/// Cosine similarity; zero when either vector is (numerically) zero.
///
/// Panics if the slices differ in length.
pub fn cosine_sim(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine_sim on vectors of unequal length");
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    if na < COSINE_NORM_FLOOR || nb < COSINE_NORM_FLOOR {
        return 0.0;
    }
    dot / (na * nb)
}

/// Deterministic random stream backed by ChaCha8.
///
/// ChaCha8 output depends only on the seed, so streams are identical on every platform.
/// Gaussian samples use `rand_distr`'s ziggurat sampler.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for a named purpose, derived from this generator's seed.
    pub fn substream(&self, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream);
        Self {
            seed: self.seed,
            inner,
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f32 {
        self.inner.random::<f32>()
    }

    /// Uniform integer in `[0, bound)`.
    pub fn below(&mut self, bound: usize) -> usize {
        self.inner.random_range(0..bound)
    }

    pub fn normal(&mut self) -> f32 {
        let z: f64 = self.inner.sample(StandardNormal);
        z as f32
    }

    pub fn gaussian_vec(&mut self, len: usize, std: f32) -> Vec<f32> {
        (0..len).map(|_| self.normal() * std).collect()
    }

    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize, std: f32) -> Matrix {
        Matrix {
            rows,
            cols,
            data: self.gaussian_vec(rows * cols, std),
        }
    }
}
