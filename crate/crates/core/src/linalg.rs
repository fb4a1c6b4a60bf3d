//! Small dense complex matrices and the strided kernel that applies them to
//! amplitude vectors.
//!
//! Conventions used throughout the crate: a matrix acting on operands
//! `[q_0, .., q_{k-1}]` indexes its rows and columns with `q_0` as the most
//! significant bit. Amplitude vectors index basis states with bit `p` holding
//! the value of whatever sits at position `p` (qubit `p` for full states).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries; panics if the length is not a square.
    pub fn from_rows(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim, "matrix data is not {dim}x{dim}");
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of qubits the matrix acts on.
    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    /// Kronecker product `self ⊗ rhs`; `self` occupies the more significant bits.
    pub fn kron(&self, rhs: &Matrix) -> Matrix {
        let (a, b) = (self.dim, rhs.dim);
        let n = a * b;
        let mut out = Matrix::zeros(n);
        for i in 0..a {
            for j in 0..a {
                let s = self.data[i * a + j];
                for k in 0..b {
                    for l in 0..b {
                        out.data[(i * b + k) * n + (j * b + l)] = s * rhs.data[k * b + l];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Matrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |U†U - I|` over all entries.
    pub fn unitarity_error(&self) -> f64 {
        self.dagger()
            .matmul(self)
            .max_abs_diff(&Matrix::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Embeds `gate` (acting on `positions`, given as operand slots of this
    /// wider register with slot 0 most significant) into a `2^width` matrix.
    pub fn embed(gate: &Matrix, positions: &[usize], width: usize) -> Matrix {
        let dim = 1usize << width;
        let bits: Vec<usize> = positions.iter().map(|&p| width - 1 - p).collect();
        let mut out = Matrix::identity(dim);
        let mut column = vec![ZERO; dim];
        for c in 0..dim {
            for (r, v) in column.iter_mut().enumerate() {
                *v = out.data[r * dim + c];
            }
            apply_matrix(&mut column, &bits, gate);
            for (r, v) in column.iter().enumerate() {
                out.data[r * dim + c] = *v;
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

/// Offsets of the `2^k` sub-vector entries addressed by `bits`, where
/// `bits[0]` is the most significant operand of the matrix.
pub(crate) fn operand_offsets(bits: &[usize]) -> Vec<usize> {
    let k = bits.len();
    (0..1usize << k)
        .map(|s| {
            bits.iter()
                .enumerate()
                .filter(|(i, _)| (s >> (k - 1 - i)) & 1 == 1)
                .fold(0, |acc, (_, &b)| acc | (1 << b))
        })
        .collect()
}

/// Multiplies `matrix` into `amps` on the index bits `bits`.
///
/// For each assignment of the remaining bits the `2^k` sub-vector is gathered,
/// multiplied and scattered back. `bits[0]` maps to the most significant matrix
/// operand.
pub fn apply_matrix(amps: &mut [C64], bits: &[usize], matrix: &Matrix) {
    let k = bits.len();
    assert_eq!(matrix.dim(), 1usize << k, "matrix does not match {k} operand bits");
    assert!(amps.len().is_power_of_two());
    let mask = bits.iter().fold(0usize, |m, &b| m | (1 << b));
    debug_assert_eq!(mask.count_ones() as usize, k, "repeated operand bit");
    debug_assert!(mask < amps.len());
    let offsets = operand_offsets(bits);
    match k {
        0 => {
            let s = matrix.as_slice()[0];
            amps.iter_mut().for_each(|a| *a *= s);
        }
        1 => apply_fixed::<2>(amps, mask, &offsets, matrix.as_slice()),
        2 => apply_fixed::<4>(amps, mask, &offsets, matrix.as_slice()),
        3 => apply_fixed::<8>(amps, mask, &offsets, matrix.as_slice()),
        4 => apply_fixed::<16>(amps, mask, &offsets, matrix.as_slice()),
        5 => apply_fixed::<32>(amps, mask, &offsets, matrix.as_slice()),
        _ => apply_dynamic(amps, mask, &offsets, matrix.as_slice()),
    }
}

/// Every index with the `mask` bits clear, in increasing order.
#[inline]
fn bases(len: usize, mask: usize) -> impl Iterator<Item = usize> {
    let count = len >> mask.count_ones();
    std::iter::successors(Some(0usize), move |&b| Some(((b | mask) + 1) & !mask)).take(count)
}

fn apply_fixed<const D: usize>(amps: &mut [C64], mask: usize, offsets: &[usize], m: &[C64]) {
    let offsets: [usize; D] = offsets.try_into().expect("offset count");
    let m = &m[..D * D];
    let mut buf = [ZERO; D];
    for base in bases(amps.len(), mask) {
        for (b, &o) in buf.iter_mut().zip(&offsets) {
            *b = amps[base | o];
        }
        for (r, &o) in offsets.iter().enumerate() {
            let row = &m[r * D..(r + 1) * D];
            let mut acc = ZERO;
            for (x, y) in row.iter().zip(&buf) {
                acc += x * y;
            }
            amps[base | o] = acc;
        }
    }
}

fn apply_dynamic(amps: &mut [C64], mask: usize, offsets: &[usize], m: &[C64]) {
    let dim = offsets.len();
    let mut buf = vec![ZERO; dim];
    for base in bases(amps.len(), mask) {
        for (b, &o) in buf.iter_mut().zip(offsets) {
            *b = amps[base | o];
        }
        for (r, &o) in offsets.iter().enumerate() {
            let row = &m[r * dim..(r + 1) * dim];
            let mut acc = ZERO;
            for (x, y) in row.iter().zip(&buf) {
                acc += x * y;
            }
            amps[base | o] = acc;
        }
    }
}

/// Maps a label-space offset to a tensor offset with per-byte lookup tables.
pub(crate) struct OffsetTable {
    tables: Vec<Vec<usize>>,
}

impl OffsetTable {
    pub(crate) fn new(strides: &[usize]) -> Self {
        let tables = strides
            .chunks(8)
            .map(|chunk| {
                (0..1usize << chunk.len())
                    .map(|x| {
                        chunk
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| (x >> i) & 1 == 1)
                            .map(|(_, s)| s)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Self { tables }
    }

    #[inline]
    pub(crate) fn offset(&self, x: usize) -> usize {
        self.tables
            .iter()
            .enumerate()
            .map(|(c, t)| t[(x >> (8 * c)) & 0xff])
            .sum()
    }
}

/// Squared 2-norm of an amplitude vector.
pub fn norm_sqr(amps: &[C64]) -> f64 {
    amps.iter().map(|z| z.norm_sqr()).sum()
}
