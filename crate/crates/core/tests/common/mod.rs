#![allow(dead_code)]

use std::path::PathBuf;

use num_complex::Complex64 as C64;
use rand::Rng;

use oocsim::circuit::QubitLayout;
use oocsim::linalg::Matrix;

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

pub fn gaussian(rng: &mut impl Rng) -> C64 {
    // Box-Muller
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let v: f64 = rng.random();
    let r = (-2.0 * u.ln()).sqrt();
    let t = std::f64::consts::TAU * v;
    C64::new(r * t.cos(), r * t.sin())
}

/// Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> Matrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
        for c in &cols {
            let p: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= p * y;
            }
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-6 {
            cols.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut m = Matrix::zeros(dim);
    for (c, col) in cols.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            m[(r, c)] = *x;
        }
    }
    m
}

pub fn random_state(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..1usize << n).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Staggered layout with exactly `n >= 4` qubits and at least two rows.
pub fn layout(n: usize) -> QubitLayout {
    let cols = match n {
        _ if n >= 18 && n.is_multiple_of(6) => 6,
        _ if n >= 8 => 4,
        _ => 2,
    };
    let rows = n.div_ceil(cols);
    QubitLayout::sycamore_like(rows, cols)
        .and_then(|l| l.truncated(n))
        .expect("layout")
}
