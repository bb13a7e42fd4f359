//! Seeded random matrices for sweeps, scenario generation and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{expm, skew_part, sym_part, Mat, Vector};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix_entries<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Mat {
    Mat::from_fn(n, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn normal_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn skew<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Mat {
    skew_part(&normal_matrix_entries(rng, n, scale)) * 2.0
}

pub fn symmetric<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Mat {
    sym_part(&normal_matrix_entries(rng, n, scale))
}

pub fn traceless(m: &Mat) -> Mat {
    let n = m.nrows();
    m - Mat::identity(n, n) * (m.trace() / n as f64)
}

/// Rotation exp(K) with K a random skew matrix.
pub fn rotation<R: Rng>(rng: &mut R, n: usize) -> Mat {
    expm(&skew(rng, n, 1.0))
}

/// Element of GL⁺(n) as exp(X) with Gaussian X of the given scale; always
/// positively oriented and well conditioned for moderate scales.
pub fn gl_plus<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Mat {
    expm(&normal_matrix_entries(rng, n, scale))
}

/// Element of GL⁺(n) with distinct, well separated singular values:
/// rotation · diag(e^{qᵃ}) · rotation.
pub fn gl_plus_separated<R: Rng>(rng: &mut R, n: usize, spread: f64) -> Mat {
    let l = rotation(rng, n);
    let r = rotation(rng, n);
    let q: Vec<f64> = (0..n)
        .map(|a| spread * (n as f64 - 1.0 - 2.0 * a as f64) / 2.0 + 0.1 * rng.random::<f64>())
        .collect();
    let d = Mat::from_diagonal(&Vector::from_vec(q.iter().map(|x| x.exp()).collect()));
    l * d * r.transpose()
}

/// Random symmetric positive definite matrix with spectrum in [lo, hi].
pub fn spd<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Mat {
    let o = rotation(rng, n);
    let d = Mat::from_diagonal(&Vector::from_fn(n, |_, _| lo + (hi - lo) * rng.random::<f64>()));
    sym_part(&(&o * d * o.transpose()))
}

/// Random matrix that commutes with its Euclidean transpose: an orthogonal
/// conjugate of a block diagonal of 1×1 reals and 2×2 rotation-scalings.
pub fn euclidean_normal<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Mat {
    let mut d = Mat::zeros(n, n);
    let mut k = 0;
    while k < n {
        if k + 1 < n && rng.random::<bool>() {
            let a: f64 = scale * rng.sample::<f64, _>(StandardNormal);
            let b: f64 = scale * rng.sample::<f64, _>(StandardNormal);
            d[(k, k)] = a;
            d[(k + 1, k + 1)] = a;
            d[(k, k + 1)] = -b;
            d[(k + 1, k)] = b;
            k += 2;
        } else {
            d[(k, k)] = scale * rng.sample::<f64, _>(StandardNormal);
            k += 1;
        }
    }
    let o = rotation(rng, n);
    &o * d * o.transpose()
}
