//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_vec(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn sym_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn skew_part(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.transpose())) <= tol * max_abs(m).max(1.0)
}

/// Inverse with a determinant-based singularity test.
pub fn inverse(m: &Mat) -> Result<Mat> {
    let n = m.nrows() as i32;
    let det = m.determinant();
    if det.abs() < 1e-14 * m.norm().powi(n) || !det.is_finite() {
        return Err(Error::SingularConfiguration { det });
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::SingularConfiguration { det })
}

/// Symmetric square root and its inverse of an SPD matrix.
pub fn spd_sqrt(m: &Mat) -> Result<(Mat, Mat)> {
    if !is_symmetric(m, 1e-12) {
        return Err(Error::NonPositiveMetric("matrix is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(sym_part(m));
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NonPositiveMetric(format!(
            "eigenvalues {:?} not all positive",
            eig.eigenvalues.as_slice()
        )));
    }
    let v = &eig.eigenvectors;
    let s = Mat::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let si = Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok((v * s * v.transpose(), v * si * v.transpose()))
}

/// Spectral condition number.
pub fn condition_number(m: &Mat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Row-major flattening, used for packing ODE states and CSV columns.
pub fn flatten_row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn from_row_major(n: usize, data: &[f64]) -> Mat {
    Mat::from_row_slice(n, n, data)
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            out.push(p.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(m: &Mat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn pade_low(a: &Mat, b: &[f64]) -> (Mat, Mat) {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let a2 = a * a;
    let mut u = &id * b[1];
    let mut v = &id * b[0];
    let mut pow = id.clone();
    let m = b.len() - 1;
    let mut k = 2;
    while k <= m {
        pow = &pow * &a2;
        v += &pow * b[k];
        if k + 1 <= m {
            u += &pow * b[k + 1];
        }
        k += 2;
    }
    (a * u, v)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant
/// of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let nrm = norm1(a);
    let (u, v, s) = if nrm <= THETA[0] {
        let (u, v) = pade_low(a, &B3);
        (u, v, 0)
    } else if nrm <= THETA[1] {
        let (u, v) = pade_low(a, &B5);
        (u, v, 0)
    } else if nrm <= THETA[2] {
        let (u, v) = pade_low(a, &B7);
        (u, v, 0)
    } else if nrm <= THETA[3] {
        let (u, v) = pade_low(a, &B9);
        (u, v, 0)
    } else {
        let s = ((nrm / THETA[4]).log2().ceil()).max(0.0) as i32;
        let a = a / 2f64.powi(s);
        let b = &B13;
        let a2 = &a * &a;
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
        let u = &a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
        let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
        let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Pade denominator is invertible");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Mat::zeros(3, 3);
        assert!(max_abs(&(expm(&z) - Mat::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn expm_rotation_generator() {
        let t = 0.7;
        let a = Mat::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let e = expm(&a);
        let want = Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!(max_abs(&(e - want)) < 1e-14);
    }

    #[test]
    fn expm_agrees_with_nalgebra_across_norm_regimes() {
        for &scale in &[1e-3, 0.1, 0.5, 1.5, 4.0, 12.0] {
            let a = Mat::from_row_slice(
                3,
                3,
                &[0.3, -1.1, 0.4, 0.8, -0.2, 0.5, -0.6, 0.9, 0.1],
            ) * scale;
            let ours = expm(&a);
            let theirs = a.clone().exp();
            let rel = max_abs(&(&ours - &theirs)) / max_abs(&theirs);
            assert!(rel < 1e-12, "scale {scale}: {rel}");
        }
    }

    #[test]
    fn expm_inverse_pair() {
        let a = Mat::from_row_slice(3, 3, &[1.0, 2.0, -3.0, 0.5, -1.0, 4.0, -2.0, 1.0, 0.0]) * 0.5;
        let prod = expm(&a) * expm(&(-&a));
        assert!(max_abs(&(prod - Mat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn heap_permutations_are_complete() {
        let p = permutations(4);
        assert_eq!(p.len(), 24);
        let mut sorted = p.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 24);
    }

    #[test]
    fn spd_sqrt_squares_back() {
        let m = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (s, si) = spd_sqrt(&m).unwrap();
        assert!(max_abs(&(&s * &s - &m)) < 1e-14);
        assert!(max_abs(&(&s * &si - Mat::identity(2, 2))) < 1e-14);
        assert!(spd_sqrt(&Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
    }
}
