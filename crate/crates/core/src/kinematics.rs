//! Configuration-space geometry: affine velocities, deformation tensors,
//! polar and two-polar decompositions, volume measures, spin and vorticity.
//!
//! Metrics enter through their symmetric square roots: a linear map φ is
//! carried to orthonormal coordinates as φ' = g^{1/2} φ η^{-1/2}, where all
//! matrix formulas take their Euclidean form.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, inverse, max_abs, permutations, spd_sqrt, sym_part, Mat, Vector};

/// Material metric η and spatial metric g, with cached roots and inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPair {
    pub eta: Mat,
    pub g: Mat,
    eta_inv: Mat,
    g_inv: Mat,
    eta_sqrt: Mat,
    eta_isqrt: Mat,
    g_sqrt: Mat,
    g_isqrt: Mat,
}

impl MetricPair {
    pub fn new(eta: Mat, g: Mat) -> Result<Self> {
        if eta.nrows() != g.nrows() || !eta.is_square() || !g.is_square() {
            return Err(Error::DimensionMismatch("metrics must be square and equal-sized".into()));
        }
        let (eta_sqrt, eta_isqrt) = spd_sqrt(&eta)?;
        let (g_sqrt, g_isqrt) = spd_sqrt(&g)?;
        let eta_inv = &eta_isqrt * &eta_isqrt;
        let g_inv = &g_isqrt * &g_isqrt;
        Ok(Self { eta, g, eta_inv, g_inv, eta_sqrt, eta_isqrt, g_sqrt, g_isqrt })
    }

    pub fn identity(n: usize) -> Self {
        let id = Mat::identity(n, n);
        Self {
            eta: id.clone(),
            g: id.clone(),
            eta_inv: id.clone(),
            g_inv: id.clone(),
            eta_sqrt: id.clone(),
            eta_isqrt: id.clone(),
            g_sqrt: id.clone(),
            g_isqrt: id,
        }
    }

    pub fn dim(&self) -> usize {
        self.eta.nrows()
    }

    pub fn eta_inv(&self) -> &Mat {
        &self.eta_inv
    }

    pub fn g_inv(&self) -> &Mat {
        &self.g_inv
    }

    /// φ' = g^{1/2} φ η^{-1/2}.
    pub fn to_orthonormal(&self, phi: &Mat) -> Mat {
        &self.g_sqrt * phi * &self.eta_isqrt
    }

    pub fn from_orthonormal(&self, phi_o: &Mat) -> Mat {
        &self.g_isqrt * phi_o * &self.eta_sqrt
    }

    /// Spatial mixed tensor (e.g. Σ, Ω) to orthonormal coordinates.
    pub fn spatial_to_orthonormal(&self, m: &Mat) -> Mat {
        &self.g_sqrt * m * &self.g_isqrt
    }

    pub fn spatial_from_orthonormal(&self, m: &Mat) -> Mat {
        &self.g_isqrt * m * &self.g_sqrt
    }

    /// Material mixed tensor (e.g. Σ̂, Ω̂) to orthonormal coordinates.
    pub fn material_to_orthonormal(&self, m: &Mat) -> Mat {
        &self.eta_sqrt * m * &self.eta_isqrt
    }

    pub fn material_from_orthonormal(&self, m: &Mat) -> Mat {
        &self.eta_isqrt * m * &self.eta_sqrt
    }

    /// Orthonormal frame matrix to a g-orthonormal frame.
    pub fn spatial_frame(&self, l_o: &Mat) -> Mat {
        &self.g_isqrt * l_o
    }

    pub fn spatial_frame_to_orthonormal(&self, l: &Mat) -> Mat {
        &self.g_sqrt * l
    }

    pub fn material_frame(&self, r_o: &Mat) -> Mat {
        &self.eta_isqrt * r_o
    }

    pub fn material_frame_to_orthonormal(&self, r: &Mat) -> Mat {
        &self.eta_sqrt * r
    }
}

/// Point of the configuration space: internal map φ and centre of mass x.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub phi: Mat,
    pub x: Vector,
}

impl Configuration {
    pub fn new(phi: Mat, x: Vector) -> Result<Self> {
        if !phi.is_square() || phi.nrows() != x.len() {
            return Err(Error::DimensionMismatch("phi must be n×n and x of length n".into()));
        }
        let det = phi.determinant();
        if !(det > 0.0) {
            return Err(Error::NegativeOrientation(det));
        }
        Ok(Self { phi, x })
    }

    /// Internal configuration with x at the origin.
    pub fn internal(phi: Mat) -> Result<Self> {
        let n = phi.nrows();
        Self::new(phi, Vector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityState {
    pub phi_dot: Mat,
    pub v: Vector,
    pub omega: Mat,
    pub omega_hat: Mat,
    pub v_hat: Vector,
    pub phi_condition: f64,
}

fn check_invertible(phi: &Mat) -> Result<Mat> {
    let n = phi.nrows() as i32;
    let det = phi.determinant();
    if det.abs() < 1e-14 * phi.norm().powi(n) {
        return Err(Error::SingularConfiguration { det });
    }
    inverse(phi)
}

/// Ω = φ̇φ⁻¹, Ω̂ = φ⁻¹φ̇, v̂ = φ⁻¹v.
pub fn affine_velocities(phi: &Mat, phi_dot: &Mat, v: &Vector) -> Result<VelocityState> {
    let inv = check_invertible(phi)?;
    Ok(VelocityState {
        omega: phi_dot * &inv,
        omega_hat: &inv * phi_dot,
        v_hat: &inv * v,
        phi_dot: phi_dot.clone(),
        v: v.clone(),
        phi_condition: condition_number(phi),
    })
}

/// Velocity state rebuilt from Ω (spatial affine velocity).
pub fn velocities_from_omega(phi: &Mat, omega: &Mat, v: &Vector) -> Result<VelocityState> {
    affine_velocities(phi, &(omega * phi), v)
}

/// Velocity state rebuilt from Ω̂ (co-moving affine velocity).
pub fn velocities_from_omega_hat(phi: &Mat, omega_hat: &Mat, v: &Vector) -> Result<VelocityState> {
    affine_velocities(phi, &(phi * omega_hat), v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationState {
    pub green: Mat,
    pub cauchy: Mat,
    pub green_inv: Mat,
    pub cauchy_inv: Mat,
    pub lagrange: Mat,
    pub euler: Mat,
    pub lambda: Vector,
    pub stretch: Vector,
    pub q: Vector,
    /// η⁻¹G, kept for the trace chart.
    pub green_hat: Mat,
    /// g⁻¹C.
    pub cauchy_hat: Mat,
}

pub fn deformation_tensors(phi: &Mat, metrics: &MetricPair) -> Result<DeformationState> {
    let inv = check_invertible(phi)?;
    let green = sym_part(&(phi.transpose() * &metrics.g * phi));
    let cauchy = sym_part(&(inv.transpose() * &metrics.eta * &inv));
    let green_inv = sym_part(&(&inv * metrics.g_inv() * inv.transpose()));
    let cauchy_inv = sym_part(&(phi * metrics.eta_inv() * phi.transpose()));
    let lagrange = (&green - &metrics.eta) * 0.5;
    let euler = (&metrics.g - &cauchy) * 0.5;
    let sv = metrics.to_orthonormal(phi).svd(false, false).singular_values;
    let mut s: Vec<f64> = sv.iter().cloned().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let stretch = Vector::from_vec(s);
    let lambda = stretch.map(|x| x * x);
    let q = stretch.map(f64::ln);
    Ok(DeformationState {
        green_hat: metrics.eta_inv() * &green,
        cauchy_hat: metrics.g_inv() * &cauchy,
        green,
        cauchy,
        green_inv,
        cauchy_inv,
        lagrange,
        euler,
        lambda,
        stretch,
        q,
    })
}

/// Chart in which deformation invariants are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InvariantBasis {
    TraceG,
    TraceC,
    Eigen,
}

pub fn deformation_invariants(defo: &DeformationState, basis: InvariantBasis) -> Vector {
    let n = defo.lambda.len();
    match basis {
        InvariantBasis::Eigen => defo.lambda.clone(),
        InvariantBasis::TraceG | InvariantBasis::TraceC => {
            let m = if basis == InvariantBasis::TraceG { &defo.green_hat } else { &defo.cauchy_hat };
            let mut pow = Mat::identity(n, n);
            Vector::from_iterator(
                n,
                (0..n).map(|_| {
                    pow = &pow * m;
                    pow.trace()
                }),
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarFactors {
    /// (η, g)-isometry.
    pub u: Mat,
    /// η-symmetric positive map of the material space.
    pub a_sym: Mat,
    /// g-symmetric positive map of the physical space.
    pub b_sym: Mat,
}

pub fn polar_decompose(phi: &Mat, metrics: &MetricPair) -> Result<PolarFactors> {
    check_invertible(phi)?;
    let det = phi.determinant();
    if det <= 0.0 {
        return Err(Error::NegativeOrientation(det));
    }
    let phi_o = metrics.to_orthonormal(phi);
    let gram = SymmetricEigen::new(sym_part(&(phi_o.transpose() * &phi_o)));
    let v = &gram.eigenvectors;
    let a_o = v * Mat::from_diagonal(&gram.eigenvalues.map(f64::sqrt)) * v.transpose();
    let a_o_inv = v * Mat::from_diagonal(&gram.eigenvalues.map(|l| 1.0 / l.sqrt())) * v.transpose();
    let u_o = &phi_o * &a_o_inv;
    let u = &metrics.g_isqrt * &u_o * &metrics.eta_sqrt;
    let a_sym = metrics.material_from_orthonormal(&a_o);
    let b_sym = &u * &a_sym * inverse(&u)?;
    Ok(PolarFactors { u, a_sym, b_sym })
}

/// φ = L·diag(Q)·R⁻¹ with g- and η-orthonormal positively oriented frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPolarFactors {
    pub l: Mat,
    pub d: Vector,
    pub r: Mat,
    /// Block sizes of coincident stretchings, `None` for a simple spectrum.
    pub degenerate: Option<Vec<usize>>,
}

/// Tolerance on |qᵃ − qᵇ| below which the spectrum is reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

impl TwoPolarFactors {
    pub fn q(&self) -> Vector {
        self.d.map(f64::ln)
    }

    pub fn reconstruct(&self, metrics: &MetricPair) -> Mat {
        // R⁻¹ = Rᵀη for an η-orthonormal frame.
        &self.l * Mat::from_diagonal(&self.d) * self.r.transpose() * &metrics.eta
    }
}

fn multiplicity_pattern(q: &[f64]) -> Option<Vec<usize>> {
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| q[b].partial_cmp(&q[a]).unwrap());
    let mut blocks = vec![1usize];
    for w in idx.windows(2) {
        if (q[w[0]] - q[w[1]]).abs() < DEGENERACY_TOL {
            *blocks.last_mut().unwrap() += 1;
        } else {
            blocks.push(1);
        }
    }
    if blocks.iter().all(|&b| b == 1) {
        None
    } else {
        Some(blocks)
    }
}

pub fn two_polar_decompose(
    phi: &Mat,
    metrics: &MetricPair,
    continuity_hint: Option<&TwoPolarFactors>,
) -> Result<TwoPolarFactors> {
    check_invertible(phi)?;
    let det = phi.determinant();
    if det <= 0.0 {
        return Err(Error::NegativeOrientation(det));
    }
    let n = phi.nrows();
    let phi_o = metrics.to_orthonormal(phi);
    let svd = phi_o.svd(true, true);
    let u = svd.u.unwrap();
    let v = svd.v_t.unwrap().transpose();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let mut l_o = Mat::zeros(n, n);
    let mut r_o = Mat::zeros(n, n);
    let mut d = Vector::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        l_o.set_column(k, &u.column(j));
        r_o.set_column(k, &v.column(j));
        d[k] = s[j];
    }
    if l_o.determinant() < 0.0 {
        // det φ' > 0 forces det L' and det R' to share a sign.
        let c = n - 1;
        let lc = -l_o.column(c);
        let rc = -r_o.column(c);
        l_o.set_column(c, &lc);
        r_o.set_column(c, &rc);
    }
    if let Some(hint) = continuity_hint {
        let lh = metrics.spatial_frame_to_orthonormal(&hint.l);
        let rh = metrics.material_frame_to_orthonormal(&hint.r);
        let overlap = l_o.transpose() * lh + r_o.transpose() * rh;
        let (perm, signs) = closest_k_plus(&overlap);
        let (l_new, r_new, d_new) = apply_signed_permutation(&l_o, &r_o, &d, &perm, &signs);
        l_o = l_new;
        r_o = r_new;
        d = d_new;
    }
    let q: Vec<f64> = d.iter().map(|x| x.ln()).collect();
    Ok(TwoPolarFactors {
        l: metrics.spatial_frame(&l_o),
        r: metrics.material_frame(&r_o),
        degenerate: multiplicity_pattern(&q),
        d,
    })
}

/// Element of K⁺ (signed permutation, det +1) maximising Σ_b s_b·C[π(b), b].
fn closest_k_plus(c: &Mat) -> (Vec<usize>, Vec<f64>) {
    let n = c.nrows();
    let mut best = (f64::NEG_INFINITY, vec![], vec![]);
    for perm in permutations(n) {
        let mut signs: Vec<f64> = (0..n).map(|b| if c[(perm[b], b)] >= 0.0 { 1.0 } else { -1.0 }).collect();
        let mut score: f64 = (0..n).map(|b| c[(perm[b], b)].abs()).sum();
        if permutation_parity(&perm) * signs.iter().product::<f64>() < 0.0 {
            let (weak, val) = (0..n)
                .map(|b| (b, c[(perm[b], b)].abs()))
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .unwrap();
            signs[weak] = -signs[weak];
            score -= 2.0 * val;
        }
        if score > best.0 {
            best = (score, perm, signs);
        }
    }
    (best.1, best.2)
}

fn permutation_parity(p: &[usize]) -> f64 {
    let mut seen = vec![false; p.len()];
    let mut parity = 1.0;
    for i in 0..p.len() {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            parity = -parity;
        }
    }
    parity
}

fn apply_signed_permutation(l: &Mat, r: &Mat, d: &Vector, perm: &[usize], signs: &[f64]) -> (Mat, Mat, Vector) {
    let n = d.len();
    let mut l2 = Mat::zeros(n, n);
    let mut r2 = Mat::zeros(n, n);
    let mut d2 = Vector::zeros(n);
    for b in 0..n {
        l2.set_column(b, &(l.column(perm[b]) * signs[b]));
        r2.set_column(b, &(r.column(perm[b]) * signs[b]));
        d2[b] = d[perm[b]];
    }
    (l2, r2, d2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeRatio {
    pub delta: f64,
    pub alpha_vol: f64,
    pub d_lin: f64,
    pub q_mean: f64,
}

pub fn volume_ratio(phi: &Mat, metrics: &MetricPair) -> Result<VolumeRatio> {
    let n = phi.nrows() as f64;
    let delta = (metrics.g.determinant().sqrt() / metrics.eta.determinant().sqrt()) * phi.determinant();
    if !(delta > 0.0) {
        return Err(Error::NegativeOrientation(delta));
    }
    let alpha_vol = delta.ln();
    Ok(VolumeRatio { delta, alpha_vol, d_lin: delta.powf(1.0 / n), q_mean: alpha_vol / n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinVorticity {
    pub s: Mat,
    pub v: Mat,
    pub norm_s: f64,
    pub norm_v: f64,
}

/// S = Σ − g⁻¹Σᵀg and V = Σ̂ − η⁻¹Σ̂ᵀη, with ‖X‖² = −Tr(X²)/2.
pub fn spin_vorticity(sigma: &Mat, sigma_hat: &Mat, metrics: &MetricPair) -> SpinVorticity {
    let s = sigma - metrics.g_inv() * sigma.transpose() * &metrics.g;
    let v = sigma_hat - metrics.eta_inv() * sigma_hat.transpose() * &metrics.eta;
    let norm_s = (-(&s * &s).trace() / 2.0).max(0.0).sqrt();
    let norm_v = (-(&v * &v).trace() / 2.0).max(0.0).sqrt();
    SpinVorticity { s, v, norm_s, norm_v }
}

/// Relative Frobenius reconstruction error of a two-polar factorisation.
pub fn two_polar_error(phi: &Mat, f: &TwoPolarFactors, metrics: &MetricPair) -> f64 {
    (phi - f.reconstruct(metrics)).norm() / phi.norm()
}

/// Largest deviation of LᵀgL and RᵀηR from the identity.
pub fn frame_orthonormality_error(f: &TwoPolarFactors, metrics: &MetricPair) -> f64 {
    let n = f.d.len();
    let id = Mat::identity(n, n);
    max_abs(&(f.l.transpose() * &metrics.g * &f.l - &id)).max(max_abs(&(f.r.transpose() * &metrics.eta * &f.r - &id)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> Mat {
        Mat::from_diagonal(&Vector::from_row_slice(v))
    }

    #[test]
    fn diagonal_stretch_invariants() {
        let m = MetricPair::identity(2);
        let d = deformation_tensors(&diag(&[2.0, 3.0]), &m).unwrap();
        assert!((d.lambda[0] - 9.0).abs() < 1e-14 && (d.lambda[1] - 4.0).abs() < 1e-14);
        assert!((d.q[0] - 3f64.ln()).abs() < 1e-14 && (d.q[1] - 2f64.ln()).abs() < 1e-14);
        let tr = deformation_invariants(&d, InvariantBasis::TraceG);
        assert!((tr[0] - 13.0).abs() < 1e-12 && (tr[1] - 97.0).abs() < 1e-12);
    }

    #[test]
    fn undeformed_state() {
        let m = MetricPair::identity(3);
        let d = deformation_tensors(&Mat::identity(3, 3), &m).unwrap();
        assert!(d.q.iter().all(|x| x.abs() < 1e-15));
        let tr = deformation_invariants(&d, InvariantBasis::TraceC);
        assert!(tr.iter().all(|&x| (x - 3.0).abs() < 1e-14));
    }

    #[test]
    fn two_polar_of_diagonal_sorts_descending() {
        let m = MetricPair::identity(2);
        let f = two_polar_decompose(&diag(&[2.0, 3.0]), &m, None).unwrap();
        assert!((f.d[0] - 3.0).abs() < 1e-14 && (f.d[1] - 2.0).abs() < 1e-14);
        assert!(two_polar_error(&diag(&[2.0, 3.0]), &f, &m) < 1e-14);
        assert!(f.degenerate.is_none());
        // L = R up to the K⁺ action; here both are the swap with a sign.
        assert!(max_abs(&(&f.l - &f.r)) < 1e-14);
    }

    #[test]
    fn rotation_is_degenerate() {
        let th: f64 = 0.4;
        let rot = Mat::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let m = MetricPair::identity(2);
        let f = two_polar_decompose(&rot, &m, None).unwrap();
        assert!(f.d.iter().all(|x| (x - 1.0).abs() < 1e-14));
        assert_eq!(f.degenerate, Some(vec![2]));
        assert!(max_abs(&(&f.l * f.r.transpose() - &rot)) < 1e-14);
    }

    #[test]
    fn volume_ratio_of_scaling() {
        let m = MetricPair::identity(3);
        let v = volume_ratio(&(Mat::identity(3, 3) * 2.0), &m).unwrap();
        assert!((v.delta - 8.0).abs() < 1e-14);
        assert!((v.d_lin - 2.0).abs() < 1e-14);
        assert!((v.q_mean - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn spin_of_planar_rotation_generator() {
        let m = MetricPair::identity(2);
        let sig = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let sv = spin_vorticity(&sig, &Mat::zeros(2, 2), &m);
        assert!(max_abs(&(&sv.s - &sig * 2.0)) < 1e-15);
        assert!((sv.norm_s * sv.norm_s - 4.0).abs() < 1e-14);
        let sym = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert!(max_abs(&spin_vorticity(&sym, &sym, &m).s) == 0.0);
    }

    #[test]
    fn polar_of_orthogonal_and_diagonal() {
        let m = MetricPair::identity(2);
        let th: f64 = 1.1;
        let rot = Mat::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let p = polar_decompose(&rot, &m).unwrap();
        assert!(max_abs(&(&p.u - &rot)) < 1e-14);
        assert!(max_abs(&(&p.a_sym - Mat::identity(2, 2))) < 1e-14);
        let p = polar_decompose(&diag(&[2.0, 3.0]), &m).unwrap();
        assert!(max_abs(&(&p.u - Mat::identity(2, 2))) < 1e-14);
        assert!(max_abs(&(&p.a_sym - diag(&[2.0, 3.0]))) < 1e-14);
    }

    #[test]
    fn identity_velocities() {
        let e = Mat::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.4]);
        let vel = affine_velocities(&Mat::identity(2, 2), &e, &Vector::zeros(2)).unwrap();
        assert_eq!(vel.omega, e);
        assert_eq!(vel.omega_hat, e);
        assert!(affine_velocities(&Mat::zeros(2, 2), &e, &Vector::zeros(2)).is_err());
    }
}
