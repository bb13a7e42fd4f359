//! Kinetic-energy models, Legendre transformations, kinetic Hamiltonians and
//! Casimir invariants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{spin_vorticity, Configuration, MetricPair, VelocityState};
use crate::linalg::{inverse, spd_sqrt, Mat, Vector};

/// Mass, d'Alembert inertia J and the three invariant-model scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct InertiaParameters {
    pub m: f64,
    pub j: Mat,
    pub i: f64,
    pub a: f64,
    pub b: f64,
}

impl InertiaParameters {
    pub fn new(m: f64, j: Mat, i: f64, a: f64, b: f64) -> Self {
        Self { m, j, i, a, b }
    }

    /// Unit mass, J = Id and the given (I, A, B).
    pub fn invariant(n: usize, i: f64, a: f64, b: f64) -> Self {
        Self { m: 1.0, j: Mat::identity(n, n), i, a, b }
    }

    pub fn alpha(&self) -> f64 {
        self.i + self.a
    }

    /// β = −(I+A)(I+A+nB)/B; infinite for B = 0.
    pub fn beta(&self, n: usize) -> f64 {
        -(self.i + self.a) * (self.i + self.a + n as f64 * self.b) / self.b
    }

    /// μ = (I²−A²)/I; infinite for I = 0.
    pub fn mu(&self) -> f64 {
        (self.i * self.i - self.a * self.a) / self.i
    }

    pub fn c_i(&self) -> f64 {
        self.i / (self.i * self.i - self.a * self.a)
    }

    pub fn c_a(&self) -> f64 {
        self.a / (self.a * self.a - self.i * self.i)
    }

    pub fn c_b(&self, n: usize) -> f64 {
        -self.b / ((self.i + self.a) * (self.i + self.a + n as f64 * self.b))
    }

    /// The same parameters with I forced to zero (doubly-affine reading).
    fn doubly_affine(&self) -> Self {
        Self { i: 0.0, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    DAlembert,
    AffineAffine,
    AffineMetrical,
    MetricalAffine,
    UnitaryCompact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Translational {
    Frozen,
    Metrical,
    CauchyCoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KineticModel {
    pub variant: ModelVariant,
    pub translational: Translational,
}

impl KineticModel {
    pub fn new(variant: ModelVariant, translational: Translational) -> Self {
        Self { variant, translational }
    }

    pub fn internal(variant: ModelVariant) -> Self {
        Self { variant, translational: Translational::Frozen }
    }

    /// Rejects pairings that mix the two invariance types.
    pub fn check_pairing(&self) -> Result<()> {
        use ModelVariant::*;
        use Translational::*;
        match (self.variant, self.translational) {
            (AffineMetrical, Metrical) => Err(Error::InvalidParameters(
                "spatially affine model requires Cauchy-coupled translational energy".into(),
            )),
            (MetricalAffine | DAlembert, CauchyCoupled) => Err(Error::InvalidParameters(
                "spatially metrical model requires metrical translational energy".into(),
            )),
            (UnitaryCompact, _) => Err(Error::InvalidParameters(
                "the compact unitary model exists only as a reduced lattice Hamiltonian".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Canonical momenta in both representations plus the dilatational split.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub p: Vector,
    pub sigma: Mat,
    pub sigma_hat: Mat,
    pub p_hat: Vector,
    pub p_dil: f64,
    pub sigma_dev: Mat,
}

impl MomentumState {
    /// From the spatial spin Σ.
    pub fn from_spatial(phi: &Mat, p: Vector, sigma: Mat) -> Result<Self> {
        let inv = inverse(phi)?;
        let sigma_hat = &inv * &sigma * phi;
        Ok(Self::assemble(phi, p, sigma, sigma_hat))
    }

    /// From the co-moving spin Σ̂.
    pub fn from_comoving(phi: &Mat, p: Vector, sigma_hat: Mat) -> Result<Self> {
        let inv = inverse(phi)?;
        let sigma = phi * &sigma_hat * &inv;
        Ok(Self::assemble(phi, p, sigma, sigma_hat))
    }

    fn assemble(phi: &Mat, p: Vector, sigma: Mat, sigma_hat: Mat) -> Self {
        let n = phi.nrows();
        let p_hat = phi.transpose() * &p;
        let p_dil = sigma.trace();
        let sigma_dev = &sigma - Mat::identity(n, n) * (p_dil / n as f64);
        Self { p, sigma, sigma_hat, p_hat, p_dil, sigma_dev }
    }
}

fn internal_params(model: &KineticModel, params: &InertiaParameters) -> InertiaParameters {
    if model.variant == ModelVariant::AffineAffine {
        params.doubly_affine()
    } else {
        params.clone()
    }
}

fn translational_energy(model: &KineticModel, params: &InertiaParameters, config: &Configuration, v: &Vector, metrics: &MetricPair) -> Result<f64> {
    Ok(match model.translational {
        Translational::Frozen => 0.0,
        Translational::Metrical => 0.5 * params.m * v.dot(&(&metrics.g * v)),
        Translational::CauchyCoupled => {
            let inv = inverse(&config.phi)?;
            let c = inv.transpose() * &metrics.eta * &inv;
            0.5 * params.m * v.dot(&(c * v))
        }
    })
}

/// Generic isotropic quadratic form I/2·Tr(X^{mT}X) + A/2·Tr(X²) + B/2·(TrX)².
fn isotropic_form(x: &Mat, metric: &Mat, metric_inv: &Mat, i: f64, a: f64, b: f64) -> f64 {
    let xt = metric_inv * x.transpose() * metric;
    let tr = x.trace();
    0.5 * i * (xt * x).trace() + 0.5 * a * (x * x).trace() + 0.5 * b * tr * tr
}

/// Lagrangian kinetic energy T = T_tr + T_int.
pub fn kinetic_energy(model: &KineticModel, params: &InertiaParameters, config: &Configuration, vel: &VelocityState, metrics: &MetricPair) -> Result<f64> {
    model.check_pairing()?;
    let t_tr = translational_energy(model, params, config, &vel.v, metrics)?;
    let t_int = match model.variant {
        ModelVariant::DAlembert => 0.5 * (&metrics.g * &vel.phi_dot * &params.j * vel.phi_dot.transpose()).trace(),
        ModelVariant::AffineAffine => isotropic_form(&vel.omega, &metrics.g, metrics.g_inv(), 0.0, params.a, params.b),
        ModelVariant::AffineMetrical => isotropic_form(&vel.omega_hat, &metrics.eta, metrics.eta_inv(), params.i, params.a, params.b),
        ModelVariant::MetricalAffine => isotropic_form(&vel.omega, &metrics.g, metrics.g_inv(), params.i, params.a, params.b),
        ModelVariant::UnitaryCompact => unreachable!(),
    };
    Ok(t_tr + t_int)
}

fn isotropic_legendre(x: &Mat, metric: &Mat, metric_inv: &Mat, i: f64, a: f64, b: f64) -> Mat {
    let n = x.nrows();
    metric_inv * x.transpose() * metric * i + x * a + Mat::identity(n, n) * (b * x.trace())
}

pub fn legendre_forward(model: &KineticModel, params: &InertiaParameters, config: &Configuration, vel: &VelocityState, metrics: &MetricPair) -> Result<MomentumState> {
    model.check_pairing()?;
    let phi = &config.phi;
    let p = match model.translational {
        Translational::Frozen => Vector::zeros(phi.nrows()),
        Translational::Metrical => &metrics.g * &vel.v * params.m,
        Translational::CauchyCoupled => {
            let inv = inverse(phi)?;
            inv.transpose() * &metrics.eta * &inv * &vel.v * params.m
        }
    };
    match model.variant {
        ModelVariant::DAlembert => {
            // pᴬᵢ = Jᴬᴮ φ̇ʲ_B g_{ji}, Σ = φ·P = K·g.
            let big_p = &params.j * vel.phi_dot.transpose() * &metrics.g;
            MomentumState::from_spatial(phi, p, phi * big_p)
        }
        ModelVariant::AffineAffine => {
            let s = isotropic_legendre(&vel.omega, &metrics.g, metrics.g_inv(), 0.0, params.a, params.b);
            MomentumState::from_spatial(phi, p, s)
        }
        ModelVariant::AffineMetrical => {
            let s = isotropic_legendre(&vel.omega_hat, &metrics.eta, metrics.eta_inv(), params.i, params.a, params.b);
            MomentumState::from_comoving(phi, p, s)
        }
        ModelVariant::MetricalAffine => {
            let s = isotropic_legendre(&vel.omega, &metrics.g, metrics.g_inv(), params.i, params.a, params.b);
            MomentumState::from_spatial(phi, p, s)
        }
        ModelVariant::UnitaryCompact => unreachable!(),
    }
}

fn check_invertible_inertia(model: &KineticModel, params: &InertiaParameters, n: usize) -> Result<()> {
    let scale = params.i.abs().max(params.a.abs()).max(params.b.abs()).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    match model.variant {
        ModelVariant::DAlembert => {
            spd_sqrt(&params.j).map_err(|_| Error::SingularInertia("J is not symmetric positive definite".into()))?;
        }
        ModelVariant::AffineAffine | ModelVariant::UnitaryCompact => {
            if params.a.abs() <= tol {
                return Err(Error::SingularInertia("A = 0".into()));
            }
            if (params.a + n as f64 * params.b).abs() <= tol {
                return Err(Error::SingularInertia("A + nB = 0".into()));
            }
        }
        ModelVariant::AffineMetrical | ModelVariant::MetricalAffine => {
            if (params.i * params.i - params.a * params.a).abs() <= tol * scale {
                return Err(Error::SingularInertia("I² = A²".into()));
            }
            if (params.i + params.a + n as f64 * params.b).abs() <= tol {
                return Err(Error::SingularInertia("I + A + nB = 0".into()));
            }
        }
    }
    if model.translational != Translational::Frozen && !(params.m > 0.0) {
        return Err(Error::InvalidParameters(format!("mass must be positive, got {}", params.m)));
    }
    Ok(())
}

/// Ω̂ or Ω from the spin through the reciprocal coefficients (c_I, c_A, c_B).
fn isotropic_inverse(s: &Mat, metric: &Mat, metric_inv: &Mat, p: &InertiaParameters) -> Mat {
    let n = s.nrows();
    let ci = if p.i == 0.0 { 0.0 } else { p.c_i() };
    let st = metric_inv * s.transpose() * metric;
    st * ci + s * p.c_a() + Mat::identity(n, n) * (p.c_b(n) * s.trace())
}

pub fn legendre_inverse(model: &KineticModel, params: &InertiaParameters, config: &Configuration, mom: &MomentumState, metrics: &MetricPair) -> Result<VelocityState> {
    model.check_pairing()?;
    let n = config.dim();
    check_invertible_inertia(model, params, n)?;
    let phi = &config.phi;
    let inv = inverse(phi)?;
    let v = match model.translational {
        Translational::Frozen => Vector::zeros(n),
        Translational::Metrical => metrics.g_inv() * &mom.p / params.m,
        Translational::CauchyCoupled => phi * metrics.eta_inv() * phi.transpose() * &mom.p / params.m,
    };
    let omega = match model.variant {
        ModelVariant::DAlembert => {
            // Ω = g⁻¹ Σᵀ (φJφᵀ)⁻¹.
            let jphi = phi * &params.j * phi.transpose();
            metrics.g_inv() * mom.sigma.transpose() * inverse(&jphi)?
        }
        ModelVariant::AffineAffine => isotropic_inverse(&mom.sigma, &metrics.g, metrics.g_inv(), &params.doubly_affine()),
        ModelVariant::AffineMetrical => {
            let oh = isotropic_inverse(&mom.sigma_hat, &metrics.eta, metrics.eta_inv(), params);
            phi * oh * &inv
        }
        ModelVariant::MetricalAffine => isotropic_inverse(&mom.sigma, &metrics.g, metrics.g_inv(), params),
        ModelVariant::UnitaryCompact => unreachable!(),
    };
    let phi_dot = &omega * phi;
    Ok(VelocityState {
        omega_hat: &inv * &phi_dot,
        v_hat: &inv * &v,
        phi_dot,
        omega,
        v,
        phi_condition: crate::linalg::condition_number(phi),
    })
}

fn translational_hamiltonian(model: &KineticModel, params: &InertiaParameters, config: &Configuration, p: &Vector, metrics: &MetricPair) -> f64 {
    match model.translational {
        Translational::Frozen => 0.0,
        Translational::Metrical => p.dot(&(metrics.g_inv() * p)) / (2.0 * params.m),
        Translational::CauchyCoupled => {
            let phi = &config.phi;
            p.dot(&(phi * metrics.eta_inv() * phi.transpose() * p)) / (2.0 * params.m)
        }
    }
}

/// Kinetic Hamiltonian in the reciprocal-coefficient form.
pub fn kinetic_hamiltonian(model: &KineticModel, params: &InertiaParameters, config: &Configuration, mom: &MomentumState, metrics: &MetricPair) -> Result<f64> {
    model.check_pairing()?;
    let n = config.dim();
    check_invertible_inertia(model, params, n)?;
    let t_tr = translational_hamiltonian(model, params, config, &mom.p, metrics);
    let form = |s: &Mat, metric: &Mat, metric_inv: &Mat, p: &InertiaParameters| {
        let ci = if p.i == 0.0 { 0.0 } else { p.c_i() };
        let tr = s.trace();
        0.5 * (ci * (metric_inv * s.transpose() * metric * s).trace() + p.c_a() * (s * s).trace() + p.c_b(n) * tr * tr)
    };
    let t_int = match model.variant {
        ModelVariant::DAlembert => {
            let big_p = inverse(&config.phi)? * &mom.sigma;
            let jinv = inverse(&params.j)?;
            0.5 * (big_p.transpose() * jinv * &big_p * metrics.g_inv()).trace()
        }
        ModelVariant::AffineAffine => form(&mom.sigma, &metrics.g, metrics.g_inv(), &params.doubly_affine()),
        ModelVariant::AffineMetrical => form(&mom.sigma_hat, &metrics.eta, metrics.eta_inv(), params),
        ModelVariant::MetricalAffine => form(&mom.sigma, &metrics.g, metrics.g_inv(), params),
        ModelVariant::UnitaryCompact => unreachable!(),
    };
    Ok(t_tr + t_int)
}

/// Kinetic Hamiltonian written through C(2), C(1) and the vorticity or spin
/// magnitude: C(2)/(2α) + C(1)²/(2β) + ‖V‖²/(2μ) (‖S‖² for the metrical-affine
/// model). The d'Alembert model has no such form and falls back to
/// [`kinetic_hamiltonian`].
pub fn kinetic_hamiltonian_casimir_form(model: &KineticModel, params: &InertiaParameters, config: &Configuration, mom: &MomentumState, metrics: &MetricPair) -> Result<f64> {
    if model.variant == ModelVariant::DAlembert {
        return kinetic_hamiltonian(model, params, config, mom, metrics);
    }
    model.check_pairing()?;
    let n = config.dim();
    check_invertible_inertia(model, params, n)?;
    let p = internal_params(model, params);
    let t_tr = translational_hamiltonian(model, params, config, &mom.p, metrics);
    let c1 = casimir(1, &mom.sigma);
    let c2 = casimir(2, &mom.sigma);
    let sv = spin_vorticity(&mom.sigma, &mom.sigma_hat, metrics);
    let extra = match model.variant {
        ModelVariant::AffineMetrical if p.i != 0.0 => sv.norm_v * sv.norm_v / (2.0 * p.mu()),
        ModelVariant::MetricalAffine if p.i != 0.0 => sv.norm_s * sv.norm_s / (2.0 * p.mu()),
        _ => 0.0,
    };
    // 1/(2β) is written as c_B/2 so that B = 0 stays regular.
    Ok(t_tr + c2 / (2.0 * p.alpha()) + 0.5 * p.c_b(n) * c1 * c1 + extra)
}

/// C(k) = Tr(Σᵏ).
pub fn casimir(k: u32, sigma: &Mat) -> f64 {
    assert!(k >= 1, "Casimir order must be positive");
    let mut pow = sigma.clone();
    for _ in 1..k {
        pow = &pow * sigma;
    }
    pow.trace()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    NonPositiveMass,
    InertiaNotPositiveDefinite,
    SingularInertia,
    DegenerateDoublyAffine,
    InvalidPairing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Whether T_int is a positive definite quadratic form of the velocity.
    pub positive_definite: bool,
    pub min_form_eigenvalue: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_params(model: &KineticModel, params: &InertiaParameters, n: usize) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |kind, message: &str| violations.push(Violation { kind, message: message.to_string() });
    if let Err(e) = model.check_pairing() {
        if model.variant != ModelVariant::UnitaryCompact {
            push(ViolationKind::InvalidPairing, &e.to_string());
        }
    }
    if !(params.m > 0.0) {
        push(ViolationKind::NonPositiveMass, "mass must be positive");
    }
    let nf = n as f64;
    let doubly_affine = matches!(model.variant, ModelVariant::AffineAffine | ModelVariant::UnitaryCompact)
        || (params.i == 0.0 && model.variant != ModelVariant::DAlembert);
    match model.variant {
        ModelVariant::DAlembert => {
            if params.j.nrows() != n || spd_sqrt(&params.j).is_err() {
                push(ViolationKind::InertiaNotPositiveDefinite, "J must be an n×n symmetric positive definite matrix");
            }
        }
        ModelVariant::AffineMetrical | ModelVariant::MetricalAffine => {
            if params.i * params.i == params.a * params.a {
                push(ViolationKind::SingularInertia, "I² = A²: μ undefined, Legendre map not invertible");
            }
            if params.i + params.a + nf * params.b == 0.0 {
                push(ViolationKind::SingularInertia, "I + A + nB = 0: dilatational inertia vanishes");
            }
        }
        _ => {}
    }
    if doubly_affine {
        if params.a == 0.0 {
            push(ViolationKind::DegenerateDoublyAffine, "A = 0: degenerate doubly-affine metric");
        }
        if params.a + nf * params.b == 0.0 {
            push(ViolationKind::DegenerateDoublyAffine, "A = −nB: degenerate doubly-affine metric");
        }
    }
    let min_eig = form_min_eigenvalue(model, params, n);
    ValidationReport { violations, positive_definite: min_eig > 0.0, min_form_eigenvalue: min_eig }
}

/// Smallest eigenvalue of T_int as a quadratic form on n×n velocities
/// (identity metrics), via polarisation on the elementary basis.
fn form_min_eigenvalue(model: &KineticModel, params: &InertiaParameters, n: usize) -> f64 {
    let dim = n * n;
    let basis = |k: usize| {
        let mut e = Mat::zeros(n, n);
        e[(k / n, k % n)] = 1.0;
        e
    };
    let id = Mat::identity(n, n);
    let t = |x: &Mat| -> f64 {
        match model.variant {
            ModelVariant::DAlembert => {
                if params.j.nrows() != n {
                    return f64::NAN;
                }
                0.5 * (x * &params.j * x.transpose()).trace()
            }
            ModelVariant::AffineAffine | ModelVariant::UnitaryCompact => isotropic_form(x, &id, &id, 0.0, params.a, params.b),
            _ => isotropic_form(x, &id, &id, params.i, params.a, params.b),
        }
    };
    let mut gram = Mat::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            let ea = basis(a);
            let eb = basis(b);
            gram[(a, b)] = t(&(&ea + &eb)) - t(&ea) - t(&eb);
        }
    }
    if gram.iter().any(|x| !x.is_finite()) {
        return f64::NAN;
    }
    nalgebra::SymmetricEigen::new(gram).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}
