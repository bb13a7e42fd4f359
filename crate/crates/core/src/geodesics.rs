//! One-parameter-subgroup geodesics, metric normality, relative equilibria
//! and the spectral boundedness classification of generators.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{full_rhs, Chart, FullPhaseState, IntegratorSettings, PotentialSpec, System};
use crate::error::{Error, Result};
use crate::kinematics::{velocities_from_omega, Configuration, MetricPair};
use crate::lattice::{reduce_state, ReducedSystem, ReducedTrajectory};
use crate::linalg::{expm, inverse, max_abs, Mat};
use crate::models::{legendre_forward, InertiaParameters, KineticModel, ModelVariant};
use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveSide {
    /// exp(E·t)·φ₀.
    Left,
    /// φ₀·exp(F·t).
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorCurve {
    pub phi0: Mat,
    pub gen: Mat,
    pub side: CurveSide,
}

impl GeneratorCurve {
    pub fn left(gen: Mat, phi0: Mat) -> Self {
        Self { phi0, gen, side: CurveSide::Left }
    }

    pub fn right(phi0: Mat, gen: Mat) -> Self {
        Self { phi0, gen, side: CurveSide::Right }
    }

    pub fn eval(&self, t: f64) -> Mat {
        let e = expm(&(&self.gen * t));
        match self.side {
            CurveSide::Left => e * &self.phi0,
            CurveSide::Right => &self.phi0 * e,
        }
    }

    /// The same curve written with the other side's generator.
    pub fn converted(&self) -> Result<Self> {
        let inv = inverse(&self.phi0)?;
        Ok(match self.side {
            CurveSide::Left => Self::right(self.phi0.clone(), &inv * &self.gen * &self.phi0),
            CurveSide::Right => Self::left(&self.phi0 * &self.gen * &inv, self.phi0.clone()),
        })
    }

    /// Spatial affine velocity Ω, constant along the curve.
    pub fn omega(&self) -> Result<Mat> {
        Ok(match self.side {
            CurveSide::Left => self.gen.clone(),
            CurveSide::Right => &self.phi0 * &self.gen * inverse(&self.phi0)?,
        })
    }

    /// Co-moving affine velocity Ω̂, constant along the curve.
    pub fn omega_hat(&self) -> Result<Mat> {
        Ok(match self.side {
            CurveSide::Left => inverse(&self.phi0)? * &self.gen * &self.phi0,
            CurveSide::Right => self.gen.clone(),
        })
    }
}

/// metric⁻¹·Fᵀ·metric.
pub fn metric_transpose(f: &Mat, metric: &Mat) -> Result<Mat> {
    Ok(inverse(metric)? * f.transpose() * metric)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityCheck {
    pub normal: bool,
    /// Spectral norm of [F, F^{mT}].
    pub commutator_norm: f64,
}

/// F is metric-normal when ‖[F, F^{mT}]‖ ≤ tol·‖F‖² (spectral norms).
pub fn is_metric_normal(f: &Mat, metric: &Mat, tol: f64) -> Result<NormalityCheck> {
    let ft = metric_transpose(f, metric)?;
    let c = f * &ft - &ft * f;
    let commutator_norm = spectral_norm(&c);
    let scale = spectral_norm(f).powi(2);
    Ok(NormalityCheck { normal: commutator_norm <= tol * scale, commutator_norm })
}

fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    /// max over samples of ‖d(momentum)/dt along the curve − balance-law value‖,
    /// max-norm relative to max(1, ‖momentum‖).
    pub max_residual: f64,
    /// Normality of the generator in the metric the model requires, after
    /// converting the curve to the side on which the condition is stated.
    pub native_normality: Option<NormalityCheck>,
    /// Normality of the curve's own generator with respect to the
    /// deformation tensor of φ₀ (C[φ₀] for a left generator under the
    /// spatially-affine model, G[φ₀] for a right generator under the
    /// metrical-affine model).
    pub converted_normality: Option<NormalityCheck>,
    /// Whether theory predicts the curve to be a solution.
    pub predicted: Option<bool>,
}

/// Evaluates the geodetic balance law of `variant` along a closed-form curve.
pub fn relative_equilibrium_residual(
    variant: ModelVariant,
    params: &InertiaParameters,
    curve: &GeneratorCurve,
    metrics: &MetricPair,
    t_samples: &[f64],
    tol: f64,
) -> Result<EquilibriumReport> {
    if variant == ModelVariant::UnitaryCompact {
        return Err(Error::InvalidParameters("the compact unitary model has no full-chart dynamics".into()));
    }
    let n = curve.gen.nrows();
    if curve.gen.ncols() != n || curve.phi0.nrows() != n || metrics.dim() != n {
        return Err(Error::DimensionMismatch("curve, generator and metrics dimensions differ".into()));
    }
    let sys = System::new(KineticModel::internal(variant), params.clone(), PotentialSpec::none(), metrics.clone());
    let omega = curve.omega()?;
    let mut max_residual = 0.0_f64;
    for &t in t_samples {
        let phi = curve.eval(t);
        let config = Configuration::internal(phi.clone())?;
        let vel = velocities_from_omega(&phi, &omega, &config.x)?;
        let mom = legendre_forward(&sys.model, params, &config, &vel, metrics)?;
        let state = FullPhaseState { config, mom, time: t };
        let rhs = full_rhs(&sys, &state)?;
        let inv = inverse(&phi)?;
        let (along, scale) = match (variant, rhs.chart) {
            (ModelVariant::DAlembert, _) => {
                // Σ = φJφ̇ᵀg with φ̈ = Ω²φ.
                let pd = &vel.phi_dot;
                let d = (pd * &params.j * pd.transpose() + &phi * &params.j * phi.transpose() * omega.transpose() * omega.transpose()) * &metrics.g;
                (d, max_abs(&state.mom.sigma))
            }
            (_, Chart::Spatial) => (&omega * &state.mom.sigma - &state.mom.sigma * &omega, max_abs(&state.mom.sigma)),
            (_, Chart::CoMoving) => {
                let s = &state.mom.sigma;
                (&inv * (s * &omega - &omega * s) * &phi, max_abs(&state.mom.sigma_hat))
            }
        };
        max_residual = max_residual.max(max_abs(&(along - &rhs.dsigma)) / scale.max(1.0));
    }

    let (native_normality, converted_normality, predicted) = match variant {
        // The doubly-affine energy never contains I.
        ModelVariant::AffineAffine => (None, None, Some(true)),
        ModelVariant::AffineMetrical => {
            let f = curve.omega_hat()?;
            let native = is_metric_normal(&f, &metrics.eta, tol)?;
            let conv = if curve.side == CurveSide::Left {
                let inv = inverse(&curve.phi0)?;
                let c = inv.transpose() * &metrics.eta * &inv;
                Some(is_metric_normal(&curve.gen, &c, tol)?)
            } else {
                None
            };
            (Some(native), conv, Some(native.normal || params.i == 0.0))
        }
        ModelVariant::MetricalAffine => {
            let e = curve.omega()?;
            let native = is_metric_normal(&e, &metrics.g, tol)?;
            let conv = if curve.side == CurveSide::Right {
                let g0 = curve.phi0.transpose() * &metrics.g * &curve.phi0;
                Some(is_metric_normal(&curve.gen, &g0, tol)?)
            } else {
                None
            };
            (Some(native), conv, Some(native.normal || params.i == 0.0))
        }
        _ => (None, None, None),
    };
    Ok(EquilibriumReport { max_residual, native_normality, converted_normality, predicted })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundednessClass {
    Bounded,
    Unbounded,
    Marginal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessVerdict {
    pub class: BoundednessClass,
    pub spectrum: Vec<Complex64>,
    /// Condition number of the eigenvector matrix; infinite when defective.
    pub diag_condition: f64,
}

pub const DIAGONALIZABILITY_THRESHOLD: f64 = 1e8;
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-9;

/// Spectral classification of exp(α·t) orbits: bounded iff α is similar to
/// a skew-symmetric matrix, i.e. diagonalizable with imaginary spectrum.
pub fn classify_generator(alpha: &Mat, tol: f64) -> BoundednessVerdict {
    let n = alpha.nrows();
    let norm = alpha.norm();
    if norm == 0.0 {
        return BoundednessVerdict { class: BoundednessClass::Bounded, spectrum: vec![Complex64::new(0.0, 0.0); n], diag_condition: 1.0 };
    }
    let spectrum: Vec<Complex64> = alpha.complex_eigenvalues().iter().cloned().collect();
    let clusters = cluster(&spectrum, 1e-6 * norm);
    let ac: DMatrix<Complex64> = alpha.map(|x| Complex64::new(x, 0.0));
    let mut vectors: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    let mut defective = false;
    for c in &clusters {
        let shifted = &ac - DMatrix::<Complex64>::identity(n, n) * c.center;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
        let geometric = idx.iter().filter(|&&k| svd.singular_values[k] <= 1e-6 * norm).count();
        if geometric < c.size {
            defective = true;
        }
        for &k in idx.iter().take(c.size) {
            vectors.push(v_t.row(k).adjoint());
        }
    }
    let diag_condition = if defective {
        f64::INFINITY
    } else {
        let v = DMatrix::from_columns(&vectors);
        let s = v.singular_values();
        let min = s.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            s.max() / min
        }
    };
    let max_re = clusters.iter().map(|c| c.center.re.abs()).fold(0.0, f64::max);
    let class = if max_re > tol * norm {
        BoundednessClass::Unbounded
    } else if diag_condition < DIAGONALIZABILITY_THRESHOLD {
        BoundednessClass::Bounded
    } else {
        BoundednessClass::Marginal
    };
    BoundednessVerdict { class, spectrum, diag_condition }
}

struct Cluster {
    center: Complex64,
    size: usize,
}

fn cluster(values: &[Complex64], tol: f64) -> Vec<Cluster> {
    let mut members: Vec<Vec<Complex64>> = Vec::new();
    for &v in values {
        match members.iter_mut().find(|m| m.iter().any(|&u| (u - v).norm() <= tol)) {
            Some(m) => m.push(v),
            None => members.push(vec![v]),
        }
    }
    members
        .into_iter()
        .map(|m| Cluster { center: m.iter().sum::<Complex64>() / m.len() as f64, size: m.len() })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbationFamily {
    Symmetric,
    Skew,
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub base: BoundednessClass,
    pub epsilon: f64,
    pub samples: usize,
    pub preserved: usize,
    pub bounded: usize,
    pub unbounded: usize,
    pub marginal: usize,
}

impl SweepReport {
    pub fn fraction_preserved(&self) -> f64 {
        self.preserved as f64 / self.samples as f64
    }
}

/// Classifies α + ε·δ for random traceless δ of unit Frobenius norm drawn
/// from `family`, with ε = radius·‖α‖.
pub fn perturbation_sweep(alpha: &Mat, family: PerturbationFamily, radius: f64, samples: usize, seed: u64, tol: f64) -> SweepReport {
    let n = alpha.nrows();
    let base = classify_generator(alpha, tol).class;
    let epsilon = radius * alpha.norm();
    let mut rng = sampling::rng(seed);
    let mut rep = SweepReport { base, epsilon, samples, preserved: 0, bounded: 0, unbounded: 0, marginal: 0 };
    for _ in 0..samples {
        let raw = match family {
            PerturbationFamily::Symmetric => sampling::symmetric(&mut rng, n, 1.0),
            PerturbationFamily::Skew => sampling::skew(&mut rng, n, 1.0),
            PerturbationFamily::General => sampling::normal_matrix_entries(&mut rng, n, 1.0),
        };
        let d = sampling::traceless(&raw);
        let d = &d / d.norm().max(f64::MIN_POSITIVE);
        let class = classify_generator(&(alpha + d * epsilon), tol).class;
        match class {
            BoundednessClass::Bounded => rep.bounded += 1,
            BoundednessClass::Unbounded => rep.unbounded += 1,
            BoundednessClass::Marginal => rep.marginal += 1,
        }
        if class == base {
            rep.preserved += 1;
        }
    }
    rep
}

/// Random sl(n) generator similar to a skew matrix: χ·κ·χ⁻¹ with κ skew and
/// χ = exp(X) for a Gaussian X of the given spread.
pub fn random_bounded_generator<R: Rng>(rng: &mut R, n: usize, spread: f64) -> Mat {
    let chi = sampling::gl_plus(rng, n, spread);
    let k = sampling::skew(rng, n, 1.0);
    let inv = inverse(&chi).expect("matrix exponential is invertible");
    let a = &chi * k * inv;
    sampling::traceless(&a)
}

/// Random traceless Gaussian generator with max |Re λ| at least
/// `min_real`·‖α‖, normalised to unit Frobenius norm.
pub fn random_unbounded_generator<R: Rng>(rng: &mut R, n: usize, min_real: f64) -> Mat {
    loop {
        let a = sampling::traceless(&sampling::normal_matrix_entries(rng, n, 1.0));
        let a = &a / a.norm();
        let re = a.complex_eigenvalues().iter().map(|l| l.re.abs()).fold(0.0, f64::max);
        if re >= min_real {
            return a;
        }
    }
}

/// Reduced-lattice trajectory of the doubly-affine geodesic through Ψ₀ with
/// affine velocity α (identity metrics, V = 0, internal energy A/2·Tr Ω²).
/// Along it qᵃ(t) are the log-stretchings of exp(αt)Ψ₀.
pub fn geodesic_reduced_trajectory(alpha: &Mat, psi0: &Mat, a: f64, duration: f64, sample_count: usize, settings: &IntegratorSettings) -> Result<ReducedTrajectory> {
    let n = alpha.nrows();
    let metrics = MetricPair::identity(n);
    let params = InertiaParameters::invariant(n, 0.0, a, 0.0);
    let model = KineticModel::internal(ModelVariant::AffineAffine);
    let config = Configuration::internal(psi0.clone())?;
    let vel = velocities_from_omega(psi0, alpha, &config.x)?;
    let mom = legendre_forward(&model, &params, &config, &vel, &metrics)?;
    let red = reduce_state(&FullPhaseState { config, mom, time: 0.0 }, &metrics, None)?;
    let mut sys = ReducedSystem::new(ModelVariant::AffineAffine, params, PotentialSpec::none(), n)?;
    sys.options.frames = false;
    sys.integrate(&red, duration, sample_count, settings)
}
