//! Full-space equations of motion: potentials and generalized forces, balance
//! laws for every model, kinematical moments, the adaptive integrator and
//! invariant monitoring.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{spin_vorticity, two_polar_decompose, Configuration, MetricPair, VelocityState};
use crate::lattice::{dilatational_potential, DilatationKind};
use crate::linalg::{flatten_row_major, from_row_major, inverse, max_abs, max_abs_vec, Mat, Vector};
use crate::models::{casimir, kinetic_hamiltonian, legendre_forward, legendre_inverse, InertiaParameters, KineticModel, ModelVariant, MomentumState, Translational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialKind {
    None,
    DilatationOnly,
    DoublyIsotropic,
    GeneralConfig,
}

/// Shear pair interaction V_sh(qᵃ − qᵇ), an even function of the difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ShearPair {
    /// k·d²/2.
    Quadratic { k: f64 },
    /// g / sh²(d/2).
    InverseSinh2 { g: f64 },
    /// −g / ch²(d/2).
    Sech2Well { g: f64 },
}

impl ShearPair {
    pub fn value(&self, d: f64) -> f64 {
        match *self {
            ShearPair::Quadratic { k } => 0.5 * k * d * d,
            ShearPair::InverseSinh2 { g } => g / (0.5 * d).sinh().powi(2),
            ShearPair::Sech2Well { g } => -g / (0.5 * d).cosh().powi(2),
        }
    }

    pub fn derivative(&self, d: f64) -> f64 {
        match *self {
            ShearPair::Quadratic { k } => k * d,
            ShearPair::InverseSinh2 { g } => -g * (0.5 * d).cosh() / (0.5 * d).sinh().powi(3),
            ShearPair::Sech2Well { g } => g * (0.5 * d).sinh() / (0.5 * d).cosh().powi(3),
        }
    }
}

/// V(φ, x) supplied by the caller.
pub type ConfigPotentialFn = Arc<dyn Fn(&Mat, &Vector) -> f64 + Send + Sync>;
/// Extra permutation-invariant V(q¹, …, qⁿ) supplied by the caller.
pub type InvariantPotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Generalized forces (Q_i, Qⁱ_j) supplied by the caller, e.g. dissipation.
pub type ForceFn = Arc<dyn Fn(&FullPhaseState, &VelocityState) -> (Vector, Mat) + Send + Sync>;

#[derive(Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub dil_kind: DilatationKind,
    pub kappa: f64,
    pub shear_pair: Option<ShearPair>,
    pub invariant_fn: Option<InvariantPotentialFn>,
    pub config_fn: Option<ConfigPotentialFn>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("kind", &self.kind)
            .field("dil_kind", &self.dil_kind)
            .field("kappa", &self.kappa)
            .field("shear_pair", &self.shear_pair)
            .field("invariant_fn", &self.invariant_fn.is_some())
            .field("config_fn", &self.config_fn.is_some())
            .finish()
    }
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl PotentialSpec {
    pub fn none() -> Self {
        Self { kind: PotentialKind::None, dil_kind: DilatationKind::Quadratic, kappa: 0.0, shear_pair: None, invariant_fn: None, config_fn: None }
    }

    pub fn dilatation(dil_kind: DilatationKind, kappa: f64) -> Self {
        Self { kind: PotentialKind::DilatationOnly, dil_kind, kappa, ..Self::none() }
    }

    pub fn doubly_isotropic(dil_kind: DilatationKind, kappa: f64, shear_pair: Option<ShearPair>) -> Self {
        Self { kind: PotentialKind::DoublyIsotropic, dil_kind, kappa, shear_pair, ..Self::none() }
    }

    pub fn general(f: ConfigPotentialFn) -> Self {
        Self { kind: PotentialKind::GeneralConfig, config_fn: Some(f), ..Self::none() }
    }

    /// True when the potential depends on φ only through the invariants qᵃ.
    pub fn is_invariant(&self) -> bool {
        self.kind != PotentialKind::GeneralConfig
    }

    /// V and ∂V/∂qᵃ as a function of the deformation invariants.
    pub fn invariant_value_and_gradient(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = q.len();
        let mut v = 0.0;
        let mut grad = vec![0.0; n];
        match self.kind {
            PotentialKind::None => return Ok((0.0, grad)),
            PotentialKind::GeneralConfig => {
                return Err(Error::InvalidParameters("general configuration potentials are not functions of the invariants".into()))
            }
            PotentialKind::DilatationOnly | PotentialKind::DoublyIsotropic => {}
        }
        let q_mean = q.iter().sum::<f64>() / n as f64;
        let (vd, dvd) = dilatational_potential(self.dil_kind, self.kappa, q_mean);
        v += vd;
        for g in grad.iter_mut() {
            *g += dvd / n as f64;
        }
        if self.kind == PotentialKind::DoublyIsotropic {
            if let Some(pair) = self.shear_pair {
                for a in 0..n {
                    for b in a + 1..n {
                        let d = q[a] - q[b];
                        v += pair.value(d);
                        let dv = pair.derivative(d);
                        grad[a] += dv;
                        grad[b] -= dv;
                    }
                }
            }
            if let Some(f) = &self.invariant_fn {
                v += f(q);
                for a in 0..n {
                    grad[a] += richardson(|h| {
                        let mut qq = q.to_vec();
                        qq[a] += h;
                        f(&qq)
                    });
                }
            }
        }
        Ok((v, grad))
    }
}

/// Central difference with one Richardson extrapolation from steps 1e-3
/// and 5e-4; the truncation error is O(h⁴).
pub(crate) fn richardson<F: Fn(f64) -> f64>(f: F) -> f64 {
    let h = 1e-3;
    let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forces {
    pub v: f64,
    /// Q_i = −∂V/∂xⁱ.
    pub q_i: Vector,
    /// Qⁱ_j = −φⁱ_A ∂V/∂φʲ_A.
    pub q_mat: Mat,
    /// Q̂ = φ⁻¹ Q φ.
    pub q_hat: Mat,
}

pub fn potential_and_forces(pot: &PotentialSpec, config: &Configuration, metrics: &MetricPair) -> Result<Forces> {
    let n = config.dim();
    let phi = &config.phi;
    let (v, q_i, q_mat) = match pot.kind {
        PotentialKind::None => (0.0, Vector::zeros(n), Mat::zeros(n, n)),
        PotentialKind::DilatationOnly | PotentialKind::DoublyIsotropic => {
            let f = two_polar_decompose(phi, metrics, None)?;
            let q: Vec<f64> = f.q().iter().cloned().collect();
            let (v, grad) = pot.invariant_value_and_gradient(&q)?;
            // ∂V/∂φ = g^{1/2} L' diag(Vₐ/Qₐ) R'ᵀ η^{-1/2}, hence Q = −L diag(Vₐ) Lᵀ g.
            let dg = Mat::from_diagonal(&Vector::from_vec(grad));
            let q_mat = -(&f.l * dg * f.l.transpose() * &metrics.g);
            (v, Vector::zeros(n), q_mat)
        }
        PotentialKind::GeneralConfig => {
            let func = pot.config_fn.as_ref().ok_or_else(|| Error::InvalidParameters("general potential without a function".into()))?;
            let v = func(phi, &config.x);
            let mut dphi = Mat::zeros(n, n);
            for i in 0..n {
                for a in 0..n {
                    dphi[(i, a)] = richardson(|h| {
                        let mut p = phi.clone();
                        p[(i, a)] += h;
                        func(&p, &config.x)
                    });
                }
            }
            let q_i = Vector::from_fn(n, |i, _| {
                -richardson(|h| {
                    let mut x = config.x.clone();
                    x[i] += h;
                    func(phi, &x)
                })
            });
            (v, q_i, -(phi * dphi.transpose()))
        }
    };
    let q_hat = inverse(phi)? * &q_mat * phi;
    Ok(Forces { v, q_i, q_mat, q_hat })
}

/// Which spin representation is integrated as the canonical momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// (x, p, φ, Σ).
    Spatial,
    /// (x, p, φ, Σ̂).
    CoMoving,
}

pub fn chart_for(model: &KineticModel) -> Chart {
    match (model.variant, model.translational) {
        (ModelVariant::MetricalAffine, _) | (ModelVariant::AffineAffine, Translational::Metrical) => Chart::CoMoving,
        _ => Chart::Spatial,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullPhaseState {
    pub config: Configuration,
    pub mom: MomentumState,
    pub time: f64,
}

/// Everything that defines a mechanical system apart from its state.
#[derive(Clone)]
pub struct System {
    pub model: KineticModel,
    pub params: InertiaParameters,
    pub potential: PotentialSpec,
    pub metrics: MetricPair,
    pub extra_force: Option<ForceFn>,
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("System")
            .field("model", &self.model)
            .field("params", &self.params)
            .field("potential", &self.potential)
            .field("metrics", &self.metrics)
            .field("extra_force", &self.extra_force.is_some())
            .finish()
    }
}

impl System {
    pub fn new(model: KineticModel, params: InertiaParameters, potential: PotentialSpec, metrics: MetricPair) -> Self {
        Self { model, params, potential, metrics, extra_force: None }
    }

    pub fn dim(&self) -> usize {
        self.metrics.dim()
    }

    pub fn chart(&self) -> Chart {
        chart_for(&self.model)
    }

    pub fn is_geodetic(&self) -> bool {
        self.potential.kind == PotentialKind::None && self.extra_force.is_none()
    }

    /// Phase-space state from configuration and velocities.
    pub fn state_from_velocities(&self, config: Configuration, phi_dot: &Mat, v: &Vector) -> Result<FullPhaseState> {
        let vel = crate::kinematics::affine_velocities(&config.phi, phi_dot, v)?;
        let mom = legendre_forward(&self.model, &self.params, &config, &vel, &self.metrics)?;
        Ok(FullPhaseState { config, mom, time: 0.0 })
    }

    pub fn velocities(&self, state: &FullPhaseState) -> Result<VelocityState> {
        legendre_inverse(&self.model, &self.params, &state.config, &state.mom, &self.metrics)
    }

    /// Total energy H = 𝒯 + V.
    pub fn hamiltonian(&self, state: &FullPhaseState) -> Result<f64> {
        let t = kinetic_hamiltonian(&self.model, &self.params, &state.config, &state.mom, &self.metrics)?;
        let v = if self.potential.kind == PotentialKind::None { 0.0 } else { potential_and_forces(&self.potential, &state.config, &self.metrics)?.v };
        Ok(t + v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dx: Vector,
    pub dp: Vector,
    pub dphi: Mat,
    /// dΣ/dt or dΣ̂/dt according to `chart`.
    pub dsigma: Mat,
    pub chart: Chart,
}

/// Balance laws: dφ/dt = Ωφ, dx/dt from the translational Legendre map, and
/// the momentum balance of the model in its canonical chart.
pub fn full_rhs(sys: &System, state: &FullPhaseState) -> Result<StateDerivative> {
    let vel = sys.velocities(state)?;
    let forces = potential_and_forces(&sys.potential, &state.config, &sys.metrics)?;
    let mut q_i = forces.q_i;
    let mut q_mat = forces.q_mat;
    let mut q_hat = forces.q_hat;
    if let Some(f) = &sys.extra_force {
        let (ei, em) = f(state, &vel);
        q_i += ei;
        q_hat += inverse(&state.config.phi)? * &em * &state.config.phi;
        q_mat += em;
    }
    let chart = sys.chart();
    let dsigma = match chart {
        Chart::CoMoving => q_hat,
        Chart::Spatial => {
            let mut d = q_mat;
            if sys.model.variant == ModelVariant::DAlembert {
                d += &vel.omega * &state.mom.sigma;
            }
            if sys.model.translational == Translational::CauchyCoupled {
                let phi = &state.config.phi;
                let cp = phi * sys.metrics.eta_inv() * phi.transpose() * &state.mom.p;
                d -= cp * state.mom.p.transpose() / sys.params.m;
            }
            d
        }
    };
    Ok(StateDerivative { dx: vel.v, dp: q_i, dphi: vel.phi_dot, dsigma, chart })
}

pub fn pack(state: &FullPhaseState, chart: Chart) -> Vec<f64> {
    let mut y: Vec<f64> = state.config.x.iter().cloned().collect();
    y.extend(state.mom.p.iter());
    y.extend(flatten_row_major(&state.config.phi));
    let s = match chart {
        Chart::Spatial => &state.mom.sigma,
        Chart::CoMoving => &state.mom.sigma_hat,
    };
    y.extend(flatten_row_major(s));
    y
}

pub fn pack_derivative(d: &StateDerivative) -> Vec<f64> {
    let mut y: Vec<f64> = d.dx.iter().cloned().collect();
    y.extend(d.dp.iter());
    y.extend(flatten_row_major(&d.dphi));
    y.extend(flatten_row_major(&d.dsigma));
    y
}

pub fn unpack(y: &[f64], n: usize, chart: Chart, time: f64) -> Result<FullPhaseState> {
    let x = Vector::from_row_slice(&y[0..n]);
    let p = Vector::from_row_slice(&y[n..2 * n]);
    let phi = from_row_major(n, &y[2 * n..2 * n + n * n]);
    let s = from_row_major(n, &y[2 * n + n * n..2 * n + 2 * n * n]);
    let mom = match chart {
        Chart::Spatial => MomentumState::from_spatial(&phi, p, s)?,
        Chart::CoMoving => MomentumState::from_comoving(&phi, p, s)?,
    };
    Ok(FullPhaseState { config: Configuration { phi, x }, mom, time })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub initial_step: f64,
    /// Relative change of the monitored invariant tolerated in one step;
    /// non-positive disables drift rejection.
    pub drift_threshold: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.1, min_step: 1e-12, initial_step: 1e-3, drift_threshold: 1e-9, max_steps: 5_000_000 }
    }
}

impl IntegratorSettings {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { rel_tol: tol, abs_tol: tol * 1e-2, ..Self::default() }
    }
}

/// Consecutive step halvings allowed for invariant drift alone.
const MAX_DRIFT_REJECTIONS: usize = 8;

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_BS: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Dormand–Prince 5(4) integration of y' = f(t, y), returning the state at
/// each of `sample_times` (ascending, the first one is the initial time).
///
/// `monitor` evaluates an invariant used for drift-based step rejection and
/// `guard` may abort the integration after an accepted step.
pub fn integrate_ode<F, M, G>(mut f: F, y0: &[f64], sample_times: &[f64], settings: &IntegratorSettings, mut monitor: M, mut guard: G) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    M: FnMut(&[f64]) -> Result<f64>,
    G: FnMut(f64, &[f64]) -> Result<()>,
{
    let dim = y0.len();
    let mut t = sample_times[0];
    let mut y = y0.to_vec();
    let mut out = vec![y.clone()];
    let mut h = settings.initial_step.min(settings.max_step);
    let mut k1 = f(t, &y)?;
    let mut inv = monitor(&y)?;
    let inv_scale = inv.abs();
    let mut steps = 0usize;
    let mut drift_rejections = 0usize;
    let mut skip_drift = false;
    let mut h_before_drift = h;
    for &target in &sample_times[1..] {
        while t < target {
            steps += 1;
            if steps > settings.max_steps {
                return Err(Error::StepFailure { t, h });
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let h_try = if clipped { remaining } else { h };
            let mut k = vec![k1.clone()];
            let mut stage_failed = false;
            for s in 1..7 {
                let ys: Vec<f64> = (0..dim).map(|i| y[i] + h_try * (0..s).map(|j| DP_A[s][j] * k[j][i]).sum::<f64>()).collect();
                match f(t + DP_C[s] * h_try, &ys) {
                    Ok(v) => k.push(v),
                    Err(e) => {
                        if h_try * 0.5 < settings.min_step {
                            return Err(e);
                        }
                        stage_failed = true;
                        break;
                    }
                }
            }
            if stage_failed {
                h = h_try * 0.5;
                continue;
            }
            let y_new: Vec<f64> = (0..dim).map(|i| y[i] + h_try * (0..7).map(|s| DP_B[s] * k[s][i]).sum::<f64>()).collect();
            let mut err_sq = 0.0;
            for i in 0..dim {
                let e = h_try * (0..7).map(|s| (DP_B[s] - DP_BS[s]) * k[s][i]).sum::<f64>();
                let sc = settings.abs_tol + settings.rel_tol * y[i].abs().max(y_new[i].abs());
                err_sq += (e / sc).powi(2);
            }
            let err = (err_sq / dim as f64).sqrt();
            if !err.is_finite() || err > 1.0 {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
                h = h_try * fac;
                if h < settings.min_step {
                    return Err(Error::StepFailure { t, h });
                }
                continue;
            }
            if settings.drift_threshold > 0.0 {
                let inv_new = monitor(&y_new)?;
                let denom = inv_scale.max(inv.abs());
                if !skip_drift && denom > 0.0 && (inv_new - inv).abs() / denom > settings.drift_threshold {
                    if drift_rejections == 0 {
                        h_before_drift = h_try;
                    }
                    drift_rejections += 1;
                    if drift_rejections > MAX_DRIFT_REJECTIONS {
                        // Halving did not help: the change is roundoff, not
                        // truncation, so the error-controlled step is retaken.
                        skip_drift = true;
                        h = h_before_drift;
                    } else {
                        h = h_try * 0.5;
                    }
                    if h < settings.min_step {
                        return Err(Error::StepFailure { t, h });
                    }
                    continue;
                }
                inv = inv_new;
            }
            drift_rejections = 0;
            skip_drift = false;
            t = if clipped { target } else { t + h_try };
            y = y_new;
            k1 = k.pop().unwrap();
            guard(t, &y)?;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let proposal = (h_try * fac).min(settings.max_step);
            h = if clipped { h.max(proposal) } else { proposal };
        }
        out.push(y.clone());
    }
    Ok(out)
}

pub fn linspace(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "at least two samples are needed");
    (0..count).map(|k| t0 + (t1 - t0) * k as f64 / (count - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub state: FullPhaseState,
    pub hamiltonian: f64,
    pub c1: f64,
    pub c2: f64,
    pub norm_s: f64,
    pub norm_v: f64,
    pub q: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub chart: Chart,
    pub samples: Vec<TrajectorySample>,
}

fn sample_record(sys: &System, state: FullPhaseState) -> Result<TrajectorySample> {
    let sv = spin_vorticity(&state.mom.sigma, &state.mom.sigma_hat, &sys.metrics);
    let q = crate::kinematics::deformation_tensors(&state.config.phi, &sys.metrics)?.q;
    Ok(TrajectorySample {
        hamiltonian: sys.hamiltonian(&state)?,
        c1: casimir(1, &state.mom.sigma),
        c2: casimir(2, &state.mom.sigma),
        norm_s: sv.norm_s,
        norm_v: sv.norm_v,
        q,
        state,
    })
}

/// Integrates the balance laws over [t₀, t₀ + duration] and records
/// `sample_count` equally spaced samples.
pub fn integrate(sys: &System, state0: &FullPhaseState, duration: f64, sample_count: usize, settings: &IntegratorSettings) -> Result<Trajectory> {
    let n = sys.dim();
    let chart = sys.chart();
    let t0 = state0.time;
    let times = linspace(t0, t0 + duration, sample_count);
    let det0 = state0.config.phi.determinant();
    let y0 = pack(state0, chart);
    let ys = integrate_ode(
        |t, y| {
            let s = unpack(y, n, chart, t)?;
            Ok(pack_derivative(&full_rhs(sys, &s)?))
        },
        &y0,
        &times,
        settings,
        |y| sys.hamiltonian(&unpack(y, n, chart, 0.0)?),
        |t, y| {
            let det = from_row_major(n, &y[2 * n..2 * n + n * n]).determinant();
            let ratio = det / det0;
            if ratio < 1e-10 {
                Err(Error::SingularityApproach { t, ratio })
            } else {
                Ok(())
            }
        },
    )?;
    let samples = ys
        .iter()
        .zip(times.iter())
        .map(|(y, &t)| sample_record(sys, unpack(y, n, chart, t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { chart, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicalMoments {
    pub k: Vector,
    pub big_k: Mat,
    pub k_hat: Mat,
    pub lambda_o: Mat,
    pub i_o: Mat,
}

/// Kinematical momenta kⁱ = m vⁱ, Kⁱʲ = φⁱ_A φ̇ʲ_B Jᴬᴮ, K̂ᴬᴮ = Ω̂ᴮ_C Jᶜᴬ and the
/// affine momenta about `origin`.
pub fn kinematical_moments(sys: &System, state: &FullPhaseState, origin: &Vector) -> Result<KinematicalMoments> {
    let vel = sys.velocities(state)?;
    let j = &sys.params.j;
    let big_k = &state.config.phi * j * vel.phi_dot.transpose();
    let k_hat = j * vel.omega_hat.transpose();
    let lambda_o = (&state.config.x - origin) * state.mom.p.transpose();
    let i_o = &lambda_o + &state.mom.sigma;
    Ok(KinematicalMoments { k: &vel.v * sys.params.m, big_k, k_hat, lambda_o, i_o })
}

/// dI(𝒪)/dt two ways: from the state derivative, and from the forces
/// (x − 𝒪) Q_iᵀ + Qⁱ_j alone.
pub fn affine_momentum_balance(sys: &System, state: &FullPhaseState, origin: &Vector) -> Result<(Mat, Mat)> {
    let d = full_rhs(sys, state)?;
    let dsigma = match d.chart {
        Chart::Spatial => d.dsigma.clone(),
        Chart::CoMoving => {
            // Σ = φΣ̂φ⁻¹ ⇒ dΣ = [Ω, Σ] + φ dΣ̂ φ⁻¹.
            let phi = &state.config.phi;
            let inv = inverse(phi)?;
            let omega = &d.dphi * &inv;
            &omega * &state.mom.sigma - &state.mom.sigma * &omega + phi * &d.dsigma * &inv
        }
    };
    let direct = &d.dx * state.mom.p.transpose() + (&state.config.x - origin) * d.dp.transpose() + dsigma;
    let forces = potential_and_forces(&sys.potential, &state.config, &sys.metrics)?;
    let via = (&state.config.x - origin) * forces.q_i.transpose() + forces.q_mat;
    Ok((direct, via))
}

/// Residual of m dv/dt + m C̃ (dC/dt) v − C̃Q for the Cauchy-coupled
/// translational sector, relative to the largest of the three terms (or 1).
pub fn drunk_missile_residual(sys: &System, state: &FullPhaseState) -> Result<Vector> {
    let phi = &state.config.phi;
    let eta_inv = sys.metrics.eta_inv();
    let d = full_rhs(sys, state)?;
    let m = sys.params.m;
    let c_tilde = phi * eta_inv * phi.transpose();
    let dc_tilde = &d.dphi * eta_inv * phi.transpose() + phi * eta_inv * d.dphi.transpose();
    let dv = (&dc_tilde * &state.mom.p + &c_tilde * &d.dp) / m;
    let inv = inverse(phi)?;
    let c = inv.transpose() * &sys.metrics.eta * &inv;
    let omega = &d.dphi * &inv;
    let dc = -(omega.transpose() * &c + &c * &omega);
    let forces = potential_and_forces(&sys.potential, &state.config, &sys.metrics)?;
    let accel = &dv * m;
    let drag = &c_tilde * dc * &d.dx * m;
    let force = &c_tilde * forces.q_i;
    let scale = max_abs_vec(&accel).max(max_abs_vec(&drag)).max(max_abs_vec(&force)).max(1.0);
    Ok((accel + drag - force) / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftEntry {
    pub name: String,
    pub conserved: bool,
    /// max_t ‖X(t) − X(0)‖ / max(‖X(0)‖, 1), max-norm.
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub entries: Vec<DriftEntry>,
    pub threshold: f64,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().filter(|e| e.conserved).all(|e| e.max_drift <= self.threshold)
    }

    pub fn get(&self, name: &str) -> Option<&DriftEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Names of the quantities conserved by the system's exact dynamics.
pub fn conserved_set(sys: &System, p0_zero: bool) -> Vec<&'static str> {
    use ModelVariant::*;
    let mut out = Vec::new();
    if sys.extra_force.is_some() {
        return out;
    }
    out.push("H");
    let geo = sys.is_geodetic();
    let tr = sys.model.translational;
    let v = sys.model.variant;
    if sys.potential.is_invariant() && tr != Translational::Frozen {
        out.push("p");
        if tr == Translational::Metrical {
            out.push("v");
        }
    }
    if geo {
        match v {
            AffineMetrical | AffineAffine => {
                if tr != Translational::CauchyCoupled || p0_zero {
                    out.push("Sigma");
                }
                if tr != Translational::Metrical {
                    out.push("I_O");
                }
                if v == AffineAffine && tr != Translational::CauchyCoupled {
                    out.push("SigmaHat");
                }
            }
            MetricalAffine => out.push("SigmaHat"),
            _ => {}
        }
    }
    if sys.potential.is_invariant() {
        if tr != Translational::CauchyCoupled || p0_zero {
            out.push("normS");
        }
        let j_isotropic = {
            let jeta = &sys.params.j * &sys.metrics.eta;
            let s = jeta[(0, 0)];
            max_abs(&(&jeta - Mat::identity(sys.dim(), sys.dim()) * s)) < 1e-12 * s.abs()
        };
        if v != DAlembert || j_isotropic {
            out.push("normV");
        }
    }
    out
}

/// Value of a monitored quantity at a sample, flattened row-major.
pub fn monitored_quantity(sys: &System, s: &TrajectorySample, name: &str) -> Result<Vec<f64>> {
    let st = &s.state;
    Ok(match name {
        "H" => vec![s.hamiltonian],
        "p" => st.mom.p.iter().cloned().collect(),
        "v" => sys.velocities(st)?.v.iter().cloned().collect(),
        "Sigma" => flatten_row_major(&st.mom.sigma),
        "SigmaHat" => flatten_row_major(&st.mom.sigma_hat),
        "I_O" => flatten_row_major(&kinematical_moments(sys, st, &Vector::zeros(sys.dim()))?.i_o),
        "normS" => vec![s.norm_s],
        "normV" => vec![s.norm_v],
        "K" => flatten_row_major(&kinematical_moments(sys, st, &Vector::zeros(sys.dim()))?.big_k),
        "pHat" => st.mom.p_hat.iter().cloned().collect(),
        _ => return Err(Error::InvalidParameters(format!("unknown monitored quantity {name}"))),
    })
}

/// The conserved set (flagged true) plus non-conserved diagnostics: K for
/// d'Alembert, p̂ for the metrical-affine model with translation.
pub fn monitored_quantities(sys: &System, p0_zero: bool) -> Vec<(&'static str, bool)> {
    let mut names: Vec<(&str, bool)> = conserved_set(sys, p0_zero).into_iter().map(|n| (n, true)).collect();
    match sys.model.variant {
        ModelVariant::DAlembert => names.push(("K", false)),
        ModelVariant::MetricalAffine if sys.model.translational != Translational::Frozen => names.push(("pHat", false)),
        _ => {}
    }
    names
}

/// Drift of every monitored quantity along a trajectory.
pub fn monitor_invariants(sys: &System, traj: &Trajectory) -> Result<DriftReport> {
    let first = &traj.samples[0];
    let p0_zero = max_abs_vec(&first.state.mom.p) == 0.0;
    let mut entries = Vec::new();
    for (name, conserved) in monitored_quantities(sys, p0_zero) {
        let x0 = monitored_quantity(sys, first, name)?;
        let scale = x0.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
        let mut drift = 0.0_f64;
        for s in &traj.samples {
            let x = monitored_quantity(sys, s, name)?;
            let d = x.iter().zip(&x0).fold(0.0_f64, |a, (u, w)| a.max((u - w).abs()));
            drift = drift.max(d / scale);
        }
        entries.push(DriftEntry { name: name.to_string(), conserved, max_drift: drift });
    }
    Ok(DriftReport { entries, threshold: 1e-6 })
}
