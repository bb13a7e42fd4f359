//! Two-polar reduction: the closed (q, p, M, N) subsystem, reduced
//! Hamiltonians, frame reconstruction and the Sutherland oracle.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_ode, linspace, richardson, FullPhaseState, IntegratorSettings, PotentialKind, PotentialSpec};
use crate::error::{Error, Result};
use crate::kinematics::{two_polar_decompose, Configuration, MetricPair, TwoPolarFactors, DEGENERACY_TOL};
use crate::linalg::{flatten_row_major, from_row_major, max_abs, Mat, Vector};
use crate::models::{InertiaParameters, ModelVariant, MomentumState};
use crate::poisson::{mn_bracket_table, skew_pairs, BracketTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DilatationKind {
    CoshWell,
    Quadratic,
    TanhThreshold,
}

/// Dilatational potential V(q̄) and its derivative.
///
/// CoshWell is κ/8(D² + D⁻² − 2) with D = e^q̄, i.e. κ/4(ch 2q̄ − 1), so that
/// V''(0) = κ. TanhThreshold is κ/2(th²q̄ − 1), a well of depth κ/2 that
/// flattens to zero for unlimited expansion or contraction.
pub fn dilatational_potential(kind: DilatationKind, kappa: f64, q: f64) -> (f64, f64) {
    match kind {
        DilatationKind::CoshWell => (0.25 * kappa * ((2.0 * q).cosh() - 1.0), 0.5 * kappa * (2.0 * q).sinh()),
        DilatationKind::Quadratic => (0.5 * kappa * q * q, kappa * q),
        DilatationKind::TanhThreshold => {
            let t = q.tanh();
            (0.5 * kappa * (t * t - 1.0), kappa * t * (1.0 - t * t))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPhaseState {
    pub q: Vector,
    pub p: Vector,
    /// M = −ρ̂ − τ̂, antisymmetric.
    pub m: Mat,
    /// N = ρ̂ − τ̂, antisymmetric.
    pub n: Mat,
    pub l: Mat,
    pub r: Mat,
    pub time: f64,
}

impl ReducedPhaseState {
    /// State with identity frames.
    pub fn new(q: Vector, p: Vector, m: Mat, n: Mat) -> Self {
        let d = q.len();
        Self { q, p, m, n, l: Mat::identity(d, d), r: Mat::identity(d, d), time: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn rho_hat(&self) -> Mat {
        (&self.n - &self.m) * 0.5
    }

    pub fn tau_hat(&self) -> Mat {
        -(&self.n + &self.m) * 0.5
    }

    pub fn norm_s(&self) -> f64 {
        skew_norm(&self.rho_hat())
    }

    pub fn norm_v(&self) -> f64 {
        skew_norm(&self.tau_hat())
    }

    /// Independent coupling components M_ab, then N_ab (a < b).
    pub fn couplings(&self) -> Vec<f64> {
        let pairs = skew_pairs(self.dim());
        pairs.iter().map(|&(a, b)| self.m[(a, b)]).chain(pairs.iter().map(|&(a, b)| self.n[(a, b)])).collect()
    }
}

fn skew_norm(x: &Mat) -> f64 {
    let n = x.nrows();
    skew_pairs(n).iter().map(|&(a, b)| x[(a, b)] * x[(a, b)]).sum::<f64>().sqrt()
}

fn skew_from_pairs(n: usize, vals: &[f64]) -> Mat {
    let mut m = Mat::zeros(n, n);
    for (k, &(a, b)) in skew_pairs(n).iter().enumerate() {
        m[(a, b)] = vals[k];
        m[(b, a)] = -vals[k];
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilatationSplit {
    pub q_mean: f64,
    pub p_dil: f64,
    pub psi: Mat,
    pub sigma_dev: Mat,
}

/// φ = e^q̄·Ψ with det Ψ = 1 and Σ = σ + (p/n)·Id with Tr σ = 0.
pub fn dilatation_split(phi: &Mat, sigma: &Mat) -> Result<DilatationSplit> {
    let n = phi.nrows();
    let det = phi.determinant();
    if !(det > 0.0) {
        return Err(Error::NegativeOrientation(det));
    }
    let q_mean = det.ln() / n as f64;
    let p_dil = sigma.trace();
    Ok(DilatationSplit {
        q_mean,
        p_dil,
        psi: phi * (-q_mean).exp(),
        sigma_dev: sigma - Mat::identity(n, n) * (p_dil / n as f64),
    })
}

/// Σ̃ = L⁻¹ΣL together with the stretchings, in orthonormal coordinates.
fn frame_spin(full: &FullPhaseState, metrics: &MetricPair, f: &TwoPolarFactors) -> Mat {
    let l_o = metrics.spatial_frame_to_orthonormal(&f.l);
    let s_o = metrics.spatial_to_orthonormal(&full.mom.sigma);
    l_o.transpose() * s_o * l_o
}

/// Reduced variables of a full internal state. A continuity hint is needed
/// when the stretchings are degenerate; the translational part is dropped.
pub fn reduce_state(full: &FullPhaseState, metrics: &MetricPair, hint: Option<&TwoPolarFactors>) -> Result<ReducedPhaseState> {
    let f = two_polar_decompose(&full.config.phi, metrics, hint)?;
    reduce_with_factors(full, metrics, &f, hint.is_some())
}

/// As [`reduce_state`], also returning the two-polar factors used, which may
/// serve as the hint for the next sample along a trajectory.
pub fn reduce_state_tracked(full: &FullPhaseState, metrics: &MetricPair, hint: Option<&TwoPolarFactors>) -> Result<(ReducedPhaseState, TwoPolarFactors)> {
    let f = two_polar_decompose(&full.config.phi, metrics, hint)?;
    let red = reduce_with_factors(full, metrics, &f, hint.is_some())?;
    Ok((red, f))
}

fn reduce_with_factors(full: &FullPhaseState, metrics: &MetricPair, f: &TwoPolarFactors, hinted: bool) -> Result<ReducedPhaseState> {
    let n = f.d.len();
    let q = f.q();
    if !hinted && f.degenerate.is_some() {
        let mut gap = f64::INFINITY;
        for a in 0..n {
            for b in a + 1..n {
                gap = gap.min((q[a] - q[b]).abs());
            }
        }
        return Err(Error::DegenerateSpectrum { gap });
    }
    let st = frame_spin(full, metrics, f);
    let p = st.diagonal();
    let rho = &st - st.transpose();
    // R'ᵀΣ̂'R' = D⁻¹Σ̃D.
    let mut conj = st.clone();
    for a in 0..n {
        for b in 0..n {
            conj[(a, b)] *= (q[b] - q[a]).exp();
        }
    }
    let tau = -(&conj - conj.transpose());
    Ok(ReducedPhaseState { m: -(&rho + &tau), n: &rho - &tau, q, p, l: f.l.clone(), r: f.r.clone(), time: full.time })
}

/// Σ̃ rebuilt from (q, p, M, N).
fn frame_spin_from_reduced(red: &ReducedPhaseState) -> Result<Mat> {
    let n = red.dim();
    let mut st = Mat::from_diagonal(&red.p);
    for a in 0..n {
        for b in a + 1..n {
            let delta = red.q[a] - red.q[b];
            let sh = 2.0 * (0.5 * delta).sinh();
            let ch = 2.0 * (0.5 * delta).cosh();
            let m = red.m[(a, b)];
            let sum = if sh.abs() < DEGENERACY_TOL {
                if m != 0.0 {
                    return Err(Error::CoincidentInvariants { a, b, gap: delta.abs() });
                }
                0.0
            } else {
                -m / sh
            };
            let diff = red.n[(a, b)] / ch;
            let u = 0.5 * (sum + diff);
            let w = 0.5 * (sum - diff);
            st[(a, b)] = u * (0.5 * delta).exp();
            st[(b, a)] = w * (-0.5 * delta).exp();
        }
    }
    Ok(st)
}

/// Inverse of [`reduce_state`]: φ = L·diag(e^q)·R⁻¹ and Σ = LΣ̃L⁻¹, with the
/// given translational data.
pub fn reconstruct_state(red: &ReducedPhaseState, metrics: &MetricPair, x: Vector, p: Vector) -> Result<FullPhaseState> {
    let d = red.q.map(f64::exp);
    let f = TwoPolarFactors { l: red.l.clone(), d, r: red.r.clone(), degenerate: None };
    let phi = f.reconstruct(metrics);
    let st = frame_spin_from_reduced(red)?;
    let l_o = metrics.spatial_frame_to_orthonormal(&red.l);
    let sigma = metrics.spatial_from_orthonormal(&(&l_o * st * l_o.transpose()));
    let mom = MomentumState::from_spatial(&phi, p, sigma)?;
    Ok(FullPhaseState { config: Configuration::new(phi, x)?, mom, time: red.time })
}

/// (Q, P) with Qᵃ = e^{qᵃ} and Pₐ = pₐ/Qᵃ, so that pₐdqᵃ = PₐdQᵃ.
pub fn to_stretch_chart(q: &Vector, p: &Vector) -> (Vector, Vector) {
    let big_q = q.map(f64::exp);
    let big_p = p.component_div(&big_q);
    (big_q, big_p)
}

pub fn from_stretch_chart(big_q: &Vector, big_p: &Vector) -> (Vector, Vector) {
    (big_q.map(f64::ln), big_p.component_mul(big_q))
}

/// Reduced d'Alembert kinetic energy in the stretch chart, for J = I·η⁻¹:
/// ΣPₐ²/(2I) + Σ_{a<b} [M²/(4I(Qᵃ−Qᵇ)²) + N²/(4I(Qᵃ+Qᵇ)²)].
pub fn dalembert_stretch_energy(big_q: &Vector, big_p: &Vector, m: &Mat, n: &Mat, inertia: f64) -> Result<f64> {
    let d = big_q.len();
    let mut t = big_p.norm_squared() / (2.0 * inertia);
    for a in 0..d {
        for b in a + 1..d {
            let diff = big_q[a] - big_q[b];
            let mab = m[(a, b)];
            if mab != 0.0 && diff.abs() < DEGENERACY_TOL {
                return Err(Error::CoincidentInvariants { a, b, gap: diff.abs() });
            }
            if mab != 0.0 {
                t += mab * mab / (4.0 * inertia * diff * diff);
            }
            let s = big_q[a] + big_q[b];
            t += n[(a, b)].powi(2) / (4.0 * inertia * s * s);
        }
    }
    Ok(t)
}

/// Pair kernels for the affine families: (k₁, k₁', k₂, k₂', sign of the N term).
fn kernels(trig: bool, d: f64) -> (f64, f64, f64, f64, f64) {
    let h = 0.5 * d;
    if trig {
        let (s, c) = h.sin_cos();
        (1.0 / (s * s), -c / (s * s * s), 1.0 / (c * c), s / (c * c * c), 1.0)
    } else {
        let (s, c) = (h.sinh(), h.cosh());
        (1.0 / (s * s), -c / (s * s * s), 1.0 / (c * c), -s / (c * c * c), -1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedOptions {
    /// Integrate the frames L, R alongside (q, p, M, N).
    pub frames: bool,
    /// Hold M and N fixed; the Sutherland-limit comparison uses this.
    pub freeze_couplings: bool,
}

impl Default for ReducedOptions {
    fn default() -> Self {
        Self { frames: true, freeze_couplings: false }
    }
}

/// Reduced model: kinetic family, parameters and an invariant potential.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub variant: ModelVariant,
    pub params: InertiaParameters,
    pub potential: PotentialSpec,
    pub options: ReducedOptions,
    n: usize,
    table: BracketTable,
    coef: Coefficients,
}

#[derive(Debug, Clone, Copy)]
struct Coefficients {
    alpha: f64,
    c_b: f64,
    c_i: f64,
    dalembert_inertia: f64,
}

/// Gradient of the reduced Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGradient {
    pub dq: Vector,
    pub dp: Vector,
    /// ∂H/∂M_ab for a < b.
    pub dm: Vec<f64>,
    /// ∂H/∂N_ab for a < b.
    pub dn: Vec<f64>,
}

impl ReducedSystem {
    pub fn new(variant: ModelVariant, params: InertiaParameters, potential: PotentialSpec, n: usize) -> Result<Self> {
        if potential.kind == PotentialKind::GeneralConfig {
            return Err(Error::InvalidParameters("reduced dynamics needs a potential depending on the invariants only".into()));
        }
        let nf = n as f64;
        let coef = match variant {
            ModelVariant::AffineAffine | ModelVariant::UnitaryCompact => {
                let a = params.a;
                if a == 0.0 || a + nf * params.b == 0.0 {
                    return Err(Error::SingularInertia(format!("A = {a}, A + nB = {}", a + nf * params.b)));
                }
                Coefficients { alpha: a, c_b: -params.b / (a * (a + nf * params.b)), c_i: 0.0, dalembert_inertia: 0.0 }
            }
            ModelVariant::AffineMetrical | ModelVariant::MetricalAffine => {
                let (i, a, b) = (params.i, params.a, params.b);
                if i * i == a * a || i + a == 0.0 || i + a + nf * b == 0.0 {
                    return Err(Error::SingularInertia(format!("I = {i}, A = {a}, B = {b}")));
                }
                Coefficients { alpha: i + a, c_b: params.c_b(n), c_i: params.c_i(), dalembert_inertia: 0.0 }
            }
            ModelVariant::DAlembert => {
                let s = params.j[(0, 0)];
                if !(s > 0.0) || max_abs(&(&params.j - Mat::identity(n, n) * s)) > 1e-12 * s {
                    return Err(Error::InvalidParameters("the reduced d'Alembert model requires an isotropic inertia J = I·Id (orthonormal material frame)".into()));
                }
                Coefficients { alpha: 0.0, c_b: 0.0, c_i: 0.0, dalembert_inertia: s }
            }
        };
        Ok(Self { variant, params, potential, options: ReducedOptions::default(), n, table: mn_bracket_table(n), coef })
    }

    pub fn with_options(mut self, options: ReducedOptions) -> Self {
        self.options = options;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &BracketTable {
        &self.table
    }

    fn trig(&self) -> bool {
        self.variant == ModelVariant::UnitaryCompact
    }

    fn check_coincidence(&self, st: &ReducedPhaseState) -> Result<()> {
        let n = self.n;
        for a in 0..n {
            for b in a + 1..n {
                let d = st.q[a] - st.q[b];
                let (sing_m, sing_n) = if self.trig() {
                    ((0.5 * d).sin().abs() < 1e-6, (0.5 * d).cos().abs() < 1e-6)
                } else {
                    (d.abs() < 1e-6, false)
                };
                if (sing_m && st.m[(a, b)] != 0.0) || (sing_n && st.n[(a, b)] != 0.0) {
                    return Err(Error::CoincidentInvariants { a, b, gap: d.abs() });
                }
            }
        }
        Ok(())
    }

    /// Kinetic part of the reduced Hamiltonian.
    pub fn kinetic(&self, st: &ReducedPhaseState) -> Result<f64> {
        self.check_coincidence(st)?;
        let n = self.n;
        if self.variant == ModelVariant::DAlembert {
            let (bq, bp) = to_stretch_chart(&st.q, &st.p);
            return dalembert_stretch_energy(&bq, &bp, &st.m, &st.n, self.coef.dalembert_inertia);
        }
        let c = self.coef;
        let psum: f64 = st.p.sum();
        let mut t = st.p.norm_squared() / (2.0 * c.alpha) + 0.5 * c.c_b * psum * psum;
        for a in 0..n {
            for b in a + 1..n {
                let (k1, _, k2, _, sgn) = kernels(self.trig(), st.q[a] - st.q[b]);
                let m = st.m[(a, b)];
                let nn = st.n[(a, b)];
                let mut term = 0.0;
                if m != 0.0 {
                    term += m * m * k1;
                }
                term += sgn * nn * nn * k2;
                t += term / (16.0 * c.alpha);
            }
        }
        t += match self.variant {
            ModelVariant::AffineMetrical => 0.5 * c.c_i * st.norm_v().powi(2),
            ModelVariant::MetricalAffine => 0.5 * c.c_i * st.norm_s().powi(2),
            _ => 0.0,
        };
        Ok(t)
    }

    pub fn potential_value(&self, q: &Vector) -> Result<f64> {
        let qs: Vec<f64> = q.iter().cloned().collect();
        Ok(self.potential.invariant_value_and_gradient(&qs)?.0)
    }

    pub fn hamiltonian(&self, st: &ReducedPhaseState) -> Result<f64> {
        Ok(self.kinetic(st)? + self.potential_value(&st.q)?)
    }

    /// Analytic gradient of the reduced Hamiltonian.
    pub fn gradient(&self, st: &ReducedPhaseState) -> Result<ReducedGradient> {
        self.check_coincidence(st)?;
        let n = self.n;
        let pairs = skew_pairs(n);
        let qs: Vec<f64> = st.q.iter().cloned().collect();
        let (_, vgrad) = self.potential.invariant_value_and_gradient(&qs)?;
        let mut dq = Vector::from_vec(vgrad);
        let mut dp = Vector::zeros(n);
        let mut dm = vec![0.0; pairs.len()];
        let mut dn = vec![0.0; pairs.len()];
        if self.variant == ModelVariant::DAlembert {
            let inertia = self.coef.dalembert_inertia;
            let big_q = st.q.map(f64::exp);
            for a in 0..n {
                let e = (-2.0 * st.q[a]).exp();
                dp[a] = st.p[a] * e / inertia;
                dq[a] -= st.p[a] * st.p[a] * e / inertia;
            }
            for (k, &(a, b)) in pairs.iter().enumerate() {
                let m = st.m[(a, b)];
                let nn = st.n[(a, b)];
                let diff = big_q[a] - big_q[b];
                let sum = big_q[a] + big_q[b];
                // ∂/∂Qᵃ and ∂/∂Qᵇ, then chain with dQ/dq = Q.
                let (mut ga, mut gb) = (0.0, 0.0);
                if m != 0.0 {
                    let g = -m * m / (2.0 * inertia * diff.powi(3));
                    ga += g;
                    gb -= g;
                    dm[k] = m / (2.0 * inertia * diff * diff);
                }
                let gn = -nn * nn / (2.0 * inertia * sum.powi(3));
                ga += gn;
                gb += gn;
                dn[k] = nn / (2.0 * inertia * sum * sum);
                dq[a] += ga * big_q[a];
                dq[b] += gb * big_q[b];
            }
            return Ok(ReducedGradient { dq, dp, dm, dn });
        }
        let c = self.coef;
        let psum: f64 = st.p.sum();
        for a in 0..n {
            dp[a] = st.p[a] / c.alpha + c.c_b * psum;
        }
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let (k1, k1p, k2, k2p, sgn) = kernels(self.trig(), st.q[a] - st.q[b]);
            let m = st.m[(a, b)];
            let nn = st.n[(a, b)];
            let mut dd = sgn * nn * nn * k2p;
            if m != 0.0 {
                dd += m * m * k1p;
                dm[k] = m * k1 / (8.0 * c.alpha);
            }
            dn[k] = sgn * nn * k2 / (8.0 * c.alpha);
            dd /= 16.0 * c.alpha;
            dq[a] += dd;
            dq[b] -= dd;
        }
        match self.variant {
            ModelVariant::AffineMetrical => {
                let tau = st.tau_hat();
                for (k, &(a, b)) in pairs.iter().enumerate() {
                    dm[k] -= 0.5 * c.c_i * tau[(a, b)];
                    dn[k] -= 0.5 * c.c_i * tau[(a, b)];
                }
            }
            ModelVariant::MetricalAffine => {
                let rho = st.rho_hat();
                for (k, &(a, b)) in pairs.iter().enumerate() {
                    dm[k] -= 0.5 * c.c_i * rho[(a, b)];
                    dn[k] += 0.5 * c.c_i * rho[(a, b)];
                }
            }
            _ => {}
        }
        Ok(ReducedGradient { dq, dp, dm, dn })
    }

    /// Gradient by central differences with Richardson extrapolation; the
    /// fallback for arbitrary Hamiltonians and the oracle for the analytic
    /// one.
    pub fn gradient_fd(&self, st: &ReducedPhaseState) -> Result<ReducedGradient> {
        let n = self.n;
        let pairs = skew_pairs(n);
        let h = |s: &ReducedPhaseState| self.hamiltonian(s).unwrap_or(f64::NAN);
        let dq = Vector::from_fn(n, |a, _| {
            richardson(|e| {
                let mut s = st.clone();
                s.q[a] += e;
                h(&s)
            })
        });
        let dp = Vector::from_fn(n, |a, _| {
            richardson(|e| {
                let mut s = st.clone();
                s.p[a] += e;
                h(&s)
            })
        });
        let along = |which: bool, a: usize, b: usize| {
            richardson(|e| {
                let mut s = st.clone();
                let x = if which { &mut s.m } else { &mut s.n };
                x[(a, b)] += e;
                x[(b, a)] -= e;
                h(&s)
            })
        };
        let dm = pairs.iter().map(|&(a, b)| along(true, a, b)).collect();
        let dn = pairs.iter().map(|&(a, b)| along(false, a, b)).collect();
        let out = ReducedGradient { dq, dp, dm, dn };
        if out.dq.iter().chain(out.dp.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameters("finite-difference gradient is not finite".into()));
        }
        Ok(out)
    }

    /// Time derivative of the reduced state.
    pub fn rhs(&self, st: &ReducedPhaseState) -> Result<ReducedDerivative> {
        let g = self.gradient(st)?;
        let n = self.n;
        let np = skew_pairs(n).len();
        let (dm, dn) = if self.options.freeze_couplings {
            (Mat::zeros(n, n), Mat::zeros(n, n))
        } else {
            let values = st.couplings();
            let grad: Vec<f64> = g.dm.iter().chain(g.dn.iter()).cloned().collect();
            let flow = self.table.hamiltonian_flow(&values, &grad);
            (skew_from_pairs(n, &flow[..np]), skew_from_pairs(n, &flow[np..]))
        };
        let (dl, dr) = if self.options.frames {
            // ∂H/∂ρ̂ = −∂H/∂M + ∂H/∂N, ∂H/∂τ̂ = −∂H/∂M − ∂H/∂N.
            let d_rho: Vec<f64> = (0..np).map(|k| -g.dm[k] + g.dn[k]).collect();
            let d_tau: Vec<f64> = (0..np).map(|k| -g.dm[k] - g.dn[k]).collect();
            let chi = -skew_from_pairs(n, &d_rho);
            let theta = -skew_from_pairs(n, &d_tau);
            (&st.l * chi, &st.r * theta)
        } else {
            (Mat::zeros(n, n), Mat::zeros(n, n))
        };
        Ok(ReducedDerivative { dq: g.dp, dp: -g.dq, dm, dn, dl, dr })
    }

    fn pack(&self, st: &ReducedPhaseState) -> Vec<f64> {
        let mut y: Vec<f64> = st.q.iter().chain(st.p.iter()).cloned().collect();
        y.extend(st.couplings());
        if self.options.frames {
            y.extend(flatten_row_major(&st.l));
            y.extend(flatten_row_major(&st.r));
        }
        y
    }

    fn unpack(&self, y: &[f64], template: &ReducedPhaseState, time: f64) -> ReducedPhaseState {
        let n = self.n;
        let np = skew_pairs(n).len();
        let mut o = 2 * n;
        let m = skew_from_pairs(n, &y[o..o + np]);
        o += np;
        let nn = skew_from_pairs(n, &y[o..o + np]);
        o += np;
        let (l, r) = if self.options.frames {
            (from_row_major(n, &y[o..o + n * n]), from_row_major(n, &y[o + n * n..o + 2 * n * n]))
        } else {
            (template.l.clone(), template.r.clone())
        };
        ReducedPhaseState { q: Vector::from_row_slice(&y[..n]), p: Vector::from_row_slice(&y[n..2 * n]), m, n: nn, l, r, time }
    }

    fn pack_derivative(&self, d: &ReducedDerivative) -> Vec<f64> {
        let n = self.n;
        let pairs = skew_pairs(n);
        let mut y: Vec<f64> = d.dq.iter().chain(d.dp.iter()).cloned().collect();
        y.extend(pairs.iter().map(|&(a, b)| d.dm[(a, b)]));
        y.extend(pairs.iter().map(|&(a, b)| d.dn[(a, b)]));
        if self.options.frames {
            y.extend(flatten_row_major(&d.dl));
            y.extend(flatten_row_major(&d.dr));
        }
        y
    }

    /// Integrates the reduced equations and records `sample_count` equally
    /// spaced samples over [t₀, t₀ + duration].
    pub fn integrate(&self, st0: &ReducedPhaseState, duration: f64, sample_count: usize, settings: &IntegratorSettings) -> Result<ReducedTrajectory> {
        let t0 = st0.time;
        let times = linspace(t0, t0 + duration, sample_count);
        let y0 = self.pack(st0);
        let ys = integrate_ode(
            |t, y| Ok(self.pack_derivative(&self.rhs(&self.unpack(y, st0, t))?)),
            &y0,
            &times,
            settings,
            |y| self.hamiltonian(&self.unpack(y, st0, 0.0)),
            |_, y| self.check_coincidence(&self.unpack(y, st0, 0.0)),
        )?;
        let samples = ys
            .iter()
            .zip(&times)
            .map(|(y, &t)| {
                let state = self.unpack(y, st0, t);
                Ok(ReducedSample { hamiltonian: self.hamiltonian(&state)?, norm_s: state.norm_s(), norm_v: state.norm_v(), state })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReducedTrajectory { samples })
    }

    /// Decomposition of the reduced Hamiltonian into shear, dilatational and
    /// spin/vorticity parts.
    pub fn splitting_report(&self, st: &ReducedPhaseState) -> Result<SplittingReport> {
        let n = self.n;
        let nf = n as f64;
        let psum: f64 = st.p.sum();
        let mut rel = 0.0;
        for a in 0..n {
            for b in 0..n {
                rel += (st.p[a] - st.p[b]).powi(2);
            }
        }
        rel /= 2.0 * nf;
        let mut kern = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                let (k1, _, k2, _, sgn) = kernels(self.trig(), st.q[a] - st.q[b]);
                let m = st.m[(a, b)];
                if m != 0.0 {
                    kern += m * m * k1;
                }
                kern += sgn * st.n[(a, b)].powi(2) * k2;
            }
        }
        let c_sl2 = rel + kern / 8.0;
        let relative_momentum_form = rel + psum * psum / nf;
        let potential = self.potential_value(&st.q)?;
        let kinetic = self.kinetic(st)?;
        let (t_shear, t_dil, t_spin) = if self.variant == ModelVariant::DAlembert {
            (kinetic, 0.0, 0.0)
        } else {
            let c = self.coef;
            let t_shear = c_sl2 / (2.0 * c.alpha);
            let t_dil = psum * psum / (2.0 * c.alpha * nf) + 0.5 * c.c_b * psum * psum;
            (t_shear, t_dil, kinetic - t_shear - t_dil)
        };
        Ok(SplittingReport { t_shear, t_dil, t_spin, potential, c_sl2, relative_momentum_form, total: kinetic + potential })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDerivative {
    pub dq: Vector,
    pub dp: Vector,
    pub dm: Mat,
    pub dn: Mat,
    pub dl: Mat,
    pub dr: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSample {
    pub state: ReducedPhaseState,
    pub hamiltonian: f64,
    pub norm_s: f64,
    pub norm_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub samples: Vec<ReducedSample>,
}

impl ReducedTrajectory {
    /// Largest |qᵃ − qᵇ| over all samples up to time `t_max`.
    pub fn max_spread(&self, t_max: f64) -> f64 {
        self.samples.iter().filter(|s| s.state.time <= t_max + 1e-12).map(|s| spread(&s.state.q)).fold(0.0, f64::max)
    }

    pub fn max_hamiltonian_drift(&self) -> f64 {
        let h0 = self.samples[0].hamiltonian;
        let scale = h0.abs().max(1e-300);
        self.samples.iter().map(|s| (s.hamiltonian - h0).abs() / scale).fold(0.0, f64::max)
    }
}

/// max_a qᵃ − min_a qᵃ.
pub fn spread(q: &Vector) -> f64 {
    q.max() - q.min()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingReport {
    /// C_SL(n)(2)/(2α).
    pub t_shear: f64,
    /// Dilatational kinetic part in the total momentum Σpₐ.
    pub t_dil: f64,
    /// ‖S‖² or ‖V‖² term.
    pub t_spin: f64,
    pub potential: f64,
    /// (1/2n)Σ_{a,b}(pₐ − p_b)² + (1/16)Σ_{a,b}(M²k₁ ∓ N²k₂).
    pub c_sl2: f64,
    /// (1/2n)Σ_{a,b}(pₐ − p_b)² + (Σpₐ)²/n, equal to Σpₐ².
    pub relative_momentum_form: f64,
    pub total: f64,
}

/// Hyperbolic Sutherland lattice H = Σpₐ²/2 + (M²/16)Σ_{a<b} sh⁻²((qᵃ − qᵇ)/2),
/// written independently of [`ReducedSystem`]. Returns (dq/dt, dp/dt).
pub fn sutherland_oracle_rhs(q: &[f64], p: &[f64], coupling: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = q.len();
    let g = coupling * coupling / 16.0;
    let mut force = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let x = 0.5 * (q[i] - q[j]);
            if g != 0.0 && x.abs() < 5e-7 {
                return Err(Error::CoincidentInvariants { a: i.min(j), b: i.max(j), gap: 2.0 * x.abs() });
            }
            // −∂/∂qⁱ of g·sh⁻²(x) is g·ch(x)/sh³(x).
            force[i] += g * x.cosh() / x.sinh().powi(3);
        }
    }
    Ok((p.to_vec(), force))
}

pub fn sutherland_oracle_energy(q: &[f64], p: &[f64], coupling: f64) -> f64 {
    let n = q.len();
    let mut e: f64 = p.iter().map(|x| 0.5 * x * x).sum();
    for i in 0..n {
        for j in i + 1..n {
            e += coupling * coupling / 16.0 / (0.5 * (q[i] - q[j])).sinh().powi(2);
        }
    }
    e
}

/// Oracle trajectory sampled at `sample_count` equally spaced times; each
/// row is (q, p).
pub fn integrate_sutherland_oracle(q0: &[f64], p0: &[f64], coupling: f64, duration: f64, sample_count: usize, settings: &IntegratorSettings) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let n = q0.len();
    let y0: Vec<f64> = q0.iter().chain(p0).cloned().collect();
    let times = linspace(0.0, duration, sample_count);
    let ys = integrate_ode(
        |_, y| {
            let (a, b) = sutherland_oracle_rhs(&y[..n], &y[n..], coupling)?;
            Ok(a.into_iter().chain(b).collect())
        },
        &y0,
        &times,
        settings,
        |y| Ok(sutherland_oracle_energy(&y[..n], &y[n..], coupling)),
        |_, _| Ok(()),
    )?;
    Ok(ys.into_iter().map(|y| (y[..n].to_vec(), y[n..].to_vec())).collect())
}
