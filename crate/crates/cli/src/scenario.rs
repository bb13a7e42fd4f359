//! Scenario documents: JSON schema, defaults and semantic validation.

use std::fmt;

use afftop_core::dynamics::{FullPhaseState, IntegratorSettings, PotentialSpec, ShearPair, System};
use afftop_core::geodesics::{BoundednessClass, CurveSide, PerturbationFamily};
use afftop_core::kinematics::{Configuration, MetricPair};
use afftop_core::lattice::{DilatationKind, ReducedOptions, ReducedPhaseState};
use afftop_core::linalg::{max_abs, Mat, Vector};
use afftop_core::models::{validate_params, InertiaParameters, KineticModel, ModelVariant, MomentumState, Translational};
use afftop_core::sampling;
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "afftop-scenario/1";

pub type MatrixDoc = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub model: ModelDoc,
    pub params: ParamsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsDoc>,
    pub initial: InitialDoc,
    #[serde(default)]
    pub potential: PotentialDoc,
    #[serde(default)]
    pub integrator: IntegratorDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsChart>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_options: Option<ReducedOptionsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibria: Option<EquilibriaDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub variant: ModelVariant,
    #[serde(default = "frozen")]
    pub translational: Translational,
}

fn frozen() -> Translational {
    Translational::Frozen
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    #[serde(default = "one")]
    pub m: f64,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<MatrixDoc>,
    #[serde(rename = "I", default)]
    pub i: f64,
    #[serde(rename = "A", default)]
    pub a: f64,
    #[serde(rename = "B", default)]
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsDoc {
    pub eta: MatrixDoc,
    pub g: MatrixDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialDoc {
    Full(FullInitialDoc),
    Reduced(ReducedInitialDoc),
    Random(RandomInitialDoc),
}

/// Configuration plus either velocities (φ̇, v) or momenta (Σ, p); neither
/// means rest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullInitialDoc {
    pub phi: MatrixDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_dot: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedInitialDoc {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(rename = "M")]
    pub m: MatrixDoc,
    #[serde(rename = "N")]
    pub n: MatrixDoc,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<MatrixDoc>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<TranslationDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationDoc {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

/// φ = exp(X) and φ̇ Gaussian, drawn from the scenario seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInitialDoc {
    #[serde(default = "default_phi_scale")]
    pub phi_scale: f64,
    #[serde(default = "default_velocity_scale")]
    pub velocity_scale: f64,
    #[serde(default)]
    pub translation: bool,
}

fn default_phi_scale() -> f64 {
    0.3
}

fn default_velocity_scale() -> f64 {
    0.4
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PotentialDoc {
    #[default]
    None,
    Dilatation { dilatation: DilatationKind, kappa: f64 },
    DoublyIsotropic {
        dilatation: DilatationKind,
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shear_pair: Option<ShearPair>,
    },
}

impl PotentialDoc {
    pub fn spec(&self) -> PotentialSpec {
        match self {
            PotentialDoc::None => PotentialSpec::none(),
            PotentialDoc::Dilatation { dilatation, kappa } => PotentialSpec::dilatation(*dilatation, *kappa),
            PotentialDoc::DoublyIsotropic { dilatation, kappa, shear_pair } => PotentialSpec::doubly_isotropic(*dilatation, *kappa, *shear_pair),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorDoc {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub drift_threshold: f64,
    pub max_steps: usize,
    pub t_end: f64,
    pub sample_count: usize,
}

impl Default for IntegratorDoc {
    fn default() -> Self {
        let s = IntegratorSettings::default();
        Self { rel_tol: s.rel_tol, abs_tol: s.abs_tol, max_step: s.max_step, drift_threshold: s.drift_threshold, max_steps: s.max_steps, t_end: 10.0, sample_count: 101 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsChart {
    Full,
    Reduced,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedOptionsDoc {
    pub frames: bool,
    pub freeze_couplings: bool,
}

impl Default for ReducedOptionsDoc {
    fn default() -> Self {
        let o = ReducedOptions::default();
        Self { frames: o.frames, freeze_couplings: o.freeze_couplings }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    pub family: PerturbationFamily,
    pub radius: f64,
    #[serde(default = "default_sweep_samples")]
    pub samples: usize,
}

fn default_sweep_samples() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaDoc {
    pub side: CurveSide,
    pub generators: Vec<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_samples: Option<Vec<f64>>,
    #[serde(default = "default_normality_tol")]
    pub tol: f64,
}

fn default_normality_tol() -> f64 {
    1e-9
}

/// Scenario-specific assertions run by `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckDoc {
    /// sup spread over the run below `factor` × sup spread over [0, early].
    BoundedSpread {
        #[serde(default = "default_early")]
        early: f64,
        #[serde(default = "default_bound_factor")]
        factor: f64,
    },
    /// Non-decreasing spread, ending above `min_growth` × its value at `early`.
    MonotoneSpread {
        #[serde(default = "default_early")]
        early: f64,
        #[serde(default = "default_growth")]
        min_growth: f64,
    },
    /// (q, p) against the independent Sutherland integrator.
    SutherlandOracle {
        #[serde(default = "default_oracle_tol")]
        tol: f64,
    },
    /// Reduced trajectory against the reduction of the full-chart one.
    DualChart {
        #[serde(default = "default_oracle_tol")]
        tol: f64,
    },
    ExpectClass { class: BoundednessClass },
    /// Residuals agree with the normality prediction for every generator.
    EquilibriaAgree,
}

fn default_early() -> f64 {
    10.0
}

fn default_bound_factor() -> f64 {
    10.0
}

fn default_growth() -> f64 {
    3.0
}

fn default_oracle_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Column groups to keep (t is always written).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<String>>,
}

/// A problem found in a scenario, located by its JSON path.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("schema error: {}", join(.0))]
    Schema(Vec<Issue>),
    #[error("semantic error: {}", join(.0))]
    Semantic(Vec<Issue>),
}

fn join(issues: &[Issue]) -> String {
    issues.iter().map(Issue::to_string).collect::<Vec<_>>().join("; ")
}

impl ScenarioError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ScenarioError::Schema(v) | ScenarioError::Semantic(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Initial {
    Full(FullPhaseState),
    Reduced { state: ReducedPhaseState, x: Vector, p: Vector },
}

/// A validated scenario with every core object built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub n: usize,
    pub model: KineticModel,
    pub params: InertiaParameters,
    pub metrics: MetricPair,
    pub potential: PotentialSpec,
    pub settings: IntegratorSettings,
    pub t_end: f64,
    pub sample_count: usize,
    pub initial: Initial,
    pub chart: DynamicsChart,
    pub reduced_options: ReducedOptions,
    pub generator: Option<Mat>,
    pub seed: u64,
}

impl Scenario {
    pub fn system(&self) -> System {
        System::new(self.model, self.params.clone(), self.potential.clone(), self.metrics.clone())
    }

    pub fn name(&self) -> &str {
        self.doc.name.as_deref().unwrap_or("scenario")
    }
}

struct Checker {
    n: usize,
    issues: Vec<Issue>,
}

impl Checker {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.issues.push(Issue { path: path.to_string(), message: message.into() });
    }

    fn matrix(&mut self, path: &str, m: &MatrixDoc) -> Option<Mat> {
        let n = self.n;
        if m.len() != n || m.iter().any(|row| row.len() != n) {
            self.push(path, format!("expected a {n}×{n} matrix"));
            return None;
        }
        if m.iter().flatten().any(|x| !x.is_finite()) {
            self.push(path, "entries must be finite");
            return None;
        }
        Some(Mat::from_fn(n, n, |i, j| m[i][j]))
    }

    fn vector(&mut self, path: &str, v: &[f64]) -> Option<Vector> {
        if v.len() != self.n {
            self.push(path, format!("expected {} components", self.n));
            return None;
        }
        if v.iter().any(|x| !x.is_finite()) {
            self.push(path, "entries must be finite");
            return None;
        }
        Some(Vector::from_row_slice(v))
    }

    fn skew(&mut self, path: &str, m: &MatrixDoc) -> Option<Mat> {
        let a = self.matrix(path, m)?;
        if max_abs(&(&a + a.transpose())) > 1e-12 * max_abs(&a).max(1.0) {
            self.push(path, "must be antisymmetric");
            return None;
        }
        Some(a)
    }
}

/// Parses and validates a scenario. `seed_override` replaces the document's
/// seed (the CLI `--seed` flag).
pub fn parse_scenario(text: &str, seed_override: Option<u64>) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Schema(vec![Issue { path: if path == "." { "$".into() } else { path }, message: e.into_inner().to_string() }])
    })?;
    build(doc, seed_override)
}

pub fn build(doc: ScenarioDoc, seed_override: Option<u64>) -> Result<Scenario, ScenarioError> {
    if doc.schema != SCHEMA {
        return Err(ScenarioError::Schema(vec![Issue { path: "schema".into(), message: format!("expected \"{SCHEMA}\", found \"{}\"", doc.schema) }]));
    }
    let n = doc.n;
    let mut c = Checker { n, issues: Vec::new() };
    if n == 0 {
        c.push("n", "dimension must be positive");
        return Err(ScenarioError::Semantic(c.issues));
    }
    let model = KineticModel::new(doc.model.variant, doc.model.translational);
    let j = match &doc.params.j {
        Some(j) => c.matrix("params.J", j),
        None => Some(Mat::identity(n, n)),
    };
    let params = InertiaParameters::new(doc.params.m, j.unwrap_or_else(|| Mat::identity(n, n)), doc.params.i, doc.params.a, doc.params.b);
    for v in validate_params(&model, &params, n).violations {
        c.push("params", format!("{:?}: {}", v.kind, v.message));
    }
    let metrics = match &doc.metrics {
        None => MetricPair::identity(n),
        Some(m) => match (c.matrix("metrics.eta", &m.eta), c.matrix("metrics.g", &m.g)) {
            (Some(eta), Some(g)) => MetricPair::new(eta, g).unwrap_or_else(|e| {
                c.push("metrics", e.to_string());
                MetricPair::identity(n)
            }),
            _ => MetricPair::identity(n),
        },
    };
    let it = &doc.integrator;
    if !(it.t_end > 0.0) {
        c.push("integrator.t_end", "must be positive");
    }
    if it.sample_count < 2 {
        c.push("integrator.sample_count", "at least two samples are required");
    }
    if !(it.rel_tol > 0.0 && it.abs_tol > 0.0 && it.max_step > 0.0) {
        c.push("integrator", "tolerances and max_step must be positive");
    }
    let settings = IntegratorSettings { rel_tol: it.rel_tol, abs_tol: it.abs_tol, max_step: it.max_step, drift_threshold: it.drift_threshold, max_steps: it.max_steps, ..IntegratorSettings::default() };
    let seed = seed_override.or(doc.seed).unwrap_or(0);
    let potential = doc.potential.spec();
    let has_full_chart = model.check_pairing().is_ok();
    let chart = doc.dynamics.unwrap_or(if has_full_chart { DynamicsChart::Full } else { DynamicsChart::Reduced });
    if chart == DynamicsChart::Full && !has_full_chart {
        c.push("dynamics", "this model has no full-chart dynamics; use \"reduced\"");
    }
    if chart == DynamicsChart::Reduced && n < 2 {
        c.push("dynamics", "the reduced chart needs n ≥ 2");
    }
    if !c.issues.is_empty() {
        return Err(ScenarioError::Semantic(c.issues));
    }

    let initial = match &doc.initial {
        InitialDoc::Full(f) => full_initial(&mut c, f, &model, &params, &metrics, &potential),
        InitialDoc::Random(r) => {
            if !has_full_chart {
                c.push("initial.random", "random full-chart states need a model with full-chart dynamics");
                None
            } else {
                let sys = System::new(model, params.clone(), potential.clone(), metrics.clone());
                let mut rng = sampling::rng(seed);
                let phi = metrics.from_orthonormal(&sampling::gl_plus(&mut rng, n, r.phi_scale));
                let x = if r.translation { sampling::normal_vector(&mut rng, n, 1.0) } else { Vector::zeros(n) };
                let v = if r.translation { sampling::normal_vector(&mut rng, n, r.velocity_scale) } else { Vector::zeros(n) };
                let phi_dot = sampling::normal_matrix_entries(&mut rng, n, r.velocity_scale);
                match Configuration::new(phi, x).and_then(|cfg| sys.state_from_velocities(cfg, &phi_dot, &v)) {
                    Ok(s) => Some(Initial::Full(s)),
                    Err(e) => {
                        c.push("initial.random", e.to_string());
                        None
                    }
                }
            }
        }
        InitialDoc::Reduced(r) => {
            let q = c.vector("initial.reduced.q", &r.q);
            let p = c.vector("initial.reduced.p", &r.p);
            let m = c.skew("initial.reduced.M", &r.m);
            let nn = c.skew("initial.reduced.N", &r.n);
            let frame = |c: &mut Checker, path: &str, f: &Option<MatrixDoc>| match f {
                None => Some(Mat::identity(n, n)),
                Some(f) => c.matrix(path, f),
            };
            let l = frame(&mut c, "initial.reduced.L", &r.l);
            let rr = frame(&mut c, "initial.reduced.R", &r.r);
            let (x, pl) = match &r.translation {
                None => (Some(Vector::zeros(n)), Some(Vector::zeros(n))),
                Some(t) => (c.vector("initial.reduced.translation.x", &t.x), c.vector("initial.reduced.translation.p", &t.p)),
            };
            match (q, p, m, nn, l, rr, x, pl) {
                (Some(q), Some(p), Some(m), Some(nn), Some(l), Some(rr), Some(x), Some(pl)) => {
                    let mut state = ReducedPhaseState::new(q, p, m, nn);
                    state.l = l;
                    state.r = rr;
                    Some(Initial::Reduced { state, x, p: pl })
                }
                _ => None,
            }
        }
    };
    let generator = doc.generator.as_ref().and_then(|g| c.matrix("generator", g));
    if let Some(eq) = &doc.equilibria {
        for (k, g) in eq.generators.iter().enumerate() {
            c.matrix(&format!("equilibria.generators[{k}]"), g);
        }
        if let Some(p0) = &eq.phi0 {
            if let Some(m) = c.matrix("equilibria.phi0", p0) {
                if !(m.determinant() > 0.0) {
                    c.push("equilibria.phi0", "must have positive determinant");
                }
            }
        }
    }
    for (k, check) in doc.checks.iter().enumerate() {
        let path = format!("checks[{k}]");
        match check {
            CheckDoc::ExpectClass { .. } if generator.is_none() && !matches!(initial, Some(Initial::Full(_))) => {
                c.push(&path, "expect_class needs a generator or a full-chart initial velocity")
            }
            CheckDoc::EquilibriaAgree if doc.equilibria.is_none() => c.push(&path, "equilibria_agree needs an equilibria section"),
            CheckDoc::SutherlandOracle { .. } if chart != DynamicsChart::Reduced => c.push(&path, "the Sutherland comparison runs in the reduced chart"),
            CheckDoc::DualChart { .. } if !has_full_chart => c.push(&path, "dual_chart needs full-chart dynamics"),
            _ => {}
        }
    }
    let Some(initial) = initial.filter(|_| c.issues.is_empty()) else {
        return Err(ScenarioError::Semantic(c.issues));
    };
    let ro = doc.reduced_options.clone().unwrap_or_default();
    Ok(Scenario {
        n,
        model,
        params,
        metrics,
        potential,
        settings,
        t_end: it.t_end,
        sample_count: it.sample_count,
        initial,
        chart,
        reduced_options: ReducedOptions { frames: ro.frames, freeze_couplings: ro.freeze_couplings },
        generator,
        seed,
        doc,
    })
}

fn full_initial(c: &mut Checker, f: &FullInitialDoc, model: &KineticModel, params: &InertiaParameters, metrics: &MetricPair, potential: &PotentialSpec) -> Option<Initial> {
    let n = c.n;
    let phi = c.matrix("initial.full.phi", &f.phi)?;
    if !(phi.determinant() > 0.0) {
        c.push("initial.full.phi", "configuration must have positive determinant");
        return None;
    }
    let x = match &f.x {
        Some(x) => c.vector("initial.full.x", x)?,
        None => Vector::zeros(n),
    };
    let velocity_form = f.phi_dot.is_some() || f.v.is_some();
    let momentum_form = f.sigma.is_some() || f.p.is_some();
    if velocity_form && momentum_form {
        c.push("initial.full", "give either velocities (phi_dot, v) or momenta (sigma, p), not both");
        return None;
    }
    let config = match Configuration::new(phi.clone(), x) {
        Ok(cfg) => cfg,
        Err(e) => {
            c.push("initial.full.phi", e.to_string());
            return None;
        }
    };
    let vec_or_zero = |c: &mut Checker, path: &str, v: &Option<Vec<f64>>| match v {
        Some(v) => c.vector(path, v),
        None => Some(Vector::zeros(n)),
    };
    let mat_or_zero = |c: &mut Checker, path: &str, m: &Option<MatrixDoc>| match m {
        Some(m) => c.matrix(path, m),
        None => Some(Mat::zeros(n, n)),
    };
    let state = if momentum_form {
        let sigma = mat_or_zero(c, "initial.full.sigma", &f.sigma)?;
        let p = vec_or_zero(c, "initial.full.p", &f.p)?;
        MomentumState::from_spatial(&phi, p, sigma).map(|mom| FullPhaseState { config, mom, time: 0.0 })
    } else {
        let phi_dot = mat_or_zero(c, "initial.full.phi_dot", &f.phi_dot)?;
        let v = vec_or_zero(c, "initial.full.v", &f.v)?;
        if model.check_pairing().is_err() {
            c.push("initial.full", "velocities need a model with full-chart dynamics; give momenta instead");
            return None;
        }
        System::new(*model, params.clone(), potential.clone(), metrics.clone()).state_from_velocities(config, &phi_dot, &v)
    };
    match state {
        Ok(s) => Some(Initial::Full(s)),
        Err(e) => {
            c.push("initial.full", e.to_string());
            None
        }
    }
}
