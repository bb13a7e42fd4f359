//! The subcommands, each turning a validated scenario into an [`Outcome`].

use afftop_core::dynamics::{integrate, linspace, monitor_invariants, monitored_quantities, monitored_quantity, FullPhaseState, PotentialKind, System, Trajectory};
use afftop_core::geodesics::{classify_generator, perturbation_sweep, relative_equilibrium_residual, BoundednessVerdict, CurveSide, GeneratorCurve, DEFAULT_SPECTRAL_TOL};
use afftop_core::lattice::{integrate_sutherland_oracle, reconstruct_state, reduce_state, reduce_state_tracked, spread, ReducedPhaseState, ReducedSystem, ReducedTrajectory};
use afftop_core::linalg::{max_abs, max_abs_vec, Mat};
use afftop_core::models::{legendre_forward, InertiaParameters, ModelVariant};

use crate::error::{CliError, CliResult};
use crate::output::{Cell, Table};
use crate::scenario::{CheckDoc, DynamicsChart, InitialDoc, Initial, MatrixDoc, ReducedInitialDoc, Scenario, TranslationDoc};

pub const LEGENDRE_TOL: f64 = 1e-10;
pub const CASIMIR_TOL: f64 = 1e-9;
pub const ENERGY_DRIFT_TOL: f64 = 1e-8;
pub const INVARIANT_DRIFT_TOL: f64 = 1e-6;
/// Residual below which a curve counts as an equilibrium, and above which
/// it clearly is not.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;
pub const NON_EQUILIBRIUM_FLOOR: f64 = 1e-3;

#[derive(Debug, Default)]
pub struct Outcome {
    pub table: Option<Table>,
    /// Human-readable lines; `verify` prints them on stdout.
    pub report: Vec<String>,
    pub failures: usize,
    /// Scenario document written by `reduce --scenario-out`.
    pub scenario_out: Option<String>,
}

impl Outcome {
    fn check(&mut self, pass: bool, name: &str, detail: String) {
        if !pass {
            self.failures += 1;
        }
        self.report.push(format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" }));
    }
}

pub fn full_initial_state(sc: &Scenario) -> CliResult<FullPhaseState> {
    match &sc.initial {
        Initial::Full(s) => Ok(s.clone()),
        Initial::Reduced { state, x, p } => Ok(reconstruct_state(state, &sc.metrics, x.clone(), p.clone())?),
    }
}

pub fn reduced_initial_state(sc: &Scenario) -> CliResult<ReducedPhaseState> {
    match &sc.initial {
        Initial::Full(s) => Ok(reduce_state(s, &sc.metrics, None)?),
        Initial::Reduced { state, .. } => Ok(state.clone()),
    }
}

fn has_full_chart(sc: &Scenario) -> bool {
    sc.model.check_pairing().is_ok()
}

pub fn reduced_system(sc: &Scenario) -> CliResult<ReducedSystem> {
    Ok(ReducedSystem::new(sc.model.variant, sc.params.clone(), sc.potential.clone(), sc.n)?.with_options(sc.reduced_options))
}

pub enum Run {
    Full { sys: System, traj: Trajectory },
    Reduced { traj: ReducedTrajectory },
}

impl Run {
    pub fn times(&self) -> Vec<f64> {
        match self {
            Run::Full { traj, .. } => traj.samples.iter().map(|s| s.state.time).collect(),
            Run::Reduced { traj } => traj.samples.iter().map(|s| s.state.time).collect(),
        }
    }

    pub fn spreads(&self) -> Vec<f64> {
        match self {
            Run::Full { traj, .. } => traj.samples.iter().map(|s| spread(&s.q)).collect(),
            Run::Reduced { traj } => traj.samples.iter().map(|s| spread(&s.state.q)).collect(),
        }
    }

    pub fn energies(&self) -> Vec<f64> {
        match self {
            Run::Full { traj, .. } => traj.samples.iter().map(|s| s.hamiltonian).collect(),
            Run::Reduced { traj } => traj.samples.iter().map(|s| s.hamiltonian).collect(),
        }
    }
}

/// max |H(t) − H(0)| / |H(0)|.
pub fn relative_drift(h: &[f64]) -> f64 {
    let scale = h[0].abs().max(1e-300);
    h.iter().map(|x| (x - h[0]).abs() / scale).fold(0.0, f64::max)
}

pub fn run_dynamics(sc: &Scenario) -> CliResult<Run> {
    match sc.chart {
        DynamicsChart::Full => {
            let sys = sc.system();
            let traj = integrate(&sys, &full_initial_state(sc)?, sc.t_end, sc.sample_count, &sc.settings)?;
            Ok(Run::Full { sys, traj })
        }
        DynamicsChart::Reduced => {
            let traj = reduced_system(sc)?.integrate(&reduced_initial_state(sc)?, sc.t_end, sc.sample_count, &sc.settings)?;
            Ok(Run::Reduced { traj })
        }
    }
}

fn vec_cols(out: &mut Vec<String>, name: &str, n: usize) {
    out.extend((0..n).map(|i| format!("{name}_{i}")));
}

fn mat_cols(out: &mut Vec<String>, name: &str, n: usize) {
    out.extend((0..n * n).map(|k| format!("{name}_{}_{}", k / n, k % n)));
}

fn pair_cols(out: &mut Vec<String>, name: &str, n: usize) {
    for a in 0..n {
        for b in a + 1..n {
            out.push(format!("{name}_{a}_{b}"));
        }
    }
}

fn nums<'a>(row: &mut Vec<Cell>, xs: impl IntoIterator<Item = &'a f64>) {
    row.extend(xs.into_iter().map(|x| Cell::Num(*x)));
}

fn pairs(row: &mut Vec<Cell>, m: &Mat) {
    let n = m.nrows();
    for a in 0..n {
        for b in a + 1..n {
            row.push(Cell::Num(m[(a, b)]));
        }
    }
}

/// Row-major entries, the order used by the `name_i_j` columns.
fn row_major(m: &Mat) -> Vec<f64> {
    m.transpose().iter().cloned().collect()
}

fn reduced_columns(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    vec_cols(&mut cols, "q", n);
    vec_cols(&mut cols, "p", n);
    pair_cols(&mut cols, "M", n);
    pair_cols(&mut cols, "N", n);
    cols.extend(["H", "H_drift", "normS", "normV"].map(String::from));
    cols
}

fn reduced_row(st: &ReducedPhaseState, h: f64, h0: f64, norm_s: f64, norm_v: f64) -> Vec<Cell> {
    let mut row = vec![Cell::Num(st.time)];
    nums(&mut row, st.q.iter());
    nums(&mut row, st.p.iter());
    pairs(&mut row, &st.m);
    pairs(&mut row, &st.n);
    nums(&mut row, [h, (h - h0) / h0.abs().max(1e-300), norm_s, norm_v].iter());
    row
}

pub fn reduced_table(traj: &ReducedTrajectory) -> Table {
    let n = traj.samples[0].state.q.len();
    let h0 = traj.samples[0].hamiltonian;
    let mut t = Table::new(reduced_columns(n));
    for s in &traj.samples {
        t.push(reduced_row(&s.state, s.hamiltonian, h0, s.norm_s, s.norm_v));
    }
    t
}

/// State columns, H, its drift and every monitored quantity not already
/// part of the state.
pub fn full_table(sys: &System, traj: &Trajectory) -> CliResult<Table> {
    let n = sys.dim();
    let first = &traj.samples[0];
    let p0_zero = max_abs_vec(&first.state.mom.p) == 0.0;
    let extra: Vec<&str> = monitored_quantities(sys, p0_zero).into_iter().map(|(name, _)| name).filter(|name| !matches!(*name, "H" | "p" | "Sigma")).collect();
    let mut cols = vec!["t".to_string()];
    vec_cols(&mut cols, "x", n);
    vec_cols(&mut cols, "p", n);
    mat_cols(&mut cols, "phi", n);
    mat_cols(&mut cols, "Sigma", n);
    vec_cols(&mut cols, "q", n);
    cols.extend(["H", "H_drift"].map(String::from));
    for name in &extra {
        match monitored_quantity(sys, first, name)?.len() {
            1 => cols.push(name.to_string()),
            len if len == n => vec_cols(&mut cols, name, n),
            _ => mat_cols(&mut cols, name, n),
        }
    }
    let mut table = Table::new(cols);
    let h0 = first.hamiltonian;
    for s in &traj.samples {
        let st = &s.state;
        let mut row = vec![Cell::Num(st.time)];
        nums(&mut row, st.config.x.iter());
        nums(&mut row, st.mom.p.iter());
        nums(&mut row, row_major(&st.config.phi).iter());
        nums(&mut row, row_major(&st.mom.sigma).iter());
        nums(&mut row, s.q.iter());
        nums(&mut row, [s.hamiltonian, (s.hamiltonian - h0) / h0.abs().max(1e-300)].iter());
        for name in &extra {
            nums(&mut row, monitored_quantity(sys, s, name)?.iter());
        }
        table.push(row);
    }
    Ok(table)
}

pub fn simulate(sc: &Scenario) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let run = run_dynamics(sc)?;
    match &run {
        Run::Full { sys, traj } => {
            out.table = Some(full_table(sys, traj)?);
            out.report.push(format!("{}: full chart, {} samples to t = {}", sc.name(), traj.samples.len(), sc.t_end));
            for e in monitor_invariants(sys, traj)?.entries {
                out.report.push(format!("drift {} {:.3e}{}", e.name, e.max_drift, if e.conserved { "" } else { " (not conserved)" }));
            }
        }
        Run::Reduced { traj } => {
            out.table = Some(reduced_table(traj));
            out.report.push(format!("{}: reduced chart, {} samples to t = {}", sc.name(), traj.samples.len(), sc.t_end));
            out.report.push(format!("drift H {:.3e}", relative_drift(&run.energies())));
        }
    }
    Ok(out)
}

/// Tr Σ² from the reduced variables alone: twice the doubly-affine kinetic
/// energy with A = 1, B = 0.
pub fn reduced_casimir(st: &ReducedPhaseState) -> CliResult<f64> {
    let n = st.q.len();
    let aa = ReducedSystem::new(ModelVariant::AffineAffine, InertiaParameters::invariant(n, 0.0, 1.0, 0.0), Default::default(), n)?;
    Ok(2.0 * aa.kinetic(st)?)
}

fn matrix_doc(m: &Mat) -> MatrixDoc {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

/// Spacing of the grid on which two-polar frames are followed between
/// output samples, so nearly coincident stretchings keep their labels.
pub const TRACKING_STEP: f64 = 0.01;

/// Full-chart run at the output samples, each with its tracked reduction.
pub fn tracked_run(sc: &Scenario, sys: &System, state0: &FullPhaseState) -> CliResult<(Trajectory, Vec<ReducedPhaseState>)> {
    let dt = sc.t_end / (sc.sample_count - 1) as f64;
    let k = (dt / TRACKING_STEP).ceil().max(1.0) as usize;
    let fine = integrate(sys, state0, sc.t_end, (sc.sample_count - 1) * k + 1, &sc.settings)?;
    let mut hint = None;
    let mut samples = Vec::with_capacity(sc.sample_count);
    let mut reduced = Vec::with_capacity(sc.sample_count);
    for (i, s) in fine.samples.into_iter().enumerate() {
        let (red, f) = reduce_state_tracked(&s.state, &sc.metrics, hint.as_ref())?;
        hint = Some(f);
        if i % k == 0 {
            reduced.push(red);
            samples.push(s);
        }
    }
    Ok((Trajectory { chart: fine.chart, samples }, reduced))
}

/// Integrates in the full chart and reduces every sample, following the
/// two-polar frames continuously.
pub fn reduce(sc: &Scenario) -> CliResult<Outcome> {
    if !has_full_chart(sc) {
        return Err(CliError::Usage("reduce needs a model with full-chart dynamics".into()));
    }
    let mut out = Outcome::default();
    let sys = sc.system();
    let state0 = full_initial_state(sc)?;
    let (traj, reduced) = tracked_run(sc, &sys, &state0)?;
    let mut table = Table::new(reduced_columns(sc.n));
    let h0 = traj.samples[0].hamiltonian;
    let mut worst = 0.0_f64;
    for (s, red) in traj.samples.iter().zip(&reduced) {
        let c2 = reduced_casimir(red)?;
        worst = worst.max((c2 - s.c2).abs() / s.c2.abs().max(1.0));
        table.push(reduced_row(red, s.hamiltonian, h0, s.norm_s, s.norm_v));
    }
    out.table = Some(table);
    out.check(worst <= CASIMIR_TOL, "casimir_identity", format!("max |Tr Σ² − reduced| {worst:.3e} ≤ {CASIMIR_TOL:e}"));

    let red0 = &reduced[0];
    let mut doc = sc.doc.clone();
    doc.initial = InitialDoc::Reduced(ReducedInitialDoc {
        q: red0.q.iter().cloned().collect(),
        p: red0.p.iter().cloned().collect(),
        m: matrix_doc(&red0.m),
        n: matrix_doc(&red0.n),
        l: Some(matrix_doc(&red0.l)),
        r: Some(matrix_doc(&red0.r)),
        translation: Some(TranslationDoc { x: state0.config.x.iter().cloned().collect(), p: state0.mom.p.iter().cloned().collect() }),
    });
    doc.seed = None;
    out.scenario_out = Some(serde_json::to_string_pretty(&doc).expect("scenario serializes"));
    Ok(out)
}

/// The generator to classify: the scenario's, or the traceless part of
/// φ̇φ⁻¹ at the initial state.
pub fn generator(sc: &Scenario) -> CliResult<Mat> {
    if let Some(g) = &sc.generator {
        return Ok(g.clone());
    }
    match &sc.initial {
        Initial::Full(s) => Ok(sc.system().velocities(s)?.omega),
        Initial::Reduced { .. } => Err(CliError::Usage("classify needs a generator or a full-chart initial state".into())),
    }
}

pub fn traceless_part(alpha: &Mat) -> (Mat, f64) {
    let n = alpha.nrows();
    let rate = alpha.trace() / n as f64;
    (alpha - Mat::identity(n, n) * rate, rate)
}

pub fn classify_scenario(sc: &Scenario) -> CliResult<BoundednessVerdict> {
    let (alpha, _) = traceless_part(&generator(sc)?);
    Ok(classify_generator(&alpha, DEFAULT_SPECTRAL_TOL))
}

pub fn classify(sc: &Scenario) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let (alpha, rate) = traceless_part(&generator(sc)?);
    let v = classify_generator(&alpha, DEFAULT_SPECTRAL_TOL);
    let mut cols: Vec<String> = ["class", "dilatation_rate", "diag_condition"].map(String::from).to_vec();
    vec_cols(&mut cols, "re", sc.n);
    vec_cols(&mut cols, "im", sc.n);
    let mut row = vec![Cell::Text(format!("{:?}", v.class)), Cell::Num(rate), Cell::Num(v.diag_condition)];
    nums(&mut row, v.spectrum.iter().map(|z| &z.re));
    nums(&mut row, v.spectrum.iter().map(|z| &z.im));
    let mut table = Table::new(cols);
    table.push(row);
    out.table = Some(table);
    out.report.push(format!("{}: {:?}", sc.name(), v.class));
    if rate.abs() > 1e-12 * alpha.norm().max(1.0) {
        out.report.push(format!("dilatation rate {rate:.6e} removed before classifying"));
    }
    if let Some(sw) = &sc.doc.sweep {
        let r = perturbation_sweep(&alpha, sw.family, sw.radius, sw.samples, sc.seed, DEFAULT_SPECTRAL_TOL);
        out.report.push(format!(
            "sweep {:?} radius {}: {}/{} preserved (bounded {}, unbounded {}, marginal {})",
            sw.family, sw.radius, r.preserved, r.samples, r.bounded, r.unbounded, r.marginal
        ));
    }
    Ok(out)
}

pub struct EquilibriumRow {
    pub residual: f64,
    pub predicted: Option<bool>,
    pub native_normal: Option<bool>,
    pub converted_normal: Option<bool>,
}

pub fn equilibrium_rows(sc: &Scenario) -> CliResult<Vec<EquilibriumRow>> {
    let eq = sc.doc.equilibria.as_ref().ok_or_else(|| CliError::Usage("the scenario has no equilibria section".into()))?;
    let to_mat = |m: &MatrixDoc| Mat::from_fn(sc.n, sc.n, |i, j| m[i][j]);
    let phi0 = match (&eq.phi0, &sc.initial) {
        (Some(p), _) => to_mat(p),
        (None, Initial::Full(s)) => s.config.phi.clone(),
        (None, _) => Mat::identity(sc.n, sc.n),
    };
    let times = eq.t_samples.clone().unwrap_or_else(|| linspace(0.0, 3.0, 11));
    eq.generators
        .iter()
        .map(|g| {
            let curve = match eq.side {
                CurveSide::Left => GeneratorCurve::left(to_mat(g), phi0.clone()),
                CurveSide::Right => GeneratorCurve::right(phi0.clone(), to_mat(g)),
            };
            let r = relative_equilibrium_residual(sc.model.variant, &sc.params, &curve, &sc.metrics, &times, eq.tol)?;
            Ok(EquilibriumRow {
                residual: r.max_residual,
                predicted: r.predicted,
                native_normal: r.native_normality.map(|c| c.normal),
                converted_normal: r.converted_normality.map(|c| c.normal),
            })
        })
        .collect()
}

fn opt_cell(b: Option<bool>) -> Cell {
    b.map(Cell::Bool).unwrap_or(Cell::Text(String::new()))
}

pub fn equilibria(sc: &Scenario) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let mut table = Table::new(["index", "residual", "equilibrium", "predicted", "native_normal", "converted_normal"].map(String::from).to_vec());
    for (k, r) in equilibrium_rows(sc)?.into_iter().enumerate() {
        table.push(vec![Cell::Int(k as i64), Cell::Num(r.residual), Cell::Bool(r.residual <= EQUILIBRIUM_TOL), opt_cell(r.predicted), opt_cell(r.native_normal), opt_cell(r.converted_normal)]);
    }
    out.table = Some(table);
    Ok(out)
}

fn sample_index(times: &[f64], t: f64) -> usize {
    times.iter().rposition(|&s| s <= t + 1e-12).unwrap_or(0)
}

pub fn verify(sc: &Scenario) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    out.report.push(format!("scenario {}", sc.name()));
    let full0 = if has_full_chart(sc) { Some(full_initial_state(sc)?) } else { None };

    if let Some(s) = &full0 {
        let sys = sc.system();
        let vel = sys.velocities(s)?;
        let mom = legendre_forward(&sc.model, &sc.params, &s.config, &vel, &sc.metrics)?;
        let scale = max_abs(&s.mom.sigma).max(max_abs_vec(&s.mom.p)).max(1.0);
        let err = max_abs(&(&mom.sigma - &s.mom.sigma)).max(max_abs_vec(&(&mom.p - &s.mom.p))) / scale;
        out.check(err <= LEGENDRE_TOL, "legendre_round_trip", format!("{err:.3e} ≤ {LEGENDRE_TOL:e}"));
        if sc.n >= 2 {
            match reduce_state(s, &sc.metrics, None) {
                Ok(red) => {
                    let c2 = afftop_core::models::casimir(2, &s.mom.sigma);
                    let err = (reduced_casimir(&red)? - c2).abs() / c2.abs().max(1.0);
                    out.check(err <= CASIMIR_TOL, "casimir_identity", format!("{err:.3e} ≤ {CASIMIR_TOL:e}"));
                }
                Err(e) => out.report.push(format!("SKIP casimir_identity: {e}")),
            }
        }
    }

    let run = run_dynamics(sc)?;
    match &run {
        Run::Full { sys, traj } => {
            for e in monitor_invariants(sys, traj)?.entries.iter().filter(|e| e.conserved) {
                let tol = if e.name == "H" { ENERGY_DRIFT_TOL } else { INVARIANT_DRIFT_TOL };
                out.check(e.max_drift <= tol, &format!("drift_{}", e.name), format!("{:.3e} ≤ {tol:e}", e.max_drift));
            }
        }
        Run::Reduced { .. } => {
            let d = relative_drift(&run.energies());
            out.check(d <= ENERGY_DRIFT_TOL, "drift_H", format!("{d:.3e} ≤ {ENERGY_DRIFT_TOL:e}"));
        }
    }

    let times = run.times();
    let spreads = run.spreads();
    for check in &sc.doc.checks {
        match check {
            CheckDoc::BoundedSpread { early, factor } => {
                let a = spreads[..=sample_index(&times, *early)].iter().cloned().fold(0.0, f64::max);
                let b = spreads.iter().cloned().fold(0.0, f64::max);
                out.check(b.is_finite() && b < factor * a, "bounded_spread", format!("sup spread {b:.4} < {factor} × {a:.4} (sup up to t = {early})"));
            }
            CheckDoc::MonotoneSpread { early, min_growth } => {
                let scale = spreads.iter().cloned().fold(1.0, f64::max);
                let monotone = spreads.windows(2).all(|w| w[1] >= w[0] - 1e-9 * scale);
                let a = spreads[sample_index(&times, *early)];
                let b = *spreads.last().expect("samples");
                out.check(monotone && b > min_growth * a, "monotone_spread", format!("non-decreasing: {monotone}, spread {b:.4} > {min_growth} × {a:.4} (t = {early})"));
            }
            CheckDoc::SutherlandOracle { tol } => sutherland_check(sc, &run, *tol, &mut out)?,
            CheckDoc::DualChart { tol } => dual_chart_check(sc, *tol, &mut out)?,
            CheckDoc::ExpectClass { class } => {
                let v = classify_scenario(sc)?;
                out.check(v.class == *class, "expect_class", format!("{:?} (expected {class:?})", v.class));
            }
            CheckDoc::EquilibriaAgree => {
                let rows = equilibrium_rows(sc)?;
                let bad = rows
                    .iter()
                    .filter(|r| match r.predicted {
                        Some(true) => r.residual > EQUILIBRIUM_TOL,
                        Some(false) => r.residual < NON_EQUILIBRIUM_FLOOR,
                        None => false,
                    })
                    .count();
                out.check(bad == 0, "equilibria_agree", format!("{}/{} generators agree with the normality prediction", rows.len() - bad, rows.len()));
            }
        }
    }
    out.report.push(format!("{} check(s) failed", out.failures));
    Ok(out)
}

fn sutherland_check(sc: &Scenario, run: &Run, tol: f64, out: &mut Outcome) -> CliResult<()> {
    let Run::Reduced { traj } = run else {
        return Err(CliError::Usage("sutherland_oracle needs reduced dynamics".into()));
    };
    let st = &traj.samples[0].state;
    let n = sc.n;
    let coupling = st.m[(0, 1)];
    let uniform = (0..n).all(|a| (a + 1..n).all(|b| (st.m[(a, b)] - coupling).abs() <= 1e-12 * coupling.abs().max(1.0)));
    let applicable = sc.model.variant == ModelVariant::AffineAffine
        && sc.params.alpha() == 1.0
        && sc.params.b == 0.0
        && sc.potential.kind == PotentialKind::None
        && sc.reduced_options.freeze_couplings
        && max_abs(&st.n) == 0.0
        && uniform;
    if !applicable {
        out.check(false, "sutherland_oracle", "needs AffineAffine with A = 1, B = 0, no potential, frozen couplings, N = 0 and uniform M".into());
        return Ok(());
    }
    let q0: Vec<f64> = st.q.iter().cloned().collect();
    let p0: Vec<f64> = st.p.iter().cloned().collect();
    let oracle = integrate_sutherland_oracle(&q0, &p0, coupling, sc.t_end, sc.sample_count, &sc.settings)?;
    let mut worst = 0.0_f64;
    for (s, (q, p)) in traj.samples.iter().zip(&oracle) {
        for a in 0..n {
            worst = worst.max((s.state.q[a] - q[a]).abs()).max((s.state.p[a] - p[a]).abs());
        }
    }
    out.check(worst <= tol, "sutherland_oracle", format!("max |Δq|, |Δp| {worst:.3e} ≤ {tol:e}"));
    Ok(())
}

/// Compares the reduced trajectory against the reduction of the full one.
fn dual_chart_check(sc: &Scenario, tol: f64, out: &mut Outcome) -> CliResult<()> {
    let sys = sc.system();
    let (_, from_full) = tracked_run(sc, &sys, &full_initial_state(sc)?)?;
    let red = reduced_system(sc)?.integrate(&reduced_initial_state(sc)?, sc.t_end, sc.sample_count, &sc.settings)?;
    let mut worst = 0.0_f64;
    for (f, r) in from_full.iter().zip(&red.samples) {
        let r = &r.state;
        worst = worst.max(max_abs_vec(&(&f.q - &r.q))).max(max_abs_vec(&(&f.p - &r.p))).max(max_abs(&(&f.m - &r.m))).max(max_abs(&(&f.n - &r.n)));
    }
    out.check(worst <= tol, "dual_chart", format!("max deviation {worst:.3e} ≤ {tol:e}"));
    Ok(())
}
