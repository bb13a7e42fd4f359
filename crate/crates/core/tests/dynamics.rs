use std::sync::Arc;

use afftop_core::dynamics::*;
use afftop_core::kinematics::{deformation_tensors, Configuration, MetricPair};
use afftop_core::lattice::DilatationKind;
use afftop_core::linalg::{inverse, max_abs, max_abs_vec, Mat, Vector};
use afftop_core::models::{InertiaParameters, KineticModel, ModelVariant, Translational};
use afftop_core::sampling::{self, SeededRng};
use afftop_core::Error;

fn metrics(rng: &mut SeededRng, n: usize) -> MetricPair {
    MetricPair::new(sampling::spd(rng, n, 0.6, 1.8), sampling::spd(rng, n, 0.6, 1.8)).unwrap()
}

fn params(n: usize, rng: &mut SeededRng) -> InertiaParameters {
    let mut p = InertiaParameters::invariant(n, 2.0, 0.7, 0.2);
    p.m = 1.5;
    p.j = sampling::spd(rng, n, 0.5, 1.5);
    p
}

fn random_state(sys: &System, rng: &mut SeededRng, with_translation: bool) -> FullPhaseState {
    random_state_with_speed(sys, rng, with_translation, 0.4)
}

fn random_state_with_speed(sys: &System, rng: &mut SeededRng, with_translation: bool, speed: f64) -> FullPhaseState {
    let n = sys.dim();
    let phi = sampling::gl_plus(rng, n, 0.3);
    let x = if with_translation { sampling::normal_vector(rng, n, 1.0) } else { Vector::zeros(n) };
    let v = if with_translation { sampling::normal_vector(rng, n, 0.5) } else { Vector::zeros(n) };
    let phi_dot = sampling::normal_matrix_entries(rng, n, speed);
    sys.state_from_velocities(Configuration::new(phi, x).unwrap(), &phi_dot, &v).unwrap()
}

fn doubly_isotropic() -> PotentialSpec {
    PotentialSpec::doubly_isotropic(DilatationKind::CoshWell, 1.2, Some(ShearPair::Sech2Well { g: 0.5 }))
}

/// −φ(∂V/∂φ)ᵀ by central differences of V alone.
fn fd_force(pot: &PotentialSpec, config: &Configuration, m: &MetricPair) -> Mat {
    let n = config.dim();
    let mut dv = Mat::zeros(n, n);
    let h = 1e-5;
    for i in 0..n {
        for a in 0..n {
            let mut plus = config.clone();
            plus.phi[(i, a)] += h;
            let mut minus = config.clone();
            minus.phi[(i, a)] -= h;
            dv[(i, a)] = (potential_and_forces(pot, &plus, m).unwrap().v - potential_and_forces(pot, &minus, m).unwrap().v) / (2.0 * h);
        }
    }
    -(&config.phi * dv.transpose())
}

#[test]
fn force_gradients_match_finite_differences() {
    let mut rng = sampling::rng(1);
    let general = PotentialSpec::general(Arc::new(|phi: &Mat, x: &Vector| 0.3 * x.norm_squared() + 0.5 * (phi * phi.transpose()).trace() + phi.determinant().ln().powi(2)));
    for pot in [PotentialSpec::dilatation(DilatationKind::TanhThreshold, 2.0), doubly_isotropic(), general] {
        for n in [2, 3] {
            let m = metrics(&mut rng, n);
            let config = Configuration::new(m.from_orthonormal(&sampling::gl_plus_separated(&mut rng, n, 0.5)), sampling::normal_vector(&mut rng, n, 1.0)).unwrap();
            let f = potential_and_forces(&pot, &config, &m).unwrap();
            let want = fd_force(&pot, &config, &m);
            assert!(max_abs(&(&f.q_mat - &want)) <= 1e-6 * max_abs(&want).max(1e-3), "{:?}: {} vs {}", pot.kind, f.q_mat, want);
            let q_hat = inverse(&config.phi).unwrap() * &f.q_mat * &config.phi;
            assert!(max_abs(&(q_hat - &f.q_hat)) < 1e-12 * max_abs(&f.q_hat).max(1.0));
        }
    }
}

#[test]
fn doubly_isotropic_forces_carry_no_torque() {
    let mut rng = sampling::rng(2);
    for n in [2, 3, 4] {
        let m = metrics(&mut rng, n);
        let config = Configuration::internal(m.from_orthonormal(&sampling::gl_plus_separated(&mut rng, n, 0.4))).unwrap();
        let f = potential_and_forces(&doubly_isotropic(), &config, &m).unwrap();
        // Spatial and material skew parts of the force vanish: {V, S} = {V, V} = 0.
        let qs = &f.q_mat - m.g_inv() * f.q_mat.transpose() * &m.g;
        let qv = &f.q_hat - m.eta_inv() * f.q_hat.transpose() * &m.eta;
        assert!(max_abs(&qs) < 1e-12 && max_abs(&qv) < 1e-12);
    }
}

#[test]
fn cosh_well_value_and_force_vanish_at_rest_shape() {
    let config = Configuration::internal(Mat::identity(3, 3)).unwrap();
    let f = potential_and_forces(&PotentialSpec::dilatation(DilatationKind::CoshWell, 4.0), &config, &MetricPair::identity(3)).unwrap();
    assert_eq!(f.v, 0.0);
    assert!(max_abs(&f.q_mat) < 1e-15);
}

#[test]
fn geodetic_balance_examples() {
    let mut rng = sampling::rng(3);
    let n = 3;
    let m = metrics(&mut rng, n);
    let p = params(n, &mut rng);

    let ma = System::new(KineticModel::new(ModelVariant::MetricalAffine, Translational::Metrical), p.clone(), PotentialSpec::none(), m.clone());
    let s = random_state(&ma, &mut rng, true);
    let d = full_rhs(&ma, &s).unwrap();
    assert_eq!(d.chart, Chart::CoMoving);
    assert_eq!(max_abs(&d.dsigma), 0.0);
    assert_eq!(max_abs_vec(&d.dp), 0.0);

    let am = System::new(KineticModel::internal(ModelVariant::AffineMetrical), p.clone(), PotentialSpec::none(), m.clone());
    let s = random_state(&am, &mut rng, false);
    assert_eq!(max_abs(&full_rhs(&am, &s).unwrap().dsigma), 0.0);

    let amc = System::new(KineticModel::new(ModelVariant::AffineMetrical, Translational::CauchyCoupled), p, PotentialSpec::none(), m);
    let s = random_state(&amc, &mut rng, true);
    let d = full_rhs(&amc, &s).unwrap();
    assert_eq!(max_abs_vec(&d.dp), 0.0);
    // v = C̃p/m changes through C̃ alone.
    let phi = &s.config.phi;
    let dc = &d.dphi * amc.metrics.eta_inv() * phi.transpose() + phi * amc.metrics.eta_inv() * d.dphi.transpose();
    assert!(max_abs_vec(&(dc * &s.mom.p)) > 1e-3);
}

#[test]
fn drunk_missile_law_holds() {
    let mut rng = sampling::rng(4);
    let pot = PotentialSpec::general(Arc::new(|phi: &Mat, x: &Vector| 0.4 * x.norm_squared() + 0.2 * x[0] * phi[(0, 1)] + 0.3 * (phi.transpose() * phi).trace()));
    for n in [2, 3] {
        let m = metrics(&mut rng, n);
        let sys = System::new(KineticModel::new(ModelVariant::AffineMetrical, Translational::CauchyCoupled), params(n, &mut rng), pot.clone(), m);
        for _ in 0..5 {
            let s = random_state(&sys, &mut rng, true);
            let r = drunk_missile_residual(&sys, &s).unwrap();
            assert!(max_abs_vec(&r) < 1e-8, "residual {r}");
        }
    }
}

#[test]
fn kinematical_moment_identities() {
    let mut rng = sampling::rng(5);
    let n = 3;
    let m = metrics(&mut rng, n);
    let p = params(n, &mut rng);
    let rest = System::new(KineticModel::new(ModelVariant::DAlembert, Translational::Metrical), p.clone(), PotentialSpec::none(), m.clone());
    let still = rest.state_from_velocities(Configuration::internal(sampling::gl_plus(&mut rng, n, 0.3)).unwrap(), &Mat::zeros(n, n), &Vector::zeros(n)).unwrap();
    let k = kinematical_moments(&rest, &still, &Vector::zeros(n)).unwrap();
    assert_eq!(max_abs(&k.big_k) + max_abs(&k.k_hat) + max_abs_vec(&k.k) + max_abs(&k.i_o), 0.0);

    let s = random_state(&rest, &mut rng, true);
    let k = kinematical_moments(&rest, &s, &Vector::zeros(n)).unwrap();
    assert!(max_abs(&(&s.mom.sigma - &k.big_k * &m.g)) < 1e-12);
    assert!(max_abs_vec(&(&k.k - m.g_inv() * &s.mom.p)) < 1e-12);
    let green = deformation_tensors(&s.config.phi, &m).unwrap().green;
    assert!(max_abs(&(&s.mom.sigma_hat - &k.k_hat * &green)) < 1e-12);
    assert!(max_abs(&(&s.mom.sigma_hat - &k.k_hat * &m.eta)) > 1e-3);
    let origin = sampling::normal_vector(&mut rng, n, 1.0);
    let k = kinematical_moments(&rest, &s, &origin).unwrap();
    assert!(max_abs(&(&k.i_o - (&s.config.x - &origin) * s.mom.p.transpose() - &s.mom.sigma)) < 1e-14);
}

#[test]
fn affine_momentum_balance_two_ways() {
    let mut rng = sampling::rng(6);
    let n = 3;
    let m = metrics(&mut rng, n);
    let pot = PotentialSpec::general(Arc::new(|phi: &Mat, x: &Vector| 0.4 * x.norm_squared() + 0.3 * (phi.transpose() * phi).trace()));
    for model in [
        KineticModel::new(ModelVariant::AffineMetrical, Translational::CauchyCoupled),
        KineticModel::new(ModelVariant::AffineAffine, Translational::CauchyCoupled),
        KineticModel::new(ModelVariant::MetricalAffine, Translational::Metrical),
        KineticModel::new(ModelVariant::DAlembert, Translational::Metrical),
    ] {
        let sys = System::new(model, params(n, &mut rng), pot.clone(), m.clone());
        let s = random_state(&sys, &mut rng, true);
        let origin = sampling::normal_vector(&mut rng, n, 1.0);
        let (direct, via) = affine_momentum_balance(&sys, &s, &origin).unwrap();
        let vel = sys.velocities(&s).unwrap();
        // Balance holds up to the kinetic terms dx/dt·pᵀ + (model-specific spin transport).
        let kinetic = &direct - &via;
        match model.variant {
            ModelVariant::AffineMetrical | ModelVariant::AffineAffine => assert!(max_abs(&kinetic) < 1e-12, "{model:?}: {kinetic}"),
            ModelVariant::DAlembert => {
                let want = &vel.v * s.mom.p.transpose() + &vel.omega * &s.mom.sigma;
                assert!(max_abs(&(kinetic - want)) < 1e-12);
            }
            _ => {
                let want = &vel.v * s.mom.p.transpose() + &vel.omega * &s.mom.sigma - &s.mom.sigma * &vel.omega;
                assert!(max_abs(&(kinetic - want)) < 1e-12);
            }
        }
    }
}

#[test]
fn dalembert_canonical_and_newtonian_accelerations_agree() {
    let mut rng = sampling::rng(7);
    for n in [2, 3] {
        let m = metrics(&mut rng, n);
        let sys = System::new(KineticModel::internal(ModelVariant::DAlembert), params(n, &mut rng), doubly_isotropic(), m.clone());
        for _ in 0..5 {
            let s = random_state(&sys, &mut rng, false);
            let d = full_rhs(&sys, &s).unwrap();
            let phi = &s.config.phi;
            let inv = inverse(phi).unwrap();
            let jinv = inverse(&sys.params.j).unwrap();
            let vel = sys.velocities(&s).unwrap();
            // Canonical: φ̇ᵀ = J⁻¹φ⁻¹Σg⁻¹ differentiated along dΣ.
            let acc_canon = (&jinv * (-&inv * &vel.phi_dot * &inv * &s.mom.sigma + &inv * &d.dsigma) * m.g_inv()).transpose();
            // Newtonian: φ̈J = g⁻¹(−∂V/∂φ) with ∂V/∂φ = −Qᵀφ⁻ᵀ.
            let q = potential_and_forces(&sys.potential, &s.config, &m).unwrap().q_mat;
            let acc_newton = m.g_inv() * q.transpose() * inv.transpose() * &jinv;
            assert!(max_abs(&(acc_canon - &acc_newton)) < 1e-10 * max_abs(&acc_newton).max(1.0));
        }
    }
}

fn conservation_run(sys: &System, state: &FullPhaseState) -> (DriftReport, Trajectory) {
    let traj = integrate(sys, state, 10.0, 101, &IntegratorSettings::default()).unwrap();
    (monitor_invariants(sys, &traj).unwrap(), traj)
}

#[test]
fn metrical_affine_geodetic_conservation() {
    let mut rng = sampling::rng(8);
    let m = metrics(&mut rng, 3);
    let sys = System::new(KineticModel::new(ModelVariant::MetricalAffine, Translational::Metrical), params(3, &mut rng), PotentialSpec::none(), m);
    let s = random_state(&sys, &mut rng, true);
    let (rep, _) = conservation_run(&sys, &s);
    for name in ["SigmaHat", "p", "v"] {
        assert!(rep.get(name).unwrap().max_drift <= 1e-6, "{name}: {rep:?}");
    }
    assert!(rep.get("H").unwrap().max_drift <= 1e-8);
    assert!(rep.get("pHat").map(|e| !e.conserved).unwrap());
    assert!(rep.passed());
}

#[test]
fn affine_metrical_conservation_and_drunk_missile() {
    let mut rng = sampling::rng(9);
    let m = metrics(&mut rng, 3);
    let p = params(3, &mut rng);
    let free = System::new(KineticModel::internal(ModelVariant::AffineMetrical), p.clone(), PotentialSpec::none(), m.clone());
    // Geodetic stretching is unbounded; a slower start keeps the shear spread moderate over the run.
    let (rep, _) = conservation_run(&free, &random_state_with_speed(&free, &mut rng, false, 0.15));
    assert!(rep.get("Sigma").unwrap().max_drift <= 1e-6 && rep.passed(), "{rep:?}");

    let moving = System::new(KineticModel::new(ModelVariant::AffineMetrical, Translational::CauchyCoupled), p, PotentialSpec::none(), m);
    let s = random_state_with_speed(&moving, &mut rng, true, 0.15);
    let (rep, traj) = conservation_run(&moving, &s);
    assert!(rep.get("p").unwrap().max_drift <= 1e-8, "{rep:?}");
    assert!(rep.get("H").unwrap().max_drift <= 1e-8);
    assert!(rep.get("I_O").unwrap().max_drift <= 1e-6);
    let v0 = moving.velocities(&traj.samples[0].state).unwrap().v;
    let dv = traj.samples.iter().map(|x| max_abs_vec(&(moving.velocities(&x.state).unwrap().v - &v0))).fold(0.0, f64::max);
    assert!(dv >= 1e-3);
    // The drag term is a product of C̃ and dC/dt that cancels to O(1); roundoff grows with cond(φ)².
    let mut checked = 0;
    for x in &traj.samples {
        let sv = x.state.config.phi.clone().singular_values();
        if sv.max() / sv.min() > 1e3 {
            continue;
        }
        let r = max_abs_vec(&drunk_missile_residual(&moving, &x.state).unwrap());
        assert!(r < 1e-8, "t={} residual {r:e}", x.state.time);
        checked += 1;
    }
    assert!(checked >= 50);
}

#[test]
fn doubly_isotropic_spin_and_vorticity_magnitudes_conserved() {
    let mut rng = sampling::rng(10);
    let m = metrics(&mut rng, 3);
    for variant in [ModelVariant::AffineAffine, ModelVariant::AffineMetrical, ModelVariant::MetricalAffine] {
        let sys = System::new(KineticModel::internal(variant), params(3, &mut rng), doubly_isotropic(), m.clone());
        let (rep, _) = conservation_run(&sys, &random_state(&sys, &mut rng, false));
        assert!(rep.get("normS").unwrap().max_drift <= 1e-6 && rep.get("normV").unwrap().max_drift <= 1e-6, "{variant:?}: {rep:?}");
        assert!(rep.get("H").unwrap().max_drift <= 1e-8);
    }
}

#[test]
fn dalembert_kinematical_spin_is_not_conserved() {
    let mut rng = sampling::rng(11);
    let m = metrics(&mut rng, 2);
    let sys = System::new(KineticModel::internal(ModelVariant::DAlembert), params(2, &mut rng), PotentialSpec::none(), m);
    // Free d'Alembert motion is affine in t; a rotational velocity keeps det φ away from zero.
    let phi = sampling::gl_plus(&mut rng, 2, 0.3);
    let phi_dot = sampling::skew(&mut rng, 2, 0.3) * &phi;
    let s = sys.state_from_velocities(Configuration::internal(phi).unwrap(), &phi_dot, &Vector::zeros(2)).unwrap();
    let (rep, _) = conservation_run(&sys, &s);
    let k = rep.get("K").unwrap();
    assert!(!k.conserved && k.max_drift > 1e-3);
    assert!(rep.passed());
}

#[test]
fn contracting_dalembert_body_hits_singularity_guard() {
    let sys = System::new(KineticModel::internal(ModelVariant::DAlembert), InertiaParameters::invariant(1, 1.0, 0.0, 0.0), PotentialSpec::none(), MetricPair::identity(1));
    let s = sys.state_from_velocities(Configuration::internal(Mat::identity(1, 1)).unwrap(), &Mat::from_element(1, 1, -1.0), &Vector::zeros(1)).unwrap();
    match integrate(&sys, &s, 3.0, 4, &IntegratorSettings::default()) {
        Err(Error::SingularityApproach { t, .. }) => assert!(t <= 1.0 + 1e-9),
        other => panic!("expected singularity guard, got {other:?}"),
    }
}

#[test]
fn normal_generator_curve_is_followed() {
    let mut rng = sampling::rng(12);
    let n = 3;
    let m = MetricPair::identity(n);
    let sys = System::new(KineticModel::internal(ModelVariant::AffineMetrical), params(n, &mut rng), PotentialSpec::none(), m);
    let f = sampling::euclidean_normal(&mut rng, n, 0.4);
    let phi0 = sampling::gl_plus(&mut rng, n, 0.3);
    let s = sys.state_from_velocities(Configuration::internal(phi0.clone()).unwrap(), &(&phi0 * &f), &Vector::zeros(n)).unwrap();
    let traj = integrate(&sys, &s, 5.0, 2, &IntegratorSettings::default()).unwrap();
    let want = &phi0 * afftop_core::linalg::expm(&(&f * 5.0));
    assert!(max_abs(&(&traj.samples[1].state.config.phi - want)) < 1e-6);
    let vel = sys.velocities(&traj.samples[1].state).unwrap();
    assert!(max_abs(&(vel.omega_hat - f)) < 1e-6);
}
