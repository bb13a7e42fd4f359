use afftop_core::kinematics::{affine_velocities, Configuration, MetricPair};
use afftop_core::linalg::{inverse, max_abs, max_abs_vec};
use afftop_core::models::*;
use afftop_core::sampling::{self, SeededRng};
use proptest::prelude::*;
use rand::Rng;
use std::time::Instant;

const MODELS: [KineticModel; 4] = [
    KineticModel { variant: ModelVariant::DAlembert, translational: Translational::Metrical },
    KineticModel { variant: ModelVariant::AffineAffine, translational: Translational::Metrical },
    KineticModel { variant: ModelVariant::AffineMetrical, translational: Translational::CauchyCoupled },
    KineticModel { variant: ModelVariant::MetricalAffine, translational: Translational::Metrical },
];

fn random_params(rng: &mut SeededRng, model: &KineticModel, n: usize) -> InertiaParameters {
    let m = rng.random_range(0.5..3.0);
    let j = sampling::spd(rng, n, 0.3, 2.0);
    let (i, a) = match model.variant {
        ModelVariant::AffineAffine => (0.0, rng.random_range(0.5..2.5)),
        ModelVariant::DAlembert => (0.0, 0.0),
        _ => {
            let i: f64 = rng.random_range(1.0..3.0);
            (i, i * rng.random_range(-0.8..0.8))
        }
    };
    let b = rng.random_range(-0.05..0.5);
    let p = InertiaParameters::new(m, j, i, a, b);
    assert!(validate_params(model, &p, n).is_valid());
    p
}

struct Sample {
    params: InertiaParameters,
    metrics: MetricPair,
    config: Configuration,
    vel: afftop_core::kinematics::VelocityState,
}

fn sample(rng: &mut SeededRng, model: &KineticModel, n: usize) -> Sample {
    let params = random_params(rng, model, n);
    let metrics = MetricPair::new(sampling::spd(rng, n, 0.5, 2.0), sampling::spd(rng, n, 0.5, 2.0)).unwrap();
    let config = Configuration::new(sampling::gl_plus(rng, n, 0.4), sampling::normal_vector(rng, n, 1.0)).unwrap();
    let phi_dot = sampling::normal_matrix_entries(rng, n, 1.0);
    let v = sampling::normal_vector(rng, n, 1.0);
    let vel = affine_velocities(&config.phi, &phi_dot, &v).unwrap();
    Sample { params, metrics, config, vel }
}

#[test]
fn legendre_round_trip_hundred_samples_per_model() {
    let mut rng = sampling::rng(101);
    let start = Instant::now();
    for model in MODELS {
        let mut worst = 0.0_f64;
        for k in 0..100 {
            let s = sample(&mut rng, &model, 2 + k % 3);
            let mom = legendre_forward(&model, &s.params, &s.config, &s.vel, &s.metrics).unwrap();
            let back = legendre_inverse(&model, &s.params, &s.config, &mom, &s.metrics).unwrap();
            let scale = max_abs(&s.vel.phi_dot).max(max_abs_vec(&s.vel.v)).max(1.0);
            worst = worst
                .max(max_abs(&(&back.phi_dot - &s.vel.phi_dot)) / scale)
                .max(max_abs_vec(&(&back.v - &s.vel.v)) / scale);
        }
        assert!(worst <= 1e-10, "{model:?}: {worst:e}");
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn hamiltonian_equals_lagrangian_energy() {
    let mut rng = sampling::rng(102);
    for model in MODELS {
        for k in 0..30 {
            let s = sample(&mut rng, &model, 2 + k % 3);
            let t = kinetic_energy(&model, &s.params, &s.config, &s.vel, &s.metrics).unwrap();
            let mom = legendre_forward(&model, &s.params, &s.config, &s.vel, &s.metrics).unwrap();
            let h = kinetic_hamiltonian(&model, &s.params, &s.config, &mom, &s.metrics).unwrap();
            assert!((t - h).abs() <= 1e-10 * t.abs().max(1.0), "{model:?}: {t} vs {h}");
            // T is quadratic, so 2T is the pairing of momenta with velocities.
            let pairing = (&mom.sigma * &s.vel.omega).trace() + mom.p.dot(&s.vel.v);
            assert!((2.0 * t - pairing).abs() <= 1e-10 * t.abs().max(1.0), "{model:?}: {} vs {pairing}", 2.0 * t);
        }
    }
}

#[test]
fn casimir_form_matches_for_invariant_models() {
    let mut rng = sampling::rng(103);
    for variant in [ModelVariant::AffineAffine, ModelVariant::AffineMetrical, ModelVariant::MetricalAffine] {
        let model = KineticModel::internal(variant);
        for k in 0..30 {
            let s = sample(&mut rng, &model, 2 + k % 3);
            let mom = legendre_forward(&model, &s.params, &s.config, &s.vel, &s.metrics).unwrap();
            let a = kinetic_hamiltonian(&model, &s.params, &s.config, &mom, &s.metrics).unwrap();
            let b = kinetic_hamiltonian_casimir_form(&model, &s.params, &s.config, &mom, &s.metrics).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{variant:?}: {a} vs {b}");
        }
    }
}

#[test]
fn unitary_compact_and_mixed_pairings_are_rejected() {
    let p = InertiaParameters::invariant(3, 2.0, 0.5, 0.1);
    assert!(KineticModel::new(ModelVariant::AffineMetrical, Translational::Metrical).check_pairing().is_err());
    assert!(KineticModel::new(ModelVariant::MetricalAffine, Translational::CauchyCoupled).check_pairing().is_err());
    assert!(KineticModel::internal(ModelVariant::UnitaryCompact).check_pairing().is_err());
    let bad = validate_params(&KineticModel::new(ModelVariant::AffineMetrical, Translational::Metrical), &p, 3);
    assert!(bad.violations.iter().any(|v| v.kind == ViolationKind::InvalidPairing));
    let singular = InertiaParameters::invariant(3, 1.0, 1.0, 0.0);
    let r = validate_params(&KineticModel::internal(ModelVariant::AffineMetrical), &singular, 3);
    assert!(r.violations.iter().any(|v| v.kind == ViolationKind::SingularInertia));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn casimirs_are_conjugation_invariant(seed in any::<u64>(), n in 2usize..=4, k in 1u32..=4) {
        let mut rng = sampling::rng(seed);
        let sigma = sampling::normal_matrix_entries(&mut rng, n, 1.0);
        let g = sampling::gl_plus(&mut rng, n, 0.4);
        let conj = &g * &sigma * inverse(&g).unwrap();
        let a = casimir(k, &sigma);
        let b = casimir(k, &conj);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn legendre_round_trip_is_exact(seed in any::<u64>(), which in 0usize..4, n in 2usize..=4) {
        let mut rng = sampling::rng(seed);
        let model = MODELS[which];
        let s = sample(&mut rng, &model, n);
        let mom = legendre_forward(&model, &s.params, &s.config, &s.vel, &s.metrics).unwrap();
        let back = legendre_inverse(&model, &s.params, &s.config, &mom, &s.metrics).unwrap();
        let again = legendre_forward(&model, &s.params, &s.config, &back, &s.metrics).unwrap();
        let scale = max_abs(&mom.sigma).max(max_abs_vec(&mom.p)).max(1.0);
        prop_assert!(max_abs(&(&again.sigma - &mom.sigma)) <= 1e-10 * scale);
        prop_assert!(max_abs_vec(&(&again.p - &mom.p)) <= 1e-10 * scale);
    }
}
