use afftop_core::kinematics::*;
use afftop_core::linalg::{max_abs, max_abs_vec, Mat, Vector};
use afftop_core::sampling::{self, SeededRng};
use proptest::prelude::*;

fn metrics(rng: &mut SeededRng, n: usize) -> MetricPair {
    MetricPair::new(sampling::spd(rng, n, 0.5, 2.0), sampling::spd(rng, n, 0.5, 2.0)).unwrap()
}

fn config(rng: &mut SeededRng, n: usize, m: &MetricPair) -> Mat {
    m.from_orthonormal(&sampling::gl_plus(rng, n, 0.5))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_polar_reconstructs(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = sampling::rng(seed);
        let m = metrics(&mut rng, n);
        let phi = config(&mut rng, n, &m);
        let f = two_polar_decompose(&phi, &m, None).unwrap();
        prop_assert!(two_polar_error(&phi, &f, &m) <= 1e-10);
        prop_assert!(frame_orthonormality_error(&f, &m) <= 1e-10);
        prop_assert!(f.l.determinant() > 0.0 && f.r.determinant() > 0.0);
        prop_assert!(f.d.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn polar_reconstructs(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = sampling::rng(seed);
        let m = metrics(&mut rng, n);
        let phi = config(&mut rng, n, &m);
        let p = polar_decompose(&phi, &m).unwrap();
        let scale = max_abs(&phi);
        prop_assert!(max_abs(&(&p.u * &p.a_sym - &phi)) <= 1e-10 * scale);
        prop_assert!(max_abs(&(&p.b_sym * &p.u - &phi)) <= 1e-10 * scale);
        // U is a (η, g)-isometry: Uᵀ g U = η.
        prop_assert!(max_abs(&(p.u.transpose() * &m.g * &p.u - &m.eta)) <= 1e-10 * max_abs(&m.eta));
    }

    #[test]
    fn invariants_ignore_isometries(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = sampling::rng(seed);
        let m = metrics(&mut rng, n);
        let phi = config(&mut rng, n, &m);
        let left = m.from_orthonormal(&(sampling::rotation(&mut rng, n) * m.to_orthonormal(&phi)));
        let right = m.from_orthonormal(&(m.to_orthonormal(&phi) * sampling::rotation(&mut rng, n)));
        let base = deformation_tensors(&phi, &m).unwrap();
        for other in [left, right] {
            let d = deformation_tensors(&other, &m).unwrap();
            for basis in [InvariantBasis::Eigen, InvariantBasis::TraceG, InvariantBasis::TraceC] {
                let a = deformation_invariants(&base, basis);
                let b = deformation_invariants(&d, basis);
                prop_assert!(max_abs_vec(&(&a - &b)) <= 1e-10 * max_abs_vec(&a).max(1.0), "{basis:?}");
            }
        }
    }

    #[test]
    fn volume_ratio_is_multiplicative(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = sampling::rng(seed);
        let g = sampling::spd(&mut rng, n, 0.5, 2.0);
        let k = sampling::spd(&mut rng, n, 0.5, 2.0);
        let eta = sampling::spd(&mut rng, n, 0.5, 2.0);
        let outer = MetricPair::new(k.clone(), g.clone()).unwrap();
        let inner = MetricPair::new(eta.clone(), k).unwrap();
        let whole = MetricPair::new(eta, g).unwrap();
        let a = config(&mut rng, n, &outer);
        let b = config(&mut rng, n, &inner);
        let prod = volume_ratio(&(&a * &b), &whole).unwrap().delta;
        let split = volume_ratio(&a, &outer).unwrap().delta * volume_ratio(&b, &inner).unwrap().delta;
        prop_assert!(rel(prod, split) <= 1e-12);
    }

    #[test]
    fn stretch_invariants_agree_across_bases(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = sampling::rng(seed);
        let m = metrics(&mut rng, n);
        let phi = config(&mut rng, n, &m);
        let d = deformation_tensors(&phi, &m).unwrap();
        let traces = deformation_invariants(&d, InvariantBasis::TraceG);
        for k in 0..n {
            let power_sum: f64 = d.lambda.iter().map(|l| l.powi(k as i32 + 1)).sum();
            prop_assert!(rel(power_sum, traces[k]) <= 1e-10);
        }
        // Cauchy eigenvalues are the reciprocals of the Green ones.
        let c = deformation_invariants(&d, InvariantBasis::TraceC);
        let inv_sum: f64 = d.lambda.iter().map(|l| 1.0 / l).sum();
        prop_assert!(rel(inv_sum, c[0]) <= 1e-10);
        let vr = volume_ratio(&phi, &m).unwrap();
        prop_assert!((vr.q_mean - d.q.mean()).abs() <= 1e-10);
    }

    #[test]
    fn velocities_round_trip(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = sampling::rng(seed);
        let phi = sampling::gl_plus(&mut rng, n, 0.5);
        let phi_dot = sampling::normal_matrix_entries(&mut rng, n, 1.0);
        let v = sampling::normal_vector(&mut rng, n, 1.0);
        let vel = affine_velocities(&phi, &phi_dot, &v).unwrap();
        let a = velocities_from_omega(&phi, &vel.omega, &v).unwrap();
        let b = velocities_from_omega_hat(&phi, &vel.omega_hat, &v).unwrap();
        prop_assert!(max_abs(&(&a.phi_dot - &phi_dot)) <= 1e-10 * max_abs(&phi_dot).max(1.0));
        prop_assert!(max_abs(&(&b.phi_dot - &phi_dot)) <= 1e-10 * max_abs(&phi_dot).max(1.0));
    }
}

#[test]
fn continuity_hint_follows_a_crossing() {
    let m = MetricPair::identity(2);
    let hint = two_polar_decompose(&Mat::from_diagonal(&Vector::from_vec(vec![1.2, 1.0])), &m, None).unwrap();
    let after = Mat::from_diagonal(&Vector::from_vec(vec![0.9, 1.1]));
    let f = two_polar_decompose(&after, &m, Some(&hint)).unwrap();
    assert!((f.d[0] - 0.9).abs() < 1e-14 && (f.d[1] - 1.1).abs() < 1e-14);
    assert!(two_polar_error(&after, &f, &m) < 1e-14);
}

#[test]
fn singular_and_reflected_configurations_are_rejected() {
    let m = MetricPair::identity(2);
    assert!(two_polar_decompose(&Mat::zeros(2, 2), &m, None).is_err());
    let mut flip = Mat::identity(2, 2);
    flip[(0, 0)] = -1.0;
    assert!(polar_decompose(&flip, &m).is_err());
    assert!(volume_ratio(&flip, &m).is_err());
}
