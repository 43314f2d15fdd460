mod common;

use approx::assert_relative_eq;
use brenier_core::potential::{hessian_band_check, isotropize};
use brenier_core::sampling::{sample_gaussian, sample_mala, MalaOptions};
use brenier_core::{Error, Family, Potential, SampleBatch, SampleProvenance};
use common::{fd_gradient, rel_err, simpson};
use proptest::prelude::*;

fn families(d: usize) -> Vec<Potential> {
    vec![
        Potential::gaussian(d, 1.0).unwrap(),
        Potential::gaussian(d, 2.5).unwrap(),
        Potential::power(d, 1.5).unwrap(),
        Potential::power(d, 1.2).unwrap(),
        Potential::power_with_scale(d, 2.0, 0.7).unwrap(),
        Potential::laplace_product(d).unwrap(),
    ]
}

#[test]
fn gaussian_examples() {
    let g = Potential::gaussian(1, 1.0).unwrap();
    for x in [-3.0, 0.0, 0.4, 12.0] {
        assert_eq!(g.hessian(&[x]).unwrap().get(0, 0), 1.0);
    }
    let g3 = Potential::gaussian(3, 2.0).unwrap();
    let mut grad = [0.0; 3];
    g3.gradient(&[1.0, -2.0, 4.0], &mut grad).unwrap();
    assert_eq!(grad, [0.25, -0.5, 1.0]);
    assert_relative_eq!(g3.value(&[1.0, 0.0, 0.0]) - g3.value(&[0.0; 3]), 0.125, epsilon = 1e-15);
    assert_eq!(g3.metadata().beta, Some(0.25));
    assert!(matches!(Potential::gaussian(2, 0.0), Err(Error::InvalidParameter { name: "sigma", .. })));
    assert!(Potential::gaussian(2, -1.0).is_err());
    assert!(Potential::gaussian(0, 1.0).is_err());
}

#[test]
fn standard_gaussian_samples_are_isotropic() {
    let batch = sample_gaussian(2, 100_000, 11).unwrap();
    let (mean_err, cov_err) = batch.isotropy_error();
    assert!(mean_err < 4.0 / (1e5f64).sqrt());
    assert!(cov_err < 0.05, "covariance error {cov_err}");
}

#[test]
fn laplace_coordinate_variance_is_one() {
    let pot = Potential::laplace_product(1).unwrap();
    let v0 = pot.value(&[0.0]);
    let density = |t: f64| (v0 - pot.value(&[t])).exp();
    // split at the kink so Simpson sees smooth integrands
    let mass = 2.0 * simpson(density, 0.0, 40.0, 20_000);
    let second = 2.0 * simpson(|t| t * t * density(t), 0.0, 40.0, 20_000);
    assert_relative_eq!(second / mass, 1.0, epsilon = 1e-10);
    assert_eq!(pot.metadata().c2, Some(0.0));
    assert!(pot.value(&[0.0]).is_finite());
}

#[test]
fn laplace_reports_its_kinks() {
    let pot = Potential::laplace_product(3).unwrap();
    let x = [0.5, 0.0, -1.0];
    assert!(pot.non_smooth_at(&x));
    let mut g = [0.0; 3];
    assert!(matches!(pot.gradient(&x, &mut g), Err(Error::NonSmooth { coordinate: 1 })));
    assert!(matches!(pot.hessian(&x), Err(Error::NonSmooth { .. })));
    assert!(!pot.non_smooth_at(&[0.5, 0.1, -1.0]));
}

#[test]
fn power_exponent_range() {
    assert!(Potential::power(2, 1.0).is_err());
    assert!(Potential::power(2, 2.5).is_err());
    assert!(Potential::power(2, 2.0).is_ok());
}

#[test]
fn power_p2_has_constant_hessian() {
    let pot = Potential::power(3, 2.0).unwrap();
    let (r0, t0) = pot.radial_eigenvalues(0.0).unwrap();
    for r in [0.5, 3.0, 40.0] {
        let (rr, tt) = pot.radial_eigenvalues(r).unwrap();
        assert_relative_eq!(rr, r0, max_relative = 1e-12);
        assert_relative_eq!(tt, t0, max_relative = 1e-12);
    }
}

#[test]
fn power_second_derivative_at_origin_matches_closed_form() {
    let pot = Potential::power_with_scale(1, 1.5, 1.0).unwrap();
    let (radial, _) = pot.radial_eigenvalues(0.0).unwrap();
    assert_relative_eq!(radial, 1.5, max_relative = 1e-14);
    // finite differences of V itself
    let h = 1e-4;
    let fd = (pot.value(&[h]) - 2.0 * pot.value(&[0.0]) + pot.value(&[-h])) / (h * h);
    assert_relative_eq!(fd, 1.5, max_relative = 1e-6);
    let pot4 = Potential::power_with_scale(4, 1.5, 1.0).unwrap();
    assert_relative_eq!(pot4.radial_eigenvalues(0.0).unwrap().0, 1.5 * 4f64.powf(-0.25), max_relative = 1e-14);
}

#[test]
fn power_eigenvalues_decay_like_inverse_sqrt() {
    let pot = Potential::power(2, 1.5).unwrap();
    let a = match pot.family() {
        Family::Power { a, .. } => *a,
        _ => unreachable!(),
    };
    let r = 1e3;
    let (radial, tangential) = pot.radial_eigenvalues(r).unwrap();
    // f'(r)/r → 1.5 a r^{-1/2},  f''(r) → 0.75 a r^{-1/2}
    assert_relative_eq!(tangential * r.sqrt(), 1.5 * a, max_relative = 1e-5);
    assert_relative_eq!(radial * r.sqrt(), 0.75 * a, max_relative = 1e-5);
    let mut pts = Vec::new();
    for r in [1.0, 10.0, 100.0, 1000.0] {
        pts.extend([r, 0.0, 0.0, r, r / 2f64.sqrt(), -r / 2f64.sqrt()]);
    }
    let grid = SampleBatch::new(2, pts, 0, SampleProvenance::GaussianDirect).unwrap();
    let report = hessian_band_check(&pot, &grid, 0.0).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn band_check_examples() {
    let points = sample_gaussian(3, 1000, 5).unwrap();
    let g = hessian_band_check(&Potential::gaussian(3, 1.0).unwrap(), &points, 1e-12).unwrap();
    assert!(g.passed);
    assert!(g.worst.as_ref().unwrap().margin.abs() < 1e-12, "Gaussian margins are zero: {:?}", g.worst);

    let p = hessian_band_check(&Potential::power(3, 1.5).unwrap(), &points, 0.0).unwrap();
    assert!(p.passed, "{p:?}");

    let l = hessian_band_check(&Potential::laplace_product(3).unwrap(), &points, 0.0).unwrap();
    assert!(!l.passed);
    assert!(l.is_consistent() && g.is_consistent() && p.is_consistent());
}

#[test]
fn isotropize_identity_for_standard_gaussian() {
    let pot = Potential::gaussian(2, 1.0).unwrap();
    let batch = sample_gaussian(2, 100_000, 3).unwrap();
    let iso = isotropize(&pot, &batch).unwrap();
    let Family::Affine(img) = iso.family() else { panic!("expected an affine image") };
    for i in 0..2 {
        for j in 0..2 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((img.whitening.get(i, j) - target).abs() < 0.02);
        }
    }
    assert!(iso.metadata().isotropic);
}

#[test]
fn isotropize_wide_gaussian_halves_coordinates() {
    let pot = Potential::gaussian(2, 2.0).unwrap();
    let raw = sample_gaussian(2, 100_000, 4).unwrap();
    let scaled: Vec<f64> = raw.points().iter().map(|v| 2.0 * v).collect();
    let batch = SampleBatch::new(2, scaled, 4, SampleProvenance::GaussianDirect).unwrap();
    let iso = isotropize(&pot, &batch).unwrap();
    let Family::Affine(img) = iso.family() else { panic!("expected an affine image") };
    for i in 0..2 {
        assert!(rel_err(img.whitening.get(i, i), 0.5, 1.0) < 0.02);
    }
    assert!(img.whitening.get(0, 1).abs() < 0.01);
}

#[test]
fn isotropize_power_then_resample() {
    let pot = Potential::power_with_scale(2, 1.5, 0.6).unwrap();
    let batch = sample_mala(&pot, 100_000, 21, &MalaOptions::default()).unwrap();
    let iso = isotropize(&pot, &batch).unwrap();
    let fresh = sample_mala(&iso, 100_000, 22, &MalaOptions::default()).unwrap();
    let (_, cov_err) = fresh.isotropy_error();
    assert!(cov_err < 0.05, "covariance error after isotropization {cov_err}");
}

#[test]
fn isotropize_rejects_small_or_degenerate_batches() {
    let pot = Potential::gaussian(2, 1.0).unwrap();
    let few = sample_gaussian(2, 10, 1).unwrap();
    assert!(isotropize(&pot, &few).is_err());
    let flat: Vec<f64> = (0..200).flat_map(|i| [i as f64, 2.0 * i as f64]).collect();
    let line = SampleBatch::new(2, flat, 0, SampleProvenance::GaussianDirect).unwrap();
    assert!(matches!(isotropize(&pot, &line), Err(Error::SingularCovariance { .. })));
}

#[test]
fn radial_closed_forms_match_full_hessian() {
    for d in 1..=5 {
        let pot = Potential::power(d, 1.5).unwrap();
        for r in [0.1, 1.0, 4.0, 30.0] {
            let mut x = vec![0.0; d];
            x[0] = r * 0.6;
            if d > 1 {
                x[1] = r * 0.8;
            } else {
                x[0] = r;
            }
            let full = pot.hessian(&x).unwrap().eigenvalues();
            let (radial, tangential) = pot.radial_eigenvalues(r).unwrap();
            let mut closed = vec![tangential; d];
            closed[0] = radial;
            closed.sort_by(f64::total_cmp);
            for (a, b) in full.iter().zip(&closed) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "d={d} r={r}: {full:?} vs {closed:?}");
            }
        }
    }
}

fn point_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=5).prop_flat_map(|d| (Just(d), proptest::collection::vec(-6.0f64..6.0, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_finite_differences((d, x) in point_strategy()) {
        for pot in families(d) {
            if pot.non_smooth_at(&x) || x.iter().any(|v| v.abs() < 1e-2) && matches!(pot.family(), Family::LaplaceProduct) {
                continue;
            }
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let h = 1e-4 * (1.0 + r);
            let fd = fd_gradient(|y| pot.value(y), &x, h);
            let mut g = vec![0.0; d];
            pot.gradient(&x, &mut g).unwrap();
            let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() / scale < 1e-5, "{:?}: {g:?} vs {fd:?}", pot.family());
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences((d, x) in point_strategy()) {
        for pot in families(d) {
            if matches!(pot.family(), Family::LaplaceProduct) {
                continue;
            }
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let h = 1e-4 * (1.0 + r);
            let hess = pot.hessian(&x).unwrap();
            let mut up = vec![0.0; d];
            let mut down = vec![0.0; d];
            let mut y = x.clone();
            let scale = (0..d).map(|i| hess.get(i, i).abs()).fold(0.0f64, f64::max);
            for j in 0..d {
                y[j] = x[j] + h;
                pot.gradient(&y, &mut up).unwrap();
                y[j] = x[j] - h;
                pot.gradient(&y, &mut down).unwrap();
                y[j] = x[j];
                for i in 0..d {
                    let fd = (up[i] - down[i]) / (2.0 * h);
                    prop_assert!((fd - hess.get(i, j)).abs() / scale < 1e-4);
                }
            }
            prop_assert!(hess.asymmetry() < 1e-12);
        }
    }

    #[test]
    fn potentials_are_log_concave((d, x) in point_strategy()) {
        for pot in families(d) {
            if let Ok(h) = pot.hessian(&x) {
                let min = h.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
                prop_assert!(min >= -1e-8);
            }
        }
    }
}
