mod common;

use brenier_core::sampling::{batch_diagnostics, sample_gaussian, sample_inverse_cdf_1d, sample_mala, MalaOptions};
use brenier_core::stats::{ks_critical_99, ks_critical_99_two_sample, ks_statistic, ks_two_sample, mean, variance};
use brenier_core::{Error, Potential, SampleProvenance};
use common::{laplace_cdf, normal_sf};
use proptest::prelude::*;

#[test]
fn gaussian_mean_within_clt_band() {
    let n = 1_000_000;
    let b = sample_gaussian(1, n, 2024).unwrap();
    assert!(mean(b.points()).abs() < 4.0 / (n as f64).sqrt());
    assert_eq!(b.provenance(), SampleProvenance::GaussianDirect);
}

#[test]
fn gaussian_second_moment_is_dimension() {
    let b = sample_gaussian(3, 100_000, 7).unwrap();
    let m2 = b.points().iter().map(|v| v * v).sum::<f64>() / b.len() as f64;
    assert!((m2 - 3.0).abs() < 0.02 * 3.0);
}

#[test]
fn inverse_cdf_laplace_variance() {
    let pot = Potential::laplace_product(1).unwrap();
    let b = sample_inverse_cdf_1d(&pot, 100_000, 1).unwrap();
    assert!((variance(b.points()) - 1.0).abs() < 0.02);
    assert!(mean(b.points()).abs() < 4.0 * (1.0 / 1e5f64).sqrt());
    let ks = ks_statistic(b.points(), laplace_cdf);
    assert!(ks < ks_critical_99(b.len()), "KS {ks}");
}

#[test]
fn inverse_cdf_gaussian_ks() {
    let pot = Potential::gaussian(1, 1.0).unwrap();
    let b = sample_inverse_cdf_1d(&pot, 100_000, 9).unwrap();
    let ks = ks_statistic(b.points(), |x| 1.0 - normal_sf(x));
    assert!(ks < 1.63 / (b.len() as f64).sqrt(), "KS {ks}");
    assert!(mean(b.points()).abs() < 4.0 / (1e5f64).sqrt());
}

#[test]
fn inverse_cdf_needs_one_dimension() {
    let pot = Potential::gaussian(2, 1.0).unwrap();
    assert!(matches!(sample_inverse_cdf_1d(&pot, 10, 0), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn mala_gaussian_covariance() {
    let pot = Potential::gaussian(2, 1.0).unwrap();
    let b = sample_mala(&pot, 100_000, 3, &MalaOptions::default()).unwrap();
    let (_, cov_err) = b.isotropy_error();
    assert!(cov_err < 0.05, "covariance error {cov_err}");
    let rate = b.diagnostics().unwrap().acceptance_rate.unwrap();
    assert!((0.45..0.7).contains(&rate), "acceptance {rate}");
}

#[test]
fn mala_power_mean_is_centred() {
    let pot = Potential::power(2, 1.5).unwrap();
    let b = sample_mala(&pot, 100_000, 4, &MalaOptions::default()).unwrap();
    let diag = batch_diagnostics(&b).unwrap();
    for (j, m) in diag.mean.iter().enumerate() {
        let band = 4.0 / diag.ess[j].sqrt();
        assert!(m.abs() < band, "coordinate {j}: mean {m}, band {band}");
    }
}

#[test]
fn mala_rejects_untunable_steps() {
    let pot = Potential::gaussian(2, 1.0).unwrap();
    let opts = MalaOptions { step: Some(50.0), ..MalaOptions::default() };
    assert!(matches!(sample_mala(&pot, 1000, 1, &opts), Err(Error::Tuning { .. })));
}

#[test]
fn mala_and_inverse_cdf_agree_in_one_dimension() {
    for pot in [Potential::laplace_product(1).unwrap(), Potential::power(1, 1.5).unwrap()] {
        let a = sample_inverse_cdf_1d(&pot, 10_000, 31).unwrap();
        let b = sample_mala(&pot, 10_000, 32, &MalaOptions { thinning: 20, ..MalaOptions::default() }).unwrap();
        let ks = ks_two_sample(a.points(), b.points());
        assert!(ks < ks_critical_99_two_sample(10_000, 10_000), "{:?}: KS {ks}", pot.family());
    }
}

#[test]
fn iid_batch_ess_is_close_to_n() {
    let b = sample_gaussian(3, 20_000, 8).unwrap();
    let diag = batch_diagnostics(&b).unwrap();
    for ess in diag.ess {
        assert!((ess / 20_000.0 - 1.0).abs() < 0.2, "ESS {ess}");
    }
    assert!(!diag.degenerate);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn samplers_are_pure_functions_of_seed(seed in any::<u64>(), d in 1usize..4) {
        let a = sample_gaussian(d, 64, seed).unwrap();
        let b = sample_gaussian(d, 64, seed).unwrap();
        prop_assert_eq!(a.points(), b.points());
        let pot = Potential::power(d, 1.5).unwrap();
        let opts = MalaOptions { step: Some(0.8), burn_in: 50, thinning: 1, start: None };
        match (sample_mala(&pot, 100, seed, &opts), sample_mala(&pot, 100, seed, &opts)) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x.points(), y.points()),
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            _ => prop_assert!(false, "nondeterministic outcome"),
        }
        if d == 1 {
            let lap = Potential::laplace_product(1).unwrap();
            let x = sample_inverse_cdf_1d(&lap, 32, seed).unwrap();
            let y = sample_inverse_cdf_1d(&lap, 32, seed).unwrap();
            prop_assert_eq!(x.points(), y.points());
            prop_assert!(x.points().iter().all(|v| v.is_finite()));
        }
    }
}
