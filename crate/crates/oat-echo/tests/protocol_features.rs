//! Feature-level behaviour of the optimized protocol family: slice peaks,
//! landscape structure under noise, Fisher-information saturation, and
//! scaling asymptotics.

use oat_echo::optimizer::{
    find_local_maxima, fit_scaling, landscape, nu_optimized_slice, refined_class_maximum,
    ProtocolClass,
};
use oat_echo::protocol::{make_grid, NoiseModel};
use oat_echo::qfi::{qfi_closed_form_max, qfi_max};
use std::f64::consts::PI;

fn nu_search() -> oat_echo::protocol::ParameterGrid {
    make_grid(0.0, 1.0, 2, -PI, PI, 257).unwrap()
}

/// Peaks of a slice after merging shallow double-bumps: a maximum counts as
/// a separate peak only if the valley between it and its neighbour peak
/// drops below 95% of the lower of the two.
fn major_peaks(values: &[f64]) -> usize {
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for i in 1..values.len() - 1 {
        if values[i] > values[i - 1] && values[i] > values[i + 1] {
            peaks.push((i, values[i]));
        }
    }
    let mut merged = 0usize;
    let mut last: Option<(usize, f64)> = None;
    for &(i, v) in &peaks {
        if let Some((j, w)) = last {
            let valley = values[j..=i].iter().cloned().fold(f64::INFINITY, f64::min);
            if valley >= 0.95 * v.min(w) {
                // Same structure; keep the taller representative.
                if v > w {
                    last = Some((i, v));
                }
                continue;
            }
            merged += 1;
        }
        last = Some((i, v));
    }
    if last.is_some() {
        merged += 1;
    }
    merged
}

#[test]
fn slice_shows_three_protocol_peaks() {
    let mus: Vec<f64> = (0..129).map(|i| PI * f64::from(i) / 128.0).collect();
    for sigma in [0.0, 0.1, 0.5] {
        let noise = NoiseModel::collective_only(sigma).unwrap();
        let slice = nu_optimized_slice(&mus, 32, noise, &nu_search()).unwrap();
        let values: Vec<f64> = slice.iter().map(|p| p.snr_sq_over_n).collect();
        assert_eq!(major_peaks(&values), 3, "sigma={sigma}: {values:?}");
        // Standard quantum limit at zero twisting, noise or not.
        assert!((values[0] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn out_peak_is_the_robust_one_under_noise() {
    // Noiseless at N=32 the squeezing peak still wins; with collective
    // dephasing the double-inversion peak takes over.
    let mus: Vec<f64> = (0..129).map(|i| PI * f64::from(i) / 128.0).collect();
    let peak_near = |slice: &[oat_echo::optimizer::SlicePoint], lo: f64, hi: f64| {
        slice
            .iter()
            .filter(|p| p.mu > lo && p.mu < hi)
            .map(|p| p.snr_sq_over_n)
            .fold(0.0f64, f64::max)
    };
    let t = 4.0 / 32f64.sqrt();
    let clean = nu_optimized_slice(&mus, 32, NoiseModel::NONE, &nu_search()).unwrap();
    assert!(peak_near(&clean, 0.0, t) > peak_near(&clean, t, PI - t));
    let noisy = nu_optimized_slice(
        &mus,
        32,
        NoiseModel::collective_only(0.1).unwrap(),
        &nu_search(),
    )
    .unwrap();
    assert!(peak_near(&noisy, t, PI - t) > peak_near(&noisy, 0.0, t));
}

#[test]
fn slice_respects_fisher_bound() {
    let mus: Vec<f64> = (0..33).map(|i| PI * f64::from(i) / 32.0).collect();
    let slice = nu_optimized_slice(&mus, 32, NoiseModel::NONE, &nu_search()).unwrap();
    for p in &slice {
        let fq = qfi_closed_form_max(p.mu, 32);
        assert!(
            p.snr_sq_over_n * 32.0 <= fq * (1.0 + 1e-9),
            "mu={}: {} > {}",
            p.mu,
            p.snr_sq_over_n * 32.0,
            fq
        );
    }
}

#[test]
fn out_class_overtakes_squeezing_with_size() {
    // At N=32 the squeezing optimum is still ahead; the double-inversion
    // class takes over as N grows.
    let sq32 = refined_class_maximum(32, NoiseModel::NONE, ProtocolClass::Squeezing)
        .unwrap()
        .unwrap();
    let out32 = refined_class_maximum(32, NoiseModel::NONE, ProtocolClass::OverUnTwisting)
        .unwrap()
        .unwrap();
    let sq128 = refined_class_maximum(128, NoiseModel::NONE, ProtocolClass::Squeezing)
        .unwrap()
        .unwrap();
    let out128 = refined_class_maximum(128, NoiseModel::NONE, ProtocolClass::OverUnTwisting)
        .unwrap()
        .unwrap();
    assert!(sq32.snr > out32.snr);
    assert!(out128.snr > sq128.snr);
}

#[test]
fn noisy_landscape_keeps_structure_but_loses_ghz() {
    // sigma = 0.1 at N=32: all three classes still produce maxima, the GHZ
    // one strictly below its noiseless value.
    let grid = make_grid(0.0, PI, 129, -PI, PI, 257).unwrap();
    let noise = NoiseModel::collective_only(0.1).unwrap();
    let ls = landscape(&grid, 32, noise).unwrap();
    let maxima = find_local_maxima(&ls, 32).unwrap();
    assert_eq!(maxima.len(), 3, "{maxima:?}");

    let clean = landscape(&grid, 32, NoiseModel::NONE).unwrap();
    let clean_maxima = find_local_maxima(&clean, 32).unwrap();
    let ghz_clean = clean_maxima
        .iter()
        .find(|m| m.class == ProtocolClass::Ghz)
        .unwrap();
    let ghz_noisy = maxima
        .iter()
        .find(|m| m.class == ProtocolClass::Ghz)
        .unwrap();
    assert!(ghz_noisy.snr < ghz_clean.snr * 0.5, "GHZ barely suppressed");
}

#[test]
fn out_protocols_approach_fisher_bound_with_size() {
    // Ratio max_nu (1/dphi)^2 / F_Q at the double-inversion optimum grows
    // with N (noiseless closed-form Fisher information).
    let mut prev = 0.0;
    for &n in &[128u32, 256, 512] {
        let out = refined_class_maximum(n, NoiseModel::NONE, ProtocolClass::OverUnTwisting)
            .unwrap()
            .unwrap();
        let fq = qfi_closed_form_max(out.mu, n);
        let ratio = out.snr * out.snr / fq;
        assert!(ratio <= 1.0 + 1e-9);
        assert!(
            ratio > prev,
            "saturation not monotone: {ratio} after {prev}"
        );
        prev = ratio;
    }
}

#[test]
fn dephased_fisher_information_below_ideal() {
    for i in 1..=8 {
        let mu = PI * f64::from(i) / 8.0;
        let ideal = qfi_closed_form_max(mu, 16);
        let dephased = qfi_max(mu, 0.5, 16).unwrap().value;
        assert!(dephased < ideal, "mu={mu}: {dephased} !< {ideal}");
    }
}

#[test]
fn squeezing_individual_scaling_reaches_linear_asymptote() {
    // Under strong per-particle dephasing the squeezing-class optimum
    // approaches linear scaling only slowly; over N = 2^13..2^16 the fitted
    // exponent settles within 0.1 of 1.
    let noise = NoiseModel::individual_only(2.0).unwrap();
    let ns: Vec<u32> = (13..=16).map(|k| 1u32 << k).collect();
    let mut samples = Vec::new();
    for &n in &ns {
        let m = refined_class_maximum(n, noise, ProtocolClass::Squeezing)
            .unwrap()
            .unwrap();
        samples.push((n, m.snr));
    }
    let fit = oat_echo::optimizer::fit_power_law(&samples).unwrap();
    assert!(
        (fit.alpha - 1.0).abs() <= 0.1,
        "alpha = {} over {ns:?}",
        fit.alpha
    );
}

#[test]
fn ghz_class_drops_to_classical_scaling_under_noise() {
    let ns: Vec<u32> = (6..=10).map(|k| 1u32 << k).collect();
    let noise = NoiseModel::collective_only(0.5).unwrap();
    let ghz = fit_scaling(ProtocolClass::Ghz, noise, &ns).unwrap();
    let out = fit_scaling(ProtocolClass::OverUnTwisting, noise, &ns).unwrap();
    assert!((ghz.alpha - 0.5).abs() < 0.15, "alpha_ghz = {}", ghz.alpha);
    assert!((out.alpha - 1.0).abs() < 0.05, "alpha_out = {}", out.alpha);
}
