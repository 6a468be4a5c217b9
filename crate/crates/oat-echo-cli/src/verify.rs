//! The self-verification suite: oracle cross-checks and invariant sweeps,
//! one pass/fail line per check.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use oat_echo::moments::{assemble_matrices, scalar_coefficients, ScalarCoefficients};
use oat_echo::optimizer::sensitivity;
use oat_echo::oracle::{direct_sensitivity, oracle_moment_matrices};
use oat_echo::protocol::{NoiseModel, ProtocolPoint};
use oat_echo::qfi::{qcrb_check, qfi_closed_form_max, qfi_max};
use oat_echo::wigner::{out_mechanism_report, sphere_overlap, MultipoleBasis};
use std::f64::consts::PI;

#[derive(Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: String) -> Self {
        CheckOutcome {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        CheckOutcome {
            name,
            passed: false,
            detail,
        }
    }
}

/// Runs the whole suite; `quick` restricts every check to registers of at
/// most 8 particles and fewer sample points.
pub fn run_suite(quick: bool) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    out.push(check_ramsey_anchor(quick));
    out.extend(check_all_moment_variants(quick, scalar_coefficients));
    out.push(check_optimizer_oracle(quick));
    out.push(check_qfi_endpoints(quick));
    out.push(check_qcrb(quick));
    out.push(check_wigner_trace_identity(quick));
    out.push(check_out_overlap(quick));
    out.push(check_sign_symmetry(quick));
    out
}

fn check_ramsey_anchor(quick: bool) -> CheckOutcome {
    let ns: &[u32] = if quick {
        &[2, 10, 100]
    } else {
        &[2, 10, 100, 1000, 10_000]
    };
    let mut worst = 0.0_f64;
    for &n in ns {
        let p = ProtocolPoint::noiseless(n, 0.0, 0.0).unwrap();
        let snr = match sensitivity(&p) {
            Ok(o) => o.snr,
            Err(e) => return CheckOutcome::fail("ramsey-anchor", e.to_string()),
        };
        let want = f64::from(n).sqrt();
        worst = worst.max(((snr - want) / want).abs());
    }
    if worst < 1e-9 {
        CheckOutcome::pass("ramsey-anchor", format!("max rel dev {worst:.2e}"))
    } else {
        CheckOutcome::fail("ramsey-anchor", format!("max rel dev {worst:.2e}"))
    }
}

/// Moment-formula verification against the oracle, parameterized over the
/// scalar-coefficient provider so a deliberately corrupted provider is
/// detectable (and tested to be detected).
pub fn check_all_moment_variants(
    quick: bool,
    provider: fn(&ProtocolPoint) -> ScalarCoefficients,
) -> Vec<CheckOutcome> {
    let samples = if quick { 8 } else { 25 };
    let dicke_max = if quick { 8 } else { 12 };
    let full_max = if quick { 6 } else { 8 };
    let variants: [(&'static str, u32, f64, f64); 4] = [
        ("moments-noiseless", dicke_max, 0.0, 0.0),
        ("moments-collective", dicke_max, 1.0, 0.0),
        ("moments-individual", full_max, 0.0, 2.0),
        ("moments-combined", full_max, 0.8, 1.2),
    ];
    let mut out = Vec::new();
    for (name, n_hi, sig_hi, ind_hi) in variants {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE ^ n_hi as u64 ^ sig_hi.to_bits());
        let mut worst = 0.0_f64;
        let mut failure: Option<String> = None;
        for _ in 0..samples {
            let n = rng.random_range(2..=n_hi);
            let mu = rng.random_range(-PI..PI);
            let nu = rng.random_range(-PI..PI);
            let noise = NoiseModel::new(
                if sig_hi > 0.0 {
                    rng.random_range(0.0..sig_hi)
                } else {
                    0.0
                },
                if ind_hi > 0.0 {
                    rng.random_range(0.0..ind_hi)
                } else {
                    0.0
                },
            )
            .unwrap();
            let point = ProtocolPoint::new(n, mu, nu, noise).unwrap();
            let analytic = assemble_matrices(&provider(&point));
            let direct = match oracle_moment_matrices(&point) {
                Ok(d) => d,
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            };
            let mut dev = 0.0_f64;
            for i in 0..3 {
                dev = dev.max((analytic.j[i] - direct.j[i]).abs());
                for j in 0..3 {
                    dev = dev.max((analytic.m[i][j] - direct.m[i][j]).abs());
                    dev = dev.max((analytic.q[i][j] - direct.q[i][j]).abs());
                }
            }
            worst = worst.max(dev / f64::from(n).powi(2));
        }
        let outcome = if let Some(msg) = failure {
            CheckOutcome::fail(name, msg)
        } else if worst < 1e-9 {
            CheckOutcome::pass(
                name,
                format!("max scaled dev {worst:.2e} over {samples} points"),
            )
        } else {
            CheckOutcome::fail(name, format!("max scaled dev {worst:.2e}"))
        };
        out.push(outcome);
    }
    out
}

fn check_optimizer_oracle(quick: bool) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xABCD);
    let samples = if quick { 8 } else { 20 };
    let n_hi = if quick { 8 } else { 12 };
    let mut worst = 0.0_f64;
    for i in 0..samples {
        let n = rng.random_range(2..=n_hi);
        let mu = rng.random_range(-PI..PI);
        let nu = rng.random_range(-PI..PI);
        let noise = if i % 3 == 2 {
            NoiseModel::individual_only(rng.random_range(0.0..1.5)).unwrap()
        } else {
            NoiseModel::collective_only(rng.random_range(0.0..0.6)).unwrap()
        };
        let n_cap = if noise.individual > 0.0 {
            7.min(n_hi)
        } else {
            n_hi
        };
        let point = ProtocolPoint::new(n.min(n_cap), mu, nu, noise).unwrap();
        let opt = match sensitivity(&point) {
            Ok(o) => o,
            Err(e) => return CheckOutcome::fail("optimizer-oracle", e.to_string()),
        };
        if opt.snr < 1e-9 {
            continue;
        }
        let oracle = match direct_sensitivity(&point, &opt.n_opt, &opt.m_opt) {
            Ok(v) => v,
            Err(e) => return CheckOutcome::fail("optimizer-oracle", e.to_string()),
        };
        worst = worst.max((opt.snr - oracle).abs() / oracle.max(opt.snr));
    }
    if worst < 1e-8 {
        CheckOutcome::pass("optimizer-oracle", format!("max rel dev {worst:.2e}"))
    } else {
        CheckOutcome::fail("optimizer-oracle", format!("max rel dev {worst:.2e}"))
    }
}

fn check_qfi_endpoints(quick: bool) -> CheckOutcome {
    let ns: &[u32] = if quick { &[2, 4, 8] } else { &[2, 4, 8, 32] };
    let mut worst = 0.0_f64;
    for &n in ns {
        let nn = f64::from(n);
        worst = worst.max((qfi_closed_form_max(0.0, n) - nn).abs() / nn);
        worst = worst.max((qfi_closed_form_max(PI, n) - nn * nn).abs() / (nn * nn));
        for i in 0..9 {
            let mu = PI * f64::from(i) / 8.0;
            let spectral = match qfi_max(mu, 0.0, n) {
                Ok(r) => r.value,
                Err(e) => return CheckOutcome::fail("qfi-endpoints", e.to_string()),
            };
            let closed = qfi_closed_form_max(mu, n);
            worst = worst.max((spectral - closed).abs() / closed.max(1.0));
        }
    }
    if worst < 1e-8 {
        CheckOutcome::pass("qfi-endpoints", format!("max rel dev {worst:.2e}"))
    } else {
        CheckOutcome::fail("qfi-endpoints", format!("max rel dev {worst:.2e}"))
    }
}

fn check_qcrb(quick: bool) -> CheckOutcome {
    let n = if quick { 8 } else { 16 };
    let mus: Vec<f64> = (0..17).map(|i| PI * f64::from(i) / 16.0).collect();
    let mut worst = f64::NEG_INFINITY;
    for &sigma in &[0.0, 0.1] {
        let rep = match qcrb_check(n, NoiseModel::collective_only(sigma).unwrap(), &mus) {
            Ok(r) => r,
            Err(e) => return CheckOutcome::fail("qcrb", e.to_string()),
        };
        worst = worst.max(rep.max_violation);
    }
    if worst <= 1e-9 {
        CheckOutcome::pass("qcrb", format!("max violation {worst:.2e}"))
    } else {
        CheckOutcome::fail("qcrb", format!("bound violated by {worst:.2e}"))
    }
}

fn check_wigner_trace_identity(quick: bool) -> CheckOutcome {
    let ns: &[u32] = if quick { &[4, 8] } else { &[4, 8, 12] };
    let pairs = if quick { 4 } else { 8 };
    let mut rng = ChaCha8Rng::seed_from_u64(0x51CA);
    let mut worst = 0.0_f64;
    for &n in ns {
        let dim = n as usize + 1;
        let basis = MultipoleBasis::new(n);
        for _ in 0..pairs {
            let a = random_hermitian(&mut rng, dim);
            let b = random_hermitian(&mut rng, dim);
            let fa = match oat_echo::wigner::wigner_field_with_basis(&basis, &a, 0, 0) {
                Ok(f) => f,
                Err(e) => return CheckOutcome::fail("wigner-trace", e.to_string()),
            };
            let fb = match oat_echo::wigner::wigner_field_with_basis(&basis, &b, 0, 0) {
                Ok(f) => f,
                Err(e) => return CheckOutcome::fail("wigner-trace", e.to_string()),
            };
            let overlap = sphere_overlap(&fa, &fb).unwrap();
            let want = a.trace_mul(&b.adjoint()).re;
            let scale = a.frobenius() * b.frobenius();
            worst = worst.max((overlap - want).abs() / scale.max(1e-300));
        }
    }
    if worst < 1e-9 {
        CheckOutcome::pass("wigner-trace", format!("max scaled dev {worst:.2e}"))
    } else {
        CheckOutcome::fail("wigner-trace", format!("max scaled dev {worst:.2e}"))
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> oat_echo::cmat::CMat {
    use num_complex::Complex64;
    let g = oat_echo::cmat::CMat::from_fn(dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    g.add(&g.adjoint()).scale(Complex64::new(0.5, 0.0))
}

fn check_out_overlap(quick: bool) -> CheckOutcome {
    let n = if quick { 8 } else { 32 };
    let phi = -0.02;
    let rep = match out_mechanism_report(n, PI / 2.0, phi) {
        Ok(r) => r,
        Err(e) => return CheckOutcome::fail("out-overlap", e.to_string()),
    };
    let rel = (rep.overlap - rep.oracle_expectation).abs() / rep.oracle_expectation.abs();
    let flipped = match out_mechanism_report(n, PI / 2.0, -phi) {
        Ok(r) => r,
        Err(e) => return CheckOutcome::fail("out-overlap", e.to_string()),
    };
    if rel < 1e-9 && rep.overlap * flipped.overlap < 0.0 {
        CheckOutcome::pass(
            "out-overlap",
            format!("rel dev {rel:.2e}, sign flips under phi -> -phi"),
        )
    } else {
        CheckOutcome::fail("out-overlap", format!("rel dev {rel:.2e}"))
    }
}

fn check_sign_symmetry(quick: bool) -> CheckOutcome {
    let samples = if quick { 20 } else { 50 };
    let mut rng = ChaCha8Rng::seed_from_u64(0x515);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let n = rng.random_range(2..=256);
        let mu = rng.random_range(-PI..PI);
        let nu = rng.random_range(-PI..PI);
        let noise =
            NoiseModel::new(rng.random_range(0.0..0.8), rng.random_range(0.0..0.8)).unwrap();
        let a = sensitivity(&ProtocolPoint::new(n, mu, nu, noise).unwrap());
        let b = sensitivity(&ProtocolPoint::new(n, -mu, -nu, noise).unwrap());
        let (Ok(a), Ok(b)) = (a, b) else {
            return CheckOutcome::fail("sign-symmetry", "sensitivity failed".into());
        };
        worst = worst.max((a.snr - b.snr).abs() / a.snr.max(b.snr).max(1e-9));
    }
    if worst < 1e-10 {
        CheckOutcome::pass("sign-symmetry", format!("max rel dev {worst:.2e}"))
    } else {
        CheckOutcome::fail("sign-symmetry", format!("max rel dev {worst:.2e}"))
    }
}
