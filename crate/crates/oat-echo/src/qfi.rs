//! Quantum Fisher information bounds for twisted states.
//!
//! The quantum Cramer-Rao inequality caps the squared inverse phase
//! deviation of *any* measurement strategy by the quantum Fisher information
//! of the state the phase is imprinted on.  For the echo family that state
//! is the (possibly dephased) twisted state, so `max_nu (1/dphi)^2 <= F_Q`
//! point by point in `mu` -- a strong external check on the optimizer.
//!
//! Two routes to `F_Q` are implemented: the closed-form maximum over
//! rotation axes for the noiseless twisted state, and the spectral formula
//!
//! ```text
//!   F[k][l] = 2 sum_{p_a + p_b > 0} (p_a - p_b)^2 / (p_a + p_b)
//!             Re( <b|S_k|a> <a|S_l|b> )
//! ```
//!
//! evaluated on the numerically diagonalized density matrix, which also
//! covers collective dephasing.

use num_complex::Complex64;

use crate::cmat::{hermitian_eigen, CMat};
use crate::linalg::{norm3, scale3, sym_eigen3, Mat3};
use crate::numeric::stable_cos_pow;
use crate::optimizer::best_nu_for_mu;
use crate::oracle::{x_state, DickeDensity, SpinOperators};
use crate::protocol::{Direction, NoiseModel};
use crate::{Error, Result};

/// Fisher information maximized over rotation axes.
#[derive(Debug, Clone)]
pub struct QfiResult {
    /// Largest eigenvalue of the Fisher matrix.
    pub value: f64,
    /// Axis achieving it.
    pub axis: Direction,
    /// Full 3x3 Fisher matrix over the Cartesian rotation generators.
    pub matrix: Mat3,
}

/// Closed-form maximal Fisher information of the noiseless twisted state,
/// `max` of the equatorial-plane and polar-axis branches:
///
/// ```text
///   A = 1 - cos^{N-2}(mu),   B = 4 sin(mu/2) cos^{N-2}(mu/2)
///   branch1 = N + N(N-1)/4 (A + sqrt(A^2 + B^2))
///   branch2 = N^2 (1 - cos^{2N-2}(mu/2)) - N(N-1) A / 2
/// ```
///
/// Interpolates from `F_Q = N` at `mu = 0` to the Heisenberg limit `N^2` at
/// `mu = pi`.
pub fn qfi_closed_form_max(mu: f64, n: u32) -> f64 {
    assert!(n >= 2, "closed-form Fisher information needs N >= 2");
    let nn = f64::from(n);
    let a = 1.0 - stable_cos_pow(mu.cos(), n - 2);
    let b = 4.0 * (0.5 * mu).sin() * stable_cos_pow((0.5 * mu).cos(), n - 2);
    let branch1 = nn + 0.25 * nn * (nn - 1.0) * (a + (a * a + b * b).sqrt());
    let branch2 =
        nn * nn * (1.0 - stable_cos_pow((0.5 * mu).cos(), 2 * n - 2)) - 0.5 * nn * (nn - 1.0) * a;
    branch1.max(branch2)
}

/// Twisted initial state with collective dephasing accumulated during the
/// twist, assembled directly in the Dicke basis:
/// `rho_{mm'} = e^{-i(m^2-m'^2)mu/2 - sigma (m-m')^2 |mu|/4} c_m c_{m'}^*`
/// with the equatorial coherent-state coefficients `c_m`.
pub fn dephased_initial_density(mu: f64, sigma: f64, n: u32) -> DickeDensity {
    let amps = x_state(n).amplitudes().to_vec();
    let half_n = f64::from(n) / 2.0;
    let rate = sigma * mu.abs() / 4.0;
    let dim = n as usize + 1;
    let mat = CMat::from_fn(dim, |i, j| {
        let mi = i as f64 - half_n;
        let mj = j as f64 - half_n;
        let phase = Complex64::new(
            -rate * (mi - mj) * (mi - mj),
            -0.5 * mu * (mi * mi - mj * mj),
        )
        .exp();
        phase * amps[i] * amps[j].conj()
    });
    DickeDensity::from_matrix(n, mat).expect("dimensions match by construction")
}

/// Spectral Fisher matrix of a density matrix over the three Cartesian
/// rotation generators.  Eigenvalue pairs whose combined weight is at or
/// below `1e-14` of the largest population are excluded, matching the
/// support restriction of the spectral formula.
pub fn qfi_matrix(rho: &DickeDensity) -> Result<Mat3> {
    let n = rho.particles();
    let eig = hermitian_eigen(rho.matrix())?;
    let dim = n as usize + 1;
    let p: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
    let p_max = p.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-14 * p_max;

    let ops = SpinOperators::new(n);
    let v = &eig.vectors;
    let vd = v.adjoint();
    let in_basis = |op: &CMat| vd.mul(&op.mul(v));
    let s_eig = [in_basis(&ops.sx), in_basis(&ops.sy), in_basis(&ops.sz)];

    let mut f: Mat3 = [[0.0; 3]; 3];
    for a in 0..dim {
        for b in 0..dim {
            let sum = p[a] + p[b];
            if sum <= tol {
                continue;
            }
            let diff = p[a] - p[b];
            let w = 2.0 * diff * diff / sum;
            if w == 0.0 {
                continue;
            }
            for k in 0..3 {
                // <b|S_k|a> <a|S_l|b>
                let left = s_eig[k].get(b, a);
                for l in k..3 {
                    let val = w * (left * s_eig[l].get(a, b)).re;
                    f[k][l] += val;
                }
            }
        }
    }
    for k in 0..3 {
        for l in 0..k {
            f[k][l] = f[l][k];
        }
    }
    Ok(f)
}

/// Maximal Fisher information of the dephased twisted state over all
/// rotation axes: the top eigenpair of the spectral Fisher matrix.
pub fn qfi_max(mu: f64, sigma: f64, n: u32) -> Result<QfiResult> {
    let rho = dephased_initial_density(mu, sigma, n);
    let matrix = qfi_matrix(&rho)?;
    let eig = sym_eigen3(&matrix);
    let value = eig.values[2];
    // Degenerate top eigenvalue (e.g. mu = 0): canonical axis choice.
    let tied: Vec<crate::linalg::Vec3> = (0..3)
        .rev()
        .take_while(|&k| eig.values[k] >= value - 1e-9 * value.abs().max(1.0))
        .map(|k| eig.vectors[k])
        .collect();
    let axis_vec = if tied.len() > 1 {
        canonical_axis(&tied)
    } else {
        eig.vectors[2]
    };
    let mut axis_unit = scale3(&axis_vec, 1.0 / norm3(&axis_vec));
    let lead = (0..3)
        .rev()
        .max_by(|&a, &b| axis_unit[a].abs().partial_cmp(&axis_unit[b].abs()).unwrap())
        .unwrap();
    if axis_unit[lead] < 0.0 {
        axis_unit = scale3(&axis_unit, -1.0);
    }
    Ok(QfiResult {
        value,
        axis: Direction::from_unit(axis_unit).unwrap_or(Direction::Z),
        matrix,
    })
}

fn canonical_axis(basis: &[crate::linalg::Vec3]) -> crate::linalg::Vec3 {
    for axis in [2usize, 1, 0] {
        let mut p = [0.0; 3];
        for b in basis {
            let c = b[axis];
            for i in 0..3 {
                p[i] += c * b[i];
            }
        }
        if norm3(&p) > 1e-8 {
            return p;
        }
    }
    basis[0]
}

/// One row of a Cramer-Rao comparison.
#[derive(Debug, Clone, Copy)]
pub struct QcrbPoint {
    pub mu: f64,
    pub best_nu: f64,
    /// `max_nu (1/dphi)^2` from the optimizer.
    pub snr_sq: f64,
    /// Fisher information of the dephased twisted state.
    pub qfi: f64,
    /// `(snr_sq - qfi) / qfi`; positive values violate the bound.
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct QcrbReport {
    pub max_violation: f64,
    pub per_mu: Vec<QcrbPoint>,
}

/// Checks the quantum Cramer-Rao bound `max_nu (1/dphi)^2 <= F_Q` along a
/// list of twisting strengths.  Collective noise only (the Fisher route
/// needs the Dicke-basis density).
pub fn qcrb_check(n: u32, noise: NoiseModel, mu_values: &[f64]) -> Result<QcrbReport> {
    if noise.individual > 0.0 {
        return Err(Error::Unsupported(
            "Fisher information under individual dephasing is out of scope".into(),
        ));
    }
    let nu_grid: Vec<f64> = {
        let count = 257;
        let lo = -std::f64::consts::PI;
        let hi = std::f64::consts::PI;
        (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect()
    };
    let mut per_mu = Vec::with_capacity(mu_values.len());
    let mut max_violation = f64::NEG_INFINITY;
    for &mu in mu_values {
        let (best_nu, snr) = best_nu_for_mu(mu, n, noise, &nu_grid)?;
        let snr_sq = snr * snr;
        let qfi = qfi_max(mu, noise.collective, n)?.value;
        let violation = (snr_sq - qfi) / qfi;
        max_violation = max_violation.max(violation);
        per_mu.push(QcrbPoint {
            mu,
            best_nu,
            snr_sq,
            qfi,
            violation,
        });
    }
    Ok(QcrbReport {
        max_violation,
        per_mu,
    })
}
