//! Closed-form spin moments of the generalized twisting-echo protocol.
//!
//! For the sequence `twist(mu) - rotate(n, phi) - twist(nu - mu) - measure`,
//! starting from the equatorial coherent state, the signal slope and the
//! measurement noise at the working point `phi = 0` are
//!
//! ```text
//!   d<S_m>/dphi = n^T M m,        Var(S_m) = m^T Q m,
//! ```
//!
//! and both matrices reduce to nine scalar coefficients:
//!
//! ```text
//!   M = [ (n1+n2)/2      0        0  ]      Q = [ (q1+q2)/2 - q0^2   0    0  ]
//!       [     0      (n1-n2)/2   n3  ]          [     0        (q1-q2)/2  q3 ]
//!       [     0          n4       0  ]          [     0            q3     q4 ]
//! ```
//!
//! with `n1..n4`, `q0..q4` built from powers of cosines of the twisting
//! angles.  The mean spin is `(q0, 0, 0)`.  Dephasing during the twisting
//! stages does not change this structure: each scalar just picks up an
//! exponential damping factor in the stage strengths `|mu|` and `|nu - mu|`.
//! Everything here is verified entry-by-entry against the exact-evolution
//! oracle in `oracle::verify_moment_matrices`.

use crate::linalg::{Mat3, Vec3};
use crate::numeric::stable_cos_pow;
use crate::protocol::ProtocolPoint;

/// The nine scalars behind `M`, `Q` and the mean spin, damping included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCoefficients {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub n4: f64,
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
}

/// First moments, slope matrix and covariance matrix at `phi = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMatrices {
    /// Signal slope matrix: `d<S_m>/dphi = n^T M m`.
    pub m: Mat3,
    /// Spin covariance of the measured state; symmetric positive
    /// semi-definite.
    pub q: Mat3,
    /// Mean spin vector `(<S_x>, <S_y>, <S_z>)`.
    pub j: Vec3,
}

/// Evaluates the nine scalar coefficients at a protocol point.
///
/// Collective dephasing of strength `sigma` damps the coefficients with
/// exponents linear in the stage strengths `a1 = |nu - mu|` and `a2 = |mu|`:
///
/// ```text
///   q0, q3, n4: e^{-sigma (a1+a2)/4}     q2: e^{-sigma (a1+a2)}
///   n1: e^{-sigma a1/4}    n2: e^{-sigma (a1/4 + a2)}    n3: e^{-sigma a2/4}
/// ```
///
/// Individual dephasing of strength `Sigma` acts per particle:
///
/// ```text
///   q0, q3, n4: e^{-Sigma (a1+a2)}       q2: e^{-2 Sigma (a1+a2)}
///   n1, n2: e^{-Sigma (a1 + 2 a2)}       n3: e^{-Sigma a2}
///   q1 -> e^{-2 Sigma (a1+a2)} q1 + (N/2)(1 - e^{-2 Sigma (a1+a2)})
/// ```
///
/// `q4` is never damped.  When both channels are active the factors compose
/// multiplicatively: the two Lindblad generators and the twisting
/// Hamiltonian are simultaneously diagonal in the product z-basis, so the
/// channels commute.  The composition is cross-checked against the full
/// product-space oracle.
pub fn scalar_coefficients(point: &ProtocolPoint) -> ScalarCoefficients {
    let n = point.n;
    let nn = f64::from(n);
    let mu = point.mu;
    let nu = point.nu;

    let half_diff = 0.5 * (mu - nu);
    let half_sum = 0.5 * (mu + nu);

    let pair = 0.5 * nn * (nn - 1.0); // N(N-1)/2
    let n1 = pair * half_diff.sin() * stable_cos_pow(half_diff.cos(), n.saturating_sub(2));
    let n2 = -pair * half_diff.sin() * stable_cos_pow(half_sum.cos(), n.saturating_sub(2));
    let n3 = -0.5 * nn * stable_cos_pow((0.5 * mu).cos(), n - 1);
    let n4 = 0.5 * nn * stable_cos_pow((0.5 * nu).cos(), n - 1);

    let q0 = 0.5 * nn * stable_cos_pow((0.5 * nu).cos(), n - 1);
    let q1 = 0.25 * nn * (nn + 1.0);
    let q2 = 0.25 * nn * (nn - 1.0) * stable_cos_pow(nu.cos(), n.saturating_sub(2));
    let q3 = 0.25
        * nn
        * (nn - 1.0)
        * (0.5 * nu).sin()
        * stable_cos_pow((0.5 * nu).cos(), n.saturating_sub(2));
    let q4 = 0.25 * nn;

    let mut c = ScalarCoefficients {
        n1,
        n2,
        n3,
        n4,
        q0,
        q1,
        q2,
        q3,
        q4,
    };

    let a1 = (nu - mu).abs();
    let a2 = mu.abs();

    let sigma = point.noise.collective;
    if sigma > 0.0 {
        c.q0 *= (-sigma * (a1 + a2) / 4.0).exp();
        c.q2 *= (-sigma * (a1 + a2)).exp();
        c.q3 *= (-sigma * (a1 + a2) / 4.0).exp();
        c.n1 *= (-sigma * a1 / 4.0).exp();
        c.n2 *= (-sigma * (a1 / 4.0 + a2)).exp();
        c.n3 *= (-sigma * a2 / 4.0).exp();
        c.n4 *= (-sigma * (a1 + a2) / 4.0).exp();
    }

    let ind = point.noise.individual;
    if ind > 0.0 {
        let e1 = (-ind * (a1 + a2)).exp();
        let e2 = e1 * e1;
        c.q0 *= e1;
        c.q1 = e2 * c.q1 + 0.5 * nn * (1.0 - e2);
        c.q2 *= e2;
        c.q3 *= e1;
        let en = (-ind * (a1 + 2.0 * a2)).exp();
        c.n1 *= en;
        c.n2 *= en;
        c.n3 *= (-ind * a2).exp();
        c.n4 *= e1;
    }

    c
}

/// Assembles `M`, `Q` and the mean spin vector from the nine scalars.
pub fn assemble_matrices(c: &ScalarCoefficients) -> MomentMatrices {
    let m = [
        [0.5 * (c.n1 + c.n2), 0.0, 0.0],
        [0.0, 0.5 * (c.n1 - c.n2), c.n3],
        [0.0, c.n4, 0.0],
    ];
    let q = [
        [0.5 * (c.q1 + c.q2) - c.q0 * c.q0, 0.0, 0.0],
        [0.0, 0.5 * (c.q1 - c.q2), c.q3],
        [0.0, c.q3, c.q4],
    ];
    MomentMatrices {
        m,
        q,
        j: [c.q0, 0.0, 0.0],
    }
}

/// Moment matrices at a protocol point.
pub fn moment_matrices(point: &ProtocolPoint) -> MomentMatrices {
    assemble_matrices(&scalar_coefficients(point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen3;
    use crate::protocol::{NoiseModel, ProtocolPoint};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn untwisted_four_particles() {
        let p = ProtocolPoint::noiseless(4, 0.0, 0.0).unwrap();
        let c = scalar_coefficients(&p);
        assert_eq!(c.n1, 0.0);
        assert_eq!(c.n2, 0.0);
        assert_eq!(c.n3, -2.0);
        assert_eq!(c.n4, 2.0);
        assert_eq!(c.q0, 2.0);
        assert_eq!(c.q1, 5.0);
        assert_eq!(c.q2, 3.0);
        assert_eq!(c.q3, 0.0);
        assert_eq!(c.q4, 1.0);

        let mm = moment_matrices(&p);
        assert_eq!(mm.m[1][2], -2.0);
        assert_eq!(mm.m[2][1], 2.0);
        assert_eq!(mm.m[0][0], 0.0);
        assert_eq!(mm.q[0][0], 0.0);
        assert_eq!(mm.q[1][1], 1.0);
        assert_eq!(mm.q[2][2], 1.0);
        assert_eq!(mm.j, [2.0, 0.0, 0.0]);
    }

    #[test]
    fn quarter_twist_four_particles() {
        let p = ProtocolPoint::noiseless(4, FRAC_PI_2, 0.0).unwrap();
        let c = scalar_coefficients(&p);
        approx(c.n1, 2.12132034355964, 1e-10);
        approx(c.n2, -2.12132034355964, 1e-10);
        approx(c.n3, -std::f64::consts::FRAC_1_SQRT_2, 1e-10);
        approx(c.n4, 2.0, 1e-14);
    }

    #[test]
    fn pure_inversion_covariance() {
        let p = ProtocolPoint::noiseless(4, 0.0, FRAC_PI_2).unwrap();
        let mm = moment_matrices(&p);
        approx(mm.q[0][0], 2.0, 1e-12);
        approx(mm.q[1][1], 2.5, 1e-12);
        approx(mm.q[1][2], 1.06066017177982, 1e-10);
        approx(mm.q[2][2], 1.0, 1e-14);
    }

    #[test]
    fn wrapped_state_loses_polarization() {
        let p = ProtocolPoint::noiseless(2, PI, PI).unwrap();
        let mm = moment_matrices(&p);
        assert!(mm.j[0].abs() < 1e-15);
        assert!(mm.j[1] == 0.0 && mm.j[2] == 0.0);
    }

    #[test]
    fn collective_damping_factors() {
        // At nu = mu the first-stage strength a1 = 0, so only |mu| damps.
        let sigma = 0.1;
        let noisy = ProtocolPoint::new(
            4,
            FRAC_PI_2,
            FRAC_PI_2,
            NoiseModel::collective_only(sigma).unwrap(),
        )
        .unwrap();
        let clean = ProtocolPoint::noiseless(4, FRAC_PI_2, FRAC_PI_2).unwrap();
        let cn = scalar_coefficients(&noisy);
        let cc = scalar_coefficients(&clean);
        let a2 = FRAC_PI_2;
        approx(cn.q0, cc.q0 * (-sigma * a2 / 4.0).exp(), 1e-14);
        approx(cn.q1, cc.q1, 0.0);
        approx(cn.q2, cc.q2 * (-sigma * a2).exp(), 1e-14);
        approx(cn.q3, cc.q3 * (-sigma * a2 / 4.0).exp(), 1e-14);
        approx(cn.q4, cc.q4, 0.0);
        approx(cn.n1, cc.n1, 1e-14); // n1 damps with a1 only
        approx(cn.n2, cc.n2 * (-sigma * a2).exp(), 1e-14);
        approx(cn.n3, cc.n3 * (-sigma * a2 / 4.0).exp(), 1e-14);
        approx(cn.n4, cc.n4 * (-sigma * a2 / 4.0).exp(), 1e-14);
    }

    #[test]
    fn individual_damping_factors() {
        let big_sigma = 0.3;
        let (mu, nu) = (0.8, -0.4);
        let noisy =
            ProtocolPoint::new(6, mu, nu, NoiseModel::individual_only(big_sigma).unwrap()).unwrap();
        let clean = ProtocolPoint::noiseless(6, mu, nu).unwrap();
        let cn = scalar_coefficients(&noisy);
        let cc = scalar_coefficients(&clean);
        let a1 = (nu - mu).abs();
        let a2 = mu.abs();
        let e1 = (-big_sigma * (a1 + a2)).exp();
        approx(cn.q0, cc.q0 * e1, 1e-14);
        approx(cn.q1, e1 * e1 * cc.q1 + 3.0 * (1.0 - e1 * e1), 1e-12);
        approx(cn.q2, cc.q2 * e1 * e1, 1e-14);
        approx(cn.q3, cc.q3 * e1, 1e-14);
        approx(cn.q4, cc.q4, 0.0);
        let en = (-big_sigma * (a1 + 2.0 * a2)).exp();
        approx(cn.n1, cc.n1 * en, 1e-14);
        approx(cn.n2, cc.n2 * en, 1e-14);
        approx(cn.n3, cc.n3 * (-big_sigma * a2).exp(), 1e-14);
        approx(cn.n4, cc.n4 * e1, 1e-14);
    }

    #[test]
    fn exact_echo_zeroes_are_exact() {
        // nu = 0, no noise: the x channel carries no signal and no noise.
        for n in [2u32, 7, 32, 501] {
            for mu in [0.0, 0.4, 1.9, -2.5] {
                let p = ProtocolPoint::noiseless(n, mu, 0.0).unwrap();
                let mm = moment_matrices(&p);
                assert_eq!(mm.q[0][0], 0.0, "n={n} mu={mu}");
                assert_eq!(mm.m[0][0], 0.0, "n={n} mu={mu}");
            }
        }
    }

    #[test]
    fn sign_symmetry_of_matrices() {
        // (mu, nu) -> (-mu, -nu) conjugates Q by diag(1,-1,1) and sends
        // M to minus its conjugation.
        let noise = NoiseModel::new(0.17, 0.05).unwrap();
        for &(n, mu, nu) in &[(3u32, 0.7, -0.3), (16, 2.1, 1.4), (64, 1.0, -2.9)] {
            let a = moment_matrices(&ProtocolPoint::new(n, mu, nu, noise).unwrap());
            let b = moment_matrices(&ProtocolPoint::new(n, -mu, -nu, noise).unwrap());
            let d = [1.0, -1.0, 1.0];
            for i in 0..3 {
                for j in 0..3 {
                    approx(b.q[i][j], d[i] * d[j] * a.q[i][j], 1e-12);
                    approx(b.m[i][j], -d[i] * d[j] * a.m[i][j], 1e-12);
                }
            }
            approx(b.j[0], a.j[0], 1e-12);
        }
    }

    #[test]
    fn covariance_positive_semidefinite() {
        let noises = [
            NoiseModel::NONE,
            NoiseModel::collective_only(0.4).unwrap(),
            NoiseModel::individual_only(1.5).unwrap(),
            NoiseModel::new(0.2, 0.6).unwrap(),
        ];
        for &n in &[2u32, 5, 17, 101] {
            for i in 0..9 {
                for k in 0..9 {
                    let mu = -PI + 2.0 * PI * (i as f64) / 8.0;
                    let nu = -PI + 2.0 * PI * (k as f64) / 8.0;
                    for noise in noises {
                        let p = ProtocolPoint::new(n, mu, nu, noise).unwrap();
                        let mm = moment_matrices(&p);
                        let eig = sym_eigen3(&mm.q);
                        let trace = mm.q[0][0] + mm.q[1][1] + mm.q[2][2];
                        assert!(
                            eig.values[0] >= -1e-9 * trace.max(1.0),
                            "Q not PSD at n={n} mu={mu} nu={nu}: {:?}",
                            eig.values
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn single_particle_is_accepted() {
        let p = ProtocolPoint::noiseless(1, 1.3, -0.4).unwrap();
        let mm = moment_matrices(&p);
        // Pair terms vanish; a lone spin has q1 = 1/2, q4 = 1/4.
        assert_eq!(mm.q[1][1], 0.25);
        assert!(mm.m.iter().flatten().all(|x| x.is_finite()));
    }
}
