//! Exact brute-force evolution in the Dicke basis.
//!
//! Every closed form in this crate is checked against direct quantum
//! mechanics on the symmetric subspace: states live in the `N+1`-dimensional
//! joint eigenbasis of `S^2` and `S_z` (`m = -N/2 ... N/2`), twisting is a
//! diagonal phase, collective dephasing is an elementwise Gaussian damping
//! of coherences, and rotations are matrix exponentials built from the
//! eigendecomposition of the Hermitian generator.  Individual dephasing
//! leaves the symmetric subspace, so protocols with it run through the
//! product-space path in [`crate::fullspace`].

use num_complex::Complex64;

use crate::cmat::{anticommutator, commutator, hermitian_eigen, CMat};
use crate::fullspace;
use crate::linalg::{Mat3, Vec3};
use crate::moments::{moment_matrices, MomentMatrices};
use crate::numeric::ln_factorial;
use crate::protocol::{Direction, ProtocolPoint};
use crate::{Error, Result};

/// Largest particle number accepted on the Dicke verification path.
pub const MAX_DICKE_VERIFY: u32 = 12;

fn m_value(index: usize, n: u32) -> f64 {
    index as f64 - f64::from(n) / 2.0
}

/// Pure state of the collective spin, amplitudes indexed by `m` ascending.
#[derive(Debug, Clone)]
pub struct DickeVector {
    n: u32,
    amp: Vec<Complex64>,
}

impl DickeVector {
    pub fn new(n: u32, amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() != n as usize + 1 {
            return Err(Error::DimensionMismatch(amp.len(), n as usize + 1));
        }
        let norm: f64 = amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "state norm {norm} is not 1"
            )));
        }
        Ok(DickeVector { n, amp })
    }

    pub fn particles(&self) -> u32 {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Twisting `exp(-i mu S_z^2 / 2)`: a diagonal phase per `m`.
    pub fn apply_oat(&self, mu: f64) -> DickeVector {
        let n = self.n;
        let amp = self
            .amp
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let m = m_value(i, n);
                a * Complex64::new(0.0, -0.5 * mu * m * m).exp()
            })
            .collect();
        DickeVector { n, amp }
    }

    /// Rotation `exp(-i angle S_axis)` via eigendecomposition of the
    /// generator.
    pub fn rotate(&self, axis: &Direction, angle: f64) -> Result<DickeVector> {
        let u = rotation_matrix(self.n, axis, angle)?;
        Ok(DickeVector {
            n: self.n,
            amp: u.mul_vec(&self.amp),
        })
    }

    pub fn overlap(&self, other: &DickeVector) -> Complex64 {
        self.amp
            .iter()
            .zip(&other.amp)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Mixed state of the collective spin.
#[derive(Debug, Clone)]
pub struct DickeDensity {
    n: u32,
    mat: CMat,
}

impl DickeDensity {
    pub fn from_pure(state: &DickeVector) -> DickeDensity {
        DickeDensity {
            n: state.n,
            mat: CMat::outer(&state.amp),
        }
    }

    pub fn from_matrix(n: u32, mat: CMat) -> Result<DickeDensity> {
        if mat.dim() != n as usize + 1 {
            return Err(Error::DimensionMismatch(mat.dim(), n as usize + 1));
        }
        Ok(DickeDensity { n, mat })
    }

    pub fn particles(&self) -> u32 {
        self.n
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.mat.trace_mul(&self.mat).re
    }

    pub fn expectation(&self, op: &CMat) -> f64 {
        op.trace_mul(&self.mat).re
    }

    /// Checks the density-matrix contract: Hermitian to 1e-12, unit trace
    /// to 1e-12, eigenvalues above -1e-10.
    pub fn validate(&self) -> Result<()> {
        let herm = self.mat.max_hermiticity_violation();
        if herm > 1e-12 * self.mat.frobenius().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "density not Hermitian (violation {herm:e})"
            )));
        }
        let tr = self.mat.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "density trace {tr} is not 1"
            )));
        }
        let eig = hermitian_eigen(&self.mat)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(Error::NotPositiveSemiDefinite {
                min_eig: min,
                scale: eig.values[0],
            });
        }
        Ok(())
    }

    pub fn apply_oat(&self, mu: f64) -> DickeDensity {
        let n = self.n;
        let mut mat = self.mat.clone();
        mat.map_indexed(|i, j, v| {
            let mi = m_value(i, n);
            let mj = m_value(j, n);
            v * Complex64::new(0.0, -0.5 * mu * (mi * mi - mj * mj)).exp()
        });
        DickeDensity { n, mat }
    }

    /// Collective dephasing accumulated over a twisting stage of strength
    /// `mu`: coherence `(m, m')` is damped by `exp(-sigma (m-m')^2 |mu|/4)`.
    /// Commutes with `apply_oat` (both act elementwise on the same index
    /// pairs).
    pub fn collective_dephase(&self, sigma: f64, mu: f64) -> DickeDensity {
        let n = self.n;
        let rate = sigma * mu.abs() / 4.0;
        let mut mat = self.mat.clone();
        mat.map_indexed(|i, j, v| {
            let d = m_value(i, n) - m_value(j, n);
            v * (-rate * d * d).exp()
        });
        DickeDensity { n, mat }
    }

    pub fn rotate(&self, axis: &Direction, angle: f64) -> Result<DickeDensity> {
        let u = rotation_matrix(self.n, axis, angle)?;
        let mat = u.mul(&self.mat).mul(&u.adjoint());
        Ok(DickeDensity { n: self.n, mat })
    }
}

/// Collective spin operators in the Dicke basis.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    n: u32,
    pub sx: CMat,
    pub sy: CMat,
    pub sz: CMat,
}

impl SpinOperators {
    pub fn new(n: u32) -> SpinOperators {
        let dim = n as usize + 1;
        let s = f64::from(n) / 2.0;
        let mut sp = CMat::zeros(dim); // raising operator
        for i in 0..dim - 1 {
            let m = m_value(i, n);
            let c = (s * (s + 1.0) - m * (m + 1.0)).sqrt();
            sp.set(i + 1, i, Complex64::new(c, 0.0));
        }
        let sm = sp.adjoint();
        let sx = sp.add(&sm).scale(Complex64::new(0.5, 0.0));
        let sy = sp.sub(&sm).scale(Complex64::new(0.0, -0.5));
        let mut sz = CMat::zeros(dim);
        for i in 0..dim {
            sz.set(i, i, Complex64::new(m_value(i, n), 0.0));
        }
        SpinOperators { n, sx, sy, sz }
    }

    pub fn particles(&self) -> u32 {
        self.n
    }

    /// `S . v` along an arbitrary unit direction.
    pub fn along(&self, dir: &Direction) -> CMat {
        let [x, y, z] = dir.components();
        self.sx
            .scale(Complex64::new(x, 0.0))
            .add(&self.sy.scale(Complex64::new(y, 0.0)))
            .add(&self.sz.scale(Complex64::new(z, 0.0)))
    }

    fn cartesian(&self, k: usize) -> &CMat {
        match k {
            0 => &self.sx,
            1 => &self.sy,
            _ => &self.sz,
        }
    }
}

/// `exp(-i angle S_axis)` on the Dicke space.
pub fn rotation_matrix(n: u32, axis: &Direction, angle: f64) -> Result<CMat> {
    let ops = SpinOperators::new(n);
    let generator = ops.along(axis);
    let eig = hermitian_eigen(&generator)?;
    Ok(eig.apply_spectral(|l| Complex64::new(0.0, -angle * l).exp()))
}

/// Coherent spin state `|theta, phi>` with Dicke amplitudes
/// `c_m = sqrt(C(N, N/2+m)) sin^{N/2+m}(theta/2) cos^{N/2-m}(theta/2)
///  e^{-i (N/2+m) phi}`.
///
/// `theta = 0` is the all-down pole; `(theta, phi) = (pi/2, 0)` is the
/// equatorial state polarized along `+x` that starts every protocol.
pub fn coherent_state(theta: f64, phi: f64, n: u32) -> DickeVector {
    let dim = n as usize + 1;
    let (sin_half, cos_half) = (0.5 * theta).sin_cos();
    let mut amp = vec![Complex64::ZERO; dim];
    for (i, a) in amp.iter_mut().enumerate() {
        // k = N/2 + m runs with the index directly.  The binomial and the
        // two powers combine in log space: their separate magnitudes
        // overflow near N ~ 2000 while the product never exceeds 1.
        let k = i as u32;
        let mag = binomial_power(n, k, sin_half, cos_half);
        *a = mag * Complex64::new(0.0, -f64::from(k) * phi).exp();
    }
    DickeVector { n, amp }
}

/// `sqrt(C(N, k)) s^k c^(N-k)` evaluated in log space, signs tracked
/// separately so any real half-angle works.
fn binomial_power(n: u32, k: u32, s: f64, c: f64) -> f64 {
    if (s == 0.0 && k > 0) || (c == 0.0 && k < n) {
        return 0.0;
    }
    let mut ln = 0.5
        * (ln_factorial(n as usize) - ln_factorial(k as usize) - ln_factorial((n - k) as usize));
    let mut sign = 1.0;
    if k > 0 {
        ln += f64::from(k) * s.abs().ln();
        if s < 0.0 && k % 2 == 1 {
            sign = -sign;
        }
    }
    if k < n {
        ln += f64::from(n - k) * c.abs().ln();
        if c < 0.0 && (n - k) % 2 == 1 {
            sign = -sign;
        }
    }
    sign * ln.exp()
}

/// The equatorial initial state `|x>`.
pub fn x_state(n: u32) -> DickeVector {
    coherent_state(std::f64::consts::FRAC_PI_2, 0.0, n)
}

fn require_collective_only(point: &ProtocolPoint) -> Result<()> {
    if point.noise.individual > 0.0 {
        return Err(Error::Unsupported(
            "individual dephasing leaves the Dicke subspace; use the full-space path".into(),
        ));
    }
    Ok(())
}

/// State after the first twisting stage (twist + collective dephasing).
pub fn prepared_density(point: &ProtocolPoint) -> Result<DickeDensity> {
    require_collective_only(point)?;
    let rho = DickeDensity::from_pure(&x_state(point.n).apply_oat(point.mu));
    Ok(rho.collective_dephase(point.noise.collective, point.mu))
}

/// Full protocol state at signal angle `phi` around `axis`:
/// dephased twist, rotation, dephased un-twist.
pub fn protocol_density(point: &ProtocolPoint, axis: &Direction, phi: f64) -> Result<DickeDensity> {
    let rho = prepared_density(point)?;
    let rho = rho.rotate(axis, phi)?;
    let back = point.nu - point.mu;
    Ok(rho
        .apply_oat(back)
        .collective_dephase(point.noise.collective, back))
}

/// Applies the measurement-side stage (un-twist plus dephasing) to an
/// arbitrary operator-valued "state" matrix.  Used for the exact slope.
fn measurement_stage(point: &ProtocolPoint, mat: CMat, n: u32) -> DickeDensity {
    let back = point.nu - point.mu;
    let d = DickeDensity { n, mat };
    d.apply_oat(back)
        .collective_dephase(point.noise.collective, back)
}

/// Moment matrices computed by direct evolution: the slope matrix from the
/// exact commutator `-i [S_k, rho_prep]` pushed through the measurement
/// stage, covariances and mean spin from the `phi = 0` output state.
pub fn oracle_moment_matrices(point: &ProtocolPoint) -> Result<MomentMatrices> {
    if point.noise.individual > 0.0 {
        return fullspace::full_moment_matrices(point);
    }
    if point.n > MAX_DICKE_VERIFY {
        return Err(Error::Unsupported(format!(
            "Dicke verification path capped at N = {MAX_DICKE_VERIFY}"
        )));
    }
    let ops = SpinOperators::new(point.n);
    let rho_prep = prepared_density(point)?;
    let rho_final = measurement_stage(point, rho_prep.matrix().clone(), point.n);

    let mut m: Mat3 = [[0.0; 3]; 3];
    for k in 0..3 {
        let comm = commutator(ops.cartesian(k), rho_prep.matrix()).scale(Complex64::new(0.0, -1.0));
        let pushed = measurement_stage(point, comm, point.n);
        for l in 0..3 {
            m[k][l] = ops.cartesian(l).trace_mul(pushed.matrix()).re;
        }
    }

    let mut j: Vec3 = [0.0; 3];
    for k in 0..3 {
        j[k] = rho_final.expectation(ops.cartesian(k));
    }
    let mut q: Mat3 = [[0.0; 3]; 3];
    for k in 0..3 {
        for l in k..3 {
            let sym =
                anticommutator(ops.cartesian(k), ops.cartesian(l)).scale(Complex64::new(0.5, 0.0));
            let v = rho_final.expectation(&sym) - j[k] * j[l];
            q[k][l] = v;
            q[l][k] = v;
        }
    }
    Ok(MomentMatrices { m, q, j })
}

/// Maximum absolute deviation between the closed-form moment matrices and
/// the directly evolved ones, scaled by `N^2`.
pub fn verify_moment_matrices(point: &ProtocolPoint) -> Result<f64> {
    let analytic = moment_matrices(point);
    let direct = oracle_moment_matrices(point)?;
    let mut worst = 0.0_f64;
    for i in 0..3 {
        worst = worst.max((analytic.j[i] - direct.j[i]).abs());
        for jj in 0..3 {
            worst = worst.max((analytic.m[i][jj] - direct.m[i][jj]).abs());
            worst = worst.max((analytic.q[i][jj] - direct.q[i][jj]).abs());
        }
    }
    Ok(worst / f64::from(point.n).powi(2))
}

/// Exact protocol sensitivity for fixed signal and measurement directions.
///
/// The slope at `phi = 0` is the trace of `S_m` against the exact commutator
/// `-i [S_n, rho_prep]` pushed through the measurement stage (no finite
/// differencing); the variance comes from the `phi = 0` output state.
/// Protocols with individual dephasing route through the product-space
/// oracle.
///
/// ```
/// use oat_echo::oracle::direct_sensitivity;
/// use oat_echo::protocol::{Direction, ProtocolPoint};
///
/// let p = ProtocolPoint::noiseless(4, 0.0, 0.0).unwrap();
/// let snr = direct_sensitivity(&p, &Direction::Z, &Direction::Y).unwrap();
/// assert!((snr - 2.0).abs() < 1e-12); // sqrt(N) projection-noise limit
/// ```
pub fn direct_sensitivity(
    point: &ProtocolPoint,
    n_dir: &Direction,
    m_dir: &Direction,
) -> Result<f64> {
    if point.noise.individual > 0.0 {
        return fullspace::full_direct_sensitivity(point, n_dir, m_dir);
    }
    let ops = SpinOperators::new(point.n);
    let sn = ops.along(n_dir);
    let sm = ops.along(m_dir);

    let rho_prep = prepared_density(point)?;
    let comm = commutator(&sn, rho_prep.matrix()).scale(Complex64::new(0.0, -1.0));
    let pushed = measurement_stage(point, comm, point.n);
    let slope = sm.trace_mul(pushed.matrix()).re;

    let rho_final = measurement_stage(point, rho_prep.matrix().clone(), point.n);
    let mean = rho_final.expectation(&sm);
    let second = sm.mul(&sm).trace_mul(rho_final.matrix()).re;
    let var = second - mean * mean;
    let scale = f64::from(point.n).powi(2).max(1.0);
    if var <= scale * 1e-14 {
        return Err(Error::DegenerateMeasurement);
    }
    Ok(slope.abs() / var.sqrt())
}

/// Richardson-extrapolated central-difference slope of the signal at
/// `phi = 0`; an independent check of the commutator slope.
pub fn finite_difference_slope(
    point: &ProtocolPoint,
    n_dir: &Direction,
    m_dir: &Direction,
) -> Result<f64> {
    let h = 1e-5;
    let central = |h: f64| -> Result<f64> {
        let plus = signal_value(point, n_dir, m_dir, h)?;
        let minus = signal_value(point, n_dir, m_dir, -h)?;
        Ok((plus - minus) / (2.0 * h))
    };
    let d1 = central(h)?;
    let d2 = central(0.5 * h)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

fn signal_value(
    point: &ProtocolPoint,
    n_dir: &Direction,
    m_dir: &Direction,
    phi: f64,
) -> Result<f64> {
    let ops = SpinOperators::new(point.n);
    let rho = protocol_density(point, n_dir, phi)?;
    Ok(rho.expectation(&ops.along(m_dir)))
}

/// Measured signal `<S_m>(phi)` along a list of rotation angles.
pub fn signal_curve(
    point: &ProtocolPoint,
    n_dir: &Direction,
    m_dir: &Direction,
    phi_values: &[f64],
) -> Result<Vec<f64>> {
    let ops = SpinOperators::new(point.n);
    let sm = ops.along(m_dir);
    phi_values
        .iter()
        .map(|&phi| Ok(protocol_density(point, n_dir, phi)?.expectation(&sm)))
        .collect()
}

/// Wineland squeezing parameter of the bare twisted state: `N` times the
/// smallest spin variance transverse to the mean spin, over the squared
/// polarization.  Connected to the echo family by `xi = N dphi^2(mu, mu)`
/// at the optimal directions.
pub fn wineland_parameter(n: u32, mu: f64) -> Result<f64> {
    let ops = SpinOperators::new(n);
    let rho = DickeDensity::from_pure(&x_state(n).apply_oat(mu));
    let jx = rho.expectation(&ops.sx);
    if jx.abs() < 1e-300 {
        return Err(Error::DegenerateMeasurement);
    }
    // 2x2 covariance in the transverse (y, z) plane; minimal variance is the
    // smaller eigenvalue.
    let mut c = [[0.0_f64; 2]; 2];
    let t_ops = [&ops.sy, &ops.sz];
    let means = [rho.expectation(&ops.sy), rho.expectation(&ops.sz)];
    for a in 0..2 {
        for b in a..2 {
            let sym = anticommutator(t_ops[a], t_ops[b]).scale(Complex64::new(0.5, 0.0));
            let v = rho.expectation(&sym) - means[a] * means[b];
            c[a][b] = v;
            c[b][a] = v;
        }
    }
    let tr = c[0][0] + c[1][1];
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let min_var = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
    Ok(f64::from(n) * min_var / (jx * jx))
}
