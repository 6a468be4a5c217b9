//! Spherical Wigner representation of collective-spin states and
//! observables.
//!
//! Any operator on the `N+1`-dimensional Dicke space expands in the
//! orthonormal multipole (polarization-operator) basis `T_{KQ}`,
//! `K = 0..N`, `|Q| <= K`, built from Clebsch-Gordan coefficients.  The
//! Wigner function pairs those coefficients with orthonormal spherical
//! harmonics,
//!
//! ```text
//!   W_A(theta, phi) = sum_{KQ} tr(A T_{KQ}^dagger) Y_{KQ}(theta, phi),
//! ```
//!
//! which makes the sphere integral of a product of two Wigner functions
//! equal to the operator overlap `tr(A B^dagger)` with no extra constants.
//! That identity is the working principle of the over-un-twisting readout:
//! splitting the double inversion between state and measurement operator
//! turns the signal `<S_y>` into the overlap of two interference patterns
//! on the sphere.

use num_complex::Complex64;

use crate::cmat::CMat;
use crate::numeric::ln_factorial;
use crate::oracle::{x_state, DickeDensity, SpinOperators};
use crate::sphere::{gauss_legendre, normalized_assoc_legendre};
use crate::{Error, Result};

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | j m>` in the Condon-Shortley
/// convention, via the Racah factorial sum in log space.
///
/// Arguments are (half-)integers passed as floats; anything violating the
/// selection rules (including non-half-integer input) gives 0.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> f64 {
    let half = |x: f64| -> Option<i64> {
        let d = 2.0 * x;
        let r = d.round();
        if (d - r).abs() < 1e-9 {
            Some(r as i64)
        } else {
            None
        }
    };
    let (Some(tj1), Some(tm1), Some(tj2), Some(tm2), Some(tj), Some(tm)) =
        (half(j1), half(m1), half(j2), half(m2), half(j), half(m))
    else {
        return 0.0;
    };
    if tj1 < 0 || tj2 < 0 || tj < 0 {
        return 0.0;
    }
    if tm1 + tm2 != tm || tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
        return 0.0;
    }
    // j and m must have the same parity class, and the triangle must close
    // on an integer perimeter.
    if (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj + tm) % 2 != 0 {
        return 0.0;
    }
    if tj < (tj1 - tj2).abs() || tj > tj1 + tj2 || (tj1 + tj2 + tj) % 2 != 0 {
        return 0.0;
    }

    // Integer factorial arguments, in whole units.
    let f = |t: i64| -> f64 { ln_factorial((t / 2) as usize) };
    let ln_delta =
        f(tj1 + tj2 - tj) + f(tj1 - tj2 + tj) + f(-tj1 + tj2 + tj) - f(tj1 + tj2 + tj + 2);
    let ln_pref = 0.5
        * ((f64::from(tj as i32) + 1.0).ln()
            + ln_delta
            + f(tj1 + tm1)
            + f(tj1 - tm1)
            + f(tj2 + tm2)
            + f(tj2 - tm2)
            + f(tj + tm)
            + f(tj - tm));

    // k bounds from non-negative factorial arguments.
    let k_min = 0i64.max((tj2 - tj - tm1) / 2).max((tj1 - tj + tm2) / 2);
    let k_max = ((tj1 + tj2 - tj) / 2)
        .min((tj1 - tm1) / 2)
        .min((tj2 + tm2) / 2);
    let mut sum = 0.0;
    let mut k = k_min;
    while k <= k_max {
        let ln_denom = ln_factorial(k as usize)
            + f(tj1 + tj2 - tj - 2 * k)
            + f(tj1 - tm1 - 2 * k)
            + f(tj2 + tm2 - 2 * k)
            + f(tj - tj2 + tm1 + 2 * k)
            + f(tj - tj1 - tm2 + 2 * k);
        let term = (ln_pref - ln_denom).exp();
        sum += if k % 2 == 0 { term } else { -term };
        k += 1;
    }
    sum
}

/// The orthonormal multipole basis for `N` particles, stored as the
/// diagonal bands `T_{KQ}[m+Q, m]`.
///
/// `T_{KQ}` has matrix elements
/// `sqrt((2K+1)/(N+1)) <S m; K Q | S m'>` (nonzero only for `m' = m + Q`),
/// normalized so that `tr(T_{KQ} T_{K'Q'}^dagger) = delta delta`.
#[derive(Debug, Clone)]
pub struct MultipoleBasis {
    n: u32,
    bands: Vec<Vec<f64>>,
}

fn kq_index(k: usize, q: i64) -> usize {
    k * k + (q + k as i64) as usize
}

impl MultipoleBasis {
    pub fn new(n: u32) -> MultipoleBasis {
        let s = f64::from(n) / 2.0;
        let dim = n as usize + 1;
        let mut bands = Vec::with_capacity(dim * dim);
        for k in 0..=n as usize {
            let norm = ((2.0 * k as f64 + 1.0) / (dim as f64)).sqrt();
            for q in -(k as i64)..=(k as i64) {
                let lo = 0.max(-q) as usize;
                let hi = (n as i64).min(n as i64 - q) as usize;
                let mut band = Vec::with_capacity(hi + 1 - lo);
                for i1 in lo..=hi {
                    let m1 = i1 as f64 - s;
                    band.push(norm * clebsch_gordan(s, m1, k as f64, q as f64, s, m1 + q as f64));
                }
                bands.push(band);
            }
        }
        MultipoleBasis { n, bands }
    }

    pub fn particles(&self) -> u32 {
        self.n
    }

    fn band(&self, k: usize, q: i64) -> &[f64] {
        &self.bands[kq_index(k, q)]
    }

    /// `tr(A T_{KQ}^dagger)`: one pass along the `Q`-th diagonal of `A`.
    pub fn coefficient(&self, op: &CMat, k: usize, q: i64) -> Complex64 {
        let lo = 0.max(-q) as usize;
        let band = self.band(k, q);
        let mut acc = Complex64::ZERO;
        for (offset, &t) in band.iter().enumerate() {
            let i1 = lo + offset;
            let i2 = (i1 as i64 + q) as usize;
            acc += op.get(i2, i1) * t;
        }
        acc
    }

    /// All coefficients, indexed by `K^2 + (Q + K)`.
    pub fn coefficients(&self, op: &CMat) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.bands.len());
        for k in 0..=self.n as usize {
            for q in -(k as i64)..=(k as i64) {
                out.push(self.coefficient(op, k, q));
            }
        }
        out
    }

    /// Materializes `T_{KQ}` as a dense matrix.
    pub fn operator(&self, k: usize, q: i64) -> CMat {
        let dim = self.n as usize + 1;
        let lo = 0.max(-q) as usize;
        let mut out = CMat::zeros(dim);
        for (offset, &t) in self.band(k, q).iter().enumerate() {
            let i1 = lo + offset;
            out.set((i1 as i64 + q) as usize, i1, Complex64::new(t, 0.0));
        }
        out
    }
}

/// The multipole operator `T_{KQ}` for `N` particles.
pub fn multipole_operator(k: u32, q: i64, n: u32) -> Result<CMat> {
    if k > n || q.unsigned_abs() > u64::from(k) {
        return Err(Error::InvalidParameter(format!(
            "multipole (K={k}, Q={q}) out of range for N={n}"
        )));
    }
    Ok(MultipoleBasis::new(n).operator(k as usize, q))
}

/// A spherical Wigner function: multipole coefficients plus (optionally)
/// values sampled on a Gauss-Legendre x uniform sphere grid.
#[derive(Debug, Clone)]
pub struct WignerField {
    n_particles: u32,
    /// `tr(A T_{KQ}^dagger)`, indexed by `K^2 + (Q + K)`.
    multipoles: Vec<Complex64>,
    samples: Option<Vec<f64>>,
    theta_nodes: Vec<f64>,
    theta_weights: Vec<f64>,
    phi_nodes: Vec<f64>,
    /// Largest imaginary part encountered while sampling; ~0 for Hermitian
    /// sources.
    max_sample_imag: f64,
}

impl WignerField {
    pub fn particles(&self) -> u32 {
        self.n_particles
    }

    pub fn multipoles(&self) -> &[Complex64] {
        &self.multipoles
    }

    pub fn multipole(&self, k: usize, q: i64) -> Complex64 {
        self.multipoles[kq_index(k, q)]
    }

    /// Sampled values, theta-major, if sampling was requested.
    pub fn samples(&self) -> Option<&[f64]> {
        self.samples.as_deref()
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta_nodes
    }

    pub fn phi_nodes(&self) -> &[f64] {
        &self.phi_nodes
    }

    pub fn max_sample_imag(&self) -> f64 {
        self.max_sample_imag
    }

    /// `sum |A_KQ|^2 = tr(A A^dagger)` by orthonormality.
    pub fn coefficient_norm_sq(&self) -> f64 {
        self.multipoles.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Expands a Dicke-space operator in the multipole basis and samples the
/// field on `theta_count` Gauss-Legendre colatitude nodes times `phi_count`
/// uniform azimuth nodes.  Either count may be zero to skip sampling.
pub fn wigner_field(op: &CMat, theta_count: usize, phi_count: usize) -> Result<WignerField> {
    if op.dim() == 0 {
        return Err(Error::InvalidParameter("empty operator".into()));
    }
    let n = (op.dim() - 1) as u32;
    let basis = MultipoleBasis::new(n);
    wigner_field_with_basis(&basis, op, theta_count, phi_count)
}

/// Same as [`wigner_field`] with a caller-provided basis (reuse across many
/// fields of the same size).
pub fn wigner_field_with_basis(
    basis: &MultipoleBasis,
    op: &CMat,
    theta_count: usize,
    phi_count: usize,
) -> Result<WignerField> {
    let n = basis.particles();
    if op.dim() != n as usize + 1 {
        return Err(Error::DimensionMismatch(op.dim(), n as usize + 1));
    }
    let multipoles = basis.coefficients(op);

    let mut field = WignerField {
        n_particles: n,
        multipoles,
        samples: None,
        theta_nodes: Vec::new(),
        theta_weights: Vec::new(),
        phi_nodes: Vec::new(),
        max_sample_imag: 0.0,
    };
    if theta_count == 0 || phi_count == 0 {
        return Ok(field);
    }

    let (xs, ws) = gauss_legendre(theta_count);
    let thetas: Vec<f64> = xs.iter().map(|&x| x.acos()).collect();
    let phis: Vec<f64> = (0..phi_count)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / phi_count as f64)
        .collect();

    let dim = n as usize + 1;
    let mut values = vec![Complex64::ZERO; theta_count * phi_count];
    // For each |Q|, collapse the K sum per theta node, then spread the
    // azimuthal phases.
    for q_abs in 0..dim {
        let mut g_plus = vec![Complex64::ZERO; theta_count];
        let mut g_minus = vec![Complex64::ZERO; theta_count];
        let cs_sign = if q_abs % 2 == 0 { 1.0 } else { -1.0 };
        for (ti, &x) in xs.iter().enumerate() {
            let table = normalized_assoc_legendre(n as usize, q_abs, x);
            let mut acc_p = Complex64::ZERO;
            let mut acc_m = Complex64::ZERO;
            for k in q_abs..dim {
                let p = table[k - q_abs];
                acc_p += field.multipoles[kq_index(k, q_abs as i64)] * p;
                if q_abs > 0 {
                    // Y_{K,-Q} = (-1)^Q P_{KQ} e^{-iQ phi}
                    acc_m += field.multipoles[kq_index(k, -(q_abs as i64))] * (cs_sign * p);
                }
            }
            g_plus[ti] = acc_p;
            g_minus[ti] = acc_m;
        }
        for (ti, row) in values.chunks_mut(phi_count).enumerate() {
            for (pj, v) in row.iter_mut().enumerate() {
                let phase = Complex64::new(0.0, q_abs as f64 * phis[pj]).exp();
                *v += g_plus[ti] * phase;
                if q_abs > 0 {
                    *v += g_minus[ti] * phase.conj();
                }
            }
        }
    }

    let max_imag = values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    field.samples = Some(values.iter().map(|v| v.re).collect());
    field.theta_nodes = thetas;
    field.theta_weights = ws;
    field.phi_nodes = phis;
    field.max_sample_imag = max_imag;
    Ok(field)
}

/// Sphere integral of the product of two Wigner functions, evaluated in
/// coefficient space: `sum_KQ A_KQ conj(B_KQ) = tr(A B^dagger)` by
/// orthonormality of the multipole basis.
pub fn sphere_overlap(a: &WignerField, b: &WignerField) -> Result<f64> {
    if a.n_particles != b.n_particles {
        return Err(Error::DimensionMismatch(
            a.n_particles as usize,
            b.n_particles as usize,
        ));
    }
    let acc: Complex64 = a
        .multipoles
        .iter()
        .zip(&b.multipoles)
        .map(|(x, y)| x * y.conj())
        .sum();
    Ok(acc.re)
}

/// The same integral from the sampled values, as an independent quadrature
/// estimate: `sum_ij w_i (2 pi / n_phi) W_a(i,j) W_b(i,j)`.  Exact when the
/// grids hold at least `2N+1` colatitude and `4N+2` azimuth nodes.
pub fn quadrature_overlap(a: &WignerField, b: &WignerField) -> Result<f64> {
    if a.n_particles != b.n_particles {
        return Err(Error::DimensionMismatch(
            a.n_particles as usize,
            b.n_particles as usize,
        ));
    }
    let (Some(sa), Some(sb)) = (a.samples(), b.samples()) else {
        return Err(Error::InvalidParameter(
            "quadrature overlap needs sampled fields".into(),
        ));
    };
    if a.theta_nodes.len() != b.theta_nodes.len() || a.phi_nodes.len() != b.phi_nodes.len() {
        return Err(Error::DimensionMismatch(sa.len(), sb.len()));
    }
    let n_phi = a.phi_nodes.len();
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut acc = 0.0;
    for (ti, &w) in a.theta_weights.iter().enumerate() {
        let row_a = &sa[ti * n_phi..(ti + 1) * n_phi];
        let row_b = &sb[ti * n_phi..(ti + 1) * n_phi];
        let dot: f64 = row_a.iter().zip(row_b).map(|(x, y)| x * y).sum();
        acc += w * dot;
    }
    Ok(acc * dphi)
}

/// Conjugates an operator by the twisting unitary: `T_a^dagger O T_a`,
/// an elementwise phase in the Dicke basis.
pub fn twisted_operator(op: &CMat, a: f64, n: u32) -> CMat {
    let half_n = f64::from(n) / 2.0;
    let mut out = op.clone();
    out.map_indexed(|i, j, v| {
        let mi = i as f64 - half_n;
        let mj = j as f64 - half_n;
        v * Complex64::new(0.0, 0.5 * a * (mi * mi - mj * mj)).exp()
    });
    out
}

/// The two halves of the over-un-twisting readout and their overlap.
#[derive(Debug)]
pub struct OutMechanismReport {
    /// Wigner function of the state `T_{-mu} R_y(phi) T_mu |x>`.
    pub state_field: WignerField,
    /// Wigner function of the effective measurement operator
    /// `T_{-mu}^dagger S_y T_{-mu}`.
    pub measurement_field: WignerField,
    /// Coefficient-space sphere overlap of the two fields.
    pub overlap: f64,
    /// Direct matrix-element expectation `tr(rho P)` for cross-checking.
    pub oracle_expectation: f64,
}

/// Splits the double-inversion protocol (`nu = -mu`) into a state half and
/// a measurement half and reports both Wigner functions.
///
/// The state side carries the rotation and the exact inversion,
/// `|psi> = T_{-mu} R_y(phi) T_mu |x>`; the measurement side is the
/// remaining inversion folded into the observable,
/// `P = T_{-mu}^dagger S_y T_{-mu}`, so that `<psi|P|psi>` reproduces the
/// full protocol signal `<S_y>(phi)` exactly.
pub fn out_mechanism_report(n: u32, mu: f64, phi: f64) -> Result<OutMechanismReport> {
    out_mechanism_report_sampled(n, mu, phi, 2 * n as usize + 1, 4 * n as usize + 2)
}

/// [`out_mechanism_report`] with explicit field sampling resolution.
pub fn out_mechanism_report_sampled(
    n: u32,
    mu: f64,
    phi: f64,
    theta_count: usize,
    phi_count: usize,
) -> Result<OutMechanismReport> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "over-un-twisting mechanism needs N >= 2".into(),
        ));
    }
    let psi = x_state(n)
        .apply_oat(mu)
        .rotate(&crate::protocol::Direction::Y, phi)?
        .apply_oat(-mu);
    let rho = DickeDensity::from_pure(&psi);
    let ops = SpinOperators::new(n);
    let p_op = twisted_operator(&ops.sy, -mu, n);

    let basis = MultipoleBasis::new(n);
    let state_field = wigner_field_with_basis(&basis, rho.matrix(), theta_count, phi_count)?;
    let measurement_field = wigner_field_with_basis(&basis, &p_op, theta_count, phi_count)?;
    let overlap = sphere_overlap(&state_field, &measurement_field)?;
    let oracle_expectation = rho.expectation(&p_op);
    Ok(OutMechanismReport {
        state_field,
        measurement_field,
        overlap,
        oracle_expectation,
    })
}
