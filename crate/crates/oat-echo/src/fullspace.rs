//! Exact evolution on the full `2^N` product space.
//!
//! Individual dephasing couples the symmetric Dicke subspace to the rest of
//! the Hilbert space, so protocols with per-particle noise are simulated on
//! the full register.  Everything the protocol needs stays cheap in this
//! basis: twisting and both dephasing channels act elementwise on density
//! matrix entries (`S_z`, Hamming weights and Hamming distances are all
//! diagonal data), rotations factor into per-qubit 2x2 conjugations, and
//! collective spin operators are sparse with `N` off-diagonals per row.
//!
//! The density matrix has `4^N` entries; the cap of 10 qubits keeps that at
//! about a million complex numbers.

use num_complex::Complex64;

use crate::cmat::CMat;
use crate::linalg::{Mat3, Vec3};
use crate::moments::{moment_matrices, MomentMatrices};
use crate::numeric::sqrt_binomial;
use crate::oracle::DickeDensity;
use crate::protocol::{Direction, ProtocolPoint};
use crate::{Error, Result};

/// Largest register simulated on the product space.
pub const MAX_FULL_QUBITS: u32 = 10;

/// Dense density matrix on the `2^n`-dimensional register, row-major.
#[derive(Debug, Clone)]
pub struct FullDensity {
    n_qubits: u32,
    dim: usize,
    rho: Vec<Complex64>,
}

fn check_size(n: u32) -> Result<()> {
    if !(1..=MAX_FULL_QUBITS).contains(&n) {
        return Err(Error::Unsupported(format!(
            "product-space path supports 1..={MAX_FULL_QUBITS} qubits, got {n}"
        )));
    }
    Ok(())
}

/// `S_z` eigenvalue of a basis string (set bits are spin-up).
#[inline]
fn m_of(s: usize, n: u32) -> f64 {
    s.count_ones() as f64 - f64::from(n) / 2.0
}

impl FullDensity {
    /// The `+x`-polarized product state `|x><x|`: every entry `1/2^n`.
    pub fn x_polarized(n: u32) -> Result<FullDensity> {
        check_size(n)?;
        let dim = 1usize << n;
        let v = 1.0 / dim as f64;
        Ok(FullDensity {
            n_qubits: n,
            dim,
            rho: vec![Complex64::new(v, 0.0); dim * dim],
        })
    }

    pub fn qubits(&self) -> u32 {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.rho[i * self.dim + i].re).sum()
    }

    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Twisting `exp(-i mu S_z^2 / 2)`: diagonal phases in the z product
    /// basis.
    pub fn apply_oat(&mut self, mu: f64) {
        let n = self.n_qubits;
        let phases: Vec<Complex64> = (0..self.dim)
            .map(|s| {
                let m = m_of(s, n);
                Complex64::new(0.0, -0.5 * mu * m * m).exp()
            })
            .collect();
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.rho[i * self.dim + j] *= phases[i] * phases[j].conj();
            }
        }
    }

    /// Collective dephasing over a stage of strength `mu`: entry `(s, s')`
    /// is damped by `exp(-sigma |mu| (m - m')^2 / 4)`.
    pub fn collective_dephase(&mut self, sigma: f64, mu: f64) {
        if sigma == 0.0 || mu == 0.0 {
            return;
        }
        let n = self.n_qubits;
        let rate = sigma * mu.abs() / 4.0;
        let ms: Vec<f64> = (0..self.dim).map(|s| m_of(s, n)).collect();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d = ms[i] - ms[j];
                self.rho[i * self.dim + j] *= (-rate * d * d).exp();
            }
        }
    }

    /// Individual dephasing over a stage of strength `mu`: each qubit whose
    /// state differs between bra and ket contributes a factor
    /// `exp(-Sigma |mu|)`, so entry `(s, s')` is damped by the Hamming
    /// distance power `exp(-Sigma |mu| d_H(s, s'))`.
    pub fn individual_dephase(&mut self, big_sigma: f64, mu: f64) {
        if big_sigma == 0.0 || mu == 0.0 {
            return;
        }
        let rate = big_sigma * mu.abs();
        // Damping by Hamming distance, looked up per distance.
        let factors: Vec<f64> = (0..=self.n_qubits)
            .map(|d| (-rate * f64::from(d)).exp())
            .collect();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d = (i ^ j).count_ones() as usize;
                self.rho[i * self.dim + j] *= factors[d];
            }
        }
    }

    /// Rotation `exp(-i angle S_axis)` as a product of per-qubit 2x2
    /// unitaries.
    pub fn rotate(&mut self, axis: &Direction, angle: f64) {
        let [nx, ny, nz] = axis.components();
        let (s, c) = (0.5 * angle).sin_cos();
        // u = cos(angle/2) I - i sin(angle/2) (n . sigma), written in the
        // (down, up) index order of the register (set bit = spin up).
        let u00 = Complex64::new(c, s * nz);
        let u01 = Complex64::new(0.0, -s) * Complex64::new(nx, ny);
        let u10 = Complex64::new(0.0, -s) * Complex64::new(nx, -ny);
        let u11 = Complex64::new(c, -s * nz);
        for k in 0..self.n_qubits {
            self.apply_single_qubit(k, u00, u01, u10, u11);
        }
    }

    /// Conjugates the density by a unitary acting on qubit `k`.
    fn apply_single_qubit(
        &mut self,
        k: u32,
        u00: Complex64,
        u01: Complex64,
        u10: Complex64,
        u11: Complex64,
    ) {
        let bit = 1usize << k;
        let dim = self.dim;
        // Left multiply: rows mix in pairs (i, i | bit).
        for i0 in 0..dim {
            if i0 & bit != 0 {
                continue;
            }
            let i1 = i0 | bit;
            for j in 0..dim {
                let a = self.rho[i0 * dim + j];
                let b = self.rho[i1 * dim + j];
                self.rho[i0 * dim + j] = u00 * a + u01 * b;
                self.rho[i1 * dim + j] = u10 * a + u11 * b;
            }
        }
        // Right multiply by u^dagger: columns mix in pairs.
        for j0 in 0..dim {
            if j0 & bit != 0 {
                continue;
            }
            let j1 = j0 | bit;
            for i in 0..dim {
                let a = self.rho[i * dim + j0];
                let b = self.rho[i * dim + j1];
                self.rho[i * dim + j0] = a * u00.conj() + b * u01.conj();
                self.rho[i * dim + j1] = a * u10.conj() + b * u11.conj();
            }
        }
    }

    pub fn expectation(&self, op: &SparseOp) -> f64 {
        op.trace_mul(&self.rho, self.dim).re
    }

    /// Projection onto the symmetric (Dicke) subspace, for cross-checks
    /// against the Dicke-basis path.  Collective-only evolution never leaves
    /// that subspace, so the projection is lossless there.
    pub fn to_dicke(&self) -> Result<DickeDensity> {
        let n = self.n_qubits;
        let dim_d = n as usize + 1;
        // Dicke state k (= number of up spins) is the normalized symmetric
        // combination of all strings with popcount k.
        let mut strings: Vec<Vec<usize>> = vec![Vec::new(); dim_d];
        for s in 0..self.dim {
            strings[s.count_ones() as usize].push(s);
        }
        let mut mat = CMat::zeros(dim_d);
        for (k1, set1) in strings.iter().enumerate() {
            for (k2, set2) in strings.iter().enumerate() {
                let mut acc = Complex64::ZERO;
                for &s1 in set1 {
                    for &s2 in set2 {
                        acc += self.rho[s1 * self.dim + s2];
                    }
                }
                let norm = sqrt_binomial(n as usize, k1) * sqrt_binomial(n as usize, k2);
                mat.set(k1, k2, acc / norm);
            }
        }
        DickeDensity::from_matrix(n, mat)
    }
}

/// Sparse Hermitian operator on the register: per row, the list of
/// `(column, value)` pairs.
#[derive(Debug, Clone)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseOp {
    /// `tr(op * rho)`.
    pub fn trace_mul(&self, rho: &[Complex64], dim: usize) -> Complex64 {
        debug_assert_eq!(self.dim, dim);
        let mut acc = Complex64::ZERO;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                acc += v * rho[j * dim + i];
            }
        }
        acc
    }

    /// `op * rho` into a dense matrix.
    pub fn mul_dense(&self, rho: &[Complex64], dim: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; dim * dim];
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                let src = &rho[k * dim..(k + 1) * dim];
                let dst = &mut out[i * dim..(i + 1) * dim];
                for j in 0..dim {
                    dst[j] += v * src[j];
                }
            }
        }
        out
    }

    /// `rho * op` into a dense matrix.
    pub fn mul_dense_right(&self, rho: &[Complex64], dim: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; dim * dim];
        for (k, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                for i in 0..dim {
                    out[i * dim + j] += rho[i * dim + k] * v;
                }
            }
        }
        out
    }

    pub fn linear_combination(ops: &[&SparseOp], weights: &[f64]) -> SparseOp {
        let dim = ops[0].dim;
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for (op, &w) in ops.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for (i, row) in op.rows.iter().enumerate() {
                for &(j, v) in row {
                    rows[i].push((j, v * w));
                }
            }
        }
        // Merge duplicate columns.
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
            for &(j, v) in row.iter() {
                if let Some(last) = merged.last_mut() {
                    if last.0 == j {
                        last.1 += v;
                        continue;
                    }
                }
                merged.push((j, v));
            }
            *row = merged;
        }
        SparseOp { dim, rows }
    }
}

/// Collective spin operators `[S_x, S_y, S_z]` on the register.
pub fn collective_ops(n: u32) -> Result<[SparseOp; 3]> {
    check_size(n)?;
    let dim = 1usize << n;
    let mut sx_rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
    let mut sy_rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
    let mut sz_rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
    for s in 0..dim {
        sz_rows[s].push((s, Complex64::new(m_of(s, n), 0.0)));
        for k in 0..n {
            let t = s ^ (1usize << k);
            // <t| sigma_x^k |s> / 2 and <t| sigma_y^k |s> / 2.
            sx_rows[t].push((s, Complex64::new(0.5, 0.0)));
            // sigma_y |down> = -i |up>, sigma_y |up> = +i |down>.
            let sy_val = if s & (1usize << k) == 0 {
                Complex64::new(0.0, -0.5)
            } else {
                Complex64::new(0.0, 0.5)
            };
            sy_rows[t].push((s, sy_val));
        }
    }
    Ok([
        SparseOp { dim, rows: sx_rows },
        SparseOp { dim, rows: sy_rows },
        SparseOp { dim, rows: sz_rows },
    ])
}

fn stage_one(point: &ProtocolPoint) -> Result<FullDensity> {
    let mut rho = FullDensity::x_polarized(point.n)?;
    rho.apply_oat(point.mu);
    rho.collective_dephase(point.noise.collective, point.mu);
    rho.individual_dephase(point.noise.individual, point.mu);
    Ok(rho)
}

fn stage_two(point: &ProtocolPoint, rho: &mut FullDensity) {
    let back = point.nu - point.mu;
    rho.apply_oat(back);
    rho.collective_dephase(point.noise.collective, back);
    rho.individual_dephase(point.noise.individual, back);
}

/// Full protocol state at signal angle `phi` around `axis`, with both
/// dephasing channels applied during both twisting stages.
pub fn full_space_protocol(
    point: &ProtocolPoint,
    axis: &Direction,
    phi: f64,
) -> Result<FullDensity> {
    let mut rho = stage_one(point)?;
    rho.rotate(axis, phi);
    stage_two(point, &mut rho);
    Ok(rho)
}

/// Elementwise damping applied to a raw matrix in place of a density; used
/// to push the exact commutator through the measurement stage.
fn stage_two_matrix(point: &ProtocolPoint, mat: &mut Vec<Complex64>, n: u32) {
    let mut carrier = FullDensity {
        n_qubits: n,
        dim: 1usize << n,
        rho: std::mem::take(mat),
    };
    stage_two(point, &mut carrier);
    *mat = carrier.rho;
}

/// Moment matrices from direct product-space evolution (slope via the exact
/// commutator, covariance and mean spin from the `phi = 0` state).
pub fn full_moment_matrices(point: &ProtocolPoint) -> Result<MomentMatrices> {
    if point.n > 8 {
        return Err(Error::Unsupported(
            "product-space moment verification capped at N = 8".into(),
        ));
    }
    let dim = 1usize << point.n;
    let ops = collective_ops(point.n)?;
    let prep = stage_one(point)?;

    let mut m: Mat3 = [[0.0; 3]; 3];
    for k in 0..3 {
        // -i [S_k, rho_prep]
        let left = ops[k].mul_dense(&prep.rho, dim);
        let right = ops[k].mul_dense_right(&prep.rho, dim);
        let mut comm: Vec<Complex64> = left
            .iter()
            .zip(&right)
            .map(|(a, b)| Complex64::new(0.0, -1.0) * (a - b))
            .collect();
        stage_two_matrix(point, &mut comm, point.n);
        for l in 0..3 {
            m[k][l] = ops[l].trace_mul(&comm, dim).re;
        }
    }

    let mut rho_final = prep;
    stage_two(point, &mut rho_final);
    let mut j: Vec3 = [0.0; 3];
    for k in 0..3 {
        j[k] = rho_final.expectation(&ops[k]);
    }
    let mut q: Mat3 = [[0.0; 3]; 3];
    for k in 0..3 {
        let sk_rho = ops[k].mul_dense(&rho_final.rho, dim);
        for l in k..3 {
            // tr(S_l S_k rho) symmetrized.
            let t_lk = ops[l].trace_mul(&sk_rho, dim);
            let v = t_lk.re - j[k] * j[l];
            q[k][l] = v;
            q[l][k] = v;
        }
    }
    Ok(MomentMatrices { m, q, j })
}

/// Deviation of the closed-form moments from the product-space oracle,
/// scaled by `N^2`.
pub fn full_verify_moment_matrices(point: &ProtocolPoint) -> Result<f64> {
    let analytic = moment_matrices(point);
    let direct = full_moment_matrices(point)?;
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

/// Exact sensitivity at fixed directions on the product space.
pub fn full_direct_sensitivity(
    point: &ProtocolPoint,
    n_dir: &Direction,
    m_dir: &Direction,
) -> Result<f64> {
    check_size(point.n)?;
    let dim = 1usize << point.n;
    let ops = collective_ops(point.n)?;
    let refs: Vec<&SparseOp> = ops.iter().collect();
    let sn = SparseOp::linear_combination(&refs, &n_dir.components());
    let sm = SparseOp::linear_combination(&refs, &m_dir.components());

    let prep = stage_one(point)?;
    let left = sn.mul_dense(&prep.rho, dim);
    let right = sn.mul_dense_right(&prep.rho, dim);
    let mut comm: Vec<Complex64> = left
        .iter()
        .zip(&right)
        .map(|(a, b)| Complex64::new(0.0, -1.0) * (a - b))
        .collect();
    stage_two_matrix(point, &mut comm, point.n);
    let slope = sm.trace_mul(&comm, dim).re;

    let mut rho_final = prep;
    stage_two(point, &mut rho_final);
    let mean = rho_final.expectation(&sm);
    let sm_rho = sm.mul_dense(&rho_final.rho, dim);
    let second = sm.trace_mul(&sm_rho, dim).re;
    let var = second - mean * mean;
    let scale = f64::from(point.n).powi(2).max(1.0);
    if var <= scale * 1e-14 {
        return Err(Error::DegenerateMeasurement);
    }
    Ok(slope.abs() / var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::protocol::NoiseModel;
    use std::f64::consts::FRAC_PI_2;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }

    #[test]
    fn x_state_trace_and_expectations() {
        let rho = FullDensity::x_polarized(4).unwrap();
        approx(rho.trace(), 1.0, 1e-14);
        approx(rho.purity(), 1.0, 1e-12);
        let ops = collective_ops(4).unwrap();
        approx(rho.expectation(&ops[0]), 2.0, 1e-12);
        approx(rho.expectation(&ops[1]), 0.0, 1e-12);
        approx(rho.expectation(&ops[2]), 0.0, 1e-12);
    }

    #[test]
    fn collective_only_matches_dicke_path() {
        // With no individual noise the full-space protocol stays symmetric
        // and must reproduce the Dicke-basis density exactly.
        let p =
            ProtocolPoint::new(6, 0.8, -0.5, NoiseModel::collective_only(0.3).unwrap()).unwrap();
        let axis = Direction::new(0.0, 1.0, 0.0).unwrap();
        let full = full_space_protocol(&p, &axis, 0.13).unwrap();
        let projected = full.to_dicke().unwrap();
        let dicke = oracle::protocol_density(&p, &axis, 0.13).unwrap();
        let diff = projected.matrix().sub(dicke.matrix()).frobenius();
        assert!(diff < 1e-11, "paths differ by {diff}");
        approx(projected.trace(), 1.0, 1e-11);
    }

    #[test]
    fn ladder_damping_rule() {
        // <S_+> after an individual-dephasing stage of strength |mu| picks
        // up exactly e^{-Sigma |mu|}.
        let n = 5u32;
        let big_sigma = 0.4;
        let mu = 0.9;
        let ops = collective_ops(n).unwrap();
        let mut rho = FullDensity::x_polarized(n).unwrap();
        let before_x = rho.expectation(&ops[0]);
        let before_y = rho.expectation(&ops[1]);
        rho.individual_dephase(big_sigma, mu);
        let factor = (-big_sigma * mu).exp();
        approx(rho.expectation(&ops[0]), factor * before_x, 1e-12);
        approx(rho.expectation(&ops[1]), factor * before_y, 1e-12);
    }

    #[test]
    fn ladder_pair_damping_rule() {
        // <S_+ S_-> transforms as e^{-2 Sigma |mu|} [S_+S_- +
        // (N/2 + S_z)(e^{2 Sigma |mu|} - 1)]: check the expectation value on
        // a rotated (non-trivial) state for N = 4.
        let n = 4u32;
        let big_sigma = 0.7;
        let mu = 0.33;
        let ops = collective_ops(n).unwrap();
        let mut rho = FullDensity::x_polarized(n).unwrap();
        rho.rotate(&Direction::new(0.1, 0.7, 0.7).unwrap(), 0.6);
        rho.apply_oat(0.4);

        // S_+ S_- = S_x^2 + S_y^2 + S_z in operator form; evaluate both
        // sides from expectations of products.
        let dim = rho.dim();
        let expect_pp = |rho: &FullDensity| -> f64 {
            let sx_rho = ops[0].mul_dense(&rho.rho, dim);
            let sy_rho = ops[1].mul_dense(&rho.rho, dim);
            let sxx = ops[0].trace_mul(&sx_rho, dim).re;
            let syy = ops[1].trace_mul(&sy_rho, dim).re;
            // Re tr(Sx Sy rho) enters with the commutator; use the exact
            // complex combination <(Sx - iSy)(Sx + iSy)> + <Sz> algebra:
            // S_+S_- = Sx^2 + Sy^2 + i[Sy, Sx] + ... simpler: S_+S_- =
            // Sx^2 + Sy^2 + Sz.
            let sz = rho.expectation(&ops[2]);
            sxx + syy + sz
        };
        let before = expect_pp(&rho);
        let sz_before = rho.expectation(&ops[2]);
        rho.individual_dephase(big_sigma, mu);
        let after = expect_pp(&rho);
        let e2 = (-2.0 * big_sigma * mu).exp();
        let want = e2 * before + (f64::from(n) / 2.0 + sz_before) * (1.0 - e2);
        approx(after, want, 1e-11);
    }

    #[test]
    fn trace_preserved_by_all_channels() {
        let p = ProtocolPoint::new(6, 1.2, -0.7, NoiseModel::new(0.3, 0.8).unwrap()).unwrap();
        let rho = full_space_protocol(&p, &Direction::Y, 0.2).unwrap();
        approx(rho.trace(), 1.0, 1e-12);
        assert!(rho.purity() < 1.0);
    }

    #[test]
    fn individual_moment_verification() {
        let cases = [
            ProtocolPoint::new(6, 1.1, 0.4, NoiseModel::individual_only(0.25).unwrap()).unwrap(),
            ProtocolPoint::new(4, 0.9, -0.9, NoiseModel::individual_only(1.5).unwrap()).unwrap(),
            ProtocolPoint::new(5, 2.1, 0.3, NoiseModel::new(0.4, 0.6).unwrap()).unwrap(),
        ];
        for p in cases {
            let dev = full_verify_moment_matrices(&p).unwrap();
            assert!(dev < 1e-10, "deviation {dev} at {p:?}");
        }
    }

    #[test]
    fn oversize_register_rejected() {
        assert!(FullDensity::x_polarized(11).is_err());
        let p =
            ProtocolPoint::new(12, 0.5, 0.0, NoiseModel::individual_only(0.5).unwrap()).unwrap();
        assert!(full_direct_sensitivity(&p, &Direction::Y, &Direction::Y).is_err());
    }

    #[test]
    fn ramsey_limit_on_product_space() {
        let p = ProtocolPoint::new(4, 0.0, 0.0, NoiseModel::individual_only(0.0).unwrap()).unwrap();
        let snr = full_direct_sensitivity(&p, &Direction::Z, &Direction::Y).unwrap();
        approx(snr, 2.0, 1e-12);
    }

    #[test]
    fn quarter_twist_consistency_between_paths() {
        // Collective-only sensitivity must agree between the Dicke and the
        // product-space routes.
        let p = ProtocolPoint::new(
            6,
            FRAC_PI_2,
            -FRAC_PI_2,
            NoiseModel::collective_only(0.2).unwrap(),
        )
        .unwrap();
        let n_dir = Direction::new(0.1, 0.95, -0.05).unwrap();
        let m_dir = Direction::new(0.0, 0.8, 0.6).unwrap();
        let full = full_direct_sensitivity(&p, &n_dir, &m_dir).unwrap();
        let dicke = oracle::direct_sensitivity(&p, &n_dir, &m_dir).unwrap();
        approx(full / dicke, 1.0, 1e-11);
    }
}
