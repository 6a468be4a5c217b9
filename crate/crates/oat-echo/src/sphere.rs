//! Sphere sampling machinery: Gauss-Legendre nodes and orthonormal
//! spherical harmonics.
//!
//! The Wigner fields are band-limited to degree `N`, so a product of two of
//! them integrates exactly with `2N+1` Gauss-Legendre nodes in `cos(theta)`
//! and `4N+2` uniform nodes in `phi`.

use num_complex::Complex64;

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; standard starting guesses
/// converge in a handful of steps for any practical order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess for the i-th root from the top.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        // Middle node is exactly zero; overwrite to kill sign noise.
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_with_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fully normalized associated Legendre values `P_{K,Q}(x)` for fixed
/// `Q >= 0` and all `K = Q..=k_max`, with the Condon-Shortley phase folded
/// in.  Normalized so that `Y_{K,Q} = P_{K,Q}(cos theta) e^{i Q phi}` is
/// orthonormal over the sphere.
pub fn normalized_assoc_legendre(k_max: usize, q: usize, x: f64) -> Vec<f64> {
    debug_assert!(q <= k_max);
    let mut out = Vec::with_capacity(k_max - q + 1);
    let s = (1.0 - x * x).max(0.0).sqrt();
    // Sectoral seed P_{Q,Q}.
    let mut pqq = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();
    for k in 1..=q {
        let kf = k as f64;
        pqq *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    out.push(pqq);
    if k_max == q {
        return out;
    }
    // First off-sectoral term.
    let mut p_prev = pqq;
    let mut p_curr = ((2 * q + 3) as f64).sqrt() * x * pqq;
    out.push(p_curr);
    for k in (q + 2)..=k_max {
        let kf = k as f64;
        let qf = q as f64;
        let a = ((4.0 * kf * kf - 1.0) / (kf * kf - qf * qf)).sqrt();
        let b = (((2.0 * kf + 1.0) * (kf - 1.0 + qf) * (kf - 1.0 - qf))
            / ((2.0 * kf - 3.0) * (kf * kf - qf * qf)))
            .sqrt();
        let p_next = a * x * p_curr - b * p_prev;
        p_prev = p_curr;
        p_curr = p_next;
        out.push(p_curr);
    }
    out
}

/// Single orthonormal spherical harmonic value, any sign of `q`.
pub fn spherical_harmonic(k: usize, q: i64, theta: f64, phi: f64) -> Complex64 {
    let qa = q.unsigned_abs() as usize;
    debug_assert!(qa <= k);
    let table = normalized_assoc_legendre(k, qa, theta.cos());
    let p = table[k - qa];
    let y = p * Complex64::new(0.0, qa as f64 * phi).exp();
    if q >= 0 {
        y
    } else {
        // Y_{K,-Q} = (-1)^Q conj(Y_{K,Q})
        let sign = if qa.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * y.conj()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_low_orders() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((w[0] - 1.0).abs() < 1e-14);
        let (x3, w3) = gauss_legendre(3);
        assert!((x3[2] - 0.7745966692414834).abs() < 1e-13);
        assert!((w3[1] - 8.0 / 9.0).abs() < 1e-13);
        assert_eq!(x3[1], 0.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // n nodes are exact through degree 2n-1.
        let (x, w) = gauss_legendre(7);
        for deg in 0..=13usize {
            let got: f64 = x
                .iter()
                .zip(&w)
                .map(|(&xi, &wi)| wi * xi.powi(deg as i32))
                .sum();
            let want = if deg % 2 == 0 {
                2.0 / (deg as f64 + 1.0)
            } else {
                0.0
            };
            assert!((got - want).abs() < 1e-13, "degree {deg}: {got} vs {want}");
        }
    }

    #[test]
    fn harmonics_orthonormal_under_quadrature() {
        let k_max = 8usize;
        let n_theta = 2 * k_max + 1;
        let n_phi = 4 * k_max + 2;
        let (xs, ws) = gauss_legendre(n_theta);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let pairs = [
            ((0usize, 0i64), (0usize, 0i64)),
            ((3, 1), (3, 1)),
            ((3, 1), (3, -1)),
            ((5, -4), (5, -4)),
            ((8, 2), (6, 2)),
            ((7, 3), (7, 2)),
            ((8, 8), (8, 8)),
        ];
        for ((k1, q1), (k2, q2)) in pairs {
            let mut acc = Complex64::ZERO;
            for (ti, &x) in xs.iter().enumerate() {
                let theta = x.acos();
                for pj in 0..n_phi {
                    let phi = dphi * pj as f64;
                    let y1 = spherical_harmonic(k1, q1, theta, phi);
                    let y2 = spherical_harmonic(k2, q2, theta, phi);
                    acc += ws[ti] * dphi * y1 * y2.conj();
                }
            }
            let want = if k1 == k2 && q1 == q2 { 1.0 } else { 0.0 };
            assert!(
                (acc - want).norm() < 1e-12,
                "({k1},{q1})x({k2},{q2}): {acc}"
            );
        }
    }

    #[test]
    fn condon_shortley_sign() {
        // Y_{1,1}(pi/2, 0) = -sqrt(3/(8 pi)).
        let v = spherical_harmonic(1, 1, std::f64::consts::FRAC_PI_2, 0.0);
        let want = -(3.0 / (8.0 * std::f64::consts::PI)).sqrt();
        assert!((v.re - want).abs() < 1e-14 && v.im.abs() < 1e-15);
        // Y_{1,0}(0, 0) = sqrt(3/(4 pi)).
        let v0 = spherical_harmonic(1, 0, 0.0, 0.0);
        assert!((v0.re - (3.0 / (4.0 * std::f64::consts::PI)).sqrt()).abs() < 1e-14);
    }
}
