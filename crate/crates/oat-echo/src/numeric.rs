//! Scalar numerical primitives.

use std::sync::OnceLock;

/// Stable integer power of a cosine-like base `c` in `[-1, 1]`.
///
/// Computes `c^k` as `sign(c)^k * exp(k ln|c|)`, which stays accurate for the
/// `cos^(N-2)` factors of the moment formulas at large particle numbers where
/// repeated multiplication would accumulate rounding or die in gradual
/// underflow.  `k = 0` returns 1 (also for `c = 0`); `c = 0` with `k > 0`
/// returns 0.
pub fn stable_cos_pow(c: f64, k: u32) -> f64 {
    debug_assert!((-1.0..=1.0).contains(&c), "base {c} outside [-1, 1]");
    if k == 0 {
        return 1.0;
    }
    if c == 0.0 {
        return 0.0;
    }
    let sign = if c < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    sign * (f64::from(k) * c.abs().ln()).exp()
}

const LN_FACTORIAL_MAX: usize = 8192;

/// `ln(n!)` from a lazily built summation table.
///
/// Exact integer arguments only; the table covers every factorial appearing
/// in Clebsch-Gordan coefficients and Dicke-basis binomials up to a few
/// thousand particles.
pub fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_MAX + 1);
        t.push(0.0);
        // Kahan-compensated running sum: the plain sum drifts to ~1e-11
        // absolute by n ~ 3000, which shows up in coherent-state norms.
        let mut acc = 0.0_f64;
        let mut comp = 0.0_f64;
        for i in 1..=LN_FACTORIAL_MAX {
            let y = (i as f64).ln() - comp;
            let s = acc + y;
            comp = (s - acc) - y;
            acc = s;
            t.push(acc);
        }
        t
    });
    assert!(
        n <= LN_FACTORIAL_MAX,
        "ln_factorial argument {n} exceeds table size {LN_FACTORIAL_MAX}"
    );
    table[n]
}

/// `sqrt(binomial(n, k))` via the log-factorial table.
pub fn sqrt_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    (0.5 * (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k))).exp()
}
