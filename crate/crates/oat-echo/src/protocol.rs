//! Protocol parameter types: particle number, twisting strengths, dephasing
//! strengths, spatial directions, and sweep grids.

use crate::{Error, Result};

/// Dephasing strengths during the twisting stages, expressed as rates
/// relative to the twisting rate (dimensionless).
///
/// Both channels act with the duration of the twisting stage they accompany,
/// so a stage of strength `a` applies the collective channel with exponent
/// `collective * |a|` and the per-particle channel with `individual * |a|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Collective dephasing strength (jump operator `S_z` on the ensemble).
    pub collective: f64,
    /// Individual dephasing strength (independent `sigma_z` on each atom,
    /// same rate for all).
    pub individual: f64,
}

impl NoiseModel {
    /// Noiseless protocol.
    pub const NONE: NoiseModel = NoiseModel {
        collective: 0.0,
        individual: 0.0,
    };

    pub fn new(collective: f64, individual: f64) -> Result<Self> {
        if !collective.is_finite() || collective < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "collective dephasing strength must be finite and >= 0, got {collective}"
            )));
        }
        if !individual.is_finite() || individual < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "individual dephasing strength must be finite and >= 0, got {individual}"
            )));
        }
        Ok(NoiseModel {
            collective,
            individual,
        })
    }

    pub fn collective_only(sigma: f64) -> Result<Self> {
        Self::new(sigma, 0.0)
    }

    pub fn individual_only(sigma: f64) -> Result<Self> {
        Self::new(0.0, sigma)
    }

    pub fn is_noiseless(&self) -> bool {
        self.collective == 0.0 && self.individual == 0.0
    }
}

/// One evaluation site of the echo protocol family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolPoint {
    /// Particle count (>= 1).  The collective spin length is `n/2`.
    pub n: u32,
    /// Initial twisting strength (radians).
    pub mu: f64,
    /// Excess inversion: deviation of the total applied twisting from an
    /// exact echo.  `nu = mu` means no un-twisting, `nu = -mu` a double
    /// inversion.
    pub nu: f64,
    pub noise: NoiseModel,
}

impl ProtocolPoint {
    pub fn new(n: u32, mu: f64, nu: f64, noise: NoiseModel) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter(
                "particle count must be >= 1".into(),
            ));
        }
        if !mu.is_finite() || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "twisting strengths must be finite, got mu={mu}, nu={nu}"
            )));
        }
        Ok(ProtocolPoint { n, mu, nu, noise })
    }

    pub fn noiseless(n: u32, mu: f64, nu: f64) -> Result<Self> {
        Self::new(n, mu, nu, NoiseModel::NONE)
    }

    /// Spin length `N/2`.
    pub fn spin(&self) -> f64 {
        f64::from(self.n) / 2.0
    }
}

/// A unit vector in three dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction([f64; 3]);

impl Direction {
    pub const X: Direction = Direction([1.0, 0.0, 0.0]);
    pub const Y: Direction = Direction([0.0, 1.0, 0.0]);
    pub const Z: Direction = Direction([0.0, 0.0, 1.0]);

    /// Normalizes the given components.  The zero vector (and anything
    /// non-finite) is rejected.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm_sq = x * x + y * y + z * z;
        if !norm_sq.is_finite() || norm_sq == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "direction ({x}, {y}, {z}) cannot be normalized"
            )));
        }
        let inv = 1.0 / norm_sq.sqrt();
        Ok(Direction([x * inv, y * inv, z * inv]))
    }

    /// Wraps components that are already unit norm (within 1e-12).
    pub fn from_unit(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "vector has norm {norm}, expected 1"
            )));
        }
        Ok(Direction(v))
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    /// Angle to the *axis* spanned by `other`, ignoring overall sign
    /// (a direction and its negation label the same measurement axis).
    pub fn axis_angle_to(&self, other: &Direction) -> f64 {
        let dot = self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2];
        dot.abs().min(1.0).acos()
    }
}

/// Rectangular grid of `(mu, nu)` samples for landscape sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    pub mu_values: Vec<f64>,
    pub nu_values: Vec<f64>,
}

impl ParameterGrid {
    /// Validates strictly increasing, finite sample lists.
    pub fn new(mu_values: Vec<f64>, nu_values: Vec<f64>) -> Result<Self> {
        for (name, values) in [("mu", &mu_values), ("nu", &nu_values)] {
            if values.is_empty() {
                return Err(Error::InvalidParameter(format!("{name} grid is empty")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} grid contains non-finite values"
                )));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "{name} grid is not strictly increasing"
                )));
            }
        }
        Ok(ParameterGrid {
            mu_values,
            nu_values,
        })
    }
}

/// Uniform inclusive-endpoint grid.
pub fn make_grid(
    mu_min: f64,
    mu_max: f64,
    mu_count: usize,
    nu_min: f64,
    nu_max: f64,
    nu_count: usize,
) -> Result<ParameterGrid> {
    let axis = |name: &str, min: f64, max: f64, count: usize| -> Result<Vec<f64>> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} range [{min}, {max}] must be finite"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidParameter(format!(
                "{name} count must be >= 2, got {count}"
            )));
        }
        if max <= min {
            return Err(Error::InvalidParameter(format!(
                "{name} range [{min}, {max}] is degenerate"
            )));
        }
        let step = (max - min) / (count - 1) as f64;
        let mut v: Vec<f64> = (0..count).map(|i| min + step * i as f64).collect();
        *v.last_mut().unwrap() = max;
        Ok(v)
    };
    ParameterGrid::new(
        axis("mu", mu_min, mu_max, mu_count)?,
        axis("nu", nu_min, nu_max, nu_count)?,
    )
}
