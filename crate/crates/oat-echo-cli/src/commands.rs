//! The data-producing commands: landscape, slice, scaling, wigner.

use std::f64::consts::PI;

use oat_echo::optimizer::{
    fit_power_law, fit_scaling, landscape, nu_optimized_slice, ProtocolClass,
};
use oat_echo::protocol::{make_grid, NoiseModel};
use oat_echo::qfi::{qfi_closed_form_max, qfi_max};
use oat_echo::wigner::{out_mechanism_report_sampled, WignerField};

use crate::config::CliError;
use crate::output::{Cell, Table};

pub struct LandscapeConfig {
    pub n: u32,
    pub noise: NoiseModel,
    pub mu_range: (f64, f64),
    pub nu_range: (f64, f64),
    pub mu_count: usize,
    pub nu_count: usize,
}

/// One row per `(mu, nu)`, mu-major: the optimized sensitivity, both optimal
/// directions, and the protocol class (`-` where `|mu| > pi` makes the
/// classification undefined).
pub fn run_landscape(cfg: &LandscapeConfig) -> Result<Table, CliError> {
    let grid = make_grid(
        cfg.mu_range.0,
        cfg.mu_range.1,
        cfg.mu_count,
        cfg.nu_range.0,
        cfg.nu_range.1,
        cfg.nu_count,
    )?;
    let ls = landscape(&grid, cfg.n, cfg.noise)?;

    let mut rows = Vec::with_capacity(grid.mu_values.len() * grid.nu_values.len());
    for (i, &mu) in grid.mu_values.iter().enumerate() {
        for (j, &nu) in grid.nu_values.iter().enumerate() {
            let idx = ls.index(i, j);
            let (n_opt, m_opt) = ls.directions[idx];
            let class = classify_label(mu, nu, cfg.n);
            let nv = n_opt.components();
            let mv = m_opt.components();
            rows.push(vec![
                Cell::F(mu),
                Cell::F(nu),
                Cell::F(ls.values[idx]),
                Cell::F(nv[0]),
                Cell::F(nv[1]),
                Cell::F(nv[2]),
                Cell::F(mv[0]),
                Cell::F(mv[1]),
                Cell::F(mv[2]),
                Cell::S(class),
            ]);
        }
    }
    Ok(Table {
        command: "landscape".into(),
        config: vec![
            ("n".into(), cfg.n.to_string()),
            ("sigma".into(), cfg.noise.collective.to_string()),
            ("Sigma".into(), cfg.noise.individual.to_string()),
            (
                "mu-range".into(),
                format!("{}:{}", cfg.mu_range.0, cfg.mu_range.1),
            ),
            (
                "nu-range".into(),
                format!("{}:{}", cfg.nu_range.0, cfg.nu_range.1),
            ),
            ("grid".into(), format!("{}x{}", cfg.mu_count, cfg.nu_count)),
        ],
        columns: [
            "mu", "nu", "snr", "nx", "ny", "nz", "mx", "my", "mz", "class",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        rows,
    })
}

fn classify_label(mu: f64, nu: f64, n: u32) -> String {
    let (m, v) = if mu < 0.0 { (-mu, -nu) } else { (mu, nu) };
    if m > PI || n < 2 {
        return "-".into();
    }
    match oat_echo::optimizer::classify(m, v, n) {
        Ok(c) => c.name().to_string(),
        Err(_) => "-".into(),
    }
}

pub struct SliceConfig {
    pub n: u32,
    pub noise: NoiseModel,
    pub mu_range: (f64, f64),
    pub mu_count: usize,
    pub nu_count: usize,
}

/// Inversion-optimized sensitivity along `mu`, with the ideal (noiseless)
/// and dephased Fisher-information bounds per row.  The dephased column is
/// only defined for collective-only noise; otherwise it is NaN.
pub fn run_slice(cfg: &SliceConfig) -> Result<Table, CliError> {
    let mus: Vec<f64> = (0..cfg.mu_count)
        .map(|i| {
            cfg.mu_range.0
                + (cfg.mu_range.1 - cfg.mu_range.0) * i as f64 / (cfg.mu_count - 1) as f64
        })
        .collect();
    let nu_search = make_grid(0.0, 1.0, 2, -PI, PI, cfg.nu_count)?;
    let slice = nu_optimized_slice(&mus, cfg.n, cfg.noise, &nu_search)?;

    let nn = f64::from(cfg.n);
    let mut rows = Vec::with_capacity(slice.len());
    for p in &slice {
        let qfi_ideal = if cfg.n >= 2 {
            qfi_closed_form_max(p.mu, cfg.n) / nn
        } else {
            f64::NAN
        };
        let qfi_dephased = if cfg.noise.individual == 0.0 && cfg.n >= 2 {
            qfi_max(p.mu, cfg.noise.collective, cfg.n)?.value / nn
        } else {
            f64::NAN
        };
        rows.push(vec![
            Cell::F(p.mu),
            Cell::F(p.best_nu),
            Cell::F(p.snr_sq_over_n),
            Cell::F(qfi_ideal),
            Cell::F(qfi_dephased),
        ]);
    }
    Ok(Table {
        command: "slice".into(),
        config: vec![
            ("n".into(), cfg.n.to_string()),
            ("sigma".into(), cfg.noise.collective.to_string()),
            ("Sigma".into(), cfg.noise.individual.to_string()),
            (
                "mu-range".into(),
                format!("{}:{}", cfg.mu_range.0, cfg.mu_range.1),
            ),
            ("mu-count".into(), cfg.mu_count.to_string()),
            ("nu-count".into(), cfg.nu_count.to_string()),
        ],
        columns: [
            "mu",
            "best_nu",
            "snr_sq_over_n",
            "qfi_ideal_over_n",
            "qfi_dephased_over_n",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        rows,
    })
}

pub struct ScalingConfig {
    pub classes: Vec<ProtocolClass>,
    pub sigmas: Vec<f64>,
    pub individuals: Vec<f64>,
    pub n_list: Vec<u32>,
    pub synthetic: Option<(f64, f64)>,
}

/// Power-law fits of the per-class optima, one row per (class, noise).
/// With `--synthetic c,alpha` the measured sensitivities are replaced by an
/// exact power law, demonstrating that the fit recovers injected exponents.
pub fn run_scaling(cfg: &ScalingConfig) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    if let Some((c, alpha)) = cfg.synthetic {
        let samples: Vec<(u32, f64)> = cfg
            .n_list
            .iter()
            .map(|&n| (n, c * f64::from(n).powf(alpha)))
            .collect();
        let start = samples.len() - samples.len().div_ceil(2);
        let fit = fit_power_law(&samples[start..])?;
        rows.push(scaling_row("synthetic", 0.0, 0.0, &fit));
    } else {
        for &sigma in &cfg.sigmas {
            for &ind in &cfg.individuals {
                let noise = NoiseModel::new(sigma, ind)?;
                for &class in &cfg.classes {
                    let fit = fit_scaling(class, noise, &cfg.n_list)?;
                    rows.push(scaling_row(class.name(), sigma, ind, &fit));
                }
            }
        }
    }
    Ok(Table {
        command: "scaling".into(),
        config: vec![
            (
                "classes".into(),
                cfg.classes
                    .iter()
                    .map(|c| c.name())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "sigma".into(),
                cfg.sigmas
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "Sigma".into(),
                cfg.individuals
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "n-list".into(),
                cfg.n_list
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "synthetic".into(),
                cfg.synthetic
                    .map(|(c, a)| format!("{c},{a}"))
                    .unwrap_or_else(|| "-".into()),
            ),
        ],
        columns: ["class", "sigma", "Sigma", "c", "alpha", "residual", "n_fit"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows,
    })
}

fn scaling_row(
    class: &str,
    sigma: f64,
    ind: f64,
    fit: &oat_echo::optimizer::ScalingFit,
) -> Vec<Cell> {
    Vec::from([
        Cell::S(class.to_string()),
        Cell::F(sigma),
        Cell::F(ind),
        Cell::F(fit.c),
        Cell::F(fit.alpha),
        Cell::F(fit.residual),
        Cell::S(
            fit.n_range
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join("|"),
        ),
    ])
}

pub struct WignerConfig {
    pub n: u32,
    pub mu: f64,
    pub phi: f64,
    pub theta_count: usize,
    pub phi_count: usize,
}

/// The two Wigner fields of the split double-inversion readout, as two
/// tables (state first, measurement second) sharing the overlap numbers in
/// their configuration echoes.
pub fn run_wigner(cfg: &WignerConfig) -> Result<(Table, Table), CliError> {
    let rep = out_mechanism_report_sampled(cfg.n, cfg.mu, cfg.phi, cfg.theta_count, cfg.phi_count)?;
    let meta = |which: &str| -> Vec<(String, String)> {
        vec![
            ("field".into(), which.into()),
            ("n".into(), cfg.n.to_string()),
            ("mu".into(), cfg.mu.to_string()),
            ("phi".into(), cfg.phi.to_string()),
            ("theta-count".into(), cfg.theta_count.to_string()),
            ("phi-count".into(), cfg.phi_count.to_string()),
            ("overlap".into(), crate::output::fmt_f(rep.overlap)),
            (
                "oracle-expectation".into(),
                crate::output::fmt_f(rep.oracle_expectation),
            ),
        ]
    };
    let table = |which: &str, field: &WignerField| -> Table {
        let samples = field.samples().unwrap_or(&[]);
        let n_phi = field.phi_nodes().len();
        let mut rows = Vec::with_capacity(samples.len());
        for (ti, &theta) in field.theta_nodes().iter().enumerate() {
            for (pj, &phi) in field.phi_nodes().iter().enumerate() {
                rows.push(vec![
                    Cell::F(theta),
                    Cell::F(phi),
                    Cell::F(samples[ti * n_phi + pj]),
                ]);
            }
        }
        Table {
            command: "wigner".into(),
            config: meta(which),
            columns: ["theta", "phi", "value"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            rows,
        }
    };
    Ok((
        table("state", &rep.state_field),
        table("measurement", &rep.measurement_field),
    ))
}
