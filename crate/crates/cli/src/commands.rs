//! The four subcommands. Each returns the CSV text and a manifest; writing
//! them out is left to the caller.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use ruelle::ldp::{build_ldp_table_for, delta_constraint_check, LdpSystem};
use ruelle::pressure::{a_for_rate, gamma_prime, lattice_check, pressure_sigma_with, PressureCurve};
use ruelle::scan::{envelope_report, two_parameter_sweep, ScanSystem};
use ruelle::Error;
use serde_json::json;

use crate::config::{ExperimentConfig, TargetAverage};
use crate::error::{invariant_name, CliError, ValidationError, EXIT_GUARD_TRIP};
use crate::output::{fmt_opt, fmt_real, CsvTable, RunManifest, WarningKind};

/// `|J − γ·∫τ dμ|` above this is reported.
pub const IDENTITY_TOL: f64 = 1e-7;
/// `|J − inf_t Pr(f + t·g_a)|` above this is reported.
pub const INF_TOL: f64 = 1e-7;
/// Scan cells with `rho_hat` at or above `1 − NO_DECAY_MARGIN` are reported.
pub const NO_DECAY_MARGIN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Pressure,
    Rates,
    Ldp,
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::Rates => "rates",
            Command::Ldp => "ldp",
            Command::Scan => "scan",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pressure" => Ok(Command::Pressure),
            "rates" => Ok(Command::Rates),
            "ldp" => Ok(Command::Ldp),
            "scan" => Ok(Command::Scan),
            other => Err(format!("unknown command {other:?}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub csv: String,
    pub manifest: RunManifest,
}

pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let (csv, manifest) = run_with_manifest(command, cfg);
    csv.map(|csv| RunOutput { csv, manifest })
}

/// Like [`run`], but the manifest survives a failed run with the stages and
/// warnings recorded before the failure.
pub fn run_with_manifest(command: Command, cfg: &ExperimentConfig) -> (Result<String, CliError>, RunManifest) {
    let mut m = RunManifest::new(command.name(), Some(cfg.hash.clone()));
    let table = match command {
        Command::Pressure => pressure_into(cfg, &mut m),
        Command::Rates => rates_into(cfg, &mut m),
        Command::Ldp => ldp_into(cfg, &mut m),
        Command::Scan => scan_into(cfg, &mut m),
    };
    match table {
        Ok(t) => (Ok(t.render(&m.warnings)), m),
        Err(e) => {
            m.exit_code = e.exit_code();
            m.error = Some(e.to_string());
            (Err(e), m)
        }
    }
}

fn missing(block: &str) -> CliError {
    ValidationError::new(block, "block present", format!("this command needs a [{block}] block")).into()
}

fn normalized_curve(cfg: &ExperimentConfig) -> Result<PressureCurve, Error> {
    PressureCurve::normalized(&cfg.f, &cfg.tau, &cfg.g, cfg.settings)
}

fn curve_meta(table: &mut CsvTable, curve: &PressureCurve) -> Result<(), Error> {
    let (lo, hi) = curve.achievable_range()?;
    table.meta_real("normalization_shift", curve.normalization_shift());
    table.meta_real("a_star", curve.a_star()?);
    table.meta_real("a_min", lo);
    table.meta_real("a_max", hi);
    Ok(())
}

pub const PRESSURE_COLUMNS: [&str; 8] = [
    "pressure_sigma",
    "pressure_flow",
    "normalization_shift",
    "pressure_sigma_normalized",
    "pressure_flow_normalized",
    "a_star",
    "a_min",
    "a_max",
];

/// Shift and flow pressure of `f`, before and after centering, and the range of flow averages of `G`.
pub fn cmd_pressure(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    run(Command::Pressure, cfg)
}

fn pressure_into(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<CsvTable, CliError> {
    let p_sigma = m.timed("pressure_sigma", || pressure_sigma_with(&cfg.f, cfg.settings.eigen))?;
    let raw = m.timed("pressure_flow", || PressureCurve::new(&cfg.f, &cfg.tau, &cfg.g, cfg.settings))?;
    let p_flow = raw.beta(0.0)?;
    let centered = m.timed("normalize", || raw.normalize())?;
    let p_sigma_centered = pressure_sigma_with(centered.f(), cfg.settings.eigen)?;
    let p_flow_centered = centered.beta(0.0)?;
    let (a_star, (lo, hi)) =
        m.timed("averages", || Ok::<_, Error>((centered.a_star()?, centered.achievable_range()?)))?;

    let mut table = CsvTable::new("pressure", &cfg.hash, &PRESSURE_COLUMNS);
    table.push(
        [p_sigma, p_flow, centered.normalization_shift(), p_sigma_centered, p_flow_centered, a_star, lo, hi]
            .into_iter()
            .map(fmt_real)
            .collect(),
    );
    Ok(table)
}

pub const RATES_COLUMNS: [&str; 12] = [
    "a",
    "xi",
    "J",
    "gamma",
    "omega",
    "mean_tau",
    "J_minus_gamma_meantau",
    "gamma_prime_plus_xi",
    "J_inf",
    "J_minus_J_inf",
    "beta_second",
    "status",
];

/// One row per grid point; out-of-range points carry an error marker.
pub fn cmd_rates(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    run(Command::Rates, cfg)
}

fn rates_into(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<CsvTable, CliError> {
    let run = cfg.rates.as_ref().ok_or_else(|| missing("rates"))?;
    let curve = m.timed("normalize", || normalized_curve(cfg))?;
    let mut table = CsvTable::new("rates", &cfg.hash, &RATES_COLUMNS);
    m.timed("averages", || curve_meta(&mut table, &curve))?;

    let h = cfg.settings.fd_first;
    let reports = m.timed("rates", || {
        run.a_grid
            .par_iter()
            .map(|&a| match ruelle::rate_J(&curve, a) {
                Ok(r) => {
                    let gp = match gamma_prime(&curve, a, h) {
                        Ok(v) => Some(v),
                        Err(Error::OutOfRange { .. }) => None,
                        Err(e) => return Err(e),
                    };
                    Ok(Ok((r, gp)))
                }
                Err(e @ Error::OutOfRange { .. }) => Ok(Err(e)),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;

    for (&a, report) in run.a_grid.iter().zip(reports) {
        match report {
            Ok((r, gp)) => {
                let gap = r.diagnostics.identity_gap;
                let inf_gap = r.j - r.diagnostics.j_inf;
                if !(gap.abs() <= IDENTITY_TOL) {
                    m.warn(
                        WarningKind::Advisory,
                        format!(
                            "J - gamma*mean_tau = {} at a = {} exceeds {IDENTITY_TOL:e}",
                            fmt_real(gap),
                            fmt_real(a)
                        ),
                    );
                }
                if !(inf_gap.abs() <= INF_TOL) {
                    m.warn(
                        WarningKind::Advisory,
                        format!("J - J_inf = {} at a = {} exceeds {INF_TOL:e}", fmt_real(inf_gap), fmt_real(a)),
                    );
                }
                table.push(vec![
                    fmt_real(a),
                    fmt_real(r.xi),
                    fmt_real(r.j),
                    fmt_real(r.gamma),
                    fmt_real(r.omega),
                    fmt_real(r.mean_tau),
                    fmt_real(gap),
                    fmt_opt(gp.map(|g| g + r.xi)),
                    fmt_real(r.diagnostics.j_inf),
                    fmt_real(inf_gap),
                    fmt_real(r.diagnostics.beta_second),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                m.warn(WarningKind::OutOfRange, e.to_string());
                let mut cells = vec![fmt_real(a)];
                cells.extend(std::iter::repeat_n("NA".to_string(), RATES_COLUMNS.len() - 2));
                cells.push(format!("error: {}", invariant_name(&e)));
                table.push(cells);
            }
        }
    }
    Ok(table)
}

pub const LDP_COLUMNS: [&str; 13] = [
    "n",
    "delta_n",
    "rho_exact",
    "boundary_hits",
    "rho_smooth_direct",
    "rho_smooth_spectral",
    "spectral_imag",
    "asymptote_indicator",
    "asymptote_smooth",
    "ratio_exact",
    "ratio_smooth",
    "t_n",
    "c_a",
];

/// Shrinking-window probabilities by enumeration and by Fourier inversion,
/// against the local asymptote. Exit code 3 when the enumeration guard tripped.
pub fn cmd_ldp(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    run(Command::Ldp, cfg)
}

fn ldp_into(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<CsvTable, CliError> {
    let run = cfg.ldp.as_ref().ok_or_else(|| missing("ldp"))?;
    let curve = m.timed("normalize", || normalized_curve(cfg))?;
    let a = match run.target {
        TargetAverage::Fixed(a) => a,
        TargetAverage::Rate { target, side } => m.timed("target_average", || a_for_rate(&curve, target, side))?,
    };
    let sys = m.timed("rates", || LdpSystem::new(&curve, a))?;
    let grid = run.lattice.grid();
    let lattice = m.timed("lattice_check", || lattice_check(&sys.f0, &sys.ga, &grid, run.lattice.options))?;
    if lattice.flagged {
        m.warn(
            WarningKind::Lattice,
            format!(
                "r(u) = {} >= 1 - {:e} at u = {} for g_a = g - a*tau",
                fmt_real(lattice.max_r),
                lattice.tol,
                fmt_real(lattice.argmax_u)
            ),
        );
    }
    let table_cfg = run.table_config(a);
    let ldp = m.timed("ldp_table", || build_ldp_table_for(&sys, &table_cfg))?;
    for &n in &ldp.guard_trips {
        m.warn(
            WarningKind::GuardTrip,
            format!("n = {n}: enumeration exceeds {} cylinders; spectral path only", run.guard),
        );
    }
    for row in ldp.rows.iter().filter(|r| r.boundary_hits.unwrap_or(0) > 0) {
        m.warn(
            WarningKind::Advisory,
            format!(
                "n = {}: {} words within {:e} of the window edge",
                row.n,
                row.boundary_hits.unwrap_or(0),
                ruelle::ldp::BOUNDARY_SNAP
            ),
        );
    }
    let delta = delta_constraint_check(run.delta, lattice.max_r, table_cfg.ns());
    if !(delta.delta_ok && delta.sequence_ok) {
        m.warn(
            WarningKind::Advisory,
            format!(
                "delta = {} against rho_hat = {}: ceiling -log(rho_hat)/2 = {}, n*rho_hat^n*e^(2*delta*n) peaks at {}",
                fmt_real(run.delta),
                fmt_real(delta.rho_hat),
                fmt_real(delta.ceiling),
                fmt_real(delta.worst_value)
            ),
        );
    }
    m.advisory.insert(
        "delta_constraint".into(),
        json!({
            "delta": delta.delta,
            "rho_hat": delta.rho_hat,
            "ceiling": delta.ceiling,
            "delta_ok": delta.delta_ok,
            "sequence_ok": delta.sequence_ok,
            "worst_n": delta.worst_n,
            "worst_value": delta.worst_value,
        }),
    );
    m.advisory.insert(
        "lattice".into(),
        json!({ "max_r": lattice.max_r, "argmax_u": lattice.argmax_u, "flagged": lattice.flagged, "tol": lattice.tol }),
    );

    let rr = &ldp.rate;
    let mut table = CsvTable::new("ldp", &cfg.hash, &LDP_COLUMNS);
    table.meta_real("a", a);
    table.meta_real("xi", rr.xi);
    table.meta_real("J", rr.j);
    table.meta_real("gamma", rr.gamma);
    table.meta_real("omega", rr.omega);
    table.meta_real("mean_tau", rr.mean_tau);
    table.meta_real("a_star", rr.a_star);
    table.meta_real("delta", run.delta);
    table.meta("cutoff", ldp.cutoff.kind.to_string());
    table.meta_real("lattice_max_r", lattice.max_r);
    for r in &ldp.rows {
        table.push(vec![
            r.n.to_string(),
            fmt_real(r.delta_n),
            fmt_opt(r.rho_exact),
            r.boundary_hits.map_or_else(|| "NA".into(), |b| b.to_string()),
            fmt_opt(r.rho_smooth_direct),
            fmt_real(r.rho_smooth_spectral),
            fmt_real(r.spectral_imag),
            fmt_real(r.asymptote_indicator),
            fmt_real(r.asymptote_smooth),
            fmt_opt(r.ratio_exact),
            fmt_opt(r.ratio_smooth),
            fmt_real(r.t_n),
            fmt_real(r.c_a),
        ]);
    }
    if !ldp.guard_trips.is_empty() {
        m.exit_code = EXIT_GUARD_TRIP;
    }
    Ok(table)
}

pub const SCAN_COLUMNS: [&str; 7] = ["kappa", "b", "w", "rho_hat", "fit_residual", "max_step_ratio", "y_final"];

/// Decay rates of `‖L^m 1‖_{β,b}` over the `(b, κ)` grid plus the envelope fit.
pub fn cmd_scan(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    run(Command::Scan, cfg)
}

fn scan_into(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<CsvTable, CliError> {
    let run = cfg.scan.as_ref().ok_or_else(|| missing("scan"))?;
    let f = if run.normalize { m.timed("normalize", || normalized_curve(cfg))?.f().clone() } else { cfg.f.clone() };
    let pressure = pressure_sigma_with(&f, cfg.settings.eigen)?;
    let sys = ScanSystem::with_pressure(&f, &cfg.tau, &cfg.g, pressure)?;
    let sweep = m.timed("sweep", || two_parameter_sweep(&sys, &run.config))?;
    let env = envelope_report(&sweep.fits, run.config.epsilon);

    let nb = sweep.b_grid.len();
    let mut table = CsvTable::new("scan", &cfg.hash, &SCAN_COLUMNS);
    table.meta_real("pressure", pressure);
    table.meta_real("rho_global", env.rho_global);
    table.meta("e_fit", fmt_opt(env.e_fit));
    table.meta("c_fit", fmt_opt(env.c_fit));
    for (i, fit) in sweep.fits.iter().enumerate() {
        let kappa = sweep.kappa_grid[i / nb];
        if fit.rho_hat >= 1.0 - NO_DECAY_MARGIN {
            m.warn(
                WarningKind::Advisory,
                format!(
                    "no decay at b = {}, kappa = {}: rho_hat = {}",
                    fmt_real(fit.b),
                    fmt_real(kappa),
                    fmt_real(fit.rho_hat)
                ),
            );
        }
        table.push(vec![
            fmt_real(kappa),
            fmt_real(fit.b),
            fmt_real(fit.w),
            fmt_real(fit.rho_hat),
            fmt_real(fit.fit_residual),
            fmt_real(fit.max_step_ratio),
            fmt_real(*fit.y.last().expect("m_max ≥ 2")),
        ]);
    }
    if env.no_decay {
        m.warn(WarningKind::Advisory, "envelope fit skipped: no cell decays");
    }
    if env.exceeds_epsilon {
        m.warn(
            WarningKind::Advisory,
            format!("envelope exponent {} exceeds epsilon = {}", fmt_opt(env.e_fit), fmt_real(env.epsilon)),
        );
    }
    m.advisory.insert(
        "envelope".into(),
        json!({
            "rho_global": env.rho_global,
            "e_fit": env.e_fit,
            "c_fit": env.c_fit,
            "epsilon": env.epsilon,
            "exceeds_epsilon": env.exceeds_epsilon,
            "no_decay": env.no_decay,
        }),
    );
    Ok(table)
}
