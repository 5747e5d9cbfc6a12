//! Command-line front end.
//!
//! Reads a problem config `{"p": [...], "k": [...], "settings": {...}}` with
//! ascending coefficients, runs one analysis and writes CSV or JSON preceded
//! by a manifest of `#` comment lines. Command-line flags override settings.
//!
//! Exit codes: 0 success (a bifurcation found by `locus` counts as success),
//! 1 invalid input, 2 numerical failure.
//!
//! The `DIRTYLOCUS_SEED` environment variable is reserved and currently
//! ignored: every algorithm here is deterministic.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::closedloop::{build_problem, DirtyClosedLoop};
use crate::error::{Error, Result};
use crate::freq::{self, FreqSample};
use crate::locus::{self, RhsForm, TraceOptions, TraceStatus};
use crate::roots::{self, certify_epsilon, critical_tau, roots_at_tau, sweep};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

const DEFAULT_TAU_MAX: f64 = 1.0;
const DEFAULT_STEPS: usize = 50;
const DEFAULT_EPSILON: f64 = 0.01;
const DEFAULT_TOL: f64 = 1e-9;
const DEFAULT_CERTIFY_DENSITY: usize = 10;
/// Smallest positive `tau` on a sweep grid.
const SWEEP_TAU_FLOOR: f64 = 1e-12;
/// Density of the hidden grid used to classify roots at a single `tau`.
const CLASSIFY_DENSITY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Roots,
    Sweep,
    CriticalTau,
    Locus,
    Nyquist,
    Certify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Roots => "roots",
            Command::Sweep => "sweep",
            Command::CriticalTau => "critical-tau",
            Command::Locus => "locus",
            Command::Nyquist => "nyquist",
            Command::Certify => "certify",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "dirtylocus",
    version,
    about = "Closed-loop pole deformation under dirty derivatives"
)]
pub struct Args {
    /// Problem config (JSON).
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub command: Command,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub tau_min: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Relative bracket tolerance for critical-tau.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub omega_min: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    /// Frequency grid density for nyquist, tau grid density for certify.
    #[arg(long)]
    pub points_per_decade: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub s0_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub s0_im: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub z_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub z_im: Option<f64>,
    /// Integrate the locus ODE without the s^2 factor and without correction.
    #[arg(long)]
    pub paper_literal_rhs: bool,
    /// Append the argument-principle winding number to nyquist output.
    #[arg(long)]
    pub winding: bool,
    /// Add the log-magnitude sensitivity column to nyquist output.
    #[arg(long)]
    pub sensitivity: bool,
    /// Output file (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub tau: Option<f64>,
    /// Filter bandwidth; converted to `tau = 1 / sigma` on load.
    pub sigma: Option<f64>,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub steps: Option<usize>,
    pub epsilon: Option<f64>,
    pub tol: Option<f64>,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points_per_decade: Option<usize>,
    pub samples_per_unit: Option<usize>,
    pub contour_radius: Option<f64>,
    pub s0_re: Option<f64>,
    pub s0_im: Option<f64>,
    pub z_re: Option<f64>,
    pub z_im: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub p: Vec<f64>,
    pub k: Vec<f64>,
    #[serde(default)]
    pub settings: Settings,
}

impl ProblemConfig {
    /// Parses and validates a config, resolving `sigma` into `tau`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config: ProblemConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        if let Some(sigma) = config.settings.sigma.take() {
            if config.settings.tau.is_some() {
                return Err(Error::invalid(
                    "settings.tau and settings.sigma are mutually exclusive",
                ));
            }
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::invalid(format!(
                    "settings.sigma must be positive, got {sigma}"
                )));
            }
            config.settings.tau = Some(1.0 / sigma);
        }
        Ok(config)
    }

    pub fn problem(&self) -> Result<DirtyClosedLoop> {
        build_problem(&self.p, &self.k)
    }
}

/// Shortest round-trip decimal form; scientific outside `[1e-5, 1e16)`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn num(x: f64) -> Value {
    json!(if x == 0.0 { 0.0 } else { x })
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// Comment lines heading every output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub settings: Map<String, Value>,
    pub input_sha256: String,
    pub tool_version: String,
    pub extra: Vec<(String, Value)>,
}

impl RunManifest {
    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool: dirtylocus {}", self.tool_version);
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# input-sha256: {}", self.input_sha256);
        let _ = writeln!(out, "# settings: {}", Value::Object(self.settings.clone()));
        for (key, value) in &self.extra {
            let _ = writeln!(out, "# {key}: {value}");
        }
        out
    }
}

fn pick<T: Copy>(flag: Option<T>, setting: Option<T>, default: T) -> T {
    flag.or(setting).unwrap_or(default)
}

struct Run<'a> {
    args: &'a Args,
    settings: &'a Settings,
    cl: DirtyClosedLoop,
    resolved: Map<String, Value>,
    extra: Vec<(String, Value)>,
}

impl Run<'_> {
    fn float(&mut self, key: &str, flag: Option<f64>, setting: Option<f64>, default: f64) -> f64 {
        let v = pick(flag, setting, default);
        self.resolved.insert(key.into(), num(v));
        v
    }

    fn count(
        &mut self,
        key: &str,
        flag: Option<usize>,
        setting: Option<usize>,
        default: usize,
    ) -> usize {
        let v = pick(flag, setting, default);
        self.resolved.insert(key.into(), json!(v));
        v
    }

    fn tau(&mut self) -> f64 {
        self.float("tau", self.args.tau, self.settings.tau, 0.0)
    }

    fn tau_min(&mut self) -> f64 {
        self.float("tau_min", self.args.tau_min, self.settings.tau_min, 0.0)
    }

    fn tau_max(&mut self) -> f64 {
        self.float(
            "tau_max",
            self.args.tau_max,
            self.settings.tau_max,
            DEFAULT_TAU_MAX,
        )
    }
}

/// Runs one command on config text, returning the full output document.
pub fn execute(args: &Args, config_text: &str) -> Result<String> {
    let config = ProblemConfig::parse(config_text)?;
    let cl = config.problem()?;
    let mut run = Run {
        args,
        settings: &config.settings,
        cl,
        resolved: Map::new(),
        extra: Vec::new(),
    };
    let body = match args.command {
        Command::Roots => cmd_roots(&mut run),
        Command::Sweep => cmd_sweep(&mut run),
        Command::CriticalTau => cmd_critical_tau(&mut run),
        Command::Locus => cmd_locus(&mut run),
        Command::Nyquist => cmd_nyquist(&mut run),
        Command::Certify => cmd_certify(&mut run),
    }?;
    let manifest = RunManifest {
        command: args.command.name().into(),
        settings: run.resolved,
        input_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        extra: run.extra,
    };
    Ok(manifest.render() + &body)
}

fn require_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {x}")))
    }
}

/// Roots at `tau` labelled tracked or parasitic by a sweep from 0 to `tau`.
fn classified_roots(cl: &DirtyClosedLoop, tau: f64) -> Result<Vec<(Complex64, &'static str)>> {
    let grid = roots::certify_grid(tau, CLASSIFY_DENSITY);
    let sw = sweep(cl, &grid)?;
    let last = sw.taus.len() - 1;
    let tracked = sw.tracked_at(last).into_iter().map(|z| (z, "tracked"));
    let parasitic = sw.parasitic_at(last).into_iter().map(|z| (z, "parasitic"));
    Ok(tracked.chain(parasitic).collect())
}

fn cmd_roots(run: &mut Run) -> Result<String> {
    let tau = run.tau();
    require_finite("tau", tau)?;
    let mut rows = if tau == 0.0 {
        roots_at_tau(&run.cl, 0.0)?
            .into_iter()
            .map(|z| (z, "tracked"))
            .collect()
    } else {
        match classified_roots(&run.cl, tau) {
            Ok(rows) => rows,
            Err(e) if e.is_invalid_input() => return Err(e),
            Err(_) => roots_at_tau(&run.cl, tau)?
                .into_iter()
                .map(|z| (z, "untracked-single-τ"))
                .collect(),
        }
    };
    rows.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    let mut out = String::from("re,im,family\n");
    for (z, family) in rows {
        let _ = writeln!(out, "{},{},{family}", fmt_f64(z.re), fmt_f64(z.im));
    }
    Ok(out)
}

/// `steps + 1` geometric points from `lo` to `hi` with exact endpoints.
fn geometric_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| match i {
            0 => lo,
            i if i == steps => hi,
            i => lo * (hi / lo).powf(i as f64 / steps as f64),
        })
        .collect()
}

fn cmd_sweep(run: &mut Run) -> Result<String> {
    let tau_min = run.tau_min();
    let tau_max = run.tau_max();
    let steps = run.count("steps", run.args.steps, run.settings.steps, DEFAULT_STEPS);
    require_finite("tau_min", tau_min)?;
    require_finite("tau_max", tau_max)?;
    let lo = tau_min.max(SWEEP_TAU_FLOOR);
    if tau_min < 0.0 || tau_max <= lo {
        return Err(Error::invalid(format!(
            "sweep needs 0 <= tau_min < tau_max with tau_max > {SWEEP_TAU_FLOOR}, got [{tau_min}, {tau_max}]"
        )));
    }
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    let mut grid = vec![0.0];
    grid.extend(geometric_grid(lo, tau_max, steps));
    let sw = sweep(&run.cl, &grid)?;
    let n = run.cl.n();

    let mut out = String::from("tau,path_id,family,re,im,refined\n");
    for (k, &tau) in sw.taus.iter().enumerate() {
        if tau < tau_min || (tau == 0.0 && tau_min > 0.0) {
            continue;
        }
        let refined = sw.refined[k];
        let tracked = sw.tracked_at(k).into_iter().map(|z| ("tracked", z));
        let parasitic = sw.parasitic_at(k).into_iter().map(|z| ("parasitic", z));
        for (id, (family, z)) in tracked.chain(parasitic).enumerate() {
            let _ = writeln!(
                out,
                "{},{id},{family},{},{},{refined}",
                fmt_f64(tau),
                fmt_f64(z.re),
                fmt_f64(z.im)
            );
        }
        debug_assert!(tau == 0.0 || sw.tracked_at(k).len() == n);
    }
    Ok(out)
}

fn cmd_critical_tau(run: &mut Run) -> Result<String> {
    let tau_max = run.tau_max();
    let tol = run.float("tol", run.args.tol, run.settings.tol, DEFAULT_TOL);
    let res = critical_tau(&run.cl, tau_max, tol)?;
    let record = json!({
        "tau_crit": opt_num(res.tau_crit),
        "sigma_crit": opt_num(res.sigma_crit),
        "bracket_width": opt_num(res.bracket_width),
        "tau_max_searched": num(res.tau_max_searched),
    });
    Ok(pretty(&record))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializing a JSON value cannot fail") + "\n"
}

fn cmd_locus(run: &mut Run) -> Result<String> {
    let tau0 = run.tau_min();
    let tau1 = run.tau_max();
    let s0_re = run.args.s0_re.or(run.settings.s0_re).ok_or_else(|| {
        Error::invalid("locus needs a start point: --s0-re (and optionally --s0-im)")
    })?;
    run.resolved.insert("s0_re".into(), num(s0_re));
    let s0_im = run.float("s0_im", run.args.s0_im, run.settings.s0_im, 0.0);
    let z_re = run.float("z_re", run.args.z_re, run.settings.z_re, 0.0);
    let z_im = run.float("z_im", run.args.z_im, run.settings.z_im, 0.0);
    let literal = run.args.paper_literal_rhs;
    run.resolved
        .insert("paper_literal_rhs".into(), json!(literal));

    let options = if literal {
        TraceOptions {
            rhs: RhsForm::WithoutSquare,
            correct: false,
        }
    } else {
        TraceOptions::default()
    };
    let trace = locus::trace_locus(
        &run.cl,
        Complex64::new(s0_re, s0_im),
        tau0,
        tau1,
        Complex64::new(z_re, z_im),
        options,
    )?;
    run.extra
        .push(("status".into(), json!(trace.status.as_str())));
    if trace.status != TraceStatus::Completed {
        run.extra
            .push(("stop".into(), json!(trace.stop_info.message)));
    }

    let mut out = String::from("tau,re,im,residual,drift,denom_mag,status\n");
    let last = trace.points.len() - 1;
    for (i, p) in trace.points.iter().enumerate() {
        let status = if i == last {
            trace.status.as_str()
        } else {
            "accepted"
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{status}",
            fmt_f64(p.tau),
            fmt_f64(p.s.re),
            fmt_f64(p.s.im),
            fmt_f64(p.residual),
            fmt_f64(p.drift),
            fmt_f64(p.denominator)
        );
    }
    Ok(out)
}

fn cmd_nyquist(run: &mut Run) -> Result<String> {
    let tau = run.tau();
    let omega_min = run.float(
        "omega_min",
        run.args.omega_min,
        run.settings.omega_min,
        freq::DEFAULT_OMEGA_MIN,
    );
    let omega_max = run.float(
        "omega_max",
        run.args.omega_max,
        run.settings.omega_max,
        freq::DEFAULT_OMEGA_MAX,
    );
    let ppd = run.count(
        "points_per_decade",
        run.args.points_per_decade,
        run.settings.points_per_decade,
        freq::DEFAULT_POINTS_PER_DECADE,
    );
    let sensitivity = run.args.sensitivity;
    run.resolved
        .insert("sensitivity".into(), json!(sensitivity));
    run.resolved
        .insert("winding".into(), json!(run.args.winding));
    require_finite("tau", tau)?;

    if tau > 0.0 {
        let lim = freq::asymptotic_limits(&run.cl, tau)?;
        run.extra.push((
            "asymptotic-limits".into(),
            json!({"small_s": num(lim.small_s), "large_s": num(lim.large_s)}),
        ));
    }
    let samples = freq::nyquist_curve(&run.cl, tau, omega_min, omega_max, ppd)?;
    let mut out = String::from("omega,H_re,H_im,dH_re,dH_im");
    out.push_str(if sensitivity { ",sensitivity\n" } else { "\n" });
    for FreqSample {
        omega,
        h,
        dh_dtau,
        log_mag_sensitivity,
    } in samples
    {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            fmt_f64(omega),
            fmt_f64(h.re),
            fmt_f64(h.im),
            fmt_f64(dh_dtau.re),
            fmt_f64(dh_dtau.im)
        );
        if sensitivity {
            let _ = write!(out, ",{}", fmt_f64(log_mag_sensitivity));
        }
        out.push('\n');
    }

    if run.args.winding {
        let samples_per_unit = run.count(
            "samples_per_unit",
            None,
            run.settings.samples_per_unit,
            freq::DEFAULT_SAMPLES_PER_UNIT,
        );
        let radius = run
            .settings
            .contour_radius
            .unwrap_or_else(|| freq::min_contour_radius(&run.cl, tau));
        run.resolved.insert("contour_radius".into(), num(radius));
        let res = freq::winding_number(&run.cl, tau, radius, samples_per_unit)?;
        let rhp = roots_at_tau(&run.cl, tau)?
            .iter()
            .filter(|z| z.re > 0.0)
            .count();
        let trailer = json!({"winding": res.winding_number, "rhp_roots": rhp});
        let _ = writeln!(out, "# {trailer}");
    }
    Ok(out)
}

fn cmd_certify(run: &mut Run) -> Result<String> {
    let epsilon = run.float(
        "epsilon",
        run.args.epsilon,
        run.settings.epsilon,
        DEFAULT_EPSILON,
    );
    let tau_max = run.tau_max();
    let density = run.count(
        "points_per_decade",
        run.args.points_per_decade,
        run.settings.points_per_decade,
        DEFAULT_CERTIFY_DENSITY,
    );
    let cert = certify_epsilon(&run.cl, epsilon, tau_max, density)?;
    let record = json!({
        "epsilon": num(cert.epsilon),
        "tau_star": num(cert.tau_star),
        "tau_max": num(cert.tau_max),
        "grid": {
            "kind": "geometric",
            "tau_min": num(cert.grid[0]),
            "tau_max": num(cert.tau_max),
            "points_per_decade": cert.points_per_decade,
            "decades": cert.decades,
            "points": cert.grid.len(),
        },
        "disclaimer": "sampled certificate",
    });
    Ok(pretty(&record))
}

fn exit_code(e: &Error) -> i32 {
    if e.is_invalid_input() {
        EXIT_INVALID
    } else {
        EXIT_NUMERICAL
    }
}

/// Parses arguments, runs, writes output; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!(
                "error: invalid input: cannot read {}: {e}",
                args.config.display()
            );
            return EXIT_INVALID;
        }
    };
    let output = match execute(&args, &text) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let written = match &args.out {
        Some(path) => std::fs::write(path, output),
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(output.as_bytes())
        }
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: cannot write output: {e}");
            EXIT_INVALID
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(-2.0), "-2");
        assert_eq!(fmt_f64(1e-7), "1e-7");
        assert_eq!(fmt_f64(2.5e20), "2.5e20");
        assert_eq!(fmt_f64(0.1 + 0.2), "0.30000000000000004");
        for x in [1e-300, 3.7e-6, 123456.789, -9.87654321e17] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sigma_becomes_tau() {
        let c =
            ProblemConfig::parse(r#"{"p":[0,0,1],"k":[-2,-3],"settings":{"sigma":4}}"#).unwrap();
        assert_eq!(c.settings.tau, Some(0.25));
        assert_eq!(c.settings.sigma, None);
        let both =
            ProblemConfig::parse(r#"{"p":[0,0,1],"k":[-2,-3],"settings":{"sigma":4,"tau":1}}"#);
        assert!(both.unwrap_err().is_invalid_input());
    }

    #[test]
    fn unknown_settings_rejected() {
        let err =
            ProblemConfig::parse(r#"{"p":[0,0,1],"k":[-2],"settings":{"tua":1}}"#).unwrap_err();
        assert!(err.is_invalid_input());
        assert!(err.to_string().contains("tua"));
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1e-3, 1.0, 3);
        assert_eq!(g.len(), 4);
        assert_eq!((g[0], g[3]), (1e-3, 1.0));
        assert!((g[1] - 1e-2).abs() < 1e-15);
    }
}
