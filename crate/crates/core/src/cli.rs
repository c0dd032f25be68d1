//! Command-line front end. Every command prints a table (default), CSV or
//! JSON; numbers go through [`fmt_num`] / [`round12`] so identical arguments
//! give byte-identical output.
//!
//! Exit codes: 0 success, 2 infeasible/unstable, 3 indeterminate (including
//! ill-posed Lyapunov matrices), 4 input error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{sweep_pool, Tolerances};
use crate::converse::{build_certificate, empirical_order, estimate_n_star, nstar_sweep, write_nstar_csv};
use crate::error::{Error, Result};
use crate::format::{fmt_num, fmt_order, round12};
use crate::lmi::{
    max_delay, max_delay_scan, region_sweep, solve_feasibility, verify_certificate, Certificate,
    FeasibilityReport, InteriorPoint, RegionGrid, Verdict,
};
use crate::lyapunov::{build_kernel, residuals, WeightTriple};
use crate::model::{builtin_example, TdsSystem};
use crate::spectrum::{is_stable, Stability};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_INDETERMINATE: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "tds-certify", version, about = "Stability certificates for linear time-delay systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Largest delay with a feasible order-n LMI, per n.
    MaxDelay(CommonArgs),
    /// Explicit necessity order N* per delay (or over a (λ, h) grid).
    Nstar(CommonArgs),
    /// Feasibility and N* over a (λ, h) grid of the third example.
    Region(CommonArgs),
    /// Emit a solver-found or converse certificate with its margins.
    Certificate(CommonArgs),
    /// Residuals of the delay Lyapunov matrix.
    LyapCheck(CommonArgs),
    /// Rightmost characteristic roots and the stability verdict.
    Roots(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Ipm,
    EigenCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Converse,
    Solver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weights {
    Identity,
    Balanced,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct CommonArgs {
    /// Built-in example 1, 2 or 3 (3 needs --lambda).
    #[arg(long, conflicts_with = "system")]
    pub example: Option<u8>,
    /// JSON file `{"A": [[..]], "Ad": [[..]], "h": .., "rank_tol"?: ..}`.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Order, range `a..b` (inclusive) or list `a,b,c`.
    #[arg(long)]
    pub n: Option<String>,
    /// Delay list `h1,h2,…`; for max-delay the bisection bracket `lo,hi`.
    #[arg(long)]
    pub h: Option<String>,
    /// max-delay: scan `lo:hi:step` upward instead of bisecting a bracket.
    #[arg(long)]
    pub scan: Option<String>,
    /// `λlo:λhi:count,hlo:hhi:count`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum, default_value = "ipm")]
    pub backend: Backend,
    /// Certificate JSON to verify (with `--backend eigen-check`).
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "solver")]
    pub mode: Mode,
    #[arg(long, value_enum)]
    pub weights: Option<Weights>,
    /// nstar: also search the first order (≤ this) at which the converse
    /// certificate is feasible.
    #[arg(long)]
    pub n_emp: Option<usize>,
    /// Output file (directory for `region`); stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: OutputFormat,
    #[command(flatten)]
    pub tol: TolArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TolArgs {
    #[arg(long)]
    pub tol_rank: Option<f64>,
    #[arg(long)]
    pub tol_definiteness: Option<f64>,
    #[arg(long)]
    pub tol_bisection: Option<f64>,
    #[arg(long)]
    pub tol_cond: Option<f64>,
    #[arg(long)]
    pub tol_quad: Option<usize>,
    #[arg(long)]
    pub tol_functional_quad: Option<usize>,
    #[arg(long)]
    pub tol_root: Option<f64>,
    #[arg(long)]
    pub tol_spectrum: Option<f64>,
}

impl TolArgs {
    pub fn resolve(&self) -> Result<Tolerances> {
        let mut t = Tolerances::default();
        let pos = |v: Option<f64>, name: &str, slot: &mut f64| -> Result<()> {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Input(format!("--tol-{name} must be positive")));
                }
                *slot = v;
            }
            Ok(())
        };
        pos(self.tol_rank, "rank", &mut t.rank_tol)?;
        pos(self.tol_definiteness, "definiteness", &mut t.definiteness_tol)?;
        pos(self.tol_bisection, "bisection", &mut t.bisection_tol)?;
        pos(self.tol_cond, "cond", &mut t.cond_limit)?;
        pos(self.tol_root, "root", &mut t.root_residual)?;
        pos(self.tol_spectrum, "spectrum", &mut t.spectrum_margin)?;
        for (v, name, slot) in [
            (self.tol_quad, "quad", &mut t.quad_points),
            (self.tol_functional_quad, "functional-quad", &mut t.functional_quad_points),
        ] {
            if let Some(v) = v {
                if v == 0 {
                    return Err(Error::Input(format!("--tol-{name} must be positive")));
                }
                *slot = v;
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemSource {
    Builtin { id: u8, lambda: Option<f64> },
    Json(PathBuf),
}

/// Validated, fully resolved arguments of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: SystemSource,
    /// Delay from the JSON file, if any.
    pub file_h: Option<f64>,
    pub orders: Option<Vec<usize>>,
    pub hs: Option<Vec<f64>>,
    pub scan: Option<Vec<f64>>,
    pub grid: Option<RegionGrid>,
    pub backend: Backend,
    pub certificate: Option<PathBuf>,
    pub mode: Mode,
    pub weights: Option<Weights>,
    pub n_emp: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub tol: Tolerances,
    system_json: Option<String>,
}

pub fn parse_orders(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Input(format!("bad order specification {s:?}"));
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if out.is_empty() || out.contains(&0) {
        return Err(Error::Input(format!("order range {s:?} is empty or contains 0")));
    }
    Ok(out)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Input(format!("bad number {t:?}")))
        })
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(Error::Input("empty list".into()));
    }
    Ok(v)
}

/// `lo:hi:step` → `lo, lo+step, …` (up to `hi` inclusive, with slack).
pub fn parse_scan(s: &str) -> Result<Vec<f64>> {
    let p = parse_triplet(s)?;
    let (lo, hi, step) = (p[0], p[1], p[2]);
    if !(lo > 0.0 && hi >= lo && step > 0.0) {
        return Err(Error::Input(format!("bad scan {s:?}: need 0 < lo ≤ hi, step > 0")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| round12(lo + step * i as f64)).collect())
}

fn parse_triplet(s: &str) -> Result<Vec<f64>> {
    let p: Vec<f64> = s
        .split(':')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Input(format!("bad range {s:?}"))))
        .collect::<Result<_>>()?;
    if p.len() != 3 {
        return Err(Error::Input(format!("range {s:?} must be lo:hi:count")));
    }
    Ok(p)
}

pub fn parse_grid(s: &str) -> Result<RegionGrid> {
    let (l, h) = s
        .split_once(',')
        .ok_or_else(|| Error::Input(format!("grid {s:?} must be λlo:λhi:count,hlo:hhi:count")))?;
    let axis = |t: &str| -> Result<Vec<f64>> {
        let p = parse_triplet(t)?;
        if p[2] < 1.0 || p[2].fract() != 0.0 {
            return Err(Error::Input(format!("grid count in {t:?} must be a positive integer")));
        }
        Ok(crate::lmi::region::linspace(p[0], p[1], p[2] as usize)
            .into_iter()
            .map(round12)
            .collect())
    };
    RegionGrid::new(axis(l)?, axis(h)?)
}

pub const DEFAULT_GRID: &str = "0.1:10:10,0.3:3:10";

impl RunConfig {
    pub fn from_args(a: &CommonArgs) -> Result<Self> {
        let (source, system_json, file_h) = match (&a.example, &a.system) {
            (Some(id), None) => {
                if !(1..=3).contains(id) {
                    return Err(Error::Input(format!("unknown example {id}")));
                }
                (SystemSource::Builtin { id: *id, lambda: a.lambda }, None, None)
            }
            (None, Some(p)) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Input(format!("{}: {e}", p.display())))?;
                let v: crate::model::SystemJson =
                    serde_json::from_str(&text).map_err(|e| Error::Input(format!("system JSON: {e}")))?;
                (SystemSource::Json(p.clone()), Some(text), Some(v.h))
            }
            _ => (SystemSource::Builtin { id: 3, lambda: a.lambda }, None, None),
        };
        Ok(Self {
            source,
            file_h,
            orders: a.n.as_deref().map(parse_orders).transpose()?,
            hs: a.h.as_deref().map(parse_list).transpose()?,
            scan: a.scan.as_deref().map(parse_scan).transpose()?,
            grid: a.grid.as_deref().map(parse_grid).transpose()?,
            backend: a.backend,
            certificate: a.certificate.clone(),
            mode: a.mode,
            weights: a.weights,
            n_emp: a.n_emp,
            out: a.out.clone(),
            format: a.format,
            tol: a.tol.resolve()?,
            system_json,
        })
    }

    fn has_system(&self, a: &CommonArgs) -> bool {
        a.example.is_some() || a.system.is_some()
    }

    pub fn system(&self, h: f64) -> Result<TdsSystem> {
        match (&self.source, &self.system_json) {
            (SystemSource::Builtin { id, lambda }, _) => {
                let (a, ad) = crate::model::example_matrices(*id, *lambda)?;
                TdsSystem::new(a, ad, h, self.tol.rank_tol)
            }
            (SystemSource::Json(_), Some(text)) => {
                TdsSystem::from_json(text, self.tol.rank_tol)
                    .map_err(input_error)?
                    .with_delay(h)
            }
            _ => unreachable!("JSON source without text"),
        }
    }

    fn delays(&self, default: &[f64]) -> Vec<f64> {
        self.hs
            .clone()
            .or_else(|| self.file_h.map(|h| vec![h]))
            .unwrap_or_else(|| default.to_vec())
    }

    fn single_delay(&self, default: f64) -> Result<f64> {
        let hs = self.delays(&[default]);
        if hs.len() != 1 {
            return Err(Error::Input("this command takes a single --h".into()));
        }
        Ok(hs[0])
    }

    fn single_order(&self, default: usize) -> Result<usize> {
        match self.orders.as_deref() {
            None => Ok(default),
            Some([n]) => Ok(*n),
            Some(_) => Err(Error::Input("this command takes a single --n".into())),
        }
    }

    fn builtin_id(&self) -> Option<u8> {
        match self.source {
            SystemSource::Builtin { id, .. } => Some(id),
            SystemSource::Json(_) => None,
        }
    }
}

fn input_error(e: Error) -> Error {
    match e {
        Error::Json(j) => Error::Input(format!("system JSON: {j}")),
        other => other,
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::IllPosed { .. } | Error::Overflow(_) | Error::Eigen(_) | Error::Backend(_) => EXIT_INDETERMINATE,
        Error::InfeasibleAtLowerBound { .. } => EXIT_NEGATIVE,
        _ => EXIT_INPUT,
    }
}

/// JSON number rounded to 12 significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round12(x))
    } else {
        Value::Null
    }
}

/// Command output plus its exit code.
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

/// Parses `args` (including the program name) and runs the command,
/// writing to stdout/stderr. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            let _ = std::io::stdout().flush();
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let (args, f): (&CommonArgs, fn(&RunConfig) -> Result<Outcome>) = match &cli.command {
        Command::MaxDelay(a) => (a, cmd_max_delay),
        Command::Nstar(a) => (a, cmd_nstar),
        Command::Region(a) => (a, cmd_region),
        Command::Certificate(a) => (a, cmd_certificate),
        Command::LyapCheck(a) => (a, cmd_lyap_check),
        Command::Roots(a) => (a, cmd_roots),
    };
    let cfg = RunConfig::from_args(args)?;
    let needs_system = !matches!(cli.command, Command::Region(_)) && !(matches!(cli.command, Command::Nstar(_)) && cfg.grid.is_some());
    if needs_system && !cfg.has_system(args) {
        return Err(Error::Input("one of --example or --system is required".into()));
    }
    let out = f(&cfg)?;
    if let Some(path) = &cfg.out {
        if !matches!(cli.command, Command::Region(_)) {
            std::fs::write(path, &out.text)?;
            return Ok(Outcome { text: String::new(), code: out.code });
        }
    }
    Ok(out)
}

fn expected_table1(id: Option<u8>, n: usize) -> Option<Option<f64>> {
    match (id?, n) {
        (1, 1) => Some(Some(0.577)),
        (1, 2) | (1, 3) => Some(Some(0.604)),
        (2, 1) => Some(None),
        (2, 2) => Some(Some(1.600)),
        (2, 3) => Some(Some(1.603)),
        _ => None,
    }
}

const DASH: &str = "−";

pub fn cmd_max_delay(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.backend != Backend::Ipm {
        return Err(Error::Input("max-delay needs an optimizing backend (--backend ipm)".into()));
    }
    let orders = cfg.orders.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let (lo, hi) = match (cfg.hs.as_deref(), cfg.scan.is_some()) {
        (None, _) => (0.01, 5.0),
        (Some([lo, hi]), false) => (*lo, *hi),
        (Some(_), false) => return Err(Error::Input("--h for max-delay is the bracket lo,hi".into())),
        (Some(_), true) => return Err(Error::Input("--h and --scan are exclusive".into())),
    };
    let ipm = InteriorPoint::default();
    let sys = cfg.system(hi)?;
    let mut rows = Vec::new();
    for &n in &orders {
        let r = match &cfg.scan {
            Some(hs) => max_delay_scan(&sys, n, hs, &ipm, &cfg.tol)?,
            None => match max_delay(&sys, n, lo, hi, &ipm, &cfg.tol) {
                Ok(r) => Some(r),
                Err(Error::InfeasibleAtLowerBound { .. }) => None,
                Err(e) => return Err(e),
            },
        };
        rows.push((n, r));
    }
    let id = cfg.builtin_id();
    let text = match cfg.format {
        OutputFormat::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|(n, r)| {
                    let mut o = json!({
                        "n": n,
                        "h_max": r.as_ref().map_or(Value::Null, |r| num(r.h_max)),
                        "iterations": r.as_ref().map_or(0, |r| r.iterations),
                        "hit_upper": r.as_ref().is_some_and(|r| r.hit_upper),
                    });
                    if let Some(e) = expected_table1(id, *n) {
                        o["expected"] = e.map_or(Value::Null, num);
                    }
                    o
                })
                .collect();
            serde_json::to_string_pretty(&v)? + "\n"
        }
        fmt => {
            let csv = fmt == OutputFormat::Csv;
            let mut s = String::new();
            if csv {
                s.push_str("n,h_max,iterations,expected\n");
            } else {
                let _ = writeln!(s, "{:>3} {:>10} {:>7} {:>9}", "n", "h_max", "iters", "expected");
            }
            for (n, r) in &rows {
                let h = r.as_ref().map_or(DASH.to_string(), |r| {
                    if csv { fmt_num(r.h_max) } else { format!("{:.4}", r.h_max) }
                });
                let it = r.as_ref().map_or(0, |r| r.iterations);
                let e = match expected_table1(id, *n) {
                    Some(Some(v)) => format!("{v:.3}"),
                    Some(None) => DASH.into(),
                    None => String::new(),
                };
                if csv {
                    let _ = writeln!(s, "{n},{h},{it},{e}");
                } else {
                    let _ = writeln!(s, "{n:>3} {h:>10} {it:>7} {e:>9}");
                }
            }
            s
        }
    };
    Ok(Outcome { text, code: EXIT_OK })
}

struct NStarRow {
    h: f64,
    nstar: Result<crate::converse::NStar>,
    n_emp: Option<Option<usize>>,
}

pub fn cmd_nstar(cfg: &RunConfig) -> Result<Outcome> {
    if let Some(grid) = &cfg.grid {
        let cells = nstar_sweep(grid, &cfg.tol);
        let mut buf = Vec::new();
        write_nstar_csv(&cells, &mut buf)?;
        let code = if cells.iter().any(|c| c.illposed) { EXIT_INDETERMINATE } else { EXIT_OK };
        return Ok(Outcome { text: String::from_utf8(buf).expect("utf-8"), code });
    }
    let hs = cfg.delays(&[0.1, 0.5, 1.0, 2.0]);
    let mut rows = Vec::new();
    for &h in &hs {
        let sys = cfg.system(h)?;
        let nstar = estimate_n_star(&sys, &cfg.tol);
        let n_emp = match cfg.n_emp {
            Some(max) => {
                let k = build_kernel(&sys, &WeightTriple::balanced(&sys), &cfg.tol)
                    .and_then(|k| empirical_order(&k, max, &cfg.tol));
                Some(k.unwrap_or(None))
            }
            None => None,
        };
        rows.push(NStarRow { h, nstar, n_emp });
    }
    let failed = rows.iter().any(|r| r.nstar.is_err());
    let text = match cfg.format {
        OutputFormat::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let mut o = match &r.nstar {
                        Ok(ns) => json!({
                            "h": num(r.h),
                            "nstar": num(ns.value),
                            "display": fmt_order(ns.value),
                            "rho": [num(ns.rho1), num(ns.rho2), num(ns.rho3)],
                            "eta": ns.eta.iter().map(|&e| num(e)).collect::<Vec<_>>(),
                        }),
                        Err(e) => json!({ "h": num(r.h), "nstar": null, "error": e.to_string() }),
                    };
                    if let Some(ne) = r.n_emp {
                        o["n_emp"] = ne.map_or(Value::Null, |n| json!(n));
                    }
                    o
                })
                .collect();
            serde_json::to_string_pretty(&v)? + "\n"
        }
        fmt => {
            let csv = fmt == OutputFormat::Csv;
            let mut s = String::new();
            if csv {
                s.push_str("h,Nstar,display,n_emp\n");
            } else {
                let _ = writeln!(s, "{:>8} {:>10} {:>6}", "h", "N*", "n_emp");
            }
            for r in &rows {
                let (exact, disp) = match &r.nstar {
                    Ok(ns) => (fmt_num(ns.value), fmt_order(ns.value)),
                    Err(Error::IllPosed { .. }) => (String::new(), "ill-posed".into()),
                    Err(_) => (String::new(), "overflow".into()),
                };
                let ne = match r.n_emp {
                    Some(Some(n)) => n.to_string(),
                    Some(None) => DASH.into(),
                    None => String::new(),
                };
                if csv {
                    let _ = writeln!(s, "{},{exact},{disp},{ne}", fmt_num(r.h));
                } else {
                    let _ = writeln!(s, "{:>8} {disp:>10} {ne:>6}", fmt_num(r.h));
                }
            }
            s
        }
    };
    Ok(Outcome { text, code: if failed { EXIT_INDETERMINATE } else { EXIT_OK } })
}

/// Writes `region.csv` (feasibility per order plus the spectral verdict) and
/// `nstar.csv` into the `--out` directory (default: current directory).
pub fn cmd_region(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.format == OutputFormat::Json {
        return Err(Error::Input("region writes CSV only".into()));
    }
    if cfg.backend != Backend::Ipm {
        return Err(Error::Input("region needs --backend ipm".into()));
    }
    let grid = match &cfg.grid {
        Some(g) => g.clone(),
        None => parse_grid(DEFAULT_GRID)?,
    };
    let orders = cfg.orders.clone().unwrap_or_else(|| vec![1, 2]);
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let ipm = InteriorPoint::default();

    let oracle: Vec<Stability> = sweep_pool().install(|| {
        grid.cells()
            .par_iter()
            .map(|&(l, h)| {
                builtin_example(3, Some(l), h)
                    .and_then(|s| is_stable(&s, cfg.tol.spectrum_margin))
                    .map_or(Stability::Boundary, |c| c.verdict)
            })
            .collect()
    });
    let region_path = dir.join("region.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&region_path)?);
    writeln!(f, "lambda,h,n,verdict,margin,oracle")?;
    let mut unsound = 0usize;
    let mut indeterminate = 0usize;
    for &n in &orders {
        let cells = region_sweep(&grid, n, &ipm, &cfg.tol);
        for (c, o) in cells.iter().zip(&oracle) {
            if c.verdict == Verdict::Feasible && *o == Stability::Unstable {
                unsound += 1;
            }
            if c.verdict == Verdict::Indeterminate {
                indeterminate += 1;
            }
            writeln!(
                f,
                "{},{},{},{},{},{}",
                fmt_num(c.lambda),
                fmt_num(c.h),
                c.n,
                c.verdict.as_str(),
                fmt_num(c.margin),
                o.as_str()
            )?;
        }
    }
    f.flush()?;
    let nstar_path = dir.join("nstar.csv");
    write_nstar_csv(&nstar_sweep(&grid, &cfg.tol), std::io::BufWriter::new(std::fs::File::create(&nstar_path)?))?;
    let text = format!(
        "wrote {} and {}\n{} cells x {} orders, {} indeterminate, {} feasible-but-unstable\n",
        display(&region_path),
        display(&nstar_path),
        grid.lambdas.len() * grid.hs.len(),
        orders.len(),
        indeterminate,
        unsound
    );
    let code = if indeterminate > 0 { EXIT_INDETERMINATE } else { EXIT_OK };
    Ok(Outcome { text, code })
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn report_json(r: &FeasibilityReport) -> Value {
    json!({
        "n": r.n,
        "verdict": r.verdict.as_str(),
        "margin": num(r.margin),
        "margins": r.margins.map(|m| json!({
            "phi_plus": num(m.phi_plus),
            "phi_minus": num(m.phi_minus),
            "R": num(m.r),
            "S": num(m.s),
        })),
        "solver_margin": r.solver_margin.map_or(Value::Null, num),
        "iterations": r.iterations,
        "backend_status": r.backend_status,
    })
}

fn rounded_certificate(c: &Certificate) -> Value {
    let mut v = c.to_json_value();
    for key in ["P", "R", "S"] {
        if let Some(Value::Array(rows)) = v.get_mut(key) {
            for row in rows.iter_mut() {
                if let Value::Array(xs) = row {
                    for x in xs.iter_mut() {
                        *x = num(x.as_f64().unwrap_or(f64::NAN));
                    }
                }
            }
        }
    }
    v
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Feasible => EXIT_OK,
        Verdict::Infeasible => EXIT_NEGATIVE,
        Verdict::Indeterminate => EXIT_INDETERMINATE,
    }
}

pub fn cmd_certificate(cfg: &RunConfig) -> Result<Outcome> {
    let h = cfg.single_delay(0.3)?;
    let sys = cfg.system(h)?;
    let report = match (cfg.backend, &cfg.certificate) {
        (Backend::EigenCheck, Some(path)) => {
            let cert = Certificate::from_json(&std::fs::read_to_string(path)?).map_err(input_error)?;
            verify_certificate(&sys, &cert, &cfg.tol)?
        }
        (Backend::EigenCheck, None) => {
            return Err(Error::Input("--backend eigen-check needs --certificate <json>".into()));
        }
        (Backend::Ipm, _) => {
            let n = cfg.single_order(1)?;
            match cfg.mode {
                Mode::Solver => solve_feasibility(&sys, n, &InteriorPoint::default(), &cfg.tol)?,
                Mode::Converse => {
                    let w = weight_triple(cfg.weights.unwrap_or(Weights::Balanced), &sys);
                    let kernel = build_kernel(&sys, &w, &cfg.tol)?;
                    let cert = build_certificate(&kernel, n, &cfg.tol)?;
                    verify_certificate(&sys, &cert, &cfg.tol)?
                }
            }
        }
    };
    let out = json!({
        "h": num(h),
        "certificate": report.certificate.as_ref().map(rounded_certificate),
        "report": report_json(&report),
    });
    Ok(Outcome {
        text: serde_json::to_string_pretty(&out)? + "\n",
        code: verdict_code(report.verdict),
    })
}

fn weight_triple(w: Weights, sys: &TdsSystem) -> WeightTriple {
    match w {
        Weights::Identity => WeightTriple::identity(sys.nx, sys.nz),
        Weights::Balanced => WeightTriple::balanced(sys),
    }
}

pub fn cmd_lyap_check(cfg: &RunConfig) -> Result<Outcome> {
    let h = cfg.single_delay(0.3)?;
    let sys = cfg.system(h)?;
    let w = weight_triple(cfg.weights.unwrap_or(Weights::Identity), &sys);
    let kernel = build_kernel(&sys, &w, &cfg.tol)?;
    let r = residuals(&kernel, 201)?;
    let v = serde_json::to_value(r)?;
    let rounded: serde_json::Map<String, Value> = v
        .as_object()
        .expect("struct")
        .iter()
        .map(|(k, x)| (k.clone(), if x.is_f64() { num(x.as_f64().unwrap_or(f64::NAN)) } else { x.clone() }))
        .collect();
    let out = json!({ "h": num(h), "residuals": rounded });
    Ok(Outcome { text: serde_json::to_string_pretty(&out)? + "\n", code: EXIT_OK })
}

pub fn cmd_roots(cfg: &RunConfig) -> Result<Outcome> {
    let h = cfg.single_delay(0.5)?;
    let sys = cfg.system(h)?;
    let check = is_stable(&sys, cfg.tol.spectrum_margin)?;
    let e = &check.estimate;
    let out = json!({
        "h": num(h),
        "abscissa": num(e.abscissa),
        "verdict": check.verdict.as_str(),
        "converged": e.converged,
        "collocation_order": e.collocation_order,
        "roots": e.top(5).iter().map(|&(re, im)| json!([num(re), num(im)])).collect::<Vec<_>>(),
        "diagnostic": check.diagnostic,
    });
    let code = match check.verdict {
        Stability::Stable => EXIT_OK,
        Stability::Unstable => EXIT_NEGATIVE,
        Stability::Boundary => EXIT_INDETERMINATE,
    };
    Ok(Outcome { text: serde_json::to_string_pretty(&out)? + "\n", code })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_specs() {
        assert_eq!(parse_orders("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_orders("2..2").unwrap(), vec![2]);
        assert_eq!(parse_orders("4,6").unwrap(), vec![4, 6]);
        assert!(parse_orders("3..1").is_err());
        assert!(parse_orders("0..2").is_err());
        assert!(parse_orders("x").is_err());
    }

    #[test]
    fn scans_and_grids() {
        let s = parse_scan("0.05:3:0.05").unwrap();
        assert_eq!(s.len(), 60);
        assert_eq!(*s.last().unwrap(), 3.0);
        let g = parse_grid("0.1:10:10,0.3:3:10").unwrap();
        assert_eq!(g.cells().len(), 100);
        assert!(parse_grid("0.1:10:0,0.3:3:10").is_err());
        assert!(parse_grid("0.1:10:3").is_err());
    }

    #[test]
    fn tolerances_must_be_positive() {
        let cli = Cli::try_parse_from(["x", "roots", "--example", "1", "--tol-root", "-1"]).unwrap();
        assert!(matches!(run(&cli), Err(Error::Input(_))));
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code_for(&Error::IllPosed { cond: 1e13 }), EXIT_INDETERMINATE);
        assert_eq!(exit_code_for(&Error::Input("x".into())), EXIT_INPUT);
    }
}
