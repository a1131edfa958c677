//! Command-line front end. Every subcommand renders its result to a string,
//! written once at the end to `--output` or stdout.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::perturbation::{fd_derivative, first_order, jacobian_at_zero};
use crate::pinning::{certify, solve_pinning, PinningProblem};
use crate::radial_potential::StepPotential;
use crate::report::fmt_f64;
use crate::sector_solver::{default_tol, multiplicity_count};
use crate::splitting::{splitting_scan, toeplitz_eigs, trace_check, Sign};

#[derive(Debug, Parser)]
#[command(name = "landau", version, about = "Landau levels under radial step potentials")]
pub struct Cli {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-sector eigenvalues near 2bq as CSV.
    Spectrum(SpectrumArgs),
    /// Eigenvalues of the disk Toeplitz operator as CSV.
    Toeplitz(ToeplitzArgs),
    /// First-order derivative against Richardson finite differences, as JSON.
    DerivCheck(DerivArgs),
    /// Jacobi matrix of the rescaled map at zero coupling, as JSON.
    Jacobian(JacobianArgs),
    /// Solve a pinning problem and write its certificate.
    Pin(PinArgs),
    /// Recompute a certificate for a given potential.
    Certify(CertifyArgs),
    /// Splitting evidence for a one-signed disk potential as CSV.
    SplitCheck(SplitArgs),
}

#[derive(Debug, Args)]
pub struct Field {
    #[arg(long)]
    pub b: f64,
    #[arg(long, default_value_t = 0)]
    pub q: u64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub field: Field,
    /// First (or only) sector.
    #[arg(long, allow_hyphen_values = true)]
    pub m: i64,
    /// Last sector of the scan; defaults to `m`.
    #[arg(long, allow_hyphen_values = true)]
    pub m_max: Option<i64>,
    /// StepPotential JSON.
    #[arg(long)]
    pub potential: PathBuf,
    /// Eigenvalue tolerance; defaults to 1e-10 b.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ToeplitzArgs {
    #[command(flatten)]
    pub field: Field,
    #[arg(long)]
    pub r: f64,
    /// Defaults to `-q`.
    #[arg(long, allow_hyphen_values = true)]
    pub m_min: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m_max: i64,
}

#[derive(Debug, Args)]
pub struct DerivArgs {
    #[command(flatten)]
    pub field: Field,
    #[arg(long, allow_hyphen_values = true)]
    pub m: i64,
    #[arg(long)]
    pub potential: PathBuf,
    /// Finite-difference step in the coupling.
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
}

#[derive(Debug, Args)]
pub struct JacobianArgs {
    #[command(flatten)]
    pub field: Field,
    #[arg(long = "N")]
    pub n: u32,
    #[arg(long, default_value_t = 4)]
    pub pairs: usize,
}

#[derive(Debug, Args)]
pub struct PinArgs {
    /// PinningProblem JSON.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub field: Field,
    #[arg(long)]
    pub potential: PathBuf,
    /// Comma-separated sectors expected on the level.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub pinned: Vec<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m_min: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m_max: i64,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub field: Field,
    /// `+` or `-`.
    #[arg(long, allow_hyphen_values = true, default_value = "+")]
    pub sign: String,
    /// Disk height.
    #[arg(long)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Either `t1,t2,...` or `lo:hi:count`.
    #[arg(long, default_value = "0.1,0.5,1")]
    pub t_grid: String,
    #[arg(long, allow_hyphen_values = true)]
    pub m_min: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m_max: i64,
}

/// Parsed JSON input of a subcommand.
#[derive(Clone, Debug, PartialEq)]
pub enum InputDoc {
    Potential(StepPotential),
    Problem(PinningProblem),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    Potential,
    Problem,
}

/// Schema-checks a JSON document; unknown fields are rejected.
pub fn validate_input(text: &str, kind: InputKind) -> Result<InputDoc> {
    match kind {
        InputKind::Potential => Ok(InputDoc::Potential(StepPotential::from_json(text)?)),
        InputKind::Problem => Ok(InputDoc::Problem(PinningProblem::from_json(text)?)),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_potential(path: &Path) -> Result<StepPotential> {
    match validate_input(&read(path)?, InputKind::Potential)? {
        InputDoc::Potential(v) => Ok(v),
        InputDoc::Problem(_) => unreachable!(),
    }
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Domain(format!("--{name} must be finite and positive, got {x}")))
    }
}

fn tol_or_default(tol: Option<f64>, b: f64) -> Result<f64> {
    match tol {
        Some(t) => positive("tol", t),
        None => Ok(default_tol(b)),
    }
}

/// `t1,t2,...` or `lo:hi:count` (inclusive, evenly spaced).
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Domain(format!("malformed t grid {text:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, count] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let count: usize = count.trim().parse().map_err(|_| bad())?;
            match count {
                0 => return Err(bad()),
                1 => vec![lo],
                _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
            }
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

#[derive(Serialize)]
struct DerivReport {
    q: u64,
    m: i64,
    b: f64,
    h: f64,
    first_order: f64,
    fd_derivative: f64,
    relative_error: f64,
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Runs a subcommand and renders its output.
pub fn run(command: &Command) -> Result<String> {
    match command {
        Command::Spectrum(a) => {
            let b = positive("b", a.field.b)?;
            let v = read_potential(&a.potential)?;
            v.check_sup_norm_below(b, "sector solver window")?;
            let tol = tol_or_default(a.tol, b)?;
            let m_max = a.m_max.unwrap_or(a.m);
            let report = multiplicity_count(b, a.field.q, &v, a.m..=m_max, tol)?;
            Ok(report.to_csv())
        }
        Command::Toeplitz(a) => {
            let b = positive("b", a.field.b)?;
            let r = positive("r", a.r)?;
            let q = a.field.q;
            let spectrum = toeplitz_eigs(b, q, r, a.m_min.unwrap_or(-(q as i64)), a.m_max)?;
            let trace = trace_check(&spectrum)?;
            let mut out = String::from("m,lambda\n");
            for (m, lambda) in &spectrum.lambdas {
                out.push_str(&format!("{m},{}\n", fmt_f64(*lambda)));
            }
            eprintln!(
                "trace: partial {} target {} tail bound {:e}",
                fmt_f64(trace.partial_sum),
                fmt_f64(trace.target),
                trace.tail_bound
            );
            Ok(out)
        }
        Command::DerivCheck(a) => {
            let b = positive("b", a.field.b)?;
            let h = positive("h", a.h)?;
            let v = read_potential(&a.potential)?;
            let analytic = first_order(a.field.q, a.m, b, &v)?;
            let numeric = fd_derivative(a.field.q, a.m, b, &v, h)?;
            Ok(json(&DerivReport {
                q: a.field.q,
                m: a.m,
                b,
                h,
                first_order: analytic,
                fd_derivative: numeric,
                relative_error: (analytic - numeric).abs() / numeric.abs().max(1e-12),
            }))
        }
        Command::Jacobian(a) => {
            let b = positive("b", a.field.b)?;
            let mut s = jacobian_at_zero(a.n, a.pairs, a.field.q, b)?.to_json();
            s.push('\n');
            Ok(s)
        }
        Command::Pin(a) => {
            let problem = match validate_input(&read(&a.input)?, InputKind::Problem)? {
                InputDoc::Problem(p) => p,
                InputDoc::Potential(_) => unreachable!(),
            };
            let (_, cert) = solve_pinning(&problem)?;
            Ok(json(&cert))
        }
        Command::Certify(a) => {
            let b = positive("b", a.field.b)?;
            let v = read_potential(&a.potential)?;
            v.check_sup_norm_below(b, "sector solver window")?;
            let tol = tol_or_default(a.tol, b)?;
            let q = a.field.q;
            let range = a.m_min.unwrap_or(-(q as i64))..=a.m_max;
            Ok(json(&certify(&v, b, q, &a.pinned, range, tol)?))
        }
        Command::SplitCheck(a) => {
            let b = positive("b", a.field.b)?;
            let sign: Sign = a.sign.parse()?;
            let grid = parse_grid(&a.t_grid)?;
            let q = a.field.q;
            let range = a.m_min.unwrap_or(-(q as i64))..=a.m_max;
            let table = splitting_scan(b, q, sign, a.c, a.r, &grid, range)?;
            table.check()?;
            Ok(table.to_csv())
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn dispatch(cli: &Cli) -> i32 {
    let result = run(&cli.command).and_then(|text| match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
