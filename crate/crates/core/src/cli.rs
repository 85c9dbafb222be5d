//! Command-line front end: argument parsing, command dispatch, and CSV/JSON
//! table output.
//!
//! Every rational is written twice, as an exact `a/b` string and as its
//! nearest binary64 value. Output depends only on the configuration and
//! seed, so identical invocations produce byte-identical files.

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::analysis;
use crate::error::WeaverError;
use crate::exact::{self, DyadicPoint, WeaverParams, DEFAULT_MATERIALIZATION_CAP};
use crate::rational::{self, Rational};
use crate::sampler::{self, ParentDistribution, MAX_DRAW_DEPTH, MIN_REPLICATIONS};

pub const CAP_ENV_VAR: &str = "WEAVER_MATERIALIZATION_CAP";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] WeaverError),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
    #[error("nothing to emit: the table has no rows")]
    EmptyTable,
}

impl CliError {
    /// 1 for usage errors, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Pmf,
    Cdf,
    Triangle,
    Moments,
    Decompose,
    Sample,
    Converge,
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "weaver", about = "Exact tables and Monte Carlo runs for the weaver distribution W(n, p)")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Depth (number of selections); rows 1..=n for decompose and converge.
    #[arg(long = "n")]
    n: u32,
    /// Probability of the second population, as `a/b` or a decimal.
    #[arg(long = "p")]
    p: Option<String>,
    /// Parent populations, e.g. `gauss:0,1;gauss:1,1`.
    #[arg(long)]
    parents: Option<String>,
    #[arg(long = "reps", default_value_t = 10_000)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub n: u32,
    pub p: Option<Rational>,
    pub parents: Option<(ParentDistribution, ParentDistribution)>,
    pub replications: usize,
    pub seed: u64,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub cap: u32,
}

impl RunConfig {
    fn params(&self) -> Result<WeaverParams, CliError> {
        let p = self.p.clone().expect("validated by parse_config");
        Ok(WeaverParams::new(self.n, p)?)
    }
}

/// Parses `argv` (without the program name) under the default cap.
pub fn parse_config<S: AsRef<str>>(argv: &[S]) -> Result<RunConfig, CliError> {
    parse_config_with_cap(argv, DEFAULT_MATERIALIZATION_CAP)
}

pub fn parse_config_with_cap<S: AsRef<str>>(argv: &[S], cap: u32) -> Result<RunConfig, CliError> {
    let args = Args::try_parse_from(std::iter::once("weaver").chain(argv.iter().map(AsRef::as_ref)))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let usage = |msg: String| CliError::Usage(msg);

    let p = match &args.p {
        Some(text) => {
            let p = rational::parse_rational(text).map_err(|e| usage(e.to_string()))?;
            if !rational::is_open_unit(&p) {
                return Err(usage(format!("--p {text}: p must lie strictly inside (0, 1)")));
            }
            Some(p)
        }
        None => None,
    };
    let needs_p = !matches!(args.command, Command::Triangle | Command::Decompose);
    if needs_p && p.is_none() {
        return Err(usage(format!("{:?} requires --p", args.command).to_lowercase()));
    }

    let min_n = if args.command == Command::Triangle { 0 } else { 1 };
    if args.n < min_n {
        return Err(usage(format!("--n must be at least {min_n}")));
    }
    let max_n = match args.command {
        Command::Pmf | Command::Cdf | Command::Triangle | Command::Density => Some(cap),
        Command::Sample => Some(MAX_DRAW_DEPTH),
        Command::Moments | Command::Decompose | Command::Converge => None,
    };
    if let Some(max) = max_n {
        if args.n > max {
            return Err(usage(format!("--n {} exceeds the limit of {max} for this command", args.n)));
        }
    }

    if args.replications == 0 {
        return Err(usage("--reps must be at least 1".into()));
    }
    if args.command == Command::Sample && args.replications < MIN_REPLICATIONS {
        return Err(usage(format!("sample needs --reps of at least {MIN_REPLICATIONS}")));
    }

    let parents = args
        .parents
        .as_deref()
        .map(parse_parents)
        .transpose()
        .map_err(usage)?;

    Ok(RunConfig {
        command: args.command,
        n: args.n,
        p,
        parents,
        replications: args.replications,
        seed: args.seed,
        format: args.format,
        output: args.output,
        cap,
    })
}

/// Parses `family:params;family:params`.
///
/// Families: `point:v`, `bernoulli:q` or `bernoulli:q,low,high`,
/// `uniform:a,b`, `gauss:mean,variance`.
pub fn parse_parents(spec: &str) -> Result<(ParentDistribution, ParentDistribution), String> {
    let parts: Vec<&str> = spec.split(';').collect();
    if parts.len() != 2 {
        return Err(format!("--parents {spec:?}: expected two populations separated by ';'"));
    }
    Ok((parse_parent(parts[0])?, parse_parent(parts[1])?))
}

fn parse_parent(spec: &str) -> Result<ParentDistribution, String> {
    let (family, params) = spec
        .trim()
        .split_once(':')
        .ok_or_else(|| format!("parent {spec:?}: expected family:parameters"))?;
    let values: Vec<f64> = params
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("parent {spec:?}: parameters must be numbers"))?;
    let arity = |n: usize| {
        if values.len() == n {
            Ok(())
        } else {
            Err(format!("parent {spec:?}: {family} takes {n} parameter(s)"))
        }
    };
    let parent = match family.trim().to_ascii_lowercase().as_str() {
        "point" | "point-mass" | "pointmass" | "dirac" => {
            arity(1)?;
            ParentDistribution::point_mass(values[0])
        }
        "bernoulli" | "bern" => match values.len() {
            1 => ParentDistribution::bernoulli(values[0]),
            3 => ParentDistribution::two_point(values[0], values[1], values[2]),
            _ => return Err(format!("parent {spec:?}: bernoulli takes 1 or 3 parameters")),
        },
        "uniform" | "unif" => {
            arity(2)?;
            ParentDistribution::uniform(values[0], values[1])
        }
        "gauss" | "gaussian" | "normal" => {
            arity(2)?;
            ParentDistribution::gaussian(values[0], values[1])
        }
        other => return Err(format!("unknown parent family {other:?}")),
    };
    parent.map_err(|e| e.to_string())
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(BigInt),
    Rational(Rational),
    Real(f64),
    Text(String),
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<BigUint> for Cell {
    fn from(v: BigUint) -> Self {
        Cell::Int(v.into())
    }
}

impl From<Rational> for Cell {
    fn from(v: Rational) -> Self {
        Cell::Rational(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Named columns and rows of cells. Rational columns expand to
/// `<name>_exact,<name>_approx` in CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn real_text(v: f64) -> String {
    format!("{v}")
}

fn render_csv(table: &Table) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let first = &table.rows[0];
    let mut header = Vec::new();
    for (name, cell) in table.columns.iter().zip(first) {
        match cell {
            Cell::Rational(_) => {
                header.push(format!("{name}_exact"));
                header.push(format!("{name}_approx"));
            }
            _ => header.push(name.clone()),
        }
    }
    let flush = |e: csv::Error| CliError::Io(io::Error::other(e));
    writer.write_record(&header).map_err(flush)?;
    for row in &table.rows {
        let mut record = Vec::with_capacity(header.len());
        for cell in row {
            match cell {
                Cell::Int(v) => record.push(v.to_string()),
                Cell::Rational(r) => {
                    record.push(rational::format_fraction(r));
                    record.push(real_text(rational::to_f64(r)));
                }
                Cell::Real(v) => record.push(real_text(*v)),
                Cell::Text(t) => record.push(t.clone()),
            }
        }
        writer.write_record(&record).map_err(flush)?;
    }
    writer
        .into_inner()
        .map_err(|e| CliError::Io(io::Error::other(e.to_string())))
}

fn json_number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn render_json(table: &Table) -> Result<Vec<u8>, CliError> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let mut obj = Map::new();
            for (name, cell) in table.columns.iter().zip(row) {
                let value = match cell {
                    Cell::Int(v) => v
                        .to_i64()
                        .map(Value::from)
                        .or_else(|| v.to_u64().map(Value::from))
                        .unwrap_or_else(|| Value::String(v.to_string())),
                    Cell::Rational(r) => {
                        let mut pair = Map::new();
                        pair.insert("exact".into(), Value::String(rational::format_fraction(r)));
                        pair.insert("approx".into(), json_number(rational::to_f64(r)));
                        Value::Object(pair)
                    }
                    Cell::Real(v) => json_number(*v),
                    Cell::Text(t) => Value::String(t.clone()),
                };
                obj.insert(name.clone(), value);
            }
            Value::Object(obj)
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&Value::Array(rows)).map_err(|e| CliError::Io(e.into()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn render_table(table: &Table, format: Format) -> Result<Vec<u8>, CliError> {
    if table.rows.is_empty() {
        return Err(CliError::EmptyTable);
    }
    match format {
        Format::Csv => render_csv(table),
        Format::Json => render_json(table),
    }
}

/// Writes the table to `output`, or to `stdout` when no path is given.
pub fn emit_table(table: &Table, format: Format, output: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let bytes = render_table(table, format)?;
    match output {
        Some(path) => File::create(path)?.write_all(&bytes)?,
        None => stdout.write_all(&bytes)?,
    }
    Ok(())
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.to_possible_value().expect("no skipped variants");
        f.write_str(name.get_name())
    }
}

fn describe(parent: &ParentDistribution) -> String {
    match parent {
        ParentDistribution::PointMass { value } => format!("point:{value}"),
        ParentDistribution::Bernoulli { q, low, high } => format!("bernoulli:{q},{low},{high}"),
        ParentDistribution::Uniform { low, high } => format!("uniform:{low},{high}"),
        ParentDistribution::Gaussian { mean, variance } => format!("gauss:{mean},{variance}"),
    }
}

/// Builds the table for a validated configuration.
pub fn build_table(config: &RunConfig) -> Result<Table, CliError> {
    match config.command {
        Command::Pmf => pmf_table(config),
        Command::Cdf => cdf_table(config),
        Command::Triangle => triangle_table(config),
        Command::Moments => moments_table(config),
        Command::Decompose => decompose_table(config),
        Command::Sample => sample_table(config),
        Command::Converge => converge_table(config),
        Command::Density => density_table(config),
    }
}

fn pmf_table(config: &RunConfig) -> Result<Table, CliError> {
    let params = config.params()?;
    let dist = exact::build_pmf_vector_capped(&params, config.cap)?;
    let mut table = Table::new(&["k", "y", "p"]);
    for (k, mass) in dist.pmf().expect("materialized").iter().enumerate() {
        let k = k as u64;
        table.push(vec![k.into(), exact::realization_value(k, params.n())?.into(), mass.clone().into()]);
    }
    Ok(table)
}

fn cdf_table(config: &RunConfig) -> Result<Table, CliError> {
    let params = config.params()?;
    exact::check_cap(params.n(), config.cap)?;
    let mut table = Table::new(&["k", "v", "cdf"]);
    for k in 0..=(1u128 << params.n()) {
        let point = DyadicPoint::new(k, params.n())?;
        table.push(vec![
            Cell::Int(k.into()),
            point.value().into(),
            exact::cdf_at_dyadic(point, &params)?.into(),
        ]);
    }
    Ok(table)
}

fn triangle_table(config: &RunConfig) -> Result<Table, CliError> {
    let odds = config.p.as_ref().map(|p| p / (Rational::from_integer(1.into()) - p));
    let mut columns = vec!["level", "k", "exponent", "row_sum"];
    if odds.is_some() {
        columns.push("f_power");
    }
    let mut table = Table::new(&columns);
    for level in 0..=config.n {
        let row = exact::geometric_triangle_row_capped(level, config.cap)?;
        let sum = exact::exponent_sum(level);
        for (k, &e) in row.iter().enumerate() {
            let mut cells: Vec<Cell> = vec![level.into(), (k as u64).into(), e.into(), sum.clone().into()];
            if let Some(f) = &odds {
                cells.push(num_traits::pow(f.clone(), e as usize).into());
            }
            table.push(cells);
        }
    }
    Ok(table)
}

fn moments_table(config: &RunConfig) -> Result<Table, CliError> {
    let params = config.params()?;
    let (merged_mean, merged_var) = analysis::merged_variable_stats(&params);
    let mut table = Table::new(&["quantity", "value"]);
    let mut add = |name: &str, value: Rational| table.push(vec![name.to_string().into(), value.into()]);
    add("mean", analysis::exact_mean(&params));
    add("variance", analysis::exact_variance(&params));
    add("variance_ratio", analysis::variance_ratio(params.n()));
    add("limit_variance", analysis::limit_variance(params.p())?);
    add("merged_mean", merged_mean);
    add("merged_variance", merged_var);
    if params.n() <= config.cap {
        for j in 2..=4 {
            add(&format!("moment_{j}"), analysis::exact_moment_capped(&params, j, config.cap)?);
        }
    }
    Ok(table)
}

fn decompose_table(config: &RunConfig) -> Result<Table, CliError> {
    let p = config.p.clone().unwrap_or_else(|| rational::frac(1, 2));
    let mut columns = vec!["n", "width", "denom", "weaving", "merging", "weaving_share", "merging_share"];
    if config.p.is_some() {
        columns.extend(["weaving_variance", "merging_variance"]);
    }
    let mut table = Table::new(&columns);
    for n in 1..=config.n {
        let row = analysis::variance_decomposition(n, &p)?;
        let width = (BigUint::from(1u32) << n as usize) - BigUint::from(1u32);
        let mut cells: Vec<Cell> = vec![
            n.into(),
            width.into(),
            row.denom.clone().into(),
            row.weaving.clone().into(),
            row.merging.clone().into(),
            row.weaving_share.clone().into(),
            row.merging_share.clone().into(),
        ];
        if config.p.is_some() {
            cells.push(row.weaving_variance().into());
            cells.push(row.merging_variance().into());
        }
        table.push(cells);
    }
    Ok(table)
}

fn sample_table(config: &RunConfig) -> Result<Table, CliError> {
    let params = config.params()?;
    let (h0, h1) = match &config.parents {
        Some((h0, h1)) => sampler::standardize_parents(h0, h1)?,
        None => (ParentDistribution::point_mass(0.0)?, ParentDistribution::point_mass(1.0)?),
    };
    let report = sampler::monte_carlo_moments(params.n(), &h0, &h1, params.p(), config.replications, config.seed)?;
    let mut table = Table::new(&[
        "n",
        "p",
        "parent0",
        "parent1",
        "replications",
        "seed",
        "empirical_mean",
        "empirical_variance",
        "exact_mean",
        "exact_variance",
        "standard_error",
        "z_score",
        "variance_standard_error",
        "variance_z_score",
    ]);
    table.push(vec![
        params.n().into(),
        params.p().clone().into(),
        describe(&h0).into(),
        describe(&h1).into(),
        (report.replications as u64).into(),
        report.seed.into(),
        report.empirical_mean.into(),
        report.empirical_variance.into(),
        report.exact_mean.clone().into(),
        report.exact_variance.into(),
        report.standard_error.into(),
        report.z_score.into(),
        report.variance_standard_error.into(),
        report.variance_z_score.into(),
    ]);
    Ok(table)
}

fn converge_table(config: &RunConfig) -> Result<Table, CliError> {
    let params = config.params()?;
    let third = rational::frac(1, 3);
    let mut table = Table::new(&["n", "variance", "variance_ratio", "gap_to_limit"]);
    for n in 1..=config.n {
        let at = params.with_depth(n)?;
        let ratio = analysis::variance_ratio(n);
        table.push(vec![
            n.into(),
            analysis::exact_variance(&at).into(),
            ratio.clone().into(),
            (ratio - &third).into(),
        ]);
    }
    Ok(table)
}

fn density_table(config: &RunConfig) -> Result<Table, CliError> {
    let params = config.params()?;
    exact::check_cap(params.n(), config.cap)?;
    let mut table = Table::new(&["k", "lower", "upper", "density", "density_log_space"]);
    for k in 0..(1u64 << params.n()) {
        let lower = DyadicPoint::new(k as u128, params.n())?;
        let upper = DyadicPoint::new(k as u128 + 1, params.n())?;
        table.push(vec![
            k.into(),
            lower.value().into(),
            upper.value().into(),
            analysis::local_density_exact(k, &params)?.into(),
            analysis::local_density(k, &params)?.into(),
        ]);
    }
    Ok(table)
}

/// Resolves the materialization cap from the environment override. Returns
/// the cap and, when overridden, the warning to print.
pub fn cap_from_env(value: Option<&str>) -> Result<(u32, Option<String>), CliError> {
    match value {
        None => Ok((DEFAULT_MATERIALIZATION_CAP, None)),
        Some(v) => {
            let cap: u32 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{CAP_ENV_VAR}={v:?} is not a non-negative integer")))?;
            if cap > 63 {
                return Err(CliError::Usage(format!("{CAP_ENV_VAR}={cap} exceeds the hard limit of 63")));
            }
            let warning = format!(
                "warning: {CAP_ENV_VAR}={cap} overrides the default materialization cap of {DEFAULT_MATERIALIZATION_CAP}"
            );
            Ok((cap, Some(warning)))
        }
    }
}

/// Full CLI run; returns the process exit status.
pub fn run_cli<S: AsRef<str>>(argv: &[S], cap_env: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let is_info = argv
        .iter()
        .any(|a| matches!(a.as_ref(), "-h" | "--help" | "-V" | "--version"));
    if is_info {
        return match Args::try_parse_from(std::iter::once("weaver").chain(argv.iter().map(AsRef::as_ref))) {
            Err(e) if !e.use_stderr() => {
                let _ = write!(stdout, "{e}");
                0
            }
            _ => {
                let _ = writeln!(stderr, "error: unexpected arguments");
                1
            }
        };
    }
    let result = cap_from_env(cap_env).and_then(|(cap, warning)| {
        if let Some(w) = warning {
            let _ = writeln!(stderr, "{w}");
        }
        let config = parse_config_with_cap(argv, cap)?;
        let table = build_table(&config)?;
        emit_table(&table, config.format, config.output.as_deref(), stdout)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
