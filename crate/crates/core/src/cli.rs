//! The `ew` command line: argument parsing, config files, the six commands
//! and their CSV/JSON rendering.
//!
//! Every command builds a [`Report`] (parameters, a table, a summary) that is
//! rendered either as CSV with trailing `# key=value` summary lines or as a
//! JSON document matching the schema under `schemas/`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::approx::{
    approx_shape, bound_constants, certify_joint, certify_marginal, joint_mass, GridSpec, RatioSetting,
    MIN_MARGINAL_PANELS,
};
use crate::dist::{beta_cdf, beta_sample, f_proportion_sample, FParams, MvtParams};
use crate::elemental::{
    all_weights, binomial, generate_design, parse_matrix_csv, simulate_weights, DesignMatrix, SimulationMode,
    DEFAULT_CAP,
};
use crate::error::{domain, Error, Result};
use crate::goftests::{
    ad_one_sample, ad_two_sample, ks_one_sample, ks_statistic, ks_two_sample, Alpha, EmpiricalCdf,
};
use crate::product::{mean_neg_log, omega_moment, omega_sample, OmegaLaw, ProductSpec};
use crate::rng::{Seed, GENERATOR};
use crate::specfun::RealPos;

/// The parameter grid used by `gof-table` when no file is given.
pub const DEFAULT_GOF_GRID: &str = include_str!("../data/gof_grid.csv");

#[derive(Debug, Parser)]
#[command(name = "ew", version, about = "Beta approximation to F-variate proportions and elemental regression weights")]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// File of key=value lines setting defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Also write a gnuplot script plotting the CSV output.
    #[arg(long, global = true)]
    pub gnuplot_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    All,
    Sampled,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw W = Y1/(Y1 + Y2) for Y1 ~ F(m1, nu), Y2 ~ F(m2, nu).
    #[command(args_override_self = true)]
    SimulateW {
        #[arg(long)]
        m1: f64,
        #[arg(long)]
        m2: f64,
        #[arg(long)]
        nu: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Empirical distribution of W against the approximating Beta on a grid.
    #[command(args_override_self = true)]
    CompareCdf {
        #[arg(long)]
        m1: f64,
        #[arg(long)]
        m2: f64,
        #[arg(long)]
        nu: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        grid_points: usize,
    },
    /// KS and Anderson-Darling replications over a grid of (m1, m2, nu).
    #[command(args_override_self = true)]
    GofTable {
        /// CSV with header m1,m2,nu; the built-in 30-row grid when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        replications: usize,
        /// Test W against the Beta distribution function instead of a Beta sample.
        #[arg(long)]
        one_sample: bool,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
    },
    /// Numeric law of the product of Beta factors against simulation.
    #[command(args_override_self = true)]
    Omega {
        #[arg(long)]
        rho: u32,
        #[arg(long)]
        n2: u32,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
    },
    /// Elemental weights of a given matrix, or of simulated t designs.
    #[command(args_override_self = true)]
    Elemental {
        /// Headerless CSV design matrix.
        #[arg(long, conflicts_with_all = ["rho", "l"])]
        matrix: Option<PathBuf>,
        #[arg(long, requires = "l")]
        rho: Option<u32>,
        #[arg(long, default_value_t = 50.0)]
        nu: f64,
        /// Rows per simulated design.
        #[arg(long, requires = "rho")]
        l: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        n_matrices: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::All)]
        mode: ModeArg,
        /// Use a constant column plus rho t-distributed columns.
        #[arg(long)]
        intercept: bool,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
    },
    /// Grid certificates for the joint and marginal bounds.
    #[command(args_override_self = true)]
    CertifyBounds {
        #[arg(long)]
        m1: f64,
        #[arg(long)]
        m2: f64,
        /// Shared denominator degrees of freedom.
        #[arg(long, required_unless_present_all = ["nu1", "nu2"])]
        nu: Option<f64>,
        #[arg(long)]
        nu1: Option<f64>,
        #[arg(long)]
        nu2: Option<f64>,
        #[arg(long, default_value_t = 200)]
        u_points: usize,
        #[arg(long, default_value_t = 1e-3)]
        u_min: f64,
        #[arg(long, default_value_t = 1e3)]
        u_max: f64,
        #[arg(long, default_value_t = 99)]
        w_points: usize,
        #[arg(long, default_value_t = 1e-9)]
        slack: f64,
        /// Initial quadrature panels for the marginal density.
        #[arg(long, default_value_t = MIN_MARGINAL_PANELS)]
        quad_nodes: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SimulateW { .. } => "simulate-w",
            Command::CompareCdf { .. } => "compare-cdf",
            Command::GofTable { .. } => "gof-table",
            Command::Omega { .. } => "omega",
            Command::Elemental { .. } => "elemental",
            Command::CertifyBounds { .. } => "certify-bounds",
        }
    }
}

const COMMANDS: [&str; 6] = ["simulate-w", "compare-cdf", "gof-table", "omega", "elemental", "certify-bounds"];

/// Output of one command.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub seed: u64,
    pub parameters: Map<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Map<String, Value>,
}

fn num(x: f64) -> Value {
    json!(x)
}

fn set_label(indices: &[usize]) -> String {
    indices.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" ")
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Report {
    fn new(command: &'static str, seed: u64, parameters: Value, columns: Vec<&'static str>) -> Self {
        let parameters = match parameters {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self { command, seed, parameters, columns, rows: Vec::new(), summary: Map::new() }
    }

    fn note(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn to_json(&self) -> String {
        let doc = json!({
            "command": self.command,
            "generator": GENERATOR,
            "seed": self.seed,
            "parameters": self.parameters,
            "columns": self.columns,
            "rows": self.rows,
            "summary": self.summary,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell)).map_err(io)?;
        }
        let mut out = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .expect("csv output is utf-8");
        for (k, v) in &self.summary {
            out.push_str(&format!("# {k}={}\n", cell(v)));
        }
        Ok(out)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    RealPos::new(v).map(RealPos::get).map_err(|_| Error::Domain(format!("--{name} must be positive, got {v}")))
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v < min {
        return domain(format!("--{name} must be at least {min}, got {v}"));
    }
    Ok(())
}

fn simulate_w(seed: Seed, m1: f64, m2: f64, nu: f64, n: usize) -> Result<Report> {
    let (y1, y2) = (FParams::new(m1, nu)?, FParams::new(m2, nu)?);
    at_least("n", n, 1)?;
    let w = f_proportion_sample(y1, y2, n, seed);
    let mut r = Report::new("simulate-w", seed.0, json!({"m1": m1, "m2": m2, "nu": nu, "n": n}), vec!["w"]);
    let mean = w.iter().sum::<f64>() / n as f64;
    r.rows = w.into_iter().map(|v| vec![num(v)]).collect();
    r.note("n", json!(n));
    r.note("mean", num(mean));
    Ok(r)
}

fn compare_cdf(seed: Seed, m1: f64, m2: f64, nu: f64, n: usize, grid_points: usize) -> Result<Report> {
    RatioSetting::approximating(m1, m2, nu)?;
    at_least("n", n, 1)?;
    at_least("grid-points", grid_points, 1)?;
    let shape = approx_shape(RealPos::new(m2)?);
    let w = f_proportion_sample(FParams::new(m1, nu)?, FParams::new(m2, nu)?, n, seed);
    let e = EmpiricalCdf::new(&w)?;
    let mut r = Report::new(
        "compare-cdf",
        seed.0,
        json!({"m1": m1, "m2": m2, "nu": nu, "n": n, "grid_points": grid_points}),
        vec!["w", "ecdf_W", "beta_cdf", "abs_gap"],
    );
    let mut md: f64 = 0.0;
    for i in 0..=grid_points {
        let x = i as f64 / grid_points as f64;
        let (fe, fb) = (e.eval(x), beta_cdf(x, shape));
        let gap = (fe - fb).abs();
        md = md.max(gap);
        r.rows.push(vec![num(x), num(fe), num(fb), num(gap)]);
    }
    r.note("md", num(md));
    r.note("sup_distance", num(ks_statistic(&e, |x| beta_cdf(x, shape))));
    r.note("beta_alpha", num(shape.alpha));
    r.note("beta_beta", num(shape.beta));
    Ok(r)
}

/// (m1, m2, nu) rows of a grid file, each checked against the approximation regime.
pub fn parse_gof_grid(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Config(format!("grid file: {e}")))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != ["m1", "m2", "nu"] {
        return Err(Error::Config(format!("grid file line 1: header must be m1,m2,nu, found {}", names.join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("grid file: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::Config(format!("grid file line {line}: expected 3 fields, found {}", record.len())));
        }
        let vals: Vec<f64> = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Config(format!("grid file line {line}: '{f}' is not a number"))))
            .collect::<Result<_>>()?;
        let (m1, m2, nu) = (vals[0], vals[1], vals[2]);
        RatioSetting::approximating(m1, m2, nu).map_err(|e| Error::Config(format!("grid file line {line}: {e}")))?;
        rows.push((m1, m2, nu));
    }
    if rows.is_empty() {
        return Err(Error::Config("grid file has no rows".into()));
    }
    Ok(rows)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One (ks, ad) replication of W against the approximating Beta.
pub fn gof_replication(
    m1: f64,
    m2: f64,
    nu: f64,
    n: usize,
    seed: Seed,
    one_sample: bool,
    alpha: Alpha,
) -> Result<(crate::goftests::GofResult, crate::goftests::GofResult)> {
    let shape = approx_shape(RealPos::new(m2)?);
    let w = f_proportion_sample(FParams::new(m1, nu)?, FParams::new(m2, nu)?, n, seed.derive(0));
    if one_sample {
        let cdf = |x: f64| beta_cdf(x, shape);
        Ok((ks_one_sample(&w, cdf, alpha)?, ad_one_sample(&w, cdf, alpha)?))
    } else {
        let b = beta_sample(shape, n, seed.derive(1));
        Ok((ks_two_sample(&w, &b, alpha)?, ad_two_sample(&w, &b, alpha)?))
    }
}

fn gof_table(
    seed: Seed,
    grid: Option<&Path>,
    n: usize,
    replications: usize,
    one_sample: bool,
    alpha: f64,
) -> Result<Report> {
    let alpha = Alpha::from_value(alpha)?;
    at_least("n", n, 2)?;
    at_least("replications", replications, 1)?;
    let text = match grid {
        Some(p) => std::fs::read_to_string(p)?,
        None => DEFAULT_GOF_GRID.to_string(),
    };
    let rows = parse_gof_grid(&text)?;
    let jobs: Vec<(usize, usize)> = (0..rows.len()).flat_map(|i| (0..replications).map(move |r| (i, r))).collect();
    let results: Vec<Result<_>> = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let (m1, m2, nu) = rows[i];
            gof_replication(m1, m2, nu, n, seed.derive(i as u64).derive(rep as u64), one_sample, alpha)
        })
        .collect();
    let mut report = Report::new(
        "gof-table",
        seed.0,
        json!({
            "grid": grid.map(|p| p.display().to_string()),
            "n": n,
            "replications": replications,
            "one_sample": one_sample,
            "alpha": alpha.value(),
        }),
        vec!["m1", "m2", "nu", "n", "rep", "ks", "ks_identical", "ad", "ad_identical"],
    );
    let mut ks_by_row = vec![Vec::with_capacity(replications); rows.len()];
    let mut ad_by_row = vec![Vec::with_capacity(replications); rows.len()];
    let mut crit = (0.0, 0.0);
    for (&(i, rep), res) in jobs.iter().zip(results) {
        let (ks, ad) = res?;
        crit = (ks.critical_value, ad.critical_value);
        let (m1, m2, nu) = rows[i];
        ks_by_row[i].push(ks.statistic);
        ad_by_row[i].push(ad.statistic);
        report.rows.push(vec![
            num(m1),
            num(m2),
            num(nu),
            json!(n),
            json!(rep + 1),
            num(ks.statistic),
            json!(ks.identical),
            num(ad.statistic),
            json!(ad.identical),
        ]);
    }
    let mut identical_rows = 0;
    for (i, &(m1, m2, nu)) in rows.iter().enumerate() {
        let mk = median(&mut ks_by_row[i]);
        let ma = median(&mut ad_by_row[i]);
        if mk < crit.0 {
            identical_rows += 1;
        }
        report.note(&format!("median_ks[{m1},{m2},{nu}]"), num(mk));
        report.note(&format!("median_ad[{m1},{m2},{nu}]"), num(ma));
    }
    report.note("grid_rows", json!(rows.len()));
    report.note("ks_critical", num(crit.0));
    report.note("ad_critical", num(crit.1));
    report.note("rows_with_identical_median_ks", json!(identical_rows));
    Ok(report)
}

fn omega(seed: Seed, rho: u32, n2: u32, n: usize, grid_points: usize) -> Result<Report> {
    let spec = ProductSpec::new(rho, n2)?;
    at_least("n", n, 2)?;
    at_least("grid-points", grid_points, 2)?;
    let law = OmegaLaw::new(spec)?;
    let x = omega_sample(spec, n, seed);
    let e = EmpiricalCdf::new(&x)?;
    let mut r = Report::new(
        "omega",
        seed.0,
        json!({"rho": rho, "n2": n2, "n": n, "grid_points": grid_points}),
        vec!["section", "x", "exact", "monte_carlo", "std_error"],
    );
    let nf = n as f64;
    let mut grid_gap: f64 = 0.0;
    for i in 1..=grid_points {
        let w = i as f64 / grid_points as f64;
        let exact = if i == grid_points { 1.0 } else { law.cdf(w)? };
        let mc = e.eval(w);
        grid_gap = grid_gap.max((exact - mc).abs());
        r.rows.push(vec![json!("cdf"), num(w), num(exact), num(mc), num((mc * (1.0 - mc) / nf).sqrt())]);
    }
    for k in 0..=3 {
        let pw: Vec<f64> = x.iter().map(|v| v.powi(k)).collect();
        let m = pw.iter().sum::<f64>() / nf;
        let var = pw.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nf - 1.0);
        r.rows.push(vec![json!("moment"), json!(k), num(omega_moment(spec, k as f64)?), num(m), num((var / nf).sqrt())]);
    }
    let cdf = |w: f64| if w <= 0.0 { 0.0 } else if w >= 1.0 { 1.0 } else { law.cdf(w).unwrap_or(f64::NAN) };
    let mneg = x.iter().map(|v| -v.ln()).sum::<f64>() / nf;
    r.note("factor_alpha", num(spec.factor_shape().alpha));
    r.note("factor_beta", num(spec.factor_shape().beta));
    r.note("grid_max_gap", num(grid_gap));
    r.note("sup_distance", num(ks_statistic(&e, cdf)));
    r.note("mean_neg_log_exact", num(mean_neg_log(spec)));
    r.note("mean_neg_log_mc", num(mneg));
    r.note("ln_printed_prefactor", num(spec.ln_printed_prefactor()));
    r.note("z_max", num(law.z_max()));
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn elemental(
    seed: Seed,
    matrix: Option<&Path>,
    rho: Option<u32>,
    nu: f64,
    l: Option<usize>,
    n_matrices: usize,
    mode: ModeArg,
    intercept: bool,
    cap: u64,
) -> Result<Report> {
    if let Some(path) = matrix {
        let text = std::fs::read_to_string(path)?;
        let x = DesignMatrix::new(parse_matrix_csv(&text)?)?;
        let weights = all_weights(&x, cap)?;
        let mut r = Report::new(
            "elemental",
            seed.0,
            json!({"matrix": path.display().to_string(), "rows": x.rows(), "cols": x.cols()}),
            vec!["set", "weight", "cumulative_weight"],
        );
        let mut total = 0.0;
        for w in &weights {
            total += w.weight;
            r.rows.push(vec![json!(set_label(&w.indices)), num(w.weight), num(total)]);
        }
        r.note("sets", json!(weights.len()));
        r.note("weight_sum", num(total));
        r.note("cauchy_binet_error", num((total - 1.0).abs()));
        return Ok(r);
    }
    let (Some(rho), Some(l)) = (rho, l) else {
        return Err(Error::Config("elemental needs either --matrix or both --rho and --l".into()));
    };
    if rho == 0 {
        return domain("--rho must be at least 1");
    }
    let nu = positive("nu", nu)?;
    at_least("n-matrices", n_matrices, 1)?;
    let rho_us = rho as usize;
    let dim = if intercept { rho_us } else { rho_us + 1 };
    let p = MvtParams::standard(dim, nu)?;
    let mode_lib = match mode {
        ModeArg::All => SimulationMode::All,
        ModeArg::Sampled => SimulationMode::SampledSets,
    };
    let cols = rho_us + 1;
    if l < cols {
        return domain(format!("--l must be at least rho + 1 = {cols}, got {l}"));
    }
    if mode == ModeArg::All && binomial(l as u64, cols as u64) > cap {
        return Err(Error::Size(format!("C({l}, {cols}) sets per matrix exceed --cap {cap}; use --mode sampled")));
    }
    let sim = simulate_weights(&p, l, n_matrices, seed, mode_lib, intercept)?;
    let mut r = Report::new(
        "elemental",
        seed.0,
        json!({
            "rho": rho, "nu": nu, "l": l, "n_matrices": n_matrices, "intercept": intercept,
            "mode": match mode { ModeArg::All => "all", ModeArg::Sampled => "sampled" },
        }),
        vec!["matrix", "set", "weight"],
    );
    for w in &sim {
        r.rows.push(vec![json!(w.matrix + 1), json!(set_label(&w.indices)), num(w.weight)]);
    }
    // Cauchy–Binet on the simulated designs
    let cb = if mode == ModeArg::All {
        let mut sums = vec![0.0; n_matrices];
        for w in &sim {
            sums[w.matrix] += w.weight;
        }
        sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    } else {
        let x = generate_design(&p, l, intercept, seed.derive(0))?;
        let total: f64 = all_weights(&x, cap)?.iter().map(|w| w.weight).sum();
        (total - 1.0).abs()
    };
    r.note("cauchy_binet_error", num(cb));
    let weights: Vec<f64> = sim.iter().map(|w| w.weight).collect();
    let e = EmpiricalCdf::new(&weights)?;
    for (key, n2) in [("ks_omega_n2_l_minus_rho", l - rho_us), ("ks_omega_n2_l_minus_rho_minus_1", l - cols)] {
        if n2 == 0 {
            r.note(key, Value::Null);
            continue;
        }
        let law = OmegaLaw::new(ProductSpec::new(rho, n2 as u32)?)?;
        let cdf = |w: f64| if w <= 0.0 { 0.0 } else if w >= 1.0 { 1.0 } else { law.cdf(w).unwrap_or(f64::NAN) };
        r.note(key, num(ks_statistic(&e, cdf)));
    }
    r.note("weights", json!(weights.len()));
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn certify_bounds(
    seed: Seed,
    m1: f64,
    m2: f64,
    nu1: f64,
    nu2: f64,
    grid: GridSpec,
    quad_nodes: usize,
) -> Result<Report> {
    let s = RatioSetting::bounding(m1, m2, nu1, nu2)?;
    grid.validate()?;
    let consts = bound_constants(&s)?;
    let joint = certify_joint(&s, &grid)?;
    let marginal = certify_marginal(&s, &grid, quad_nodes)?;
    let mass = joint_mass(&s)?;
    let mut r = Report::new(
        "certify-bounds",
        seed.0,
        json!({
            "m1": m1, "m2": m2, "nu1": nu1, "nu2": nu2,
            "u_points": grid.u_points, "u_min": grid.u_min, "u_max": grid.u_max,
            "w_points": grid.w_points, "slack": grid.slack, "quad_nodes": quad_nodes,
        }),
        vec!["certificate", "bound", "u", "w", "ratio"],
    );
    for v in &joint.violations {
        r.rows.push(vec![json!("joint"), json!(v.bound), v.u.map_or(Value::Null, num), num(v.w), num(v.ratio)]);
    }
    for v in &marginal.violations {
        r.rows.push(vec![json!("marginal"), json!(v.bound), Value::Null, num(v.w), num(v.ratio)]);
    }
    r.note("a1", num(consts.a1));
    r.note("a2", num(consts.a2));
    r.note("a1_at_least_one", json!(consts.a1 >= 1.0));
    r.note("joint_points", json!(joint.points));
    r.note("joint_upper_ratio_min", num(joint.upper_ratio_min));
    r.note("joint_upper_ratio_max", num(joint.upper_ratio_max));
    r.note("joint_lower_ratio_min", num(joint.lower_ratio_min));
    r.note("joint_lower_ratio_max", num(joint.lower_ratio_max));
    r.note("joint_upper_violations", json!(joint.upper_violations));
    r.note("joint_lower_violations", json!(joint.lower_violations));
    r.note("joint_bounds_hold", json!(joint.holds()));
    r.note("joint_mass", num(mass));
    r.note("marginal_points", json!(marginal.points));
    r.note("marginal_ratio_min", num(marginal.ratio_min));
    r.note("marginal_ratio_max", num(marginal.ratio_max));
    r.note("marginal_lower_violations", json!(marginal.lower_violations));
    r.note("marginal_upper_violations", json!(marginal.upper_violations));
    r.note("marginal_sandwich_holds", json!(marginal.holds()));
    Ok(r)
}

/// Runs a parsed command and returns its report.
pub fn execute(cli: &Cli) -> Result<Report> {
    let seed = Seed(cli.global.seed);
    match &cli.command {
        &Command::SimulateW { m1, m2, nu, n } => simulate_w(seed, m1, m2, nu, n),
        &Command::CompareCdf { m1, m2, nu, n, grid_points } => compare_cdf(seed, m1, m2, nu, n, grid_points),
        Command::GofTable { grid, n, replications, one_sample, alpha } => {
            gof_table(seed, grid.as_deref(), *n, *replications, *one_sample, *alpha)
        }
        &Command::Omega { rho, n2, n, grid_points } => omega(seed, rho, n2, n, grid_points),
        Command::Elemental { matrix, rho, nu, l, n_matrices, mode, intercept, cap } => {
            elemental(seed, matrix.as_deref(), *rho, *nu, *l, *n_matrices, *mode, *intercept, *cap)
        }
        &Command::CertifyBounds {
            m1,
            m2,
            nu,
            nu1,
            nu2,
            u_points,
            u_min,
            u_max,
            w_points,
            slack,
            quad_nodes,
        } => {
            let (Some(n1), Some(n2)) = (nu1.or(nu), nu2.or(nu)) else {
                return Err(Error::Config("certify-bounds needs --nu or both --nu1 and --nu2".into()));
            };
            let grid = GridSpec { u_points, u_min, u_max, w_points, slack };
            certify_bounds(seed, m1, m2, n1, n2, grid, quad_nodes)
        }
    }
}

/// Gnuplot script for the CSV written to `data`, for commands with a natural plot.
pub fn gnuplot_script(command: &str, data: &Path) -> Result<String> {
    let d = data.display();
    let body = match command {
        "compare-cdf" => format!(
            "plot '{d}' using 1:2 with steps title 'ECDF of W', '{d}' using 1:3 with lines title 'Beta CDF'\n"
        ),
        "omega" => format!(
            "plot '< grep ^cdf {d}' using 2:3 with lines title 'numeric CDF', \
             '< grep ^cdf {d}' using 2:4 with steps title 'Monte Carlo ECDF'\n"
        ),
        "simulate-w" => format!("binwidth = 0.02\nbin(x) = binwidth * floor(x / binwidth)\n\
             plot '{d}' using (bin($1)):(1.0) smooth frequency with boxes title 'W'\n"),
        other => return Err(Error::Config(format!("--gnuplot-script is not available for {other}"))),
    };
    Ok(format!("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n{body}"))
}

/// Splices `key=value` lines of the `--config` file into `argv` right after
/// the subcommand name, so explicit flags, which come later, take precedence.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)?;
    let mut extra: Vec<OsString> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("{path} line {}: expected key=value", lineno + 1)));
        };
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(Error::Config(format!("{path} line {}: bad key '{key}'", lineno + 1)));
        }
        if key == "config" {
            continue;
        }
        match value {
            "true" => extra.push(format!("--{key}").into()),
            "false" => {}
            v => {
                extra.push(format!("--{key}").into());
                extra.push(v.into());
            }
        }
    }
    let at = strs.iter().skip(1).position(|a| COMMANDS.contains(&a.as_str())).map_or(argv.len(), |p| p + 2);
    let mut out = argv;
    out.splice(at..at, extra);
    Ok(out)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Parses, executes and writes; returns the process exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    if let Ok(v) = std::env::var("EW_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // a second initialization in the same process keeps the first pool
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: EW_THREADS must be a positive integer, got '{v}'");
                return 2;
            }
        }
    }
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = (|| {
        if cli.global.gnuplot_script.is_some() && (cli.global.out.is_none() || cli.global.format != Format::Csv) {
            return Err(Error::Config("--gnuplot-script needs --out and --format csv".into()));
        }
        let report = execute(&cli)?;
        write_output(cli.global.out.as_deref(), &report.render(cli.global.format)?)?;
        if let (Some(script), Some(data)) = (&cli.global.gnuplot_script, &cli.global.out) {
            std::fs::write(script, gnuplot_script(cli.command.name(), data)?)?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
