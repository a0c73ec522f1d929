//! Command-line front end: `compute` evaluates every component at given
//! points, `verify` runs the numeric suites over seeded samples.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::chart::{Chart, Point, Var};
use crate::config::{self, ConfigError, LoadedSpace, Tolerances};
use crate::error::{EvalError, GeometryError};
use crate::expr::{record_derivatives, Expr};
use crate::hamilton::{decompose_electrodynamic, Body};
use crate::report::{check_json, point_json, tensor_json, to_json_string, VERSION};
use crate::tensor::{DTensor, TensorEvaluator};
use crate::torsion_curvature::{curvature_components, torsion_components, ConnectionPack};
use crate::verify::{self, AffineChartMap, Check, ResidualReport};

#[derive(Debug, Parser)]
#[command(
    name = "dualjet",
    version,
    about = "Geometry of quadratic polymomenta Hamiltonians on dual 1-jet spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate N, the Cartan coefficients, torsions and curvatures at points.
    Compute(ComputeArgs),
    /// Run the verification suites on seeded sample points.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `t=1.0,x=0.5:0.7,p=1:0:0:0` (lists a-major for p) or `x1=0.5,p2_1=0,...`; repeatable.
    #[arg(long = "point", required = true)]
    pub points: Vec<String>,
    /// `var=lo:hi:count`; repeatable, expands every point over the product grid.
    #[arg(long = "grid")]
    pub grid: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Defaults to the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key=value` tolerance override; repeatable.
    #[arg(long = "tol")]
    pub tol: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "inject-fault", hide = true)]
    pub inject_fault: Option<Fault>,
}

/// Deliberate corruptions used to exercise failure paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Perturbs `H^1_11` by 1e-3.
    Hc,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("at point {point}: {source}")]
    Domain {
        point: String,
        #[source]
        source: GeometryError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Geometry(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Domain { .. } | CliError::Geometry(_) => 3,
        }
    }
}

fn describe(chart: Chart, pt: &Point) -> String {
    chart
        .vars()
        .into_iter()
        .map(|v| format!("{v}={}", pt.get(v)))
        .collect::<Vec<_>>()
        .join(",")
}

fn list(values: &str, expected: usize, key: &str) -> Result<Vec<f64>, CliError> {
    let parsed: Result<Vec<f64>, _> = values.split(':').map(|s| s.trim().parse::<f64>()).collect();
    match parsed {
        Ok(v) if v.len() == expected && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(CliError::Usage(format!(
            "point: {key} needs {expected} finite value(s) separated by ':'"
        ))),
    }
}

/// Parses `--point`; every chart variable must receive a value.
pub fn parse_point(spec: &str, chart: Chart) -> Result<Point, CliError> {
    let mut values: BTreeMap<Var, f64> = BTreeMap::new();
    for token in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("point: expected key=value, got {token:?}")))?;
        let key = key.trim();
        let vars: Vec<Var> = match key {
            "t" => chart.temporal_vars().collect(),
            "x" => chart.spatial_vars().collect(),
            "p" => chart.momentum_vars().collect(),
            name => vec![chart
                .lookup(name)
                .ok_or_else(|| CliError::Usage(format!("point: {name} is not a variable of this chart")))?],
        };
        for (v, x) in vars.iter().zip(list(value, vars.len(), key)?) {
            values.insert(*v, x);
        }
    }
    let mut pt = Point::zeros(chart);
    for v in chart.vars() {
        let x = values
            .get(&v)
            .ok_or_else(|| CliError::Usage(format!("point: missing value for {v}")))?;
        pt.set(v, *x);
    }
    Ok(pt)
}

/// Parses one `--grid` axis `var=lo:hi:count`.
pub fn parse_grid_axis(spec: &str, chart: Chart) -> Result<(Var, Vec<f64>), CliError> {
    let bad = || CliError::Usage(format!("grid: expected var=lo:hi:count, got {spec:?}"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let v = chart
        .lookup(name.trim())
        .ok_or_else(|| CliError::Usage(format!("grid: {} is not a variable of this chart", name.trim())))?;
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, count] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if count == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    let values = (0..count)
        .map(|k| {
            if count == 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (count - 1) as f64
            }
        })
        .collect();
    Ok((v, values))
}

fn expand_grid(points: Vec<Point>, axes: &[(Var, Vec<f64>)]) -> Vec<Point> {
    axes.iter().fold(points, |acc, (v, values)| {
        acc.iter()
            .flat_map(|pt| {
                values.iter().map(move |&x| {
                    let mut q = pt.clone();
                    q.set(*v, x);
                    q
                })
            })
            .collect()
    })
}

/// Every tensor the compute report contains, by name.
pub fn component_tensors(loaded: &LoadedSpace) -> Result<BTreeMap<String, DTensor>, CliError> {
    let space = &loaded.space;
    let pack = ConnectionPack::build(space)?;
    let torsion = torsion_components(space, &pack);
    let curvature = curvature_components(space, &pack);
    let mut out = BTreeMap::new();
    out.insert("nlc.N1".to_string(), pack.nlc.n1.clone());
    out.insert("nlc.N2".to_string(), pack.nlc.n2.clone());
    if let Some(t) = &pack.t_aux {
        out.insert("nlc.T".to_string(), t.clone());
    }
    out.insert("cartan.chi".to_string(), pack.coeffs.chi.clone());
    out.insert("cartan.A".to_string(), pack.coeffs.a.clone());
    out.insert("cartan.H".to_string(), pack.coeffs.hc.clone());
    out.insert("cartan.C".to_string(), pack.coeffs.c.clone());
    out.insert("christoffel.Gamma".to_string(), pack.gamma.clone());
    out.insert("christoffel.frak_R".to_string(), pack.frak.clone());
    for set in [torsion, curvature] {
        out.extend(set.named);
        out.extend(set.zero_cells.into_iter().map(|(k, cell)| (k, cell.tensor)));
    }
    Ok(out)
}

fn config_json(loaded: &LoadedSpace) -> Value {
    let chart = loaded.space.chart();
    json!({
        "name": loaded.name,
        "sha256": loaded.hash,
        "m": chart.m(),
        "n": chart.n(),
        "branch": if chart.m() == 1 { "single-time" } else { "multi-time" },
    })
}

fn check_points(loaded: &LoadedSpace, pts: &[Point]) -> Result<(), CliError> {
    let chart = loaded.space.chart();
    for pt in pts {
        if let Some(v) = loaded.boxes.first_violation(chart, pt) {
            let (lo, hi) = loaded.boxes.get(v);
            return Err(CliError::Usage(format!(
                "point {}: {v} lies outside its sample box [{lo}, {hi}]",
                describe(chart, pt)
            )));
        }
        loaded.space.check_point(pt).map_err(|source| CliError::Domain {
            point: describe(chart, pt),
            source,
        })?;
    }
    Ok(())
}

pub fn compute_report(loaded: &LoadedSpace, pts: &[Point]) -> Result<Value, CliError> {
    check_points(loaded, pts)?;
    let chart = loaded.space.chart();
    let tensors = component_tensors(loaded)?;
    let names: Vec<&String> = tensors.keys().collect();
    let refs: Vec<&DTensor> = tensors.values().collect();
    let evaluator = TensorEvaluator::new(&refs);
    let mut entries = Vec::new();
    for pt in pts {
        let values = evaluator.evaluate(pt).map_err(|e| CliError::Domain {
            point: describe(chart, pt),
            source: e.into(),
        })?;
        let components: Map<String, Value> = names
            .iter()
            .zip(&values)
            .map(|(name, t)| (name.to_string(), tensor_json(t)))
            .collect();
        entries.push(json!({ "point": point_json(chart, pt), "components": components }));
    }
    Ok(json!({ "version": VERSION, "config": config_json(loaded), "points": entries }))
}

/// Checks that need a precondition the space does not meet.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Verification {
    pub report: ResidualReport,
    pub skipped: Vec<String>,
}

fn perturb(t: &DTensor, idx: &[usize], delta: f64) -> DTensor {
    DTensor::from_fn(t.chart(), t.sig().clone(), |i| {
        if i == idx {
            t.get(i) + delta
        } else {
            t.get(i).clone()
        }
    })
}

/// All suites on `samples` points drawn from the config's boxes with `seed`.
pub fn run_verification(
    loaded: &LoadedSpace,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
    fault: Option<Fault>,
) -> Result<Verification, CliError> {
    if samples == 0 {
        return Err(CliError::Usage("samples must be at least 1".into()));
    }
    let space = &loaded.space;
    let chart = space.chart();
    let pts = loaded.boxes.sample_points(chart, seed, samples);
    check_points(loaded, &pts)?;
    let mut out = Verification::default();
    let report = &mut out.report;

    let (built, records) = record_derivatives(|| -> Result<_, GeometryError> {
        let pack = ConnectionPack::build(space)?;
        let torsion = torsion_components(space, &pack);
        let curvature = curvature_components(space, &pack);
        Ok((pack, torsion, curvature))
    });
    let (mut pack, torsion, curvature) = built?;
    if fault == Some(Fault::Hc) {
        pack.coeffs.hc = perturb(&pack.coeffs.hc, &[0, 0, 0], 1e-3);
    }

    report.extend(verify::metric_condition_suite(space, &pack, &pts, tol.get("metric"))?);

    if space.is_electrodynamic() || chart.m() >= 2 {
        report.extend(verify::reduction_equivalence_check(
            space,
            &pts,
            tol.get("reduction"),
            tol.get("dual_path"),
        )?);
    } else {
        match decompose_electrodynamic(space, &pts) {
            Ok(parts) => {
                report.extend(verify::reduction_equivalence_check(
                    space,
                    &pts,
                    tol.get("reduction"),
                    tol.get("dual_path"),
                )?);
                let reassembled = parts.reassemble(space.h());
                let residual = max_scalar_difference(&reassembled, space.hamiltonian(), &pts)?;
                report.push(Check::new(
                    "decomposition.reassemble",
                    residual,
                    pts.len(),
                    tol.get("decomposition"),
                ));
            }
            Err(GeometryError::NonQuadratic { .. }) => {
                out.skipped
                    .push("reduction.N2_dual_path: the Hamiltonian is not quadratic in p".into());
                out.skipped
                    .push("decomposition.reassemble: the Hamiltonian is not quadratic in p".into());
            }
            Err(e) => return Err(e.into()),
        }
    }

    for map in AffineChartMap::builtin(chart) {
        report.push(verify::nlc_transformation_check(
            space,
            &map,
            &pts,
            tol.get("transform"),
        )?);
    }

    report.extend(verify::verify_table_zeros(
        &[&torsion, &curvature],
        &pts,
        tol.get("zero"),
    )?);
    report.extend(verify::verify_identities(
        &[&torsion, &curvature],
        &pts,
        tol.get("identity"),
    )?);
    report.extend(verify::antisymmetry_suite(
        &pack,
        &torsion,
        &curvature,
        &pts,
        tol.get("antisymmetry"),
    )?);

    let regularity = space.check_kronecker_regularity(&pts, tol.get("regularity"))?;
    report.push(Check::new(
        "regularity.kronecker",
        regularity.max_residual,
        regularity.samples_used,
        tol.get("regularity"),
    ));

    report.push(Check::new(
        "homogeneity.N1",
        verify::homogeneity_residual(&pack.nlc.n1, -1.7, &pts)?,
        pts.len(),
        tol.get("identity"),
    ));
    if let Some(r_ab) = torsion.get("torsion.R_ab") {
        report.push(Check::new(
            "homogeneity.torsion.R_ab",
            verify::homogeneity_residual(r_ab, -1.7, &pts)?,
            pts.len(),
            tol.get("identity"),
        ));
    }

    if let Body::Electrodynamic(data) = space.body() {
        if data.u.is_structurally_zero() {
            let r_ij = torsion.get("torsion.R_ij").expect("every table names R_ij");
            let oracle = DTensor::from_fn(chart, r_ij.sig().clone(), |i| {
                let (r, ii, j, f) = (i[0], i[1], i[2], i[3]);
                -Expr::sum((0..chart.n()).map(|k| pack.frak.get(&[k, r, ii, j]) * Expr::var(Var::P { i: k, a: f })))
            });
            let residual = verify::max_abs_difference(r_ij, &oracle, &pts)?;
            report.push(Check::new("oracle.R_ij_U0", residual, pts.len(), tol.get("oracle")));
        }
    }

    report.push(verify::fd_check_records(
        &records,
        chart,
        &pts,
        tol.get("fd_eps"),
        tol.get("fd"),
    )?);
    Ok(out)
}

fn max_scalar_difference(a: &Expr, b: &Expr, pts: &[Point]) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for pt in pts {
        worst = worst.max((a.evaluate(pt)? - b.evaluate(pt)?).abs());
    }
    Ok(worst)
}

pub fn verification_json(loaded: &LoadedSpace, samples: usize, seed: u64, tol: &Tolerances, v: &Verification) -> Value {
    json!({
        "version": VERSION,
        "config": config_json(loaded),
        "samples": samples,
        "seed": seed,
        "tolerances": tol.as_map(),
        "checks": v.report.checks.iter().map(check_json).collect::<Vec<_>>(),
        "skipped": v.skipped,
        "pass": v.report.all_pass(),
    })
}

fn write_report(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn cmd_compute(args: &ComputeArgs) -> Result<u8, CliError> {
    let loaded = config::load(&args.config)?;
    let chart = loaded.space.chart();
    let points = args
        .points
        .iter()
        .map(|s| parse_point(s, chart))
        .collect::<Result<Vec<_>, _>>()?;
    let axes = args
        .grid
        .iter()
        .map(|s| parse_grid_axis(s, chart))
        .collect::<Result<Vec<_>, _>>()?;
    let points = expand_grid(points, &axes);
    let report = compute_report(&loaded, &points)?;
    write_report(&args.out, &to_json_string(&report))?;
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, CliError> {
    let loaded = config::load(&args.config)?;
    let mut tol = loaded.tolerances.clone();
    for spec in &args.tol {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("tol: expected key=value, got {spec:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("tol: {key} needs a number")))?;
        tol.set(key.trim(), value)?;
    }
    let seed = args.seed.unwrap_or(loaded.seed);
    let verification = run_verification(&loaded, args.samples, seed, &tol, args.inject_fault)?;
    for c in &verification.report.checks {
        println!(
            "{}  {:<40} max={:.3e} tol={:.1e} n={}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.max_residual,
            c.tol,
            c.samples
        );
    }
    for s in &verification.skipped {
        println!("SKIP  {s}");
    }
    if let Some(out) = &args.out {
        let json = verification_json(&loaded, args.samples, seed, &tol, &verification);
        write_report(out, &to_json_string(&json))?;
    }
    Ok(if verification.report.all_pass() { 0 } else { 1 })
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Compute(args) => cmd_compute(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
