//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::One;
use serde::Serialize;

use crate::area::{area_grid, area_polar, AreaReport};
use crate::family::{builtin_by_name, load_config, FamilySpec, FamilySummary};
use crate::lattice::{count_dz_records, enumerate_f, summarize, write_records, RecordFormat};
use crate::lmfdb::{short_ainvs, LmfdbClient};
use crate::localdensity::{
    density_closed, density_def, density_via_c, euler_product, DefMethod, DensityReport, DensitySource,
    EulerReport, GoldenCache,
};
use crate::predict::{default_ladder, fit_counts, matching_builtin, ratio_table, verify_paper};

#[derive(Parser, Debug)]
#[command(name = "entangle-census", version, about = "Census of elliptic curves in entangled one-parameter families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    /// Built-in family: F1 or F2
    #[arg(long, conflicts_with = "config")]
    family: Option<String>,
    /// JSON family description
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Never touch the network
    #[arg(long)]
    offline: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DensityMethodArg {
    Closed,
    Def,
    Structured,
    ViaC,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AreaMethodArg {
    Polar,
    Grid,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a family and print its invariants
    CheckFamily {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        output: Output,
    },
    /// List every pair of height at most X
    Enumerate {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long = "X", value_parser = parse_height)]
        x: BigInt,
        /// Only minimal, coprime, nonsingular members
        #[arg(long)]
        minimal_only: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Counts of F(X), D(X), C(X)
    Count {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long = "X", value_parser = parse_height, conflicts_with = "ladder")]
        x: Option<BigInt>,
        #[arg(long, value_parser = parse_ladder)]
        ladder: Option<Ladder>,
        /// Also count D^z(X) for this prime bound
        #[arg(long)]
        z: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Local density at one prime
    Density {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        ell: u64,
        #[arg(long, value_enum, default_value = "closed")]
        method: DensityMethodArg,
        #[command(flatten)]
        output: Output,
    },
    /// Euler product up to z with its tail bracket
    Euler {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        z: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Area of the real region
    Area {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum, default_value = "polar")]
        method: AreaMethodArg,
        /// Grid resolution for the grid method
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Predicted against actual counts along a height ladder
    Predict {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_parser = parse_ladder)]
        ladder: Option<Ladder>,
        #[arg(long, default_value_t = 1000)]
        z: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Growth exponent of #F(X) and #C(X) over a ladder
    Fit {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_parser = parse_ladder)]
        ladder: Option<Ladder>,
        #[command(flatten)]
        output: Output,
    },
    /// Reproduce the published values for a built-in family
    VerifyPaper {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Resolve a curve in the online database
    LmfdbCheck {
        /// a-invariants a1,a2,a3,a4,a6
        #[arg(long, value_parser = parse_ainvs, allow_hyphen_values = true, default_value = "0,-1,0,-1033,-12438")]
        ainvs: Ainvs,
        /// Label the curve is expected to have
        #[arg(long, default_value = "100a3")]
        expect: String,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Clone, Debug)]
struct Ladder(Vec<BigInt>);

#[derive(Clone, Debug)]
struct Ainvs([BigInt; 5]);

/// Decimal integer, or `10^k` / `1eK` shorthand for powers of ten.
fn parse_height(s: &str) -> Result<BigInt, String> {
    let s = s.trim();
    let pow10 = |e: &str| e.parse::<u32>().map(|e| BigInt::from(10).pow(e)).map_err(|e| format!("{s:?}: {e}"));
    let x = if let Some(e) = s.strip_prefix("10^") {
        pow10(e)?
    } else if let Some((m, e)) = s.split_once(['e', 'E']) {
        m.parse::<BigInt>().map_err(|e| format!("{s:?}: {e}"))? * pow10(e)?
    } else {
        s.parse::<BigInt>().map_err(|e| format!("{s:?}: {e}"))?
    };
    if x < BigInt::one() {
        return Err(format!("height must be at least 1, got {s}"));
    }
    Ok(x)
}

fn parse_ladder(s: &str) -> Result<Ladder, String> {
    let xs = s.split(',').map(parse_height).collect::<Result<Vec<_>, _>>()?;
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err("ladder must be strictly ascending".into());
    }
    Ok(Ladder(xs))
}

fn parse_ainvs(s: &str) -> Result<Ainvs, String> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<BigInt>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let arr: [BigInt; 5] = v.try_into().map_err(|v: Vec<BigInt>| format!("need 5 a-invariants, got {}", v.len()))?;
    Ok(Ainvs(arr))
}

enum Failure {
    Usage(String),
    Data(String),
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

/// Rendered output and whether every check in it passed.
struct Outcome {
    text: String,
    passed: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, passed: true }
    }
}

fn load_family(f: &FamilyArgs) -> Result<FamilySpec, Failure> {
    match (&f.family, &f.config) {
        (Some(name), None) => builtin_by_name(name).map_err(|e| Failure::Usage(format!("--family: {e}"))),
        (None, Some(path)) => load_config(path).map_err(data),
        (None, None) => Err(Failure::Usage("one of --family or --config is required".into())),
        (Some(_), Some(_)) => Err(Failure::Usage("--family and --config are exclusive".into())),
    }
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(data)
}

fn no_csv(output: &Output, cmd: &str) -> Result<(), Failure> {
    if output.format == Some(Format::Csv) {
        return Err(Failure::Usage(format!("--format csv is not available for {cmd}")));
    }
    Ok(())
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(data)?;
    for r in rows {
        w.write_record(r).map_err(data)?;
    }
    String::from_utf8(w.into_inner().map_err(data)?).map_err(data)
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 1 when a check or computation fails, 2 on usage
/// errors.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                return 2;
            }
            let _ = stdout.write_all(text.as_bytes());
            return 0;
        }
    };
    let output = output_of(&cli.command).clone();
    let body = || dispatch(&cli.command, &output);
    let result = match output.threads {
        Some(0) => Err(Failure::Usage("--threads must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(body),
            Err(e) => Err(data(e)),
        },
        None => body(),
    };
    match result {
        Ok(out) => {
            if let Err(e) = emit(&output, &out.text, stdout) {
                let _ = writeln!(stderr, "error: {e}");
                return 1;
            }
            if out.passed {
                0
            } else {
                1
            }
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            2
        }
        Err(Failure::Data(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            1
        }
    }
}

fn emit(output: &Output, text: &str, stdout: &mut dyn Write) -> std::io::Result<()> {
    match &output.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(text.as_bytes())?;
            w.flush()
        }
        None => stdout.write_all(text.as_bytes()),
    }
}

fn output_of(c: &Command) -> &Output {
    match c {
        Command::CheckFamily { output, .. }
        | Command::Enumerate { output, .. }
        | Command::Count { output, .. }
        | Command::Density { output, .. }
        | Command::Euler { output, .. }
        | Command::Area { output, .. }
        | Command::Predict { output, .. }
        | Command::Fit { output, .. }
        | Command::VerifyPaper { output, .. }
        | Command::LmfdbCheck { output, .. } => output,
    }
}

fn ladder_or_default(ladder: &Option<Ladder>, spec: &FamilySpec) -> Vec<BigInt> {
    ladder.as_ref().map(|l| l.0.clone()).unwrap_or_else(|| default_ladder(spec.d))
}

#[derive(Serialize)]
struct CountRow {
    #[serde(flatten)]
    summary: crate::lattice::CountSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    count_dz: Option<u64>,
}

#[derive(Serialize)]
struct FitReport {
    family: String,
    expected: f64,
    points: Vec<(String, u64, u64)>,
    fit_f: Option<crate::predict::ExponentFit<f64>>,
    fit_c: Option<crate::predict::ExponentFit<f64>>,
}

#[derive(Serialize)]
struct LmfdbReport {
    ainvs: Vec<String>,
    expected: String,
    found: Option<crate::lmfdb::CurveLookup>,
    passed: bool,
}

fn dispatch(command: &Command, output: &Output) -> Result<Outcome, Failure> {
    match command {
        Command::CheckFamily { family, .. } => {
            no_csv(output, "check-family")?;
            let spec = load_family(family)?;
            json(&FamilySummary::new(&spec)).map(Outcome::ok)
        }
        Command::Enumerate { family, x, minimal_only, .. } => {
            let spec = load_family(family)?;
            let records = enumerate_f(&spec, x).map_err(data)?;
            let format = match output.format {
                Some(Format::Csv) => RecordFormat::Csv,
                _ => RecordFormat::Jsonl,
            };
            let mut buf = Vec::new();
            let kept = records.iter().filter(|r| !minimal_only || r.in_c());
            write_records(kept, &mut buf, format).map_err(data)?;
            String::from_utf8(buf).map(Outcome::ok).map_err(data)
        }
        Command::Count { family, x, ladder, z, .. } => {
            let spec = load_family(family)?;
            let xs = match (x, ladder) {
                (Some(x), _) => vec![x.clone()],
                (None, Some(l)) => l.0.clone(),
                (None, None) => return Err(Failure::Usage("one of --X or --ladder is required".into())),
            };
            let rows = xs
                .iter()
                .map(|x| {
                    let records = enumerate_f(&spec, x).map_err(data)?;
                    Ok(CountRow { summary: summarize(x, &records), count_dz: z.map(|z| count_dz_records(&records, z)) })
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            if output.format == Some(Format::Csv) {
                let table: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.summary.x.to_string(),
                            r.summary.count_f.to_string(),
                            r.count_dz.map(|v| v.to_string()).unwrap_or_default(),
                            r.summary.count_d.to_string(),
                            r.summary.count_c.to_string(),
                            r.summary.distinct_models.to_string(),
                        ]
                    })
                    .collect();
                return csv_table(&["X", "count_F", "count_Dz", "count_D", "count_C", "distinct_models"], &table)
                    .map(Outcome::ok);
            }
            if x.is_some() {
                json(&rows[0]).map(Outcome::ok)
            } else {
                json(&rows).map(Outcome::ok)
            }
        }
        Command::Density { family, ell, method, .. } => {
            let spec = load_family(family)?;
            let cache = GoldenCache::from_env().ok();
            let v = match method {
                DensityMethodArg::Closed => density_closed(&spec, *ell, cache.as_ref()),
                DensityMethodArg::Def => density_def(&spec, *ell, DefMethod::Auto),
                DensityMethodArg::Structured => density_def(&spec, *ell, DefMethod::Structured),
                DensityMethodArg::ViaC => density_via_c(&spec, *ell),
            }
            .map_err(data)?;
            let report = DensityReport::new(&spec.name, &v);
            match output.format {
                None => Ok(Outcome::ok(format!("{}\n", v.value))),
                Some(Format::Json) => json(&report).map(Outcome::ok),
                Some(Format::Csv) => csv_table(
                    &["family", "ell", "method", "num", "den"],
                    &[vec![report.family, report.ell.to_string(), report.method, report.value.num, report.value.den]],
                )
                .map(Outcome::ok),
            }
        }
        Command::Euler { family, z, .. } => {
            no_csv(output, "euler")?;
            let spec = load_family(family)?;
            let cache = GoldenCache::from_env().ok();
            let b = euler_product(&spec, *z, DensitySource::Closed, cache.as_ref()).map_err(data)?;
            json(&EulerReport::new(&spec.name, &b)).map(Outcome::ok)
        }
        Command::Area { family, tol, method, grid, .. } => {
            if !(*tol > 0.0) {
                return Err(Failure::Usage("--tol must be positive".into()));
            }
            let spec = load_family(family)?;
            let est = match method {
                AreaMethodArg::Polar => area_polar::<f64>(&spec, *tol),
                AreaMethodArg::Grid => area_grid::<f64>(&spec, *grid),
            }
            .map_err(data)?;
            let report = AreaReport::new(&spec.name, &est);
            if output.format == Some(Format::Csv) {
                return csv_table(
                    &["family", "method", "value", "err"],
                    &[vec![spec.name.clone(), est.method.as_str().into(), est.value.to_string(), est.err.to_string()]],
                )
                .map(Outcome::ok);
            }
            json(&report).map(Outcome::ok)
        }
        Command::Predict { family, ladder, z, tol, .. } => {
            if !(*tol > 0.0) {
                return Err(Failure::Usage("--tol must be positive".into()));
            }
            let spec = load_family(family)?;
            let cache = GoldenCache::from_env().ok();
            let xs = ladder_or_default(ladder, &spec);
            let report = ratio_table(&spec, &xs, *z, *tol, cache.as_ref()).map_err(data)?;
            if output.format == Some(Format::Csv) {
                let mut buf = Vec::new();
                report.write_csv(&mut buf).map_err(data)?;
                return String::from_utf8(buf).map(Outcome::ok).map_err(data);
            }
            json(&report).map(Outcome::ok)
        }
        Command::Fit { family, ladder, .. } => {
            let spec = load_family(family)?;
            let xs = ladder_or_default(ladder, &spec);
            let mut points = Vec::new();
            for x in &xs {
                let s = summarize(x, &enumerate_f(&spec, x).map_err(data)?);
                points.push((x.clone(), s.count_f, s.count_c));
            }
            let f: Vec<(BigInt, u64)> = points.iter().map(|p| (p.0.clone(), p.1)).collect();
            let c: Vec<(BigInt, u64)> = points.iter().map(|p| (p.0.clone(), p.2)).collect();
            let report = FitReport {
                family: spec.name.clone(),
                expected: 2.0 / spec.d as f64,
                points: points.iter().map(|p| (p.0.to_string(), p.1, p.2)).collect(),
                fit_f: fit_counts(&f).ok(),
                fit_c: fit_counts(&c).ok(),
            };
            if output.format == Some(Format::Csv) {
                let table: Vec<Vec<String>> =
                    report.points.iter().map(|p| vec![p.0.clone(), p.1.to_string(), p.2.to_string()]).collect();
                return csv_table(&["X", "count_F", "count_C"], &table).map(Outcome::ok);
            }
            json(&report).map(Outcome::ok)
        }
        Command::VerifyPaper { family, .. } => {
            let spec = load_family(family)?;
            let reference = match (&family.family, matching_builtin(&spec)) {
                (Some(name), _) => name.parse().map_err(|e| Failure::Usage(format!("--family: {e}")))?,
                (None, Some(b)) => b,
                (None, None) => {
                    return Err(Failure::Usage("verify-paper needs a built-in family or a copy of one".into()))
                }
            };
            let report = verify_paper(&spec, reference);
            let passed = report.all_passed();
            let text = if output.format == Some(Format::Csv) {
                let table: Vec<Vec<String>> = report
                    .checks
                    .iter()
                    .map(|c| vec![c.name.clone(), if c.passed { "pass" } else { "fail" }.into(), c.detail.clone()])
                    .collect();
                csv_table(&["check", "result", "detail"], &table)?
            } else {
                json(&report)?
            };
            Ok(Outcome { text, passed })
        }
        Command::LmfdbCheck { ainvs, expect, .. } => {
            no_csv(output, "lmfdb-check")?;
            let client = LmfdbClient::from_env(output.offline);
            let found = client.lookup_by_ainvs(&ainvs.0).map_err(data)?;
            let passed = found.as_ref().and_then(|f| f.label.as_deref()) == Some(expect.as_str());
            let report = LmfdbReport {
                ainvs: ainvs.0.iter().map(|x| x.to_string()).collect(),
                expected: expect.clone(),
                found,
                passed,
            };
            Ok(Outcome { text: json(&report)?, passed })
        }
    }
}

/// `[0, 0, 0, A, B]` for a pair of the family.
pub fn ainvs_of(spec: &FamilySpec, a: i64, b: i64) -> [BigInt; 5] {
    let (a, b) = (BigInt::from(a), BigInt::from(b));
    short_ainvs(&spec.eval_a(&a, &b), &spec.eval_b(&a, &b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("entangle-census").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn density_prints_fraction() {
        let (code, out, _) = run_capture(&["density", "--family", "F1", "--ell", "2"]);
        assert_eq!((code, out.as_str()), (0, "1/2\n"));
    }

    #[test]
    fn count_below_min_height_is_zero() {
        let (code, out, _) = run_capture(&["count", "--family", "F1", "--X", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["count_F"], 0);
        assert_eq!(v["count_C"], 0);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_capture(&["density", "--family", "F1"]).0, 2);
        assert_eq!(run_capture(&["density", "--family", "F9", "--ell", "2"]).0, 2);
        assert_eq!(run_capture(&["count", "--family", "F1", "--config", "x.json", "--X", "5"]).0, 2);
        assert_eq!(run_capture(&["bogus"]).0, 2);
        let (code, _, err) = run_capture(&["count", "--family", "F1", "--ladder", "100,10"]);
        assert_eq!(code, 2);
        assert!(err.contains("--ladder"));
    }

    #[test]
    fn data_errors_exit_one() {
        let (code, _, err) = run_capture(&["density", "--family", "F1", "--ell", "4"]);
        assert_eq!(code, 1);
        assert!(err.contains("not prime"));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let args = ["enumerate", "--family", "F2", "--X", "1e40", "--format", "csv"];
        let one = run_capture(&[&args[..], &["--threads", "1"]].concat());
        let three = run_capture(&[&args[..], &["--threads", "3"]].concat());
        assert_eq!(one.0, 0);
        assert_eq!(one.1, three.1);
        assert!(one.1.starts_with("a,b,A,B,H,md,in_C\n"));
    }

    #[test]
    fn height_shorthands() {
        assert_eq!(parse_height("10^3").unwrap(), BigInt::from(1000));
        assert_eq!(parse_height("2e13").unwrap(), BigInt::from(20_000_000_000_000i64));
        assert_eq!(parse_height("12345").unwrap(), BigInt::from(12345));
        assert!(parse_height("0").is_err());
        assert!(parse_height("abc").is_err());
    }
}
