//! Command-line front end. Each command is a thin binding over one library
//! call; reports go to stdout as JSON (sorted keys) or CSV.

use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::chew::chew_path;
use crate::delaunay::{delaunay_l1, DEFAULT_MAX_FLIPS};
use crate::error::{Error, Result};
use crate::exactplane::{format_rational, parse_rational, ExactMatrix, ExactVector, Rational};
use crate::geodesic::{count, enumerate, DEFAULT_BUDGET};
use crate::mc::{
    bc_csv, borel_cantelli_table, estimate_l2_and_variance, estimate_mean_transform, sample_stratum_local,
    sample_torus_haar, tail_histogram,
};
use crate::oracle::{siegel_constant_torus, slit_torus_holonomy, torus_holonomy, SlitTorusPoint, TorusPoint};
use crate::surface::TranslationSurface;
use crate::sv::{classify, transform, ClassifyOptions, TestFunction};

#[derive(Parser, Debug)]
#[command(name = "saddlekit", version, about = "Saddle connections, L1 Delaunay triangulations and Siegel-Veech statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Maximum search states per enumeration.
    #[arg(long, global = true, env = "SADDLEKIT_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SurfaceArg {
    /// Surface JSON file.
    #[arg(long)]
    surface: String,
}

#[derive(Args, Debug)]
struct SeedArgs {
    #[arg(long)]
    samples: usize,
    /// Drawn at random and echoed in the report when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a surface and print its stratum signature.
    Validate(SurfaceArg),
    /// Number of saddle connections of length at most the radius.
    Count {
        #[command(flatten)]
        s: SurfaceArg,
        #[arg(long)]
        radius: String,
    },
    /// List saddle connections of length at most the radius.
    Enumerate {
        #[command(flatten)]
        s: SurfaceArg,
        #[arg(long)]
        radius: String,
    },
    /// L1 Delaunay triangulation with per-triangle certificates.
    Delaunay(SurfaceArg),
    /// Build Chew paths for every connection up to the radius and check the √10 bound.
    ChewCheck {
        #[command(flatten)]
        s: SurfaceArg,
        #[arg(long)]
        radius: String,
    },
    /// Siegel-Veech transform of a test function.
    Transform {
        #[command(flatten)]
        s: SurfaceArg,
        /// Test function JSON, or @path.
        #[arg(long = "fn")]
        function: String,
    },
    /// Thick/thin classification with witnesses.
    Classify {
        #[command(flatten)]
        s: SurfaceArg,
        #[arg(long)]
        eps0: String,
        /// Exponent in (0, 1/N), as a rational.
        #[arg(long)]
        p: String,
    },
    /// Closed-form holonomy set of the torus g ℤ².
    TorusExact {
        #[arg(long)]
        radius: String,
        /// Matrix entries a,b,c,d (row major), determinant 1.
        #[arg(long, default_value = "1,0,0,1")]
        matrix: String,
    },
    /// Closed-form holonomy set of the slit torus [g, v].
    SlitExact {
        #[arg(long)]
        radius: String,
        #[arg(long, default_value = "1,0,0,1")]
        matrix: String,
        /// Slit vector x,y.
        #[arg(long)]
        v: String,
    },
    /// Mean transform over Haar-random tori.
    McTorus {
        #[command(flatten)]
        seed: SeedArgs,
        /// Disc radius; ignored when --fn is given.
        #[arg(long)]
        radius: Option<String>,
        #[arg(long = "fn")]
        function: Option<String>,
        #[arg(long, default_value_t = 50.0)]
        ymax: f64,
    },
    /// Mean transform over a local patch of a stratum.
    McStratum {
        #[command(flatten)]
        s: SurfaceArg,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        spread: f64,
        #[arg(long)]
        radius: Option<String>,
        #[arg(long = "fn")]
        function: Option<String>,
    },
    /// Second moment and variance of the torus counting function.
    Variance {
        #[command(flatten)]
        seed: SeedArgs,
        /// Comma-separated radii.
        #[arg(long)]
        radii: String,
        #[arg(long, default_value_t = 50.0)]
        ymax: f64,
    },
    /// Tail exceedance fractions over a stratum patch, or over tori without --surface.
    Tails {
        #[arg(long)]
        surface: Option<String>,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long, default_value_t = 0.05)]
        spread: f64,
        #[arg(long = "fn")]
        function: String,
        /// Number of thresholds √1 .. √k.
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 50.0)]
        ymax: f64,
    },
    /// Variance-to-error ratios and Chebyshev check along a radius sequence.
    BcTable {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        radii: String,
        #[arg(long)]
        errors: String,
        #[arg(long, default_value_t = 50.0)]
        ymax: f64,
    },
}

struct Output {
    json: Value,
    csv: Option<String>,
}

impl Output {
    fn json<T: Serialize>(v: &T) -> Result<Self> {
        Ok(Output { json: serde_json::to_value(v)?, csv: None })
    }
}

fn read_surface(path: &str) -> Result<TranslationSurface> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))?;
    TranslationSurface::from_json(&text)
}

fn read_function(arg: &str) -> Result<TestFunction> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))?,
        None => arg.to_string(),
    };
    TestFunction::from_json(&text)
}

fn rationals(arg: &str, n: usize) -> Result<Vec<Rational>> {
    let out: Vec<Rational> = arg.split(',').map(|s| parse_rational(s.trim())).collect::<Result<_>>()?;
    if out.len() != n {
        return Err(Error::InvalidArgument(format!("expected {n} comma-separated numbers, got '{arg}'")));
    }
    Ok(out)
}

fn floats(arg: &str) -> Result<Vec<f64>> {
    arg.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: '{s}'"))))
        .collect()
}

fn matrix(arg: &str) -> Result<ExactMatrix> {
    let m = rationals(arg, 4)?;
    Ok(ExactMatrix::new(m[0].clone(), m[1].clone(), m[2].clone(), m[3].clone()))
}

fn seed_of(s: &SeedArgs) -> u64 {
    s.seed.unwrap_or_else(rand::random)
}

fn function_or_disc(function: &Option<String>, radius: &Option<String>) -> Result<TestFunction> {
    match (function, radius) {
        (Some(f), _) => read_function(f),
        (None, Some(r)) => Ok(TestFunction::disc(parse_rational(r)?)),
        (None, None) => Err(Error::InvalidArgument("one of --fn or --radius is required".into())),
    }
}

fn vectors_json<'a>(vs: impl Iterator<Item = &'a ExactVector>) -> Vec<[String; 2]> {
    vs.map(|v| v.to_strings()).collect()
}

/// Flattens an object of scalars, or an array of such objects, into CSV.
fn generic_csv(v: &Value) -> String {
    let cell = |x: &Value| match x {
        Value::String(s) => s.clone(),
        other => other.to_string().replace(',', ";"),
    };
    let rows: Vec<&serde_json::Map<String, Value>> = match v {
        Value::Array(a) => a.iter().filter_map(Value::as_object).collect(),
        Value::Object(o) => vec![o],
        _ => return format!("value\n{}\n", cell(v)),
    };
    let Some(first) = rows.first() else { return String::new() };
    let keys: Vec<&String> = first.keys().collect();
    let mut out = keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&keys.iter().map(|k| r.get(*k).map(cell).unwrap_or_default()).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn execute(cli: &Cli) -> Result<Output> {
    let budget = cli.budget;
    match &cli.command {
        Command::Validate(a) => Output::json(&json!({"signature": read_surface(&a.surface)?.signature()})),
        Command::Count { s, radius } => {
            let n = count(&read_surface(&s.surface)?, &parse_rational(radius)?, budget)?;
            Output::json(&json!({"count": n, "radius": radius}))
        }
        Command::Enumerate { s, radius } => {
            let set = enumerate(&read_surface(&s.surface)?, &parse_rational(radius)?, budget)?;
            let csv = set.to_csv();
            Ok(Output { json: serde_json::to_value(&set)?, csv: Some(csv) })
        }
        Command::Delaunay(a) => {
            let t = delaunay_l1(&read_surface(&a.surface)?, DEFAULT_MAX_FLIPS)?;
            Ok(Output { json: t.to_json(), csv: None })
        }
        Command::ChewCheck { s, radius } => {
            let t = delaunay_l1(&read_surface(&s.surface)?, DEFAULT_MAX_FLIPS)?;
            let set = enumerate(&t.surface, &parse_rational(radius)?, budget)?;
            let mut rows = Vec::new();
            let mut violations = 0;
            let mut max_ratio: f64 = 1.0;
            for c in &set.connections {
                let p = chew_path(&t, c)?;
                let ok = p.within_sqrt10()?;
                violations += usize::from(!ok);
                max_ratio = max_ratio.max(p.ratio_upper_bound);
                rows.push(json!({
                    "x": format_rational(&c.holonomy.x),
                    "y": format_rational(&c.holonomy.y),
                    "edges": p.len(),
                    "ratio_upper_bound": p.ratio_upper_bound,
                    "within_sqrt10": ok,
                }));
            }
            let csv = generic_csv(&Value::Array(rows.clone()));
            Ok(Output {
                json: json!({"connections": rows.len(), "violations": violations, "max_ratio_upper_bound": max_ratio, "paths": rows}),
                csv: Some(csv),
            })
        }
        Command::Transform { s, function } => {
            let f = read_function(function)?;
            Output::json(&transform(&read_surface(&s.surface)?, &f, budget)?)
        }
        Command::Classify { s, eps0, p } => {
            let opts = ClassifyOptions { budget, ..ClassifyOptions::default() };
            Output::json(&classify(&read_surface(&s.surface)?, &parse_rational(eps0)?, &parse_rational(p)?, &opts)?)
        }
        Command::TorusExact { radius, matrix: m } => {
            let t = TorusPoint::new(matrix(m)?)?;
            let set = torus_holonomy(&t, &parse_rational(radius)?);
            Output::json(&json!({"count": set.len(), "holonomies": vectors_json(set.iter())}))
        }
        Command::SlitExact { radius, matrix: m, v } => {
            let xy = rationals(v, 2)?;
            let t = SlitTorusPoint::new(matrix(m)?, ExactVector::new(xy[0].clone(), xy[1].clone()))?;
            let h = slit_torus_holonomy(&t, &parse_rational(radius)?);
            Output::json(&json!({
                "count": h.holonomies.len(),
                "holonomies": vectors_json(h.holonomies.iter()),
                "corrections": vectors_json(h.corrections.iter()),
            }))
        }
        Command::McTorus { seed, radius, function, ymax } => {
            let f = function_or_disc(function, radius)?;
            let corpus = sample_torus_haar(seed.samples, seed_of(seed), *ymax)?;
            let rep = estimate_mean_transform(&corpus, &f, budget)?.with_cusp_correction(&f, *ymax);
            let csv = rep.to_csv();
            Ok(Output { json: serde_json::to_value(&rep)?, csv: Some(csv) })
        }
        Command::McStratum { s, seed, spread, radius, function } => {
            let f = function_or_disc(function, radius)?;
            let corpus = sample_stratum_local(&read_surface(&s.surface)?, *spread, seed.samples, seed_of(seed))?;
            let rep = estimate_mean_transform(&corpus, &f, budget)?;
            let csv = rep.to_csv();
            Ok(Output { json: serde_json::to_value(&rep)?, csv: Some(csv) })
        }
        Command::Variance { seed, radii, ymax } => {
            let s = seed_of(seed);
            let corpus = sample_torus_haar(seed.samples, s, *ymax)?;
            let rows = floats(radii)?
                .into_iter()
                .map(|r| estimate_l2_and_variance(&corpus, r, siegel_constant_torus(), budget))
                .collect::<Result<Vec<_>>>()?;
            let rows = serde_json::to_value(&rows)?;
            let csv = generic_csv(&rows);
            Ok(Output { json: json!({"seed": s, "samples": seed.samples, "y_max": ymax, "rows": rows}), csv: Some(csv) })
        }
        Command::Tails { surface, seed, spread, function, k, ymax } => {
            let f = read_function(function)?;
            let s = seed_of(seed);
            let h = match surface {
                Some(path) => tail_histogram(&sample_stratum_local(&read_surface(path)?, *spread, seed.samples, s)?, &f, *k, budget)?,
                None => tail_histogram(&sample_torus_haar(seed.samples, s, *ymax)?, &f, *k, budget)?,
            };
            let csv = h.to_csv();
            let mut json = serde_json::to_value(&h)?;
            json["seed"] = s.into();
            Ok(Output { json, csv: Some(csv) })
        }
        Command::BcTable { seed, radii, errors, ymax } => {
            let s = seed_of(seed);
            let corpus = sample_torus_haar(seed.samples, s, *ymax)?;
            let rows = borel_cantelli_table(&corpus, &floats(radii)?, &floats(errors)?, siegel_constant_torus(), budget)?;
            let csv = bc_csv(&rows);
            Ok(Output { json: json!({"seed": s, "samples": seed.samples, "y_max": ymax, "rows": rows}), csv: Some(csv) })
        }
    }
}

fn error_json(e: &Error) -> Value {
    let mut body = json!({"code": e.code(), "message": e.to_string()});
    if let Error::ResourceLimit { states, limit, radius_sq } = e {
        body["progress"] = json!({"states": states, "limit": limit, "radius_sq": radius_sq});
    }
    json!({ "error": body })
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("thread pool: {e}"))),
        },
        None => execute(&cli),
    };
    match result {
        Ok(o) => {
            let text = match (cli.format, o.csv) {
                (Format::Csv, Some(csv)) => csv,
                (Format::Csv, None) => generic_csv(&o.json),
                (Format::Json, _) => format!("{}\n", o.json),
            };
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "{}", error_json(&e));
            1
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("saddlekit").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&[]).0, 2);
        assert_eq!(call(&["count", "--bogus"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn torus_exact_counts() {
        let (code, out, _) = call(&["torus-exact", "--radius", "1"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["count"], 4);
    }

    #[test]
    fn bad_matrix_is_domain_error() {
        let (code, _, err) = call(&["torus-exact", "--radius", "1", "--matrix", "2,0,0,1"]);
        assert_eq!(code, 1);
        let v: Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"]["code"], "INVALID_ARGUMENT");
    }

    #[test]
    fn generic_csv_shapes() {
        assert_eq!(generic_csv(&json!({"a": 1, "b": "x"})), "a,b\n1,x\n");
        assert_eq!(generic_csv(&json!([{"a": 1}, {"a": 2}])), "a\n1\n2\n");
    }
}
