//! Command-line front end. Every query emits one JSON line.
//!
//! Domain files are JSON:
//!
//! ```text
//! {"kind":"ball","center":[0,0,0],"radius":1}
//! {"kind":"halfspace","normal":[1,0,0],"offset":0}
//! {"kind":"polyhedral","halfspaces":[{"normal":[1,0,0],"offset":0}, ...]}
//! {"kind":"sublevel","expr":"x1^2+x2^2-1","box":[[-2,2],[-2,2],[-10,10]],"convex_hint":true}
//! ```
//!
//! Expression grammar (`expr` fields and `--mpsh`):
//!
//! ```text
//! expr   = term { ("+" | "-") term }
//! term   = unary { ("*" | "/") unary }
//! unary  = "-" unary | power
//! power  = atom [ "^" ["-"] integer ]
//! atom   = number | var | func "(" expr ")" | "abs2(" [var "," var] ")" | "(" expr ")"
//! var    = "x1" .. "xn"
//! func   = "exp" | "log" | "sqrt"
//! ```
//!
//! Exit codes: 0 success, 1 failed verification or solver failure,
//! 2 invalid input, 3 infeasible point.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bounds::{best_lower, mpsh_check, Region, Toolbox};
use crate::classify::{classify_general, smc_upgrade};
use crate::distance::{chain_distance_upper, distance_lower, ChainConfig};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::extremal::{maximize_g, maximize_m, SolverConfig};
use crate::geometry::{Direction, Point, TwoPlane};
use crate::models::{bck_ball_metric, bck_ball_plane_metric};
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "minmetric", version, about = "Two-sided bounds for the minimal metric on domains in R^n")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalOpts {
    /// Polynomial degree of solver discs.
    #[arg(long, global = true, default_value_t = 8)]
    pub degree: usize,
    /// Solver starts.
    #[arg(long, global = true, default_value_t = 16)]
    pub multistarts: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Slack allowed when checking lower <= upper.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Containment grid as RADIIxANGLES.
    #[arg(long, global = true, default_value = "8x32")]
    pub grid: String,
    /// Containment margin of solver discs.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub margin: f64,
    /// Append records to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Include wall time in records (breaks byte-identical reruns).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// g(x, v) for a direction or M(x, L) for a 2-plane.
    Metric {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "plane")]
        dir: Option<String>,
        /// Two spanning vectors separated by `;`.
        #[arg(long, allow_hyphen_values = true)]
        plane: Option<String>,
        /// Negative MPSH function certified on the sublevel box and used as a lower bound.
        #[arg(long)]
        mpsh: Option<String>,
    },
    /// Lower and chain upper bounds on the distance.
    Distance {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
    },
    /// Hyperbolicity verdict with certificate.
    Classify {
        #[arg(long)]
        domain: PathBuf,
        /// Negative strongly MPSH witness for sublevel domains.
        #[arg(long)]
        witness: Option<String>,
        /// Try the complete-hyperbolicity upgrade on the collar |u| <= WIDTH.
        #[arg(long)]
        collar: Option<f64>,
    },
    /// Runs a self-verification suite.
    Verify {
        /// One of ball, halfspace, cylinder, harnack, mpsh, sibony, psi, convex,
        /// localization, soundness, all.
        #[arg(long, default_value = "ball")]
        suite: String,
    },
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: Value,
    pub config_hash: String,
    pub version: &'static str,
    pub inputs: Value,
    pub outputs: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

/// Maps an error onto the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::PointOutside | Error::OutsideBox | Error::OutsideBall | Error::Infeasible(_) => 3,
        Error::ZeroDirection
        | Error::DimensionMismatch { .. }
        | Error::InvalidInput(_)
        | Error::Syntax { .. }
        | Error::UnknownVariable(_)
        | Error::Domain(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

pub fn parse_vector(s: &str) -> Result<Point> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number `{t}` in `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(Point::from_vec(vals))
}

pub fn parse_plane(s: &str) -> Result<TwoPlane> {
    let (a, b) =
        s.split_once(';').ok_or_else(|| Error::InvalidInput("plane needs two vectors separated by `;`".into()))?;
    TwoPlane::spanned_by(&parse_vector(a)?, &parse_vector(b)?)
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidInput(format!("grid must look like 8x32, got `{s}`"));
    let (r, a) = s.split_once('x').ok_or_else(bad)?;
    Ok((r.parse().map_err(|_| bad())?, a.parse().map_err(|_| bad())?))
}

pub fn solver_config(o: &GlobalOpts) -> Result<SolverConfig> {
    let (grid_radii, grid_angles) = parse_grid(&o.grid)?;
    let cfg = SolverConfig {
        degree: o.degree,
        multistarts: o.multistarts,
        seed: o.seed,
        margin: o.margin,
        grid_radii,
        grid_angles,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_domain(path: &PathBuf) -> Result<DomainSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    DomainSpec::from_json(&text)
}

fn vec_json(p: &Point) -> Value {
    json!(p.iter().copied().collect::<Vec<_>>())
}

fn config_hash(o: &GlobalOpts) -> Result<String> {
    let cfg = solver_config(o)?;
    let text = serde_json::to_string(&json!({ "solver": cfg, "chain": ChainConfig::default(), "tol": o.tol }))
        .map_err(|e| Error::Io(e.to_string()))?;
    Ok(format!("{:x}", Sha256::digest(text.as_bytes())))
}

fn mpsh_toolbox(dom: &DomainSpec, src: Option<&str>) -> Result<Toolbox> {
    let Some(src) = src else { return Ok(Toolbox::default()) };
    let DomainSpec::Sublevel(s) = dom else {
        return Err(Error::InvalidInput("--mpsh applies to sublevel domains".into()));
    };
    let u = Expr::parse(src, dom.dim())?;
    let region = Region::Box { bbox: s.bbox().to_vec(), grid: 21 };
    for p in region.samples() {
        if dom.contains(&p, 0.0)? && !(u.eval(&p)? < 0.0) {
            return Err(Error::HypothesisFailed("--mpsh function must be negative on the domain".into()));
        }
    }
    let cert = mpsh_check(&u, &region, true, 0.0)?;
    Ok(Toolbox { global_mpsh: Some((u, cert)), ..Toolbox::default() })
}

fn check_order(lower: f64, upper: f64, tol: f64) -> Result<()> {
    if lower > upper + tol {
        return Err(Error::NoConvergence(format!("lower {lower} exceeds upper {upper}")));
    }
    Ok(())
}

/// Lower bound on `M(x, Λ)` as the largest `g` lower bound over unit vectors of Λ.
fn plane_lower(dom: &DomainSpec, x: &Point, plane: &TwoPlane, tools: &Toolbox) -> Result<Value> {
    let mut best: Option<crate::bounds::LowerBoundCert> = None;
    for k in 0..32 {
        let w = plane.unit(std::f64::consts::PI * k as f64 / 32.0);
        let c = best_lower(dom, x, &w, tools)?;
        if best.as_ref().is_none_or(|b| c.value > b.value) {
            best = Some(c);
        }
    }
    Ok(serde_json::to_value(best.expect("nonempty sweep")).expect("cert json"))
}

pub fn cmd_metric(
    o: &GlobalOpts,
    dom: &DomainSpec,
    x: &Point,
    dir: Option<&Direction>,
    plane: Option<&TwoPlane>,
    mpsh: Option<&str>,
) -> Result<Value> {
    if !dom.contains(x, 0.0)? {
        return Err(Error::PointOutside);
    }
    let cfg = solver_config(o)?;
    let tools = mpsh_toolbox(dom, mpsh)?;
    match (dir, plane) {
        (Some(v), None) => {
            if let DomainSpec::Ball { center, radius } = dom {
                return Ok(json!({ "exact": bck_ball_metric(center, *radius, x, v)? }));
            }
            let lower = best_lower(dom, x, v, &tools)?;
            let upper = maximize_g(dom, x, v, &cfg)?;
            check_order(lower.value, upper.bound, o.tol)?;
            Ok(json!({ "lower": lower, "upper": upper, "gap": upper.bound - lower.value }))
        }
        (None, Some(pl)) => {
            if let DomainSpec::Ball { center, radius } = dom {
                return Ok(json!({ "exact": bck_ball_plane_metric(center, *radius, x, pl)? }));
            }
            let lower = plane_lower(dom, x, pl, &tools)?;
            let upper = maximize_m(dom, x, pl, &cfg)?;
            let lv = lower["value"].as_f64().unwrap_or(0.0);
            check_order(lv, upper.bound, o.tol)?;
            Ok(json!({ "lower": lower, "upper": upper, "gap": upper.bound - lv }))
        }
        _ => Err(Error::InvalidInput("give exactly one of --dir and --plane".into())),
    }
}

pub fn cmd_distance(o: &GlobalOpts, dom: &DomainSpec, x: &Point, y: &Point) -> Result<Value> {
    let lower = distance_lower(dom, x, y)?;
    let chain = chain_distance_upper(dom, x, y, &ChainConfig::default())?;
    chain.validate(dom, x, y)?;
    check_order(lower.value, chain.total, o.tol)?;
    Ok(json!({ "lower": lower, "chain_upper": chain.total, "chain": chain.to_json() }))
}

pub fn cmd_classify(dom: &DomainSpec, witness: Option<&str>, collar: Option<f64>) -> Result<Value> {
    let w = witness.map(|s| Expr::parse(s, dom.dim())).transpose()?;
    let verdict = match collar {
        Some(width) => smc_upgrade(dom, width, 41)?,
        None => classify_general(dom, w.as_ref()),
    };
    Ok(serde_json::to_value(verdict).expect("verdict json"))
}

pub fn cmd_verify(o: &GlobalOpts, suite: &str) -> Result<(Value, bool)> {
    let ids = verify::suite_ids(suite).ok_or_else(|| Error::InvalidInput(format!("unknown suite `{suite}`")))?;
    let results: Vec<_> = ids.iter().map(|&id| verify::run(id, o.seed)).collect();
    let all = results.iter().all(|r| r.pass);
    Ok((json!({ "suite": suite, "pass": all, "criteria": results }), all))
}

/// Parses `args`, runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let o = &cli.opts;
    let start = Instant::now();
    let hash = config_hash(o)?;
    let (command, inputs, outputs, code) = match &cli.command {
        Command::Metric { domain, point, dir, plane, mpsh } => {
            let dom = load_domain(domain)?;
            let x = parse_vector(point)?;
            let v = dir.as_deref().map(parse_vector).transpose()?;
            let pl = plane.as_deref().map(parse_plane).transpose()?;
            let out = cmd_metric(o, &dom, &x, v.as_ref(), pl.as_ref(), mpsh.as_deref())?;
            let inputs = json!({
                "domain": serde_json::from_str::<Value>(&dom.to_json()).expect("domain json"),
                "point": vec_json(&x),
                "dir": v.as_ref().map(vec_json),
                "plane": pl.as_ref().map(|p| [vec_json(p.b1()), vec_json(p.b2())]),
                "mpsh": mpsh,
            });
            ("metric", inputs, out, 0)
        }
        Command::Distance { domain, from, to } => {
            let dom = load_domain(domain)?;
            let (x, y) = (parse_vector(from)?, parse_vector(to)?);
            let out = cmd_distance(o, &dom, &x, &y)?;
            let inputs = json!({
                "domain": serde_json::from_str::<Value>(&dom.to_json()).expect("domain json"),
                "from": vec_json(&x),
                "to": vec_json(&y),
            });
            ("distance", inputs, out, 0)
        }
        Command::Classify { domain, witness, collar } => {
            let dom = load_domain(domain)?;
            let out = cmd_classify(&dom, witness.as_deref(), *collar)?;
            let inputs = json!({
                "domain": serde_json::from_str::<Value>(&dom.to_json()).expect("domain json"),
                "witness": witness,
                "collar": collar,
            });
            ("classify", inputs, out, 0)
        }
        Command::Verify { suite } => {
            let (out, pass) = cmd_verify(o, suite)?;
            ("verify", json!({ "suite": suite }), out, if pass { 0 } else { 1 })
        }
    };
    let record = RunRecord {
        command: json!({ "name": command, "options": o }),
        config_hash: hash,
        version: env!("CARGO_PKG_VERSION"),
        inputs,
        outputs,
        wall_time_ms: o.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    };
    let line = serde_json::to_string(&record).map_err(|e| Error::Io(e.to_string()))?;
    match &o.out {
        Some(path) => {
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            writeln!(f, "{line}").map_err(|e| Error::Io(e.to_string()))?;
        }
        None => println!("{line}"),
    }
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors_and_planes() {
        assert_eq!(parse_vector("0.5, -1,2").unwrap().as_slice(), &[0.5, -1.0, 2.0]);
        assert!(matches!(parse_vector("1,x"), Err(Error::InvalidInput(_))));
        assert!(parse_plane("1,0,0;0,1,0").is_ok());
        assert!(parse_plane("1,0,0").is_err());
        assert_eq!(parse_grid("16x64").unwrap(), (16, 64));
        assert!(parse_grid("16").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::PointOutside), 3);
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), 2);
        assert_eq!(exit_code(&Error::NoConvergence("x".into())), 1);
        assert_eq!(main_with(["minmetric", "verify", "--suite", "nope"]), 2);
        assert_eq!(main_with(["minmetric", "metric"]), 2);
    }
}
