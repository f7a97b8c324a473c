//! `kpplab`: command-line driver for the front stability experiments.

mod config;
mod output;

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kpp_core::evans::{no_unstable_spectrum_scan, rectangle_contour, wronskian};
use kpp_core::green_lambda::Resolvent;
use kpp_core::laplace::{green_time_column, near_diagonal_decay};
use kpp_core::modes::{solve_mode, ModeKind, SpectralPoint};
use kpp_core::simulate::{default_sample_times, run_decay_experiment};
use kpp_core::verify::{bound_constants, run_all, run_one, Baselines, VerifyContext};
use kpp_core::Complex64 as C;
use serde_json::{json, Map, Value};

use config::ModelConfig;
use output::{to_json, to_svg, write_atomic, Table};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_ASSERTION: u8 = 4;

/// Summaries `report` expects, one per experiment command.
const SUMMARIES: [&str; 7] = ["front", "modes", "evans", "green-lambda", "green-time", "simulate", "verify-all"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Parser, Debug)]
#[command(name = "kpplab", version, about = "Linear and nonlinear stability experiments for the critical KPP front")]
struct Cli {
    /// Model configuration, `key = value` per line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts; without it the primary artifact goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical front profile: x, q, dq.
    Front {
        #[arg(long, allow_hyphen_values = true)]
        xmin: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        xmax: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
    },
    /// Normalized envelope Z of one Jost-type mode.
    Modes {
        /// phi+, phi-, psi+ or psi-.
        #[arg(long)]
        kind: String,
        /// `re,im`
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        xmin: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        xmax: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Evans function W(0) on a rectangular lambda grid.
    Evans {
        /// `relo,rehi,imlo,imhi,n`
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Resolvent kernel G_lambda(x, y0).
    GreenLambda {
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 10.0)]
        half_width: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Time-domain Green's function G(t, x, y0), or its near-diagonal decay.
    GreenTime {
        #[arg(long, default_value_t = 5.0)]
        t: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 10.0)]
        half_width: f64,
        #[arg(long, default_value_t = 0.25)]
        step: f64,
        /// Emit sup_{|x-y|<=1} |G| against t and the fitted slope instead.
        #[arg(long)]
        slope: bool,
        /// Comma-separated times for `--slope`.
        #[arg(long, default_value = "10,20,40,80,160")]
        times: String,
    },
    /// Nonlinear perturbation p0 = amp exp(-x^2) of the front.
    Simulate {
        #[arg(long, default_value_t = 0.01)]
        amp: f64,
        #[arg(long = "T", default_value_t = 200.0)]
        t_final: f64,
        #[arg(long, default_value_t = 40)]
        samples: usize,
    },
    /// Acceptance criteria with a pass/fail report.
    VerifyAll {
        /// Comma-separated criterion ids, e.g. `C1,C3`.
        #[arg(long)]
        only: Option<String>,
    },
    /// Fitted bound constants in the baseline format.
    Baselines,
    /// Merge per-command summaries from `--out` into report.json.
    Report,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numeric(String),
    Assertion(String),
}

impl Failure {
    fn numeric(e: impl Display) -> Self {
        Self::Numeric(e.to_string())
    }
}

/// Everything a command produced.
struct Artifacts {
    name: &'static str,
    table: Option<Table>,
    summary: Value,
    /// `(x column, y columns, log-log)` for the SVG rendering.
    plot: Option<(usize, Vec<usize>, bool)>,
}

fn parse_complex(s: &str) -> Result<C, Failure> {
    let v = parse_list(s, "lambda")?;
    match v[..] {
        [re, im] => Ok(C::new(re, im)),
        _ => Err(Failure::Config(format!("lambda: expected `re,im`, got `{s}`"))),
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Failure::Config(format!("{what}: `{p}` is not a number"))))
        .collect()
}

fn span(lo: f64, hi: f64, step: f64, must_contain: Option<f64>) -> Result<Vec<f64>, Failure> {
    if !(step > 0.0 && hi > lo) {
        return Err(Failure::Config(format!("empty range [{lo}, {hi}] with step {step}")));
    }
    let n = ((hi - lo) / step).round() as usize;
    let mut xs: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if let Some(y) = must_contain {
        if let Some(k) = xs.iter().position(|&x| (x - y).abs() < 1e-9 * step.max(1.0)) {
            xs[k] = y;
        } else {
            xs.push(y);
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
    }
    Ok(xs)
}

fn context(cfg: &ModelConfig, seed: u64) -> Result<VerifyContext, Failure> {
    let mut ctx = VerifyContext::new(cfg.nonlinearity, cfg.beta, cfg.alpha, (cfg.domain_left, cfg.domain_right), cfg.grid_step)
        .map_err(Failure::numeric)?;
    ctx.seed = seed;
    Ok(ctx)
}

fn run(cli: &Cli, cfg: &ModelConfig) -> Result<Artifacts, Failure> {
    match &cli.command {
        Command::Front { .. } => {
            let ctx = context(cfg, cli.seed)?;
            let p = &ctx.op.profile;
            let mut t = Table::new(&["x", "q", "dq"]);
            for i in 0..p.len() {
                t.push(vec![p.x(i), p.q[i], p.dq[i]]);
            }
            let summary = json!({
                "c_star": p.c_star,
                "gamma_star": p.gamma_star,
                "left_rate": p.left_rate,
                "tail_a": p.tail.a,
                "tail_b": p.tail.b,
                "tail_fit_err": p.tail.fit_err,
                "residual": p.residual,
                "iterations": p.iterations,
            });
            Ok(Artifacts { name: "front", table: Some(t), summary, plot: Some((0, vec![1, 2], false)) })
        }
        Command::Modes { kind, lambda, xmin, xmax, step } => {
            let kind = match kind.as_str() {
                "phi+" => ModeKind::PhiPlus,
                "phi-" => ModeKind::PhiMinus,
                "psi+" => ModeKind::PsiPlus,
                "psi-" => ModeKind::PsiMinus,
                k => return Err(Failure::Config(format!("kind: `{k}` is not one of phi+, phi-, psi+, psi-"))),
            };
            let lambda = parse_complex(lambda)?;
            let nodes = span(*xmin, *xmax, *step, None)?;
            let ctx = context(cfg, cli.seed)?;
            let m = solve_mode(&ctx.op, kind, &SpectralPoint::at(lambda), &nodes, &ctx.modes).map_err(Failure::numeric)?;
            let mut t = Table::new(&["x", "re_z1", "im_z1", "re_z2", "im_z2"]);
            for (i, &x) in nodes.iter().enumerate() {
                let z = m.envelope(i);
                t.push(vec![x, z[0].re, z[0].im, z[1].re, z[1].im]);
            }
            let summary = json!({
                "kind": format!("{kind:?}"),
                "lambda": [lambda.re, lambda.im],
                "rate": [m.rate.re, m.rate.im],
            });
            Ok(Artifacts { name: "modes", table: Some(t), summary, plot: Some((0, vec![1, 2, 3, 4], false)) })
        }
        Command::Evans { grid } => {
            let g = parse_list(grid, "grid")?;
            let [relo, rehi, imlo, imhi, n] = g[..] else {
                return Err(Failure::Config(format!("grid: expected `relo,rehi,imlo,imhi,n`, got `{grid}`")));
            };
            if !(relo < rehi && imlo < imhi && n >= 2.0 && n.fract() == 0.0) {
                return Err(Failure::Config(format!("grid: `{grid}` is not a valid rectangle")));
            }
            let n = n as usize;
            let ctx = context(cfg, cli.seed)?;
            let mut t = Table::new(&["re_lambda", "im_lambda", "re_w", "im_w"]);
            let mut min_abs = f64::INFINITY;
            for a in 0..n {
                for b in 0..n {
                    let l = C::new(
                        relo + (rehi - relo) * a as f64 / (n - 1) as f64,
                        imlo + (imhi - imlo) * b as f64 / (n - 1) as f64,
                    );
                    let w = wronskian(&ctx.op, SpectralPoint::at(l), 0.0, &ctx.modes).map_err(Failure::numeric)?;
                    min_abs = min_abs.min(w.norm());
                    t.push(vec![l.re, l.im, w.re, w.im]);
                }
            }
            let contour = rectangle_contour((relo, rehi), (imlo, imhi), 96);
            let winding = match no_unstable_spectrum_scan(&ctx.op, &contour, &ctx.modes) {
                Ok(w) => json!(w),
                Err(e) => json!(e.to_string()),
            };
            let summary = json!({ "min_abs_w": min_abs, "boundary_winding": winding });
            Ok(Artifacts { name: "evans", table: Some(t), summary, plot: Some((0, vec![2, 3], false)) })
        }
        Command::GreenLambda { lambda, y, half_width, step } => {
            let lambda = parse_complex(lambda)?;
            let nodes = span(y - half_width, y + half_width, *step, Some(*y))?;
            let j = nodes.iter().position(|v| v == y).expect("source added");
            let ctx = context(cfg, cli.seed)?;
            let r = Resolvent::new(&ctx.op, SpectralPoint::at(lambda), &nodes, &ctx.modes).map_err(Failure::numeric)?;
            let mut t = Table::new(&["x", "re_g", "im_g"]);
            for (i, &x) in nodes.iter().enumerate() {
                let g = r.green(i, j);
                t.push(vec![x, g.re, g.im]);
            }
            let summary = json!({ "lambda": [lambda.re, lambda.im], "y": y, "diagonal": [r.green(j, j).re, r.green(j, j).im] });
            Ok(Artifacts { name: "green-lambda", table: Some(t), summary, plot: Some((0, vec![1, 2], false)) })
        }
        Command::GreenTime { t, y, half_width, step, slope, times } => {
            let ctx = context(cfg, cli.seed)?;
            if *slope {
                let times = parse_list(times, "times")?;
                let nodes = span(y - 20.0, y + 20.0, 0.5, Some(*y))?;
                let d = near_diagonal_decay(&ctx.op, &times, &nodes, 1.0, &ctx.contour, &ctx.modes).map_err(Failure::numeric)?;
                let mut table = Table::new(&["t", "sup_g"]);
                for (a, b) in d.t.iter().zip(&d.sup) {
                    table.push(vec![*a, *b]);
                }
                let summary = json!({ "mode": "slope", "y": y, "window": [y - 20.0, y + 20.0], "slope": d.slope });
                return Ok(Artifacts { name: "green-time", table: Some(table), summary, plot: Some((0, vec![1], true)) });
            }
            let nodes = span(y - half_width, y + half_width, *step, Some(*y))?;
            let j = nodes.iter().position(|v| v == y).expect("source added");
            let g = green_time_column(&ctx.op, *t, &nodes, j, &ctx.contour, &ctx.modes).map_err(Failure::numeric)?;
            let mut table = Table::new(&["x", "g"]);
            for (x, v) in nodes.iter().zip(&g) {
                table.push(vec![*x, *v]);
            }
            let summary = json!({ "mode": "profile", "t": t, "y": y, "sup": g.iter().fold(0.0f64, |m, v| m.max(v.abs())) });
            Ok(Artifacts { name: "green-time", table: Some(table), summary, plot: Some((0, vec![1], false)) })
        }
        Command::Simulate { amp, t_final, samples } => {
            if !(*t_final > 0.0) || *samples < 2 {
                return Err(Failure::Config("simulate: need T > 0 and at least 2 samples".into()));
            }
            let ctx = context(cfg, cli.seed)?;
            let a = *amp;
            let r = run_decay_experiment(&ctx.op, &|x| a * (-x * x).exp(), *t_final, &default_sample_times(*t_final, *samples), &ctx.sim)
                .map_err(Failure::numeric)?;
            let mut table = Table::new(&["t", "sup_p", "weighted_sup_p", "theta"]);
            for h in &r.history {
                table.push(vec![h.t, h.sup, h.weighted_sup, h.theta]);
            }
            let summary = json!({
                "amp": a,
                "T": t_final,
                "slope": r.slope,
                "omega_inf": r.omega_const,
                "initial": {
                    "sup": r.initial.sup,
                    "weighted_l1": r.initial.weighted_l1,
                    "total": r.initial.total,
                    "omega_moment3": r.initial.omega_moment3,
                },
                "guard_band": "ok",
                "boundary_max": r.boundary_max,
                "boundary_ok": r.boundary_ok,
                "chi_ratio": r.chi_ratio,
                "theta_end": r.theta_series.last().map(|p| p.1),
            });
            Ok(Artifacts { name: "simulate", table: Some(table), summary, plot: Some((0, vec![1, 2, 3], true)) })
        }
        Command::VerifyAll { only } => {
            let ctx = context(cfg, cli.seed)?;
            let baselines = Baselines::embedded().map_err(Failure::numeric)?;
            let all: Vec<_> = match only {
                Some(ids) => ids
                    .split(',')
                    .map(str::trim)
                    .map(|id| run_one(&ctx, &baselines, id).ok_or_else(|| Failure::Config(format!("only: unknown criterion `{id}`"))))
                    .collect::<Result<_, _>>()?,
                None => run_all(&ctx, &baselines),
            };
            for c in &all {
                eprintln!("{}", c.line());
            }
            let mut crit = Map::new();
            for c in &all {
                crit.insert(
                    c.id.clone(),
                    json!({
                        "title": c.title,
                        "passed": c.passed,
                        "measured": c.measured,
                        "tolerance": c.tolerance,
                        "detail": c.detail,
                    }),
                );
            }
            let failed: Vec<String> = all.iter().filter(|c| !c.passed).map(|c| c.id.clone()).collect();
            let summary = json!({ "criteria": crit, "failed": failed, "all_passed": failed.is_empty() });
            Ok(Artifacts { name: "verify-all", table: None, summary, plot: None })
        }
        Command::Baselines => {
            let ctx = context(cfg, cli.seed)?;
            let b = bound_constants(&ctx).map_err(Failure::numeric)?;
            let summary = serde_json::to_value(&b.0).expect("map serializes");
            Ok(Artifacts { name: "baselines", table: None, summary, plot: None })
        }
        Command::Report => unreachable!("handled before dispatch"),
    }
}

fn header(cli: &Cli, cfg: &ModelConfig, name: &str) -> Vec<String> {
    let mut h = vec![format!("kpplab {} {name}", env!("CARGO_PKG_VERSION")), format!("seed = {}", cli.seed)];
    h.extend(cfg.echo().into_iter().map(|(k, v)| format!("{k} = {v}")));
    h
}

fn with_provenance(cli: &Cli, cfg: &ModelConfig, summary: Value) -> Value {
    let config: Map<String, Value> = cfg.echo().into_iter().map(|(k, v)| (k.to_string(), Value::String(v))).collect();
    json!({ "config": config, "seed": cli.seed, "summary": summary })
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn emit(cli: &Cli, cfg: &ModelConfig, a: &Artifacts) -> Result<(), Failure> {
    let head = header(cli, cfg, a.name);
    // Baselines are read back verbatim, so they carry no provenance wrapper.
    let json_text = if a.name == "baselines" { to_json(&a.summary) } else { to_json(&with_provenance(cli, cfg, a.summary.clone())) };
    let csv = a.table.as_ref().map(|t| t.to_csv(&head));
    let svg = match (&a.table, &a.plot) {
        (Some(t), Some((x, ys, log))) if cli.format == Format::Svg => Some(to_svg(t, *x, ys, a.name, *log)),
        _ => None,
    };
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let put = |ext: &str, s: &str| {
                let p = dir.join(format!("{}.{ext}", a.name));
                write_atomic(&p, s).map_err(|e| io_err(&p, e))
            };
            put("json", &json_text)?;
            if cli.format != Format::Json {
                if let Some(c) = &csv {
                    put("csv", c)?;
                }
            }
            if let Some(s) = &svg {
                put("svg", s)?;
            }
        }
        None => {
            let text = match (cli.format, &csv, &svg) {
                (Format::Svg, _, Some(s)) => s,
                (Format::Csv, Some(c), _) => c,
                _ => &json_text,
            };
            // A closed pipe downstream is not an error of ours.
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(Failure::Config(format!("stdout: {e}"))),
                _ => {}
            }
        }
    }
    Ok(())
}

/// Reads `<name>.json` for every expected summary under `dir`.
fn report(dir: &Path) -> Result<Value, Failure> {
    let mut merged = Map::new();
    let mut missing = Vec::new();
    for name in SUMMARIES {
        let p = dir.join(format!("{name}.json"));
        match fs::read_to_string(&p) {
            Ok(text) => {
                let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
                merged.insert(name.to_string(), v);
            }
            Err(_) => missing.push(name),
        }
    }
    if !missing.is_empty() {
        return Err(Failure::Config(format!("missing summaries: {}", missing.join(", "))));
    }
    Ok(Value::Object(merged))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = (|| {
        let cfg = match &cli.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
                ModelConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
            }
            None => ModelConfig::default(),
        };
        if let Command::Report = cli.command {
            let dir = cli.out.as_deref().ok_or_else(|| Failure::Config("report needs --out DIR".into()))?;
            let merged = report(dir)?;
            let p = dir.join("report.json");
            write_atomic(&p, &to_json(&merged)).map_err(|e| io_err(&p, e))?;
            return Ok(());
        }
        let mut cfg = cfg;
        if let Command::Front { xmin, xmax, h } = &cli.command {
            cfg.domain_left = xmin.unwrap_or(cfg.domain_left);
            cfg.domain_right = xmax.unwrap_or(cfg.domain_right);
            cfg.grid_step = h.unwrap_or(cfg.grid_step);
            cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
        }
        let a = run(&cli, &cfg)?;
        emit(&cli, &cfg, &a)?;
        if a.name == "verify-all" && a.summary["all_passed"] != json!(true) {
            return Err(Failure::Assertion(format!("failed criteria: {}", a.summary["failed"])));
        }
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, kind, msg) = match f {
                Failure::Config(m) => (EXIT_CONFIG, "config error", m),
                Failure::Numeric(m) => (EXIT_NUMERIC, "numeric failure", m),
                Failure::Assertion(m) => (EXIT_ASSERTION, "assertion failure", m),
            };
            eprintln!("kpplab: {kind}: {msg}");
            ExitCode::from(code)
        }
    }
}
