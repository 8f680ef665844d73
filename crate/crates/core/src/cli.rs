//! Command-line front end. [`run`] parses arguments, dispatches to the
//! library and returns the exit code with the rendered output.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::anisotropy::{Anisotropy, CatalogParams, CATALOG};
use crate::cc::{cc_distance, HorizontalGraph};
use crate::checks::{
    check_agreement, check_convexity, check_growth_bound, check_kernel_constancy, equivalent_on_image, Sampling,
    TOL_ALGEBRAIC,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{best_affine_fit, functional_eval, sobolev_norm, GridFunction};
use crate::lagrangian::{lift, pushforward, Lagrangian};
use crate::pseudoinverse::{matrix_from_rows, pinv, verify_penrose};
use crate::report::CheckReport;
use crate::suite::{run_suite, SCHEMA, ZIGZAG_SLACK};
use crate::zigzag::zigzag_sequence;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "anisolag", version, about = "Anisotropic Lagrangians, pseudo-inverse lifts and CC distances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Total number of sampled arguments.
    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,
    /// Cells per axis.
    #[arg(long, global = true, value_name = "N")]
    resolution: Option<usize>,
    /// Tabular output instead of JSON.
    #[arg(long, global = true)]
    csv: bool,
    /// Write the report to a file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List catalog anisotropies, or describe the configured one.
    Catalog,
    /// Moore-Penrose pseudo-inverse of a matrix.
    Pinv {
        /// Matrix rows as JSON, e.g. "[[1,0],[1,0]]".
        #[arg(long)]
        matrix: Option<String>,
    },
    /// Lift a Euclidean Lagrangian through the pseudo-inverse.
    Lift,
    /// Push an anisotropic Lagrangian forward through the coefficient matrix.
    Push,
    /// Sampled property checks.
    Check {
        #[command(subcommand)]
        kind: CheckKind,
    },
    /// Midpoint-rule value of an integral functional.
    Energy,
    /// Anisotropic Sobolev norm of a grid function.
    Norm,
    /// Least-squares fit in a span of basis functions.
    Fit,
    /// Graph approximation of the Carnot-Caratheodory distance.
    Ccdist,
    /// Zig-zag sequence and its uniform bound.
    Zigzag,
    /// Run the full verification battery.
    VerifySuite,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum CheckKind {
    KernelConstancy,
    Convexity,
    GrowthBound,
    EquivalentOnImage,
}

/// Rendered result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Report {
    body: Value,
    pass: bool,
    csv: Option<String>,
    summary: Option<String>,
}

impl Report {
    fn ok(body: Value) -> Self {
        Report {
            body,
            pass: true,
            csv: None,
            summary: None,
        }
    }
}

struct Ctx {
    cli: Cli,
    cfg: RunConfig,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.cli.seed.unwrap_or(self.cfg.seed)
    }

    fn tol(&self, default: f64) -> f64 {
        self.cli.tol.or(self.cfg.tol).unwrap_or(default)
    }

    fn sampling(&self, default_total: Option<usize>) -> Sampling {
        let mut s = match self.cli.samples.or(self.cfg.samples).or(default_total) {
            Some(total) => Sampling::with_total(total, self.seed()),
            None => Sampling {
                seed: self.seed(),
                ..Default::default()
            },
        };
        if let Some(r) = self.cfg.radius {
            s.radius = r;
        }
        s
    }

    fn anisotropy(&self) -> Result<Anisotropy> {
        self.cfg.anisotropy()
    }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            return if code == 0 {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let usage = |e: Error| Outcome {
        code: EXIT_USAGE,
        stdout: String::new(),
        stderr: format!("error: {e}\n"),
    };
    let cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return usage(e),
        },
        None => RunConfig::default(),
    };
    let ctx = Ctx { cli, cfg };
    let report = match dispatch(&ctx) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let text = if ctx.cli.csv {
        report.csv.unwrap_or_else(|| flatten_csv(&report.body))
    } else {
        let mut s = serde_json::to_string_pretty(&report.body).expect("JSON report");
        s.push('\n');
        s
    };
    let code = if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED };
    let stderr = report.summary.unwrap_or_default();
    match &ctx.cli.out {
        Some(path) => match std::fs::write(path, &text) {
            Ok(()) => Outcome {
                code,
                stdout: String::new(),
                stderr,
            },
            Err(e) => usage(Error::Io(format!("{}: {e}", path.display()))),
        },
        None => Outcome {
            code,
            stdout: text,
            stderr,
        },
    }
}

fn envelope(command: &str, seed: Option<u64>, fields: Value) -> Value {
    let mut map = Map::new();
    map.insert("schema".into(), json!(SCHEMA));
    map.insert("command".into(), json!(command));
    if let Some(s) = seed {
        map.insert("seed".into(), json!(s));
    }
    if let Value::Object(f) = fields {
        map.extend(f);
    }
    Value::Object(map)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

fn dispatch(ctx: &Ctx) -> Result<Report> {
    match &ctx.cli.command {
        Command::Catalog => catalog(ctx),
        Command::Pinv { matrix } => pinv_cmd(ctx, matrix.as_deref()),
        Command::Lift => transform(ctx, "lift"),
        Command::Push => transform(ctx, "push"),
        Command::Check { kind } => check(ctx, *kind),
        Command::Energy => energy(ctx),
        Command::Norm => norm(ctx),
        Command::Fit => fit(ctx),
        Command::Ccdist => ccdist(ctx),
        Command::Zigzag => zigzag(ctx),
        Command::VerifySuite => verify_suite(ctx),
    }
}

fn catalog(ctx: &Ctx) -> Result<Report> {
    if ctx.cfg.anisotropy.is_none() {
        let entries: Vec<Value> = CATALOG
            .iter()
            .map(|name| match Anisotropy::builtin(name, &CatalogParams::default()) {
                Ok(a) => to_value(&a),
                Err(e) => json!({ "name": name, "note": e.to_string() }),
            })
            .collect();
        return Ok(Report::ok(envelope("catalog", None, json!({ "entries": entries }))));
    }
    let a = ctx.anisotropy()?;
    let mut points = Vec::new();
    for p in &ctx.cfg.points {
        let c = a.coefficient_matrix(&p.x)?;
        let mut brackets = Vec::new();
        for &[i, j] in &ctx.cfg.brackets {
            if i == 0 || j == 0 || i > a.m() || j > a.m() {
                return Err(Error::Config(format!("bracket fields ({i}, {j}) out of range 1..={}", a.m())));
            }
            brackets.push(json!({ "fields": [i, j], "value": a.lie_bracket(i - 1, j - 1, &p.x)? }));
        }
        points.push(json!({
            "x": p.x,
            "matrix": crate::pseudoinverse::matrix_rows(&c),
            "brackets": brackets,
        }));
    }
    Ok(Report::ok(envelope(
        "catalog",
        None,
        json!({ "anisotropy": to_value(&a), "points": points }),
    )))
}

fn pinv_cmd(ctx: &Ctx, matrix: Option<&str>) -> Result<Report> {
    let rows: Vec<Vec<f64>> = match matrix {
        Some(s) => serde_json::from_str(s).map_err(|e| Error::Config(format!("--matrix: {e}")))?,
        None => ctx
            .cfg
            .matrix
            .clone()
            .ok_or_else(|| Error::Config("pass --matrix or a `matrix` entry in the config".into()))?,
    };
    let c = matrix_from_rows(&rows)?;
    let data = pinv(&c)?;
    let penrose = verify_penrose(&c, &data.c_p, ctx.tol(1e-12))?;
    let pass = penrose.pass;
    let body = envelope(
        "pinv",
        None,
        json!({ "result": to_value(&data), "penrose": to_value(&penrose) }),
    );
    let csv = crate::pseudoinverse::matrix_rows(&data.c_p)
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    Ok(Report {
        body,
        pass,
        csv: Some(csv),
        summary: None,
    })
}

fn evaluations(ctx: &Ctx, f: &Lagrangian) -> Result<Vec<Value>> {
    ctx.cfg
        .points
        .iter()
        .map(|p| {
            let arg = p
                .arg
                .as_ref()
                .ok_or_else(|| Error::Config("evaluation points need `arg`".into()))?;
            Ok(json!({ "x": p.x, "arg": arg, "value": f.eval(&p.x, arg)? }))
        })
        .collect()
}

fn transform(ctx: &Ctx, which: &str) -> Result<Report> {
    let a = ctx.anisotropy()?;
    let f = ctx.cfg.lagrangian(&a)?;
    let g = if which == "lift" { lift(&f, &a)? } else { pushforward(&f, &a)? };
    let mut fields = json!({
        "input": to_value(&f),
        "output": to_value(&g),
        "evaluations": evaluations(ctx, &g)?,
    });
    let mut pass = true;
    if ctx.cfg.lagrangian2.is_some() {
        let expected = ctx.cfg.lagrangian2(&a)?;
        let rep = check_agreement(&g, &expected, a.domain(), &ctx.sampling(None), ctx.tol(TOL_ALGEBRAIC))?;
        pass = rep.pass;
        fields["expected"] = to_value(&expected);
        fields["comparison"] = to_value(&rep);
    }
    Ok(Report {
        body: envelope(which, Some(ctx.seed()), fields),
        pass,
        csv: None,
        summary: None,
    })
}

fn check(ctx: &Ctx, kind: CheckKind) -> Result<Report> {
    let a = ctx.anisotropy()?;
    let f = ctx.cfg.lagrangian(&a)?;
    let sampling = ctx.sampling(None);
    let tol = ctx.tol(TOL_ALGEBRAIC);
    let (name, rep): (&str, CheckReport) = match kind {
        CheckKind::KernelConstancy => ("kernel-constancy", check_kernel_constancy(&f, &a, &sampling, tol)?),
        CheckKind::Convexity => ("convexity", check_convexity(&f, a.domain(), &sampling, tol)?),
        CheckKind::GrowthBound => {
            let g = ctx.cfg.growth()?;
            ("growth-bound", check_growth_bound(&f, &a, &g.a, g.b, g.p, &sampling)?)
        }
        CheckKind::EquivalentOnImage => {
            let f2 = ctx.cfg.lagrangian2(&a)?;
            ("equivalent-on-image", equivalent_on_image(&f, &f2, &a, &sampling, tol)?)
        }
    };
    let pass = rep.pass;
    let mut fields = to_value(&rep);
    fields["lagrangian"] = to_value(&f);
    Ok(Report {
        body: envelope(&format!("check {name}"), Some(ctx.seed()), fields),
        pass,
        csv: None,
        summary: None,
    })
}

fn grid_function(ctx: &Ctx, a: Option<&Anisotropy>) -> Result<GridFunction> {
    let grid = ctx.cfg.grid(a.map(|a| a.domain()), ctx.cli.resolution)?;
    GridFunction::from_expr(grid, ctx.cfg.u()?)
}

fn energy(ctx: &Ctx) -> Result<Report> {
    let a = ctx.anisotropy()?;
    let f = ctx.cfg.lagrangian(&a)?;
    let u = grid_function(ctx, Some(&a))?;
    let value = functional_eval(&f, &u, &a, ctx.cfg.region.as_ref())?;
    Ok(Report::ok(envelope(
        "energy",
        None,
        json!({
            "value": value,
            "lagrangian": to_value(&f),
            "u": ctx.cfg.u()?.to_string(),
            "grid": to_value(u.grid()),
            "region": ctx.cfg.region.as_ref().map(to_value),
        }),
    )))
}

fn norm(ctx: &Ctx) -> Result<Report> {
    let a = ctx.anisotropy()?;
    let u = grid_function(ctx, Some(&a))?;
    let p = ctx.cfg.p.unwrap_or(2.0);
    let n = sobolev_norm(&u, &a, p)?;
    let mut fields = to_value(&n);
    fields["p"] = json!(p);
    fields["u"] = json!(ctx.cfg.u()?.to_string());
    fields["grid"] = to_value(u.grid());
    Ok(Report::ok(envelope("norm", None, fields)))
}

fn fit(ctx: &Ctx) -> Result<Report> {
    let a = match &ctx.cfg.anisotropy {
        Some(_) => Some(ctx.anisotropy()?),
        None => None,
    };
    let u = grid_function(ctx, a.as_ref())?;
    let basis = ctx.cfg.basis()?;
    let fit = best_affine_fit(&u, basis, ctx.cfg.p.unwrap_or(2.0))?;
    let mut fields = to_value(&fit);
    fields["basis"] = json!(basis.iter().map(|b| b.to_string()).collect::<Vec<_>>());
    fields["u"] = json!(ctx.cfg.u()?.to_string());
    fields["grid"] = to_value(u.grid());
    let mut report = Report::ok(envelope("fit", None, fields));
    if fit.rank_deficiency > 0 {
        report.summary = Some(format!(
            "warning: normal matrix is rank-deficient by {}; coefficients are the minimum-norm solution\n",
            fit.rank_deficiency
        ));
    }
    Ok(report)
}

fn ccdist(ctx: &Ctx) -> Result<Report> {
    let a = ctx.anisotropy()?;
    let cc = ctx.cfg.ccdist()?;
    let grid = ctx.cfg.grid(Some(a.domain()), ctx.cli.resolution)?;
    let g = HorizontalGraph::build(&a, &grid, cc.radius, cc.tau_span)?;
    let q = cc_distance(&g, &cc.from, &cc.to)?;
    let mut fields = to_value(&q);
    fields["graph"] = json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "radius": g.radius(),
        "tau_span": g.tau_span(),
        "grid": to_value(&grid),
    });
    let csv = if ctx.cli.csv {
        let mut buf = Vec::new();
        g.write_edges_csv(&mut buf)?;
        Some(String::from_utf8(buf).expect("ASCII CSV"))
    } else {
        None
    };
    Ok(Report {
        body: envelope("ccdist", None, fields),
        pass: true,
        csv,
        summary: None,
    })
}

fn zigzag(ctx: &Ctx) -> Result<Report> {
    let z = ctx.cfg.zigzag()?;
    let domain = z
        .domain
        .clone()
        .unwrap_or_else(|| crate::domain::BoxDomain::unit(z.xi1.len()));
    let seq = zigzag_sequence(&z.xi1, &z.xi2, z.t, z.h, &domain)?;
    let samples = ctx.cli.samples.or(ctx.cfg.samples).unwrap_or(10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed());
    let (mut sup, mut hits) = (0.0f64, 0usize);
    for _ in 0..samples {
        let y = domain.sample(&mut rng);
        let piece = seq.function.piece_at(&y)?;
        sup = sup.max((piece.eval(&y) - seq.limit(&y)).abs());
        hits += (piece.gradient == z.xi1) as usize;
    }
    let pass = sup <= seq.sup_bound + ZIGZAG_SLACK;
    Ok(Report {
        body: envelope(
            "zigzag",
            Some(ctx.seed()),
            json!({
                "xi1": seq.xi1,
                "xi2": seq.xi2,
                "t": seq.t,
                "h": seq.h,
                "box": to_value(&domain),
                "mean_gradient": seq.mean_gradient,
                "sup_bound": seq.sup_bound,
                "sup_deviation": sup,
                "xi1_fraction": hits as f64 / samples.max(1) as f64,
                "samples": samples,
                "pieces": seq.function.pieces.len(),
                "pass": pass,
            }),
        ),
        pass,
        csv: None,
        summary: None,
    })
}

fn verify_suite(ctx: &Ctx) -> Result<Report> {
    let report = run_suite(ctx.seed())?;
    let mut csv = String::from("id,criterion,pass\n");
    for c in &report.criteria {
        csv.push_str(&format!("{},{},{}\n", c.id, c.name, c.pass));
    }
    Ok(Report {
        body: to_value(&report),
        pass: report.pass,
        csv: Some(csv),
        summary: Some(report.table()),
    })
}

/// `key,value` rows with dotted paths for nested fields.
fn flatten_csv(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let join = |k: &str| if prefix.is_empty() { k.to_owned() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(m) => m.iter().for_each(|(k, x)| walk(&join(k), x, out)),
            Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| walk(&join(&i.to_string()), x, out)),
            Value::String(s) => out.push((prefix.to_owned(), s.clone())),
            Value::Null => out.push((prefix.to_owned(), String::new())),
            other => out.push((prefix.to_owned(), other.to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", v, &mut rows);
    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["key", "value"]).expect("in-memory CSV");
    for (k, x) in rows {
        wr.write_record([k, x]).expect("in-memory CSV");
    }
    String::from_utf8(wr.into_inner().expect("in-memory CSV")).expect("UTF-8 CSV")
}
