use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use bdry_geom::boundary::{
    fermi_direct_coefficients, fermi_formula_coefficients, fermi_geodesic_expansion, normal_form_residual,
    FermiExpansion, Sym3,
};
use bdry_geom::functionals::{
    build_umbilic_variation, check_variation_spd, first_variation_check, functional_report, interior_variation,
    lp_residual, random_sigma, stencil_convergence, ExecutionTag, VariationOptions, VARIATION_FLOOR,
};
use bdry_geom::metric::{metric_at, MetricDefinition, MetricPatch, PointSample};
use bdry_geom::models::{builtin_model, ModelSpec, CATALOG};
use bdry_geom::par::Execution;
use bdry_geom::report::{self, convention_self_test, run_suites, Suite, SuiteConfig, MAX_ORDER, SELF_TEST_TOL};
use bdry_geom::GeomError;

#[derive(Parser)]
#[command(name = "bdry-geom", version, about = "Curvature identities and functionals on 4-manifolds with boundary")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and report pass/fail per check.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        /// `all` or a comma-separated list of suites.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value_t = 16)]
        quad: usize,
        #[arg(long, default_value_t = 4)]
        order: usize,
        /// Replace every check tolerance with this value.
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print the expansion h⁽⁰⁾…h⁽ᵏ⁾ of the boundary metric in the normal direction.
    Expand {
        #[command(flatten)]
        model: ModelArgs,
        /// Tangential boundary coordinates `x1,x2,x3` (default: centre of the face).
        #[arg(long, value_delimiter = ',', num_args = 3)]
        at: Option<Vec<f64>>,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Evaluate E_b, W, W_b, the volume and the Yamabe quotient.
    Functional {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 16)]
        quad: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compare the numeric derivative of W_b along a variation with the Bach/S formula.
    Variation {
        #[command(flatten)]
        model: ModelArgs,
        /// Six comma-separated expressions `v11,v12,v13,v22,v23,v33` for vΣ
        /// (default: random from the seed).
        #[arg(long)]
        sigma: Option<String>,
        /// Use an interior-supported variation instead.
        #[arg(long)]
        interior: bool,
        /// Quadrature nodes per axis on the support box.
        #[arg(long, default_value_t = 8)]
        quad: usize,
        #[arg(long, default_value_t = 1e-4)]
        t_step: f64,
        /// Largest step of the stencil convergence estimate (0 skips it).
        #[arg(long, default_value_t = 0.04)]
        stencil_step: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// List the built-in models.
    Models,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Built-in model name (see `models`).
    #[arg(long, conflicts_with = "metric_file")]
    model: Option<String>,
    /// JSON metric definition, or `{"model": ..., "params": {...}}`.
    #[arg(long)]
    metric_file: Option<PathBuf>,
    /// Model parameter, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Extend flat_ball_collar to the whole ball.
    #[arg(long)]
    full_ball: bool,
    /// Seed for sampling, random variations and conformal factors; also the
    /// perturbed_flat seed unless given as a parameter.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args, Clone)]
struct OutArgs {
    /// Write the JSON report here (`-` for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

impl OutArgs {
    fn exec(&self) -> ExecutionTag {
        if self.sequential {
            ExecutionTag::Sequential
        } else {
            ExecutionTag::Parallel
        }
    }
}

enum Failure {
    Config(String),
    Eval(String),
}

/// Tags an evaluation error with the step that raised it.
fn step(name: &'static str) -> impl Fn(GeomError) -> Failure {
    move |e| {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Eval(format!("{name}: {e}"))
        }
    }
}

impl From<GeomError> for Failure {
    fn from(e: GeomError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Eval(e.to_string())
        }
    }
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_EVAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify {
            model,
            suite,
            points,
            quad,
            order,
            tol,
            out,
        } => verify(&model, &suite, points, quad, order, tol, &out),
        Command::Expand { model, at, order, out } => expand(&model, at, order, &out),
        Command::Functional { model, quad, out } => functional(&model, quad, &out),
        Command::Variation {
            model,
            sigma,
            interior,
            quad,
            t_step,
            stencil_step,
            tol,
            out,
        } => variation(&model, sigma.as_deref(), interior, quad, t_step, stencil_step, tol, &out),
        Command::Models => {
            for m in CATALOG {
                println!("{:<26} {}", m.name, m.summary);
                if !m.params.is_empty() {
                    println!("{:<26}   params: {}", "", m.params);
                }
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Eval(m)) => {
            eprintln!("evaluation error: {m}");
            ExitCode::from(EXIT_EVAL)
        }
    }
}

fn param_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn load_model(args: &ModelArgs, variation: bool) -> Result<(MetricPatch, String), Failure> {
    let mut spec = match (&args.model, &args.metric_file) {
        (Some(name), None) => ModelSpec::named(name),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let doc: Value =
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            if doc.get("model").is_some() {
                serde_json::from_value::<ModelSpec>(doc).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
            } else {
                let def: MetricDefinition =
                    serde_json::from_value(doc).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                if !args.params.is_empty() || args.full_ball {
                    return Err(Failure::Config("--param and --full-ball apply to built-in models only".into()));
                }
                return Ok((def.into_patch()?, path.display().to_string()));
            }
        }
        (None, None) => return Err(Failure::Config("one of --model or --metric-file is required".into())),
        (Some(_), Some(_)) => return Err(Failure::Config("--model and --metric-file are exclusive".into())),
    };
    for p in &args.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--param {p}: expected KEY=VALUE")))?;
        spec.params.insert(k.trim().to_string(), param_value(v.trim()));
    }
    if args.full_ball {
        spec.params.insert("full_ball".into(), Value::Bool(true));
    }
    if spec.model == "perturbed_flat" {
        spec.params.entry("seed".into()).or_insert(json!(args.seed));
        if variation {
            // admissible variations need an umbilic boundary
            spec.params.entry("mode".into()).or_insert(json!("umbilic"));
        }
    }
    let source = spec.model.clone();
    Ok((builtin_model(&spec)?, source))
}

fn write_json(out: &OutArgs, v: &Value) -> Result<(), Failure> {
    let Some(path) = &out.json else { return Ok(()) };
    let text = serde_json::to_string_pretty(v).expect("JSON value serializes");
    if path == Path::new("-") {
        println!("{text}");
        Ok(())
    } else {
        fs::write(path, text + "\n").map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }
}

fn print_checks(checks: &[report::Check]) {
    println!("{:<28} {:>11} {:>9} {:>5}  status", "check", "residual", "tol", "n");
    for c in checks {
        let status = match (&c.skipped, c.pass) {
            (Some(r), _) => format!("skipped ({r})"),
            (None, true) => "pass".into(),
            (None, false) => "FAIL".into(),
        };
        println!(
            "{:<28} {:>11.3e} {:>9.1e} {:>5}  {status}",
            c.name, c.max_residual, c.tolerance, c.n_samples
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn verify(
    args: &ModelArgs,
    suite: &str,
    points: usize,
    quad: usize,
    order: usize,
    tol: Option<f64>,
    out: &OutArgs,
) -> Result<bool, Failure> {
    let suites = Suite::parse_list(suite)?;
    let (patch, source) = load_model(args, false)?;
    let cfg = SuiteConfig {
        source,
        suites,
        points,
        order,
        quad,
        seed: args.seed,
        tol,
        exec: out.exec(),
    };
    cfg.validate()?;
    let report = run_suites(&patch, &cfg).map_err(|e| {
        if e.source.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Eval(e.to_string())
        }
    })?;
    println!("model {}  ({} checks)", report.model, report.checks.len());
    print_checks(&report.checks);
    println!("{}  in {:.1}s", if report.pass { "PASS" } else { "FAIL" }, report.wall_time_s);
    write_json(out, &serde_json::to_value(&report).expect("report serializes"))?;
    Ok(report.pass)
}

fn face_centre(patch: &MetricPatch) -> [f64; 3] {
    std::array::from_fn(|a| 0.5 * (patch.chart.domain[a + 1][0] + patch.chart.domain[a + 1][1]))
}

/// `c` with `h_k = c h_0`, when that holds to 1e-9.
fn proportional(hk: &Sym3, h0: &Sym3) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            num += hk[i][j] * h0[i][j];
            den += h0[i][j] * h0[i][j];
        }
    }
    let c = num / den;
    let ok = (0..3).all(|i| (0..3).all(|j| (hk[i][j] - c * h0[i][j]).abs() <= 1e-9));
    ok.then_some(c)
}

fn expand(args: &ModelArgs, at: Option<Vec<f64>>, order: usize, out: &OutArgs) -> Result<bool, Failure> {
    if order > MAX_ORDER {
        return Err(Failure::Config(format!("--order {order} exceeds the jet order cap {MAX_ORDER}")));
    }
    let (patch, _) = load_model(args, false)?;
    let t = match at {
        Some(v) => [v[0], v[1], v[2]],
        None => face_centre(&patch),
    };
    let point = PointSample::boundary(&patch.chart, t)?;
    let normal_form = normal_form_residual(&metric_at(&patch, &point, order.max(1))?) <= 1e-12;

    let mut routes: Vec<(&str, FermiExpansion)> = Vec::new();
    if normal_form {
        routes.push(("direct", fermi_direct_coefficients(&patch, &point, order).map_err(step("expand-direct"))?));
        let mut f = fermi_formula_coefficients(&patch, &point).map_err(step("expand-formula"))?;
        f.coeffs.truncate(order + 1);
        routes.push(("formula", f));
    }
    // the geodesic route needs metric jets of order k + 2
    if order + 2 <= MAX_ORDER {
        routes.push(("geodesic", fermi_geodesic_expansion(&patch, &point, order).map_err(step("expand-geodesic"))?));
    }
    let h0 = routes
        .first()
        .map(|(_, r)| r.coeffs[0])
        .ok_or_else(|| Failure::Config(format!("order {order} needs a normal-form chart")))?;

    println!("model {}  boundary point {:?}", patch.name, point.coords);
    if !normal_form {
        println!("chart not in normal form: geodesic route only");
    }
    for k in 0..=order {
        let hk = routes.iter().rev().find(|(_, r)| r.coeffs.len() > k).map(|(_, r)| r.coeffs[k]);
        let Some(hk) = hk else { continue };
        let shape = match proportional(&hk, &h0) {
            Some(c) if c.abs() < 1e-12 => "0".to_string(),
            Some(c) => format!("{c:.9} h0"),
            None => "not proportional to h0".into(),
        };
        println!("h({k}) = {shape}");
        for row in hk {
            let r = row.map(|x| if x.abs() < 5e-10 { 0.0 } else { x });
            println!("    [{:>14.9} {:>14.9} {:>14.9}]", r[0], r[1], r[2]);
        }
    }
    println!("route residuals (max |difference| over the orders both routes reach)");
    let mut residuals = Vec::new();
    for a in 0..routes.len() {
        for b in a + 1..routes.len() {
            let d = routes[a].1.max_diff(&routes[b].1);
            let upto = routes[a].1.coeffs.len().min(routes[b].1.coeffs.len()) - 1;
            println!("    {:<9} vs {:<9} {:.3e}  (orders 0..={upto})", routes[a].0, routes[b].0, d);
            residuals.push(json!({"a": routes[a].0, "b": routes[b].0, "through_order": upto, "max_diff": d}));
        }
    }
    if residuals.is_empty() {
        println!("    single route, nothing to compare");
    }
    let doc = json!({
        "schema": report::SCHEMA,
        "model": patch.name,
        "point": point.coords,
        "order": order,
        "normal_form": normal_form,
        "routes": routes.iter().map(|(n, r)| (n.to_string(), json!(r.coeffs))).collect::<serde_json::Map<_, _>>(),
        "residuals": residuals,
    });
    write_json(out, &doc)?;
    Ok(true)
}

fn functional(args: &ModelArgs, quad: usize, out: &OutArgs) -> Result<bool, Failure> {
    let (patch, _) = load_model(args, false)?;
    let r = functional_report(&patch, quad, out.exec().into()).map_err(step("functionals"))?;
    println!("model {}  quadrature {}^4 (error: difference to {}^4)", r.model, r.n, r.n / 2);
    for ((name, v), (_, e)) in r.values.named().iter().zip(&r.errors) {
        println!("{name:<26} {v:>22.12e}  ± {e:.1e}");
    }
    let mut doc = serde_json::to_value(&r).expect("report serializes");
    doc["schema"] = json!(report::SCHEMA);
    write_json(out, &doc)?;
    Ok(true)
}

fn parse_sigma(src: &str) -> Result<[[String; 3]; 3], Failure> {
    let parts: Vec<&str> = src.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(Failure::Config("--sigma needs six expressions v11,v12,v13,v22,v23,v33".into()));
    }
    let idx = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| parts[idx[i][j]].to_string())))
}

#[allow(clippy::too_many_arguments)]
fn variation(
    args: &ModelArgs,
    sigma: Option<&str>,
    interior: bool,
    quad: usize,
    t_step: f64,
    stencil_step: f64,
    tol: f64,
    out: &OutArgs,
) -> Result<bool, Failure> {
    if tol.is_nan() || tol <= 0.0 || t_step.is_nan() || t_step <= 0.0 || quad < 2 {
        return Err(Failure::Config("--tol and --t-step must be positive, --quad at least 2".into()));
    }
    let (patch, _) = load_model(args, true)?;
    let exec: Execution = out.exec().into();
    let self_test = convention_self_test(exec).map_err(step("convention-self-test"))?;
    println!("convention self-test: relative {self_test:.2e} (tol {SELF_TEST_TOL:.0e})");

    let d = patch.chart.domain;
    let mid = |a: usize| [d[a][0] + 0.2 * (d[a][1] - d[a][0]), d[a][0] + 0.8 * (d[a][1] - d[a][0])];
    let v = if interior {
        let m = [[0.3, 0.1, 0.0, -0.2], [0.1, -0.4, 0.2, 0.0], [0.0, 0.2, 0.5, 0.1], [-0.2, 0.0, 0.1, 0.2]];
        interior_variation(&patch, [mid(0), mid(1), mid(2), mid(3)], m)?
    } else {
        let s = match sigma {
            Some(src) => parse_sigma(src)?,
            None => random_sigma(&patch, args.seed),
        };
        let eps = 0.3 * (d[0][1] - d[0][0]).min(1.0);
        build_umbilic_variation(&patch, &report::as_refs(&s), eps, [mid(1), mid(2), mid(3)])?
    };
    check_variation_spd(&patch, &v, 2.0 * t_step.max(stencil_step), quad).map_err(step("variation-spd"))?;

    let lp = if interior {
        0.0
    } else {
        let mut worst = 0.0f64;
        for k in 0..5 {
            let s = 0.1 + 0.2 * k as f64;
            let t: [f64; 3] = std::array::from_fn(|a| v.support[a + 1][0] + s * (v.support[a + 1][1] - v.support[a + 1][0]));
            let p = PointSample::boundary(&patch.chart, t)?;
            worst = worst.max(lp_residual(&patch, &v, &p).map_err(step("variation-constraint"))?);
        }
        worst
    };
    let opts = VariationOptions {
        t_step,
        n: quad,
        exec: out.exec(),
    };
    let r = first_variation_check(&patch, &v, &opts).map_err(step("first-variation"))?;
    let stencil = if stencil_step > 0.0 && r.numeric.abs().max(r.formula.abs()) > VARIATION_FLOOR {
        Some(stencil_convergence(&patch, &v, stencil_step, quad, exec).map_err(step("stencil-convergence"))?)
    } else {
        None
    };

    println!("model {}  {} variation, support {:?}", patch.name, if interior { "interior" } else { "boundary" }, v.support);
    println!("numeric  dW_b/dt          {:>18.10e}", r.numeric);
    println!("formula  -∫B·v + ∮S·v      {:>18.10e}", r.formula);
    println!("   Bach term              {:>18.10e}", r.bach_term);
    println!("   boundary term          {:>18.10e}", r.boundary_term);
    println!("absolute {:.3e}  relative {:.3e}  (tol {tol:.0e})", r.absolute, r.relative);
    if !interior {
        println!("umbilicity constraint residual {lp:.3e}");
    }
    match &stencil {
        Some(s) => println!("stencil error ratio {:.2} (order ≈ {:.2})", s.ratio, s.ratio.log2()),
        None => println!("stencil error ratio: n/a (derivative below {VARIATION_FLOOR:.0e})"),
    }
    let pass = r.relative <= tol && self_test <= SELF_TEST_TOL && lp <= bdry_geom::functionals::LP_TOL;
    println!("{}", if pass { "PASS" } else { "FAIL" });
    let doc = json!({
        "schema": report::SCHEMA,
        "model": patch.name,
        "kind": if interior { "interior" } else { "boundary" },
        "support": v.support,
        "self_test_relative": self_test,
        "constraint_residual": lp,
        "result": r,
        "stencil": stencil,
        "tolerance": tol,
        "pass": pass,
    });
    write_json(out, &doc)?;
    Ok(pass)
}
