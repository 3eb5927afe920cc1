use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biwarranty::benefit::{EconomicConfig, EconomicSettings};
use biwarranty::copula::{fit_joint_mle, JointFitOptions, JointModel};
use biwarranty::data::Dataset;
use biwarranty::error::Error;
use biwarranty::gof::{ad_pvalue_with, ad_simple_null_pvalue, kaplan_meier, NullHypothesis};
use biwarranty::marginal::{fit_weibull_mle, weibull_survival};
use biwarranty::optimizer::{optimize_region, run_policy_table, OptimizerOptions};
use biwarranty::policy::{cost_surface_grid, grid_to_csv, pair_label, GridSpec, PolicyKind, TABLE_ORDER};
use biwarranty::utility::QuadratureSpec;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

/// Bivariate warranty modeling: fit the Gumbel/Weibull model, test the fit,
/// calibrate the benefit and optimize warranty regions.
#[derive(Parser, Debug)]
#[command(name = "biwarranty", version)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Marginal and joint maximum-likelihood fits.
    Fit,
    /// Anderson–Darling tests of the Weibull marginals.
    Gof,
    /// Warranty anchors and benefit rates.
    Calibrate,
    /// Optimal region for one policy pair.
    Optimize {
        /// Policy pair as `T,U`, for example `CW,PRW`.
        #[arg(long, default_value = "CW,CW")]
        policy: String,
    },
    /// Optimal regions for all nine pairs at each price.
    Table {
        /// Comma-separated sale prices.
        #[arg(long)]
        prices: Option<String>,
    },
    /// Cost-per-failure grids for the nine pairs at their optimal regions.
    Surface {
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Parametric and Kaplan–Meier reliability per axis.
    Curves {
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Failure data, CSV with header `age,usage`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// TOML file with any of the options below (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sale price.
    #[arg(long = "S", global = true)]
    price: Option<f64>,
    /// Profit per unit sold.
    #[arg(long = "A1", global = true)]
    unit_profit: Option<f64>,
    /// Potential market size.
    #[arg(long = "M", global = true)]
    market_size: Option<f64>,
    /// Benefit retained on the age axis when FRW becomes PRW.
    #[arg(long, global = true)]
    q1: Option<f64>,
    /// Benefit retained on the usage axis when FRW becomes PRW.
    #[arg(long, global = true)]
    q2: Option<f64>,
    /// Marginal quantile used for the anchors.
    #[arg(long, global = true)]
    anchor_p: Option<f64>,
    #[arg(long, global = true)]
    t_w: Option<f64>,
    #[arg(long, global = true)]
    u_w: Option<f64>,
    #[arg(long, global = true)]
    a2: Option<f64>,
    #[arg(long, global = true)]
    a3: Option<f64>,
    /// Model parameters; give all five to skip fitting.
    #[arg(long, global = true)]
    shape_t: Option<f64>,
    #[arg(long, global = true)]
    scale_t: Option<f64>,
    #[arg(long, global = true)]
    shape_u: Option<f64>,
    #[arg(long, global = true)]
    scale_u: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Gauss–Legendre nodes per axis.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Bootstrap replicates.
    #[arg(short = 'B', long = "bootstrap", global = true)]
    bootstrap: Option<usize>,
}

/// Config-file form of [`CommonArgs`]; keys match the long flag names.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    #[serde(rename = "S")]
    price: Option<f64>,
    #[serde(rename = "A1")]
    unit_profit: Option<f64>,
    #[serde(rename = "M")]
    market_size: Option<f64>,
    q1: Option<f64>,
    q2: Option<f64>,
    anchor_p: Option<f64>,
    t_w: Option<f64>,
    u_w: Option<f64>,
    a2: Option<f64>,
    a3: Option<f64>,
    shape_t: Option<f64>,
    scale_t: Option<f64>,
    shape_u: Option<f64>,
    scale_u: Option<f64>,
    theta: Option<f64>,
    nodes: Option<usize>,
    #[serde(rename = "B")]
    bootstrap: Option<usize>,
    prices: Option<Vec<f64>>,
}

const DEFAULT_DATA: &str = "data/traction_motors.csv";
const DEFAULT_SEED: u64 = 20240101;
const DEFAULT_BOOTSTRAP: usize = 10_000;
const DEFAULT_PRICES: [f64; 3] = [500.0, 700.0, 900.0];

struct Settings {
    data: PathBuf,
    out: Option<PathBuf>,
    seed: u64,
    economics: EconomicSettings,
    explicit_model: Option<[f64; 5]>,
    quadrature: QuadratureSpec,
    bootstrap: usize,
    prices: Option<Vec<f64>>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn resolve(args: CommonArgs) -> Result<Settings, Error> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
            toml::from_str::<FileConfig>(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let mut economics = EconomicSettings::default();
    if let Some(v) = args.price.or(file.price) {
        economics.price = v;
    }
    if let Some(v) = args.unit_profit.or(file.unit_profit) {
        economics.unit_profit = v;
    }
    if let Some(v) = args.market_size.or(file.market_size) {
        economics.market_size = v;
    }
    if let Some(v) = args.q1.or(file.q1) {
        economics.retention_t = v;
    }
    if let Some(v) = args.q2.or(file.q2) {
        economics.retention_u = v;
    }
    if let Some(v) = args.anchor_p.or(file.anchor_p) {
        economics.anchor_p = v;
    }
    economics.anchor_t = args.t_w.or(file.t_w);
    economics.anchor_u = args.u_w.or(file.u_w);
    economics.rate_t = args.a2.or(file.a2);
    economics.rate_u = args.a3.or(file.a3);
    validate_economics(&economics)?;

    let params = [
        args.shape_t.or(file.shape_t),
        args.scale_t.or(file.scale_t),
        args.shape_u.or(file.shape_u),
        args.scale_u.or(file.scale_u),
        args.theta.or(file.theta),
    ];
    let given = params.iter().filter(|p| p.is_some()).count();
    let explicit_model = match given {
        0 => None,
        5 => Some(params.map(|p| p.unwrap())),
        _ => return Err(invalid("give all of --shape-t, --scale-t, --shape-u, --scale-u, --theta or none")),
    };

    let mut quadrature = QuadratureSpec::default();
    if let Some(n) = args.nodes.or(file.nodes) {
        quadrature.nodes_per_axis = n;
    }
    quadrature.validate()?;

    Ok(Settings {
        data: args.data.or(file.data).unwrap_or_else(|| PathBuf::from(DEFAULT_DATA)),
        out: args.out.or(file.out),
        seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        economics,
        explicit_model,
        quadrature,
        bootstrap: args.bootstrap.or(file.bootstrap).unwrap_or(DEFAULT_BOOTSTRAP),
        prices: file.prices,
    })
}

/// Rejects bad economic inputs before any fitting happens. Quantities that
/// are derived from the model later get a neutral stand-in here.
fn validate_economics(e: &EconomicSettings) -> Result<(), Error> {
    if !(e.anchor_p > 0.0 && e.anchor_p < 1.0) {
        return Err(invalid(format!("anchor_p must lie in (0, 1), got {}", e.anchor_p)));
    }
    EconomicConfig {
        price: e.price,
        unit_profit: e.unit_profit,
        market_size: e.market_size,
        retention_t: e.retention_t,
        retention_u: e.retention_u,
        anchor_p: e.anchor_p,
        anchor_t: e.anchor_t.unwrap_or(1.0),
        anchor_u: e.anchor_u.unwrap_or(1.0),
        rate_t: e.rate_t.unwrap_or(1.0),
        rate_u: e.rate_u.unwrap_or(1.0),
    }
    .validate()
}

impl Settings {
    fn dataset(&self) -> Result<Dataset, Error> {
        Dataset::load(&self.data)
    }

    fn model(&self) -> Result<JointModel, Error> {
        match self.explicit_model {
            Some([kt, st, ku, su, theta]) => JointModel::from_params(kt, st, ku, su, theta),
            None => Ok(fit_joint_mle(&self.dataset()?, None, &self.fit_options())?.model),
        }
    }

    fn fit_options(&self) -> JointFitOptions {
        JointFitOptions { seed: self.seed, ..JointFitOptions::default() }
    }

    fn optimizer(&self) -> OptimizerOptions {
        OptimizerOptions { quadrature: self.quadrature, ..OptimizerOptions::default() }
    }

    fn config(&self, m: &JointModel) -> Result<EconomicConfig, Error> {
        self.economics.calibrate(m)
    }

    fn write(&self, name: &str, contents: &str) -> Result<Option<String>, Error> {
        let Some(dir) = &self.out else { return Ok(None) };
        let io = |p: &Path, e: std::io::Error| Error::Io { path: p.display().to_string(), message: e.to_string() };
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io(&path, e))?;
        Ok(Some(path.display().to_string()))
    }
}

fn model_json(m: &JointModel) -> Value {
    json!({
        "shape_t": m.margin_t().shape(),
        "scale_t": m.margin_t().scale(),
        "shape_u": m.margin_u().shape(),
        "scale_u": m.margin_u().scale(),
        "theta": m.theta(),
    })
}

fn cmd_fit(s: &Settings) -> Result<Value, Error> {
    let d = s.dataset()?;
    let age = fit_weibull_mle(&d.ages())?;
    let usage = fit_weibull_mle(&d.usages())?;
    let joint = match s.explicit_model {
        Some(_) => return Err(invalid("fit estimates the model; drop the explicit parameters")),
        None => fit_joint_mle(&d, None, &s.fit_options())?,
    };
    let mut model = model_json(&joint.model);
    model["loglik"] = json!(joint.loglik);
    model["kendall_tau"] = json!(joint.model.kendall_tau());
    Ok(json!({
        "data": d.source(),
        "records": d.len(),
        "units": "scaled units",
        "marginal": {
            "age": { "shape": age.params.shape(), "scale": age.params.scale(), "loglik": age.loglik },
            "usage": { "shape": usage.params.shape(), "scale": usage.params.scale(), "loglik": usage.loglik },
        },
        "joint": model,
        "report": joint.report,
    }))
}

fn cmd_gof(s: &Settings) -> Result<Value, Error> {
    let d = s.dataset()?;
    let mut out = serde_json::Map::new();
    for (i, (name, xs)) in [("age", d.ages()), ("usage", d.usages())].into_iter().enumerate() {
        let seed = biwarranty::rng::split_seed(s.seed, i as u64);
        let composite = ad_pvalue_with(&xs, s.bootstrap, seed, NullHypothesis::Composite)?;
        let simple = ad_pvalue_with(&xs, s.bootstrap, seed, NullHypothesis::Simple)?;
        out.insert(
            name.into(),
            json!({
                "shape": composite.params.shape(),
                "scale": composite.params.scale(),
                "statistic": composite.statistic,
                "p_value_composite": composite.p_value,
                "p_value_simple": simple.p_value,
                "p_value_simple_asymptotic": ad_simple_null_pvalue(xs.len(), composite.statistic),
                "replicates": s.bootstrap,
                "failed_replicates": composite.failed_replicates,
            }),
        );
    }
    Ok(Value::Object(out))
}

fn cmd_calibrate(s: &Settings) -> Result<Value, Error> {
    let m = s.model()?;
    let cfg = s.config(&m)?;
    Ok(json!({
        "model": model_json(&m),
        "t_w": cfg.anchor_t,
        "u_w": cfg.anchor_u,
        "A2": cfg.rate_t,
        "A3": cfg.rate_u,
        "config": cfg,
    }))
}

fn parse_pair(text: &str) -> Result<(PolicyKind, PolicyKind), Error> {
    let parts: Vec<&str> = text.split([',', 'x', 'X', '×']).map(str::trim).filter(|p| !p.is_empty()).collect();
    match parts.as_slice() {
        [t, u] => Ok((t.parse()?, u.parse()?)),
        _ => Err(invalid(format!("policy pair `{text}` should look like CW,PRW"))),
    }
}

fn cmd_optimize(s: &Settings, policy: &str) -> Result<Value, Error> {
    let kinds = parse_pair(policy)?;
    let m = s.model()?;
    let cfg = s.config(&m)?;
    let result = optimize_region(kinds, &m, &cfg, &s.optimizer(), s.seed)?;
    let value = serde_json::to_value(&result).expect("results serialize");
    if let Some(path) = s.write("optimize.json", &pretty(&value))? {
        return Ok(json!({ "result": value, "written": [path] }));
    }
    Ok(value)
}

fn parse_prices(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| invalid(format!("bad price `{p}`"))))
        .collect()
}

fn cmd_table(s: &Settings, prices: Option<&str>) -> Result<Value, Error> {
    let prices = match prices {
        Some(p) => parse_prices(p)?,
        None => s.prices.clone().unwrap_or_else(|| DEFAULT_PRICES.to_vec()),
    };
    if prices.is_empty() {
        return Err(invalid("at least one price is required"));
    }
    let m = s.model()?;
    let cfg = s.config(&m)?;
    for &p in &prices {
        cfg.with_price(p).validate()?;
    }
    let tables = run_policy_table(&m, &cfg, &prices, &s.optimizer(), s.seed);
    let mut written = Vec::new();
    let mut summary = Vec::new();
    for t in &tables {
        let csv = t.to_csv();
        if let Some(path) = s.write(&format!("table_S{}.csv", t.price), &csv)? {
            written.push(path);
        }
        let rows: Vec<Value> = t
            .rows
            .iter()
            .map(|r| match &r.result {
                Ok(o) => json!({
                    "policy": r.label,
                    "t_w1": o.region.t_w1,
                    "t_w2": o.region.t_w2,
                    "u_w1": o.region.u_w1,
                    "u_w2": o.region.u_w2,
                    "utility": o.utility,
                    "warnings": o.warnings,
                }),
                Err(e) => json!({ "policy": r.label, "error": e }),
            })
            .collect();
        summary.push(json!({ "S": t.price, "best": t.best, "worst": t.worst, "rows": rows, "csv": csv }));
    }
    let full = serde_json::to_value(&tables).expect("tables serialize");
    if let Some(path) = s.write("tables.json", &pretty(&full))? {
        written.push(path);
    }
    Ok(json!({ "model": model_json(&m), "tables": summary, "written": written }))
}

fn cmd_surface(s: &Settings, points: usize) -> Result<Value, Error> {
    let m = s.model()?;
    let cfg = s.config(&m)?;
    let opts = s.optimizer();
    let mut surfaces = Vec::new();
    let mut written = Vec::new();
    for (i, kinds) in TABLE_ORDER.iter().enumerate() {
        let seed = biwarranty::rng::split_seed(s.seed, i as u64);
        let opt = optimize_region(*kinds, &m, &cfg, &opts, seed)?;
        let grid = GridSpec::covering(&opt.pair, points);
        let cells = cost_surface_grid(&opt.pair, cfg.price, &grid)?;
        let name = format!("surface_{}_{}.csv", kinds.0.label(), kinds.1.label());
        if let Some(path) = s.write(&name, &grid_to_csv(&cells))? {
            written.push(path);
        }
        surfaces.push(json!({
            "policy": pair_label(*kinds),
            "region": opt.region,
            "S": cfg.price,
            "t_max": grid.t_max,
            "u_max": grid.u_max,
            "points": points,
            "file": name,
        }));
    }
    Ok(json!({ "surfaces": surfaces, "written": written }))
}

fn cmd_curves(s: &Settings, points: usize) -> Result<Value, Error> {
    if points < 2 {
        return Err(invalid("curves need at least 2 points"));
    }
    let d = s.dataset()?;
    let mut csv = String::from("axis,x,parametric,kaplan_meier\n");
    let mut axes = serde_json::Map::new();
    for (name, xs) in [("age", d.ages()), ("usage", d.usages())] {
        let fit = fit_weibull_mle(&xs)?;
        let km = kaplan_meier(&xs)?;
        let max = xs.iter().cloned().fold(0.0, f64::max) * 1.1;
        let mut samples = Vec::with_capacity(points);
        for i in 0..points {
            let x = max * i as f64 / (points - 1) as f64;
            let p = weibull_survival(&fit.params, x)?;
            let k = km.eval(x);
            csv.push_str(&format!("{name},{x},{p},{k}\n"));
            samples.push([x, p, k]);
        }
        let sup = samples.iter().map(|s| (s[1] - s[2]).abs()).fold(0.0, f64::max);
        axes.insert(
            name.into(),
            json!({ "shape": fit.params.shape(), "scale": fit.params.scale(), "max_abs_gap": sup }),
        );
    }
    let written: Vec<String> = s.write("curves.csv", &csv)?.into_iter().collect();
    Ok(json!({ "axes": axes, "points": points, "csv": if written.is_empty() { Some(csv) } else { None }, "written": written }))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<Value, Error> {
    let settings = resolve(cli.common)?;
    match &cli.command {
        Command::Fit => cmd_fit(&settings),
        Command::Gof => cmd_gof(&settings),
        Command::Calibrate => cmd_calibrate(&settings),
        Command::Optimize { policy } => cmd_optimize(&settings, policy),
        Command::Table { prices } => cmd_table(&settings, prices.as_deref()),
        Command::Surface { points } => cmd_surface(&settings, *points),
        Command::Curves { points } => cmd_curves(&settings, *points),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            print!("{}", pretty(&v));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprint!("{}", pretty(&body));
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
