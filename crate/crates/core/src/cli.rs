//! Batch front end: configuration, dispatch and report emission.
//!
//! A run reads an optional TOML manifest, applies flag overrides, validates the
//! parameters for the selected command and produces a [`ReportBundle`]. Bundles are
//! written as JSON lines (header, records, summary, then a meta line carrying timing),
//! optionally with a CSV projection of the records.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::borel::{
    d0_phi4_coefficients, d0_phi4_partition, d0_phi4_series, disk_contains, growth_ratios, remainder_fit,
    RemainderSample,
};
use crate::combinatorics::{
    count_labeled_phi4_graphs, enumerate_forests, enumerate_jungles, forest_formula_verify, jungle_matrices,
    min_eigenvalue, spanning_trees_of, tree_weight_exact, tree_weight_integral, LabeledGraph,
};
use crate::error::{CostGuard, Error, Result};
use crate::mlve_toy::{enumerate_two_level_trees, mlve_truncated_sum, oracle_log_z, SliceModel};
use crate::tensor_quartic::{
    enumerate_quartic_invariants, evaluate_invariant, gaussian_moment_check, ics_verify, power_counting_t43,
    rarefaction_trace, ColoredTree, GeneralizedColor, ResolventDressedTree, T43Graph, Tensor,
};
use crate::vector_lve::{
    catalan_g2, enumerate_rooted_plane_trees, g2_from_tau_representation, lve_partial_sum, mean_cut_functions,
    oracle_g2, perturbative_coefficients, rng_for, schwinger_dyson_residual, taylor_remainder, Dimension,
    ModelPoint, SamplingOptions,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CONSTRUCTIVE_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ForestVerify,
    Weights,
    JungleVerify,
    BorelCheck,
    LveSum,
    LveOracle,
    MeanCut,
    MlveDemo,
    LogzOracle,
    Invariants,
    GaussianCheck,
    PowerCount,
    IcsDemo,
    GraphsD0,
}

impl Command {
    pub const ALL: [Command; 14] = [
        Command::ForestVerify,
        Command::Weights,
        Command::JungleVerify,
        Command::BorelCheck,
        Command::LveSum,
        Command::LveOracle,
        Command::MeanCut,
        Command::MlveDemo,
        Command::LogzOracle,
        Command::Invariants,
        Command::GaussianCheck,
        Command::PowerCount,
        Command::IcsDemo,
        Command::GraphsD0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::ForestVerify => "forest-verify",
            Command::Weights => "weights",
            Command::JungleVerify => "jungle-verify",
            Command::BorelCheck => "borel-check",
            Command::LveSum => "lve-sum",
            Command::LveOracle => "lve-oracle",
            Command::MeanCut => "mean-cut",
            Command::MlveDemo => "mlve-demo",
            Command::LogzOracle => "logz-oracle",
            Command::Invariants => "invariants",
            Command::GaussianCheck => "gaussian-check",
            Command::PowerCount => "power-count",
            Command::IcsDemo => "ics-demo",
            Command::GraphsD0 => "graphs-d0",
        }
    }

    pub fn module(self) -> &'static str {
        match self {
            Command::ForestVerify | Command::Weights | Command::JungleVerify => "combinatorics",
            Command::BorelCheck | Command::GraphsD0 => "borel",
            Command::LveSum | Command::LveOracle | Command::MeanCut => "vector_lve",
            Command::MlveDemo | Command::LogzOracle => "mlve_toy",
            Command::Invariants | Command::GaussianCheck | Command::PowerCount | Command::IcsDemo => {
                "tensor_quartic"
            }
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Command::ForestVerify => "forest formula on K_n against its closed form",
            Command::Weights => "barycentric spanning-tree weights, enumeration and integral routes",
            Command::JungleVerify => "jungle and two-level tree counts, PSD of jungle matrices",
            Command::BorelCheck => "d=0 coefficient growth, disk test and remainder fit",
            Command::LveSum => "truncated loop vertex expansion of G2 with tail bound and oracle",
            Command::LveOracle => "radial, tau and Schwinger-Dyson oracles for G2",
            Command::MeanCut => "mean and cut of the continuation to positive z",
            Command::MlveDemo => "multiscale expansion of log Z against the oracle",
            Command::LogzOracle => "oracle log Z across ultraviolet cutoffs",
            Command::Invariants => "quartic invariant catalog with values on a Gaussian tensor",
            Command::GaussianCheck => "free-measure moments of T.T and every V_C",
            Command::PowerCount => "cutoff growth of the four T43 order-one graphs",
            Command::IcsDemo => "iterated Cauchy-Schwarz bound over resolvent-dressed trees",
            Command::GraphsD0 => "labeled quartic vacuum graphs and exact d=0 coefficients",
        }
    }

    pub fn parse(name: &str) -> Result<Command> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Usage(format!("unknown command '{name}'; run with --list")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommandInfo {
    pub name: &'static str,
    pub module: &'static str,
    pub summary: &'static str,
}

pub fn list_commands() -> Vec<CommandInfo> {
    Command::ALL
        .into_iter()
        .map(|c| CommandInfo { name: c.name(), module: c.module(), summary: c.summary() })
        .collect()
}

/// One run. Unset parameters fall back to per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Monte Carlo samples or σ draws.
    pub budget: Option<u64>,
    pub accept_exponential_cost: bool,
    pub csv: bool,
    /// Vertex count or tree order.
    pub n: Option<usize>,
    pub levels: Option<usize>,
    pub d: Option<usize>,
    /// Vector or tensor dimension N.
    pub size: Option<u64>,
    pub infinite_n: bool,
    pub z: Option<f64>,
    pub z_im: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_im: Option<f64>,
    pub m: Option<u64>,
    pub j_min: Option<u32>,
    pub j_max: Option<u32>,
    pub n_max: Option<usize>,
    pub cutoffs: Option<Vec<u64>>,
    pub graph: Option<T43Graph>,
    pub edges: Option<Vec<[usize; 2]>>,
    pub p0: Option<u64>,
    pub radius: Option<f64>,
    pub tolerance: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn guard(&self) -> CostGuard {
        CostGuard { accept_exponential_cost: self.accept_exponential_cost }
    }

    fn command(&self) -> Result<Command> {
        Command::parse(self.command.as_deref().ok_or_else(|| Error::Usage("no command given".into()))?)
    }
}

/// Flags; any flag given overrides the manifest.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "constructive", version, about = "Constructive expansions with numerical oracles")]
pub struct CliArgs {
    /// Command name (see --list).
    #[arg(value_name = "COMMAND")]
    pub positional: Option<String>,
    #[arg(long)]
    pub command: Option<String>,
    /// TOML manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; defaults to $CONSTRUCTIVE_OUT_DIR/<command>.jsonl or stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub accept_exponential_cost: bool,
    #[arg(long)]
    pub csv: bool,
    /// Omit the timing line so output is byte-reproducible.
    #[arg(long)]
    pub no_meta: bool,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "size", short = 'N')]
    pub size: Option<u64>,
    #[arg(long)]
    pub infinite_n: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub z_im: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_im: Option<f64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub j_min: Option<u32>,
    #[arg(long)]
    pub j_max: Option<u32>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub cutoffs: Option<Vec<u64>>,
    #[arg(long, value_parser = parse_graph)]
    pub graph: Option<T43Graph>,
    /// Edges as `u-v` pairs, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_edge)]
    pub edges: Option<Vec<[usize; 2]>>,
    #[arg(long)]
    pub p0: Option<u64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn parse_graph(s: &str) -> std::result::Result<T43Graph, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| {
        "expected divergent-tadpole, convergent-tadpole, linear-vacuum or log-vacuum".to_string()
    })
}

fn parse_edge(s: &str) -> std::result::Result<[usize; 2], String> {
    let (a, b) = s.split_once('-').ok_or("edge must look like u-v")?;
    Ok([a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?])
}

impl CliArgs {
    /// Manifest (if any) with flag overrides applied.
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.positional.is_some() && self.command.is_some() && self.positional != self.command {
            return Err(Error::Usage("positional command and --command disagree".into()));
        }
        macro_rules! over {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f.clone(); } )* };
        }
        over!(command, out, budget, n, levels, d, size, z, z_im, lambda, lambda_im, m, j_min, j_max, n_max, cutoffs,
              graph, edges, p0, radius, tolerance);
        if self.positional.is_some() {
            c.command = self.positional.clone();
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.accept_exponential_cost |= self.accept_exponential_cost;
        c.csv |= self.csv;
        c.infinite_n |= self.infinite_n;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetUsage {
    pub samples: u64,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub command: Command,
    pub config: ExperimentConfig,
    pub records: Vec<Value>,
    pub summary: Value,
    pub budget: BudgetUsage,
}

impl ReportBundle {
    /// Header, one line per record, summary, and unless `include_meta` is false a final
    /// timing line.
    pub fn to_jsonl(&self, include_meta: bool) -> String {
        let mut out = String::new();
        let mut line = |v: Value| {
            out.push_str(&v.to_string());
            out.push('\n');
        };
        line(json!({
            "kind": "header",
            "schema_version": self.schema_version,
            "command": self.command,
            "config": self.config,
        }));
        for r in &self.records {
            let mut r = r.clone();
            if let Value::Object(map) = &mut r {
                map.insert("kind".into(), json!("record"));
            }
            line(r);
        }
        line(json!({ "kind": "summary", "summary": self.summary }));
        if include_meta {
            line(json!({ "kind": "meta", "budget": self.budget }));
        }
        out
    }

    /// Records as CSV with the union of their scalar keys as columns; nested values are
    /// written as JSON text.
    pub fn to_csv(&self) -> Result<String> {
        let mut cols: Vec<String> = Vec::new();
        for r in &self.records {
            if let Value::Object(map) = r {
                for k in map.keys() {
                    if !cols.contains(k) {
                        cols.push(k.clone());
                    }
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&cols).map_err(|e| Error::Io(e.to_string()))?;
        for r in &self.records {
            let row: Vec<String> = cols
                .iter()
                .map(|k| match r.get(k) {
                    None | Some(Value::Null) => String::new(),
                    Some(Value::String(s)) => s.clone(),
                    Some(v) => v.to_string(),
                })
                .collect();
            w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Process exit status for each failure kind.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => 2,
        Error::Domain(_) | Error::Connectivity(_) | Error::Structure(_) | Error::Fit(_) => 3,
        Error::SizeLimit { .. } => 4,
        Error::Numeric { .. } => 5,
        Error::Singularity(_) => 6,
        Error::Io(_) => 7,
    }
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg.into()))
    }
}

fn fmt_c(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn dimension(c: &ExperimentConfig, default: u64) -> Result<Dimension> {
    if c.infinite_n {
        return Ok(Dimension::Infinite);
    }
    let n = c.size.unwrap_or(default);
    require(n >= 1, "N must be at least 1")?;
    Ok(Dimension::Finite(n))
}

fn sampling(c: &ExperimentConfig) -> Result<SamplingOptions> {
    let opts = SamplingOptions { samples: c.budget.unwrap_or(20_000), seed: c.seed, ..Default::default() };
    require(opts.samples >= 2, "budget must be at least 2 samples")?;
    Ok(opts)
}

/// Validates and dispatches one run.
pub fn run(config: &ExperimentConfig) -> Result<ReportBundle> {
    let command = config.command()?;
    let start = Instant::now();
    let (records, summary, samples) = match command {
        Command::ForestVerify => forest_verify(config)?,
        Command::Weights => weights(config)?,
        Command::JungleVerify => jungle_verify(config)?,
        Command::BorelCheck => borel_check(config)?,
        Command::LveSum => lve_sum(config)?,
        Command::LveOracle => lve_oracle(config)?,
        Command::MeanCut => mean_cut(config)?,
        Command::MlveDemo => mlve_demo(config)?,
        Command::LogzOracle => logz_oracle(config)?,
        Command::Invariants => invariants(config)?,
        Command::GaussianCheck => gaussian_check(config)?,
        Command::PowerCount => power_count(config)?,
        Command::IcsDemo => ics_demo(config)?,
        Command::GraphsD0 => graphs_d0(config)?,
    };
    Ok(ReportBundle {
        schema_version: SCHEMA_VERSION,
        command,
        config: config.clone(),
        records,
        summary,
        budget: BudgetUsage { samples, wall_clock_ms: start.elapsed().as_secs_f64() * 1e3 },
    })
}

type Parts = (Vec<Value>, Value, u64);

fn forest_verify(c: &ExperimentConfig) -> Result<Parts> {
    let n = c.n.unwrap_or(3);
    require((2..=8).contains(&n), "n must be in 2..=8")?;
    let trials = c.budget.unwrap_or(1);
    require((1..=10_000).contains(&trials), "budget (coupling tables) must be in 1..=10000")?;
    let tol = c.tolerance.unwrap_or(1e-8);
    let mut rng = rng_for(c.seed, 0);
    let pairs = n * (n - 1) / 2;
    let mut records = Vec::new();
    let mut worst: f64 = 0.0;
    let mut forests = 0;
    for trial in 0..trials {
        let t: Vec<f64> = (0..pairs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let chk = forest_formula_verify(n, &t, c.guard())?;
        worst = worst.max(chk.residual);
        forests = chk.forests;
        records.push(json!({
            "trial": trial, "n": n, "forests": chk.forests, "lhs": chk.lhs, "rhs": chk.rhs,
            "residual": chk.residual, "quadrature_error": chk.quadrature_error,
        }));
    }
    Ok((records, json!({ "n": n, "forests": forests, "max_residual": worst, "tolerance": tol, "pass": worst < tol }), trials))
}

fn weights(c: &ExperimentConfig) -> Result<Parts> {
    let graph = match &c.edges {
        Some(e) => {
            let n = c.n.unwrap_or_else(|| e.iter().flatten().max().map_or(1, |m| m + 1));
            LabeledGraph::new(n, e.iter().map(|p| (p[0], p[1])).collect())?
        }
        None => {
            let n = c.n.unwrap_or(4);
            require((1..=8).contains(&n), "n must be in 1..=8")?;
            LabeledGraph::complete(n)
        }
    };
    if !graph.is_connected() {
        return Err(Error::Connectivity("graph is not connected".into()));
    }
    let trees = spanning_trees_of(&graph, c.guard())?;
    let mut records = Vec::new();
    let mut total = num_rational::BigRational::from_integer(0.into());
    let mut routes_agree = true;
    for t in &trees {
        let exact = tree_weight_exact(&graph, t, c.guard())?;
        let integral = tree_weight_integral(&graph, t, c.guard())?;
        routes_agree &= exact.ratio() == integral.ratio();
        total += exact.ratio();
        let edges: Vec<[usize; 2]> = t.edges().iter().map(|e| [e.u, e.v]).collect();
        records.push(json!({
            "edges": edges, "edge_ids": t.edge_ids(),
            "weight_num": exact.numerator.to_string(), "weight_den": exact.denominator.to_string(),
            "weight": exact.to_f64(),
        }));
    }
    let one = num_rational::BigRational::from_integer(1.into());
    Ok((
        records,
        json!({ "trees": trees.len(), "total": total.to_string(), "sums_to_one": total == one, "routes_agree": routes_agree }),
        0,
    ))
}

fn jungle_verify(c: &ExperimentConfig) -> Result<Parts> {
    let n = c.n.unwrap_or(3);
    let m = c.levels.unwrap_or(2);
    require((1..=6).contains(&n), "n must be in 1..=6")?;
    require((1..=4).contains(&m), "levels must be in 1..=4")?;
    let jungles = enumerate_jungles(n, m, c.guard())?;
    let expected: u64 = enumerate_forests(n, c.guard())?.iter().map(|f| (m as u64).pow(f.len() as u32)).sum();
    let two_level = enumerate_two_level_trees(n, c.guard())?.len() as u64;
    let two_level_expected = (1u64 << (n - 1)) * (n as u64).pow(n.saturating_sub(2) as u32);
    let samples = c.budget.unwrap_or(100);
    let mut rng = rng_for(c.seed, 0);
    let mut min_eig = f64::INFINITY;
    for _ in 0..samples {
        let j = &jungles[rng.gen_range(0..jungles.len())];
        let w: Vec<f64> = (0..j.top().len()).map(|_| rng.gen::<f64>()).collect();
        for x in jungle_matrices(j, &w)? {
            min_eig = min_eig.min(min_eigenvalue(&x));
        }
    }
    let records = vec![json!({
        "n": n, "levels": m, "jungles": jungles.len(), "expected": expected,
        "two_level_trees": two_level, "two_level_expected": two_level_expected,
    })];
    Ok((
        records,
        json!({
            "counts_match": jungles.len() as u64 == expected && two_level == two_level_expected,
            "min_eigenvalue": min_eig, "psd": min_eig >= -1e-12 * n as f64,
        }),
        samples,
    ))
}

fn borel_check(c: &ExperimentConfig) -> Result<Parts> {
    let orders = c.n_max.unwrap_or(20);
    require((2..=crate::borel::MAX_D0_ORDER).contains(&orders), "n_max must be in 2..=30")?;
    let series = d0_phi4_series(orders)?;
    let records: Vec<Value> = growth_ratios(&series)
        .into_iter()
        .map(|(n, r)| json!({ "n": n, "coefficient": series.coeffs[n], "ratio_over_n": r }))
        .collect();
    let z = c.z.unwrap_or(-0.03);
    let size = c.size.unwrap_or(1);
    let p = ModelPoint::real(z, size)?;
    let samples: Vec<RemainderSample> = (2..=6)
        .map(|order| {
            Ok(RemainderSample { order, lambda_abs: z.abs(), remainder_abs: taylor_remainder(&p, order)?.abs() })
        })
        .collect::<Result<_>>()?;
    let fit = remainder_fit(&samples)?;
    let lambda = Complex64::new(c.lambda.unwrap_or(0.05), c.lambda_im.unwrap_or(0.0));
    let radius = c.radius.unwrap_or(1.0);
    let inside = disk_contains(radius, lambda)?;
    let partition = if lambda.re >= 0.0 { Some(d0_phi4_partition(lambda)?) } else { None };
    Ok((
        records,
        json!({
            "last_ratio_over_n": growth_ratios(&series).last().map(|x| x.1),
            "remainder_fit": fit, "remainder_samples": samples,
            "lambda": fmt_c(lambda), "radius": radius, "in_disk": inside,
            "d0_partition": partition.map(|e| json!({ "value": fmt_c(e.value), "error": e.error })),
        }),
        0,
    ))
}

fn lve_sum(c: &ExperimentConfig) -> Result<Parts> {
    let z = Complex64::new(c.z.unwrap_or(-0.03), c.z_im.unwrap_or(0.0));
    let n = dimension(c, 4)?;
    let n_max = c.n_max.unwrap_or(5);
    require(n_max <= crate::vector_lve::MAX_TREE_ORDER as usize, "n_max must be at most 12")?;
    let p = ModelPoint::new(z, n)?;
    let opts = sampling(c)?;
    let sum = lve_partial_sum(&p, n_max, &opts)?;
    let records = sum
        .orders
        .iter()
        .enumerate()
        .map(|(k, v)| json!({ "n": k, "value_re": v.re, "value_im": v.im }))
        .collect();
    let oracle = match n {
        Dimension::Infinite => Some(catalan_g2(z)?.re),
        Dimension::Finite(k) if z.im == 0.0 && z.re <= 0.0 && k <= crate::vector_lve::MAX_ORACLE_N => {
            Some(oracle_g2(&p)?.value)
        }
        Dimension::Finite(_) => None,
    };
    let trees: u64 = (1..=n_max).map(|k| enumerate_rooted_plane_trees(k, CostGuard::ACCEPT).map_or(0, |t| t.len() as u64)).sum();
    Ok((
        records,
        json!({
            "z": fmt_c(z), "N": n, "n_max": n_max, "G2_re": sum.value.re, "G2_im": sum.value.im,
            "tail_bound": sum.tail_bound, "std_error": sum.std_error, "oracle": oracle,
            "discrepancy": oracle.map(|o| (sum.value - o).norm()),
        }),
        opts.samples * trees,
    ))
}

fn lve_oracle(c: &ExperimentConfig) -> Result<Parts> {
    let z = c.z.unwrap_or(-0.03);
    let size = c.size.unwrap_or(4);
    require(z <= 0.0, "oracles need z <= 0")?;
    let p = ModelPoint::real(z, size)?;
    let radial = oracle_g2(&p)?;
    let tau = g2_from_tau_representation(&p)?;
    let sd = schwinger_dyson_residual(&p)?;
    let count = c.n_max.unwrap_or(6) + 1;
    require(count <= 40, "n_max must be at most 39")?;
    let coeffs = perturbative_coefficients(size, count)?;
    let records = coeffs
        .iter()
        .enumerate()
        .map(|(k, g)| json!({ "n": k, "coefficient": g.to_string(), "value": num_traits::ToPrimitive::to_f64(g) }))
        .collect();
    Ok((
        records,
        json!({ "z": z, "N": size, "radial": radial.value, "radial_error": radial.error, "tau": tau,
                "schwinger_dyson_residual": sd }),
        0,
    ))
}

fn mean_cut(c: &ExperimentConfig) -> Result<Parts> {
    let z = c.z.unwrap_or(0.01);
    require(z > 0.0 && z < 0.125, "mean-cut needs 0 < z < 1/8")?;
    let n = dimension(c, 4)?;
    let n_max = c.n_max.unwrap_or(4);
    require(n_max <= 8, "n_max must be at most 8")?;
    let opts = sampling(c)?;
    let mc = mean_cut_functions(z, n, n_max, &opts)?;
    Ok((Vec::new(), json!({ "z": z, "N": n, "n_max": n_max, "result": mc }), opts.samples))
}

fn slice_model(c: &ExperimentConfig) -> Result<SliceModel> {
    let lambda = Complex64::new(c.lambda.unwrap_or(0.2), c.lambda_im.unwrap_or(0.0));
    SliceModel::new(c.m.unwrap_or(2), c.j_min.unwrap_or(1), c.j_max.unwrap_or(4), lambda, c.guard())
}

fn mlve_demo(c: &ExperimentConfig) -> Result<Parts> {
    let model = slice_model(c)?;
    let n_max = c.n_max.unwrap_or(2);
    let oracle = oracle_log_z(&model)?;
    let sum = mlve_truncated_sum(&model, n_max, c.guard())?;
    let records = sum
        .orders
        .iter()
        .enumerate()
        .map(|(k, v)| json!({ "order": k + 1, "value_re": v.re, "value_im": v.im }))
        .collect();
    Ok((
        records,
        json!({
            "logZ_oracle": fmt_c(oracle.value), "oracle_error": oracle.error,
            "logZ_mlve": fmt_c(sum.value), "residual": (sum.value - oracle.value).norm(),
        }),
        0,
    ))
}

fn logz_oracle(c: &ExperimentConfig) -> Result<Parts> {
    let j_min = c.j_min.unwrap_or(1);
    let j_max = c.j_max.unwrap_or(8);
    require(j_max >= j_min, "j_max must be at least j_min")?;
    let lambda = Complex64::new(c.lambda.unwrap_or(1.0), c.lambda_im.unwrap_or(0.0));
    let mut records = Vec::new();
    let mut prev: Option<Complex64> = None;
    for j in j_min..=j_max {
        let model = SliceModel::new(c.m.unwrap_or(2), j_min, j, lambda, c.guard())?;
        let e = oracle_log_z(&model)?;
        records.push(json!({
            "j_max": j, "logZ_re": e.value.re, "logZ_im": e.value.im, "error": e.error,
            "difference": prev.map(|p| (e.value - p).norm()),
        }));
        prev = Some(e.value);
    }
    let max_abs = records.iter().map(|r| r["logZ_re"].as_f64().unwrap().hypot(r["logZ_im"].as_f64().unwrap())).fold(0.0, f64::max);
    Ok((records, json!({ "lambda": fmt_c(lambda), "max_abs_logZ": max_abs }), 0))
}

fn invariants(c: &ExperimentConfig) -> Result<Parts> {
    let d = c.d.unwrap_or(4);
    let size = c.size.unwrap_or(2) as usize;
    let colors = enumerate_quartic_invariants(d)?;
    let mut rng = rng_for(c.seed, 0);
    let t = Tensor::gaussian(d, size, &mut rng, c.guard())?;
    let records = colors
        .iter()
        .map(|col| {
            Ok(json!({ "d": d, "color_set": col, "melonic": col.is_melonic(), "value": evaluate_invariant(&t, col)? }))
        })
        .collect::<Result<Vec<_>>>()?;
    let melonic = colors.iter().filter(|c| c.is_melonic()).count();
    Ok((records, json!({ "d": d, "N": size, "count": colors.len(), "melonic": melonic, "necklace": colors.len() - melonic }), 0))
}

fn gaussian_check(c: &ExperimentConfig) -> Result<Parts> {
    let d = c.d.unwrap_or(3);
    let size = c.size.unwrap_or(4) as usize;
    let samples = c.budget.unwrap_or(2000);
    let rep = gaussian_moment_check(d, size, samples, c.seed, c.guard())?;
    let records = rep
        .invariants
        .iter()
        .map(|m| json!({ "color_set": m.color, "mean": m.mean, "std_error": m.std_error, "expected": m.expected }))
        .collect();
    let within = (rep.norm_mean - rep.norm_expected).abs() <= 3.0 * rep.norm_std_error;
    Ok((
        records,
        json!({ "d": d, "N": size, "norm_mean": rep.norm_mean, "norm_std_error": rep.norm_std_error,
                "norm_expected": rep.norm_expected, "within_3_sigma": within }),
        samples,
    ))
}

fn power_count(c: &ExperimentConfig) -> Result<Parts> {
    let cutoffs = c.cutoffs.clone().unwrap_or_else(|| vec![8, 16, 32, 64]);
    let graphs = match c.graph {
        Some(g) => vec![g],
        None => vec![T43Graph::DivergentTadpole, T43Graph::ConvergentTadpole, T43Graph::LinearVacuum, T43Graph::LogVacuum],
    };
    let mut records = Vec::new();
    let mut growth = serde_json::Map::new();
    for g in graphs {
        let rep = power_counting_t43(g, &cutoffs)?;
        for (l, v) in rep.cutoffs.iter().zip(&rep.values) {
            records.push(json!({ "graph": g, "cutoff": l, "value": v }));
        }
        growth.insert(serde_json::to_value(g).unwrap().as_str().unwrap().to_string(), serde_json::to_value(&rep).unwrap());
    }
    Ok((records, Value::Object(growth), 0))
}

fn ics_demo(c: &ExperimentConfig) -> Result<Parts> {
    let n = c.n.unwrap_or(2);
    require((1..=4).contains(&n), "n must be in 1..=4")?;
    let size = c.size.unwrap_or(2) as usize;
    require((1..=6).contains(&size), "N must be in 1..=6")?;
    let lambda = Complex64::new(c.lambda.unwrap_or(0.05), c.lambda_im.unwrap_or(0.0));
    let samples = c.budget.unwrap_or(50) as usize;
    let colors: Vec<GeneralizedColor> = (1..=3).map(|k| GeneralizedColor::new(3, &[k])).collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut violations = 0;
    for (id, t) in enumerate_rooted_plane_trees(n, c.guard())?.iter().enumerate() {
        let cs: Vec<GeneralizedColor> = (0..n).map(|e| colors[e % 3]).collect();
        let tree = ColoredTree::from_plane_tree(t, &cs)?;
        let corners = tree.corners().len();
        let a: Vec<usize> = (0..corners).filter(|k| k % 2 == 0).collect();
        let a_dag: Vec<usize> = (0..corners).filter(|k| k % 2 == 1).collect();
        let dressed = ResolventDressedTree::new(tree, a, a_dag)?;
        let rep = ics_verify(&dressed, &colors, size, lambda, samples, c.seed.wrapping_add(id as u64))?;
        violations += rep.violations;
        records.push(json!({
            "tree_id": id, "n": n, "p": rep.resolvents, "violations": rep.violations, "K": rep.k,
            "max_undressed": rep.sup_free, "max_amplitude": rep.max_amplitude, "max_ratio": rep.max_ratio,
        }));
    }
    let p0 = c.p0.unwrap_or(2 * n as u64);
    let trace = rarefaction_trace(n, p0, 60 * n)?;
    let ratio_ok = trace.iter().all(|s| s.contracts);
    Ok((
        records,
        json!({ "violations": violations, "rarefaction_ratio_ok": ratio_ok,
                "final_q": trace.last().map(|s| s.q), "rarefaction_steps": trace.len() - 1 }),
        samples as u64,
    ))
}

fn graphs_d0(c: &ExperimentConfig) -> Result<Parts> {
    let n_max = c.n_max.unwrap_or(10);
    let coeffs = d0_phi4_coefficients(n_max)?;
    let records = coeffs
        .iter()
        .enumerate()
        .map(|(n, a)| {
            json!({ "n": n, "labeled_graphs": count_labeled_phi4_graphs(n as u64).to_string(), "coefficient": a.to_string() })
        })
        .collect();
    Ok((records, json!({ "n_max": n_max }), 0))
}

/// Writes the bundle to the configured destination: `out`, else `$CONSTRUCTIVE_OUT_DIR/<command>.jsonl`,
/// else `stdout`. The CSV projection goes next to the JSONL file, or after it on stdout.
pub fn emit<W: Write>(bundle: &ReportBundle, include_meta: bool, stdout: &mut W) -> Result<Option<PathBuf>> {
    let text = bundle.to_jsonl(include_meta);
    let path = bundle
        .config
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(format!("{}.jsonl", bundle.command.name()))));
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&p, text)?;
            if bundle.config.csv {
                std::fs::write(p.with_extension("csv"), bundle.to_csv()?)?;
            }
            Ok(Some(p))
        }
        None => {
            stdout.write_all(text.as_bytes())?;
            if bundle.config.csv {
                stdout.write_all(bundle.to_csv()?.as_bytes())?;
            }
            Ok(None)
        }
    }
}

/// Entry point used by the binary; returns the exit status.
pub fn main_with<W: Write, E: Write>(args: CliArgs, stdout: &mut W, stderr: &mut E) -> i32 {
    if args.list {
        for c in list_commands() {
            let _ = writeln!(stdout, "{}", serde_json::to_string(&c).unwrap());
        }
        return 0;
    }
    let no_meta = args.no_meta;
    let result = args.into_config().and_then(|cfg| {
        let bundle = run(&cfg)?;
        emit(&bundle, !no_meta, stdout)
    });
    match result {
        Ok(_) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", json!({ "kind": "error", "code": exit_code(&e), "message": e.to_string() }));
            exit_code(&e)
        }
    }
}
