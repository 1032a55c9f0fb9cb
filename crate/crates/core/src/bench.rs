//! Benchmark instances, the multi-seed experiment runner, summary statistics
//! and the CSV / SVG artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adp::{self, LspiConfig, QLearningConfig};
use crate::error::{Error, Result};
use crate::lds::{EpisodeBudget, InstanceFile, LinearSystem, LqrInstance, QuadraticCost, SimRng};
use crate::linalg::{Matrix, Vector};
use crate::policysearch::{self, RandomSearchConfig, ReinforceConfig};
use crate::{riccati, sysid};

/// `x⁺ = [[1,1],[0,1]] x + [0;1] u + e`, cost `x₁² + r0 u²`, starting at `(-1, 0)`.
pub fn instance_double_integrator(r0: f64, noise_var: f64, episode_len: usize) -> Result<LqrInstance> {
    if !(r0 > 0.0) {
        return Err(Error::Contract(format!("r0 must be positive, got {r0}")));
    }
    let system = LinearSystem::new(
        Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        Matrix::identity(2, 2) * noise_var,
    )?;
    let cost = QuadraticCost::new(
        Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.0])),
        Matrix::from_element(1, 1, r0),
        None,
    )?;
    LqrInstance::new(system, cost, Vector::from_vec(vec![-1.0, 0.0]), episode_len)
}

pub fn double_integrator_default() -> LqrInstance {
    instance_double_integrator(1.0, 1e-4, 10).expect("valid defaults")
}

/// Three coupled, slightly unstable nodes with full actuation: tridiagonal `A`
/// (1.01 diagonal, 0.01 off-diagonal), `B = Q = I`, `R = r_scale I`.
pub fn instance_laplacian(r_scale: f64, noise_var: f64, episode_len: usize, x0: Vector) -> Result<LqrInstance> {
    if !(r_scale > 0.0) {
        return Err(Error::Contract(format!("r_scale must be positive, got {r_scale}")));
    }
    let a = Matrix::from_row_slice(3, 3, &[1.01, 0.01, 0.0, 0.01, 1.01, 0.01, 0.0, 0.01, 1.01]);
    let system = LinearSystem::new(a, Matrix::identity(3, 3), Matrix::identity(3, 3) * noise_var)?;
    let cost = QuadraticCost::new(Matrix::identity(3, 3), Matrix::identity(3, 3) * r_scale, None)?;
    LqrInstance::new(system, cost, x0, episode_len)
}

pub fn laplacian_default() -> LqrInstance {
    instance_laplacian(1000.0, 1e-4, 100, Vector::zeros(3)).expect("valid defaults")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NominalConfig {
    pub excitation_std: f64,
}

impl Default for NominalConfig {
    fn default() -> Self {
        Self { excitation_std: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LspiMethodConfig {
    pub gamma: f64,
    pub exploration_std: f64,
    /// Defaults to the episode length.
    pub samples_per_iter: Option<usize>,
    pub improvement_sweeps: usize,
    pub ridge: f64,
}

/// Benchmark defaults use a shorter discount than [`LspiConfig`]: evaluating
/// the zero gain of an open-loop unstable system at γ close to 1 yields value
/// matrices so large that process noise swamps a single episode of data.
impl Default for LspiMethodConfig {
    fn default() -> Self {
        let base = LspiConfig::default();
        Self {
            gamma: 0.8,
            exploration_std: 3.0,
            samples_per_iter: None,
            improvement_sweeps: base.improvement_sweeps,
            ridge: base.ridge,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum MethodKind {
    Nominal(NominalConfig),
    Lspi(LspiMethodConfig),
    QLearning(QLearningConfig),
    Reinforce(ReinforceConfig),
    RandomSearch(RandomSearchConfig),
}

pub const METHOD_NAMES: [&str; 5] = ["nominal", "lspi", "q-learning", "reinforce", "random-search"];

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Nominal(_) => "nominal",
            MethodKind::Lspi(_) => "lspi",
            MethodKind::QLearning(_) => "q-learning",
            MethodKind::Reinforce(_) => "reinforce",
            MethodKind::RandomSearch(_) => "random-search",
        }
    }

    pub fn with_defaults(name: &str) -> Result<Self> {
        Self::from_value(serde_json::json!({ "name": name }))
    }

    fn from_value(value: Value) -> Result<Self> {
        let name = value
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Config("method entry needs a string \"name\"".into()))?;
        if !METHOD_NAMES.contains(&name) {
            return Err(Error::Config(format!(
                "unknown method {name:?}; expected one of {}",
                METHOD_NAMES.join(", ")
            )));
        }
        let name = name.to_owned();
        serde_json::from_value(value).map_err(|e| Error::Config(format!("method {name:?}: {e}")))
    }
}

/// A method with its configuration and the label written to the `method` column.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub kind: MethodKind,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            label: kind.name().to_owned(),
            kind,
        }
    }

    pub fn from_value(mut value: Value) -> Result<Self> {
        let label = match value.as_object_mut() {
            Some(map) => map.remove("label"),
            None => return Err(Error::Config("method entry must be an object".into())),
        };
        let kind = MethodKind::from_value(value)?;
        let label = match label {
            None => kind.name().to_owned(),
            Some(Value::String(s)) => s,
            Some(other) => return Err(Error::Config(format!("method label must be a string, got {other}"))),
        };
        Ok(Self { label, kind })
    }

    pub fn to_value(&self) -> Value {
        let mut value = serde_json::to_value(&self.kind).expect("method configs serialize");
        if let Some(map) = value.as_object_mut() {
            map.insert("label".into(), Value::String(self.label.clone()));
        }
        value
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub instance: LqrInstance,
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    pub budgets: Vec<usize>,
    pub seed_base: u64,
}

#[derive(Serialize, Deserialize)]
struct ExperimentFile {
    #[serde(flatten)]
    instance: InstanceFile,
    methods: Vec<Value>,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    budgets: Vec<usize>,
    #[serde(default)]
    seed_base: u64,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

impl ExperimentSpec {
    pub fn new(
        instance: LqrInstance,
        methods: Vec<MethodSpec>,
        seeds: Vec<u64>,
        budgets: Vec<usize>,
        seed_base: u64,
    ) -> Result<Self> {
        if methods.is_empty() || seeds.is_empty() || budgets.is_empty() {
            return Err(Error::Config("need at least one method, seed and budget".into()));
        }
        if budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("budgets must be strictly increasing".into()));
        }
        Ok(Self {
            instance,
            methods,
            seeds,
            budgets,
            seed_base,
        })
    }

    /// Instance fields at the top level plus `methods`, `budgets` and
    /// optional `seeds` (default 0..9) and `seed_base` (default 0).
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ExperimentFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let methods = file
            .methods
            .into_iter()
            .map(MethodSpec::from_value)
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.instance.into_instance()?, methods, file.seeds, file.budgets, file.seed_base)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The fully resolved spec, defaults included.
    pub fn to_json(&self) -> Result<String> {
        let file = ExperimentFile {
            instance: InstanceFile::from_instance(&self.instance),
            methods: self.methods.iter().map(MethodSpec::to_value).collect(),
            seeds: self.seeds.clone(),
            budgets: self.budgets.clone(),
            seed_base: self.seed_base,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub samples: usize,
    pub cost: f64,
    pub stabilized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub method: String,
    pub samples: usize,
    pub runs: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub stabilized_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    records: Vec<RunRecord>,
    summaries: Vec<Summary>,
}

/// Median under the extended-real order (`inf` above every finite value);
/// an even count averages the two middle values.
pub fn extended_median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        let (lo, hi) = (sorted[n / 2 - 1], sorted[n / 2]);
        if lo == hi {
            lo
        } else {
            0.5 * (lo + hi)
        }
    }
}

impl ResultTable {
    pub fn from_records(records: Vec<RunRecord>) -> Result<Self> {
        for r in &records {
            if r.cost.is_nan() || (r.stabilized && r.cost.is_infinite()) {
                return Err(Error::Contract(format!(
                    "record {}/{}/{} has cost {} with stabilized = {}",
                    r.method, r.seed, r.samples, r.cost, r.stabilized
                )));
            }
        }
        let mut order: Vec<(String, usize)> = Vec::new();
        let mut groups: BTreeMap<(String, usize), Vec<&RunRecord>> = BTreeMap::new();
        for r in &records {
            let key = (r.method.clone(), r.samples);
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        let summaries = order
            .into_iter()
            .map(|key| {
                let group = &groups[&key];
                let costs: Vec<f64> = group.iter().map(|r| r.cost).collect();
                Summary {
                    method: key.0,
                    samples: key.1,
                    runs: group.len(),
                    median: extended_median(&costs),
                    min: costs.iter().copied().fold(f64::INFINITY, f64::min),
                    max: costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    stabilized_fraction: group.iter().filter(|r| r.stabilized).count() as f64 / group.len() as f64,
                }
            })
            .collect();
        Ok(Self { records, summaries })
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn summaries(&self) -> &[Summary] {
        &self.summaries
    }

    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.summaries {
            if !out.contains(&s.method.as_str()) {
                out.push(&s.method);
            }
        }
        out
    }

    /// Summaries of one method ordered by sample count.
    pub fn curve(&self, method: &str) -> Vec<&Summary> {
        let mut out: Vec<&Summary> = self.summaries.iter().filter(|s| s.method == method).collect();
        out.sort_by_key(|s| s.samples);
        out
    }

    /// Smallest sample count at which the median cost is at most `threshold`.
    pub fn samples_to_reach(&self, method: &str, threshold: f64) -> Option<usize> {
        self.curve(method)
            .into_iter()
            .find(|s| s.median <= threshold)
            .map(|s| s.samples)
    }
}

/// Fraction of stabilizing runs per (method, samples).
pub fn stabilization_fraction(table: &ResultTable) -> Vec<(String, usize, f64)> {
    table
        .summaries()
        .iter()
        .map(|s| (s.method.clone(), s.samples, s.stabilized_fraction))
        .collect()
}

/// Outcome of one method run from scratch under a sample budget.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub gain: Option<Matrix>,
    pub samples_used: usize,
    pub failure: Option<String>,
}

/// Runs `method` on `instance` with at most `budget` samples. Every method
/// spends the largest whole number of its iterations that fits the budget.
pub fn run_method(method: &MethodKind, instance: &LqrInstance, budget: usize, rng: &mut SimRng) -> Result<MethodRun> {
    let (d, p) = (instance.state_dim(), instance.input_dim());
    let big_l = instance.episode_len;
    let k0 = Matrix::zeros(p, d);
    let mut oracle = EpisodeBudget::with_cap(budget);
    let (gain, failure): (Option<Matrix>, Option<String>) = match method {
        MethodKind::Nominal(c) => {
            let episodes = budget / big_l;
            if episodes == 0 {
                (None, Some("budget below one episode".into()))
            } else {
                match sysid::nominal_pipeline(&mut oracle, instance, episodes, c.excitation_std, rng) {
                    Ok(out) => (Some(out.solution.gain), None),
                    Err(e @ (Error::InsufficientExcitation(_) | Error::NoStabilizingSolution { .. })) => {
                        (None, Some(e.to_string()))
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        MethodKind::Lspi(c) => {
            let config = LspiConfig {
                gamma: c.gamma,
                samples_per_iter: c.samples_per_iter.unwrap_or(big_l),
                n_iters: 0,
                exploration_std: c.exploration_std,
                improvement_sweeps: c.improvement_sweeps,
                ridge: c.ridge,
            };
            let config = LspiConfig {
                n_iters: budget / config.samples_per_iter.max(1),
                ..config
            };
            let out = adp::lspi(&mut oracle, instance, &config, &k0, rng)?;
            (out.final_gain().cloned(), out.failure.map(|(round, e)| format!("round {round}: {e}")))
        }
        MethodKind::QLearning(c) => {
            let out = adp::q_learning_train(&mut oracle, instance, c, budget, rng)?;
            let gain = out.final_gain();
            let failure = out
                .failure
                .clone()
                .or_else(|| gain.is_none().then(|| "no greedy policy".into()));
            (gain, failure)
        }
        MethodKind::Reinforce(c) => {
            let iters = budget / (c.batch_size.max(1) * big_l);
            let trace = policysearch::reinforce_train(&mut oracle, instance, c, &k0, iters, rng)?;
            (trace.final_gain().cloned(), trace.failure)
        }
        MethodKind::RandomSearch(c) => {
            let iters = budget / (2 * c.directions.max(1) * big_l);
            let trace = policysearch::random_search_train(&mut oracle, instance, c, &k0, iters, rng)?;
            (trace.final_gain().cloned(), trace.failure)
        }
    };
    Ok(MethodRun {
        gain,
        samples_used: oracle.samples_used(),
        failure,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random stream owned by one (method, seed, budget) cell: a
/// splitmix64 chain over `seed_base`, the method index, the seed and the budget index.
pub fn cell_seed(seed_base: u64, method_index: usize, seed: u64, budget_index: usize) -> u64 {
    [method_index as u64, seed, budget_index as u64]
        .into_iter()
        .fold(splitmix64(seed_base), |h, v| splitmix64(h ^ v))
}

/// Runs every (method, seed, budget) cell from scratch in parallel. Records
/// are ordered by method, then seed, then budget, independent of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, seed_base: u64) -> Result<ResultTable> {
    let cells: Vec<(usize, u64, usize)> = (0..spec.methods.len())
        .flat_map(|m| {
            spec.seeds
                .iter()
                .flat_map(move |&s| (0..spec.budgets.len()).map(move |b| (m, s, b)))
        })
        .collect();
    let records = cells
        .par_iter()
        .map(|&(m, seed, b)| {
            let method = &spec.methods[m];
            let mut rng = SimRng::seed_from_u64(cell_seed(seed_base, m, seed, b));
            let run = run_method(&method.kind, &spec.instance, spec.budgets[b], &mut rng)?;
            let cost = run
                .gain
                .as_ref()
                .and_then(|k| riccati::closed_loop_average_cost(&spec.instance.system, &spec.instance.cost, k).ok())
                .unwrap_or(f64::INFINITY);
            Ok(RunRecord {
                method: method.label.clone(),
                seed,
                samples: run.samples_used,
                cost,
                stabilized: cost.is_finite(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ResultTable::from_records(records)
}

pub const CSV_HEADER: [&str; 5] = ["method", "seed", "samples", "cost", "stabilized"];

/// Costs use the shortest decimal form that parses back to the same value;
/// the failure sentinel is written as `inf`.
pub fn emit_csv<W: Write>(table: &ResultTable, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for r in table.records() {
        writer.write_record([
            r.method.clone(),
            r.seed.to_string(),
            r.samples.to_string(),
            r.cost.to_string(),
            r.stabilized.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn csv_string(table: &ResultTable) -> Result<String> {
    let mut buf = Vec::new();
    emit_csv(table, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn parse_csv<R: Read>(input: R) -> Result<ResultTable> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!(
            "expected header {}, found {}",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let records = reader
        .deserialize()
        .collect::<std::result::Result<Vec<RunRecord>, _>>()?;
    ResultTable::from_records(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotMetric {
    Cost,
    Stabilization,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// SVG with a log-scaled sample axis. The cost metric draws median lines over
/// min–max bands on a log cost axis, with infinite values pinned to the top
/// edge; the stabilization metric draws the stabilizing fraction.
pub fn emit_plot(table: &ResultTable, metric: PlotMetric) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 170.0, 20.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);

    let samples: Vec<f64> = table.summaries().iter().map(|s| s.samples.max(1) as f64).collect();
    if samples.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let xmin = samples.iter().copied().fold(f64::INFINITY, f64::min).log10();
    let mut xmax = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10();
    if xmax <= xmin {
        xmax = xmin + 1.0;
    }
    let finite: Vec<f64> = table
        .summaries()
        .iter()
        .flat_map(|s| [s.min, s.max, s.median])
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect();
    let (ylo, yhi) = match metric {
        PlotMetric::Stabilization => (0.0, 1.0),
        PlotMetric::Cost if finite.is_empty() => (0.0, 1.0),
        PlotMetric::Cost => {
            let lo = finite.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
            let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
            (lo, hi.max(lo + 1.0))
        }
    };
    let px = |s: f64| left + (s.max(1.0).log10() - xmin) / (xmax - xmin) * pw;
    let py = |v: f64| {
        let t = match metric {
            PlotMetric::Stabilization => v,
            PlotMetric::Cost if v.is_infinite() || v.is_nan() => yhi,
            PlotMetric::Cost => v.max(f64::MIN_POSITIVE).log10().clamp(ylo, yhi),
        };
        top + ph - (t - ylo) / (yhi - ylo) * ph
    };

    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for decade in (xmin.floor() as i32)..=(xmax.ceil() as i32) {
        let s = 10f64.powi(decade);
        if s.log10() < xmin - 1e-9 || s.log10() > xmax + 1e-9 {
            continue;
        }
        let x = px(s);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{decade}</text>"##,
            top + ph,
            top + ph + 16.0
        );
    }
    let yticks: Vec<(f64, String)> = match metric {
        PlotMetric::Stabilization => (0..=4).map(|i| (i as f64 / 4.0, format!("{:.2}", i as f64 / 4.0))).collect(),
        PlotMetric::Cost => ((ylo as i32)..=(yhi as i32)).map(|e| (10f64.powi(e), format!("1e{e}"))).collect(),
    };
    for (v, label) in yticks {
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    let ylabel = match metric {
        PlotMetric::Cost => "average cost",
        PlotMetric::Stabilization => "fraction stabilizing",
    };
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">samples</text><text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{ylabel}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (i, method) in table.methods().into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let curve = table.curve(method);
        if metric == PlotMetric::Cost && curve.len() > 1 {
            let upper = curve.iter().map(|s| format!("{:.1},{:.1}", px(s.samples as f64), py(s.max)));
            let lower = curve.iter().rev().map(|s| format!("{:.1},{:.1}", px(s.samples as f64), py(s.min)));
            let points: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                points.join(" ")
            );
        }
        let line: Vec<String> = curve
            .iter()
            .map(|s| {
                let v = match metric {
                    PlotMetric::Cost => s.median,
                    PlotMetric::Stabilization => s.stabilized_fraction,
                };
                format!("{:.1},{:.1}", px(s.samples as f64), py(v))
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            xml_escape(method)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
