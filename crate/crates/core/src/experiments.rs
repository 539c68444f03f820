//! The numerical studies as reproducible CSV tables.
//!
//! Each experiment has built-in defaults. A config file can override them,
//! and explicit overrides (the command line) win over both. Only the keys in
//! an experiment's schema are accepted.
//!
//! `lambda` and `mu` mean totals over the population (split geometrically or
//! evenly) for the population studies, and per-person rates for the
//! two-person studies.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ctmc::{self, PairParams};
use crate::error::{Error, Result};
use crate::metrics::{self, Theta};
use crate::model::{geometric_population, uniform_population, ErrorModel, Population, TestPolicy};
use crate::optimize::{alternating_minimize, optimize_aoii, optimize_noisy, AllocationResult, AlternatingOptions};
use crate::par::{self, Execution};
use crate::validate::{self, ValidationOptions, ValidationReport};

/// Growth ratios of the geometric populations.
pub const LAMBDA_RATIO: f64 = 0.9;
pub const MU_RATIO: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentId {
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10a,
    Fig10b,
    Fig11,
    Validate,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 9] = [
        ExperimentId::Fig5,
        ExperimentId::Fig6,
        ExperimentId::Fig7,
        ExperimentId::Fig8,
        ExperimentId::Fig9,
        ExperimentId::Fig10a,
        ExperimentId::Fig10b,
        ExperimentId::Fig11,
        ExperimentId::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig6 => "fig6",
            ExperimentId::Fig7 => "fig7",
            ExperimentId::Fig8 => "fig8",
            ExperimentId::Fig9 => "fig9",
            ExperimentId::Fig10a => "fig10a",
            ExperimentId::Fig10b => "fig10b",
            ExperimentId::Fig11 => "fig11",
            ExperimentId::Validate => "validate",
        }
    }

    /// Override keys this experiment accepts. `seed` and `restarts` are
    /// accepted everywhere since they are recorded in every footer.
    pub fn schema(self) -> &'static [&'static str] {
        match self {
            ExperimentId::Fig5 => &["n", "C", "theta", "lambda", "mu", "restarts", "seed"],
            ExperimentId::Fig6 => &["n", "theta", "lambda", "mu", "restarts", "seed"],
            ExperimentId::Fig7 => &["C", "theta", "lambda", "mu", "restarts", "seed"],
            ExperimentId::Fig8 => &["n", "C", "lambda", "mu", "restarts", "seed"],
            ExperimentId::Fig9 => &["n", "C", "p", "q", "lambda", "mu", "restarts", "seed"],
            ExperimentId::Fig10a => &["C", "lambda", "mu", "restarts", "seed"],
            ExperimentId::Fig10b => &["lambda12", "lambda", "mu", "restarts", "seed"],
            ExperimentId::Fig11 => &["n", "C", "p", "q", "lambda", "mu", "restarts", "seed"],
            ExperimentId::Validate => &["horizon", "restarts", "seed"],
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = ExperimentId::ALL.iter().map(|id| id.name()).collect();
                Error::config("experiment", format!("unknown experiment `{s}` (known: {})", known.join(", ")))
            })
    }
}

/// Explicitly set parameters; `None` falls back to the experiment default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub budget: Option<f64>,
    pub theta: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub lambda12: Option<f64>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_rate(key: &str, value: &str, allow_zero: bool) -> Result<f64> {
    let x: f64 = parse_num(key, value)?;
    let ok = x.is_finite() && (x > 0.0 || (allow_zero && x == 0.0));
    if !ok {
        let bound = if allow_zero { "non-negative" } else { "positive" };
        return Err(Error::config(key, format!("must be finite and {bound}, got {value}")));
    }
    Ok(x)
}

impl Overrides {
    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => {
                let n: usize = parse_num(key, value)?;
                if n == 0 {
                    return Err(Error::config(key, "population size must be at least 1"));
                }
                self.n = Some(n);
            }
            "C" => self.budget = Some(parse_rate(key, value, false)?),
            "theta" => {
                let t: f64 = parse_num(key, value)?;
                Theta::new(t).map_err(|e| Error::config(key, e.to_string()))?;
                self.theta = Some(t);
            }
            "p" | "q" => {
                let x: f64 = parse_num(key, value)?;
                if !(0.0..0.5).contains(&x) {
                    return Err(Error::config(key, format!("must lie in [0, 0.5), got {value}")));
                }
                if key == "p" {
                    self.p = Some(x);
                } else {
                    self.q = Some(x);
                }
            }
            "lambda" => self.lambda = Some(parse_rate(key, value, false)?),
            "mu" => self.mu = Some(parse_rate(key, value, false)?),
            "lambda12" => self.lambda12 = Some(parse_rate(key, value, true)?),
            "restarts" => {
                let k: usize = parse_num(key, value)?;
                if k == 0 {
                    return Err(Error::config(key, "at least one restart is required"));
                }
                self.restarts = Some(k);
            }
            "seed" => self.seed = Some(parse_num(key, value)?),
            "horizon" => {
                let h = parse_rate(key, value, false)?;
                if h < validate::MIN_HORIZON {
                    return Err(Error::config(
                        key,
                        format!("must be at least {:e}, got {value}", validate::MIN_HORIZON),
                    ));
                }
                self.horizon = Some(h);
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub overrides: Overrides,
    pub exec: Execution,
}

impl ExperimentConfig {
    pub fn new(id: ExperimentId) -> Self {
        Self {
            id,
            overrides: Overrides::default(),
            exec: Execution::default(),
        }
    }

    /// Sets one override after checking it against the schema.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if !self.id.schema().contains(&key) {
            return Err(Error::config(
                key,
                format!(
                    "not a parameter of {} (accepted: {})",
                    self.id,
                    self.id.schema().join(", ")
                ),
            ));
        }
        self.overrides.apply(key, value)
    }

    /// Parses `key=value`.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "expected key=value"))?;
        self.set(key, value)
    }

    /// Applies `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.set_assignment(line)?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_config_text(&text)
    }

    fn seed(&self) -> u64 {
        self.overrides.seed.unwrap_or(0)
    }

    fn restarts(&self) -> usize {
        self.overrides.restarts.unwrap_or(30)
    }

    fn alternating(&self) -> AlternatingOptions {
        AlternatingOptions {
            restarts: self.restarts(),
            seed: self.seed(),
            exec: self.exec,
            ..AlternatingOptions::default()
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            seed: self.seed(),
            restarts: self.restarts(),
        }
    }
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            Cell::Text(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            // 17 significant digits round-trip every f64
            Cell::Float(x) => write!(f, "{x:.16e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// File stem of the CSV.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Provenance,
}

impl ResultTable {
    fn new(name: impl Into<String>, columns: &[&str], provenance: Provenance) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            provenance,
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    /// Numeric values of a column, `None` for an unknown name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[k].as_f64()).collect()
    }

    /// Rejects ragged rows and non-finite numbers.
    pub fn check(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(Error::Numerical(format!(
                    "{}: row {i} has {} cells for {} columns",
                    self.name,
                    row.len(),
                    self.columns.len()
                )));
            }
            if row.iter().any(|c| matches!(c, Cell::Float(x) if !x.is_finite())) {
                return Err(Error::Numerical(format!("{}: row {i} has a non-finite value", self.name)));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "# seed={},restarts={},version={}",
            self.provenance.seed,
            self.provenance.restarts,
            env!("CARGO_PKG_VERSION")
        );
        out
    }
}

/// An optimizer run inside an experiment, kept for budget and KKT checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRecord {
    pub label: String,
    pub budget: f64,
    pub result: AllocationResult,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub tables: Vec<ResultTable>,
    pub allocations: Vec<AllocationRecord>,
    /// Present for the validation run.
    pub validation: Option<ValidationReport>,
}

impl ExperimentOutput {
    fn tables(tables: Vec<ResultTable>, allocations: Vec<AllocationRecord>) -> Self {
        Self {
            tables,
            allocations,
            validation: None,
        }
    }
}

/// Writes each table to `dir/<name>.csv`, creating `dir` if needed.
pub fn write_tables(dir: &Path, tables: &[ResultTable]) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::with_capacity(tables.len());
    for table in tables {
        table.check()?;
        let path = dir.join(format!("{}.csv", table.name));
        std::fs::write(&path, table.to_csv()).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// `count` points from `lo` to `hi`, evenly spaced in log scale.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (0..count)
        .map(|k| match k {
            0 => lo,
            _ if k + 1 == count => hi,
            _ => lo * (ratio * k as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}

const LOG_POINTS: usize = 50;

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.id {
        ExperimentId::Fig5 => fig5(cfg),
        ExperimentId::Fig6 => fig6(cfg),
        ExperimentId::Fig7 => fig7(cfg),
        ExperimentId::Fig8 => fig8(cfg),
        ExperimentId::Fig9 => fig9(cfg),
        ExperimentId::Fig10a => fig10a(cfg),
        ExperimentId::Fig10b => fig10b(cfg),
        ExperimentId::Fig11 => fig11(cfg),
        ExperimentId::Validate => {
            let opts = ValidationOptions {
                seed: cfg.seed(),
                horizon: cfg.overrides.horizon.unwrap_or(validate::DEFAULT_HORIZON),
                tamper: false,
                exec: cfg.exec,
            };
            let report = validate::run_validation(&opts)?;
            Ok(ExperimentOutput {
                tables: vec![report.to_table(cfg.provenance())],
                allocations: Vec::new(),
                validation: Some(report),
            })
        }
    }
}

fn geometric(cfg: &ExperimentConfig, n: usize) -> Result<Population> {
    let o = &cfg.overrides;
    geometric_population(
        n,
        LAMBDA_RATIO,
        MU_RATIO,
        o.lambda.unwrap_or(6.0),
        o.mu.unwrap_or(4.0),
    )
}

fn theta_of(cfg: &ExperimentConfig) -> Result<Theta> {
    Theta::new(cfg.overrides.theta.unwrap_or(0.5))
}

fn record(label: impl Into<String>, budget: f64, result: &AllocationResult) -> AllocationRecord {
    AllocationRecord {
        label: label.into(),
        budget,
        result: result.clone(),
    }
}

fn fig5(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n = cfg.overrides.n.unwrap_or(10);
    let budget = cfg.overrides.budget.unwrap_or(16.0);
    let theta = theta_of(cfg)?;
    let pop = geometric(cfg, n)?;
    let opt = alternating_minimize(&pop, budget, theta, &cfg.alternating())?;
    let even = budget / (2 * n) as f64;
    let uniform = metrics::population_delta(&pop, &vec![TestPolicy::pair(even, even)?; n], theta)?;

    let mut table = ResultTable::new(
        "fig5",
        &["i", "s", "c", "delta_opt", "delta_uniform", "delta_notest"],
        cfg.provenance(),
    );
    for (i, person) in pop.iter().enumerate() {
        let (s, c) = opt.pair_rates()[i];
        table.push(vec![
            (i + 1).into(),
            s.into(),
            c.into(),
            opt.per_person_delta[i].into(),
            uniform.per_person[i].weighted.into(),
            metrics::delta_no_test(person, theta).0.into(),
        ]);
    }
    Ok(ExperimentOutput::tables(vec![table], vec![record("fig5", budget, &opt)]))
}

fn fig6(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let theta = theta_of(cfg)?;
    let pop = geometric(cfg, cfg.overrides.n.unwrap_or(10))?;
    let budgets: Vec<usize> = (5..=20).collect();
    let results = par::map(cfg.exec, budgets.clone(), |c| {
        alternating_minimize(&pop, c as f64, theta, &cfg.alternating())
    });
    let mut table = ResultTable::new("fig6", &["C", "delta"], cfg.provenance());
    let mut allocations = Vec::new();
    for (c, res) in budgets.into_iter().zip(results) {
        let res = res?;
        table.push(vec![c.into(), res.aggregate_delta.into()]);
        allocations.push(record(format!("fig6 C={c}"), c as f64, &res));
    }
    Ok(ExperimentOutput::tables(vec![table], allocations))
}

fn fig7(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let theta = theta_of(cfg)?;
    let budget = cfg.overrides.budget.unwrap_or(16.0);
    let (lt, mt) = (cfg.overrides.lambda.unwrap_or(6.0), cfg.overrides.mu.unwrap_or(4.0));
    let sizes: Vec<usize> = (2..=30).collect();
    let results = par::map(cfg.exec, sizes.clone(), |n| -> Result<_> {
        let uniform = alternating_minimize(&uniform_population(n, lt, mt)?, budget, theta, &cfg.alternating())?;
        let geo = alternating_minimize(&geometric(cfg, n)?, budget, theta, &cfg.alternating())?;
        Ok((uniform, geo))
    });
    let mut table = ResultTable::new(
        "fig7",
        &["n", "delta_uniform_rates", "delta_geometric_rates"],
        cfg.provenance(),
    );
    let mut allocations = Vec::new();
    for (n, res) in sizes.into_iter().zip(results) {
        let (uniform, geo) = res?;
        table.push(vec![n.into(), uniform.aggregate_delta.into(), geo.aggregate_delta.into()]);
        allocations.push(record(format!("fig7 uniform n={n}"), budget, &uniform));
        allocations.push(record(format!("fig7 geometric n={n}"), budget, &geo));
    }
    Ok(ExperimentOutput::tables(vec![table], allocations))
}

/// θ = 0.20, 0.25, …, 0.70.
pub fn theta_grid() -> Vec<f64> {
    (0..=10).map(|k| (20 + 5 * k) as f64 / 100.0).collect()
}

fn fig8(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let budget = cfg.overrides.budget.unwrap_or(16.0);
    let pop = geometric(cfg, cfg.overrides.n.unwrap_or(10))?;
    let thetas = theta_grid();
    let results = par::map(cfg.exec, thetas.clone(), |t| -> Result<_> {
        let theta = Theta::new(t)?;
        let res = alternating_minimize(&pop, budget, theta, &cfg.alternating())?;
        let pd = metrics::population_delta(&pop, &res.policies, theta)?;
        Ok((res, pd))
    });
    let mut table = ResultTable::new(
        "fig8",
        &["theta", "delta", "mean_delta1", "mean_delta2", "sum_s", "sum_c"],
        cfg.provenance(),
    );
    let mut allocations = Vec::new();
    for (t, res) in thetas.into_iter().zip(results) {
        let (res, pd) = res?;
        let rates = res.pair_rates();
        let sum_s: f64 = rates.iter().map(|r| r.0).sum();
        let sum_c: f64 = rates.iter().map(|r| r.1).sum();
        table.push(vec![
            t.into(),
            pd.aggregate.into(),
            pd.mean_delta1.into(),
            pd.mean_delta2.into(),
            sum_s.into(),
            sum_c.into(),
        ]);
        allocations.push(record(format!("fig8 theta={t}"), budget, &res));
    }
    Ok(ExperimentOutput::tables(vec![table], allocations))
}

/// Error levels to run: the explicit `(p, q)` if either is set (the other
/// defaulting to the same value), else `p = q ∈ {0.1, 0.2, 0.4}`.
fn fig9_levels(o: &Overrides) -> Vec<(f64, f64)> {
    match (o.p, o.q) {
        (None, None) => vec![(0.1, 0.1), (0.2, 0.2), (0.4, 0.4)],
        (p, q) => {
            let p = p.or(q).unwrap_or(0.0);
            vec![(p, q.unwrap_or(p))]
        }
    }
}

fn fig9(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let budget = cfg.overrides.budget.unwrap_or(20.0);
    let pop = geometric(cfg, cfg.overrides.n.unwrap_or(10))?;
    let mut tables = Vec::new();
    let mut allocations = Vec::new();
    for (p, q) in fig9_levels(&cfg.overrides) {
        let error = ErrorModel::new(p, q)?;
        let res = optimize_noisy(&pop, budget, &error)?;
        let name = format!("fig9_p{p}_q{q}");
        let mut table = ResultTable::new(name.clone(), &["i", "v", "delta_e"], cfg.provenance());
        for (i, v) in res.single_rates().into_iter().enumerate() {
            table.push(vec![(i + 1).into(), v.into(), res.per_person_delta[i].into()]);
        }
        tables.push(table);
        allocations.push(record(name, budget, &res));
    }
    Ok(ExperimentOutput::tables(tables, allocations))
}

fn pair_point(lambda: f64, mu: f64, lambda12: f64, budget: f64) -> Result<(f64, f64)> {
    let params = PairParams::new(lambda, lambda12, mu, budget / 4.0, budget / 4.0)?;
    let pi = ctmc::steady_state(&ctmc::build_pair_chain(&params)?)?;
    let occ = ctmc::pair_occupancy(&pi)?;
    Ok((occ.p_one_infected, occ.p_both_infected))
}

fn pair_table(
    cfg: &ExperimentConfig,
    name: String,
    sweep_col: &str,
    points: Vec<(f64, f64, f64)>,
) -> Result<ResultTable> {
    let (lambda, mu) = (cfg.overrides.lambda.unwrap_or(2.5), cfg.overrides.mu.unwrap_or(5.0));
    let values = par::map(cfg.exec, points.clone(), |(_, l12, c)| pair_point(lambda, mu, l12, c));
    let mut table = ResultTable::new(
        name,
        &[sweep_col, "p_one_infected", "p_both_infected"],
        cfg.provenance(),
    );
    for ((x, _, _), v) in points.into_iter().zip(values) {
        let (one, both) = v?;
        table.push(vec![x.into(), one.into(), both.into()]);
    }
    Ok(table)
}

fn fig10a(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let budgets = match cfg.overrides.budget {
        Some(c) => vec![c],
        None => vec![20.0, 40.0, 60.0],
    };
    let grid = log_grid(2.0, 200.0, LOG_POINTS);
    let tables = budgets
        .into_iter()
        .map(|c| {
            let points = grid.iter().map(|&l12| (l12, l12, c)).collect();
            pair_table(cfg, format!("fig10a_C{c}"), "lambda12", points)
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentOutput::tables(tables, Vec::new()))
}

fn fig10b(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let couplings = match cfg.overrides.lambda12 {
        Some(l) => vec![l],
        None => vec![5.0, 10.0, 15.0],
    };
    let grid = log_grid(2.0, 200.0, LOG_POINTS);
    let tables = couplings
        .into_iter()
        .map(|l12| {
            let points = grid.iter().map(|&c| (c, l12, c)).collect();
            pair_table(cfg, format!("fig10b_lambda12_{l12}"), "C", points)
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentOutput::tables(tables, Vec::new()))
}

fn fig11(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let budget = cfg.overrides.budget.unwrap_or(4.0);
    let pop = geometric(cfg, cfg.overrides.n.unwrap_or(10))?;
    let error = ErrorModel::new(cfg.overrides.p.unwrap_or(0.0), cfg.overrides.q.unwrap_or(0.0))?;
    let aoii = optimize_aoii(&pop, budget)?;
    let noisy = optimize_noisy(&pop, budget, &error)?;
    let sum_aoii: f64 = aoii.per_person_delta.iter().sum();
    let sum_noisy: f64 = noisy.per_person_delta.iter().sum();

    let mut table = ResultTable::new(
        "fig11",
        &["i", "w", "v", "norm_delta_aoii", "norm_delta_noisy"],
        cfg.provenance(),
    );
    let (w, v) = (aoii.single_rates(), noisy.single_rates());
    for i in 0..pop.len() {
        table.push(vec![
            (i + 1).into(),
            w[i].into(),
            v[i].into(),
            (aoii.per_person_delta[i] / sum_aoii).into(),
            (noisy.per_person_delta[i] / sum_noisy).into(),
        ]);
    }
    Ok(ExperimentOutput::tables(
        vec![table],
        vec![record("fig11 aoii", budget, &aoii), record("fig11 noisy", budget, &noisy)],
    ))
}
