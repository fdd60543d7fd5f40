//! Task execution and report files.

use std::fs;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use cone_exponents::acceptance::{Outcome, Settings, Suite};
use cone_exponents::branch::fixed_point_branch;
use cone_exponents::cache::{CacheKey, ExponentCache};
use cone_exponents::exponents::{dimension_like, CriticalExponents, ScanPlan, SymbolCurve};
use cone_exponents::liouville::{
    barrier_subsolution_search, barrier_supersolution_search, liouville_threshold, liouville_verdict, BarrierCheck,
};
use cone_exponents::roots::linspace;
use cone_exponents::{Error, ExponentResult, OperatorKind};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, Task};
use crate::CliError;

/// First ε of the subsolution search and first R of the supersolution search.
const BARRIER_EPS: f64 = 1e-2;
const BARRIER_RADIUS: f64 = 10.0;

/// Fractions of β⁺ making up the default branch grid.
const BRANCH_FRACTIONS: [f64; 5] = [0.55, 0.65, 0.75, 0.85, 0.93];

/// Rows of one CSV file. Column order is part of the output format.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: vec![] }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// What a task produced.
pub struct TaskReport {
    pub table: Table,
    pub data: Value,
    /// False when an enabled check failed.
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    Skipped,
    Failed,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub struct Runner {
    pub cfg: RunConfig,
    pub cache: ExponentCache,
    exponents: Option<CriticalExponents>,
    /// Wall-clock seconds and cache hit flag of the last exponent lookup.
    lookup: Option<(f64, bool)>,
}

impl Runner {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let cache = match cfg.cache_path() {
            Some(p) => ExponentCache::open(&p).map_err(|e| CliError::Config(format!("cache {}: {e}", p.display())))?,
            None => ExponentCache::memory(),
        };
        Ok(Self { cfg, cache, exponents: None, lookup: None })
    }

    fn dim(&self) -> usize {
        self.cfg.cone.dimension
    }

    fn alpha(&self) -> f64 {
        self.cfg.operator.alpha
    }

    pub fn key(&self) -> CacheKey {
        CacheKey {
            operator: self.cfg.operator.clone(),
            cone: self.cfg.cone.clone(),
            scan: ScanPlan::default(),
            quadrature: self.cfg.quadrature.clone(),
            resolution: self.cfg.resolution,
        }
    }

    /// Exponents of the configured cone, through the cache.
    pub fn exponents(&mut self) -> Result<CriticalExponents, Error> {
        if let Some(ex) = &self.exponents {
            return Ok(ex.clone());
        }
        let start = Instant::now();
        let (ex, hit) = self.cache.get_or_compute(&self.key())?;
        self.lookup = Some((start.elapsed().as_secs_f64(), hit));
        self.exponents = Some(ex.clone());
        Ok(ex)
    }

    /// Run every task; the error of the first failing one stops the run.
    /// Returns whether all enabled checks passed.
    pub fn run_all(&mut self) -> Result<bool, CliError> {
        let mut pass = true;
        for task in self.cfg.ordered_tasks() {
            pass &= self.run_task(&task)?;
        }
        Ok(pass)
    }

    pub fn run_task(&mut self, task: &Task) -> Result<bool, CliError> {
        let start = Instant::now();
        let result = self.execute(task);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(Some(rep)) => {
                self.write(task.name(), Status::Completed, seconds, None, &rep)?;
                Ok(rep.pass)
            }
            Ok(None) => {
                let rep = TaskReport { table: Table::new(&[]), data: Value::Null, pass: true };
                self.write(task.name(), Status::Skipped, seconds, None, &rep)?;
                Ok(true)
            }
            Err(e) => {
                let rep = TaskReport { table: Table::new(&[]), data: Value::Null, pass: false };
                self.write(task.name(), Status::Failed, seconds, Some(&e), &rep)?;
                Err(CliError::Numerical { task: task.name().to_string(), source: e })
            }
        }
    }

    fn execute(&mut self, task: &Task) -> Result<Option<TaskReport>, Error> {
        match task {
            Task::Symbol => self.symbol().map(Some),
            Task::DimensionLike => self.dimension_like().map(Some),
            Task::Exponents => self.exponents_task().map(Some),
            Task::Branch => self.branch().map(Some),
            Task::Kelvin => self.kelvin(),
            Task::Barriers => self.barriers().map(Some),
            Task::Liouville(ps) => self.liouville(ps).map(Some),
            Task::Verify => Ok(Some(self.verify(&[], |_| {}))),
        }
    }

    fn write(
        &self,
        task: &str,
        status: Status,
        seconds: f64,
        error: Option<&Error>,
        rep: &TaskReport,
    ) -> Result<(), CliError> {
        let csv_path = self.cfg.report_path(task, "csv");
        let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CliError::Output(e.to_string()))?;
        if !rep.table.header.is_empty() {
            w.write_record(&rep.table.header).map_err(|e| CliError::Output(e.to_string()))?;
        }
        for row in &rep.table.rows {
            w.write_record(row).map_err(|e| CliError::Output(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Output(e.to_string()))?;

        let report = json!({
            "task": task,
            "status": status,
            "error": error.map(|e| e.to_string()),
            "error_detail": error.map(|e| format!("{e:?}")),
            "passed": rep.pass,
            "generated_unix": unix_now(),
            "seconds": seconds,
            "operator": self.cfg.operator,
            "cone": self.cfg.cone,
            "quadrature": self.cfg.quadrature,
            "resolution": self.cfg.resolution,
            "columns": rep.table.header,
            "data": rep.data,
        });
        let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Output(e.to_string()))?;
        fs::write(self.cfg.report_path(task, "json"), text).map_err(|e| CliError::Output(e.to_string()))
    }

    fn symbol(&mut self) -> Result<TaskReport, Error> {
        let (n, a) = (self.dim() as f64, self.alpha());
        let betas = match &self.cfg.symbol_betas {
            Some(b) => b.clone(),
            None => linspace(-2.0 * a + 0.05, n - 0.05, 39),
        };
        let curve = SymbolCurve::radial_symbol(&self.cfg.operator, self.dim(), &self.cfg.quadrature, &betas)?;
        let mut table = Table::new(&["beta", "c"]);
        for (b, c) in curve.betas.iter().zip(&curve.values) {
            table.push(vec![num(*b), num(*c)]);
        }
        let data = json!({
            "sign_changes": curve.sign_changes(),
            "strictly_convex": curve.is_strictly_convex(),
            "curve": curve,
        });
        Ok(TaskReport { table, data, pass: true })
    }

    fn dimension_like(&mut self) -> Result<TaskReport, Error> {
        let (plus, minus) = dimension_like(&self.cfg.operator, self.dim(), &self.cfg.quadrature)?;
        let mut table = Table::new(&["kind", "value", "residual", "bracket_lo", "bracket_hi"]);
        for r in [&plus, &minus] {
            table.push(exponent_row(r));
        }
        Ok(TaskReport { table, data: json!({ "n_tilde_plus": plus, "n_tilde_minus": minus }), pass: true })
    }

    fn exponents_task(&mut self) -> Result<TaskReport, Error> {
        let ex = self.exponents()?;
        let mut table = Table::new(&["kind", "value", "residual", "bracket_lo", "bracket_hi"]);
        table.push(exponent_row(&ex.beta_plus));
        if let Some(m) = &ex.beta_minus {
            table.push(exponent_row(m));
        }
        let mut violations: Vec<String> =
            ex.beta_plus.check_bounds(self.dim(), self.alpha()).iter().map(ToString::to_string).collect();
        if let Some(m) = &ex.beta_minus {
            violations.extend(m.check_bounds(self.dim(), self.alpha()).iter().map(ToString::to_string));
        }
        let (lookup_seconds, cache_hit) = self.lookup.unwrap_or((0.0, true));
        let data = json!({
            "exponents": ex,
            "bound_violations": violations,
            "cache_hit": cache_hit,
            "lookup_seconds": lookup_seconds,
        });
        Ok(TaskReport { table, data, pass: violations.is_empty() })
    }

    fn branch(&mut self) -> Result<TaskReport, Error> {
        let needs_exponents = self.cfg.branch_betas.is_none() || self.cfg.branch_gamma.is_none();
        let beta_plus = if needs_exponents { Some(self.exponents()?.beta_plus.value) } else { None };
        let betas = match (&self.cfg.branch_betas, beta_plus) {
            (Some(b), _) => b.clone(),
            (None, Some(p)) => BRANCH_FRACTIONS.iter().map(|f| f * p).collect(),
            (None, None) => unreachable!(),
        };
        let gamma = self.cfg.branch_gamma.or(beta_plus).unwrap_or(1.0);
        let b = fixed_point_branch(
            &self.cfg.cone,
            &self.cfg.operator,
            &self.cfg.quadrature,
            &self.cfg.resolution,
            &betas,
            gamma,
        )?;
        let mut table = Table::new(&["beta", "gamma", "norm", "iterations", "fixed_point_defect"]);
        for p in &b.points {
            table.push(vec![num(p.beta), num(p.gamma), opt(p.norm), p.iterations.to_string(), num(p.fixed_point_defect)]);
        }
        Ok(TaskReport { table, data: json!({ "branch": b, "beta_plus": beta_plus }), pass: true })
    }

    fn kelvin(&mut self) -> Result<Option<TaskReport>, Error> {
        if self.cfg.operator.kind != OperatorKind::FractionalLaplacian {
            return Ok(None);
        }
        let ex = self.exponents()?;
        let m = ex.beta_minus.as_ref().ok_or(Error::MissingExponents)?;
        let target = self.dim() as f64 - 2.0 * self.alpha();
        let deviation = (ex.beta_plus.value + m.value - target).abs();
        let mut table = Table::new(&["beta_plus", "beta_minus", "sum", "target", "deviation"]);
        table.push(vec![
            num(ex.beta_plus.value),
            num(m.value),
            num(ex.beta_plus.value + m.value),
            num(target),
            num(deviation),
        ]);
        Ok(Some(TaskReport { table, data: json!({ "deviation": deviation }), pass: true }))
    }

    fn barriers(&mut self) -> Result<TaskReport, Error> {
        let ex = self.exponents()?;
        let (cone, op, q, res) = (&self.cfg.cone, &self.cfg.operator, &self.cfg.quadrature, &self.cfg.resolution);
        let p = ex.beta_plus.value;
        let mut checks: Vec<(&str, BarrierCheck)> = Vec::new();
        for d in [0.1, 0.3] {
            checks.push(("subsolution", barrier_subsolution_search(cone, op, p + d, p, BARRIER_EPS, q, res)?));
        }
        if let Some(m) = &ex.beta_minus {
            let c = barrier_supersolution_search(cone, op, m.value - 0.1, m.value, BARRIER_RADIUS, q, res)?;
            checks.push(("supersolution", c));
        }
        let mut table = Table::new(&["check", "beta", "parameter", "observed", "pass"]);
        for (name, c) in &checks {
            table.push(vec![name.to_string(), num(c.beta), num(c.parameter), num(c.observed), c.pass.to_string()]);
        }
        let pass = checks.iter().all(|c| c.1.pass);
        let data: Vec<Value> = checks.iter().map(|(n, c)| json!({ "check": n, "result": c })).collect();
        Ok(TaskReport { table, data: Value::Array(data), pass })
    }

    fn liouville(&mut self, ps: &[f64]) -> Result<TaskReport, Error> {
        let ex = self.exponents()?;
        let a = self.alpha();
        let plus = liouville_threshold(ex.beta_plus.value, a)?;
        let minus = ex.beta_minus.as_ref().map(|m| liouville_threshold(m.value, a)).transpose()?;
        let mut table =
            Table::new(&["p", "beta_plus", "beta_minus", "threshold_plus", "threshold_minus", "verdict"]);
        let mut verdicts = Vec::with_capacity(ps.len());
        for &p in ps {
            let v = liouville_verdict(p, &self.cfg.operator, Some(&ex))?;
            let label = serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            table.push(vec![
                num(p),
                num(ex.beta_plus.value),
                opt(ex.beta_minus.as_ref().map(|m| m.value)),
                num(plus),
                opt(minus),
                label,
            ]);
            verdicts.push(json!({ "p": p, "verdict": v }));
        }
        let data = json!({ "threshold_plus": plus, "threshold_minus": minus, "verdicts": verdicts });
        Ok(TaskReport { table, data, pass: true })
    }

    /// The acceptance suite at the configured resolution, sharing the cache.
    pub fn verify(&mut self, ids: &[u8], report: impl FnMut(&Outcome)) -> TaskReport {
        let settings = Settings { quadrature: self.cfg.quadrature.clone(), resolution: self.cfg.resolution };
        let mut suite = Suite::new(settings, std::mem::take(&mut self.cache));
        let outcomes = suite.run(ids, report);
        self.cache = suite.cache;
        let mut table = Table::new(&["criterion", "name", "pass", "detail"]);
        for o in &outcomes {
            table.push(vec![o.id.to_string(), o.name.clone(), o.pass.to_string(), o.detail.clone()]);
        }
        let pass = outcomes.iter().all(|o| o.pass);
        TaskReport { table, data: json!(outcomes), pass }
    }
}

fn exponent_row(r: &ExponentResult) -> Vec<String> {
    let kind = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    vec![kind, num(r.value), num(r.residual), num(r.bracket.0), num(r.bracket.1)]
}
