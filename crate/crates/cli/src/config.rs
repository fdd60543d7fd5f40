use std::fs;
use std::path::{Path, PathBuf};

use cone_exponents::exponents::ProfileResolution;
use cone_exponents::{ConeSpec, OperatorSpec, QuadratureConfig, Validate};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Symbol,
    DimensionLike,
    Exponents,
    Branch,
    Kelvin,
    Barriers,
    Liouville(Vec<f64>),
    Verify,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Symbol => "symbol",
            Task::DimensionLike => "dimension_like",
            Task::Exponents => "exponents",
            Task::Branch => "branch",
            Task::Kelvin => "kelvin",
            Task::Barriers => "barriers",
            Task::Liouville(_) => "liouville",
            Task::Verify => "verify",
        }
    }

    /// Execution stage; tasks run in increasing stage, ties in config order.
    fn stage(&self) -> u8 {
        match self {
            Task::Symbol | Task::DimensionLike => 0,
            Task::Exponents => 1,
            Task::Branch | Task::Kelvin | Task::Barriers | Task::Liouville(_) => 2,
            Task::Verify => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub operator: OperatorSpec,
    pub cone: ConeSpec,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    pub tasks: Vec<Task>,
    /// Prefix of the report files.
    pub output: PathBuf,
    /// Exponent cache file (JSON lines).
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default = "default_resolution")]
    pub resolution: ProfileResolution,
    /// β grid of the symbol task; defaults to 40 points inside (-2α, N).
    #[serde(default)]
    pub symbol_betas: Option<Vec<f64>>,
    /// β grid of the branch task; defaults to a grid below β⁺.
    #[serde(default)]
    pub branch_betas: Option<Vec<f64>>,
    #[serde(default)]
    pub branch_gamma: Option<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_resolution() -> ProfileResolution {
    ProfileResolution::with_nodes(12)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Everything [`crate::runner`] relies on before touching the numerics.
    pub fn check(&self, require_tasks: bool) -> Result<(), CliError> {
        let mut problems: Vec<String> = Vec::new();
        if require_tasks && self.tasks.is_empty() {
            problems.push("tasks must not be empty".into());
        }
        problems.extend(self.operator.validate().iter().map(|v| format!("operator.{}: {v}", v.field)));
        problems.extend(self.cone.validate().iter().map(|v| format!("cone.{}: {v}", v.field)));
        problems.extend(self.quadrature.validate().iter().map(|v| format!("quadrature.{}: {v}", v.field)));
        if self.resolution.nodes < 4 {
            problems.push("resolution.nodes must be at least 4".into());
        }
        if self.threads == Some(0) {
            problems.push("threads must be positive".into());
        }
        for t in &self.tasks {
            if let Task::Liouville(ps) = t {
                if ps.is_empty() || ps.iter().any(|p| !p.is_finite()) {
                    problems.push("liouville needs a nonempty list of finite exponents".into());
                }
            }
        }
        if !problems.is_empty() {
            return Err(CliError::Config(problems.join("; ")));
        }
        Ok(())
    }

    /// Tasks sorted into dependency order, duplicates dropped.
    pub fn ordered_tasks(&self) -> Vec<Task> {
        let mut out: Vec<Task> = Vec::new();
        for t in &self.tasks {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out.sort_by_key(Task::stage);
        out
    }

    /// Cache path after the environment override.
    pub fn cache_path(&self) -> Option<PathBuf> {
        cone_exponents::cache::ExponentCache::resolve_path(self.cache.as_deref())
    }

    /// `<prefix>.<task>.<ext>`
    pub fn report_path(&self, task: &str, ext: &str) -> PathBuf {
        let mut s = self.output.clone().into_os_string();
        s.push(format!(".{task}.{ext}"));
        PathBuf::from(s)
    }

    /// Create the output directory and make sure it accepts files.
    pub fn prepare_output(&self) -> Result<(), CliError> {
        let dir = match self.output.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("output {}: {e}", dir.display())))?;
        let probe = self.report_path("probe", "tmp");
        fs::write(&probe, b"").map_err(|e| CliError::Config(format!("output {}: {e}", probe.display())))?;
        let _ = fs::remove_file(probe);
        Ok(())
    }
}
