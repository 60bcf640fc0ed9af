//! RunConfig: one JSON file plus flag overrides. Every field has a default so a
//! bare `--command area` is a complete run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use ymaxial::grid::ConnectionSpec;
use ymaxial::lie::GroupKind;
use ymaxial::measure::{FieldDomain, VarianceConvention};
use ymaxial::surface::Surface;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Area,
    Abelian,
    Limit,
    Potential,
    Mc,
    GridCheck,
    Holonomy,
    Duality,
}

impl Command {
    pub fn parse(name: &str) -> Result<Command, CliError> {
        serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(|_| CliError::Config(format!("unknown command {name:?}")))
    }

    /// Commands that draw random numbers and therefore need an explicit seed.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::Mc | Command::GridCheck)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group: GroupKind,
    pub n: usize,
}

/// A builtin test connection by name, or coefficient tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConnectionChoice {
    Builtin(String),
    Spec(ConnectionSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// Unset means the unit square in the (x^0, x^1) plane, except for holonomy,
    /// where it is the unit square in the (x^1, x^2) plane that the builtin connections live on.
    pub surface: Option<Surface>,
    pub group: GroupKind,
    pub n: usize,
    pub kappa: Vec<f64>,
    pub cutoff: u32,
    /// Tensor-grid resolution per axis for area, heat-kernel and functional quadratures.
    pub resolution: usize,
    /// MC samples (mc) or random edge fields per grid size (grid-check).
    pub samples: usize,
    pub ode_steps: usize,
    /// Grid size n of the Wilson-functional cell plan (mc).
    pub mc_grid: usize,
    /// Grid sizes for grid-check and holonomy.
    pub grid_sizes: Vec<usize>,
    /// Grid size and ODE steps of the reference boundary holonomy.
    pub reference_grid: usize,
    pub connection: ConnectionChoice,
    /// Groups for limit; empty means the single (group, n).
    pub groups: Vec<GroupSpec>,
    /// R values for potential.
    pub radii: Vec<f64>,
    pub variance: VarianceConvention,
    pub domain: FieldDomain,
    pub qmc_nodes: usize,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// Directory holding BasisCache files, reused across invocations.
    pub basis_cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            surface: None,
            group: GroupKind::SU,
            n: 2,
            kappa: vec![5.0, 10.0, 20.0],
            cutoff: 4,
            resolution: 48,
            samples: 1000,
            ode_steps: 16,
            mc_grid: 8,
            grid_sizes: vec![4, 8, 16],
            reference_grid: 64,
            connection: ConnectionChoice::Builtin("su2_a".into()),
            groups: vec![],
            radii: vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
            variance: VarianceConvention::default(),
            domain: FieldDomain::default(),
            qmc_nodes: ymaxial::measure::default_qmc_nodes(),
            seed: None,
            workers: None,
            basis_cache_dir: None,
            out: None,
            format: Format::Csv,
            strict: false,
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<RunConfig, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn command(&self) -> Result<Command, CliError> {
        self.command.ok_or_else(|| CliError::Config("no command given (use --command or the config's \"command\")".into()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cmd = self.command()?;
        if self.kappa.is_empty() || self.kappa.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return bad("kappa must be a nonempty list of positive numbers");
        }
        if !(2..=4096).contains(&self.resolution) {
            return bad("resolution must be in 2..=4096");
        }
        if self.cutoff > 12 {
            return bad("cutoff must be at most 12");
        }
        if self.samples == 0 || self.samples > 100_000_000 {
            return bad("samples must be in 1..=1e8");
        }
        if !(1..=100_000).contains(&self.ode_steps) {
            return bad("ode_steps must be in 1..=100000");
        }
        if !(1..=1024).contains(&self.mc_grid) {
            return bad("mc_grid must be in 1..=1024");
        }
        if self.grid_sizes.is_empty() || self.grid_sizes.iter().any(|n| !(1..=1024).contains(n)) {
            return bad("grid_sizes must be a nonempty list in 1..=1024");
        }
        if cmd == Command::Holonomy && self.grid_sizes.iter().any(|&n| n < 2) {
            return bad("holonomy needs grid sizes >= 2");
        }
        if !(2..=4096).contains(&self.reference_grid) {
            return bad("reference_grid must be in 2..=4096");
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("radii must be finite and nonnegative");
        }
        if self.qmc_nodes < 16 {
            return bad("qmc_nodes must be at least 16");
        }
        if self.workers == Some(0) {
            return bad("workers must be positive");
        }
        if cmd.is_stochastic() && self.seed.is_none() {
            return bad(format!("command {cmd:?} is stochastic and needs --seed"));
        }
        self.surface_for(cmd).validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn surface_for(&self, cmd: Command) -> Surface {
        match (&self.surface, cmd) {
            (Some(s), _) => s.clone(),
            (None, Command::Holonomy) => Surface::Rectangle { r: 1.0, t_len: 1.0, plane: (1, 2) },
            (None, _) => Surface::unit_square(),
        }
    }
}
