//! Problem configuration read from a TOML file.

use std::path::Path;

use delaybound::{build_topology, AgentDynamics, Topology};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_T_END: f64 = 100.0;
pub const DEFAULT_MAX_STEP: f64 = 0.01;
pub const DEFAULT_MARGINAL_BAND: f64 = 1e-3;

/// A matrix given either as nested rows or as a flat row-major list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixSpec {
    fn into_matrix(self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, CliError> {
        let flat: Vec<f64> = match self {
            MatrixSpec::Rows(r) => {
                if r.len() != rows || r.iter().any(|row| row.len() != cols) {
                    return Err(CliError::Config(format!("{name} must be {rows}x{cols}")));
                }
                r.into_iter().flatten().collect()
            }
            MatrixSpec::Flat(v) => v,
        };
        if flat.len() != rows * cols {
            return Err(CliError::Config(format!(
                "{name} must have {} entries ({rows}x{cols}), found {}",
                rows * cols,
                flat.len()
            )));
        }
        Ok(DMatrix::from_row_slice(rows, cols, &flat))
    }

    fn square(self, name: &str) -> Result<DMatrix<f64>, CliError> {
        let n = match &self {
            MatrixSpec::Rows(r) => r.len(),
            MatrixSpec::Flat(v) => {
                let n = (v.len() as f64).sqrt().round() as usize;
                if n * n != v.len() {
                    return Err(CliError::Config(format!("{name} has {} entries, not a square count", v.len())));
                }
                n
            }
        };
        self.into_matrix(name, n, n)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    p: usize,
    q: usize,
    a: MatrixSpec,
    b: MatrixSpec,
    k: MatrixSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    adjacency: MatrixSpec,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    pub tau_max: Option<f64>,
    pub eigen_tol: Option<f64>,
    pub unit_circle_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    pub t_end: Option<f64>,
    pub max_step: Option<f64>,
    pub record_stride: Option<usize>,
    pub seed: Option<u64>,
    /// Flat `n * p` vector or one row per agent.
    pub initial_states: Option<MatrixSpec>,
    /// Delays this close to a stability switch are predicted marginal.
    pub marginal_band: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub taus: Option<Vec<f64>>,
    pub range: Option<SweepRange>,
}

impl SweepSettings {
    pub fn delays(&self) -> Vec<f64> {
        if let Some(t) = &self.taus {
            return t.clone();
        }
        match &self.range {
            Some(r) if r.count == 1 => vec![r.start],
            Some(r) => (0..r.count)
                .map(|i| r.start + (r.end - r.start) * i as f64 / (r.count - 1) as f64)
                .collect(),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dynamics: RawDynamics,
    topology: Vec<RawTopology>,
    #[serde(default)]
    analysis: AnalysisSettings,
    #[serde(default)]
    simulation: SimulationSettings,
    #[serde(default)]
    sweep: SweepSettings,
}

pub struct ProblemConfig {
    pub dynamics: AgentDynamics,
    pub topologies: Vec<Topology>,
    pub analysis: AnalysisSettings,
    pub simulation: SimulationSettings,
    pub sweep: SweepSettings,
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let RawDynamics { p, q, a, b, k } = raw.dynamics;
        let dynamics = AgentDynamics::new(
            a.into_matrix("dynamics.a", p, p)?,
            b.into_matrix("dynamics.b", p, q)?,
            k.into_matrix("dynamics.k", q, p)?,
        )?;
        if raw.topology.is_empty() {
            return Err(CliError::Config("at least one [[topology]] is required".into()));
        }
        let topologies = raw
            .topology
            .into_iter()
            .enumerate()
            .map(|(i, t)| Ok(build_topology(t.adjacency.square(&format!("topology[{i}].adjacency"))?)?))
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(ProblemConfig {
            dynamics,
            topologies,
            analysis: raw.analysis,
            simulation: raw.simulation,
            sweep: raw.sweep,
        })
    }

    /// Explicit initial states as one `n * p` vector, if configured.
    pub fn initial_states(&self) -> Result<Option<DVector<f64>>, CliError> {
        let Some(spec) = self.simulation.initial_states.clone() else {
            return Ok(None);
        };
        let n = self.topologies[0].n();
        let p = self.dynamics.p();
        let m = spec.into_matrix("simulation.initial_states", n, p)?;
        Ok(Some(DVector::from_iterator(n * p, m.transpose().iter().copied())))
    }
}
