//! Scenario files: workspace, partition, agents, task and parameters in TOML.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::abstraction::{AffineDynamics, AgentModel, SecurityMode, WeightRule, DEFAULT_SELF_LOOP_WEIGHT};
use crate::feasibility::FeasibilityParams;
use crate::geometry::{AxisCut, GeometryError, HPolytope, Partition};
use crate::ltl::{parse_ltl, Ltl, LtlError};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("formula: {0}")]
    Formula(#[from] LtlError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub horizon: f64,
    pub steps: usize,
    /// Defaults to `steps / 2`.
    pub crossing: Option<usize>,
    pub self_loop_weight: f64,
    pub suffix_repeats: usize,
    /// Containment tolerance when mapping samples to regions.
    pub tolerance: f64,
}

impl Default for Params {
    fn default() -> Self {
        let f = FeasibilityParams::default();
        Self {
            beta: 0.5,
            gamma: f.gamma,
            epsilon: f.epsilon,
            horizon: f.horizon,
            steps: f.steps,
            crossing: None,
            self_loop_weight: DEFAULT_SELF_LOOP_WEIGHT,
            suffix_repeats: 2,
            tolerance: 1e-6,
        }
    }
}

impl Params {
    pub fn feasibility(&self) -> FeasibilityParams {
        FeasibilityParams {
            horizon: self.horizon,
            steps: self.steps,
            crossing: self.crossing.unwrap_or(self.steps / 2),
            gamma: self.gamma,
            epsilon: self.epsilon,
        }
    }

    pub fn weight_rule(&self) -> WeightRule {
        WeightRule::CentroidDistance { self_loop: self.self_loop_weight }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeSpec {
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    /// Rows `[p_1, ..., p_n, g]` meaning `p·x + g ≥ 0`.
    halfspaces: Option<Vec<Vec<f64>>>,
}

impl ShapeSpec {
    fn polytope(&self, what: &str) -> Result<Option<HPolytope>, ScenarioError> {
        match (&self.lower, &self.upper, &self.halfspaces) {
            (Some(lo), Some(hi), None) => Ok(Some(HPolytope::from_box(lo, hi)?)),
            (None, None, Some(rows)) => {
                let Some(width) = rows.first().map(Vec::len) else { return invalid(format!("{what}: empty halfspaces")) };
                if width < 2 || rows.iter().any(|r| r.len() != width) {
                    return invalid(format!("{what}: halfspace rows must share a length of at least 2"));
                }
                let normals = rows.iter().map(|r| r[..width - 1].to_vec()).collect();
                let offsets = rows.iter().map(|r| r[width - 1]).collect();
                Ok(Some(HPolytope::new(normals, offsets)?))
            }
            (None, None, None) => Ok(None),
            _ => invalid(format!("{what}: give either lower/upper or halfspaces")),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionSpec {
    name: String,
    #[serde(flatten)]
    shape: ShapeSpec,
    #[serde(default)]
    labels: Vec<String>,
    observation: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSpec {
    name: String,
    initial: Vec<String>,
    #[serde(default)]
    secret: Vec<String>,
    /// Per-agent observation overrides, region name to symbol.
    #[serde(default)]
    observations: BTreeMap<String, String>,
    /// Extra atoms per region for this agent only.
    #[serde(default)]
    labels: BTreeMap<String, Vec<String>>,
    a: Option<Vec<Vec<f64>>>,
    b: Option<Vec<Vec<f64>>>,
    offset: Option<Vec<f64>>,
    input_lower: Option<Vec<f64>>,
    input_upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    formula: Option<String>,
    security: Option<String>,
    #[serde(default)]
    params: Params,
    workspace: ShapeSpec,
    #[serde(default, rename = "cut")]
    cuts: Vec<AxisCut>,
    #[serde(default, rename = "region")]
    regions: Vec<RegionSpec>,
    #[serde(rename = "agent")]
    agents: Vec<AgentSpec>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub formula_text: Option<String>,
    pub formula: Option<Ltl>,
    pub security: SecurityMode,
    pub params: Params,
    pub partition: Partition,
    pub agents: Vec<AgentModel>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, ScenarioError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return invalid(format!("{what} must be a non-empty rectangular matrix"));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied()))
}

fn dynamics(spec: &AgentSpec, dim: usize) -> Result<Option<AffineDynamics>, ScenarioError> {
    let who = &spec.name;
    match (&spec.a, &spec.b, &spec.offset, &spec.input_lower, &spec.input_upper) {
        (None, None, None, None, None) => Ok(None),
        (Some(a), Some(b), offset, Some(lo), Some(hi)) => {
            let a = matrix(a, &format!("agent {who}: A"))?;
            let b = matrix(b, &format!("agent {who}: B"))?;
            let offset = offset.clone().unwrap_or_else(|| vec![0.0; dim]);
            if a.shape() != (dim, dim) || b.nrows() != dim || offset.len() != dim || lo.len() != b.ncols() {
                return invalid(format!(
                    "agent {who}: dynamics do not match workspace dimension {dim} (A {:?}, B {:?}, offset {}, input {})",
                    a.shape(),
                    b.shape(),
                    offset.len(),
                    lo.len()
                ));
            }
            let input = HPolytope::from_box(lo, hi)?;
            Ok(Some(AffineDynamics { a, b, offset: DVector::from_vec(offset), input }))
        }
        _ => invalid(format!("agent {who}: dynamics need a, b, input_lower and input_upper together")),
    }
}

/// Atoms a formula may use: every label `a` as `a` (some agent) and `a_i` (agent `i`,
/// 1-based).
pub fn atom_registry(agents: &[AgentModel]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (i, agent) in agents.iter().enumerate() {
        for atom in agent.labels.iter().flatten() {
            out.insert(atom.clone());
            out.insert(format!("{atom}_{}", i + 1));
        }
    }
    out
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        let Some(workspace) = file.workspace.polytope("workspace")? else {
            return invalid("workspace needs a shape");
        };

        let partition = if file.cuts.is_empty() {
            let mut regions = Vec::new();
            for r in &file.regions {
                match r.shape.polytope(&format!("region {}", r.name))? {
                    Some(p) => regions.push((r.name.clone(), p)),
                    None => return invalid(format!("region {} has no shape", r.name)),
                }
            }
            Partition::new(workspace, regions)?
        } else {
            if let Some(r) = file.regions.iter().find(|r| r.shape.polytope("").ok().flatten().is_some()) {
                return invalid(format!("region {} has a shape but the partition comes from cuts", r.name));
            }
            Partition::axis_split(&workspace, &file.cuts)?
        };
        let n = partition.len();
        let mut base_labels = vec![BTreeSet::new(); n];
        let mut base_obs: Vec<Option<String>> = vec![None; n];
        let mut seen = BTreeSet::new();
        for r in &file.regions {
            let Some(q) = partition.index_of(&r.name) else { return invalid(format!("unknown region {}", r.name)) };
            if !seen.insert(q) {
                return invalid(format!("region {} declared twice", r.name));
            }
            base_labels[q] = r.labels.iter().cloned().collect();
            base_obs[q] = r.observation.clone();
        }

        let lookup = |name: &str, who: &str| {
            partition.index_of(name).ok_or_else(|| ScenarioError::Invalid(format!("agent {who}: unknown region {name}")))
        };
        if file.agents.is_empty() {
            return invalid("no agents");
        }
        let mut agents = Vec::new();
        for spec in &file.agents {
            let who = &spec.name;
            let initial = spec.initial.iter().map(|r| lookup(r, who)).collect::<Result<BTreeSet<_>, _>>()?;
            let secret = spec.secret.iter().map(|r| lookup(r, who)).collect::<Result<BTreeSet<_>, _>>()?;
            let mut observations = base_obs.clone();
            for (r, y) in &spec.observations {
                observations[lookup(r, who)?] = Some(y.clone());
            }
            let observations = observations
                .into_iter()
                .enumerate()
                .map(|(q, y)| y.ok_or_else(|| ScenarioError::Invalid(format!("agent {who}: region {} has no observation", partition.name(q)))))
                .collect::<Result<Vec<_>, _>>()?;
            let mut labels = base_labels.clone();
            for (r, extra) in &spec.labels {
                labels[lookup(r, who)?].extend(extra.iter().cloned());
            }
            let agent = AgentModel {
                name: who.clone(),
                initial,
                secret,
                observations,
                labels,
                dynamics: dynamics(spec, partition.dim())?,
            };
            agent.validate(n).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            agents.push(agent);
        }

        let security = match &file.security {
            Some(s) => s.parse::<SecurityMode>().map_err(ScenarioError::Invalid)?,
            None => SecurityMode::default(),
        };
        let registry = atom_registry(&agents);
        let formula = file.formula.as_deref().map(|f| parse_ltl(f, &registry)).transpose()?;
        let params = file.params;
        if !(0.0..=1.0).contains(&params.beta) {
            return invalid(format!("beta must lie in [0, 1], got {}", params.beta));
        }
        if !(params.self_loop_weight.is_finite() && params.self_loop_weight > 0.0) {
            return invalid(format!("self_loop_weight must be positive, got {}", params.self_loop_weight));
        }
        if !(params.tolerance.is_finite() && params.tolerance >= 0.0) {
            return invalid(format!("tolerance must be nonnegative, got {}", params.tolerance));
        }
        params.feasibility().validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;

        Ok(Scenario { name: file.name, formula_text: file.formula, formula, security, params, partition, agents })
    }

    pub fn has_dynamics(&self) -> bool {
        self.agents.iter().all(|a| a.dynamics.is_some())
    }
}
