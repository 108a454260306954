//! TOML scenario files.
//!
//! ```toml
//! seed = 7
//!
//! [graph]
//! family = "complete"      # complete | directed_cycle | ring | path | custom
//! n = 2
//! weight = 1.0
//! # edges = [[1, 2, 1.0], [2, 1, 1.0]]   # custom only, one-based (observer, observed, weight)
//!
//! [filter]
//! b = 1.0                  # scalar, or one value per node
//! r = 1.0
//! s = 1.0
//! g = 1.0
//! riccati = "steady"       # steady | dynamic
//!
//! [initial]
//! x = [0.0, 1.0]
//!
//! [disturbance]
//! kind = "zero"            # zero | sinusoid | white
//!
//! [integration]
//! h = 0.01
//! t_end = 50.0
//! ```
//!
//! Every section except `[graph]` and `[initial]` may be omitted.
//! [`ScenarioConfig::resolved`] fills every default and materialises random
//! initial states, so its TOML echo reproduces the run on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disturbance::{DisturbanceKind, DisturbanceProfile};
use crate::error::{invalid, Error, Result};
use crate::filter::params_for_topology;
use crate::graph::{make_graph, GraphFamily, NetworkTopology};
use crate::scalar::Scalar;
use crate::simulate::{RiccatiMode, Scenario};

/// ChaCha stream reserved for drawing `x_uniform` initial states.
const INITIAL_STATE_STREAM: u64 = 1 << 62;

/// A value shared by all nodes or given per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerNode {
    pub fn expand(&self, field: &str, n: usize) -> Result<Vec<f64>> {
        match self {
            PerNode::Uniform(v) => Ok(vec![*v; n]),
            PerNode::Each(v) if v.len() == n => Ok(v.clone()),
            PerNode::Each(v) => Err(invalid(field, format!("expected 1 or {n} values, got {}", v.len()))),
        }
    }

    pub fn is_uniform(&self) -> bool {
        match self {
            PerNode::Uniform(_) => true,
            PerNode::Each(v) => v.windows(2).all(|w| w[0] == w[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Complete,
    DirectedCycle,
    Ring,
    Path,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub family: FamilyName,
    pub n: usize,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    #[serde(default = "per_node_one")]
    pub b: PerNode,
    #[serde(default = "per_node_one")]
    pub r: PerNode,
    #[serde(default = "per_node_one")]
    pub s: PerNode,
    #[serde(default = "per_node_one")]
    pub g: PerNode,
    #[serde(default)]
    pub riccati: RiccatiMode,
    /// Initial Riccati weight `Ξ_i`; omitted means `1/Q_i*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<PerNode>,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            b: per_node_one(),
            r: per_node_one(),
            s: per_node_one(),
            g: per_node_one(),
            riccati: RiccatiMode::Steady,
            xi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// True initial states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    /// Draw `x(0)` uniformly from `[lo, hi]` using the scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_uniform: Option<(f64, f64)>,
    /// Filter priors `x_i0`; defaults to `x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    /// Initial estimation error `e(0)`, an alternative to `prior`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    #[serde(default = "zero_kind")]
    pub kind: DisturbanceKind,
    #[serde(default)]
    pub delta_max: f64,
    #[serde(default)]
    pub eps_max: f64,
    #[serde(default = "default_frequency")]
    pub frequency: f64,
    /// Defaults to the scenario seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for DisturbanceSection {
    fn default() -> Self {
        Self {
            kind: DisturbanceKind::Zero,
            delta_max: 0.0,
            eps_max: 0.0,
            frequency: default_frequency(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self {
            h: default_h(),
            t_end: default_t_end(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Spectral zero tolerance.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub record_measurements: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub graph: GraphSection,
    #[serde(default)]
    pub filter: FilterSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub disturbance: DisturbanceSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> f64 {
    1.0
}
fn per_node_one() -> PerNode {
    PerNode::Uniform(1.0)
}
fn zero_kind() -> DisturbanceKind {
    DisturbanceKind::Zero
}
fn default_frequency() -> f64 {
    0.5
}
fn default_h() -> f64 {
    0.01
}
fn default_t_end() -> f64 {
    50.0
}
fn default_tolerance() -> f64 {
    1e-8
}

impl ScenarioConfig {
    /// Parses TOML; errors carry the line, column and offending key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn topology<T: Scalar>(&self) -> Result<NetworkTopology<T>> {
        let g = &self.graph;
        let family = match g.family {
            FamilyName::Complete => GraphFamily::Complete,
            FamilyName::DirectedCycle => GraphFamily::DirectedCycle,
            FamilyName::Ring => GraphFamily::UndirectedRing,
            FamilyName::Path => GraphFamily::Path,
            FamilyName::Custom => match &g.edges {
                Some(edges) => GraphFamily::Custom(edges.clone()),
                None => return Err(invalid("graph.edges", "required when family = \"custom\"")),
            },
        };
        if g.family != FamilyName::Custom && g.edges.is_some() {
            return Err(invalid("graph.edges", "only allowed when family = \"custom\""));
        }
        make_graph(&family, g.n, T::lit(g.weight))
    }

    /// True initial states, drawing them when `x_uniform` is given.
    pub fn initial_states(&self) -> Result<Vec<f64>> {
        let n = self.graph.n;
        match (&self.initial.x, self.initial.x_uniform) {
            (Some(_), Some(_)) => Err(invalid("initial", "give either `x` or `x_uniform`, not both")),
            (None, None) => Err(invalid("initial.x", "missing; give `x` or `x_uniform`")),
            (Some(x), None) => {
                if x.len() != n {
                    return Err(invalid("initial.x", format!("expected {n} values, got {}", x.len())));
                }
                Ok(x.clone())
            }
            (None, Some((lo, hi))) => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(invalid("initial.x_uniform", "needs finite lo < hi"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(INITIAL_STATE_STREAM);
                Ok((0..n).map(|_| rng.random_range(lo..hi)).collect())
            }
        }
    }

    fn priors(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let n = x0.len();
        match (&self.initial.prior, &self.initial.error) {
            (Some(_), Some(_)) => Err(invalid("initial", "give either `prior` or `error`, not both")),
            (Some(p), None) if p.len() != n => Err(invalid("initial.prior", format!("expected {n} values, got {}", p.len()))),
            (Some(p), None) => Ok(p.clone()),
            (None, Some(e)) if e.len() != n => Err(invalid("initial.error", format!("expected {n} values, got {}", e.len()))),
            (None, Some(e)) => Ok(x0.iter().zip(e).map(|(x, e)| x + e).collect()),
            (None, None) => Ok(x0.to_vec()),
        }
    }

    pub fn disturbance_profile(&self) -> DisturbanceProfile {
        let d = &self.disturbance;
        DisturbanceProfile {
            kind: d.kind,
            delta_max: d.delta_max,
            eps_max: d.eps_max,
            frequency: d.frequency,
            seed: d.seed.unwrap_or(self.seed),
        }
    }

    /// Whether `R`, `S` and `G` are shared by all nodes, as the global
    /// analysis requires.
    pub fn is_uniform(&self) -> bool {
        let f = &self.filter;
        f.r.is_uniform() && f.s.is_uniform() && f.g.is_uniform()
    }

    /// Copy with every default explicit and random initial states drawn.
    pub fn resolved(&self) -> Result<Self> {
        let x0 = self.initial_states()?;
        let prior = self.priors(&x0)?;
        let mut out = self.clone();
        out.initial = InitialSection {
            x: Some(x0),
            x_uniform: None,
            prior: Some(prior),
            error: None,
        };
        out.disturbance.seed = Some(self.disturbance_profile().seed);
        Ok(out)
    }

    pub fn scenario<T: Scalar>(&self) -> Result<Scenario<T>> {
        let topology = self.topology::<T>()?;
        let n = topology.node_count();
        let f = &self.filter;
        let cast = |v: Vec<f64>| -> Vec<T> { v.into_iter().map(T::lit).collect() };
        let b = cast(f.b.expand("filter.b", n)?);
        let r = cast(f.r.expand("filter.r", n)?);
        let s = cast(f.s.expand("filter.s", n)?);
        let g = cast(f.g.expand("filter.g", n)?);
        let xi = match &f.xi {
            Some(v) => Some(cast(v.expand("filter.xi", n)?)),
            None => None,
        };
        let params = params_for_topology(&topology, &b, &r, &s, &g, xi.as_deref())?;
        let x0 = self.initial_states()?;
        let prior = self.priors(&x0)?;
        if !(self.analysis.tolerance > 0.0) {
            return Err(invalid("analysis.tolerance", "must be positive"));
        }
        let scenario = Scenario {
            topology,
            params,
            x0: cast(x0),
            prior: cast(prior),
            disturbance: self.disturbance_profile(),
            step: T::lit(self.integration.h),
            horizon: T::lit(self.integration.t_end),
            riccati: f.riccati,
            record_measurements: self.output.record_measurements,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
