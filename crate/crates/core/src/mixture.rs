//! Integrated ("mixture") test martingales `M_k(pi) = ∫ M_k(c) pi(c) dc`.
//!
//! The density is discretised once, at construction, on a fixed grid: a
//! Gauss-Legendre rule per sign region for a uniform density, or the given
//! atoms for a weighted-node density. The grid never changes afterwards, so
//! the implied stake process stays predictable.
//!
//! Non-negative nodes use the upper factor `1 - c (t - mu)/(tau1 - mu)`;
//! negative nodes use `1 - c (t - mu)/(mu - tau0)`, i.e. the lower factor
//! with stake `|c|`. A stake of zero contributes a factor of one either way.

use serde::{Deserialize, Serialize};

use crate::config::{Branch, TestConfig};
use crate::error::{Error, Result};
use crate::martingale::factor_at;
use crate::numeric::{log_sum_exp, GaussLegendre};

/// Nodes per sign region unless told otherwise.
pub const DEFAULT_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub enum Density {
    Uniform,
    WeightedNodes { nodes: Vec<f64>, weights: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DensityRepr {
    Name(String),
    Nodes { nodes: Vec<f64>, weights: Vec<f64> },
}

impl TryFrom<DensityRepr> for Density {
    type Error = String;
    fn try_from(r: DensityRepr) -> std::result::Result<Self, String> {
        match r {
            DensityRepr::Name(n) if n == "uniform" => Ok(Density::Uniform),
            DensityRepr::Name(n) => Err(format!("unknown density `{n}`")),
            DensityRepr::Nodes { nodes, weights } => Ok(Density::WeightedNodes { nodes, weights }),
        }
    }
}

impl From<Density> for DensityRepr {
    fn from(d: Density) -> Self {
        match d {
            Density::Uniform => DensityRepr::Name("uniform".into()),
            Density::WeightedNodes { nodes, weights } => DensityRepr::Nodes { nodes, weights },
        }
    }
}

/// A probability density on stakes in `[a, b] ⊆ [-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub support: (f64, f64),
    pub density: Density,
}

impl MixtureSpec {
    pub fn uniform(a: f64, b: f64) -> Self {
        Self {
            support: (a, b),
            density: Density::Uniform,
        }
    }

    pub fn weighted(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let a = nodes.iter().copied().fold(f64::INFINITY, f64::min);
        let b = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // a single node still needs a non-degenerate support
        let (a, b) = match (b > a, a + f64::EPSILON <= 1.0) {
            (true, _) => (a, b),
            (false, true) => (a, a + f64::EPSILON),
            (false, false) => (b - f64::EPSILON, b),
        };
        Self {
            support: (a, b),
            density: Density::WeightedNodes { nodes, weights },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.support;
        if !(a.is_finite() && b.is_finite() && -1.0 <= a && a < b && b <= 1.0) {
            return Err(Error::InvalidMixture(format!(
                "support [{a}, {b}] must satisfy -1 <= a < b <= 1"
            )));
        }
        if let Density::WeightedNodes { nodes, weights } = &self.density {
            if nodes.is_empty() || nodes.len() != weights.len() {
                return Err(Error::InvalidMixture("nodes and weights must be non-empty and equally long".into()));
            }
            if nodes.iter().any(|c| !(a..=b).contains(c)) {
                return Err(Error::InvalidMixture("a node lies outside the support".into()));
            }
            if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                return Err(Error::InvalidMixture("weights must be positive".into()));
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMixture(format!("weights sum to {total}, not 1")));
            }
        }
        Ok(())
    }

    pub fn is_one_sided(&self) -> bool {
        self.support.0 >= 0.0
    }
}

/// Discretised density: stake nodes and their log-weights (summing to one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureGrid {
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl MixtureGrid {
    pub fn new(spec: &MixtureSpec, node_count: usize) -> Result<Self> {
        spec.validate()?;
        if node_count < 2 {
            return Err(Error::InvalidMixture("node_count must be at least 2".into()));
        }
        let (a, b) = spec.support;
        let (nodes, weights) = match &spec.density {
            Density::WeightedNodes { nodes, weights } => (nodes.clone(), weights.clone()),
            Density::Uniform => {
                let gl = GaussLegendre::new(node_count);
                let regions: Vec<(f64, f64)> = if a < 0.0 && b > 0.0 {
                    vec![(a, 0.0), (0.0, b)]
                } else {
                    vec![(a, b)]
                };
                let mut nodes = Vec::with_capacity(node_count * regions.len());
                let mut weights = Vec::with_capacity(node_count * regions.len());
                for (lo, hi) in regions {
                    let (xs, ws) = gl.on_interval(lo, hi);
                    nodes.extend(xs);
                    weights.extend(ws.into_iter().map(|w| w / (b - a)));
                }
                (nodes, weights)
            }
        };
        Ok(Self {
            nodes,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Log-factor for a signed stake node.
pub(crate) fn node_log_factor(index: u64, node: f64, t: f64, cfg: &TestConfig) -> Result<f64> {
    let f = if node >= 0.0 {
        factor_at(index, Branch::Upper, t, cfg, node)?
    } else {
        factor_at(index, Branch::Lower, t, cfg, -node)?
    };
    Ok(f.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    pub grid: MixtureGrid,
    /// `ln M_k(c_i)` per node.
    pub log_vals: Vec<f64>,
    pub k: u64,
}

impl MixtureState {
    /// Fresh state with every `M_0(c_i) = 1`.
    pub fn new(spec: &MixtureSpec, node_count: usize) -> Result<Self> {
        let grid = MixtureGrid::new(spec, node_count)?;
        let log_vals = vec![0.0; grid.len()];
        Ok(Self { grid, log_vals, k: 0 })
    }

    pub fn update(&self, t: f64, cfg: &TestConfig) -> Result<Self> {
        let index = self.k + 1;
        let mut log_vals = Vec::with_capacity(self.log_vals.len());
        for (&c, &lv) in self.grid.nodes.iter().zip(&self.log_vals) {
            let lf = node_log_factor(index, c, t, cfg)?;
            log_vals.push(if lv == f64::NEG_INFINITY { lv } else { lv + lf });
        }
        Ok(Self {
            grid: self.grid.clone(),
            log_vals,
            k: index,
        })
    }

    /// In-place variant of [`MixtureState::update`] for hot loops.
    pub fn update_in_place(&mut self, t: f64, cfg: &TestConfig) -> Result<()> {
        let index = self.k + 1;
        for (i, &c) in self.grid.nodes.iter().enumerate() {
            let lf = node_log_factor(index, c, t, cfg)?;
            self.log_vals[i] += lf;
        }
        self.k = index;
        Ok(())
    }

    /// `ln M_k(pi)`.
    pub fn value(&self) -> f64 {
        log_sum_exp(self.grid.log_weights.iter().zip(&self.log_vals).map(|(w, v)| w + v))
    }

    /// Mean stake under the posterior-like density `M_k(c) pi(c) / M_k(pi)`;
    /// this is the stake the mixture effectively plays at step `k + 1`.
    pub fn effective_c(&self) -> Result<f64> {
        let logs: Vec<f64> = self
            .grid
            .log_weights
            .iter()
            .zip(&self.log_vals)
            .map(|(w, v)| w + v)
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::UndefinedEffectiveStake);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (c, l) in self.grid.nodes.iter().zip(&logs) {
            let w = (l - max).exp();
            num += c * w;
            den += w;
        }
        Ok(num / den)
    }
}
