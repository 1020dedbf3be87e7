//! Trajectories, state distances and cost matrices.
//!
//! States are stored flat (row-major, `len × dim`) so that a trajectory is a
//! single allocation. All indices in this module are 0-based; the window and
//! segment code in [`crate::proximity`] uses 1-based indices at its surface.

use std::sync::atomic::{AtomicBool, Ordering};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{fill_rows, Execution};

/// A single state, validated to be non-empty and finite.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("state vector must have dimension >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state vector".into()));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for StateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    id: String,
    dim: usize,
    states: Vec<f64>,
    actions: Option<Actions>,
}

/// Per-step action vectors, flat like the states.
#[derive(Clone, Debug, PartialEq)]
pub struct Actions {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Trajectory {
    /// Build from a flat row-major buffer of `len × dim` state values.
    pub fn from_flat(id: impl Into<String>, dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("state dimension must be >= 1"));
        }
        if states.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if !states.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: states.len() % dim,
            });
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory states".into()));
        }
        Ok(Self {
            id: id.into(),
            dim,
            states,
            actions: None,
        })
    }

    pub fn from_states<S: AsRef<[f64]>>(id: impl Into<String>, states: &[S]) -> Result<Self> {
        let first = states.first().ok_or(Error::EmptyTrajectory)?;
        let dim = first.as_ref().len();
        let mut flat = Vec::with_capacity(dim * states.len());
        for s in states {
            let s = s.as_ref();
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.len(),
                });
            }
            flat.extend_from_slice(s);
        }
        Self::from_flat(id, dim, flat)
    }

    pub fn with_actions(mut self, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != dim * self.len() {
            return Err(Error::Data(format!(
                "trajectory {}: actions must have one vector per state",
                self.id
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory actions".into()));
        }
        self.actions = Some(Actions { dim, values });
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State `i`, 0-based.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + DoubleEndedIterator + '_ {
        self.states.chunks_exact(self.dim)
    }

    pub fn flat_states(&self) -> &[f64] {
        &self.states
    }

    pub fn actions(&self) -> Option<&Actions> {
        self.actions.as_ref()
    }

    /// Same states in reverse temporal order.
    pub fn reversed(&self, id: impl Into<String>) -> Self {
        let states: Vec<&[f64]> = self.states().rev().collect();
        Self::from_states(id, &states).expect("reversal of a valid trajectory")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Cosine,
    Euclidean,
}

impl DistanceMetric {
    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::Cosine => "cosine",
            DistanceMetric::Euclidean => "euclidean",
        }
    }

    /// Distance between two equal-length slices. Callers check dimensions.
    #[inline]
    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => euclidean(x, y),
            DistanceMetric::Cosine => cosine(x, y),
        }
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(DistanceMetric::Cosine),
            "euclidean" => Ok(DistanceMetric::Euclidean),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }
}

#[inline]
pub(crate) fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

static ZERO_NORM_WARNED: AtomicBool = AtomicBool::new(false);

#[inline]
fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    if nx == 0.0 || ny == 0.0 {
        if !ZERO_NORM_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("cosine distance with a zero-norm state; using distance 1");
        }
        return 1.0;
    }
    (1.0 - dot / (nx.sqrt() * ny.sqrt())).clamp(0.0, 2.0)
}

/// Checked distance between two states.
pub fn distance(x: &[f64], y: &[f64], metric: DistanceMetric) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::invalid("state vector must have dimension >= 1"));
    }
    Ok(metric.eval(x, y))
}

/// Dense `T × T_e` cost matrix; rows index agent states, columns expert states.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::invalid("cost matrix must be non-empty"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cost matrix".into()));
        }
        if entries.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("cost matrix entries must be >= 0"));
        }
        Ok(Self(entries))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged cost matrix rows"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((r, c), flat).map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(arr)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }
}

fn check_dims(tau: &Trajectory, expert: &Trajectory) -> Result<()> {
    if tau.dim() != expert.dim() {
        return Err(Error::DimensionMismatch {
            expected: expert.dim(),
            found: tau.dim(),
        });
    }
    Ok(())
}

pub(crate) fn check_pair(tau: &Trajectory, expert: &Trajectory) -> Result<()> {
    if tau.is_empty() || expert.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    check_dims(tau, expert)
}

pub fn pairwise_cost(tau: &Trajectory, expert: &Trajectory, metric: DistanceMetric) -> Result<CostMatrix> {
    pairwise_cost_with(tau, expert, metric, Execution::Parallel)
}

pub fn pairwise_cost_with(
    tau: &Trajectory,
    expert: &Trajectory,
    metric: DistanceMetric,
    exec: Execution,
) -> Result<CostMatrix> {
    check_pair(tau, expert)?;
    let (t, te) = (tau.len(), expert.len());
    let mut buf = vec![0.0; t * te];
    fill_rows(&mut buf, te, exec, |i, row| {
        let s = tau.state(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = metric.eval(s, expert.state(j));
        }
    });
    Ok(CostMatrix(Array2::from_shape_vec((t, te), buf).expect("shape")))
}

/// Context-aware cost: each entry averages `k_c` pairwise costs along the
/// diagonal starting at `(i, j)`. Offsets that run past either trajectory end
/// are clamped to the final state.
pub fn context_cost(tau: &Trajectory, expert: &Trajectory, metric: DistanceMetric, k_c: usize) -> Result<CostMatrix> {
    if k_c == 0 {
        return Err(Error::invalid("context length k_c must be >= 1"));
    }
    let base = pairwise_cost(tau, expert, metric)?;
    if k_c == 1 {
        return Ok(base);
    }
    let (t, te) = base.shape();
    let p = base.as_array();
    let mut buf = vec![0.0; t * te];
    fill_rows(&mut buf, te, Execution::Parallel, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for h in 0..k_c {
                acc += p[[(i + h).min(t - 1), (j + h).min(te - 1)]];
            }
            *v = acc / k_c as f64;
        }
    });
    Ok(CostMatrix(Array2::from_shape_vec((t, te), buf).expect("shape")))
}

/// One entry of [`context_cost`], computed without building the matrix.
/// Produces bit-identical values to the matrix path.
#[inline]
pub fn context_cost_entry(
    tau: &Trajectory,
    expert: &Trajectory,
    metric: DistanceMetric,
    k_c: usize,
    i: usize,
    j: usize,
) -> f64 {
    let (t, te) = (tau.len(), expert.len());
    if k_c == 1 {
        return metric.eval(tau.state(i), expert.state(j));
    }
    let mut acc = 0.0;
    for h in 0..k_c {
        acc += metric.eval(tau.state((i + h).min(t - 1)), expert.state((j + h).min(te - 1)));
    }
    acc / k_c as f64
}
