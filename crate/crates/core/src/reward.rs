//! Per-step reward series tagged with the labeling method and pipeline stage.
//!
//! The stage is a type parameter so post-processing can only run in the order
//! raw → squashed → rescaled.

use std::fmt;
use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ot,
    TemporalOt,
    MinDist,
    SegMatch,
    SegWindow,
    Unified,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ot,
        Method::TemporalOt,
        Method::MinDist,
        Method::SegMatch,
        Method::SegWindow,
        Method::Unified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ot => "ot",
            Method::TemporalOt => "temporal-ot",
            Method::MinDist => "min-dist",
            Method::SegMatch => "seg-match",
            Method::SegWindow => "seg-window",
            Method::Unified => "unified",
        }
    }

    pub fn is_ot(self) -> bool {
        matches!(self, Method::Ot | Method::TemporalOt)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Raw,
    Squashed,
    Rescaled,
}

pub trait Stage: Clone + fmt::Debug + Send + Sync + 'static {
    const KIND: StageKind;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Raw;
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Squashed;
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rescaled;

impl Stage for Raw {
    const KIND: StageKind = StageKind::Raw;
}
impl Stage for Squashed {
    const KIND: StageKind = StageKind::Squashed;
}
impl Stage for Rescaled {
    const KIND: StageKind = StageKind::Rescaled;
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardSeries<S: Stage> {
    values: Vec<f64>,
    method: Method,
    _stage: PhantomData<S>,
}

impl<S: Stage> RewardSeries<S> {
    pub(crate) fn from_values(method: Method, values: Vec<f64>) -> Self {
        Self {
            values,
            method,
            _stage: PhantomData,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn stage(&self) -> StageKind {
        S::KIND
    }

    /// Sum of the per-step rewards (the trajectory's return).
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl RewardSeries<Raw> {
    /// Wrap externally computed raw rewards (e.g. a control signal).
    pub fn raw(method: Method, values: Vec<f64>) -> Self {
        Self::from_values(method, values)
    }
}

impl RewardSeries<Squashed> {
    /// Wrap rewards that are already on the squashed scale.
    pub fn squashed(method: Method, values: Vec<f64>) -> Self {
        Self::from_values(method, values)
    }
}
