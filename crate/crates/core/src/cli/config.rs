//! Label config resolution: flags override the TOML file, which overrides
//! the built-in defaults.

use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::label::{LabelConfig, PostprocessMode, SquashMode};
use crate::reward::Method;
use crate::traj::DistanceMetric;

/// Every label setting, each optional so that sources can be layered.
#[derive(Args, Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LabelOverrides {
    /// Labeling method: ot, temporal-ot, min-dist, seg-match, seg-window, unified.
    #[arg(long)]
    pub method: Option<Method>,
    /// Distance metric: cosine or euclidean.
    #[arg(long)]
    pub metric: Option<DistanceMetric>,
    /// Squash: default, otr, none, or ALPHA,BETA.
    #[arg(long, value_parser = SquashMode::parse)]
    #[serde(default, deserialize_with = "de_squash")]
    pub squash: Option<SquashMode>,
    /// Context length (temporal-ot, seg-window).
    #[arg(long)]
    pub k_c: Option<usize>,
    /// Temporal mask half-width (temporal-ot).
    #[arg(long)]
    pub k_m: Option<usize>,
    /// Window half-width (seg-window).
    #[arg(long)]
    pub k_w: Option<usize>,
    /// Unified window backward extent.
    #[arg(long)]
    pub window_a: Option<u64>,
    /// Unified window stride, an exact rational such as 1/2.
    #[arg(long)]
    pub window_b: Option<String>,
    /// Unified window forward extent.
    #[arg(long)]
    pub window_c: Option<u64>,
    /// Sinkhorn entropic regularization (ot, temporal-ot).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub marginal_tolerance: Option<f64>,
    /// Stretch the temporal mask when lengths differ.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub lenient: Option<bool>,
    /// Use the kd-tree for min-dist (euclidean only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub kdtree: Option<bool>,
    /// Post-processing: none, offline or online.
    #[arg(long)]
    pub postprocess: Option<PostprocessMode>,
    /// Constant added after offline rescaling (e.g. -2 for Antmaze).
    #[arg(long, allow_hyphen_values = true)]
    pub reward_bias: Option<f64>,
    #[arg(long)]
    pub auto_rew_scale_factor: Option<f64>,
    /// Also label and write the expert trajectories.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub include_expert: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn de_squash<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<SquashMode>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    s.map(|s| SquashMode::parse(&s).map_err(serde::de::Error::custom))
        .transpose()
}

macro_rules! layer {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl LabelOverrides {
    pub fn from_toml_file(path: &PathBuf) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {}", path.display(), e.message())))
    }

    /// `self` with every field set in `top` replaced.
    pub fn layered(&self, top: &LabelOverrides) -> LabelOverrides {
        let mut out = self.clone();
        layer!(
            out,
            top,
            method,
            metric,
            squash,
            k_c,
            k_m,
            k_w,
            window_a,
            window_b,
            window_c,
            epsilon,
            max_iterations,
            marginal_tolerance,
            lenient,
            kdtree,
            postprocess,
            reward_bias,
            auto_rew_scale_factor,
            include_expert,
            seed
        );
        out
    }

    /// Reject settings that do not apply to the chosen method.
    pub fn check_consistency(&self, method: Method) -> Result<()> {
        let mut bad = Vec::new();
        if self.k_m.is_some() && method != Method::TemporalOt {
            bad.push("k_m applies only to temporal-ot");
        }
        if self.lenient.is_some() && method != Method::TemporalOt {
            bad.push("lenient applies only to temporal-ot");
        }
        if self.k_w.is_some() && method != Method::SegWindow {
            bad.push("k_w applies only to seg-window");
        }
        if self.k_c.is_some() && !matches!(method, Method::TemporalOt | Method::SegWindow) {
            bad.push("k_c applies only to temporal-ot and seg-window");
        }
        if (self.window_a.is_some() || self.window_b.is_some() || self.window_c.is_some()) && method != Method::Unified
        {
            bad.push("window a/b/c apply only to unified");
        }
        if (self.epsilon.is_some() || self.max_iterations.is_some() || self.marginal_tolerance.is_some())
            && !method.is_ot()
        {
            bad.push("sinkhorn settings apply only to ot and temporal-ot");
        }
        if self.kdtree == Some(true) && method != Method::MinDist {
            bad.push("kdtree applies only to min-dist");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "inconsistent settings for method {method}: {}",
                bad.join("; ")
            )))
        }
    }

    pub fn resolve(&self) -> Result<LabelConfig> {
        let method = self.method.unwrap_or(LabelConfig::default().method);
        self.check_consistency(method)?;
        let mut c = LabelConfig::for_method(method);
        if let Some(v) = self.metric {
            c.metric = v;
        }
        if let Some(v) = &self.squash {
            c.squash = *v;
        }
        if let Some(v) = self.k_c {
            c.k_c = v;
        }
        if let Some(v) = self.k_m {
            c.k_m = v;
        }
        if let Some(v) = self.k_w {
            c.k_w = v;
        }
        if let Some(v) = self.window_a {
            c.window.a = v;
        }
        if let Some(v) = &self.window_b {
            c.window.b = v.clone();
        }
        if let Some(v) = self.window_c {
            c.window.c = v;
        }
        if let Some(v) = self.epsilon {
            c.sinkhorn.epsilon = v;
        }
        if let Some(v) = self.max_iterations {
            c.sinkhorn.max_iterations = v;
        }
        if let Some(v) = self.marginal_tolerance {
            c.sinkhorn.marginal_tolerance = v;
        }
        if let Some(v) = self.lenient {
            c.lenient = v;
        }
        if let Some(v) = self.kdtree {
            c.kdtree = v;
        }
        if let Some(v) = self.postprocess {
            c.postprocess = v;
        }
        if let Some(v) = self.reward_bias {
            c.reward_bias = v;
        }
        if let Some(v) = self.auto_rew_scale_factor {
            c.auto_rew_scale_factor = v;
        }
        if let Some(v) = self.include_expert {
            c.include_expert = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: LabelOverrides = toml::from_str("method = \"seg-window\"\nk_w = 4\nseed = 9\n").unwrap();
        let flags = LabelOverrides {
            k_w: Some(7),
            ..Default::default()
        };
        let c = file.layered(&flags).resolve().unwrap();
        assert_eq!(c.method, Method::SegWindow);
        assert_eq!(c.k_w, 7);
        assert_eq!(c.seed, 9);
        assert_eq!(c.k_c, 3);
    }

    #[test]
    fn inconsistent_flags_rejected() {
        let o = LabelOverrides {
            method: Some(Method::Ot),
            k_w: Some(3),
            ..Default::default()
        };
        assert!(o.resolve().is_err());
        let o = LabelOverrides {
            method: Some(Method::MinDist),
            epsilon: Some(0.1),
            ..Default::default()
        };
        assert!(o.resolve().is_err());
        let o = LabelOverrides {
            method: Some(Method::TemporalOt),
            k_m: Some(2),
            k_c: Some(1),
            ..Default::default()
        };
        assert!(o.resolve().is_ok());
    }

    #[test]
    fn unknown_toml_key_rejected() {
        assert!(toml::from_str::<LabelOverrides>("k_q = 1\n").is_err());
        let o: LabelOverrides = toml::from_str("squash = \"2,3\"\n").unwrap();
        assert_eq!(o.squash, Some(SquashMode::Params { alpha: 2.0, beta: 3.0 }));
    }
}
