use std::ops::RangeInclusive;

use num_rational::Ratio;

use super::segment::segment_partition;
use crate::error::{Error, Result};

/// Backward or forward window extent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Extent {
    /// Same extent at every step.
    Fixed(u64),
    /// One (signed) extent per agent step. Needed to express the segment
    /// partition, whose bounds sit asymmetrically around `⌊b·t⌋`.
    PerStep(Vec<i64>),
}

impl Extent {
    fn at(&self, t: usize) -> i64 {
        match self {
            Extent::Fixed(v) => *v as i64,
            Extent::PerStep(v) => v[t - 1],
        }
    }
}

/// Window `W(t) = [⌊b·t⌋ − a, ⌊b·t⌋ + c] ∩ [1, T_e]` over 1-based expert
/// indices, with the last expert state as fallback when the clamped window is
/// empty. The stride `b` is an exact rational.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    pub backward: Extent,
    pub stride: Ratio<u64>,
    pub forward: Extent,
}

impl WindowSpec {
    pub fn new(a: u64, b: Ratio<u64>, c: u64) -> Self {
        Self {
            backward: Extent::Fixed(a),
            stride: b,
            forward: Extent::Fixed(c),
        }
    }

    /// `b = 0` with a forward extent covering every expert index.
    pub fn full_span(te: usize) -> Self {
        Self::new(0, Ratio::from_integer(0), te as u64)
    }

    /// `b = 1`, `a = c = k_w`.
    pub fn symmetric(k_w: u64) -> Self {
        Self::new(k_w, Ratio::from_integer(1), k_w)
    }

    /// `b = T_e / T` with per-step extents reproducing the segment partition.
    pub fn segments(t: usize, te: usize) -> Result<Self> {
        let part = segment_partition(t, te)?;
        let stride = Ratio::new(te as u64, t as u64);
        let (back, fwd): (Vec<i64>, Vec<i64>) = part
            .bounds()
            .iter()
            .enumerate()
            .map(|(k, &(lo, hi))| {
                let center = floor_mul(stride, k + 1);
                (center - lo as i64, hi as i64 - center)
            })
            .unzip();
        Ok(Self {
            backward: Extent::PerStep(back),
            stride,
            forward: Extent::PerStep(fwd),
        })
    }

    pub fn validate(&self, t: usize) -> Result<()> {
        for e in [&self.backward, &self.forward] {
            if let Extent::PerStep(v) = e {
                if v.len() != t {
                    return Err(Error::invalid(format!(
                        "per-step window extent has {} entries for a trajectory of length {t}",
                        v.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Expert indices (1-based, inclusive) compared against agent step `t`.
    pub fn window(&self, t: usize, te: usize) -> RangeInclusive<usize> {
        let center = floor_mul(self.stride, t);
        let lo = (center - self.backward.at(t)).max(1);
        let hi = (center + self.forward.at(t)).min(te as i64);
        if lo > hi {
            te..=te
        } else {
            lo as usize..=hi as usize
        }
    }
}

fn floor_mul(b: Ratio<u64>, t: usize) -> i64 {
    ((*b.numer() as u128 * t as u128) / *b.denom() as u128) as i64
}
