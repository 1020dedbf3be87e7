use std::ops::RangeInclusive;

use crate::error::{Error, Result};

/// Per-step expert segments, 1-based inclusive bounds `(a_t, b_t)`.
///
/// With `q = ⌊T_e/T⌋` and `l = T_e mod T`:
/// `a_t = (t−1)q + 1 + min(t−1, l)`, `b_t = tq + min(t, l)`.
/// For `T ≤ T_e` the segments tile `[1, T_e]`; for `T > T_e` steps `t ≤ T_e`
/// get the singleton `{t}` and later steps get an empty range (`a_t > b_t`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentPartition {
    bounds: Vec<(usize, usize)>,
    expert_len: usize,
}

impl SegmentPartition {
    pub fn bounds(&self) -> &[(usize, usize)] {
        &self.bounds
    }

    pub fn agent_len(&self) -> usize {
        self.bounds.len()
    }

    pub fn expert_len(&self) -> usize {
        self.expert_len
    }

    /// Segment for 1-based step `t`, or `None` when it is empty.
    pub fn segment(&self, t: usize) -> Option<RangeInclusive<usize>> {
        let (a, b) = self.bounds[t - 1];
        (a <= b).then_some(a..=b)
    }
}

pub fn segment_partition(t: usize, te: usize) -> Result<SegmentPartition> {
    if t == 0 || te == 0 {
        return Err(Error::invalid("segment_partition needs T >= 1 and T_e >= 1"));
    }
    let q = te / t;
    let l = te % t;
    let bounds = (1..=t)
        .map(|s| {
            let a = (s - 1) * q + 1 + (s - 1).min(l);
            let b = s * q + s.min(l);
            (a, b)
        })
        .collect();
    Ok(SegmentPartition { bounds, expert_len: te })
}
