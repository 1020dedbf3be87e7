use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ot::{rewards_from_coupling, sinkhorn_fixed_iterations};
use crate::proximity::{min_dist_reward, min_dist_reward_kdtree, seg_match_reward, seg_window_reward};
use crate::traj::{pairwise_cost_with, DistanceMetric, Trajectory};

pub const TIMING_CSV_HEADER: &str = "method,T,d,median_seconds,run_id";

const RUNS: usize = 5;
const MIN_BATCH: Duration = Duration::from_millis(2);
/// Sinkhorn probes run a fixed number of sweeps so that the work per size
/// differs only through the matrix size.
const SINKHORN_PROBE_ITERATIONS: usize = 50;
const SINKHORN_PROBE_EPSILON: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeMethod {
    Sinkhorn,
    MinDist,
    MinDistKdTree,
    SegMatch,
    SegWindow,
}

impl ProbeMethod {
    pub const ALL: [ProbeMethod; 5] = [
        ProbeMethod::Sinkhorn,
        ProbeMethod::MinDist,
        ProbeMethod::MinDistKdTree,
        ProbeMethod::SegMatch,
        ProbeMethod::SegWindow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeMethod::Sinkhorn => "sinkhorn",
            ProbeMethod::MinDist => "min-dist",
            ProbeMethod::MinDistKdTree => "min-dist-kdtree",
            ProbeMethod::SegMatch => "seg-match",
            ProbeMethod::SegWindow => "seg-window",
        }
    }

    fn run(self, tau: &Trajectory, expert: &Trajectory) -> Result<f64> {
        let m = DistanceMetric::Euclidean;
        let r = match self {
            ProbeMethod::Sinkhorn => {
                let cost = pairwise_cost_with(tau, expert, m, Execution::Sequential)?;
                let plan = sinkhorn_fixed_iterations(&cost, SINKHORN_PROBE_EPSILON, SINKHORN_PROBE_ITERATIONS)?;
                return Ok(rewards_from_coupling(&cost, &plan).iter().sum());
            }
            ProbeMethod::MinDist => min_dist_reward(tau, expert, m)?,
            ProbeMethod::MinDistKdTree => min_dist_reward_kdtree(tau, expert, m)?,
            ProbeMethod::SegMatch => seg_match_reward(tau, expert, m)?,
            ProbeMethod::SegWindow => seg_window_reward(tau, expert, m, 10, 3)?,
        };
        Ok(r.total())
    }
}

impl fmt::Display for ProbeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ProbeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown probe method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub method: ProbeMethod,
    pub t: usize,
    pub d: usize,
    pub median_seconds: f64,
}

/// Two Gaussian random walks of length `t` in `d` dimensions (agent, expert).
pub fn synthetic_pair(t: usize, d: usize, seed: u64) -> Result<(Trajectory, Trajectory)> {
    if t == 0 || d == 0 {
        return Err(Error::invalid("synthetic pair needs t >= 1 and d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walk = |id: &str| {
        let mut pos = vec![0.0; d];
        let mut flat = Vec::with_capacity(t * d);
        for _ in 0..t {
            for p in pos.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *p += 0.1 * z;
            }
            flat.extend_from_slice(&pos);
        }
        Trajectory::from_flat(id, d, flat)
    };
    let agent = walk("agent")?;
    let expert = walk("expert")?;
    Ok((agent, expert))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median-of-5 per-call wall time of `method` at each size. Every size runs
/// the same number of calls per sample, chosen so that one sample at the
/// smallest size lasts at least 2 ms.
pub fn timing_probe(method: ProbeMethod, sizes: &[usize], d: usize, seed: u64) -> Result<Vec<TimingRow>> {
    if sizes.is_empty() {
        return Err(Error::invalid("no sizes given"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sizes must be strictly increasing"));
    }
    let inputs = sizes
        .iter()
        .map(|&t| synthetic_pair(t, d, seed))
        .collect::<Result<Vec<_>>>()?;

    let (tau0, exp0) = &inputs[0];
    let start = Instant::now();
    std::hint::black_box(method.run(tau0, exp0)?);
    let once = start.elapsed().max(Duration::from_nanos(1));
    let reps = (MIN_BATCH.as_nanos() / once.as_nanos()).max(1) as usize;

    let mut rows = Vec::with_capacity(sizes.len());
    for (&t, (tau, expert)) in sizes.iter().zip(&inputs) {
        let mut samples = Vec::with_capacity(RUNS);
        for _ in 0..RUNS {
            let start = Instant::now();
            for _ in 0..reps {
                std::hint::black_box(method.run(tau, expert)?);
            }
            samples.push(start.elapsed().as_secs_f64() / reps as f64);
        }
        rows.push(TimingRow {
            method,
            t,
            d,
            median_seconds: median(samples),
        });
    }
    Ok(rows)
}

/// Append rows to a CSV, writing the header if the file is new or empty.
/// All rows share one `run_id`, one more than the largest already present.
pub fn write_timing_csv(path: &Path, rows: &[TimingRow]) -> Result<u64> {
    let existing = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e.into()),
    };
    let mut lines = existing.lines();
    let mut last_id = None;
    if let Some(h) = lines.next() {
        if h.trim() != TIMING_CSV_HEADER {
            return Err(Error::Data(format!(
                "{}: unexpected timing header '{h}'",
                path.display()
            )));
        }
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let id = line
                .rsplit(',')
                .next()
                .and_then(|f| f.trim().parse::<u64>().ok())
                .ok_or_else(|| Error::Parse {
                    line: n + 2,
                    message: "bad run_id".into(),
                })?;
            last_id = Some(last_id.map_or(id, |m: u64| m.max(id)));
        }
    }
    let run_id = last_id.map_or(0, |m| m + 1);
    let mut out = String::new();
    if existing.trim().is_empty() {
        out.push_str(TIMING_CSV_HEADER);
        out.push('\n');
    } else if !existing.ends_with('\n') {
        out.push('\n');
    }
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.9e},{}\n",
            r.method, r.t, r.d, r.median_seconds, run_id
        ));
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(out.as_bytes())?;
    Ok(run_id)
}
