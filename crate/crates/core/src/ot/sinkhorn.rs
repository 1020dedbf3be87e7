use ndarray::Array2;
use petgraph::algo::dinics;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traj::CostMatrix;

/// Convergence controls for the entropic solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub marginal_tolerance: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_iterations: 100_000,
            marginal_tolerance: 1e-6,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        if !(self.marginal_tolerance > 0.0 && self.marginal_tolerance.is_finite()) {
            return Err(Error::invalid(format!(
                "marginal_tolerance must be > 0, got {}",
                self.marginal_tolerance
            )));
        }
        Ok(())
    }
}

/// A transport plan with uniform marginals `1/T` (rows) and `1/T_e` (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    entries: Array2<f64>,
    epsilon: f64,
    iterations_used: usize,
    marginal_residual: f64,
}

impl Coupling {
    pub(crate) fn new(entries: Array2<f64>, epsilon: f64, iterations_used: usize, marginal_residual: f64) -> Self {
        Self {
            entries,
            epsilon,
            iterations_used,
            marginal_residual,
        }
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    /// Regularization strength; 0 for exact solutions.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn iterations_used(&self) -> usize {
        self.iterations_used
    }

    /// Max column-marginal deviation at termination.
    pub fn marginal_residual(&self) -> f64 {
        self.marginal_residual
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.entries.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// Largest deviation of either marginal from uniform.
    pub fn max_marginal_error(&self) -> f64 {
        let (t, te) = self.shape();
        let a = 1.0 / t as f64;
        let b = 1.0 / te as f64;
        let r = self.row_sums().into_iter().map(|s| (s - a).abs());
        let c = self.col_sums().into_iter().map(|s| (s - b).abs());
        r.chain(c).fold(0.0, f64::max)
    }

    /// Frobenius inner product `<C, μ>`.
    pub fn transport_cost(&self, cost: &CostMatrix) -> f64 {
        assert_eq!(cost.shape(), self.shape(), "cost/coupling shape mismatch");
        self.entries
            .iter()
            .zip(cost.as_array().iter())
            .map(|(p, c)| p * c)
            .sum()
    }
}

/// Binary band mask restricting the coupling support.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskMatrix {
    entries: Array2<bool>,
    k_m: usize,
}

impl MaskMatrix {
    /// `entries[i][j] = 1` iff `|i - j| <= k_m`.
    pub fn band(t: usize, k_m: usize) -> Result<Self> {
        Self::band_stretched(t, t, k_m)
    }

    /// Band for unequal lengths: row `i` (1-based) is centred on column
    /// `round(i * T_e / T)`. Reduces to [`MaskMatrix::band`] when `T = T_e`.
    pub fn band_stretched(t: usize, te: usize, k_m: usize) -> Result<Self> {
        if t == 0 || te == 0 {
            return Err(Error::invalid("mask dimensions must be >= 1"));
        }
        let entries = Array2::from_shape_fn((t, te), |(r, c)| {
            // exact integer rounding of (r+1)*te/t, halves away from zero
            let num = 2 * (r + 1) * te + t;
            let center = num / (2 * t);
            let j = c + 1;
            j + k_m >= center && j <= center + k_m
        });
        Ok(Self { entries, k_m })
    }

    /// Arbitrary mask; feasibility is checked by the solver.
    pub fn from_entries(entries: Array2<bool>, k_m: usize) -> Self {
        Self { entries, k_m }
    }

    pub fn k_m(&self) -> usize {
        self.k_m
    }

    pub fn entries(&self) -> &Array2<bool> {
        &self.entries
    }

    #[inline]
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.entries[[i, j]]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    fn check_feasible(&self) -> Result<()> {
        if let Some(i) = self.entries.rows().into_iter().position(|r| !r.iter().any(|&b| b)) {
            return Err(Error::InfeasibleMask(format!("row {i} has no allowed entries")));
        }
        if let Some(j) = self.entries.columns().into_iter().position(|c| !c.iter().any(|&b| b)) {
            return Err(Error::InfeasibleMask(format!("column {j} has no allowed entries")));
        }
        let (t, te) = self.shape();
        if t == te && (0..t).all(|i| self.entries[[i, i]]) {
            return Ok(());
        }
        if !supports_uniform_transport(&self.entries) {
            return Err(Error::InfeasibleMask(
                "no coupling with uniform marginals fits inside the mask".into(),
            ));
        }
        Ok(())
    }
}

/// Max-flow check: can mass `L/T` per row and `L/T_e` per column, with
/// `L = lcm(T, T_e)`, be routed through the allowed cells?
fn supports_uniform_transport(entries: &Array2<bool>) -> bool {
    let (t, te) = entries.dim();
    let (mut a, mut b) = (t, te);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    let total = (t / a * te) as u64;
    let mut net = DiGraph::<(), u64>::with_capacity(t + te + 2, t + te + entries.len());
    let rows: Vec<NodeIndex> = (0..t).map(|_| net.add_node(())).collect();
    let cols: Vec<NodeIndex> = (0..te).map(|_| net.add_node(())).collect();
    let (src, sink) = (net.add_node(()), net.add_node(()));
    for &r in &rows {
        net.add_edge(src, r, total / t as u64);
    }
    for &c in &cols {
        net.add_edge(c, sink, total / te as u64);
    }
    for ((i, j), &ok) in entries.indexed_iter() {
        if ok {
            net.add_edge(rows[i], cols[j], total);
        }
    }
    dinics(&net, src, sink).0 == total
}

/// Entropic OT between uniform marginals, solved in the log domain.
pub fn sinkhorn(cost: &CostMatrix, cfg: &SinkhornConfig) -> Result<Coupling> {
    cfg.validate()?;
    solve(cost, None, cfg, false)
}

/// Entropic OT restricted to the support of `mask`. Entries outside the mask
/// are exactly zero in the returned coupling.
pub fn masked_sinkhorn(cost: &CostMatrix, mask: &MaskMatrix, cfg: &SinkhornConfig) -> Result<Coupling> {
    cfg.validate()?;
    if cost.shape() != mask.shape() {
        return Err(Error::invalid(format!(
            "mask shape {:?} does not match cost shape {:?}",
            mask.shape(),
            cost.shape()
        )));
    }
    mask.check_feasible()?;
    solve(cost, Some(mask), cfg, false)
}

fn log_sum_exp<I: Iterator<Item = f64> + Clone>(xs: I) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Runs exactly `iterations` unmasked updates and returns the plan whatever
/// its residual. Used where per-size work must be comparable (timing).
pub fn sinkhorn_fixed_iterations(cost: &CostMatrix, epsilon: f64, iterations: usize) -> Result<Coupling> {
    let cfg = SinkhornConfig {
        epsilon,
        max_iterations: iterations,
        marginal_tolerance: 1.0,
    };
    cfg.validate()?;
    solve(cost, None, &cfg, true)
}

/// Marginal tolerance for the intermediate stages of the epsilon schedule.
const STAGE_TOLERANCE: f64 = 1e-3;
/// Ratio between successive epsilons of the schedule.
const STAGE_RATIO: f64 = 0.5;

/// Epsilons from the largest allowed cost down to `epsilon`, halving each
/// time. Small epsilons converge slowly from a cold start; warm-starting the
/// potentials from a coarser problem cuts the sweep count by orders of
/// magnitude without changing the fixed point.
fn epsilon_schedule(cost: &CostMatrix, mask: Option<&MaskMatrix>, epsilon: f64) -> Vec<f64> {
    let (t, te) = cost.shape();
    let mut top = 0.0f64;
    for i in 0..t {
        for j in 0..te {
            if mask.is_none_or(|m| m.allows(i, j)) {
                top = top.max(cost.get(i, j));
            }
        }
    }
    let mut out = Vec::new();
    let mut e = top;
    while e > epsilon {
        out.push(e);
        e *= STAGE_RATIO;
    }
    out.push(epsilon);
    out
}

struct State {
    t: usize,
    te: usize,
    log_k: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    row_lse: Vec<f64>,
    col_max: Vec<f64>,
    col_acc: Vec<f64>,
}

impl State {
    fn new(t: usize, te: usize) -> Self {
        Self {
            t,
            te,
            log_k: vec![0.0; t * te],
            f: vec![0.0; t],
            g: vec![0.0; te],
            row_lse: vec![0.0; t],
            col_max: vec![0.0; te],
            col_acc: vec![0.0; te],
        }
    }

    /// Rebuild the log kernel for `eps`; potentials keep their dual values.
    fn set_epsilon(&mut self, cost: &CostMatrix, mask: Option<&MaskMatrix>, eps: f64, prev: Option<f64>) {
        let inv_eps = 1.0 / eps;
        for i in 0..self.t {
            for j in 0..self.te {
                self.log_k[i * self.te + j] = match mask {
                    Some(m) if !m.allows(i, j) => f64::NEG_INFINITY,
                    _ => -cost.get(i, j) * inv_eps,
                };
            }
        }
        if let Some(p) = prev {
            let r = p / eps;
            self.f.iter_mut().chain(self.g.iter_mut()).for_each(|v| *v *= r);
        }
    }

    /// One column pass and one row pass; returns the column residual of the
    /// row-normalized plan.
    fn sweep(&mut self, iter: usize) -> Result<f64> {
        let (t, te) = (self.t, self.te);
        let a = 1.0 / t as f64;
        let b = 1.0 / te as f64;
        let (log_a, log_b) = (a.ln(), b.ln());
        let log_k = &self.log_k;

        // column scaling: g_j = log b - lse_i(f_i + K_ij)
        self.col_max.fill(f64::NEG_INFINITY);
        for i in 0..t {
            let row = &log_k[i * te..(i + 1) * te];
            let fi = self.f[i];
            for (m, k) in self.col_max.iter_mut().zip(row) {
                *m = m.max(fi + k);
            }
        }
        self.col_acc.fill(0.0);
        for i in 0..t {
            let row = &log_k[i * te..(i + 1) * te];
            let fi = self.f[i];
            for ((acc, k), m) in self.col_acc.iter_mut().zip(row).zip(&self.col_max) {
                *acc += (fi + k - m).exp();
            }
        }
        for j in 0..te {
            self.g[j] = log_b - (self.col_max[j] + self.col_acc[j].ln());
        }

        // row scaling: f_i = log a - lse_j(g_j + K_ij)
        for i in 0..t {
            let row = &log_k[i * te..(i + 1) * te];
            self.row_lse[i] = log_sum_exp(row.iter().zip(&self.g).map(|(k, gj)| k + gj));
            self.f[i] = log_a - self.row_lse[i];
        }

        if self.f.iter().chain(&self.g).any(|v| v.is_nan()) {
            return Err(Error::NumericalBreakdown { iteration: iter });
        }

        // rows now hold exactly `a`; measure the column residual of that plan
        self.col_acc.fill(0.0);
        for i in 0..t {
            let row = &log_k[i * te..(i + 1) * te];
            let lse = self.row_lse[i];
            for ((acc, k), gj) in self.col_acc.iter_mut().zip(row).zip(&self.g) {
                *acc += a * (gj + k - lse).exp();
            }
        }
        let residual = self.col_acc.iter().map(|s| (s - b).abs()).fold(0.0, f64::max);
        if residual.is_nan() {
            return Err(Error::NumericalBreakdown { iteration: iter });
        }
        Ok(residual)
    }

    fn plan(&self) -> Array2<f64> {
        let a = 1.0 / self.t as f64;
        Array2::from_shape_fn((self.t, self.te), |(i, j)| {
            a * (self.g[j] + self.log_k[i * self.te + j] - self.row_lse[i]).exp()
        })
    }
}

/// `fixed` runs exactly `max_iterations` sweeps at the target epsilon.
/// Otherwise the epsilon schedule runs until the final stage meets the
/// tolerance; `max_iterations` bounds the sweeps over all stages.
fn solve(cost: &CostMatrix, mask: Option<&MaskMatrix>, cfg: &SinkhornConfig, fixed: bool) -> Result<Coupling> {
    let (t, te) = cost.shape();
    let mut st = State::new(t, te);
    let schedule = if fixed {
        vec![cfg.epsilon]
    } else {
        epsilon_schedule(cost, mask, cfg.epsilon)
    };
    let mut iter = 0;
    let mut residual = f64::INFINITY;
    let mut prev = None;
    for (k, &eps) in schedule.iter().enumerate() {
        let last = k + 1 == schedule.len();
        let tol = if last {
            cfg.marginal_tolerance
        } else {
            cfg.marginal_tolerance.max(STAGE_TOLERANCE)
        };
        st.set_epsilon(cost, mask, eps, prev);
        prev = Some(eps);
        loop {
            if iter == cfg.max_iterations {
                return Err(Error::NotConverged {
                    iterations: iter,
                    residual,
                });
            }
            iter += 1;
            residual = st.sweep(iter)?;
            let done = if fixed {
                iter == cfg.max_iterations
            } else {
                residual <= tol
            };
            if done {
                break;
            }
        }
    }
    Ok(Coupling::new(st.plan(), cfg.epsilon, iter, residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[Vec<f64>]) -> CostMatrix {
        CostMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn constant_cost_gives_uniform_plan() {
        let c = cm(&vec![vec![0.7; 5]; 3]);
        let p = sinkhorn(&c, &SinkhornConfig::default()).unwrap();
        for v in p.entries() {
            assert!((v - 1.0 / 15.0).abs() < 1e-12);
        }
    }

    #[test]
    fn antidiagonal_cost_concentrates_on_diagonal() {
        let c = cm(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let p = sinkhorn(
            &c,
            &SinkhornConfig {
                epsilon: 0.01,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((p.get(0, 0) - 0.5).abs() < 1e-3);
        assert!((p.get(1, 1) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn marginals_on_rectangular_instance() {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..5).map(|j| ((i * 7 + j * 3) % 11) as f64 / 4.0).collect())
            .collect();
        let p = sinkhorn(&cm(&rows), &SinkhornConfig::default()).unwrap();
        for s in p.row_sums() {
            assert!((s - 1.0 / 3.0).abs() <= 1e-6);
        }
        for s in p.col_sums() {
            assert!((s - 1.0 / 5.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn band_mask_shape() {
        let m = MaskMatrix::band(4, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.allows(i, j), i.abs_diff(j) <= 1);
            }
        }
        let s = MaskMatrix::band_stretched(4, 4, 2).unwrap();
        assert_eq!(s, MaskMatrix::band(4, 2).unwrap());
    }

    #[test]
    fn zero_width_mask_is_identity() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..6).map(|j| ((i + 2 * j) % 5) as f64).collect())
            .collect();
        let m = MaskMatrix::band(6, 0).unwrap();
        let p = masked_sinkhorn(&cm(&rows), &m, &SinkhornConfig::default()).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 / 6.0 } else { 0.0 };
                assert_eq!(p.get(i, j), want);
            }
        }
    }

    #[test]
    fn infeasible_mask_rejected() {
        let mut e = Array2::from_elem((3, 3), true);
        e.row_mut(1).fill(false);
        let m = MaskMatrix::from_entries(e, 0);
        let c = cm(&vec![vec![1.0; 3]; 3]);
        assert!(matches!(
            masked_sinkhorn(&c, &m, &SinkhornConfig::default()),
            Err(Error::InfeasibleMask(_))
        ));
        let wrong = MaskMatrix::band(2, 1).unwrap();
        assert!(masked_sinkhorn(&c, &wrong, &SinkhornConfig::default()).is_err());
    }

    #[test]
    fn mask_without_uniform_coupling_rejected() {
        // every row and column is covered, but rows 0 and 1 both only reach column 0
        let e = Array2::from_shape_vec((3, 3), vec![true, false, false, true, false, false, true, true, true]).unwrap();
        let m = MaskMatrix::from_entries(e, 0);
        let c = cm(&vec![vec![1.0; 3]; 3]);
        assert!(matches!(
            masked_sinkhorn(&c, &m, &SinkhornConfig::default()),
            Err(Error::InfeasibleMask(_))
        ));
        // 2 x 4: each row needs 1/2, each column 1/4; a row reaching two columns suffices
        let ok = Array2::from_shape_vec((2, 4), vec![true, true, false, false, false, false, true, true]).unwrap();
        assert!(supports_uniform_transport(&ok));
        let bad = Array2::from_shape_vec((2, 4), vec![true, true, true, false, false, false, false, true]).unwrap();
        assert!(!supports_uniform_transport(&bad));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let c = cm(&[vec![0.0, 1.0, 3.0], vec![2.0, 0.5, 0.0]]);
        let cfg = SinkhornConfig {
            epsilon: 1e-3,
            max_iterations: 1,
            marginal_tolerance: 1e-14,
        };
        match sinkhorn(&c, &cfg) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let c = cm(&[vec![0.0]]);
        for bad in [
            SinkhornConfig {
                epsilon: 0.0,
                ..Default::default()
            },
            SinkhornConfig {
                max_iterations: 0,
                ..Default::default()
            },
            SinkhornConfig {
                marginal_tolerance: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(sinkhorn(&c, &bad), Err(Error::InvalidParameter(_))));
        }
    }
}
