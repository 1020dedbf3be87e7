//! Exact (unregularized) transport for small instances.
//!
//! Uniform marginals `1/T` and `1/T_e` become integer supplies `L/T` and
//! demands `L/T_e` with `L = lcm(T, T_e)`, so the transport LP is a min-cost
//! flow with integral data. Successive shortest paths (Bellman-Ford on the
//! residual graph) then reach an optimal vertex of the transport polytope.

use ndarray::Array2;

use super::sinkhorn::Coupling;
use crate::error::{Error, Result};
use crate::traj::CostMatrix;

/// Largest `T * T_e` the oracle accepts.
pub const EXACT_ORACLE_MAX_CELLS: usize = 64;

#[derive(Clone, Debug)]
pub struct ExactSolution {
    pub coupling: Coupling,
    pub objective: f64,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct Edge {
    to: usize,
    cap: i64,
    cost: f64,
}

struct Graph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.adj[from].push(id);
        self.edges.push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.adj[to].push(id + 1);
        id
    }
}

/// Solve the transport LP exactly. Test-oriented: refuses instances with
/// more than [`EXACT_ORACLE_MAX_CELLS`] cells.
pub fn exact_ot_oracle(cost: &CostMatrix) -> Result<ExactSolution> {
    let (t, te) = cost.shape();
    if t * te > EXACT_ORACLE_MAX_CELLS {
        return Err(Error::InstanceTooLarge { rows: t, cols: te });
    }
    let l = t / gcd(t, te) * te;
    let supply = (l / t) as i64;
    let demand = (l / te) as i64;

    // source, rows, cols, sink
    let src = 0;
    let sink = 1 + t + te;
    let mut g = Graph::new(t + te + 2);
    for i in 0..t {
        g.add(src, 1 + i, supply, 0.0);
    }
    for j in 0..te {
        g.add(1 + t + j, sink, demand, 0.0);
    }
    let mut cell = vec![0usize; t * te];
    for i in 0..t {
        for j in 0..te {
            cell[i * te + j] = g.add(1 + i, 1 + t + j, l as i64, cost.get(i, j));
        }
    }

    let n = t + te + 2;
    let mut remaining = l as i64;
    while remaining > 0 {
        // Bellman-Ford from the source over residual edges
        let mut dist = vec![f64::INFINITY; n];
        let mut prev: Vec<Option<usize>> = vec![None; n];
        dist[src] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u] == f64::INFINITY {
                    continue;
                }
                for &e in &g.adj[u] {
                    let edge = &g.edges[e];
                    if edge.cap > 0 && dist[u] + edge.cost < dist[edge.to] - 1e-12 {
                        dist[edge.to] = dist[u] + edge.cost;
                        prev[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink] == f64::INFINITY {
            return Err(Error::Degenerate("transport flow network is disconnected".into()));
        }
        let mut push = remaining;
        let mut v = sink;
        while let Some(e) = prev[v] {
            push = push.min(g.edges[e].cap);
            v = g.edges[e ^ 1].to;
        }
        let mut v = sink;
        while let Some(e) = prev[v] {
            g.edges[e].cap -= push;
            g.edges[e ^ 1].cap += push;
            v = g.edges[e ^ 1].to;
        }
        remaining -= push;
    }

    let scale = 1.0 / l as f64;
    let plan = Array2::from_shape_fn((t, te), |(i, j)| {
        let e = cell[i * te + j];
        g.edges[e ^ 1].cap as f64 * scale
    });
    let objective = plan.iter().zip(cost.as_array().iter()).map(|(p, c)| p * c).sum();
    Ok(ExactSolution {
        coupling: Coupling::new(plan, 0.0, 0, 0.0),
        objective,
    })
}
