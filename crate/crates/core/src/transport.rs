//! Min-cost flow with small nonnegative integer arc costs.
//!
//! Primal-dual method: Dijkstra on reduced costs updates the node
//! potentials, then a Dinic blocking flow saturates every shortest
//! augmenting path at once. With integer costs the s–t distance grows by at
//! least one per phase, so a network whose cheapest s–t route never costs
//! more than `K` finishes in at most `K + 1` phases. Capacities are real.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::{Error, Result};

const INF_DIST: i64 = i64::MAX / 4;

/// A directed network with paired residual arcs (`e` and `e ^ 1`).
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSummary {
    pub flow: f64,
    pub cost: f64,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds an arc and returns its id. `cap` may be infinite.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64, cost: i64) -> Result<usize> {
        if from >= self.nodes() || to >= self.nodes() {
            return Err(Error::invalid(format!("arc {from}->{to} outside network")));
        }
        if cost < 0 || !(cap >= 0.0) {
            return Err(Error::invalid(format!(
                "arc {from}->{to} needs cost >= 0 and cap >= 0, got {cost}, {cap}"
            )));
        }
        let id = self.to.len();
        self.to.extend([to, from]);
        self.cap.extend([cap, 0.0]);
        self.cost.extend([cost, -cost]);
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        Ok(id)
    }

    /// Flow currently carried by arc `id`.
    pub fn flow(&self, id: usize) -> f64 {
        self.cap[id ^ 1]
    }

    /// Pushes as much flow as possible from `s` to `t` at minimum cost.
    ///
    /// Residual capacities at or below `eps` count as saturated.
    pub fn min_cost_max_flow(&mut self, s: usize, t: usize, eps: f64) -> Result<FlowSummary> {
        let n = self.nodes();
        if s >= n || t >= n || s == t {
            return Err(Error::invalid("bad source/sink"));
        }
        let mut pi = vec![0i64; n];
        let mut dist = vec![INF_DIST; n];
        let mut level = vec![usize::MAX; n];
        let mut next = vec![0usize; n];
        let mut total = FlowSummary { flow: 0.0, cost: 0.0 };
        loop {
            self.dijkstra(s, &pi, eps, &mut dist);
            let dt = dist[t];
            if dt >= INF_DIST {
                break;
            }
            for v in 0..n {
                pi[v] += dist[v].min(dt);
            }
            let pushed = self.blocking_flow(s, t, &pi, eps, &mut level, &mut next);
            if pushed <= 0.0 {
                return Err(Error::Numerical("min-cost flow made no progress".into()));
            }
            total.flow += pushed;
        }
        for e in (0..self.to.len()).step_by(2) {
            total.cost += self.flow(e) * self.cost[e] as f64;
        }
        Ok(total)
    }

    fn reduced(&self, e: usize, pi: &[i64]) -> i64 {
        self.cost[e] + pi[self.to[e ^ 1]] - pi[self.to[e]]
    }

    fn dijkstra(&self, s: usize, pi: &[i64], eps: f64, dist: &mut [i64]) {
        dist.fill(INF_DIST);
        dist[s] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0i64, s)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &self.adj[u] {
                if self.cap[e] <= eps {
                    continue;
                }
                let v = self.to[e];
                let nd = d + self.reduced(e, pi);
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
    }

    fn admissible(&self, e: usize, pi: &[i64], eps: f64) -> bool {
        self.cap[e] > eps && self.reduced(e, pi) == 0
    }

    fn blocking_flow(
        &mut self,
        s: usize,
        t: usize,
        pi: &[i64],
        eps: f64,
        level: &mut [usize],
        next: &mut [usize],
    ) -> f64 {
        let mut pushed = 0.0;
        loop {
            level.fill(usize::MAX);
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if level[v] == usize::MAX && self.admissible(e, pi, eps) {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[t] == usize::MAX {
                return pushed;
            }
            next.fill(0);
            let mut path: Vec<usize> = Vec::new();
            let mut u = s;
            loop {
                if u == t {
                    let bottleneck = path.iter().map(|&e| self.cap[e]).fold(f64::INFINITY, f64::min);
                    for &e in &path {
                        self.cap[e] -= bottleneck;
                        self.cap[e ^ 1] += bottleneck;
                    }
                    pushed += bottleneck;
                    // Retreat to the tail of the first saturated arc.
                    let cut = path.iter().position(|&e| self.cap[e] <= eps).unwrap_or(0);
                    path.truncate(cut);
                    u = path.last().map_or(s, |&e| self.to[e]);
                    continue;
                }
                let mut advanced = false;
                while next[u] < self.adj[u].len() {
                    let e = self.adj[u][next[u]];
                    let v = self.to[e];
                    if level[v] == level[u] + 1 && self.admissible(e, pi, eps) {
                        path.push(e);
                        u = v;
                        advanced = true;
                        break;
                    }
                    next[u] += 1;
                }
                if advanced {
                    continue;
                }
                level[u] = usize::MAX;
                match path.pop() {
                    Some(e) => {
                        u = self.to[e ^ 1];
                        next[u] += 1;
                    }
                    None => break,
                }
            }
        }
    }
}

/// Optimal plan of a dense transportation problem.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// Σ plan·cost.
    pub cost: f64,
    /// Row-major `supply.len() × demand.len()` shipment table.
    pub plan: Vec<f64>,
}

/// Solves the transportation problem between `supply` and `demand` (equal
/// totals) with integer costs `cost(i, j) >= 0`.
pub fn transport<C: Fn(usize, usize) -> i64>(supply: &[f64], demand: &[f64], cost: C) -> Result<TransportPlan> {
    let (a, b) = (supply.len(), demand.len());
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    if supply.iter().chain(demand).any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("transport weights must be finite and nonnegative"));
    }
    let scale = total_a.max(total_b).max(f64::MIN_POSITIVE);
    if (total_a - total_b).abs() > 1e-9 * scale {
        return Err(Error::pre(format!("unbalanced transport: {total_a} vs {total_b}")));
    }
    let (s, t) = (a + b, a + b + 1);
    let mut net = FlowNetwork::new(a + b + 2);
    for (i, &w) in supply.iter().enumerate() {
        net.add_arc(s, i, w, 0)?;
    }
    for (j, &w) in demand.iter().enumerate() {
        net.add_arc(a + j, t, w, 0)?;
    }
    let mut cells = vec![None; a * b];
    for i in (0..a).filter(|&i| supply[i] > 0.0) {
        for j in (0..b).filter(|&j| demand[j] > 0.0) {
            cells[i * b + j] = Some(net.add_arc(i, a + j, f64::INFINITY, cost(i, j))?);
        }
    }
    let eps = 1e-15 * scale;
    let summary = net.min_cost_max_flow(s, t, eps)?;
    if total_a.min(total_b) - summary.flow > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "transport shipped {} of {}",
            summary.flow, total_a
        )));
    }
    let plan = cells.iter().map(|c| c.map_or(0.0, |e| net.flow(e))).collect();
    Ok(TransportPlan {
        cost: summary.cost,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_prefers_diagonal() {
        let p = transport(&[0.5, 0.5], &[0.5, 0.5], |i, j| (i != j) as i64).unwrap();
        assert_eq!(p.cost, 0.0);
        assert_eq!(p.plan, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn forced_shipment() {
        let p = transport(&[1.0, 0.0], &[0.0, 1.0], |i, j| 3 * (i != j) as i64).unwrap();
        assert_eq!(p.cost, 3.0);
        assert_eq!(p.plan[1], 1.0);
    }

    #[test]
    fn shortest_path_on_a_line() {
        // 0 - 1 - 2 with unit arcs both ways; move one unit from 0 to 2.
        let mut net = FlowNetwork::new(5);
        for (u, v) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            net.add_arc(u, v, f64::INFINITY, 1).unwrap();
        }
        net.add_arc(3, 0, 1.0, 0).unwrap();
        net.add_arc(2, 4, 1.0, 0).unwrap();
        let r = net.min_cost_max_flow(3, 4, 1e-15).unwrap();
        assert_eq!(r, FlowSummary { flow: 1.0, cost: 2.0 });
    }

    #[test]
    fn rejects_unbalanced_and_negative() {
        assert!(transport(&[1.0], &[0.5], |_, _| 0).is_err());
        assert!(FlowNetwork::new(2).add_arc(0, 1, 1.0, -1).is_err());
    }
}
