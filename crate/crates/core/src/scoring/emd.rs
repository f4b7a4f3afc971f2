//! Exact earth mover's distance between two density grids.
//!
//! The transport problem is solved to optimality with successive shortest
//! paths (Dijkstra on reduced costs) over the bipartite graph from surplus
//! cells to deficit cells. The ground distance is the Euclidean distance
//! between cell centers in unit-square coordinates.

use crate::error::{Error, Result};
use crate::representation::{HeatmapKind, HeatmapLevel};

/// Largest resolution the exact solver accepts.
pub const EMD_MAX_RESOLUTION: usize = 16;

const MASS_EPS: f64 = 1e-15;

/// Optimal transport cost between two density levels of equal resolution.
///
/// Each grid is rescaled to unit mass first, so float drift in the input
/// sums does not unbalance the problem.
pub fn emd_exact(a: &HeatmapLevel, b: &HeatmapLevel) -> Result<f64> {
    if a.kind() != HeatmapKind::Density || b.kind() != HeatmapKind::Density {
        return Err(Error::IncompatibleLevel(
            "transport needs density levels".into(),
        ));
    }
    if a.resolution() != b.resolution() {
        return Err(Error::IncompatibleLevel(format!(
            "resolutions {} and {} differ",
            a.resolution(),
            b.resolution()
        )));
    }
    let r = a.resolution();
    if r > EMD_MAX_RESOLUTION {
        return Err(Error::OracleScale {
            resolution: r,
            cap: EMD_MAX_RESOLUTION,
        });
    }
    let (sa, sb) = (a.sum(), b.sum());
    if sa <= 0.0 || sb <= 0.0 {
        return Err(Error::UndefinedDistribution);
    }

    // Mass shared by both grids stays put at zero cost; for a metric ground
    // distance some optimal plan always does this.
    let mut supply = Vec::new();
    let mut demand = Vec::new();
    for idx in 0..r * r {
        let diff = a.cells()[idx] / sa - b.cells()[idx] / sb;
        let center = a.cell_center(idx / r, idx % r);
        if diff > MASS_EPS {
            supply.push((center, diff));
        } else if diff < -MASS_EPS {
            demand.push((center, -diff));
        }
    }
    if supply.is_empty() || demand.is_empty() {
        return Ok(0.0);
    }

    let cost: Vec<Vec<f64>> = supply
        .iter()
        .map(|((x0, y0), _)| {
            demand
                .iter()
                .map(|((x1, y1), _)| (x0 - x1).hypot(y0 - y1))
                .collect()
        })
        .collect();
    let mut solver = Transport::new(
        supply.iter().map(|s| s.1).collect(),
        demand.iter().map(|d| d.1).collect(),
        cost,
    );
    Ok(solver.solve())
}

/// Dense successive-shortest-path solver for a balanced transportation
/// problem. Node layout: `0` super source, `1..=m` sources,
/// `m+1..=m+n` sinks, `m+n+1` super sink.
struct Transport {
    m: usize,
    n: usize,
    supply_left: Vec<f64>,
    demand_left: Vec<f64>,
    cost: Vec<Vec<f64>>,
    flow: Vec<Vec<f64>>,
    potential: Vec<f64>,
}

impl Transport {
    fn new(supply: Vec<f64>, demand: Vec<f64>, cost: Vec<Vec<f64>>) -> Self {
        let (m, n) = (supply.len(), demand.len());
        Self {
            m,
            n,
            supply_left: supply,
            demand_left: demand,
            cost,
            flow: vec![vec![0.0; n]; m],
            potential: vec![0.0; m + n + 2],
        }
    }

    fn total_left(&self) -> f64 {
        self.supply_left.iter().sum()
    }

    fn solve(&mut self) -> f64 {
        let stop = self.total_left() * 1e-13;
        // Every augmentation exhausts a supply, a demand or a backward arc.
        let mut guard = 4 * (self.m + 1) * (self.n + 1) + 16;
        while self.total_left() > stop && guard > 0 && self.augment() {
            guard -= 1;
        }
        self.flow
            .iter()
            .zip(&self.cost)
            .map(|(f, c)| f.iter().zip(c).map(|(f, c)| f * c).sum::<f64>())
            .sum()
    }

    /// Residual arcs leaving `u` as `(target, cost)`.
    fn arcs(&self, u: usize, out: &mut Vec<(usize, f64)>) {
        let (m, n) = (self.m, self.n);
        let sink = m + n + 1;
        out.clear();
        if u == 0 {
            out.extend(
                (0..m)
                    .filter(|&i| self.supply_left[i] > MASS_EPS)
                    .map(|i| (1 + i, 0.0)),
            );
        } else if u <= m {
            let i = u - 1;
            out.extend((0..n).map(|j| (1 + m + j, self.cost[i][j])));
        } else if u < sink {
            let j = u - 1 - m;
            out.extend(
                (0..m)
                    .filter(|&i| self.flow[i][j] > MASS_EPS)
                    .map(|i| (1 + i, -self.cost[i][j])),
            );
            if self.demand_left[j] > MASS_EPS {
                out.push((sink, 0.0));
            }
        }
    }

    /// One Dijkstra pass on reduced costs plus one augmentation along the
    /// shortest path. Returns false when the super sink is unreachable.
    fn augment(&mut self) -> bool {
        let (m, n) = (self.m, self.n);
        let nodes = m + n + 2;
        let sink = nodes - 1;
        let mut dist = vec![f64::INFINITY; nodes];
        let mut pred = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        let mut arcs = Vec::with_capacity(m.max(n) + 1);
        dist[0] = 0.0;

        while let Some(u) = (0..nodes)
            .filter(|&v| !done[v] && dist[v].is_finite())
            .min_by(|&x, &y| dist[x].total_cmp(&dist[y]))
        {
            done[u] = true;
            self.arcs(u, &mut arcs);
            for &(v, c) in &arcs {
                // reduced costs are non-negative up to rounding
                let reduced = (c + self.potential[u] - self.potential[v]).max(0.0);
                let nd = dist[u] + reduced;
                if nd < dist[v] {
                    dist[v] = nd;
                    pred[v] = u;
                }
            }
        }
        if !dist[sink].is_finite() {
            return false;
        }
        let cap = dist[sink];
        for (p, d) in self.potential.iter_mut().zip(&dist) {
            *p += d.min(cap);
        }

        let mut path = vec![sink];
        while let Some(&v) = path.last() {
            if v == 0 {
                break;
            }
            path.push(pred[v]);
        }
        path.reverse();

        // path = [0, source, sink, source, ..., sink, super sink]
        let first = path[1] - 1;
        let last = path[path.len() - 2] - 1 - m;
        let mut amount = self.supply_left[first].min(self.demand_left[last]);
        for w in path[1..path.len() - 1].windows(2) {
            if w[0] > m {
                amount = amount.min(self.flow[w[1] - 1][w[0] - 1 - m]);
            }
        }

        self.supply_left[first] -= amount;
        self.demand_left[last] -= amount;
        for w in path[1..path.len() - 1].windows(2) {
            if w[0] <= m {
                self.flow[w[0] - 1][w[1] - 1 - m] += amount;
            } else {
                let f = &mut self.flow[w[1] - 1][w[0] - 1 - m];
                *f -= amount;
                if *f < MASS_EPS {
                    *f = 0.0;
                }
            }
        }
        true
    }
}
