//! Communication graphs: per-round mixing weights, schedule generators,
//! B-window strong connectivity and loss-aware neighbor selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Domain, SeededRng, StreamId};

/// Column-sum tolerance for generated mixing matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// One round's directed graph with its mixing weights.
///
/// `out[i]` lists `(j, p_{j,i})` for every `j ∈ N_i^out(t)`, sorted by `j`.
/// The self-loop `(i, p_{i,i})` is always present.
#[derive(Debug, Clone, PartialEq)]
pub struct DiGraphRound {
    n: usize,
    out: Vec<Vec<(usize, f64)>>,
}

impl DiGraphRound {
    /// Push-Sum weights: sender `i` splits its mass uniformly, `1/|N_i^out|`.
    /// The self-loop is added if missing; duplicates are dropped.
    pub fn from_out_neighbors(out_sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = out_sets.len();
        let mut out = Vec::with_capacity(n);
        for (i, mut set) in out_sets.into_iter().enumerate() {
            set.push(i);
            set.sort_unstable();
            set.dedup();
            if let Some(&bad) = set.iter().find(|&&j| j >= n) {
                return Err(Error::InvalidArgument(format!(
                    "client {i} lists out-neighbor {bad} but there are only {n} clients"
                )));
            }
            let p = 1.0 / set.len() as f64;
            out.push(set.into_iter().map(|j| (j, p)).collect());
        }
        Ok(DiGraphRound { n, out })
    }

    /// Builds a round from a dense matrix `m[j][i] = p_{j,i}`; zero entries
    /// are not edges. Every diagonal entry must be positive.
    pub fn from_dense(m: &[Vec<f64>]) -> Result<Self> {
        let n = m.len();
        let mut out = vec![Vec::new(); n];
        for (j, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: row.len(),
                });
            }
            for (i, &p) in row.iter().enumerate() {
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(Error::InvalidArgument(format!("weight p[{j}][{i}] = {p}")));
                }
                if p > 0.0 {
                    out[i].push((j, p));
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| !out[i].iter().any(|&(j, _)| j == i)) {
            return Err(Error::InvalidArgument(format!("client {i} has no self-loop")));
        }
        Ok(DiGraphRound { n, out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(receiver, weight)` pairs for sender `i`.
    pub fn out_edges(&self, i: usize) -> &[(usize, f64)] {
        &self.out[i]
    }

    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        self.out[i].iter().map(|&(j, _)| j).collect()
    }

    pub fn in_neighbors(&self, j: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.out[i].iter().any(|&(r, _)| r == j))
            .collect()
    }

    /// `p_{j,i}`: weight on the link from `i` to `j`.
    pub fn weight(&self, j: usize, i: usize) -> f64 {
        self.out[i].iter().find(|&&(r, _)| r == j).map_or(0.0, |&(_, p)| p)
    }

    /// Dense `P` with `P[j][i] = p_{j,i}`.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, edges) in self.out.iter().enumerate() {
            for &(j, p) in edges {
                m[j][i] = p;
            }
        }
        m
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// `max_i |Σ_j p_{j,i} − 1|`.
    pub fn column_residual(&self) -> f64 {
        self.out
            .iter()
            .map(|edges| (edges.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_j |Σ_i p_{j,i} − 1|`.
    pub fn row_residual(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for edges in &self.out {
            for &(j, p) in edges {
                rows[j] += p;
            }
        }
        rows.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn is_column_stochastic(&self) -> bool {
        self.column_residual() <= STOCHASTIC_TOL
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.out[i].iter().all(|&(j, p)| self.weight(i, j) == p))
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        self.is_column_stochastic() && self.row_residual() <= STOCHASTIC_TOL
    }

    /// `P·v`, summed over senders in id order.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, edges) in self.out.iter().enumerate() {
            for &(j, p) in edges {
                out[j] += p * v[i];
            }
        }
        out
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|i| self.out_neighbors(i)).collect()
    }
}

/// Graph family drawn each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "generator")]
pub enum Generator {
    /// `i → {i, i+1 mod n}`.
    DirectedRing,
    /// Each client draws `k_out` distinct out-neighbors.
    RandomOut {
        k_out: usize,
    },
    Complete,
    /// Undirected ring with Metropolis–Hastings weights.
    UndirectedRing,
    /// Each client draws `k` partners; the union is symmetrized and given
    /// Metropolis–Hastings weights.
    RandomSymmetric {
        k: usize,
    },
}

impl Generator {
    pub fn is_symmetric(&self) -> bool {
        matches!(
            self,
            Generator::Complete | Generator::UndirectedRing | Generator::RandomSymmetric { .. }
        )
    }
}

/// How a client picks its random out-neighbors.
#[derive(Debug, Clone, Copy)]
pub enum NeighborSelection<'a> {
    Uniform,
    /// Loss-aware: `p(j) ∝ exp(|f_i − f_j|)` over a snapshot of client losses.
    LossAware(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySchedule {
    pub n: usize,
    pub generator: Generator,
    /// Redraw every round; otherwise the round-0 draw is reused.
    pub time_varying: bool,
    /// Connectivity window `B`.
    pub window: usize,
}

/// Out-degree used when none is configured: 10 for 100 clients, `max(1, n/10)` in general.
pub fn default_k_out(n: usize) -> usize {
    (n / 10).max(1)
}

/// Draws the communication graph of round `t`.
pub fn gen_round(
    sched: &TopologySchedule,
    t: usize,
    rng: SeededRng,
    selection: NeighborSelection<'_>,
) -> Result<DiGraphRound> {
    let n = sched.n;
    if n == 0 {
        return Err(Error::InvalidArgument("topology needs at least one client".into()));
    }
    let round = if sched.time_varying { t } else { 0 };
    match sched.generator {
        Generator::DirectedRing => DiGraphRound::from_out_neighbors((0..n).map(|i| vec![(i + 1) % n]).collect()),
        Generator::Complete => DiGraphRound::from_out_neighbors(vec![(0..n).collect(); n]),
        Generator::RandomOut { k_out } => {
            check_k_out(k_out, n)?;
            let mut sets = Vec::with_capacity(n);
            for i in 0..n {
                let probs = match selection {
                    NeighborSelection::Uniform => vec![1.0 / n as f64; n],
                    NeighborSelection::LossAware(f) => neighbor_select_probs(f, i)?,
                };
                let mut r = rng.stream(StreamId::new(Domain::Topology, i, round, 0));
                sets.push(sample_out_neighbors(&probs, i, k_out, &mut r)?);
            }
            DiGraphRound::from_out_neighbors(sets)
        }
        Generator::UndirectedRing => {
            let mut adj = vec![vec![false; n]; n];
            for i in 0..n {
                adj[i][i] = true;
                adj[i][(i + 1) % n] = true;
                adj[(i + 1) % n][i] = true;
            }
            DiGraphRound::from_dense(&doubly_stochastic(&adj)?)
        }
        Generator::RandomSymmetric { k } => {
            check_k_out(k, n)?;
            let mut adj = vec![vec![false; n]; n];
            for i in 0..n {
                adj[i][i] = true;
                let mut r = rng.stream(StreamId::new(Domain::Topology, i, round, 0));
                let uniform = vec![1.0 / n as f64; n];
                for j in sample_out_neighbors(&uniform, i, k, &mut r)? {
                    adj[i][j] = true;
                    adj[j][i] = true;
                }
            }
            DiGraphRound::from_dense(&doubly_stochastic(&adj)?)
        }
    }
}

fn check_k_out(k_out: usize, n: usize) -> Result<()> {
    if n >= 2 && (1..n).contains(&k_out) {
        Ok(())
    } else {
        Err(Error::KOutOutOfRange {
            k_out,
            n,
            max: n.saturating_sub(1),
        })
    }
}

/// Metropolis–Hastings weights for a symmetric graph:
/// `p_ij = 1/(1 + max(deg_i, deg_j))` on edges, remainder on the diagonal.
/// Degrees exclude self-loops.
pub fn doubly_stochastic(adj: &[Vec<bool>]) -> Result<Vec<Vec<f64>>> {
    let n = adj.len();
    for (i, row) in adj.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: row.len(),
            });
        }
        for j in 0..i {
            if adj[i][j] != adj[j][i] {
                return Err(Error::Asymmetric { row: i, col: j });
            }
        }
    }
    let deg: Vec<usize> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && adj[i][j]).count())
        .collect();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if j != i && adj[i][j] {
                m[i][j] = 1.0 / (1 + deg[i].max(deg[j])) as f64;
                off += m[i][j];
            }
        }
        m[i][i] = 1.0 - off;
    }
    Ok(m)
}

/// Result of a B-window connectivity scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Connectivity {
    pub connected: bool,
    /// Start index of the first window whose union is not strongly connected.
    pub failing_window: Option<usize>,
}

/// True iff the union graph of every `b` consecutive rounds is strongly connected.
pub fn check_b_connectivity(rounds: &[DiGraphRound], b: usize) -> Result<Connectivity> {
    if b == 0 || rounds.len() < b {
        return Err(Error::InvalidArgument(format!(
            "window {b} needs between 1 and {} rounds",
            rounds.len()
        )));
    }
    for start in 0..=rounds.len() - b {
        if !window_strongly_connected(&rounds[start..start + b]) {
            return Ok(Connectivity {
                connected: false,
                failing_window: Some(start),
            });
        }
    }
    Ok(Connectivity {
        connected: true,
        failing_window: None,
    })
}

pub(crate) fn window_strongly_connected(window: &[DiGraphRound]) -> bool {
    let n = window[0].n();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for g in window {
        for (i, list) in g.adjacency().into_iter().enumerate() {
            adj[i].extend(list);
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    tarjan_scc(&adj).len() == 1
}

/// Tarjan's strongly connected components, iterative.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut sccs = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // (node, next edge position)
        let mut call = vec![(root, 0usize)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    sccs.push(comp);
                }
            }
        }
    }
    sccs
}

/// Loss-aware selection probabilities `exp(|f_i − f_j|) / Σ_k exp(|f_i − f_k|)`,
/// computed with a max shift. The sum runs over every client including `i`.
pub fn neighbor_select_probs(f_values: &[f64], i: usize) -> Result<Vec<f64>> {
    if let Some(k) = f_values.iter().position(|f| !f.is_finite()) {
        return Err(Error::NonFinite {
            context: "neighbor selection loss snapshot",
            coordinate: k,
            value: f_values[k],
        });
    }
    let fi = f_values[i];
    let gaps: Vec<f64> = f_values.iter().map(|fj| (fi - fj).abs()).collect();
    let top = gaps.iter().copied().fold(0.0, f64::max);
    let exps: Vec<f64> = gaps.iter().map(|g| (g - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Draws `k_out` distinct neighbors other than `i`, without replacement and
/// proportionally to `probs`. Returns them sorted, with `i` added back.
pub fn sample_out_neighbors<R: Rng>(probs: &[f64], i: usize, k_out: usize, rng: &mut R) -> Result<Vec<usize>> {
    let mut pool: Vec<(usize, f64)> = probs
        .iter()
        .enumerate()
        .filter(|&(j, &p)| j != i && p > 0.0)
        .map(|(j, &p)| (j, p))
        .collect();
    if k_out > pool.len() {
        return Err(Error::KOutOutOfRange {
            k_out,
            n: probs.len(),
            max: pool.len(),
        });
    }
    let mut chosen = Vec::with_capacity(k_out + 1);
    for _ in 0..k_out {
        let total: f64 = pool.iter().map(|&(_, p)| p).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (pos, &(_, p)) in pool.iter().enumerate() {
            if u < p {
                pick = pos;
                break;
            }
            u -= p;
        }
        chosen.push(pool.remove(pick).0);
    }
    chosen.push(i);
    chosen.sort_unstable();
    Ok(chosen)
}
