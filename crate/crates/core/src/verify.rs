//! Independent oracle suite.
//!
//! Each check recomputes a quantity along a different path from the engine:
//! dense matrix products instead of message passing, direct double sums
//! instead of the momentum recursion, finite differences instead of
//! backpropagation. Only public types and entry points are used.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{AlgorithmKind, ExperimentConfig, TopologyKind};
use crate::data::make_synthetic;
use crate::error::{Error, Result};
use crate::local::{local_round, BatchSampler, LocalHyper, TraceStep};
use crate::math::{finite_diff_grad, ParamVector, SeededRng, FD_STEP};
use crate::models::{Classifier, LocalObjective, ModelKind, Objective};
use crate::protocol::{run_round, ClientState, CommRound, RoundContext, RoundHyper, Simulation};
use crate::topology::{gen_round, DiGraphRound, Generator, NeighborSelection, TopologySchedule};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub pass: bool,
    pub max_error: f64,
    /// Enough to reproduce a failure: seed and configuration, or the error.
    pub witness: String,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<34} max_error={:<10.3e} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.max_error,
            self.witness
        )
    }
}

/// Pure-mixing state after one round of the dense oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    pub x: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub z: Vec<Vec<f64>>,
}

/// `x ← P x`, `w ← P w` with dense products, one entry per round.
pub fn matrix_power_consensus_oracle(schedule: &[DiGraphRound], x0: &[Vec<f64>], w0: &[f64]) -> Vec<MixedState> {
    let mut x = x0.to_vec();
    let mut w = w0.to_vec();
    let mut out = Vec::with_capacity(schedule.len());
    for graph in schedule {
        let p = graph.dense();
        let n = p.len();
        let dim = x.first().map_or(0, |v| v.len());
        let mut nx = vec![vec![0.0; dim]; n];
        let mut nw = vec![0.0; n];
        for j in 0..n {
            for i in 0..n {
                for d in 0..dim {
                    nx[j][d] += p[j][i] * x[i][d];
                }
                nw[j] += p[j][i] * w[i];
            }
        }
        x = nx;
        w = nw;
        let z = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| xi.iter().map(|v| v / wi).collect())
            .collect();
        out.push(MixedState {
            x: x.clone(),
            w: w.clone(),
            z,
        });
    }
    out
}

/// `−η Σ_{k=1}^{K} Σ_{s=1}^{k} α^{k−s} g_s`, summed term by term.
pub fn momentum_closed_form_oracle(gradients: &[ParamVector], lr: f64, alpha: f64, k: usize) -> Result<ParamVector> {
    if gradients.len() != k {
        return Err(Error::TraceLength {
            got: gradients.len(),
            expected: k,
        });
    }
    let dim = gradients.first().map_or(0, |g| g.dim());
    let mut acc = vec![0.0; dim];
    for kk in 1..=k {
        for s in 1..=kk {
            let c = alpha.powi((kk - s) as i32);
            for (a, g) in acc.iter_mut().zip(gradients[s - 1].iter()) {
                *a += c * g;
            }
        }
    }
    ParamVector::new(acc.into_iter().map(|a| -lr * a).collect())
}

/// Same oracle fed from a recorded local trace.
pub fn momentum_closed_form_from_trace(trace: &[TraceStep], lr: f64, alpha: f64, k: usize) -> Result<ParamVector> {
    let gs: Vec<ParamVector> = trace.iter().map(|t| t.g.clone()).collect();
    momentum_closed_form_oracle(&gs, lr, alpha, k)
}

/// `α̃ = Σ_{k=1}^{K} Σ_{s=1}^{k} α^{k−s}` against `K/(1−α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeAlpha {
    pub value: f64,
    pub bound: f64,
    /// Strict for `α > 0`; at `α = 0` the two sides coincide and equality is accepted.
    pub holds: bool,
}

pub fn tilde_alpha_bound_check(alpha: f64, k: usize) -> TildeAlpha {
    let mut value = 0.0;
    for kk in 1..=k {
        for s in 1..=kk {
            value += alpha.powi((kk - s) as i32);
        }
    }
    let bound = k as f64 / (1.0 - alpha);
    let holds = if alpha == 0.0 {
        value > 0.0 && value <= bound
    } else {
        value > 0.0 && value < bound
    };
    TildeAlpha { value, bound, holds }
}

fn report(name: &str, result: Result<(f64, bool, String)>) -> OracleReport {
    match result {
        Ok((max_error, pass, witness)) => OracleReport {
            name: name.to_string(),
            pass,
            max_error,
            witness,
        },
        Err(e) => OracleReport {
            name: name.to_string(),
            pass: false,
            max_error: f64::NAN,
            witness: format!("error: {e}"),
        },
    }
}

fn frozen_hyper(n: usize) -> RoundHyper {
    RoundHyper {
        lr: 0.0,
        rho: 0.1,
        alpha: 0.9,
        steps: vec![2; n],
        batch_size: 1,
        global_lr: 1.0,
    }
}

fn quadratic_task(centers: &[Vec<f64>]) -> Result<Vec<Box<dyn Objective>>> {
    centers
        .iter()
        .map(|c| Ok(Box::new(LocalObjective::quadratic(ParamVector::new(c.clone())?)) as Box<dyn Objective>))
        .collect()
}

/// Runs the engine with `lr = 0` over `schedule` and returns the max deviation from the dense oracle.
pub fn engine_vs_dense(schedule: &[DiGraphRound], x0: &[Vec<f64>]) -> Result<f64> {
    let n = x0.len();
    let objectives = quadratic_task(x0)?;
    let mut states: Vec<ClientState> = x0
        .iter()
        .enumerate()
        .map(|(i, x)| Ok(ClientState::new(i, ParamVector::new(x.clone())?)))
        .collect::<Result<_>>()?;
    let oracle = matrix_power_consensus_oracle(schedule, x0, &vec![1.0; n]);
    let mut worst: f64 = 0.0;
    for (t, (graph, expect)) in schedule.iter().zip(&oracle).enumerate() {
        let ctx = RoundContext {
            round: t,
            rng: SeededRng::new(0),
            objectives: &objectives,
        };
        let out = run_round(
            &states,
            AlgorithmKind::DFedSgpsm,
            &CommRound::Graph(graph.clone()),
            &frozen_hyper(n),
            &ctx,
        )?;
        states = out.states;
        for (s, i) in states.iter().zip(0..) {
            worst = worst.max((s.w - expect.w[i]).abs());
            let z = s.z();
            for d in 0..s.x.dim() {
                worst = worst.max((s.x[d] - expect.x[i][d]).abs());
                worst = worst.max((z[d] - expect.z[i][d]).abs());
            }
        }
    }
    Ok(worst)
}

fn random_schedule(seed: u64, n: usize, rounds: usize) -> Result<Vec<DiGraphRound>> {
    let mut r = SeededRng::new(seed).aux(0);
    let k_out = r.random_range(1..n);
    let sched = TopologySchedule {
        n,
        generator: Generator::RandomOut { k_out },
        time_varying: true,
        window: 1,
    };
    (0..rounds)
        .map(|t| gen_round(&sched, t, SeededRng::new(seed), NeighborSelection::Uniform))
        .collect()
}

fn check_push_sum_oracle(seed: u64) -> Result<(f64, bool, String)> {
    let mut worst: f64 = 0.0;
    for case in 0..20u64 {
        let s = seed.wrapping_mul(1000).wrapping_add(case);
        let mut r = SeededRng::new(s).aux(1);
        let n = r.random_range(2..=8);
        let rounds = r.random_range(1..=30);
        let dim = r.random_range(1..=3);
        let x0: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| r.random_range(-5.0..5.0)).collect())
            .collect();
        let err = engine_vs_dense(&random_schedule(s, n, rounds)?, &x0)?;
        worst = worst.max(err);
    }
    Ok((worst, worst <= 1e-12, format!("seed={seed} cases=20 n<=8 T<=30")))
}

fn check_three_node() -> Result<(f64, bool, String)> {
    let g = DiGraphRound::from_out_neighbors(vec![vec![0, 1, 2], vec![1, 2], vec![2, 0]])?;
    let dense = matrix_power_consensus_oracle(std::slice::from_ref(&g), &vec![vec![1.0]; 3], &[1.0; 3]);
    let expect = [5.0 / 6.0, 5.0 / 6.0, 4.0 / 3.0];
    let mut worst = engine_vs_dense(&[g], &vec![vec![1.0]; 3])?;
    for i in 0..3 {
        worst = worst.max((dense[0].w[i] - expect[i]).abs());
        worst = worst.max((dense[0].z[i][0] - 1.0).abs());
    }
    Ok((worst, worst <= 1e-15, "w1=(5/6,5/6,4/3)".into()))
}

fn check_complete_one_shot(seed: u64) -> Result<(f64, bool, String)> {
    let mut r = SeededRng::new(seed).aux(2);
    let n = 6;
    let x0: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)])
        .collect();
    let avg: Vec<f64> = (0..2)
        .map(|d| x0.iter().map(|x| x[d]).sum::<f64>() / n as f64)
        .collect();
    let g = DiGraphRound::from_out_neighbors(vec![(0..n).collect(); n])?;
    let out = matrix_power_consensus_oracle(&[g], &x0, &vec![1.0; n]);
    let worst = out[0]
        .z
        .iter()
        .flat_map(|z| z.iter().zip(&avg).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    Ok((worst, worst <= 1e-12, format!("seed={seed} n={n}")))
}

fn small_classifier(seed: u64, model: ModelKind) -> Result<LocalObjective> {
    let data = Arc::new(make_synthetic(3, 20, 4, 2.0, SeededRng::new(seed))?.train);
    let clf = match model {
        ModelKind::Mlp => Classifier::Mlp {
            features: 4,
            hidden: 5,
            classes: 3,
        },
        _ => Classifier::Logistic {
            features: 4,
            classes: 3,
        },
    };
    let shard = (0..data.len()).collect();
    LocalObjective::classifier(clf, data, shard)
}

/// `x_out − x_in` of a traced local round against the closed-form double sum.
fn check_momentum_closed_form(seed: u64) -> Result<(f64, bool, String)> {
    let obj = small_classifier(seed, ModelKind::Logistic)?;
    let mut worst: f64 = 0.0;
    for case in 0..50usize {
        let mut r = SeededRng::new(seed).aux(100 + case);
        let hyper = LocalHyper {
            lr: r.random_range(0.01..0.5),
            rho: if case % 5 == 0 { 0.0 } else { r.random_range(0.0..0.5) },
            alpha: if case % 7 == 0 { 0.0 } else { r.random_range(0.0..0.99) },
            steps: r.random_range(1..=8),
            batch_size: r.random_range(1..=8),
        };
        let w = r.random_range(0.3..3.0);
        let x_in = ParamVector::new(
            (0..obj.dim())
                .map(|_| StandardNormal.sample(&mut r))
                .collect::<Vec<f64>>(),
        )?;
        let mut sampler = BatchSampler::new(SeededRng::new(seed), 0, case, obj.shard_len(), hyper.batch_size);
        let out = local_round(&obj, &x_in, w, &hyper, &mut sampler, true)?;
        let trace = out.trace.expect("trace requested");
        let oracle = momentum_closed_form_from_trace(&trace, hyper.lr, hyper.alpha, hyper.steps)?;
        let delta = out.x.sub(&x_in)?;
        let rel = delta.sub(&oracle)?.l2_norm() / oracle.l2_norm().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    Ok((worst, worst <= 1e-10, format!("seed={seed} configs=50 K<=8")))
}

fn check_tilde_alpha() -> Result<(f64, bool, String)> {
    let mut pass = true;
    let mut worst_gap = f64::INFINITY;
    for ai in 0..100 {
        let alpha = ai as f64 / 100.0;
        for k in 1..=20 {
            let c = tilde_alpha_bound_check(alpha, k);
            pass &= c.holds;
            worst_gap = worst_gap.min(c.bound - c.value);
        }
    }
    let hand = tilde_alpha_bound_check(0.5, 2);
    pass &= hand.value == 2.5 && hand.bound == 4.0;
    Ok((0.0, pass, format!("alpha in [0,0.99], K<=20, min slack {worst_gap:.3}")))
}

fn bits(states: &[ClientState]) -> Vec<u64> {
    states
        .iter()
        .flat_map(|s| {
            s.x.iter()
                .map(|v| v.to_bits())
                .chain([s.w.to_bits()])
                .collect::<Vec<_>>()
        })
        .collect()
}

fn tiny_config(algorithm: AlgorithmKind, seed: u64, topology: TopologyKind) -> ExperimentConfig {
    ExperimentConfig {
        algorithm,
        clients: 8,
        seed,
        topology,
        k_out: Some(2),
        window: 8,
        local_steps: Some(3),
        batch_size: 8,
        synthetic: crate::config::SyntheticConfig {
            classes: 3,
            per_class: 40,
            features: 5,
            separation: 2.0,
        },
        ..Default::default()
    }
}

/// Runs two configurations side by side and reports the first round at which their states differ bitwise.
pub fn bitwise_divergence(a: ExperimentConfig, b: ExperimentConfig, rounds: usize) -> Result<Option<usize>> {
    let mut sa = Simulation::new(a)?;
    let mut sb = Simulation::new(b)?;
    for t in 0..rounds {
        sa.step()?;
        sb.step()?;
        if bits(sa.states()) != bits(sb.states()) {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

fn check_reduction(
    name_a: AlgorithmKind,
    name_b: AlgorithmKind,
    adjust: impl Fn(&mut ExperimentConfig),
    topologies: &[TopologyKind],
    seeds: std::ops::Range<u64>,
    rounds: usize,
) -> Result<(f64, bool, String)> {
    for seed in seeds.clone() {
        for &topo in topologies {
            let mut a = tiny_config(name_a, seed, topo);
            let mut b = tiny_config(name_b, seed, topo);
            adjust(&mut a);
            adjust(&mut b);
            if let Some(t) = bitwise_divergence(a, b, rounds)? {
                return Ok((
                    1.0,
                    false,
                    format!("{name_a} vs {name_b} diverged at round {t}, seed={seed} topology={topo:?}"),
                ));
            }
        }
    }
    Ok((
        0.0,
        true,
        format!("{name_a} == {name_b}, seeds {seeds:?}, {rounds} rounds"),
    ))
}

fn check_gradients(seed: u64) -> Result<(f64, bool, String)> {
    let mut worst_smooth: f64 = 0.0;
    let mut worst_mlp: f64 = 0.0;
    let mut r = SeededRng::new(seed).aux(3);
    let quad = LocalObjective::quadratic(ParamVector::new((0..5).map(|_| r.random_range(-2.0..2.0)).collect())?);
    let logistic = small_classifier(seed, ModelKind::Logistic)?;
    let mlp = small_classifier(seed, ModelKind::Mlp)?;
    for (obj, is_mlp) in [(&quad, false), (&logistic, false), (&mlp, true)] {
        let batch = crate::models::Minibatch::full(obj.shard_len());
        for _ in 0..20 {
            let x = ParamVector::new(
                (0..obj.dim())
                    .map(|_| StandardNormal.sample(&mut r))
                    .collect::<Vec<f64>>(),
            )?;
            let analytic = obj.gradient(&x, &batch)?;
            let fd = finite_diff_grad(|p| obj.loss(p, &batch).unwrap_or(f64::NAN), &x, FD_STEP)?;
            let rel = analytic.sub(&fd)?.l2_norm() / fd.l2_norm().max(1e-8);
            if is_mlp {
                worst_mlp = worst_mlp.max(rel);
            } else {
                worst_smooth = worst_smooth.max(rel);
            }
        }
    }
    Ok((
        worst_smooth.max(worst_mlp),
        worst_smooth < 1e-5 && worst_mlp < 1e-4,
        format!("seed={seed} quad/logistic {worst_smooth:.1e}, mlp {worst_mlp:.1e}"),
    ))
}

fn check_mass(seed: u64) -> Result<(f64, bool, String)> {
    let cfg = ExperimentConfig {
        rounds: 200,
        window: 20,
        ..tiny_config(AlgorithmKind::DFedSgpsm, seed, TopologyKind::Random)
    };
    let n = cfg.clients as f64;
    let mut sim = Simulation::new(cfg)?;
    let (mut col, mut wres, mut xres): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..200 {
        if let CommRound::Graph(g) = sim.next_comm()? {
            col = col.max(g.column_residual());
        }
        let s = sim.step()?;
        wres = wres.max(s.w_mass_residual);
        xres = xres.max(s.x_mass_residual);
    }
    let pass = col <= 1e-12 && wres * n <= 1e-9 * n && xres <= 1e-9;
    Ok((
        col.max(wres).max(xres),
        pass,
        format!("seed={seed} col={col:.1e} w={wres:.1e} x={xres:.1e}"),
    ))
}

fn check_geometric_decay() -> Result<(f64, bool, String)> {
    let g = DiGraphRound::from_out_neighbors(vec![vec![1, 2], vec![0, 2], vec![0]])?;
    let b = 3;
    let schedule = vec![g; 50];
    let x0 = vec![vec![3.0, -1.0], vec![0.0, 4.0], vec![-2.0, 0.5]];
    let states = matrix_power_consensus_oracle(&schedule, &x0, &[1.0; 3]);
    let ce: Vec<f64> = std::iter::once(consensus_of(&x0, &[1.0; 3]))
        .chain(states.iter().map(|s| consensus_of(&s.x, &s.w)))
        .collect();
    let q = ce
        .windows(b + 1)
        .filter(|w| w[0] > 1e-24)
        .map(|w| w[b] / w[0])
        .fold(0.0, f64::max);
    Ok((q, q < 1.0, format!("static 3-node digraph, B={b}, fitted q={q:.2e}")))
}

fn consensus_of(x: &[Vec<f64>], w: &[f64]) -> f64 {
    let n = x.len() as f64;
    let dim = x[0].len();
    let mean: Vec<f64> = (0..dim).map(|d| x.iter().map(|v| v[d]).sum::<f64>() / n).collect();
    x.iter()
        .zip(w)
        .map(|(xi, wi)| xi.iter().zip(&mean).map(|(a, m)| (a / wi - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / n
}

/// Every check, in a fixed order.
pub fn run_suite(seed: u64) -> Vec<OracleReport> {
    let zero_rho_alpha = |c: &mut ExperimentConfig| {
        c.rho = 0.0;
        c.alpha = 0.0;
    };
    let both = [TopologyKind::Random, TopologyKind::Ring];
    vec![
        report("push-sum-vs-dense-oracle", check_push_sum_oracle(seed)),
        report("three-node-hand-oracle", check_three_node()),
        report("complete-graph-one-shot", check_complete_one_shot(seed)),
        report("momentum-closed-form", check_momentum_closed_form(seed)),
        report("tilde-alpha-bound", check_tilde_alpha()),
        report(
            "reduction-dfedsgpsm-to-osgp",
            check_reduction(
                AlgorithmKind::DFedSgpsm,
                AlgorithmKind::Osgp,
                zero_rho_alpha,
                &both,
                seed..seed + 5,
                50,
            ),
        ),
        report(
            "reduction-dfedsam-to-dfedavg",
            check_reduction(
                AlgorithmKind::DFedSam,
                AlgorithmKind::DFedAvg,
                |c| c.rho = 0.0,
                &both,
                seed..seed + 2,
                20,
            ),
        ),
        report(
            "reduction-dfedavgm-to-dfedavg",
            check_reduction(
                AlgorithmKind::DFedAvgM,
                AlgorithmKind::DFedAvg,
                |c| c.alpha = 0.0,
                &both,
                seed..seed + 2,
                20,
            ),
        ),
        report(
            "reduction-sgp-to-osgp-k1",
            check_reduction(
                AlgorithmKind::Sgp,
                AlgorithmKind::Osgp,
                |c| c.local_steps = Some(1),
                &both,
                seed..seed + 2,
                20,
            ),
        ),
        report("gradients-vs-finite-differences", check_gradients(seed)),
        report("mass-conservation-200-rounds", check_mass(seed)),
        report("consensus-geometric-decay", check_geometric_decay()),
    ]
}
