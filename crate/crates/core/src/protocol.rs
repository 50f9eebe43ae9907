//! Round engine: local updates, message passing and aggregation for
//! DFedSGPSM and its baselines.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlgorithmKind, ConnectivityPolicy, DataSource, ExperimentConfig};
use crate::data::{dirichlet_partition, iid_partition, load_idx, make_synthetic, TrainTest};
use crate::error::{Error, Result};
use crate::local::{local_round, local_sgd, BatchSampler, LocalHyper, MIN_PUSH_SUM_WEIGHT};
use crate::math::{Domain, ParamVector, SeededRng, StreamId};
use crate::metrics::{evaluate_global, Evaluator, MetricsSink, RoundMetrics, RunManifest};
use crate::models::{Classifier, LocalObjective, ModelKind, Objective};
use crate::topology::{
    gen_round, window_strongly_connected, DiGraphRound, NeighborSelection, TopologySchedule, STOCHASTIC_TOL,
};

/// Relative tolerance on Push-Sum mass conservation.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    pub id: usize,
    pub x: ParamVector,
    /// Push-Sum weight; stays 1 under symmetric mixing.
    pub w: f64,
    /// Full-shard loss at the de-biased model, refreshed after every round.
    pub last_loss: f64,
}

impl ClientState {
    pub fn new(id: usize, x: ParamVector) -> Self {
        ClientState {
            id,
            x,
            w: 1.0,
            last_loss: 0.0,
        }
    }

    pub fn z(&self) -> ParamVector {
        ParamVector::from_raw(self.x.iter().map(|v| v / self.w).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mixing {
    /// Column-stochastic gossip carrying `(x, w)`.
    PushSum,
    /// Doubly stochastic symmetric gossip with `w ≡ 1`.
    Symmetric,
    /// A server averages a sampled subset.
    Server,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalRule {
    Sgd,
    SamMomentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    Uniform,
    LossAware,
}

/// What an algorithm does each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recipe {
    pub mixing: Mixing,
    pub local: LocalRule,
    pub rho: f64,
    pub alpha: f64,
    /// Forces `K = 1`.
    pub single_step: bool,
    pub selection: SelectionRule,
}

impl AlgorithmKind {
    pub fn mixing(&self) -> Mixing {
        match self {
            AlgorithmKind::DFedSgpsm | AlgorithmKind::DFedSgpsmS | AlgorithmKind::Osgp | AlgorithmKind::Sgp => {
                Mixing::PushSum
            }
            AlgorithmKind::DPsgd | AlgorithmKind::DFedAvg | AlgorithmKind::DFedAvgM | AlgorithmKind::DFedSam => {
                Mixing::Symmetric
            }
            AlgorithmKind::FedAvg => Mixing::Server,
        }
    }

    /// The recipe given the configured perturbation radius and momentum.
    pub fn recipe(&self, rho: f64, alpha: f64) -> Recipe {
        let base = Recipe {
            mixing: self.mixing(),
            local: LocalRule::Sgd,
            rho: 0.0,
            alpha: 0.0,
            single_step: false,
            selection: SelectionRule::Uniform,
        };
        match self {
            AlgorithmKind::DFedSgpsm => Recipe {
                local: LocalRule::SamMomentum,
                rho,
                alpha,
                ..base
            },
            AlgorithmKind::DFedSgpsmS => Recipe {
                local: LocalRule::SamMomentum,
                rho,
                alpha,
                selection: SelectionRule::LossAware,
                ..base
            },
            AlgorithmKind::Osgp | AlgorithmKind::DFedAvg | AlgorithmKind::FedAvg => base,
            AlgorithmKind::Sgp | AlgorithmKind::DPsgd => Recipe {
                single_step: true,
                ..base
            },
            AlgorithmKind::DFedAvgM => Recipe {
                local: LocalRule::SamMomentum,
                alpha,
                ..base
            },
            AlgorithmKind::DFedSam => Recipe {
                local: LocalRule::SamMomentum,
                rho,
                ..base
            },
        }
    }
}

/// One push from `from` to `to`, already scaled by the sender's out-weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    pub payload_x: ParamVector,
    pub payload_w: f64,
}

/// The communication pattern of one round.
#[derive(Debug, Clone, PartialEq)]
pub enum CommRound {
    Graph(DiGraphRound),
    Star { participants: Vec<usize> },
}

/// Per-round knobs before the algorithm's recipe is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundHyper {
    pub lr: f64,
    pub rho: f64,
    pub alpha: f64,
    /// Local iterations per client.
    pub steps: Vec<usize>,
    pub batch_size: usize,
    pub global_lr: f64,
}

pub struct RoundContext<'a> {
    pub round: usize,
    pub rng: SeededRng,
    pub objectives: &'a [Box<dyn Objective>],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub consensus_error: f64,
    pub min_w: f64,
    pub max_w: f64,
    /// `|Σw − n| / n` after mixing.
    pub w_mass_residual: f64,
    /// Largest coordinate drift of `Σx` across mixing, relative to its scale.
    pub x_mass_residual: f64,
}

#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub states: Vec<ClientState>,
    pub stats: RoundStats,
}

/// Every sender's messages, in sender then receiver order.
pub fn build_messages(graph: &DiGraphRound, x: &[ParamVector], w: &[f64]) -> Result<Vec<Message>> {
    let mut out = Vec::with_capacity(graph.edge_count());
    for i in 0..graph.n() {
        for &(j, p) in graph.out_edges(i) {
            out.push(Message {
                from: i,
                to: j,
                payload_x: x[i].scaled(p)?,
                payload_w: p * w[i],
            });
        }
    }
    Ok(out)
}

/// Sums delivered payloads per receiver in the order given.
pub fn aggregate(n: usize, dim: usize, messages: &[Message]) -> (Vec<ParamVector>, Vec<f64>) {
    let mut x = vec![vec![0.0; dim]; n];
    let mut w = vec![0.0; n];
    for m in messages {
        for (a, b) in x[m.to].iter_mut().zip(m.payload_x.iter()) {
            *a += b;
        }
        w[m.to] += m.payload_w;
    }
    (x.into_iter().map(ParamVector::from_raw).collect(), w)
}

/// `(1/n) Σ ‖x_i/w_i − x̄‖²` with `x̄ = (1/n) Σ x_i`.
pub fn consensus_error(states: &[ClientState]) -> f64 {
    let n = states.len();
    if n == 0 {
        return 0.0;
    }
    let dim = states[0].x.dim();
    let mut mean = vec![0.0; dim];
    for s in states {
        for (m, v) in mean.iter_mut().zip(s.x.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let total: f64 = states
        .iter()
        .map(|s| s.x.iter().zip(&mean).map(|(v, m)| (v / s.w - m).powi(2)).sum::<f64>())
        .sum();
    total / n as f64
}

/// FedAvg participants of one round: `max(1, round(fraction·n))` clients,
/// uniform without replacement, sorted.
pub fn sample_participants(n: usize, fraction: f64, round: usize, rng: SeededRng) -> Vec<usize> {
    let m = ((fraction * n as f64).round() as usize).clamp(1, n.max(1));
    let mut r = rng.stream(StreamId::new(Domain::Server, 0, round, 0));
    let mut picked = index::sample(&mut r, n, m).into_vec();
    picked.sort_unstable();
    picked
}

fn check_comm(algo: AlgorithmKind, comm: &CommRound, n: usize) -> Result<()> {
    let mismatch = |reason: String| Error::TopologyMismatch {
        algorithm: algo.name(),
        reason,
    };
    match (algo.mixing(), comm) {
        (Mixing::Server, CommRound::Star { participants }) => {
            if participants.is_empty() || participants.windows(2).any(|p| p[0] >= p[1]) {
                return Err(mismatch("participants must be non-empty, sorted and distinct".into()));
            }
            if participants.last().is_some_and(|&p| p >= n) {
                return Err(mismatch(format!("participant out of range for {n} clients")));
            }
            Ok(())
        }
        (Mixing::Server, CommRound::Graph(_)) => Err(mismatch("server aggregation needs a star round".into())),
        (_, CommRound::Star { .. }) => Err(mismatch("gossip algorithms need a graph round".into())),
        (mixing, CommRound::Graph(g)) => {
            if g.n() != n {
                return Err(mismatch(format!("graph has {} nodes, {} clients", g.n(), n)));
            }
            if g.column_residual() > STOCHASTIC_TOL {
                return Err(mismatch(format!("column residual {:e}", g.column_residual())));
            }
            if mixing == Mixing::Symmetric && !(g.is_symmetric() && g.is_doubly_stochastic()) {
                return Err(mismatch("needs a symmetric doubly stochastic graph".into()));
            }
            Ok(())
        }
    }
}

fn local_update(
    state: &ClientState,
    obj: &dyn Objective,
    recipe: &Recipe,
    hyper: &RoundHyper,
    ctx: &RoundContext<'_>,
) -> Result<ParamVector> {
    let i = state.id;
    let steps = if recipe.single_step { 1 } else { hyper.steps[i] };
    let mut sampler = BatchSampler::new(ctx.rng, i, ctx.round, obj.shard_len(), hyper.batch_size);
    let result = match recipe.local {
        LocalRule::Sgd => local_sgd(obj, &state.x, state.w, hyper.lr, steps, &mut sampler),
        LocalRule::SamMomentum => {
            let local = LocalHyper {
                lr: hyper.lr,
                rho: recipe.rho,
                alpha: recipe.alpha,
                steps,
                batch_size: hyper.batch_size,
            };
            local_round(obj, &state.x, state.w, &local, &mut sampler, false).map(|o| o.x)
        }
    };
    result.map_err(|e| match e {
        Error::ProtocolCorruption { weight, .. } => Error::ProtocolCorruption { client: i, weight },
        e => e,
    })
}

fn mass_stats(before: &[ParamVector], after: &[ParamVector]) -> f64 {
    let dim = before.first().map_or(0, |v| v.dim());
    let column_sum = |xs: &[ParamVector]| {
        let mut s = vec![0.0; dim];
        for x in xs {
            for (a, b) in s.iter_mut().zip(x.iter()) {
                *a += b;
            }
        }
        s
    };
    let (sb, sa) = (column_sum(before), column_sum(after));
    let drift = sb.iter().zip(&sa).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let sum_norm = sb.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mean_norm = before.iter().map(|x| x.l2_norm()).sum::<f64>() / before.len().max(1) as f64;
    let scale = sum_norm.max(mean_norm);
    if drift == 0.0 {
        0.0
    } else {
        drift / scale
    }
}

/// One synchronous round: every client updates locally, messages are
/// delivered, and each receiver aggregates in sender-id order.
pub fn run_round(
    states: &[ClientState],
    algo: AlgorithmKind,
    comm: &CommRound,
    hyper: &RoundHyper,
    ctx: &RoundContext<'_>,
) -> Result<RoundOutput> {
    let n = states.len();
    if n == 0 || ctx.objectives.len() != n || hyper.steps.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} states, {} objectives, {} step counts",
            n,
            ctx.objectives.len(),
            hyper.steps.len()
        )));
    }
    if states.iter().enumerate().any(|(i, s)| s.id != i) {
        return Err(Error::InvalidArgument("client states must be ordered by id".into()));
    }
    check_comm(algo, comm, n)?;
    let recipe = algo.recipe(hyper.rho, hyper.alpha);

    let active: Vec<usize> = match comm {
        CommRound::Star { participants } => participants.clone(),
        CommRound::Graph(_) => (0..n).collect(),
    };
    let x_half: Vec<ParamVector> = active
        .par_iter()
        .map(|&i| local_update(&states[i], ctx.objectives[i].as_ref(), &recipe, hyper, ctx))
        .collect::<Result<_>>()?;

    let mut next: Vec<ClientState> = states.to_vec();
    let (mut w_res, mut x_res) = (0.0, 0.0);
    match comm {
        CommRound::Graph(graph) => {
            let w: Vec<f64> = states.iter().map(|s| s.w).collect();
            let messages = build_messages(graph, &x_half, &w)?;
            let (x_new, w_new) = aggregate(n, states[0].x.dim(), &messages);
            x_res = mass_stats(&x_half, &x_new);
            for (i, (x, wi)) in x_new.into_iter().zip(w_new).enumerate() {
                next[i].x = ParamVector::new(x.into_vec())?;
                if recipe.mixing == Mixing::PushSum {
                    if !(wi >= MIN_PUSH_SUM_WEIGHT && wi.is_finite()) {
                        return Err(Error::ProtocolCorruption { client: i, weight: wi });
                    }
                    next[i].w = wi;
                }
            }
            let w_sum: f64 = next.iter().map(|s| s.w).sum();
            w_res = (w_sum - n as f64).abs() / n as f64;
        }
        CommRound::Star { .. } => {
            let global = &states[0].x;
            let mean = ParamVector::mean(&x_half)?;
            let mut x = global.clone();
            x.add_scaled(hyper.global_lr, &mean.sub(global)?)?;
            for s in next.iter_mut() {
                s.x = x.clone();
            }
        }
    }
    if w_res > MASS_TOL || x_res > MASS_TOL {
        return Err(Error::Invariant {
            round: ctx.round,
            detail: format!("mass not conserved: w residual {w_res:e}, x residual {x_res:e}"),
        });
    }

    let losses: Vec<f64> = next
        .par_iter()
        .map(|s| ctx.objectives[s.id].full_loss(&s.z()))
        .collect::<Result<_>>()?;
    for (s, l) in next.iter_mut().zip(losses) {
        s.last_loss = l;
    }

    let stats = RoundStats {
        consensus_error: consensus_error(&next),
        min_w: next.iter().map(|s| s.w).fold(f64::INFINITY, f64::min),
        max_w: next.iter().map(|s| s.w).fold(f64::NEG_INFINITY, f64::max),
        w_mass_residual: w_res,
        x_mass_residual: x_res,
    };
    Ok(RoundOutput { states: next, stats })
}

/// Client objectives, the shared initial model and the held-out evaluator.
pub struct Task {
    pub objectives: Vec<Box<dyn Objective>>,
    pub x0: ParamVector,
    pub evaluator: Evaluator,
}

impl Task {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Task> {
        cfg.validate()?;
        let rng = SeededRng::new(cfg.seed);
        if cfg.model == ModelKind::Quadratic {
            let normal =
                Normal::new(0.0, cfg.quadratic.spread).map_err(|e| Error::Config(format!("quadratic spread: {e}")))?;
            let objectives = (0..cfg.clients)
                .map(|i| {
                    let mut r = rng.stream(StreamId::new(Domain::Dataset, i, 0, 0));
                    let c: Vec<f64> = (0..cfg.quadratic.dim).map(|_| normal.sample(&mut r)).collect();
                    Ok(Box::new(LocalObjective::quadratic(ParamVector::new(c)?)) as Box<dyn Objective>)
                })
                .collect::<Result<_>>()?;
            return Ok(Task {
                objectives,
                x0: ParamVector::zeros(cfg.quadratic.dim),
                evaluator: Evaluator::default(),
            });
        }

        let TrainTest { train, test } = match cfg.data {
            DataSource::Synthetic => {
                let s = &cfg.synthetic;
                make_synthetic(s.classes, s.per_class, s.features, s.separation, rng)?
            }
            DataSource::Idx => {
                let images = cfg.idx_images.as_ref().expect("validated");
                let labels = cfg.idx_labels.as_ref().expect("validated");
                load_idx(images, labels, cfg.limit)?.train_test_split()
            }
        };
        let partition = match cfg.dirichlet_alpha {
            Some(a) => dirichlet_partition(&train, cfg.clients, a, rng)?,
            None => iid_partition(&train, cfg.clients, rng)?,
        };
        let features = train.n_features();
        let classes = train.n_classes().max(test.n_classes());
        let model = match cfg.model {
            ModelKind::Logistic => Classifier::Logistic { features, classes },
            ModelKind::Mlp => Classifier::Mlp {
                features,
                hidden: cfg.hidden,
                classes,
            },
            ModelKind::Quadratic => unreachable!("handled above"),
        };
        let train = Arc::new(train);
        let objectives = partition
            .shards
            .into_iter()
            .map(|shard| {
                Ok(Box::new(LocalObjective::classifier(model.clone(), train.clone(), shard)?) as Box<dyn Objective>)
            })
            .collect::<Result<_>>()?;
        Ok(Task {
            objectives,
            x0: model.init(rng),
            evaluator: Evaluator {
                model: Some(model),
                test: Some(Arc::new(test)),
            },
        })
    }
}

/// A running experiment, advanced one round at a time.
pub struct Simulation {
    cfg: ExperimentConfig,
    rng: SeededRng,
    task: Task,
    schedule: Option<TopologySchedule>,
    states: Vec<ClientState>,
    steps: Vec<usize>,
    round: usize,
    window: VecDeque<DiGraphRound>,
    pool: rayon::ThreadPool,
}

impl Simulation {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let task = Task::from_config(&cfg)?;
        Self::with_task(cfg, task)
    }

    /// Runs `cfg` on caller-supplied objectives; data and model settings in `cfg` are ignored.
    pub fn with_task(cfg: ExperimentConfig, task: Task) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.clients;
        if task.objectives.len() != n {
            return Err(Error::Config(format!(
                "{} objectives for {} clients",
                task.objectives.len(),
                n
            )));
        }
        if let Some(o) = task.objectives.iter().find(|o| o.dim() != task.x0.dim()) {
            return Err(Error::DimensionMismatch {
                left: o.dim(),
                right: task.x0.dim(),
            });
        }
        let steps = task
            .objectives
            .iter()
            .map(|o| match (cfg.local_steps, cfg.local_epochs) {
                (_, Some(e)) => e * o.shard_len().div_ceil(cfg.batch_size.min(o.shard_len()).max(1)),
                (Some(k), None) => k,
                (None, None) => 1,
            })
            .collect();
        let schedule = (cfg.algorithm.mixing() != Mixing::Server).then(|| TopologySchedule {
            n,
            generator: cfg.generator(),
            time_varying: cfg.time_varying,
            window: cfg.window,
        });
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let mut states: Vec<ClientState> = (0..n).map(|i| ClientState::new(i, task.x0.clone())).collect();
        for (s, o) in states.iter_mut().zip(&task.objectives) {
            s.last_loss = o.full_loss(&s.x)?;
        }
        Ok(Simulation {
            rng: SeededRng::new(cfg.seed),
            cfg,
            task,
            schedule,
            states,
            steps,
            round: 0,
            window: VecDeque::new(),
            pool,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn states(&self) -> &[ClientState] {
        &self.states
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    /// Rounds completed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Local iterations per client.
    pub fn local_steps(&self) -> &[usize] {
        &self.steps
    }

    /// The communication pattern of the next round.
    pub fn next_comm(&self) -> Result<CommRound> {
        let t = self.round;
        match &self.schedule {
            None => Ok(CommRound::Star {
                participants: sample_participants(self.cfg.clients, self.cfg.participation, t, self.rng),
            }),
            Some(sched) => {
                let recipe = self.cfg.algorithm.recipe(self.cfg.rho, self.cfg.alpha);
                let losses: Vec<f64> = self.states.iter().map(|s| s.last_loss).collect();
                let selection = match recipe.selection {
                    SelectionRule::Uniform => NeighborSelection::Uniform,
                    SelectionRule::LossAware => NeighborSelection::LossAware(&losses),
                };
                Ok(CommRound::Graph(gen_round(sched, t, self.rng, selection)?))
            }
        }
    }

    /// Advances one round.
    pub fn step(&mut self) -> Result<RoundStats> {
        let t = self.round;
        self.step_inner().map_err(|e| e.at_round(t))
    }

    fn step_inner(&mut self) -> Result<RoundStats> {
        let t = self.round;
        let comm = self.next_comm()?;
        if let (CommRound::Graph(g), Some(sched)) = (&comm, &self.schedule) {
            self.window.push_back(g.clone());
            if self.window.len() > sched.window {
                self.window.pop_front();
            }
            if self.cfg.connectivity == ConnectivityPolicy::Abort
                && self.window.len() == sched.window
                && !window_strongly_connected(self.window.make_contiguous())
            {
                return Err(Error::NotConnected {
                    window: t + 1 - sched.window,
                    b: sched.window,
                });
            }
        }
        let hyper = RoundHyper {
            lr: self.cfg.lr_at(t),
            rho: self.cfg.rho,
            alpha: self.cfg.alpha,
            steps: self.steps.clone(),
            batch_size: self.cfg.batch_size,
            global_lr: self.cfg.global_lr,
        };
        let ctx = RoundContext {
            round: t,
            rng: self.rng,
            objectives: &self.task.objectives,
        };
        let states = &self.states;
        let algo = self.cfg.algorithm;
        let out = self.pool.install(|| run_round(states, algo, &comm, &hyper, &ctx))?;
        self.states = out.states;
        self.round += 1;
        Ok(out.stats)
    }

    /// Metrics of the current state; `stats` comes from the round just run.
    pub fn metrics(&self, stats: Option<&RoundStats>, wall_ms: u64) -> Result<RoundMetrics> {
        let eval = self
            .pool
            .install(|| evaluate_global(&self.states, &self.task.objectives, &self.task.evaluator))?;
        let (w_res, x_res) = stats.map_or((0.0, 0.0), |s| (s.w_mass_residual, s.x_mass_residual));
        Ok(RoundMetrics {
            round: self.round,
            train_loss: eval.train_loss,
            test_accuracy: eval.test_accuracy,
            grad_norm_sq: eval.grad_norm_sq,
            consensus_error: consensus_error(&self.states),
            min_w: self.states.iter().map(|s| s.w).fold(f64::INFINITY, f64::min),
            max_w: self.states.iter().map(|s| s.w).fold(f64::NEG_INFINITY, f64::max),
            wall_ms,
            test_loss: eval.test_loss,
            w_mass_residual: w_res,
            x_mass_residual: x_res,
        })
    }

    /// Evaluates the initial state and then runs every remaining round,
    /// appending one record per round to `sink` if given.
    pub fn run(&mut self, mut sink: Option<&mut MetricsSink>) -> Result<Vec<RoundMetrics>> {
        let mut series = Vec::with_capacity(self.cfg.rounds + 1);
        let mut push = |m: RoundMetrics, sink: &mut Option<&mut MetricsSink>| -> Result<()> {
            if let Some(s) = sink.as_deref_mut() {
                s.append(&m)?;
            }
            series.push(m);
            Ok(())
        };
        if self.round == 0 {
            push(self.metrics(None, 0).map_err(|e| e.at_round(0))?, &mut sink)?;
        }
        while self.round < self.cfg.rounds {
            let t = self.round;
            let start = Instant::now();
            let stats = self.step()?;
            let wall = if self.cfg.record_wall_time {
                start.elapsed().as_millis() as u64
            } else {
                0
            };
            push(self.metrics(Some(&stats), wall).map_err(|e| e.at_round(t))?, &mut sink)?;
        }
        Ok(series)
    }

    /// `x̄`, the model the run outputs.
    pub fn average_model(&self) -> Result<ParamVector> {
        ParamVector::mean(self.states.iter().map(|s| &s.x))
    }
}

/// Runs `cfg` end to end. With `cfg.out` set, writes `manifest.toml` and
/// `metrics.csv` there; an existing manifest is an error unless `overwrite`.
pub fn run_experiment_with(cfg: &ExperimentConfig, overwrite: bool) -> Result<Vec<RoundMetrics>> {
    let mut sim = Simulation::new(cfg.clone())?;
    match &cfg.out {
        None => sim.run(None),
        Some(dir) => {
            RunManifest::new(cfg.clone()).write(dir, overwrite)?;
            let mut sink = MetricsSink::create(dir.join(crate::metrics::METRICS_FILE))?;
            sim.run(Some(&mut sink))
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RoundMetrics>> {
    run_experiment_with(cfg, false)
}
