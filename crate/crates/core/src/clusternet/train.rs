//! Alternating ClusterNet training and the plain-MLP baseline trainer.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{soft_combine, ClusterNet, GateMode};
use crate::allocation::one_hot_rows;
use crate::error::{Error, Result};
use crate::nn::{GradientSet, Mlp, OptimizerKind, OptimizerState, PROB_EPS};

/// What one training iteration consumes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IterationUnit {
    /// One full shuffled pass over the training rows, in minibatches.
    #[default]
    Epoch,
    /// A single minibatch.
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub gate_mode: GateMode,
    pub optimizer: OptimizerKind,
    pub iteration_unit: IterationUnit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 128,
            iterations: 2000,
            seed: 0,
            gate_mode: GateMode::Soft,
            optimizer: OptimizerKind::default(),
            iteration_unit: IterationUnit::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }

    fn optimizer(&self) -> Result<OptimizerState> {
        OptimizerState::new(self.learning_rate, self.optimizer)
    }
}

/// Per-iteration `(L_f, L_c)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub function: Vec<f64>,
    pub context: Vec<f64>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.function.len()
    }

    pub fn is_empty(&self) -> bool {
        self.function.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.function.last()?, *self.context.last()?))
    }

    /// CSV with header `iteration,loss_function,loss_context`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["iteration", "loss_function", "loss_context"])?;
        for (i, (f, c)) in self.function.iter().zip(&self.context).enumerate() {
            wtr.write_record([i.to_string(), f.to_string(), c.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<loss trace>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// One optimizer state per network of a ClusterNet.
#[derive(Debug, Clone)]
pub struct ClusterOptimizers {
    pub function: Vec<OptimizerState>,
    pub context: Vec<OptimizerState>,
}

impl ClusterOptimizers {
    pub fn new(q: usize, learning_rate: f64, kind: OptimizerKind) -> Result<Self> {
        let state = OptimizerState::new(learning_rate, kind)?;
        Ok(Self {
            function: vec![state.clone(); q],
            context: vec![state; q],
        })
    }
}

fn check_batch(model: &ClusterNet, inputs: ArrayView2<f64>) -> Result<()> {
    if inputs.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if inputs.ncols() != model.input_width() {
        return Err(Error::invalid(format!(
            "batch has {} features, model expects {}",
            inputs.ncols(),
            model.input_width()
        )));
    }
    Ok(())
}

/// `L_f = mean((y - target)^2)` through the soft combination, gates held
/// constant, together with one gradient set per function network.
pub fn function_gradients(
    model: &ClusterNet,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
) -> Result<(f64, Vec<GradientSet>)> {
    check_batch(model, inputs)?;
    if targets.dim() != (inputs.nrows(), model.output_width()) {
        return Err(Error::invalid(format!(
            "targets {:?} do not match batch of {} rows x {} outputs",
            targets.dim(),
            inputs.nrows(),
            model.output_width()
        )));
    }
    let gates = model.gates_batch(inputs)?;
    let caches = model
        .clusters()
        .iter()
        .map(|c| c.function_net.forward_cached(inputs))
        .collect::<Result<Vec<_>>>()?;
    let outputs: Vec<Array2<f64>> = caches.iter().map(|c| c.output().clone()).collect();
    let y = soft_combine(&outputs, &gates);
    let diff = &y - &targets;
    let count = diff.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    let upstream = diff * (2.0 / count);
    let grads = model
        .clusters()
        .iter()
        .zip(&caches)
        .enumerate()
        .map(|(j, (cluster, cache))| {
            let gate = gates.column(j).insert_axis(Axis(1));
            let g = &upstream * &gate;
            cluster.function_net.backward_cached(cache, g.view())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((loss, grads))
}

/// `L_c`: binary cross-entropy of every gate against its label bit, averaged
/// over rows and clusters, with one gradient set per context network.
pub fn context_gradients(
    model: &ClusterNet,
    inputs: ArrayView2<f64>,
    labels: ArrayView2<f64>,
) -> Result<(f64, Vec<GradientSet>)> {
    check_batch(model, inputs)?;
    if labels.dim() != (inputs.nrows(), model.q()) {
        return Err(Error::invalid(format!(
            "labels {:?} do not match batch of {} rows x {} clusters",
            labels.dim(),
            inputs.nrows(),
            model.q()
        )));
    }
    let count = (inputs.nrows() * model.q()) as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(model.q());
    for (j, cluster) in model.clusters().iter().enumerate() {
        let cache = cluster.context_net.forward_cached(inputs)?;
        let c = cache.output();
        let mut upstream = Array2::zeros(c.dim());
        for i in 0..c.nrows() {
            let p = labels[[i, j]];
            let cv = c[[i, 0]].clamp(PROB_EPS, 1.0 - PROB_EPS);
            loss -= p * cv.ln() + (1.0 - p) * (1.0 - cv).ln();
            upstream[[i, 0]] = (-p / cv + (1.0 - p) / (1.0 - cv)) / count;
        }
        grads.push(
            cluster
                .context_net
                .backward_cached(&cache, upstream.view())?,
        );
    }
    Ok((loss / count, grads))
}

pub fn function_loss(
    model: &ClusterNet,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
) -> Result<f64> {
    let y = model.predict_batch(inputs, GateMode::Soft)?;
    if y.dim() != targets.dim() {
        return Err(Error::invalid("targets do not match model output"));
    }
    let diff = &y - &targets;
    Ok(diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64)
}

pub fn context_loss(
    model: &ClusterNet,
    inputs: ArrayView2<f64>,
    labels: ArrayView2<f64>,
) -> Result<f64> {
    let c = model.gates_batch(inputs)?;
    if c.dim() != labels.dim() {
        return Err(Error::invalid("labels do not match gate count"));
    }
    let mut loss = 0.0;
    for (&cv, &p) in c.iter().zip(labels.iter()) {
        let cv = cv.clamp(PROB_EPS, 1.0 - PROB_EPS);
        loss -= p * cv.ln() + (1.0 - p) * (1.0 - cv).ln();
    }
    Ok(loss / c.len() as f64)
}

/// Updates the function networks only; context parameters are untouched.
pub fn train_step_function(
    model: &mut ClusterNet,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    opt: &mut ClusterOptimizers,
) -> Result<f64> {
    let (loss, grads) = function_gradients(model, inputs, targets)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("function loss is {loss}")));
    }
    for ((cluster, g), state) in model
        .clusters_mut()
        .iter_mut()
        .zip(&grads)
        .zip(&mut opt.function)
    {
        state.step(&mut cluster.function_net, g)?;
    }
    Ok(loss)
}

/// Updates the context networks only; function parameters are untouched.
pub fn train_step_context(
    model: &mut ClusterNet,
    inputs: ArrayView2<f64>,
    labels: ArrayView2<f64>,
    opt: &mut ClusterOptimizers,
) -> Result<f64> {
    let (loss, grads) = context_gradients(model, inputs, labels)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("context loss is {loss}")));
    }
    for ((cluster, g), state) in model
        .clusters_mut()
        .iter_mut()
        .zip(&grads)
        .zip(&mut opt.context)
    {
        state.step(&mut cluster.context_net, g)?;
    }
    Ok(loss)
}

/// Shuffled minibatch index stream over `n` rows.
struct Batches {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl Batches {
    fn new(n: usize, batch: usize, seed: u64) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
            batch,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    /// Batches for one iteration.
    fn plan(&mut self, unit: IterationUnit) -> Vec<Vec<usize>> {
        match unit {
            IterationUnit::Epoch => {
                self.reshuffle();
                self.order
                    .chunks(self.batch)
                    .map(<[usize]>::to_vec)
                    .collect()
            }
            IterationUnit::Batch => {
                if self.pos >= self.order.len() {
                    self.reshuffle();
                }
                let end = (self.pos + self.batch).min(self.order.len());
                let b = self.order[self.pos..end].to_vec();
                self.pos = end;
                vec![b]
            }
        }
    }
}

fn mark_trained(net: &mut Mlp, seed: u64) {
    let mut lineage = net.lineage();
    lineage.train = Some(seed);
    net.set_lineage(lineage);
}

/// Alternates one function step and one context step per minibatch.
/// `labels[i]` is the subtask of training row `i`.
pub fn train(
    model: &mut ClusterNet,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    labels: &[usize],
    config: &TrainConfig,
) -> Result<LossTrace> {
    config.validate()?;
    let n = inputs.nrows();
    if targets.nrows() != n || labels.len() != n {
        return Err(Error::invalid(format!(
            "{n} input rows, {} target rows, {} labels",
            targets.nrows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&z| z >= model.q()) {
        return Err(Error::Config(format!(
            "label {bad} needs more than the model's {} clusters",
            model.q()
        )));
    }
    let mut trace = LossTrace::default();
    if config.iterations == 0 {
        return Ok(trace);
    }
    if n == 0 {
        return Err(Error::invalid("no training rows"));
    }
    let one_hot = one_hot_rows(labels, model.q());
    let mut opt = ClusterOptimizers::new(model.q(), config.learning_rate, config.optimizer)?;
    let mut batches = Batches::new(n, config.batch_size, config.seed);
    for iteration in 0..config.iterations {
        let (mut lf_sum, mut lc_sum, mut rows) = (0.0, 0.0, 0usize);
        for idx in batches.plan(config.iteration_unit) {
            let x = inputs.select(Axis(0), &idx);
            let y = targets.select(Axis(0), &idx);
            let p = one_hot.select(Axis(0), &idx);
            let diverged = |_| Error::Diverged { iteration };
            let lf = train_step_function(model, x.view(), y.view(), &mut opt).map_err(diverged)?;
            let lc = train_step_context(model, x.view(), p.view(), &mut opt).map_err(diverged)?;
            lf_sum += lf * idx.len() as f64;
            lc_sum += lc * idx.len() as f64;
            rows += idx.len();
        }
        trace.function.push(lf_sum / rows as f64);
        trace.context.push(lc_sum / rows as f64);
    }
    for cluster in model.clusters_mut() {
        mark_trained(&mut cluster.function_net, config.seed);
        mark_trained(&mut cluster.context_net, config.seed);
    }
    Ok(trace)
}

/// Minibatch MSE descent for a single network; returns per-iteration loss.
pub fn train_fcn(
    net: &mut Mlp,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let n = inputs.nrows();
    if targets.nrows() != n || targets.ncols() != net.output_width() {
        return Err(Error::invalid(format!(
            "targets {:?} do not match {n} rows x {} outputs",
            targets.dim(),
            net.output_width()
        )));
    }
    let mut trace = Vec::with_capacity(config.iterations);
    if config.iterations == 0 {
        return Ok(trace);
    }
    if n == 0 {
        return Err(Error::invalid("no training rows"));
    }
    let mut opt = config.optimizer()?;
    let mut batches = Batches::new(n, config.batch_size, config.seed);
    for iteration in 0..config.iterations {
        let (mut sum, mut rows) = (0.0, 0usize);
        for idx in batches.plan(config.iteration_unit) {
            let x = inputs.select(Axis(0), &idx);
            let y = targets.select(Axis(0), &idx);
            let cache = net.forward_cached(x.view())?;
            let diff = cache.output() - &y;
            let count = diff.len() as f64;
            let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
            if !loss.is_finite() {
                return Err(Error::Diverged { iteration });
            }
            let grads = net.backward_cached(&cache, (diff * (2.0 / count)).view())?;
            opt.step(net, &grads)
                .map_err(|_| Error::Diverged { iteration })?;
            sum += loss * idx.len() as f64;
            rows += idx.len();
        }
        trace.push(sum / rows as f64);
    }
    mark_trained(net, config.seed);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusternet::ClusterArchitecture;
    use crate::nn::fd_gradient;
    use ndarray::Array2;
    use rand::Rng;

    fn setup(q: usize, n: usize) -> (ClusterNet, Array2<f64>, Array2<f64>, Vec<usize>) {
        let arch = ClusterArchitecture {
            input_width: 3,
            output_width: 2,
            clusters: q,
            function_hidden: vec![4],
            context_hidden: vec![3],
        };
        let model = ClusterNet::new(&arch, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));
        let y = Array2::from_shape_fn((n, 2), |_| rng.gen_range(-1.0..1.0));
        let labels = (0..n).map(|i| i % q).collect();
        (model, x, y, labels)
    }

    #[test]
    fn function_gradient_matches_finite_differences() {
        let (model, x, y, _) = setup(3, 7);
        let (loss, grads) = function_gradients(&model, x.view(), y.view()).unwrap();
        assert!((loss - function_loss(&model, x.view(), y.view()).unwrap()).abs() < 1e-14);
        for j in 0..model.q() {
            let fd = fd_gradient(
                |net| {
                    let mut m = model.clone();
                    m.clusters_mut()[j].function_net = net.clone();
                    function_loss(&m, x.view(), y.view())
                },
                &model.clusters()[j].function_net,
                1e-6,
            )
            .unwrap();
            assert!(grads[j].max_relative_error(&fd, 1e-8) < 1e-5);
        }
    }

    #[test]
    fn context_gradient_matches_finite_differences() {
        let (model, x, _, labels) = setup(3, 7);
        let p = one_hot_rows(&labels, 3);
        let (loss, grads) = context_gradients(&model, x.view(), p.view()).unwrap();
        assert!((loss - context_loss(&model, x.view(), p.view()).unwrap()).abs() < 1e-14);
        for j in 0..model.q() {
            let fd = fd_gradient(
                |net| {
                    let mut m = model.clone();
                    m.clusters_mut()[j].context_net = net.clone();
                    context_loss(&m, x.view(), p.view())
                },
                &model.clusters()[j].context_net,
                1e-6,
            )
            .unwrap();
            assert!(grads[j].max_relative_error(&fd, 1e-8) < 1e-5);
        }
    }

    #[test]
    fn steps_touch_only_their_networks() {
        let (mut model, x, y, labels) = setup(2, 6);
        let p = one_hot_rows(&labels, 2);
        let mut opt = ClusterOptimizers::new(2, 0.1, OptimizerKind::Sgd).unwrap();
        let before = model.clone();
        train_step_function(&mut model, x.view(), y.view(), &mut opt).unwrap();
        for (a, b) in model.clusters().iter().zip(before.clusters()) {
            assert_eq!(a.context_net, b.context_net);
            assert_ne!(a.function_net, b.function_net);
        }
        let mid = model.clone();
        train_step_context(&mut model, x.view(), p.view(), &mut opt).unwrap();
        for (a, b) in model.clusters().iter().zip(mid.clusters()) {
            assert_eq!(a.function_net, b.function_net);
            assert_ne!(a.context_net, b.context_net);
        }
    }

    #[test]
    fn zero_iterations_leave_model_unchanged() {
        let (mut model, x, y, labels) = setup(2, 10);
        let before = model.clone();
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let trace = train(&mut model, x.view(), y.view(), &labels, &cfg).unwrap();
        assert!(trace.is_empty());
        assert_eq!(model, before);
    }

    #[test]
    fn training_is_deterministic_and_descends() {
        let (model, x, y, labels) = setup(2, 40);
        let cfg = TrainConfig {
            learning_rate: 0.05,
            batch_size: 8,
            iterations: 30,
            optimizer: OptimizerKind::Sgd,
            ..TrainConfig::default()
        };
        let mut a = model.clone();
        let mut b = model.clone();
        let ta = train(&mut a, x.view(), y.view(), &labels, &cfg).unwrap();
        let tb = train(&mut b, x.view(), y.view(), &labels, &cfg).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a, b);
        assert_eq!(ta.len(), 30);
        assert!(ta.context.last().unwrap() < &ta.context[0]);
        assert!(ta.function.last().unwrap() < &ta.function[0]);
    }

    #[test]
    fn batch_unit_records_one_loss_per_batch() {
        let (mut model, x, y, labels) = setup(2, 20);
        let cfg = TrainConfig {
            batch_size: 6,
            iterations: 7,
            iteration_unit: IterationUnit::Batch,
            ..TrainConfig::default()
        };
        let trace = train(&mut model, x.view(), y.view(), &labels, &cfg).unwrap();
        assert_eq!(trace.len(), 7);
    }

    #[test]
    fn divergence_reports_iteration() {
        let (mut model, x, mut y, labels) = setup(2, 8);
        y[[0, 0]] = f64::NAN;
        let cfg = TrainConfig {
            iterations: 3,
            ..TrainConfig::default()
        };
        match train(&mut model, x.view(), y.view(), &labels, &cfg).unwrap_err() {
            Error::Diverged { iteration } => assert_eq!(iteration, 0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn label_beyond_q_is_config_error() {
        let (mut model, x, y, mut labels) = setup(2, 8);
        labels[3] = 2;
        let err = train(
            &mut model,
            x.view(),
            y.view(),
            &labels,
            &TrainConfig::default(),
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn loss_trace_csv() {
        let trace = LossTrace {
            function: vec![0.5, 0.25],
            context: vec![0.7, 0.6],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iteration,loss_function,loss_context\n0,0.5,0.7\n1,0.25,0.6\n"
        );
    }

    #[test]
    fn fcn_trainer_descends() {
        let (_, x, y, _) = setup(1, 32);
        let mut net = Mlp::new(
            &[3, 8, 2],
            crate::nn::HiddenActivation::Tanh,
            crate::nn::OutputActivation::Identity,
            1,
        )
        .unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.01,
            batch_size: 8,
            iterations: 50,
            ..TrainConfig::default()
        };
        let trace = train_fcn(&mut net, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(trace.len(), 50);
        assert!(trace[49] < trace[0]);
        assert_eq!(net.lineage().train, Some(0));
    }
}
