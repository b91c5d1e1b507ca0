//! Loss computation, Adagrad updates, the mini-batch training loop with
//! early stopping, and the finite-difference gradient checker.
//!
//! The objective per example is cross-entropy plus an L2 penalty with
//! per-group coefficients. The training loop accumulates cross-entropy
//! gradients example by example and adds the batch's L2 share in one pass
//! (`batch_size * lambda * theta`), which is exactly the sum of the
//! per-example gradients but does not touch the full embedding table once
//! per sentence.

use alloc::vec::Vec;

use crate::network::{L2Coeffs, Mode, Network, ParamGroup, ParameterStore};
use crate::numerics::{math, Mat, Rng};
use crate::{invalid_arg, Error, Result};

/// One encoded training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub words: Vec<usize>,
    pub label: usize,
}

impl Example {
    pub fn new(words: Vec<usize>, label: usize) -> Example {
        Example { words, label }
    }
}

/// Optimizer and loop hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adagrad_epsilon: f64,
    pub l2: L2Coeffs,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a dev-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.05,
            adagrad_epsilon: 1e-6,
            l2: L2Coeffs::uniform(1e-4),
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(invalid_arg!("learning rate must be > 0"));
        }
        if !(self.adagrad_epsilon > 0.0) {
            return Err(invalid_arg!("Adagrad epsilon must be > 0"));
        }
        self.l2.validate()?;
        if self.batch_size == 0 {
            return Err(invalid_arg!("batch size must be >= 1"));
        }
        if self.max_epochs == 0 {
            return Err(invalid_arg!("max epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Per-example objective: `-log p(label) + sum_g (lambda_g/2) ||theta_g||^2`.
pub fn loss(
    log_probs: &[f64],
    label: usize,
    store: &ParameterStore,
    l2: &L2Coeffs,
) -> Result<f64> {
    if label >= log_probs.len() {
        return Err(invalid_arg!(
            "label {label} outside {} classes",
            log_probs.len()
        ));
    }
    Ok(-log_probs[label] + store.l2_penalty(l2))
}

/// Per-parameter accumulators of squared gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    accum: Vec<Mat>,
}

impl AdagradState {
    pub fn new(store: &ParameterStore) -> AdagradState {
        AdagradState {
            accum: store
                .params()
                .iter()
                .map(|p| Mat::zeros(p.value.rows(), p.value.cols()))
                .collect(),
        }
    }

    pub fn accumulators(&self) -> &[Mat] {
        &self.accum
    }
}

/// One Adagrad update: `acc += g^2; theta -= lr * g / (sqrt(acc) + eps)`.
/// Gradient buffers are zeroed afterwards.
pub fn adagrad_step(
    store: &mut ParameterStore,
    state: &mut AdagradState,
    cfg: &TrainConfig,
) -> Result<()> {
    if state.accum.len() != store.params().len() {
        return Err(invalid_arg!("Adagrad state does not match the store"));
    }
    for (p, acc) in store.params_mut().iter_mut().zip(&mut state.accum) {
        let grads = p.grad.as_mut_slice();
        let values = p.value.as_mut_slice();
        for ((v, g), a) in values.iter_mut().zip(grads.iter()).zip(acc.as_mut_slice()) {
            *a += g * g;
            *v -= cfg.learning_rate * g / (math::sqrt(*a) + cfg.adagrad_epsilon);
        }
        p.grad.fill(0.0);
    }
    Ok(())
}

/// One row of the per-epoch metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub dev_loss: f64,
    pub dev_acc: f64,
}

/// Hooks the training loop calls as it goes; the CLI uses them to stream the
/// metrics log and write checkpoints on dev improvements.
pub trait TrainObserver {
    fn on_epoch(&mut self, _metrics: &EpochMetrics) -> Result<()> {
        Ok(())
    }

    fn on_improvement(
        &mut self,
        _epoch: usize,
        _dev_acc: f64,
        _store: &ParameterStore,
    ) -> Result<()> {
        Ok(())
    }
}

/// No-op observer.
impl TrainObserver for () {}

/// Result of a training run: the parameters of the best dev-accuracy epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: ParameterStore,
    pub best_epoch: usize,
    pub best_dev_acc: f64,
    pub metrics: Vec<EpochMetrics>,
}

/// Mean per-example loss and accuracy of `set` under the current parameters.
pub fn evaluate(
    net: &Network,
    store: &ParameterStore,
    set: &[Example],
    l2: &L2Coeffs,
) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(invalid_arg!("cannot evaluate an empty split"));
    }
    let mut ce_sum = 0.0;
    let mut correct = 0usize;
    for ex in set {
        let trace = net.forward(store, &ex.words, Mode::Infer, None)?;
        ce_sum += loss(&trace.log_probs, ex.label, store, &L2Coeffs::zero())?;
        if trace.predicted_class() == ex.label {
            correct += 1;
        }
    }
    let mean_loss = ce_sum / set.len() as f64 + store.l2_penalty(l2);
    Ok((mean_loss, correct as f64 / set.len() as f64))
}

/// Mini-batch training with per-epoch shuffling, Adagrad updates and early
/// stopping on dev accuracy. Returns the parameters of the best epoch; the
/// store passed in is left at the final epoch's state.
pub fn train(
    net: &Network,
    store: &mut ParameterStore,
    train_set: &[Example],
    dev_set: &[Example],
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(invalid_arg!("training split is empty"));
    }
    if dev_set.is_empty() {
        return Err(invalid_arg!("development split is empty"));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut state = AdagradState::new(store);
    store.zero_grads();

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut metrics = Vec::new();
    let mut best: Option<(usize, f64, ParameterStore)> = None;

    for epoch in 0..cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            for &i in batch {
                let ex = &train_set[i];
                let trace = net.forward(store, &ex.words, Mode::Train, Some(&mut rng))?;
                loss_sum += loss(&trace.log_probs, ex.label, store, &L2Coeffs::zero())?;
                if trace.predicted_class() == ex.label {
                    correct += 1;
                }
                net.backward(store, &trace, ex.label)?;
            }
            // L2 share of the whole batch in one pass.
            store.add_l2_grads(&cfg.l2, batch.len() as f64);
            loss_sum += batch.len() as f64 * store.l2_penalty(&cfg.l2);
            adagrad_step(store, &mut state, cfg)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numeric(alloc::format!(
                "training loss became non-finite in epoch {epoch}"
            )));
        }
        let train_acc = correct as f64 / train_set.len() as f64;
        let (dev_loss, dev_acc) = evaluate(net, store, dev_set, &cfg.l2)?;
        let m = EpochMetrics {
            epoch,
            train_loss,
            train_acc,
            dev_loss,
            dev_acc,
        };
        observer.on_epoch(&m)?;
        metrics.push(m);

        let improved = best.as_ref().is_none_or(|(_, acc, _)| dev_acc > *acc);
        if improved {
            best = Some((epoch, dev_acc, store.clone()));
            observer.on_improvement(epoch, dev_acc, store)?;
        } else if let Some((best_epoch, _, _)) = &best {
            if epoch - best_epoch >= cfg.patience {
                break;
            }
        }
    }
    let (best_epoch, best_dev_acc, best_store) = best.expect("max_epochs >= 1");
    Ok(TrainOutcome {
        best: best_store,
        best_epoch,
        best_dev_acc,
        metrics,
    })
}

/// Settings for [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Arrays larger than this are subsampled instead of fully checked.
    pub subsample_threshold: usize,
    /// Entries checked per subsampled array.
    pub samples_per_array: usize,
    pub seed: u64,
    /// Verification hook: offset added to every analytic gradient, so tests
    /// can prove the checker flags a broken backward pass. Zero in real use.
    pub corrupt_analytic: f64,
}

impl Default for GradCheckConfig {
    fn default() -> GradCheckConfig {
        GradCheckConfig {
            step: 1e-5,
            subsample_threshold: 5000,
            samples_per_array: 200,
            seed: 7,
            corrupt_analytic: 0.0,
        }
    }
}

/// Worst relative error per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: ParamGroup,
    pub max_rel_error: f64,
    pub entries_checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error() < tolerance
    }
}

// |a - n| / (|a| + |n| + 1e-4). The additive floor keeps finite-difference
// noise on true-zero gradients (~1e-11) from registering as error while a
// genuinely wrong gradient at any useful magnitude still fails.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    math::abs(analytic - numeric) / (math::abs(analytic) + math::abs(numeric) + 1e-4)
}

/// Central-difference check of the full backward pass on one example.
///
/// Dropout must be disabled in the network spec: the loss has to be a
/// deterministic function of the parameters.
pub fn grad_check(
    net: &Network,
    store: &mut ParameterStore,
    example: &Example,
    l2: &L2Coeffs,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if net.spec().dropout != 0.0 {
        return Err(invalid_arg!("gradient checking requires dropout 0"));
    }
    if !(cfg.step > 0.0) {
        return Err(invalid_arg!("step must be > 0"));
    }

    // Analytic gradients: cross-entropy backward plus the full L2 share.
    store.zero_grads();
    let trace = net.forward(store, &example.words, Mode::Train, None)?;
    net.backward(store, &trace, example.label)?;
    store.add_l2_grads(l2, 1.0);
    let analytic: Vec<Mat> = store.params().iter().map(|p| p.grad.clone()).collect();
    store.zero_grads();

    let mut rng = Rng::new(cfg.seed);
    let mut groups: Vec<GroupReport> = Vec::new();
    for idx in 0..store.params().len() {
        let len = store.get(idx).value.len();
        let entries: Vec<usize> = if len > cfg.subsample_threshold {
            let mut chosen = alloc::collections::BTreeSet::new();
            while chosen.len() < cfg.samples_per_array.min(len) {
                chosen.insert(rng.below(len));
            }
            chosen.into_iter().collect()
        } else {
            (0..len).collect()
        };
        let group = store.get(idx).group;
        let mut worst = 0.0f64;
        for &e in &entries {
            let original = store.get(idx).value.as_slice()[e];
            store.get_mut(idx).value.as_mut_slice()[e] = original + cfg.step;
            let plus = point_loss(net, store, example, l2)?;
            store.get_mut(idx).value.as_mut_slice()[e] = original - cfg.step;
            let minus = point_loss(net, store, example, l2)?;
            store.get_mut(idx).value.as_mut_slice()[e] = original;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic[idx].as_slice()[e] + cfg.corrupt_analytic;
            worst = worst.max(relative_error(a, numeric));
        }
        match groups.iter_mut().find(|g| g.group == group) {
            Some(g) => {
                g.max_rel_error = g.max_rel_error.max(worst);
                g.entries_checked += entries.len();
            }
            None => groups.push(GroupReport {
                group,
                max_rel_error: worst,
                entries_checked: entries.len(),
            }),
        }
    }
    Ok(GradCheckReport { groups })
}

fn point_loss(
    net: &Network,
    store: &ParameterStore,
    example: &Example,
    l2: &L2Coeffs,
) -> Result<f64> {
    let trace = net.forward(store, &example.words, Mode::Infer, None)?;
    loss(&trace.log_probs, example.label, store, l2)
}
