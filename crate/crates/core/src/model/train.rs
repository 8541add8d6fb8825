use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::bce_from_logit;
use super::{ModelError, NetworkWeights, PredictionDataset, Result};
use crate::eval::roc_auc;
use crate::eventlog::permutation;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub seed: u64,
    /// Weight each class by `n / (2 n_class)` in the loss.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 350,
            batch_size: 50,
            learning_rate: 5e-4,
            dropout: 0.5,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            seed: 0,
            class_weighting: false,
        }
    }
}

impl TrainConfig {
    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ModelError::Config(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return bad("rmsprop_decay must lie in (0, 1)");
        }
        if !(self.rmsprop_epsilon > 0.0) {
            return bad("rmsprop_epsilon must be positive");
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys not present
    /// keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, key, value) in
            crate::config::kv_pairs(text).map_err(|(line, reason)| ModelError::Parse {
                file: "config",
                line,
                reason,
            })?
        {
            if !cfg.set(&key, &value).map_err(|reason| ModelError::Parse {
                file: "config",
                line,
                reason,
            })? {
                return Err(ModelError::Parse {
                    file: "config",
                    line,
                    reason: format!("unknown key `{key}`"),
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field by name. `Ok(false)` when the key is not a training key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<bool, String> {
        fn num<V: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<V, String> {
            value
                .parse()
                .map_err(|_| format!("`{value}` is not a valid value for {key}"))
        }
        match key {
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "rmsprop_decay" => self.rmsprop_decay = num(key, value)?,
            "rmsprop_epsilon" => self.rmsprop_epsilon = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "class_weighting" => self.class_weighting = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "epochs = {}\nbatch_size = {}\nlearning_rate = {}\ndropout = {}\nrmsprop_decay = {}\nrmsprop_epsilon = {}\nseed = {}\nclass_weighting = {}\n",
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.dropout,
            self.rmsprop_decay,
            self.rmsprop_epsilon,
            self.seed,
            self.class_weighting
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 0 is the untrained initialization.
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_auc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub weights: NetworkWeights<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// One RMSprop step: `v ← ρv + (1−ρ)g²`, `θ ← θ − lr·g / (√v + ε)`.
pub(crate) fn rmsprop_step<T: Scalar>(
    weights: &mut NetworkWeights<T>,
    grad: &NetworkWeights<T>,
    accum: &mut NetworkWeights<T>,
    cfg: &TrainConfig,
) {
    let rho = T::lit(cfg.rmsprop_decay);
    let one_minus_rho = T::lit(1.0 - cfg.rmsprop_decay);
    let lr = T::lit(cfg.learning_rate);
    let eps = T::lit(cfg.rmsprop_epsilon);
    accum.zip_apply(grad, |v, g| *v = rho * *v + one_minus_rho * g * g);
    let mut step = grad.clone();
    step.zip_apply(accum, |g, v| *g = lr * *g / (v.sqrt() + eps));
    weights.zip_apply(&step, |w, s| *w -= s);
}

pub fn predict_proba<T: Scalar>(
    w: &NetworkWeights<T>,
    ds: &PredictionDataset<T>,
) -> Result<Vec<T>> {
    (0..ds.len())
        .map(|i| w.forward(ds.tss_row(i), ds.demo_row(i)))
        .collect()
}

fn mean_loss<T: Scalar>(w: &NetworkWeights<T>, ds: &PredictionDataset<T>) -> f64 {
    let total: f64 = (0..ds.len())
        .map(|i| {
            let cache = w.forward_cached::<ChaCha8Rng>(ds.tss_row(i), ds.demo_row(i), None);
            bce_from_logit(cache.logit, T::lit(f64::from(ds.labels()[i]))).as_f64()
        })
        .sum();
    total / ds.len().max(1) as f64
}

fn validation_auc<T: Scalar>(w: &NetworkWeights<T>, ds: &PredictionDataset<T>) -> Result<f64> {
    let scores = predict_proba(w, ds)?;
    roc_auc(&scores, ds.labels()).map_err(|_| ModelError::SingleClassValidation)
}

/// Mini-batch RMSprop on binary cross-entropy.
///
/// Rows are reshuffled every epoch with a seeded permutation; the last batch
/// of an epoch may be smaller. Validation AUC is recorded after every epoch
/// (and for the initialization as epoch 0) and the weights of the best epoch
/// are returned, the earliest one on ties.
pub fn train<T: Scalar>(
    train_set: &PredictionDataset<T>,
    validation: &PredictionDataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(ModelError::Empty("training"));
    }
    if validation.is_empty() {
        return Err(ModelError::Empty("validation"));
    }
    if validation.tss_width() != train_set.tss_width() {
        return Err(ModelError::Width {
            what: "validation timed state sample",
            expected: train_set.tss_width(),
            found: validation.tss_width(),
        });
    }

    let n = train_set.len();
    let positives = train_set.positives();
    let (w_neg, w_pos) = if cfg.class_weighting && positives > 0 && positives < n {
        (
            n as f64 / (2.0 * (n - positives) as f64),
            n as f64 / (2.0 * positives as f64),
        )
    } else {
        (1.0, 1.0)
    };

    let mut weights = NetworkWeights::<T>::init(train_set.tss_width(), cfg.seed);
    let mut accum = NetworkWeights::<T>::zeros(train_set.tss_width());
    let mut grad = NetworkWeights::<T>::zeros(train_set.tss_width());
    // separate streams so the shuffle does not depend on dropout draws
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));

    let mut best = (
        validation_auc(&weights, validation)?,
        0usize,
        weights.clone(),
    );
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: mean_loss(&weights, train_set),
        validation_auc: best.0,
    }];

    for epoch in 1..=cfg.epochs {
        let order = permutation(n, &mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (batch, rows) in order.chunks(cfg.batch_size).enumerate() {
            grad.fill(T::zero());
            let scale = T::lit(1.0 / rows.len() as f64);
            let mut batch_loss = 0.0;
            for &i in rows {
                let (tss, demo) = (train_set.tss_row(i), train_set.demo_row(i));
                let label = train_set.labels()[i];
                let y = T::lit(f64::from(label));
                let cw = if label == 1 { w_pos } else { w_neg };
                let cache =
                    weights.forward_cached(tss, demo, Some((cfg.dropout, &mut dropout_rng)));
                batch_loss += cw * bce_from_logit(cache.logit, y).as_f64();
                weights.backward(tss, demo, &cache, y, scale * T::lit(cw), &mut grad);
            }
            if !batch_loss.is_finite() {
                return Err(ModelError::NonFinite { epoch, batch });
            }
            loss_sum += batch_loss;
            rmsprop_step(&mut weights, &grad, &mut accum, cfg);
        }
        if !weights.is_finite() {
            return Err(ModelError::NonFinite {
                epoch,
                batch: n.div_ceil(cfg.batch_size) - 1,
            });
        }
        let auc = validation_auc(&weights, validation)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            validation_auc: auc,
        });
        if auc > best.0 {
            best = (auc, epoch, weights.clone());
        }
    }
    Ok(TrainOutcome {
        weights: best.2,
        history,
        best_epoch: best.1,
    })
}
