//! Cross-entropy training with analytic gradients and Adam.

mod adam;
mod hyper;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use hyper::{default_hyper, Hyper, HyperTable, P_GRID};

use crate::bayes::{self, BayesTape};
use crate::data::{EncodedSample, PreparedDataset};
use crate::linalg::{CMatrix, HermitianParam};
use crate::network::dense::{self, Tape};
use crate::network::{AncillaScheme, Compiled, Network, NetworkTopology, Prediction};
use crate::{Error, Result};

/// Probability floor inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln max(P(label), 1e-12)`.
pub fn cross_entropy(pred: &Prediction, label: u8) -> f64 {
    -pred.probs[label as usize].max(PROB_FLOOR).ln()
}

/// Mean loss and per-node gradients with respect to the packed generators.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGradient {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
}

/// Per-node unitary cotangents summed over a range of samples.
enum Partial {
    Dense { loss: f64, acc: Vec<CMatrix> },
    Classical { loss: f64, acc: Vec<Vec<f64>> },
}

impl Partial {
    fn merge(self, other: Partial) -> Partial {
        match (self, other) {
            (Partial::Dense { loss: l1, acc: mut a }, Partial::Dense { loss: l2, acc: b }) => {
                for (x, y) in a.iter_mut().zip(&b) {
                    x.add_assign(y);
                }
                Partial::Dense { loss: l1 + l2, acc: a }
            }
            (Partial::Classical { loss: l1, acc: mut a }, Partial::Classical { loss: l2, acc: b }) => {
                for (x, y) in a.iter_mut().zip(&b) {
                    for (xv, yv) in x.iter_mut().zip(y) {
                        *xv += yv;
                    }
                }
                Partial::Classical { loss: l1 + l2, acc: a }
            }
            _ => unreachable!("one route per batch"),
        }
    }
}

/// Samples summed sequentially below this size.
const LEAF: usize = 8;

fn leaf(c: &Compiled, samples: &[EncodedSample], classical: bool) -> Result<Partial> {
    let net = c.network();
    let (topo, plan) = (net.topology(), net.plan());
    if classical {
        let mut acc: Vec<Vec<f64>> = c.stochastic.iter().map(|s| vec![0.0; s.rows() * s.cols()]).collect();
        let mut loss = 0.0;
        for s in samples {
            let mut tape = BayesTape::new();
            let probs = bayes::forward(topo, plan, &c.stochastic, &s.features, Some(&mut tape))?;
            loss += cross_entropy(&Prediction::from_probs(probs), s.label);
            bayes::backward(plan, &c.stochastic, tape, s.label, &mut acc);
        }
        Ok(Partial::Classical { loss, acc })
    } else {
        let mut acc: Vec<CMatrix> = c.unitaries.iter().map(|u| CMatrix::zeros(u.dim())).collect();
        let mut loss = 0.0;
        for s in samples {
            let mut tape = Tape::default();
            let probs = dense::forward(topo, plan, &c.unitaries, &s.features, Some(&mut tape))?;
            loss += cross_entropy(&Prediction::from_probs(probs), s.label);
            dense::backward(topo, plan, &c.unitaries, tape, s.label, &mut acc);
        }
        Ok(Partial::Dense { loss, acc })
    }
}

/// Pairwise reduction with split points fixed by the batch length, so the
/// summation order does not depend on the thread count.
fn reduce(c: &Compiled, samples: &[EncodedSample], classical: bool) -> Result<Partial> {
    if samples.len() <= LEAF {
        return leaf(c, samples, classical);
    }
    let (a, b) = samples.split_at(samples.len() / 2);
    let (ra, rb) = rayon::join(|| reduce(c, a, classical), || reduce(c, b, classical));
    Ok(ra?.merge(rb?))
}

/// Gradients of the mean cross-entropy over `batch`.
///
/// Fully dephased networks use the classical route; the cotangent of each
/// stochastic matrix is mapped onto its unitary and then onto `H` exactly
/// as on the density-matrix route.
pub fn gradients_compiled(c: &Compiled, batch: &[EncodedSample]) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let net = c.network();
    let classical = net.topology().is_classical();
    let n = batch.len() as f64;
    let (loss, a_mats): (f64, Vec<CMatrix>) = match reduce(c, batch, classical)? {
        Partial::Dense { loss, acc } => (loss, acc),
        Partial::Classical { loss, acc } => {
            let mats = net
                .topology()
                .nodes
                .iter()
                .zip(&c.unitaries)
                .zip(&acc)
                .map(|((node, u), gs)| bayes::stochastic_to_unitary_cotangent(u, node.kept, gs))
                .collect();
            (loss, mats)
        }
    };
    let inv = crate::linalg::C64::new(1.0 / n, 0.0);
    let grads = c
        .factors
        .iter()
        .zip(&a_mats)
        .map(|(f, a)| HermitianParam::packed_gradient(&f.pullback(&a.scale(inv))))
        .collect();
    Ok(BatchGradient { loss: loss / n, grads })
}

pub fn gradients(net: &Network, batch: &[EncodedSample]) -> Result<BatchGradient> {
    gradients_compiled(&net.compile()?, batch)
}

/// Mean cross-entropy over `samples` on the density-matrix route.
pub fn mean_loss(net: &Network, samples: &[EncodedSample]) -> Result<f64> {
    let c = net.compile()?;
    let mut total = 0.0;
    for s in samples {
        total += cross_entropy(&c.forward(s)?, s.label);
    }
    Ok(total / samples.len() as f64)
}

/// `|g - g_fd| / |g_fd|` over all packed coordinates, with `g_fd` from
/// central differences of [`mean_loss`] at step `h`.
pub fn finite_difference_error(net: &Network, batch: &[EncodedSample], h: f64) -> Result<f64> {
    let analytic = gradients(net, batch)?;
    let mut probe = net.clone();
    let (mut diff, mut norm) = (0.0, 0.0);
    for (node, g) in analytic.grads.iter().enumerate() {
        for (i, ga) in g.iter().enumerate() {
            let x = probe.params()[node].packed()[i];
            probe.params_mut()[node].packed_mut()[i] = x + h;
            let up = mean_loss(&probe, batch)?;
            probe.params_mut()[node].packed_mut()[i] = x - h;
            let down = mean_loss(&probe, batch)?;
            probe.params_mut()[node].packed_mut()[i] = x;
            let fd = (up - down) / (2.0 * h);
            diff += (ga - fd).powi(2);
            norm += fd * fd;
        }
    }
    Ok(diff.sqrt() / norm.sqrt().max(1e-300))
}

pub const SELF_TEST_TOL: f64 = 1e-5;

/// Gradient check on small TTN (k = 0, 1) and MERA networks with random
/// parameters, data and rate. Returns the worst relative error.
pub fn gradient_self_test(seed: u64) -> Result<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for topo in [
        NetworkTopology::ttn(4, 0, AncillaScheme::PerQubit)?,
        NetworkTopology::ttn(4, 1, AncillaScheme::PerQubit)?,
        NetworkTopology::mera(8, 0)?,
    ] {
        let m = topo.m;
        let mut net = Network::new(topo)?;
        init_params(&mut net, 0.5, rng.random())?;
        net.set_dephasing(rng.random())?;
        let batch: Vec<EncodedSample> = (0..3)
            .map(|i| EncodedSample::new((0..m).map(|_| rng.random()).collect(), (i % 2) as u8))
            .collect::<Result<_>>()?;
        worst = worst.max(finite_difference_error(&net, &batch, 1e-5)?);
    }
    if worst < SELF_TEST_TOL {
        Ok(worst)
    } else {
        Err(Error::GradientCheck(worst))
    }
}

/// Draws every real degree of freedom of every generator from `N(0, std^2)`.
pub fn init_params(net: &mut Network, std: f64, seed: u64) -> Result<()> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::Config(format!("init std must be positive, got {std}")));
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for h in net.params_mut() {
        for x in h.packed_mut() {
            *x = normal.sample(&mut rng);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub init_std: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub p: f64,
    pub dephase_data_layer: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            init_std: 0.05,
            batch_size: 250,
            epochs: 30,
            seed: 0,
            p: 0.0,
            dephase_data_layer: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.learning_rate) || !positive(self.init_std) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("learning rate, init std, batch size and epochs must be positive".into()));
        }
        crate::channels::check_rate(self.p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub epochs: Vec<EpochStats>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    pub wall_seconds: f64,
}

pub fn train(net: &mut Network, data: &PreparedDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with(net, data, cfg, |_| {})
}

/// Trains from a fresh seeded initialization and leaves `net` at the epoch
/// with the best validation accuracy.
pub fn train_with(
    net: &mut Network,
    data: &PreparedDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::InvalidDataset("empty training split".into()));
    }
    let start = Instant::now();
    net.set_dephasing(cfg.p)?;
    net.set_data_dephasing(cfg.dephase_data_layer);
    init_params(net, cfg.init_std, cfg.seed)?;

    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    batch_rng.set_stream(1);
    let mut adam = Adam::for_params(cfg.learning_rate, net.params());
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut best: Option<(usize, f64, Vec<HermitianParam>)> = None;
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut batch_rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<EncodedSample> = chunk.iter().map(|&i| data.train[i].clone()).collect();
            let g = net.compile().and_then(|c| gradients_compiled(&c, &batch)).map_err(|e| match e {
                Error::Eigensolver => Error::Diverged { epoch },
                e => e,
            })?;
            if !g.loss.is_finite() || g.grads.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += g.loss * batch.len() as f64;
            seen += batch.len();
            adam.step(net.params_mut(), &g.grads)?;
        }
        let val_accuracy = net.compile()?.accuracy(&data.validation)?;
        let stats = EpochStats { epoch, train_loss: loss_sum / seen as f64, val_accuracy };
        on_epoch(&stats);
        if best.as_ref().is_none_or(|b| val_accuracy > b.1) {
            best = Some((epoch, val_accuracy, net.params().to_vec()));
        }
        epochs.push(stats);
    }
    let (best_epoch, best_val_accuracy, params) = best.expect("at least one epoch");
    net.set_params(params)?;
    let test_accuracy = net.compile()?.accuracy(&data.test)?;
    Ok(TrainReport {
        config: cfg.clone(),
        epochs,
        best_epoch,
        best_val_accuracy,
        test_accuracy,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn loss_examples() {
        assert_eq!(cross_entropy(&Prediction::from_probs([1.0, 0.0]), 0), 0.0);
        assert!((cross_entropy(&Prediction::from_probs([0.5, 0.5]), 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((cross_entropy(&Prediction::from_probs([1.0, 0.0]), 1) - 12.0 * std::f64::consts::LN_10).abs() < 1e-9);
    }

    #[test]
    fn init_is_seeded() {
        let topo = NetworkTopology::ttn(8, 1, AncillaScheme::PerQubit).unwrap();
        let mut a = Network::new(topo.clone()).unwrap();
        let mut b = Network::new(topo).unwrap();
        init_params(&mut a, 0.05, 42).unwrap();
        init_params(&mut b, 0.05, 42).unwrap();
        assert_eq!(a.params(), b.params());
        init_params(&mut b, 0.05, 43).unwrap();
        assert_ne!(a.params(), b.params());
        let all: Vec<f64> = a.params().iter().flat_map(|h| h.packed().to_vec()).collect();
        let var = all.iter().map(|x| x * x).sum::<f64>() / all.len() as f64;
        assert!((var.sqrt() - 0.05).abs() < 0.005);
        assert!(init_params(&mut a, 0.0, 1).is_err());
    }

    fn toy_data(m: usize, n: usize, seed: u64) -> Vec<EncodedSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let f: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                let label = u8::from(f[0] + f[m - 1] > 1.0);
                EncodedSample::new(f, label).unwrap()
            })
            .collect()
    }

    #[test]
    fn global_phase_direction_has_zero_gradient() {
        let mut net = Network::new(NetworkTopology::ttn(4, 1, AncillaScheme::PerQubit).unwrap()).unwrap();
        init_params(&mut net, 0.5, 1).unwrap();
        net.set_dephasing(0.3).unwrap();
        let g = gradients(&net, &toy_data(4, 6, 2)).unwrap();
        for (node, grad) in net.topology().nodes.iter().zip(&g.grads) {
            let trace_dir: f64 = grad[..node.dim()].iter().sum();
            assert!(trace_dir.abs() < 1e-10, "{trace_dir}");
        }
    }

    #[test]
    fn reduction_is_thread_count_independent() {
        let mut net = Network::new(NetworkTopology::ttn(8, 1, AncillaScheme::PerQubit).unwrap()).unwrap();
        init_params(&mut net, 0.3, 3).unwrap();
        net.set_dephasing(0.2).unwrap();
        let batch = toy_data(8, 37, 4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| gradients(&net, &batch)).unwrap();
        let b = three.install(|| gradients(&net, &batch)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn self_test_passes() {
        assert!(gradient_self_test(7).unwrap() < SELF_TEST_TOL);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let topo = NetworkTopology::ttn(4, 0, AncillaScheme::PerQubit).unwrap();
        let mut net = Network::new(topo).unwrap();
        init_params(&mut net, 0.3, 5).unwrap();
        let val = toy_data(4, 40, 6);
        let before = net.compile().unwrap().accuracy(&val).unwrap();
        let g = gradients(&net, &toy_data(4, 20, 7)).unwrap();
        let mut adam = Adam::for_params(1e-300, net.params());
        let snapshot = net.params().to_vec();
        adam.step(net.params_mut(), &g.grads).unwrap();
        assert_eq!(net.compile().unwrap().accuracy(&val).unwrap(), before);
        for (a, b) in snapshot.iter().zip(net.params()) {
            for (x, y) in a.packed().iter().zip(b.packed()) {
                assert!((x - y).abs() < 1e-290);
            }
        }
    }

    #[test]
    fn training_learns_toy_task_deterministically() {
        let data = PreparedDataset {
            feature_count: 4,
            train: toy_data(4, 400, 8),
            validation: toy_data(4, 100, 9),
            test: toy_data(4, 100, 10),
        };
        let cfg = TrainConfig {
            learning_rate: 0.05,
            init_std: 0.1,
            batch_size: 50,
            epochs: 8,
            seed: 11,
            ..TrainConfig::default()
        };
        let topo = NetworkTopology::ttn(4, 0, AncillaScheme::PerQubit).unwrap();
        let mut a = Network::new(topo.clone()).unwrap();
        let ra = train(&mut a, &data, &cfg).unwrap();
        assert!(ra.test_accuracy > 0.75, "{}", ra.test_accuracy);
        assert!(ra.epochs.iter().all(|e| (0.0..=1.0).contains(&e.val_accuracy)));
        let mut b = Network::new(topo).unwrap();
        let rb = train(&mut b, &data, &cfg).unwrap();
        assert_eq!(ra.test_accuracy, rb.test_accuracy);
        assert_eq!(a.params(), b.params());
        let json = serde_json::to_string(&ra).unwrap();
        let back: TrainReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.epochs, ra.epochs);
    }

    #[test]
    fn divergence_is_reported() {
        let data = PreparedDataset { feature_count: 4, train: toy_data(4, 20, 1), validation: vec![], test: vec![] };
        let cfg =
            TrainConfig { learning_rate: f64::MAX, init_std: 0.1, batch_size: 10, epochs: 3, ..TrainConfig::default() };
        let mut net = Network::new(NetworkTopology::ttn(4, 0, AncillaScheme::PerQubit).unwrap()).unwrap();
        assert!(matches!(train(&mut net, &data, &cfg), Err(Error::Diverged { .. })));
    }
}
