//! TTN and MERA classifiers: topology, evaluation plan, forward pass.

mod checkpoint;
pub(crate) mod dense;
mod schedule;
mod topology;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub(crate) use dense::check_features;
pub use schedule::{live_wire_schedule, Plan, Step, DEFAULT_WIDTH_CAP};
pub use topology::{AncillaScheme, ModelKind, NetworkTopology, NodeKind, NodeShape, UnitaryNode, WireInit};

use crate::bayes::{self, StochasticNode};
use crate::data::EncodedSample;
use crate::linalg::{CMatrix, ExpmFactors, HermitianParam, UnitaryMatrix};
use crate::{Error, Result};

/// Readout distribution `(P(l=0), P(l=1))` and its argmax.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: [f64; 2],
    pub predicted_class: u8,
}

impl Prediction {
    pub fn from_probs(probs: [f64; 2]) -> Self {
        Self { probs, predicted_class: u8::from(probs[1] > probs[0]) }
    }
}

/// A topology with one Hermitian generator per node (`U = exp(iH)`).
#[derive(Clone, Debug)]
pub struct Network {
    topology: NetworkTopology,
    params: Vec<HermitianParam>,
    plan: Plan,
}

impl Network {
    /// All generators zero, so every node is the identity.
    pub fn new(topology: NetworkTopology) -> Result<Self> {
        Self::with_width_cap(topology, DEFAULT_WIDTH_CAP)
    }

    pub fn with_width_cap(topology: NetworkTopology, cap: usize) -> Result<Self> {
        topology.validate()?;
        let plan = live_wire_schedule(&topology, cap)?;
        let params = topology.nodes.iter().map(|n| HermitianParam::zeros(n.dim())).collect();
        Ok(Self { topology, params, plan })
    }

    pub fn with_params(topology: NetworkTopology, params: Vec<HermitianParam>) -> Result<Self> {
        let mut net = Self::new(topology)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn params(&self) -> &[HermitianParam] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [HermitianParam] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<HermitianParam>) -> Result<()> {
        if params.len() != self.topology.nodes.len() {
            return Err(Error::ParameterMismatch(format!(
                "{} generators for {} nodes",
                params.len(),
                self.topology.nodes.len()
            )));
        }
        for (i, (h, n)) in params.iter().zip(&self.topology.nodes).enumerate() {
            if h.dim() != n.dim() {
                return Err(Error::ParameterMismatch(format!("node {i}: dim {} expected {}", h.dim(), n.dim())));
            }
        }
        self.params = params;
        Ok(())
    }

    pub fn set_dephasing(&mut self, p: f64) -> Result<()> {
        crate::channels::check_rate(p)?;
        self.topology.p = p;
        Ok(())
    }

    pub fn set_data_dephasing(&mut self, on: bool) {
        self.topology.dephase_data_layer = on;
    }

    pub fn unitaries(&self) -> Result<Vec<UnitaryMatrix>> {
        self.params.iter().map(crate::linalg::hermitian_expm).collect()
    }

    /// Exponentiates every generator once for repeated evaluation.
    pub fn compile(&self) -> Result<Compiled<'_>> {
        let factors: Vec<ExpmFactors> = self.params.iter().map(ExpmFactors::new).collect::<Result<_>>()?;
        let unitaries: Vec<CMatrix> = factors.iter().map(|f| f.unitary.matrix().clone()).collect();
        let stochastic = bayes::stochastic_nodes(&self.topology, &unitaries);
        Ok(Compiled { net: self, factors, unitaries, stochastic })
    }

    /// Density-matrix forward pass.
    pub fn forward(&self, sample: &EncodedSample) -> Result<Prediction> {
        self.compile()?.forward(sample)
    }

    /// Forward pass on the cheapest exact route.
    pub fn predict(&self, sample: &EncodedSample) -> Result<Prediction> {
        self.compile()?.predict(sample)
    }
}

/// Which executor evaluates a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Classical when fully dephased, density matrices otherwise.
    Auto,
    Dense,
    /// Stochastic matrices; exact only for fully dephased networks.
    Classical,
}

/// A network with its unitaries and stochastic matrices precomputed.
pub struct Compiled<'a> {
    net: &'a Network,
    pub(crate) factors: Vec<ExpmFactors>,
    pub(crate) unitaries: Vec<CMatrix>,
    pub(crate) stochastic: Vec<StochasticNode>,
}

impl Compiled<'_> {
    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn stochastic(&self) -> &[StochasticNode] {
        &self.stochastic
    }

    pub fn forward(&self, sample: &EncodedSample) -> Result<Prediction> {
        let n = self.net;
        dense::forward(&n.topology, &n.plan, &self.unitaries, &sample.features, None).map(Prediction::from_probs)
    }

    pub fn bayes_forward(&self, sample: &EncodedSample) -> Result<Prediction> {
        let n = self.net;
        bayes::forward(&n.topology, &n.plan, &self.stochastic, &sample.features, None).map(Prediction::from_probs)
    }

    /// Classical route when the network is fully dephased, dense otherwise.
    pub fn predict(&self, sample: &EncodedSample) -> Result<Prediction> {
        if self.net.topology.is_classical() {
            self.bayes_forward(sample)
        } else {
            self.forward(sample)
        }
    }

    pub fn predict_with(&self, sample: &EncodedSample, route: Route) -> Result<Prediction> {
        match route {
            Route::Auto => self.predict(sample),
            Route::Dense => self.forward(sample),
            Route::Classical => self.bayes_forward(sample),
        }
    }

    pub fn predict_all(&self, samples: &[EncodedSample]) -> Result<Vec<Prediction>> {
        self.predict_all_with(samples, Route::Auto)
    }

    pub fn predict_all_with(&self, samples: &[EncodedSample], route: Route) -> Result<Vec<Prediction>> {
        samples.par_iter().map(|s| self.predict_with(s, route)).collect()
    }

    /// Fraction of samples classified correctly.
    pub fn accuracy(&self, samples: &[EncodedSample]) -> Result<f64> {
        self.accuracy_with(samples, Route::Auto)
    }

    pub fn accuracy_with(&self, samples: &[EncodedSample], route: Route) -> Result<f64> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let preds = self.predict_all_with(samples, route)?;
        let correct = preds.iter().zip(samples).filter(|(p, s)| p.predicted_class == s.label).count();
        Ok(correct as f64 / samples.len() as f64)
    }
}
