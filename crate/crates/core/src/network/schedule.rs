//! Static evaluation plan: which registers each node merges, in what order.

use super::topology::{NetworkTopology, WireInit};
use crate::{Error, Result};

pub const DEFAULT_WIDTH_CAP: usize = 12;

/// One node application.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub node: usize,
    /// Registers merged by Kronecker product, in this order.
    pub inputs: Vec<usize>,
    /// Whether each input register was produced by an earlier step, so its
    /// cotangent must be propagated.
    pub needs_grad: Vec<bool>,
    /// Qubit reordering of the merged register that brings the node's input
    /// wires to the front (new qubit `k` is old qubit `perm[k]`). `None` when
    /// the merged register already equals the node's inputs.
    pub perm: Option<Vec<usize>>,
    /// Qubits of the merged register.
    pub width: usize,
    /// Node qubits, leading the permuted register.
    pub node_qubits: usize,
    pub kept: usize,
    pub output: usize,
}

impl Step {
    pub fn rest_qubits(&self) -> usize {
        self.width - self.node_qubits
    }

    pub fn output_qubits(&self) -> usize {
        self.width - self.node_qubits + self.kept
    }
}

/// Precomputed evaluation order. Registers `0..wires` hold the initial
/// single-wire states; step `s` writes register `wires + s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub initial: Vec<WireInit>,
    pub steps: Vec<Step>,
    pub register_wires: Vec<Vec<usize>>,
    pub readout: usize,
    /// Largest merged register, in qubits.
    pub max_width: usize,
}

impl Plan {
    pub fn order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.node).collect()
    }
}

/// Greedy schedule: repeatedly apply the ready node whose merged register is
/// narrowest (ties to the lowest node index), tracing immediately.
pub fn live_wire_schedule(topo: &NetworkTopology, cap: usize) -> Result<Plan> {
    let n_wires = topo.wires.len();
    let nodes = &topo.nodes;

    // Node dependencies: the last earlier node that still holds each input wire.
    let mut holder: Vec<Option<usize>> = vec![None; n_wires];
    let mut deps: Vec<Vec<usize>> = Vec::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        let mut d: Vec<usize> = node.input_wires.iter().filter_map(|&w| holder[w]).collect();
        d.sort_unstable();
        d.dedup();
        deps.push(d);
        for &w in node.kept_wires() {
            holder[w] = Some(i);
        }
    }

    let mut register_wires: Vec<Vec<usize>> = (0..n_wires).map(|w| vec![w]).collect();
    let mut wire_reg: Vec<usize> = (0..n_wires).collect();
    let mut done = vec![false; nodes.len()];
    let mut steps = Vec::with_capacity(nodes.len());
    let mut max_width = 0;

    let merged_inputs = |wire_reg: &[usize], i: usize| -> Vec<usize> {
        let mut regs = Vec::new();
        for &w in &nodes[i].input_wires {
            let r = wire_reg[w];
            if !regs.contains(&r) {
                regs.push(r);
            }
        }
        regs
    };

    for _ in 0..nodes.len() {
        let mut best: Option<(usize, usize, Vec<usize>)> = None;
        for i in 0..nodes.len() {
            if done[i] || !deps[i].iter().all(|&d| done[d]) {
                continue;
            }
            let regs = merged_inputs(&wire_reg, i);
            let width: usize = regs.iter().map(|&r| register_wires[r].len()).sum();
            if best.as_ref().is_none_or(|b| width < b.1) {
                best = Some((i, width, regs));
            }
        }
        let (i, width, inputs) = best.ok_or_else(|| Error::InvalidTopology("cyclic node dependencies".into()))?;
        if width > cap {
            return Err(Error::WidthCapExceeded { width, cap });
        }
        max_width = max_width.max(width);
        let node = &nodes[i];
        let merged: Vec<usize> = inputs.iter().flat_map(|&r| register_wires[r].iter().copied()).collect();
        let rest: Vec<usize> = merged.iter().copied().filter(|w| !node.input_wires.contains(w)).collect();
        let perm = if merged == node.input_wires {
            None
        } else {
            let pos = |w: &usize| merged.iter().position(|x| x == w).unwrap();
            Some(node.input_wires.iter().chain(&rest).map(pos).collect())
        };
        let output = register_wires.len();
        let out_wires: Vec<usize> = node.kept_wires().iter().chain(&rest).copied().collect();
        for &w in &out_wires {
            wire_reg[w] = output;
        }
        register_wires.push(out_wires);
        steps.push(Step {
            node: i,
            needs_grad: inputs.iter().map(|&r| r >= n_wires).collect(),
            inputs,
            perm,
            width,
            node_qubits: node.qubits(),
            kept: node.kept,
            output,
        });
        done[i] = true;
    }

    let readout = register_wires.len() - 1;
    Ok(Plan { initial: topo.wires.clone(), steps, register_wires, readout, max_width })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::topology::AncillaScheme;

    #[test]
    fn ttn_is_aligned_and_canonical() {
        let t = NetworkTopology::ttn(64, 0, AncillaScheme::PerQubit).unwrap();
        let plan = live_wire_schedule(&t, DEFAULT_WIDTH_CAP).unwrap();
        assert_eq!(plan.max_width, 2);
        assert!(plan.max_width <= 4);
        assert_eq!(plan.order(), (0..63).collect::<Vec<_>>());
        assert!(plan.steps.iter().all(|s| s.perm.is_none()));
        assert_eq!(plan.register_wires[plan.readout], vec![0]);
    }

    #[test]
    fn mera_widths() {
        let t = NetworkTopology::mera(8, 0).unwrap();
        let plan = live_wire_schedule(&t, DEFAULT_WIDTH_CAP).unwrap();
        assert!(plan.max_width <= 8);
        assert_eq!(plan.register_wires[plan.readout].len(), 1);
        let t1 = NetworkTopology::mera(8, 1).unwrap();
        let plan1 = live_wire_schedule(&t1, 12).unwrap();
        assert!(plan1.max_width <= 12);
        assert!(matches!(live_wire_schedule(&t1, 3), Err(Error::WidthCapExceeded { .. })));
    }

    #[test]
    fn steps_respect_dependencies() {
        let t = NetworkTopology::mera(16, 0).unwrap();
        let plan = live_wire_schedule(&t, DEFAULT_WIDTH_CAP).unwrap();
        let mut produced = vec![true; t.wires.len()];
        for s in &plan.steps {
            for &r in &s.inputs {
                assert!(produced[r]);
                produced[r] = false;
            }
            produced.push(true);
        }
    }
}
