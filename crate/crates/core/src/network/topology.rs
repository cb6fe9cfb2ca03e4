use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ttn,
    Mera,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ttn => "ttn",
            ModelKind::Mera => "mera",
        }
    }
}

/// Where ancilla qubits enter the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AncillaScheme {
    /// `k` ancillas attached to every data qubit; bonds carry `1 + k` qubits.
    PerQubit,
    /// `k` fresh ancillas enter every node; bonds carry one qubit.
    PerNode,
}

impl AncillaScheme {
    pub fn name(self) -> &'static str {
        match self {
            AncillaScheme::PerQubit => "per-qubit",
            AncillaScheme::PerNode => "per-node",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Tree,
    Entangler,
    Root,
}

/// Initial content of a wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WireInit {
    /// Encoded feature with this index.
    Data(usize),
    /// `|0>`.
    Ancilla,
}

/// Qubit counts of a node: data/bond inputs, fresh ancillas, kept outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NodeShape {
    pub n_i: usize,
    pub n_a: usize,
    pub n_o: usize,
}

impl NodeShape {
    /// Whether the ancilla-counting rule `n_a <= 2 n_o` holds.
    pub fn ancilla_rule_holds(&self) -> bool {
        self.n_a <= 2 * self.n_o
    }
}

/// One unitary acting on `input_wires`. Output wires reuse the input ids;
/// the first `kept` of them survive and the rest are traced out.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryNode {
    pub kind: NodeKind,
    /// Tree layer (1-based). Entanglers carry the layer they precede.
    pub layer: usize,
    pub input_wires: Vec<usize>,
    pub kept: usize,
    pub shape: NodeShape,
}

impl UnitaryNode {
    pub fn qubits(&self) -> usize {
        self.input_wires.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits()
    }

    pub fn kept_wires(&self) -> &[usize] {
        &self.input_wires[..self.kept]
    }

    pub fn traced_wires(&self) -> &[usize] {
        &self.input_wires[self.kept..]
    }
}

/// Wiring of a TTN or MERA classifier together with its dephasing setup.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    pub kind: ModelKind,
    pub m: usize,
    pub k: usize,
    pub scheme: AncillaScheme,
    /// Topological order: per tree layer, its entanglers then its tree nodes.
    pub nodes: Vec<UnitaryNode>,
    pub wires: Vec<WireInit>,
    /// Dephasing rate applied to every node output.
    pub p: f64,
    /// Also dephase the encoded data qubits before the first layer.
    pub dephase_data_layer: bool,
}

fn check_m(m: usize, min: usize) -> Result<u32> {
    if m < min || !m.is_power_of_two() {
        return Err(Error::InvalidTopology(format!("m = {m} must be a power of two >= {min}")));
    }
    Ok(m.trailing_zeros())
}

/// Per-qubit bonds at the data level: data qubit `q` followed by its ancillas.
fn data_bonds(m: usize, k: usize, wires: &mut Vec<WireInit>) -> Vec<Vec<usize>> {
    wires.extend((0..m).map(WireInit::Data));
    wires.extend(std::iter::repeat_n(WireInit::Ancilla, m * k));
    (0..m).map(|q| std::iter::once(q).chain((0..k).map(|j| m + q * k + j)).collect()).collect()
}

fn tree_layer(
    bonds: &[Vec<usize>],
    layer: usize,
    root: bool,
    fresh: &mut impl FnMut() -> Vec<usize>,
    nodes: &mut Vec<UnitaryNode>,
    first_layer_data: usize,
) -> Vec<Vec<usize>> {
    bonds
        .chunks(2)
        .map(|pair| {
            let extra = fresh();
            let n_a = extra.len();
            let input_wires: Vec<usize> = pair[0].iter().chain(&pair[1]).chain(&extra).copied().collect();
            let bond = pair[0].len();
            let kept = if root || n_a > 0 { 1 } else { bond };
            // Per-qubit ancillas count as entering at the first layer.
            let (n_i, n_a) = if layer == 1 && first_layer_data > 0 {
                (first_layer_data, input_wires.len() - first_layer_data)
            } else {
                (2 * bond, n_a)
            };
            nodes.push(UnitaryNode {
                kind: if root { NodeKind::Root } else { NodeKind::Tree },
                layer,
                input_wires: input_wires.clone(),
                kept,
                shape: NodeShape { n_i, n_a, n_o: kept },
            });
            input_wires[..kept].to_vec()
        })
        .collect()
}

/// Entanglers on the bond pairs straddling neighbouring subtrees:
/// `(B_1, B_2), (B_3, B_4), ...`.
fn entangler_layer(bonds: &[Vec<usize>], layer: usize, nodes: &mut Vec<UnitaryNode>) {
    let mut i = 1;
    while i + 1 < bonds.len() {
        let input_wires: Vec<usize> = bonds[i].iter().chain(&bonds[i + 1]).copied().collect();
        let n = input_wires.len();
        nodes.push(UnitaryNode {
            kind: NodeKind::Entangler,
            layer,
            input_wires,
            kept: n,
            shape: NodeShape { n_i: n, n_a: 0, n_o: n },
        });
        i += 2;
    }
}

impl NetworkTopology {
    /// Binary tree over `m` features.
    ///
    /// `PerQubit` attaches `k` ancillas to every data qubit, so every node is
    /// a `2(1 + k)`-qubit unitary that keeps `1 + k` qubits. `PerNode` adds
    /// `k` fresh ancillas to each two-input node, which keeps a single qubit.
    pub fn ttn(m: usize, k: usize, scheme: AncillaScheme) -> Result<Self> {
        let layers = check_m(m, 4)? as usize;
        let mut wires = Vec::new();
        let mut nodes = Vec::new();
        let mut bonds = match scheme {
            AncillaScheme::PerQubit => data_bonds(m, k, &mut wires),
            AncillaScheme::PerNode => data_bonds(m, 0, &mut wires),
        };
        for layer in 1..=layers {
            let mut fresh = || match scheme {
                AncillaScheme::PerQubit => Vec::new(),
                AncillaScheme::PerNode => {
                    let start = wires.len();
                    wires.extend(std::iter::repeat_n(WireInit::Ancilla, k));
                    (start..start + k).collect()
                }
            };
            let data = if scheme == AncillaScheme::PerQubit { 2 } else { 0 };
            bonds = tree_layer(&bonds, layer, layer == layers, &mut fresh, &mut nodes, data);
        }
        let topo = Self { kind: ModelKind::Ttn, m, k, scheme, nodes, wires, p: 0.0, dephase_data_layer: true };
        topo.validate()?;
        Ok(topo)
    }

    /// TTN with entanglers before every tree layer except the root layer.
    ///
    /// Data-level entanglers act on data qubit pairs before ancillas attach;
    /// higher entanglers act on pairs of full `1 + k`-qubit bonds.
    pub fn mera(m: usize, k: usize) -> Result<Self> {
        let layers = check_m(m, 8)? as usize;
        if k > 1 {
            return Err(Error::InvalidTopology(format!("MERA supports k in {{0, 1}}, got {k}")));
        }
        let mut wires = Vec::new();
        let mut nodes = Vec::new();
        let mut bonds = data_bonds(m, k, &mut wires);
        for layer in 1..=layers {
            if layer < layers {
                if layer == 1 {
                    let data: Vec<Vec<usize>> = (0..m).map(|q| vec![q]).collect();
                    entangler_layer(&data, layer, &mut nodes);
                } else {
                    entangler_layer(&bonds, layer, &mut nodes);
                }
            }
            bonds = tree_layer(&bonds, layer, layer == layers, &mut Vec::new, &mut nodes, 2);
        }
        let topo = Self {
            kind: ModelKind::Mera,
            m,
            k,
            scheme: AncillaScheme::PerQubit,
            nodes,
            wires,
            p: 0.0,
            dephase_data_layer: true,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn build(kind: ModelKind, m: usize, k: usize, scheme: AncillaScheme) -> Result<Self> {
        match kind {
            ModelKind::Ttn => Self::ttn(m, k, scheme),
            ModelKind::Mera if scheme == AncillaScheme::PerQubit => Self::mera(m, k),
            ModelKind::Mera => Err(Error::InvalidTopology("MERA supports only per-qubit ancillas".into())),
        }
    }

    pub fn with_dephasing(mut self, p: f64) -> Result<Self> {
        crate::channels::check_rate(p)?;
        self.p = p;
        Ok(self)
    }

    pub fn with_data_dephasing(mut self, on: bool) -> Self {
        self.dephase_data_layer = on;
        self
    }

    pub fn tree_layers(&self) -> usize {
        self.m.trailing_zeros() as usize
    }

    pub fn node_dims(&self) -> Vec<usize> {
        self.nodes.iter().map(UnitaryNode::dim).collect()
    }

    /// Total real degrees of freedom over all Hermitian generators.
    pub fn parameter_count(&self) -> usize {
        self.nodes.iter().map(|n| n.dim() * n.dim()).sum()
    }

    pub fn shapes(&self) -> Vec<NodeShape> {
        self.nodes.iter().map(|n| n.shape).collect()
    }

    /// The fully dephased classical route applies.
    pub fn is_classical(&self) -> bool {
        self.p == 1.0 && self.dephase_data_layer
    }

    /// Checks wire liveness along the node order and that exactly the
    /// readout wire survives the root.
    pub fn validate(&self) -> Result<()> {
        let mut alive = vec![true; self.wires.len()];
        let roots = self.nodes.iter().filter(|n| n.kind == NodeKind::Root).count();
        if roots != 1 || self.nodes.last().map(|n| n.kind) != Some(NodeKind::Root) {
            return Err(Error::InvalidTopology("exactly one root, placed last".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.kept == 0 || node.kept > node.qubits() {
                return Err(Error::InvalidTopology(format!("node {i}: kept count {}", node.kept)));
            }
            let mut seen = std::collections::HashSet::new();
            for &w in &node.input_wires {
                if w >= alive.len() || !alive[w] || !seen.insert(w) {
                    return Err(Error::InvalidTopology(format!("node {i}: wire {w} is not live")));
                }
            }
            match node.kind {
                NodeKind::Entangler if node.kept != node.qubits() => {
                    return Err(Error::InvalidTopology(format!("entangler {i} traces wires")));
                }
                NodeKind::Tree if self.scheme == AncillaScheme::PerQubit && 2 * node.kept != node.qubits() => {
                    return Err(Error::InvalidTopology(format!("tree node {i} does not halve its register")));
                }
                _ => {}
            }
            for &w in node.traced_wires() {
                alive[w] = false;
            }
        }
        let live: Vec<usize> = (0..alive.len()).filter(|&w| alive[w]).collect();
        let root = self.nodes.last().unwrap();
        if live != root.kept_wires() || root.kept != 1 {
            return Err(Error::InvalidTopology(format!("wires {live:?} survive the root")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ttn_eight_no_ancilla() {
        let t = NetworkTopology::ttn(8, 0, AncillaScheme::PerQubit).unwrap();
        assert_eq!(t.nodes.len(), 7);
        assert!(t.node_dims().iter().all(|&d| d == 4));
        assert_eq!(t.nodes.iter().map(|n| n.layer).max(), Some(3));
        for layer in 1..=3 {
            assert_eq!(t.nodes.iter().filter(|n| n.layer == layer).count(), 8 >> layer);
        }
    }

    #[test]
    fn ttn_four_one_ancilla() {
        let t = NetworkTopology::ttn(4, 1, AncillaScheme::PerQubit).unwrap();
        let first = &t.nodes[0];
        assert_eq!(first.dim(), 16);
        assert_eq!(first.kept, 2);
        assert_eq!(first.shape, NodeShape { n_i: 2, n_a: 2, n_o: 2 });
        assert_eq!(first.input_wires, vec![0, 4, 1, 5]);
    }

    #[test]
    fn ttn_eight_three_ancillas() {
        let t = NetworkTopology::ttn(8, 3, AncillaScheme::PerQubit).unwrap();
        assert!(t.node_dims().iter().all(|&d| d == 256));
        assert!(t.shapes().iter().all(NodeShape::ancilla_rule_holds));
    }

    #[test]
    fn node_count_and_schemes_share_parameter_count() {
        for m in [4, 8, 16, 64] {
            for k in 0..=2 {
                let pq = NetworkTopology::ttn(m, k, AncillaScheme::PerQubit).unwrap();
                assert_eq!(pq.nodes.len(), m - 1);
                let pn = NetworkTopology::ttn(m, 2 * k, AncillaScheme::PerNode).unwrap();
                assert_eq!(pn.nodes.len(), m - 1);
                assert_eq!(pq.parameter_count(), pn.parameter_count(), "m={m} k={k}");
            }
        }
    }

    #[test]
    fn per_node_ancillas_enter_every_node() {
        let t = NetworkTopology::ttn(8, 2, AncillaScheme::PerNode).unwrap();
        assert_eq!(t.wires.len(), 8 + 7 * 2);
        for n in &t.nodes {
            assert_eq!((n.shape.n_i, n.shape.n_a, n.shape.n_o), (2, 2, 1));
            assert_eq!(n.dim(), 16);
        }
    }

    #[test]
    fn mera_eight() {
        let t = NetworkTopology::mera(8, 0).unwrap();
        let ent: Vec<&UnitaryNode> = t.nodes.iter().filter(|n| n.kind == NodeKind::Entangler).collect();
        assert_eq!(ent.iter().filter(|n| n.layer == 1).count(), 3);
        assert_eq!(ent.iter().filter(|n| n.layer == 2).count(), 1);
        assert_eq!(ent.iter().filter(|n| n.layer == 3).count(), 0);
        assert_eq!(ent[0].input_wires, vec![1, 2]);
        assert_eq!(ent[3].input_wires, vec![2, 4]);
        assert_eq!(t.nodes.len() - ent.len(), 7);

        let t1 = NetworkTopology::mera(8, 1).unwrap();
        let e1: Vec<&UnitaryNode> = t1.nodes.iter().filter(|n| n.kind == NodeKind::Entangler).collect();
        assert_eq!(e1[0].qubits(), 2);
        assert_eq!(e1[3].qubits(), 4);
        assert!(t1.nodes.iter().filter(|n| n.kind == NodeKind::Tree).all(|n| n.qubits() == 4 && n.kept == 2));
    }

    #[test]
    fn invalid_sizes() {
        assert!(NetworkTopology::ttn(6, 0, AncillaScheme::PerQubit).is_err());
        assert!(NetworkTopology::ttn(2, 0, AncillaScheme::PerQubit).is_err());
        assert!(NetworkTopology::mera(4, 0).is_err());
        assert!(NetworkTopology::mera(8, 2).is_err());
    }

    #[test]
    fn validate_rejects_dead_wire() {
        let mut t = NetworkTopology::ttn(4, 0, AncillaScheme::PerQubit).unwrap();
        t.nodes[2].input_wires = vec![0, 1];
        assert!(t.validate().is_err());
    }
}
