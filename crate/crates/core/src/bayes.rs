//! The fully dephased limit `p = 1`.
//!
//! With every bond fully dephased, only diagonals propagate. A node `U`
//! that traces its trailing qubits acts on probability vectors through the
//! singly stochastic matrix `S[b, j] = sum_a |U[(b a), j]|^2`, and an
//! entangler through the doubly stochastic `M = |U|^2`. The network is then
//! a feed-forward Bayesian network evaluated by matrix-vector products.

use serde::Serialize;

use crate::data::{feature_probabilities, EncodedSample};
use crate::linalg::{permutation_index_map, unitarity_error, CMatrix, UnitaryMatrix, C64, UNITARY_TOL};
use crate::network::{Network, NetworkTopology, Plan, Prediction, WireInit};
use crate::{Error, Result};

pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Real non-negative matrix whose columns sum to one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StochasticNode {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StochasticNode {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    /// Applies the matrix to the leading qubits of `v`:
    /// `out[(b, s)] = sum_j S[b, j] v[(j, s)]`.
    pub(crate) fn apply_leading(&self, v: &[f64]) -> Vec<f64> {
        let rest = v.len() / self.cols;
        let mut out = vec![0.0; self.rows * rest];
        for b in 0..self.rows {
            let o = &mut out[b * rest..(b + 1) * rest];
            for j in 0..self.cols {
                let s = self.get(b, j);
                if s == 0.0 {
                    continue;
                }
                for (ov, vv) in o.iter_mut().zip(&v[j * rest..(j + 1) * rest]) {
                    *ov += s * vv;
                }
            }
        }
        out
    }
}

fn check_unitary(u: &UnitaryMatrix) -> Result<()> {
    let err = unitarity_error(u.matrix());
    if err > UNITARY_TOL {
        return Err(Error::NotUnitary(err));
    }
    Ok(())
}

/// `M[i, j] = |U[i, j]|^2`, doubly stochastic.
pub fn to_unitary_stochastic(u: &UnitaryMatrix) -> Result<StochasticNode> {
    check_unitary(u)?;
    let d = u.dim();
    Ok(StochasticNode { rows: d, cols: d, data: u.matrix().as_slice().iter().map(|z| z.norm_sqr()).collect() })
}

/// `S[i_B, j] = sum_{i_A} |U[(i_A, i_B), j]|^2`, where `i_A` runs over the
/// listed output qubits and `i_B` over the remaining ones in order.
pub fn to_singly_stochastic(u: &UnitaryMatrix, traced_qubits: &[usize]) -> Result<StochasticNode> {
    check_unitary(u)?;
    let m = to_unitary_stochastic(u)?;
    let n = u.matrix().qubits().ok_or(Error::NotQubitRegister(u.dim()))?;
    let mut traced = vec![false; n];
    for &q in traced_qubits {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, len: n });
        }
        traced[q] = true;
    }
    let kept: Vec<usize> = (0..n).filter(|&q| !traced[q]).collect();
    if kept.is_empty() {
        return Err(Error::EmptyRemainder);
    }
    let d = u.dim();
    let rows = 1 << kept.len();
    let mut data = vec![0.0; rows * d];
    for i in 0..d {
        let mut b = 0;
        for &q in &kept {
            b = (b << 1) | ((i >> (n - 1 - q)) & 1);
        }
        for j in 0..d {
            data[b * d + j] += m.get(i, j);
        }
    }
    Ok(StochasticNode { rows, cols: d, data })
}

/// `S` for a node keeping its leading `kept` qubits, built straight from the
/// unitary matrix (no validation).
pub(crate) fn leading_stochastic(u: &CMatrix, kept: usize) -> StochasticNode {
    let d = u.dim();
    let rows = 1 << kept;
    let da = d / rows;
    let mut data = vec![0.0; rows * d];
    for b in 0..rows {
        let out = &mut data[b * d..(b + 1) * d];
        for a in 0..da {
            for (o, z) in out.iter_mut().zip(u.row(b * da + a)) {
                *o += z.norm_sqr();
            }
        }
    }
    StochasticNode { rows, cols: d, data }
}

/// Diagonal of a fully dephased register.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector {
    entries: Vec<f64>,
}

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if !entries.len().is_power_of_two() {
            return Err(Error::NotQubitRegister(entries.len()));
        }
        if let Some(&neg) = entries.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::NotPositive(neg));
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::BadTrace(total));
        }
        Ok(Self { entries })
    }

    pub fn width(&self) -> usize {
        self.entries.len().trailing_zeros() as usize
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `S v` on the full register.
    pub fn apply(&self, s: &StochasticNode) -> Result<ProbVector> {
        if s.cols != self.entries.len() {
            return Err(Error::DimensionMismatch { expected: s.cols, found: self.entries.len() });
        }
        Ok(ProbVector { entries: s.apply_leading(&self.entries) })
    }
}

fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

pub(crate) struct BayesTape {
    /// Permuted merged input of each step.
    inputs: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
    readout: Vec<f64>,
}

fn initial(init: WireInit, features: &[f64]) -> Result<Vec<f64>> {
    Ok(match init {
        WireInit::Data(q) => feature_probabilities(features[q])?.to_vec(),
        WireInit::Ancilla => vec![1.0, 0.0],
    })
}

fn permute_vec(v: &[f64], perm: &Option<Vec<usize>>) -> Vec<f64> {
    match perm {
        Some(p) => permutation_index_map(p).into_iter().map(|old| v[old]).collect(),
        None => v.to_vec(),
    }
}

/// Stochastic matrices of every node under `plan`.
pub(crate) fn stochastic_nodes(topo: &NetworkTopology, unitaries: &[CMatrix]) -> Vec<StochasticNode> {
    topo.nodes.iter().zip(unitaries).map(|(n, u)| leading_stochastic(u, n.kept)).collect()
}

pub(crate) fn readout_marginal(v: &[f64]) -> [f64; 2] {
    let half = v.len() / 2;
    [v[..half].iter().sum(), v[half..].iter().sum()]
}

pub(crate) fn forward(
    topo: &NetworkTopology,
    plan: &Plan,
    stoch: &[StochasticNode],
    features: &[f64],
    mut tape: Option<&mut BayesTape>,
) -> Result<[f64; 2]> {
    crate::network::check_features(topo, features)?;
    let mut regs: Vec<Option<Vec<f64>>> = Vec::with_capacity(plan.register_wires.len());
    for &init in &plan.initial {
        regs.push(Some(initial(init, features)?));
    }
    regs.resize(plan.register_wires.len(), None);
    for step in &plan.steps {
        let factors: Vec<Vec<f64>> =
            step.inputs.iter().map(|&r| regs[r].take().expect("register consumed once")).collect();
        let merged = factors[1..].iter().fold(factors[0].clone(), |acc, f| kron_vec(&acc, f));
        let v = permute_vec(&merged, &step.perm);
        regs[step.output] = Some(stoch[step.node].apply_leading(&v));
        if let Some(t) = tape.as_deref_mut() {
            t.inputs.push((factors, v));
        }
    }
    let out = regs[plan.readout].take().expect("readout register");
    let probs = readout_marginal(&out);
    if let Some(t) = tape {
        t.readout = out;
    }
    Ok(probs)
}

/// Reverse pass for `-ln P(label)`; adds `dL/dS` of every node into `acc`.
pub(crate) fn backward(plan: &Plan, stoch: &[StochasticNode], tape: BayesTape, label: u8, acc: &mut [Vec<f64>]) {
    let half = tape.readout.len() / 2;
    let p = readout_marginal(&tape.readout)[label as usize];
    let mut grads: Vec<Option<Vec<f64>>> = vec![None; plan.register_wires.len()];
    let mut g0 = vec![0.0; tape.readout.len()];
    let w = -1.0 / p.max(crate::train::PROB_FLOOR);
    g0[label as usize * half..(label as usize + 1) * half].fill(w);
    grads[plan.readout] = Some(g0);

    for (step, (factors, v)) in plan.steps.iter().zip(tape.inputs).rev() {
        let g = grads[step.output].take().expect("cotangent of every produced register");
        let s = &stoch[step.node];
        let rest = v.len() / s.cols;
        let gs = &mut acc[step.node];
        for b in 0..s.rows {
            let gr = &g[b * rest..(b + 1) * rest];
            for j in 0..s.cols {
                gs[b * s.cols + j] += gr.iter().zip(&v[j * rest..(j + 1) * rest]).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        if !step.needs_grad.iter().any(|&n| n) {
            continue;
        }
        let mut gp = vec![0.0; v.len()];
        for j in 0..s.cols {
            let o = &mut gp[j * rest..(j + 1) * rest];
            for b in 0..s.rows {
                let sv = s.get(b, j);
                for (ov, gv) in o.iter_mut().zip(&g[b * rest..(b + 1) * rest]) {
                    *ov += sv * gv;
                }
            }
        }
        let gm = match &step.perm {
            Some(perm) => {
                let mut out = vec![0.0; gp.len()];
                for (new, old) in permutation_index_map(perm).into_iter().enumerate() {
                    out[old] = gp[new];
                }
                out
            }
            None => gp,
        };
        for (i, fg) in split_vec(&gm, &factors, &step.needs_grad).into_iter().enumerate() {
            if let Some(fg) = fg {
                grads[step.inputs[i]] = Some(fg);
            }
        }
    }
}

fn split_vec(g: &[f64], factors: &[Vec<f64>], needed: &[bool]) -> Vec<Option<Vec<f64>>> {
    let n = factors.len();
    let mut out = vec![None; n];
    if n == 1 {
        if needed[0] {
            out[0] = Some(g.to_vec());
        }
        return out;
    }
    if !needed.iter().any(|&x| x) {
        return out;
    }
    let rest = factors[2..].iter().fold(factors[1].clone(), |acc, f| kron_vec(&acc, f));
    let nb = rest.len();
    if needed[0] {
        out[0] = Some((0..factors[0].len()).map(|x| (0..nb).map(|y| g[x * nb + y] * rest[y]).sum()).collect());
    }
    if needed[1..].iter().any(|&x| x) {
        let a = &factors[0];
        let gb: Vec<f64> = (0..nb).map(|y| a.iter().enumerate().map(|(x, av)| g[x * nb + y] * av).sum()).collect();
        for (o, p) in out[1..].iter_mut().zip(split_vec(&gb, &factors[1..], &needed[1..])) {
            *o = p;
        }
    }
    out
}

impl BayesTape {
    pub(crate) fn new() -> Self {
        Self { inputs: Vec::new(), readout: Vec::new() }
    }
}

/// `A[j, (b a)] = gS[b, j] conj(U[(b a), j])`, so that `dL = 2 Re Tr(A dU)`.
pub(crate) fn stochastic_to_unitary_cotangent(u: &CMatrix, kept: usize, gs: &[f64]) -> CMatrix {
    let d = u.dim();
    let db = 1 << kept;
    let da = d / db;
    let mut a = CMatrix::zeros(d);
    for b in 0..db {
        for aa in 0..da {
            let row = b * da + aa;
            for j in 0..d {
                a[(j, row)] = u[(row, j)].conj() * gs[b * d + j];
            }
        }
    }
    a
}

/// Classical forward pass of `net` (the dephasing rate stored in the
/// topology is ignored; the result equals the density-matrix forward at
/// `p = 1` with data-layer dephasing).
pub fn bayes_forward(net: &Network, sample: &EncodedSample) -> Result<Prediction> {
    let unitaries: Vec<CMatrix> = net.unitaries()?.into_iter().map(|u| u.matrix().clone()).collect();
    let stoch = stochastic_nodes(net.topology(), &unitaries);
    Ok(Prediction::from_probs(forward(net.topology(), net.plan(), &stoch, &sample.features, None)?))
}

/// Machine-checkable facts about realizing the stochastic matrix
/// `[[1, 1, 1, 1], [0, 0, 0, 0]]` (every two-qubit input mapped to `|0>`).
#[derive(Clone, Debug, Serialize)]
pub struct StinespringReport {
    pub target: Vec<Vec<f64>>,
    /// Unitary on two data qubits plus one ancilla in `|0>` (output order:
    /// ancilla, data, data); the leading qubit is kept.
    pub dilation_qubits: usize,
    pub realized: Vec<Vec<f64>>,
    pub realized_residual: f64,
    pub realized_column_sums: Vec<f64>,
    /// Two-qubit unitary (data plus ancilla) sending a single data qubit to `|0>`.
    pub single_qubit_dilation_residual: f64,
    /// Best `max_j |S[0, j] - 1|` over a grid of one-qubit unitaries for the
    /// one-qubit target `[[1, 1], [0, 0]]`.
    pub one_qubit_grid_points: usize,
    pub one_qubit_best_residual: f64,
    /// Lower bound on the same residual for any two-qubit unitary on the two
    /// data qubits with one output traced and no ancilla: the kept block has
    /// only two rows, so `sum_j S[0, j] <= 2`.
    pub no_ancilla_residual_bound: f64,
    /// Best residual found by random search over two-qubit unitaries.
    pub no_ancilla_search_residual: f64,
    pub no_ancilla_search_samples: usize,
}

fn residual_to_all_zero(s: &StochasticNode) -> f64 {
    (0..s.cols).map(|j| (1.0 - s.get(0, j)).abs()).fold(0.0, f64::max)
}

/// `U(theta, phi, lambda)` up to global phase.
fn u2(theta: f64, phi: f64, lambda: f64) -> UnitaryMatrix {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e = |x: f64| C64::from_polar(1.0, x);
    UnitaryMatrix::from_matrix_unchecked(CMatrix::from_vec(
        2,
        vec![C64::new(c, 0.0), -e(lambda) * s, e(phi) * s, e(phi + lambda) * c],
    ))
}

pub fn stinespring_witness() -> StinespringReport {
    use rand::{Rng, SeedableRng};

    let target = vec![vec![1.0; 4], vec![0.0; 4]];

    // |x y 0> -> |0 x y>: cyclic qubit shift, then keep the first qubit.
    let shift =
        UnitaryMatrix::permutation(&(0..8).map(|i| (i & 1) << 2 | i >> 1).collect::<Vec<_>>()).expect("permutation");
    let full = to_singly_stochastic(&shift, &[1, 2]).expect("valid");
    // Columns with the ancilla (last input qubit) in |0>.
    let realized: Vec<Vec<f64>> = (0..2).map(|b| (0..4).map(|xy| full.get(b, xy << 1)).collect()).collect();
    let realized_residual =
        realized.iter().zip(&target).flat_map(|(r, t)| r.iter().zip(t).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
    let realized_column_sums = (0..4).map(|j| realized[0][j] + realized[1][j]).collect();

    let swap = UnitaryMatrix::permutation(&[0, 2, 1, 3]).expect("permutation");
    let s2 = to_singly_stochastic(&swap, &[1]).expect("valid");
    let single_qubit_dilation_residual = (0..2).map(|x| (1.0 - s2.get(0, x << 1)).abs()).fold(0.0, f64::max);

    let steps = 48;
    let mut best = f64::INFINITY;
    let mut points = 0;
    for a in 0..=steps {
        for b in 0..steps {
            for c in 0..steps {
                let tau = std::f64::consts::TAU;
                let u = u2(
                    std::f64::consts::PI * a as f64 / steps as f64,
                    tau * b as f64 / steps as f64,
                    tau * c as f64 / steps as f64,
                );
                let m = to_unitary_stochastic(&u).expect("unitary");
                best = best.min(residual_to_all_zero(&m));
                points += 1;
            }
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let samples = 20_000;
    let mut search = f64::INFINITY;
    for _ in 0..samples {
        let packed = (0..16).map(|_| 1.5 * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let h = crate::linalg::HermitianParam::from_packed(4, packed).expect("16 reals");
        let u = crate::linalg::hermitian_expm(&h).expect("finite");
        let s = to_singly_stochastic(&u, &[1]).expect("valid");
        search = search.min(residual_to_all_zero(&s));
    }

    StinespringReport {
        target,
        dilation_qubits: 3,
        realized,
        realized_residual,
        realized_column_sums,
        single_qubit_dilation_residual,
        one_qubit_grid_points: points,
        one_qubit_best_residual: best,
        no_ancilla_residual_bound: 0.5,
        no_ancilla_search_residual: search,
        no_ancilla_search_samples: samples,
    }
}
