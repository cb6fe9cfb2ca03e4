//! Density-matrix evaluation of a plan, with a tape for reverse mode.
//!
//! Cotangents follow the convention `dL = Tr(G drho)`; unitary cotangents
//! `A` satisfy `dL = 2 Re Tr(A dU)`.

use super::schedule::{Plan, Step};
use super::topology::{NetworkTopology, WireInit};
use crate::channels::{dephase_in_place, leading_mask};
use crate::data::encode_feature;
use crate::linalg::{
    conjugate_prefix, embed_identity, inverse_order, kron, left_apply_prefix, partial_trace_matrix, permute_qubits,
    right_apply_prefix_adjoint, CMatrix, C64, ZERO,
};
use crate::{Error, Result};

/// Per-step values kept for the backward pass.
pub(crate) struct StepTape {
    factors: Vec<CMatrix>,
    /// `T = U (I ⊗ R)` for aligned steps, the permuted input otherwise.
    aux: Vec<C64>,
}

#[derive(Default)]
pub(crate) struct Tape {
    steps: Vec<StepTape>,
    readout: Option<CMatrix>,
}

impl Tape {
    #[cfg(test)]
    pub(crate) fn readout_matrix(&self) -> &CMatrix {
        self.readout.as_ref().expect("forward ran with a tape")
    }
}

fn initial_state(init: WireInit, features: &[f64], p: f64, dephase_data: bool) -> Result<CMatrix> {
    Ok(match init {
        WireInit::Data(q) => {
            let [s, c] = encode_feature(features[q])?;
            let off = if dephase_data { (1.0 - p) * s * c } else { s * c };
            CMatrix::from_real(2, &[s * s, off, off, c * c])
        }
        WireInit::Ancilla => CMatrix::from_real(2, &[1.0, 0.0, 0.0, 0.0]),
    })
}

pub(crate) fn check_features(topo: &NetworkTopology, features: &[f64]) -> Result<()> {
    if features.len() != topo.m {
        return Err(Error::FeatureCount { expected: topo.m, found: features.len() });
    }
    Ok(())
}

fn kron_all(factors: &[CMatrix]) -> CMatrix {
    let mut it = factors.iter();
    let first = it.next().expect("at least one factor").clone();
    it.fold(first, |acc, f| kron(&acc, f))
}

/// Marginal of the first qubit of the readout register.
pub(crate) fn readout_probs(m: &CMatrix) -> [f64; 2] {
    let d = m.dim();
    let half = d / 2;
    let mut p = [0.0; 2];
    for i in 0..d {
        p[i / half] += m[(i, i)].re;
    }
    [p[0].max(0.0), p[1].max(0.0)]
}

/// Forward pass. Returns `(P(l=0), P(l=1))`.
pub(crate) fn forward(
    topo: &NetworkTopology,
    plan: &Plan,
    unitaries: &[CMatrix],
    features: &[f64],
    mut tape: Option<&mut Tape>,
) -> Result<[f64; 2]> {
    check_features(topo, features)?;
    let mut regs: Vec<Option<CMatrix>> = Vec::with_capacity(plan.register_wires.len());
    for &init in &plan.initial {
        regs.push(Some(initial_state(init, features, topo.p, topo.dephase_data_layer)?));
    }
    regs.resize(plan.register_wires.len(), None);
    for step in &plan.steps {
        let factors: Vec<CMatrix> =
            step.inputs.iter().map(|&r| regs[r].take().expect("register consumed once")).collect();
        let u = &unitaries[step.node];
        let (mut out, aux) = if step.perm.is_none() {
            let right = if factors.len() > 1 { kron_all(&factors[1..]) } else { CMatrix::identity(1) };
            aligned_forward(u, &factors[0], &right, 1 << step.kept)
        } else {
            general_forward(u, step, &factors)?
        };
        dephase_in_place(&mut out, leading_mask(step.output_qubits(), step.kept), topo.p);
        regs[step.output] = Some(out);
        if let Some(t) = tape.as_deref_mut() {
            t.steps.push(StepTape { factors, aux });
        }
    }
    let final_reg = regs[plan.readout].take().expect("readout register");
    let probs = readout_probs(&final_reg);
    if let Some(t) = tape {
        t.readout = Some(final_reg);
    }
    Ok(probs)
}

/// Cotangent of `-ln P(label)` with respect to the readout register.
pub(crate) fn readout_cotangent(dim: usize, label: u8, prob: f64) -> CMatrix {
    let half = dim / 2;
    let mut g = CMatrix::zeros(dim);
    let w = -1.0 / prob.max(crate::train::PROB_FLOOR);
    for s in 0..half {
        let i = label as usize * half + s;
        g[(i, i)] = C64::new(w, 0.0);
    }
    g
}

/// Reverse pass for the loss `-ln P(label)`. Adds each node's `A` into `acc`.
pub(crate) fn backward(
    topo: &NetworkTopology,
    plan: &Plan,
    unitaries: &[CMatrix],
    tape: Tape,
    label: u8,
    acc: &mut [CMatrix],
) {
    let final_reg = tape.readout.expect("forward ran with a tape");
    let probs = readout_probs(&final_reg);
    let mut grads: Vec<Option<CMatrix>> = vec![None; plan.register_wires.len()];
    grads[plan.readout] = Some(readout_cotangent(final_reg.dim(), label, probs[label as usize]));
    for (step, st) in plan.steps.iter().zip(tape.steps).rev() {
        let mut g = grads[step.output].take().expect("cotangent of every produced register");
        dephase_in_place(&mut g, leading_mask(step.output_qubits(), step.kept), topo.p);
        let u = &unitaries[step.node];
        let factor_grads = if step.perm.is_none() {
            aligned_backward(u, step, &st.factors, &st.aux, &g, &mut acc[step.node])
        } else {
            general_backward(u, step, &st.factors, &st.aux, &g, &mut acc[step.node])
        };
        for (&r, fg) in step.inputs.iter().zip(factor_grads) {
            if let Some(fg) = fg {
                grads[r] = Some(fg);
            }
        }
    }
}

/// `Tr_A[U (L ⊗ R) U†]` keeping the leading `db` block. Returns the output
/// and `T = U (I ⊗ R)`.
fn aligned_forward(u: &CMatrix, l: &CMatrix, r: &CMatrix, db: usize) -> (CMatrix, Vec<C64>) {
    let d = u.dim();
    let (dl, dr) = (l.dim(), r.dim());
    debug_assert_eq!(dl * dr, d);
    let us = u.as_slice();
    let t = if dr == 1 { us.to_vec() } else { mul_right_block(us, d, dl, r) };
    // X = T (L ⊗ I).
    let mut x = vec![ZERO; d * d];
    for i in 0..d {
        let trow = &t[i * d..(i + 1) * d];
        let xrow = &mut x[i * d..(i + 1) * d];
        for lp in 0..dl {
            let src = &trow[lp * dr..(lp + 1) * dr];
            for lo in 0..dl {
                let y = l[(lp, lo)];
                if y == ZERO {
                    continue;
                }
                for (o, s) in xrow[lo * dr..(lo + 1) * dr].iter_mut().zip(src) {
                    *o += s * y;
                }
            }
        }
    }
    let da = d / db;
    let mut out = CMatrix::zeros(db);
    for b in 0..db {
        for bp in b..db {
            let mut acc = ZERO;
            for a in 0..da {
                let xr = &x[(b * da + a) * d..(b * da + a + 1) * d];
                let ur = &us[(bp * da + a) * d..(bp * da + a + 1) * d];
                for (xv, uv) in xr.iter().zip(ur) {
                    acc += xv * uv.conj();
                }
            }
            out[(b, bp)] = acc;
            out[(bp, b)] = acc.conj();
        }
        out[(b, b)].im = 0.0;
    }
    (out, t)
}

/// `M (I_{dl} ⊗ R)` for a row-major `d x d` matrix `M`.
fn mul_right_block(m: &[C64], d: usize, dl: usize, r: &CMatrix) -> Vec<C64> {
    let dr = r.dim();
    let mut t = vec![ZERO; d * d];
    for i in 0..d {
        for lp in 0..dl {
            let base = i * d + lp * dr;
            for rp in 0..dr {
                let x = m[base + rp];
                if x == ZERO {
                    continue;
                }
                for (o, rv) in t[base..base + dr].iter_mut().zip(r.row(rp)) {
                    *o += x * rv;
                }
            }
        }
    }
    t
}

fn aligned_backward(
    u: &CMatrix,
    step: &Step,
    factors: &[CMatrix],
    t: &[C64],
    g: &CMatrix,
    acc: &mut CMatrix,
) -> Vec<Option<CMatrix>> {
    let d = u.dim();
    let us = u.as_slice();
    let db = 1 << step.kept;
    let da = d / db;
    let l = &factors[0];
    let right = if factors.len() > 1 { kron_all(&factors[1..]) } else { CMatrix::identity(1) };
    let (dl, dr) = (l.dim(), right.dim());

    // Y = U† (G ⊗ I): Y[j, (b' a)] = sum_b conj(U[(b a), j]) G[b, b'].
    let mut y = vec![ZERO; d * d];
    for b in 0..db {
        for a in 0..da {
            let urow = &us[(b * da + a) * d..(b * da + a + 1) * d];
            for (j, uv) in urow.iter().enumerate() {
                let cu = uv.conj();
                if cu == ZERO {
                    continue;
                }
                let yrow = &mut y[j * d..(j + 1) * d];
                for bp in 0..db {
                    yrow[bp * da + a] += cu * g[(b, bp)];
                }
            }
        }
    }

    // A = (L ⊗ R) Y.
    let mut z = vec![ZERO; d * d];
    for lp in 0..dl {
        for r in 0..dr {
            let zrow = (lp * dr + r) * d;
            for rp in 0..dr {
                let x = right[(r, rp)];
                if x == ZERO {
                    continue;
                }
                let yrow = (lp * dr + rp) * d;
                for c in 0..d {
                    z[zrow + c] += x * y[yrow + c];
                }
            }
        }
    }
    let a = acc.as_mut_slice();
    for lo in 0..dl {
        for lp in 0..dl {
            let x = l[(lo, lp)];
            if x == ZERO {
                continue;
            }
            for r in 0..dr {
                let (arow, zrow) = ((lo * dr + r) * d, (lp * dr + r) * d);
                for c in 0..d {
                    a[arow + c] += x * z[zrow + c];
                }
            }
        }
    }

    let need_left = step.needs_grad[0];
    let need_right = step.needs_grad[1..].iter().any(|&n| n);
    let mut out = vec![None; factors.len()];
    if need_left {
        // G_L[l, l'] = sum_{r, x} Y[(l r), x] T[x, (l' r)].
        let mut gl = CMatrix::zeros(dl);
        for lo in 0..dl {
            for lp in 0..dl {
                let mut s = ZERO;
                for r in 0..dr {
                    let yrow = &y[(lo * dr + r) * d..(lo * dr + r + 1) * d];
                    for (x, yv) in yrow.iter().enumerate() {
                        s += yv * t[x * d + lp * dr + r];
                    }
                }
                gl[(lo, lp)] = s;
            }
        }
        out[0] = Some(gl);
    }
    if need_right {
        // T2 = U (L ⊗ I); G_R[r, r'] = sum_{l, x} Y[(l r), x] T2[x, (l r')].
        let mut t2 = vec![ZERO; d * d];
        for x in 0..d {
            for lp in 0..dl {
                let src = &us[x * d + lp * dr..x * d + (lp + 1) * dr];
                for lo in 0..dl {
                    let w = l[(lp, lo)];
                    if w == ZERO {
                        continue;
                    }
                    for (o, s) in t2[x * d + lo * dr..x * d + (lo + 1) * dr].iter_mut().zip(src) {
                        *o += s * w;
                    }
                }
            }
        }
        let mut gr = CMatrix::zeros(dr);
        for r in 0..dr {
            for rp in 0..dr {
                let mut s = ZERO;
                for lo in 0..dl {
                    let yrow = &y[(lo * dr + r) * d..(lo * dr + r + 1) * d];
                    for (x, yv) in yrow.iter().enumerate() {
                        s += yv * t2[x * d + lo * dr + rp];
                    }
                }
                gr[(r, rp)] = s;
            }
        }
        let parts = split_cotangent(&gr, &factors[1..], &step.needs_grad[1..]);
        for (o, p) in out[1..].iter_mut().zip(parts) {
            *o = p;
        }
    }
    out
}

fn general_forward(u: &CMatrix, step: &Step, factors: &[CMatrix]) -> Result<(CMatrix, Vec<C64>)> {
    let merged = kron_all(factors);
    let rho_p = match &step.perm {
        Some(perm) => permute_qubits(&merged, perm),
        None => merged,
    };
    let rotated = conjugate_prefix(u, &rho_p);
    let out = if step.kept < step.node_qubits {
        let traced: Vec<usize> = (step.kept..step.node_qubits).collect();
        partial_trace_matrix(&rotated, &traced)?
    } else {
        rotated
    };
    Ok((out.hermitian_part(), rho_p.as_slice().to_vec()))
}

fn general_backward(
    u: &CMatrix,
    step: &Step,
    factors: &[CMatrix],
    rho_p: &[C64],
    g: &CMatrix,
    acc: &mut CMatrix,
) -> Vec<Option<CMatrix>> {
    let g_full = if step.kept < step.node_qubits {
        let traced: Vec<usize> = (step.kept..step.node_qubits).collect();
        embed_identity(g, step.width, &traced).expect("plan shapes are consistent")
    } else {
        g.clone()
    };
    let u_dag = u.adjoint();
    let w = left_apply_prefix(&u_dag, &g_full);

    // A[x, y] += sum_{s, z} rho_p[(x s), z] W[z, (y s)].
    let d = 1usize << step.width;
    let dn = u.dim();
    let rest = d / dn;
    let ws = w.as_slice();
    let a = acc.as_mut_slice();
    for x in 0..dn {
        for s in 0..rest {
            let row = &rho_p[(x * rest + s) * d..(x * rest + s + 1) * d];
            for (z, rv) in row.iter().enumerate() {
                if *rv == ZERO {
                    continue;
                }
                let wrow = &ws[z * d..(z + 1) * d];
                for yy in 0..dn {
                    a[x * dn + yy] += rv * wrow[yy * rest + s];
                }
            }
        }
    }

    if !step.needs_grad.iter().any(|&n| n) {
        return vec![None; factors.len()];
    }
    let g_p = right_apply_prefix_adjoint(&w, &u_dag);
    let g_m = match &step.perm {
        Some(perm) => permute_qubits(&g_p, &inverse_order(perm)),
        None => g_p,
    };
    split_cotangent(&g_m, factors, &step.needs_grad)
}

/// Splits a cotangent on `F_0 ⊗ F_1 ⊗ ...` into per-factor cotangents.
fn split_cotangent(g: &CMatrix, factors: &[CMatrix], needed: &[bool]) -> Vec<Option<CMatrix>> {
    let n = factors.len();
    let mut out = vec![None; n];
    if n == 1 {
        if needed[0] {
            out[0] = Some(g.clone());
        }
        return out;
    }
    if !needed.iter().any(|&x| x) {
        return out;
    }
    let rest = kron_all(&factors[1..]);
    let (ga, gb) = kron_split(g, &factors[0], &rest, needed[0], needed[1..].iter().any(|&x| x));
    out[0] = ga;
    if let Some(gb) = gb {
        for (o, p) in out[1..].iter_mut().zip(split_cotangent(&gb, &factors[1..], &needed[1..])) {
            *o = p;
        }
    }
    out
}

/// Cotangents of `A` and `B` given one on `A ⊗ B`.
fn kron_split(g: &CMatrix, a: &CMatrix, b: &CMatrix, need_a: bool, need_b: bool) -> (Option<CMatrix>, Option<CMatrix>) {
    let (na, nb) = (a.dim(), b.dim());
    let gs = g.as_slice();
    let d = na * nb;
    let at = |i: usize, ib: usize, j: usize, jb: usize| gs[(i * nb + ib) * d + j * nb + jb];
    let ga = need_a.then(|| {
        CMatrix::from_fn(na, |ap, ao| {
            let mut s = ZERO;
            for bo in 0..nb {
                for bp in 0..nb {
                    s += at(ap, bp, ao, bo) * b[(bo, bp)];
                }
            }
            s
        })
    });
    let gb = need_b.then(|| {
        CMatrix::from_fn(nb, |bp, bo| {
            let mut s = ZERO;
            for ao in 0..na {
                for ap in 0..na {
                    s += at(ap, bp, ao, bo) * a[(ao, ap)];
                }
            }
            s
        })
    });
    (ga, gb)
}
