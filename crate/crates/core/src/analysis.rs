//! Regression structure of a single dephased node.
//!
//! For `ρ' = U E_p[ρ] U†` the output diagonal is linear in the input entries:
//! `ρ'_ii = Σ_jk U_ij U*_ik (1-p)^h(j,k) ρ_jk`, with `h` the Hamming distance
//! between the bitstrings of `j` and `k`.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use crate::channels::check_rate;
use crate::data::feature_probabilities;
use crate::linalg::{CMatrix, UnitaryMatrix, C64};
use crate::{Error, Result};

fn as_pair<S: Serializer>(c: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [c.re, c.im].serialize(s)
}

/// Coefficient of the input entry `ρ_jk`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressorTerm {
    pub j: usize,
    pub k: usize,
    #[serde(serialize_with = "as_pair")]
    pub coefficient: C64,
    pub exponent: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressorReport {
    pub qubits: usize,
    pub p: f64,
    /// `rows[i]` lists every input entry, row-major in `(j, k)`.
    pub rows: Vec<Vec<RegressorTerm>>,
}

pub fn hamming(j: usize, k: usize) -> u32 {
    (j ^ k).count_ones()
}

fn coefficient(u: &CMatrix, p: f64, i: usize, j: usize, k: usize) -> C64 {
    let row = u.row(i);
    row[j] * row[k].conj() * (1.0 - p).powi(hamming(j, k) as i32)
}

pub fn regressor_coefficients(u: &UnitaryMatrix, p: f64) -> Result<RegressorReport> {
    check_rate(p)?;
    let m = u.matrix();
    let d = m.dim();
    let rows = (0..d)
        .map(|i| {
            (0..d * d)
                .map(|jk| {
                    let (j, k) = (jk / d, jk % d);
                    RegressorTerm { j, k, coefficient: coefficient(m, p, i, j, k), exponent: hamming(j, k) }
                })
                .collect()
        })
        .collect();
    Ok(RegressorReport { qubits: d.trailing_zeros() as usize, p, rows })
}

impl RegressorReport {
    /// Output diagonal predicted by the regression for input `rho`.
    pub fn reconstruct_diagonal(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        let d = self.rows.len();
        if rho.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho.dim() });
        }
        let s = rho.as_slice();
        Ok(self.rows.iter().map(|row| row.iter().map(|t| t.coefficient * s[t.j * d + t.k]).sum::<C64>().re).collect())
    }

    /// Fixed-width table, one line per nonzero coefficient.
    pub fn to_table(&self) -> String {
        let w = self.qubits.max(1);
        let mut out =
            format!("p = {}\n{:>4} {:>w$} {:>w$} {:>12} {:>12} {:>4}\n", self.p, "i", "j", "k", "re", "im", "exp");
        for (i, row) in self.rows.iter().enumerate() {
            for t in row.iter().filter(|t| t.coefficient.norm() > 1e-15) {
                let _ = writeln!(
                    out,
                    "{i:>4} {:>w$} {:>w$} {:>12.6} {:>12.6} {:>4}",
                    format!("{:0w$b}", t.j),
                    format!("{:0w$b}", t.k),
                    t.coefficient.re,
                    t.coefficient.im,
                    t.exponent
                );
            }
        }
        out
    }
}

pub const FIT_RATES: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub j: usize,
    pub k: usize,
    /// Output row whose coefficient was fitted.
    pub i: usize,
    pub exponent: u32,
    /// Least-squares slope of `ln|c(p)/c(0)|` against `ln(1-p)`.
    pub slope: f64,
    /// Largest deviation of the log-ratio from the rounded exponent.
    pub residual: f64,
}

/// Recovers the power of `(1-p)` on `ρ_jk` from coefficients evaluated at
/// [`FIT_RATES`], on the output row with the largest undamped coefficient.
pub fn suppression_exponent_fit(u: &UnitaryMatrix, entry: (usize, usize)) -> Result<ExponentFit> {
    let m = u.matrix();
    let (j, k) = entry;
    let d = m.dim();
    if j >= d || k >= d {
        return Err(Error::IndexOutOfRange { index: j.max(k), len: d });
    }
    let (i, c0) =
        (0..d).map(|i| (i, coefficient(m, 0.0, i, j, k).norm())).max_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty");
    if c0 < 1e-12 {
        return Err(Error::ZeroCoefficient { j, k });
    }
    let pts: Vec<(f64, f64)> =
        FIT_RATES[1..].iter().map(|&p| ((1.0 - p).ln(), (coefficient(m, p, i, j, k).norm() / c0).ln())).collect();
    let slope = pts.iter().map(|(x, y)| x * y).sum::<f64>() / pts.iter().map(|(x, _)| x * x).sum::<f64>();
    let exponent = slope.round().max(0.0) as u32;
    let residual = pts.iter().map(|(x, y)| (y - exponent as f64 * x).abs()).fold(0.0, f64::max);
    Ok(ExponentFit { j, k, i, exponent, slope, residual })
}

/// Output probabilities of one node with and without fully dephasing the
/// encoded input first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaReport {
    pub features: Vec<f64>,
    pub coherent: Vec<f64>,
    pub dephased: Vec<f64>,
    /// `coherent - dephased`: the contribution of the off-diagonal regressors.
    pub lost: Vec<f64>,
}

/// `λ'_i = Σ_jk U_ij U*_ik ρ_jk` for the product state of the encoded
/// features, against `Σ_j |U_ij|² λ_j`.
pub fn lambda_update_demo(features: &[f64], u: &UnitaryMatrix) -> Result<LambdaReport> {
    let m = u.matrix();
    let d = 1usize << features.len();
    if m.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
    }
    // The encoded state is pure with nonnegative amplitudes sqrt(λ).
    let mut amp = vec![1.0f64];
    for &x in features {
        let [l0, l1] = feature_probabilities(x)?;
        amp = amp.iter().flat_map(|a| [a * l0.sqrt(), a * l1.sqrt()]).collect();
    }
    let coherent: Vec<f64> =
        (0..d).map(|i| m.row(i).iter().zip(&amp).map(|(u, a)| u * a).sum::<C64>().norm_sqr()).collect();
    let dephased: Vec<f64> =
        (0..d).map(|i| m.row(i).iter().zip(&amp).map(|(u, a)| u.norm_sqr() * a * a).sum()).collect();
    let lost = coherent.iter().zip(&dephased).map(|(c, q)| c - q).collect();
    Ok(LambdaReport { features: features.to_vec(), coherent, dephased, lost })
}
