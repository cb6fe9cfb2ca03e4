//! Local dephasing in the computational basis.
//!
//! A single-qubit dephasing channel at rate `p` damps the off-diagonal
//! entries by `1 - p`. Acting independently on every qubit of a register, it
//! damps entry `(i, j)` by `(1 - p)^h` with `h` the Hamming distance between
//! the bitstrings `i` and `j`. That closed form is what the hot path uses; the
//! Kraus form `K0 = sqrt(1 - p/2) I`, `K1 = sqrt(p/2) Z` is kept for checking.

use crate::linalg::{kron, pauli_z, CMatrix, DensityMatrix, C64};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DephasingChannel {
    p: f64,
    qubit_count: usize,
}

pub(crate) fn check_rate(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::RateOutOfRange(p))
    }
}

impl DephasingChannel {
    pub fn new(p: f64, qubit_count: usize) -> Result<Self> {
        check_rate(p)?;
        Ok(Self { p, qubit_count })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    /// The two single-qubit Kraus operators.
    pub fn kraus_operators(&self) -> [CMatrix; 2] {
        let k0 = CMatrix::identity(2).scale(C64::new((1.0 - self.p / 2.0).sqrt(), 0.0));
        let k1 = pauli_z().scale(C64::new((self.p / 2.0).sqrt(), 0.0));
        [k0, k1]
    }

    /// `sum_i K_i† K_i`, which must be the identity.
    pub fn completeness(&self) -> CMatrix {
        let mut acc = CMatrix::zeros(2);
        for k in self.kraus_operators() {
            acc.add_assign(&k.adjoint().matmul(&k));
        }
        acc
    }

    /// Sums all `2^m` tensor products of the per-qubit Kraus operators.
    pub fn apply_kraus(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let m = self.qubit_count;
        if rho.qubit_count() != m {
            return Err(Error::DimensionMismatch { expected: 1 << m, found: rho.dim() });
        }
        let ks = self.kraus_operators();
        let mut out = CMatrix::zeros(rho.dim());
        for choice in 0..1usize << m {
            let mut op = CMatrix::identity(1);
            for q in 0..m {
                op = kron(&op, &ks[(choice >> (m - 1 - q)) & 1]);
            }
            out.add_assign(&op.matmul(rho.matrix()).matmul(&op.adjoint()));
        }
        Ok(DensityMatrix::from_matrix_unchecked(out))
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.qubit_count() != self.qubit_count {
            return Err(Error::DimensionMismatch { expected: 1 << self.qubit_count, found: rho.dim() });
        }
        dephase_local(rho, self.p)
    }
}

/// Single-qubit dephasing: off-diagonals times `1 - p`.
pub fn dephase_single(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_rate(p)?;
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: rho.dim() });
    }
    dephase_local(rho, p)
}

/// Local dephasing on every qubit of the register.
pub fn dephase_local(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_rate(p)?;
    let mut m = rho.matrix().clone();
    let n = rho.qubit_count();
    dephase_in_place(&mut m, (1usize << n) - 1, p);
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Dephases only the listed qubits (qubit 0 is the most significant).
pub fn dephase_qubits(rho: &DensityMatrix, qubits: &[usize], p: f64) -> Result<DensityMatrix> {
    check_rate(p)?;
    let n = rho.qubit_count();
    let mut mask = 0;
    for &q in qubits {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, len: n });
        }
        mask |= 1 << (n - 1 - q);
    }
    let mut m = rho.matrix().clone();
    dephase_in_place(&mut m, mask, p);
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Damps entry `(i, j)` by `(1 - p)^popcount((i ^ j) & mask)`.
///
/// `mask` selects the dephased qubits as bits of the basis index. The map is
/// self-adjoint, so the same call propagates cotangents backwards.
pub(crate) fn dephase_in_place(m: &mut CMatrix, mask: usize, p: f64) {
    if p == 0.0 || mask == 0 {
        return;
    }
    let d = m.dim();
    let q = 1.0 - p;
    let max_h = (mask & (d - 1)).count_ones() as usize;
    let powers: Vec<f64> = (0..=max_h).map(|h| q.powi(h as i32)).collect();
    let data = m.as_mut_slice();
    for i in 0..d {
        for j in 0..d {
            let h = ((i ^ j) & mask).count_ones() as usize;
            if h > 0 {
                data[i * d + j] *= powers[h];
            }
        }
    }
}

/// Bit mask for the leading `count` qubits of an `n`-qubit register.
pub(crate) fn leading_mask(n: usize, count: usize) -> usize {
    if count == 0 {
        return 0;
    }
    ((1usize << count) - 1) << (n - count)
}

/// `D[rho] = sum_i <i|rho|i> |i><i|`.
pub fn full_dephase(rho: &DensityMatrix) -> DensityMatrix {
    let d = rho.dim();
    let mut m = CMatrix::zeros(d);
    for i in 0..d {
        m[(i, i)] = rho.matrix()[(i, i)];
    }
    DensityMatrix::from_matrix_unchecked(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testing::{random_density, random_pure};
    use crate::linalg::{kron_density, partial_trace, purity, ONE, ZERO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_qubit_cases() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut r, 2);
        let same = dephase_single(&rho, 0.0).unwrap();
        assert_eq!(same, rho);
        let diag = dephase_single(&rho, 1.0).unwrap();
        assert_eq!(diag.matrix()[(0, 1)], ZERO);
        assert_eq!(diag.matrix()[(0, 0)], rho.matrix()[(0, 0)]);

        let half = DensityMatrix::new(CMatrix::from_real(2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
        let out = dephase_single(&half, 0.4).unwrap();
        assert!((out.matrix()[(0, 1)].re - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rate_out_of_range() {
        let rho = DensityMatrix::maximally_mixed(1);
        assert!(matches!(dephase_single(&rho, 1.5), Err(Error::RateOutOfRange(_))));
        assert!(matches!(dephase_local(&rho, -0.1), Err(Error::RateOutOfRange(_))));
        assert!(DephasingChannel::new(2.0, 1).is_err());
    }

    #[test]
    fn kraus_completeness() {
        for p in [0.0, 0.3, 1.0] {
            let c = DephasingChannel::new(p, 1).unwrap().completeness();
            assert!(c.max_abs_diff(&CMatrix::identity(2)) < 1e-12);
        }
    }

    #[test]
    fn product_state_dephases_factorwise() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (random_pure(&mut r, 2), random_pure(&mut r, 2));
        let p = 0.35;
        let joint = dephase_local(&kron_density(&a, &b), p).unwrap();
        let split = kron_density(&dephase_single(&a, p).unwrap(), &dephase_single(&b, p).unwrap());
        assert!(joint.matrix().max_abs_diff(split.matrix()) < 1e-15);
    }

    #[test]
    fn bell_state_full_dephase() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(&[C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)]).unwrap();
        let out = dephase_local(&bell, 1.0).unwrap();
        let expect = CMatrix::diagonal(&[0.5, 0.0, 0.0, 0.5]);
        assert!(out.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn anti_diagonal_damped_squared() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(&mut r, 4);
        let p = 0.3;
        let out = dephase_local(&rho, p).unwrap();
        let via_kraus = DephasingChannel::new(p, 2).unwrap().apply_kraus(&rho).unwrap();
        let expect = rho.matrix()[(0, 3)] * (1.0 - p) * (1.0 - p);
        assert!((out.matrix()[(0, 3)] - expect).norm() < 1e-15);
        assert!((via_kraus.matrix()[(0, 3)] - expect).norm() < 1e-15);
    }

    #[test]
    fn full_dephase_cases() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let diag = DensityMatrix::new(CMatrix::diagonal(&[0.2, 0.8])).unwrap();
        assert_eq!(full_dephase(&diag), diag);

        let plus = DensityMatrix::new(CMatrix::from_real(2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
        assert_eq!(full_dephase(&plus), DensityMatrix::maximally_mixed(1));

        let rho = random_density(&mut r, 8);
        assert_eq!(full_dephase(&rho), dephase_local(&rho, 1.0).unwrap());
        assert_eq!(full_dephase(&full_dephase(&rho)), full_dephase(&rho));
    }

    #[test]
    fn composition_multiplies_damping() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(&mut r, 8);
        let (p, q) = (0.2, 0.45);
        let twice = dephase_local(&dephase_local(&rho, p).unwrap(), q).unwrap();
        let once = dephase_local(&rho, 1.0 - (1.0 - p) * (1.0 - q)).unwrap();
        assert!(twice.matrix().max_abs_diff(once.matrix()) < 1e-12);
    }

    #[test]
    fn dephasing_commutes_with_partial_trace_of_dephased_part() {
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let rho = random_density(&mut r, 8);
        // Dephase qubit 0 only, then trace it out.
        let mut m = rho.matrix().clone();
        dephase_in_place(&mut m, leading_mask(3, 1), 0.7);
        let a = partial_trace(&DensityMatrix::from_matrix_unchecked(m), &[0]).unwrap();
        let b = partial_trace(&rho, &[0]).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
    }

    #[test]
    fn purity_drop_formula() {
        // |+><+| at p = 1: purity 1 - 4 * 1 * 0.25 * 0.5 = 0.5.
        let plus = DensityMatrix::new(CMatrix::from_real(2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
        let out = dephase_single(&plus, 1.0).unwrap();
        assert!((purity(&out) - 0.5).abs() < 1e-15);
        assert!((purity(&out) - (1.0 - 4.0 * 0.25 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        for p in [0.0, 0.1, 0.5, 1.0] {
            let out = dephase_local(&random_density(&mut r, 8), p).unwrap();
            assert!((out.matrix().trace() - ONE).norm() < 1e-12);
            assert!(out.matrix().hermiticity_error() < 1e-15);
        }
    }
}
