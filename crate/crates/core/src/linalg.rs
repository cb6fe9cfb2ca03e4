//! Dense complex linear algebra over qubit registers.
//!
//! Qubit ordering: in a register of `n` qubits, qubit 0 is the most
//! significant bit of the basis index. `kron(a, b)` places `a` on the leading
//! qubits. Every routine in the crate follows this convention.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::ops::{Index, IndexMut};

use crate::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from row-major entries. Panics if the length is not a square.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim, "entry count must be dim^2");
        Self { dim, data }
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Self {
        Self::from_vec(dim, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of qubits, if the dimension is a power of two.
    pub fn qubits(&self) -> Option<usize> {
        self.dim.is_power_of_two().then(|| self.dim.trailing_zeros() as usize)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i])
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn diag_real(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).collect()
    }

    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &rhs.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, rhs: &CMatrix, s: f64) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b * s;
        }
    }

    pub fn sub(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }

    /// Largest elementwise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &CMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data.iter().zip(&rhs.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A†|` elementwise.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut err = 0.0f64;
        for i in 0..n {
            for j in i..n {
                err = err.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        err
    }

    /// `(A + A†) / 2`.
    pub fn hermitian_part(&self) -> CMatrix {
        let n = self.dim;
        Self::from_fn(n, |i, j| (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix over a qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

impl DensityMatrix {
    /// Validates hermiticity, unit trace and (in debug builds) positivity.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.qubits().is_none() {
            return Err(Error::NotQubitRegister(m.dim()));
        }
        let herm = m.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::BadTrace(tr.re));
        }
        #[cfg(debug_assertions)]
        {
            let min = min_eigenvalue(&m);
            if min < -PSD_TOL {
                return Err(Error::NotPositive(min));
            }
        }
        Ok(Self(m))
    }

    /// Wraps a matrix without validation. Callers guarantee the invariants.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    /// `|psi><psi|` for a normalised state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let n = psi.len();
        Self::new(CMatrix::from_fn(n, |i, j| psi[i] * psi[j].conj()))
    }

    /// Computational basis state `|index><index|` on `qubits` qubits.
    pub fn basis(qubits: usize, index: usize) -> Self {
        let mut m = CMatrix::zeros(1 << qubits);
        m[(index, index)] = ONE;
        Self(m)
    }

    pub fn maximally_mixed(qubits: usize) -> Self {
        let d = 1 << qubits;
        Self(CMatrix::identity(d).scale(C64::new(1.0 / d as f64, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn qubit_count(&self) -> usize {
        self.0.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Diagonal entries `lambda_i = rho_ii`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.0.diag_real()
    }
}

/// Hermitian generator `H` of a node unitary `U = exp(iH)`.
///
/// Stored as a real diagonal plus the strict upper triangle, so `H = H†`
/// holds exactly. The packed real layout used by the optimizer and the
/// checkpoint format is `[diag(0..n), re(H_01), im(H_01), re(H_02), ...]`
/// with the upper triangle walked row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianParam {
    dim: usize,
    packed: Vec<f64>,
}

impl HermitianParam {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, packed: vec![0.0; dim * dim] }
    }

    /// Number of independent real degrees of freedom, `dim^2`.
    pub fn real_dof(dim: usize) -> usize {
        dim * dim
    }

    pub fn from_packed(dim: usize, packed: Vec<f64>) -> Result<Self> {
        if packed.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: packed.len() });
        }
        Ok(Self { dim, packed })
    }

    /// Takes the upper triangle and the real diagonal of `m`.
    pub fn from_matrix(m: &CMatrix) -> Result<Self> {
        let herm = m.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let n = m.dim();
        let mut packed = Vec::with_capacity(n * n);
        packed.extend((0..n).map(|i| m[(i, i)].re));
        for i in 0..n {
            for j in i + 1..n {
                packed.push(m[(i, j)].re);
                packed.push(m[(i, j)].im);
            }
        }
        Ok(Self { dim: n, packed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.packed
    }

    pub fn to_matrix(&self) -> CMatrix {
        let n = self.dim;
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(self.packed[i], 0.0);
        }
        let mut idx = n;
        for i in 0..n {
            for j in i + 1..n {
                let z = C64::new(self.packed[idx], self.packed[idx + 1]);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
                idx += 2;
            }
        }
        m
    }

    /// Packs a Hermitian matrix gradient `G` (with `dL = Tr(G dH)`) into the
    /// gradient with respect to the packed real coordinates.
    pub fn packed_gradient(g: &CMatrix) -> Vec<f64> {
        let n = g.dim();
        let mut out = Vec::with_capacity(n * n);
        out.extend((0..n).map(|i| g[(i, i)].re));
        for i in 0..n {
            for j in i + 1..n {
                out.push(2.0 * g[(i, j)].re);
                out.push(2.0 * g[(i, j)].im);
            }
        }
        out
    }
}

/// A unitary matrix, `U†U = I` within `1e-10`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

pub const UNITARY_TOL: f64 = 1e-10;

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let err = unitarity_error(&m);
        if err > UNITARY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim))
    }

    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self(CMatrix::from_real(2, &[s, s, s, -s]))
    }

    /// Permutation unitary with `U |j> = |perm[j]>`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut m = CMatrix::zeros(n);
        for (j, &i) in perm.iter().enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            m[(i, j)] = ONE;
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        UnitaryMatrix(self.0.adjoint())
    }
}

/// `max |U†U - I|` elementwise.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    u.adjoint().matmul(u).max_abs_diff(&CMatrix::identity(u.dim()))
}

/// Kronecker product; `a` occupies the most significant index block.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (na, nb) = (a.dim(), b.dim());
    let n = na * nb;
    let mut out = CMatrix::zeros(n);
    for ia in 0..na {
        for ja in 0..na {
            let x = a[(ia, ja)];
            if x == ZERO {
                continue;
            }
            for ib in 0..nb {
                let orow = (ia * nb + ib) * n + ja * nb;
                let brow = b.row(ib);
                for (o, y) in out.data[orow..orow + nb].iter_mut().zip(brow) {
                    *o = x * y;
                }
            }
        }
    }
    out
}

pub fn kron_density(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    DensityMatrix(kron(a.matrix(), b.matrix()))
}

/// `U rho U†`, re-symmetrized.
pub fn apply_unitary(rho: &DensityMatrix, u: &UnitaryMatrix) -> Result<DensityMatrix> {
    if rho.dim() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), found: rho.dim() });
    }
    let out = u.matrix().matmul(rho.matrix()).matmul(&u.matrix().adjoint());
    Ok(DensityMatrix(out.hermitian_part()))
}

/// Maps each basis index of a register onto the split (kept, traced) pair
/// of sub-indices. Returns `(kept_part, traced_part)` lookup tables such that
/// `full = kept_part[k] | traced_part[t]`.
fn split_tables(n: usize, traced: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let kept_q: Vec<usize> = (0..n).filter(|&q| !traced[q]).collect();
    let traced_q: Vec<usize> = (0..n).filter(|&q| traced[q]).collect();
    let spread = |qs: &[usize]| -> Vec<usize> {
        let w = qs.len();
        (0..1usize << w)
            .map(|s| {
                let mut full = 0;
                for (pos, &q) in qs.iter().enumerate() {
                    if (s >> (w - 1 - pos)) & 1 == 1 {
                        full |= 1 << (n - 1 - q);
                    }
                }
                full
            })
            .collect()
    };
    (spread(&kept_q), spread(&traced_q))
}

fn traced_mask(n: usize, traced_qubits: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &q in traced_qubits {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, len: n });
        }
        mask[q] = true;
    }
    if mask.iter().all(|&t| t) {
        return Err(Error::EmptyRemainder);
    }
    Ok(mask)
}

/// Partial trace of an arbitrary (not necessarily Hermitian) matrix over the
/// listed qubits. Remaining qubits keep their relative order.
pub fn partial_trace_matrix(m: &CMatrix, traced_qubits: &[usize]) -> Result<CMatrix> {
    let n = m.qubits().ok_or(Error::NotQubitRegister(m.dim()))?;
    let mask = traced_mask(n, traced_qubits)?;
    let (keep, trace) = split_tables(n, &mask);
    let d = m.dim();
    let mut out = CMatrix::zeros(keep.len());
    for (r, &kr) in keep.iter().enumerate() {
        for (c, &kc) in keep.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &trace {
                acc += m.data[(kr | t) * d + (kc | t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

pub fn partial_trace(rho: &DensityMatrix, traced_qubits: &[usize]) -> Result<DensityMatrix> {
    partial_trace_matrix(rho.matrix(), traced_qubits).map(DensityMatrix)
}

/// Adjoint of the partial trace: `G ⊗ I` on the traced positions of an
/// `n`-qubit register.
pub fn embed_identity(g: &CMatrix, n: usize, traced_qubits: &[usize]) -> Result<CMatrix> {
    let mask = traced_mask(n, traced_qubits)?;
    let (keep, trace) = split_tables(n, &mask);
    if keep.len() != g.dim() {
        return Err(Error::DimensionMismatch { expected: keep.len(), found: g.dim() });
    }
    let d = 1 << n;
    let mut out = CMatrix::zeros(d);
    for (r, &kr) in keep.iter().enumerate() {
        for (c, &kc) in keep.iter().enumerate() {
            let v = g[(r, c)];
            for &t in &trace {
                out.data[(kr | t) * d + (kc | t)] = v;
            }
        }
    }
    Ok(out)
}

/// Reorders qubits: qubit `k` of the result is qubit `order[k]` of the input.
pub fn permute_qubits(m: &CMatrix, order: &[usize]) -> CMatrix {
    let n = order.len();
    debug_assert_eq!(m.dim(), 1 << n);
    let map = permutation_index_map(order);
    let d = m.dim();
    CMatrix::from_fn(d, |i, j| m.data[map[i] * d + map[j]])
}

/// For each new basis index, the old basis index under `order`.
pub(crate) fn permutation_index_map(order: &[usize]) -> Vec<usize> {
    let n = order.len();
    (0..1usize << n)
        .map(|i| {
            let mut old = 0;
            for (k, &q) in order.iter().enumerate() {
                if (i >> (n - 1 - k)) & 1 == 1 {
                    old |= 1 << (n - 1 - q);
                }
            }
            old
        })
        .collect()
}

pub(crate) fn inverse_order(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (k, &q) in order.iter().enumerate() {
        inv[q] = k;
    }
    inv
}

/// `(U ⊗ I) M` where `U` acts on the leading qubits of `M`'s register.
pub(crate) fn left_apply_prefix(u: &CMatrix, m: &CMatrix) -> CMatrix {
    let du = u.dim();
    let d = m.dim();
    let rest = d / du;
    let mut out = CMatrix::zeros(d);
    // Rows (a r) of the result are sum_c U[a,c] * rows (c r) of M.
    for a in 0..du {
        for c in 0..du {
            let x = u[(a, c)];
            if x == ZERO {
                continue;
            }
            for r in 0..rest {
                let src = (c * rest + r) * d;
                let dst = (a * rest + r) * d;
                let (o, s) = (&mut out.data[dst..dst + d], &m.data[src..src + d]);
                for (oo, ss) in o.iter_mut().zip(s) {
                    *oo += x * ss;
                }
            }
        }
    }
    out
}

/// `M (U ⊗ I)†`.
pub(crate) fn right_apply_prefix_adjoint(m: &CMatrix, u: &CMatrix) -> CMatrix {
    let du = u.dim();
    let d = m.dim();
    let rest = d / du;
    let mut out = CMatrix::zeros(d);
    for row in 0..d {
        let mrow = &m.data[row * d..(row + 1) * d];
        let orow = &mut out.data[row * d..(row + 1) * d];
        for b in 0..du {
            for c in 0..du {
                let x = u[(b, c)].conj();
                if x == ZERO {
                    continue;
                }
                for s in 0..rest {
                    orow[b * rest + s] += mrow[c * rest + s] * x;
                }
            }
        }
    }
    out
}

/// `(U ⊗ I) M (U ⊗ I)†`.
pub(crate) fn conjugate_prefix(u: &CMatrix, m: &CMatrix) -> CMatrix {
    right_apply_prefix_adjoint(&left_apply_prefix(u, m), u)
}

/// Eigendecomposition `H = V diag(lambda) V†` together with `U = exp(iH)`.
#[derive(Clone, Debug)]
pub struct ExpmFactors {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    pub unitary: UnitaryMatrix,
}

impl ExpmFactors {
    pub fn new(h: &HermitianParam) -> Result<Self> {
        let hm = h.to_matrix();
        if !hm.is_finite() {
            return Err(Error::Eigensolver);
        }
        let n = h.dim();
        let eig = SymmetricEigen::try_new(hm.to_nalgebra(), f64::EPSILON, 0).ok_or(Error::Eigensolver)?;
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::Eigensolver);
        }
        let v = CMatrix::from_fn(n, |i, j| eig.eigenvectors[(i, j)]);
        let phases: Vec<C64> = eigenvalues.iter().map(|&l| C64::from_polar(1.0, l)).collect();
        let u = CMatrix::from_fn(n, |i, j| (0..n).map(|k| v[(i, k)] * phases[k] * v[(j, k)].conj()).sum());
        Ok(Self { eigenvalues, eigenvectors: v, unitary: UnitaryMatrix(u) })
    }

    /// Divided differences `phi(l_a, l_b)` with `dU = V (i E~ ∘ phi) V†`.
    fn phi(&self) -> CMatrix {
        let l = &self.eigenvalues;
        CMatrix::from_fn(l.len(), |a, b| divided_phase(l[a], l[b]))
    }

    /// Directional derivative of `exp(iH)` along the Hermitian `direction`.
    pub fn directional_derivative(&self, direction: &CMatrix) -> Result<CMatrix> {
        let n = self.eigenvalues.len();
        if direction.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: direction.dim() });
        }
        let herm = direction.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let v = &self.eigenvectors;
        let vh = v.adjoint();
        let e = vh.matmul(direction).matmul(v);
        let phi = self.phi();
        let i = C64::new(0.0, 1.0);
        let inner = CMatrix::from_fn(n, |a, b| i * e[(a, b)] * phi[(a, b)]);
        Ok(v.matmul(&inner).matmul(&vh))
    }

    /// Pulls a unitary cotangent back onto `H`.
    ///
    /// Given `A` with `dL = 2 Re Tr(A dU)`, returns the Hermitian `G` with
    /// `dL = Tr(G dH)` for every Hermitian perturbation `dH`.
    pub fn pullback(&self, a: &CMatrix) -> CMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let vh = v.adjoint();
        let a_eig = vh.matmul(a).matmul(v);
        let phi = self.phi();
        let i = C64::new(0.0, 1.0);
        // F = i * phi; C = 2 V (A~ ∘ F^T) V†
        let inner = CMatrix::from_fn(n, |x, y| a_eig[(x, y)] * i * phi[(y, x)] * 2.0);
        v.matmul(&inner).matmul(&vh).hermitian_part()
    }
}

/// `(e^{ix} - e^{iy}) / (i (x - y))`, with limit `e^{ix}` for `|x - y| < 1e-12`.
fn divided_phase(x: f64, y: f64) -> C64 {
    let dx = x - y;
    if dx.abs() < 1e-12 {
        C64::from_polar(1.0, 0.5 * (x + y))
    } else {
        (C64::from_polar(1.0, x) - C64::from_polar(1.0, y)) / C64::new(0.0, dx)
    }
}

/// `U = exp(iH)` via eigendecomposition.
pub fn hermitian_expm(h: &HermitianParam) -> Result<UnitaryMatrix> {
    ExpmFactors::new(h).map(|f| f.unitary)
}

/// Directional derivative of `exp(iH)` along `direction` (Daleckii-Krein).
pub fn expm_grad(h: &HermitianParam, direction: &CMatrix) -> Result<CMatrix> {
    ExpmFactors::new(h)?.directional_derivative(direction)
}

/// `Tr(rho^2)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let n = m.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (m[(i, j)] * m[(j, i)]).re;
        }
    }
    acc
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(m.hermitian_part().to_nalgebra());
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(m.hermitian_part().to_nalgebra());
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_real(2, &[1.0, 0.0, 0.0, -1.0])
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> HermitianParam {
        let packed = (0..dim * dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        HermitianParam::from_packed(dim, packed).unwrap()
    }

    pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> UnitaryMatrix {
        hermitian_expm(&random_hermitian(rng, dim, 1.5)).unwrap()
    }

    pub fn random_density<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
        // Wishart-style: G G† / Tr.
        let g = CMatrix::from_fn(dim, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let m = g.matmul(&g.adjoint());
        let tr = m.trace().re;
        DensityMatrix::new(m.scale(C64::new(1.0 / tr, 0.0)).hermitian_part()).unwrap()
    }

    pub fn random_pure<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
        let mut psi: Vec<C64> =
            (0..dim).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|z| *z /= norm);
        DensityMatrix::pure(&psi).unwrap()
    }
}
