use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, DensityMatrix};
use crate::{Error, Result};

fn check_feature(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::FeatureOutOfRange(x))
    }
}

/// Qubit encoding `x -> (sin(pi x / 2), cos(pi x / 2))`.
pub fn encode_feature(x: f64) -> Result<[f64; 2]> {
    check_feature(x)?;
    let t = FRAC_PI_2 * x;
    Ok([t.sin(), t.cos()])
}

/// Diagonal `(lambda_0, lambda_1)` of the encoded qubit.
pub fn feature_probabilities(x: f64) -> Result<[f64; 2]> {
    let [a, b] = encode_feature(x)?;
    Ok([a * a, b * b])
}

/// `|f><f|` for the encoded feature. Since both amplitudes are non-negative,
/// `rho_01 = rho_10 = sqrt(lambda_0 lambda_1)`.
pub fn feature_density(x: f64) -> Result<DensityMatrix> {
    let [a, b] = encode_feature(x)?;
    Ok(DensityMatrix::from_matrix_unchecked(CMatrix::from_real(2, &[a * a, a * b, a * b, b * b])))
}

/// One classification sample: `m` features in `[0, 1]` and a binary label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    pub features: Vec<f64>,
    pub label: u8,
}

impl EncodedSample {
    pub fn new(features: Vec<f64>, label: u8) -> Result<Self> {
        if let Some(&bad) = features.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::FeatureOutOfRange(bad));
        }
        if label > 1 {
            return Err(Error::InvalidDataset(format!("label {label} is not binary")));
        }
        Ok(Self { features, label })
    }

    /// Per-feature single-qubit density matrices.
    pub fn qubits(&self) -> Vec<DensityMatrix> {
        self.features.iter().map(|&x| feature_density(x).expect("validated feature")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, purity};
    use proptest::prelude::*;

    #[test]
    fn encoding_endpoints() {
        let [a, b] = encode_feature(0.0).unwrap();
        assert_eq!((a, b), (0.0, 1.0));
        let [a, b] = encode_feature(1.0).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && b.abs() < 1e-15);
        let [a, b] = encode_feature(0.5).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a - s).abs() < 1e-15 && (b - s).abs() < 1e-15);
        assert!(matches!(encode_feature(1.2), Err(Error::FeatureOutOfRange(_))));
    }

    #[test]
    fn density_cases() {
        let rho = feature_density(0.0).unwrap();
        assert!(rho.matrix().max_abs_diff(&CMatrix::diagonal(&[0.0, 1.0])) < 1e-15);
        let rho = feature_density(0.5).unwrap();
        for z in rho.matrix().as_slice() {
            assert!((z.re - 0.5).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn encoding_is_unit_norm_and_nonnegative(x in 0.0f64..=1.0) {
            let [a, b] = encode_feature(x).unwrap();
            prop_assert!(a >= 0.0 && b >= 0.0);
            prop_assert!((a * a + b * b - 1.0).abs() < 1e-15);
        }

        #[test]
        fn density_is_rank_one_projector(x in 0.0f64..=1.0) {
            let rho = feature_density(x).unwrap();
            let m = rho.matrix();
            let (l0, l1) = (m[(0, 0)].re, m[(1, 1)].re);
            prop_assert!((m[(0, 1)].re - (l0 * l1).sqrt()).abs() < 1e-15);
            prop_assert!((l0 + l1 - 1.0).abs() < 1e-15);
            prop_assert!((purity(&rho) - 1.0).abs() < 1e-14);
            prop_assert!(min_eigenvalue(m) > -1e-12);
        }
    }
}
