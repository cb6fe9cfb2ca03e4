//! Principal-component features, rescaled to `[0, 1]` with training extrema.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// PCA fitted on a training split.
#[derive(Clone, Debug)]
pub struct Pca {
    mean: DVector<f64>,
    /// `k x d`, rows sorted by decreasing variance.
    components: DMatrix<f64>,
    variances: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Pca {
    /// Fits `k` components to row vectors of length `d`.
    pub fn fit(rows: &[Vec<f64>], k: usize) -> Result<Self> {
        let n = rows.len();
        if n <= k || k == 0 {
            return Err(Error::DegenerateCovariance { samples: n, components: k });
        }
        let d = rows[0].len();
        let mut mean = DVector::zeros(d);
        for r in rows {
            mean += DVector::from_column_slice(r);
        }
        mean /= n as f64;

        // Accumulate X^T X blockwise to bound memory.
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for chunk in rows.chunks(1024) {
            let block = DMatrix::from_fn(chunk.len(), d, |i, j| chunk[i][j] - mean[j]);
            cov.gemm_tr(1.0, &block, &block, 1.0);
        }
        cov /= (n - 1) as f64;

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = &order[..k];
        let components = DMatrix::from_fn(k, d, |c, j| eig.eigenvectors[(j, top[c])]);
        let variances = top.iter().map(|&i| eig.eigenvalues[i]).collect();

        let mut pca = Self { mean, components, variances, min: vec![0.0; k], max: vec![0.0; k] };
        let mut min = vec![f64::INFINITY; k];
        let mut max = vec![f64::NEG_INFINITY; k];
        for r in rows {
            for (c, v) in pca.project(r).into_iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        pca.min = min;
        pca.max = max;
        Ok(pca)
    }

    pub fn components(&self) -> usize {
        self.variances.len()
    }

    /// Component variances, non-increasing.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Raw (centered) projection coordinates.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(row) - &self.mean;
        (&self.components * x).iter().copied().collect()
    }

    /// Projection min-max rescaled with training extrema and clamped to `[0, 1]`.
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        self.project(row)
            .into_iter()
            .enumerate()
            .map(|(c, v)| {
                let span = self.max[c] - self.min[c];
                if span > 0.0 {
                    ((v - self.min[c]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Squared reconstruction error of `row` using the first `k` components.
    pub fn reconstruction_error(&self, row: &[f64], k: usize) -> f64 {
        let x = DVector::from_column_slice(row) - &self.mean;
        let mut recon = DVector::zeros(x.len());
        for c in 0..k.min(self.components()) {
            let comp = self.components.row(c).transpose();
            recon += &comp * comp.dot(&x);
        }
        (x - recon).norm_squared()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn training_range(&self) -> (&[f64], &[f64]) {
        (&self.min, &self.max)
    }
}
