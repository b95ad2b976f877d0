use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Eigenvalues at or below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `dim x k`, orthonormal columns in order of decreasing variance.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
    /// Sum of all covariance eigenvalues.
    pub total_variance: f64,
    pub n_rows: usize,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.cols()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// `(x - mean) · components` for one row.
    pub fn project_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::shape(
                "pca_transform",
                format!("row of width {} for a {}-dimensional model", x.len(), self.dim()),
            ));
        }
        let k = self.k();
        let mut out = vec![0.0; k];
        for (i, (&xi, &mi)) in x.iter().zip(&self.mean).enumerate() {
            let d = xi - mi;
            if d != 0.0 {
                for (o, &c) in out.iter_mut().zip(self.components.row(i)) {
                    *o += d * c;
                }
            }
        }
        Ok(out)
    }
}

/// Streaming first and second moments; rows with few nonzeros are cheap to add.
#[derive(Debug, Clone)]
pub struct PcaAccumulator {
    dim: usize,
    n: usize,
    sum: Vec<f64>,
    /// Upper triangle of `Σ x xᵀ`, row-major `dim x dim`.
    second: Vec<f64>,
    nz: Vec<(usize, f64)>,
}

impl PcaAccumulator {
    pub fn new(dim: usize) -> Self {
        PcaAccumulator {
            dim,
            n: 0,
            sum: vec![0.0; dim],
            second: vec![0.0; dim * dim],
            nz: Vec::with_capacity(dim),
        }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::shape(
                "pca_fit",
                format!("row of width {}, expected {}", x.len(), self.dim),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pca input row".into()));
        }
        self.nz.clear();
        self.nz.extend(x.iter().copied().enumerate().filter(|&(_, v)| v != 0.0));
        for (a, &(i, xi)) in self.nz.iter().enumerate() {
            self.sum[i] += xi;
            let row = &mut self.second[i * self.dim..(i + 1) * self.dim];
            for &(j, xj) in &self.nz[a..] {
                row[j] += xi * xj;
            }
        }
        self.n += 1;
        Ok(())
    }

    /// Eigendecomposition of the covariance, keeping the top `k` components.
    pub fn finish(&self, k: usize) -> Result<PcaModel> {
        let (d, n) = (self.dim, self.n);
        if k == 0 || k > d {
            return Err(Error::Pca(format!("k = {k} must be in 1..={d}")));
        }
        if n < k {
            return Err(Error::Pca(format!("{n} rows cannot give {k} components")));
        }
        let nf = n as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / nf).collect();
        let cov = DMatrix::from_fn(d, d, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            self.second[a * d + b] / nf - mean[a] * mean[b]
        });
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let rank = order
            .iter()
            .filter(|&&i| eig.eigenvalues[i] > RANK_TOLERANCE * top && eig.eigenvalues[i] > 0.0)
            .count();
        if k > rank {
            return Err(Error::Pca(format!(
                "requested {k} components but the data has rank {rank}"
            )));
        }
        let mut components = Matrix::zeros(d, k);
        for (c, &i) in order[..k].iter().enumerate() {
            let v = eig.eigenvectors.column(i);
            let mut pivot = 0;
            for r in 1..d {
                if v[r].abs() > v[pivot].abs() {
                    pivot = r;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for r in 0..d {
                components.set(r, c, sign * v[r]);
            }
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance: order[..k].iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect(),
            total_variance: eig.eigenvalues.iter().map(|v| v.max(0.0)).sum(),
            n_rows: n,
        })
    }
}

/// Fits principal components to the rows of `x`.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let mut acc = PcaAccumulator::new(x.cols());
    for r in 0..x.rows() {
        acc.add(x.row(r))?;
    }
    acc.finish(k)
}

pub fn pca_transform(x: &Matrix, model: &PcaModel) -> Result<Matrix> {
    let mut out = Vec::with_capacity(x.rows() * model.k());
    for r in 0..x.rows() {
        out.extend(model.project_row(x.row(r))?);
    }
    Matrix::from_vec(x.rows(), model.k(), out)
}

/// Maps reduced rows back to the original space.
pub fn pca_reconstruct(y: &Matrix, model: &PcaModel) -> Result<Matrix> {
    let mut out = y.matmul_nt(&model.components)?;
    out.add_row_broadcast(&model.mean)?;
    Ok(out)
}
