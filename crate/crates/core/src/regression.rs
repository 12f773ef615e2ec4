//! Polynomial least-squares regression for Monte Carlo conditional expectations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge shrinkage, relative to the mean diagonal of the normal matrix, used
/// when the normal equations are numerically singular.
pub const RIDGE: f64 = 1e-8;

/// Monomials `prod z_i^{e_i}` with total degree at most `degree`.
pub fn total_degree_exponents(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=left {
            prefix.push(e);
            rec(dim, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, degree, &mut Vec::new(), &mut out);
    out.sort_by_key(|e| (e.iter().sum::<u32>(), std::cmp::Reverse(e.clone())));
    out
}

/// Fitted `E[response | z] ~ sum_j c_j m_j((z - mean) / scale)`.
///
/// Regressors with no spread in the sample are dropped; the surface is then
/// constant in them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    dim: usize,
    active: Vec<usize>,
    center: Vec<f64>,
    scale: Vec<f64>,
    exponents: Vec<Vec<u32>>,
    coef: Vec<f64>,
    /// `(X^T X)^{-1}` in the standardized basis, row-major.
    inverse_gram: Vec<f64>,
    pub residual_variance: f64,
    pub ridge: bool,
    pub samples: usize,
}

impl PolyFit {
    /// Fits `responses` on rows of `regressors` (each of length `dim`).
    pub fn fit(regressors: &[Vec<f64>], responses: &[f64], degree: u32) -> Result<Self> {
        assert_eq!(regressors.len(), responses.len());
        let n = responses.len();
        let dim = regressors.first().map_or(0, Vec::len);
        let mut active = Vec::new();
        let mut center = Vec::new();
        let mut scale = Vec::new();
        for i in 0..dim {
            let col: Vec<f64> = regressors.iter().map(|r| r[i]).collect();
            let mean = col.iter().sum::<f64>() / n.max(1) as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
            if sd > 1e-12 * (1.0 + mean.abs()) {
                active.push(i);
                center.push(mean);
                scale.push(sd);
            }
        }
        let exponents = total_degree_exponents(active.len(), degree);
        let p = exponents.len();
        if n < p || n < 2 {
            return Err(Error::RankDeficient {
                samples: n,
                basis: p,
            });
        }
        let mut fit = Self {
            dim,
            active,
            center,
            scale,
            exponents,
            coef: vec![0.0; p],
            inverse_gram: Vec::new(),
            residual_variance: 0.0,
            ridge: false,
            samples: n,
        };
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        let mut row = vec![0.0; p];
        for (z, &v) in regressors.iter().zip(responses) {
            fit.features(z, &mut row);
            for a in 0..p {
                rhs[a] += row[a] * v;
                for b in 0..=a {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        let chol = gram.clone().cholesky().filter(|c| {
            let d = c.l_dirty().diagonal();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
                (lo.min(x * x), hi.max(x * x))
            });
            lo > 1e-13 * hi
        });
        let chol = match chol {
            Some(c) => c,
            None => {
                fit.ridge = true;
                let shrink = RIDGE * gram.trace() / p as f64;
                let mut g = gram.clone();
                for a in 0..p {
                    g[(a, a)] += shrink.max(f64::MIN_POSITIVE);
                }
                g.cholesky().ok_or(Error::RankDeficient {
                    samples: n,
                    basis: p,
                })?
            }
        };
        let coef = chol.solve(&rhs);
        let inv = chol.inverse();
        fit.coef = coef.iter().copied().collect();
        fit.inverse_gram = inv.transpose().iter().copied().collect();
        let dof = (n - p).max(1) as f64;
        let mut rss = 0.0;
        for (z, &v) in regressors.iter().zip(responses) {
            rss += (v - fit.eval(z)).powi(2);
        }
        fit.residual_variance = rss / dof;
        Ok(fit)
    }

    fn features(&self, z: &[f64], out: &mut [f64]) {
        let u: Vec<f64> = self
            .active
            .iter()
            .enumerate()
            .map(|(j, &i)| (z[i] - self.center[j]) / self.scale[j])
            .collect();
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = e.iter().zip(&u).map(|(&k, &v)| v.powi(k as i32)).product();
        }
    }

    pub fn basis_len(&self) -> usize {
        self.exponents.len()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut row = vec![0.0; self.exponents.len()];
        self.features(z, &mut row);
        row.iter().zip(&self.coef).map(|(a, b)| a * b).sum()
    }

    /// Gradient with respect to all `dim` regressors (zero for dropped ones).
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = self
            .active
            .iter()
            .enumerate()
            .map(|(j, &i)| (z[i] - self.center[j]) / self.scale[j])
            .collect();
        let mut grad = vec![0.0; self.dim];
        for (e, c) in self.exponents.iter().zip(&self.coef) {
            for (j, &i) in self.active.iter().enumerate() {
                if e[j] == 0 {
                    continue;
                }
                let mut term = c * e[j] as f64 * u[j].powi(e[j] as i32 - 1) / self.scale[j];
                for (m, &k) in e.iter().enumerate() {
                    if m != j {
                        term *= u[m].powi(k as i32);
                    }
                }
                grad[i] += term;
            }
        }
        grad
    }

    /// Standard error of the fitted mean at `z`.
    pub fn stderr(&self, z: &[f64]) -> f64 {
        let p = self.exponents.len();
        let mut row = vec![0.0; p];
        self.features(z, &mut row);
        let mut q = 0.0;
        for a in 0..p {
            for b in 0..p {
                q += row[a] * self.inverse_gram[a * p + b] * row[b];
            }
        }
        (self.residual_variance * q.max(0.0)).sqrt()
    }
}
