use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;

/// Set of multi-indices `(i_1, …, i_d)` selecting tensor-product Hermite
/// polynomials.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    dim: usize,
    indices: Vec<Vec<u32>>,
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `C(d + ν, ν)`, the size of the total-degree basis.
pub fn total_degree_cardinality(d: usize, degree: usize) -> u64 {
    binomial((d + degree) as u64, degree as u64)
}

impl MultiIndexSet {
    pub fn new(dim: usize, indices: Vec<Vec<u32>>) -> Result<Self> {
        if indices.iter().any(|i| i.len() != dim) {
            return Err(Error::InvalidArgument(format!("every multi-index must have {dim} entries")));
        }
        let mut seen = std::collections::HashSet::new();
        if !indices.iter().all(|i| seen.insert(i.clone())) {
            return Err(Error::InvalidArgument("duplicate multi-index".into()));
        }
        Ok(Self { dim, indices })
    }

    /// All multi-indices of total degree at most `degree`, graded by degree
    /// and reverse-lexicographic within a degree. The constant term is first.
    pub fn total_degree(dim: usize, degree: usize) -> Self {
        Self::hyperbolic(dim, degree, 1.0)
    }

    /// Hyperbolic truncation `(Σ i_k^q)^{1/q} ≤ degree`; `q = 1` is the
    /// total-degree set.
    pub fn hyperbolic(dim: usize, degree: usize, q: f64) -> Self {
        let mut out = Vec::new();
        for total in 0..=degree {
            let mut cur = vec![0u32; dim];
            compositions(dim, total as u32, 0, &mut cur, &mut out);
        }
        if q < 1.0 {
            let lim = (degree as f64).powf(q) * (1.0 + 1e-12);
            out.retain(|idx| idx.iter().map(|&i| (i as f64).powf(q)).sum::<f64>() <= lim);
        }
        Self { dim, indices: out }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn max_degree(&self) -> usize {
        self.indices.iter().map(|i| i.iter().sum::<u32>() as usize).max().unwrap_or(0)
    }

    fn max_partial_degree(&self) -> usize {
        self.indices.iter().flat_map(|i| i.iter()).copied().max().unwrap_or(0) as usize
    }

    pub fn subset(&self, keep: &[usize]) -> Self {
        Self { dim: self.dim, indices: keep.iter().map(|&k| self.indices[k].clone()).collect() }
    }

    /// Evaluates every basis function at `z`.
    pub fn eval(&self, z: &[f64], out: &mut [f64]) {
        let table = hermite_table(z, self.max_partial_degree());
        let stride = self.max_partial_degree() + 1;
        for (o, idx) in out.iter_mut().zip(&self.indices) {
            let mut v = 1.0;
            for (k, &deg) in idx.iter().enumerate() {
                if deg > 0 {
                    v *= table[k * stride + deg as usize];
                }
            }
            *o = v;
        }
    }

    /// Regression matrix, one row per point of `z` (row-major, n × p).
    pub fn design_matrix(&self, z: &PointSet) -> nalgebra::DMatrix<f64> {
        let p = self.len();
        let mut m = nalgebra::DMatrix::zeros(z.len(), p);
        let mut row = vec![0.0; p];
        for (i, zi) in z.rows().enumerate() {
            self.eval(zi, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }
}

fn compositions(dim: usize, remaining: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos == dim - 1 {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v;
        compositions(dim, remaining - v, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Normalised probabilists' Hermite values `He_k(z_j)/√(k!)` for every
/// coordinate, `k = 0..=max_degree`, laid out coordinate-major.
fn hermite_table(z: &[f64], max_degree: usize) -> Vec<f64> {
    let stride = max_degree + 1;
    let mut t = vec![0.0; z.len() * stride];
    for (j, &x) in z.iter().enumerate() {
        let row = &mut t[j * stride..(j + 1) * stride];
        row[0] = 1.0;
        if max_degree >= 1 {
            row[1] = x;
        }
        // ψ_{k+1} = (x ψ_k - √k ψ_{k-1}) / √(k+1)
        for k in 1..max_degree {
            row[k + 1] = (x * row[k] - (k as f64).sqrt() * row[k - 1]) / ((k + 1) as f64).sqrt();
        }
    }
    t
}

/// Orthonormal multivariate Hermite polynomial `∏ He_{i_k}(z_k)/√(i_k!)`.
pub fn orthonormal_eval(index: &[u32], z: &[f64]) -> f64 {
    let maxd = index.iter().copied().max().unwrap_or(0) as usize;
    let table = hermite_table(z, maxd);
    let stride = maxd + 1;
    index.iter().enumerate().map(|(k, &i)| table[k * stride + i as usize]).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinalities() {
        assert_eq!(MultiIndexSet::total_degree(2, 3).len(), 10);
        assert_eq!(total_degree_cardinality(2, 3), 10);
        for d in 1..6 {
            for nu in 0..6 {
                assert_eq!(MultiIndexSet::total_degree(d, nu).len() as u64, total_degree_cardinality(d, nu));
            }
        }
        assert_eq!(MultiIndexSet::total_degree(3, 2).indices()[0], vec![0, 0, 0]);
        let hyp = MultiIndexSet::hyperbolic(4, 6, 0.75);
        assert!(hyp.len() < MultiIndexSet::total_degree(4, 6).len());
        assert!(hyp.indices().contains(&vec![6, 0, 0, 0]));
    }

    #[test]
    fn rejects_duplicates() {
        assert!(MultiIndexSet::new(2, vec![vec![1, 0], vec![1, 0]]).is_err());
        assert!(MultiIndexSet::new(2, vec![vec![1, 0, 0]]).is_err());
    }

    #[test]
    fn low_order_polynomials() {
        assert_eq!(orthonormal_eval(&[0, 0, 0], &[0.3, -2.0, 5.0]), 1.0);
        assert_eq!(orthonormal_eval(&[1], &[0.7]), 0.7);
        let z: f64 = 1.3;
        // He_2 = z² - 1, He_3 = z³ - 3z
        assert!((orthonormal_eval(&[2], &[z]) - (z * z - 1.0) / 2f64.sqrt()).abs() < 1e-14);
        assert!((orthonormal_eval(&[3], &[z]) - (z.powi(3) - 3.0 * z) / 6f64.sqrt()).abs() < 1e-14);
        let v = orthonormal_eval(&[1, 2], &[0.5, z]);
        assert!((v - 0.5 * (z * z - 1.0) / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn eval_matches_single_evaluations() {
        let set = MultiIndexSet::total_degree(3, 4);
        let z = [0.2, -1.1, 0.9];
        let mut out = vec![0.0; set.len()];
        set.eval(&z, &mut out);
        for (v, idx) in out.iter().zip(set.indices()) {
            assert!((v - orthonormal_eval(idx, &z)).abs() < 1e-13);
        }
    }
}
