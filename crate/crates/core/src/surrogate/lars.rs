use nalgebra::DMatrix;

/// Incremental Cholesky factor of a Gram matrix that grows one column at a time.
struct GrowingCholesky {
    l: Vec<Vec<f64>>,
}

impl GrowingCholesky {
    fn new() -> Self {
        Self { l: Vec::new() }
    }

    fn len(&self) -> usize {
        self.l.len()
    }

    /// Returns the new row `(l, λ)` given the cross products with existing
    /// columns and the new column's squared norm, or `None` if the column is
    /// numerically dependent.
    fn candidate_row(&self, cross: &[f64], sq_norm: f64, tol: f64) -> Option<(Vec<f64>, f64)> {
        let k = self.len();
        let mut row = vec![0.0; k];
        for i in 0..k {
            let s: f64 = (0..i).map(|j| self.l[i][j] * row[j]).sum();
            row[i] = (cross[i] - s) / self.l[i][i];
        }
        let rem = sq_norm - row.iter().map(|v| v * v).sum::<f64>();
        if !(rem > tol * sq_norm) {
            return None;
        }
        Some((row, rem.sqrt()))
    }

    fn push(&mut self, mut row: Vec<f64>, diag: f64) {
        row.push(diag);
        self.l.push(row);
    }

    /// Solves `L Lᵀ x = b`.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut y = vec![0.0; k];
        for i in 0..k {
            let s: f64 = (0..i).map(|j| self.l[i][j] * y[j]).sum();
            y[i] = (b[i] - s) / self.l[i][i];
        }
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| self.l[j][i] * y[j]).sum();
            y[i] = (y[i] - s) / self.l[i][i];
        }
        y
    }
}

const DEPENDENCE_TOL: f64 = 1e-10;

/// Least-angle regression. Returns the order in which columns of `x` enter
/// the active set. Columns with zero variance are never selected.
pub fn lars_path(x: &DMatrix<f64>, y: &[f64], max_steps: usize) -> Vec<usize> {
    let (n, p) = x.shape();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut xs = x.clone();
    let mut usable = vec![true; p];
    for j in 0..p {
        let mut col = xs.column_mut(j);
        let m = col.mean();
        col.add_scalar_mut(-m);
        let nrm = col.norm();
        if nrm <= 1e-12 * (n as f64).sqrt() {
            usable[j] = false;
        } else {
            col /= nrm;
        }
    }
    let r: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let r = nalgebra::DVector::from_vec(r);
    let mut c = xs.tr_mul(&r);
    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; p];
    let mut chol = GrowingCholesky::new();
    let max_steps = max_steps.min(usable.iter().filter(|&&u| u).count());
    let scale = r.norm().max(f64::MIN_POSITIVE);

    let mut next = argmax_abs(&c, &in_active, &usable);
    while active.len() < max_steps {
        let Some(j) = next else { break };
        let cross: Vec<f64> = active.iter().map(|&a| xs.column(a).dot(&xs.column(j))).collect();
        match chol.candidate_row(&cross, 1.0, DEPENDENCE_TOL) {
            Some((row, d)) => {
                chol.push(row, d);
                active.push(j);
                in_active[j] = true;
            }
            None => {
                usable[j] = false;
                next = argmax_abs(&c, &in_active, &usable);
                continue;
            }
        }
        let big_c = active.iter().map(|&a| c[a].abs()).fold(0.0, f64::max);
        if big_c <= 1e-13 * scale {
            break;
        }
        let signs: Vec<f64> = active.iter().map(|&a| c[a].signum()).collect();
        let v = chol.solve(&signs);
        let s_dot_v: f64 = signs.iter().zip(&v).map(|(s, w)| s * w).sum();
        if !(s_dot_v > 0.0) {
            break;
        }
        let aa = 1.0 / s_dot_v.sqrt();
        let mut u = nalgebra::DVector::zeros(n);
        for (&a, &w) in active.iter().zip(&v) {
            u.axpy(aa * w, &xs.column(a), 1.0);
        }
        let a_vec = xs.tr_mul(&u);
        let mut gamma = big_c / aa;
        let mut enter = None;
        for k in 0..p {
            if in_active[k] || !usable[k] {
                continue;
            }
            for cand in [(big_c - c[k]) / (aa - a_vec[k]), (big_c + c[k]) / (aa + a_vec[k])] {
                if cand > 1e-14 * gamma.abs().max(1e-300) && cand < gamma {
                    gamma = cand;
                    enter = Some(k);
                }
            }
        }
        c.axpy(-gamma, &a_vec, 1.0);
        next = enter.or_else(|| argmax_abs(&c, &in_active, &usable));
    }
    active
}

fn argmax_abs(c: &nalgebra::DVector<f64>, in_active: &[bool], usable: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in c.iter().enumerate() {
        if in_active[j] || !usable[j] {
            continue;
        }
        if best.is_none_or(|(_, b)| v.abs() > b) {
            best = Some((j, v.abs()));
        }
    }
    best.map(|(j, _)| j)
}

/// One model along the OLS refit of a LARS path.
#[derive(Clone, Debug)]
pub struct PathModel {
    /// Columns of the regression matrix, in entry order.
    pub columns: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// Relative LOO error without the small-sample correction.
    pub loo: f64,
    pub corrected_loo: f64,
    pub residual_norm: f64,
}

/// Ordinary least-squares refits for every prefix of `order`, each scored by
/// the analytic LOO error. `order` should start with the constant column.
/// Columns that are numerically dependent on earlier ones are skipped.
pub fn ols_path(psi: &DMatrix<f64>, y: &[f64], order: &[usize]) -> Vec<PathModel> {
    let n = psi.nrows();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let var_y = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let mut chol = GrowingCholesky::new();
    let mut linv: Vec<Vec<f64>> = Vec::new();
    let mut w_cols: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut h = vec![0.0; n];
    let mut yhat = vec![0.0; n];
    let mut trace_inv = 0.0;
    let mut columns = Vec::new();
    let mut out = Vec::new();

    for &j in order {
        let col = psi.column(j);
        if columns.len() + 2 > n {
            break;
        }
        let cross: Vec<f64> = columns.iter().map(|&a| psi.column(a).dot(&col)).collect();
        let sq = col.norm_squared();
        let Some((row, lam)) = chol.candidate_row(&cross, sq, DEPENDENCE_TOL) else { continue };
        let k = columns.len();
        // new column of W = Ψ L⁻ᵀ
        let mut w = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..k).map(|m| w_cols[m][i] * row[m]).sum();
            w[i] = (col[i] - s) / lam;
        }
        let bk = (col.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
            - row.iter().zip(&b).map(|(l, v)| l * v).sum::<f64>())
            / lam;
        // new row of L⁻¹
        let mut inv_row = vec![0.0; k + 1];
        for m in 0..k {
            let s: f64 = (m..k).map(|q| row[q] * linv[q][m]).sum();
            inv_row[m] = -s / lam;
        }
        inv_row[k] = 1.0 / lam;
        trace_inv += inv_row.iter().map(|v| v * v).sum::<f64>();
        for i in 0..n {
            h[i] += w[i] * w[i];
            yhat[i] += w[i] * bk;
        }
        chol.push(row, lam);
        linv.push(inv_row);
        w_cols.push(w);
        b.push(bk);
        columns.push(j);

        let pcount = columns.len();
        let mut sse = 0.0;
        let mut loo_sum = 0.0;
        let mut degenerate = false;
        for i in 0..n {
            let e = y[i] - yhat[i];
            sse += e * e;
            if h[i] >= 1.0 - 1e-12 {
                degenerate = true;
            }
            loo_sum += (e / (1.0 - h[i])).powi(2);
        }
        let loo = if degenerate { f64::INFINITY } else { loo_sum / n as f64 / var_y };
        let nf = n as f64;
        // tr((ΨᵀΨ/n)⁻¹)/n = tr((ΨᵀΨ)⁻¹)
        let corr = nf / (nf - pcount as f64) * (1.0 + trace_inv);
        // β = L⁻ᵀ b
        let coefficients: Vec<f64> =
            (0..pcount).map(|m| (m..pcount).map(|q| linv[q][m] * b[q]).sum()).collect();
        out.push(PathModel {
            columns: columns.clone(),
            coefficients,
            loo,
            corrected_loo: loo * corr,
            residual_norm: sse.sqrt(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_problem(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        x.column_mut(0).fill(1.0);
        let y = (0..n).map(|i| 1.0 + 3.0 * x[(i, 1)] - 2.0 * x[(i, 2)] + 0.1 * rng.random::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn path_enters_strongest_first() {
        let (x, y) = random_problem(60, 8, 1);
        let order = lars_path(&x, &y, 7);
        assert_eq!(order[0], 1);
        assert_eq!(order[1], 2);
        assert!(!order.contains(&0));
        let uniq: std::collections::HashSet<_> = order.iter().collect();
        assert_eq!(uniq.len(), order.len());
    }

    #[test]
    fn ols_path_matches_dense_least_squares() {
        let (x, y) = random_problem(40, 6, 2);
        let order = [0, 3, 1, 5, 2];
        let path = ols_path(&x, &y, &order);
        assert_eq!(path.len(), order.len());
        let mut prev = f64::INFINITY;
        for m in &path {
            assert!(m.residual_norm <= prev + 1e-12);
            prev = m.residual_norm;
            let sub = DMatrix::from_fn(x.nrows(), m.columns.len(), |i, j| x[(i, m.columns[j])]);
            let yv = nalgebra::DVector::from_column_slice(&y);
            let beta = (sub.transpose() * &sub).cholesky().unwrap().solve(&(sub.transpose() * yv));
            for (a, b) in m.coefficients.iter().zip(beta.iter()) {
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn dependent_columns_are_skipped() {
        let (mut x, y) = random_problem(30, 4, 3);
        let c1 = x.column(1).clone_owned();
        x.column_mut(3).copy_from(&(c1 * 2.0));
        let path = ols_path(&x, &y, &[0, 1, 3, 2]);
        assert_eq!(path.last().unwrap().columns, vec![0, 1, 2]);
    }
}
