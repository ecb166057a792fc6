use hdrsample::points::PointSet;
use hdrsample::randvec::RandomVector;
use hdrsample::surrogate::*;
use hdrsample::{Marginal, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normal_design(d: usize, n: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> ExperimentalDesign {
    let rv = RandomVector::standard_normal(d);
    let x = rv.sample(n, seed).unwrap();
    let y = x.rows().map(&f).collect();
    ExperimentalDesign::new(x, y, rv, SamplerTag::Natural).unwrap()
}

#[test]
fn pce_recovers_linear_model() {
    let ed = normal_design(2, 50, 3, |z| 2.0 + 3.0 * z[0]);
    let m = train_pce(&ed, None).unwrap();
    for (idx, a) in m.basis().indices().iter().zip(m.coefficients()) {
        let want = match idx.as_slice() {
            [0, 0] => 2.0,
            [1, 0] => 3.0,
            _ => 0.0,
        };
        assert!((a - want).abs() < 1e-8, "{idx:?}: {a}");
    }
    assert!(m.loo() < 1e-12);
    assert!((m.mean() - 2.0).abs() < 1e-8);
}

#[test]
fn pce_on_non_gaussian_inputs_uses_transform() {
    let rv = RandomVector::independent(vec![Marginal::lognormal(10.0, 2.0).unwrap(), Marginal::gumbel(3.0, 1.0).unwrap()])
        .unwrap();
    let x = rv.sample(80, 9).unwrap();
    let y: Vec<f64> = x.rows().map(|r| r[0].ln() + 0.1 * r[1]).collect();
    let ed = ExperimentalDesign::new(x.clone(), y.clone(), rv, SamplerTag::Natural).unwrap();
    let m = train_pce(&ed, None).unwrap();
    let pred = m.predict(&x).unwrap();
    let err = pred.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
    assert!(err < 1e-3 * ed.response_variance());
}

fn explicit_refit_loo(psi: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = psi.nrows();
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let mut acc = 0.0;
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let a = psi.select_rows(&keep);
        let b = DVector::from_iterator(n - 1, keep.iter().map(|&k| y[k]));
        let coef = a.svd(true, true).solve(&b, 1e-14).unwrap();
        let pred = (psi.row(i) * coef)[0];
        acc += (y[i] - pred).powi(2);
    }
    acc / n as f64 / var
}

#[test]
fn pce_loo_matches_explicit_refits() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let d = 1 + case % 3;
        let n = rng.random_range(15..=30);
        let ed = normal_design(d, n, 100 + case as u64, |z| {
            z.iter().enumerate().map(|(k, v)| (v * (k + 1) as f64).sin()).sum::<f64>() + z[0] * z[0]
        });
        let full = MultiIndexSet::total_degree(d, 3);
        let mut keep: Vec<usize> = vec![0];
        keep.extend((1..full.len()).filter(|_| rng.random::<f64>() < 0.6));
        keep.truncate(n / 2);
        let basis = full.subset(&keep);
        let z = ed.standard_inputs().unwrap();
        let psi = basis.design_matrix(&z);
        let yv = DVector::from_column_slice(ed.y());
        let coef = psi.clone().svd(true, true).solve(&yv, 1e-14).unwrap();
        let model = PceModel::new(basis, coef.iter().copied().collect(), 0.0, ed.rv().clone()).unwrap();
        let (raw, corrected) = pce_loo_parts(&model, &ed).unwrap();
        let oracle = explicit_refit_loo(&psi, ed.y());
        assert!((raw - oracle).abs() <= 1e-8 * oracle, "case {case}: {raw} vs {oracle}");
        assert!(corrected >= raw);
    }
}

#[test]
fn pce_loo_zero_for_exact_fit() {
    let ed = normal_design(2, 20, 5, |z| 1.0 + z[0] * z[1]);
    let basis = MultiIndexSet::total_degree(2, 2);
    let coefs: Vec<f64> = basis.indices().iter().map(|i| match i.as_slice() {
        [0, 0] => 1.0,
        [1, 1] => 1.0,
        _ => 0.0,
    }).collect();
    let m = PceModel::new(basis, coefs, 0.0, ed.rv().clone()).unwrap();
    assert!(pce_loo(&m, &ed).unwrap() < 1e-20);
}

#[test]
fn pce_constant_model_predicts_constant() {
    let rv = RandomVector::standard_normal(3);
    let m = PceModel::new(MultiIndexSet::total_degree(3, 0), vec![4.2], 0.0, rv.clone()).unwrap();
    let x = rv.sample(10, 1).unwrap();
    assert!(m.predict(&x).unwrap().iter().all(|v| *v == 4.2));
    let wrong = PointSet::from_rows(&[vec![0.0, 1.0]]).unwrap();
    assert!(m.predict(&wrong).is_err());
}

#[test]
fn basis_orthonormality_by_monte_carlo() {
    let basis = MultiIndexSet::total_degree(3, 4);
    let p = basis.len();
    let n = 1_000_000;
    let z = RandomVector::standard_normal(3).sample(n, 21).unwrap();
    let mut sum = vec![0.0; p * p];
    let mut sq = vec![0.0; p * p];
    let mut buf = vec![0.0; p];
    for zi in z.rows() {
        basis.eval(zi, &mut buf);
        for i in 0..p {
            for j in i..p {
                let v = buf[i] * buf[j];
                sum[i * p + j] += v;
                sq[i * p + j] += v * v;
            }
        }
    }
    let nf = n as f64;
    let mut outside = 0;
    let mut worst: f64 = 0.0;
    for i in 0..p {
        for j in i..p {
            let m = sum[i * p + j] / nf;
            let se = ((sq[i * p + j] / nf - m * m) / nf).sqrt();
            let target = if i == j { 1.0 } else { 0.0 };
            let z = (m - target).abs() / se;
            worst = worst.max(z);
            if z > 3.0 {
                outside += 1;
            }
        }
    }
    let pairs = p * (p + 1) / 2;
    assert!(outside as f64 <= 0.01 * pairs as f64, "{outside} of {pairs} pairs outside 3σ, worst {worst}");
    assert!(worst < 5.0);
}

#[test]
fn pce_moments_match_monte_carlo() {
    let ed = normal_design(2, 120, 8, |z| (z[0] * 0.7).exp() + z[1] * z[0]);
    let m = train_pce(&ed, None).unwrap();
    let n = 1_000_000;
    let x = ed.rv().sample(n, 77).unwrap();
    let pred = m.predict(&x).unwrap();
    let nf = n as f64;
    let mean = pred.iter().sum::<f64>() / nf;
    let var = pred.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let m4 = pred.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let se_mean = (var / nf).sqrt();
    let se_var = ((m4 - var * var) / nf).sqrt();
    assert!((mean - m.mean()).abs() < 3.0 * se_mean, "{mean} vs {}", m.mean());
    assert!((var - m.variance()).abs() < 3.0 * se_var, "{var} vs {}", m.variance());
}

#[test]
fn lars_refit_residuals_do_not_increase() {
    let ed = normal_design(3, 60, 4, |z| z[0].sin() + z[1] * z[2] + 0.3 * z[2].powi(3));
    let basis = MultiIndexSet::total_degree(3, 4);
    let psi = basis.design_matrix(&ed.standard_inputs().unwrap());
    let mut order = vec![0];
    order.extend(lars_path(&psi, ed.y(), basis.len() - 1));
    let path = ols_path(&psi, ed.y(), &order);
    let mut prev_len = 0;
    let mut prev_res = f64::INFINITY;
    for m in &path {
        assert!(m.columns.len() >= prev_len);
        assert!(m.residual_norm <= prev_res * (1.0 + 1e-12));
        prev_len = m.columns.len();
        prev_res = m.residual_norm;
    }
}

fn dense_predict(model: &KrigingModel, z: &[f64]) -> f64 {
    let zt = model.training_inputs();
    let n = zt.len();
    let theta = model.length_scales();
    let corr = |a: &[f64], b: &[f64]| {
        let r = a.iter().zip(b).zip(theta).map(|((x, y), t)| ((x - y) / t).powi(2)).sum::<f64>().sqrt();
        let s = 5f64.sqrt() * r;
        (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()
    };
    let mut r = DMatrix::from_fn(n, n, |i, j| corr(zt.row(i), zt.row(j)));
    for i in 0..n {
        r[(i, i)] += model.nugget();
    }
    let f = model.trend().design_matrix(zt);
    let y = DVector::from_iterator(n, (0..n).map(|i| model_response(model, i)));
    let rinv = r.try_inverse().unwrap();
    let beta = (f.transpose() * &rinv * &f).try_inverse().unwrap() * f.transpose() * &rinv * &y;
    let rx = DVector::from_iterator(n, zt.rows().map(|t| corr(z, t)));
    let mut fx = vec![0.0; model.trend().len()];
    model.trend().eval(z, &mut fx);
    DVector::from_vec(fx).dot(&beta) + rx.dot(&(rinv * (y - f * beta)))
}

fn model_response(model: &KrigingModel, i: usize) -> f64 {
    let doc: serde_json::Value = serde_json::to_value(model).unwrap();
    doc["training_responses"][i].as_f64().unwrap()
}

#[test]
fn kriging_prediction_matches_dense_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..5 {
        let d = 1 + case % 3;
        let ed = normal_design(d, 25, 200 + case as u64, |z| z.iter().map(|v| v.cos()).sum::<f64>() + z[0]);
        let theta: Vec<f64> = (0..d).map(|_| 0.05 + 0.2 * rng.random::<f64>()).collect();
        let trend = MultiIndexSet::total_degree(d, 1);
        let model = fit_kriging_fixed(&ed, &trend, &theta).unwrap();
        let probe = RandomVector::standard_normal(d).sample(7, 300 + case as u64).unwrap();
        let fast = model.predict_standard(&probe).unwrap();
        for (zi, v) in probe.rows().zip(fast) {
            let want = dense_predict(&model, zi);
            assert!((v - want).abs() < 1e-10 * (1.0 + want.abs()), "{v} vs {want}");
        }
    }
}

fn explicit_kriging_loo(model: &KrigingModel, y: &[f64]) -> Vec<f64> {
    let zt = model.training_inputs();
    let n = zt.len();
    (0..n)
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&k| k != i).collect();
            let mut sub = PointSet::new(zt.dim());
            for &k in &keep {
                sub.push(zt.row(k)).unwrap();
            }
            let ys: Vec<f64> = keep.iter().map(|&k| y[k]).collect();
            let rv = RandomVector::standard_normal(zt.dim());
            let ed = ExperimentalDesign::new(sub, ys, rv, SamplerTag::Natural).unwrap();
            let fold = hdrsample::surrogate::fit_kriging_fixed(&ed, model.trend(), model.length_scales()).unwrap();
            assert_eq!(fold.nugget(), model.nugget());
            let probe = PointSet::from_rows(&[zt.row(i).to_vec()]).unwrap();
            y[i] - fold.predict_standard(&probe).unwrap()[0]
        })
        .collect()
}

#[test]
fn kriging_loo_matches_explicit_refits() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..10 {
        let d = 1 + case % 2;
        let n = rng.random_range(12..=30);
        let ed = normal_design(d, n, 400 + case as u64, |z| (2.0 * z[0]).sin() + z.iter().sum::<f64>());
        let theta: Vec<f64> = (0..d).map(|_| 0.3 + 2.0 * rng.random::<f64>()).collect();
        let trend = MultiIndexSet::total_degree(d, case % 3);
        let model = fit_kriging_fixed(&ed, &trend, &theta).unwrap();
        let fast = kriging_loo_residuals(&model).unwrap();
        let slow = explicit_kriging_loo(&model, ed.y());
        let a = fast.iter().map(|v| v * v).sum::<f64>();
        let b = slow.iter().map(|v| v * v).sum::<f64>();
        assert!((a - b).abs() <= 1e-6 * b, "case {case}: {a} vs {b}");
    }
}

#[test]
fn kriging_loo_of_white_noise_is_about_one() {
    let rv = RandomVector::standard_normal(2);
    let x = rv.sample(30, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let y: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
    let ed = ExperimentalDesign::new(x, y, rv, SamplerTag::Natural).unwrap();
    let model = fit_kriging_fixed(&ed, &MultiIndexSet::total_degree(2, 0), &[1e-4, 1e-4]).unwrap();
    let loo = kriging_loo(&model, &ed).unwrap();
    assert!((loo - 1.0).abs() < 0.1, "{loo}");
}

#[test]
fn trained_kriging_interpolates() {
    let ed = normal_design(2, 30, 14, |z| (z[0] * 1.5).sin() * z[1] + 0.5 * z[0]);
    let model = train_kriging(&ed, &MultiIndexSet::total_degree(2, 1), 5).unwrap();
    let pred = model.predict(ed.x()).unwrap();
    let scale = ed.y().iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (p, y) in pred.iter().zip(ed.y()) {
        assert!((p - y).abs() <= 1e-6 * scale, "{p} vs {y}");
    }
    assert!(model.process_variance() > 0.0);
    assert!(model.length_scales().iter().all(|t| *t > 0.0));
}

#[test]
fn linear_signal_is_absorbed_by_trend() {
    let ed = normal_design(2, 20, 15, |z| 1.0 + 2.0 * z[0] - z[1]);
    let model = train_kriging(&ed, &MultiIndexSet::total_degree(2, 1), 1).unwrap();
    assert!(model.process_variance() < 1e-20, "{}", model.process_variance());
    let probe = ed.rv().sample(50, 16).unwrap();
    for (zi, p) in probe.rows().zip(model.predict(&probe).unwrap()) {
        assert!((p - (1.0 + 2.0 * zi[0] - zi[1])).abs() < 1e-8);
    }
}

#[test]
fn likelihood_gradient_matches_finite_differences() {
    let ed = normal_design(3, 25, 17, |z| z[0].sin() + z[1] * z[2]);
    let z = ed.standard_inputs().unwrap();
    let trend = MultiIndexSet::total_degree(3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..20 {
        let log_theta: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect();
        let theta: Vec<f64> = log_theta.iter().map(|v| v.exp()).collect();
        let g = profile_objective_gradient(&z, ed.y(), &trend, &theta, 1e-8).unwrap();
        for k in 0..3 {
            let h = 1e-5;
            let mut up = log_theta.clone();
            let mut dn = log_theta.clone();
            up[k] += h;
            dn[k] -= h;
            let eval = |lt: &[f64]| -> Result<f64> {
                let t: Vec<f64> = lt.iter().map(|v| v.exp()).collect();
                profile_objective(&z, ed.y(), &trend, &t, 1e-8)
            };
            let fd = (eval(&up).unwrap() - eval(&dn).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-4 * (1.0 + fd.abs()), "{fd} vs {}", g[k]);
            if fd.abs() > 1e-3 {
                assert_eq!(fd.signum(), g[k].signum());
            }
        }
    }
}

#[test]
fn training_is_reproducible_and_serialises() {
    let ed = normal_design(2, 40, 19, |z| (z[0] + 0.5 * z[1]).sin() + 0.2 * z[1] * z[1]);
    let a = train_pck(&ed, None, 7).unwrap();
    let b = train_pck(&ed, None, 7).unwrap();
    assert_eq!(a.kriging.length_scales(), b.kriging.length_scales());
    assert_eq!(a.kriging.beta(), b.kriging.beta());
    assert_eq!(a.kriging.trend(), a.pce.basis());
    let s = Surrogate::Pck(a.clone());
    let json = s.to_json().unwrap();
    let back = Surrogate::from_json(&json).unwrap();
    let probe = ed.rv().sample(20, 20).unwrap();
    assert_eq!(s.predict(&probe).unwrap(), back.predict(&probe).unwrap());
    assert!(json.contains("\"kind\": \"pck\""));
    assert!(!json.contains("cholesky"));
    let loo = back.loo(&ed).unwrap();
    assert!(loo >= 0.0 && loo < 1.0);
}

#[test]
fn argument_errors() {
    let ed = normal_design(2, 10, 22, |z| z[0]);
    assert!(train_pce(&ed, Some(0)).is_err());
    let flat = normal_design(2, 10, 22, |_| 1.0);
    assert!(train_pce(&flat, None).is_err());
    assert_eq!(total_degree_cardinality(2, 3), 10);
}

