mod common;

use common::*;
use logo::conditional::{conditional_covariance, conditional_information_gain, fit_regression, predict, BlockSplit};
use logo::ifn::{build_mst, build_tmfg, CliqueTree};
use logo::precision::{assemble_precision, SparsePrecision};
use logo::risk::{
    condition, constrained_covariance, constrained_mean, decomposed_matvec, portfolio_moments, DecomposedPrecision,
    LinearConstraint,
};
use logo::{CovariancePair, Error};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

struct Fitted {
    tree: CliqueTree,
    cov: CovariancePair,
    model: SparsePrecision,
    sigma: DMatrix<f64>,
}

fn fitted(p: usize, seed: u64, tmfg: bool) -> Fitted {
    let cov = pair(&raw_panel(p, 3, 5 * p, seed));
    let tree = if tmfg { build_tmfg(&cov.corr) } else { build_mst(&cov.corr) }.unwrap();
    let model = assemble_precision(&tree, &cov).unwrap();
    let sigma = lu_inverse(&model.to_dense());
    Fitted { tree, cov, model, sigma }
}

fn random_split(p: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng(seed);
    let mut idx: Vec<usize> = (0..p).collect();
    idx.shuffle(&mut r);
    let n_past = r.random_range(1..p);
    let n_future = r.random_range(1..=p - n_past);
    let past = idx[..n_past].to_vec();
    let future = idx[n_past..n_past + n_future].to_vec();
    (past, future)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn regression_matches_schur(p in 4usize..=30, seed in any::<u64>(), split_seed in any::<u64>()) {
        let f = fitted(p, seed, true);
        let (past, future) = random_split(p, split_seed);
        let split = BlockSplit::new(past.clone(), future.clone(), p).unwrap();
        let reg = fit_regression(&f.model, &split).unwrap();
        let (beta, ccov) = schur(&f.sigma, &past, &future);
        let scale = max_abs(&beta).max(1.0);
        for a in 0..future.len() {
            for b in 0..past.len() {
                prop_assert!((reg.beta[[a, b]] - beta[(a, b)]).abs() < 1e-9 * scale);
            }
        }
        let ours = conditional_covariance(&f.model, &split).unwrap();
        for a in 0..future.len() {
            for b in 0..future.len() {
                prop_assert!((ours.get(a, b) - ccov[(a, b)]).abs() < 1e-9 * max_abs(&ccov).max(1.0));
            }
        }
        let x1: Vec<f64> = past.iter().map(|&i| f.model.mean()[i] + (i as f64).cos()).collect();
        let y = predict(&reg, &x1, f.model.mean()).unwrap();
        let dev = DVector::from_iterator(past.len(), past.iter().zip(&x1).map(|(&i, x)| x - f.model.mean()[i]));
        let oracle = &beta * dev;
        for a in 0..future.len() {
            prop_assert!((y[a] - f.model.mean()[future[a]] - oracle[a]).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn regression_identity_holds(p in 4usize..=30, seed in any::<u64>(), split_seed in any::<u64>()) {
        // J₂₂ β = −J₂₁ when the split covers every variable.
        let f = fitted(p, seed, true);
        let (past, _) = random_split(p, split_seed);
        let future: Vec<usize> = (0..p).filter(|i| !past.contains(i)).collect();
        if future.is_empty() {
            return Ok(());
        }
        let reg = fit_regression(&f.model, &BlockSplit::new(past.clone(), future.clone(), p).unwrap()).unwrap();
        for (a, &i) in future.iter().enumerate() {
            for (b, &k) in past.iter().enumerate() {
                let lhs: f64 = future.iter().enumerate().map(|(c, &l)| f.model.get(i, l) * reg.beta[[c, b]]).sum();
                prop_assert!((lhs + f.model.get(i, k)).abs() < 1e-10 * f.model.get(i, i).abs().max(1.0));
            }
            // An isolated target with no edges to the past is not predicted.
            let no_past = past.iter().all(|&k| f.model.get(i, k) == 0.0);
            let no_future = future.iter().all(|&l| l == i || f.model.get(i, l) == 0.0);
            if no_past && no_future {
                prop_assert!(reg.beta.row(a).iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn single_target_without_edges_has_zero_row(p in 4usize..=30, seed in any::<u64>(), target in 0usize..30) {
        let f = fitted(p, seed, false);
        let target = target % p;
        let past: Vec<usize> = (0..p).filter(|&k| k != target).collect();
        let reg = fit_regression(&f.model, &BlockSplit::new(past.clone(), vec![target], p).unwrap()).unwrap();
        for (b, &k) in past.iter().enumerate() {
            prop_assert_eq!(reg.beta[[0, b]] == 0.0, !f.tree.has_edge(k.min(target), k.max(target)));
        }
    }

    #[test]
    fn constrained_conditioning_matches_change_of_basis(p in 3usize..=30, k in 1usize..=3, seed in any::<u64>()) {
        let f = fitted(p.max(4), seed, true);
        let p = f.model.p();
        let mut r = rng(seed ^ 0x5eed);
        let t = DMatrix::from_fn(p, p, |_, _| r.sample::<f64, _>(StandardNormal));
        let a_rows: Vec<Vec<f64>> = (0..k).map(|i| t.row(i).iter().copied().collect()).collect();
        let z: Vec<f64> = (0..k).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let c = LinearConstraint::from_rows(&a_rows, z.clone()).unwrap();

        // Y = T X; condition Y₁ = z; map back with T⁻¹.
        let mu = DVector::from_column_slice(f.model.mean());
        let sy = &t * &f.sigma * t.transpose();
        let my = &t * &mu;
        let idx1: Vec<usize> = (0..k).collect();
        let idx2: Vec<usize> = (k..p).collect();
        let (b21, c22) = schur(&sy, &idx1, &idx2);
        let dz = DVector::from_iterator(k, (0..k).map(|i| z[i] - my[i]));
        let m2 = DVector::from_iterator(p - k, (k..p).map(|i| my[i])) + &b21 * dz;
        let mut ycond = DVector::zeros(p);
        let mut ycov = DMatrix::zeros(p, p);
        for i in 0..k {
            ycond[i] = z[i];
        }
        for i in 0..p - k {
            ycond[k + i] = m2[i];
            for j in 0..p - k {
                ycov[(k + i, k + j)] = c22[(i, j)];
            }
        }
        let tinv = t.clone().lu().try_inverse().unwrap();
        let xmean = &tinv * ycond;
        let xcov = &tinv * ycov * tinv.transpose();

        let scale = max_abs(&f.sigma).max(1.0);
        let res = condition(&f.model, &c).unwrap();
        let mean = constrained_mean(&f.model, &c).unwrap();
        let cov = constrained_covariance(&f.model, &c).unwrap();
        prop_assert_eq!(&res.cond_mean, &mean);
        prop_assert_eq!(&res.cond_cov, &cov.to_rows());
        for i in 0..p {
            prop_assert!((mean[i] - xmean[i]).abs() < 1e-9 * scale * (1.0 + xmean.amax()));
            for j in 0..p {
                prop_assert!((cov.get(i, j) - xcov[(i, j)]).abs() < 1e-9 * scale);
            }
        }
        // The constraint holds exactly in mean and carries no residual variance.
        for (row, zi) in a_rows.iter().zip(&z) {
            let am: f64 = row.iter().zip(&mean).map(|(a, m)| a * m).sum();
            prop_assert!((am - zi).abs() < 1e-9 * (1.0 + zi.abs()));
            let av: Vec<f64> = (0..p).map(|j| (0..p).map(|i| row[i] * cov.get(i, j)).sum()).collect();
            let quad: f64 = row.iter().zip(&av).map(|(a, b)| a * b).sum();
            prop_assert!(quad.abs() < 1e-9 * scale * row.iter().map(|x| x * x).sum::<f64>());
        }
    }

    #[test]
    fn decomposed_matvec_matches_assembled(p in 4usize..=60, seed in any::<u64>(), tmfg in any::<bool>()) {
        let f = fitted(p, seed, tmfg);
        let v: Vec<f64> = (0..p).map(|i| ((i * 7 + 3) as f64).sin()).collect();
        let ours = decomposed_matvec(&f.tree, &f.cov, &v).unwrap();
        let direct = f.model.matvec(&v);
        let scale = f.model.entries().iter().map(|e| e.2.abs()).fold(0.0, f64::max);
        for (a, b) in ours.iter().zip(&direct) {
            prop_assert!((a - b).abs() < 1e-12 * scale * p as f64);
        }
        let dense = DecomposedPrecision::new(&f.tree, &f.cov).unwrap().to_dense();
        prop_assert!(dense.max_abs_diff(&f.model.to_dense()) < 1e-12 * scale);
    }

    #[test]
    fn portfolio_moments_match_dense(p in 4usize..=40, seed in any::<u64>(), tmfg in any::<bool>()) {
        let f = fitted(p, seed, tmfg);
        let w: Vec<f64> = (0..p).map(|i| 1.0 + 0.5 * ((i * 3) as f64).cos()).collect();
        let m = portfolio_moments(&f.tree, &f.cov, &w).unwrap();
        let wv = DVector::from_column_slice(&w);
        let var = (wv.transpose() * &f.sigma * &wv)[(0, 0)];
        let expected: f64 = w.iter().zip(&f.cov.means).map(|(a, b)| a * b).sum();
        prop_assert!((m.variance - var).abs() < 1e-9 * var.abs().max(1.0));
        prop_assert!((m.expected - expected).abs() < 1e-9 * (1.0 + expected.abs()));
    }
}

#[test]
fn dependent_constraints_are_rejected() {
    let f = fitted(6, 3, true);
    let c = LinearConstraint::from_rows(&[vec![1.0; 6], vec![2.0; 6]], vec![1.0, 2.0]).unwrap();
    assert_eq!(constrained_mean(&f.model, &c).unwrap_err(), Error::RankDeficientConstraint);
}

#[test]
fn variance_proportional_allocation() {
    let m = SparsePrecision::new(
        2,
        vec![0.0, 0.0],
        vec![(0, 0, 1.0), (1, 1, 0.25)],
        logo::precision::Structure::DIAGONAL,
    )
    .unwrap();
    let c = LinearConstraint::portfolio(&[1.0, 1.0], 5.0).unwrap();
    let mean = constrained_mean(&m, &c).unwrap();
    assert!((mean[0] - 1.0).abs() < 1e-12 && (mean[1] - 4.0).abs() < 1e-12);
}

#[test]
fn information_gain_is_nonnegative() {
    for seed in 0..10 {
        let f = fitted(12, seed, true);
        let g = conditional_information_gain(&f.model, &[0, 1], &[2, 3, 4], &[5, 6, 7]).unwrap();
        assert!(g >= -1e-12);
        // Oracle: ln det Cov(X₂|own) − ln det Cov(X₂|own ∪ other) from dense Σ.
        let (_, c_own) = schur(&f.sigma, &[2, 3, 4], &[0, 1]);
        let (_, c_all) = schur(&f.sigma, &[2, 3, 4, 5, 6, 7], &[0, 1]);
        let oracle = c_own.determinant().ln() - c_all.determinant().ln();
        assert!((g - oracle).abs() < 1e-9);
    }
}
