mod common;

use std::collections::BTreeSet;

use common::*;
use logo::estimators::ObservationMatrix;
use logo::ifn::{build_mst, build_tmfg, CliqueTree};
use logo::linalg::invert_spd;
use logo::precision::{assemble_precision, log_likelihood, logdet_decomposed, partial_update, SparsePrecision};
use logo::Error;
use proptest::prelude::*;

fn graphs(obs: &ObservationMatrix) -> Vec<CliqueTree> {
    let c = pair(obs);
    let mut out = vec![build_mst(&c.corr).unwrap()];
    if obs.p() >= 4 {
        out.push(build_tmfg(&c.corr).unwrap());
    }
    out
}

fn bits(m: &SparsePrecision) -> Vec<(usize, usize, u64)> {
    m.entries().iter().map(|&(i, j, v)| (i, j, v.to_bits())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn local_inversion_is_support_matching_mle(p in 4usize..=40, k in 1usize..=5, seed in any::<u64>()) {
        let obs = raw_panel(p, k, 4 * p, seed);
        let c = pair(&obs);
        for tree in graphs(&obs) {
            let j = assemble_precision(&tree, &c).unwrap();
            let sigma = lu_inverse(&j.to_dense());
            for i in 0..p {
                prop_assert!((sigma[(i, i)] - c.cov.get(i, i)).abs() < 1e-8 * c.cov.get(i, i).max(1.0));
                for l in 0..i {
                    if tree.has_edge(l, i) {
                        prop_assert!((sigma[(i, l)] - c.cov.get(i, l)).abs() < 1e-8);
                    } else {
                        prop_assert_eq!(j.get(i, l), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn decomposed_logdet_matches_dense(p in 4usize..=40, seed in any::<u64>()) {
        let obs = raw_panel(p, 3, 3 * p, seed);
        let c = pair(&obs);
        for tree in graphs(&obs) {
            let j = assemble_precision(&tree, &c).unwrap();
            let ld = logdet_decomposed(&tree, &c).unwrap();
            prop_assert!((ld - lu_logdet(&j.to_dense())).abs() < 1e-8 * ld.abs().max(1.0));
        }
    }

    #[test]
    fn mst_logdet_closed_form(p in 2usize..=40, seed in any::<u64>()) {
        let c = pair(&raw_panel(p, 2, 3 * p, seed));
        let tree = build_mst(&c.corr).unwrap();
        let closed: f64 = -c.variances.iter().map(|v| v.ln()).sum::<f64>()
            - tree.edges().iter().map(|&(i, j)| (1.0 - c.corr.get(i, j).powi(2)).ln()).sum::<f64>();
        prop_assert!((logdet_decomposed(&tree, &c).unwrap() - closed).abs() < 1e-8 * closed.abs().max(1.0));
    }

    #[test]
    fn trace_is_p_on_training_data(p in 4usize..=40, seed in any::<u64>()) {
        let obs = raw_panel(p, 3, 3 * p, seed);
        let c = pair(&obs);
        for tree in graphs(&obs) {
            let r = log_likelihood(&assemble_precision(&tree, &c).unwrap(), &c, obs.q()).unwrap();
            prop_assert!((r.trace_term - p as f64).abs() < 1e-8);
            prop_assert!((r.per_obs_loglik - 0.5 * (r.logdet - r.trace_term - p as f64 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_update_is_bit_identical(p in 4usize..=30, seed in any::<u64>(), picks in prop::collection::vec(0usize..30, 0..6)) {
        let obs = raw_panel(p, 2, 4 * p, seed);
        let dirty: BTreeSet<usize> = picks.into_iter().filter(|&v| v < p).collect();
        let mut data = obs.data().clone();
        let mut r = rng(seed ^ 0xabcdef);
        for &v in &dirty {
            for t in 0..data.nrows() {
                data[[t, v]] += 0.3 * rand::Rng::random::<f64>(&mut r) - 0.15;
            }
        }
        let new_obs = ObservationMatrix::new(obs.names().to_vec(), data).unwrap();
        let (c_old, c_new) = (pair(&obs), pair(&new_obs));
        for tree in graphs(&obs) {
            let old = assemble_precision(&tree, &c_old).unwrap();
            let full = assemble_precision(&tree, &c_new).unwrap();
            let upd = partial_update(&old, &tree, &c_new, &dirty).unwrap();
            prop_assert_eq!(bits(&upd), bits(&full));
            if !dirty.is_empty() {
                prop_assert_eq!(upd.mean(), full.mean());
            }
        }
    }
}

#[test]
fn four_vertex_tmfg_equals_dense_inverse() {
    for seed in 0..20 {
        let c = pair(&raw_panel(4, 2, 30, seed));
        let tree = build_tmfg(&c.corr).unwrap();
        let j = assemble_precision(&tree, &c).unwrap().to_dense();
        let dense = invert_spd(&c.cov).unwrap();
        assert!(j.max_abs_diff(&dense) < 1e-10 * dense.max_abs());
    }
}

#[test]
fn tmfg_logdet_beats_mst_on_factor_data() {
    let (mut wins, n) = (0, 200);
    for seed in 0..n {
        let obs = factor_panel(30, 3, 120, seed);
        let c = pair(&obs);
        let tmfg = logdet_decomposed(&build_tmfg(&c.corr).unwrap(), &c).unwrap();
        let mst = logdet_decomposed(&build_mst(&c.corr).unwrap(), &c).unwrap();
        wins += (tmfg >= mst) as usize;
    }
    assert!(wins * 100 >= 95 * n as usize, "{wins}/{n}");
}

#[test]
fn too_few_observations_are_rejected_early() {
    // The rank-deficient correlation itself cannot seed a TMFG, so the tree
    // comes from a longer sample of the same shape.
    let tree = build_tmfg(&pair(&raw_panel(10, 2, 50, 1)).corr).unwrap();
    let c = pair(&raw_panel(10, 2, 4, 1));
    assert!(build_tmfg(&c.corr).is_err());
    assert!(matches!(
        assemble_precision(&tree, &c),
        Err(Error::LocalNotPositiveDefinite { .. })
    ));
    let obs = raw_panel(10, 2, 5, 1);
    let c = pair(&obs);
    assert!(assemble_precision(&build_tmfg(&c.corr).unwrap(), &c).is_ok());
    let c = pair(&raw_panel(10, 2, 3, 1));
    assert!(assemble_precision(&build_mst(&c.corr).unwrap(), &c).is_ok());
}

#[test]
fn model_json_round_trips() {
    let c = pair(&raw_panel(8, 2, 50, 5));
    let j = assemble_precision(&build_tmfg(&c.corr).unwrap(), &c).unwrap();
    let back = SparsePrecision::from_json(&j.to_json()).unwrap();
    assert_eq!(bits(&back), bits(&j));
    assert_eq!(back, j);
}
