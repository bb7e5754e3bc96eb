mod common;

use std::collections::BTreeMap;

use biasbench::data::{make_split, Dataset, SplitCounts, SplitSpec};
use biasbench::debias::{
    unbias_model_select, unbias_objective, unbias_predict, unbias_regularizer, unbias_regularizer_gradient,
    unbias_train, unbias_train_with, SelectionMetric, UnbiasGrid, UnbiasHead,
};
use biasbench::linear::{svm_train_binary, DcdSettings};
use biasbench::metrics::average_precision;
use common::{gaussian_binary, rel, unbias_oracle};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

fn binary_set(name: &str, id: usize, n: usize, dim: usize, sep: f64, seed: u64) -> Dataset {
    let (x, y) = gaussian_binary(n, dim, sep, seed);
    let labels = y.iter().map(|&v| (v > 0.0) as usize).collect();
    Dataset::from_parts(name, id, x, labels).unwrap()
}

fn as_pairs(sets: &[Dataset]) -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    sets.iter()
        .map(|d| (d.features(), d.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[test]
fn single_dataset_without_dataset_loss_is_a_plain_svm() {
    let d = binary_set("a", 0, 40, 3, 1.0, 1);
    let m = unbias_train(std::slice::from_ref(&d), 1.0, 2.0, 0.0).unwrap();
    assert!(norm(&m.deltas[0]) < 1e-9);
    let y: Vec<f64> = d.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let svm = svm_train_binary(&d.features(), &y, 2.0).unwrap();
    for k in 0..3 {
        assert!((m.w_vw[k] - svm.weights[k]).abs() < 1e-4);
    }
    assert!((m.w_vw[3] - svm.offset).abs() < 1e-4);
    for x in d.features() {
        let a = unbias_predict(&m, &x, UnbiasHead::VisualWorld).unwrap();
        assert!((a - svm.predict_margin(&x).unwrap()).abs() < 1e-4);
    }
}

#[test]
fn huge_lambda_collapses_to_a_pooled_svm() {
    let sets = [binary_set("a", 0, 30, 2, 1.0, 2), binary_set("b", 1, 30, 2, 1.5, 3)];
    let (c1, c2) = (1.0, 2.0);
    let m = unbias_train(&sets, 1e6, c1, c2).unwrap();
    let wn = norm(&m.w_vw);
    assert!(m.deltas.iter().all(|d| norm(d) <= 1e-3 * wn));
    // With every delta at zero the two hinge sums coincide: a pooled SVM with C1 + C2.
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (xs, ys) in as_pairs(&sets) {
        x.extend(xs);
        y.extend(ys);
    }
    let pooled = svm_train_binary(&x, &y, c1 + c2).unwrap();
    for xi in &x {
        let p = pooled.predict_margin(xi).unwrap();
        if p.abs() > 1e-3 {
            let v = unbias_predict(&m, xi, UnbiasHead::VisualWorld).unwrap();
            assert_eq!(p > 0.0, v >= 0.0);
        }
    }
}

#[test]
fn identical_copies_share_deltas() {
    let d = binary_set("a", 0, 30, 3, 0.7, 4);
    let sets = [d.clone(), d.with_collection(1)];
    let m = unbias_train(&sets, 0.5, 10.0, 40.0).unwrap();
    for (a, b) in m.deltas[0].iter().zip(&m.deltas[1]) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn heads_differ_by_the_delta() {
    let sets = [binary_set("a", 0, 20, 2, 1.0, 5), binary_set("b", 1, 20, 2, 0.5, 6)];
    let m = unbias_train(&sets, 1.0, 1.0, 10.0).unwrap();
    let x = [0.3, -1.2];
    let vw = unbias_predict(&m, &x, UnbiasHead::VisualWorld).unwrap();
    for i in 0..2 {
        let di = unbias_predict(&m, &x, UnbiasHead::Dataset(i)).unwrap();
        let d = &m.deltas[i];
        assert!((di - vw - (d[0] * x[0] + d[1] * x[1] + d[2])).abs() < 1e-12);
        let wi = m.dataset_model(i).unwrap();
        assert!((wi.weights[0] - m.w_vw[0] - d[0]).abs() < 1e-15);
    }
    assert!(unbias_predict(&m, &x, UnbiasHead::Dataset(2)).is_err());
    assert!(unbias_predict(&m, &[1.0], UnbiasHead::VisualWorld).is_err());
}

#[test]
fn one_label_dataset_is_named() {
    let good = binary_set("good", 0, 10, 2, 1.0, 7);
    let bad = Dataset::from_parts("lonely", 1, vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1, 1]).unwrap();
    let err = unbias_train(&[good, bad], 1.0, 1.0, 1.0).unwrap_err().to_string();
    assert!(err.contains("lonely"), "{err}");
}

#[test]
fn objective_matches_dual_oracle() {
    for (seed, lambda, c1, c2) in [(10, 0.5, 1.0, 10.0), (11, 5.0, 10.0, 1.0), (12, 1.0, 1.0, 1.0)] {
        let sets = [
            binary_set("a", 0, 30, 3, 0.8, seed),
            binary_set("b", 1, 30, 3, 1.2, seed + 100),
            binary_set("c", 2, 30, 3, 0.4, seed + 200),
        ];
        let m = unbias_train(&sets, lambda, c1, c2).unwrap();
        let o = unbias_oracle(&as_pairs(&sets), lambda, c1, c2);
        assert!(rel(o.primal, o.dual) < 1e-4, "oracle gap {} {}", o.primal, o.dual);
        assert!(rel(m.objective, o.primal) < 1e-3, "{} vs {}", m.objective, o.primal);
        let recomputed = unbias_objective(&sets, &m.w_vw, &m.deltas, lambda, c1, c2).unwrap();
        assert!(rel(recomputed, m.objective) < 1e-12);
    }
}

#[test]
fn objective_beats_the_zero_point_and_never_rises() {
    let sets = [binary_set("a", 0, 40, 4, 0.3, 20), binary_set("b", 1, 40, 4, 0.6, 21)];
    let mut trace = Vec::new();
    let m = unbias_train_with(&sets, 1.0, 100.0, 20.0, DcdSettings::default(), &mut |_, v| trace.push(v)).unwrap();
    assert!(m.objective <= 120.0 * 80.0);
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs()));
}

#[test]
fn regularizer_gradient_matches_finite_differences() {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let lambda = 0.1 + 5.0 * r.random::<f64>();
        let w: Vec<f64> = (0..4).map(|_| r.sample(StandardNormal)).collect();
        let deltas: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| r.sample(StandardNormal)).collect()).collect();
        let (gw, gd) = unbias_regularizer_gradient(&w, &deltas, lambda);
        let h = 1e-5;
        for k in 0..4 {
            let mut p = w.clone();
            let mut q = w.clone();
            p[k] += h;
            q[k] -= h;
            let fd = (unbias_regularizer(&p, &deltas, lambda) - unbias_regularizer(&q, &deltas, lambda)) / (2.0 * h);
            assert!(rel(fd, gw[k]) < 1e-5 || (fd - gw[k]).abs() < 1e-9);
        }
        for i in 0..3 {
            for k in 0..4 {
                let mut p = deltas.clone();
                let mut q = deltas.clone();
                p[i][k] += h;
                q[i][k] -= h;
                let fd = (unbias_regularizer(&w, &p, lambda) - unbias_regularizer(&w, &q, lambda)) / (2.0 * h);
                assert!(rel(fd, gd[i][k]) < 1e-5 || (fd - gd[i][k]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn without_shared_loss_small_lambda_gives_separate_svms() {
    // C1 = 0 and lambda -> 0: w_vw shrinks to O(lambda) and each w_i solves a
    // plain SVM with C = C2 / lambda up to O(lambda).
    let sets = [binary_set("a", 0, 30, 2, 1.0, 30), binary_set("b", 1, 30, 2, 1.0, 31)];
    let lambda = 1e-4;
    let m = unbias_train(&sets, lambda, 0.0, lambda).unwrap();
    for (i, (x, y)) in as_pairs(&sets).iter().enumerate() {
        let svm = svm_train_binary(x, y, 1.0).unwrap();
        let wi = m.dataset_model(i).unwrap();
        let mut a = svm.weights.clone();
        a.push(svm.offset);
        let mut b = wi.weights.clone();
        b.push(wi.offset);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&diff) <= 1e-2 * norm(&a), "dataset {i}: {a:?} vs {b:?}");
    }
}

/// Sources share the separator along e0; source i also has a label-aligned
/// nuisance coordinate e(1+i) that is pure noise elsewhere.
fn nuisance_sources(magnitude: f64, seed: u64) -> Vec<Dataset> {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..2)
        .map(|i| {
            let mut x = Vec::new();
            let mut labels = Vec::new();
            for k in 0..60 {
                let y = if k % 2 == 0 { 1.0 } else { -1.0 };
                let mut v: Vec<f64> = (0..3).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                v[0] += 0.8 * y;
                v[1 + i] += magnitude * y;
                x.push(v);
                labels.push((y > 0.0) as usize);
            }
            Dataset::from_parts(format!("s{i}"), i, x, labels).unwrap()
        })
        .collect()
}

#[test]
fn model_selection_examples() {
    let sources = nuisance_sources(3.0, 40);
    let single = UnbiasGrid {
        lambda_candidates: vec![5.0],
        c1_candidates: vec![10.0],
        c2_candidates: vec![20.0],
    };
    let s = unbias_model_select(&sources, &single, SelectionMetric::AveragePrecision, 1).unwrap();
    assert_eq!((s.lambda, s.c1, s.c2), (5.0, 10.0, 20.0));

    let grid = UnbiasGrid {
        lambda_candidates: vec![0.5, 1.0, 5.0, 10.0],
        c1_candidates: vec![1.0],
        c2_candidates: vec![100.0],
    };
    let a = unbias_model_select(&sources, &grid, SelectionMetric::AveragePrecision, 1).unwrap();
    let b = unbias_model_select(&sources, &grid, SelectionMetric::AveragePrecision, 1).unwrap();
    assert_eq!(a, b);
    assert!(a.lambda < 10.0, "selected lambda {}", a.lambda);

    // Exhaustive re-evaluation of the same grid on the same halves.
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for ds in &sources {
        let by = ds.indices_by_class();
        let spec = SplitSpec {
            train: SplitCounts::Explicit(by.iter().map(|(c, i)| (*c, i.len() / 2)).collect::<BTreeMap<_, _>>()),
            test: SplitCounts::Explicit(by.iter().map(|(c, i)| (*c, i.len() - i.len() / 2)).collect()),
            seed: 1,
            repetition_index: 0,
        };
        let (t, v) = make_split(ds, &spec).unwrap();
        train.push(t);
        valid.push(v);
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &l in &grid.lambda_candidates {
        let m = unbias_train(&train, l, 1.0, 100.0).unwrap();
        let score: f64 = valid
            .iter()
            .map(|v| {
                let s: Vec<f64> =
                    v.samples().iter().map(|x| unbias_predict(&m, &x.features, UnbiasHead::VisualWorld).unwrap()).collect();
                let p: Vec<bool> = v.labels().iter().map(|&c| c == 1).collect();
                average_precision(&s, &p).unwrap()
            })
            .sum::<f64>()
            / 2.0;
        if score > best.0 {
            best = (score, l);
        }
    }
    assert_eq!(a.lambda, best.1);
    assert!((a.score - best.0).abs() < 1e-12);
}
