mod common;

use std::collections::BTreeSet;

use biasbench::data::{
    l2_normalize, load_feature_table, make_split, synth_generate, write_feature_table, zscore_fit, Dataset, LabelMap,
    SplitSpec, SynthSpec,
};
use biasbench::linear::ova_train;
use biasbench::Error;
use common::nearest_centroid_accuracy;
use proptest::prelude::*;

fn two_domains(shift: f64, per_class: usize, seed: u64) -> Vec<Dataset> {
    SynthSpec {
        n_domains: 2,
        n_classes: 2,
        dim: 3,
        samples_per_class: vec![per_class; 2],
        class_means: vec![vec![0.0; 3], vec![4.0, 0.0, 0.0]],
        domain_shifts: vec![vec![0.0; 3], vec![0.0, shift, 0.0]],
        class_subsets: vec![vec![0, 1]; 2],
        noise_rate: 0.0,
        cluster_std: vec![1.0; 2],
        seed,
    }
    .pipe(|s| synth_generate(&s).unwrap())
}

trait Pipe: Sized {
    fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
        f(self)
    }
}
impl<T> Pipe for T {}

#[test]
fn l2_examples() {
    assert_eq!(l2_normalize(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
    assert_eq!(l2_normalize(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    let u = [0.0, 1.0, 0.0];
    assert_eq!(l2_normalize(&u).unwrap(), u.to_vec());
    assert!(l2_normalize(&[1.0, f64::NAN]).is_err());
}

#[test]
fn zscore_examples() {
    let train = Dataset::from_parts("t", 0, vec![vec![0.0, 5.0], vec![2.0, 5.0]], vec![0, 0]).unwrap();
    let s = zscore_fit(&train).unwrap();
    assert_eq!(s.mean, vec![1.0, 5.0]);
    assert_eq!(s.std[0], 1.0);
    assert_eq!(s.apply(&[2.0, 5.0]).unwrap(), vec![1.0, 0.0]);
    assert_eq!(s.apply(&s.mean).unwrap(), vec![0.0, 0.0]);
    assert!(s.apply(&[1.0]).is_err());
}

#[test]
fn feature_table_round_trip_and_errors() {
    let ds = &two_domains(2.0, 5, 1)[1];
    let labels = LabelMap::from_names(["cat", "dog"]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_feature_table(ds, &labels, std::fs::File::create(&path).unwrap()).unwrap();
    let mut lm = labels.clone().freeze();
    let back = load_feature_table(&path, Some(3), &mut lm, 1).unwrap();
    assert_eq!(&back, ds);

    std::fs::write(&path, "id,collection,class,f0,f1\na,c,x,1,2\nb,c,x,1\n").unwrap();
    match load_feature_table(&path, None, &mut LabelMap::new(), 0) {
        Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    std::fs::write(&path, "id,collection,class,f0,f1\na,c,x,1,2\nb,c,y,1,3\nc,c,x,0,0\n").unwrap();
    let t = load_feature_table(&path, None, &mut LabelMap::new(), 0).unwrap();
    assert_eq!((t.len(), t.dim()), (3, 2));
}

#[test]
fn split_examples() {
    let mut spec = SynthSpec::random_layout(1, 3, 2, 10, 3.0, 0.0, 1.0, 0);
    spec.samples_per_class = vec![10];
    let ds = &synth_generate(&spec).unwrap()[0];
    let s = SplitSpec::per_class(7, 3, 11, 0);
    let (tr, te) = make_split(ds, &s).unwrap();
    for (_, idx) in tr.indices_by_class() {
        assert_eq!(idx.len(), 7);
    }
    for (_, idx) in te.indices_by_class() {
        assert_eq!(idx.len(), 3);
    }
    let ids = |d: &Dataset| d.samples().iter().map(|x| x.sample_id.clone()).collect::<BTreeSet<_>>();
    assert!(ids(&tr).is_disjoint(&ids(&te)));
    assert_eq!(make_split(ds, &s).unwrap(), (tr, te));
    match make_split(ds, &SplitSpec::per_class(8, 3, 0, 0)) {
        Err(Error::Shortage { class, .. }) => assert_eq!(class, 0),
        other => panic!("expected a shortage, got {other:?}"),
    }
}

#[test]
fn repetitions_draw_different_training_sets() {
    let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
    let ds = Dataset::from_parts("d", 0, x, vec![0; 100]).unwrap();
    let a = make_split(&ds, &SplitSpec::per_class(50, 10, 5, 0)).unwrap().0;
    let b = make_split(&ds, &SplitSpec::per_class(50, 10, 5, 1)).unwrap().0;
    assert_ne!(a, b);
}

#[test]
fn synth_controls() {
    let d = two_domains(0.0, 200, 7);
    let m0: Vec<f64> = mean_of(&d[0]);
    let m1: Vec<f64> = mean_of(&d[1]);
    assert!(m0.iter().zip(&m1).all(|(a, b)| (a - b).abs() < 0.3));

    let mut spec = SynthSpec::random_layout(1, 2, 2, 30, 3.0, 0.0, 1.0, 2);
    spec.noise_rate = 1.0;
    let clean = synth_generate(&SynthSpec { noise_rate: 0.0, ..spec.clone() }).unwrap();
    let noisy = synth_generate(&spec).unwrap();
    for (a, b) in clean[0].samples().iter().zip(noisy[0].samples()) {
        assert_ne!(a.class_label, b.class_label);
        assert_eq!(a.features, b.features);
    }
    assert!(synth_generate(&SynthSpec { class_subsets: vec![vec![]], ..spec }).is_err());
}

fn mean_of(d: &Dataset) -> Vec<f64> {
    let n = d.len() as f64;
    (0..d.dim()).map(|k| d.samples().iter().map(|s| s.features[k]).sum::<f64>() / n).collect()
}

#[test]
fn shifted_domains_are_separable() {
    // Domain index as the class, 100 training samples per domain.
    let spec = SynthSpec::random_layout(2, 2, 5, 100, 2.0, 10.0, 1.0, 21);
    let doms = synth_generate(&spec).unwrap();
    let relabeled: Vec<Dataset> = doms.iter().enumerate().map(|(i, d)| d.relabel(|_| i).with_collection(0)).collect();
    let pooled = Dataset::concat("pool", 0, &[&relabeled[0], &relabeled[1]]).unwrap();
    let (train, test) = make_split(&pooled, &SplitSpec::per_class(100, 100, 1, 0)).unwrap();
    assert!(nearest_centroid_accuracy(&train, &test) >= 99.0);
    let m = ova_train(&train.features(), &train.labels(), 1.0).unwrap();
    let p = m.predict_all(&test.features()).unwrap();
    let acc = 100.0 * p.iter().zip(test.labels()).filter(|(a, b)| **a == *b).count() as f64 / p.len() as f64;
    assert!(acc >= 99.0, "domain classifier {acc}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l2_norm_is_zero_or_one(v in prop::collection::vec(-1e3f64..1e3, 1..12)) {
        let n: f64 = l2_normalize(&v).unwrap().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(n == 0.0 || (n - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zscore_centers_the_fit_set(rows in prop::collection::vec(prop::collection::vec(-50f64..50.0, 3), 2..20)) {
        let ds = Dataset::from_parts("z", 0, rows.clone(), vec![0; rows.len()]).unwrap();
        let s = zscore_fit(&ds).unwrap();
        let z = s.apply_dataset(&ds).unwrap();
        for k in 0..3 {
            let m = z.samples().iter().map(|x| x.features[k]).sum::<f64>() / rows.len() as f64;
            prop_assert!(m.abs() <= 1e-9);
        }
    }

    #[test]
    fn split_never_duplicates(seed in 0u64..10_000, rep in 0u64..5, tr in 1usize..6, te in 1usize..5) {
        let mut spec = SynthSpec::random_layout(1, 3, 2, 10, 1.0, 0.0, 1.0, seed);
        spec.samples_per_class = vec![10];
        let ds = &synth_generate(&spec).unwrap()[0];
        let (a, b) = make_split(ds, &SplitSpec::per_class(tr, te, seed, rep)).unwrap();
        let mut ids: Vec<&str> = a.samples().iter().chain(b.samples()).map(|s| s.sample_id.as_str()).collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
        prop_assert_eq!(n, 3 * (tr + te));
    }

    #[test]
    fn synth_is_pure(seed in 0u64..10_000) {
        let spec = SynthSpec::random_layout(2, 2, 3, 5, 1.0, 1.0, 1.0, seed);
        prop_assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
    }
}
