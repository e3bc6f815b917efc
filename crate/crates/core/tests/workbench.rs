use shiftcast::confidence::{doc, doe};
use shiftcast::distances::{discriminative_distance, mmd, DiscriminatorConfig};
use shiftcast::pipeline::Method;
use shiftcast::workbench::{
    apply_shift, gen_task, run_demo, train_reference_classifier, DemoConfig, Sample, ShiftFamily, ShiftKind,
    TaskSplits, BASE_ACC_RANGE,
};
use shiftcast::{accuracy, ClassId};

fn task(seed: u64) -> TaskSplits {
    gen_task(seed, 10, 16, 2000).unwrap()
}

fn acc_of(splits: &TaskSplits, sample: &Sample) -> f64 {
    let clf = train_reference_classifier(splits).unwrap();
    accuracy(&clf.featurize("x", sample).unwrap().full_view()).unwrap()
}

#[test]
fn base_accuracy_in_band_across_seeds() {
    for seed in [0, 7, 19] {
        let s = task(seed);
        let acc = acc_of(&s, &s.test);
        assert!((BASE_ACC_RANGE.0..=BASE_ACC_RANGE.1).contains(&acc), "seed {seed}: {acc}");
    }
}

#[test]
fn same_seed_same_data() {
    let (a, b) = (task(5), task(5));
    assert_eq!(a, b);
    let clf = train_reference_classifier(&a).unwrap();
    let x = clf.featurize("x", &a.test).unwrap();
    let y = train_reference_classifier(&b).unwrap().featurize("x", &b.test).unwrap();
    assert_eq!(x, y);
}

#[test]
fn null_shift_gives_identity_values() {
    let s = task(2);
    let clf = train_reference_classifier(&s).unwrap();
    let base = clf.featurize("b", &s.test).unwrap();
    for kind in [
        ShiftKind::FeatureNoise,
        ShiftKind::MeanTranslation,
        ShiftKind::CovarianceScale,
        ShiftKind::LabelSubset,
        ShiftKind::GridRotationConfound,
    ] {
        let t = clf.featurize("t", &apply_shift(&s.task, kind, 0.0, 2000, 77).unwrap()).unwrap();
        let (bf, tf) = (base.features().unwrap(), t.features().unwrap());
        assert!(doc(&base, &t).unwrap().abs() < 0.02, "{kind:?}");
        assert!(doe(&base, &t).unwrap().abs() < 0.02, "{kind:?}");
        // MMD of two 2000-point samples in 16 dims has noise floor ≈ √(16/1000)
        assert!(mmd(bf, tf).unwrap() < 0.2, "{kind:?}");
        let disc = discriminative_distance(bf, tf, &DiscriminatorConfig::with_seed(1)).unwrap();
        assert!((disc.accuracy - 0.5).abs() < 0.05, "{kind:?}: {disc:?}");

        // accuracy within two binomial standard errors of the base
        let (pb, pt) = (accuracy(&base.full_view()).unwrap(), accuracy(&t.full_view()).unwrap());
        let se = (pb * (1.0 - pb) * (1.0 / 2000.0 + 1.0 / 2000.0)).sqrt();
        assert!((pb - pt).abs() < 2.0 * se + 1e-12, "{kind:?}: {pb} vs {pt}");
    }
}

#[test]
fn noise_degrades_accuracy_monotonically() {
    let s = task(3);
    let clf = train_reference_classifier(&s).unwrap();
    let family = ShiftFamily::new(ShiftKind::FeatureNoise, vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0], 11).unwrap();
    let accs: Vec<f64> = (0..family.intensity_grid.len())
        .map(|i| accuracy(&clf.featurize("t", &family.sample(&s.task, i, 2000).unwrap()).unwrap().full_view()).unwrap())
        .collect();
    let inversions = accs.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{accs:?}");
    assert!(accs.last().unwrap() < &(accs[0] - 0.2), "{accs:?}");
}

#[test]
fn label_subset_exercises_intersection() {
    let s = task(4);
    let clf = train_reference_classifier(&s).unwrap();
    let base = clf.featurize("b", &s.test).unwrap();
    let t = clf.featurize("t", &apply_shift(&s.task, ShiftKind::LabelSubset, 0.5, 2000, 3).unwrap()).unwrap();
    assert_eq!(t.label_space().len(), 5);
    assert!(t.label_space().is_subset_of(base.label_space()));
    let both = shiftcast::intersect_labels(&base, &t).unwrap();
    assert_eq!(&both, t.label_space());
    assert!(doc(&base, &t).unwrap().abs() < 0.03);
}

#[test]
fn separable_task_is_learned() {
    let mut s = task(6);
    s.task.class_means = s.task.class_means.map(|v| v * 6.0);
    let regen = |tag| apply_shift(&s.task, ShiftKind::FeatureNoise, 0.0, 2000, tag).unwrap();
    s.train = regen(1);
    s.val = regen(2);
    s.test = regen(3);
    assert!(acc_of(&s, &s.test) > 0.95);
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let mut s = task(8);
    let shuffle = |sample: &mut Sample, offset: u64| {
        let perm = shiftcast::io::permutation(sample.y.len(), offset);
        let y: Vec<ClassId> = perm.iter().map(|&i| sample.y[i]).collect();
        sample.y = y;
    };
    shuffle(&mut s.train, 1);
    shuffle(&mut s.val, 2);
    let acc = acc_of(&s, &s.test);
    assert!((acc - 0.1).abs() < 0.05, "{acc}");
}

#[test]
fn demo_ranks_doc_ahead_of_base_accuracy() {
    let r = run_demo(0, &DemoConfig::default()).unwrap();
    assert!(r.mae(Method::Doc).unwrap() < r.mae(Method::BaseAcc).unwrap());
    for m in Method::ALL {
        assert!(r.table.lines().any(|l| l.split_whitespace().next() == Some(m.as_str())), "{m} missing");
    }
    let null = r.protocol.calibration.iter().find(|m| m.target_name == "noise_i0_r0").unwrap();
    assert!(null.features[&Method::Doc].abs() < 0.02);
}
