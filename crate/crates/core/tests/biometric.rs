use ecgbench::biometric::{
    build_template, fuse_probes, fuse_template, generate_pairs, score_matrix, similarity, BiometricError, Cosine,
    Euclidean, PairSampling, Pearson, ScoreMatrix, Template, TemplateFusion, TemplateSize,
};

fn tpl(id: &str, v: &[f64]) -> Template {
    build_template(
        id,
        &[v.to_vec()],
        vec!["s1".into()],
        TemplateFusion::Mean,
        TemplateSize::All,
        &Cosine,
    )
    .unwrap()
}

#[test]
fn similarity_examples() {
    assert!((similarity(&[1.0, 0.0], &[1.0, 0.0], "cosine").unwrap() - 1.0).abs() < 1e-12);
    assert!((similarity(&[1.0, 0.0], &[1.0, 1.0], "cosine").unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert!((similarity(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], "pearson").unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(similarity(&[0.0, 3.0], &[0.0, 7.0], "euclidean").unwrap(), -4.0);
    assert_eq!(
        similarity(&[0.0, 0.0], &[1.0, 0.0], "cosine"),
        Err(BiometricError::ZeroVector)
    );
    assert_eq!(
        similarity(&[2.0, 2.0], &[1.0, 0.0], "pearson"),
        Err(BiometricError::ConstantVector)
    );
    assert!(matches!(
        similarity(&[1.0], &[1.0], "manhattan"),
        Err(BiometricError::Unknown(_))
    ));
}

#[test]
fn scale_invariance_depends_on_metric() {
    let (a, b) = ([1.0, 2.0, 0.5, -1.0], [0.8, 2.2, 0.4, -0.7]);
    let scaled: Vec<f64> = a.iter().map(|v| 3.0 * v).collect();
    for m in ["cosine", "pearson"] {
        let d = similarity(&a, &b, m).unwrap() - similarity(&scaled, &b, m).unwrap();
        assert!(d.abs() < 1e-12, "{m}");
    }
    // the genuine match loses to a scaled-down impostor under Euclidean only
    let c = [0.1, 0.1, 0.1, 0.1];
    assert!(similarity(&scaled, &b, "euclidean").unwrap() < similarity(&c, &b, "euclidean").unwrap());
    assert!(similarity(&scaled, &b, "cosine").unwrap() > similarity(&c, &b, "cosine").unwrap());
}

#[test]
fn template_examples() {
    let mean = fuse_template(
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        TemplateFusion::Mean,
        TemplateSize::All,
        &Cosine,
    );
    assert_eq!(mean.unwrap(), vec![0.5, 0.5]);
    let set = [vec![1.0, 0.0], vec![2.0, 0.0], vec![10.0, 0.0]];
    let rep = fuse_template(&set, TemplateFusion::Representative, TemplateSize::All, &Euclidean).unwrap();
    assert_eq!(rep, vec![2.0, 0.0]);
    for fusion in [TemplateFusion::Mean, TemplateFusion::Representative] {
        let first = fuse_template(&set, fusion, TemplateSize::First(1), &Euclidean).unwrap();
        assert_eq!(first, set[0]);
    }
    assert_eq!(
        fuse_template(&[], TemplateFusion::Mean, TemplateSize::All, &Cosine),
        Err(BiometricError::EmptyEnrollment)
    );
    let t = build_template(
        "S1",
        &set,
        vec!["a".into()],
        TemplateFusion::Mean,
        TemplateSize::First(2),
        &Cosine,
    )
    .unwrap();
    assert_eq!((t.n_beats, t.vector.clone()), (2, vec![1.5, 0.0]));
}

#[test]
fn medoid_is_member_and_ties_go_early() {
    let set = [
        vec![0.3, 1.1, 0.2],
        vec![-0.2, 0.9, 0.4],
        vec![0.8, 0.4, 0.1],
        vec![0.5, 0.6, 0.9],
    ];
    let rep = fuse_template(&set, TemplateFusion::Representative, TemplateSize::All, &Pearson).unwrap();
    assert!(set.iter().any(|s| s == &rep));
    let sym = [vec![0.0, 1.0], vec![2.0, 1.0]];
    let r = fuse_template(&sym, TemplateFusion::Representative, TemplateSize::All, &Euclidean).unwrap();
    assert_eq!(r, sym[0]);
}

#[test]
fn mean_commutes_with_order() {
    let a = [vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]];
    let b = [a[2].clone(), a[0].clone(), a[1].clone()];
    let fa = fuse_template(&a, TemplateFusion::Mean, TemplateSize::All, &Cosine).unwrap();
    let fb = fuse_template(&b, TemplateFusion::Mean, TemplateSize::All, &Cosine).unwrap();
    for (x, y) in fa.iter().zip(&fb) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn probe_fusion_examples() {
    let beats: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
    assert_eq!(fuse_probes(&beats, 3), vec![vec![1.0], vec![4.0]]);
    assert_eq!(fuse_probes(&beats[..2], 3), vec![vec![0.5]]);
    assert_eq!(fuse_probes(&beats, 1), beats);
}

#[test]
fn score_matrix_examples() {
    let gallery = [
        tpl("b", &[0.0, 1.0, 0.0]),
        tpl("a", &[1.0, 0.0, 0.0]),
        tpl("c", &[1.0, 1.0, 1.0]),
    ];
    let probes = vec![
        (vec![1.0, 0.0, 0.0], "a".to_string()),
        (vec![0.1, 1.0, 0.0], "b".to_string()),
        (vec![1.0, 1.0, 0.9], "c".to_string()),
        (vec![0.2, 0.3, 0.4], "a".to_string()),
    ];
    let m = score_matrix(&gallery, &probes, &Cosine).unwrap();
    assert_eq!((m.n_probes(), m.n_gallery()), (4, 3));
    assert_eq!(m.gallery_subjects, vec!["a", "b", "c"]);
    assert!((m.get(0, 0) - 1.0).abs() < 1e-12);
    assert_eq!(m.row(0).iter().cloned().fold(f64::MIN, f64::max), m.get(0, 0));

    let rev: Vec<_> = probes.iter().rev().cloned().collect();
    let mr = score_matrix(&gallery, &rev, &Cosine).unwrap();
    for p in 0..4 {
        assert_eq!(mr.row(p), m.row(3 - p));
    }
    assert_eq!(score_matrix(&[], &probes, &Cosine), Err(BiometricError::EmptyInput));
}

#[test]
fn self_matrix_is_symmetric() {
    let vs = [vec![0.3, -1.2, 0.7], vec![1.5, 0.2, -0.4], vec![-0.6, 0.9, 1.1]];
    let ids = ["a", "b", "c"];
    let gallery: Vec<Template> = vs.iter().zip(ids).map(|(v, id)| tpl(id, v)).collect();
    let probes: Vec<_> = vs.iter().zip(ids).map(|(v, id)| (v.clone(), id.to_string())).collect();
    let m = score_matrix(&gallery, &probes, &Cosine).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((m.get(i, j) - m.get(j, i)).abs() < 1e-12);
        }
    }
}

fn ten_by_ten() -> ScoreMatrix {
    let ids: Vec<String> = (0..10).map(|i| format!("S{i:02}")).collect();
    ScoreMatrix {
        scores: (0..100).map(|c| (c * 37 % 101) as f64 / 101.0).collect(),
        probe_subjects: ids.clone(),
        gallery_subjects: ids,
    }
}

#[test]
fn pair_examples() {
    let m = ten_by_ten();
    let b = generate_pairs(&m, PairSampling::Balanced, 7).unwrap();
    assert_eq!((b.genuine.len(), b.impostor.len()), (10, 10));
    let all = generate_pairs(&m, PairSampling::All, 7).unwrap();
    assert_eq!(all.impostor.len(), 100 - 10);
    assert_eq!(generate_pairs(&m, PairSampling::Balanced, 7).unwrap(), b);
    assert_ne!(
        generate_pairs(&m, PairSampling::Balanced, 8).unwrap().impostor,
        b.impostor
    );

    let mut none = ten_by_ten();
    none.probe_subjects = (0..10).map(|i| format!("X{i}")).collect();
    assert_eq!(
        generate_pairs(&none, PairSampling::All, 0),
        Err(BiometricError::NoGenuinePairs)
    );
}
