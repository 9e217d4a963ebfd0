use dnrisk::synth::{generate_cohort, signal_features, validate_marginals, CohortSpec, SynthKind};

#[test]
fn default_spec_shape() {
    let spec = CohortSpec::default_spec();
    assert_eq!((spec.n0, spec.n1), (283, 279));
    assert_eq!(spec.features.len(), 121);
    assert_eq!(signal_features(&spec).len(), 38);
    assert!((spec.prevalence() - 279.0 / 562.0).abs() < 1e-15);

    let ds = generate_cohort(&spec).unwrap();
    assert_eq!(ds.n_rows(), 562);
    assert_eq!(ds.target().iter().filter(|&&v| v == 1).count(), 279);
}

#[test]
fn default_cohort_is_unflagged() {
    let spec = CohortSpec::default_spec();
    let ds = generate_cohort(&spec).unwrap();
    let flagged: Vec<_> = validate_marginals(&ds, &spec)
        .unwrap()
        .into_iter()
        .filter(|c| c.flagged)
        .collect();
    assert!(flagged.is_empty(), "{flagged:?}");
}

/// At 100,000 rows per group every sample moment should sit within three
/// standard errors of its analytic value.
#[test]
fn large_sample_moments_converge() {
    let mut spec = CohortSpec::default_spec();
    let cont = spec.features.iter().filter(|f| f.kind == SynthKind::Continuous).take(8);
    let cat = spec
        .features
        .iter()
        .filter(|f| f.kind == SynthKind::Categorical)
        .take(4);
    let keep: Vec<_> = cont.chain(cat).cloned().collect();
    spec.signal.retain(|name, _| keep.iter().any(|f| &f.name == name));
    spec.features = keep;
    for f in &mut spec.features {
        f.missing_rate = 0.0;
    }
    spec.n0 = 100_000;
    spec.n1 = 100_000;
    spec.validate().unwrap();

    let ds = generate_cohort(&spec).unwrap();
    let checks = validate_marginals(&ds, &spec).unwrap();
    assert_eq!(checks.len(), 24);
    for c in &checks {
        assert!(
            c.z.abs() <= 3.0,
            "{} group {} {}: z = {:.2}",
            c.feature,
            c.group,
            c.statistic,
            c.z
        );
    }
}
