use kdvbed::bottom::ProcessSpec;
use kdvbed::ensemble::*;
use proptest::prelude::*;

fn small(spec: ProcessSpec, m: usize) -> EnsembleConfig {
    EnsembleConfig {
        realizations: m,
        eps_list: vec![0.1],
        spec,
        decay: DecayPlan { times: 4, tau_min: 0.05, tau_max: 0.5, points: 129, starts: 4, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn splitmix_reference_outputs() {
    // First two outputs of the reference SplitMix64 generator seeded with 0.
    assert_eq!(mix_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    assert_eq!(mix_seed(0, 1), 0x6E78_9E6A_A1B9_65F4);
    assert_eq!(realization_seed(7, 2, 3), mix_seed(mix_seed(7, 2), 3));
}

#[test]
fn single_realization_aggregate_is_the_realization() {
    let f = vec![1.5, -0.25, 3.0e-3, 754.0];
    let m = FieldMoments::from_fields(&[f.clone()]).unwrap();
    assert_eq!(m.count, 1);
    for (a, b) in m.mean.iter().zip(&f) {
        assert!((a - b).abs() <= 2f64.powi(-64));
    }
    assert!(m.variance.iter().all(|&v| v == 0.0));
}

#[test]
fn accumulator_rejects_out_of_range_values() {
    let mut acc = FieldSum::new(2);
    assert!(acc.add(&[1.0, f64::NAN]).is_err());
    assert!(acc.add(&[1.0, 2.0e6]).is_err());
    assert_eq!(acc.count, 0);
}

proptest! {
    #[test]
    fn aggregates_are_permutation_invariant(
        fields in prop::collection::vec(prop::collection::vec(-1.0e3..1.0e3f64, 5), 2..20),
        rot in 0usize..20,
    ) {
        let a = FieldMoments::from_fields(&fields).unwrap();
        let mut shuffled = fields.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let b = FieldMoments::from_fields(&shuffled).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn split_sums_merge_exactly(
        fields in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 3), 2..12),
        cut in 1usize..11,
    ) {
        let cut = cut.min(fields.len() - 1);
        let mut whole = FieldSum::new(3);
        let (mut left, mut right) = (FieldSum::new(3), FieldSum::new(3));
        for (i, f) in fields.iter().enumerate() {
            whole.add(f).unwrap();
            if i < cut { left.add(f).unwrap() } else { right.add(f).unwrap() }
        }
        prop_assert_eq!(right.merge(left), whole);
    }
}

#[test]
fn sweep_records_failures_with_seeds() {
    let run = sweep(11, 0, 10, |seed| if seed % 3 == 0 { Err(format!("bad {seed}")) } else { Ok(seed) });
    assert_eq!(run.successes() + run.failures.len(), 10);
    for f in &run.failures {
        assert_eq!(run.seeds[f.index], f.seed);
        assert!(run.results[f.index].is_none());
        assert_eq!(f.message, format!("bad {}", f.seed));
    }
    let ok: Vec<u64> = run.ok().copied().collect();
    assert!(ok.iter().all(|s| s % 3 != 0));
}

#[test]
fn config_hash_covers_inputs_but_not_output_dir() {
    let a = EnsembleConfig::default();
    let mut b = a.clone();
    b.output_dir = Some("/tmp/elsewhere".into());
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    b.master_seed += 1;
    assert_ne!(a.hash(), b.hash());
    let mut c = a.clone();
    c.decay.kappa = 21.0;
    assert_ne!(a.hash(), c.hash());
    assert!(EnsembleConfig { realizations: 0, ..a.clone() }.validate().is_err());
    assert!(EnsembleConfig { eps_list: vec![1.5], ..a }.validate().is_err());
}

#[test]
fn convolved_soliton_mass_and_inverse() {
    let (amp, kappa) = (3.0, 5.0);
    let bare = amp / (kappa * 0.1f64).cosh().powi(2);
    assert!((convolved_soliton(amp, kappa, 0.0, 0.1) - bare).abs() < 1e-14 * amp);
    for s in [0.05, 0.3, 1.0] {
        let mass = kdvbed::quad::composite_gauss(&|u| convolved_soliton(amp, kappa, s, u), -12.0, 12.0, 96, 8);
        assert!((mass - 2.0 * amp / kappa).abs() < 1e-8, "s {s} mass {mass}");
        let back = invert_spread(amp, kappa, convolved_soliton(amp, kappa, s, 0.0));
        assert!((back - s).abs() < 1e-9 * s.max(1.0), "{back} vs {s}");
    }
    assert_eq!(invert_spread(amp, kappa, amp), 0.0);
}

#[test]
fn flat_bottom_is_pure_transport() {
    let cfg = small(ProcessSpec::Flat, 4);
    let (reps, diff) = diffusion_coefficient(&cfg).unwrap();
    let rep = &reps[0];
    assert!(rep.pre_asymptotic);
    assert!(rep.slope.value.abs() < 0.02, "{:?}", rep.slope);
    assert_eq!(rep.successes + rep.failures.len(), 4);
    assert_eq!(diff.rows[0].predicted, 0.0);
    assert!(diff.rows[0].fitted.value.abs() < 1e-6, "{:?}", diff.rows[0]);
}

#[test]
fn reruns_are_identical_and_accounted() {
    let cfg = small(ProcessSpec::GaussianSpectral { sigma: 1.0, ell: 1.0 }, 6);
    let a = run_ensemble(&cfg).unwrap();
    let b = run_ensemble(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.accounted(), 6);
    assert!(a.diffusion.slope.is_none());
    assert_eq!(a.config_hash, cfg.hash());
    let rep = &a.decay[0];
    assert!(rep.late_rows().count() >= 1);
    for row in &rep.rows {
        assert_eq!(row.field.mean.len(), row.grid.len());
    }
    assert!(run_ensemble(&EnsembleConfig { experiment: "other".into(), ..cfg }).is_err());
}

#[test]
fn doubling_realizations_shrinks_se_by_root_two() {
    let spec = ProcessSpec::GaussianSpectral { sigma: 1.0, ell: 1.0 };
    let mean_se = |m: usize| {
        let rep = expectation_decay(&small(spec.clone(), m), 0.1).unwrap();
        let (mut acc, mut n) = (0.0, 0.0);
        for row in &rep.rows {
            for j in 0..row.grid.len() {
                acc += row.field.se(j);
                n += 1.0;
            }
        }
        acc / n
    };
    let ratio = mean_se(48) / mean_se(96);
    assert!((1.25..=1.6).contains(&ratio), "ratio {ratio}");
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = small(ProcessSpec::GaussianSpectral { sigma: 1.0, ell: 1.0 }, 5);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_ensemble(&cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}
