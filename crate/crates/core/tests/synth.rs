use acoustend::analysis::{dataset_features, leave_one_specimen_out, AnalysisConfig};
use acoustend::dsp::DEFAULT_BAND;
use acoustend::phantom::{DamageKind, PhantomConfig};
use acoustend::solver::SolverConfig;
use acoustend::synthlab::{generate_dataset, mechanical_dataset, Dataset, SynthConfig};
use approx::assert_relative_eq;

fn coarse_solver() -> SolverConfig {
    SolverConfig {
        spacing_m: 0.7e-3,
        ..SolverConfig::default()
    }
}

fn run(synth: &SynthConfig) -> (Dataset, usize) {
    let phantom = PhantomConfig::default();
    let scenarios = synth
        .default_cohort(&phantom.geometry().unwrap(), phantom.muscle, phantom.tendon)
        .unwrap();
    let (ds, report) = generate_dataset(
        &scenarios,
        synth,
        &coarse_solver(),
        &phantom.calibration().unwrap(),
    )
    .unwrap();
    assert_eq!(report.records, ds.records.len());
    (ds, report.solver_calls)
}

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        healthy_specimens: 1,
        damaged_per_kind: 1,
        cycles: 2,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn cache_does_not_change_the_output() {
    let cached = small(5);
    let uncached = SynthConfig {
        use_cache: false,
        ..cached.clone()
    };
    let (a, calls_a) = run(&cached);
    let (b, calls_b) = run(&uncached);
    assert_eq!((&a.specimens, &a.records), (&b.specimens, &b.records));
    // Cached runs solve each (specimen, step) once; uncached runs solve it
    // again in every cycle.
    assert_eq!(calls_a, 4 * cached.steps_per_cycle);
    assert_eq!(calls_b, cached.cycles * calls_a);
}

#[test]
fn forces_follow_the_mechanics_within_the_jitter() {
    let synth = small(8);
    let (ds, _) = run(&synth);
    let phantom = PhantomConfig::default();
    let scenarios = synth
        .default_cohort(&phantom.geometry().unwrap(), phantom.muscle, phantom.tendon)
        .unwrap();
    let mech = mechanical_dataset(&scenarios, &synth, &phantom.calibration().unwrap()).unwrap();
    assert_eq!(mech.records.len(), ds.records.len());
    let j = synth.force_jitter;
    let turning = synth.steps_per_cycle / 2 - 1;
    for (r, m) in ds.records.iter().zip(&mech.records) {
        assert_eq!(
            (&r.specimen_id, r.cycle, r.step),
            (&m.specimen_id, m.cycle, m.step)
        );
        assert_eq!(r.force.to_bits(), m.force.to_bits());
        assert_eq!(r.deformation.to_bits(), m.deformation.to_bits());
        assert!((0.0..=synth.max_force_n).contains(&r.force));
        // Healthy tendons are tuned to reach the full force at the turn.
        if r.step == turning && r.condition == DamageKind::Healthy {
            assert!(
                r.force >= synth.max_force_n * (1.0 - j) - 1e-9,
                "{}",
                r.force
            );
        }
    }
    // Between cycles one step's force moves by no more than the jitter allows.
    for info in &ds.specimens {
        for step in 0..synth.steps_per_cycle {
            let f: Vec<f64> = ds
                .records
                .iter()
                .filter(|r| r.specimen_id == info.id && r.step == step)
                .map(|r| r.force)
                .collect();
            let (lo, hi) = f
                .iter()
                .fold((f64::INFINITY, 0.0_f64), |(a, b), &x| (a.min(x), b.max(x)));
            if lo > 0.0 {
                assert!(hi / lo <= (1.0 + j) / (1.0 - j) + 1e-12);
            }
        }
    }
}

#[test]
fn seeds_drive_noise_and_nothing_else_varies() {
    let clean = SynthConfig {
        noise_snr_db: None,
        ..small(1)
    };
    assert_eq!(run(&clean).0, run(&clean).0);

    let noisy = small(1);
    let (a, _) = run(&noisy);
    assert_eq!(a, run(&noisy).0);
    let (b, _) = run(&SynthConfig { seed: 2, ..noisy });
    assert_ne!(a.records[0].traces, b.records[0].traces);
}

#[test]
fn labels_survive_a_global_gain() {
    let synth = SynthConfig {
        healthy_specimens: 3,
        damaged_per_kind: 3,
        cycles: 1,
        noise_snr_db: None,
        seed: 4,
        ..SynthConfig::default()
    };
    let (ds, _) = run(&synth);
    let config = AnalysisConfig::default();
    let features = dataset_features(&ds, &config, DEFAULT_BAND).unwrap();
    let again = dataset_features(&ds, &config, DEFAULT_BAND).unwrap();
    for (a, b) in features.iter().zip(&again) {
        assert_eq!(
            a.features.to_array().map(f64::to_bits),
            b.features.to_array().map(f64::to_bits)
        );
    }

    let mut louder = ds.clone();
    for r in &mut louder.records {
        for t in &mut r.traces {
            t.samples.iter_mut().for_each(|v| *v *= 3.7);
        }
    }
    let scaled = dataset_features(&louder, &config, DEFAULT_BAND).unwrap();
    for (a, b) in features.iter().zip(&scaled) {
        for (x, y) in a.features.to_array().iter().zip(b.features.to_array()) {
            assert_relative_eq!(*x, y, max_relative = 1e-9, epsilon = 1e-12);
        }
    }
    let base = leave_one_specimen_out(&features).unwrap();
    let gained = leave_one_specimen_out(&scaled).unwrap();
    let labels = |cv: &acoustend::analysis::CrossValidation| {
        cv.predictions
            .iter()
            .map(|p| p.predicted)
            .collect::<Vec<_>>()
    };
    assert_eq!(labels(&base), labels(&gained));
}
