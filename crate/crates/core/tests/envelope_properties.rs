use arto::experiments::{
    push_time, recovery_predicate, sweep, trial, Disturbance, ExperimentConfig, SweepSpec,
};
use arto::orchestrator::PlannerKind;
use arto::problem::{Reference, Side};

fn coarse(planner: PlannerKind) -> SweepSpec {
    SweepSpec {
        planners: vec![planner],
        angles: 4,
        upper: 750.0,
        resolution: 10.0,
        phases: vec![0.5],
    }
}

/// Pushing at θ during left stance mirrors pushing at -θ during right stance.
fn assert_mirror_symmetric(planner: PlannerKind) {
    let spec = coarse(planner);
    let left = ExperimentConfig::default();
    let right = ExperimentConfig {
        push_side: Side::Right,
        ..left
    };
    let l = sweep(Disturbance::Push, &spec, &left).unwrap();
    let r = sweep(Disturbance::Push, &spec, &right).unwrap();
    for (i, p) in l.iter().enumerate() {
        let mirror = &r[(spec.angles - i) % spec.angles];
        assert!(
            (p.max - mirror.max).abs() <= spec.resolution,
            "{planner} angle {:.3}: left stance {} vs mirrored right stance {}",
            p.angle,
            p.max,
            mirror.max
        );
    }
}

#[test]
fn baseline_push_envelope_is_mirror_symmetric() {
    assert_mirror_symmetric(PlannerKind::Baseline);
}

#[test]
fn arto_push_envelope_is_mirror_symmetric() {
    assert_mirror_symmetric(PlannerKind::Arto);
}

#[test]
fn decisions_one_step_from_the_envelope_survive_threshold_changes() {
    let cfg = ExperimentConfig::default();
    for planner in PlannerKind::ALL {
        let spec = coarse(planner);
        let envelope = sweep(Disturbance::Push, &spec, &cfg).unwrap();
        let at = push_time(planner, &cfg)
            .unwrap()
            .expect("stance after settle");
        for p in &envelope {
            for (magnitude, expected) in [
                (p.max - spec.resolution, true),
                (p.max + spec.resolution, false),
            ] {
                if !(0.0..=spec.upper).contains(&magnitude) {
                    continue;
                }
                let (_, out) =
                    trial(planner, Disturbance::Push, p.angle, magnitude, at, &cfg).unwrap();
                let end = at + cfg.window;
                for scale in [0.8, 1.0, 1.2] {
                    let decided =
                        recovery_predicate(&out, end, Reference::default(), cfg.tolerance * scale);
                    assert_eq!(
                        decided, expected,
                        "{planner} angle {:.3} push {magnitude} N, tolerance x{scale}",
                        p.angle
                    );
                }
            }
        }
    }
}
