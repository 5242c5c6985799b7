use std::io::Write;

use proptest::prelude::*;
use softgrip::calibration::*;
use softgrip::chain::{GripperModel, ParamTable};
use softgrip::pso::PsoConfig;

fn angles(p: &Payload) -> &[f64] {
    match p {
        Payload::JointAngles { theta } => theta,
        other => panic!("{other:?}"),
    }
}

#[test]
fn unloaded_droop_is_downward() {
    let obs = synthesize_observations(
        &GripperModel::default(),
        &[ExperimentSpec::static_load(0.0)],
        &NoiseLevels::none(),
        0,
        &EvalSettings::default(),
    )
    .unwrap();
    assert_eq!(obs[0].source, Source::Synthetic);
    assert!(angles(&obs[0].payload).iter().all(|&t| t < 0.0));
}

#[test]
fn synthesis_is_reproducible() {
    let specs: Vec<ExperimentSpec> = [0.0, 0.02, 0.04].map(ExperimentSpec::static_load).to_vec();
    let m = GripperModel::default();
    let s = EvalSettings::default();
    let clean = synthesize_observations(&m, &specs, &NoiseLevels::none(), 1, &s).unwrap();
    assert_eq!(clean, synthesize_observations(&m, &specs, &NoiseLevels::none(), 2, &s).unwrap());
    let noisy = synthesize_observations(&m, &specs, &NoiseLevels::default(), 1, &s).unwrap();
    assert_eq!(noisy, synthesize_observations(&m, &specs, &NoiseLevels::default(), 1, &s).unwrap());
    assert_ne!(noisy, clean);
    let gap: f64 = angles(&noisy[2].payload)
        .iter()
        .zip(angles(&clean[2].payload))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap > 0.0 && gap < 0.03, "{gap}");
}

#[test]
fn repetitions_average_the_noise() {
    let m = GripperModel::default();
    let s = EvalSettings::default();
    let spread = |reps: usize| {
        let spec = ExperimentSpec { repetitions: reps, ..ExperimentSpec::actuation(5e4) };
        let clean = match synthesize_observations(&m, &[spec], &NoiseLevels::none(), 0, &s).unwrap()[0].payload {
            Payload::TipForce { force } => force,
            _ => unreachable!(),
        };
        (0..200u64)
            .map(|seed| match synthesize_observations(&m, &[spec], &NoiseLevels::default(), seed, &s).unwrap()[0].payload {
                Payload::TipForce { force } => (force - clean).powi(2),
                _ => unreachable!(),
            })
            .sum::<f64>()
            / 200.0
    };
    let (one, twenty) = (spread(1).sqrt(), spread(20).sqrt());
    assert!((one - 0.02).abs() < 0.004, "{one}");
    assert!((twenty - 0.02 / 20f64.sqrt()).abs() < 0.002, "{twenty}");
}

#[test]
fn actuation_sweep_is_near_linear() {
    let specs: Vec<ExperimentSpec> =
        pressure_grid_kpa().iter().map(|p| ExperimentSpec::actuation(p * 1e3)).collect();
    let obs = synthesize_observations(&GripperModel::default(), &specs, &NoiseLevels::none(), 0, &EvalSettings::default()).unwrap();
    let f: Vec<f64> = obs
        .iter()
        .map(|o| match o.payload {
            Payload::TipForce { force } => force,
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(f[0], 0.0);
    assert!(f.windows(2).all(|w| w[1] > w[0]));
    // Per-step increments agree to a few percent.
    let steps: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = steps.iter().sum::<f64>() / steps.len() as f64;
    assert!(steps.iter().all(|s| (s / mean - 1.0).abs() < 0.05), "{steps:?}");
}

#[test]
fn stage_order_is_enforced() {
    let mut c = CalibrationCampaign::protocol(Stage::Damping, 0);
    c.fixed = FixedParams::default();
    assert!(matches!(run_campaign(&c), Err(CalibrationError::StageOrder(_))));
    let mut t = CalibrationCampaign::protocol(Stage::Torque, 0);
    t.fixed.c = None;
    assert!(matches!(run_campaign(&t), Err(CalibrationError::StageOrder(_))));
    let mut short = CalibrationCampaign::protocol(Stage::Torque, 0);
    short.fixed.k = Some(vec![0.1; 3]);
    assert!(matches!(short.check(), Err(CalibrationError::Invalid(_))));
}

#[test]
fn experiment_kind_must_match_stage() {
    let mut c = CalibrationCampaign::protocol(Stage::Spring, 0);
    c.train.push(Trial { spec: ExperimentSpec::actuation(1e4), observation: None });
    assert!(matches!(c.check(), Err(CalibrationError::Mismatch { index: 3, .. })));
    let mut bad = CalibrationCampaign::protocol(Stage::Spring, 0);
    bad.train[0].observation = Some(Observation { payload: Payload::TipForce { force: 0.1 }, source: Source::Real });
    assert!(matches!(run_campaign(&bad), Err(CalibrationError::Mismatch { index: 0, .. })));
}

#[test]
fn reference_matches_its_own_observations() {
    let mut c = CalibrationCampaign::protocol(Stage::Spring, 0);
    c.synthesize_missing().unwrap();
    let truth = GripperModel::default();
    let report = validate(&truth, &c.validation, &c.settings).unwrap();
    assert_eq!(report.mean_fitness, 0.0);
    assert_eq!(report.rows.len(), 21);
    assert!(report.rows.iter().all(|r| r.simulated == r.observed));

    let mut doubled = truth.clone();
    doubled.joint_k.iter_mut().for_each(|k| *k *= 2.0);
    assert!(validate(&doubled, &c.validation, &c.settings).unwrap().mean_fitness > 0.0);
}

#[test]
fn damping_fitness_vanishes_at_the_truth() {
    let mut c = CalibrationCampaign::protocol(Stage::Damping, 0);
    c.synthesize_missing().unwrap();
    let specs: Vec<ExperimentSpec> = c.train.iter().map(|t| t.spec).collect();
    let real: Vec<&Payload> = c.train.iter().map(|t| &t.observation.as_ref().unwrap().payload).collect();
    let model = c.fixed_model().unwrap();
    let at_truth = campaign_fitness(&model, Stage::Damping, &ParamTable::reference().c(), &specs, &real, &c.settings).unwrap();
    assert_eq!(at_truth, 0.0);
    let off = campaign_fitness(&model, Stage::Damping, &[2e-3; 7], &specs, &real, &c.settings).unwrap();
    assert!(off > 0.0);
}

#[test]
fn infeasible_candidates_get_the_penalty() {
    // Pointing straight up, weak springs let the chain fold over.
    let mut upright = GripperModel::default();
    upright.mount.orientation = std::f64::consts::FRAC_PI_2;
    let specs = [ExperimentSpec::static_load(0.05)];
    let real = Payload::JointAngles { theta: vec![0.0; 7] };
    let s = EvalSettings::default();
    let f = campaign_fitness(&upright, Stage::Spring, &[0.01; 7], &specs, &[&real], &s).unwrap();
    assert_eq!(f, PENALTY_FITNESS);
    let stiff = campaign_fitness(&upright, Stage::Spring, &[1.0; 7], &specs, &[&real], &s).unwrap();
    assert!(stiff < 0.1);
}

#[test]
fn spring_campaign_recovers_reference() {
    let mut c = CalibrationCampaign::protocol(Stage::Spring, 1);
    c.pso.iterations = 300;
    let r = run_campaign(&c).unwrap();
    assert!(r.train_fitness < 1e-6, "{}", r.train_fitness);
    assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    // Validating on the training set reproduces the optimizer's value.
    assert_eq!(r.train_report.mean_fitness, r.train_fitness);
    assert!(r.validation.unwrap().mean_fitness < 1e-4);
    assert_eq!(r.boxplots.len(), 30 * 7);
    assert_eq!(r.params.c(), ParamTable::reference().c());
    assert_eq!(run_campaign(&c).unwrap().history, r.history);
}

#[test]
fn torque_campaign_recovers_forces() {
    let r = run_campaign(&CalibrationCampaign::protocol(Stage::Torque, 2)).unwrap();
    assert!(r.train_fitness < 1e-3, "{}", r.train_fitness);
    assert!(r.validation.unwrap().mean_fitness < 1e-3);
    assert_eq!(r.params.k(), ParamTable::reference().k());
}

#[test]
fn campaign_json_round_trip() {
    let mut c = CalibrationCampaign::protocol(Stage::Torque, 5);
    c.synthesize_missing().unwrap();
    let back = CalibrationCampaign::from_json(&c.to_json()).unwrap();
    assert_eq!(back, c);
    let minimal = r#"{"stage":"spring","pso":{"omega":0.9,"c1":0.5,"c2":0.3,"swarm_size":4,"iterations":2,"bounds":[],"seed":1},
        "train":[{"spec":{"kind":"static_load","tip_mass":0.02},"observation":{"kind":"joint_angles","theta":[0,0,0,0,0,0,0],"source":"real"}}]}"#;
    let m = CalibrationCampaign::from_json(minimal).unwrap();
    assert_eq!(m.train[0].spec, ExperimentSpec::static_load(0.02));
    assert!(run_campaign(&m).is_ok());
}

#[test]
fn observation_csv_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    };
    let s = read_observations(&write("s.csv", "tip_mass_g,theta0,theta1\n20,-0.1,-0.2\n")).unwrap();
    assert_eq!(s[0].spec, ExperimentSpec::static_load(0.02));
    assert_eq!(angles(&s[0].observation.as_ref().unwrap().payload), &[-0.1, -0.2]);
    let r = read_observations(&write("r.csv", "initial_mass_g,duration_s,settling_time_s,overshoots\n40,2,0.409,12\n")).unwrap();
    assert_eq!(
        r[0].observation.as_ref().unwrap().payload,
        Payload::SettlingData { settling_time: 0.409, overshoots: 12 }
    );
    let a = read_observations(&write("a.csv", "pressure_kpa,force_n\n50,0.44\n100,0.9\n")).unwrap();
    assert_eq!(a.len(), 2);
    assert_eq!(a[1].spec, ExperimentSpec::actuation(1e5));
    assert!(read_observations(&write("x.csv", "foo,bar\n1,2\n")).is_err());
    assert!(read_observations(&write("y.csv", "tip_mass_g,theta1\n1,2\n")).is_err());

    let campaign = write(
        "c.json",
        r#"{"stage":"torque","fixed":{"k":[0.19,0.176,0.311,0.517,0.103,0.484,0.401],"c":[1e-3,1e-3,1e-3,1e-3,1e-3,1e-3,1e-3]},
            "train_csv":"a.csv","pso":{"omega":0.9,"c1":0.5,"c2":0.3,"swarm_size":4,"iterations":2,"bounds":[],"seed":1}}"#,
    );
    let c = CalibrationCampaign::load(&campaign).unwrap();
    assert_eq!(c.train.len(), 2);
    assert!(c.check().is_ok());
}

#[test]
fn regularized_damping_flag() {
    let s = EvalSettings { overshoot_weight: Some(0.01), ..EvalSettings::default() };
    let a = Payload::SettlingData { settling_time: 0.409, overshoots: 12 };
    let b = Payload::SettlingData { settling_time: 0.409, overshoots: 10 };
    assert_eq!(EvalSettings::default().score(&a, &b).unwrap(), 0.0);
    assert!((s.score(&a, &b).unwrap() - 0.02).abs() < 1e-15);
}

#[test]
fn pso_bounds_default_to_stage_box() {
    let mut c = CalibrationCampaign::protocol(Stage::Spring, 0);
    c.pso = PsoConfig { swarm_size: 4, iterations: 3, ..c.pso };
    let r = run_campaign(&c).unwrap();
    assert!(r.log.iter().all(|rec| rec.position.iter().all(|&k| (0.01..=1.0).contains(&k))));
}

proptest! {
    #[test]
    fn spring_fitness_properties(
        pairs in prop::collection::vec((-1.5f64..1.5, -1.5f64..1.5), 7),
        perm in Just((0..7).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let f = spring_fitness(&a, &b).unwrap();
        prop_assert!(f >= 0.0);
        prop_assert_eq!(spring_fitness(&a, &a).unwrap(), 0.0);
        let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        prop_assert!((spring_fitness(&pa, &pb).unwrap() - f).abs() < 1e-12);
    }

    #[test]
    fn damping_and_torque_fitness_nonnegative(t1 in 0.0f64..2.0, t2 in 0.0f64..2.0, n1 in 0usize..30, n2 in 0usize..30, f1 in 0.0f64..2.0, f2 in 0.0f64..2.0) {
        let d = damping_fitness(t1, n1, t2, n2);
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d == 0.0, t1 == t2);
        prop_assert!(torque_fitness(f1, f2) >= 0.0);
        prop_assert_eq!(torque_fitness(f1, f2) == 0.0, f1 == f2);
    }
}
