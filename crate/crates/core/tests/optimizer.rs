use continuum_core::bench::{build_preset, scenario::quadratic_value, Preset, ScenarioParams};
use continuum_core::mapping::HostPool;
use continuum_core::monitor::Metric;
use continuum_core::optimizer::*;
use continuum_core::rational::Rational;
use continuum_core::spec::ParamValue;

fn quadratic_space() -> continuum_core::spec::ParameterSpace {
    build_preset(Preset::Quadratic, &ScenarioParams::default())
        .unwrap()
        .parameters
}

fn latency() -> Vec<Objective> {
    vec![Objective::new(
        Metric::E2eLatencyNs,
        Aggregator::Mean,
        Direction::Minimize,
    )]
}

fn int(v: &ParamValue) -> i64 {
    match v {
        ParamValue::Int(i) => *i,
        other => panic!("not an integer: {other}"),
    }
}

fn direct(_: usize, p: &Point) -> Result<Vec<Rational>, OptimizeError> {
    Ok(vec![Rational::from_integer(
        quadratic_value(int(&p[0]), int(&p[1])).into(),
    )])
}

fn grid_space() -> continuum_core::spec::ParameterSpace {
    continuum_core::spec::parse_space("bowl.a: [1, 3]\nbowl.b: {range: [0, 4], step: 4}\n").unwrap()
}

#[test]
fn grid_budget_covers_every_point_once() {
    let space = grid_space();
    let result = search(&space, &latency(), &SearchConfig::new(Strategy::Grid, 10, 0), direct).unwrap();
    assert_eq!(result.budget_used, 4);
    let points: Vec<Point> = result.evaluations.iter().map(|e| e.point.clone()).collect();
    assert_eq!(points, enumerate_grid(&space).unwrap());
}

#[test]
fn exhaustive_grid_finds_the_true_optimum() {
    let space = quadratic_space();
    let result = search(&space, &latency(), &SearchConfig::new(Strategy::Grid, 400, 0), direct).unwrap();
    let best = &result.evaluations[result.best.unwrap()];
    assert_eq!((int(&best.point[0]), int(&best.point[1])), (3, 4));
    let brute = (0..20)
        .flat_map(|a| (0..20).map(move |b| quadratic_value(a, b)))
        .min()
        .unwrap();
    assert_eq!(best.objectives[0], Rational::from_integer(brute.into()));
}

#[test]
fn searches_are_deterministic_per_seed() {
    let space = quadratic_space();
    for strategy in [Strategy::Random, Strategy::Surrogate] {
        let a = search(&space, &latency(), &SearchConfig::new(strategy, 30, 11), direct).unwrap();
        let b = search(&space, &latency(), &SearchConfig::new(strategy, 30, 11), direct).unwrap();
        assert_eq!(a, b);
        let mut batched = SearchConfig::new(strategy, 30, 11);
        batched.batch_size = 4;
        let c = search(&space, &latency(), &batched, direct).unwrap();
        assert_eq!(c, search(&space, &latency(), &batched, direct).unwrap());
        assert_eq!(c.budget_used, 30);
    }
}

#[test]
fn surrogate_never_repeats_a_point() {
    let space = quadratic_space();
    for seed in 0..2 {
        let mut config = SearchConfig::new(Strategy::Surrogate, 400, seed);
        config.batch_size = 3;
        let result = search(&space, &latency(), &config, direct).unwrap();
        let unique: std::collections::HashSet<_> = result.evaluations.iter().map(|e| e.point.clone()).collect();
        assert_eq!(unique.len(), 400);
    }
    let small = grid_space();
    let result = search(
        &small,
        &latency(),
        &SearchConfig::new(Strategy::Surrogate, 10, 0),
        direct,
    )
    .unwrap();
    assert_eq!(result.budget_used, 4);
}

#[test]
fn optimize_loop_runs_the_quadratic_preset() {
    let spec = build_preset(Preset::Quadratic, &ScenarioParams::default()).unwrap();
    let pool = HostPool::synthesize(&spec);
    let dir = tempfile::tempdir().unwrap();
    let options = LoopOptions {
        out_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let config = SearchConfig::new(Strategy::Surrogate, 60, 0);
    let result = optimize_loop(&spec, &pool, &spec.parameters, &latency(), &config, &options).unwrap();
    assert_eq!(
        result.summary_line(),
        "best bowl.a=3 bowl.b=4 e2e_latency_ns:mean:minimize=0"
    );
    for e in &result.evaluations {
        let expected = quadratic_value(int(&e.point[0]), int(&e.point[1]));
        assert_eq!(e.objectives[0], Rational::from_integer(expected.into()));
        assert!(e.archive.as_ref().unwrap().join("manifest.json").exists());
    }
    let in_memory = optimize_loop(
        &spec,
        &pool,
        &spec.parameters,
        &latency(),
        &config,
        &LoopOptions::default(),
    )
    .unwrap();
    let strip = |r: &OptimizationResult| {
        r.evaluations
            .iter()
            .map(|e| (e.point.clone(), e.objectives.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&result), strip(&in_memory));

    result.write_reports(dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("evaluations.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "index,bowl.a,bowl.b,e2e_latency_ns:mean:minimize"
    );
    assert_eq!(csv.lines().count(), 61);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("optimization.json")).unwrap()).unwrap();
    assert_eq!(json["evaluations"].as_array().unwrap().len(), 60);
}

#[test]
fn bad_parameter_targets_are_rejected() {
    let spec = build_preset(Preset::Quadratic, &ScenarioParams::default()).unwrap();
    let pool = HostPool::synthesize(&spec);
    let space = continuum_core::spec::parse_space("bowl.colour: [1, 2]\n").unwrap();
    let err = optimize_loop(
        &spec,
        &pool,
        &space,
        &latency(),
        &SearchConfig::new(Strategy::Grid, 2, 0),
        &LoopOptions::default(),
    )
    .unwrap_err();
    assert!(
        matches!(err, OptimizeError::Invalid(ref v) if v[0].code.as_str() == "UnknownParameterTarget"),
        "{err}"
    );
}

#[test]
fn correlation_report() {
    let space = continuum_core::spec::parse_space("x: [1, 2, 3, 4]\nmode: [fast, slow]\n").unwrap();
    let ys = [1, 3, 2, 4];
    let evaluations: Vec<Evaluation> = (0..4)
        .map(|i| Evaluation {
            index: i,
            point: vec![ParamValue::Int(i as i64 + 1), ParamValue::Text("fast".into())],
            objectives: vec![Rational::from_integer(ys[i])],
            archive: None,
        })
        .collect();
    let r = correlate(&evaluations, &space, "x", 0).unwrap().unwrap();
    assert!((r - 0.8).abs() < 1e-15);
    assert!(matches!(
        correlate(&evaluations, &space, "mode", 0),
        Err(OptimizeError::NonNumericParameter(_))
    ));
}

#[test]
fn materialized_specs_carry_the_point() {
    let spec = build_preset(Preset::Hybrid, &ScenarioParams::default()).unwrap();
    let space = continuum_core::spec::parse_space(
        "preprocess.factor: [{rational: 1/2}]\npreprocess.quantity: [2]\nanalytics.cpu_capacity: [500]\n",
    )
    .unwrap();
    let point: Point = space.dimensions.iter().map(|d| d.domain.value_at(0).unwrap()).collect();
    let derived = materialize(&spec, &space, &point).unwrap();
    let pre = derived.service("preprocess").unwrap();
    assert_eq!(pre.params["factor"], "1/2");
    assert_eq!(pre.quantity, 2);
    assert_eq!(
        derived.service("analytics").unwrap().cpu_capacity,
        Rational::from_integer(500)
    );
}
