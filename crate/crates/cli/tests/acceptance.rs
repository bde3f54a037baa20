//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use continuum_core::archive::{run_experiment, ArchiveError, ExperimentArchive};
use continuum_core::bench::{analytic_latency, build_preset, Preset, ScenarioParams};
use continuum_core::emulator::{provision, Link, Transit};
use continuum_core::mapping::{resolve_mapping, HostPool, Strategy as Placement};
use continuum_core::monitor::{summarize, summarize_values, Metric};
use continuum_core::optimizer::{
    correlate, pareto_front, search, Aggregator, Direction, Evaluation, Objective, OptimizeError, Point, SearchConfig,
    Strategy,
};
use continuum_core::rational::Rational;
use continuum_core::rng::SplitMix64;
use continuum_core::spec::{
    parse_spec, validate_spec, Bandwidth, Dimension, Domain, NetworkRule, ParamValue, ParameterSpace,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_continuum-lab"))
        .env_remove("CONTINUUM_LAB_TRACE")
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn ns(r: &Rational) -> u64 {
    assert!(r.is_integer());
    u64::try_from(r.to_integer()).unwrap()
}

/// 1. Two runs of the same preset and seed diff as IDENTICAL, each within 5 s.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut slowest = Duration::ZERO;
    for preset in ["cloud_centric", "hybrid"] {
        let mut outs = Vec::new();
        for copy in ["a", "b"] {
            let out = dir.path().join(format!("{preset}_{copy}"));
            let start = Instant::now();
            let o = lab(&["run", "--preset", preset, "--seed", "42", "--out", path_str(&out)]);
            let took = start.elapsed();
            slowest = slowest.max(took);
            ensure(o.status.success(), || {
                format!("{preset} run failed: {}", String::from_utf8_lossy(&o.stderr))
            })?;
            ensure(took < Duration::from_secs(5), || format!("{preset} run took {took:?}"))?;
            outs.push(out);
        }
        let o = lab(&["diff", path_str(&outs[0]), path_str(&outs[1])]);
        ensure(o.status.code() == Some(0) && o.stdout == b"IDENTICAL\n", || {
            format!(
                "{preset} diff: {:?} {}",
                o.status.code(),
                String::from_utf8_lossy(&o.stdout)
            )
        })?;
        let a = ExperimentArchive::load(&outs[0]).map_err(|e| e.to_string())?;
        let b = ExperimentArchive::load(&outs[1]).map_err(|e| e.to_string())?;
        ensure(a.manifest.trace_digests == b.manifest.trace_digests, || {
            format!("{preset} trace digests differ")
        })?;
    }
    Ok(format!(
        "both presets IDENTICAL, slowest run {} ms (limit 5000)",
        slowest.as_millis()
    ))
}

fn shaped_rule(src: &str, dst: &str) -> NetworkRule {
    NetworkRule {
        delay_ns: 10_000_000,
        bandwidth: Bandwidth::BitsPerSecond(1_000_000),
        ..NetworkRule::ideal(src, dst)
    }
}

/// 2. 1e6 bits over 10 ms / 1 Mbps arrive at 1.01 s, back-to-back at 1.01 s and 2.01 s.
fn link_arithmetic() -> Outcome {
    let mut link = Link::new("edge", "cloud", shaped_rule("edge", "cloud"), 0, 0);
    let single = link.transit(1_000_000, 0);
    ensure(single == Transit::Delivered(1_010_000_000), || {
        format!("single send: {single:?}")
    })?;

    let mut link = Link::new("edge", "cloud", shaped_rule("edge", "cloud"), 0, 0);
    let pair = [link.transit(1_000_000, 0), link.transit(1_000_000, 0)];
    let want = [Transit::Delivered(1_010_000_000), Transit::Delivered(2_010_000_000)];
    ensure(pair == want, || format!("back-to-back: {pair:?}"))?;

    // Same arithmetic through the event engine, read back from the trace.
    let spec = parse_spec(
        "name: link\nlayers:\n  - {name: edge, services: [{id: src, kind: sink}]}\n  - {name: cloud, services: [{id: dst, kind: sink}]}\nnetwork:\n  - {src: edge, dst: cloud, delay: 10ms, bandwidth: 1Mbps, symmetric: false}\n",
    )
    .map_err(|e| e.to_string())?;
    let mapping =
        resolve_mapping(&spec, &HostPool::synthesize(&spec), Placement::RoundRobin).map_err(|e| e.to_string())?;
    let mut deployment = provision(&spec, &mapping, 0).map_err(|e| e.to_string())?;
    deployment.enable_trace_dump();
    for _ in 0..2 {
        deployment
            .send_raw("src.0", "dst.0", 1_000_000)
            .map_err(|e| e.to_string())?;
    }
    deployment.drain(None);
    let dump = String::from_utf8(deployment.trace_dump().unwrap_or_default().to_vec()).map_err(|e| e.to_string())?;
    let arrivals: Vec<u64> = dump
        .lines()
        .filter_map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f.get(1) == Some(&"message_arrival")).then(|| f[0].parse().unwrap())
        })
        .collect();
    ensure(arrivals == [1_010_000_000, 2_010_000_000], || {
        format!("engine arrivals {arrivals:?}")
    })?;
    Ok("single 1010000000 ns; back-to-back 1010000000 / 2010000000 ns (link and engine)".into())
}

/// (record_bits, bps, delay_ns, factor, preprocess_units, edge_cpu, cloud_units, cloud_cpu)
type Case = (u64, u64, u64, (u64, u64), u64, u64, u64, u64);

/// Transfer-plus-processing latency written out directly in integer nanoseconds.
/// Every term divides exactly for the parameter sets below.
fn oracle_latency(hybrid: bool, case: Case) -> u64 {
    let (bits, bps, delay, f, pre, edge_cpu, cloud, cloud_cpu) = case;
    let transfer = |b: u64| {
        assert_eq!(b * 1_000_000_000 % bps, 0);
        b * 1_000_000_000 / bps
    };
    let work = |units: u64, cpu: u64| {
        assert_eq!(units * 1_000_000_000 % cpu, 0);
        units * 1_000_000_000 / cpu
    };
    let cloud_ns = work(cloud, cloud_cpu);
    if hybrid {
        assert_eq!(bits * f.0 % f.1, 0);
        work(pre, edge_cpu) + transfer(bits * f.0 / f.1) + delay + cloud_ns
    } else {
        transfer(bits) + delay + cloud_ns
    }
}

/// 3. Emulated mean end-to-end latency equals the analytic model exactly.
fn scenario_oracle() -> Outcome {
    let cases: [Case; 4] = [
        (1_000_000, 1_000_000, 50_000_000, (1, 10), 20, 1000, 0, 1000),
        (2_000_000, 4_000_000, 5_000_000, (1, 4), 100, 500, 30, 600),
        (800_000, 1_000_000, 0, (1, 2), 1, 1000, 250, 1000),
        (500_000, 10_000_000, 120_000_000, (3, 5), 7, 2000, 9, 3000),
    ];
    let mut defaults = (0, 0);
    for (k, &case) in cases.iter().enumerate() {
        let (bits, bps, delay, f, pre, edge_cpu, cloud, cloud_cpu) = case;
        let p = ScenarioParams {
            n_records: 12,
            record_bits: bits,
            bandwidth_bps: bps,
            delay_ns: delay,
            factor: Rational::new(f.0.into(), f.1.into()),
            preprocess_units: Rational::from_integer(pre.into()),
            edge_cpu: Rational::from_integer(edge_cpu.into()),
            cloud_service_units: Rational::from_integer(cloud.into()),
            cloud_cpu: Rational::from_integer(cloud_cpu.into()),
            ..ScenarioParams::default()
        };
        let mut means = Vec::new();
        for (preset, hybrid) in [(Preset::CloudCentric, false), (Preset::Hybrid, true)] {
            let want = oracle_latency(hybrid, case);
            let analytic = analytic_latency(preset, &p);
            ensure(analytic == want, || {
                format!("case {k} {preset}: analytic {analytic} != oracle {want}")
            })?;
            let spec = build_preset(preset, &p).map_err(|e| e.to_string())?;
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let archive = run_experiment(&spec, &HostPool::synthesize(&spec), dir.path()).map_err(|e| e.to_string())?;
            let s = summarize(&archive.samples[0], Metric::E2eLatencyNs).map_err(|e| e.to_string())?;
            ensure(s.count == p.n_records, || {
                format!("case {k} {preset}: {} records", s.count)
            })?;
            ensure(s.mean == Rational::from_integer(want.into()), || {
                format!("case {k} {preset}: emulated mean {} != {want}", s.mean)
            })?;
            means.push(ns(&s.mean));
        }
        if k == 0 {
            defaults = (means[0], means[1]);
        }
    }
    ensure(defaults == (1_050_000_000, 170_000_000), || {
        format!("default presets {defaults:?}")
    })?;
    ensure(defaults.1 < defaults.0, || "hybrid is not faster".into())?;
    Ok(format!(
        "cloud_centric {} ns, hybrid {} ns, {} parameter sets exact",
        defaults.0,
        defaults.1,
        cases.len()
    ))
}

fn brute_force_front(vectors: &[Vec<Rational>], directions: &[Direction]) -> Vec<usize> {
    let better_or_equal = |a: &Rational, b: &Rational, d: Direction| match d {
        Direction::Minimize => a <= b,
        Direction::Maximize => a >= b,
    };
    let dominated = |e: &[Rational], by: &[Rational]| {
        let no_worse = by
            .iter()
            .zip(e)
            .zip(directions)
            .all(|((b, x), d)| better_or_equal(b, x, *d));
        let strictly = by
            .iter()
            .zip(e)
            .zip(directions)
            .any(|((b, x), d)| better_or_equal(b, x, *d) && b != x);
        no_worse && strictly
    };
    (0..vectors.len())
        .filter(|&i| !vectors.iter().any(|other| dominated(&vectors[i], other)))
        .collect()
}

/// 4. Pareto front equals the O(n^2) filter on 200 random instances.
fn pareto_correctness() -> Outcome {
    let mut rng = SplitMix64::new(0x9a7e70);
    let mut elapsed = Duration::ZERO;
    let mut biggest = 0;
    for instance in 0..200 {
        let n = 1 + rng.below(1000) as usize;
        let m = 2 + rng.below(3) as usize;
        // Narrow value ranges on some instances force ties and duplicates.
        let span = if instance % 3 == 0 { 6 } else { 1_000_000 };
        let directions: Vec<Direction> = (0..m)
            .map(|_| {
                if rng.below(2) == 0 {
                    Direction::Minimize
                } else {
                    Direction::Maximize
                }
            })
            .collect();
        let vectors: Vec<Vec<Rational>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| Rational::new(rng.below(span).into(), (1 + rng.below(4)).into()))
                    .collect()
            })
            .collect();
        let start = Instant::now();
        let front = pareto_front(&vectors, &directions);
        elapsed += start.elapsed();
        let expected = brute_force_front(&vectors, &directions);
        ensure(front == expected, || {
            format!("instance {instance} (n={n}, m={m}) differs")
        })?;
        biggest = biggest.max(n);
    }
    ensure(elapsed < Duration::from_secs(10), || {
        format!("pareto_front took {elapsed:?}")
    })?;
    Ok(format!(
        "200 instances up to n={biggest} exact; pareto_front total {} ms (limit 10000)",
        elapsed.as_millis()
    ))
}

/// 5. Surrogate finds the quadratic optimum in >= 95/100 seeds and beats random on median.
fn optimizer_effectiveness() -> Outcome {
    let f = |a: i64, b: i64| (a - 3) * (a - 3) + (b - 4) * (b - 4);
    let mut optimum = (0, 0);
    for a in 0..20 {
        for b in 0..20 {
            if f(a, b) < f(optimum.0, optimum.1) {
                optimum = (a, b);
            }
        }
    }
    ensure(optimum == (3, 4), || format!("brute-force optimum {optimum:?}"))?;
    let space = ParameterSpace {
        dimensions: ["bowl.a", "bowl.b"]
            .into_iter()
            .map(|name| Dimension {
                name: name.into(),
                domain: Domain::IntRange { lo: 0, hi: 19, step: 1 },
            })
            .collect(),
    };
    let objectives = [Objective::new(
        Metric::E2eLatencyNs,
        Aggregator::Mean,
        Direction::Minimize,
    )];
    let evaluate = |_: usize, p: &Point| -> Result<Vec<Rational>, OptimizeError> {
        let v: Vec<i64> = p
            .iter()
            .map(|x| if let ParamValue::Int(i) = x { *i } else { unreachable!() })
            .collect();
        Ok(vec![Rational::from_integer(f(v[0], v[1]).into())])
    };
    const BUDGET: usize = 60;
    let evals_to_optimum = |strategy: Strategy, seed: u64| -> Result<usize, String> {
        let config = SearchConfig::new(strategy, BUDGET, seed);
        let result = search(&space, &objectives, &config, evaluate).map_err(|e| e.to_string())?;
        Ok(result
            .evaluations
            .iter()
            .position(|e| e.objectives[0] == Rational::from_integer(0))
            .map_or(BUDGET + 1, |i| i + 1))
    };
    let median = |mut v: Vec<usize>| {
        v.sort_unstable();
        (v[49] + v[50]) as f64 / 2.0
    };
    let mut surrogate = Vec::new();
    let mut random = Vec::new();
    for seed in 0..100 {
        surrogate.push(evals_to_optimum(Strategy::Surrogate, seed)?);
        random.push(evals_to_optimum(Strategy::Random, seed)?);
    }
    let hits = surrogate.iter().filter(|&&k| k <= BUDGET).count();
    let random_hits = random.iter().filter(|&&k| k <= BUDGET).count();
    let (ms, mr) = (median(surrogate), median(random));
    ensure(hits >= 95, || format!("surrogate hit the optimum in {hits}/100"))?;
    ensure(ms <= mr, || format!("surrogate median {ms} > random median {mr}"))?;
    let show = |m: f64| {
        if m > BUDGET as f64 {
            "not found".to_string()
        } else {
            m.to_string()
        }
    };
    Ok(format!(
        "surrogate {hits}/100 (median {}), random {random_hits}/100 (median {})",
        show(ms),
        show(mr)
    ))
}

/// Naive nearest-rank: 1-based rank ceil(p*n/100), at least 1.
fn naive_percentile(sorted: &[Rational], p: u64) -> Rational {
    let n = sorted.len() as u64;
    let mut rank = p * n / 100;
    if rank * 100 < p * n {
        rank += 1;
    }
    let rank = rank.max(1);
    sorted[(rank - 1) as usize]
}

/// Pearson from integer sums: r = cov / sqrt(vx * vy) with n-scaled moments.
fn integer_pearson(xs: &[i64], ys: &[i64]) -> Option<f64> {
    let n = xs.len() as i128;
    let sx: i128 = xs.iter().map(|&x| x as i128).sum();
    let sy: i128 = ys.iter().map(|&y| y as i128).sum();
    let sxx: i128 = xs.iter().map(|&x| (x as i128) * (x as i128)).sum();
    let syy: i128 = ys.iter().map(|&y| (y as i128) * (y as i128)).sum();
    let sxy: i128 = xs.iter().zip(ys).map(|(&x, &y)| (x as i128) * (y as i128)).sum();
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 || vy == 0 {
        return None;
    }
    Some(cov as f64 / ((vx as f64).sqrt() * (vy as f64).sqrt()))
}

/// 6. summarize and correlate agree with straightforward implementations.
fn statistics_oracles() -> Outcome {
    let mut rng = SplitMix64::new(0x57a75);
    let mut worst = 0f64;
    let mut undefined = 0;
    for case in 0..1000 {
        let n = 1 + rng.below(200) as usize;
        let values: Vec<Rational> = (0..n)
            .map(|_| Rational::new(rng.below(2_000_001) as i128 - 1_000_000, (1 + rng.below(8)).into()))
            .collect();
        let s = summarize_values(Metric::E2eLatencyNs, &values).map_err(|e| e.to_string())?;
        let mut sorted = values.clone();
        sorted.sort();
        let mean = values.iter().fold(Rational::from_integer(0), |acc, v| acc + v) / Rational::from_integer(n as i128);
        let expected = (
            n as u64,
            sorted[0],
            sorted[n - 1],
            mean,
            naive_percentile(&sorted, 50),
            naive_percentile(&sorted, 95),
            naive_percentile(&sorted, 99),
        );
        let got = (s.count, s.min, s.max, s.mean, s.p50, s.p95, s.p99);
        ensure(got == expected, || {
            format!("summary case {case}: {got:?} != {expected:?}")
        })?;

        let m = 2 + rng.below(60) as usize;
        // Every tenth case draws from a single value on one side to hit the undefined branch.
        let spread = if case % 10 == 0 { 1 } else { 2001 };
        let xs: Vec<i64> = (0..m).map(|_| rng.below(spread) as i64 - 1000).collect();
        let ys: Vec<i64> = (0..m).map(|_| rng.below(2001) as i64 - 1000).collect();
        let space = ParameterSpace {
            dimensions: vec![Dimension {
                name: "x".into(),
                domain: Domain::IntRange {
                    lo: -1000,
                    hi: 1000,
                    step: 1,
                },
            }],
        };
        let evaluations: Vec<Evaluation> = xs
            .iter()
            .zip(&ys)
            .enumerate()
            .map(|(index, (&x, &y))| Evaluation {
                index,
                point: vec![ParamValue::Int(x)],
                objectives: vec![Rational::from_integer(y.into())],
                archive: None,
            })
            .collect();
        let r = correlate(&evaluations, &space, "x", 0).map_err(|e| e.to_string())?;
        match (r, integer_pearson(&xs, &ys)) {
            (None, None) => undefined += 1,
            (Some(a), Some(b)) => {
                let rel = if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
                worst = worst.max(rel);
                ensure(rel <= 1e-12, || format!("correlation case {case}: {a} vs {b}"))?;
            }
            (a, b) => return Err(format!("correlation case {case}: {a:?} vs {b:?}")),
        }
    }
    Ok(format!(
        "1000 summaries exact; correlation max relative error {worst:.1e} (limit 1e-12), {undefined} undefined matched"
    ))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

const BASE: &str = "name: base\nlayers:\n  - name: edge\n    services:\n      - {id: cam, kind: producer, params: {record_bits: \"1000\", period: 1s, target: sink}}\n  - name: cloud\n    services:\n      - {id: sink, kind: sink}\nnetwork:\n  - {src: edge, dst: cloud, delay: 1ms}\n";

/// 7. Every violation code is raised by some input and reported at its path.
fn validation_coverage() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inline = |body: &str| format!("{BASE}{body}");
    let replace = |from: &str, to: &str| {
        assert!(BASE.contains(from), "{from}");
        BASE.replacen(from, to, 1)
    };
    let inject = "workflow:\n  - {name: go, kind: inject, args: ";
    // (expected stderr line prefix, spec text)
    let cases: Vec<(&str, String)> = vec![
        ("UnknownLayer network_rules[0].src_layer", std::fs::read_to_string(fixture("unknown_layer.yaml")).unwrap()),
        ("DuplicateServiceId layers[1].services[0].id", std::fs::read_to_string(fixture("duplicate_service.yaml")).unwrap()),
        ("LossOutOfRange network_rules[0].loss_rate", std::fs::read_to_string(fixture("loss_out_of_range.yaml")).unwrap()),
        ("SchemaError network[0].delay", std::fs::read_to_string(fixture("negative_delay.yaml")).unwrap()),
        ("EmptyName name", replace("name: base", "name: \"\"")),
        ("NoLayers layers", "name: bare\nlayers: []\n".into()),
        ("DuplicateLayer layers[1].name", replace("name: cloud", "name: edge")),
        ("UnknownBehavior layers[1].services[0].kind", replace("kind: sink", "kind: teleporter")),
        ("InvalidBehaviorParam layers[0].services[0].params.record_bits", replace("\"1000\"", "lots")),
        ("ZeroQuantity layers[1].services[0].quantity", replace("kind: sink}", "kind: sink, quantity: 0}")),
        ("NonPositiveCpuCapacity layers[1].services[0].cpu_capacity", replace("kind: sink}", "kind: sink, cpu_capacity: 0}")),
        ("InvalidBandwidth network_rules[0].bandwidth_bps", replace("delay: 1ms}", "delay: 1ms, bandwidth: 0bps}")),
        ("DuplicateNetworkRule network_rules[1]", inline("  - {src: cloud, dst: edge, delay: 2ms}\n")),
        ("ZeroRepetitions repetitions", inline("repetitions: 0\n")),
        ("UnknownServiceRef workflow[0].args.target", inline(&format!("{inject}{{target: nobody, count: \"1\"}}}}\n"))),
        ("MissingPhaseArg workflow[0].args.target", inline(&format!("{inject}{{count: \"1\"}}}}\n"))),
        ("InvalidPhaseArg workflow[0].args.count", inline(&format!("{inject}{{target: cam, count: many}}}}\n"))),
        (
            "WaitUntilNotIncreasing workflow[1].args.sim_time",
            inline("workflow:\n  - {name: a, kind: wait_until, args: {sim_time: 2s}}\n  - {name: b, kind: wait_until, args: {sim_time: 1s}}\n"),
        ),
        ("EmptyDomain parameters[0].domain", inline("parameters:\n  sink.base_units: []\n")),
        ("InvalidRange parameters[0].domain", inline("parameters:\n  sink.base_units: {range: [5, 1]}\n")),
        ("UnknownParameterTarget parameters[0].name", inline("parameters:\n  ghost.base_units: [1, 2]\n")),
    ];
    let mut seen = BTreeSet::new();
    for (k, (expected, text)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("case_{k}.yaml"));
        std::fs::write(&path, text).map_err(|e| e.to_string())?;
        let o = lab(&["validate", path_str(&path)]);
        let stderr = String::from_utf8_lossy(&o.stderr);
        ensure(o.status.code() == Some(2), || {
            format!("{expected}: exit {:?}", o.status.code())
        })?;
        ensure(stderr.lines().any(|l| l.starts_with(&format!("{expected}:"))), || {
            format!("{expected}: got {stderr}")
        })?;
        seen.insert(expected.split(' ').next().unwrap().to_string());
    }

    let o = lab(&[
        "validate",
        path_str(&fixture("crowded.yaml")),
        "--hosts",
        path_str(&fixture("hosts_small.yaml")),
    ]);
    ensure(
        o.status.code() == Some(2) && String::from_utf8_lossy(&o.stderr).contains("CapacityExceeded layers[0]"),
        || "CapacityExceeded not reported".into(),
    )?;
    seen.insert("CapacityExceeded".into());

    // YAML mappings cannot repeat a key, so duplicate dimensions only arise programmatically.
    let mut spec = parse_spec(BASE).map_err(|e| e.to_string())?;
    let dim = Dimension {
        name: "sink.base_units".into(),
        domain: Domain::Discrete(vec![ParamValue::Int(1)]),
    };
    spec.parameters.dimensions = vec![dim.clone(), dim];
    let violations = validate_spec(&spec);
    ensure(
        violations
            .iter()
            .any(|v| v.code.as_str() == "DuplicateDimension" && v.path == "parameters[1].name"),
        || format!("DuplicateDimension: {violations:?}"),
    )?;
    seen.insert("DuplicateDimension".into());

    let o = lab(&["validate", path_str(&fixture("empty_workflow.yaml"))]);
    ensure(o.status.code() == Some(0) && o.stderr.is_empty(), || {
        "empty workflow rejected".into()
    })?;
    Ok(format!(
        "{} codes at documented paths; empty workflow accepted",
        seen.len()
    ))
}

/// 8. Every single-byte flip of every metrics file is caught as CorruptArchive.
fn tamper_detection() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let archive = dir.path().join("archive");
    let mut spec = build_preset(
        Preset::CloudCentric,
        &ScenarioParams {
            n_records: 2,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    spec.repetitions = 2;
    run_experiment(&spec, &HostPool::synthesize(&spec), &archive).map_err(|e| e.to_string())?;
    let metrics: Vec<String> = (0..2).map(|k| format!("rep_{k}/metrics.csv")).collect();
    let mut flips = 0;
    let mut cli_checks = 0;
    for rel in &metrics {
        let path = archive.join(rel);
        let original = std::fs::read(&path).map_err(|e| e.to_string())?;
        for i in 0..original.len() {
            // Alternate the flipped bit so both low and high bits get exercised.
            let mut bytes = original.clone();
            bytes[i] ^= 1 << (i % 8);
            std::fs::write(&path, &bytes).map_err(|e| e.to_string())?;
            match ExperimentArchive::load(&archive) {
                Err(ArchiveError::Corrupt { path: p, .. }) if &p == rel => {}
                other => return Err(format!("{rel} byte {i}: load gave {:?}", other.map(|_| ()))),
            }
            for args in [
                vec!["report", path_str(&archive)],
                vec!["diff", path_str(&archive), path_str(&archive)],
            ] {
                let o = lab(&args);
                ensure(
                    o.status.code() == Some(4) && String::from_utf8_lossy(&o.stderr).contains("CorruptArchive"),
                    || format!("{rel} byte {i}: `{}` exit {:?}", args[0], o.status.code()),
                )?;
                cli_checks += 1;
            }
            flips += 1;
        }
        std::fs::write(&path, &original).map_err(|e| e.to_string())?;
    }
    ExperimentArchive::load(&archive).map_err(|e| format!("restored archive: {e}"))?;
    Ok(format!(
        "{flips} flips detected on load, {cli_checks} report/diff invocations exited 4"
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("determinism", determinism),
        ("link arithmetic", link_arithmetic),
        ("scenario oracle", scenario_oracle),
        ("pareto correctness", pareto_correctness),
        ("optimizer effectiveness", optimizer_effectiveness),
        ("statistics oracles", statistics_oracles),
        ("validation coverage", validation_coverage),
        ("tamper detection", tamper_detection),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
