//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use geobench_core::datagen::{generate_dataset, Dataset, DatasetSpec, Scenario};
use geobench_core::harness::{
    build_plan, read_measurements, run_experiment, Adapter, AdapterError, Measurement, MockAdapter, Mode,
    RefstoreAdapter, RunConfig, Session, Workload,
};
use geobench_core::model::{ResultSet, TimeInstant, Value, MICROS_PER_DAY};
use geobench_core::queryspec::{generate_param_sets, ParamSet, ParamValue, QueryInstance, TemplateRegistry};
use geobench_core::refstore::{execute_canonical, ConfigProfile, Partitioning, StoreHandle};
use geobench_core::report::{compare_runs, ecdf_points, summarize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn builtin_params(registry: &TemplateRegistry, ds: &Dataset, sets: usize, seed: u64) -> BTreeMap<String, Vec<ParamSet>> {
    registry
        .enabled()
        .map(|t| (t.name.clone(), generate_param_sets(t, &ds.stats, sets, seed).unwrap()))
        .collect()
}

fn is_informative(rs: &ResultSet) -> bool {
    rs.rows.iter().any(|r| r.iter().any(|v| !matches!(v, Value::Null | Value::Int(0))))
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let (mut templates, mut compared, mut mismatches, mut informative) = (0, 0, Vec::new(), 0);
    for scenario in Scenario::ALL {
        // ten days keeps the trips of a 20k-instant dataset dense in time
        let mut spec = DatasetSpec::default_for(scenario, 20_000, 42);
        spec.time_extent.end = spec.time_extent.start.plus_micros(10 * MICROS_PER_DAY);
        let ds = Arc::new(generate_dataset(&spec).map_err(|e| e.to_string())?);
        check(ds.instants.len() >= 10_000, || format!("{scenario:?}: only {} instants", ds.instants.len()))?;
        let registry = TemplateRegistry::builtin(scenario);
        let params = builtin_params(&registry, &ds, 50, 42);
        let oracle = StoreHandle::load(ds.clone(), ConfigProfile::ORACLE).unwrap();
        let profiles = ConfigProfile::indexed_profiles();
        check(profiles.len() == 6, || format!("{} indexed profiles", profiles.len()))?;
        let handles: Vec<StoreHandle> =
            profiles.into_iter().map(|p| StoreHandle::load(ds.clone(), p).unwrap()).collect();
        for template in registry.enabled() {
            templates += 1;
            for ps in &params[&template.name] {
                let (entry, args) = registry.bind_canonical(&template.name, ps).map_err(|e| e.to_string())?;
                let expected = execute_canonical(&oracle, entry, &args).map_err(|e| e.to_string())?;
                informative += is_informative(&expected) as usize;
                for h in &handles {
                    compared += 1;
                    let got = execute_canonical(h, entry, &args).map_err(|e| e.to_string())?;
                    if !got.equivalent_within(&expected, 1e-9) {
                        mismatches.push(format!("{} {}#{}", h.info().profile, template.name, ps.id));
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    check(templates == 18, || format!("{templates} enabled templates, expected 18"))?;
    check(mismatches.is_empty(), || format!("{} mismatches, first {}", mismatches.len(), mismatches[0]))?;
    check(elapsed < Duration::from_secs(120), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "{compared} comparisons over 18 templates x 6 profiles x 50 sets, 0 mismatches, \
         {informative}/900 oracle answers non-empty, {elapsed:.1?}"
    ))
}

fn mock_workload(sets: usize) -> Arc<Workload> {
    let registry = TemplateRegistry::parse(
        "- name: probe\n  type: temporal\n  mock: 'SELECT :period_short'\n  parameters: [period_short]\n",
    )
    .unwrap();
    let mut spec = DatasetSpec::default_for(Scenario::Cycling, 10_000, 3);
    spec.time_extent.end = spec.time_extent.start.plus_micros(30 * MICROS_PER_DAY);
    let ds = generate_dataset(&spec).unwrap();
    let params = builtin_params(&registry, &ds, sets, 3);
    Workload::new(registry, params)
}

fn closed_loop_law() -> Outcome {
    let mut details = Vec::new();
    for clients in [4usize, 8, 16] {
        let started = Instant::now();
        let workload = mock_workload(clients * 60);
        let plan = build_plan(&workload, clients, 1).map_err(|e| e.to_string())?;
        let cfg = RunConfig {
            run_id: format!("mock-{clients}"),
            adapter: "mock".into(),
            mode: Mode::Parallel,
            clients,
            warmup: false,
            repetitions: 1,
            ..Default::default()
        };
        let adapter = MockAdapter::new(Duration::from_millis(10));
        let out = run_experiment(&cfg, &plan, &adapter).map_err(|e| e.to_string())?;
        let summary = summarize(&out.measurements, &[]);
        let run = &summary.runs[0];
        let median_ms = summary.queries[0].latency.as_ref().unwrap().median_us / 1000.0;
        let expected = clients as f64 / 0.010;
        let elapsed = started.elapsed();
        check(run.error_count == 0, || format!("{clients} clients: {} errors", run.error_count))?;
        check((run.throughput_qps - expected).abs() <= 0.15 * expected, || {
            format!("{clients} clients: {:.1} q/s, expected {expected:.0} +-15%", run.throughput_qps)
        })?;
        check((10.0..=11.5).contains(&median_ms), || format!("{clients} clients: median {median_ms:.3} ms"))?;
        check(elapsed < Duration::from_secs(30), || format!("{clients} clients took {elapsed:.1?}"))?;
        details.push(format!("c={clients}: {:.0} q/s (ideal {expected:.0}), median {median_ms:.2} ms", run.throughput_qps));
    }
    Ok(details.join("; "))
}

/// Forwards to an inner adapter and records every instance each session receives.
struct Recording<A> {
    inner: A,
    sessions: Mutex<Vec<Arc<Mutex<Vec<QueryInstance>>>>>,
}

impl<A> Recording<A> {
    fn new(inner: A) -> Self {
        Recording { inner, sessions: Mutex::new(Vec::new()) }
    }

    fn orders(&self) -> Vec<Vec<QueryInstance>> {
        let mut orders: Vec<Vec<QueryInstance>> = self
            .sessions
            .lock()
            .unwrap()
            .iter()
            .map(|s| s.lock().unwrap().clone())
            .filter(|o| !o.is_empty())
            .collect();
        orders.sort_by_key(|o| o.first().map(QueryInstance::key));
        orders
    }
}

struct RecordingSession<'a> {
    inner: Box<dyn Session + 'a>,
    log: Arc<Mutex<Vec<QueryInstance>>>,
}

impl Session for RecordingSession<'_> {
    fn execute(&mut self, qi: &QueryInstance) -> Result<ResultSet, AdapterError> {
        self.log.lock().unwrap().push(qi.clone());
        self.inner.execute(qi)
    }
}

impl<A: Adapter> Adapter for Recording<A> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dialect(&self) -> &str {
        self.inner.dialect()
    }

    fn captures_results(&self) -> bool {
        self.inner.captures_results()
    }

    fn session(&self) -> Result<Box<dyn Session + '_>, AdapterError> {
        let log = Arc::new(Mutex::new(Vec::new()));
        self.sessions.lock().unwrap().push(log.clone());
        Ok(Box::new(RecordingSession { inner: self.inner.session()?, log }))
    }
}

fn order_identity() -> Outcome {
    let mut spec = DatasetSpec::default_for(Scenario::Ais, 20_000, 5);
    spec.time_extent.end = spec.time_extent.start.plus_micros(10 * MICROS_PER_DAY);
    let ds = Arc::new(generate_dataset(&spec).unwrap());
    let registry = TemplateRegistry::builtin(Scenario::Ais);
    let params = builtin_params(&registry, &ds, 50, 5);
    let workload = Workload::new(registry, params);
    let mut details = Vec::new();
    for (mode, clients) in [(Mode::Sequential, 1), (Mode::Parallel, 4)] {
        let plan_a = build_plan(&workload, clients, 99).map_err(|e| e.to_string())?;
        let plan_b = build_plan(&workload, clients, 99).map_err(|e| e.to_string())?;
        check(plan_a == plan_b && plan_a.digest() == plan_b.digest(), || "repeated builds differ".into())?;
        let store = Arc::new(StoreHandle::load(ds.clone(), ConfigProfile::ORACLE).unwrap());
        let refstore = Recording::new(RefstoreAdapter::new(store, workload.clone()));
        let mock = Recording::new(MockAdapter::new(Duration::ZERO));
        let cfg = RunConfig { mode, clients, warmup: false, repetitions: 1, ..Default::default() };
        run_experiment(&cfg, &plan_a, &refstore).map_err(|e| e.to_string())?;
        run_experiment(&cfg, &plan_b, &mock).map_err(|e| e.to_string())?;
        let a = serde_json::to_vec(&refstore.orders()).unwrap();
        let b = serde_json::to_vec(&mock.orders()).unwrap();
        check(a == b, || format!("{mode} x{clients}: refstore and mock saw different orders"))?;
        let planned: Vec<Vec<QueryInstance>> =
            (0..clients).map(|c| plan_a.client_instances(c).cloned().collect()).collect();
        let mut planned_sorted = planned.clone();
        planned_sorted.sort_by_key(|o| o.first().map(QueryInstance::key));
        check(refstore.orders() == planned_sorted, || format!("{mode} x{clients}: order differs from plan"))?;
        details.push(format!("{mode} x{clients}: {} instances, {} identical bytes", plan_a.len(), a.len()));
    }
    Ok(details.join("; "))
}

fn whole_trip_scaling() -> Outcome {
    let mut details = Vec::new();
    for scenario in Scenario::ALL {
        let spec = DatasetSpec::default_for(scenario, 100_000, 42);
        let ds = generate_dataset(&spec).map_err(|e| e.to_string())?;
        ds.validate().map_err(|e| format!("{scenario:?}: {e}"))?;
        let total = ds.stats.total_points;
        let max_trip = ds.trips.iter().map(|t| t.n_points as u64).max().unwrap();
        check(total == ds.instants.len() as u64, || format!("{scenario:?}: stats disagree with instants"))?;
        check((100_000..100_000 + max_trip).contains(&total), || {
            format!("{scenario:?}: {total} points, largest trip {max_trip}")
        })?;
        let avg = total as f64 / ds.trips.len() as f64;
        let rel = (avg - spec.trip_points_mean) / spec.trip_points_mean;
        check(rel.abs() <= 0.15, || {
            format!("{scenario:?}: {avg:.1} points/trip vs configured {}", spec.trip_points_mean)
        })?;
        details.push(format!("{}: {total} pts, {} trips, avg {avg:.0} ({:+.1}%)", scenario.as_str(), ds.trips.len(), rel * 100.0));
    }
    Ok(details.join("; "))
}

fn within_extent(v: &ParamValue, ds: &Dataset) -> bool {
    let s = &ds.stats;
    match v {
        ParamValue::Period(p) => s.time_extent.start <= p.start && p.end <= s.time_extent.end && p.start < p.end,
        ParamValue::Point(pt) => s.bbox.contains(pt.lon, pt.lat),
        ParamValue::Name(n) => s.feature_names.values().any(|names| names.contains(n)),
        ParamValue::Pair(a, b) => {
            let known = |n: &String| s.feature_names.values().any(|names| names.contains(n));
            known(a) && known(b)
        }
        ParamValue::Meters(m) => m.is_finite() && *m > 0.0,
        ParamValue::Hour(h) => *h < 24,
        ParamValue::Count(_) => true,
    }
}

fn param_contract() -> Outcome {
    let mut templates = 0;
    for scenario in Scenario::ALL {
        let ds = generate_dataset(&DatasetSpec::default_for(scenario, 100_000, 42)).map_err(|e| e.to_string())?;
        let registry = TemplateRegistry::builtin(scenario);
        for t in registry.enabled() {
            templates += 1;
            let sets = generate_param_sets(t, &ds.stats, 50, 42).map_err(|e| e.to_string())?;
            let again = generate_param_sets(t, &ds.stats, 50, 42).map_err(|e| e.to_string())?;
            check(sets.len() == 50, || format!("{}: {} sets", t.name, sets.len()))?;
            check(sets == again, || format!("{}: not reproducible", t.name))?;
            let distinct: HashSet<String> = sets.iter().map(|s| serde_json::to_string(&s.values).unwrap()).collect();
            check(distinct.len() == 50, || format!("{}: {} distinct sets", t.name, distinct.len()))?;
            let ids: BTreeSet<u32> = sets.iter().map(|s| s.id).collect();
            check(ids.len() == 50, || format!("{}: duplicate ids", t.name))?;
            for s in &sets {
                for (name, v) in &s.values {
                    check(within_extent(v, &ds), || format!("{}#{}: {name} = {v:?} outside the dataset", t.name, s.id))?;
                }
                check(t.parameters.iter().all(|d| s.values.contains_key(&d.name)), || {
                    format!("{}#{}: missing a declared parameter", t.name, s.id)
                })?;
            }
        }
    }
    Ok(format!("{templates} templates x 50 unique, in-extent, reproducible sets"))
}

fn synthetic(rng: &mut ChaCha8Rng, query: &str, run: &str, latencies: &[u64]) -> Vec<Measurement> {
    let mut t = 1_700_000_000_000_000i64;
    latencies
        .iter()
        .enumerate()
        .map(|(i, &lat)| {
            t += rng.gen_range(0..5_000) + lat as i64;
            Measurement {
                run_id: run.into(),
                repetition: 1 + (i % 3) as u32,
                query: query.into(),
                param_set: i as u32,
                client: 0,
                issue_ts: TimeInstant::from_micros(t),
                latency_us: lat,
                rows: 1,
                success: true,
                error: None,
            }
        })
        .collect()
}

fn brute_median(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Smallest rank r with r/n ≥ pct/100, in integer arithmetic.
fn brute_rank(sorted: &[u64], pct: usize) -> f64 {
    let r = (pct * sorted.len()).div_ceil(100).max(1);
    sorted[r - 1] as f64
}

fn report_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for set in 0..1_000 {
        let n = rng.gen_range(1..=400);
        // narrow ranges produce many ties
        let hi = if set % 3 == 0 { 20 } else { 10_000_000 };
        let lat: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=hi)).collect();
        let ms = synthetic(&mut rng, "q", "r", &lat);
        let summary = summarize(&ms, &[]);
        let stats = summary.query("q").and_then(|q| q.latency.clone()).ok_or("no latency stats")?;
        let mut sorted = lat.clone();
        sorted.sort();
        let mean = lat.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let fail = |what: &str| format!("set {set} (n={n}): {what}");
        check(stats.min_us == sorted[0] && stats.max_us == sorted[n - 1], || fail("min/max"))?;
        check(stats.median_us == brute_median(&sorted), || fail("median"))?;
        check(stats.p95_us == brute_rank(&sorted, 95), || fail("p95"))?;
        check(stats.p99_us == brute_rank(&sorted, 99), || fail("p99"))?;
        check((stats.mean_us - mean).abs() <= 1e-12 * mean, || fail("mean"))?;
        check(summary.queries[0].count == n as u64, || fail("count"))?;

        let ecdf = ecdf_points(&lat).map_err(|e| e.to_string())?;
        let distinct: BTreeSet<u64> = lat.iter().copied().collect();
        check(ecdf.len() == distinct.len(), || fail("ecdf length"))?;
        for (v, frac) in &ecdf {
            let at_or_below = lat.iter().filter(|&&x| x <= *v).count();
            check(*frac == at_or_below as f64 / n as f64, || fail("ecdf fraction"))?;
        }

        // a second run of the same queries, compared against the first
        let other: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=hi)).collect();
        let mut base = ms.clone();
        base.extend(synthetic(&mut rng, "p", "r", &other));
        let cand: Vec<Measurement> = synthetic(&mut rng, "q", "s", &other)
            .into_iter()
            .chain(synthetic(&mut rng, "p", "s", &lat))
            .collect();
        let cmp = compare_runs(&summarize(&base, &[]), &summarize(&cand, &[])).map_err(|e| e.to_string())?;
        let mut other_sorted = other.clone();
        other_sorted.sort();
        let (mq, mp) = (brute_median(&sorted), brute_median(&other_sorted));
        let want_q = (mq - mp) / mq * 100.0;
        let want_p = (mp - mq) / mp * 100.0;
        let got: BTreeMap<&str, f64> =
            cmp.queries.iter().map(|c| (c.query.as_str(), c.relative_diff_pct.unwrap())).collect();
        check((got["q"] - want_q).abs() <= 1e-12 * want_q.abs().max(1.0), || fail("comparison q"))?;
        check((got["p"] - want_p).abs() <= 1e-12 * want_p.abs().max(1.0), || fail("comparison p"))?;
        let agg = (want_q + want_p) / 2.0;
        check((cmp.aggregate_pct.unwrap() - agg).abs() <= 1e-12 * agg.abs().max(1.0), || fail("aggregate"))?;
    }

    let (mut base, mut half) = (Vec::new(), Vec::new());
    for (qi, q) in ["a", "b", "c"].into_iter().enumerate() {
        let lat: Vec<u64> = (0..101 + qi).map(|_| 2 * rng.gen_range(500..50_000)).collect();
        base.extend(synthetic(&mut rng, q, "base", &lat));
        let halved: Vec<u64> = lat.iter().map(|v| v / 2).collect();
        half.extend(synthetic(&mut rng, q, "half", &halved));
    }
    let cmp = compare_runs(&summarize(&base, &[]), &summarize(&half, &[])).map_err(|e| e.to_string())?;
    check(cmp.queries.iter().all(|q| q.relative_diff_pct == Some(50.0)), || format!("{:?}", cmp.queries))?;
    check(cmp.aggregate_pct == Some(50.0), || format!("aggregate {:?}", cmp.aggregate_pct))?;
    Ok("1000 sets match brute force; half-latency run is exactly +50%".into())
}

fn geobench(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_geobench"))
        .args(args)
        .env_remove("GEOBENCH_OUT")
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("geobench {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn pipeline_once(dir: &Path) -> Result<Vec<Measurement>, String> {
    let config = |extra: &str| {
        format!(
            "dataset: {{scenario: ais, scale_factor: 20000, seed: 17{extra}}}\n\
             sut: {{adapter: refstore, profile: rtree/time(4)}}\n\
             workload: {{mode: sequential, run_repetitions: 3, warmup: true, seed: 17}}\n"
        )
    };
    let gen = dir.join("generate.yaml");
    let run = dir.join("run.yaml");
    std::fs::write(&gen, config("")).map_err(|e| e.to_string())?;
    std::fs::write(&run, config(", path: data")).map_err(|e| e.to_string())?;
    let data = dir.join("data");
    let out = dir.join("out");
    geobench(&["-q", "generate", "-c", gen.to_str().unwrap(), "--out", data.to_str().unwrap()])?;
    geobench(&["-q", "run", "-c", run.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
    let file = std::fs::File::open(out.join("results.csv")).map_err(|e| e.to_string())?;
    read_measurements("results.csv", file).map_err(|e| e.to_string())
}

fn pipeline_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    std::fs::create_dir_all(&a).and_then(|_| std::fs::create_dir_all(&b)).map_err(|e| e.to_string())?;
    let first = pipeline_once(&a)?;
    let second = pipeline_once(&b)?;
    let strip = |ms: &[Measurement]| -> Vec<Measurement> {
        ms.iter()
            .cloned()
            .map(|mut m| {
                m.issue_ts = TimeInstant::from_micros(0);
                m.latency_us = 0;
                m
            })
            .collect()
    };
    let expected = 3 * TemplateRegistry::builtin(Scenario::Ais).enabled().count() * 50;
    check(first.len() == expected, || format!("{} measurements, expected {expected}", first.len()))?;
    check(first.iter().all(|m| m.success), || "failed measurements".into())?;
    check(strip(&first) == strip(&second), || "results.csv differs beyond latency/timestamp columns".into())?;
    let digest = |d: &Path| std::fs::read_to_string(d.join("out/plan.json")).unwrap_or_default();
    check(digest(&a) == digest(&b), || "plan.json differs".into())?;
    Ok(format!("two runs, {expected} identical measurements each (3 x 6 templates x 50)"))
}

fn partition_balance() -> Outcome {
    let mut details = Vec::new();
    for scenario in Scenario::ALL {
        let ds = Arc::new(generate_dataset(&DatasetSpec::default_for(scenario, 100_000, 42)).map_err(|e| e.to_string())?);
        let total = ds.instants.len() as f64;
        for partitioning in [Partitioning::Time, Partitioning::Space] {
            let profile = ConfigProfile::new(geobench_core::refstore::IndexKind::Rtree, partitioning, 4);
            let h = StoreHandle::load(ds.clone(), profile).unwrap();
            let shares: Vec<f64> = h.info().partition_sizes.iter().map(|&s| s as f64 / total).collect();
            check(shares.len() == 4, || format!("{scenario:?} {profile}: {} partitions", shares.len()))?;
            check(shares.iter().all(|s| (0.1875..=0.3125).contains(s)), || {
                format!("{scenario:?} {profile}: shares {shares:.3?}")
            })?;
            let worst = shares.iter().map(|s| (s - 0.25).abs() / 0.25).fold(0.0, f64::max);
            details.push(format!("{} {partitioning:?}: worst {:.1}%", scenario.as_str(), worst * 100.0));
        }
    }
    Ok(details.join("; "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("closed-loop law", closed_loop_law),
        ("plan determinism and cross-SUT order identity", order_identity),
        ("whole-trip scaling", whole_trip_scaling),
        ("parameter-set contract", param_contract),
        ("report oracle", report_oracle),
        ("pipeline determinism", pipeline_determinism),
        ("partition balance", partition_balance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = started.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{took:.1?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail} [{took:.1?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
