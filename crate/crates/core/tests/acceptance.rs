//! Acceptance run: one PASS/FAIL line per criterion. Tolerances are pinned below.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{binary_enumeration, random_binary_program, random_lp, vertex_enumeration};
use optigraph::algebra::{AffineExpr, Constraint, VariableBounds};
use optigraph::benders::{BendersConfig, BendersSolver, BendersState};
use optigraph::graph::{flatten, OptiGraph};
use optigraph::harness::{solve_storage, storage_benders_config, RunOptions, SolveMode};
use optigraph::models::{
    build_storage_remote, build_toy_cem_remote, storage_plan, toy_cem_plan, tutorial_remote, StorageParams,
    ToyCemInstance, ToyCemParams, CEM_ROOT, STORAGE_ROOT,
};
use optigraph::program::{realize_local, BuildProgram, NamedExpr};
use optigraph::remote::proxy::{resolve_variable, variable_to_proxy};
use optigraph::remote::wire::{check_pairing, parse_lines};
use optigraph::remote::{BuildMode, Cluster, RemoteError, TransportKind, MAIN_WORKER};
use optigraph::solver::{duality_gap, solve_lp, solve_mip, SolveResult, SolveStatus, SolverConfig};
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Relative agreement between solution modes and with the monolithic optimum.
const REL_GAP: f64 = 1e-3;
/// Bound checks, relative to 1 + |value|.
const BOUND_TOL: f64 = 1e-9;
const LP_OBJECTIVE_TOL: f64 = 1e-7;
const DUALITY_TOL: f64 = 1e-6;
const STORAGE_SECONDS: f64 = 10.0;
const CEM_SECONDS: f64 = 60.0;
const CUT_POINTS: usize = 25;
const CONTINUOUS_SEEDS: u64 = 20;
const INTEGER_SEEDS: u64 = 5;
const MAX_INTEGERS: usize = 12;

type Outcome = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// One decomposed run with everything the criteria need.
struct Run {
    label: String,
    solver: BendersSolver,
    state: BendersState,
    seconds: f64,
    /// Monolithic objective and proven bound.
    optimum: f64,
    optimum_bound: f64,
    mono_seconds: f64,
}

fn monolithic(g: &OptiGraph) -> (SolveResult, f64) {
    let start = Instant::now();
    let p = flatten(g);
    let r = if p.has_integers() {
        solve_mip(&p, &SolverConfig::default()).unwrap()
    } else {
        solve_lp(&p, &SolverConfig::default()).unwrap()
    };
    (r, start.elapsed().as_secs_f64())
}

fn decomposed(label: String, g: &OptiGraph, root: &str, cfg: BendersConfig) -> Result<Run, String> {
    let (mono, mono_seconds) = monolithic(g);
    if mono.status != SolveStatus::Optimal {
        return Err(format!("{label}: monolithic status {:?}", mono.status));
    }
    let start = Instant::now();
    let solver = BendersSolver::new(g, root, cfg, SolverConfig::default()).map_err(|e| format!("{label}: {e}"))?;
    let state = solver.run().map_err(|e| format!("{label}: {e}"))?;
    Ok(Run {
        label,
        solver,
        state,
        seconds: start.elapsed().as_secs_f64(),
        optimum: mono.objective,
        optimum_bound: mono.best_bound,
        mono_seconds,
    })
}

fn storage_run() -> Result<Run, String> {
    let p = StorageParams::default();
    let g = realize_local(&storage_plan(&p).unwrap()).unwrap();
    decomposed("storage".into(), &g, STORAGE_ROOT, storage_benders_config(&p, REL_GAP))
}

fn cem_run(seed: u64, integer: bool) -> Result<Run, String> {
    let inst = ToyCemInstance::generate(&ToyCemParams {
        zones: 3,
        weeks: 8,
        techs: 3,
        integer_builds: integer,
        seed,
        ..ToyCemParams::default()
    })
    .map_err(|e| e.to_string())?;
    if inst.num_integers() > MAX_INTEGERS {
        return Err(format!("seed {seed}: {} integers", inst.num_integers()));
    }
    let g = realize_local(&toy_cem_plan(&inst).unwrap()).unwrap();
    let kind = if integer { "integer" } else { "continuous" };
    let cfg = BendersConfig {
        rel_gap: REL_GAP,
        ..BendersConfig::default()
    };
    decomposed(format!("cem {kind} seed {seed}"), &g, CEM_ROOT, cfg)
}

fn criterion_1() -> Outcome {
    let p = StorageParams::default();
    let base = RunOptions {
        workers: 3,
        benders: storage_benders_config(&p, REL_GAP),
        ..RunOptions::default()
    };
    let modes = [
        ("monolithic", SolveMode::Monolithic, TransportKind::InProcess),
        ("benders", SolveMode::Benders, TransportKind::InProcess),
        ("remote-inproc", SolveMode::BendersRemote, TransportKind::InProcess),
        ("remote-tcp", SolveMode::BendersRemote, TransportKind::Tcp),
    ];
    let mut objectives = Vec::new();
    let mut slowest: f64 = 0.0;
    for (name, mode, transport) in modes {
        let out = solve_storage(
            &p,
            &RunOptions {
                mode,
                transport,
                ..base.clone()
            },
        )
        .map_err(|e| format!("{name}: {e}"))?;
        check(out.status == SolveStatus::Optimal, || {
            format!("{name}: status {:?}", out.status)
        })?;
        check(out.seconds < STORAGE_SECONDS, || {
            format!("{name}: {:.2} s", out.seconds)
        })?;
        slowest = slowest.max(out.seconds);
        objectives.push(out.objective);
    }
    let worst = objectives.iter().map(|z| rel(*z, objectives[0])).fold(0.0, f64::max);
    check(worst <= REL_GAP, || format!("objectives {objectives:?}"))?;
    Ok(format!(
        "objective {:.6}, max rel diff {worst:.2e}, slowest {slowest:.2} s",
        objectives[0]
    ))
}

fn criterion_2(continuous: &[Run], integer: &[Run]) -> Outcome {
    check(
        continuous.len() as u64 == CONTINUOUS_SEEDS && integer.len() as u64 == INTEGER_SEEDS,
        || "missing runs".into(),
    )?;
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for r in continuous.iter().chain(integer) {
        let d = rel(r.state.objective(), r.optimum);
        check(r.state.converged, || format!("{}: not converged", r.label))?;
        check(d <= REL_GAP, || {
            format!("{}: {} vs {} ({d:.2e})", r.label, r.state.objective(), r.optimum)
        })?;
        check(r.seconds < CEM_SECONDS && r.mono_seconds < CEM_SECONDS, || {
            format!(
                "{}: benders {:.1} s, monolithic {:.1} s",
                r.label, r.seconds, r.mono_seconds
            )
        })?;
        worst = worst.max(d);
        slowest = slowest.max(r.seconds).max(r.mono_seconds);
    }
    Ok(format!(
        "{} continuous + {} integer seeds, max rel diff {worst:.2e}, slowest run {slowest:.1} s",
        continuous.len(),
        integer.len()
    ))
}

fn bound_properties(r: &Run) -> Result<(), String> {
    let h = &r.state.history;
    for w in h.windows(2) {
        check(
            w[1].lower_bound >= w[0].lower_bound - BOUND_TOL * (1.0 + w[0].lower_bound.abs()),
            || format!("{}: LB fell at iteration {}", r.label, w[1].iteration),
        )?;
    }
    for it in h {
        let tol = BOUND_TOL * (1.0 + r.optimum.abs());
        check(it.lower_bound <= r.optimum + tol, || {
            format!(
                "{}: LB {} above optimum {} at {}",
                r.label, it.lower_bound, r.optimum, it.iteration
            )
        })?;
        check(r.optimum_bound <= it.upper_bound + tol, || {
            format!(
                "{}: UB {} below optimum {} at {}",
                r.label, it.upper_bound, r.optimum_bound, it.iteration
            )
        })?;
    }
    let last = h.last().ok_or_else(|| format!("{}: empty history", r.label))?;
    let gap = (last.upper_bound - last.lower_bound) / last.upper_bound.abs().max(1.0);
    check(gap <= REL_GAP, || format!("{}: terminal gap {gap:.2e}", r.label))
}

fn criterion_3(runs: &[&Run]) -> Outcome {
    for r in runs {
        bound_properties(r)?;
    }
    let iterations: usize = runs.iter().map(|r| r.state.iteration).sum();
    Ok(format!("{} runs, {iterations} iterations checked", runs.len()))
}

fn criterion_4(runs: &[&Run]) -> Outcome {
    let mut checked = 0;
    for (i, r) in runs.iter().enumerate() {
        let points = r.solver.sample_points(&r.state, CUT_POINTS, 100 + i as u64);
        let report = r
            .solver
            .cut_validity_check(&r.state, &points)
            .map_err(|e| e.to_string())?;
        check(report.passed(), || {
            format!("{}: {:?}", r.label, report.violations.first())
        })?;
        checked += report.checked;
    }
    // negative control: flipping every dual must be caught
    let storage = runs[0];
    let mut flipped = storage.state.clone();
    for cut in &mut flipped.cuts {
        cut.coefficients.values_mut().for_each(|c| *c = -*c);
    }
    let points = storage.solver.sample_points(&storage.state, CUT_POINTS, 1);
    let report = storage
        .solver
        .cut_validity_check(&flipped, &points)
        .map_err(|e| e.to_string())?;
    check(!report.passed(), || "sign-flipped cuts passed the check".into())?;
    Ok(format!(
        "{checked} cut/point pairs valid over {} runs; flipped control caught {} violations",
        runs.len(),
        report.violations.len()
    ))
}

fn criterion_5() -> Outcome {
    let cfg = SolverConfig::default();
    let mut rng = StdRng::seed_from_u64(2024);
    let mut optimal = 0;
    for case in 0..500 {
        let lp = random_lp(&mut rng);
        let p = lp.to_problem(false);
        let r = solve_lp(&p, &cfg).map_err(|e| e.to_string())?;
        match vertex_enumeration(&lp) {
            None => check(r.status == SolveStatus::Infeasible, || {
                format!("lp {case}: {:?}", r.status)
            })?,
            Some(z) => {
                check(r.status == SolveStatus::Optimal, || {
                    format!("lp {case}: {:?}", r.status)
                })?;
                check((r.objective - z).abs() <= LP_OBJECTIVE_TOL, || {
                    format!("lp {case}: {} vs {z}", r.objective)
                })?;
                let gap = duality_gap(&p, &r);
                check(gap <= DUALITY_TOL, || format!("lp {case}: duality residual {gap:.2e}"))?;
                optimal += 1;
            }
        }
    }
    let mut rng = StdRng::seed_from_u64(4048);
    for case in 0..100 {
        let bp = random_binary_program(&mut rng, 12);
        let r = solve_mip(&bp.to_problem(true), &cfg).map_err(|e| e.to_string())?;
        match binary_enumeration(&bp) {
            None => check(r.status == SolveStatus::Infeasible, || {
                format!("mip {case}: {:?}", r.status)
            })?,
            Some(z) => check(r.status == SolveStatus::Optimal && r.objective == z, || {
                format!("mip {case}: {:?} {} vs {z}", r.status, r.objective)
            })?,
        }
    }
    Ok(format!(
        "500 LPs ({optimal} optimal) and 100 binary programs match their oracles"
    ))
}

fn cluster(n: usize, transport: TransportKind) -> Result<Cluster, String> {
    let c = Cluster::new();
    c.spawn_workers(n, transport).map_err(|e| e.to_string())?;
    Ok(c)
}

fn criterion_6() -> Outcome {
    let c = cluster(2, TransportKind::InProcess)?;
    let w = c.remote_workers();

    // proxy round trip over variables living on a worker
    let mut program = BuildProgram::new();
    for n in 0..10 {
        let node = format!("n{n}");
        program.add_node(&node);
        for i in 0..100 {
            let v = program.add_variable(&node, "x", VariableBounds::non_negative(), &[i]);
            program.fetch(v);
        }
    }
    let g = c.remote_graph(w[0], "proxies").map_err(|e| e.to_string())?;
    let refs = g.execute_program(&program).map_err(|e| e.to_string())?;
    let fetched = g.fetch_graph().map_err(|e| e.to_string())?;
    for r in &refs {
        let id = resolve_variable(&fetched, &r.proxy).map_err(|e| e.to_string())?;
        let back = variable_to_proxy(&fetched, id).map_err(|e| e.to_string())?;
        check(back == r.proxy && r.worker() == w[0], || {
            format!("proxy {} did not round trip", r.name())
        })?;
    }
    check(refs.len() >= 1000, || format!("{} refs", refs.len()))?;

    // request/response bijection over a per-call build
    let t = c.capture();
    let rg = build_storage_remote(&c, &StorageParams::default(), BuildMode::PerCall).map_err(|e| e.to_string())?;
    c.stop_capture();
    let messages = parse_lines(&t.lines())?;
    check_pairing(&messages)?;

    // inter-worker edges span at least two graphs, and single-graph links are refused
    check(rg.interworker_edges().iter().all(|e| e.graph_span() >= 2), || {
        "edge spans one graph".into()
    })?;
    let solo = c.remote_graph(MAIN_WORKER, "solo").map_err(|e| e.to_string())?;
    let a = solo.add_node("a").map_err(|e| e.to_string())?;
    let b = solo.add_node("b").map_err(|e| e.to_string())?;
    let x = solo
        .add_variable(&a, "x", VariableBounds::non_negative(), &[])
        .map_err(|e| e.to_string())?;
    let y = solo
        .add_variable(&b, "y", VariableBounds::non_negative(), &[])
        .map_err(|e| e.to_string())?;
    let link = Constraint::le(AffineExpr::from_terms([(x.id(), 1.0), (y.id(), 1.0)], 0.0), 1.0);
    check(
        matches!(solo.add_interworker_link(link), Err(RemoteError::SingleGraphLink)),
        || "single-graph inter-worker link accepted".into(),
    )?;

    // batched and per-call builds dump byte-identically
    let batched = build_storage_remote(&c, &StorageParams::default(), BuildMode::Batched)
        .and_then(|g| Ok(g.collect()?))
        .map_err(|e| e.to_string())?;
    let per_call = rg.collect().map_err(|e| e.to_string())?;
    check(batched.canonical_dump() == per_call.canonical_dump(), || {
        "build dumps differ".into()
    })?;

    // frames for a 100-variable node
    let mut wide = BuildProgram::new();
    wide.add_node("n");
    let mut obj = NamedExpr::new();
    for i in 0..100 {
        obj = obj.term(wide.add_variable("n", "x", VariableBounds::new(0.0, 1.0), &[i]), 1.0);
    }
    wide.set_objective("n", obj);
    let g1 = c.remote_graph(w[1], "wide").map_err(|e| e.to_string())?;
    let g2 = c.remote_graph(w[1], "wide").map_err(|e| e.to_string())?;
    let t = c.capture();
    g1.execute_program(&wide).map_err(|e| e.to_string())?;
    let batched_frames = t.request_count();
    t.clear();
    g2.run_per_call(&wide).map_err(|e| e.to_string())?;
    let per_call_frames = t.request_count();
    c.stop_capture();
    check(batched_frames == 1 && per_call_frames >= 100, || {
        format!("batched {batched_frames} frames, per-call {per_call_frames}")
    })?;
    Ok(format!(
        "{} proxies, {} paired messages, frames batched {batched_frames} vs per-call {per_call_frames}",
        refs.len(),
        messages.len()
    ))
}

fn criterion_7() -> Outcome {
    let c = cluster(3, TransportKind::InProcess)?;
    let p = StorageParams::default();
    let local = flatten(&realize_local(&storage_plan(&p).unwrap()).unwrap()).canonical_lines();
    let remote = build_storage_remote(&c, &p, BuildMode::Batched).map_err(|e| e.to_string())?;
    let collected = flatten(&remote.collect().map_err(|e| e.to_string())?).canonical_lines();
    check(collected == local, || "storage differs".into())?;
    let mut lines = local.len();
    for seed in 0..3 {
        let inst = ToyCemInstance::generate(&ToyCemParams {
            seed,
            integer_builds: seed == 1,
            ..ToyCemParams::default()
        })
        .map_err(|e| e.to_string())?;
        let local = flatten(&realize_local(&toy_cem_plan(&inst).unwrap()).unwrap()).canonical_lines();
        let remote = build_toy_cem_remote(&c, &inst, BuildMode::Batched).map_err(|e| e.to_string())?;
        let collected = flatten(&remote.collect().map_err(|e| e.to_string())?).canonical_lines();
        check(collected == local, || format!("cem seed {seed} differs"))?;
        lines += local.len();
    }
    Ok(format!("storage + 3 toy CEM instances, {lines} canonical lines equal"))
}

fn criterion_8() -> Outcome {
    let p = StorageParams::default();
    let mut dumps = Vec::new();
    let mut objectives = Vec::new();
    for transport in [TransportKind::InProcess, TransportKind::Tcp] {
        let c = cluster(2, transport)?;
        let storage = build_storage_remote(&c, &p, BuildMode::Batched).map_err(|e| e.to_string())?;
        let tutorial = tutorial_remote(&c).map_err(|e| e.to_string())?;
        let collect =
            |g: &optigraph::RemoteOptiGraph| g.collect().map(|g| g.canonical_dump()).map_err(|e| e.to_string());
        dumps.push((collect(&storage)?, collect(&tutorial.rgraph)?));
        let state = optigraph::run_benders(
            &storage,
            STORAGE_ROOT,
            &storage_benders_config(&p, REL_GAP),
            &SolverConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        objectives.push(state.objective());
    }
    check(dumps[0] == dumps[1], || "dumps differ between transports".into())?;
    let d = rel(objectives[0], objectives[1]);
    check(d <= REL_GAP, || format!("objectives {objectives:?}"))?;
    Ok(format!(
        "dumps equal, Benders objectives {:.6} / {:.6}",
        objectives[0], objectives[1]
    ))
}

fn report(n: usize, name: &str, outcome: &Outcome) -> bool {
    match outcome {
        Ok(detail) => println!("criterion {n} {name}: PASS ({detail})"),
        Err(why) => println!("criterion {n} {name}: FAIL ({why})"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut ok = true;
    ok &= report(1, "storage equivalence", &criterion_1());

    let storage = storage_run();
    let continuous: Result<Vec<Run>, String> = (0..CONTINUOUS_SEEDS).map(|s| cem_run(s, false)).collect();
    let integer: Result<Vec<Run>, String> = (0..INTEGER_SEEDS).map(|s| cem_run(s, true)).collect();
    let runs = match (&storage, &continuous, &integer) {
        (Ok(s), Ok(c), Ok(i)) => Ok((s, c, i)),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Err(e.clone()),
    };
    match runs {
        Ok((s, c, i)) => {
            let all: Vec<&Run> = std::iter::once(s).chain(c).chain(i).collect();
            ok &= report(2, "toy CEM equivalence", &criterion_2(c, i));
            ok &= report(3, "Benders bound properties", &criterion_3(&all));
            ok &= report(4, "cut validity", &criterion_4(&all));
        }
        Err(e) => {
            for (n, name) in [
                (2, "toy CEM equivalence"),
                (3, "Benders bound properties"),
                (4, "cut validity"),
            ] {
                ok &= report(n, name, &Err(e.clone()));
            }
        }
    }
    ok &= report(5, "solver oracle suite", &criterion_5());
    ok &= report(6, "distributed-layer properties", &criterion_6());
    ok &= report(7, "collected-graph equivalence", &criterion_7());
    ok &= report(8, "transport equivalence", &criterion_8());
    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
