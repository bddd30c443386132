use optigraph::algebra::{AffineExpr, Constraint, VariableBounds};
use optigraph::graph::{flatten, OptiGraph};
use optigraph::models::{build_storage_remote, build_toy_cem_remote, storage_plan, toy_cem_plan, StorageParams};
use optigraph::models::{tutorial_local, tutorial_remote, ToyCemInstance, ToyCemParams};
use optigraph::program::{realize_local, BuildProgram, NamedExpr};
use optigraph::remote::proxy::{resolve_variable, variable_to_proxy};
use optigraph::remote::wire::{check_pairing, decode_frame, encode_frame, parse_lines};
use optigraph::remote::{BuildMode, Cluster, RemoteError, TransportKind, MAIN_WORKER};
use proptest::prelude::*;

fn cluster(n: usize, transport: TransportKind) -> Cluster {
    let c = Cluster::new();
    c.spawn_workers(n, transport).unwrap();
    c
}

fn wide_program(vars: usize) -> BuildProgram {
    let mut p = BuildProgram::new();
    p.add_node("n");
    let mut obj = NamedExpr::new();
    for i in 0..vars {
        let v = p.add_variable("n", "x", VariableBounds::new(0.0, 1.0), &[i as i64]);
        obj = obj.term(v, 1.0);
    }
    p.set_objective("n", obj);
    p
}

#[test]
fn frame_layout() {
    let f = encode_frame(b"{}");
    assert_eq!(&f[..4], &[0, 0, 0, 2]);
    assert_eq!(decode_frame(&f).unwrap(), b"{}");
    assert!(decode_frame(&f[..5]).is_err());
}

#[test]
fn proxy_round_trip_on_a_thousand_variables() {
    let mut g = OptiGraph::new("g");
    let mut vars = Vec::new();
    for n in 0..10 {
        let node = g.add_node(&format!("n{n}")).unwrap();
        for i in 0..100 {
            vars.push(g.add_variable(node, "x", VariableBounds::free(), &[i]).unwrap());
        }
    }
    for v in &vars {
        let p = variable_to_proxy(&g, *v).unwrap();
        assert_eq!(resolve_variable(&g, &p).unwrap(), *v);
        let json = serde_json::to_string(&p).unwrap();
        assert!(!json.contains("coef") && !json.contains("constraint") && !json.contains("bounds"));
    }
    assert_eq!(vars.len(), 1000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn proxy_resolution_rejects_foreign_graphs(count in 1usize..40, pick in 0usize..40) {
        let mut a = OptiGraph::new("a");
        let mut b = OptiGraph::new("b");
        let na = a.add_node("n").unwrap();
        let nb = b.add_node("n").unwrap();
        let mut vars = Vec::new();
        for i in 0..count {
            vars.push(a.add_variable(na, "x", VariableBounds::non_negative(), &[i as i64]).unwrap());
            b.add_variable(nb, "x", VariableBounds::non_negative(), &[i as i64]).unwrap();
        }
        let v = vars[pick % count];
        let p = variable_to_proxy(&a, v).unwrap();
        prop_assert_eq!(resolve_variable(&a, &p).unwrap(), v);
        prop_assert!(resolve_variable(&b, &p).is_err());
    }
}

#[test]
fn remote_refs_carry_their_worker() {
    let c = cluster(2, TransportKind::InProcess);
    let w = c.remote_workers();
    let g = c.remote_graph(w[1], "g").unwrap();
    let n = g.add_node("n").unwrap();
    let x = g.add_variable(&n, "x", VariableBounds::new(0.0, 5.0), &[]).unwrap();
    assert_eq!(x.worker(), w[1]);
    x.set_upper_bound(3.0).unwrap();
    assert_eq!(x.bounds().unwrap(), VariableBounds::new(0.0, 3.0));
    assert!(x.set_lower_bound(4.0).is_err());
}

#[test]
fn transcript_pairs_every_request() {
    let c = cluster(2, TransportKind::InProcess);
    let t = c.capture();
    build_storage_remote(&c, &StorageParams::default(), BuildMode::PerCall).unwrap();
    let messages = parse_lines(&t.lines()).unwrap();
    assert!(messages.len() > 100);
    check_pairing(&messages).unwrap();
    // a response with no request breaks the bijection
    let mut broken = messages.clone();
    broken.remove(0);
    assert!(check_pairing(&broken).is_err());
}

#[test]
fn interworker_edges_span_two_graphs() {
    let c = cluster(2, TransportKind::InProcess);
    let rg = build_storage_remote(&c, &StorageParams::default(), BuildMode::Batched).unwrap();
    let edges = rg.interworker_edges();
    assert_eq!(edges.len(), 20);
    assert!(edges.iter().all(|e| e.graph_span() >= 2));

    let g = c.remote_graph(MAIN_WORKER, "solo").unwrap();
    let a = g.add_node("a").unwrap();
    let b = g.add_node("b").unwrap();
    let x = g.add_variable(&a, "x", VariableBounds::non_negative(), &[]).unwrap();
    let y = g.add_variable(&b, "y", VariableBounds::non_negative(), &[]).unwrap();
    let c1 = Constraint::le(AffineExpr::from_terms([(x.id(), 1.0), (y.id(), 1.0)], 0.0), 1.0);
    assert!(matches!(g.add_interworker_link(c1), Err(RemoteError::SingleGraphLink)));
}

#[test]
fn batched_and_per_call_builds_dump_identically() {
    let c = cluster(2, TransportKind::InProcess);
    let p = StorageParams::default();
    let a = build_storage_remote(&c, &p, BuildMode::Batched)
        .unwrap()
        .collect()
        .unwrap();
    let b = build_storage_remote(&c, &p, BuildMode::PerCall)
        .unwrap()
        .collect()
        .unwrap();
    assert_eq!(a.canonical_dump(), b.canonical_dump());
}

#[test]
fn batched_build_is_one_frame() {
    let c = cluster(1, TransportKind::InProcess);
    let w = c.remote_workers()[0];
    let program = wide_program(100);

    let g1 = c.remote_graph(w, "batched").unwrap();
    let t = c.capture();
    g1.execute_program(&program).unwrap();
    assert_eq!(t.request_count(), 1);

    let g2 = c.remote_graph(w, "per_call").unwrap();
    let t = c.capture();
    g2.run_per_call(&program).unwrap();
    assert!(t.request_count() >= 100, "{}", t.request_count());
    c.stop_capture();

    let mut a = g1.fetch_graph().unwrap().canonical_dump();
    let b = g2.fetch_graph().unwrap().canonical_dump();
    a = a.replace("batched", "per_call");
    assert_eq!(a, b);
}

#[test]
fn empty_program_changes_nothing() {
    let c = cluster(1, TransportKind::InProcess);
    let g = c.remote_graph(c.remote_workers()[0], "g").unwrap();
    assert!(g.execute_program(&BuildProgram::new()).unwrap().is_empty());
    assert_eq!(g.num_nodes().unwrap(), 0);
}

#[test]
fn failed_program_rolls_back() {
    let c = cluster(1, TransportKind::InProcess);
    let g = c.remote_graph(c.remote_workers()[0], "g").unwrap();
    g.add_node("keep").unwrap();
    let mut p = wide_program(3);
    p.add_constraint("n", NamedExpr::new().term("n[:missing]", 1.0).le(1.0));
    let err = g.execute_program(&p).unwrap_err().to_string();
    assert!(err.contains("instruction 5"), "{err}");
    assert_eq!(g.num_nodes().unwrap(), 1);
}

#[test]
fn collected_storage_matches_local_build() {
    let p = StorageParams::default();
    let local = flatten(&realize_local(&storage_plan(&p).unwrap()).unwrap());
    let c = cluster(2, TransportKind::InProcess);
    for mode in [BuildMode::Batched, BuildMode::PerCall] {
        let rg = build_storage_remote(&c, &p, mode).unwrap();
        let collected = flatten(&rg.collect().unwrap());
        assert_eq!(collected.canonical_lines(), local.canonical_lines());
    }
}

#[test]
fn collected_cem_matches_local_build() {
    let inst = ToyCemInstance::generate(&ToyCemParams {
        integer_builds: true,
        seed: 4,
        ..ToyCemParams::default()
    })
    .unwrap();
    let local = flatten(&realize_local(&toy_cem_plan(&inst).unwrap()).unwrap());
    let c = cluster(3, TransportKind::InProcess);
    let rg = build_toy_cem_remote(&c, &inst, BuildMode::Batched).unwrap();
    assert_eq!(
        flatten(&rg.collect().unwrap()).canonical_lines(),
        local.canonical_lines()
    );
}

#[test]
fn empty_remote_graph_collects_empty() {
    let c = Cluster::new();
    let g = c.remote_graph(MAIN_WORKER, "g").unwrap().collect().unwrap();
    assert_eq!(g.num_nodes(), 0);
    assert!(g.edges().is_empty());
}

#[test]
fn transports_build_identical_graphs() {
    let p = StorageParams::with_periods(6);
    let dumps: Vec<String> = [TransportKind::InProcess, TransportKind::Tcp]
        .into_iter()
        .map(|t| {
            let c = cluster(2, t);
            build_storage_remote(&c, &p, BuildMode::Batched)
                .unwrap()
                .collect()
                .unwrap()
                .canonical_dump()
        })
        .collect();
    assert_eq!(dumps[0], dumps[1]);
}

#[test]
fn tutorial_matches_local_twin() {
    let c = cluster(2, TransportKind::InProcess);
    let t = tutorial_remote(&c).unwrap();
    assert_eq!(t.local_links.len(), 2);
    assert_eq!(t.interworker.len(), 2);
    assert!(t.rgraph.interworker_edges().iter().all(|e| e.graph_span() == 2));
    let remote = t.rgraph.collect().unwrap();
    let local = tutorial_local().unwrap();
    assert_eq!(remote.canonical_dump(), local.canonical_dump());
    t.bound_x(2.0).unwrap();
    assert_eq!(t.x.bounds().unwrap(), VariableBounds::new(1.0, 2.0));
    assert!(tutorial_remote(&Cluster::new()).is_err());
}
