//! Toy capacity expansion model: a planning graph choosing capacities and per-week
//! emission allowances, and one operations subgraph per week.

use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::InstanceError;
use crate::algebra::VariableBounds;
use crate::benders::match_by_suffix;
use crate::program::{BuildProgram, GraphPlan, NamedExpr};
use crate::remote::{realize_remote, BuildMode, Cluster, RemoteOptiGraph, WorkerId, MAIN_WORKER};

pub const PLANNING: &str = "planning_graph";
const PLANNING_NODE: &str = "planning_node";
const OPERATION_NODE: &str = "operation_node";
/// Cost of unserved demand.
const VOLL: f64 = 200.0;
const MAX_COEFFICIENT_RATIO: f64 = 1e6;
const MAX_CAPACITY: f64 = 200.0;
const MAX_UNITS: f64 = 4.0;
const UNIT_SIZE: f64 = 25.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyCemParams {
    pub zones: usize,
    pub weeks: usize,
    pub techs: usize,
    pub hours: usize,
    /// Build decisions in whole units instead of continuous capacity.
    pub integer_builds: bool,
    pub seed: u64,
}

impl Default for ToyCemParams {
    fn default() -> Self {
        Self {
            zones: 3,
            weeks: 8,
            techs: 3,
            hours: 4,
            integer_builds: false,
            seed: 0,
        }
    }
}

impl ToyCemParams {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.zones == 0 || self.weeks == 0 || self.techs == 0 || self.hours == 0 {
            return Err(InstanceError::Params(
                "zones, weeks, techs and hours must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn week_label(w: usize) -> String {
        format!("week_{}", w + 1)
    }
}

/// Generated data for one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyCemInstance {
    pub params: ToyCemParams,
    /// Seed actually used; later than `params.seed` when a draw failed the conditioning guard.
    pub seed_used: u64,
    pub invest_cost: Vec<Vec<f64>>,
    pub var_cost: Vec<f64>,
    pub emission: Vec<f64>,
    /// [week][zone][tech][hour]
    pub availability: Vec<Vec<Vec<Vec<f64>>>>,
    /// [week][zone][hour]
    pub demand: Vec<Vec<Vec<f64>>>,
    /// Line l joins zone l and zone l+1.
    pub line_capacity: Vec<f64>,
    pub policy_cap: f64,
}

impl ToyCemInstance {
    pub fn generate(params: &ToyCemParams) -> Result<Self, InstanceError> {
        params.validate()?;
        for attempt in 0..100 {
            let inst = Self::draw(params, params.seed.wrapping_add(attempt));
            if inst.max_coefficient_ratio() <= MAX_COEFFICIENT_RATIO {
                return Ok(inst);
            }
        }
        Err(InstanceError::Params(
            "no well-conditioned instance within 100 seeds".into(),
        ))
    }

    fn draw(params: &ToyCemParams, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let (z, k, h, w) = (params.zones, params.techs, params.hours, params.weeks);
        let scale = w as f64;
        let invest_cost = (0..z)
            .map(|_| (0..k).map(|_| rng.gen_range(5.0..15.0) * scale).collect())
            .collect();
        let var_cost = (0..k).map(|_| rng.gen_range(5.0..40.0)).collect();
        // tech 0 is clean, the rest emit
        let emission = (0..k)
            .map(|t| if t == 0 { 0.0 } else { rng.gen_range(0.3..1.0) })
            .collect();
        let availability: Vec<Vec<Vec<Vec<f64>>>> = (0..w)
            .map(|_| {
                (0..z)
                    .map(|_| {
                        (0..k)
                            .map(|_| (0..h).map(|_| rng.gen_range(0.3..1.0)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let demand: Vec<Vec<Vec<f64>>> = (0..w)
            .map(|_| {
                (0..z)
                    .map(|_| (0..h).map(|_| rng.gen_range(20.0..60.0)).collect())
                    .collect()
            })
            .collect();
        let line_capacity = (0..z.saturating_sub(1)).map(|_| rng.gen_range(10.0..30.0)).collect();
        let total_demand: f64 = demand.iter().flatten().flatten().sum();
        let policy_cap = rng.gen_range(0.3..0.6) * total_demand * 0.5;
        Self {
            params: params.clone(),
            seed_used: seed,
            invest_cost,
            var_cost,
            emission,
            availability,
            demand,
            line_capacity,
            policy_cap,
        }
    }

    fn unit(&self) -> f64 {
        if self.params.integer_builds {
            UNIT_SIZE
        } else {
            1.0
        }
    }

    /// Largest ratio between nonzero coefficient magnitudes within one row.
    pub fn max_coefficient_ratio(&self) -> f64 {
        let unit = self.unit();
        let mut worst: f64 = 1.0;
        let mut row = |coefs: &[f64]| {
            let nz: Vec<f64> = coefs.iter().map(|c| c.abs()).filter(|c| *c > 0.0).collect();
            if let (Some(lo), Some(hi)) = (nz.iter().copied().reduce(f64::min), nz.iter().copied().reduce(f64::max)) {
                worst = worst.max(hi / lo);
            }
        };
        for a in self.availability.iter().flatten().flatten().flatten() {
            row(&[1.0, a * unit]);
        }
        let mut emission_row = self.emission.clone();
        emission_row.push(1.0);
        row(&emission_row);
        worst
    }

    pub fn num_integers(&self) -> usize {
        if self.params.integer_builds {
            self.params.zones * self.params.techs
        } else {
            0
        }
    }
}

/// Plan for the full star-shaped model. Week w's copies of the planning variables are
/// linked to the master by matching canonical-name suffixes.
pub fn toy_cem_plan(inst: &ToyCemInstance) -> Result<GraphPlan, InstanceError> {
    let p = &inst.params;
    let unit = inst.unit();
    let cap_bounds = if p.integer_builds {
        VariableBounds::integer(0.0, MAX_UNITS)
    } else {
        VariableBounds::new(0.0, MAX_CAPACITY)
    };

    let mut planning = GraphPlan::new(PLANNING);
    let mut master = Vec::new();
    {
        let prog = &mut planning.program;
        prog.add_node(PLANNING_NODE);
        let mut obj = NamedExpr::new();
        for z in 0..p.zones {
            for k in 0..p.techs {
                let name = prog.add_variable(PLANNING_NODE, "vCAP", cap_bounds, &[z as i64 + 1, k as i64 + 1]);
                obj = obj.term(name.clone(), inst.invest_cost[z][k] * unit);
                master.push(name);
            }
        }
        let mut cap = NamedExpr::new();
        for w in 0..p.weeks {
            let name = prog.add_variable(PLANNING_NODE, "vPOL", VariableBounds::non_negative(), &[w as i64 + 1]);
            cap = cap.term(name.clone(), 1.0);
            master.push(name);
        }
        prog.add_constraint(PLANNING_NODE, cap.le(inst.policy_cap));
        prog.set_objective(PLANNING_NODE, obj);
    }
    let master: Vec<(usize, String)> = master.into_iter().enumerate().collect();

    let mut graph = GraphPlan::new("graph");
    let mut weeks = Vec::with_capacity(p.weeks);
    for w in 0..p.weeks {
        let label = ToyCemParams::week_label(w);
        let (program, copies) = week_program(inst, w);
        let copies: Vec<(usize, String)> = copies.into_iter().enumerate().collect();
        let pairs = match_by_suffix(&master, &copies).map_err(InstanceError::Params)?;
        for (s, m) in pairs {
            graph.links.push(
                NamedExpr::new()
                    .term(format!("{label}/{}", copies[s].1), 1.0)
                    .term(format!("{PLANNING}/{}", master[m].1), -1.0)
                    .eq(0.0),
            );
        }
        let mut plan = GraphPlan::new(&label);
        plan.program = program;
        weeks.push(plan);
    }
    graph.subgraphs.push(planning);
    graph.subgraphs.extend(weeks);
    Ok(graph)
}

/// One week's operations node; returns the program and the names of its planning copies.
fn week_program(inst: &ToyCemInstance, w: usize) -> (BuildProgram, Vec<String>) {
    let p = &inst.params;
    let unit = inst.unit();
    let n = OPERATION_NODE;
    let mut prog = BuildProgram::new();
    prog.add_node(n);
    let mut copies = Vec::new();
    let mut cap = vec![Vec::new(); p.zones];
    for (z, caps) in cap.iter_mut().enumerate() {
        for k in 0..p.techs {
            let name = prog.add_variable(n, "vCAP", VariableBounds::non_negative(), &[z as i64 + 1, k as i64 + 1]);
            caps.push(name.clone());
            copies.push(name);
        }
    }
    let pol = prog.add_variable(n, "vPOL", VariableBounds::non_negative(), &[w as i64 + 1]);
    copies.push(pol.clone());

    let mut obj = NamedExpr::new();
    let mut emissions = NamedExpr::new();
    for h in 0..p.hours {
        let hs = h as i64 + 1;
        let flows: Vec<String> = inst
            .line_capacity
            .iter()
            .enumerate()
            .map(|(l, f)| prog.add_variable(n, "flow", VariableBounds::new(-f, *f), &[l as i64 + 1, hs]))
            .collect();
        for z in 0..p.zones {
            let zs = z as i64 + 1;
            let mut balance = NamedExpr::new();
            for k in 0..p.techs {
                let gen = prog.add_variable(n, "gen", VariableBounds::non_negative(), &[zs, k as i64 + 1, hs]);
                let a = inst.availability[w][z][k][h];
                prog.add_constraint(
                    n,
                    NamedExpr::new()
                        .term(gen.clone(), 1.0)
                        .term(cap[z][k].clone(), -a * unit)
                        .le(0.0),
                );
                obj = obj.term(gen.clone(), inst.var_cost[k]);
                if inst.emission[k] > 0.0 {
                    emissions = emissions.term(gen.clone(), inst.emission[k]);
                }
                balance = balance.term(gen, 1.0);
            }
            let unmet = prog.add_variable(n, "unmet", VariableBounds::non_negative(), &[zs, hs]);
            obj = obj.term(unmet.clone(), VOLL);
            balance = balance.term(unmet, 1.0);
            // line l carries flow from zone l to zone l+1
            if z > 0 {
                balance = balance.term(flows[z - 1].clone(), 1.0);
            }
            if z < flows.len() {
                balance = balance.term(flows[z].clone(), -1.0);
            }
            prog.add_constraint(n, balance.eq(inst.demand[w][z][h]));
        }
    }
    prog.add_constraint(n, emissions.term(pol, -1.0).le(0.0));
    prog.set_objective(n, obj);
    (prog, copies)
}

/// Builds the model on a cluster: top and planning graphs on the main worker, weeks
/// assigned round-robin to the remote workers.
pub fn build_toy_cem_remote(
    cluster: &Cluster,
    inst: &ToyCemInstance,
    mode: BuildMode,
) -> Result<RemoteOptiGraph, InstanceError> {
    let workers = cluster.remote_workers();
    if workers.is_empty() {
        return Err(InstanceError::WorkerShortfall {
            needed: 1,
            available: 0,
        });
    }
    let plan = toy_cem_plan(inst)?;
    let assignment: HashMap<String, WorkerId> = (0..inst.params.weeks)
        .map(|w| (ToyCemParams::week_label(w), workers[w % workers.len()]))
        .collect();
    let placement = |path: &[String]| -> WorkerId {
        path.first()
            .and_then(|l| assignment.get(l))
            .copied()
            .unwrap_or(MAIN_WORKER)
    };
    Ok(realize_remote(cluster, &plan, &placement, mode)?)
}
