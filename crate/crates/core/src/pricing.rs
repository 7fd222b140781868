//! Pricing over the ng-route relaxation: a forward labeling DP that finds
//! the minimum reduced-cost ng-feasible route, plus brute-force oracles
//! (full enumeration, elementary-only) kept for testing it.
//!
//! Reduced cost of a route is `cost - sum over visits of alpha[customer]`,
//! with the dual counted once per visit, so revisits under the relaxation
//! collect the dual again. The per-route fixed cost is charged when a label
//! leaves the depot.
//!
//! Labels live in buckets keyed by (node, load). Extensions strictly
//! increase load, so processing loads in ascending order makes every
//! bucket final before it is extended. Within a bucket, label L1 dominates
//! L2 when its reduced cost is no larger and its ng memory is a subset;
//! dominated labels are dropped, which is exact for minimizing over the
//! relaxation.

use crate::columns::Route;
use crate::instance::{Instance, Neighborhoods};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("exhaustive oracle limited to {limit} customers, instance has {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("enumeration limited to {limit} interior visits, asked for {len}")]
    TooLong { len: usize, limit: usize },
}

/// A route found by pricing together with its reduced cost.
#[derive(Debug, Clone)]
pub struct PricedRoute {
    pub route: Route,
    pub reduced_cost: f64,
}

#[derive(Debug, Clone)]
pub struct PricingResult {
    /// Routes with strictly negative reduced cost, ascending, at most
    /// `max_cols` of them.
    pub columns: Vec<PricedRoute>,
    /// Minimum reduced cost over all ng-feasible routes, negative or not.
    /// This is what the Lagrangian bound needs.
    pub min_reduced_cost: f64,
}

#[derive(Debug, Clone)]
pub struct PricingOptions {
    /// Cap on returned negative columns.
    pub max_cols: usize,
    /// Disable to keep every label; only the oracle-equivalence tests do.
    pub use_dominance: bool,
}

impl Default for PricingOptions {
    fn default() -> Self {
        PricingOptions {
            max_cols: 30,
            use_dominance: true,
        }
    }
}

#[derive(Clone)]
struct Label {
    rcost: f64,
    memory: u64,
    node: u16,
    load: u32,
    parent: u32,
}

const NO_PARENT: u32 = u32::MAX;

/// Price with the default options. `alpha` is indexed by customer id
/// (entry 0 unused) and must cover every customer.
pub fn price_ng(
    inst: &Instance,
    ng: &Neighborhoods,
    alpha: &[f64],
    max_cols: usize,
) -> PricingResult {
    price_ng_with(
        inst,
        ng,
        alpha,
        &PricingOptions {
            max_cols,
            ..PricingOptions::default()
        },
    )
}

pub fn price_ng_with(
    inst: &Instance,
    ng: &Neighborhoods,
    alpha: &[f64],
    opts: &PricingOptions,
) -> PricingResult {
    let n = inst.n_customers();
    assert!(alpha.len() > n, "alpha must be indexed by customer id");
    let cap = inst.capacity() as usize;
    let end = inst.end_depot();

    let mut arena: Vec<Label> = Vec::new();
    // Bucket of live label ids per (node, load); loads run 1..=cap.
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n * cap];
    let bucket_idx = |u: usize, load: usize| (u - 1) * cap + (load - 1);

    let push = |arena: &mut Vec<Label>, buckets: &mut Vec<Vec<u32>>, lab: Label| {
        let slot = bucket_idx(lab.node as usize, lab.load as usize);
        if opts.use_dominance {
            let bucket = &mut buckets[slot];
            let mut i = 0;
            while i < bucket.len() {
                let other = &arena[bucket[i] as usize];
                // Loads are equal within a bucket, so dominance is reduced
                // cost plus memory inclusion; ties keep the incumbent.
                if other.rcost <= lab.rcost && other.memory & !lab.memory == 0 {
                    return;
                }
                if lab.rcost <= other.rcost && lab.memory & !other.memory == 0 {
                    bucket.swap_remove(i);
                } else {
                    i += 1;
                }
            }
        }
        let id = arena.len() as u32;
        arena.push(lab);
        buckets[slot].push(id);
    };

    // Initial labels: depot -> u, charging the fixed cost up front.
    for u in inst.customers() {
        let lab = Label {
            rcost: inst.fixed_cost() + inst.dist(0, u) as f64 - alpha[u],
            memory: 1u64 << (u - 1),
            node: u as u16,
            load: inst.demand(u),
            parent: NO_PARENT,
        };
        push(&mut arena, &mut buckets, lab);
    }

    for load in 1..=cap {
        for u in inst.customers() {
            let ids = std::mem::take(&mut buckets[bucket_idx(u, load)]);
            for &id in &ids {
                let (rcost, memory) = {
                    let lab = &arena[id as usize];
                    (lab.rcost, lab.memory)
                };
                for w in inst.customers() {
                    let bit = 1u64 << (w - 1);
                    if memory & bit != 0 {
                        continue;
                    }
                    let new_load = load + inst.demand(w) as usize;
                    if new_load > cap {
                        continue;
                    }
                    let lab = Label {
                        rcost: rcost + inst.dist(u, w) as f64 - alpha[w],
                        memory: (memory & ng.mask(w)) | bit,
                        node: w as u16,
                        load: new_load as u32,
                        parent: id,
                    };
                    push(&mut arena, &mut buckets, lab);
                }
            }
            buckets[bucket_idx(u, load)] = ids;
        }
    }

    // Complete every surviving label to the end depot. Distinct labels
    // reconstruct distinct visit sequences, so no deduplication is needed.
    let mut finished: Vec<(f64, u32)> = Vec::new();
    for bucket in &buckets {
        for &id in bucket {
            let lab = &arena[id as usize];
            let rc = lab.rcost + inst.dist(lab.node as usize, end) as f64;
            finished.push((rc, id));
        }
    }
    let min_reduced_cost = finished
        .iter()
        .map(|&(rc, _)| rc)
        .fold(f64::INFINITY, f64::min);
    finished.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut columns = Vec::new();
    for &(rc, id) in &finished {
        if rc >= 0.0 || columns.len() >= opts.max_cols {
            break;
        }
        let route = reconstruct(inst, &arena, id);
        debug_assert_eq!(route.load(), u64::from(arena[id as usize].load));
        columns.push(PricedRoute {
            route,
            reduced_cost: rc,
        });
    }
    PricingResult {
        columns,
        min_reduced_cost,
    }
}

fn reconstruct(inst: &Instance, arena: &[Label], id: u32) -> Route {
    let mut rev = Vec::new();
    let mut cur = id;
    while cur != NO_PARENT {
        let lab = &arena[cur as usize];
        rev.push(lab.node as usize);
        cur = lab.parent;
    }
    let mut visits = Vec::with_capacity(rev.len() + 2);
    visits.push(inst.start_depot());
    visits.extend(rev.into_iter().rev());
    visits.push(inst.end_depot());
    Route::new(inst, visits).expect("labels only build well-formed routes")
}

fn reduced_cost_of(route: &Route, alpha: &[f64]) -> f64 {
    let mut rc = route.cost();
    for &u in route.interior() {
        rc -= alpha[u];
    }
    rc
}

/// Exhaustive minimum reduced cost over elementary routes. Exponential;
/// refuses more than 10 customers.
pub fn price_elementary_bruteforce(
    inst: &Instance,
    alpha: &[f64],
) -> Result<PricedRoute, PricingError> {
    const LIMIT: usize = 10;
    let n = inst.n_customers();
    if n > LIMIT {
        return Err(PricingError::TooLarge { n, limit: LIMIT });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut stack = vec![inst.start_depot()];
    dfs_elementary(inst, alpha, &mut stack, 0, 0, &mut best);
    let (_, visits) = best.expect("instances always have at least one customer");
    let mut full = visits;
    full.push(inst.end_depot());
    let route = Route::new(inst, full).unwrap();
    let reduced_cost = reduced_cost_of(&route, alpha);
    Ok(PricedRoute {
        route,
        reduced_cost,
    })
}

fn dfs_elementary(
    inst: &Instance,
    alpha: &[f64],
    stack: &mut Vec<usize>,
    visited: u64,
    load: u64,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    let last = *stack.last().unwrap();
    if stack.len() > 1 {
        let mut rc = inst.fixed_cost() + inst.dist(last, inst.end_depot()) as f64;
        for w in stack.windows(2) {
            rc += inst.dist(w[0], w[1]) as f64;
        }
        for &u in &stack[1..] {
            rc -= alpha[u];
        }
        if best.as_ref().map_or(true, |(b, _)| rc < *b) {
            *best = Some((rc, stack.clone()));
        }
    }
    for w in inst.customers() {
        let bit = 1u64 << (w - 1);
        if visited & bit != 0 {
            continue;
        }
        let new_load = load + u64::from(inst.demand(w));
        if new_load > u64::from(inst.capacity()) {
            continue;
        }
        stack.push(w);
        dfs_elementary(inst, alpha, stack, visited | bit, new_load, best);
        stack.pop();
    }
}

/// All ng-feasible routes with at most `max_len` interior visits. Sizes are
/// capped (8 customers, 12 visits) because the count explodes. The empty
/// depot-to-depot route is included.
pub fn enumerate_ng_routes(
    inst: &Instance,
    ng: &Neighborhoods,
    max_len: usize,
) -> Result<Vec<Route>, PricingError> {
    const N_LIMIT: usize = 8;
    const LEN_LIMIT: usize = 12;
    let n = inst.n_customers();
    if n > N_LIMIT {
        return Err(PricingError::TooLarge { n, limit: N_LIMIT });
    }
    if max_len > LEN_LIMIT {
        return Err(PricingError::TooLong {
            len: max_len,
            limit: LEN_LIMIT,
        });
    }
    let mut out = vec![Route::empty(inst)];
    let mut interior = Vec::new();
    ng_dfs(inst, ng, max_len, &mut interior, 0, 0, &mut out);
    Ok(out)
}

fn ng_dfs(
    inst: &Instance,
    ng: &Neighborhoods,
    max_len: usize,
    interior: &mut Vec<usize>,
    memory: u64,
    load: u64,
    out: &mut Vec<Route>,
) {
    if interior.len() >= max_len {
        return;
    }
    for w in inst.customers() {
        let bit = 1u64 << (w - 1);
        if memory & bit != 0 {
            continue;
        }
        let new_load = load + u64::from(inst.demand(w));
        if new_load > u64::from(inst.capacity()) {
            continue;
        }
        interior.push(w);
        let mut visits = Vec::with_capacity(interior.len() + 2);
        visits.push(inst.start_depot());
        visits.extend_from_slice(interior);
        visits.push(inst.end_depot());
        out.push(Route::new(inst, visits).unwrap());
        ng_dfs(
            inst,
            ng,
            max_len,
            interior,
            (memory & ng.mask(w)) | bit,
            new_load,
            out,
        );
        interior.pop();
    }
}

/// All elementary routes (each customer at most once, capacity respected),
/// including the empty one. Same size cap as [`enumerate_ng_routes`].
pub fn enumerate_elementary_routes(inst: &Instance) -> Result<Vec<Route>, PricingError> {
    const N_LIMIT: usize = 8;
    let n = inst.n_customers();
    if n > N_LIMIT {
        return Err(PricingError::TooLarge { n, limit: N_LIMIT });
    }
    let mut out = vec![Route::empty(inst)];
    let mut interior = Vec::new();
    elem_dfs(inst, &mut interior, 0, 0, &mut out);
    Ok(out)
}

fn elem_dfs(
    inst: &Instance,
    interior: &mut Vec<usize>,
    visited: u64,
    load: u64,
    out: &mut Vec<Route>,
) {
    for w in inst.customers() {
        let bit = 1u64 << (w - 1);
        if visited & bit != 0 {
            continue;
        }
        let new_load = load + u64::from(inst.demand(w));
        if new_load > u64::from(inst.capacity()) {
            continue;
        }
        interior.push(w);
        let mut visits = Vec::with_capacity(interior.len() + 2);
        visits.push(inst.start_depot());
        visits.extend_from_slice(interior);
        visits.push(inst.end_depot());
        out.push(Route::new(inst, visits).unwrap());
        elem_dfs(inst, interior, visited | bit, new_load, out);
        interior.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_neighborhoods, Instance};
    use crate::testutil::t4;

    fn zero_alpha(inst: &Instance) -> Vec<f64> {
        vec![0.0; inst.n_customers() + 1]
    }

    #[test]
    fn large_dual_pulls_in_the_singleton() {
        let inst = t4();
        let ng = build_neighborhoods(&inst, 1);
        let mut alpha = zero_alpha(&inst);
        alpha[1] = 100.0;
        let res = price_ng(&inst, &ng, &alpha, 30);
        assert_eq!(res.min_reduced_cost, -94.0);
        let best = &res.columns[0];
        assert_eq!(best.route.visits(), &[0, 1, 4]);
        assert_eq!(best.reduced_cost, -94.0);
        // Columns come back sorted ascending and all negative.
        for pair in res.columns.windows(2) {
            assert!(pair[0].reduced_cost <= pair[1].reduced_cost);
        }
        assert!(res.columns.iter().all(|c| c.reduced_cost < 0.0));
    }

    #[test]
    fn zero_duals_price_nonnegative() {
        let inst = t4();
        let ng = build_neighborhoods(&inst, 2);
        let res = price_ng(&inst, &ng, &zero_alpha(&inst), 30);
        assert!(res.columns.is_empty());
        // Cheapest route at zero duals is the cheapest singleton (cost 6);
        // the empty route is not a column the DP produces.
        assert_eq!(res.min_reduced_cost, 6.0);
    }

    #[test]
    fn max_cols_caps_output_but_not_the_minimum() {
        let inst = t4();
        let ng = build_neighborhoods(&inst, 2);
        let mut alpha = zero_alpha(&inst);
        alpha[1] = 50.0;
        alpha[2] = 50.0;
        alpha[3] = 50.0;
        let full = price_ng(&inst, &ng, &alpha, 30);
        assert!(full.columns.len() > 2);
        let capped = price_ng(&inst, &ng, &alpha, 2);
        assert_eq!(capped.columns.len(), 2);
        assert_eq!(capped.min_reduced_cost, full.min_reduced_cost);
        assert_eq!(
            capped.columns[0].reduced_cost,
            full.columns[0].reduced_cost
        );
    }

    #[test]
    fn fixed_cost_charged_once_per_route() {
        let mut inst = t4();
        inst.set_fixed_cost(10.0).unwrap();
        let ng = build_neighborhoods(&inst, 1);
        let mut alpha = zero_alpha(&inst);
        alpha[1] = 100.0;
        let res = price_ng(&inst, &ng, &alpha, 30);
        // (0,1,4) now costs 16, reduced cost -84.
        assert_eq!(res.min_reduced_cost, -84.0);
    }

    #[test]
    fn repeats_allowed_only_when_memory_forgets() {
        // ng size 1: N_1 = {3}, N_2 = {1}, N_3 = {1}. Route 0,2,1,2,4 is
        // ng-feasible (1 forgets 2); make it attractive via huge alpha[2].
        let inst = t4();
        let ng = build_neighborhoods(&inst, 1);
        let mut alpha = zero_alpha(&inst);
        alpha[2] = 60.0;
        let res = price_ng(&inst, &ng, &alpha, 50);
        let has_repeat = res
            .columns
            .iter()
            .any(|c| c.route.visit_count(2) == 2 && c.route.is_ng_feasible(&inst, &ng));
        assert!(has_repeat, "expected a 2-revisit column");
        // Each visit collects the dual again.
        let rep = res
            .columns
            .iter()
            .find(|c| c.route.visits() == [0, 2, 1, 2, 4])
            .expect("specific repeat route priced");
        assert_eq!(rep.reduced_cost, rep.route.cost() - 120.0);
    }

    #[test]
    fn matches_elementary_oracle_when_ng_is_full() {
        // With ng size n-1 the relaxation is exact, so the DP minimum must
        // equal the elementary brute force on a handful of dual vectors.
        let inst = Instance::single_depot(
            "mix-6",
            (3.0, 7.0),
            &[
                ((0.0, 0.0), 3),
                ((10.0, 1.0), 2),
                ((5.0, 9.0), 4),
                ((8.0, 6.0), 2),
                ((1.0, 5.0), 3),
                ((6.0, 2.0), 2),
            ],
            8,
            0.0,
        )
        .unwrap();
        let ng = build_neighborhoods(&inst, inst.n_customers() - 1);
        let duals: [&[f64]; 3] = [
            &[0.0, 9.0, 14.0, 11.0, 8.0, 13.0, 7.0],
            &[0.0, 25.0, 0.0, 12.0, 0.0, 30.0, 5.0],
            &[0.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0],
        ];
        for alpha in duals {
            let dp = price_ng(&inst, &ng, alpha, 5);
            let oracle = price_elementary_bruteforce(&inst, alpha).unwrap();
            assert_eq!(dp.min_reduced_cost, oracle.reduced_cost);
        }
    }

    #[test]
    fn dominance_does_not_change_the_minimum() {
        let inst = t4();
        let ng = build_neighborhoods(&inst, 1);
        let alpha = [0.0, 7.0, 11.0, 6.0];
        let with = price_ng_with(&inst, &ng, &alpha, &PricingOptions::default());
        let without = price_ng_with(
            &inst,
            &ng,
            &alpha,
            &PricingOptions {
                use_dominance: false,
                ..PricingOptions::default()
            },
        );
        assert_eq!(with.min_reduced_cost, without.min_reduced_cost);
        assert_eq!(
            with.columns.first().map(|c| c.route.visits().to_vec()),
            without.columns.first().map(|c| c.route.visits().to_vec())
        );
    }

    #[test]
    fn enumeration_matches_dp_minimum() {
        let inst = t4();
        let ng = build_neighborhoods(&inst, 1);
        let alpha = [0.0, 12.0, 3.0, 9.0];
        let all = enumerate_ng_routes(&inst, &ng, 10).unwrap();
        let best = all
            .iter()
            .filter(|r| !r.interior().is_empty())
            .map(|r| reduced_cost_of(r, &alpha))
            .fold(f64::INFINITY, f64::min);
        let dp = price_ng(&inst, &ng, &alpha, 5);
        assert_eq!(dp.min_reduced_cost, best);
    }

    #[test]
    fn full_ng_enumeration_is_exactly_the_elementary_set() {
        let inst = t4();
        let ng = build_neighborhoods(&inst, inst.n_customers() - 1);
        let mut ngr: Vec<Vec<usize>> = enumerate_ng_routes(&inst, &ng, 3)
            .unwrap()
            .iter()
            .map(|r| r.visits().to_vec())
            .collect();
        let mut elem: Vec<Vec<usize>> = enumerate_elementary_routes(&inst)
            .unwrap()
            .iter()
            .map(|r| r.visits().to_vec())
            .collect();
        ngr.sort();
        elem.sort();
        assert_eq!(ngr, elem);
        // 3 customers: empty + 3 + 6 + 6 = 16 sequences.
        assert_eq!(elem.len(), 16);
    }

    #[test]
    fn oracles_refuse_big_instances() {
        let customers: Vec<((f64, f64), u32)> =
            (0..12).map(|i| ((i as f64, 1.0), 1)).collect();
        let inst = Instance::single_depot("big", (0.0, 0.0), &customers, 20, 0.0).unwrap();
        let ng = build_neighborhoods(&inst, 3);
        assert!(matches!(
            price_elementary_bruteforce(&inst, &vec![0.0; 13]),
            Err(PricingError::TooLarge { .. })
        ));
        assert!(matches!(
            enumerate_ng_routes(&inst, &ng, 4),
            Err(PricingError::TooLarge { .. })
        ));
        assert!(matches!(
            enumerate_elementary_routes(&inst),
            Err(PricingError::TooLarge { .. })
        ));
    }
}
