//! Dual-optimal inequalities for the set-cover master.
//!
//! Two families:
//!
//! * **Swap bounds** `rho(u,v)`: an upper bound on the cost increase of
//!   replacing a visit of `u` by `v` in any column, valid whenever
//!   `demand(u) >= demand(v)`. They justify the master's exchange
//!   variables. The easy bound is `2 c(u,v)`; the tight one maximizes the
//!   exact insertion-context delta over all neighbor pairs and needs no
//!   triangle inequality.
//!
//! * **Removal rebates** `sigma`: per-position amounts a column's cost can
//!   be discounted when a customer is over-covered, valid when every
//!   block of consecutive positions rebates at most what deleting that
//!   block saves. Variants: a greedy per-position bound, the LP that
//!   maximizes the total rebate, and a QP that keeps (almost) that total
//!   while spreading it evenly — smoother duals in exchange for a sliver
//!   of strength.
//!
//! Rebates on repeated customers collapse to the smallest per-position
//! value, and entering the master they are rounded *down* onto a small
//! per-customer grid so columns can share rebate variables. Rounding down
//! keeps every inequality valid.

use std::collections::BTreeMap;

use crate::columns::Route;
use crate::instance::Instance;
use crate::lp::{dense, DenseSimplex, LinearProgram, LinearSolver, LpStatus, RowSense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdoiVariant {
    Easy,
    #[default]
    Tight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdoiVariant {
    Easy,
    /// LP-maximal total rebate, then QP-smoothed.
    #[default]
    Tight,
}

/// Easy swap bound: out and back along the `(u,v)` arc.
pub fn sdoi_easy(inst: &Instance, u: usize, v: usize) -> i64 {
    2 * inst.dist(u, v)
}

/// Tight swap bound: the worst exact insertion-context delta
/// `c(a,v) + c(v,b) - c(a,u) - c(u,b)` over predecessors `a` (any node but
/// the end depot, `u`, `v`) and successors `b` (any node but the start
/// depot, `u`, `v`, `a`). Exact for rounded distances.
pub fn sdoi_tight(inst: &Instance, u: usize, v: usize) -> i64 {
    let end = inst.end_depot();
    let mut best = i64::MIN;
    for a in 0..inst.n_nodes() {
        if a == end || a == u || a == v {
            continue;
        }
        for b in 0..inst.n_nodes() {
            if b == inst.start_depot() || b == u || b == v || b == a {
                continue;
            }
            let delta = inst.dist(a, v) + inst.dist(v, b) - inst.dist(a, u) - inst.dist(u, b);
            best = best.max(delta);
        }
    }
    debug_assert!(best > i64::MIN, "context set is never empty");
    best
}

/// Swap bounds for the admissible ordered pairs: `u != v` with
/// `demand(u) >= demand(v)`.
#[derive(Debug, Clone, Default)]
pub struct SwapBounds {
    map: BTreeMap<(usize, usize), i64>,
}

impl SwapBounds {
    pub fn build(inst: &Instance, variant: SdoiVariant) -> SwapBounds {
        let mut map = BTreeMap::new();
        for u in inst.customers() {
            for v in inst.customers() {
                if u == v || inst.demand(u) < inst.demand(v) {
                    continue;
                }
                let rho = match variant {
                    SdoiVariant::Easy => sdoi_easy(inst, u, v),
                    SdoiVariant::Tight => sdoi_tight(inst, u, v),
                };
                map.insert((u, v), rho);
            }
        }
        SwapBounds { map }
    }

    pub fn get(&self, u: usize, v: usize) -> Option<i64> {
        self.map.get(&(u, v)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), i64)> + '_ {
        self.map.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Keep, per customer, the `k` outgoing and `k` incoming pairs with the
    /// smallest bound (ties to the lexicographically smaller pair), and
    /// return the union. Small bounds are the binding ones; the rest mostly
    /// bloat the master.
    pub fn select_k(&self, k: usize) -> SwapBounds {
        let mut keep = BTreeMap::new();
        let mut outgoing: BTreeMap<usize, Vec<((usize, usize), i64)>> = BTreeMap::new();
        let mut incoming: BTreeMap<usize, Vec<((usize, usize), i64)>> = BTreeMap::new();
        for (pair, rho) in self.iter() {
            outgoing.entry(pair.0).or_default().push((pair, rho));
            incoming.entry(pair.1).or_default().push((pair, rho));
        }
        for group in outgoing.values_mut().chain(incoming.values_mut()) {
            group.sort_by_key(|&(pair, rho)| (rho, pair));
            for &(pair, rho) in group.iter().take(k) {
                keep.insert(pair, rho);
            }
        }
        SwapBounds { map: keep }
    }
}

/// Cost deltas of deleting each block of consecutive interior positions:
/// `nu(i, j)` is the cost change (new minus old) from deleting positions
/// `i..=i+j`, i.e. replacing the chain through them by the direct arc.
/// Negative means deleting saves. Rounding can push small blocks slightly
/// positive; consumers clamp via [`BlockDeltas::allowance`].
#[derive(Debug, Clone)]
pub struct BlockDeltas {
    m: usize,
    nu: Vec<i64>,
}

impl BlockDeltas {
    pub fn compute(inst: &Instance, route: &Route) -> BlockDeltas {
        let full = route.visits();
        let m = full.len() - 2;
        let mut nu = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            // Cost of the chain full[i] -> ... -> full[i+j+2] grows with j.
            let mut chain = inst.dist(full[i], full[i + 1]);
            for j in 0..m - i {
                chain += inst.dist(full[i + j + 1], full[i + j + 2]);
                nu.push(inst.dist(full[i], full[i + j + 2]) - chain);
            }
        }
        BlockDeltas { m, nu }
    }

    /// Interior length.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Raw delta for the block starting at interior position `i` spanning
    /// `j + 1` positions.
    pub fn nu(&self, i: usize, j: usize) -> i64 {
        debug_assert!(i < self.m && i + j < self.m);
        // Rows are stored back to back with lengths m, m-1, ..., m-i+1.
        let offset = i * (2 * self.m - i + 1) / 2;
        self.nu[offset + j]
    }

    /// Upper cap on the total rebate of the block: the saving from deleting
    /// it, clamped at zero when rounding made the "saving" negative.
    pub fn allowance(&self, i: usize, j: usize) -> i64 {
        (-self.nu(i, j)).max(0)
    }
}

/// Greedy per-position rebates: for each interior position, the cheapest
/// exact detour cost over all (earlier node, later node) pairs, clamped at
/// zero. Valid but usually well below the LP total.
pub fn fdoi_easy_positions(inst: &Instance, route: &Route) -> Vec<f64> {
    let full = route.visits();
    let m = full.len() - 2;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let f = i + 1;
        let mut best = i64::MAX;
        for a in 0..f {
            for b in f + 1..full.len() {
                let detour =
                    inst.dist(full[a], full[f]) + inst.dist(full[f], full[b])
                        - inst.dist(full[a], full[b]);
                best = best.min(detour);
            }
        }
        out.push(best.max(0) as f64);
    }
    out
}

/// LP-maximal rebates: maximize the total subject to every block's
/// allowance. Block rows are generated lazily — with long routes there are
/// quadratically many and few bind.
pub fn fdoi_lp_positions(inst: &Instance, route: &Route) -> (Vec<f64>, f64) {
    let deltas = BlockDeltas::compute(inst, route);
    let m = deltas.len();
    if m == 0 {
        return (Vec::new(), 0.0);
    }
    let solver = DenseSimplex::default();
    let mut active: Vec<(usize, usize)> = (0..m).map(|i| (i, 0)).collect();
    loop {
        let mut lp = LinearProgram::new(m);
        lp.objective = vec![-1.0; m];
        for &(i, j) in &active {
            let coeffs = (i..=i + j).map(|k| (k, 1.0)).collect();
            lp.push_row(coeffs, RowSense::Le, deltas.allowance(i, j) as f64);
        }
        let sol = solver.solve(&lp, None);
        assert_eq!(
            sol.status,
            LpStatus::Optimal,
            "rebate LP is feasible (zero) and bounded (single-position caps)"
        );
        let sigma = sol.primal;
        let mut prefix = vec![0.0; m + 1];
        for k in 0..m {
            prefix[k + 1] = prefix[k] + sigma[k];
        }
        let mut violated: Vec<(f64, (usize, usize))> = Vec::new();
        for i in 0..m {
            for j in 0..m - i {
                let total = prefix[i + j + 1] - prefix[i];
                let excess = total - deltas.allowance(i, j) as f64;
                if excess > 1e-9 {
                    violated.push((excess, (i, j)));
                }
            }
        }
        if violated.is_empty() {
            let total = -sol.objective;
            return (sigma, total);
        }
        violated.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, blk) in violated.iter().take(2 * m) {
            active.push(blk);
        }
        active.sort_unstable();
        active.dedup();
    }
}

/// Per-position rebates with the QP fallback status.
#[derive(Debug, Clone)]
pub struct PositionalSigmas {
    pub sigma: Vec<f64>,
    /// Total of the LP-maximal solution (the tight variant's budget base).
    pub lp_total: f64,
    /// True when the QP hit its iteration cap and the delta-scaled LP
    /// solution was returned instead.
    pub fallback: bool,
}

/// Tight rebates: LP-maximal total, then minimize the sum of squares while
/// keeping at least `delta` of that total. The QP runs an active-set method
/// from the (feasible) delta-scaled LP point; every step shrinks the norm
/// and stays feasible, so even the capped fallback keeps all guarantees.
pub fn fdoi_smoothed_positions(inst: &Instance, route: &Route, delta: f64) -> PositionalSigmas {
    assert!(delta > 0.0 && delta <= 1.0, "delta must be in (0, 1]");
    let (lp_sigma, lp_total) = fdoi_lp_positions(inst, route);
    if lp_sigma.is_empty() || lp_total <= 1e-12 {
        return PositionalSigmas {
            sigma: vec![0.0; lp_sigma.len()],
            lp_total,
            fallback: false,
        };
    }
    let deltas = BlockDeltas::compute(inst, route);
    match qp_smooth(&deltas, &lp_sigma, lp_total, delta) {
        Some(sigma) => PositionalSigmas {
            sigma,
            lp_total,
            fallback: false,
        },
        None => {
            log::warn!(
                "rebate QP hit its iteration cap on a {}-visit column; using the scaled LP point",
                lp_sigma.len()
            );
            PositionalSigmas {
                sigma: lp_sigma.iter().map(|s| s * delta).collect(),
                lp_total,
                fallback: true,
            }
        }
    }
}

/// Constraint rows of the rebate QP over `x = sigma`:
/// blocks `sum x[lo..=hi] <= cap`, bounds `-x[k] <= 0`, and the budget
/// `-sum x <= -delta * lp_total`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum QpRow {
    Block { lo: usize, hi: usize, cap: f64 },
    NonNeg(usize),
    Budget(f64),
}

impl QpRow {
    fn rhs(&self) -> f64 {
        match *self {
            QpRow::Block { cap, .. } => cap,
            QpRow::NonNeg(_) => 0.0,
            QpRow::Budget(b) => b,
        }
    }

    /// Dot with a vector given its prefix sums.
    fn dot(&self, prefix: &[f64]) -> f64 {
        match *self {
            QpRow::Block { lo, hi, .. } => prefix[hi + 1] - prefix[lo],
            QpRow::NonNeg(k) => -(prefix[k + 1] - prefix[k]),
            QpRow::Budget(_) => -prefix[prefix.len() - 1],
        }
    }

    fn dense(&self, m: usize) -> Vec<f64> {
        let mut g = vec![0.0; m];
        match *self {
            QpRow::Block { lo, hi, .. } => {
                for item in g.iter_mut().take(hi + 1).skip(lo) {
                    *item = 1.0;
                }
            }
            QpRow::NonNeg(k) => g[k] = -1.0,
            QpRow::Budget(_) => g.iter_mut().for_each(|v| *v = -1.0),
        }
        g
    }
}

fn prefix_sums(x: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; x.len() + 1];
    for (k, &v) in x.iter().enumerate() {
        p[k + 1] = p[k] + v;
    }
    p
}

/// Active-set minimization of ||x||^2 over the rebate polytope with the
/// budget floor. Returns None when the iteration cap is hit.
fn qp_smooth(
    deltas: &BlockDeltas,
    lp_sigma: &[f64],
    lp_total: f64,
    delta: f64,
) -> Option<Vec<f64>> {
    let m = lp_sigma.len();
    let mut rows: Vec<QpRow> = Vec::with_capacity(m * (m + 1) / 2 + m + 1);
    for i in 0..m {
        for j in 0..m - i {
            rows.push(QpRow::Block {
                lo: i,
                hi: i + j,
                cap: deltas.allowance(i, j) as f64,
            });
        }
    }
    for k in 0..m {
        rows.push(QpRow::NonNeg(k));
    }
    rows.push(QpRow::Budget(-delta * lp_total));

    let mut x: Vec<f64> = lp_sigma.iter().map(|s| s * delta).collect();
    let mut working: Vec<usize> = Vec::new();
    let max_iters = 100 + 12 * m;

    for _ in 0..max_iters {
        // Equality-constrained target: min ||z|| s.t. working rows tight.
        // Parameterize z = G_W' nu with G_W G_W' nu = h_W; the KKT
        // multipliers are then lambda = -2 nu.
        let k = working.len();
        let (target, nu) = if k == 0 {
            (vec![0.0; m], Vec::new())
        } else {
            let gw: Vec<Vec<f64>> = working.iter().map(|&r| rows[r].dense(m)).collect();
            let mut mat = vec![0.0; k * k];
            for a in 0..k {
                for b in 0..k {
                    mat[a * k + b] = gw[a].iter().zip(&gw[b]).map(|(x, y)| x * y).sum();
                }
            }
            let h: Vec<f64> = working.iter().map(|&r| rows[r].rhs()).collect();
            let nu = match dense::solve_system(k, &mat, &h) {
                Some(nu) => nu,
                None => {
                    // Dependent working set; nudge the diagonal once.
                    for a in 0..k {
                        mat[a * k + a] += 1e-10;
                    }
                    dense::solve_system(k, &mat, &h)?
                }
            };
            let mut t = vec![0.0; m];
            for (a, g) in gw.iter().enumerate() {
                for (ti, gi) in t.iter_mut().zip(g) {
                    *ti += nu[a] * gi;
                }
            }
            (t, nu)
        };

        let p: Vec<f64> = target.iter().zip(&x).map(|(t, xv)| t - xv).collect();
        let p_inf = p.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if p_inf <= 1e-10 {
            // At the working-set minimizer: check multipliers.
            let mut drop: Option<(f64, usize)> = None;
            for (a, &nu_a) in nu.iter().enumerate() {
                let lambda = -2.0 * nu_a;
                if lambda < -1e-8 && drop.map_or(true, |(l, _)| lambda < l) {
                    drop = Some((lambda, a));
                }
            }
            match drop {
                None => return Some(x),
                Some((_, a)) => {
                    working.remove(a);
                }
            }
            continue;
        }

        let xp = prefix_sums(&x);
        let pp = prefix_sums(&p);
        let mut alpha = 1.0f64;
        let mut blocker: Option<usize> = None;
        for (r, row) in rows.iter().enumerate() {
            if working.contains(&r) {
                continue;
            }
            let gp = row.dot(&pp);
            if gp > 1e-12 {
                let slack = (row.rhs() - row.dot(&xp)).max(0.0);
                let a = slack / gp;
                if a < alpha - 1e-12 {
                    alpha = a;
                    blocker = Some(r);
                }
            }
        }
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        if let Some(r) = blocker {
            working.push(r);
            working.sort_unstable();
        }
    }
    None
}

/// Per-customer rebates of one column. Repeated customers take the
/// smallest of their per-position values.
#[derive(Debug, Clone, Default)]
pub struct RebateProfile {
    sigma: BTreeMap<usize, f64>,
    pub fallback: bool,
}

impl RebateProfile {
    pub fn sigma(&self, u: usize) -> f64 {
        self.sigma.get(&u).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.sigma.iter().map(|(&u, &s)| (u, s))
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// The master requires the total rebate never to exceed the column
    /// cost; violating it would let a column price itself below zero.
    pub fn respects_cost_guard(&self, route: &Route) -> bool {
        let total: f64 = route
            .interior()
            .iter()
            .map(|&u| self.sigma(u))
            .sum();
        total <= route.cost() + 1e-9
    }
}

/// Build the per-customer rebate profile of a column under the chosen
/// variant. `delta` only matters for [`FdoiVariant::Tight`].
pub fn rebate_profile(
    inst: &Instance,
    route: &Route,
    variant: FdoiVariant,
    delta: f64,
) -> RebateProfile {
    let (positional, fallback) = match variant {
        FdoiVariant::Easy => (fdoi_easy_positions(inst, route), false),
        FdoiVariant::Tight => {
            let s = fdoi_smoothed_positions(inst, route, delta);
            (s.sigma, s.fallback)
        }
    };
    let mut sigma: BTreeMap<usize, f64> = BTreeMap::new();
    for (&u, &s) in route.interior().iter().zip(&positional) {
        let s = s.max(0.0);
        sigma
            .entry(u)
            .and_modify(|cur| *cur = cur.min(s))
            .or_insert(s);
    }
    sigma.retain(|_, s| *s > 1e-12);
    RebateProfile { sigma, fallback }
}

/// Rebates rounded down onto a customer's grid: (level index, level value).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundedRebates {
    levels: BTreeMap<usize, (usize, f64)>,
}

impl RoundedRebates {
    pub fn level(&self, u: usize) -> Option<(usize, f64)> {
        self.levels.get(&u).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.levels.iter().map(|(&u, &(idx, val))| (u, idx, val))
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Per-customer rebate grids. A customer's grid is created from the first
/// nonzero rebate seen: `g` evenly spaced levels from `sigma/g` up to
/// `sigma`. Later, larger rebates extend the grid by the same step, so
/// level indices stay stable and rounding down always loses less than one
/// step.
#[derive(Debug, Clone)]
pub struct SigmaGrid {
    g: usize,
    levels: Vec<Vec<f64>>,
}

impl SigmaGrid {
    pub fn new(n_customers: usize, g: usize) -> SigmaGrid {
        assert!(g >= 1);
        SigmaGrid {
            g,
            levels: vec![Vec::new(); n_customers],
        }
    }

    pub fn levels(&self, u: usize) -> &[f64] {
        &self.levels[u - 1]
    }

    /// Extend grids so every rebate in the profile rounds to something
    /// (unless it's below the smallest level of an existing grid).
    pub fn fit(&mut self, profile: &RebateProfile) {
        for (u, s) in profile.iter() {
            if s <= 1e-12 {
                continue;
            }
            let grid = &mut self.levels[u - 1];
            if grid.is_empty() {
                let step = s / self.g as f64;
                for k in 1..=self.g {
                    grid.push(step * k as f64);
                }
                // Make the top level exactly the observed value.
                *grid.last_mut().unwrap() = s;
            } else {
                let step = grid[0];
                while *grid.last().unwrap() < s - 1e-9 {
                    let next = grid.last().unwrap() + step;
                    grid.push(next);
                }
            }
        }
    }

    /// Round each rebate down to the largest grid level not above it.
    /// Customers with no grid or a rebate below the lowest level drop out.
    pub fn round_down(&self, profile: &RebateProfile) -> RoundedRebates {
        let mut levels = BTreeMap::new();
        for (u, s) in profile.iter() {
            let grid = &self.levels[u - 1];
            let mut chosen = None;
            for (idx, &lv) in grid.iter().enumerate() {
                if lv <= s + 1e-9 {
                    chosen = Some((idx, lv));
                } else {
                    break;
                }
            }
            if let Some(c) = chosen {
                levels.insert(u, c);
            }
        }
        RoundedRebates { levels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::columns::{swap, Route};
    use crate::pricing::enumerate_elementary_routes;
    use crate::testutil::{collinear, t4};

    #[test]
    fn tight_swap_bounds_match_hand_calc() {
        let inst = t4();
        assert_eq!(sdoi_tight(&inst, 1, 2), 5);
        assert_eq!(sdoi_tight(&inst, 2, 1), -2);
        assert_eq!(sdoi_tight(&inst, 1, 3), 6);
        assert_eq!(sdoi_tight(&inst, 3, 1), -5);
        assert_eq!(sdoi_tight(&inst, 2, 3), 4);
        assert_eq!(sdoi_tight(&inst, 3, 2), 0);
        assert_eq!(sdoi_easy(&inst, 1, 2), 10);
    }

    #[test]
    fn collinear_pair_has_zero_tight_bound() {
        // On a line, swapping (1,0) out for (2,0) never costs anything:
        // the tight bound sees that, the easy bound pays the round trip.
        let inst = collinear();
        assert_eq!(sdoi_tight(&inst, 1, 2), 0);
        assert_eq!(sdoi_easy(&inst, 1, 2), 2);
    }

    #[test]
    fn swap_bounds_cover_admissible_pairs_only() {
        let inst = crate::instance::Instance::single_depot(
            "dem",
            (0.0, 0.0),
            &[((3.0, 0.0), 5), ((0.0, 4.0), 2), ((5.0, 5.0), 2)],
            9,
            0.0,
        )
        .unwrap();
        let bounds = SwapBounds::build(&inst, SdoiVariant::Tight);
        // 1 can stand in for nobody's demand above 5; pairs with d_u >= d_v:
        // (1,2),(1,3),(2,3),(3,2) = 4.
        assert_eq!(bounds.len(), 4);
        assert!(bounds.get(1, 2).is_some());
        assert!(bounds.get(2, 1).is_none());
        assert!(bounds.get(3, 2).is_some());
    }

    #[test]
    fn every_actual_swap_respects_the_tight_bound() {
        // Defining property: for any elementary route through u avoiding v,
        // cost(swap) - cost <= rho(u,v).
        let inst = t4();
        let bounds = SwapBounds::build(&inst, SdoiVariant::Tight);
        let routes = enumerate_elementary_routes(&inst).unwrap();
        let mut checked = 0;
        for ((u, v), rho) in bounds.iter() {
            for r in &routes {
                if r.visit_count(u) == 1 && r.visit_count(v) == 0 {
                    let swapped = swap(&inst, r, u, v).unwrap();
                    assert!(
                        swapped.cost() - r.cost() <= rho as f64 + 1e-9,
                        "swap {u}->{v} on {:?} broke the bound",
                        r.visits()
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn select_k_keeps_cheapest_in_and_out_pairs() {
        let inst = t4();
        let bounds = SwapBounds::build(&inst, SdoiVariant::Tight);
        assert_eq!(bounds.len(), 6);
        let kept = bounds.select_k(1);
        // Outgoing minima: (1,2)=5, (2,1)=-2, (3,1)=-5.
        // Incoming minima: (3,1)=-5, (3,2)=0, (2,3)=4.
        let pairs: Vec<_> = kept.iter().map(|(p, _)| p).collect();
        assert_eq!(pairs, vec![(1, 2), (2, 1), (2, 3), (3, 1), (3, 2)]);
        assert!(kept.select_k(5).len() == kept.len());
    }

    #[test]
    fn block_deltas_match_hand_calc() {
        let inst = t4();
        let r = Route::new(&inst, vec![0, 1, 2, 4]).unwrap();
        let d = BlockDeltas::compute(&inst, &r);
        assert_eq!(d.len(), 2);
        assert_eq!(d.nu(0, 0), -4);
        assert_eq!(d.nu(1, 0), -6);
        assert_eq!(d.nu(0, 1), -12);
        assert_eq!(d.allowance(0, 0), 4);
        assert_eq!(d.allowance(0, 1), 12);
    }

    #[test]
    fn rounding_can_make_deltas_positive_but_allowance_clamps() {
        // (0,0) -> (1,1) -> (2,2): each hop rounds to 1, the shortcut to 3,
        // so "deleting" the middle stop costs +1. Allowance clamps to 0.
        let inst = crate::instance::Instance::single_depot(
            "diag",
            (0.0, 0.0),
            &[((1.0, 1.0), 1), ((2.0, 2.0), 1)],
            5,
            0.0,
        )
        .unwrap();
        assert!(!inst.triangle_consistent());
        let r = Route::new(&inst, vec![0, 1, 2, 3]).unwrap();
        let d = BlockDeltas::compute(&inst, &r);
        assert_eq!(d.nu(0, 0), 1);
        assert_eq!(d.allowance(0, 0), 0);
        // Greedy rebates clamp at zero too.
        let easy = fdoi_easy_positions(&inst, &r);
        assert_eq!(easy[0], 0.0);
        assert_eq!(easy[1], 3.0);
        // And the LP respects the clamped caps.
        let (sigma, total) = fdoi_lp_positions(&inst, &r);
        assert!(sigma[0].abs() < 1e-9);
        assert!((total - 3.0).abs() < 1e-9);
    }

    #[test]
    fn easy_rebates_match_hand_calc() {
        let inst = t4();
        let r = Route::new(&inst, vec![0, 1, 2, 4]).unwrap();
        assert_eq!(fdoi_easy_positions(&inst, &r), vec![4.0, 6.0]);
        // Singletons rebate their full detour.
        let s = Route::singleton(&inst, 3).unwrap();
        assert_eq!(fdoi_easy_positions(&inst, &s), vec![12.0]);
        // On the collinear instance every detour is free.
        let c = collinear();
        let line = Route::new(&c, vec![0, 1, 2, 3, 4]).unwrap();
        assert_eq!(fdoi_easy_positions(&c, &line), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn lp_rebates_hit_the_known_optimum() {
        let inst = t4();
        let r = Route::new(&inst, vec![0, 1, 2, 4]).unwrap();
        let (sigma, total) = fdoi_lp_positions(&inst, &r);
        assert!((total - 10.0).abs() < 1e-9);
        assert!((sigma[0] - 4.0).abs() < 1e-9);
        assert!((sigma[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn lp_dominates_easy_and_respects_all_blocks() {
        let specs = crate::synth::suite_specs();
        let inst = crate::synth::synth_instance(&specs[0]);
        // A handful of fixed routes of varying length.
        let mk = |v: Vec<usize>| Route::new(&inst, v).unwrap();
        let end = inst.end_depot();
        let routes = vec![
            mk(vec![0, 1, 2, 3, end]),
            mk(vec![0, 5, 9, 2, 7, end]),
            mk(vec![0, 12, 4, 8, 11, 3, end]),
            mk(vec![0, 10, 6, end]),
        ];
        for r in routes {
            let easy = fdoi_easy_positions(&inst, &r);
            let (sigma, total) = fdoi_lp_positions(&inst, &r);
            if inst.triangle_consistent() {
                // Greedy is LP-feasible only when rounding created no
                // shortcut violations, so only then is domination a theorem.
                let easy_total: f64 = easy.iter().sum();
                assert!(total >= easy_total - 1e-9, "LP total under greedy total");
            }
            let d = BlockDeltas::compute(&inst, &r);
            let m = d.len();
            for i in 0..m {
                for j in 0..m - i {
                    let s: f64 = sigma[i..=i + j].iter().sum();
                    assert!(s <= d.allowance(i, j) as f64 + 1e-7);
                }
            }
            assert!(sigma.iter().all(|&s| s >= -1e-9));
        }
    }

    #[test]
    fn qp_smoothing_matches_hand_calc() {
        let inst = t4();
        let r = Route::new(&inst, vec![0, 1, 2, 4]).unwrap();
        let s = fdoi_smoothed_positions(&inst, &r, 0.999);
        assert!(!s.fallback);
        assert!((s.lp_total - 10.0).abs() < 1e-9);
        // Budget 9.99; balancing wants (4.995, 4.995) but sigma_1 caps at 4.
        assert!((s.sigma[0] - 4.0).abs() < 1e-6, "got {:?}", s.sigma);
        assert!((s.sigma[1] - 5.99).abs() < 1e-6);
    }

    #[test]
    fn qp_keeps_feasibility_budget_and_smaller_norm() {
        let specs = crate::synth::suite_specs();
        let inst = crate::synth::synth_instance(&specs[3]);
        let end = inst.end_depot();
        let routes = vec![
            Route::new(&inst, vec![0, 2, 14, 7, 9, 1, end]).unwrap(),
            Route::new(&inst, vec![0, 20, 3, 11, 5, 17, 8, 13, end]).unwrap(),
            Route::new(&inst, vec![0, 6, 21, end]).unwrap(),
        ];
        for r in routes {
            let (lp_sigma, lp_total) = fdoi_lp_positions(&inst, &r);
            let s = fdoi_smoothed_positions(&inst, &r, 0.999);
            let total: f64 = s.sigma.iter().sum();
            assert!(total >= 0.999 * lp_total - 1e-6, "budget violated");
            let d = BlockDeltas::compute(&inst, &r);
            let m = d.len();
            for i in 0..m {
                for j in 0..m - i {
                    let blk: f64 = s.sigma[i..=i + j].iter().sum();
                    assert!(blk <= d.allowance(i, j) as f64 + 1e-6);
                }
            }
            assert!(s.sigma.iter().all(|&v| v >= -1e-9));
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
            assert!(norm(&s.sigma) <= norm(&lp_sigma) + 1e-6);
        }
    }

    #[test]
    fn profiles_take_the_smallest_value_on_repeats() {
        let inst = t4();
        let ng = crate::instance::build_neighborhoods(&inst, 1);
        let r = Route::new(&inst, vec![0, 2, 1, 2, 4]).unwrap();
        assert!(r.is_ng_feasible(&inst, &ng));
        let positional = fdoi_easy_positions(&inst, &r);
        let profile = rebate_profile(&inst, &r, FdoiVariant::Easy, 0.999);
        let expected = positional[0].min(positional[2]);
        if expected > 1e-12 {
            assert_eq!(profile.sigma(2), expected);
        } else {
            assert_eq!(profile.sigma(2), 0.0);
        }
        assert!(profile.respects_cost_guard(&r));
    }

    #[test]
    fn profiles_respect_the_cost_guard_on_synthetic_routes() {
        let inst = crate::synth::synth_instance(&crate::synth::suite_specs()[1]);
        let end = inst.end_depot();
        for variant in [FdoiVariant::Easy, FdoiVariant::Tight] {
            for v in [
                vec![0, 1, end],
                vec![0, 4, 9, 2, end],
                vec![0, 13, 6, 10, 3, 8, end],
            ] {
                let r = Route::new(&inst, v).unwrap();
                let p = rebate_profile(&inst, &r, variant, 0.999);
                assert!(p.respects_cost_guard(&r), "variant {:?}", variant);
            }
        }
    }

    #[test]
    fn grids_round_down_and_extend() {
        let mut grid = SigmaGrid::new(3, 3);
        let mut profile = RebateProfile::default();
        profile.sigma_insert_for_test(1, 6.0);
        grid.fit(&profile);
        assert_eq!(grid.levels(1), &[2.0, 4.0, 6.0]);

        let mut p5 = RebateProfile::default();
        p5.sigma_insert_for_test(1, 5.0);
        let r = grid.round_down(&p5);
        assert_eq!(r.level(1), Some((1, 4.0)));

        // Exact hits stay exact.
        let r6 = grid.round_down(&profile);
        assert_eq!(r6.level(1), Some((2, 6.0)));

        // A bigger rebate extends by the same step and then rounds.
        let mut p9 = RebateProfile::default();
        p9.sigma_insert_for_test(1, 9.0);
        grid.fit(&p9);
        assert_eq!(grid.levels(1), &[2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(grid.round_down(&p9).level(1), Some((3, 8.0)));

        // Below the lowest level: no rebate variable.
        let mut tiny = RebateProfile::default();
        tiny.sigma_insert_for_test(1, 1.0);
        assert!(grid.round_down(&tiny).is_empty());
        // Untouched customers have no grid.
        assert!(grid.levels(2).is_empty());
    }
}

#[cfg(test)]
impl RebateProfile {
    fn sigma_insert_for_test(&mut self, u: usize, s: f64) {
        self.sigma.insert(u, s);
    }
}

#[cfg(test)]
impl SwapBounds {
    pub(crate) fn from_map_for_test(map: BTreeMap<(usize, usize), i64>) -> SwapBounds {
        SwapBounds { map }
    }
}
