//! Routes (columns) and the edits the dual-optimal bounds are stated
//! through: swapping one customer for another and deleting visits by
//! position.
//!
//! A [`Route`] is a depot-to-depot node sequence. It may visit a customer
//! more than once — the ng relaxation prices such columns — so edits that
//! need a unique occurrence take positions, not customer ids.

use crate::instance::Instance;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ColumnError {
    #[error("route must start at the start depot and end at the end depot")]
    BadEndpoints,
    #[error("depot cannot appear in the route interior")]
    InteriorDepot,
    #[error("route has no interior visits")]
    EmptyInterior,
    #[error("node {0} is not a customer")]
    NotACustomer(usize),
    #[error("customer {0} does not appear in the route")]
    CustomerAbsent(usize),
    #[error("customer {0} appears more than once; use a position-based edit")]
    CustomerRepeated(usize),
    #[error("customer {0} is already on the route")]
    CustomerPresent(usize),
    #[error("swap requires demand({u}) >= demand({v})")]
    DemandOrder { u: usize, v: usize },
    #[error("interior position {pos} out of range (route has {len} interior visits)")]
    PositionOutOfRange { pos: usize, len: usize },
    #[error("positions must be distinct")]
    RepeatedPosition,
}

/// A column: a depot-to-depot visit sequence with its travel distance,
/// total cost (distance plus the instance fixed cost), and load.
///
/// Construction validates the shape only — endpoints are the depots and the
/// interior is all customers. Capacity and elementarity/ng-feasibility are
/// separate predicates because pricing and the bound derivations both need
/// routes that fail them.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    visits: Vec<usize>,
    dist: i64,
    cost: f64,
    load: u64,
}

impl Route {
    pub fn new(inst: &Instance, visits: Vec<usize>) -> Result<Route, ColumnError> {
        if visits.len() < 2
            || visits[0] != inst.start_depot()
            || *visits.last().unwrap() != inst.end_depot()
        {
            return Err(ColumnError::BadEndpoints);
        }
        let mut dist = 0i64;
        let mut load = 0u64;
        for w in visits.windows(2) {
            dist += inst.dist(w[0], w[1]);
        }
        for &u in &visits[1..visits.len() - 1] {
            if !inst.is_customer(u) {
                return Err(ColumnError::InteriorDepot);
            }
            load += u64::from(inst.demand(u));
        }
        let cost = inst.fixed_cost() + dist as f64;
        Ok(Route {
            visits,
            dist,
            cost,
            load,
        })
    }

    /// The depot-to-depot round trip with no customers. Used as a base case
    /// by the enumeration oracles; it covers nothing and costs `f`.
    pub fn empty(inst: &Instance) -> Route {
        Route::new(inst, vec![inst.start_depot(), inst.end_depot()]).unwrap()
    }

    pub fn singleton(inst: &Instance, u: usize) -> Result<Route, ColumnError> {
        if !inst.is_customer(u) {
            return Err(ColumnError::NotACustomer(u));
        }
        Route::new(inst, vec![inst.start_depot(), u, inst.end_depot()])
    }

    pub fn visits(&self) -> &[usize] {
        &self.visits
    }

    /// Customer visits only, in order.
    pub fn interior(&self) -> &[usize] {
        &self.visits[1..self.visits.len() - 1]
    }

    /// Travel distance (no fixed cost).
    pub fn distance(&self) -> i64 {
        self.dist
    }

    /// Column cost: fixed cost plus travel distance.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn load(&self) -> u64 {
        self.load
    }

    /// Number of times customer `u` is visited (the cover coefficient).
    pub fn visit_count(&self, u: usize) -> u32 {
        self.interior().iter().filter(|&&w| w == u).count() as u32
    }

    /// Cover coefficients for all customers; index `u - 1` holds customer
    /// `u`'s count.
    pub fn counts(&self, n_customers: usize) -> Vec<u32> {
        let mut a = vec![0u32; n_customers];
        for &u in self.interior() {
            a[u - 1] += 1;
        }
        a
    }

    /// Distinct customers covered, ascending.
    pub fn covered(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.interior().to_vec();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Visits every customer at most once and fits the capacity.
    pub fn is_elementary(&self, inst: &Instance) -> bool {
        if self.load > u64::from(inst.capacity()) {
            return false;
        }
        let mut seen = 0u64;
        for &u in self.interior() {
            let b = 1u64 << (u - 1);
            if seen & b != 0 {
                return false;
            }
            seen |= b;
        }
        true
    }

    /// Feasible for the ng relaxation: fits the capacity, and every revisit
    /// of a customer is "forgotten" in between — some intermediate visit's
    /// neighborhood excludes it.
    pub fn is_ng_feasible(&self, inst: &Instance, ng: &crate::instance::Neighborhoods) -> bool {
        if self.load > u64::from(inst.capacity()) {
            return false;
        }
        let mut memory = 0u64;
        for &u in self.interior() {
            let b = 1u64 << (u - 1);
            if memory & b != 0 {
                return false;
            }
            memory = (memory & ng.mask(u)) | b;
        }
        true
    }
}

/// Cost (fixed cost plus distance) of an arbitrary depot-to-depot visit
/// sequence, validating the same shape rules as [`Route::new`].
pub fn route_cost(inst: &Instance, visits: &[usize]) -> Result<f64, ColumnError> {
    Route::new(inst, visits.to_vec()).map(|r| r.cost())
}

/// Replace the unique visit of `u` by `v`. Requires `u` on the route exactly
/// once, `v` absent, and `demand(u) >= demand(v)` so the result stays within
/// capacity whenever the original was.
pub fn swap(inst: &Instance, route: &Route, u: usize, v: usize) -> Result<Route, ColumnError> {
    match route.visit_count(u) {
        0 => return Err(ColumnError::CustomerAbsent(u)),
        1 => {}
        _ => return Err(ColumnError::CustomerRepeated(u)),
    }
    let pos = route.interior().iter().position(|&w| w == u).unwrap();
    swap_at(inst, route, pos, v)
}

/// Replace the interior visit at `pos` (0-based within the interior) by `v`.
/// `v` must not already be on the route and must not out-demand the visit it
/// replaces.
pub fn swap_at(
    inst: &Instance,
    route: &Route,
    pos: usize,
    v: usize,
) -> Result<Route, ColumnError> {
    let interior = route.interior();
    if pos >= interior.len() {
        return Err(ColumnError::PositionOutOfRange {
            pos,
            len: interior.len(),
        });
    }
    if !inst.is_customer(v) {
        return Err(ColumnError::NotACustomer(v));
    }
    if route.visit_count(v) > 0 {
        return Err(ColumnError::CustomerPresent(v));
    }
    let u = interior[pos];
    if inst.demand(u) < inst.demand(v) {
        return Err(ColumnError::DemandOrder { u, v });
    }
    let mut visits = route.visits().to_vec();
    visits[pos + 1] = v;
    Route::new(inst, visits)
}

/// Delete the interior visits at the given 0-based positions, reconnecting
/// the remaining sequence. Deleting everything leaves the depot round trip.
pub fn remove(inst: &Instance, route: &Route, positions: &[usize]) -> Result<Route, ColumnError> {
    let len = route.interior().len();
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(ColumnError::RepeatedPosition);
    }
    if let Some(&p) = sorted.last() {
        if p >= len {
            return Err(ColumnError::PositionOutOfRange { pos: p, len });
        }
    }
    let mut visits = Vec::with_capacity(route.visits().len() - sorted.len());
    visits.push(inst.start_depot());
    let mut drop_it = sorted.iter().peekable();
    for (idx, &u) in route.interior().iter().enumerate() {
        if drop_it.peek() == Some(&&idx) {
            drop_it.next();
        } else {
            visits.push(u);
        }
    }
    visits.push(inst.end_depot());
    Route::new(inst, visits)
}
