//! The column-generation loop: solve the master, price against its cover
//! duals, add negative columns, repeat. Stabilized runs finish with a
//! removal loop (ban every stabilization variable that is active at
//! convergence, resume, repeat until the optimum is clean) and a final
//! plain pass over the accumulated column pool that certifies the value.
//!
//! Pricing deliberately ignores link duals: they only make reduced costs
//! more negative, so the plain reduced cost is an overestimate and
//! convergence checks stay safe. The certification pass closes any gap the
//! rounding of rebates onto grids may have opened.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::columns::Route;
use crate::doi::{rebate_profile, FdoiVariant, SdoiVariant, SigmaGrid, SwapBounds};
use crate::instance::{build_neighborhoods, Instance, InstanceError, Neighborhoods};
use crate::lp::DenseSimplex;
use crate::pricing::price_ng;
use crate::rmp::{DoiMode, RmpColumn, RmpError, RmpModel, RmpSolution};

/// A stabilization variable counts as active above this.
pub const ACTIVE_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: DoiMode,
    /// Neighborhood size for the route relaxation; clamped to n-1.
    pub ng_size: usize,
    /// Per-customer cap on retained swap bounds (incoming and outgoing).
    pub sdoi_k: usize,
    /// Rebate grid levels per customer.
    pub sigma_levels: usize,
    /// Fraction of the maximal rebate total the smoothing must keep.
    pub delta: f64,
    /// Convergence tolerance on the minimum reduced cost.
    pub epsilon: f64,
    /// Most columns added per pricing round.
    pub max_cols: usize,
    /// Override the instance's per-route fixed cost.
    pub fixed_cost: Option<f64>,
    /// Override the vehicle count used in the Lagrangian bound.
    pub vehicle_bound: Option<usize>,
    pub time_limit: Option<Duration>,
    pub sdoi_variant: SdoiVariant,
    pub fdoi_variant: FdoiVariant,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: DoiMode::None,
            ng_size: 5,
            sdoi_k: 10,
            sigma_levels: 10,
            delta: 0.999,
            epsilon: 1e-6,
            max_cols: 30,
            fixed_cost: None,
            vehicle_bound: None,
            time_limit: None,
            sdoi_variant: SdoiVariant::Tight,
            fdoi_variant: FdoiVariant::Tight,
        }
    }
}

impl RunConfig {
    pub fn with_mode(mode: DoiMode) -> RunConfig {
        RunConfig {
            mode,
            ..RunConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(DriverError::BadConfig(format!(
                "delta must be in (0, 1], got {}",
                self.delta
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(DriverError::BadConfig(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.max_cols == 0 {
            return Err(DriverError::BadConfig(
                "max_cols must be at least 1".into(),
            ));
        }
        if self.sigma_levels == 0 {
            return Err(DriverError::BadConfig(
                "sigma_levels must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("master: {0}")]
    Rmp(#[from] RmpError),
    #[error("pricing returned only known columns; no progress possible")]
    Stalled,
    #[error("removal loop failed to settle after {0} restarts")]
    RemovalDiverged(usize),
}

/// One column-generation iteration, as written to trace files.
#[derive(Debug, Clone)]
pub struct TraceRow {
    /// Pass index: 0 is the first, each removal restart adds one, and a
    /// stabilized run's plain certification pass is the last.
    pub restart: usize,
    /// Global 1-based iteration (RMP solve) counter.
    pub iteration: usize,
    pub elapsed: f64,
    pub rmp_objective: f64,
    /// Lagrangian bound from this iteration's duals.
    pub lower_bound: f64,
    pub min_reduced_cost: f64,
    pub n_columns: usize,
    pub n_active_doi: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CgTrace {
    pub rows: Vec<TraceRow>,
}

impl CgTrace {
    pub fn best_lower_bound(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.lower_bound)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub instance: String,
    pub mode: DoiMode,
    pub final_objective: f64,
    /// True when a plain pass (or a plain run) priced out within epsilon.
    pub certified: bool,
    pub timed_out: bool,
    /// Total RMP solves across every pass, certification included.
    pub iterations: usize,
    /// RMP solves spent in the final plain certification pass. Zero for a
    /// plain run, whose only pass certifies itself.
    pub cert_iterations: usize,
    /// Removal restarts (stabilized modes only).
    pub restarts: usize,
    pub n_columns: usize,
    /// Rebate profiles that failed the route-cost guard (dropped, counted).
    pub guard_violations: usize,
    /// Unbounded master solves recovered by deleting ray variables.
    pub unbounded_events: usize,
    /// Smoothing runs that fell back to the scaled point.
    pub qp_fallbacks: usize,
    pub wall_time: Duration,
    pub trace: CgTrace,
}

impl SolveOutcome {
    /// Iterations to convergence: every pass up to the clean stabilized
    /// solution, summed over restarts, with the certification pass left out.
    /// This is the like-for-like count when comparing modes.
    pub fn cg_iterations(&self) -> usize {
        self.iterations - self.cert_iterations
    }
}

/// Lagrangian bound: any cover duals give `objective + kappa * min_rc`
/// with the reduced-cost term clamped at zero.
pub fn lower_bound(objective: f64, min_reduced_cost: f64, max_vehicles: usize) -> f64 {
    objective + max_vehicles as f64 * min_reduced_cost.min(0.0)
}

enum PassEnd {
    Converged(RmpSolution),
    TimedOut,
}

struct Session<'a> {
    inst: Instance,
    ng: Neighborhoods,
    cfg: &'a RunConfig,
    solver: DenseSimplex,
    grid: SigmaGrid,
    pool: Vec<RmpColumn>,
    pool_keys: HashSet<Vec<usize>>,
    rows: Vec<TraceRow>,
    started: Instant,
    kappa: usize,
    iterations: usize,
    guard_violations: usize,
    unbounded_events: usize,
    qp_fallbacks: usize,
}

impl<'a> Session<'a> {
    fn out_of_time(&self) -> bool {
        self.cfg
            .time_limit
            .is_some_and(|tl| self.started.elapsed() >= tl)
    }

    /// Attach rebates (when wanted) and push the route into both the pool
    /// and the model. Returns false for routes already known.
    fn add_route(&mut self, model: &mut RmpModel, route: Route, with_rebates: bool) -> bool {
        if !self.pool_keys.insert(route.visits().to_vec()) {
            return false;
        }
        let rebates = if with_rebates {
            let profile =
                rebate_profile(&self.inst, &route, self.cfg.fdoi_variant, self.cfg.delta);
            if profile.fallback {
                self.qp_fallbacks += 1;
            }
            if profile.respects_cost_guard(&route) {
                self.grid.fit(&profile);
                Some(self.grid.round_down(&profile))
            } else {
                // A rebate total above the route cost could push the
                // master below the true optimum; drop the profile and
                // keep the column plain.
                self.guard_violations += 1;
                log::error!(
                    "rebates exceed route cost on {:?}; dropping them",
                    route.visits()
                );
                None
            }
        } else {
            None
        };
        let col = RmpColumn { route, rebates };
        self.pool.push(col.clone());
        let fresh = model.add_column(col);
        debug_assert!(fresh, "pool and model column sets diverged");
        fresh
    }

    /// Run column generation to convergence (or timeout) on one master.
    /// Unbounded solves delete the ray's stabilization variables and do
    /// not count as iterations.
    fn cg_pass(&mut self, model: &mut RmpModel, pass: usize) -> Result<PassEnd, DriverError> {
        let with_rebates = model.mode().uses_rebates();
        loop {
            let sol = loop {
                match model.solve(&self.solver) {
                    Ok(s) => break s,
                    Err(RmpError::Unbounded(_)) => {
                        self.unbounded_events += 1;
                        let ray = model.take_ray().expect("unbounded solve records its ray");
                        log::warn!(
                            "master unbounded; deleting {} swap and {} rebate vars",
                            ray.omega.len(),
                            ray.xi.len()
                        );
                        for pair in ray.omega {
                            model.ban_omega(pair);
                        }
                        for key in ray.xi {
                            model.ban_xi(key);
                        }
                    }
                    Err(e) => return Err(e.into()),
                }
            };
            self.iterations += 1;

            let pricing = price_ng(&self.inst, &self.ng, &sol.duals.alpha, self.cfg.max_cols);
            self.rows.push(TraceRow {
                restart: pass,
                iteration: self.iterations,
                elapsed: self.started.elapsed().as_secs_f64(),
                rmp_objective: sol.objective,
                lower_bound: lower_bound(sol.objective, pricing.min_reduced_cost, self.kappa),
                min_reduced_cost: pricing.min_reduced_cost,
                n_columns: model.n_columns(),
                n_active_doi: sol.n_active_doi(ACTIVE_TOL),
            });

            if pricing.min_reduced_cost >= -self.cfg.epsilon {
                return Ok(PassEnd::Converged(sol));
            }
            if self.out_of_time() {
                return Ok(PassEnd::TimedOut);
            }
            let mut added = 0;
            for priced in pricing.columns {
                if self.add_route(model, priced.route, with_rebates) {
                    added += 1;
                }
            }
            if added == 0 {
                // Existing columns price nonnegative under the master's own
                // duals, so a negative minimum must come from a new route.
                return Err(DriverError::Stalled);
            }
        }
    }
}

/// Solve one instance under one configuration.
pub fn solve(inst: &Instance, cfg: &RunConfig) -> Result<SolveOutcome, DriverError> {
    cfg.validate()?;
    let mut inst = inst.clone();
    if let Some(f) = cfg.fixed_cost {
        inst.set_fixed_cost(f)?;
    }
    if let Some(k) = cfg.vehicle_bound {
        inst.set_vehicle_bound(k);
    }
    let n = inst.n_customers();
    let ng = build_neighborhoods(&inst, cfg.ng_size);
    let kappa = inst.vehicle_bound();
    let bounds = if cfg.mode.uses_swaps() {
        SwapBounds::build(&inst, cfg.sdoi_variant).select_k(cfg.sdoi_k)
    } else {
        SwapBounds::default()
    };

    let mut session = Session {
        grid: SigmaGrid::new(n, cfg.sigma_levels),
        ng,
        cfg,
        solver: DenseSimplex::default(),
        pool: Vec::new(),
        pool_keys: HashSet::new(),
        rows: Vec::new(),
        started: Instant::now(),
        kappa,
        iterations: 0,
        guard_violations: 0,
        unbounded_events: 0,
        qp_fallbacks: 0,
        inst,
    };

    let mut model = RmpModel::new(n, cfg.mode, bounds);
    let with_rebates = cfg.mode.uses_rebates();
    for u in session.inst.customers() {
        let r = Route::singleton(&session.inst, u).expect("customer ids are valid");
        session.add_route(&mut model, r, with_rebates);
    }

    let mut pass = 0;
    let mut restarts = 0;
    let mut certified = false;
    let mut timed_out = false;
    let mut final_objective;

    // Stabilized passes with the removal loop; a plain mode is a single
    // pass that certifies itself.
    loop {
        match session.cg_pass(&mut model, pass)? {
            PassEnd::TimedOut => {
                timed_out = true;
                final_objective = session
                    .rows
                    .last()
                    .map_or(f64::NAN, |r| r.rmp_objective);
                break;
            }
            PassEnd::Converged(sol) => {
                final_objective = sol.objective;
                if cfg.mode == DoiMode::None {
                    certified = true;
                    break;
                }
                let active = sol.active_doi(ACTIVE_TOL);
                if active.omega.is_empty() && active.xi.is_empty() {
                    break;
                }
                restarts += 1;
                // Every restart bans at least one live variable, so this
                // cannot run past the variable count; a generous cap turns
                // a logic bug into an error instead of a hang.
                if restarts > 100_000 {
                    return Err(DriverError::RemovalDiverged(restarts));
                }
                log::info!(
                    "restart {restarts}: removing {} swap and {} rebate vars",
                    active.omega.len(),
                    active.xi.len()
                );
                for pair in active.omega {
                    model.ban_omega(pair);
                }
                for key in active.xi {
                    model.ban_xi(key);
                }
                pass += 1;
            }
        }
    }

    // Certification: a plain master over everything found so far.
    let mut cert_iterations = 0;
    if !timed_out && cfg.mode != DoiMode::None {
        pass += 1;
        let before_cert = session.iterations;
        let mut cert = RmpModel::new(n, DoiMode::None, SwapBounds::default());
        for col in &session.pool {
            cert.add_column(RmpColumn {
                route: col.route.clone(),
                rebates: None,
            });
        }
        match session.cg_pass(&mut cert, pass)? {
            PassEnd::Converged(sol) => {
                final_objective = sol.objective;
                certified = true;
            }
            PassEnd::TimedOut => {
                timed_out = true;
                final_objective = session
                    .rows
                    .last()
                    .map_or(final_objective, |r| r.rmp_objective);
            }
        }
        cert_iterations = session.iterations - before_cert;
    }

    Ok(SolveOutcome {
        instance: session.inst.name().to_string(),
        mode: cfg.mode,
        final_objective,
        certified,
        timed_out,
        iterations: session.iterations,
        cert_iterations,
        restarts,
        n_columns: session.pool.len(),
        guard_violations: session.guard_violations,
        unbounded_events: session.unbounded_events,
        qp_fallbacks: session.qp_fallbacks,
        wall_time: session.started.elapsed(),
        trace: CgTrace { rows: session.rows },
    })
}
