//! The restricted master problem: a set-cover LP over the known columns,
//! optionally augmented with swap variables (one per retained bound) and
//! rebate variables (one per customer/grid-level in use).
//!
//! Structure, for customers `u`, columns `l`, swap pairs `s = (u,v)`, and
//! rebate levels `(u, sigma)`:
//!
//! ```text
//! min   sum c_l theta_l + sum rho_s omega_s - sum sigma xi_{u,sigma}
//! s.t.  cover(u):  sum a_ul theta_l + sum_{s into u} omega_s
//!                  - sum_{s out of u} omega_s - sum_sigma xi_{u,sigma} >= 1
//!       link(u,sigma):  xi_{u,sigma} - sum_{l rebating (u,sigma)} theta_l <= 0
//!       all variables >= 0
//! ```
//!
//! Cover duals are the `alpha` the pricing DP consumes. Negative-cost swap
//! chains can in principle make the LP unbounded; the solve then reports
//! which stabilization variables ride the ray so the driver can delete
//! them and try again.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{self, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::columns::Route;
use crate::doi::{RoundedRebates, SwapBounds};
use crate::lp::{BasisVar, LinearProgram, LinearSolver, LpStatus, RowSense};

/// Which stabilization families the master carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DoiMode {
    #[default]
    None,
    /// Swap bounds only.
    Smooth,
    /// Removal rebates only.
    Flex,
    /// Both.
    SmoothFlex,
}

impl DoiMode {
    pub fn uses_swaps(self) -> bool {
        matches!(self, DoiMode::Smooth | DoiMode::SmoothFlex)
    }

    pub fn uses_rebates(self) -> bool {
        matches!(self, DoiMode::Flex | DoiMode::SmoothFlex)
    }

    pub const ALL: [DoiMode; 4] = [
        DoiMode::None,
        DoiMode::Smooth,
        DoiMode::Flex,
        DoiMode::SmoothFlex,
    ];
}

impl FromStr for DoiMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(DoiMode::None),
            "s" => Ok(DoiMode::Smooth),
            "f" => Ok(DoiMode::Flex),
            "sf" => Ok(DoiMode::SmoothFlex),
            other => Err(format!(
                "unknown mode {other:?}; expected none, s, f, or sf"
            )),
        }
    }
}

impl std::fmt::Display for DoiMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DoiMode::None => "none",
            DoiMode::Smooth => "s",
            DoiMode::Flex => "f",
            DoiMode::SmoothFlex => "sf",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum RmpError {
    #[error("master LP unbounded; {0} stabilization variables in the ray")]
    Unbounded(usize),
    #[error("master LP infeasible, which singleton columns should prevent")]
    Infeasible,
    #[error("master LP solve failed numerically")]
    Numerical,
}

/// Unbounded-ray contents, keyed the way bans are.
#[derive(Debug, Clone, Default)]
pub struct RaySupport {
    pub omega: Vec<(usize, usize)>,
    pub xi: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct RmpColumn {
    pub route: Route,
    /// Grid-rounded rebates; ignored unless the mode uses rebates.
    pub rebates: Option<RoundedRebates>,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    /// Cover duals indexed by customer id; entry 0 unused.
    pub alpha: Vec<f64>,
    /// Link duals as nonnegative magnitudes, keyed by (customer, level).
    pub link: BTreeMap<(usize, usize), f64>,
}

#[derive(Debug, Clone)]
pub struct RmpSolution {
    pub objective: f64,
    pub theta: Vec<f64>,
    pub omega: BTreeMap<(usize, usize), f64>,
    pub xi: BTreeMap<(usize, usize), f64>,
    pub duals: DualSolution,
    pub lp_iterations: usize,
}

impl RmpSolution {
    /// Stabilization variables with value above `tol`.
    pub fn active_doi(&self, tol: f64) -> RaySupport {
        RaySupport {
            omega: self
                .omega
                .iter()
                .filter(|&(_, &v)| v > tol)
                .map(|(&k, _)| k)
                .collect(),
            xi: self
                .xi
                .iter()
                .filter(|&(_, &v)| v > tol)
                .map(|(&k, _)| k)
                .collect(),
        }
    }

    pub fn n_active_doi(&self, tol: f64) -> usize {
        let a = self.active_doi(tol);
        a.omega.len() + a.xi.len()
    }
}

/// Basis memory entries, keyed by identity rather than index so the basis
/// survives new columns and new link rows between solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WarmEntry {
    Theta(usize),
    Omega(usize, usize),
    Xi(usize, usize),
    CoverSlack(usize),
    CoverArtificial(usize),
    LinkSlack(usize, usize),
}

#[derive(Debug, Clone)]
struct WarmBasis {
    entries: Vec<WarmEntry>,
    /// Rebate keys that existed when the basis was saved; link rows for
    /// keys outside this set are new and start on their slack.
    xi_keys: BTreeSet<(usize, usize)>,
}

pub struct RmpModel {
    n_customers: usize,
    mode: DoiMode,
    bounds: SwapBounds,
    columns: Vec<RmpColumn>,
    route_keys: HashSet<Vec<usize>>,
    banned_omega: BTreeSet<(usize, usize)>,
    banned_xi: BTreeSet<(usize, usize)>,
    warm: Option<WarmBasis>,
    pending_ray: Option<RaySupport>,
}

impl RmpModel {
    /// `bounds` should already be reduced to the pairs worth carrying
    /// (see [`SwapBounds::select_k`]); it is ignored unless the mode uses
    /// swaps.
    pub fn new(n_customers: usize, mode: DoiMode, bounds: SwapBounds) -> RmpModel {
        let bounds = if mode.uses_swaps() {
            bounds
        } else {
            SwapBounds::default()
        };
        RmpModel {
            n_customers,
            mode,
            bounds,
            columns: Vec::new(),
            route_keys: HashSet::new(),
            banned_omega: BTreeSet::new(),
            banned_xi: BTreeSet::new(),
            warm: None,
            pending_ray: None,
        }
    }

    pub fn mode(&self) -> DoiMode {
        self.mode
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[RmpColumn] {
        &self.columns
    }

    /// Add a column; duplicates (by visit sequence) are rejected.
    pub fn add_column(&mut self, column: RmpColumn) -> bool {
        if !self.route_keys.insert(column.route.visits().to_vec()) {
            log::debug!(
                "duplicate column rejected: {:?}",
                column.route.visits()
            );
            return false;
        }
        self.columns.push(column);
        true
    }

    /// Permanently remove a swap variable.
    pub fn ban_omega(&mut self, pair: (usize, usize)) {
        self.banned_omega.insert(pair);
    }

    /// Permanently remove a rebate variable (customer, level index).
    pub fn ban_xi(&mut self, key: (usize, usize)) {
        self.banned_xi.insert(key);
    }

    pub fn n_banned(&self) -> usize {
        self.banned_omega.len() + self.banned_xi.len()
    }

    /// Live stabilization variable count for the next solve.
    pub fn n_doi_vars(&self) -> usize {
        let (omega, xi) = self.doi_vars();
        omega.len() + xi.len()
    }

    fn doi_vars(&self) -> (Vec<((usize, usize), i64)>, Vec<(usize, usize, f64)>) {
        let mut omega = Vec::new();
        if self.mode.uses_swaps() {
            for (pair, rho) in self.bounds.iter() {
                if !self.banned_omega.contains(&pair) {
                    omega.push((pair, rho));
                }
            }
        }
        let mut xi_map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        if self.mode.uses_rebates() {
            for col in &self.columns {
                if let Some(rr) = &col.rebates {
                    for (u, lvl, val) in rr.iter() {
                        if self.banned_xi.contains(&(u, lvl)) {
                            continue;
                        }
                        let prev = xi_map.insert((u, lvl), val);
                        debug_assert!(
                            prev.map_or(true, |p| (p - val).abs() < 1e-9),
                            "grid level value changed between columns"
                        );
                    }
                }
            }
        }
        let xi = xi_map
            .into_iter()
            .map(|((u, lvl), val)| (u, lvl, val))
            .collect();
        (omega, xi)
    }

    fn build_lp(
        &self,
    ) -> (
        LinearProgram,
        Vec<((usize, usize), i64)>,
        Vec<(usize, usize, f64)>,
    ) {
        let n = self.n_customers;
        let (omega, xi) = self.doi_vars();
        let n_theta = self.columns.len();
        let n_vars = n_theta + omega.len() + xi.len();
        let xi_pos: BTreeMap<(usize, usize), usize> = xi
            .iter()
            .enumerate()
            .map(|(p, &(u, lvl, _))| ((u, lvl), p))
            .collect();

        let mut lp = LinearProgram::new(n_vars);
        let mut cover: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut link: Vec<Vec<(usize, f64)>> = vec![Vec::new(); xi.len()];

        for (j, col) in self.columns.iter().enumerate() {
            lp.objective[j] = col.route.cost();
            for u in col.route.covered() {
                let a = col.route.visit_count(u);
                cover[u - 1].push((j, f64::from(a)));
            }
            if self.mode.uses_rebates() {
                if let Some(rr) = &col.rebates {
                    for (u, lvl, _) in rr.iter() {
                        if let Some(&p) = xi_pos.get(&(u, lvl)) {
                            link[p].push((j, -1.0));
                        }
                    }
                }
            }
        }
        for (k, &((u, v), rho)) in omega.iter().enumerate() {
            let j = n_theta + k;
            lp.objective[j] = rho as f64;
            cover[u - 1].push((j, -1.0));
            cover[v - 1].push((j, 1.0));
        }
        for (k, &(u, lvl, val)) in xi.iter().enumerate() {
            let j = n_theta + omega.len() + k;
            lp.objective[j] = -val;
            cover[u - 1].push((j, -1.0));
            link[xi_pos[&(u, lvl)]].push((j, 1.0));
        }

        for coeffs in cover {
            lp.push_row(coeffs, RowSense::Ge, 1.0);
        }
        for coeffs in link {
            lp.push_row(coeffs, RowSense::Le, 0.0);
        }
        (lp, omega, xi)
    }

    /// Solve the current master. Optimal solves remember their basis, so
    /// the next solve after adding columns warm-starts.
    pub fn solve(&mut self, solver: &dyn LinearSolver) -> Result<RmpSolution, RmpError> {
        let (lp, omega, xi) = self.build_lp();
        let n = self.n_customers;
        let n_theta = self.columns.len();

        let warm_vec = self.warm.as_ref().and_then(|w| {
            self.translate_warm(w, &omega, &xi, lp.rows.len())
        });
        let sol = solver.solve(&lp, warm_vec.as_deref());

        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => {
                let mut support = RaySupport::default();
                for &j in &sol.ray {
                    if j >= n_theta && j < n_theta + omega.len() {
                        support.omega.push(omega[j - n_theta].0);
                    } else if j >= n_theta + omega.len() {
                        let (u, lvl, _) = xi[j - n_theta - omega.len()];
                        support.xi.push((u, lvl));
                    }
                }
                if support.omega.is_empty() && support.xi.is_empty() {
                    // A pure-column ray is impossible with nonnegative
                    // costs; treat as numerical trouble.
                    log::error!("unbounded master with no stabilization vars in the ray");
                    return Err(RmpError::Numerical);
                }
                self.warm = None;
                let count = support.omega.len() + support.xi.len();
                self.pending_ray = Some(support);
                return Err(RmpError::Unbounded(count));
            }
            LpStatus::Infeasible => return Err(RmpError::Infeasible),
            LpStatus::IterationLimit => return Err(RmpError::Numerical),
        }

        // Remember the basis keyed by identity.
        let entries = sol
            .basis
            .iter()
            .map(|&bv| match bv {
                BasisVar::Structural(j) => {
                    if j < n_theta {
                        WarmEntry::Theta(j)
                    } else if j < n_theta + omega.len() {
                        let (pair, _) = omega[j - n_theta];
                        WarmEntry::Omega(pair.0, pair.1)
                    } else {
                        let (u, lvl, _) = xi[j - n_theta - omega.len()];
                        WarmEntry::Xi(u, lvl)
                    }
                }
                BasisVar::Slack(i) => {
                    if i < n {
                        WarmEntry::CoverSlack(i + 1)
                    } else {
                        let (u, lvl, _) = xi[i - n];
                        WarmEntry::LinkSlack(u, lvl)
                    }
                }
                BasisVar::Artificial(i) => {
                    debug_assert!(i < n, "only cover rows get artificials");
                    WarmEntry::CoverArtificial(i + 1)
                }
            })
            .collect();
        self.warm = Some(WarmBasis {
            entries,
            xi_keys: xi.iter().map(|&(u, lvl, _)| (u, lvl)).collect(),
        });

        let mut omega_vals = BTreeMap::new();
        for (k, &(pair, _)) in omega.iter().enumerate() {
            let v = sol.primal[n_theta + k];
            if v != 0.0 {
                omega_vals.insert(pair, v);
            }
        }
        let mut xi_vals = BTreeMap::new();
        for (k, &(u, lvl, _)) in xi.iter().enumerate() {
            let v = sol.primal[n_theta + omega.len() + k];
            if v != 0.0 {
                xi_vals.insert((u, lvl), v);
            }
        }
        let mut alpha = vec![0.0; n + 1];
        for u in 1..=n {
            alpha[u] = sol.duals[u - 1];
        }
        let mut link = BTreeMap::new();
        for (k, &(u, lvl, _)) in xi.iter().enumerate() {
            // Link rows are <=, so raw duals are nonpositive; report the
            // magnitude.
            link.insert((u, lvl), (-sol.duals[n + k]).max(0.0));
        }

        Ok(RmpSolution {
            objective: sol.objective,
            theta: sol.primal[..n_theta].to_vec(),
            omega: omega_vals,
            xi: xi_vals,
            duals: DualSolution { alpha, link },
            lp_iterations: sol.iterations,
        })
    }

    /// After [`RmpError::Unbounded`], the offending variables.
    pub fn take_ray(&mut self) -> Option<RaySupport> {
        self.pending_ray.take()
    }

    fn translate_warm(
        &self,
        warm: &WarmBasis,
        omega: &[((usize, usize), i64)],
        xi: &[(usize, usize, f64)],
        n_rows: usize,
    ) -> Option<Vec<BasisVar>> {
        let n = self.n_customers;
        let n_theta = self.columns.len();
        let omega_pos: BTreeMap<(usize, usize), usize> = omega
            .iter()
            .enumerate()
            .map(|(p, &(pair, _))| (pair, p))
            .collect();
        let xi_pos: BTreeMap<(usize, usize), usize> = xi
            .iter()
            .enumerate()
            .map(|(p, &(u, lvl, _))| ((u, lvl), p))
            .collect();

        let mut out = Vec::with_capacity(n_rows);
        for &e in &warm.entries {
            let bv = match e {
                WarmEntry::Theta(j) => {
                    if j >= n_theta {
                        return None;
                    }
                    BasisVar::Structural(j)
                }
                WarmEntry::Omega(u, v) => {
                    BasisVar::Structural(n_theta + *omega_pos.get(&(u, v))?)
                }
                WarmEntry::Xi(u, lvl) => BasisVar::Structural(
                    n_theta + omega.len() + *xi_pos.get(&(u, lvl))?,
                ),
                WarmEntry::CoverSlack(u) => BasisVar::Slack(u - 1),
                WarmEntry::CoverArtificial(u) => BasisVar::Artificial(u - 1),
                WarmEntry::LinkSlack(u, lvl) => {
                    BasisVar::Slack(n + *xi_pos.get(&(u, lvl))?)
                }
            };
            out.push(bv);
        }
        // Link rows that did not exist when the basis was saved start on
        // their slack; the old basis spans the old rows, so this extension
        // stays invertible.
        for (p, &(u, lvl, _)) in xi.iter().enumerate() {
            if !warm.xi_keys.contains(&(u, lvl)) {
                out.push(BasisVar::Slack(n + p));
            }
        }
        if out.len() == n_rows {
            Some(out)
        } else {
            None
        }
    }

    /// Dump the current LP in a readable form, for debugging.
    pub fn write_lp(&self, w: &mut dyn Write) -> io::Result<()> {
        let (lp, omega, xi) = self.build_lp();
        let n_theta = self.columns.len();
        let name = |j: usize| -> String {
            if j < n_theta {
                format!("t{j}")
            } else if j < n_theta + omega.len() {
                let ((u, v), _) = omega[j - n_theta];
                format!("w_{u}_{v}")
            } else {
                let (u, lvl, _) = xi[j - n_theta - omega.len()];
                format!("x_{u}_{lvl}")
            }
        };
        writeln!(
            w,
            "\\ mode {}: {} columns, {} swap vars, {} rebate vars",
            self.mode,
            n_theta,
            omega.len(),
            xi.len()
        )?;
        writeln!(w, "Minimize")?;
        let terms: Vec<String> = lp
            .objective
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c != 0.0)
            .map(|(j, &c)| format!("{:+} {}", c, name(j)))
            .collect();
        writeln!(w, " obj: {}", terms.join(" "))?;
        writeln!(w, "Subject To")?;
        for (i, row) in lp.rows.iter().enumerate() {
            let label = if i < self.n_customers {
                format!("cover_{}", i + 1)
            } else {
                let (u, lvl, _) = xi[i - self.n_customers];
                format!("link_{u}_{lvl}")
            };
            let terms: Vec<String> = row
                .coeffs
                .iter()
                .map(|&(j, c)| format!("{:+} {}", c, name(j)))
                .collect();
            let sense = match row.sense {
                RowSense::Ge => ">=",
                RowSense::Le => "<=",
                RowSense::Eq => "=",
            };
            writeln!(w, " {}: {} {} {}", label, terms.join(" "), sense, row.rhs)?;
        }
        writeln!(w, "End")
    }
}
