//! Dense two-phase revised simplex with an explicit basis inverse.
//!
//! Sized for restricted masters with a few hundred rows: the basis inverse
//! is kept dense, updated by the product form each pivot, and rebuilt from
//! scratch every `refactor_every` pivots and again before extracting a
//! solution. Entering variables follow Dantzig's rule (most negative
//! reduced cost, ties to the smaller index) and switch to Bland's rule
//! after a run of degenerate pivots so the master's zero-rhs link rows
//! cannot cycle. All tie-breaks are by index, so repeated solves of the
//! same input are bit-identical.

use super::dense;
use super::{BasisVar, LinearProgram, LinearSolver, LpSolution, LpStatus, RowSense};

/// Reduced costs above `-TOL_OPT` count as nonnegative; this is the
/// optimality tolerance the column-generation contract is stated with.
const TOL_OPT: f64 = 1e-7;
/// Pivot elements smaller than this are treated as zero in the ratio test.
const TOL_PIV: f64 = 1e-9;
/// Basic values this far below zero still count as feasible.
const TOL_FEAS: f64 = 1e-7;
/// Ratio-test steps below this are degenerate; after this many in a row we
/// fall back to Bland's rule until a real step happens.
const TOL_STEP: f64 = 1e-10;
const DEGEN_RUN_TO_BLAND: usize = 40;

#[derive(Debug, Clone)]
pub struct DenseSimplex {
    pub max_iters: usize,
    pub refactor_every: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex {
            max_iters: 500_000,
            refactor_every: 64,
        }
    }
}

impl LinearSolver for DenseSimplex {
    fn solve(&self, lp: &LinearProgram, warm: Option<&[BasisVar]>) -> LpSolution {
        Solver::new(lp, self).run(warm)
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded { entering: usize, w: Vec<f64> },
    IterationLimit,
    NumericalFailure,
}

struct Solver<'a> {
    opts: &'a DenseSimplex,
    m: usize,
    n: usize,
    n_total: usize,
    /// +1 or -1 per row: rows with negative rhs are negated so b >= 0, and
    /// their duals un-negated on extraction.
    sign: Vec<f64>,
    b: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    cost1: Vec<f64>,
    cost2: Vec<f64>,
    slack_of_row: Vec<Option<usize>>,
    art_of_row: Vec<Option<usize>>,
    kind: Vec<BasisVar>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iters: usize,
    since_refactor: usize,
    degen_run: usize,
    bland: bool,
}

impl<'a> Solver<'a> {
    fn new(lp: &'a LinearProgram, opts: &'a DenseSimplex) -> Solver<'a> {
        let m = lp.rows.len();
        let n = lp.n_vars;
        debug_assert_eq!(lp.objective.len(), n);

        let mut sign = vec![1.0; m];
        let mut b = vec![0.0; m];
        let mut sense = vec![RowSense::Eq; m];
        for (i, row) in lp.rows.iter().enumerate() {
            let (s, rhs, sn) = if row.rhs < 0.0 {
                (
                    -1.0,
                    -row.rhs,
                    match row.sense {
                        RowSense::Ge => RowSense::Le,
                        RowSense::Le => RowSense::Ge,
                        RowSense::Eq => RowSense::Eq,
                    },
                )
            } else {
                (1.0, row.rhs, row.sense)
            };
            sign[i] = s;
            b[i] = rhs;
            sense[i] = sn;
        }

        // Structural columns, then one slack per inequality row, then one
        // artificial per row that can't start on its slack.
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                debug_assert!(j < n && v.is_finite());
                cols[j].push((i, v * sign[i]));
            }
        }
        let mut kind: Vec<BasisVar> = (0..n).map(BasisVar::Structural).collect();
        let mut slack_of_row = vec![None; m];
        let mut art_of_row = vec![None; m];
        for i in 0..m {
            match sense[i] {
                RowSense::Le => {
                    slack_of_row[i] = Some(cols.len());
                    kind.push(BasisVar::Slack(i));
                    cols.push(vec![(i, 1.0)]);
                }
                RowSense::Ge => {
                    slack_of_row[i] = Some(cols.len());
                    kind.push(BasisVar::Slack(i));
                    cols.push(vec![(i, -1.0)]);
                }
                RowSense::Eq => {}
            }
        }
        for i in 0..m {
            if !matches!(sense[i], RowSense::Le) {
                art_of_row[i] = Some(cols.len());
                kind.push(BasisVar::Artificial(i));
                cols.push(vec![(i, 1.0)]);
            }
        }
        let n_total = cols.len();
        let mut cost1 = vec![0.0; n_total];
        let mut cost2 = vec![0.0; n_total];
        cost2[..n].copy_from_slice(&lp.objective);
        for j in n..n_total {
            if matches!(kind[j], BasisVar::Artificial(_)) {
                cost1[j] = 1.0;
            }
        }

        Solver {
            opts,
            m,
            n,
            n_total,
            sign,
            b,
            cols,
            cost1,
            cost2,
            slack_of_row,
            art_of_row,
            kind,
            basis: Vec::new(),
            in_basis: vec![false; n_total],
            binv: Vec::new(),
            xb: vec![0.0; m],
            iters: 0,
            since_refactor: 0,
            degen_run: 0,
            bland: false,
        }
    }

    fn run(mut self, warm: Option<&[BasisVar]>) -> LpSolution {
        if let Some(wb) = warm {
            if self.try_warm(wb) {
                return self.phase2();
            }
        }
        // Cold start: slacks where possible, artificials elsewhere.
        self.basis = (0..self.m)
            .map(|i| match (self.slack_of_row[i], self.art_of_row[i]) {
                (Some(s), None) => s,
                (_, Some(a)) => a,
                (None, None) => unreachable!("every row has a slack or artificial"),
            })
            .collect();
        self.in_basis = vec![false; self.n_total];
        for &j in &self.basis {
            self.in_basis[j] = true;
        }
        if !self.refactor() {
            return self.failure(LpStatus::IterationLimit);
        }

        let needs_phase1 = self
            .basis
            .iter()
            .any(|&j| matches!(self.kind[j], BasisVar::Artificial(_)));
        if needs_phase1 {
            match self.run_phase(true) {
                PhaseEnd::Optimal => {}
                PhaseEnd::Unbounded { .. } => {
                    // Phase-1 objective is bounded below by zero; reaching
                    // here means numerics went badly wrong.
                    log::error!("phase 1 reported unbounded; treating as numerical failure");
                    return self.failure(LpStatus::IterationLimit);
                }
                PhaseEnd::IterationLimit | PhaseEnd::NumericalFailure => {
                    return self.failure(LpStatus::IterationLimit);
                }
            }
            let b_scale = 1.0 + self.b.iter().map(|v| v.abs()).sum::<f64>();
            let art_obj: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|&(&j, _)| matches!(self.kind[j], BasisVar::Artificial(_)))
                .map(|(_, &x)| x.max(0.0))
                .sum();
            if art_obj > TOL_OPT * b_scale {
                return self.failure(LpStatus::Infeasible);
            }
            self.drive_out_artificials();
        }
        self.phase2()
    }

    fn phase2(mut self) -> LpSolution {
        match self.run_phase(false) {
            PhaseEnd::Optimal => self.extract(LpStatus::Optimal, Vec::new()),
            PhaseEnd::Unbounded { entering, w } => {
                let mut ray = Vec::new();
                if entering < self.n {
                    ray.push(entering);
                }
                for i in 0..self.m {
                    if w[i].abs() > TOL_PIV {
                        let j = self.basis[i];
                        if j < self.n {
                            ray.push(j);
                        }
                    }
                }
                ray.sort_unstable();
                ray.dedup();
                self.extract(LpStatus::Unbounded, ray)
            }
            PhaseEnd::IterationLimit | PhaseEnd::NumericalFailure => {
                self.failure(LpStatus::IterationLimit)
            }
        }
    }

    fn run_phase(&mut self, phase1: bool) -> PhaseEnd {
        loop {
            if self.iters >= self.opts.max_iters {
                return PhaseEnd::IterationLimit;
            }
            if self.since_refactor >= self.opts.refactor_every {
                if !self.refactor() {
                    return PhaseEnd::NumericalFailure;
                }
            }
            let y = self.basic_duals(phase1);
            let entering = match self.select_entering(&y, phase1) {
                Some(j) => j,
                None => return PhaseEnd::Optimal,
            };
            let w = self.ftran(entering);
            let leaving = match self.ratio_test(&w) {
                Some(r) => r,
                None => return PhaseEnd::Unbounded { entering, w },
            };
            self.pivot(leaving, entering, &w);
        }
    }

    /// y = c_B' B^-1 for the active phase costs.
    fn basic_duals(&self, phase1: bool) -> Vec<f64> {
        let costs = if phase1 { &self.cost1 } else { &self.cost2 };
        let mut y = vec![0.0; self.m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = costs[j];
            if c != 0.0 {
                let row = &self.binv[k * self.m..(k + 1) * self.m];
                for i in 0..self.m {
                    y[i] += c * row[i];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let costs = if phase1 { &self.cost1 } else { &self.cost2 };
        let mut d = costs[j];
        for &(i, v) in &self.cols[j] {
            d -= y[i] * v;
        }
        d
    }

    fn select_entering(&self, y: &[f64], phase1: bool) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..self.n_total {
            if self.in_basis[j] {
                continue;
            }
            // Artificials never re-enter.
            if matches!(self.kind[j], BasisVar::Artificial(_)) {
                continue;
            }
            let d = self.reduced_cost(j, y, phase1);
            if d < -TOL_OPT {
                if self.bland {
                    return Some(j);
                }
                match best {
                    Some((bd, _)) if bd <= d => {}
                    _ => best = Some((d, j)),
                }
            }
        }
        best.map(|(_, j)| j)
    }

    /// Standard minimum-ratio test, ties to the smallest basic variable
    /// index. Rows whose basic variable is an artificial sitting at zero
    /// get forced out when the entering column would push them positive.
    fn ratio_test(&self, w: &[f64]) -> Option<usize> {
        let mut best: Option<(f64, usize, usize)> = None; // (ratio, var, row)
        for i in 0..self.m {
            let j = self.basis[i];
            let art = matches!(self.kind[j], BasisVar::Artificial(_));
            let ratio = if w[i] > TOL_PIV {
                self.xb[i].max(0.0) / w[i]
            } else if art && w[i] < -TOL_PIV && self.xb[i] <= TOL_FEAS {
                0.0
            } else {
                continue;
            };
            let better = match best {
                None => true,
                Some((br, bv, _)) => {
                    ratio < br - 1e-12 || ((ratio - br).abs() <= 1e-12 && j < bv)
                }
            };
            if better {
                best = Some((ratio, j, i));
            }
        }
        best.map(|(_, _, r)| r)
    }

    fn pivot(&mut self, r: usize, entering: usize, w: &[f64]) {
        let m = self.m;
        let wr = w[r];
        debug_assert!(wr.abs() > TOL_PIV * 0.1);
        let step = self.xb[r].max(0.0) / wr;

        let inv_wr = 1.0 / wr;
        for t in 0..m {
            self.binv[r * m + t] *= inv_wr;
        }
        for i in 0..m {
            if i != r {
                let f = w[i];
                if f != 0.0 {
                    for t in 0..m {
                        self.binv[i * m + t] -= f * self.binv[r * m + t];
                    }
                }
            }
        }
        for i in 0..m {
            if i != r {
                self.xb[i] -= w[i] * step;
            }
        }
        self.xb[r] = step;

        self.in_basis[self.basis[r]] = false;
        self.in_basis[entering] = true;
        self.basis[r] = entering;
        self.iters += 1;
        self.since_refactor += 1;

        if step.abs() <= TOL_STEP {
            self.degen_run += 1;
            if self.degen_run >= DEGEN_RUN_TO_BLAND {
                self.bland = true;
            }
        } else {
            self.degen_run = 0;
            self.bland = false;
        }
    }

    /// After phase 1: pivot zero-valued artificials out wherever some real
    /// column can replace them. A row where none can is linearly dependent
    /// and keeps its artificial at zero (the phase-2 ratio-test guard stops
    /// it from rising).
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if !matches!(self.kind[self.basis[r]], BasisVar::Artificial(_)) {
                continue;
            }
            let mut replacement = None;
            'search: for j in 0..self.n_total {
                if self.in_basis[j] || matches!(self.kind[j], BasisVar::Artificial(_)) {
                    continue;
                }
                // w_r for column j is row r of B^-1 dotted with the column.
                let mut wr = 0.0;
                for &(i, v) in &self.cols[j] {
                    wr += self.binv[r * self.m + i] * v;
                }
                if wr.abs() > 1e-7 {
                    replacement = Some(j);
                    break 'search;
                }
            }
            if let Some(j) = replacement {
                let w = self.ftran(j);
                self.pivot(r, j, &w);
            }
        }
    }

    /// w = B^-1 a_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(r, v) in &self.cols[j] {
            if v != 0.0 {
                for i in 0..m {
                    w[i] += self.binv[i * m + r] * v;
                }
            }
        }
        w
    }

    /// Rebuild B^-1 from the basis columns and recompute x_B.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                bmat[i * m + k] = v;
            }
        }
        match dense::invert(m, &bmat) {
            Some(inv) => {
                self.binv = inv;
                for i in 0..m {
                    let mut s = 0.0;
                    for t in 0..m {
                        s += self.binv[i * m + t] * self.b[t];
                    }
                    self.xb[i] = s;
                }
                self.since_refactor = 0;
                true
            }
            None => {
                log::error!("basis became singular during refactorization");
                false
            }
        }
    }

    fn try_warm(&mut self, warm: &[BasisVar]) -> bool {
        if warm.len() != self.m {
            return false;
        }
        let mut basis = Vec::with_capacity(self.m);
        for &bv in warm {
            let j = match bv {
                BasisVar::Structural(j) if j < self.n => j,
                BasisVar::Slack(i) if i < self.m => match self.slack_of_row[i] {
                    Some(j) => j,
                    None => return false,
                },
                BasisVar::Artificial(i) if i < self.m => match self.art_of_row[i] {
                    Some(j) => j,
                    None => return false,
                },
                _ => return false,
            };
            basis.push(j);
        }
        let mut seen = vec![false; self.n_total];
        for &j in &basis {
            if seen[j] {
                return false;
            }
            seen[j] = true;
        }
        self.basis = basis;
        self.in_basis = vec![false; self.n_total];
        for &j in &self.basis {
            self.in_basis[j] = true;
        }
        if !self.refactor() {
            return false;
        }
        if self.xb.iter().any(|&x| x < -TOL_FEAS) {
            return false;
        }
        true
    }

    fn extract(mut self, status: LpStatus, ray: Vec<usize>) -> LpSolution {
        // Fresh factorization before reading anything off the basis.
        if !self.refactor() {
            return self.failure(LpStatus::IterationLimit);
        }
        let mut primal = vec![0.0; self.n];
        let mut objective = 0.0;
        for (k, &j) in self.basis.iter().enumerate() {
            let x = self.xb[k];
            objective += self.cost2[j] * x;
            if j < self.n {
                primal[j] = x;
            }
        }
        let y = self.basic_duals(false);
        let duals: Vec<f64> = (0..self.m).map(|i| y[i] * self.sign[i]).collect();
        let basis = self.basis.iter().map(|&j| self.kind[j]).collect();
        LpSolution {
            status,
            objective: if status == LpStatus::Optimal {
                objective
            } else {
                match status {
                    LpStatus::Unbounded => f64::NEG_INFINITY,
                    _ => objective,
                }
            },
            primal,
            duals,
            ray,
            basis,
            iterations: self.iters,
        }
    }

    fn failure(self, status: LpStatus) -> LpSolution {
        LpSolution {
            status,
            objective: f64::NAN,
            primal: vec![0.0; self.n],
            duals: vec![0.0; self.m],
            ray: Vec::new(),
            basis: self.basis.iter().map(|&j| self.kind[j]).collect(),
            iterations: self.iters,
        }
    }
}
