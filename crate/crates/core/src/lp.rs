//! Dense two-phase primal simplex with dual extraction.
//!
//! Problems are stated in a general form (bounded variables, `<=`, `>=` and
//! `=` rows) and converted internally to `min c x, A x = b, x >= 0`.
//! Pricing is Dantzig's rule with lowest-index tie-breaks; after a run of
//! degenerate pivots the solver switches to Bland's rule until the objective
//! moves again, so the pivot sequence is deterministic and cannot cycle.

use std::fmt;

use crate::scalar::Scalar;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK_LIMIT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub sense: Sense,
    pub rhs: T,
}

/// `min objective . x + offset` over bounded variables and linear rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub offset: T,
    pub lower: Vec<Option<T>>,
    pub upper: Vec<Option<T>>,
    pub constraints: Vec<Constraint<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Sensitivity of the optimal objective to each row's right-hand side.
    /// Nonpositive on binding `<=` rows, nonnegative on binding `>=` rows.
    pub duals: Vec<T>,
    /// `c_j - A_j^T y` for every variable; the multiplier of whichever bound
    /// is active (nonnegative at a lower bound, nonpositive at an upper one).
    pub reduced_costs: Vec<T>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpError {
    /// Phase one ended with positive infeasibility. `rows` lists the
    /// constraints whose artificial variables stayed positive.
    Infeasible { rows: Vec<usize> },
    Unbounded,
    IterationLimit,
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Infeasible { rows } => write!(f, "infeasible (rows {rows:?} cannot be satisfied)"),
            LpError::Unbounded => write!(f, "unbounded objective"),
            LpError::IterationLimit => write!(f, "iteration limit reached"),
        }
    }
}

impl std::error::Error for LpError {}

impl<T: Scalar> Default for LinearProgram<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new() -> Self {
        Self { objective: vec![], offset: T::zero(), lower: vec![], upper: vec![], constraints: vec![] }
    }

    pub fn add_var(&mut self, cost: T, lower: Option<T>, upper: Option<T>) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, T)>, sense: Sense, rhs: T) -> usize {
        self.constraints.push(Constraint { coeffs, sense, rhs });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).fold(self.offset.clone(), |acc, (c, v)| acc + c.clone() * v.clone())
    }

    /// Row activity `A_i x`.
    pub fn activity(&self, row: usize, x: &[T]) -> T {
        self.constraints[row].coeffs.iter().fold(T::zero(), |acc, (j, a)| acc + a.clone() * x[*j].clone())
    }

    pub fn solve(&self) -> Result<LpSolution<T>, LpError> {
        let standard = StandardForm::build(self)?;
        let mut tableau = Tableau::new(&standard);
        let iterations = tableau.run()?;
        Ok(standard.recover(self, &tableau, iterations))
    }
}

/// How an original variable maps onto nonnegative standard-form columns.
#[derive(Debug, Clone)]
enum VarMap<T> {
    Fixed(T),
    /// `x = shift + col`
    Shift { col: usize, shift: T },
    /// `x = top - col`
    Mirror { col: usize, top: T },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

struct StandardRow<T> {
    coeffs: Vec<(usize, T)>,
    sense: Sense,
    rhs: T,
}

struct StandardForm<T> {
    maps: Vec<VarMap<T>>,
    structural: usize,
    costs: Vec<T>,
    rows: Vec<StandardRow<T>>,
}

impl<T: Scalar> StandardForm<T> {
    fn build(lp: &LinearProgram<T>) -> Result<Self, LpError> {
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut next = 0usize;
        let mut bound_rows = vec![];
        for j in 0..lp.num_vars() {
            let map = match (&lp.lower[j], &lp.upper[j]) {
                (Some(l), Some(u)) if u < l => {
                    return Err(LpError::Infeasible { rows: vec![] });
                }
                (Some(l), Some(u)) if (u.clone() - l.clone()).is_zero() => VarMap::Fixed(l.clone()),
                (Some(l), upper) => {
                    let col = next;
                    next += 1;
                    if let Some(u) = upper {
                        bound_rows.push(StandardRow {
                            coeffs: vec![(col, T::one())],
                            sense: Sense::Le,
                            rhs: u.clone() - l.clone(),
                        });
                    }
                    VarMap::Shift { col, shift: l.clone() }
                }
                (None, Some(u)) => {
                    next += 1;
                    VarMap::Mirror { col: next - 1, top: u.clone() }
                }
                (None, None) => {
                    next += 2;
                    VarMap::Split { pos: next - 2, neg: next - 1 }
                }
            };
            maps.push(map);
        }

        // Constant terms of the substitution only shift the objective, which
        // is recomputed from the recovered point.
        let mut costs = vec![T::zero(); next];
        for (j, c) in lp.objective.iter().enumerate() {
            match &maps[j] {
                VarMap::Fixed(_) => {}
                VarMap::Shift { col, .. } => costs[*col] = c.clone(),
                VarMap::Mirror { col, .. } => costs[*col] = -c.clone(),
                VarMap::Split { pos, neg } => {
                    costs[*pos] = c.clone();
                    costs[*neg] = -c.clone();
                }
            }
        }

        let mut rows = Vec::with_capacity(lp.num_constraints() + bound_rows.len());
        for con in &lp.constraints {
            let mut dense: Vec<(usize, T)> = vec![];
            let mut rhs = con.rhs.clone();
            for (j, a) in &con.coeffs {
                match &maps[*j] {
                    VarMap::Fixed(v) => rhs = rhs - a.clone() * v.clone(),
                    VarMap::Shift { col, shift } => {
                        dense.push((*col, a.clone()));
                        rhs = rhs - a.clone() * shift.clone();
                    }
                    VarMap::Mirror { col, top } => {
                        dense.push((*col, -a.clone()));
                        rhs = rhs - a.clone() * top.clone();
                    }
                    VarMap::Split { pos, neg } => {
                        dense.push((*pos, a.clone()));
                        dense.push((*neg, -a.clone()));
                    }
                }
            }
            rows.push(StandardRow { coeffs: dense, sense: con.sense, rhs });
        }
        rows.extend(bound_rows);
        Ok(Self { maps, structural: next, costs, rows })
    }

    fn recover(&self, lp: &LinearProgram<T>, tableau: &Tableau<T>, iterations: usize) -> LpSolution<T> {
        let std_x = tableau.primal();
        let x: Vec<T> = self
            .maps
            .iter()
            .map(|m| match m {
                VarMap::Fixed(v) => v.clone(),
                VarMap::Shift { col, shift } => shift.clone() + std_x[*col].clone(),
                VarMap::Mirror { col, top } => top.clone() - std_x[*col].clone(),
                VarMap::Split { pos, neg } => std_x[*pos].clone() - std_x[*neg].clone(),
            })
            .collect();

        let row_duals = tableau.duals();
        let duals: Vec<T> = row_duals[..lp.num_constraints()].to_vec();
        let mut reduced_costs = lp.objective.clone();
        for (i, con) in lp.constraints.iter().enumerate() {
            for (j, a) in &con.coeffs {
                reduced_costs[*j] = reduced_costs[*j].clone() - a.clone() * duals[i].clone();
            }
        }
        let objective = lp.evaluate(&x);
        LpSolution { x, objective, duals, reduced_costs, iterations }
    }
}

struct Tableau<T> {
    /// `rows x (cols + 1)`; the last entry of each row is the basic value.
    rows: Vec<Vec<T>>,
    /// Phase-one and phase-two reduced-cost rows, same layout.
    phase1: Vec<T>,
    phase2: Vec<T>,
    basis: Vec<usize>,
    cols: usize,
    first_artificial: usize,
    /// Column forming the initial identity for each row.
    unit_col: Vec<usize>,
    /// `+1` or `-1`: the sign applied to each row to make its rhs nonnegative.
    row_sign: Vec<T>,
    tolerance: T,
}

impl<T: Scalar> Tableau<T> {
    fn new(sf: &StandardForm<T>) -> Self {
        let m = sf.rows.len();
        let slack_count = sf.rows.iter().filter(|r| r.sense != Sense::Eq).count();
        let first_slack = sf.structural;
        let first_artificial = first_slack + slack_count;

        let mut row_sign = Vec::with_capacity(m);
        let mut needs_artificial = Vec::with_capacity(m);
        let mut slack_of = Vec::with_capacity(m);
        let mut next_slack = first_slack;
        for row in &sf.rows {
            let sign = if row.rhs < T::zero() { -T::one() } else { T::one() };
            let slack = match row.sense {
                Sense::Eq => None,
                Sense::Le => Some((next_slack, T::one())),
                Sense::Ge => Some((next_slack, -T::one())),
            };
            if slack.is_some() {
                next_slack += 1;
            }
            // Slack is usable as the starting basic variable when its signed
            // coefficient is +1.
            let usable = matches!(&slack, Some((_, c)) if (c.clone() * sign.clone()).is_one());
            needs_artificial.push(!usable);
            slack_of.push(slack);
            row_sign.push(sign);
        }
        let artificial_count = needs_artificial.iter().filter(|b| **b).count();
        let cols = first_artificial + artificial_count;

        let mut rows = Vec::with_capacity(m);
        let mut unit_col = Vec::with_capacity(m);
        let mut next_artificial = first_artificial;
        let mut max_rhs = T::one();
        for (i, row) in sf.rows.iter().enumerate() {
            let sign = row_sign[i].clone();
            let mut dense = vec![T::zero(); cols + 1];
            for (j, a) in &row.coeffs {
                dense[*j] = dense[*j].clone() + a.clone() * sign.clone();
            }
            if let Some((s, c)) = &slack_of[i] {
                dense[*s] = c.clone() * sign.clone();
            }
            if needs_artificial[i] {
                dense[next_artificial] = T::one();
                unit_col.push(next_artificial);
                next_artificial += 1;
            } else {
                unit_col.push(slack_of[i].as_ref().expect("slack").0);
            }
            dense[cols] = row.rhs.clone() * sign;
            max_rhs = max_rhs.max_of(dense[cols].abs());
            rows.push(dense);
        }

        let basis = unit_col.clone();
        let mut phase1 = vec![T::zero(); cols + 1];
        for (i, row) in rows.iter().enumerate() {
            if basis[i] >= first_artificial {
                for (k, v) in row.iter().enumerate() {
                    if k < first_artificial || k == cols {
                        phase1[k] = phase1[k].clone() - v.clone();
                    }
                }
            }
        }
        let mut phase2 = vec![T::zero(); cols + 1];
        phase2[..sf.structural].clone_from_slice(&sf.costs);
        // Value slots hold the negated objective of each phase.
        let tolerance = T::epsilon() * max_rhs;

        Self { rows, phase1, phase2, basis, cols, first_artificial, unit_col, row_sign, tolerance }
    }

    fn iteration_limit(&self) -> usize {
        50_000 + 50 * (self.rows.len() + self.cols)
    }

    fn run(&mut self) -> Result<usize, LpError> {
        let mut iterations = 0;
        if self.basis.iter().any(|&b| b >= self.first_artificial) {
            iterations += self.optimize(true)?;
            // Remaining phase-one objective is -phase1[cols].
            let infeasibility = -self.phase1[self.cols].clone();
            if infeasibility > self.tolerance {
                let rows = (0..self.rows.len())
                    .filter(|&i| self.basis[i] >= self.first_artificial && self.rows[i][self.cols] > self.tolerance)
                    .collect();
                return Err(LpError::Infeasible { rows });
            }
            self.drive_out_artificials();
        }
        iterations += self.optimize(false)?;
        Ok(iterations)
    }

    fn optimize(&mut self, phase_one: bool) -> Result<usize, LpError> {
        let eps = T::epsilon();
        let mut iterations = 0;
        let mut degenerate_streak = 0;
        loop {
            let bland = degenerate_streak >= DEGENERATE_STREAK_LIMIT;
            let costs = if phase_one { &self.phase1 } else { &self.phase2 };
            let mut entering: Option<usize> = None;
            for (j, d) in costs[..self.first_artificial].iter().enumerate() {
                if *d < -eps.clone() {
                    match entering {
                        None => entering = Some(j),
                        Some(e) if !bland && *d < costs[e] => entering = Some(j),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some(col) = entering else {
                return Ok(iterations);
            };

            let mut leaving: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = &row[col];
                if *a > eps {
                    let ratio = row[self.cols].clone() / a.clone();
                    let better = match &leaving {
                        None => true,
                        Some((r, best)) => {
                            ratio < *best || (ratio == *best && self.basis[i] < self.basis[*r])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, ratio)) = leaving else {
                return Err(LpError::Unbounded);
            };
            if ratio.is_negligible() {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(row, col);
            iterations += 1;
            if iterations > self.iteration_limit() {
                return Err(LpError::IterationLimit);
            }
        }
    }

    /// Replaces artificial variables left basic at zero by structural or
    /// slack columns. Rows with no usable column are redundant and keep
    /// their artificial at zero.
    fn drive_out_artificials(&mut self) {
        for i in 0..self.rows.len() {
            if self.basis[i] < self.first_artificial {
                continue;
            }
            let mut best: Option<usize> = None;
            for j in 0..self.first_artificial {
                let a = self.rows[i][j].abs();
                if a > T::epsilon() && best.map_or(true, |b| a > self.rows[i][b].abs()) {
                    best = Some(j);
                }
            }
            if let Some(col) = best {
                self.pivot(i, col);
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols + 1;
        let inv = T::one() / self.rows[row][col].clone();
        let pivot_row: Vec<T> = self.rows[row].iter().map(|v| v.clone() * inv.clone()).collect();
        let nonzero: Vec<usize> = (0..width).filter(|&k| !pivot_row[k].is_zero()).collect();

        let eliminate = |target: &mut Vec<T>| {
            let factor = target[col].clone();
            if factor.is_zero() {
                return;
            }
            for &k in &nonzero {
                target[k] = target[k].clone() - factor.clone() * pivot_row[k].clone();
            }
            target[col] = T::zero();
        };
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i != row {
                eliminate(r);
            }
        }
        eliminate(&mut self.phase1);
        eliminate(&mut self.phase2);
        let mut pivot_row = pivot_row;
        pivot_row[col] = T::one();
        self.rows[row] = pivot_row;
        self.basis[row] = col;
    }

    fn primal(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.cols];
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.rows[i][self.cols].clone();
        }
        x
    }

    /// Row duals of the general-form rows, in standard-form row order.
    fn duals(&self) -> Vec<T> {
        self.unit_col
            .iter()
            .zip(&self.row_sign)
            .map(|(&col, sign)| -(self.phase2[col].clone()) * sign.clone())
            .collect()
    }
}
