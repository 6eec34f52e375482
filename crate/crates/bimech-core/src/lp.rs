//! Exact rational linear programming: a dense two-phase simplex with Bland's
//! anti-cycling rule, plus maximum-weight bipartite matching on top of it.
//!
//! Everything here is exact; the solver returns true vertex optima and its
//! output is a deterministic function of the input.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::num::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<Rat>,
    pub rel: Relation,
    pub rhs: Rat,
}

/// A finite rational LP. `bounds[j] = (lower, upper)`; `None` means
/// unbounded on that side (variables are free by default).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<Rat>,
    pub sense: Sense,
    pub bounds: Vec<(Option<Rat>, Option<Rat>)>,
}

impl LinearProgram {
    pub fn new(n_vars: usize, sense: Sense, objective: Vec<Rat>) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::Structure(String::from("LP with no variables")));
        }
        if objective.len() != n_vars {
            return Err(Error::Structure(String::from(
                "objective length disagrees with n_vars",
            )));
        }
        Ok(LinearProgram {
            n_vars,
            constraints: Vec::new(),
            objective,
            sense,
            bounds: vec![(None, None); n_vars],
        })
    }

    pub fn push(&mut self, coeffs: Vec<Rat>, rel: Relation, rhs: Rat) -> Result<()> {
        if coeffs.len() != self.n_vars {
            return Err(Error::Structure(String::from(
                "constraint length disagrees with n_vars",
            )));
        }
        self.constraints.push(Constraint { coeffs, rel, rhs });
        Ok(())
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<Rat>, upper: Option<Rat>) {
        self.bounds[var] = (lower, upper);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpResult {
    Optimal { point: Vec<Rat>, value: Rat },
    Infeasible,
    Unbounded,
}

impl LpResult {
    pub fn optimal(self) -> Result<(Vec<Rat>, Rat)> {
        match self {
            LpResult::Optimal { point, value } => Ok((point, value)),
            LpResult::Infeasible => Err(Error::Infeasible(String::from("LP infeasible"))),
            LpResult::Unbounded => Err(Error::Infeasible(String::from("LP unbounded"))),
        }
    }
}

// How an original variable maps onto the nonnegative solver variables.
enum VarMap {
    // x = lower + y
    Shifted(Rat, usize),
    // x = upper - y
    Mirrored(Rat, usize),
    // x = y_plus - y_minus
    Split(usize, usize),
}

/// Solves the LP exactly. Deterministic: Bland's rule everywhere.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpResult> {
    if lp.n_vars == 0 {
        return Err(Error::Structure(String::from("LP with no variables")));
    }

    // Rewrite onto nonnegative variables.
    let mut maps = Vec::with_capacity(lp.n_vars);
    let mut n = 0usize;
    let mut extra_rows: Vec<Constraint> = Vec::new();
    for (j, (lo, hi)) in lp.bounds.iter().enumerate() {
        match (lo, hi) {
            (Some(l), Some(h)) => {
                if h < l {
                    return Ok(LpResult::Infeasible);
                }
                maps.push(VarMap::Shifted(l.clone(), n));
                // y <= h - l, expressed on the original variable below.
                let mut coeffs = vec![Rat::zero(); lp.n_vars];
                coeffs[j] = Rat::one();
                extra_rows.push(Constraint {
                    coeffs,
                    rel: Relation::Le,
                    rhs: h.clone(),
                });
                n += 1;
            }
            (Some(l), None) => {
                maps.push(VarMap::Shifted(l.clone(), n));
                n += 1;
            }
            (None, Some(h)) => {
                maps.push(VarMap::Mirrored(h.clone(), n));
                n += 1;
            }
            (None, None) => {
                maps.push(VarMap::Split(n, n + 1));
                n += 2;
            }
        }
    }

    // Expand a row over original variables into solver variables, folding the
    // constant offsets of shifted/mirrored variables into `shift`.
    let expand = |coeffs: &[Rat]| -> (Vec<Rat>, Rat) {
        let mut out = vec![Rat::zero(); n];
        let mut shift = Rat::zero();
        for (j, cj) in coeffs.iter().enumerate() {
            if cj.is_zero() {
                continue;
            }
            match &maps[j] {
                VarMap::Shifted(l, y) => {
                    out[*y] += cj;
                    shift += cj * l;
                }
                VarMap::Mirrored(h, y) => {
                    out[*y] -= cj;
                    shift += cj * h;
                }
                VarMap::Split(yp, ym) => {
                    out[*yp] += cj;
                    out[*ym] -= cj;
                }
            }
        }
        (out, shift)
    };

    // Rows in solver space, all with nonnegative rhs; slack/artificial columns
    // come after the n structural columns.
    let all_rows: Vec<&Constraint> = lp.constraints.iter().chain(extra_rows.iter()).collect();
    let n_rows = all_rows.len();
    // Sign flips swap Le and Ge but never create or remove a slack column.
    let slack_cols = all_rows.iter().filter(|r| r.rel != Relation::Eq).count();
    let total = n + slack_cols + n_rows; // worst case one artificial per row

    let mut tableau: Vec<Vec<Rat>> = Vec::with_capacity(n_rows);
    let mut basis: Vec<usize> = Vec::with_capacity(n_rows);
    let mut artificials: Vec<usize> = Vec::new();
    let mut next_slack = n;
    let mut next_art = n + slack_cols;
    for row in &all_rows {
        let (mut coeffs, shift) = expand(&row.coeffs);
        let mut rhs = &row.rhs - shift;
        let mut rel = row.rel;
        if rhs.is_negative() {
            rhs = -rhs;
            for c in coeffs.iter_mut() {
                *c = -c.clone();
            }
            rel = flip(rel, true);
        }
        let mut trow = vec![Rat::zero(); total + 1];
        trow[..n].clone_from_slice(&coeffs);
        trow[total] = rhs;
        match rel {
            Relation::Le => {
                trow[next_slack] = Rat::one();
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                trow[next_slack] = -Rat::one();
                next_slack += 1;
                trow[next_art] = Rat::one();
                basis.push(next_art);
                artificials.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                trow[next_art] = Rat::one();
                basis.push(next_art);
                artificials.push(next_art);
                next_art += 1;
            }
        }
        tableau.push(trow);
    }

    // Phase 1: minimize the sum of artificial variables.
    if !artificials.is_empty() {
        let mut obj = vec![Rat::zero(); total + 1];
        for &a in &artificials {
            obj[a] = Rat::one();
        }
        price_out(&mut obj, &tableau, &basis, total);
        if run_simplex(&mut tableau, &mut basis, &mut obj, total).is_none() {
            // Phase-1 objective is bounded below by 0; unbounded cannot occur.
            return Err(Error::Invariant(String::from("phase-1 simplex unbounded")));
        }
        if obj[total].is_negative() {
            // obj[total] holds -(current phase-1 value).
            return Ok(LpResult::Infeasible);
        }
        // Drive remaining artificials out of the basis.
        let is_art = |col: usize| col >= n + slack_cols;
        let mut row_idx = 0;
        while row_idx < tableau.len() {
            if is_art(basis[row_idx]) {
                let pivot_col = (0..n + slack_cols)
                    .find(|&col| !tableau[row_idx][col].is_zero());
                match pivot_col {
                    Some(col) => pivot(&mut tableau, row_idx, col, total),
                    None => {
                        // Redundant row.
                        tableau.remove(row_idx);
                        basis.remove(row_idx);
                        continue;
                    }
                }
                basis[row_idx] = pivot_col.unwrap();
            }
            row_idx += 1;
        }
        // Forbid artificials from re-entering by zeroing their columns.
        for trow in tableau.iter_mut() {
            for &a in &artificials {
                trow[a] = Rat::zero();
            }
        }
    }

    // Phase 2: the real objective, as a minimization over solver variables.
    let (obj_expanded, obj_shift) = expand(&lp.objective);
    let negate = lp.sense == Sense::Max;
    let mut obj = vec![Rat::zero(); total + 1];
    for (j, c) in obj_expanded.into_iter().enumerate() {
        obj[j] = if negate { -c } else { c };
    }
    price_out(&mut obj, &tableau, &basis, total);
    if run_simplex(&mut tableau, &mut basis, &mut obj, total).is_none() {
        return Ok(LpResult::Unbounded);
    }

    // Read the solution back in original coordinates.
    let mut y = vec![Rat::zero(); total];
    for (r, &b) in basis.iter().enumerate() {
        y[b] = tableau[r][total].clone();
    }
    let point: Vec<Rat> = maps
        .iter()
        .map(|m| match m {
            VarMap::Shifted(l, idx) => l + &y[*idx],
            VarMap::Mirrored(h, idx) => h - &y[*idx],
            VarMap::Split(p, mns) => &y[*p] - &y[*mns],
        })
        .collect();
    let solver_value = -obj[total].clone();
    let value = if negate { -solver_value } else { solver_value } + obj_shift;
    Ok(LpResult::Optimal { point, value })
}

fn flip(rel: Relation, negated: bool) -> Relation {
    if !negated {
        return rel;
    }
    match rel {
        Relation::Le => Relation::Ge,
        Relation::Ge => Relation::Le,
        Relation::Eq => Relation::Eq,
    }
}

// Subtract multiples of basic rows so every basic column has reduced cost 0.
fn price_out(obj: &mut [Rat], tableau: &[Vec<Rat>], basis: &[usize], total: usize) {
    for (r, &b) in basis.iter().enumerate() {
        if obj[b].is_zero() {
            continue;
        }
        let factor = obj[b].clone();
        for col in 0..=total {
            let delta = &factor * &tableau[r][col];
            obj[col] -= delta;
        }
    }
}

fn pivot(tableau: &mut [Vec<Rat>], row: usize, col: usize, total: usize) {
    let inv = tableau[row][col].recip();
    for v in tableau[row].iter_mut() {
        *v = &*v * &inv;
    }
    for r in 0..tableau.len() {
        if r == row || tableau[r][col].is_zero() {
            continue;
        }
        let factor = tableau[r][col].clone();
        for c in 0..=total {
            let delta = &factor * &tableau[row][c];
            tableau[r][c] -= delta;
        }
    }
}

// Minimizing simplex with Bland's rule. The objective row holds reduced costs
// with -(objective value) at index `total`. Returns None when unbounded.
fn run_simplex(
    tableau: &mut Vec<Vec<Rat>>,
    basis: &mut [usize],
    obj: &mut [Rat],
    total: usize,
) -> Option<()> {
    loop {
        let entering = (0..total).find(|&j| obj[j].is_negative());
        let Some(col) = entering else {
            return Some(());
        };
        // Minimum ratio; ties by smallest basic variable index.
        let mut best: Option<(usize, Rat)> = None;
        for (r, trow) in tableau.iter().enumerate() {
            if !trow[col].is_positive() {
                continue;
            }
            let ratio = &trow[total] / &trow[col];
            let better = match &best {
                None => true,
                Some((br, bratio)) => {
                    ratio < *bratio || (ratio == *bratio && basis[r] < basis[*br])
                }
            };
            if better {
                best = Some((r, ratio));
            }
        }
        let (row, _) = best?;
        pivot(tableau, row, col, total);
        let factor = obj[col].clone();
        if !factor.is_zero() {
            for c in 0..=total {
                let delta = &factor * &tableau[row][c];
                obj[c] -= delta;
            }
        }
        basis[row] = col;
    }
}

/// A matched set of disjoint `(left, right)` pairs with its total weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub weight: Rat,
}

/// Maximum-weight bipartite matching. `weights[l][r] = None` forbids the
/// edge. Among maximum-weight matchings, returns the one that greedily
/// prefers edges in lexicographic `(l, r)` order.
pub fn max_weight_bipartite_matching(weights: &[Vec<Option<Rat>>]) -> Result<Matching> {
    let nl = weights.len();
    if nl == 0 || weights[0].is_empty() {
        return Err(Error::Structure(String::from("empty matching problem")));
    }
    let nr = weights[0].len();
    if weights.iter().any(|row| row.len() != nr) {
        return Err(Error::Structure(String::from("ragged weight matrix")));
    }

    let solve_with_fixed = |fixed: &[(usize, usize)]| -> Result<Option<Rat>> {
        // One variable per allowed edge; fixed edges get x = 1.
        let mut idx = vec![vec![None; nr]; nl];
        let mut edges = Vec::new();
        for (l, row) in weights.iter().enumerate() {
            for (r, w) in row.iter().enumerate() {
                if let Some(w) = w {
                    idx[l][r] = Some(edges.len());
                    edges.push((l, r, w.clone()));
                }
            }
        }
        if edges.is_empty() {
            return Ok(Some(Rat::zero()));
        }
        let obj = edges.iter().map(|(_, _, w)| w.clone()).collect();
        let mut lp = LinearProgram::new(edges.len(), Sense::Max, obj)?;
        for e in 0..edges.len() {
            lp.set_bounds(e, Some(Rat::zero()), Some(Rat::one()));
        }
        for l in 0..nl {
            let mut coeffs = vec![Rat::zero(); edges.len()];
            for r in 0..nr {
                if let Some(e) = idx[l][r] {
                    coeffs[e] = Rat::one();
                }
            }
            lp.push(coeffs, Relation::Le, Rat::one())?;
        }
        for r in 0..nr {
            let mut coeffs = vec![Rat::zero(); edges.len()];
            for l in 0..nl {
                if let Some(e) = idx[l][r] {
                    coeffs[e] = Rat::one();
                }
            }
            lp.push(coeffs, Relation::Le, Rat::one())?;
        }
        for &(l, r) in fixed {
            let e = idx[l][r].expect("fixed edge must be allowed");
            lp.set_bounds(e, Some(Rat::one()), Some(Rat::one()));
        }
        match lp_solve(&lp)? {
            LpResult::Optimal { value, .. } => Ok(Some(value)),
            LpResult::Infeasible => Ok(None),
            LpResult::Unbounded => Err(Error::Invariant(String::from(
                "bounded matching LP reported unbounded",
            ))),
        }
    };

    let opt = solve_with_fixed(&[])?.expect("unconstrained matching LP is feasible");

    // Fix edges one at a time in lexicographic order, keeping a fix only when
    // it preserves the optimum. The bipartite assignment polytope is integral,
    // so the fully fixed optimum is an actual matching.
    let mut fixed: Vec<(usize, usize)> = Vec::new();
    let mut used_l = vec![false; nl];
    let mut used_r = vec![false; nr];
    for l in 0..nl {
        for r in 0..nr {
            if weights[l][r].is_none() || used_l[l] || used_r[r] {
                continue;
            }
            fixed.push((l, r));
            match solve_with_fixed(&fixed)? {
                Some(v) if v == opt => {
                    used_l[l] = true;
                    used_r[r] = true;
                }
                _ => {
                    fixed.pop();
                }
            }
        }
    }
    let weight = fixed
        .iter()
        .fold(Rat::zero(), |acc, &(l, r)| acc + weights[l][r].as_ref().unwrap());
    // Dropping zero-weight unfixed edges can only matter for the pair list,
    // never the weight; `fixed` is already maximal among optimum-preserving
    // lexicographic choices.
    debug_assert_eq!(weight, opt);
    Ok(Matching {
        pairs: fixed,
        weight,
    })
}
