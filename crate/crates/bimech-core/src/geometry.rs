//! Convex geometry engine: the ellipsoid method over exact rationals with
//! controlled-precision truncation, a separation-oracle-like wrapper around
//! bi-criterion optimization algorithms, convex decomposition of accepted
//! points, and binary-search optimization on top of it all.
//!
//! The wrapper (here `wso`) turns an algorithm `A` with the guarantee
//! `(beta * A(w)_S, A(w)_{-S}) . w <= alpha * min_{x in P} x . w` (or the
//! mirrored form for maximization) into an oracle that either rejects a
//! query point with a halfspace provably containing `alpha * P`, or accepts
//! it together with an explicit convex combination of logged `A` outputs
//! reproducing the point.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lp::{lp_solve, LinearProgram, Relation, Sense};
use crate::num::{dot, pow2, sqrt_floor, truncate_bits, Rat};

/// The set `{x : normal . x >= offset}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Halfspace {
    pub normal: Vec<Rat>,
    pub offset: Rat,
}

impl Halfspace {
    pub fn contains(&self, x: &[Rat]) -> bool {
        dot(&self.normal, x) >= self.offset
    }
}

#[derive(Debug, Clone)]
pub enum OracleReply {
    Accept,
    Cut(Halfspace),
}

#[derive(Debug, Clone)]
pub struct EllipsoidConfig {
    /// Iteration cap; "infeasible" is declared after this many cuts.
    pub max_iters: usize,
    /// Separation slack used by the oracle wrapper.
    pub delta: Rat,
    /// Radius of the initial origin-centered ball.
    pub radius: Rat,
    /// Working precision: state is rounded to the 2^-precision_bits grid.
    pub precision_bits: u32,
    /// Hard cap on algorithm queries per `wso` call.
    pub max_alg_queries: usize,
    /// Residual below which a convex decomposition counts as exact.
    pub decomp_tol: Rat,
}

impl EllipsoidConfig {
    /// Engineering defaults driven by the dimension, a bit-complexity bound
    /// `l` on query points, and the bounding radius.
    pub fn for_problem(dim: usize, l: u32, radius: Rat) -> Self {
        let log_r = {
            let mut e = 0u32;
            let mut p = Rat::one();
            while p < radius {
                p = p * Rat::from_integer(2.into());
                e += 1;
            }
            e
        };
        let d = dim.max(1);
        EllipsoidConfig {
            max_iters: 8 * d * (d + 1) * (l as usize + log_r as usize + 20),
            delta: pow2(-((l + 20) as i32)),
            radius,
            precision_bits: 256,
            max_alg_queries: 200_000,
            decomp_tol: pow2(-64),
        }
    }
}

/// One logged oracle query.
#[derive(Debug, Clone)]
pub struct QueryRecord {
    pub point: Vec<Rat>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(Vec<Rat>),
    Infeasible,
}

/// Central-cut ellipsoid method from the ball of radius `cfg.radius`.
/// Every oracle query is logged. State is truncated to the precision grid
/// each round, with a tiny diagonal inflation to keep the shape matrix
/// positive definite; the inflation only grows the ellipsoid, so containment
/// of the feasible region is preserved.
pub fn ellipsoid_feasibility(
    oracle: &mut dyn FnMut(&[Rat]) -> Result<OracleReply>,
    dim: usize,
    cfg: &EllipsoidConfig,
) -> Result<(Feasibility, Vec<QueryRecord>)> {
    if dim == 0 {
        return Err(Error::Structure(String::from("zero-dimensional search")));
    }
    let mut log = Vec::new();
    if dim == 1 {
        return interval_search(oracle, cfg, &mut log).map(|f| (f, log));
    }
    let d = dim;
    let prec = cfg.precision_bits;
    let jitter = pow2(-(prec as i32)) * Rat::from_integer((d as i64).into());
    let mut center = vec![Rat::zero(); d];
    // Shape matrix of {z: (z-c)^T A^{-1} (z-c) <= 1}.
    let mut shape: Vec<Vec<Rat>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if i == j {
                        &cfg.radius * &cfg.radius
                    } else {
                        Rat::zero()
                    }
                })
                .collect()
        })
        .collect();

    for _ in 0..cfg.max_iters {
        let reply = oracle(&center)?;
        match reply {
            OracleReply::Accept => {
                log.push(QueryRecord {
                    point: center.clone(),
                    accepted: true,
                });
                return Ok((Feasibility::Feasible(center), log));
            }
            OracleReply::Cut(h) => {
                log.push(QueryRecord {
                    point: center.clone(),
                    accepted: false,
                });
                // Keep the side {z: a.z >= a.center}; the cut normal points
                // into the feasible region.
                let a = &h.normal;
                if a.iter().all(|v| v.is_zero()) {
                    return Err(Error::Domain(String::from("zero cut normal")));
                }
                let g: Vec<Rat> = (0..d).map(|i| dot(&shape[i], a)).collect();
                let gamma_sq = dot(a, &g);
                if !gamma_sq.is_positive() {
                    return Err(Error::Precision(String::from(
                        "ellipsoid shape matrix lost positive definiteness",
                    )));
                }
                let gamma = sqrt_floor(&gamma_sq, prec);
                if gamma.is_zero() {
                    return Err(Error::Precision(String::from(
                        "cut direction below working precision",
                    )));
                }
                let d_rat = Rat::from_integer((d as i64).into());
                let step = Rat::one() / (&d_rat + Rat::one());
                for i in 0..d {
                    let delta = &step * &g[i] / &gamma;
                    center[i] = truncate_bits(&(&center[i] + delta), prec);
                }
                let scale = (&d_rat * &d_rat) / (&d_rat * &d_rat - Rat::one());
                let two_over = Rat::from_integer(2.into()) / (&d_rat + Rat::one());
                for i in 0..d {
                    for j in 0..d {
                        let v = (&shape[i][j] - &two_over * &g[i] * &g[j] / &gamma_sq)
                            * &scale;
                        shape[i][j] = truncate_bits(&v, prec);
                    }
                }
                // Restore exact symmetry lost to rounding and re-inflate.
                for i in 0..d {
                    for j in 0..i {
                        let avg = (&shape[i][j] + &shape[j][i]) / Rat::from_integer(2.into());
                        shape[i][j] = avg.clone();
                        shape[j][i] = avg;
                    }
                    shape[i][i] += &jitter;
                }
            }
        }
    }
    Ok((Feasibility::Infeasible, log))
}

// One-dimensional case: exact interval shrinking on the cut bounds.
fn interval_search(
    oracle: &mut dyn FnMut(&[Rat]) -> Result<OracleReply>,
    cfg: &EllipsoidConfig,
    log: &mut Vec<QueryRecord>,
) -> Result<Feasibility> {
    let mut lo = -cfg.radius.clone();
    let mut hi = cfg.radius.clone();
    for _ in 0..cfg.max_iters {
        if lo > hi {
            return Ok(Feasibility::Infeasible);
        }
        let mid = truncate_bits(&((&lo + &hi) / Rat::from_integer(2.into())), cfg.precision_bits);
        let point = vec![mid.clone()];
        match oracle(&point)? {
            OracleReply::Accept => {
                log.push(QueryRecord {
                    point,
                    accepted: true,
                });
                return Ok(Feasibility::Feasible(vec![mid]));
            }
            OracleReply::Cut(h) => {
                log.push(QueryRecord {
                    point,
                    accepted: false,
                });
                let a = &h.normal[0];
                if a.is_zero() {
                    return Err(Error::Domain(String::from("zero cut normal")));
                }
                let bound = &h.offset / a;
                if a.is_positive() {
                    // Feasible side x >= bound.
                    if bound > lo {
                        lo = bound;
                    }
                    // The center itself is infeasible; exclude it too.
                    if mid >= lo {
                        lo = mid + pow2(-(cfg.precision_bits as i32));
                    }
                } else {
                    if bound < hi {
                        hi = bound;
                    }
                    if mid <= hi {
                        hi = mid - pow2(-(cfg.precision_bits as i32));
                    }
                }
            }
        }
    }
    Ok(Feasibility::Infeasible)
}

/// Contract of a bi-criterion optimization algorithm over an implicit
/// polytope `P`: for every direction `w` in the unit cube,
/// minimization: `(beta*A(w)_S, A(w)_{-S}) . w <= alpha * min_{x in P} x.w`;
/// maximization: same with `>=` and `max`.
#[derive(Debug, Clone)]
pub struct AlgSpec {
    pub alpha: Rat,
    pub beta: Rat,
    /// Indices of the coordinates rescaled by `beta`.
    pub scaled: Vec<usize>,
    pub maximize: bool,
}

pub trait OptimizationAlgorithm {
    fn spec(&self) -> &AlgSpec;
    /// Raw output `A(w)`; `w` lies in the unit cube.
    fn evaluate(&mut self, w: &[Rat]) -> Result<Vec<Rat>>;
}

/// `A^beta_S(w)`: raw output with the designated coordinates scaled.
fn scaled_eval(
    alg: &mut dyn OptimizationAlgorithm,
    w: &[Rat],
    queries: &mut usize,
    cap: usize,
) -> Result<Vec<Rat>> {
    *queries += 1;
    if *queries > cap {
        return Err(Error::Nonconvergence(format!(
            "algorithm query cap {cap} exceeded"
        )));
    }
    let mut out = alg.evaluate(w)?;
    let spec = alg.spec().clone();
    for &i in &spec.scaled {
        out[i] = &out[i] * &spec.beta;
    }
    Ok(out)
}

/// Successful decomposition of an accepted point.
#[derive(Debug, Clone)]
pub struct AcceptData {
    pub directions: Vec<Vec<Rat>>,
    pub points: Vec<Vec<Rat>>,
    pub weights: Vec<Rat>,
    pub residual: Rat,
}

#[derive(Debug, Clone)]
pub enum WsoOutcome {
    Accept(AcceptData),
    Reject(Halfspace),
}

// L1-closest convex combination of `points` reproducing `y`. Returns the
// weights and the residual. A vertex optimum keeps the support at most
// dim + 1.
fn best_decomposition(y: &[Rat], points: &[Vec<Rat>]) -> Result<(Vec<Rat>, Rat)> {
    let d = y.len();
    let n = points.len();
    // Variables: lambda_0..n-1, then e+_0..d-1, e-_0..d-1.
    let nv = n + 2 * d;
    let mut objective = vec![Rat::zero(); nv];
    for v in n..nv {
        objective[v] = Rat::one();
    }
    let mut lp = LinearProgram::new(nv, Sense::Min, objective)?;
    for v in 0..nv {
        lp.set_bounds(v, Some(Rat::zero()), None);
    }
    for coord in 0..d {
        let mut coeffs = vec![Rat::zero(); nv];
        for (j, p) in points.iter().enumerate() {
            coeffs[j] = p[coord].clone();
        }
        coeffs[n + coord] = Rat::one();
        coeffs[n + d + coord] = -Rat::one();
        lp.push(coeffs, Relation::Eq, y[coord].clone())?;
    }
    let mut coeffs = vec![Rat::zero(); nv];
    for c in coeffs.iter_mut().take(n) {
        *c = Rat::one();
    }
    lp.push(coeffs, Relation::Eq, Rat::one())?;
    let (point, value) = lp_solve(&lp)?.optimal()?;
    Ok((point[..n].to_vec(), value))
}

/// Exact convex weights expressing `y` over `generators`; fails with a
/// not-in-hull error when no exact combination exists. A vertex solution
/// keeps at most `dim + 1` weights nonzero.
pub fn caratheodory(y: &[Rat], generators: &[Vec<Rat>]) -> Result<Vec<Rat>> {
    if generators.is_empty() {
        return Err(Error::NotInHull);
    }
    let (weights, residual) = best_decomposition(y, generators)?;
    if !residual.is_zero() {
        return Err(Error::NotInHull);
    }
    Ok(weights)
}

struct QueryLog {
    directions: Vec<Vec<Rat>>,
    points: Vec<Vec<Rat>>,
}

impl QueryLog {
    fn push(&mut self, w: &[Rat], a: Vec<Rat>) {
        if !self.points.contains(&a) {
            self.directions.push(w.to_vec());
            self.points.push(a);
        }
    }
}

fn clamp_cube(w: &[Rat]) -> Vec<Rat> {
    w.iter()
        .map(|v| {
            if *v > Rat::one() {
                Rat::one()
            } else if *v < -Rat::one() {
                -Rat::one()
            } else {
                v.clone()
            }
        })
        .collect()
}

// Does (w, value a.w) reject y? Minimization: a.w >= y.w + delta.
fn reject_gap(y: &[Rat], w: &[Rat], a: &[Rat], maximize: bool) -> Rat {
    let lhs = dot(a, w);
    let target = dot(y, w);
    if maximize {
        target - lhs
    } else {
        lhs - target
    }
}

fn reject_halfspace(w: &[Rat], a: &[Rat], maximize: bool) -> Halfspace {
    let t = dot(a, w);
    if maximize {
        // alpha*P lies in {x: w.x <= t}, i.e. {-w.x >= -t}.
        Halfspace {
            normal: w.iter().map(|v| -v.clone()).collect(),
            offset: -t,
        }
    } else {
        Halfspace {
            normal: w.to_vec(),
            offset: t,
        }
    }
}

/// Separation-oracle wrapper around a bi-criterion algorithm.
///
/// Rejection: some unit-cube direction `w` has `A^beta_S(w).w` beyond
/// `y.w` by at least `delta`; the emitted halfspace contains `alpha * P`
/// exactly (it is re-verified with an exact query before being returned).
/// Acceptance: `y` is reproduced as a convex combination of logged outputs
/// with L1 residual at most `cfg.decomp_tol`.
///
/// `hints` carries directions that rejected recent queries; it is read and
/// updated so that consecutive calls short-circuit the common case.
pub fn wso(
    y: &[Rat],
    alg: &mut dyn OptimizationAlgorithm,
    cfg: &EllipsoidConfig,
    hints: &mut Vec<Vec<Rat>>,
) -> Result<WsoOutcome> {
    let d = y.len();
    let maximize = alg.spec().maximize;
    let mut queries = 0usize;
    let mut log = QueryLog {
        directions: Vec::new(),
        points: Vec::new(),
    };

    let mut try_reject = |w: &[Rat],
                          log: &mut QueryLog,
                          queries: &mut usize|
     -> Result<Option<Halfspace>> {
        let a = scaled_eval(alg, w, queries, cfg.max_alg_queries)?;
        let gap = reject_gap(y, w, &a, maximize);
        let h = if gap >= cfg.delta {
            Some(reject_halfspace(w, &a, maximize))
        } else {
            None
        };
        log.push(w, a);
        Ok(h)
    };

    // Cheap pre-pass: previously successful directions, then the coordinate
    // directions.
    let mut candidates: Vec<Vec<Rat>> = hints.clone();
    for i in 0..d {
        for sign in [1i64, -1] {
            let mut w = vec![Rat::zero(); d];
            w[i] = crate::num::int(sign);
            candidates.push(w);
        }
    }
    for w in &candidates {
        if let Some(h) = try_reject(w, &mut log, &mut queries)? {
            remember_hint(hints, w);
            return Ok(WsoOutcome::Reject(h));
        }
    }
    // Column generation: alternate between the exact separation LP over the
    // logged outputs and fresh algorithm queries along its optimizer. By LP
    // duality the separation value over the unit cube equals the minimum L1
    // decomposition residual, so a small value certifies acceptance; a large
    // value either certifies a rejection (after an exact re-query) or forces
    // the algorithm to reveal a new output, and the output set is finite.
    const MAX_ROUNDS: usize = 4096;
    for _ in 0..MAX_ROUNDS {
        let (w_star, sep) = separation_direction(y, &log.points, maximize)?;
        if sep <= cfg.decomp_tol {
            return match try_accept(y, &log, cfg)? {
                Some(acc) => Ok(WsoOutcome::Accept(acc)),
                None => Err(Error::Precision(format!(
                    "separation value {sep} within tolerance but decomposition \
                     over {} outputs failed",
                    log.points.len()
                ))),
            };
        }
        let w_star = clamp_cube(&w_star);
        let a = scaled_eval(alg, &w_star, &mut queries, cfg.max_alg_queries)?;
        if reject_gap(y, &w_star, &a, maximize) >= cfg.delta {
            remember_hint(hints, &w_star);
            return Ok(WsoOutcome::Reject(reject_halfspace(&w_star, &a, maximize)));
        }
        // No rejection: since every logged output beats y by more than the
        // tolerance in this direction while this one does not, it is new.
        if log.points.contains(&a) {
            return Err(Error::Precision(String::from(
                "separation loop revisited an output without progress",
            )));
        }
        log.push(&w_star, a);
    }
    Err(Error::Nonconvergence(format!(
        "separation loop exceeded {MAX_ROUNDS} rounds over {} outputs",
        log.points.len()
    )))
}

// Best separating direction in the unit cube: for minimization, maximizes
// `min_j a_j.w - y.w`; for maximization, `y.w - max_j a_j.w`. The optimum
// equals the minimum achievable L1 decomposition residual.
fn separation_direction(
    y: &[Rat],
    points: &[Vec<Rat>],
    maximize: bool,
) -> Result<(Vec<Rat>, Rat)> {
    let d = y.len();
    if points.is_empty() {
        return Err(Error::Invariant(String::from(
            "separation requires at least one logged output",
        )));
    }
    // Variables: w_0..d-1 in [-1,1], then the bound s (free).
    let nv = d + 1;
    let mut objective: Vec<Rat> = if maximize {
        y.to_vec()
    } else {
        y.iter().map(|v| -v.clone()).collect()
    };
    objective.push(if maximize { -Rat::one() } else { Rat::one() });
    let mut lp = LinearProgram::new(nv, Sense::Max, objective)?;
    for v in 0..d {
        lp.set_bounds(v, Some(-Rat::one()), Some(Rat::one()));
    }
    for a in points {
        let mut coeffs: Vec<Rat> = if maximize {
            a.clone()
        } else {
            a.iter().map(|v| -v.clone()).collect()
        };
        coeffs.push(if maximize { -Rat::one() } else { Rat::one() });
        lp.push(coeffs, Relation::Le, Rat::zero())?;
    }
    let (point, value) = lp_solve(&lp)?.optimal()?;
    Ok((point[..d].to_vec(), value))
}

fn remember_hint(hints: &mut Vec<Vec<Rat>>, w: &[Rat]) {
    if hints.iter().any(|h| h == w) {
        return;
    }
    hints.insert(0, w.to_vec());
    hints.truncate(24);
}

fn try_accept(y: &[Rat], log: &QueryLog, cfg: &EllipsoidConfig) -> Result<Option<AcceptData>> {
    if log.points.is_empty() {
        return Ok(None);
    }
    let (weights, residual) = best_decomposition(y, &log.points)?;
    if residual > cfg.decomp_tol {
        return Ok(None);
    }
    let mut directions = Vec::new();
    let mut points = Vec::new();
    let mut kept = Vec::new();
    for (j, w) in weights.iter().enumerate() {
        if w.is_positive() {
            directions.push(log.directions[j].clone());
            points.push(log.points[j].clone());
            kept.push(w.clone());
        }
    }
    Ok(Some(AcceptData {
        directions,
        points,
        weights: kept,
        residual,
    }))
}

/// Result of optimization through the oracle wrapper.
#[derive(Debug, Clone)]
pub struct Optimized {
    pub point: Vec<Rat>,
    /// Objective value at `point`.
    pub value: Rat,
    /// Decomposition of `point` over algorithm outputs.
    pub decomposition: AcceptData,
}

/// Optimizes `c . x` over the region jointly carved out by the exact
/// separation oracle `q` and the algorithm wrapper, by binary search on the
/// objective level down to width `tol`. Returns the point accepted at the
/// tightest feasible level probed.
#[allow(clippy::too_many_arguments)]
pub fn optimize_with_wso(
    c: &[Rat],
    minimize: bool,
    q: &mut dyn FnMut(&[Rat]) -> Result<OracleReply>,
    alg: &mut dyn OptimizationAlgorithm,
    cfg: &EllipsoidConfig,
    mut lo: Rat,
    mut hi: Rat,
    tol: &Rat,
) -> Result<Optimized> {
    let d = c.len();
    let mut hints: Vec<Vec<Rat>> = Vec::new();
    let mut probe = |level: &Rat, hints: &mut Vec<Vec<Rat>>| -> Result<Option<Optimized>> {
        let mut best: Option<Optimized> = None;
        {
            let mut oracle = |z: &[Rat]| -> Result<OracleReply> {
                let value = dot(c, z);
                let level_ok = if minimize {
                    value <= *level
                } else {
                    value >= *level
                };
                if !level_ok {
                    let (normal, offset) = if minimize {
                        (c.iter().map(|v| -v.clone()).collect(), -level.clone())
                    } else {
                        (c.to_vec(), level.clone())
                    };
                    return Ok(OracleReply::Cut(Halfspace { normal, offset }));
                }
                match q(z)? {
                    OracleReply::Accept => {}
                    cut => return Ok(cut),
                }
                match wso(z, alg, cfg, hints)? {
                    WsoOutcome::Accept(acc) => {
                        best = Some(Optimized {
                            point: z.to_vec(),
                            value,
                            decomposition: acc,
                        });
                        Ok(OracleReply::Accept)
                    }
                    WsoOutcome::Reject(h) => Ok(OracleReply::Cut(h)),
                }
            };
            ellipsoid_feasibility(&mut oracle, d, cfg)?;
        }
        Ok(best)
    };

    // The loose end of the range must be feasible.
    let loose = if minimize { hi.clone() } else { lo.clone() };
    let mut best = probe(&loose, &mut hints)?.ok_or_else(|| {
        Error::Infeasible(String::from(
            "no feasible point at the loose end of the objective range",
        ))
    })?;
    while &hi - &lo > *tol {
        let mid = truncate_bits(&((&lo + &hi) / Rat::from_integer(2.into())), 64);
        match probe(&mid, &mut hints)? {
            Some(opt) => {
                best = opt;
                if minimize {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            None => {
                if minimize {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat};

    fn cfg(dim: usize) -> EllipsoidConfig {
        EllipsoidConfig::for_problem(dim, 32, int(8))
    }

    #[test]
    fn accept_everything_takes_center() {
        let mut oracle = |_: &[Rat]| Ok(OracleReply::Accept);
        let (f, log) = ellipsoid_feasibility(&mut oracle, 3, &cfg(3)).unwrap();
        assert_eq!(f, Feasibility::Feasible(vec![int(0); 3]));
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn empty_intersection_declared_infeasible() {
        // {x0 >= 2} intersected with the unit cube.
        let mut oracle = |z: &[Rat]| {
            if z[0] > Rat::one() {
                return Ok(OracleReply::Cut(Halfspace {
                    normal: vec![-Rat::one(), Rat::zero()],
                    offset: -Rat::one(),
                }));
            }
            if z[0] < int(2) {
                return Ok(OracleReply::Cut(Halfspace {
                    normal: vec![Rat::one(), Rat::zero()],
                    offset: int(2),
                }));
            }
            Ok(OracleReply::Accept)
        };
        let (f, _) = ellipsoid_feasibility(&mut oracle, 2, &cfg(2)).unwrap();
        assert_eq!(f, Feasibility::Infeasible);
    }

    fn polytope_oracle(rows: Vec<(Vec<Rat>, Rat)>) -> impl FnMut(&[Rat]) -> Result<OracleReply> {
        // rows are (normal, offset) with feasible side normal.x >= offset.
        move |z: &[Rat]| {
            for (normal, offset) in &rows {
                if dot(normal, z) < *offset {
                    return Ok(OracleReply::Cut(Halfspace {
                        normal: normal.clone(),
                        offset: offset.clone(),
                    }));
                }
            }
            Ok(OracleReply::Accept)
        }
    }

    #[test]
    fn finds_point_in_small_polytope() {
        // Square [1/3, 1/2]^2 expressed as four halfspaces.
        let rows = vec![
            (vec![int(1), int(0)], rat(1, 3)),
            (vec![int(-1), int(0)], rat(-1, 2)),
            (vec![int(0), int(1)], rat(1, 3)),
            (vec![int(0), int(-1)], rat(-1, 2)),
        ];
        let mut oracle = polytope_oracle(rows.clone());
        let (f, _) = ellipsoid_feasibility(&mut oracle, 2, &cfg(2)).unwrap();
        let Feasibility::Feasible(z) = f else {
            panic!("expected a feasible point");
        };
        for (normal, offset) in rows {
            assert!(dot(&normal, &z) >= offset);
        }
    }

    #[test]
    fn one_dimensional_interval() {
        let rows = vec![
            (vec![int(1)], rat(7, 5)),
            (vec![int(-1)], rat(-3, 2)),
        ];
        let mut oracle = polytope_oracle(rows);
        let (f, _) = ellipsoid_feasibility(&mut oracle, 1, &cfg(1)).unwrap();
        let Feasibility::Feasible(z) = f else {
            panic!("expected a feasible point");
        };
        assert!(z[0] >= rat(7, 5) && z[0] <= rat(3, 2));
    }

    /// Exact linear minimizer (or maximizer) over an explicit vertex list.
    pub(crate) struct VertexOptimizer {
        pub vertices: Vec<Vec<Rat>>,
        pub spec: AlgSpec,
    }

    impl OptimizationAlgorithm for VertexOptimizer {
        fn spec(&self) -> &AlgSpec {
            &self.spec
        }
        fn evaluate(&mut self, w: &[Rat]) -> Result<Vec<Rat>> {
            let pick = self
                .vertices
                .iter()
                .map(|v| dot(v, w))
                .enumerate()
                .reduce(|best, cur| {
                    let better = if self.spec.maximize {
                        cur.1 > best.1
                    } else {
                        cur.1 < best.1
                    };
                    if better {
                        cur
                    } else {
                        best
                    }
                })
                .unwrap()
                .0;
            Ok(self.vertices[pick].clone())
        }
    }

    fn unit_square_alg(beta: Rat, scaled: Vec<usize>) -> VertexOptimizer {
        VertexOptimizer {
            vertices: vec![
                vec![int(0), int(0)],
                vec![int(1), int(0)],
                vec![int(0), int(1)],
                vec![int(1), int(1)],
            ],
            spec: AlgSpec {
                alpha: int(1),
                beta,
                scaled,
                maximize: false,
            },
        }
    }

    #[test]
    fn rejects_point_outside_hull() {
        let mut alg = unit_square_alg(int(1), vec![]);
        let y = vec![int(2), int(2)];
        let mut hints = Vec::new();
        let out = wso(&y, &mut alg, &cfg(2), &mut hints).unwrap();
        let WsoOutcome::Reject(h) = out else {
            panic!("expected rejection");
        };
        // The halfspace must contain every vertex of the square and exclude y.
        for v in &alg.vertices {
            assert!(h.contains(v));
        }
        assert!(!h.contains(&y));
    }

    #[test]
    fn accepts_interior_point_with_decomposition() {
        let mut alg = unit_square_alg(int(1), vec![]);
        let y = vec![rat(1, 2), rat(1, 2)];
        let mut hints = Vec::new();
        let out = wso(&y, &mut alg, &cfg(2), &mut hints).unwrap();
        let WsoOutcome::Accept(acc) = out else {
            panic!("expected acceptance");
        };
        let mut recon = vec![Rat::zero(); 2];
        for (p, w) in acc.points.iter().zip(&acc.weights) {
            for i in 0..2 {
                recon[i] += &p[i] * w;
            }
        }
        let resid: Rat = recon
            .iter()
            .zip(&y)
            .fold(Rat::zero(), |a, (r, t)| a + (r - t).abs());
        assert!(resid <= pow2(-64));
        let total: Rat = acc.weights.iter().fold(Rat::zero(), |a, w| a + w);
        assert_eq!(total, int(1));
    }

    #[test]
    fn accepts_scaled_corner_under_beta() {
        // With the first coordinate halved, (1/2, 1) is the image of the
        // corner (1, 1) and must be accepted.
        let mut alg = unit_square_alg(rat(1, 2), vec![0]);
        let y = vec![rat(1, 2), int(1)];
        let mut hints = Vec::new();
        let out = wso(&y, &mut alg, &cfg(2), &mut hints).unwrap();
        assert!(matches!(out, WsoOutcome::Accept(_)));
    }

    #[test]
    fn maximization_wrapper_mirrors() {
        let mut alg = unit_square_alg(int(1), vec![]);
        alg.spec.maximize = true;
        let y_out = vec![int(-1), int(-1)];
        let mut hints = Vec::new();
        let out = wso(&y_out, &mut alg, &cfg(2), &mut hints).unwrap();
        let WsoOutcome::Reject(h) = out else {
            panic!("expected rejection below the hull");
        };
        for v in &alg.vertices {
            assert!(h.contains(v));
        }
        assert!(!h.contains(&y_out));

        let y_in = vec![rat(1, 3), rat(2, 3)];
        let out = wso(&y_in, &mut alg, &cfg(2), &mut hints).unwrap();
        assert!(matches!(out, WsoOutcome::Accept(_)));
    }

    #[test]
    fn caratheodory_examples() {
        let gens = vec![
            vec![int(0), int(0)],
            vec![int(2), int(0)],
            vec![int(0), int(2)],
        ];
        let w = caratheodory(&[int(0), int(0)], &gens).unwrap();
        assert_eq!(w[0], int(1));

        let w = caratheodory(&[int(1), int(0)], &gens).unwrap();
        assert_eq!(w[0], rat(1, 2));
        assert_eq!(w[1], rat(1, 2));

        assert!(matches!(
            caratheodory(&[int(3), int(3)], &gens),
            Err(Error::NotInHull)
        ));
    }

    #[test]
    fn caratheodory_recovers_random_combination() {
        let gens = vec![
            vec![int(0), int(0), int(0)],
            vec![int(1), int(0), int(0)],
            vec![int(0), int(1), int(0)],
            vec![int(0), int(0), int(1)],
            vec![int(1), int(1), int(1)],
        ];
        let coeffs = [rat(1, 10), rat(2, 10), rat(3, 10), rat(1, 10), rat(3, 10)];
        let mut y = vec![Rat::zero(); 3];
        for (g, c) in gens.iter().zip(&coeffs) {
            for i in 0..3 {
                y[i] += &g[i] * c;
            }
        }
        let w = caratheodory(&y, &gens).unwrap();
        let mut recon = vec![Rat::zero(); 3];
        for (g, c) in gens.iter().zip(&w) {
            for i in 0..3 {
                recon[i] += &g[i] * c;
            }
        }
        assert_eq!(recon, y);
        assert!(w.iter().filter(|v| v.is_positive()).count() <= 4);
    }

    #[test]
    fn optimize_over_square() {
        let mut alg = unit_square_alg(int(1), vec![]);
        let mut q = |_: &[Rat]| Ok(OracleReply::Accept);
        let tol = rat(1, 1_000_000);
        let out = optimize_with_wso(
            &[int(1), int(0)],
            true,
            &mut q,
            &mut alg,
            &cfg(2),
            int(-2),
            int(2),
            &tol,
        )
        .unwrap();
        assert!(out.value <= tol);
    }

    #[test]
    fn optimize_respects_extra_constraint() {
        let mut alg = unit_square_alg(int(1), vec![]);
        let floor = rat(3, 10);
        let mut q = {
            let floor = floor.clone();
            move |z: &[Rat]| {
                if z[0] < floor {
                    Ok(OracleReply::Cut(Halfspace {
                        normal: vec![int(1), int(0)],
                        offset: floor.clone(),
                    }))
                } else {
                    Ok(OracleReply::Accept)
                }
            }
        };
        let tol = rat(1, 1_000_000);
        let out = optimize_with_wso(
            &[int(1), int(0)],
            true,
            &mut q,
            &mut alg,
            &cfg(2),
            int(-2),
            int(2),
            &tol,
        )
        .unwrap();
        assert!(out.value <= &floor + &tol);
        assert!(out.point[0] >= floor);
    }
}
