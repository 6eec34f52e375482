//! Makespan-with-costs approximation: a threshold-LP family, best-threshold
//! selection, and slot-based rounding to an integral schedule.
//!
//! The pipeline guarantees, exactly: `(1/2)·M(x̂) + C(x̂) ≤ min over integral
//! assignments of M + C`, i.e. a `(1, 1/2)` bi-criterion approximation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lp::{lp_solve, LinearProgram, LpResult, Relation, Sense};
use crate::num::{Ext, Rat};
use crate::sched::{cost, makespan, Assignment, FractionalAssignment, SchedulingInstance};

/// Optimal fractional solution of the threshold LP at threshold `t`.
#[derive(Debug, Clone)]
pub struct LpTSolution {
    pub x: FractionalAssignment,
    /// LP load bound: every machine's fractional load is at most `T`.
    pub t_cap: Rat,
    /// Threshold: cells with `p[i][j] > t` carry no weight, and `T ≥ t`.
    pub t: Rat,
    /// `C(x) + T`.
    pub value: Rat,
}

/// Solves the threshold LP: minimize `C(x) + T` subject to every job fully
/// assigned, per-machine load at most `T`, `x[i][j] = 0` where `p[i][j] > t`,
/// and `T ≥ t`. Returns `None` when infeasible (some job has no cell with
/// `p[i][j] ≤ t`).
pub fn lp_t(inst: &SchedulingInstance, t: &Rat) -> Result<Option<LpTSolution>> {
    if t < &Rat::zero() {
        return Err(Error::Domain(String::from("threshold must be nonnegative")));
    }
    let (k, m) = (inst.k, inst.m);
    let nv = k * m + 1; // x variables then T
    let cell = |i: usize, j: usize| i * m + j;
    let t_var = k * m;

    let mut objective = vec![Rat::zero(); nv];
    for i in 0..k {
        for j in 0..m {
            objective[cell(i, j)] = inst.c[i][j].clone();
        }
    }
    objective[t_var] = Rat::one();
    let mut lp = LinearProgram::new(nv, Sense::Min, objective)?;
    for i in 0..k {
        for j in 0..m {
            let forbidden = &inst.p[i][j] > t;
            let hi = if forbidden { Rat::zero() } else { Rat::one() };
            lp.set_bounds(cell(i, j), Some(Rat::zero()), Some(hi));
        }
    }
    lp.set_bounds(t_var, Some(t.clone()), None);
    for j in 0..m {
        let mut coeffs = vec![Rat::zero(); nv];
        for i in 0..k {
            coeffs[cell(i, j)] = Rat::one();
        }
        lp.push(coeffs, Relation::Eq, Rat::one())?;
    }
    for i in 0..k {
        let mut coeffs = vec![Rat::zero(); nv];
        for j in 0..m {
            coeffs[cell(i, j)] = inst.p[i][j].clone();
        }
        coeffs[t_var] = -Rat::one();
        lp.push(coeffs, Relation::Le, Rat::zero())?;
    }

    match lp_solve(&lp)? {
        LpResult::Infeasible => Ok(None),
        LpResult::Unbounded => Err(Error::Invariant(String::from(
            "threshold LP cannot be unbounded",
        ))),
        LpResult::Optimal { point, value } => {
            let x = FractionalAssignment {
                x: (0..k)
                    .map(|i| (0..m).map(|j| point[cell(i, j)].clone()).collect())
                    .collect(),
            };
            Ok(Some(LpTSolution {
                x,
                t_cap: point[t_var].clone(),
                t: t.clone(),
                value,
            }))
        }
    }
}

/// Rounds a feasible threshold-LP solution to an integral assignment with
/// makespan at most `T + t` and cost at most `C(x)`. Both inequalities are
/// re-checked exactly before returning.
pub fn st_round(inst: &SchedulingInstance, sol: &LpTSolution) -> Result<Assignment> {
    let (k, m) = (inst.k, inst.m);

    // Per machine: ceil(total weight) unit-capacity slots; jobs in
    // non-increasing processing-time order are packed fractionally into the
    // slots in sequence. A job then only shares a slot with jobs of
    // comparable size, which is what caps the rounded load at T + t.
    struct Slot {
        machine: usize,
        // (job, fraction) pieces in this slot
        pieces: Vec<(usize, Rat)>,
    }
    let mut slots: Vec<Slot> = Vec::new();
    for i in 0..k {
        let total: Rat = (0..m).fold(Rat::zero(), |acc, j| acc + &sol.x.x[i][j]);
        if total.is_zero() {
            continue;
        }
        let mut order: Vec<usize> = (0..m).filter(|&j| !sol.x.x[i][j].is_zero()).collect();
        order.sort_by(|&a, &b| inst.p[i][b].cmp(&inst.p[i][a]).then(a.cmp(&b)));
        let mut current = Slot {
            machine: i,
            pieces: Vec::new(),
        };
        let mut room = Rat::one();
        for j in order {
            let mut remaining = sol.x.x[i][j].clone();
            while remaining.is_positive() {
                let take = if remaining <= room {
                    remaining.clone()
                } else {
                    room.clone()
                };
                current.pieces.push((j, take.clone()));
                remaining -= &take;
                room -= &take;
                if room.is_zero() {
                    slots.push(core::mem::replace(
                        &mut current,
                        Slot {
                            machine: i,
                            pieces: Vec::new(),
                        },
                    ));
                    room = Rat::one();
                }
            }
        }
        if !current.pieces.is_empty() {
            slots.push(current);
        }
    }

    // Minimum-cost assignment of jobs to slots, allowed only along pieces.
    // The fractional packing itself is feasible for this LP, and bipartite
    // vertex solutions are integral, so an integral optimum exists with cost
    // at most C(x).
    let n_slots = slots.len();
    let nv = m * n_slots;
    let idx = |j: usize, s: usize| j * n_slots + s;
    let mut objective = vec![Rat::zero(); nv];
    let mut allowed = vec![false; nv];
    for (s, slot) in slots.iter().enumerate() {
        for (j, _) in &slot.pieces {
            allowed[idx(*j, s)] = true;
            objective[idx(*j, s)] = inst.c[slot.machine][*j].clone();
        }
    }
    let mut lp = LinearProgram::new(nv, Sense::Min, objective)?;
    for v in 0..nv {
        let hi = if allowed[v] { Rat::one() } else { Rat::zero() };
        lp.set_bounds(v, Some(Rat::zero()), Some(hi));
    }
    for j in 0..m {
        let mut coeffs = vec![Rat::zero(); nv];
        for s in 0..n_slots {
            coeffs[idx(j, s)] = Rat::one();
        }
        lp.push(coeffs, Relation::Eq, Rat::one())?;
    }
    for s in 0..n_slots {
        let mut coeffs = vec![Rat::zero(); nv];
        for j in 0..m {
            coeffs[idx(j, s)] = Rat::one();
        }
        lp.push(coeffs, Relation::Le, Rat::one())?;
    }
    let (point, _) = lp_solve(&lp)?.optimal().map_err(|_| {
        Error::Invariant(String::from("slot matching LP must be feasible"))
    })?;

    let mut machines = vec![None; m];
    for j in 0..m {
        for s in 0..n_slots {
            if point[idx(j, s)].is_one() {
                machines[j] = Some(slots[s].machine);
            } else if !point[idx(j, s)].is_zero() {
                return Err(Error::Invariant(String::from(
                    "slot matching LP returned a fractional vertex",
                )));
            }
        }
    }
    let rounded = Assignment::from_machines(k, &machines);

    // Exact contract check.
    let frac = rounded.to_fractional();
    let m_hat = makespan(inst, &frac)?;
    let bound = Ext::Finite(&sol.t_cap + &sol.t);
    if m_hat > bound {
        return Err(Error::Invariant(String::from(
            "rounded makespan exceeds T + t",
        )));
    }
    let c_hat = cost(inst, &frac)?;
    let c_frac = cost(inst, &sol.x)?;
    if c_hat > c_frac {
        return Err(Error::Invariant(String::from(
            "rounded cost exceeds fractional cost",
        )));
    }
    Ok(rounded)
}

/// Full makespan-with-costs pipeline: solve the threshold LP at every
/// distinct processing time, keep the cheapest solution (ties toward the
/// smaller threshold), and round it.
pub fn solve_makespan_with_costs(inst: &SchedulingInstance) -> Result<Assignment> {
    let mut thresholds: Vec<Rat> = inst.p.iter().flatten().cloned().collect();
    thresholds.sort();
    thresholds.dedup();
    let mut best: Option<LpTSolution> = None;
    for t in &thresholds {
        if let Some(sol) = lp_t(inst, t)? {
            let better = match &best {
                None => true,
                Some(b) => sol.value < b.value,
            };
            if better {
                best = Some(sol);
            }
        }
    }
    let best = best.ok_or_else(|| {
        Error::Invariant(String::from(
            "threshold LP at the largest processing time is always feasible",
        ))
    })?;
    st_round(inst, &best)
}

/// Best fractional solution (before rounding), exposed for certificates.
pub fn best_fractional(inst: &SchedulingInstance) -> Result<LpTSolution> {
    let mut thresholds: Vec<Rat> = inst.p.iter().flatten().cloned().collect();
    thresholds.sort();
    thresholds.dedup();
    let mut best: Option<LpTSolution> = None;
    for t in &thresholds {
        if let Some(sol) = lp_t(inst, t)? {
            if best.as_ref().is_none_or(|b| sol.value < b.value) {
                best = Some(sol);
            }
        }
    }
    best.ok_or_else(|| Error::Invariant(String::from("no feasible threshold")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat};
    use crate::oracle::brute_goop;
    use crate::sched::{modified_makespan, Objective};
    use rand_chacha::ChaCha12Rng;
    use rand_core::{RngCore, SeedableRng};

    fn inst(p: Vec<Vec<Rat>>, c: Vec<Vec<Rat>>) -> SchedulingInstance {
        SchedulingInstance::new(p, c).unwrap()
    }

    #[test]
    fn lp_t_singleton() {
        let i = inst(vec![vec![int(1)]], vec![vec![int(0)]]);
        let sol = lp_t(&i, &int(1)).unwrap().unwrap();
        assert_eq!(sol.x.x[0][0], int(1));
        assert_eq!(sol.t_cap, int(1));
        assert_eq!(sol.value, int(1));
        assert!(lp_t(&i, &rat(1, 2)).unwrap().is_none());
    }

    fn random_instance(rng: &mut ChaCha12Rng, k: usize, m: usize) -> SchedulingInstance {
        let p = (0..k)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        let d = 1 + (rng.next_u32() % 8) as i64;
                        let n = (rng.next_u32() as i64) % (d + 1);
                        rat(n, d)
                    })
                    .collect()
            })
            .collect();
        let c = (0..k)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        let d = 1 + (rng.next_u32() % 8) as i64;
                        let n = (rng.next_u32() as i64) % (2 * d + 1) - d;
                        rat(n, d)
                    })
                    .collect()
            })
            .collect();
        SchedulingInstance::new(p, c).unwrap()
    }

    #[test]
    fn best_threshold_value_never_exceeds_integral_optimum() {
        // At the single best threshold the LP value can still exceed the
        // integral optimum (T >= t binds); only the min over thresholds is
        // guaranteed to beat it.
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..20 {
            let i = random_instance(&mut rng, 2, 3);
            let sol = best_fractional(&i).unwrap();
            let (opt, _) = brute_goop(&i, Objective::Makespan).unwrap();
            assert!(sol.value <= opt.clone().expect_finite("makespan optimum"));
        }
    }

    #[test]
    fn st_round_keeps_integral_input() {
        let i = inst(
            vec![vec![rat(1, 2), int(1)], vec![int(1), rat(1, 3)]],
            vec![vec![int(0), int(1)], vec![int(1), int(0)]],
        );
        let sol = lp_t(&i, &int(1)).unwrap().unwrap();
        assert!(sol.x.is_integral());
        let a = st_round(&i, &sol).unwrap();
        assert_eq!(a.to_fractional().x, sol.x.x);
    }

    #[test]
    fn st_round_contract_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..40 {
            let i = random_instance(&mut rng, 3, 4);
            let t_max = i.p.iter().flatten().max().unwrap().clone();
            let sol = lp_t(&i, &t_max).unwrap().unwrap();
            // st_round re-checks the contract internally and errors on
            // violation, so success is the assertion.
            st_round(&i, &sol).unwrap();
        }
    }

    #[test]
    fn selected_fractional_beats_integral_optimum() {
        // The kept fractional solution has modified-makespan + cost at most
        // the best integral M + C.
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        for _ in 0..15 {
            let i = random_instance(&mut rng, 2, 4);
            let sol = best_fractional(&i).unwrap();
            let (opt, _) = brute_goop(&i, Objective::Makespan).unwrap();
            let mm = modified_makespan(&i, &sol.x)
                .unwrap()
                .expect_finite("feasible fractional solution");
            let c = cost(&i, &sol.x).unwrap();
            assert!(mm + c <= opt.expect_finite("makespan optimum"));
        }
    }

    #[test]
    fn end_to_end_factor_holds() {
        let mut rng = ChaCha12Rng::seed_from_u64(44);
        for _ in 0..25 {
            let i = random_instance(&mut rng, 3, 4);
            let a = solve_makespan_with_costs(&i).unwrap();
            let frac = a.to_fractional();
            let m_val = makespan(&i, &frac).unwrap().expect_finite("all assigned");
            let c_val = cost(&i, &frac).unwrap();
            let (opt, _) = brute_goop(&i, Objective::Makespan).unwrap();
            assert!(m_val / int(2) + c_val <= opt.expect_finite("makespan optimum"));
        }
    }

    #[test]
    fn single_machine_everything_assigned() {
        let i = inst(
            vec![vec![rat(1, 3), rat(2, 3), int(1)]],
            vec![vec![int(1), int(-1), int(0)]],
        );
        let a = solve_makespan_with_costs(&i).unwrap();
        assert!(a.x[0].iter().all(|&b| b));
    }
}
