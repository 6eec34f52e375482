//! Ground-truth certifiers: exhaustive enumeration of schedules and an exact
//! LP over per-profile outcome distributions for tiny mechanism instances.
//!
//! These are the independent baselines every approximation guarantee in the
//! crate is tested against.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::bmed::{all_profiles, BmedInstance, Dprime, ImplicitForm, Layout};
use crate::error::{Error, Result};
use crate::lp::{lp_solve, LinearProgram, Relation, Sense};
use crate::num::{Ext, Rat};
use crate::sched::{cost, fairness, makespan, Assignment, Objective, SchedulingInstance};

const ENUM_CAP: u64 = 10_000_000;

/// Walks every integral schedule. For makespan every job is placed on a
/// machine; for fairness a job may also be discarded.
pub fn enumerate_assignments<F: FnMut(&Assignment) -> Result<()>>(
    inst: &SchedulingInstance,
    objective: Objective,
    mut visit: F,
) -> Result<()> {
    let choices = match objective {
        Objective::Makespan => inst.k as u64,
        Objective::Fairness => inst.k as u64 + 1,
    };
    let total = choices
        .checked_pow(inst.m as u32)
        .filter(|&t| t <= ENUM_CAP)
        .ok_or_else(|| {
            Error::Capacity(format!(
                "enumeration of {choices}^{} schedules exceeds the cap; shrink the instance",
                inst.m
            ))
        })?;
    let mut machines = vec![None; inst.m];
    for code in 0..total {
        let mut rem = code;
        for j in 0..inst.m {
            let pick = (rem % choices) as usize;
            rem /= choices;
            machines[j] = if pick < inst.k { Some(pick) } else { None };
        }
        visit(&Assignment::from_machines(inst.k, &machines))?;
    }
    Ok(())
}

/// Exact optimum of objective-plus-cost by exhaustive enumeration. Returns
/// the optimal value and one optimal schedule (the first in enumeration
/// order). Minimizes `M + C` for makespan, maximizes `F + C` for fairness.
pub fn brute_goop(
    inst: &SchedulingInstance,
    objective: Objective,
) -> Result<(Ext, Assignment)> {
    let mut best: Option<(Ext, Assignment)> = None;
    enumerate_assignments(inst, objective, |a| {
        let frac = a.to_fractional();
        let c = cost(inst, &frac)?;
        let value = match objective {
            Objective::Makespan => makespan(inst, &frac)? + &c,
            Objective::Fairness => fairness(inst, &frac)? + &c,
        };
        let better = match (&best, objective) {
            (None, _) => true,
            (Some((b, _)), Objective::Makespan) => value < *b,
            (Some((b, _)), Objective::Fairness) => value > *b,
        };
        if better {
            best = Some((value, a.clone()));
        }
        Ok(())
    })?;
    best.ok_or_else(|| Error::Invariant(String::from("enumeration visited no schedule")))
}

/// Exact implicit form of a deterministic allocation rule with zero prices:
/// expectations are summed over the distribution's support.
pub fn implicit_form_of(
    inst: &BmedInstance,
    dist: &Dprime,
    rule: &mut dyn FnMut(&[usize]) -> Result<Assignment>,
) -> Result<ImplicitForm> {
    let layout = Layout::for_instance(inst);
    let mut memo: BTreeMap<Vec<usize>, Assignment> = BTreeMap::new();
    let mut lookup = |profile: &[usize], rule: &mut dyn FnMut(&[usize]) -> Result<Assignment>| {
        if let Some(x) = memo.get(profile) {
            return Ok(x.clone());
        }
        let x = rule(profile)?;
        memo.insert(profile.to_vec(), x.clone());
        Ok(x)
    };
    let mut form = ImplicitForm::zero(&layout);
    for profile in dist.support_profiles() {
        let x = lookup(&profile, rule)?;
        let o = inst.objective_value(&profile, &x)?;
        form.o += dist.profile_prob(&profile) * o;
    }
    let counts = inst.type_counts();
    for i in 0..inst.k {
        // Opponent sub-profiles with positive probability.
        let mut others: Vec<(Vec<usize>, Rat)> = vec![(Vec::new(), Rat::one())];
        for (l, row) in dist.weights.iter().enumerate() {
            if l == i {
                continue;
            }
            let mut next = Vec::new();
            for (prefix, w) in &others {
                for (t, q) in row.iter().enumerate() {
                    if q.is_positive() {
                        let mut p = prefix.clone();
                        p.push(t);
                        next.push((p, w * q));
                    }
                }
            }
            others = next;
        }
        for tp in 0..counts[i] {
            for (rest, w) in &others {
                let mut profile = Vec::with_capacity(inst.k);
                let mut it = rest.iter();
                for l in 0..inst.k {
                    if l == i {
                        profile.push(tp);
                    } else {
                        profile.push(*it.next().expect("opponent profile length"));
                    }
                }
                let x = lookup(&profile, rule)?;
                for t in 0..counts[i] {
                    form.pi[i][t][tp] += w * inst.type_value(i, t, &x);
                }
            }
        }
    }
    Ok(form)
}

const BMED_CAP: usize = 1_000_000;

/// Exact optimal truthful value by a direct LP over per-profile outcome
/// distributions: variables `q(profile, outcome)` plus the implicit-form
/// coordinates tied together by the interim-definition equalities and the
/// truthfulness inequalities.
pub fn brute_bmed(inst: &BmedInstance) -> Result<Rat> {
    let layout = Layout::for_instance(inst);
    let maximize = matches!(inst.objective, Objective::Fairness);
    let profiles = all_profiles(inst)?;
    // Enumerate outcomes per profile (the outcome set is the same shape for
    // every profile; objective and values differ).
    let mut outcomes: Vec<Vec<Assignment>> = Vec::with_capacity(profiles.len());
    let mut obj_vals: Vec<Vec<Rat>> = Vec::with_capacity(profiles.len());
    let mut budget = BMED_CAP;
    for profile in &profiles {
        let sub = inst.profile_instance(profile, None)?;
        let mut xs = Vec::new();
        let mut os = Vec::new();
        enumerate_assignments(&sub, inst.objective, |a| {
            if xs.len() >= budget {
                return Err(Error::Capacity(format!(
                    "mechanism LP exceeds {BMED_CAP} outcome variables"
                )));
            }
            xs.push(a.clone());
            os.push(inst.objective_value(profile, a)?);
            Ok(())
        })?;
        budget -= xs.len();
        outcomes.push(xs);
        obj_vals.push(os);
    }
    let q_counts: Vec<usize> = outcomes.iter().map(|xs| xs.len()).collect();
    let q_total: usize = q_counts.iter().sum();
    let n_vars = q_total + layout.total;
    let mut q_off = Vec::with_capacity(profiles.len());
    let mut acc = 0usize;
    for &c in &q_counts {
        q_off.push(acc);
        acc += c;
    }
    let form_off = q_total; // implicit-form coordinates follow the q block
    let mut objective = vec![Rat::zero(); n_vars];
    objective[form_off] = Rat::one();
    let sense = if maximize { Sense::Max } else { Sense::Min };
    let mut lp = LinearProgram::new(n_vars, sense, objective)?;
    for v in 0..q_total {
        lp.set_bounds(v, Some(Rat::zero()), None);
    }
    // The objective coordinate is 1-bounded.
    lp.set_bounds(form_off, Some(Rat::zero()), Some(Rat::one()));
    let prior = Dprime::prior(inst);
    // Each profile's outcome distribution sums to one.
    for (pi_idx, &c) in q_counts.iter().enumerate() {
        let mut coeffs = vec![Rat::zero(); n_vars];
        for v in 0..c {
            coeffs[q_off[pi_idx] + v] = Rat::one();
        }
        lp.push(coeffs, Relation::Eq, Rat::one())?;
    }
    // Interim-value definitions.
    let counts = inst.type_counts();
    for i in 0..inst.k {
        for t in 0..counts[i] {
            for tp in 0..counts[i] {
                let mut coeffs = vec![Rat::zero(); n_vars];
                coeffs[form_off + layout.pi(i, t, tp)] = Rat::one();
                for (pr_idx, profile) in profiles.iter().enumerate() {
                    if profile[i] != tp {
                        continue;
                    }
                    // Opponents drawn from the prior.
                    let mut w = Rat::one();
                    for (l, &tl) in profile.iter().enumerate() {
                        if l != i {
                            w *= &prior.weights[l][tl];
                        }
                    }
                    if !w.is_positive() {
                        continue;
                    }
                    for (x_idx, x) in outcomes[pr_idx].iter().enumerate() {
                        let val = inst.type_value(i, t, x);
                        if !val.is_zero() {
                            coeffs[q_off[pr_idx] + x_idx] = -(&w * val);
                        }
                    }
                }
                lp.push(coeffs, Relation::Eq, Rat::zero())?;
            }
        }
    }
    // Objective coordinate dominates (is dominated by) the expectation.
    {
        let mut coeffs = vec![Rat::zero(); n_vars];
        coeffs[form_off] = Rat::one();
        for (pr_idx, profile) in profiles.iter().enumerate() {
            let w = prior.profile_prob(profile);
            if !w.is_positive() {
                continue;
            }
            for (x_idx, o) in obj_vals[pr_idx].iter().enumerate() {
                if !o.is_zero() {
                    coeffs[q_off[pr_idx] + x_idx] = -(&w * o);
                }
            }
        }
        let rel = if maximize { Relation::Le } else { Relation::Ge };
        lp.push(coeffs, rel, Rat::zero())?;
    }
    // Truthfulness.
    for i in 0..inst.k {
        for t in 0..counts[i] {
            let mut ir = vec![Rat::zero(); n_vars];
            ir[form_off + layout.pi(i, t, t)] = Rat::one();
            ir[form_off + layout.p(i, t)] = -Rat::one();
            lp.push(ir, Relation::Ge, Rat::zero())?;
            for tp in 0..counts[i] {
                if tp == t {
                    continue;
                }
                let mut bic = vec![Rat::zero(); n_vars];
                bic[form_off + layout.pi(i, t, t)] = Rat::one();
                bic[form_off + layout.p(i, t)] = -Rat::one();
                bic[form_off + layout.pi(i, t, tp)] = -Rat::one();
                bic[form_off + layout.p(i, tp)] = Rat::one();
                lp.push(bic, Relation::Ge, Rat::zero())?;
            }
        }
    }
    let (_, value) = lp_solve(&lp)?.optimal()?;
    Ok(value)
}
