//! Bayesian mechanism synthesis: implicit forms of allocation rules,
//! empirical type distributions, virtual objectives, the truthfulness
//! constraint oracle, and the reduction that turns a bi-criterion scheduling
//! solver into an approximately optimal truthful mechanism.
//!
//! An implicit form `(O, pi, p)` summarizes a mechanism by its expected
//! objective, interim values `pi_i(t, t')` (expected value to bidder `i`
//! of type `t` reporting `t'`), and interim prices `p_i(t)`. The reduction
//! searches the truthful implicit forms whose allocation part lies in the
//! convex hull of the scheduling solver's reachable outputs, then realizes
//! the accepted point as an explicit lottery over solver runs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::fairness::bd_solve;
use crate::geometry::{
    ellipsoid_feasibility, wso, AcceptData, AlgSpec, EllipsoidConfig, Halfspace,
    OptimizationAlgorithm, OracleReply, WsoOutcome,
};
use crate::makespan::solve_makespan_with_costs;
use crate::num::{int, pick_weighted, rat, Rat};
use crate::sched::{fairness, makespan, Assignment, Objective, SchedulingInstance};

/// A Bayesian scheduling-mechanism instance: each bidder (machine) has a
/// finite set of possible types, a type being the vector of processing
/// times it would incur per job, and an independent prior over its types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BmedInstance {
    pub k: usize,
    pub m: usize,
    /// `types[i][t][j]`: processing time of job `j` under type `t` of
    /// bidder `i`. Each type's entries are nonnegative and sum to at most 1.
    pub types: Vec<Vec<Vec<Rat>>>,
    /// `probs[i][t]`: prior probability of type `t`; each row sums to 1.
    pub probs: Vec<Vec<Rat>>,
    pub objective: Objective,
}

impl BmedInstance {
    pub fn new(
        types: Vec<Vec<Vec<Rat>>>,
        probs: Vec<Vec<Rat>>,
        objective: Objective,
    ) -> Result<Self> {
        let k = types.len();
        if k == 0 || probs.len() != k {
            return Err(Error::Structure(String::from(
                "need matching nonempty type and probability lists",
            )));
        }
        let m = types
            .first()
            .and_then(|ts| ts.first())
            .map(|t| t.len())
            .unwrap_or(0);
        if m == 0 {
            return Err(Error::Structure(String::from("need at least one job")));
        }
        for (i, ts) in types.iter().enumerate() {
            if ts.is_empty() || probs[i].len() != ts.len() {
                return Err(Error::Structure(format!(
                    "bidder {i}: empty type list or probability mismatch"
                )));
            }
            for t in ts {
                if t.len() != m {
                    return Err(Error::Structure(format!(
                        "bidder {i}: type length differs from job count {m}"
                    )));
                }
                let mut total = Rat::zero();
                for v in t {
                    if v.is_negative() || v > &Rat::one() {
                        return Err(Error::Structure(String::from(
                            "processing times must lie in [0,1]",
                        )));
                    }
                    total += v;
                }
                if total > Rat::one() {
                    return Err(Error::Structure(String::from(
                        "type must value the full allocation at most 1",
                    )));
                }
            }
            let mut total = Rat::zero();
            for q in &probs[i] {
                if q.is_negative() {
                    return Err(Error::Structure(String::from(
                        "probabilities must be nonnegative",
                    )));
                }
                total += q;
            }
            if total != Rat::one() {
                return Err(Error::Structure(format!(
                    "bidder {i}: probabilities must sum to 1"
                )));
            }
        }
        Ok(BmedInstance {
            k,
            m,
            types,
            probs,
            objective,
        })
    }

    pub fn type_counts(&self) -> Vec<usize> {
        self.types.iter().map(|ts| ts.len()).collect()
    }

    /// Scheduling instance induced by a type profile, with the given costs
    /// (zero if omitted).
    pub fn profile_instance(
        &self,
        profile: &[usize],
        costs: Option<Vec<Vec<Rat>>>,
    ) -> Result<SchedulingInstance> {
        let p: Vec<Vec<Rat>> = profile
            .iter()
            .enumerate()
            .map(|(i, &t)| self.types[i][t].clone())
            .collect();
        let c = costs.unwrap_or_else(|| vec![vec![Rat::zero(); self.m]; self.k]);
        SchedulingInstance::new(p, c)
    }

    /// Value of bidder `i` with type index `t` for assignment `x`.
    pub fn type_value(&self, i: usize, t: usize, x: &Assignment) -> Rat {
        let mut v = Rat::zero();
        for (j, &on) in x.x[i].iter().enumerate() {
            if on {
                v += &self.types[i][t][j];
            }
        }
        v
    }

    /// Objective value of `x` under the profile's processing times.
    pub fn objective_value(&self, profile: &[usize], x: &Assignment) -> Result<Rat> {
        let inst = self.profile_instance(profile, None)?;
        let frac = x.to_fractional();
        let v = match self.objective {
            Objective::Makespan => makespan(&inst, &frac)?,
            Objective::Fairness => fairness(&inst, &frac)?,
        };
        v.finite().cloned().ok_or_else(|| {
            Error::Invariant(String::from("objective not finite on realized outcome"))
        })
    }
}

/// Coordinate layout of implicit-form vectors:
/// `[O | pi blocks, bidder-major, (t, t') row-major | p blocks]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub counts: Vec<usize>,
    pi_off: Vec<usize>,
    p_off: Vec<usize>,
    pub pi_dim: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(counts: Vec<usize>) -> Self {
        let mut pi_off = Vec::with_capacity(counts.len());
        let mut p_off = Vec::with_capacity(counts.len());
        let mut pi_dim = 0usize;
        let mut p_dim = 0usize;
        for &n in &counts {
            pi_off.push(pi_dim);
            p_off.push(p_dim);
            pi_dim += n * n;
            p_dim += n;
        }
        let total = 1 + pi_dim + p_dim;
        Layout {
            counts,
            pi_off,
            p_off,
            pi_dim,
            total,
        }
    }

    pub fn for_instance(inst: &BmedInstance) -> Self {
        Layout::new(inst.type_counts())
    }

    /// Index of `pi_i(t, t')` in the full vector.
    pub fn pi(&self, i: usize, t: usize, tp: usize) -> usize {
        1 + self.pi_off[i] + t * self.counts[i] + tp
    }

    /// Index of `p_i(t)` in the full vector.
    pub fn p(&self, i: usize, t: usize) -> usize {
        1 + self.pi_dim + self.p_off[i] + t
    }

    /// Dimension of the allocation part `(O, pi)`.
    pub fn alloc_dim(&self) -> usize {
        1 + self.pi_dim
    }
}

/// The interim summary `(O, pi, p)` of a mechanism.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImplicitForm {
    pub o: Rat,
    /// `pi[i][t][t']`.
    pub pi: Vec<Vec<Vec<Rat>>>,
    /// `p[i][t]`.
    pub p: Vec<Vec<Rat>>,
}

impl ImplicitForm {
    pub fn zero(layout: &Layout) -> Self {
        ImplicitForm {
            o: Rat::zero(),
            pi: layout
                .counts
                .iter()
                .map(|&n| vec![vec![Rat::zero(); n]; n])
                .collect(),
            p: layout.counts.iter().map(|&n| vec![Rat::zero(); n]).collect(),
        }
    }

    pub fn to_vec(&self, layout: &Layout) -> Vec<Rat> {
        let mut v = vec![Rat::zero(); layout.total];
        v[0] = self.o.clone();
        for (i, &n) in layout.counts.iter().enumerate() {
            for t in 0..n {
                for tp in 0..n {
                    v[layout.pi(i, t, tp)] = self.pi[i][t][tp].clone();
                }
                v[layout.p(i, t)] = self.p[i][t].clone();
            }
        }
        v
    }

    pub fn from_vec(layout: &Layout, v: &[Rat]) -> Result<Self> {
        if v.len() != layout.total {
            return Err(Error::Structure(format!(
                "implicit form vector length {} differs from layout {}",
                v.len(),
                layout.total
            )));
        }
        let mut form = ImplicitForm::zero(layout);
        form.o = v[0].clone();
        for (i, &n) in layout.counts.iter().enumerate() {
            for t in 0..n {
                for tp in 0..n {
                    form.pi[i][t][tp] = v[layout.pi(i, t, tp)].clone();
                }
                form.p[i][t] = v[layout.p(i, t)].clone();
            }
        }
        Ok(form)
    }

    /// Flattened allocation part `(O, pi)`.
    pub fn alloc_vec(&self, layout: &Layout) -> Vec<Rat> {
        self.to_vec(layout)[..layout.alloc_dim()].to_vec()
    }
}

/// A linear functional over the allocation part of implicit forms: a weight
/// on the objective plus weights `w[i][t][t']` on the interim values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Direction {
    pub w_o: Rat,
    pub w: Vec<Vec<Vec<Rat>>>,
}

impl Direction {
    pub fn to_vec(&self, layout: &Layout) -> Vec<Rat> {
        let mut v = vec![Rat::zero(); layout.alloc_dim()];
        v[0] = self.w_o.clone();
        for (i, &n) in layout.counts.iter().enumerate() {
            for t in 0..n {
                for tp in 0..n {
                    v[layout.pi(i, t, tp)] = self.w[i][t][tp].clone();
                }
            }
        }
        v
    }

    pub fn from_vec(layout: &Layout, v: &[Rat]) -> Result<Self> {
        if v.len() != layout.alloc_dim() {
            return Err(Error::Structure(format!(
                "direction length {} differs from allocation dimension {}",
                v.len(),
                layout.alloc_dim()
            )));
        }
        let w = layout
            .counts
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                (0..n)
                    .map(|t| (0..n).map(|tp| v[layout.pi(i, t, tp)].clone()).collect())
                    .collect()
            })
            .collect();
        Ok(Direction {
            w_o: v[0].clone(),
            w,
        })
    }
}

/// Per-bidder empirical type distribution (a product distribution; the
/// per-bidder marginals of the drawn sample).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dprime {
    /// `weights[i][t]`: empirical probability of type `t`; rows sum to 1.
    pub weights: Vec<Vec<Rat>>,
}

impl Dprime {
    /// The exact prior as a "sampled" distribution; handy for exact tests.
    pub fn prior(inst: &BmedInstance) -> Self {
        Dprime {
            weights: inst.probs.clone(),
        }
    }

    pub fn full_support(&self) -> bool {
        self.weights
            .iter()
            .all(|row| row.iter().all(|w| w.is_positive()))
    }

    /// Probability of the profile (type indices, one per bidder).
    pub fn profile_prob(&self, profile: &[usize]) -> Rat {
        profile
            .iter()
            .enumerate()
            .fold(Rat::one(), |acc, (i, &t)| acc * &self.weights[i][t])
    }

    /// All profiles with positive probability, in lexicographic order.
    pub fn support_profiles(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = vec![Vec::new()];
        for row in &self.weights {
            let mut next = Vec::new();
            for prefix in &out {
                for (t, w) in row.iter().enumerate() {
                    if w.is_positive() {
                        let mut p = prefix.clone();
                        p.push(t);
                        next.push(p);
                    }
                }
            }
            out = next;
        }
        out
    }
}

/// Draws `n` i.i.d. profiles from the prior and returns the per-bidder
/// empirical marginals.
pub fn sample_dprime(inst: &BmedInstance, n: usize, rng: &mut dyn RngCore) -> Result<Dprime> {
    if n == 0 {
        return Err(Error::Structure(String::from("need at least one sample")));
    }
    let mut counts: Vec<Vec<u64>> = inst.probs.iter().map(|row| vec![0u64; row.len()]).collect();
    for _ in 0..n {
        for (i, row) in inst.probs.iter().enumerate() {
            let t = pick_weighted(row, rng);
            counts[i][t] += 1;
        }
    }
    let denom = Rat::from_integer((n as u64).into());
    Ok(Dprime {
        weights: counts
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| Rat::from_integer(c.into()) / &denom)
                    .collect()
            })
            .collect(),
    })
}

/// Per-cell virtual allocation costs induced by a direction at a profile:
/// `v[i][j] = sum_t w[i][t][profile_i] * types[i][t][j] / Pr'[profile_i]`.
pub fn virtual_costs(
    inst: &BmedInstance,
    dist: &Dprime,
    dir: &Direction,
    profile: &[usize],
) -> Result<Vec<Vec<Rat>>> {
    let mut v = vec![vec![Rat::zero(); inst.m]; inst.k];
    for i in 0..inst.k {
        let tp = profile[i];
        let pr = &dist.weights[i][tp];
        if !pr.is_positive() {
            return Err(Error::Domain(format!(
                "bidder {i} type {tp} has zero empirical probability"
            )));
        }
        for (t, tvec) in inst.types[i].iter().enumerate() {
            let coeff = &dir.w[i][t][tp] / pr;
            if coeff.is_zero() {
                continue;
            }
            for j in 0..inst.m {
                v[i][j] += &coeff * &tvec[j];
            }
        }
    }
    Ok(v)
}

/// The per-realization virtual objective: the objective weighted by `w_O`
/// plus the virtual value terms. Its expectation over the distribution
/// equals the direction's functional applied to the rule's implicit form.
pub fn virtual_objective(
    inst: &BmedInstance,
    dist: &Dprime,
    dir: &Direction,
    profile: &[usize],
    x: &Assignment,
) -> Result<Rat> {
    let mut total = &dir.w_o * inst.objective_value(profile, x)?;
    let v = virtual_costs(inst, dist, dir, profile)?;
    for i in 0..inst.k {
        for j in 0..inst.m {
            if x.x[i][j] {
                total += &v[i][j];
            }
        }
    }
    Ok(total)
}

/// Which scheduling solver backs the mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoopHandle {
    /// Makespan minimization through the threshold-LP + slot-rounding
    /// pipeline; guarantee `(1/2)M + C <= OPT`.
    Makespan,
    /// Fairness maximization through per-threshold matchings with dummy
    /// machines; guarantee `(m-k+1)F + C >= OPT`.
    FairnessBd,
}

impl GoopHandle {
    pub fn objective(&self) -> Objective {
        match self {
            GoopHandle::Makespan => Objective::Makespan,
            GoopHandle::FairnessBd => Objective::Fairness,
        }
    }

    pub fn maximize(&self) -> bool {
        matches!(self, GoopHandle::FairnessBd)
    }

    pub fn alpha(&self) -> Rat {
        Rat::one()
    }

    pub fn beta(&self, k: usize, m: usize) -> Rat {
        match self {
            GoopHandle::Makespan => rat(1, 2),
            GoopHandle::FairnessBd => int((m.saturating_sub(k) + 1) as i64),
        }
    }
}

/// Deterministic allocation rule a direction induces at a profile.
pub fn rule_for_direction(
    inst: &BmedInstance,
    dist: &Dprime,
    handle: GoopHandle,
    dir: &Direction,
    profile: &[usize],
) -> Result<Assignment> {
    if handle.objective() != inst.objective {
        return Err(Error::Structure(String::from(
            "solver handle does not match the instance objective",
        )));
    }
    let v = virtual_costs(inst, dist, dir, profile)?;
    match handle {
        GoopHandle::Makespan => {
            if dir.w_o.is_positive() {
                // Minimize w_O * makespan + virtual cost: divide through by
                // w_O and run the cost-aware makespan solver.
                let c: Vec<Vec<Rat>> = v
                    .iter()
                    .map(|row| row.iter().map(|x| x / &dir.w_o).collect())
                    .collect();
                let sub = inst.profile_instance(profile, Some(c))?;
                solve_makespan_with_costs(&sub)
            } else {
                // Objective weight nonpositive: minimize the virtual cost
                // exactly (each job to its cheapest machine).
                let machines: Vec<Option<usize>> = (0..inst.m)
                    .map(|j| {
                        let mut best = 0usize;
                        for i in 1..inst.k {
                            if v[i][j] < v[best][j] {
                                best = i;
                            }
                        }
                        Some(best)
                    })
                    .collect();
                Ok(Assignment::from_machines(inst.k, &machines))
            }
        }
        GoopHandle::FairnessBd => {
            if dir.w_o.is_positive() {
                let c: Vec<Vec<Rat>> = v
                    .iter()
                    .map(|row| row.iter().map(|x| x / &dir.w_o).collect())
                    .collect();
                let sub = inst.profile_instance(profile, Some(c))?;
                bd_solve(&sub)
            } else {
                // Maximize the virtual value exactly; discarding is allowed.
                let machines: Vec<Option<usize>> = (0..inst.m)
                    .map(|j| {
                        let mut best = 0usize;
                        for i in 1..inst.k {
                            if v[i][j] > v[best][j] {
                                best = i;
                            }
                        }
                        if v[best][j].is_positive() {
                            Some(best)
                        } else {
                            None
                        }
                    })
                    .collect();
                Ok(Assignment::from_machines(inst.k, &machines))
            }
        }
    }
}

const PROFILE_CAP: usize = 100_000;

/// All profiles over the full type sets, lexicographic.
pub fn all_profiles(inst: &BmedInstance) -> Result<Vec<Vec<usize>>> {
    let mut total = 1usize;
    for ts in &inst.types {
        total = total.saturating_mul(ts.len());
        if total > PROFILE_CAP {
            return Err(Error::Capacity(format!(
                "profile space exceeds the cap {PROFILE_CAP}"
            )));
        }
    }
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for ts in &inst.types {
        let mut next = Vec::with_capacity(out.len() * ts.len());
        for prefix in &out {
            for t in 0..ts.len() {
                let mut p = prefix.clone();
                p.push(t);
                next.push(p);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Runs the backing solver on every profile for one direction and reports
/// the induced rule together with its implicit form. The form's objective
/// component is the solver's certified value: the rule's true expected
/// objective when `w_O` points the helpful way, and the worst-case cap
/// otherwise (scaled so the bi-criterion guarantee holds after the
/// objective coordinate is multiplied by beta).
pub fn goop_adapter(
    inst: &BmedInstance,
    dist: &Dprime,
    handle: GoopHandle,
    dir: &Direction,
) -> Result<(ImplicitForm, BTreeMap<Vec<usize>, Assignment>)> {
    if !dist.full_support() {
        return Err(Error::Domain(String::from(
            "empirical distribution must cover every type; increase samples",
        )));
    }
    let mut rules = BTreeMap::new();
    for profile in all_profiles(inst)? {
        let x = rule_for_direction(inst, dist, handle, dir, &profile)?;
        rules.insert(profile, x);
    }
    let mut lookup = |profile: &[usize]| -> Result<Assignment> {
        rules
            .get(profile)
            .cloned()
            .ok_or_else(|| Error::Invariant(String::from("rule missing a profile")))
    };
    let mut form = crate::oracle::implicit_form_of(inst, dist, &mut lookup)?;
    if !dir.w_o.is_positive() {
        let beta = handle.beta(inst.k, inst.m);
        if handle.maximize() {
            // A nonpositive weight makes the objective coordinate worthless;
            // report zero so the scaled guarantee holds with equality.
            form.o = Rat::zero();
        } else if dir.w_o.is_negative() {
            // Report the 1-bounded objective cap, pre-divided by beta so the
            // beta-scaled coordinate equals the cap exactly.
            form.o = Rat::one() / beta;
        }
    }
    Ok((form, rules))
}

/// Adapter exposing the per-direction solver as a bi-criterion optimization
/// algorithm over the allocation part `(O, pi)` of implicit forms.
/// Evaluations are cached by direction.
pub struct GoopAlg<'a> {
    inst: &'a BmedInstance,
    dist: &'a Dprime,
    handle: GoopHandle,
    layout: Layout,
    spec: AlgSpec,
    cache: BTreeMap<Vec<Rat>, Vec<Rat>>,
}

impl<'a> GoopAlg<'a> {
    pub fn new(inst: &'a BmedInstance, dist: &'a Dprime, handle: GoopHandle) -> Result<Self> {
        if !dist.full_support() {
            return Err(Error::Domain(String::from(
                "empirical distribution must cover every type; increase samples",
            )));
        }
        let layout = Layout::for_instance(inst);
        let spec = AlgSpec {
            alpha: handle.alpha(),
            beta: handle.beta(inst.k, inst.m),
            scaled: vec![0],
            maximize: handle.maximize(),
        };
        Ok(GoopAlg {
            inst,
            dist,
            handle,
            layout,
            spec,
            cache: BTreeMap::new(),
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }
}

impl OptimizationAlgorithm for GoopAlg<'_> {
    fn spec(&self) -> &AlgSpec {
        &self.spec
    }

    fn evaluate(&mut self, w: &[Rat]) -> Result<Vec<Rat>> {
        if let Some(v) = self.cache.get(w) {
            return Ok(v.clone());
        }
        let dir = Direction::from_vec(&self.layout, w)?;
        let (form, _) = goop_adapter(self.inst, self.dist, self.handle, &dir)?;
        let out = form.alloc_vec(&self.layout);
        self.cache.insert(w.to_vec(), out.clone());
        Ok(out)
    }
}

/// Checks every truthfulness inequality on a full implicit-form vector:
/// `pi_i(t,t) - p_i(t) >= pi_i(t,t') - p_i(t')` and `pi_i(t,t) - p_i(t) >= 0`.
/// Returns the first violated inequality as a halfspace.
pub fn truthfulness_oracle(layout: &Layout, z: &[Rat]) -> Result<OracleReply> {
    if z.len() != layout.total {
        return Err(Error::Structure(String::from(
            "truthfulness check requires a full implicit-form vector",
        )));
    }
    for (i, &n) in layout.counts.iter().enumerate() {
        for t in 0..n {
            let truthful = &z[layout.pi(i, t, t)] - &z[layout.p(i, t)];
            if truthful.is_negative() {
                let mut normal = vec![Rat::zero(); layout.total];
                normal[layout.pi(i, t, t)] = Rat::one();
                normal[layout.p(i, t)] = -Rat::one();
                return Ok(OracleReply::Cut(Halfspace {
                    normal,
                    offset: Rat::zero(),
                }));
            }
            for tp in 0..n {
                if tp == t {
                    continue;
                }
                let deviate = &z[layout.pi(i, t, tp)] - &z[layout.p(i, tp)];
                if truthful < deviate {
                    let mut normal = vec![Rat::zero(); layout.total];
                    normal[layout.pi(i, t, t)] = Rat::one();
                    normal[layout.p(i, t)] = -Rat::one();
                    normal[layout.pi(i, t, tp)] = -Rat::one();
                    normal[layout.p(i, tp)] = Rat::one();
                    return Ok(OracleReply::Cut(Halfspace {
                        normal,
                        offset: Rat::zero(),
                    }));
                }
            }
        }
    }
    Ok(OracleReply::Accept)
}

/// A synthesized mechanism: a lottery over directions, each realized by a
/// deterministic solver run, plus the pricing targets read off the solved
/// implicit form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mechanism {
    pub handle: GoopHandle,
    pub directions: Vec<Direction>,
    pub weights: Vec<Rat>,
    pub dist: Dprime,
    /// `pi_diag[i][t]`: target interim value of truthful type `t`.
    pub pi_diag: Vec<Vec<Rat>>,
    /// `prices[i][t]`: target interim price.
    pub prices: Vec<Vec<Rat>>,
}

/// Outcome of the synthesis: the mechanism and the solved implicit form.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub mechanism: Mechanism,
    pub solved: ImplicitForm,
    pub decomposition: AcceptData,
    /// Objective level certified by the search.
    pub level: Rat,
}

/// Empirical-distribution sample count sized against the target error.
pub fn default_sample_count(inst: &BmedInstance, epsilon: &Rat) -> usize {
    let max_types = inst.type_counts().into_iter().max().unwrap_or(1);
    let bound = int((64 * inst.k * max_types) as i64) / (epsilon * epsilon);
    (bound.ceil().to_integer().to_usize().unwrap_or(1)).max(1)
}

/// Tuned search parameters for the reduction; looser tolerances than the
/// geometry defaults, sized against the target additive error.
pub fn reduce_config(dim: usize, epsilon: &Rat) -> EllipsoidConfig {
    EllipsoidConfig {
        max_iters: 160 * dim,
        delta: epsilon / int(128),
        radius: int(dim as i64),
        precision_bits: 96,
        max_alg_queries: 2_000_000,
        decomp_tol: epsilon / int(32),
    }
}

/// Synthesizes an approximately optimal truthful mechanism.
///
/// Pipeline: draw the empirical distribution, wrap the scheduling solver as
/// a bi-criterion algorithm over implicit forms, and binary-search the best
/// objective level whose slice of the truthful region intersects the
/// (beta-scaled) reachable hull. The accepted point is decomposed into a
/// lottery over solver directions; prices come from the solved form.
pub fn bmed_reduce(
    inst: &BmedInstance,
    handle: GoopHandle,
    epsilon: &Rat,
    seed: u64,
    samples: Option<usize>,
) -> Result<Reduction> {
    if !epsilon.is_positive() {
        return Err(Error::Structure(String::from("epsilon must be positive")));
    }
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let n = samples.unwrap_or_else(|| default_sample_count(inst, epsilon));
    let dist = sample_dprime(inst, n, &mut rng)?;
    if !dist.full_support() {
        return Err(Error::Domain(String::from(
            "empirical distribution missed a type; increase the sample count",
        )));
    }
    reduce_with_dist(inst, handle, epsilon, dist)
}

/// The deterministic part of the reduction, starting from a fixed
/// empirical distribution.
pub fn reduce_with_dist(
    inst: &BmedInstance,
    handle: GoopHandle,
    epsilon: &Rat,
    dist: Dprime,
) -> Result<Reduction> {
    let cfg = reduce_config(Layout::for_instance(inst).total, epsilon);
    reduce_with_dist_cfg(inst, handle, epsilon, dist, cfg)
}

/// As [`reduce_with_dist`], with explicit search parameters.
pub fn reduce_with_dist_cfg(
    inst: &BmedInstance,
    handle: GoopHandle,
    epsilon: &Rat,
    dist: Dprime,
    cfg: EllipsoidConfig,
) -> Result<Reduction> {
    let layout = Layout::for_instance(inst);
    let dim = layout.total;
    let alloc_dim = layout.alloc_dim();
    let maximize = handle.maximize();
    let mut alg = GoopAlg::new(inst, &dist, handle)?;
    let mut hints: Vec<Vec<Rat>> = Vec::new();

    let probe = |level: &Rat,
                     hints: &mut Vec<Vec<Rat>>,
                     alg: &mut GoopAlg|
     -> Result<Option<(Vec<Rat>, AcceptData)>> {
        let mut best: Option<(Vec<Rat>, AcceptData)> = None;
        {
            let mut oracle = |z: &[Rat]| -> Result<OracleReply> {
                // Bounding box: O and interim values in [0,1], prices in
                // [-1,1].
                for (idx, v) in z.iter().enumerate() {
                    let (lo, hi) = if idx < alloc_dim {
                        (Rat::zero(), Rat::one())
                    } else {
                        (-Rat::one(), Rat::one())
                    };
                    if *v < lo {
                        let mut normal = vec![Rat::zero(); dim];
                        normal[idx] = Rat::one();
                        return Ok(OracleReply::Cut(Halfspace { normal, offset: lo }));
                    }
                    if *v > hi {
                        let mut normal = vec![Rat::zero(); dim];
                        normal[idx] = -Rat::one();
                        return Ok(OracleReply::Cut(Halfspace {
                            normal,
                            offset: -hi,
                        }));
                    }
                }
                // Objective level.
                let level_ok = if maximize {
                    z[0] >= *level
                } else {
                    z[0] <= *level
                };
                if !level_ok {
                    let mut normal = vec![Rat::zero(); dim];
                    let offset = if maximize {
                        normal[0] = Rat::one();
                        level.clone()
                    } else {
                        normal[0] = -Rat::one();
                        -level.clone()
                    };
                    return Ok(OracleReply::Cut(Halfspace { normal, offset }));
                }
                match truthfulness_oracle(&layout, z)? {
                    OracleReply::Accept => {}
                    cut => return Ok(cut),
                }
                // Allocation part against the reachable hull; price
                // coordinates are unconstrained by it, so lifted cuts carry
                // zero price coefficients.
                let y = &z[..alloc_dim];
                match wso(y, alg, &cfg, hints)? {
                    WsoOutcome::Accept(acc) => {
                        best = Some((z.to_vec(), acc));
                        Ok(OracleReply::Accept)
                    }
                    WsoOutcome::Reject(h) => {
                        let mut normal = h.normal;
                        normal.resize(dim, Rat::zero());
                        Ok(OracleReply::Cut(Halfspace {
                            normal,
                            offset: h.offset,
                        }))
                    }
                }
            };
            ellipsoid_feasibility(&mut oracle, dim, &cfg)?;
        }
        Ok(best)
    };

    // Binary search on the objective level over [0, 1].
    let mut lo = Rat::zero();
    let mut hi = Rat::one();
    let loose = if maximize { lo.clone() } else { hi.clone() };
    let mut best = probe(&loose, &mut hints, &mut alg)?.ok_or_else(|| {
        Error::Infeasible(String::from(
            "no truthful implicit form found at the loose objective level",
        ))
    })?;
    let mut level = loose;
    let tol = epsilon / int(8);
    while &hi - &lo > tol {
        let mid = crate::num::truncate_bits(&((&lo + &hi) / int(2)), 64);
        match probe(&mid, &mut hints, &mut alg)? {
            Some(found) => {
                best = found;
                level = mid.clone();
                if maximize {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            None => {
                if maximize {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
    }

    let (point, acc) = best;
    let solved = ImplicitForm::from_vec(&layout, &point)?;
    let directions = acc
        .directions
        .iter()
        .map(|w| Direction::from_vec(&layout, w))
        .collect::<Result<Vec<_>>>()?;
    // Normalize the lottery exactly (the decomposition LP allows a residual).
    let total: Rat = acc.weights.iter().fold(Rat::zero(), |a, w| a + w);
    if !total.is_positive() {
        return Err(Error::Invariant(String::from(
            "accepted decomposition has no support",
        )));
    }
    let weights: Vec<Rat> = acc.weights.iter().map(|w| w / &total).collect();
    let mechanism = Mechanism {
        handle,
        directions,
        weights,
        dist,
        pi_diag: solved
            .pi
            .iter()
            .map(|m| m.iter().enumerate().map(|(t, row)| row[t].clone()).collect())
            .collect(),
        prices: solved.p.clone(),
    };
    Ok(Reduction {
        mechanism,
        solved,
        decomposition: acc,
        level,
    })
}

use rand_core::SeedableRng as _;

/// Runs the mechanism on a reported profile: samples a direction from the
/// lottery, solves the induced virtual problem, and charges each bidder
/// `P_i = t_i(x) - (pi_i(t,t) - p_i(t))`, so a truthful bidder's realized
/// utility equals its target interim utility exactly.
pub fn run_mechanism(
    mech: &Mechanism,
    inst: &BmedInstance,
    report: &[usize],
    rng: &mut dyn RngCore,
) -> Result<(Assignment, Vec<Rat>)> {
    if report.len() != inst.k
        || report
            .iter()
            .enumerate()
            .any(|(i, &t)| t >= inst.types[i].len())
    {
        return Err(Error::Domain(String::from(
            "reported profile does not index the instance's type sets",
        )));
    }
    let j = pick_weighted(&mech.weights, rng);
    let x = rule_for_direction(inst, &mech.dist, mech.handle, &mech.directions[j], report)?;
    let prices = (0..inst.k)
        .map(|i| {
            let t = report[i];
            inst.type_value(i, t, &x) - (&mech.pi_diag[i][t] - &mech.prices[i][t])
        })
        .collect();
    Ok((x, prices))
}

/// One estimated regret entry: how much bidder `i` of type `t` gains in
/// expectation by reporting `t_alt` instead.
#[derive(Debug, Clone)]
pub struct RegretEntry {
    pub bidder: usize,
    pub t: usize,
    pub t_alt: usize,
    pub mean: Rat,
    pub std_err: Rat,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub n_runs: usize,
    pub mean_objective: Rat,
    pub objective_std_err: Rat,
    pub regrets: Vec<RegretEntry>,
    pub max_regret: Rat,
    pub max_regret_std_err: Rat,
    /// Realizations where some truthful bidder had negative utility.
    pub ir_violations: usize,
    /// Empirical mean price per (bidder, type) under truthful play.
    pub mean_prices: Vec<Vec<Rat>>,
    pub price_samples: Vec<Vec<usize>>,
}

fn std_err(sum: &Rat, sum_sq: &Rat, n: usize) -> Rat {
    if n < 2 {
        return Rat::zero();
    }
    let n_rat = int(n as i64);
    let mean = sum / &n_rat;
    let var = (sum_sq / &n_rat - &mean * &mean) * &n_rat / int((n - 1) as i64);
    let var = if var.is_negative() { Rat::zero() } else { var };
    crate::num::sqrt_floor(&(var / &n_rat), 48)
}

/// Monte Carlo audit of a mechanism against the true prior: estimates the
/// expected objective, every pairwise misreport regret, and truthful-play
/// prices; counts exact individual-rationality violations per realization.
pub fn verify_mechanism(
    mech: &Mechanism,
    inst: &BmedInstance,
    n_runs: usize,
    seed: u64,
) -> Result<VerifyReport> {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let profiles = all_profiles(inst)?;
    // Precompute every (profile, direction) allocation once; runs are then
    // table lookups.
    let mut table: BTreeMap<(Vec<usize>, usize), Assignment> = BTreeMap::new();
    for profile in &profiles {
        for (j, dir) in mech.directions.iter().enumerate() {
            let x = rule_for_direction(inst, &mech.dist, mech.handle, dir, profile)?;
            table.insert((profile.clone(), j), x);
        }
    }
    let counts = inst.type_counts();
    let mut sum_o = Rat::zero();
    let mut sum_o_sq = Rat::zero();
    let mut ir_violations = 0usize;
    let mut regret_sum: Vec<Vec<Vec<Rat>>> = counts
        .iter()
        .map(|&n| vec![vec![Rat::zero(); n]; n])
        .collect();
    let mut regret_sq: Vec<Vec<Vec<Rat>>> = regret_sum.clone();
    let mut regret_n: Vec<Vec<Vec<usize>>> =
        counts.iter().map(|&n| vec![vec![0usize; n]; n]).collect();
    let mut price_sum: Vec<Vec<Rat>> = counts.iter().map(|&n| vec![Rat::zero(); n]).collect();
    let mut price_n: Vec<Vec<usize>> = counts.iter().map(|&n| vec![0usize; n]).collect();

    for _ in 0..n_runs {
        let profile: Vec<usize> = inst
            .probs
            .iter()
            .map(|row| pick_weighted(row, &mut rng))
            .collect();
        let j = pick_weighted(&mech.weights, &mut rng);
        let x = &table[&(profile.clone(), j)];
        let o = inst.objective_value(&profile, x)?;
        sum_o += &o;
        sum_o_sq += &o * &o;
        let mut violated = false;
        for i in 0..inst.k {
            let t = profile[i];
            let value = inst.type_value(i, t, x);
            let price = &value - (&mech.pi_diag[i][t] - &mech.prices[i][t]);
            let utility = &value - &price;
            if utility.is_negative() {
                violated = true;
            }
            price_sum[i][t] += &price;
            price_n[i][t] += 1;
            // Counterfactual misreports share the sampled direction and
            // opponents.
            for t_alt in 0..counts[i] {
                if t_alt == t {
                    continue;
                }
                let mut alt_profile = profile.clone();
                alt_profile[i] = t_alt;
                let x_alt = &table[&(alt_profile, j)];
                let mis_utility = inst.type_value(i, t, x_alt)
                    - inst.type_value(i, t_alt, x_alt)
                    + (&mech.pi_diag[i][t_alt] - &mech.prices[i][t_alt]);
                let regret = mis_utility - &utility;
                regret_sum[i][t][t_alt] += &regret;
                regret_sq[i][t][t_alt] += &regret * &regret;
                regret_n[i][t][t_alt] += 1;
            }
        }
        if violated {
            ir_violations += 1;
        }
    }

    let n_rat = int(n_runs.max(1) as i64);
    let mut regrets = Vec::new();
    let mut max_regret = Rat::zero();
    let mut max_regret_std_err = Rat::zero();
    for i in 0..inst.k {
        for t in 0..counts[i] {
            for t_alt in 0..counts[i] {
                if t_alt == t || regret_n[i][t][t_alt] == 0 {
                    continue;
                }
                let n = regret_n[i][t][t_alt];
                let mean = &regret_sum[i][t][t_alt] / int(n as i64);
                let se = std_err(&regret_sum[i][t][t_alt], &regret_sq[i][t][t_alt], n);
                if regrets.is_empty() || mean > max_regret {
                    max_regret = mean.clone();
                    max_regret_std_err = se.clone();
                }
                regrets.push(RegretEntry {
                    bidder: i,
                    t,
                    t_alt,
                    mean,
                    std_err: se,
                    samples: n,
                });
            }
        }
    }
    let mean_prices = price_sum
        .iter()
        .zip(&price_n)
        .map(|(sums, ns)| {
            sums.iter()
                .zip(ns)
                .map(|(s, &n)| if n == 0 { Rat::zero() } else { s / int(n as i64) })
                .collect()
        })
        .collect();
    Ok(VerifyReport {
        n_runs,
        mean_objective: &sum_o / &n_rat,
        objective_std_err: std_err(&sum_o, &sum_o_sq, n_runs),
        regrets,
        max_regret,
        max_regret_std_err,
        ir_violations,
        mean_prices,
        price_samples: price_n,
    })
}

// Keep a stable helper for converting BigUint sample counts if needed later.
#[allow(dead_code)]
fn biguint_ratio(num: &BigUint, den: &BigUint) -> Rat {
    Rat::new(num.clone().into(), den.clone().into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{dot, int, rat};
    use crate::oracle::{brute_goop, implicit_form_of};
    use rand_chacha::ChaCha12Rng;
    use rand_core::SeedableRng;

    fn two_by_two() -> BmedInstance {
        BmedInstance::new(
            vec![
                vec![vec![rat(3, 10), rat(7, 10)], vec![rat(1, 2), rat(1, 5)]],
                vec![vec![rat(3, 5), rat(1, 10)], vec![rat(1, 4), rat(9, 20)]],
            ],
            vec![
                vec![rat(1, 2), rat(1, 2)],
                vec![rat(1, 4), rat(3, 4)],
            ],
            Objective::Makespan,
        )
        .unwrap()
    }

    #[test]
    fn dprime_single_type_support() {
        let inst = BmedInstance::new(
            vec![vec![vec![rat(1, 2)]]],
            vec![vec![int(1)]],
            Objective::Makespan,
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let d = sample_dprime(&inst, 5, &mut rng).unwrap();
        assert_eq!(d.weights, vec![vec![int(1)]]);
        assert_eq!(d.support_profiles(), vec![vec![0]]);
    }

    #[test]
    fn dprime_deterministic_and_concentrated() {
        let inst = two_by_two();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let a = sample_dprime(&inst, 2000, &mut rng).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let b = sample_dprime(&inst, 2000, &mut rng).unwrap();
        assert_eq!(a, b);
        // Frequency of bidder 0 type 0 within 3 binomial sigmas of 1/2:
        // 3*sqrt(0.25/2000) ~ 0.0336.
        let diff = (&a.weights[0][0] - rat(1, 2)).abs();
        assert!(diff < rat(34, 1000), "empirical frequency off: {a:?}");
    }

    #[test]
    fn virtual_objective_reduces_to_objective() {
        let inst = two_by_two();
        let layout = Layout::for_instance(&inst);
        let dist = Dprime::prior(&inst);
        let mut v = vec![Rat::zero(); layout.alloc_dim()];
        v[0] = int(1);
        let dir = Direction::from_vec(&layout, &v).unwrap();
        let x = Assignment::from_machines(2, &[Some(0), Some(1)]);
        let got = virtual_objective(&inst, &dist, &dir, &[0, 1], &x).unwrap();
        assert_eq!(got, inst.objective_value(&[0, 1], &x).unwrap());
    }

    #[test]
    fn virtual_objective_probability_cancels() {
        let inst = two_by_two();
        let dist = Dprime::prior(&inst);
        let layout = Layout::for_instance(&inst);
        // Single nonzero interim weight w_0(t=1, t'=0) equal to Pr[t'=0].
        let mut v = vec![Rat::zero(); layout.alloc_dim()];
        v[layout.pi(0, 1, 0)] = dist.weights[0][0].clone();
        let dir = Direction::from_vec(&layout, &v).unwrap();
        let x = Assignment::from_machines(2, &[Some(0), Some(0)]);
        let got = virtual_objective(&inst, &dist, &dir, &[0, 0], &x).unwrap();
        assert_eq!(got, inst.type_value(0, 1, &x));
    }

    fn random_direction(layout: &Layout, rng: &mut ChaCha12Rng) -> Direction {
        let v: Vec<Rat> = (0..layout.alloc_dim())
            .map(|_| rat((rng.next_u32() % 41) as i64 - 20, 20))
            .collect();
        Direction::from_vec(layout, &v).unwrap()
    }

    #[test]
    fn interim_functional_matches_expected_virtual_objective() {
        let inst = two_by_two();
        let layout = Layout::for_instance(&inst);
        let dist = Dprime::prior(&inst);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            // Random deterministic rule over all profiles.
            let mut rules: BTreeMap<Vec<usize>, Assignment> = BTreeMap::new();
            for profile in all_profiles(&inst).unwrap() {
                let machines: Vec<Option<usize>> = (0..inst.m)
                    .map(|_| Some((rng.next_u32() % inst.k as u32) as usize))
                    .collect();
                rules.insert(profile, Assignment::from_machines(inst.k, &machines));
            }
            let mut lookup = |p: &[usize]| Ok(rules[p].clone());
            let form = implicit_form_of(&inst, &dist, &mut lookup).unwrap();
            let dir = random_direction(&layout, &mut rng);
            let lhs = dot(&dir.to_vec(&layout), &form.alloc_vec(&layout));
            let mut rhs = Rat::zero();
            for profile in dist.support_profiles() {
                let w = dist.profile_prob(&profile);
                let vo = virtual_objective(&inst, &dist, &dir, &profile, &rules[&profile])
                    .unwrap();
                rhs += w * vo;
            }
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn truthfulness_oracle_examples() {
        let inst = two_by_two();
        let layout = Layout::for_instance(&inst);
        let zero = vec![Rat::zero(); layout.total];
        assert!(matches!(
            truthfulness_oracle(&layout, &zero).unwrap(),
            OracleReply::Accept
        ));
        // Price without value: IR violated.
        let mut bad = zero.clone();
        bad[layout.p(0, 0)] = int(1);
        let OracleReply::Cut(h) = truthfulness_oracle(&layout, &bad).unwrap() else {
            panic!("expected a violated inequality");
        };
        assert!(!h.contains(&bad));
        // Constant rule: same outcome regardless of reports, prices zero.
        let dist = Dprime::prior(&inst);
        let x0 = Assignment::from_machines(2, &[Some(0), Some(1)]);
        let mut lookup = |_: &[usize]| Ok(x0.clone());
        let form = implicit_form_of(&inst, &dist, &mut lookup).unwrap();
        assert!(matches!(
            truthfulness_oracle(&layout, &form.to_vec(&layout)).unwrap(),
            OracleReply::Accept
        ));
    }

    #[test]
    fn adapter_pure_objective_direction() {
        let inst = two_by_two();
        let layout = Layout::for_instance(&inst);
        let dist = Dprime::prior(&inst);
        let mut v = vec![Rat::zero(); layout.alloc_dim()];
        v[0] = int(1);
        let dir = Direction::from_vec(&layout, &v).unwrap();
        let (form, rules) = goop_adapter(&inst, &dist, GoopHandle::Makespan, &dir).unwrap();
        // The certified objective must be within factor 1/beta of the mean
        // per-profile exact optimum, and the beta-scaled coordinate at most
        // the exact mean (the bi-criterion guarantee at w = e_O).
        let mut exact_mean = Rat::zero();
        for profile in dist.support_profiles() {
            let sub = inst.profile_instance(&profile, None).unwrap();
            let (opt, _) = brute_goop(&sub, Objective::Makespan).unwrap();
            exact_mean += dist.profile_prob(&profile) * opt.expect_finite("makespan");
        }
        assert!(rat(1, 2) * &form.o <= exact_mean);
        // The rule's true expected objective equals the reported one here.
        let mut true_o = Rat::zero();
        for profile in dist.support_profiles() {
            let w = dist.profile_prob(&profile);
            true_o += w * inst.objective_value(&profile, &rules[&profile]).unwrap();
        }
        assert_eq!(true_o, form.o);
    }

    #[test]
    fn adapter_negative_objective_weight_uses_cap() {
        let inst = two_by_two();
        let layout = Layout::for_instance(&inst);
        let dist = Dprime::prior(&inst);
        let mut v = vec![Rat::zero(); layout.alloc_dim()];
        v[0] = int(-1);
        let dir = Direction::from_vec(&layout, &v).unwrap();
        let (form, _) = goop_adapter(&inst, &dist, GoopHandle::Makespan, &dir).unwrap();
        // Cap pre-divided by beta = 1/2.
        assert_eq!(form.o, int(2));
    }

    #[test]
    fn reduce_single_bidder_single_type() {
        let inst = BmedInstance::new(
            vec![vec![vec![rat(1, 2), rat(1, 4)]]],
            vec![vec![int(1)]],
            Objective::Makespan,
        )
        .unwrap();
        let eps = rat(1, 4);
        let red = bmed_reduce(&inst, GoopHandle::Makespan, &eps, 5, Some(16)).unwrap();
        let total: Rat = red.mechanism.weights.iter().fold(Rat::zero(), |a, w| a + w);
        assert_eq!(total, int(1));
        // Exact optimum: both jobs must run on the lone machine.
        let opt = rat(3, 4);
        // Expected objective of the lottery is at most (alpha/beta) OPT + eps.
        let mut e_o = Rat::zero();
        for (dir, w) in red.mechanism.directions.iter().zip(&red.mechanism.weights) {
            let x = rule_for_direction(&inst, &red.mechanism.dist, GoopHandle::Makespan, dir, &[0])
                .unwrap();
            e_o += w * inst.objective_value(&[0], &x).unwrap();
        }
        assert!(e_o <= int(2) * &opt + &eps, "expected objective {e_o}");
        // Truthful run never leaves negative utility.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let (x, prices) = run_mechanism(&red.mechanism, &inst, &[0], &mut rng).unwrap();
        let utility = inst.type_value(0, 0, &x) - &prices[0];
        assert!(!utility.is_negative());
        // Single type: regret is vacuous, IR violations zero.
        let report = verify_mechanism(&red.mechanism, &inst, 200, 13).unwrap();
        assert!(report.regrets.is_empty());
        assert_eq!(report.ir_violations, 0);
    }

    #[test]
    fn run_mechanism_rejects_unknown_type() {
        let inst = BmedInstance::new(
            vec![vec![vec![rat(1, 2)]]],
            vec![vec![int(1)]],
            Objective::Makespan,
        )
        .unwrap();
        let eps = rat(1, 2);
        let red = bmed_reduce(&inst, GoopHandle::Makespan, &eps, 5, Some(4)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert!(run_mechanism(&red.mechanism, &inst, &[3], &mut rng).is_err());
    }
}
