//! Scheduling instances and exact objective evaluation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::num::{Ext, Rat};

/// One scheduling problem: `k` machines, `m` jobs, a processing-time matrix
/// and a per-assignment cost matrix (costs may be negative).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulingInstance {
    pub k: usize,
    pub m: usize,
    /// `p[i][j]`: time for machine `i` to process job `j`. Nonnegative.
    pub p: Vec<Vec<Rat>>,
    /// `c[i][j]`: cost collected when job `j` runs on machine `i`.
    pub c: Vec<Vec<Rat>>,
    /// Set when every `p[i][j]` lies in `[0,1]`.
    pub normalized: bool,
}

impl SchedulingInstance {
    pub fn new(p: Vec<Vec<Rat>>, c: Vec<Vec<Rat>>) -> Result<Self> {
        let k = p.len();
        if k == 0 {
            return Err(Error::Structure(String::from("need at least one machine")));
        }
        let m = p[0].len();
        if m == 0 {
            return Err(Error::Structure(String::from("need at least one job")));
        }
        if c.len() != k || p.iter().any(|r| r.len() != m) || c.iter().any(|r| r.len() != m) {
            return Err(Error::Structure(format!(
                "matrix shapes disagree: expected {k}x{m}"
            )));
        }
        for row in &p {
            for q in row {
                if q < &Rat::zero() {
                    return Err(Error::Structure(String::from(
                        "processing times must be nonnegative",
                    )));
                }
            }
        }
        let normalized = p.iter().flatten().all(|q| q <= &Rat::one());
        Ok(SchedulingInstance {
            k,
            m,
            p,
            c,
            normalized,
        })
    }

    /// Divides all processing times by `scale`, producing an instance whose
    /// times lie in `[0,1]` when `scale` bounds the largest entry. Returns the
    /// rescaled instance; callers keep `scale` to undo the change on reported
    /// objective values.
    pub fn normalize(&self, scale: &Rat) -> Result<Self> {
        if !scale.is_positive() {
            return Err(Error::Domain(String::from("scale must be positive")));
        }
        let p = self
            .p
            .iter()
            .map(|row| row.iter().map(|q| q / scale).collect())
            .collect();
        SchedulingInstance::new(p, self.c.clone())
    }

    fn check_shape(&self, x: &[Vec<Rat>]) -> Result<()> {
        if x.len() != self.k || x.iter().any(|r| r.len() != self.m) {
            return Err(Error::Structure(format!(
                "assignment shape disagrees with {}x{} instance",
                self.k, self.m
            )));
        }
        Ok(())
    }
}

/// Integral job-to-machine map: `x[i][j] ∈ {0,1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub x: Vec<Vec<bool>>,
}

impl Assignment {
    /// `machine[j]`: where job `j` goes, `None` to discard it.
    pub fn from_machines(k: usize, machines: &[Option<usize>]) -> Self {
        let mut x = alloc::vec![alloc::vec![false; machines.len()]; k];
        for (j, mi) in machines.iter().enumerate() {
            if let Some(i) = mi {
                x[*i][j] = true;
            }
        }
        Assignment { x }
    }

    pub fn to_fractional(&self) -> FractionalAssignment {
        FractionalAssignment {
            x: self
                .x
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&b| if b { Rat::one() } else { Rat::zero() })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Fractional job-to-machine map: `x[i][j] ∈ [0,1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalAssignment {
    pub x: Vec<Vec<Rat>>,
}

impl FractionalAssignment {
    pub fn zero(k: usize, m: usize) -> Self {
        FractionalAssignment {
            x: alloc::vec![alloc::vec![Rat::zero(); m]; k],
        }
    }

    pub fn column_sum(&self, j: usize) -> Rat {
        self.x.iter().fold(Rat::zero(), |acc, row| acc + &row[j])
    }

    pub fn is_integral(&self) -> bool {
        self.x
            .iter()
            .flatten()
            .all(|q| q.is_zero() || q.is_one())
    }
}

fn loads(inst: &SchedulingInstance, x: &[Vec<Rat>]) -> Vec<Rat> {
    (0..inst.k)
        .map(|i| {
            (0..inst.m).fold(Rat::zero(), |acc, j| acc + &x[i][j] * &inst.p[i][j])
        })
        .collect()
}

/// Largest machine load; `+inf` when some job's column does not sum to
/// exactly one.
pub fn makespan(inst: &SchedulingInstance, a: &FractionalAssignment) -> Result<Ext> {
    inst.check_shape(&a.x)?;
    for j in 0..inst.m {
        if a.column_sum(j) != Rat::one() {
            return Ok(Ext::PosInf);
        }
    }
    Ok(Ext::Finite(
        loads(inst, &a.x).into_iter().max().expect("k >= 1"),
    ))
}

/// Smallest machine load; `-inf` when some job is assigned with total weight
/// above one. Under-assigned (discarded) jobs are fine.
pub fn fairness(inst: &SchedulingInstance, a: &FractionalAssignment) -> Result<Ext> {
    inst.check_shape(&a.x)?;
    for j in 0..inst.m {
        if a.column_sum(j) > Rat::one() {
            return Ok(Ext::NegInf);
        }
    }
    Ok(Ext::Finite(
        loads(inst, &a.x).into_iter().min().expect("k >= 1"),
    ))
}

/// Total cost of an assignment: sum of `x[i][j] * c[i][j]`.
pub fn cost(inst: &SchedulingInstance, a: &FractionalAssignment) -> Result<Rat> {
    inst.check_shape(&a.x)?;
    Ok((0..inst.k).fold(Rat::zero(), |acc, i| {
        (0..inst.m).fold(acc, |acc, j| acc + &a.x[i][j] * &inst.c[i][j])
    }))
}

/// Makespan, further raised to the largest single processing time used with
/// positive weight. Coincides with `makespan` on integral assignments.
pub fn modified_makespan(inst: &SchedulingInstance, a: &FractionalAssignment) -> Result<Ext> {
    let base = makespan(inst, a)?;
    let mut best = base;
    for i in 0..inst.k {
        for j in 0..inst.m {
            if a.x[i][j].is_positive() {
                let cand = Ext::Finite(inst.p[i][j].clone());
                if cand > best {
                    best = cand;
                }
            }
        }
    }
    Ok(best)
}

/// Which objective a GOOP instance optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Minimize makespan (plus cost).
    Makespan,
    /// Maximize the minimum load (plus cost).
    Fairness,
}
