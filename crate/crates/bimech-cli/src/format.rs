//! JSON artifact formats. Every rational is serialized as a `"num/den"`
//! string so files round-trip exactly; no floats appear in any artifact.

use bimech_core::bmed::{BmedInstance, Direction, Dprime, GoopHandle, Layout, Mechanism};
use bimech_core::sched::{Objective, SchedulingInstance};
use bimech_core::Rat;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::CliError;

pub fn rat_str(q: &Rat) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rat(s: &str) -> Result<Rat, CliError> {
    Rat::from_str(s.trim()).map_err(|e| CliError::usage(format!("bad rational '{s}': {e}")))
}

pub fn rat_grid(g: &[Vec<Rat>]) -> Vec<Vec<String>> {
    g.iter().map(|row| row.iter().map(rat_str).collect()).collect()
}

pub fn parse_grid(g: &[Vec<String>]) -> Result<Vec<Vec<Rat>>, CliError> {
    g.iter()
        .map(|row| row.iter().map(|s| parse_rat(s)).collect())
        .collect()
}

/// Decimal rendering for console tables only; never written to files.
pub fn approx(q: &Rat) -> f64 {
    let scale = 1_000_000_000i64;
    let scaled = q * Rat::from_integer(scale.into());
    let i = scaled.to_integer();
    // Saturating conversion is fine for display purposes.
    let f: f64 = i.to_string().parse().unwrap_or(f64::NAN);
    f / scale as f64
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceFile {
    Scheduling(SchedulingFile),
    Bmed(BmedFile),
}

#[derive(Serialize, Deserialize)]
pub struct SchedulingFile {
    pub machines: usize,
    pub jobs: usize,
    /// `p[i][j]`: processing times.
    pub p: Vec<Vec<String>>,
    /// `c[i][j]`: costs.
    pub c: Vec<Vec<String>>,
}

impl SchedulingFile {
    pub fn from_instance(inst: &SchedulingInstance) -> Self {
        SchedulingFile {
            machines: inst.k,
            jobs: inst.m,
            p: rat_grid(&inst.p),
            c: rat_grid(&inst.c),
        }
    }

    pub fn to_instance(&self) -> Result<SchedulingInstance, CliError> {
        Ok(SchedulingInstance::new(parse_grid(&self.p)?, parse_grid(&self.c)?)?)
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveTag {
    Makespan,
    Fairness,
}

impl From<ObjectiveTag> for Objective {
    fn from(t: ObjectiveTag) -> Objective {
        match t {
            ObjectiveTag::Makespan => Objective::Makespan,
            ObjectiveTag::Fairness => Objective::Fairness,
        }
    }
}

impl From<Objective> for ObjectiveTag {
    fn from(o: Objective) -> ObjectiveTag {
        match o {
            Objective::Makespan => ObjectiveTag::Makespan,
            Objective::Fairness => ObjectiveTag::Fairness,
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct BmedFile {
    pub objective: ObjectiveTag,
    pub bidders: usize,
    pub jobs: usize,
    /// `types[i][t][j]`: value of job `j` to type `t` of bidder `i`.
    pub types: Vec<Vec<Vec<String>>>,
    /// `probs[i][t]`: prior type probabilities.
    pub probs: Vec<Vec<String>>,
}

impl BmedFile {
    pub fn from_instance(inst: &BmedInstance) -> Self {
        BmedFile {
            objective: inst.objective.into(),
            bidders: inst.k,
            jobs: inst.m,
            types: inst.types.iter().map(|b| rat_grid(b)).collect(),
            probs: rat_grid(&inst.probs),
        }
    }

    pub fn to_instance(&self) -> Result<BmedInstance, CliError> {
        let types = self
            .types
            .iter()
            .map(|b| parse_grid(b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BmedInstance::new(types, parse_grid(&self.probs)?, self.objective.into())?)
    }
}

pub fn read_instance(path: &str) -> Result<InstanceFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("bad instance {path}: {e}")))
}

pub fn write_json<T: Serialize>(path: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::usage(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {path}: {e}")))
}

/// Flags and seeds echoed into every artifact for provenance.
#[derive(Serialize, Deserialize)]
pub struct RunConfig {
    pub build: String,
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub threads: usize,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum VariantTag {
    Makespan,
    FairnessBd,
}

impl From<VariantTag> for GoopHandle {
    fn from(v: VariantTag) -> GoopHandle {
        match v {
            VariantTag::Makespan => GoopHandle::Makespan,
            VariantTag::FairnessBd => GoopHandle::FairnessBd,
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct DirectionFile {
    pub w_o: String,
    pub w: Vec<Vec<Vec<String>>>,
}

#[derive(Serialize, Deserialize)]
pub struct MechanismFile {
    pub config: RunConfig,
    pub variant: VariantTag,
    pub epsilon: String,
    pub samples: usize,
    /// Objective level certified by the search.
    pub level: String,
    pub instance: BmedFile,
    /// Empirical per-bidder type marginals used by the allocation rules.
    pub dist: Vec<Vec<String>>,
    pub directions: Vec<DirectionFile>,
    pub weights: Vec<String>,
    pub pi_diag: Vec<Vec<String>>,
    pub prices: Vec<Vec<String>>,
}

impl MechanismFile {
    pub fn to_mechanism(&self) -> Result<(BmedInstance, Mechanism), CliError> {
        let inst = self.instance.to_instance()?;
        let layout = Layout::for_instance(&inst);
        let directions = self
            .directions
            .iter()
            .map(|d| {
                Ok(Direction {
                    w_o: parse_rat(&d.w_o)?,
                    w: d.w.iter().map(|b| parse_grid(b)).collect::<Result<Vec<_>, _>>()?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        for d in &directions {
            // Round-trip through the layout validates the shape.
            let v = d.to_vec(&layout);
            Direction::from_vec(&layout, &v)?;
        }
        let mech = Mechanism {
            handle: self.variant.into(),
            directions,
            weights: self
                .weights
                .iter()
                .map(|s| parse_rat(s))
                .collect::<Result<Vec<_>, _>>()?,
            dist: Dprime {
                weights: parse_grid(&self.dist)?,
            },
            pi_diag: parse_grid(&self.pi_diag)?,
            prices: parse_grid(&self.prices)?,
        };
        Ok((inst, mech))
    }
}
