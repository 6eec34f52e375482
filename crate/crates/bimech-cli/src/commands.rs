use bimech_core::bmed::{
    default_sample_count, reduce_config, reduce_with_dist_cfg, sample_dprime, verify_mechanism,
    BmedInstance, GoopHandle, Layout,
};
use bimech_core::fairness::{as_solve, bd_solve, Branch};
use bimech_core::makespan::{best_fractional, st_round};
use bimech_core::num::{int, rat};
use bimech_core::oracle::{brute_bmed, brute_goop};
use bimech_core::sched::{cost, fairness, makespan, Assignment, Objective, SchedulingInstance};
use bimech_core::{Error, Rat};
use clap::ValueEnum;
use num_traits::Signed;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde_json::json;

use crate::format::{
    approx, parse_rat, rat_grid, rat_str, read_instance, write_json, BmedFile, DirectionFile,
    InstanceFile, MechanismFile, ObjectiveTag, RunConfig, SchedulingFile, VariantTag,
};
use crate::{
    BenchArgs, BruteArgs, Cli, CliError, Command, GenArgs, GenKind, MechanismArgs,
    MechanismVariant, SolveArgs, SolveVariant, VerifyArgs,
};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Makespan,
    Fairness,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Objective {
        match o {
            ObjectiveArg::Makespan => Objective::Makespan,
            ObjectiveArg::Fairness => Objective::Fairness,
        }
    }
}

fn run_config(seed: Option<u64>, threads: usize) -> RunConfig {
    RunConfig {
        build: env!("BIMECH_BUILD").to_string(),
        command: std::env::args().collect(),
        seed,
        threads,
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    let threads = cli.threads;
    match cli.command {
        Command::Gen(a) => cmd_gen(a, threads),
        Command::Solve(a) => cmd_solve(a, threads),
        Command::Mechanism(a) => cmd_mechanism(a, threads),
        Command::Verify(a) => cmd_verify(a, threads),
        Command::Brute(a) => cmd_brute(a),
        Command::Bench(a) => cmd_bench(a, threads),
    }
}

// ---------------------------------------------------------------- gen

/// Rational in [0, 1] with denominator at most `denom`.
fn rand_unit(rng: &mut ChaCha12Rng, denom: u64) -> Rat {
    let d = 1 + rng.next_u64() % denom;
    rat((rng.next_u64() % (d + 1)) as i64, d as i64)
}

/// Rational in [-1, 1] with denominator at most `denom`.
fn rand_signed(rng: &mut ChaCha12Rng, denom: u64) -> Rat {
    let d = 1 + rng.next_u64() % denom;
    rat((rng.next_u64() % (2 * d + 1)) as i64 - d as i64, d as i64)
}

fn gen_scheduling(a: &GenArgs) -> Result<SchedulingInstance, CliError> {
    let mut rng = ChaCha12Rng::seed_from_u64(a.seed);
    let p = (0..a.machines)
        .map(|_| (0..a.jobs).map(|_| rand_unit(&mut rng, a.denom)).collect())
        .collect();
    let c = (0..a.machines)
        .map(|_| (0..a.jobs).map(|_| rand_signed(&mut rng, a.denom)).collect())
        .collect();
    Ok(SchedulingInstance::new(p, c)?)
}

fn gen_bmed(a: &GenArgs) -> Result<BmedInstance, CliError> {
    let d = a.denom;
    if a.types == 0 || a.machines == 0 || a.jobs == 0 {
        return Err(CliError::usage("bidders, types and jobs must be positive"));
    }
    // Per-job value cap keeps each type's total at most 1 while every
    // denominator stays at the bound.
    let cap = d / a.jobs as u64;
    if cap == 0 {
        return Err(CliError::usage("--denom must be at least the job count"));
    }
    if d < a.types as u64 {
        return Err(CliError::usage("--denom must be at least the type count"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(a.seed);
    let types = (0..a.machines)
        .map(|_| {
            (0..a.types)
                .map(|_| {
                    (0..a.jobs)
                        .map(|_| rat((rng.next_u64() % (cap + 1)) as i64, d as i64))
                        .collect()
                })
                .collect()
        })
        .collect();
    // Positive probabilities with denominator `d`: distinct cut points in
    // (0, d) split the unit interval.
    let probs = (0..a.machines)
        .map(|_| {
            let mut cuts: Vec<u64> = vec![0, d];
            while cuts.len() < a.types + 1 {
                let v = 1 + rng.next_u64() % (d - 1).max(1);
                if !cuts.contains(&v) {
                    cuts.push(v);
                }
            }
            cuts.sort_unstable();
            cuts.windows(2)
                .map(|w| rat((w[1] - w[0]) as i64, d as i64))
                .collect()
        })
        .collect();
    Ok(BmedInstance::new(types, probs, a.objective.into())?)
}

fn cmd_gen(a: GenArgs, _threads: usize) -> Result<(), CliError> {
    let file = match a.kind {
        GenKind::Scheduling => InstanceFile::Scheduling(SchedulingFile::from_instance(
            &gen_scheduling(&a)?,
        )),
        GenKind::Bmed => {
            if a.types == 1 && a.denom == 1 {
                return Err(CliError::usage("--denom must exceed 1 for bmed instances"));
            }
            InstanceFile::Bmed(BmedFile::from_instance(&gen_bmed(&a)?))
        }
    };
    write_json(&a.out, &file)?;
    println!("wrote {}", a.out);
    Ok(())
}

// -------------------------------------------------------------- solve

fn machines_of(a: &Assignment) -> Vec<Option<usize>> {
    let m = a.x.first().map_or(0, |r| r.len());
    (0..m)
        .map(|j| (0..a.x.len()).find(|&i| a.x[i][j]))
        .collect()
}

fn cmd_solve(a: SolveArgs, threads: usize) -> Result<(), CliError> {
    let InstanceFile::Scheduling(file) = read_instance(&a.input)? else {
        return Err(CliError::usage("solve expects a scheduling instance"));
    };
    let inst = file.to_instance()?;
    let config = run_config(a.seed, threads);
    let mut report = match a.variant {
        SolveVariant::Makespan => {
            let sol = best_fractional(&inst)?;
            let rounded = st_round(&inst, &sol)?;
            let frac = rounded.to_fractional();
            let m = makespan(&inst, &frac)?.expect_finite("rounded schedules assign every job");
            let c = cost(&inst, &frac)?;
            let value = &m / int(2) + &c;
            json!({
                "variant": "makespan",
                "assignment": machines_of(&rounded),
                "makespan": rat_str(&m),
                "cost": rat_str(&c),
                "half_makespan_plus_cost": rat_str(&value),
                "certificate": {
                    "threshold": rat_str(&sol.t),
                    "load_bound": rat_str(&sol.t_cap),
                    "lp_value": rat_str(&sol.value),
                },
            })
        }
        SolveVariant::FairnessBd => {
            let out = bd_solve(&inst)?;
            let frac = out.to_fractional();
            let f = fairness(&inst, &frac)?.expect_finite("schedules never double-assign");
            let c = cost(&inst, &frac)?;
            json!({
                "variant": "fairness-bd",
                "assignment": machines_of(&out),
                "fairness": rat_str(&f),
                "cost": rat_str(&c),
            })
        }
        SolveVariant::FairnessAs => {
            let seed = a
                .seed
                .ok_or_else(|| CliError::usage("--seed is required for fairness-as"))?;
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let rep = as_solve(&inst, &mut rng)?;
            json!({
                "variant": "fairness-as",
                "assignment": machines_of(&rep.assignment),
                "branch": match rep.branch { Branch::Rounded => "rounded", Branch::Greedy => "greedy" },
                "fairness": rat_str(&rep.realized_fairness),
                "cost": rat_str(&rep.realized_cost),
                "certificate": {
                    "threshold": rat_str(&rep.t_star),
                    "fractional_fairness": rat_str(&rep.frac_fairness),
                    "fractional_cost": rat_str(&rep.frac_cost),
                },
            })
        }
    };
    if a.verify {
        report["verification"] = certify_solve(&a.variant, &inst, &report)?;
    }
    report["config"] = serde_json::to_value(&config)
        .map_err(|e| CliError::usage(format!("serialization failed: {e}")))?;
    match &a.out {
        Some(path) => {
            write_json(path, &report)?;
            println!("wrote {path}");
        }
        None => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
    }
    Ok(())
}

/// Exact factor certification against the exhaustive optimum.
fn certify_solve(
    variant: &SolveVariant,
    inst: &SchedulingInstance,
    report: &serde_json::Value,
) -> Result<serde_json::Value, CliError> {
    let field = |name: &str| parse_rat(report[name].as_str().unwrap());
    let (holds, opt) = match variant {
        SolveVariant::Makespan => {
            let (opt, _) = brute_goop(inst, Objective::Makespan)?;
            let opt = opt.expect_finite("exhaustive optimum is finite");
            let lhs = field("makespan")? / int(2) + field("cost")?;
            (lhs <= opt, opt)
        }
        SolveVariant::FairnessBd => {
            let (opt, _) = brute_goop(inst, Objective::Fairness)?;
            let opt = opt.expect_finite("exhaustive optimum is finite");
            let factor = int(inst.m as i64 - inst.k as i64 + 1);
            let lhs = factor * field("fairness")? + field("cost")?;
            (lhs >= opt, opt)
        }
        SolveVariant::FairnessAs => {
            let (opt, _) = brute_goop(inst, Objective::Fairness)?;
            let opt = opt.expect_finite("exhaustive optimum is finite");
            let cert = &report["certificate"];
            let f = parse_rat(cert["fractional_fairness"].as_str().unwrap())?;
            let c = parse_rat(cert["fractional_cost"].as_str().unwrap())?;
            (int(2) * f + c >= opt, opt)
        }
    };
    if !holds {
        return Err(Error::Invariant(String::from("factor guarantee violated")).into());
    }
    Ok(json!({ "optimum": rat_str(&opt), "factor_certified": true }))
}

// ---------------------------------------------------------- mechanism

fn precision_override() -> Result<Option<u32>, CliError> {
    match std::env::var("BIMECH_PRECISION") {
        Ok(v) => v
            .trim()
            .parse::<u32>()
            .map(Some)
            .map_err(|_| CliError::usage("BIMECH_PRECISION must be a positive integer")),
        Err(_) => Ok(None),
    }
}

fn cmd_mechanism(a: MechanismArgs, threads: usize) -> Result<(), CliError> {
    let InstanceFile::Bmed(file) = read_instance(&a.input)? else {
        return Err(CliError::usage("mechanism expects an auction instance"));
    };
    let inst = file.to_instance()?;
    let (handle, variant) = match a.variant {
        MechanismVariant::Makespan => (GoopHandle::Makespan, VariantTag::Makespan),
        MechanismVariant::FairnessBd => (GoopHandle::FairnessBd, VariantTag::FairnessBd),
    };
    if inst.objective != handle.objective() {
        return Err(CliError::usage(
            "instance objective does not match the requested variant",
        ));
    }
    let epsilon = parse_rat(&a.epsilon)?;
    if !epsilon.is_positive() {
        return Err(CliError::usage("epsilon must be positive"));
    }
    let samples = a.samples.unwrap_or_else(|| default_sample_count(&inst, &epsilon));
    let mut rng = ChaCha12Rng::seed_from_u64(a.seed);
    let dist = sample_dprime(&inst, samples, &mut rng)?;
    if !dist.full_support() {
        return Err(Error::Domain(String::from(
            "empirical distribution missed a type; increase --samples",
        ))
        .into());
    }
    let mut cfg = reduce_config(Layout::for_instance(&inst).total, &epsilon);
    if let Some(bits) = precision_override()? {
        cfg.precision_bits = bits;
    }
    let red = reduce_with_dist_cfg(&inst, handle, &epsilon, dist, cfg)?;
    let mech = &red.mechanism;
    let out = MechanismFile {
        config: run_config(Some(a.seed), threads),
        variant,
        epsilon: rat_str(&epsilon),
        samples,
        level: rat_str(&red.level),
        instance: BmedFile::from_instance(&inst),
        dist: rat_grid(&mech.dist.weights),
        directions: mech
            .directions
            .iter()
            .map(|d| DirectionFile {
                w_o: rat_str(&d.w_o),
                w: d.w.iter().map(|b| rat_grid(b)).collect(),
            })
            .collect(),
        weights: mech.weights.iter().map(rat_str).collect(),
        pi_diag: rat_grid(&mech.pi_diag),
        prices: rat_grid(&mech.prices),
    };
    write_json(&a.out, &out)?;
    println!(
        "wrote {} ({} directions, level {} ~ {:.4})",
        a.out,
        out.directions.len(),
        out.level,
        approx(&red.level)
    );
    Ok(())
}

// ------------------------------------------------------------- verify

fn cmd_verify(a: VerifyArgs, threads: usize) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.mechanism)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", a.mechanism)))?;
    let file: MechanismFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("bad mechanism file: {e}")))?;
    let (inst, mech) = file.to_mechanism()?;
    let rep = verify_mechanism(&mech, &inst, a.runs, a.seed)?;

    let three_sigma = int(3) * &rep.objective_std_err;
    let mut report = json!({
        "config": run_config(Some(a.seed), threads),
        "runs": rep.n_runs,
        "mean_objective": rat_str(&rep.mean_objective),
        "objective_std_err": rat_str(&rep.objective_std_err),
        "max_regret": rat_str(&rep.max_regret),
        "max_regret_std_err": rat_str(&rep.max_regret_std_err),
        "ir_violations": rep.ir_violations,
        "mean_prices": rat_grid(&rep.mean_prices),
    });
    println!("runs:            {}", rep.n_runs);
    println!(
        "mean objective:  {} (~{:.5}, se ~{:.6})",
        rat_str(&rep.mean_objective),
        approx(&rep.mean_objective),
        approx(&rep.objective_std_err)
    );
    println!(
        "max regret:      {} (~{:.6})",
        rat_str(&rep.max_regret),
        approx(&rep.max_regret)
    );
    println!("ir violations:   {}", rep.ir_violations);

    if a.brute {
        let opt = brute_bmed(&inst)?;
        let epsilon = parse_rat(&file.epsilon)?;
        let (bound, holds) = match file.variant {
            VariantTag::Makespan => {
                let bound = int(2) * &opt + &epsilon + &three_sigma;
                (bound.clone(), rep.mean_objective <= bound)
            }
            VariantTag::FairnessBd => {
                let factor = int(inst.m as i64 - inst.k as i64 + 1).max(int(1));
                let bound = &opt / factor - &epsilon - &three_sigma;
                (bound.clone(), rep.mean_objective >= bound)
            }
        };
        println!(
            "brute optimum:   {} (~{:.5}); bound {} (~{:.5}); satisfied: {holds}",
            rat_str(&opt),
            approx(&opt),
            rat_str(&bound),
            approx(&bound)
        );
        report["brute"] = json!({
            "optimum": rat_str(&opt),
            "bound": rat_str(&bound),
            "satisfied": holds,
        });
        if !holds {
            return Err(Error::Invariant(String::from(
                "audited objective violates the advertised bound",
            ))
            .into());
        }
    }
    if let Some(path) = &a.out {
        write_json(path, &report)?;
        println!("wrote {path}");
    }
    Ok(())
}

// -------------------------------------------------------------- brute

fn cmd_brute(a: BruteArgs) -> Result<(), CliError> {
    match read_instance(&a.input)? {
        InstanceFile::Scheduling(file) => {
            let inst = file.to_instance()?;
            let (opt, best) = brute_goop(&inst, a.objective.into())?;
            let opt = opt.expect_finite("exhaustive optimum is finite");
            println!("optimum: {} (~{:.6})", rat_str(&opt), approx(&opt));
            println!("schedule: {:?}", machines_of(&best));
        }
        InstanceFile::Bmed(file) => {
            let inst = file.to_instance()?;
            if file.objective == ObjectiveTag::Fairness
                && matches!(a.objective, ObjectiveArg::Makespan)
            {
                // Auction files carry their own objective; the flag is
                // ignored for them.
            }
            let opt = brute_bmed(&inst)?;
            println!("optimum: {} (~{:.6})", rat_str(&opt), approx(&opt));
        }
    }
    Ok(())
}

// -------------------------------------------------------------- bench

fn cmd_bench(a: BenchArgs, threads: usize) -> Result<(), CliError> {
    let solve_one = |idx: usize| -> Result<std::time::Duration, CliError> {
        let gen = GenArgs {
            kind: GenKind::Scheduling,
            machines: a.machines,
            jobs: a.jobs,
            types: 2,
            objective: ObjectiveArg::Makespan,
            denom: 8,
            seed: a.seed.wrapping_add(idx as u64),
            out: String::new(),
        };
        let inst = gen_scheduling(&gen)?;
        let start = std::time::Instant::now();
        match a.variant {
            SolveVariant::Makespan => {
                let sol = best_fractional(&inst)?;
                st_round(&inst, &sol)?;
            }
            SolveVariant::FairnessBd => {
                bd_solve(&inst)?;
            }
            SolveVariant::FairnessAs => {
                let mut rng = ChaCha12Rng::seed_from_u64(gen.seed);
                as_solve(&inst, &mut rng)?;
            }
        }
        Ok(start.elapsed())
    };
    let timings: Vec<(usize, std::time::Duration)> = if threads <= 1 {
        (0..a.iters)
            .map(|i| solve_one(i).map(|d| (i, d)))
            .collect::<Result<_, _>>()?
    } else {
        let mut out = Vec::new();
        std::thread::scope(|scope| -> Result<(), CliError> {
            let mut handles = Vec::new();
            for t in 0..threads {
                let solve_one = &solve_one;
                handles.push(scope.spawn(move || -> Result<Vec<_>, CliError> {
                    (t..a.iters)
                        .step_by(threads)
                        .map(|i| solve_one(i).map(|d| (i, d)))
                        .collect()
                }));
            }
            for h in handles {
                out.extend(h.join().expect("bench worker panicked")?);
            }
            Ok(())
        })?;
        out.sort_by_key(|&(i, _)| i);
        out
    };
    println!("iter  micros");
    let mut total = std::time::Duration::ZERO;
    for (i, d) in &timings {
        println!("{i:>4}  {}", d.as_micros());
        total += *d;
    }
    println!(
        "mean  {}",
        (total / a.iters.max(1) as u32).as_micros()
    );
    Ok(())
}
