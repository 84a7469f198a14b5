//! Subcommand implementations.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use twrbeam_core::homotopy::{solve, BranchReport, SolveError, SolveReport, SolverConfig};
use twrbeam_core::oracle::{self, oracle_minimize, CheckTolerances};
use twrbeam_core::physical::{random_channels, relay_power, sinr, ChannelEnsemble};
use twrbeam_core::realify::{realify, ComplexCandidate};
use twrbeam_core::reduction::{reduce, ReduceError, ReducedProblem};
use twrbeam_core::zero_solver::ZeroSolveError;

use crate::schema::{
    cmat_rows, fmt_f64, BranchRecord, FallbackRecord, InstanceBody, InstanceFile, ReduceOutput,
    ReducedCoefficients, ResultRecord, SolutionBody, SolutionFile, VerifyRecord, SCHEMA_VERSION,
};

/// Exit codes: 0 ok, 2 parse, 3 degenerate channels, 4 infeasible or failed
/// verification, 5 internal.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const PARSE: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
    pub const INTERNAL: i32 = 5;
}

pub struct CommandOutcome {
    pub stdout: String,
    pub code: i32,
}

fn error_json(status: &str, message: &str) -> Result<String> {
    let value = serde_json::json!({
        "version": SCHEMA_VERSION,
        "status": status,
        "error": message,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn branch_records(branches: &[BranchReport]) -> Vec<BranchRecord> {
    branches
        .iter()
        .map(|b| BranchRecord {
            sign: b.sign_choice,
            status: match &b.endpoint {
                Ok(_) => "converged".to_string(),
                Err(e) => format!("failed: {e}"),
            },
            steps: b.diagnostics.steps_taken,
            power: b.endpoint.as_ref().ok().map(|s| {
                // Power trace always ends at the accepted endpoint.
                b.diagnostics.power_trace.last().map(|p| p.1).unwrap_or(s.lambda[0] + s.lambda[1])
            }),
            lambda_sign_violations: b.diagnostics.lambda_sign_violations,
        })
        .collect()
}

fn branch_name(sign: f64) -> String {
    if sign > 0.0 { "plus".to_string() } else { "minus".to_string() }
}

/// Core of `solve`: runs the pipeline for one parsed instance.
pub struct SolveOutput {
    pub record: ResultRecord,
    pub code: i32,
}

pub fn solve_instance(
    inst: &InstanceFile,
    cfg: &SolverConfig,
    verify_starts: Option<usize>,
    seed: u64,
    include_beam: bool,
    include_wall_time: bool,
) -> SolveOutput {
    let started = Instant::now();
    let (kind, physical) = match &inst.body {
        InstanceBody::Physical(_) => ("physical", inst.to_physical()),
        InstanceBody::Reduced(_) => ("reduced", None),
    };

    let mut record = ResultRecord {
        version: SCHEMA_VERSION,
        kind: kind.to_string(),
        status: "ok".to_string(),
        seed: None,
        reduced: None,
        branch: None,
        a: None,
        power: None,
        power_watts: None,
        constraints: None,
        sinr: None,
        lambda: None,
        kkt_residual: None,
        oracle_gap: None,
        beam: None,
        precheck_ok: true,
        branches: Vec::new(),
        fallback: None,
        error: None,
        wall_time_ms: None,
    };

    let red = match &physical {
        Some(prob) => match reduce(prob) {
            Ok(red) => red,
            Err(e @ ReduceError::DegenerateChannels { .. }) => {
                record.status = "degenerate_channels".to_string();
                record.error = Some(e.to_string());
                return SolveOutput { record, code: exit_code::DEGENERATE };
            }
        },
        None => inst.to_reduced().expect("non-physical instance must be reduced"),
    };
    record.reduced = Some(ReducedCoefficients::from(&red));

    match solve(&red, cfg) {
        Ok(report) => {
            fill_success(&mut record, &report, &red, physical.as_ref(), include_beam);
            if let Some(starts) = verify_starts {
                match oracle_minimize(&red, 1.0, seed, starts, None) {
                    Ok(res) if res.power > 0.0 => {
                        record.oracle_gap = Some((report.power - res.power) / res.power);
                    }
                    _ => record.oracle_gap = None,
                }
            }
            if include_wall_time {
                record.wall_time_ms = Some(started.elapsed().as_secs_f64() * 1e3);
            }
            SolveOutput { record, code: exit_code::OK }
        }
        Err(SolveError::NoFeasibleBranch { branches, precheck_ok }) => {
            record.status = "no_feasible_branch".to_string();
            record.precheck_ok = precheck_ok;
            record.branches = branch_records(&branches);
            record.error = Some(if precheck_ok {
                "no branch reached w = 1".to_string()
            } else {
                "instance fails the necessary feasibility condition c_i (1 + r^2) > d_i".to_string()
            });
            // Oracle fallback so a usable beamformer is still emitted.
            if let Ok(res) = oracle_minimize(&red, 1.0, seed, 32, None) {
                record.fallback = Some(FallbackRecord {
                    source: "oracle".to_string(),
                    a: res.best,
                    power: res.power,
                });
            }
            if include_wall_time {
                record.wall_time_ms = Some(started.elapsed().as_secs_f64() * 1e3);
            }
            SolveOutput { record, code: exit_code::INFEASIBLE }
        }
        Err(SolveError::Zero(e @ ZeroSolveError::SingularTangentSystem { .. })) => {
            record.status = "internal_error".to_string();
            record.error = Some(e.to_string());
            SolveOutput { record, code: exit_code::INTERNAL }
        }
    }
}

fn fill_success(
    record: &mut ResultRecord,
    report: &SolveReport,
    red: &ReducedProblem,
    physical: Option<&twrbeam_core::PhysicalProblem>,
    include_beam: bool,
) {
    record.branch = Some(branch_name(report.branch));
    record.a = Some(report.a);
    record.power = Some(report.power);
    record.power_watts = Some(red.scale * report.power);
    record.constraints = Some(report.constraints);
    record.lambda = Some(report.lambda);
    record.kkt_residual = Some(report.kkt_residual);
    record.precheck_ok = report.precheck_ok;
    record.branches = branch_records(&report.branches);
    if let Some(prob) = physical {
        let beam = red.lift_real(&report.a);
        record.power_watts = Some(relay_power(&beam, prob));
        record.sinr = Some([sinr(1, &beam, prob), sinr(2, &beam, prob)]);
        if include_beam {
            record.beam = Some(cmat_rows(&beam));
        }
    }
}

pub fn cmd_solve(
    text: &str,
    flags: &crate::SolverFlags,
    verify: bool,
    starts: usize,
    seed: u64,
    format: crate::Format,
) -> Result<CommandOutcome> {
    let inst = InstanceFile::parse(text)?;
    let mut cfg = SolverConfig::default();
    if let Some(overrides) = &inst.solver {
        overrides.apply(&mut cfg);
    }
    flags.apply(&mut cfg);
    let out = solve_instance(&inst, &cfg, verify.then_some(starts), seed, true, true);
    let stdout = match format {
        crate::Format::Json => serde_json::to_string_pretty(&out.record)? + "\n",
        crate::Format::Csv => {
            let mut s = csv_header();
            s.push_str(&csv_data_row(&out.record, None, 0, None));
            s
        }
    };
    Ok(CommandOutcome { stdout, code: out.code })
}

/// Parses a sweep specification: comma-separated values, each either linear
/// or dB with a `dB` suffix (`"1,2,4"`, `"0dB,3dB,6dB"`).
pub fn parse_gamma_sweep(spec: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for raw in spec.split(',') {
        let item = raw.trim();
        if item.is_empty() {
            bail!("empty entry in gamma sweep '{spec}'");
        }
        let lower = item.to_ascii_lowercase();
        let value = if let Some(db) = lower.strip_suffix("db") {
            let db: f64 = db.trim().parse().with_context(|| format!("bad dB value '{item}'"))?;
            10f64.powf(db / 10.0)
        } else {
            item.parse().with_context(|| format!("bad gamma value '{item}'"))?
        };
        if !(value > 0.0 && value.is_finite()) {
            bail!("gamma must be positive and finite, got '{item}'");
        }
        out.push(value);
    }
    if out.is_empty() {
        bail!("gamma sweep is empty");
    }
    Ok(out)
}

/// Per-instance channel seed: fixed across gamma points so sweeps compare the
/// same channel realizations.
fn instance_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub struct BatchParams {
    pub seed: u64,
    pub count: usize,
    pub gammas: Vec<f64>,
    pub antennas: usize,
    pub p1: f64,
    pub p2: f64,
    pub sigma_r2: f64,
    pub sigma1_2: f64,
    pub sigma2_2: f64,
    pub verify_starts: Option<usize>,
}

pub const CSV_COLUMNS: &str = "row,gamma,index,seed,status,branch,r,q1,q2,c1,c2,d1,d2,power,power_watts,sinr1,sinr2,f1,f2,lambda1,lambda2,kkt_residual,oracle_gap,n_ok,n_failed";

fn csv_header() -> String {
    format!("{CSV_COLUMNS}\n")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_data_row(
    record: &ResultRecord,
    gamma: Option<f64>,
    index: usize,
    seed: Option<u64>,
) -> String {
    let red = record.reduced.as_ref();
    let fields: Vec<String> = vec![
        "data".to_string(),
        opt(gamma),
        index.to_string(),
        seed.map(|s| s.to_string()).unwrap_or_default(),
        record.status.clone(),
        record.branch.clone().unwrap_or_default(),
        opt(red.map(|r| r.r)),
        opt(red.map(|r| r.q1)),
        opt(red.map(|r| r.q2)),
        opt(red.map(|r| r.c1)),
        opt(red.map(|r| r.c2)),
        opt(red.map(|r| r.d1)),
        opt(red.map(|r| r.d2)),
        opt(record.power),
        opt(record.power_watts),
        opt(record.sinr.map(|s| s[0])),
        opt(record.sinr.map(|s| s[1])),
        opt(record.constraints.map(|c| c[0])),
        opt(record.constraints.map(|c| c[1])),
        opt(record.lambda.map(|l| l[0])),
        opt(record.lambda.map(|l| l[1])),
        opt(record.kkt_residual),
        opt(record.oracle_gap),
        String::new(), // n_ok (summary rows only)
        String::new(), // n_failed
    ];
    fields.join(",") + "\n"
}

fn csv_summary_row(gamma: f64, n_ok: usize, n_failed: usize, mean_power: Option<f64>, mean_watts: Option<f64>) -> String {
    let mut fields = vec![String::new(); 25];
    fields[0] = "summary".to_string();
    fields[1] = fmt_f64(gamma);
    fields[4] = "summary".to_string();
    fields[13] = opt(mean_power);
    fields[14] = opt(mean_watts);
    fields[23] = n_ok.to_string();
    fields[24] = n_failed.to_string();
    fields.join(",") + "\n"
}

pub fn cmd_batch(params: &BatchParams, format: crate::Format) -> Result<CommandOutcome> {
    if params.count == 0 {
        bail!("count must be at least 1");
    }
    let cfg = SolverConfig::default();

    struct Job {
        gamma: f64,
        index: usize,
        chan_seed: u64,
    }
    let jobs: Vec<Job> = params
        .gammas
        .iter()
        .flat_map(|&gamma| {
            (0..params.count).map(move |index| Job {
                gamma,
                index,
                chan_seed: instance_seed(params.seed, index),
            })
        })
        .collect();

    // Rows run concurrently; output order is restored by the ordered collect.
    let rows: Vec<(ResultRecord, f64, usize, u64)> = jobs
        .par_iter()
        .map(|job| {
            let ens = ChannelEnsemble {
                p1: params.p1,
                p2: params.p2,
                sigma_r2: params.sigma_r2,
                sigma1_2: params.sigma1_2,
                sigma2_2: params.sigma2_2,
                gamma1: job.gamma,
                gamma2: job.gamma,
                ..ChannelEnsemble::default()
            };
            let prob = random_channels(job.chan_seed, params.antennas, &ens);
            let inst = InstanceFile::from_physical(&prob);
            let mut record = solve_instance(
                &inst,
                &cfg,
                params.verify_starts,
                job.chan_seed,
                false,
                false,
            )
            .record;
            record.seed = Some(job.chan_seed);
            (record, job.gamma, job.index, job.chan_seed)
        })
        .collect();

    let mut out = String::new();
    match format {
        crate::Format::Csv => {
            out.push_str(&csv_header());
            for (start, &gamma) in params.gammas.iter().enumerate() {
                let group = &rows[start * params.count..(start + 1) * params.count];
                for (record, g, index, seed) in group {
                    out.push_str(&csv_data_row(record, Some(*g), *index, Some(*seed)));
                }
                let ok: Vec<&ResultRecord> =
                    group.iter().filter(|(r, ..)| r.status == "ok").map(|(r, ..)| r).collect();
                let n_ok = ok.len();
                let mean = |f: &dyn Fn(&ResultRecord) -> Option<f64>| -> Option<f64> {
                    if n_ok == 0 {
                        return None;
                    }
                    let sum: f64 = ok.iter().filter_map(|r| f(r)).sum();
                    Some(sum / n_ok as f64)
                };
                out.push_str(&csv_summary_row(
                    gamma,
                    n_ok,
                    group.len() - n_ok,
                    mean(&|r| r.power),
                    mean(&|r| r.power_watts),
                ));
            }
        }
        crate::Format::Json => {
            for (record, gamma, index, _) in &rows {
                let mut value = serde_json::to_value(record)?;
                value["gamma"] = serde_json::json!(gamma);
                value["index"] = serde_json::json!(index);
                out.push_str(&serde_json::to_string(&value)?);
                out.push('\n');
            }
        }
    }
    Ok(CommandOutcome { stdout: out, code: exit_code::OK })
}

pub fn cmd_verify(
    instance_text: &str,
    solution_text: &str,
    starts: usize,
    seed: u64,
) -> Result<CommandOutcome> {
    let inst = InstanceFile::parse(instance_text)?;
    let sol = SolutionFile::parse(solution_text)?;
    let red = match inst.to_physical() {
        Some(prob) => match reduce(&prob) {
            Ok(red) => red,
            Err(e) => {
                return Ok(CommandOutcome {
                    stdout: error_json("degenerate_channels", &e.to_string())?,
                    code: exit_code::DEGENERATE,
                })
            }
        },
        None => inst.to_reduced().expect("instance must be physical or reduced"),
    };

    let (a, lambda_given, realified) = match sol.body {
        SolutionBody::Real(f) => (f.a, f.lambda, false),
        SolutionBody::Complex(f) => {
            let cand = ComplexCandidate { x: f.a_re, y: f.a_im };
            match realify(&cand, &red) {
                Ok(v) => (v, None, true),
                Err(e) => {
                    return Ok(CommandOutcome {
                        stdout: error_json(
                            "invalid_solution",
                            &format!("realification failed: {e}"),
                        )?,
                        code: exit_code::INFEASIBLE,
                    })
                }
            }
        }
    };
    let lambda = match lambda_given {
        Some(l) => l,
        None => {
            let (l1, l2) = oracle::fit_multipliers(&a, &red, 1.0);
            [l1, l2]
        }
    };

    // Assemble a report-shaped value so the core checker can score it.
    let report = SolveReport {
        a,
        lambda,
        power: red.g_direct(&a),
        constraints: [red.f_direct(1, &a, 1.0), red.f_direct(2, &a, 1.0)],
        kkt_residual: oracle::kkt_residual(&a, lambda[0], lambda[1], &red, 1.0),
        branch: 0.0,
        branches: Vec::new(),
        precheck_ok: true,
    };
    let oracle_res = oracle_minimize(&red, 1.0, seed, starts, None).ok();
    let summary = oracle::check_solution(
        &report,
        &red,
        &CheckTolerances::default(),
        oracle_res.as_ref(),
    );

    let record = VerifyRecord {
        version: SCHEMA_VERSION,
        realified,
        a,
        lambda,
        power: summary.power,
        constraint_values: summary.constraint_values,
        feasible: summary.feasible,
        kkt_residual: summary.kkt_residual,
        kkt_ok: summary.kkt_ok,
        lambda_ok: summary.lambda_ok,
        oracle_power: oracle_res.as_ref().map(|r| r.power),
        oracle_gap: summary.oracle_gap,
        oracle_ok: summary.oracle_ok,
        pass: summary.pass,
    };
    let code = if record.pass { exit_code::OK } else { exit_code::INFEASIBLE };
    Ok(CommandOutcome {
        stdout: serde_json::to_string_pretty(&record)? + "\n",
        code,
    })
}

pub fn cmd_reduce(text: &str) -> Result<CommandOutcome> {
    let inst = InstanceFile::parse(text)?;
    let (red, basis) = match inst.to_physical() {
        Some(prob) => {
            let red = match reduce(&prob) {
                Ok(red) => red,
                Err(e) => {
                    return Ok(CommandOutcome {
                        stdout: error_json("degenerate_channels", &e.to_string())?,
                        code: exit_code::DEGENERATE,
                    })
                }
            };
            let basis = red.lift.as_ref().map(|l| {
                (0..l.basis.rows)
                    .map(|i| {
                        [
                            [l.basis[(i, 0)].re, l.basis[(i, 0)].im],
                            [l.basis[(i, 1)].re, l.basis[(i, 1)].im],
                        ]
                    })
                    .collect()
            });
            (red, basis)
        }
        None => (inst.to_reduced().expect("instance must be physical or reduced"), None),
    };
    let out = ReduceOutput {
        version: SCHEMA_VERSION,
        kind: "reduced".to_string(),
        coefficients: ReducedCoefficients::from(&red),
        basis,
    };
    Ok(CommandOutcome {
        stdout: serde_json::to_string_pretty(&out)? + "\n",
        code: exit_code::OK,
    })
}
