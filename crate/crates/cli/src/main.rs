use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use dsrefine::io::{self, matrix_to_json, vector_to_json};
use dsrefine::refinement::refine_with_certificate;
use dsrefine::{
    check_simulation, check_wellposed, membership_residual, reference, simulate_closed_loop,
    simulate_refined, to_dv, validate, Error, Tolerance, Trajectory, Vector,
};

/// Exact control refinement for linear descriptor systems.
#[derive(Parser, Debug)]
#[command(name = "dsrefine", version, about)]
struct Cli {
    #[command(flatten)]
    opts: Options,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Options {
    /// Relative singular-value cutoff for rank decisions.
    #[arg(long, global = true, default_value_t = Tolerance::default().rank_rtol)]
    tol_rank: f64,
    /// Absolute residual tolerance.
    #[arg(long, global = true, default_value_t = Tolerance::default().residual_atol)]
    tol_residual: f64,
    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Simulation horizon.
    #[arg(long, global = true, default_value_t = 100)]
    steps: usize,
    /// Bound on output deviation in comparisons.
    #[arg(long, global = true, default_value_t = 1e-8)]
    bound: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank checks on a system file.
    Validate { system: PathBuf },
    /// Driving-variable form of a system.
    ToDv {
        system: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Checks that `x_a = H x` is a simulation relation from ABS to CONC.
    CheckSim {
        abs: PathBuf,
        conc: PathBuf,
        relation: PathBuf,
    },
    /// Existence and uniqueness of closed-loop continuations.
    CheckWellposed {
        system: PathBuf,
        controller: PathBuf,
    },
    /// Refines an abstract controller into one for the concrete system.
    Refine {
        conc: PathBuf,
        abs: PathBuf,
        relation: PathBuf,
        controller: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Simulates a system under a descriptor or refined controller.
    Simulate {
        system: PathBuf,
        controller: PathBuf,
        /// Initial state as comma-separated numbers.
        #[arg(
            long,
            allow_hyphen_values = true,
            conflicts_with = "points",
            required_unless_present = "points"
        )]
        x0: Option<String>,
        /// JSON file of initial states, one run each.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Write the trajectory as CSV (batch runs get `_<i>` suffixes).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Runs the built-in reference case end to end.
    #[command(name = "verify-example4")]
    VerifyReference,
}

/// Command failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() {
            3
        } else {
            match e.root() {
                Error::NotWellPosed { .. }
                | Error::RelationRejected(_)
                | Error::Assumption1Violated { .. }
                | Error::NotATransition { .. }
                | Error::PreconditionFailed(_) => 1,
                _ => 2,
            }
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

/// A report and whether its verdict is positive.
type Outcome = Result<(Value, bool), Failure>;

fn tolerance(opts: &Options) -> Result<Tolerance, Failure> {
    Tolerance::new(opts.tol_rank, opts.tol_residual).map_err(Failure::from)
}

fn parse_x0(text: &str) -> Result<Vector, Failure> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("--x0: {s:?} is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Vector::from_vec(values))
}

fn indexed_path(base: &Path, i: usize) -> PathBuf {
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trajectory");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_{i}.{ext}"))
}

fn cmd_validate(system: &Path, tol: &Tolerance) -> Outcome {
    let sys = io::load_system(system)?;
    let r = validate(&sys, tol);
    let ok = r.all_ok();
    Ok((
        json!({
            "n": sys.n(),
            "p": sys.p(),
            "k": sys.k(),
            "rank_b_ok": r.rank_b_ok,
            "rank_c_ok": r.rank_c_ok,
            "assumption1_ok": r.assumption1_ok,
            "messages": r.messages,
            "verdict": ok,
        }),
        ok,
    ))
}

fn cmd_to_dv(system: &Path, out: Option<&Path>, tol: &Tolerance) -> Outcome {
    let sys = io::load_system(system)?;
    let dv = to_dv(&sys, tol)?;
    if let Some(path) = out {
        io::save_dv(&dv, path)?;
    }
    Ok((io::dv_to_json(&dv), true))
}

fn cmd_check_sim(abs: &Path, conc: &Path, rel: &Path, tol: &Tolerance) -> Outcome {
    let abs = io::load_system(abs)?;
    let conc = io::load_system(conc)?;
    let rel = io::load_relation(rel)?;
    let r = check_simulation(&abs, &conc, &rel, tol)?;
    let witness = r.witness.as_ref().map(|w| {
        json!({ "x": vector_to_json(&w.x), "s_a": vector_to_json(&w.s_a), "residual": w.residual })
    });
    Ok((
        json!({
            "output_match": r.output_match,
            "step_match": r.step_match,
            "initial_cover": r.initial_cover,
            "drift": matrix_to_json(&r.drift),
            "witness": witness,
            "verdict": r.verdict,
        }),
        r.verdict,
    ))
}

fn cmd_check_wellposed(system: &Path, controller: &Path, tol: &Tolerance) -> Outcome {
    let sys = io::load_system(system)?;
    let ctrl = io::load_controller(controller)?;
    let r = check_wellposed(&sys, &ctrl, tol)?;
    Ok((
        json!({
            "rank_lhs": r.rank_lhs,
            "rank_aug": r.rank_aug,
            "unknowns": r.unknowns,
            "existence_ok": r.existence_ok,
            "uniqueness_ok": r.uniqueness_ok,
            "verdict": r.verdict,
        }),
        r.verdict,
    ))
}

fn cmd_refine(
    conc: &Path,
    abs: &Path,
    rel: &Path,
    controller: &Path,
    out: Option<&Path>,
    tol: &Tolerance,
) -> Outcome {
    let conc = io::load_system(conc)?;
    let abs = io::load_system(abs)?;
    let rel = io::load_relation(rel)?;
    let ctrl = io::load_controller(controller)?;
    let (rc, cert) = refine_with_certificate(&conc, &abs, &rel, &ctrl, tol)?;
    if let Some(path) = out {
        io::save_refined(&rc, path)?;
    }
    let form = rc.descriptor_form();
    Ok((
        json!({
            "controller": io::refined_to_json(&rc),
            "descriptor_form": {
                "lift_left": matrix_to_json(&form.lift_left),
                "x_gain": matrix_to_json(&form.x_gain),
                "z_gain": matrix_to_json(&form.z_gain),
                "u_x": matrix_to_json(&form.u_x),
                "u_z": matrix_to_json(&form.u_z),
            },
            "certificate": {
                "rank_lhs": cert.composed.rank_lhs,
                "rank_aug": cert.composed.rank_aug,
                "unknowns": cert.composed.unknowns,
                "horizon": cert.horizon,
                "max_output_dev": cert.max_output_dev,
                "max_relation_dev": cert.max_relation_dev,
            },
            "verdict": true,
        }),
        true,
    ))
}

fn run_summary(
    sys: &dsrefine::DescriptorSystem,
    traj: &Trajectory,
    x0: &Vector,
    relation_dev: Option<f64>,
    csv: Option<PathBuf>,
) -> Result<Value, Failure> {
    if let Some(path) = &csv {
        io::save_trajectory_csv(traj, path)?;
    }
    Ok(json!({
        "x0": vector_to_json(x0),
        "horizon": traj.horizon(),
        "final_state": traj.x.last().map(vector_to_json),
        "y": traj.y.iter().map(vector_to_json).collect::<Vec<_>>(),
        "membership_residual": membership_residual(sys, traj)?,
        "max_relation_dev": relation_dev,
        "csv": csv.map(|p| p.display().to_string()),
    }))
}

fn cmd_simulate(
    system: &Path,
    controller: &Path,
    x0: Option<&str>,
    points: Option<&Path>,
    csv: Option<&Path>,
    steps: usize,
    tol: &Tolerance,
) -> Outcome {
    let sys = io::load_system(system)?;
    let doc = io::load_document(controller)?;
    let starts = match (x0, points) {
        (Some(text), _) => vec![parse_x0(text)?],
        (None, Some(path)) => io::load_points(path)?,
        (None, None) => return Err(usage("one of --x0 or --points is required")),
    };
    let batch = points.is_some();
    let csv_for = |i: usize| {
        csv.map(|c| {
            if batch {
                indexed_path(c, i)
            } else {
                c.to_path_buf()
            }
        })
    };

    let mut runs = Vec::new();
    if io::is_refined_document(&doc) {
        let rc = io::refined_from_json(&doc)?;
        for (i, x0) in starts.iter().enumerate() {
            let (traj, z) = simulate_refined(&sys, &rc, x0, steps, tol)?;
            let dev = traj
                .x
                .iter()
                .zip(&z)
                .map(|(x, z)| (rc.relation().h() * x - z).amax())
                .fold(0.0, f64::max);
            runs.push(run_summary(&sys, &traj, x0, Some(dev), csv_for(i))?);
        }
    } else {
        let ctrl = io::controller_from_json(&doc)?;
        for (i, x0) in starts.iter().enumerate() {
            let traj = simulate_closed_loop(&sys, &ctrl, x0, steps, tol)?;
            runs.push(run_summary(&sys, &traj, x0, None, csv_for(i))?);
        }
    }
    let report = if batch {
        json!({ "runs": runs })
    } else {
        runs.pop().expect("one run")
    };
    Ok((report, true))
}

fn cmd_verify_reference(opts: &Options, tol: &Tolerance) -> Outcome {
    let checks = reference::run_checks(tol, opts.seed, opts.steps, opts.bound);
    let pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        eprintln!(
            "[{}] {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let list: Vec<Value> = checks
        .iter()
        .map(|c| json!({ "name": c.name, "pass": c.pass, "detail": c.detail }))
        .collect();
    Ok((json!({ "checks": list, "verdict": pass }), pass))
}

fn run(cli: &Cli) -> Outcome {
    let tol = tolerance(&cli.opts)?;
    match &cli.command {
        Command::Validate { system } => cmd_validate(system, &tol),
        Command::ToDv { system, out } => cmd_to_dv(system, out.as_deref(), &tol),
        Command::CheckSim {
            abs,
            conc,
            relation,
        } => cmd_check_sim(abs, conc, relation, &tol),
        Command::CheckWellposed { system, controller } => {
            cmd_check_wellposed(system, controller, &tol)
        }
        Command::Refine {
            conc,
            abs,
            relation,
            controller,
            out,
        } => cmd_refine(conc, abs, relation, controller, out.as_deref(), &tol),
        Command::Simulate {
            system,
            controller,
            x0,
            points,
            csv,
        } => cmd_simulate(
            system,
            controller,
            x0.as_deref(),
            points.as_deref(),
            csv.as_deref(),
            cli.opts.steps,
            &tol,
        ),
        Command::VerifyReference => cmd_verify_reference(&cli.opts, &tol),
    }
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((report, ok)) => {
            emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
            ExitCode::from(if ok { 0 } else { 1 })
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            emit(&json!({ "error": f.message, "exit_code": f.code }).to_string());
            ExitCode::from(f.code)
        }
    }
}
