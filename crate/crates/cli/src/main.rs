use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mdl_core::dota::{evaluate_map, load_annotations, load_submissions, write_results_csv, ApInterpolation};
use mdl_core::geometry::ObbCenterWHAngle;
use mdl_core::gradcheck::{check_all_with_step, DEFAULT_STEP, DEFAULT_TOLERANCE};
use mdl_core::sweep::{emit_csv, parse_loss_list, run_sweep, BoxDelta, SweepFactor, SweepSpec};
use mdl_core::Error;

#[derive(Parser)]
#[command(
    name = "mdl",
    version,
    about = "Rotated-box loss sweeps, gradient checks and DOTA evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one geometric factor and write a loss table as CSV.
    Sweep(SweepArgs),
    /// Compare every analytic loss gradient against central differences.
    Gradcheck(GradcheckArgs),
    /// Score DOTA Task-1 submissions against label files.
    DotaEval(EvalArgs),
}

#[derive(clap::Args)]
struct SweepArgs {
    /// scale, angle, shift or aspect
    #[arg(long)]
    factor: SweepFactor,
    #[arg(long, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long)]
    steps: usize,
    /// Comma-separated: mdl_t, mdl_p, l1, l2, smooth_l1, one_minus_skew_iou
    #[arg(long)]
    losses: String,
    /// Take each loss as the minimum over cyclic vertex relabelings.
    #[arg(long)]
    boundary_min: bool,
    /// Target box as cx,cy,w,h,theta
    #[arg(long, allow_hyphen_values = true, default_value = "0,0,4,2,0")]
    base: String,
    /// Prediction offset from the target as dcx,dcy,dw,dh,dtheta
    #[arg(long, allow_hyphen_values = true, default_value = "0,0,0,0,0")]
    offset: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Interp {
    #[value(name = "11point")]
    ElevenPoint,
    #[value(name = "all")]
    AllPoint,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Directory of <image_id>.txt label files
    #[arg(long)]
    gt: PathBuf,
    /// Directory of Task1_<class>.txt submission files
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, value_enum, default_value = "11point")]
    interp: Interp,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Validation(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

fn parse5(s: &str, what: &str) -> Result<[f64; 5], Failure> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Validation(format!("--{what}: {e}")))?;
    vals.try_into()
        .map_err(|v: Vec<f64>| Failure::Validation(format!("--{what} needs 5 comma-separated values, got {}", v.len())))
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let [cx, cy, w, h, theta] = parse5(&a.base, "base")?;
    let [dcx, dcy, dw, dh, dtheta] = parse5(&a.offset, "offset")?;
    let spec = SweepSpec {
        factor: a.factor,
        base_box: ObbCenterWHAngle { cx, cy, w, h, theta },
        pred_offset: BoxDelta {
            dcx,
            dcy,
            dw,
            dh,
            dtheta,
        },
        range: (a.lo, a.hi),
        steps: a.steps,
        losses: parse_loss_list(&a.losses)?,
        boundary_min: a.boundary_min,
    };
    let rows = run_sweep(&spec)?;
    for r in &rows {
        if let Some(e) = &r.error {
            eprintln!("warning: {e}");
        }
    }
    emit_csv(&rows, &a.out)?;
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<(), Failure> {
    let reports = check_all_with_step(a.seed, a.cases, a.tol, a.step)?;
    let mut failed = 0;
    for r in &reports {
        println!(
            "{:<26} cases={:<5} max_rel_error={:.3e} {}",
            r.op_name,
            r.cases,
            r.max_rel_error,
            if r.passed { "PASS" } else { "FAIL" }
        );
        if !r.passed {
            failed += 1;
            println!("  worst input: {}", r.worst_input);
        }
    }
    if failed > 0 {
        return Err(Failure::Validation(format!(
            "{failed} of {} operations failed",
            reports.len()
        )));
    }
    Ok(())
}

fn dota_eval(a: EvalArgs) -> Result<(), Failure> {
    if !(a.iou > 0.0 && a.iou <= 1.0) {
        return Err(Failure::Validation(format!("--iou must lie in (0, 1], got {}", a.iou)));
    }
    let gts = load_annotations(&a.gt)?;
    let (preds, skipped) = load_submissions(&a.pred)?;
    for p in skipped {
        eprintln!("warning: {} does not name a DOTA category; skipped", p.display());
    }
    let interp = match a.interp {
        Interp::ElevenPoint => ApInterpolation::ElevenPoint,
        Interp::AllPoint => ApInterpolation::AllPoint,
    };
    let result = evaluate_map(&gts, &preds, a.iou, interp);
    let file = File::create(&a.out).map_err(|e| Failure::Io(format!("{}: {e}", a.out.display())))?;
    write_results_csv(&result, BufWriter::new(file))?;
    println!("mAP {:.4}", result.map_score);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::DotaEval(a) => dota_eval(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
