//! Command-line front end: stability analysis of MDP files, single runs,
//! grid sweeps, the divergence demonstration, and fixed-point tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use ges_lab::analysis::{self, StabilityReport};
use ges_lab::harness::{
    self, divergence_demo, emit_results, format_f64, parse_config, parse_mdp_file, Regime,
    OUT_DIR_ENV,
};
use ges_lab::Error;

#[derive(Parser)]
#[command(name = "geslab", version, about = "Off-policy evaluation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral stability report for an MDP file: spectrum of the key
    /// matrix, verdict, safe step size, fixed point, objective at zero, and
    /// rate constants.
    Analyze(AnalyzeArgs),
    /// One learner run from a config file; writes runs.csv.
    Run(RunArgs),
    /// Full step-size grid from a config file; writes runs.csv, summary.csv
    /// and optional plots.
    Sweep(RunArgs),
    /// Expected off-line iteration on the two-state counterexample.
    DemoDivergence(DemoArgs),
    /// Fixed points of the target-chain and behavior-chain expectation
    /// models for an MDP file.
    FixedPoints(AnalyzeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// MDP file (plain-text key-value format).
    mdp_file: PathBuf,
    /// Trace decay in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Name of the target policy inside the file.
    #[arg(long, default_value = "target")]
    target: String,
    /// Name of the behavior policy inside the file.
    #[arg(long, default_value = "behavior")]
    behavior: String,
    /// Also write the report as a machine-readable key-value file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file.
    config: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    t_max: usize,
    /// Write the |theta_1| curve as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze(&args),
        Command::Run(args) => run_single(&args),
        Command::Sweep(args) => run_sweep(&args),
        Command::DemoDivergence(args) => demo(&args),
        Command::FixedPoints(args) => fixed_points(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn analyze(args: &AnalyzeArgs) -> Result<(), Error> {
    let file = parse_mdp_file(&args.mdp_file)?;
    let pi = file.policy(&args.target)?;
    let mu = file.policy(&args.behavior)?;
    let km = analysis::key_matrices(&file.mdp, pi, mu, &file.features, args.lambda)?;
    let report = analysis::stability_check(&km)?;

    let mut kv = String::new();
    kv.push_str("schema_version = 1\n");
    kv.push_str(&format!("lambda = {}\n", format_f64(args.lambda)));
    kv.push_str(&format!("gamma = {}\n", format_f64(file.mdp.gamma())));

    println!("spectrum of the key matrix:");
    for (i, l) in report.eigenvalues.iter().enumerate() {
        println!("  lambda_{i} = {:+.6e} {:+.6e}i", l.re, l.im);
        kv.push_str(&format!(
            "eigenvalue {i} = {} {}\n",
            format_f64(l.re),
            format_f64(l.im)
        ));
    }
    println!("max real part: {:+.6e}", report.max_real_part);
    kv.push_str(&format!(
        "max_real_part = {}\n",
        format_f64(report.max_real_part)
    ));
    print_verdict(&report, &mut kv);

    match analysis::td_fixed_point(&km) {
        Ok(star) => {
            let rendered: Vec<String> = star.iter().map(|x| format!("{x:+.6e}")).collect();
            println!("fixed point: [{}]", rendered.join(", "));
            let raw: Vec<String> = star.iter().map(|x| format_f64(*x)).collect();
            kv.push_str(&format!("theta_star = {}\n", raw.join(" ")));
        }
        Err(e) => {
            println!("fixed point: not solvable ({e})");
            kv.push_str("theta_star = unsolvable\n");
        }
    }
    match analysis::mspbe(&km, &DVector::zeros(km.dim())) {
        Ok(v) => {
            println!("objective at theta = 0: {v:.6e}");
            kv.push_str(&format!("mspbe_at_zero = {}\n", format_f64(v)));
        }
        Err(_) => {
            let v = analysis::mspbe_pseudo(&km, &DVector::zeros(km.dim()));
            println!(
                "objective at theta = 0 (pseudo-inverse; Gram matrix rank-deficient): {v:.6e}"
            );
            kv.push_str(&format!("mspbe_at_zero_pseudo = {}\n", format_f64(v)));
        }
    }
    match analysis::rate_constants(&km) {
        Ok(r) => {
            println!(
                "rate constants: nu = {:.6e}, alpha* = {:.6e}, beta* = {:.6e}, contraction = {:.8}",
                r.nu, r.alpha_star, r.beta_star, r.contraction
            );
            println!(
                "condition numbers: kappa(M) = {:.4e}, kappa(A) = {:.4e}",
                r.kappa_m, r.kappa_a
            );
            for (k, v) in [
                ("nu", r.nu),
                ("alpha_star", r.alpha_star),
                ("beta_star", r.beta_star),
                ("contraction", r.contraction),
                ("kappa_m", r.kappa_m),
                ("kappa_a", r.kappa_a),
            ] {
                kv.push_str(&format!("{k} = {}\n", format_f64(v)));
            }
        }
        Err(e) => println!("rate constants: unavailable ({e})"),
    }
    if let Some(out) = &args.out {
        std::fs::write(out, kv)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn print_verdict(report: &StabilityReport, kv: &mut String) {
    if report.stable {
        let alpha = report
            .safe_step_size
            .expect("stable report carries a step size");
        println!("verdict: STABLE (expected off-line update converges)");
        println!("safe step size: {alpha:.6e} (spectral radius of I + alpha*A < 1, verified)");
        kv.push_str("stable = true\n");
        kv.push_str(&format!("safe_step_size = {}\n", format_f64(alpha)));
    } else {
        println!("verdict: UNSTABLE (some eigenvalue has a nonnegative real part)");
        kv.push_str("stable = false\n");
    }
}

fn out_dir_of(config: &harness::ExperimentConfig) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| config.out_dir.clone())
}

fn run_single(args: &RunArgs) -> Result<(), Error> {
    let config = parse_config(&args.config)?;
    let record = harness::single_run(&config)?;
    let out_dir = out_dir_of(&config);
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("runs.csv");
    harness::write_runs_csv(&path, std::slice::from_ref(&record))?;
    let last = record.series.records.last().expect("non-empty series");
    println!(
        "run finished: {} steps, final objective {:.6e}, diverged: {} ({:.2}s)",
        last.step, last.mspbe, record.diverged, record.wall_time_s
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn run_sweep(args: &RunArgs) -> Result<(), Error> {
    let config = parse_config(&args.config)?;
    let records = harness::sweep(&config)?;
    let out_dir = out_dir_of(&config);
    let written = emit_results(&records, &config, &out_dir)?;
    let cells = harness::summarize(&records);
    let best = cells
        .iter()
        .filter(|c| c.mean_final_mspbe.is_finite())
        .min_by(|a, b| {
            a.mean_final_mspbe
                .partial_cmp(&b.mean_final_mspbe)
                .expect("finite")
        });
    println!(
        "sweep finished: {} runs over {} cells, {} diverged",
        records.len(),
        cells.len(),
        records.iter().filter(|r| r.diverged).count()
    );
    if let Some(best) = best {
        println!(
            "best cell: alpha = {:.6e}, beta/alpha = {:.6e}, mean final objective = {:.6e}",
            best.alpha, best.beta_over_alpha, best.mean_final_mspbe
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn demo(args: &DemoArgs) -> Result<(), Error> {
    let report = divergence_demo(args.gamma, args.lambda, args.alpha, args.t_max)?;
    match report.regime {
        Regime::Divergent => println!(
            "divergent regime (gamma > 5/(6 - lambda) = {:.6}); eigenvalue {:+.6e}",
            5.0 / (6.0 - args.lambda),
            report.eigenvalue
        ),
        Regime::Stable => println!(
            "stable regime (gamma <= 5/(6 - lambda) = {:.6}); eigenvalue {:+.6e}",
            5.0 / (6.0 - args.lambda),
            report.eigenvalue
        ),
    }
    println!(
        "per-step growth factor 1 + alpha*c = {:.10}",
        report.growth_factor
    );
    match report.crossing_step {
        Some(t) => println!("|theta_1| crossed 1e6 at step {t}"),
        None => println!(
            "|theta_1| after {} steps: {:.6e}",
            report.first_component.len() - 1,
            report.first_component.last().unwrap()
        ),
    }
    if let Some(out) = &args.out {
        let mut csv = String::from("step,abs_theta_1\n");
        for (t, v) in report.first_component.iter().enumerate() {
            csv.push_str(&format!("{t},{}\n", format_f64(*v)));
        }
        std::fs::write(out, csv)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn fixed_points(args: &AnalyzeArgs) -> Result<(), Error> {
    let file = parse_mdp_file(&args.mdp_file)?;
    let pi = file.policy(&args.target)?;
    let mu = file.policy(&args.behavior)?;
    let rows = analysis::fixed_point_table(&file.mdp, pi, mu, &file.features, args.lambda)?;
    println!("fixed points at lambda = {}:", args.lambda);
    for row in &rows {
        match (&row.theta, row.residual) {
            (Ok(theta), Some(res)) => {
                let rendered: Vec<String> = theta.iter().map(|x| format!("{x:+.6e}")).collect();
                println!(
                    "  {:>4}: [{}]  (residual {res:.3e})",
                    row.algorithm,
                    rendered.join(", ")
                );
            }
            (Err(e), _) => println!("  {:>4}: not solvable ({e})", row.algorithm),
            _ => unreachable!("solved rows carry residuals"),
        }
    }
    Ok(())
}
