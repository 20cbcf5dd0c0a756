use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use iasim::harness::{
    emit_csv, emit_svg, parse_scenario, precoder_scaling_study, prop2_experiment, quantizer_study,
    run_sweep, validate, Scenario, SweepResult,
};

#[derive(Parser)]
#[command(
    name = "iasim",
    about = "3-user MIMO interference alignment under distributed CSI: Monte-Carlo rate/DoF sweeps and the companion experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonOpts {
    /// Write the per-(SNR, user) table as CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Write a line chart as a self-contained SVG.
    #[arg(long)]
    out_svg: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo rate sweep described by a scenario file.
    Sweep {
        scenario: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Injected-perturbation study: perfect precoders corrupted with power
    /// P^-beta_j, rates evaluated with perfect receive filters.
    Prop2 {
        /// Scenario file; defaults to the built-in golden setting.
        scenario: Option<PathBuf>,
        /// Per-TX accuracy exponents in [0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.5,0.5")]
        beta: Vec<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Empirical RVQ distortion-versus-bits curve.
    Quantizer {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_value = "6,9,12,15,18")]
        bits: Vec<u32>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Precoder-error scaling exponents for uniform accuracy profiles.
    Scaling {
        /// Accuracy levels to measure.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1.0")]
        a_min: Vec<f64>,
        /// Conditioning-filter threshold.
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Run every module's invariant suite.
    Validate,
}

fn load(path: &PathBuf) -> iasim::Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

fn apply_overrides(s: &mut Scenario, common: &CommonOpts) {
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    if let Some(trials) = common.trials {
        s.trials = trials;
    }
}

fn emit(result: &SweepResult, common: &CommonOpts) -> iasim::Result<()> {
    if let Some(path) = &common.out_csv {
        emit_csv(result, path)?;
    }
    if let Some(path) = &common.out_svg {
        emit_svg(result, path)?;
    }
    Ok(())
}

fn print_sweep(result: &SweepResult) {
    println!("scenario {}", result.scenario_hash);
    println!("snr_db  rates (bits/channel use)  degenerate");
    for (pi, pt) in result.points.iter().enumerate() {
        let rates: Vec<String> = pt
            .per_user_rate
            .iter()
            .zip(&result.stderr[pi])
            .map(|(r, se)| format!("{r:7.3}±{se:.3}"))
            .collect();
        println!(
            "{:6}  {}  {:.4}",
            pt.p_db,
            rates.join("  "),
            result.degenerate_fraction[pi]
        );
    }
    let slopes: Vec<String> = result
        .dof
        .per_user_slope
        .iter()
        .zip(&result.dof.r2)
        .map(|(s, r2)| format!("{s:.3} (r2 {r2:.3})"))
        .collect();
    println!(
        "dof slopes over {}..{} dB: {}",
        result.dof.window.0,
        result.dof.window.1,
        slopes.join(", ")
    );
}

fn run(cli: Cli) -> iasim::Result<i32> {
    match cli.command {
        Command::Sweep { scenario, common } => {
            let mut s = load(&scenario)?;
            apply_overrides(&mut s, &common);
            let result = run_sweep(&s)?;
            print_sweep(&result);
            emit(&result, &common)?;
            Ok(0)
        }
        Command::Prop2 {
            scenario,
            beta,
            common,
        } => {
            let mut s = match scenario {
                Some(p) => load(&p)?,
                None => Scenario::golden(),
            };
            apply_overrides(&mut s, &common);
            if beta.len() != 3 {
                return Err(iasim::Error::InvalidScenario(
                    "--beta needs exactly three values".into(),
                ));
            }
            let result = prop2_experiment(&[beta[0], beta[1], beta[2]], &s)?;
            print_sweep(&result);
            emit(&result, &common)?;
            Ok(0)
        }
        Command::Quantizer {
            n,
            m,
            bits,
            trials,
            seed,
            out_csv,
        } => {
            let study = quantizer_study(n, m, &bits, trials, seed)?;
            println!("bits  mean_distortion_sq  stderr");
            let mut csv = String::from("bits,mean_distortion_sq,stderr\n");
            for row in &study.rows {
                println!(
                    "{:4}  {:.6e}  {:.3e}",
                    row.bits, row.mean_distortion_sq, row.stderr
                );
                csv.push_str(&format!(
                    "{},{},{}\n",
                    row.bits, row.mean_distortion_sq, row.stderr
                ));
            }
            println!("fitted exponent (per bit): {:.4}", study.exponent);
            if let Some(path) = out_csv {
                std::fs::write(path, csv)?;
            }
            Ok(0)
        }
        Command::Scaling {
            a_min,
            eps,
            trials,
            seed,
            out_csv,
        } => {
            let s = iasim::harness::scaling_scenario(trials, eps, seed);
            let study = precoder_scaling_study(&a_min, &s)?;
            println!("a_min  fitted_exponent");
            let mut csv = String::from("a_min,fitted_exponent\n");
            for row in &study.rows {
                println!("{:5}  {:.4}", row.a_min, row.exponent);
                csv.push_str(&format!("{},{}\n", row.a_min, row.exponent));
            }
            if let Some(path) = out_csv {
                std::fs::write(path, csv)?;
            }
            Ok(0)
        }
        Command::Validate => {
            let failures = validate::run_all(std::io::stdout().lock());
            Ok(if failures == 0 { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("IASIM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{{\"error\":\"{}\"}}", e.to_string().replace('"', "'"));
            ExitCode::from(2)
        }
    }
}
