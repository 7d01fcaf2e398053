//! `sindex`: robust single index model estimation.
//!
//! Subcommands: `calibrate` (tuning-constant table), `fit` (fit a CSV
//! dataset), `sim run` (Monte Carlo study), `eif` (influence surface).
//! Exit codes: 0 success, 1 usage/config error, 2 numerical failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use sindex_core::{
    eif_map, fit_dataset, gen_clean, run_replications, s_star, EifMode, Error, EstimatorKind,
    GridSpec, KernelKind, PipelineOptions, Scheme, SimConfig, TauMode, WeightFn,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sindex", version, about = "Robust single index model estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the S-scale calibration curve value, the efficiency-targeted
    /// tuning constant and the attained efficiency for a given shape.
    Calibrate(CalibrateArgs),
    /// Fit a single index model to a CSV dataset (header y,x1,...,xq).
    Fit(FitArgs),
    /// Monte Carlo simulation study.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Empirical influence surface of the fitted index over a (y0, x0) grid.
    Eif(EifArgs),
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run replications for one scheme (or all of them).
    Run(SimRunArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    /// shape parameter of the log-Gamma errors
    #[arg(long)]
    gamma: f64,
    /// target asymptotic efficiency of the Tukey deviance M-estimator
    #[arg(long, default_value_t = 0.90)]
    eff: f64,
    /// right side of the S-scale equation
    #[arg(long, default_value_t = 0.5)]
    b: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Tukey,
    Classical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelArg {
    Epanechnikov,
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TauArg {
    Indicator,
    Distance,
}

#[derive(Args)]
struct FitArgs {
    /// input CSV with header y,x1,...,xq
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = LossArg::Tukey)]
    loss: LossArg,
    #[arg(long, default_value_t = 5)]
    kfolds: usize,
    /// seed of the cross-validation fold assignment
    #[arg(long)]
    seed: u64,
    /// fixed step-1 bandwidth (overrides --h1-grid)
    #[arg(long)]
    h1: Option<f64>,
    /// step-1 bandwidth grid as lo:hi:count
    #[arg(long, default_value = "0.05:0.35:13")]
    h1_grid: String,
    /// fixed step-3 bandwidth (overrides --h2-grid)
    #[arg(long)]
    h2: Option<f64>,
    /// step-3 bandwidth grid as lo:hi:count
    #[arg(long, default_value = "0.05:0.35:25")]
    h2_grid: String,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    kernel: KernelArg,
    #[arg(long, value_enum, default_value_t = TauArg::Indicator)]
    tau: TauArg,
    /// write a one-row summary CSV here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimRunArgs {
    /// JSON config with keys matching the simulation configuration fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// base seed (mandatory: the reproducibility contract)
    #[arg(long)]
    seed: u64,
    /// scheme to run: C0, M1..M3, S1..S3 or "all"
    #[arg(long)]
    scheme: Option<String>,
    /// replication count override
    #[arg(long)]
    reps: Option<usize>,
    /// sample size override
    #[arg(long)]
    n: Option<usize>,
    /// full-scale study (1000 replications, 13/25-point grids)
    #[arg(long)]
    full: bool,
    /// output directory for the per-replication and aggregate CSVs
    #[arg(long, default_value = "sim_out")]
    out: PathBuf,
}

#[derive(Args)]
struct EifArgs {
    /// input CSV with header y,x1,...,xq; omit to use a generated sample
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LossArg::Tukey)]
    loss: LossArg,
    #[arg(long)]
    seed: u64,
    /// bandwidth of the profile step (fixed; influence formulas assume it)
    #[arg(long, default_value_t = 0.25)]
    h1: f64,
    /// contaminating response grid as lo:hi:count
    #[arg(long, default_value = "-2:8:11")]
    y_grid: String,
    /// per-coordinate covariate grid as lo:hi:count (cartesian product)
    #[arg(long, default_value = "0:1:5")]
    x_grid: String,
    /// evaluate the literal displayed denominators instead of the
    /// derivation-consistent curvature denominators
    #[arg(long)]
    score_denominators: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap prints its own message; usage problems exit with 1
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Calibrate(a) => run_calibrate(a),
        Command::Fit(a) => run_fit(a),
        Command::Sim(SimCommand::Run(a)) => run_sim(a),
        Command::Eif(a) => run_eif(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::InvalidInput(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run_calibrate(a: CalibrateArgs) -> Result<(), Error> {
    let s = s_star(a.gamma, a.b)?;
    let cal = sindex_core::calibrate_tuning(a.gamma, a.eff, s)?;
    let attained = sindex_core::efficiency(cal.c, a.gamma)?;
    println!("gamma          {:.6}", a.gamma);
    println!("b              {:.6}", a.b);
    println!("S*(gamma)      {:.6}", s);
    println!("target eff     {:.6}", a.eff);
    println!("c              {:.6}", cal.c);
    println!("efficiency(c)  {:.6}", attained);
    if cal.floored {
        println!("note: the scale floor S* was binding");
    }
    if cal.unreachable {
        println!("note: target efficiency unreachable below c = 100");
    }
    Ok(())
}

fn pipeline_options(
    q: usize,
    n: usize,
    loss: LossArg,
    kernel: KernelArg,
    tau: TauArg,
    kfolds: usize,
    seed: u64,
    h1: Option<f64>,
    h1_grid: &str,
    h2: Option<f64>,
    h2_grid: &str,
) -> Result<PipelineOptions, Error> {
    let kind = match loss {
        LossArg::Tukey => EstimatorKind::Robust,
        LossArg::Classical => EstimatorKind::Classical,
    };
    let h1_grid = match h1 {
        Some(v) => vec![v],
        None => GridSpec::parse(h1_grid)?.values(),
    };
    let h2_grid = match h2 {
        Some(v) => vec![v],
        None => GridSpec::parse(h2_grid)?.values(),
    };
    let tau_mode = match tau {
        TauArg::Indicator => TauMode::Indicator,
        TauArg::Distance => TauMode::DistanceTimesIndicator,
    };
    Ok(PipelineOptions {
        kind,
        kernel: match kernel {
            KernelArg::Epanechnikov => KernelKind::Epanechnikov,
            KernelArg::Gaussian => KernelKind::Gaussian,
        },
        h1_grid,
        h2_grid,
        k_folds: kfolds,
        cv_seed: seed,
        tau: WeightFn::default_for(n, q, tau_mode),
        b_const: 0.5,
        target_eff: 0.90,
        rcv_c: 1.6394,
        sphere: Default::default(),
        local_tol: 1e-8,
    })
}

fn run_fit(a: FitArgs) -> Result<(), Error> {
    let data = sindex_core::sim::read_data_csv(&a.data)?;
    let opts = pipeline_options(
        data.q,
        data.n(),
        a.loss,
        a.kernel,
        a.tau,
        a.kfolds,
        a.seed,
        a.h1,
        &a.h1_grid,
        a.h2,
        &a.h2_grid,
    )?;
    let full = fit_dataset(&data, &opts)?;
    let fit = &full.fit;
    println!(
        "beta_hat    [{}]",
        fit.beta
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!(
        "theta_star  [{}]",
        fit.theta_star
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("h1          {:.6}", fit.h1);
    println!("h2          {:.6}", fit.h2);
    match fit.gamma_hat {
        Some(g) => println!("gamma_hat   {g:.6}"),
        None => println!("gamma_hat   n/a"),
    }
    println!("c_hat       {:.6}", fit.alpha_hat);
    println!("objective   {:.6e}", fit.objective);
    if let Some(out) = &a.out {
        write_fit_summary(out, fit)?;
        println!("summary written to {}", out.display());
    }
    Ok(())
}

fn write_fit_summary(path: &Path, fit: &sindex_core::IndexFit) -> Result<(), Error> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let q = fit.beta.len();
    let mut header = Vec::new();
    for j in 1..=q {
        header.push(format!("beta{j}"));
    }
    for j in 1..q {
        header.push(format!("theta{j}"));
    }
    header.extend(["h1", "h2", "gamma_hat", "c_hat", "objective"].map(String::from));
    wtr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    let mut row: Vec<String> = fit.beta.iter().map(|v| v.to_string()).collect();
    row.extend(fit.theta_star.iter().map(|v| v.to_string()));
    row.push(fit.h1.to_string());
    row.push(fit.h2.to_string());
    row.push(fit.gamma_hat.map_or(String::new(), |v| v.to_string()));
    row.push(fit.alpha_hat.to_string());
    row.push(fit.objective.to_string());
    wtr.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    wtr.flush().map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn run_sim(a: SimRunArgs) -> Result<(), Error> {
    let mut cfg: SimConfig = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(e.to_string()))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))?
        }
        None => SimConfig::default(),
    };
    if a.full {
        cfg = cfg.full_scale();
    }
    cfg.base_seed = a.seed;
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(r) = a.reps {
        cfg.n_reps = r;
    }
    let schemes: Vec<Scheme> = match a.scheme.as_deref() {
        Some("all") | Some("ALL") => Scheme::ALL.to_vec(),
        Some(s) => vec![s.parse()?],
        None => vec![cfg.scheme],
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io(e.to_string()))?;
    let mut all_aggregates = Vec::new();
    for scheme in schemes {
        cfg.scheme = scheme;
        eprintln!(
            "running scheme {} ({} reps, n = {})...",
            scheme.name(),
            cfg.n_reps,
            cfg.n
        );
        let result = run_replications(&cfg)?;
        let rec_path = a.out.join(format!("records_{}.csv", scheme.name()));
        sindex_core::sim::write_rep_records(&rec_path, &result.records)?;
        all_aggregates.extend(result.aggregates.clone());
        for row in &result.aggregates {
            println!(
                "{} {}: mse_beta={:.4} mse_eta={:.4} medse_eta={:.4} h1={:.3} h2={:.3} failed={}/{}",
                row.scheme.name(),
                row.estimator.name(),
                row.mse_beta,
                row.mse_eta,
                row.medse_eta,
                row.median_h1,
                row.median_h2,
                row.n_failed,
                row.n_reps
            );
        }
    }
    let agg_path = a.out.join("aggregates.csv");
    sindex_core::sim::write_aggregates(&agg_path, &all_aggregates)?;
    println!("results written to {}", a.out.display());
    Ok(())
}

fn run_eif(a: EifArgs) -> Result<(), Error> {
    let data = match &a.data {
        Some(path) => sindex_core::sim::read_data_csv(path)?,
        None => gen_clean(100, a.seed, &SimConfig::default())?,
    };
    let opts = pipeline_options(
        data.q,
        data.n(),
        a.loss,
        KernelArg::Gaussian,
        TauArg::Indicator,
        5,
        a.seed,
        Some(a.h1),
        "",
        Some(a.h1),
        "",
    )?;
    let full = fit_dataset(&data, &opts)?;
    let y_spec = parse_signed_grid(&a.y_grid)?;
    let x_spec = parse_signed_grid(&a.x_grid)?;
    let y_grid = y_spec;
    // cartesian product of the per-coordinate grid
    let mut x_grid: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..data.q {
        let mut next = Vec::new();
        for partial in &x_grid {
            for &v in &x_spec {
                let mut p = partial.clone();
                p.push(v);
                next.push(p);
            }
        }
        x_grid = next;
    }
    let tau = WeightFn::default_for(data.n(), data.q, TauMode::Indicator);
    let mode = if a.score_denominators {
        EifMode::ScoreDenominator
    } else {
        EifMode::ChiDenominator
    };
    let rows = eif_map(&full.fit, &data, &tau, &y_grid, &x_grid, mode);

    let mut wtr = csv::Writer::from_path(&a.out).map_err(|e| Error::Io(e.to_string()))?;
    let mut header = vec!["y0".to_string()];
    for j in 1..=data.q {
        header.push(format!("x0_{j}"));
    }
    header.push("eif_norm".to_string());
    for j in 1..=data.q {
        header.push(format!("eif_{j}"));
    }
    header.push("flag".to_string());
    wtr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for row in &rows {
        let mut rec = vec![row.y0.to_string()];
        for v in &row.x0 {
            rec.push(v.to_string());
        }
        match (&row.eif, row.norm()) {
            (Some(eif), Some(norm)) => {
                rec.push(norm.to_string());
                for v in eif {
                    rec.push(v.to_string());
                }
                rec.push(String::new());
            }
            _ => {
                rec.push(String::new());
                for _ in 0..data.q {
                    rec.push(String::new());
                }
                rec.push(row.flag.clone().unwrap_or_else(|| "failed".into()));
            }
        }
        wtr.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Io(e.to_string()))?;
    println!("{} cells written to {}", rows.len(), a.out.display());
    Ok(())
}

/// lo:hi:count where lo may be negative (unlike bandwidth grids).
fn parse_signed_grid(s: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid must be lo:hi:count, got '{s}'")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid bound '{}'", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid count '{}'", parts[2])))?;
    if count == 0 || hi < lo {
        return Err(Error::Config(format!("degenerate grid '{s}'")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count).map(|k| lo + step * k as f64).collect())
}
