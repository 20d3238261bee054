use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use hjb_bdf2_cli::{parse_config, run_scenario, selfcheck};

/// Runs a convergence study described by a config file.
#[derive(Parser, Debug)]
#[command(name = "hjb-bdf2", version)]
struct Args {
    /// Run configuration (see docs/config.md).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for table.csv, report.json and dumps.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for the ladder rows (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Write the final-time profile of every row.
    #[arg(long)]
    dump_profiles: bool,
    /// Write the first-step matrices of the coarsest row.
    #[arg(long)]
    dump_matrices: bool,
    /// Run the randomized solver self-check with this seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let args = Args::parse();
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut ok = true;
    if let Some(seed) = args.seed {
        let report = selfcheck::run(seed, 1000);
        fs::create_dir_all(&args.out_dir)?;
        let path = args.out_dir.join("selfcheck.json");
        fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        let passed = report["passed"].as_bool().unwrap_or(false);
        println!(
            "solver self-check (seed {seed}): {} (max deviation {:e})",
            if passed { "passed" } else { "FAILED" },
            report["max_deviation"].as_f64().unwrap_or(f64::NAN)
        );
        ok &= passed;
    }
    let Some(path) = args.config else {
        anyhow::ensure!(
            args.seed.is_some(),
            "nothing to do: pass --config and/or --seed"
        );
        return Ok(ok);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    cfg.dump_profiles |= args.dump_profiles;
    cfg.dump_matrices |= args.dump_matrices;
    let outcome = run_scenario(&cfg, &args.out_dir)?;
    print!("{}", outcome.table.to_csv_string());
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    if !outcome.success {
        eprintln!("some rows failed or had an infeasible certificate; see report.json");
    }
    Ok(ok && outcome.success)
}
