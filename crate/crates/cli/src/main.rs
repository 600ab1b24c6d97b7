use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use fairdiv_cli::{run_experiment, RawConfig, Subcommand};

/// Seeded fair-division experiments under noisy valuations.
///
/// Settings come from an optional `key=value` config file; flags override
/// the file. The report (CSV, or JSON with --json) goes to --out or stdout.
/// Exits 0 when no trial recorded a hard violation, 1 otherwise, and 2 on
/// configuration or runtime errors.
#[derive(Debug, Parser)]
#[command(name = "fairdiv", version)]
struct Cli {
    /// rr, rr-lowerbound, welfare, lp, online-envy, balance, multicolor,
    /// btl, mhr, verify-statcheck or verify-all
    subcommand: Subcommand,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Comparisons per edge, or `inf` for exact win frequencies
    #[arg(long = "K")]
    k: Option<String>,
    #[arg(long)]
    colors: Option<usize>,
    /// Distribution of true values, e.g. `uniform:0,1`
    #[arg(long)]
    truth: Option<String>,
    /// Noise distribution, e.g. `exp:0.05`
    #[arg(long)]
    dist: Option<String>,
    /// shift, box or worst
    #[arg(long)]
    noise: Option<String>,
    /// Comma-separated picking order
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Side log for trial 0
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    /// Add a per-trial time_ms column (output is then not reproducible)
    #[arg(long)]
    timings: bool,
}

impl Cli {
    fn raw_config(&self) -> Result<RawConfig> {
        let mut raw = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                RawConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => RawConfig::default(),
        };
        let flags: [(&str, Option<String>); 17] = [
            ("subcommand", Some(self.subcommand.to_string())),
            ("seed", self.seed.map(|x| x.to_string())),
            ("n", self.n.map(|x| x.to_string())),
            ("m", self.m.map(|x| x.to_string())),
            ("trials", self.trials.map(|x| x.to_string())),
            ("eps", self.eps.map(|x| x.to_string())),
            ("delta", self.delta.map(|x| x.to_string())),
            ("C", self.c.map(|x| x.to_string())),
            ("p", self.p.map(|x| x.to_string())),
            ("K", self.k.clone()),
            ("colors", self.colors.map(|x| x.to_string())),
            ("truth", self.truth.clone()),
            ("dist", self.dist.clone()),
            ("noise", self.noise.clone()),
            ("order", self.order.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("log", self.log.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set_flag(key, v)?;
            }
        }
        if self.json {
            raw.set_flag("json", "true")?;
        }
        if self.timings {
            raw.set_flag("timings", "true")?;
        }
        Ok(raw)
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = cli.raw_config()?.build()?;
    let report = run_experiment(&cfg)?;
    match &cfg.out {
        Some(path) => {
            let mut file = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            report.write(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            report.write(&mut lock)?;
            lock.flush()?;
        }
    }
    for v in report.violations() {
        eprintln!("violation: {v}");
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
