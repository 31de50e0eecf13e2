//! Batch front end: `linking <mode> --config problem.toml [--seed N]
//! [--out DIR] [--eps 0.2,0.1]`.
//!
//! Writes `report.json`, `trace.csv` (t, node, coordinates, f, ‖f′‖) and,
//! for modes that run the minimax driver, `history.csv`. Exit codes: 0 when
//! every check passes, 2 for configuration errors, 3 for numerical failures.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{ConfigError, Mode, ProblemConfig};
pub use run::{run, Check, RunOutput, RunReport, TraceRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "linking", version, about = "Linking geometries, minimax levels and localized critical points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Problem file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated ε values; overrides the config list.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Degree along the linking homotopy and an intersection witness.
    LinkVerify,
    /// Inf-max estimate by deform-and-compose.
    Minimax,
    /// Deformation flow with its four property checks.
    Deform,
    /// Almost critical points by Ekeland's principle, over an ε sweep.
    Ekeland,
    /// Third critical point and sphere localization.
    Corollaries,
    /// Summarize an existing report.json in the output directory.
    Report,
}

impl Command {
    fn mode(self) -> Option<Mode> {
        match self {
            Command::LinkVerify => Some(Mode::LinkVerify),
            Command::Minimax => Some(Mode::Minimax),
            Command::Deform => Some(Mode::Deform),
            Command::Ekeland => Some(Mode::Ekeland),
            Command::Corollaries => Some(Mode::Corollaries),
            Command::Report => None,
        }
    }
}

fn write_outputs(dir: &Path, out: &RunOutput) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&out.report).map_err(std::io::Error::other)?;
    fs::write(dir.join("report.json"), json + "\n")?;

    let n = out.trace.first().map_or(0, |r| r.coords.len());
    let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
    let mut header = vec!["t".to_string(), "node".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend(["f".to_string(), "grad_norm".to_string()]);
    w.write_record(&header)?;
    for r in &out.trace {
        let mut rec = vec![r.t.to_string(), r.node.to_string()];
        rec.extend(r.coords.iter().map(f64::to_string));
        rec.extend([r.f.to_string(), r.grad_norm.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;

    if !out.history.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("history.csv"))?;
        w.write_record(["iteration", "sup"])?;
        for (k, v) in &out.history {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn print_checks(checks: &[(String, bool, String)]) {
    let mut stdout = std::io::stdout().lock();
    for (name, pass, detail) in checks {
        let _ = writeln!(stdout, "{} {name}: {detail}", if *pass { "PASS" } else { "FAIL" });
    }
}

fn summarize(dir: &Path) -> i32 {
    let path = dir.join("report.json");
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let v: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {} is not a run report: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let checks: Vec<(String, bool, String)> = v["checks"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|c| {
                    (
                        c["name"].as_str().unwrap_or("?").to_string(),
                        c["pass"].as_bool().unwrap_or(false),
                        c["detail"].as_str().unwrap_or("").to_string(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    println!("mode {}", v["mode"].as_str().unwrap_or("?"));
    print_checks(&checks);
    if let Some(e) = v["error"].as_str() {
        println!("error {e}");
    }
    if v["all_pass"].as_bool() == Some(true) {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

/// Parses `args` (program name first), runs and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let Some(mode) = cli.command.mode() else {
        return summarize(cli.out.as_deref().unwrap_or(Path::new("out")));
    };
    let Some(path) = &cli.config else {
        eprintln!("error: --config <path> is required for {}", mode.as_str());
        return EXIT_CONFIG;
    };
    let mut cfg = match ProblemConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(eps) = cli.eps {
        cfg.eps = eps;
        if let Err(e) = cfg.validate() {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    }
    if cfg.mode.is_some_and(|m| m != mode) {
        eprintln!("note: config mode {} overridden by the {} subcommand", cfg.mode.unwrap().as_str(), mode.as_str());
    }
    cfg.mode = Some(mode);
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(cfg.out.as_deref().unwrap_or("out")));

    let started = std::time::Instant::now();
    let out = run(&cfg, mode);
    if let Err(e) = write_outputs(&dir, &out) {
        eprintln!("error: writing {}: {e}", dir.display());
        return EXIT_NUMERICAL;
    }
    let checks: Vec<_> = out.report.checks.iter().map(|c| (c.name.clone(), c.pass, c.detail.clone())).collect();
    print_checks(&checks);
    if let Some(e) = &out.report.error {
        eprintln!("error: {e}");
    }
    eprintln!("{} finished in {:.2} s; outputs in {}", mode.as_str(), started.elapsed().as_secs_f64(), dir.display());
    if out.report.all_pass {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}
