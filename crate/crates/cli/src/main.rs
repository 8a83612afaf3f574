//! `oodbench`: run seeded OoD detection experiments from JSON configs and
//! emit reports, CSV summaries and SVG plots.
//!
//! Exit codes are stable API: 0 success, 1 user/data/config error,
//! 2 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use oodbench_core::adapters::DatasetManifest;
use oodbench_core::augment::AugmentationKind;
use oodbench_core::error::{Error, Result};
use oodbench_core::methods::method_registry;
use oodbench_core::metrics::metric_registry;
use oodbench_core::plot::plot_report;
use oodbench_core::runner::{run_experiment, ExperimentConfig, ExperimentReport};

const USAGE: &str = "\
usage:
  oodbench run --config <path> --out <dir> [--seed N] [--limit N] [--plot]
  oodbench list <methods|augmentations|metrics>
  oodbench inspect <manifest.json>
  oodbench plot <report.json> --out <dir>

environment:
  OODBENCH_THREADS   caps worker parallelism (default: available cores)
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oodbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(args: &[String]) -> Result<()> {
    match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("list") => cmd_list(&args[1..]),
        Some("inspect") => cmd_inspect(&args[1..]),
        Some("plot") => cmd_plot(&args[1..]),
        Some("help") | Some("--help") | Some("-h") => {
            print!("{USAGE}");
            Ok(())
        }
        Some(other) => Err(Error::Config(format!(
            "unknown command \"{other}\"\n{USAGE}"
        ))),
        None => Err(Error::Config(format!("no command given\n{USAGE}"))),
    }
}

struct RunArgs {
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    limit: Option<usize>,
    plot: bool,
}

fn parse_run_args(args: &[String]) -> Result<RunArgs> {
    let mut config = None;
    let mut out = None;
    let mut seed = None;
    let mut limit = None;
    let mut plot = false;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--config" => config = Some(PathBuf::from(required(&mut it, "--config")?)),
            "--out" => out = Some(PathBuf::from(required(&mut it, "--out")?)),
            "--seed" => {
                let v = required(&mut it, "--seed")?;
                seed = Some(v.parse().map_err(|_| {
                    Error::Config(format!("--seed needs an unsigned integer, got \"{v}\""))
                })?);
            }
            "--limit" => {
                let v = required(&mut it, "--limit")?;
                limit = Some(v.parse().map_err(|_| {
                    Error::Config(format!("--limit needs an unsigned integer, got \"{v}\""))
                })?);
            }
            "--plot" => plot = true,
            other => return Err(Error::Config(format!("unknown flag \"{other}\"\n{USAGE}"))),
        }
    }
    Ok(RunArgs {
        config: config.ok_or_else(|| Error::Config("run needs --config <path>".into()))?,
        out: out.ok_or_else(|| Error::Config("run needs --out <dir>".into()))?,
        seed,
        limit,
        plot,
    })
}

fn required<'a>(it: &mut std::slice::Iter<'a, String>, flag: &str) -> Result<&'a String> {
    it.next()
        .ok_or_else(|| Error::Config(format!("{flag} needs a value")))
}

fn cmd_run(args: &[String]) -> Result<()> {
    let run = parse_run_args(args)?;
    let mut config = ExperimentConfig::load(&run.config)?;
    // Overrides are applied before hashing, so they show up in the report's
    // config echo and its content hash.
    if let Some(seed) = run.seed {
        config.seed = seed;
    }
    if let Some(limit) = run.limit {
        config.limit = Some(limit);
    }
    let root = run.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let report = run_experiment(&config, &root, Some(&run.out))?;
    report.write_files(&run.out)?;
    if run.plot {
        plot_report(&report, &run.out)?;
    }
    print_summary(&report);
    Ok(())
}

fn print_summary(report: &ExperimentReport) {
    println!(
        "{} samples, seed {}, config {}",
        report.runtime.samples, report.config.seed, report.config_hash
    );
    for method_cfg in &report.config.methods {
        let Some(method) = report.methods.get(&method_cfg.name) else {
            continue;
        };
        if let Some(reason) = &method.skipped {
            println!("  {:<12} skipped: {reason}", method_cfg.name);
            continue;
        }
        let mut parts = Vec::new();
        for (metric, bins) in &method.metrics {
            if let Some(cell) = bins.get("all") {
                match cell.value {
                    Some(v) => parts.push(format!("{metric}={v:.4}")),
                    None => parts.push(format!("{metric}=n/a")),
                }
            }
        }
        println!("  {:<12} {}", method_cfg.name, parts.join("  "));
    }
}

fn cmd_list(args: &[String]) -> Result<()> {
    let [kind] = args else {
        return Err(Error::Config(
            "list needs exactly one of: methods, augmentations, metrics".into(),
        ));
    };
    let names: &[&str] = match kind.as_str() {
        "methods" => method_registry(),
        "augmentations" => AugmentationKind::registry(),
        "metrics" => metric_registry(),
        other => {
            return Err(Error::Config(format!(
                "unknown list kind \"{other}\" (want methods, augmentations or metrics)"
            )))
        }
    };
    for name in names {
        println!("{name}");
    }
    Ok(())
}

fn cmd_inspect(args: &[String]) -> Result<()> {
    let [path] = args else {
        return Err(Error::Config(
            "inspect needs exactly one manifest path".into(),
        ));
    };
    let path = PathBuf::from(path);
    let manifest = DatasetManifest::load(&path)?;
    let root = path.parent().unwrap_or(Path::new("."));
    let with_masks = manifest
        .entries
        .iter()
        .filter(|e| e.seg_mask.is_some())
        .count();
    let with_labels = manifest
        .entries
        .iter()
        .filter(|e| e.label.is_some())
        .count();
    println!("entries:     {}", manifest.entries.len());
    println!("classes:     {}", manifest.class_count);
    println!("seg_masks:   {with_masks}");
    println!("labels:      {with_labels}");
    let mut missing = 0;
    for entry in &manifest.entries {
        if !root.join(&entry.image).exists() {
            missing += 1;
            eprintln!("missing image for entry \"{}\": {}", entry.id, entry.image);
        }
    }
    if missing > 0 {
        return Err(Error::Data(format!("{missing} image file(s) missing")));
    }
    println!("all image files present");
    Ok(())
}

fn cmd_plot(args: &[String]) -> Result<()> {
    let (report_path, out) = match args {
        [report, flag, out] if flag == "--out" => (PathBuf::from(report), PathBuf::from(out)),
        _ => {
            return Err(Error::Config(
                "plot needs: <report.json> --out <dir>".into(),
            ))
        }
    };
    let report = ExperimentReport::load(&report_path)?;
    let written = plot_report(&report, &out)?;
    for path in &written {
        println!("{}", path.display());
    }
    Ok(())
}
