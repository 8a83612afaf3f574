//! Seeded synthetic dataset generator: images, masks, manifest and a
//! run-ready experiment config. The same seed always produces byte-identical
//! trees, which the determinism checks rely on.

use std::path::PathBuf;
use std::process::ExitCode;

use oodbench_core::error::Error;
use oodbench_core::synthetic::{example_config, generate_dataset, write_config, SyntheticOptions};

const USAGE: &str = "\
usage: gen-dataset --out <dir> [--seed N] [--samples N] [--size WxH]
writes images/, masks/, manifest.json and config.json under <dir>
";

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gen-dataset: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run() -> Result<(), Error> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut out = None;
    let mut seed = 1u64;
    let mut opts = SyntheticOptions::default();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--out" => {
                out =
                    Some(PathBuf::from(it.next().ok_or_else(|| {
                        Error::Config("--out needs a value".into())
                    })?))
            }
            "--seed" => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config("--seed needs a value".into()))?;
                seed = v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad seed \"{v}\"")))?;
            }
            "--samples" => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config("--samples needs a value".into()))?;
                opts.samples = v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad sample count \"{v}\"")))?;
            }
            "--size" => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config("--size needs a value".into()))?;
                let (w, h) = v
                    .split_once('x')
                    .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
                    .ok_or_else(|| Error::Config(format!("bad size \"{v}\", want WxH")))?;
                opts.width = w;
                opts.height = h;
            }
            "--help" | "-h" => {
                print!("{USAGE}");
                return Ok(());
            }
            other => return Err(Error::Config(format!("unknown flag \"{other}\"\n{USAGE}"))),
        }
    }
    let out = out.ok_or_else(|| Error::Config(format!("missing --out <dir>\n{USAGE}")))?;
    let manifest = generate_dataset(&out, seed, &opts, "s")?;
    let config_path = out.join("config.json");
    write_config(&config_path, &example_config("manifest.json", seed))?;
    println!("{}", manifest.display());
    println!("{}", config_path.display());
    Ok(())
}
