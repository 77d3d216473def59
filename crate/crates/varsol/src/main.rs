//! Command-line front end: `varsol <config> [--task T] [--set k=v]...
//! [--out DIR] [--svg] [--seed N]`.

use std::path::PathBuf;
use std::process::ExitCode;

use varsol::config::{self, resolve_override_key};
use varsol::runner;

const USAGE: &str = "\
usage: varsol <config-path> [options]

options:
  --task <name>      override the task (derive-ode | fels-check | solve-regular |
                     solve-embedded | scan-residual | action-eval)
  --set <key=value>  override a config value; keys may be dotted (params.d1=2)
                     or bare (d1=2, preset=example2, seed=3)
  --out <dir>        override the output directory
  --svg              also write SVG plots
  --seed <n>         override the random seed
  --help             print this help

exit codes: 0 success, 1 usage/config error, 2 numerical failure,
3 internal invariant violation.";

struct CliArgs {
    config_path: PathBuf,
    overrides: Vec<(String, String, String)>,
}

fn parse_args(args: &[String]) -> Result<CliArgs, String> {
    let mut config_path: Option<PathBuf> = None;
    let mut overrides = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--help" | "-h" => return Err(String::new()),
            "--task" => {
                let value = it.next().ok_or("--task needs a value")?;
                overrides.push(("task".into(), "name".into(), format!("\"{value}\"")));
            }
            "--out" => {
                let value = it.next().ok_or("--out needs a value")?;
                overrides.push(("output".into(), "dir".into(), format!("\"{value}\"")));
            }
            "--svg" => overrides.push(("output".into(), "svg".into(), "true".into())),
            "--seed" => {
                let value = it.next().ok_or("--seed needs a value")?;
                overrides.push(("task".into(), "seed".into(), value.clone()));
            }
            "--set" => {
                let pair = it.next().ok_or("--set needs key=value")?;
                let (key, value) = pair
                    .split_once('=')
                    .ok_or_else(|| format!("--set expects key=value, got `{pair}`"))?;
                let (section, key) = resolve_override_key(key.trim());
                overrides.push((section, key, value.trim().to_string()));
            }
            other if other.starts_with('-') => {
                return Err(format!("unknown option `{other}`"));
            }
            other => {
                if config_path.is_some() {
                    return Err(format!("unexpected extra argument `{other}`"));
                }
                config_path = Some(PathBuf::from(other));
            }
        }
    }
    let config_path = config_path.ok_or("missing config path")?;
    Ok(CliArgs { config_path, overrides })
}

fn string_keys() -> &'static [(&'static str, &'static str)] {
    &[
        ("family", "preset"),
        ("family", "c1"),
        ("family", "c2"),
        ("family", "c3"),
        ("family", "c5"),
        ("task", "name"),
        ("task", "scan_mode"),
        ("task", "axis_param"),
        ("task", "a_starts"),
        ("task", "s_starts"),
        ("output", "dir"),
        ("output", "csv"),
    ]
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse_args(&args) {
        Ok(cli) => cli,
        Err(msg) => {
            if msg.is_empty() {
                println!("{USAGE}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {msg}\n\n{USAGE}");
            return ExitCode::from(1);
        }
    };

    let text = match std::fs::read_to_string(&cli.config_path) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("error: cannot read {}: {err}", cli.config_path.display());
            return ExitCode::from(1);
        }
    };
    let mut raw = match config::parse_raw(&text) {
        Ok(raw) => raw,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(1);
        }
    };
    for (section, key, value) in &cli.overrides {
        // bare string values for known string keys get quoted implicitly
        let needs_quotes = string_keys().contains(&(section.as_str(), key.as_str()))
            && !value.starts_with('"');
        let text = if needs_quotes { format!("\"{value}\"") } else { value.clone() };
        raw.set(section, key, &text);
    }
    let hash = runner::config_hash(&raw.canonical_text());
    let config = match config::validate(&raw) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(1);
        }
    };

    match runner::run(&config, hash) {
        Ok(artifacts) => {
            println!("wrote {}", artifacts.csv.display());
            for path in &artifacts.extra {
                println!("wrote {}", path.display());
            }
            println!("wrote {}", artifacts.manifest.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
