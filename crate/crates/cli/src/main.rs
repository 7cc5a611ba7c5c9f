#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod manifest;

use std::path::Path;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use commands::Ctx;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io { path: String, msg: String },
    Core(rssi_doa::Error),
    Failed(String),
}

impl From<rssi_doa::Error> for CliError {
    fn from(e: rssi_doa::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// One line, `error: kind=<kind> [key=value ...] msg="<text>"`.
pub fn error_line(e: &CliError, sensor: Option<&str>) -> String {
    use rssi_doa::Error as E;
    let mut fields: Vec<(&str, String)> = Vec::new();
    let (kind, msg) = match e {
        CliError::Usage(m) => ("usage", m.clone()),
        CliError::Failed(m) => ("runtime", m.clone()),
        CliError::Io { path, msg } => {
            fields.push(("path", format!("{path:?}")));
            ("io", msg.clone())
        }
        CliError::Core(err) => {
            let kind = match err {
                E::Parse { path, line, msg } => {
                    fields.push(("path", format!("{path:?}")));
                    fields.push(("line", line.to_string()));
                    return finish("parse", &fields, sensor, msg);
                }
                E::NonFinite(_) => "non_finite",
                E::InvalidParameter(_) => "invalid_parameter",
                E::ConjugateSymmetry { .. } => "conjugate_symmetry",
                E::RankDeficient { .. } => "rank_deficient",
                E::MalformedObservation { .. } => "malformed_observation",
                E::NoInformation => "no_information",
                E::NormalizerUnderflow { .. } => "normalizer_underflow",
                E::Io(_) => "io",
                E::Csv(_) => "csv",
            };
            (kind, err.to_string())
        }
    };
    finish(kind, &fields, sensor, &msg)
}

fn finish(kind: &str, fields: &[(&str, String)], sensor: Option<&str>, msg: &str) -> String {
    let mut line = format!("error: kind={kind}");
    if let Some(s) = sensor {
        line.push_str(&format!(" sensor={s:?}"));
    }
    for (k, v) in fields {
        line.push_str(&format!(" {k}={v}"));
    }
    line.push_str(&format!(" msg={msg:?}"));
    line
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn parse() -> Result<(Cli, bool), CliError> {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprint!("{text}");
            return Err(CliError::Usage(first));
        }
    };
    let out_dir_given = matches.value_source("out_dir") == Some(ValueSource::CommandLine);
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((cli, out_dir_given))
}

fn run() -> Result<(), CliError> {
    let (mut cli, out_dir_given) = parse()?;
    init_logging(cli.verbose);
    if let Some(path) = cli.manifest.clone() {
        if cli.command.is_some() {
            return Err(CliError::Usage("--manifest replaces the subcommand; give one or the other".into()));
        }
        let m = manifest::load(&path)?;
        let out_dir = cli.out_dir.clone();
        let threads = cli.threads;
        let verbose = cli.verbose;
        cli = m.config;
        cli.verbose = verbose;
        if out_dir_given {
            cli.out_dir = out_dir;
            cli.threads = threads;
        }
    }
    let Some(command) = cli.command.clone() else {
        return Err(CliError::Usage("a subcommand is required (see --help)".into()));
    };
    commands::validate_globals(&cli)?;
    cli.absolutize();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::Io { path: cli.out_dir.display().to_string(), msg: e.to_string() })?;
    let out_dir = cli.out_dir.clone();
    let mut ctx = Ctx { cli: &cli, out_dir: &out_dir, outputs: Default::default() };
    match &command {
        Command::Simulate(a) => commands::simulate(&mut ctx, a),
        Command::FitPattern(a) => commands::fit_pattern(&mut ctx, a),
        Command::Estimate(a) => commands::estimate(&mut ctx, a),
        Command::Track(a) => commands::track(&mut ctx, a),
        Command::SweepThreshold(a) => commands::sweep_threshold(&mut ctx, a),
        Command::SynthWalk(a) => commands::synth_walk(&mut ctx, a),
    }?;
    let outputs = ctx.outputs;
    manifest::write(&cli, command.name(), Path::new(&out_dir), &outputs)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e, None));
            ExitCode::from(e.exit_code())
        }
    }
}
