//! `sponge`: build, verify, probe and export stage bundles.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sponge_core::cli::{
    cmd_build, cmd_export, cmd_probe, cmd_verify, read_bundle, write_probe_output, CliError, MeshFormat, Mode, RunConfig,
    Status, SurfaceSpec,
};
use sponge_core::schedule::ScheduleKind;

#[derive(Parser)]
#[command(name = "sponge", version, about = "Stage bundles of branched-cover towers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build stages 0..=max-stage and write a bundle directory.
    Build(BuildArgs),
    /// Recompute every certificate for a bundle; exits 1 if any fails.
    Verify {
        bundle: PathBuf,
        /// Write the JSON-lines report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Probe the bundle's stages with a test surface described by a JSON spec.
    Probe {
        bundle: PathBuf,
        surface: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one stage as an OFF or OBJ triangle mesh.
    Export {
        bundle: PathBuf,
        #[arg(long, default_value_t = 0)]
        stage: u32,
        #[arg(long, default_value = "off")]
        format: String,
        /// Three ambient coordinates to keep, as a,b,c.
        #[arg(long, value_parser = parse_list::<usize, 3>)]
        project: Option<[usize; 3]>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags given on the command line override the config file.
#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_stage: Option<u32>,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleKind>,
    #[arg(long)]
    refine: Option<u32>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    g: Option<u32>,
    #[arg(long)]
    gamma_floor: Option<f64>,
    /// σ = 2^e is searched over e in lo,hi.
    #[arg(long, value_parser = parse_list::<i32, 2>, allow_hyphen_values = true)]
    sigma_exponents: Option<[i32; 2]>,
    #[arg(long)]
    claim_samples: Option<usize>,
    #[arg(long)]
    shsep_samples: Option<usize>,
    #[arg(long)]
    n_cap: Option<u32>,
    #[arg(long)]
    cell_ceiling: Option<usize>,
    #[arg(long)]
    ring_depth: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

impl BuildArgs {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(mode, k, max_stage, refine, g, gamma_floor, claim_samples, shsep_samples, n_cap, cell_ceiling, ring_depth, seed);
        if self.schedule.is_some() {
            cfg.schedule = self.schedule;
        }
        if self.c.is_some() {
            cfg.c = self.c;
        }
        if let Some([lo, hi]) = self.sigma_exponents {
            cfg.sigma_exponents = (lo, hi);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exactly `N` comma-separated values.
fn parse_list<T: std::str::FromStr, const N: usize>(s: &str) -> Result<[T; N], String> {
    let v: Vec<T> = s.split(',').map(|x| x.trim().parse().map_err(|_| format!("bad value {x:?}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated values"))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Build(args) => {
            let cfg = args.config()?;
            let m = cmd_build(&cfg, &args.out)?;
            for s in &m.stages {
                eprintln!("stage {}: {} cells, {} vertices in ℝ^{}", s.j, s.cells, s.vertices, s.ambient_dim);
            }
        }
        Command::Verify { bundle, report } => {
            let r = cmd_verify(&bundle, report.as_deref())?;
            if report.is_none() {
                print!("{}", r.to_jsonl());
            }
            for c in r.certificates.iter().filter(|c| c.status == Status::Fail) {
                eprintln!("FAIL {}: {} (bound {})", c.id, c.measured, c.bound);
            }
            eprintln!(
                "{} pass, {} fail, {} n/a, {} info",
                r.count(Status::Pass),
                r.count(Status::Fail),
                r.count(Status::NotApplicable),
                r.count(Status::Info)
            );
            if r.failed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Probe { bundle, surface, out } => {
            let spec: SurfaceSpec = serde_json::from_str(&std::fs::read_to_string(&surface)?)?;
            let (certs, summary) = cmd_probe(&read_bundle(&bundle)?, &spec)?;
            match out {
                Some(p) => write_probe_output(&p, &certs, &summary)?,
                None => println!("{}", serde_json::to_string(&summary)?),
            }
            eprintln!("{} holes, {} contradictions, {} inconclusive", summary.holes, summary.contradictions, summary.inconclusive);
        }
        Command::Export { bundle, stage, format, project, out } => {
            let format: MeshFormat = format.parse()?;
            emit(out.as_ref(), &cmd_export(&read_bundle(&bundle)?, stage, format, project)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
