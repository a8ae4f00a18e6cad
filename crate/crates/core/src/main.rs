use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use tilepic::domain::SimulationConfig;
use tilepic::harness;
use tilepic::metrics::write_csv;
use tilepic::pipeline::{DepositMode, InterpSupply};
use tilepic::redistribute::CommVariant;
use tilepic::Result;

#[derive(Parser)]
#[command(
    name = "tilepic",
    version,
    about = "Tile-sorted particle-in-cell runs, ablations and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write per-step timings.
    Run(Common),
    /// Sweep interpolation, deposit and comm modes; comma lists or `all`.
    Ablate(Common),
    /// Oracle agreement, layout invariants and comm equivalence.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` file applied over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interpolation supply, G0 or G2..G7.
    #[arg(long)]
    interp: Option<String>,
    /// Deposit mode, D0..D3.
    #[arg(long)]
    deposit: Option<String>,
    /// Comm variant, C0..C4.
    #[arg(long)]
    comm: Option<String>,
    /// Rank grid, e.g. `2,2,1`.
    #[arg(long)]
    ranks: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    deterministic: Option<bool>,
    #[arg(long)]
    virtual_time: Option<bool>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<SimulationConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimulationConfig::from_file(p)?,
            None => SimulationConfig::default(),
        };
        if let Some(r) = &self.ranks {
            cfg.set("ranks", r)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.deterministic {
            cfg.deterministic = d;
        }
        if let Some(v) = self.virtual_time {
            cfg.virtual_time = v;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| tilepic::Error::Config {
                axis: None,
                msg: format!("expected KEY=VALUE, got '{kv}'"),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    fn single(&self, cfg: &mut SimulationConfig) -> Result<()> {
        if let Some(g) = &self.interp {
            cfg.variant.interp = g.parse()?;
        }
        if let Some(d) = &self.deposit {
            cfg.variant.deposit = d.parse()?;
        }
        if let Some(c) = &self.comm {
            cfg.variant.comm = c.parse()?;
        }
        cfg.validate()?;
        Ok(())
    }

    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn list<T: FromStr<Err = tilepic::Error> + Copy>(
    arg: &Option<String>,
    all: &[T],
    current: T,
) -> Result<Vec<T>> {
    match arg.as_deref().map(str::trim) {
        None => Ok(vec![current]),
        Some(s) if s.eq_ignore_ascii_case("all") => Ok(all.to_vec()),
        Some(s) => s.split(',').map(str::parse).collect(),
    }
}

fn run(args: &Common) -> Result<bool> {
    let mut cfg = args.config()?;
    args.single(&mut cfg)?;
    let (report, summary) = harness::run_once(&cfg)?;
    write_csv(args.output()?, &report.metrics, cfg.frequency_hz)?;
    eprintln!("{summary}");
    eprint!("{}", report.conservation.to_text());
    Ok(true)
}

fn ablate(args: &Common) -> Result<bool> {
    let cfg = args.config()?;
    cfg.validate()?;
    let variants = harness::variant_product(
        &list(&args.interp, &InterpSupply::ALL, cfg.variant.interp)?,
        &list(&args.deposit, &DepositMode::ALL, cfg.variant.deposit)?,
        &list(&args.comm, &CommVariant::ALL, cfg.variant.comm)?,
    );
    let mut rows = Vec::with_capacity(variants.len());
    for v in &variants {
        let cfg = SimulationConfig {
            variant: *v,
            ..cfg.clone()
        };
        let row = harness::run_once(&cfg)?.1;
        eprintln!("{row}");
        rows.push(row);
    }
    harness::write_ablation_csv(args.output()?, &rows)?;
    Ok(true)
}

fn verify(args: &Common) -> Result<bool> {
    let mut cfg = args.config()?;
    args.single(&mut cfg)?;
    let checks = harness::verify(&cfg);
    let mut out = args.output()?;
    for c in &checks {
        writeln!(out, "{c}")?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Ablate(a) => ablate(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
