//! Drivers shared by the command-line tool and the examples: single runs,
//! ablation sweeps and the verification suite.

use std::io::Write;

use crate::domain::SimulationConfig;
use crate::error::{Error, Result};
use crate::metrics::{init_workload, pps_cpp};
use crate::oracle::{compare_states, OracleState};
use crate::pipeline::{DepositMode, InterpSupply, RunReport, Simulation, VariantMatrix};
use crate::redistribute::CommVariant;

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub variant: VariantMatrix,
    pub ranks: [usize; 3],
    pub n_particles: u64,
    pub steps: usize,
    /// Mean particle-phase time per step.
    pub t_particle: f64,
    pub pps: Option<f64>,
    pub cpp: Option<f64>,
    pub charge_error: f64,
    pub energy_error: f64,
    pub checksum: u64,
}

impl RunSummary {
    pub fn new(config: &SimulationConfig, report: &RunReport) -> Self {
        let steps = report.metrics.len();
        let n = report.metrics.last().map_or(0, |m| m.n_particles);
        let t = if steps == 0 {
            0.0
        } else {
            report.metrics.iter().map(|m| m.t_particle()).sum::<f64>() / steps as f64
        };
        let rate = pps_cpp(t, n as f64, config.frequency_hz).ok();
        Self {
            variant: config.variant,
            ranks: config.ranks,
            n_particles: n,
            steps,
            t_particle: t,
            pps: rate.map(|r| r.0),
            cpp: rate.map(|r| r.1),
            charge_error: report.conservation.max_charge_error(),
            energy_error: report.conservation.max_energy_error(),
            checksum: report.checksum,
        }
    }
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
        write!(
            f,
            "{}  ranks {:?}  particles {}  steps {}  T_particle {:.4e} s  pps {}  cpp {}  charge err {:.2e}  energy err {:.2e}  checksum {:016x}",
            self.variant,
            self.ranks,
            self.n_particles,
            self.steps,
            self.t_particle,
            opt(self.pps),
            opt(self.cpp),
            self.charge_error,
            self.energy_error,
            self.checksum
        )
    }
}

/// Runs `config` once.
pub fn run_once(config: &SimulationConfig) -> Result<(RunReport, RunSummary)> {
    let mut sim = Simulation::new(config.clone())?;
    let report = sim.run()?;
    let summary = RunSummary::new(config, &report);
    Ok((report, summary))
}

/// Runs `base` once per variant, one after the other so timings do not
/// compete for cores.
pub fn ablate(base: &SimulationConfig, variants: &[VariantMatrix]) -> Result<Vec<RunSummary>> {
    variants
        .iter()
        .map(|v| {
            let cfg = SimulationConfig {
                variant: *v,
                ..base.clone()
            };
            run_once(&cfg).map(|r| r.1)
        })
        .collect()
}

/// Cartesian product of the listed modes.
pub fn variant_product(
    interp: &[InterpSupply],
    deposit: &[DepositMode],
    comm: &[CommVariant],
) -> Vec<VariantMatrix> {
    let mut out = Vec::new();
    for &g in interp {
        for &d in deposit {
            for &c in comm {
                out.push(VariantMatrix::new(g, d, c));
            }
        }
    }
    out
}

/// One row per variant; `speedup` is the first row's particle time over
/// this row's and `trend` says whether this row is faster or slower.
pub fn write_ablation_csv<W: Write>(out: W, rows: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "interp",
        "deposit",
        "comm",
        "ranks",
        "n_particles",
        "steps",
        "t_particle",
        "pps",
        "cpp",
        "speedup",
        "trend",
        "checksum",
    ])?;
    let base = rows.first().map(|r| r.t_particle);
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.16e}"));
    for (i, r) in rows.iter().enumerate() {
        let speedup = match base {
            Some(b) if r.t_particle > 0.0 => Some(b / r.t_particle),
            _ => None,
        };
        let trend = match speedup {
            _ if i == 0 => "baseline",
            Some(s) if s > 1.0 => "faster",
            Some(s) if s < 1.0 => "slower",
            Some(_) => "equal",
            None => "undefined",
        };
        w.write_record([
            r.variant.interp.code().to_string(),
            r.variant.deposit.code().to_string(),
            r.variant.comm.code().to_string(),
            format!("{}x{}x{}", r.ranks[0], r.ranks[1], r.ranks[2]),
            r.n_particles.to_string(),
            r.steps.to_string(),
            format!("{:.16e}", r.t_particle),
            opt(r.pps),
            opt(r.cpp),
            opt(speedup),
            trend.to_string(),
            format!("{:016x}", r.checksum),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn check(name: &str, r: Result<String>) -> Check {
    match r {
        Ok(detail) => Check {
            name: name.into(),
            passed: true,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Steps `config` and the oracle side by side and compares the final states.
pub fn oracle_comparison(config: &SimulationConfig, steps: u64, tolerance: f64) -> Result<String> {
    let geom = config.build_geometry()?;
    let particles = init_workload(config, &geom);
    let mut sim = Simulation::from_state(config.clone(), particles.clone(), None)?;
    let mut oracle = OracleState::new(config, particles, None)?;
    for _ in 0..steps {
        sim.step()?;
        oracle.step()?;
    }
    let report = compare_states(
        &geom,
        &sim.particles(),
        &sim.global_fields(),
        &oracle,
        tolerance,
    )?;
    if report.passed() {
        Ok(report.to_string())
    } else {
        Err(Error::Comparison(report.to_string()))
    }
}

/// Layout, id-set and tail contracts after every one of `steps` steps.
pub fn invariant_run(config: &SimulationConfig, steps: u64) -> Result<String> {
    let mut sim = Simulation::new(config.clone())?;
    let n = sim.n_particles() as u64;
    let mut max_tail = 0;
    for _ in 0..steps {
        let before = sim.cell_map()?;
        sim.step()?;
        sim.check_layout()?;
        sim.check_id_set(n)?;
        sim.check_tail_movers(&before)?;
        max_tail = max_tail.max(sim.tail_lengths().into_iter().max().unwrap_or(0));
    }
    Ok(format!(
        "{n} particles, {steps} steps, largest tail {max_tail}"
    ))
}

/// Final-state checksums of every comm variant must agree bitwise.
pub fn comm_equivalence(config: &SimulationConfig, steps: u64) -> Result<String> {
    let mut sums = Vec::new();
    for c in CommVariant::ALL {
        let cfg = SimulationConfig {
            variant: VariantMatrix {
                comm: c,
                ..config.variant
            },
            steps,
            warmup: 0,
            deterministic: true,
            ..config.clone()
        };
        sums.push((c, run_once(&cfg)?.1.checksum));
    }
    if sums.iter().all(|s| s.1 == sums[0].1) {
        Ok(format!("checksum {:016x} for C0..C4", sums[0].1))
    } else {
        Err(Error::Comparison(format!("checksums differ: {sums:?}")))
    }
}

/// Oracle agreement (scalar and configured paths), layout invariants and
/// comm-variant equivalence for `config`.
pub fn verify(config: &SimulationConfig) -> Vec<Check> {
    let scalar = SimulationConfig {
        variant: VariantMatrix::new(
            InterpSupply::UnsortedScalar,
            DepositMode::ScalarAtomic,
            CommVariant::C0,
        ),
        ranks: [1; 3],
        ..config.clone()
    };
    vec![
        check(
            "oracle, scalar path, 1 rank, 10 steps",
            oracle_comparison(&scalar, 10, 1e-12),
        ),
        check(
            &format!("oracle, {}, 10 steps", config.variant),
            oracle_comparison(config, 10, 1e-12),
        ),
        check(
            &format!("layout invariants, {}, 20 steps", config.variant),
            invariant_run(config, 20),
        ),
        check(
            "comm variants bitwise, 20 steps",
            comm_equivalence(config, 20),
        ),
    ]
}
