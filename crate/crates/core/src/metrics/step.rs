use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Timings and counters of one step. Times are seconds, virtual or wall.
///
/// `t_prep + t_sort + t_kernel + t_reduce` is the particle compute time
/// (`t_interpolation + t_deposit`) and `t_pack + t_issue + t_wait +
/// t_post_process` is `t_redistribute`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub t_interpolation: f64,
    pub t_deposit: f64,
    pub t_redistribute: f64,
    pub t_prep: f64,
    pub t_sort: f64,
    pub t_kernel: f64,
    pub t_reduce: f64,
    pub t_pack: f64,
    pub t_issue: f64,
    pub t_wait: f64,
    pub t_post_process: f64,
    pub t_field: f64,
    pub n_particles: u64,
    pub migrants_local: u64,
    pub migrants_remote: u64,
    pub flops_interp: u64,
    pub flops_deposit: u64,
}

/// Per-particle floating-point work counted for the gather and the deposit.
pub const FLOPS_INTERP: u64 = 1636;
pub const FLOPS_DEPOSIT: u64 = 419;

const TIME_FIELDS: [&str; 13] = [
    "t_interpolation",
    "t_deposit",
    "t_redistribute",
    "t_prep",
    "t_sort",
    "t_kernel",
    "t_reduce",
    "t_pack",
    "t_issue",
    "t_wait",
    "t_post_process",
    "t_field",
    "t_particle",
];
const COUNT_FIELDS: [&str; 5] = [
    "n_particles",
    "migrants_local",
    "migrants_remote",
    "flops_interp",
    "flops_deposit",
];

impl StepMetrics {
    /// Particle-phase time: interpolation + deposition + redistribution.
    pub fn t_particle(&self) -> f64 {
        self.t_interpolation + self.t_deposit + self.t_redistribute
    }

    fn times(&self) -> [f64; 12] {
        [
            self.t_interpolation,
            self.t_deposit,
            self.t_redistribute,
            self.t_prep,
            self.t_sort,
            self.t_kernel,
            self.t_reduce,
            self.t_pack,
            self.t_issue,
            self.t_wait,
            self.t_post_process,
            self.t_field,
        ]
    }

    fn times_mut(&mut self) -> [&mut f64; 12] {
        [
            &mut self.t_interpolation,
            &mut self.t_deposit,
            &mut self.t_redistribute,
            &mut self.t_prep,
            &mut self.t_sort,
            &mut self.t_kernel,
            &mut self.t_reduce,
            &mut self.t_pack,
            &mut self.t_issue,
            &mut self.t_wait,
            &mut self.t_post_process,
            &mut self.t_field,
        ]
    }

    fn counts(&self) -> [u64; 5] {
        [
            self.n_particles,
            self.migrants_local,
            self.migrants_remote,
            self.flops_interp,
            self.flops_deposit,
        ]
    }

    /// Combines per-rank metrics: the timings of the rank with the longest
    /// particle phase (the critical path), counters summed.
    pub fn merge_ranks(ranks: &[StepMetrics]) -> StepMetrics {
        let Some(slow) = ranks
            .iter()
            .max_by(|a, b| a.t_particle().total_cmp(&b.t_particle()))
        else {
            return StepMetrics::default();
        };
        let mut out = *slow;
        out.t_field = ranks.iter().map(|m| m.t_field).fold(0.0, f64::max);
        out.n_particles = ranks.iter().map(|m| m.n_particles).sum();
        out.migrants_local = ranks.iter().map(|m| m.migrants_local).sum();
        out.migrants_remote = ranks.iter().map(|m| m.migrants_remote).sum();
        out.flops_interp = ranks.iter().map(|m| m.flops_interp).sum();
        out.flops_deposit = ranks.iter().map(|m| m.flops_deposit).sum();
        out
    }

    /// Checks that sub-buckets add up to their parents within `eps`
    /// (relative to the parent) and that nothing is negative.
    pub fn check_buckets(&self, eps: f64) -> Result<()> {
        if self.times().iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::UndefinedMetric(format!(
                "negative or NaN timing in {self:?}"
            )));
        }
        let compute = self.t_interpolation + self.t_deposit;
        let sub = self.t_prep + self.t_sort + self.t_kernel + self.t_reduce;
        let comm = self.t_pack + self.t_issue + self.t_wait + self.t_post_process;
        let close = |a: f64, b: f64| (a - b).abs() <= eps * a.abs().max(b.abs()).max(1e-300);
        if !close(compute, sub) {
            return Err(Error::UndefinedMetric(format!(
                "compute sub-buckets {sub} do not add up to {compute}"
            )));
        }
        if !close(self.t_redistribute, comm) {
            return Err(Error::UndefinedMetric(format!(
                "redistribution sub-buckets {comm} do not add up to {}",
                self.t_redistribute
            )));
        }
        Ok(())
    }
}

/// Particles per second and cycles per particle at `frequency_hz`.
pub fn pps_cpp(t_steps: f64, n_total: f64, frequency_hz: f64) -> Result<(f64, f64)> {
    if !(t_steps > 0.0) || !(n_total > 0.0) {
        return Err(Error::UndefinedMetric(format!(
            "throughput needs positive time and particle count (T = {t_steps}, n = {n_total})"
        )));
    }
    let pps = n_total / t_steps;
    Ok((pps, frequency_hz / pps))
}

/// `1 - (issue + wait)_overlapped / (issue + wait)_baseline`.
pub fn overlap_ratio(baseline: (f64, f64), overlapped: (f64, f64)) -> Result<f64> {
    let b = baseline.0 + baseline.1;
    if !(b > 0.0) {
        return Err(Error::UndefinedMetric(
            "overlap ratio with zero baseline exposure".into(),
        ));
    }
    Ok(1.0 - (overlapped.0 + overlapped.1) / b)
}

/// Achieved fraction of `p_theoretical` FLOP/s, in percent.
pub fn peak_efficiency(n: f64, t_steps: f64, p_theoretical: f64) -> f64 {
    100.0 * n * (FLOPS_INTERP + FLOPS_DEPOSIT) as f64 / (t_steps * p_theoretical)
}

/// Weighted cells-plus-particles throughput per node.
pub fn fom_node(
    n_cells: f64,
    n_particles: f64,
    t_steps: f64,
    n_nodes: f64,
    alpha: f64,
    beta: f64,
) -> f64 {
    (alpha * n_cells + beta * n_particles) / (t_steps * n_nodes)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with one row per measured step plus `mean` and `max` summary rows.
pub fn write_csv<W: Write>(out: W, rows: &[StepMetrics], frequency_hz: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step"];
    header.extend(TIME_FIELDS);
    header.extend(COUNT_FIELDS);
    header.extend(["pps", "cpp"]);
    w.write_record(&header)?;
    let derived =
        |m: &StepMetrics| match pps_cpp(m.t_particle(), m.n_particles as f64, frequency_hz) {
            Ok((p, c)) => (fmt_f64(p), fmt_f64(c)),
            Err(_) => (String::new(), String::new()),
        };
    for m in rows {
        let mut rec = vec![m.step.to_string()];
        rec.extend(m.times().iter().map(|t| fmt_f64(*t)));
        rec.push(fmt_f64(m.t_particle()));
        rec.extend(m.counts().iter().map(|c| c.to_string()));
        let (p, c) = derived(m);
        rec.extend([p, c]);
        w.write_record(&rec)?;
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        for (label, agg) in [("mean", 0), ("max", 1)] {
            let mut rec = vec![label.to_string()];
            let mut times: Vec<f64> = (0..12)
                .map(|i| {
                    let it = rows.iter().map(|m| m.times()[i]);
                    if agg == 0 {
                        it.sum::<f64>() / n
                    } else {
                        it.fold(0.0, f64::max)
                    }
                })
                .collect();
            let tp = rows.iter().map(|m| m.t_particle());
            times.push(if agg == 0 {
                tp.sum::<f64>() / n
            } else {
                tp.fold(0.0, f64::max)
            });
            rec.extend(times.iter().map(|t| fmt_f64(*t)));
            for i in 0..5 {
                let it = rows.iter().map(|m| m.counts()[i] as f64);
                let v = if agg == 0 {
                    it.sum::<f64>() / n
                } else {
                    it.fold(0.0, f64::max)
                };
                rec.push(fmt_f64(v));
            }
            let n_mean = rows.iter().map(|m| m.n_particles as f64).sum::<f64>() / n;
            match pps_cpp(times[12], n_mean, frequency_hz) {
                Ok((p, c)) => rec.extend([fmt_f64(p), fmt_f64(c)]),
                Err(_) => rec.extend([String::new(), String::new()]),
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the per-step rows of a metrics CSV, skipping summary rows.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<StepMetrics>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let Ok(step) = rec[0].parse::<u64>() else {
            continue;
        };
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::UndefinedMetric(format!("column {i}: {e}")))
        };
        let int = |i: usize| -> Result<u64> {
            rec[i]
                .parse::<u64>()
                .map_err(|e| Error::UndefinedMetric(format!("column {i}: {e}")))
        };
        let mut m = StepMetrics {
            step,
            ..Default::default()
        };
        for (i, t) in m.times_mut().into_iter().enumerate() {
            *t = num(1 + i)?;
        }
        m.n_particles = int(14)?;
        m.migrants_local = int(15)?;
        m.migrants_remote = int(16)?;
        m.flops_interp = int(17)?;
        m.flops_deposit = int(18)?;
        out.push(m);
    }
    Ok(out)
}
