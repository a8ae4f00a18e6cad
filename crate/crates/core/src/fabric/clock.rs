use crate::error::{Error, Result};

/// Virtual-time costs. Transfer latency is `latency_base + bytes / bandwidth`;
/// compute phases cost a fixed amount plus per-operation unit costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub latency_base: f64,
    pub bandwidth: f64,
    /// Fraction of a two-sided transfer's latency added when the receiver
    /// is computing while the message is in flight.
    pub progression_penalty: f64,
    /// Halo latency multiplier while particle frames are still in flight.
    pub contention: f64,
    pub one_sided_issue: f64,
    pub two_sided_issue: f64,
    pub interp_fixed: f64,
    pub deposit_fixed: f64,
    pub gather_scalar: f64,
    pub gather_batched: f64,
    pub prep: f64,
    pub push: f64,
    pub write_back: f64,
    pub bin: f64,
    pub index: f64,
    pub reorder: f64,
    pub route: f64,
    pub deposit_scalar: f64,
    pub deposit_batched: f64,
    pub tile_reduce: f64,
    pub scan: f64,
    pub pack: f64,
    pub unpack: f64,
    pub truncate: f64,
    pub field: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            latency_base: 2e-6,
            bandwidth: 1.0e10,
            progression_penalty: 0.2,
            contention: 1.5,
            one_sided_issue: 0.0,
            two_sided_issue: 5e-7,
            interp_fixed: 0.0,
            deposit_fixed: 0.0,
            gather_scalar: 120e-9,
            gather_batched: 15e-9,
            prep: 5e-9,
            push: 10e-9,
            write_back: 5e-9,
            bin: 8e-9,
            index: 20e-9,
            reorder: 15e-9,
            route: 10e-9,
            deposit_scalar: 80e-9,
            deposit_batched: 10e-9,
            tile_reduce: 1e-9,
            scan: 6e-9,
            pack: 20e-9,
            unpack: 20e-9,
            truncate: 2e-9,
            field: 20e-9,
        }
    }
}

macro_rules! cost_fields {
    ($m:ident) => {
        $m!(
            latency_base,
            bandwidth,
            progression_penalty,
            contention,
            one_sided_issue,
            two_sided_issue,
            interp_fixed,
            deposit_fixed,
            gather_scalar,
            gather_batched,
            prep,
            push,
            write_back,
            bin,
            index,
            reorder,
            route,
            deposit_scalar,
            deposit_batched,
            tile_reduce,
            scan,
            pack,
            unpack,
            truncate,
            field
        )
    };
}

impl CostModel {
    pub fn latency(&self, bytes: usize) -> f64 {
        if self.bandwidth.is_infinite() {
            self.latency_base
        } else {
            self.latency_base + bytes as f64 / self.bandwidth
        }
    }

    /// A model in which nothing costs time; tests switch individual costs on.
    pub fn zero() -> Self {
        let mut m = Self::default();
        for (k, _) in Self::default().entries() {
            m.set(k, 0.0).unwrap();
        }
        m.bandwidth = f64::INFINITY;
        m.contention = 1.0;
        m
    }

    pub fn set(&mut self, key: &str, v: f64) -> Result<()> {
        macro_rules! setter {
            ($($f:ident),*) => {
                match key {
                    $(stringify!($f) => self.$f = v,)*
                    other => return Err(Error::config(None, format!("unknown cost key '{other}'"))),
                }
            };
        }
        cost_fields!(setter);
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        macro_rules! list {
            ($($f:ident),*) => { vec![$((stringify!($f), self.$f)),*] };
        }
        cost_fields!(list)
    }
}

/// Per-rank simulated time plus the compute intervals that two-sided
/// progression depends on.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    pub now: f64,
    compute: Vec<(f64, f64)>,
}

impl VirtualClock {
    pub fn at(now: f64) -> Self {
        Self {
            now,
            compute: Vec::new(),
        }
    }

    /// Advances by `dt` and returns the elapsed amount.
    pub fn advance(&mut self, dt: f64) -> f64 {
        self.now += dt;
        dt
    }

    /// Advances through a compute phase that blocks message progression.
    pub fn compute(&mut self, dt: f64) -> f64 {
        let start = self.now;
        self.now += dt;
        if dt > 0.0 {
            self.compute.push((start, self.now));
        }
        dt
    }

    /// Waits until `t`; returns the time spent waiting.
    pub fn wait_until(&mut self, t: f64) -> f64 {
        if t > self.now {
            let w = t - self.now;
            self.now = t;
            w
        } else {
            0.0
        }
    }

    /// Whether `[a, b]` intersects any recorded compute interval.
    pub fn computing_during(&self, a: f64, b: f64) -> bool {
        self.compute.iter().any(|&(s, e)| s < b && a < e)
    }

    pub fn forget_before(&mut self, t: f64) {
        self.compute.retain(|&(_, e)| e > t);
    }
}
