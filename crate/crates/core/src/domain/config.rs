use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use super::{consts, Decomposition, GridGeometry, Species};
use crate::error::{Error, Result};
use crate::fabric::CostModel;
use crate::pipeline::VariantMatrix;
use crate::shape::ShapeOrder;

/// Initial particle distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workload {
    /// `ppc` particles in every cell.
    Uniform,
    /// Particles only in the central third along x, drifting with `drift`.
    Slab,
}

impl FromStr for Workload {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "slab" => Ok(Self::Slab),
            other => Err(Error::config(None, format!("unknown workload '{other}'"))),
        }
    }
}

impl Display for Workload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Slab => "slab",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_cell: [usize; 3],
    pub prob_lo: [f64; 3],
    pub prob_hi: [f64; 3],
    pub periodic: [bool; 3],
    pub guard: usize,
    pub tile_shape: [usize; 3],
    pub shape_order: u8,
    pub workload: Workload,
    pub ppc: usize,
    pub u_th: f64,
    pub drift: [f64; 3],
    pub q: f64,
    pub m: f64,
    pub density: f64,
    pub dt_safety: f64,
    pub steps: u64,
    pub warmup: u64,
    pub seed: u64,
    pub ranks: [usize; 3],
    pub variant: VariantMatrix,
    pub deterministic: bool,
    pub virtual_time: bool,
    pub disorder_fraction: f64,
    /// Step after which momenta are zeroed and the push is skipped.
    pub freeze_after: Option<u64>,
    pub frequency_hz: f64,
    pub cost: CostModel,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let e = Species::electron();
        Self {
            n_cell: [32; 3],
            prob_lo: [-2e-5; 3],
            prob_hi: [2e-5; 3],
            periodic: [true; 3],
            guard: GridGeometry::required_guard(ShapeOrder::Cubic),
            tile_shape: super::DEFAULT_TILE,
            shape_order: 3,
            workload: Workload::Uniform,
            ppc: 8,
            u_th: 0.01,
            drift: [0.0; 3],
            q: e.q,
            m: e.m,
            density: 1e25,
            dt_safety: 0.7,
            steps: 100,
            warmup: 5,
            seed: 1,
            ranks: [1; 3],
            variant: VariantMatrix::default(),
            deterministic: true,
            virtual_time: true,
            disorder_fraction: 0.25,
            freeze_after: None,
            frequency_hz: 1.3e9,
            cost: CostModel::default(),
        }
    }
}

fn parse_scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(None, format!("bad value '{v}' for {key}")))
}

/// One value broadcasts to all axes; otherwise exactly three comma-separated values.
fn parse_triple<T: FromStr + Copy>(key: &str, v: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = v.split(',').collect();
    match parts.len() {
        1 => Ok([parse_scalar(key, parts[0])?; 3]),
        3 => Ok([
            parse_scalar(key, parts[0])?,
            parse_scalar(key, parts[1])?,
            parse_scalar(key, parts[2])?,
        ]),
        _ => Err(Error::config(None, format!("{key} needs 1 or 3 values"))),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::config(None, format!("bad boolean '{v}' for {key}"))),
    }
}

impl SimulationConfig {
    /// Parses `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(None, format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "n_cell" => self.n_cell = parse_triple(key, v)?,
            "prob_lo" => self.prob_lo = parse_triple(key, v)?,
            "prob_hi" => self.prob_hi = parse_triple(key, v)?,
            "periodic" => {
                let p: [&str; 3] = match v.split(',').collect::<Vec<_>>()[..] {
                    [a] => [a; 3],
                    [a, b, c] => [a, b, c],
                    _ => return Err(Error::config(None, "periodic needs 1 or 3 values")),
                };
                self.periodic = [
                    parse_bool(key, p[0])?,
                    parse_bool(key, p[1])?,
                    parse_bool(key, p[2])?,
                ];
            }
            "guard" => self.guard = parse_scalar(key, v)?,
            "tile_shape" => self.tile_shape = parse_triple(key, v)?,
            "shape_order" => self.shape_order = parse_scalar(key, v)?,
            "workload" => self.workload = v.parse()?,
            "ppc" => self.ppc = parse_scalar(key, v)?,
            "u_th" => self.u_th = parse_scalar(key, v)?,
            "drift" => self.drift = parse_triple(key, v)?,
            "q" => self.q = parse_scalar(key, v)?,
            "m" => self.m = parse_scalar(key, v)?,
            "density" => self.density = parse_scalar(key, v)?,
            "dt_safety" => self.dt_safety = parse_scalar(key, v)?,
            "steps" => self.steps = parse_scalar(key, v)?,
            "warmup" => self.warmup = parse_scalar(key, v)?,
            "seed" => self.seed = parse_scalar(key, v)?,
            "ranks" => self.ranks = parse_triple(key, v)?,
            "variant" => self.variant = v.parse()?,
            "deterministic" => self.deterministic = parse_bool(key, v)?,
            "virtual_time" => self.virtual_time = parse_bool(key, v)?,
            "disorder_fraction" => self.disorder_fraction = parse_scalar(key, v)?,
            "freeze_after" => {
                self.freeze_after = match v.trim() {
                    "" | "none" => None,
                    s => Some(parse_scalar(key, s)?),
                }
            }
            "frequency_hz" => self.frequency_hz = parse_scalar(key, v)?,
            k if k.starts_with("cost.") => self.cost.set(&k[5..], parse_scalar(key, v)?)?,
            other => return Err(Error::config(None, format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Serializes to the same `key = value` format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        fn t<T: Display>(v: &[T; 3]) -> String {
            format!("{},{},{}", v[0], v[1], v[2])
        }
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("n_cell", t(&self.n_cell));
        kv("prob_lo", t(&self.prob_lo));
        kv("prob_hi", t(&self.prob_hi));
        kv("periodic", t(&self.periodic));
        kv("guard", self.guard.to_string());
        kv("tile_shape", t(&self.tile_shape));
        kv("shape_order", self.shape_order.to_string());
        kv("workload", self.workload.to_string());
        kv("ppc", self.ppc.to_string());
        kv("u_th", self.u_th.to_string());
        kv("drift", t(&self.drift));
        kv("q", self.q.to_string());
        kv("m", self.m.to_string());
        kv("density", self.density.to_string());
        kv("dt_safety", self.dt_safety.to_string());
        kv("steps", self.steps.to_string());
        kv("warmup", self.warmup.to_string());
        kv("seed", self.seed.to_string());
        kv("ranks", t(&self.ranks));
        kv("variant", self.variant.to_string());
        kv("deterministic", self.deterministic.to_string());
        kv("virtual_time", self.virtual_time.to_string());
        kv("disorder_fraction", self.disorder_fraction.to_string());
        kv(
            "freeze_after",
            self.freeze_after.map_or("none".into(), |v| v.to_string()),
        );
        kv("frequency_hz", self.frequency_hz.to_string());
        for (k, v) in self.cost.entries() {
            kv(&format!("cost.{k}"), v.to_string());
        }
        s
    }

    pub fn order(&self) -> Result<ShapeOrder> {
        ShapeOrder::from_u8(self.shape_order)
    }

    pub fn species(&self) -> Species {
        Species {
            q: self.q,
            m: self.m,
        }
    }

    /// Geometry from the configured grid, validated.
    pub fn build_geometry(&self) -> Result<GridGeometry> {
        let order = self.order()?;
        let need = GridGeometry::required_guard(order);
        if self.guard < need {
            return Err(Error::config(
                None,
                format!(
                    "guard {} too shallow for shape order {}; need {need}",
                    self.guard, self.shape_order
                ),
            ));
        }
        let geom = GridGeometry::new(
            self.n_cell,
            self.prob_lo,
            self.prob_hi,
            self.periodic,
            self.guard,
            self.tile_shape,
        )?;
        Decomposition::new(&geom, self.ranks)?;
        Ok(geom)
    }

    /// Full validation of everything a run depends on.
    pub fn validate(&self) -> Result<(GridGeometry, Decomposition)> {
        let geom = self.build_geometry()?;
        let decomp = Decomposition::new(&geom, self.ranks)?;
        if let Some(a) = (0..3).find(|&a| !self.periodic[a]) {
            return Err(Error::config(
                Some(a),
                "only periodic boundaries are supported",
            ));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(Error::config(None, "dt_safety must lie in (0, 1]"));
        }
        if !(self.m > 0.0 && self.m.is_finite()) || !self.q.is_finite() {
            return Err(Error::config(None, "species needs finite q and positive m"));
        }
        if !(self.density > 0.0) || !(self.u_th >= 0.0) {
            return Err(Error::config(
                None,
                "density must be positive and u_th non-negative",
            ));
        }
        if !(self.disorder_fraction >= 0.0) {
            return Err(Error::config(
                None,
                "disorder_fraction must be non-negative",
            ));
        }
        self.variant.validate()?;
        Ok((geom, decomp))
    }

    /// Time step from the CFL limit of the collocated field update.
    pub fn dt(&self, geom: &GridGeometry) -> f64 {
        let s: f64 = geom.dx.iter().map(|d| 1.0 / (d * d)).sum();
        self.dt_safety / (consts::C * s.sqrt())
    }
}
