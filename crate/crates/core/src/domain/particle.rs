/// Bytes per packed record: `u64 id` followed by seven little-endian `f64`.
pub const RECORD_BYTES: usize = 64;

/// One macroparticle. `u` is the normalized momentum `gamma * v / c`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParticleRecord {
    pub id: u64,
    pub pos: [f64; 3],
    pub u: [f64; 3],
    pub w: f64,
}

impl ParticleRecord {
    pub fn pack_into(&self, out: &mut [u8]) {
        out[..8].copy_from_slice(&self.id.to_le_bytes());
        let vals = [
            self.pos[0],
            self.pos[1],
            self.pos[2],
            self.u[0],
            self.u[1],
            self.u[2],
            self.w,
        ];
        for (i, v) in vals.iter().enumerate() {
            out[8 + 8 * i..16 + 8 * i].copy_from_slice(&v.to_le_bytes());
        }
    }

    pub fn pack(&self) -> [u8; RECORD_BYTES] {
        let mut b = [0u8; RECORD_BYTES];
        self.pack_into(&mut b);
        b
    }

    pub fn unpack(b: &[u8]) -> Self {
        let f = |i: usize| f64::from_le_bytes(b[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        Self {
            id: u64::from_le_bytes(b[..8].try_into().unwrap()),
            pos: [f(0), f(1), f(2)],
            u: [f(3), f(4), f(5)],
            w: f(6),
        }
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        gamma(self.u)
    }
}

#[inline]
pub fn gamma(u: [f64; 3]) -> f64 {
    (1.0 + u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
}

/// Charge and mass of the simulated species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Species {
    pub q: f64,
    pub m: f64,
}

impl Species {
    pub fn electron() -> Self {
        Self {
            q: -super::consts::Q_E,
            m: super::consts::M_E,
        }
    }
}
