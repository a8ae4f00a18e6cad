use crate::domain::ParticleRecord;

/// Structure-of-arrays particle storage with a fixed slot count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParticleSoa {
    pub id: Vec<u64>,
    pub x: [Vec<f64>; 3],
    pub u: [Vec<f64>; 3],
    pub w: Vec<f64>,
}

impl ParticleSoa {
    pub fn with_slots(n: usize) -> Self {
        Self {
            id: vec![0; n],
            x: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            u: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            w: vec![0.0; n],
        }
    }

    pub fn slots(&self) -> usize {
        self.id.len()
    }

    pub fn resize(&mut self, n: usize) {
        self.id.resize(n, 0);
        for v in self.x.iter_mut().chain(self.u.iter_mut()) {
            v.resize(n, 0.0);
        }
        self.w.resize(n, 0.0);
    }

    #[inline]
    pub fn get(&self, s: usize) -> ParticleRecord {
        ParticleRecord {
            id: self.id[s],
            pos: [self.x[0][s], self.x[1][s], self.x[2][s]],
            u: [self.u[0][s], self.u[1][s], self.u[2][s]],
            w: self.w[s],
        }
    }

    #[inline]
    pub fn pos(&self, s: usize) -> [f64; 3] {
        [self.x[0][s], self.x[1][s], self.x[2][s]]
    }

    #[inline]
    pub fn mom(&self, s: usize) -> [f64; 3] {
        [self.u[0][s], self.u[1][s], self.u[2][s]]
    }

    #[inline]
    pub fn set(&mut self, s: usize, r: &ParticleRecord) {
        self.id[s] = r.id;
        for a in 0..3 {
            self.x[a][s] = r.pos[a];
            self.u[a][s] = r.u[a];
        }
        self.w[s] = r.w;
    }

    /// Moves slot `src` to `dst` within the same storage.
    #[inline]
    pub fn move_slot(&mut self, src: usize, dst: usize) {
        self.id[dst] = self.id[src];
        for a in 0..3 {
            self.x[a][dst] = self.x[a][src];
            self.u[a][dst] = self.u[a][src];
        }
        self.w[dst] = self.w[src];
    }

    /// Copies slot `src` of `from` into slot `dst` of `self`.
    #[inline]
    pub fn copy_from(&mut self, from: &ParticleSoa, src: usize, dst: usize) {
        self.id[dst] = from.id[src];
        for a in 0..3 {
            self.x[a][dst] = from.x[a][src];
            self.u[a][dst] = from.u[a][src];
        }
        self.w[dst] = from.w[src];
    }
}
