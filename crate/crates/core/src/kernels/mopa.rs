/// Tile edge of the emulated matrix unit (8 FP64 lanes).
pub const TILE: usize = 8;

/// An 8x8 FP64 accumulator updated only by rank-1 outer products.
#[derive(Debug, Clone, Copy, PartialEq)]
#[repr(align(64))]
pub struct MopaTile {
    pub c: [[f64; TILE]; TILE],
}

impl Default for MopaTile {
    fn default() -> Self {
        Self {
            c: [[0.0; TILE]; TILE],
        }
    }
}

impl MopaTile {
    pub fn zero(&mut self) {
        self.c = [[0.0; TILE]; TILE];
    }

    /// `c[i][j] += a[i] * b[j]` with one fused multiply-add per entry.
    #[inline(always)]
    pub fn accumulate(&mut self, a: &[f64; TILE], b: &[f64; TILE]) {
        for i in 0..TILE {
            let ai = a[i];
            let row = &mut self.c[i];
            for j in 0..TILE {
                row[j] = ai.mul_add(b[j], row[j]);
            }
        }
    }
}

/// Functional form of [`MopaTile::accumulate`].
pub fn mopa_accumulate(mut tile: MopaTile, a: &[f64; TILE], b: &[f64; TILE]) -> MopaTile {
    tile.accumulate(a, b);
    tile
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(k: usize) -> [f64; 8] {
        let mut v = [0.0; 8];
        v[k] = 1.0;
        v
    }

    #[test]
    fn unit_vectors_hit_one_entry() {
        let t = mopa_accumulate(MopaTile::default(), &unit(2), &unit(5));
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(t.c[i][j], if (i, j) == (2, 5) { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn zero_vector_is_absorbing() {
        let mut t = MopaTile::default();
        t.c[3][3] = 7.5;
        let before = t;
        t.accumulate(&[0.0; 8], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(t, before);
    }

    proptest! {
        #[test]
        fn sequence_matches_entrywise_fma(
            seq in prop::collection::vec((prop::array::uniform8(-1e3f64..1e3), prop::array::uniform8(-1e3f64..1e3)), 1..6)
        ) {
            let mut t = MopaTile::default();
            let mut r = [[0.0f64; 8]; 8];
            for (a, b) in &seq {
                t.accumulate(a, b);
                for i in 0..8 {
                    for j in 0..8 {
                        r[i][j] = a[i].mul_add(b[j], r[i][j]);
                    }
                }
            }
            for i in 0..8 {
                for j in 0..8 {
                    prop_assert_eq!(t.c[i][j].to_bits(), r[i][j].to_bits());
                }
            }
        }
    }
}
