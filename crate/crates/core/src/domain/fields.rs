use super::GridGeometry;

/// Three node-collocated component arrays with `guard` layers on every side.
///
/// Node `(i, j, k)` of the interior box lives at
/// `((k + g) * ey + (j + g)) * ex + (i + g)`; indices in `[-g, n + g)` are valid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub n: [usize; 3],
    pub guard: usize,
    pub ext: [usize; 3],
    pub comp: [Vec<f64>; 3],
}

impl VectorField {
    pub fn new(n: [usize; 3], guard: usize) -> Self {
        let ext = n.map(|v| v + 2 * guard);
        let len = ext.iter().product();
        Self {
            n,
            guard,
            ext,
            comp: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
        }
    }

    pub fn len(&self) -> usize {
        self.comp[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn stride(&self) -> [usize; 3] {
        [1, self.ext[0], self.ext[0] * self.ext[1]]
    }

    /// Flat index of node `(i, j, k)` in interior coordinates.
    #[inline]
    pub fn idx(&self, i: i64, j: i64, k: i64) -> usize {
        let g = self.guard as i64;
        debug_assert!(
            self.contains(i, j, k),
            "node ({i},{j},{k}) outside guard box"
        );
        (((k + g) as usize * self.ext[1]) + (j + g) as usize) * self.ext[0] + (i + g) as usize
    }

    #[inline]
    pub fn contains(&self, i: i64, j: i64, k: i64) -> bool {
        let g = self.guard as i64;
        let n = self.n.map(|v| v as i64);
        i >= -g && i < n[0] + g && j >= -g && j < n[1] + g && k >= -g && k < n[2] + g
    }

    pub fn fill(&mut self, v: f64) {
        for c in &mut self.comp {
            c.iter_mut().for_each(|x| *x = v);
        }
    }

    pub fn zero(&mut self) {
        self.fill(0.0);
    }

    /// Sum of squares over interior nodes, all components.
    pub fn interior_norm2(&self) -> f64 {
        let mut s = 0.0;
        let n = self.n.map(|v| v as i64);
        for c in 0..3 {
            for k in 0..n[2] {
                for j in 0..n[1] {
                    let row = self.idx(0, j, k);
                    for v in &self.comp[c][row..row + self.n[0]] {
                        s += v * v;
                    }
                }
            }
        }
        s
    }

    /// Zeroes every guard node, leaving the interior untouched.
    pub fn zero_guards(&mut self) {
        let g = self.guard as i64;
        let n = self.n.map(|v| v as i64);
        for k in -g..n[2] + g {
            for j in -g..n[1] + g {
                let inner_row = (0..n[2]).contains(&k) && (0..n[1]).contains(&j);
                for i in -g..n[0] + g {
                    if inner_row && (0..n[0]).contains(&i) {
                        continue;
                    }
                    let q = self.idx(i, j, k);
                    for c in 0..3 {
                        self.comp[c][q] = 0.0;
                    }
                }
            }
        }
    }
}

/// E, B and J on a box of nodes sharing one extent and guard depth.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    pub e: VectorField,
    pub b: VectorField,
    pub j: VectorField,
}

impl FieldSet {
    pub fn new(n: [usize; 3], guard: usize) -> Self {
        Self {
            e: VectorField::new(n, guard),
            b: VectorField::new(n, guard),
            j: VectorField::new(n, guard),
        }
    }

    pub fn n(&self) -> [usize; 3] {
        self.e.n
    }

    pub fn guard(&self) -> usize {
        self.e.guard
    }

    /// Packs E and B node-major as `[Ex, Ey, Ez, Bx, By, Bz, 0, 0]` so that a
    /// grid-field matrix row is one contiguous load.
    pub fn pack_eb(&self, out: &mut PackedEB) {
        let len = self.e.len();
        if out.data.len() != len {
            out.data = vec![[0.0; 8]; len];
        }
        out.n = self.e.n;
        out.ext = self.e.ext;
        out.guard = self.e.guard;
        for (q, row) in out.data.iter_mut().enumerate() {
            *row = [
                self.e.comp[0][q],
                self.e.comp[1][q],
                self.e.comp[2][q],
                self.b.comp[0][q],
                self.b.comp[1][q],
                self.b.comp[2][q],
                0.0,
                0.0,
            ];
        }
    }
}

/// Global zero-initialized field set for `geom`.
pub fn allocate_fields(geom: &GridGeometry) -> FieldSet {
    FieldSet::new(geom.n_cell, geom.guard)
}

/// Node-major copy of E and B used by the batched gather.
#[derive(Debug, Clone, Default)]
pub struct PackedEB {
    pub n: [usize; 3],
    pub ext: [usize; 3],
    pub guard: usize,
    pub data: Vec<[f64; 8]>,
}

impl PackedEB {
    #[inline]
    pub fn idx(&self, i: i64, j: i64, k: i64) -> usize {
        let g = self.guard as i64;
        (((k + g) as usize * self.ext[1]) + (j + g) as usize) * self.ext[0] + (i + g) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_extents() {
        let g = GridGeometry::cube(8, 0.0, 1.0, 2).unwrap();
        let f = allocate_fields(&g);
        for v in [&f.e, &f.b, &f.j] {
            assert_eq!(v.ext, [12; 3]);
            for c in &v.comp {
                assert_eq!(c.len(), 12 * 12 * 12);
            }
        }
        let total: f64 = f.j.comp.iter().flat_map(|c| c.iter()).sum();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn index_layout_is_x_fastest() {
        let v = VectorField::new([4, 5, 6], 2);
        assert_eq!(v.idx(-2, -2, -2), 0);
        assert_eq!(v.idx(-1, -2, -2), 1);
        assert_eq!(v.idx(-2, -1, -2), 8);
        assert_eq!(v.idx(-2, -2, -1), 8 * 9);
        assert_eq!(v.idx(5, 6, 7), v.len() - 1);
    }

    #[test]
    fn zero_guards_keeps_interior() {
        let mut v = VectorField::new([3, 3, 3], 1);
        v.fill(1.0);
        v.zero_guards();
        let s: f64 = v.comp[1].iter().sum();
        assert_eq!(s, 27.0);
        assert_eq!(v.interior_norm2(), 81.0);
    }

    #[test]
    fn packed_rows_match_components() {
        let mut f = FieldSet::new([2, 2, 2], 1);
        for (q, x) in f.e.comp[1].iter_mut().enumerate() {
            *x = q as f64;
        }
        f.b.comp[2][7] = -3.0;
        let mut p = PackedEB::default();
        f.pack_eb(&mut p);
        assert_eq!(p.data[7], [0.0, 7.0, 0.0, 0.0, 0.0, -3.0, 0.0, 0.0]);
        assert_eq!(p.idx(1, 0, -1), f.e.idx(1, 0, -1));
    }
}
