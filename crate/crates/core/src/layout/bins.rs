/// Compressed per-bin slot lists built by a stable counting sort:
/// `slots[offsets[b]..offsets[b + 1]]` are the members of bin `b` in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BinIndex {
    pub offsets: Vec<u32>,
    pub slots: Vec<u32>,
}

impl BinIndex {
    /// Builds the index from `(bin, slot)` pairs given in slot order.
    pub fn build(&mut self, n_bins: usize, bins: &[u32], slots: &[u32]) {
        debug_assert_eq!(bins.len(), slots.len());
        self.offsets.clear();
        self.offsets.resize(n_bins + 1, 0);
        for &b in bins {
            self.offsets[b as usize + 1] += 1;
        }
        for b in 0..n_bins {
            self.offsets[b + 1] += self.offsets[b];
        }
        self.slots.clear();
        self.slots.resize(bins.len(), 0);
        let mut fill: Vec<u32> = self.offsets[..n_bins].to_vec();
        for (&b, &s) in bins.iter().zip(slots) {
            let f = &mut fill[b as usize];
            self.slots[*f as usize] = s;
            *f += 1;
        }
    }

    pub fn clear(&mut self, n_bins: usize) {
        self.offsets.clear();
        self.offsets.resize(n_bins + 1, 0);
        self.slots.clear();
    }

    pub fn n_bins(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    #[inline]
    pub fn bin(&self, b: usize) -> &[u32] {
        if b + 1 >= self.offsets.len() {
            return &[];
        }
        &self.slots[self.offsets[b] as usize..self.offsets[b + 1] as usize]
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}
