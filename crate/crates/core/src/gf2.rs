//! Dense GF(2) vectors and Gauss-Jordan elimination on bit-packed rows.

use std::fmt;

/// A fixed-length GF(2) vector packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitRow {
    len: usize,
    words: Vec<u64>,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        BitRow { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_indices(len: usize, ones: impl IntoIterator<Item = usize>) -> Self {
        let mut r = Self::zeros(len);
        for i in ones {
            r.toggle(i);
        }
        r
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    #[inline]
    pub fn toggle(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    #[inline]
    pub fn xor_assign(&mut self, other: &BitRow) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Index of the lowest set bit at or after `from`.
    pub fn next_one(&self, from: usize) -> Option<usize> {
        if from >= self.len {
            return None;
        }
        let mut wi = from / 64;
        let mut w = self.words[wi] & (!0u64 << (from % 64));
        loop {
            if w != 0 {
                let i = wi * 64 + w.trailing_zeros() as usize;
                return (i < self.len).then_some(i);
            }
            wi += 1;
            if wi >= self.words.len() {
                return None;
            }
            w = self.words[wi];
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        let mut next = self.next_one(0);
        std::iter::from_fn(move || {
            let cur = next?;
            next = self.next_one(cur + 1);
            Some(cur)
        })
    }

    /// Parity of the bitwise AND with `other`.
    pub fn dot(&self, other: &BitRow) -> bool {
        self.words.iter().zip(&other.words).fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones()) & 1 == 1
    }
}

impl fmt::Debug for BitRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect();
        write!(f, "BitRow({s})")
    }
}

/// Reduced row-echelon form of an augmented system `rows · x = rhs`.
#[derive(Debug, Clone)]
pub struct Echelon {
    pub cols: usize,
    /// Nonzero reduced rows with their pivot column and right-hand side.
    pub rows: Vec<(usize, BitRow, bool)>,
    /// Whether a `0 = 1` row appeared.
    pub consistent: bool,
}

impl Echelon {
    /// Gauss-Jordan elimination.
    pub fn reduce(cols: usize, system: impl IntoIterator<Item = (BitRow, bool)>) -> Self {
        let mut pending: Vec<(BitRow, bool)> = system.into_iter().collect();
        let mut rows: Vec<(usize, BitRow, bool)> = Vec::new();
        let mut consistent = true;
        let mut col = 0;
        let mut start = 0;
        while start < pending.len() && col < cols {
            let found = (start..pending.len()).find(|&r| pending[r].0.get(col));
            if let Some(r) = found {
                pending.swap(start, r);
                let (pivot, prhs) = pending[start].clone();
                for (i, (row, rhs)) in pending.iter_mut().enumerate() {
                    if i != start && row.get(col) {
                        row.xor_assign(&pivot);
                        *rhs ^= prhs;
                    }
                }
                for (_, row, rhs) in rows.iter_mut() {
                    if row.get(col) {
                        row.xor_assign(&pivot);
                        *rhs ^= prhs;
                    }
                }
                rows.push((col, pivot, prhs));
                start += 1;
            }
            col += 1;
        }
        for (row, rhs) in &pending[start..] {
            debug_assert!(row.is_zero());
            if *rhs {
                consistent = false;
            }
        }
        pending.clear();
        Echelon { cols, rows, consistent }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn nullity(&self) -> usize {
        self.cols - self.rank()
    }

    /// The solution with every free variable set to zero.
    pub fn particular(&self) -> Option<BitRow> {
        if !self.consistent {
            return None;
        }
        let mut x = BitRow::zeros(self.cols);
        for (pivot, _, rhs) in &self.rows {
            x.set(*pivot, *rhs);
        }
        Some(x)
    }

    /// One basis vector per free column, in increasing column order.
    pub fn nullspace(&self) -> Vec<BitRow> {
        let mut is_pivot = vec![false; self.cols];
        for (p, _, _) in &self.rows {
            is_pivot[*p] = true;
        }
        (0..self.cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut v = BitRow::zeros(self.cols);
                v.set(free, true);
                for (pivot, row, _) in &self.rows {
                    if row.get(free) {
                        v.set(*pivot, true);
                    }
                }
                v
            })
            .collect()
    }
}

/// Rank of a set of vectors.
pub fn rank(cols: usize, rows: impl IntoIterator<Item = BitRow>) -> usize {
    Echelon::reduce(cols, rows.into_iter().map(|r| (r, false))).rank()
}
