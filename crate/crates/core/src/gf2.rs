//! Dense bit-packed linear algebra over GF(2).
//!
//! Everything the stabilizer-side checks need: rank (for counting encoded
//! qubits) and solving A·x = b (for deciding whether a residual operator is a
//! product of available stabilizers).

const WORD_BITS: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Fixed-length bit vector.
#[derive(Clone, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_indices(len: usize, ones: impl IntoIterator<Item = usize>) -> Self {
        let mut v = BitVec::zeros(len);
        for i in ones {
            v.set(i, true);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, val: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if val {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn and_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Parity of |self AND other|, i.e. the GF(2) inner product.
    pub fn dot(&self, other: &BitVec) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u64, |acc, (a, b)| acc ^ (a & b))
            .count_ones()
            & 1
            == 1
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD_BITS + bit)
                }
            })
        })
    }
}

/// Row-major bit matrix.
#[derive(Clone, Debug)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    row_words: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let row_words = words_for(cols).max(1);
        BitMatrix {
            rows,
            cols,
            row_words,
            data: vec![0; rows * row_words],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.row_words + c / WORD_BITS] >> (c % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, val: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let mask = 1u64 << (c % WORD_BITS);
        let w = &mut self.data[r * self.row_words + c / WORD_BITS];
        if val {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.row_words..(r + 1) * self.row_words]
    }

    /// dst ^= src, rows of the same matrix.
    fn xor_rows(&mut self, dst: usize, src: usize) {
        debug_assert_ne!(dst, src);
        let (a, b) = if dst < src {
            let (lo, hi) = self.data.split_at_mut(src * self.row_words);
            (
                &mut lo[dst * self.row_words..(dst + 1) * self.row_words],
                &hi[..self.row_words],
            )
        } else {
            let (lo, hi) = self.data.split_at_mut(dst * self.row_words);
            (
                &mut hi[..self.row_words],
                &lo[src * self.row_words..(src + 1) * self.row_words],
            )
        };
        for (x, y) in a.iter_mut().zip(b) {
            *x ^= y;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for k in 0..self.row_words {
            self.data.swap(a * self.row_words + k, b * self.row_words + k);
        }
    }

    /// In-place reduction to reduced row echelon form.
    /// Returns the pivot column of each pivot row, in order.
    pub fn reduce(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut pivot_row = 0;
        for col in 0..self.cols {
            if pivot_row == self.rows {
                break;
            }
            // Find a row at or below pivot_row with a 1 in this column.
            let Some(src) = (pivot_row..self.rows).find(|&r| self.get(r, col)) else {
                continue;
            };
            self.swap_rows(pivot_row, src);
            // Clear the column everywhere else (full reduction).
            for r in 0..self.rows {
                if r != pivot_row && self.get(r, col) {
                    self.xor_rows(r, pivot_row);
                }
            }
            pivots.push(col);
            pivot_row += 1;
        }
        pivots
    }

    pub fn rank(mut self) -> usize {
        self.reduce().len()
    }
}

/// Solve A·x = b over GF(2). Returns one solution (free variables zero),
/// or `None` when the system is inconsistent.
pub fn solve(a: &BitMatrix, b: &BitVec) -> Option<BitVec> {
    assert_eq!(a.rows(), b.len(), "one equation per matrix row");
    let mut aug = BitMatrix::zeros(a.rows, a.cols + 1);
    for r in 0..a.rows {
        // Bits at or past `cols` are never set, so a word copy is safe.
        let dst = &mut aug.data[r * aug.row_words..];
        dst[..a.row_words].copy_from_slice(a.row(r));
        aug.set(r, a.cols, b.get(r));
    }
    let pivots = aug.reduce();
    // A pivot in the augmented column means a row reading 0 = 1.
    if pivots.last() == Some(&a.cols) {
        return None;
    }
    let mut x = BitVec::zeros(a.cols);
    for (row, &col) in pivots.iter().enumerate() {
        x.set(col, aug.get(row, a.cols));
    }
    Some(x)
}

/// A·x for a solution check.
pub fn mat_vec(a: &BitMatrix, x: &BitVec) -> BitVec {
    assert_eq!(a.cols(), x.len());
    let mut out = BitVec::zeros(a.rows());
    for r in 0..a.rows() {
        let parity = a.row(r)
            .iter()
            .zip(&x.words)
            .fold(0u64, |acc, (m, v)| acc ^ (m & v))
            .count_ones()
            & 1;
        out.set(r, parity == 1);
    }
    out
}
