//! Pairwise (tree) summation. All reductions in the crate go through here so
//! that rounding error grows as O(log N) rather than O(N).

/// Streaming pairwise accumulator. Holds at most ~log2(N) partial sums; the
/// association order is that of a balanced binary tree over the pushed values
/// in push order, so results are reproducible.
#[derive(Debug, Clone, Default)]
pub struct PairwiseSum {
    stack: Vec<(u32, f64)>,
}

impl PairwiseSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        let mut level = 0u32;
        let mut acc = value;
        while let Some(&(top_level, top)) = self.stack.last() {
            if top_level != level {
                break;
            }
            self.stack.pop();
            acc += top;
            level += 1;
        }
        self.stack.push((level, acc));
    }

    /// Current total. Does not consume the accumulator.
    pub fn total(&self) -> f64 {
        self.stack.iter().rev().fold(0.0, |acc, &(_, v)| acc + v)
    }
}

impl Extend<f64> for PairwiseSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.push(v);
        }
    }
}

/// Pairwise sum of a slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// Pairwise sum of a mapped iterator.
pub fn pairwise_sum_iter<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = PairwiseSum::new();
    acc.extend(values);
    acc.total()
}
