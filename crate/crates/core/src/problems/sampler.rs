use crate::error::{Error, Result};
use crate::vecmath::RngStream;

/// How training indices are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampling {
    /// Independent uniform draws from the whole dataset.
    #[default]
    WithReplacement,
    /// Reshuffled passes; each epoch visits every index once.
    Shuffled,
    /// Cyclic passes in index order. With a full batch this is plain
    /// gradient descent.
    InOrder,
}

impl std::str::FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replacement" | "with-replacement" => Ok(Sampling::WithReplacement),
            "shuffle" | "shuffled" => Ok(Sampling::Shuffled),
            "inorder" | "in-order" => Ok(Sampling::InOrder),
            _ => Err(Error::invalid(format!("unknown sampling mode {s:?}"))),
        }
    }
}

/// Draws mini-batch indices from `0..n`.
#[derive(Clone, Debug)]
pub struct Sampler {
    n: usize,
    mode: Sampling,
    rng: RngStream,
    order: Vec<usize>,
    cursor: usize,
}

impl Sampler {
    pub fn new(n: usize, mode: Sampling, rng: RngStream) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(Sampler {
            n,
            mode,
            rng,
            order: Vec::new(),
            cursor: 0,
        })
    }

    pub fn next_batch(&mut self, batch: usize) -> Vec<usize> {
        match self.mode {
            Sampling::WithReplacement => (0..batch).map(|_| self.rng.index(self.n)).collect(),
            Sampling::Shuffled => (0..batch).map(|_| self.next_shuffled()).collect(),
            Sampling::InOrder => (0..batch)
                .map(|_| {
                    let i = self.cursor % self.n;
                    self.cursor = i + 1;
                    i
                })
                .collect(),
        }
    }

    fn next_shuffled(&mut self) -> usize {
        if self.cursor == self.order.len() {
            self.order = (0..self.n).collect();
            self.rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        let i = self.order[self.cursor];
        self.cursor += 1;
        i
    }
}

#[cfg(test)]
mod tests {

    use super::*;

    #[test]
    fn in_order_cycles() {
        let mut s = Sampler::new(3, Sampling::InOrder, RngStream::new(0)).unwrap();
        assert_eq!(s.next_batch(2), vec![0, 1]);
        assert_eq!(s.next_batch(4), vec![2, 0, 1, 2]);
    }

    #[test]
    fn shuffled_epochs_cover_every_index() {
        let mut s = Sampler::new(7, Sampling::Shuffled, RngStream::new(1)).unwrap();
        for _ in 0..3 {
            let mut epoch = s.next_batch(7);
            epoch.sort_unstable();
            assert_eq!(epoch, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn replacement_draws_are_in_range_and_seeded() {
        let mut a = Sampler::new(5, Sampling::WithReplacement, RngStream::new(9)).unwrap();
        let mut b = Sampler::new(5, Sampling::WithReplacement, RngStream::new(9)).unwrap();
        let xs = a.next_batch(100);
        assert!(xs.iter().all(|&i| i < 5));
        assert_eq!(xs, b.next_batch(100));
    }
}
