//! Replay buffer that samples consecutive-state triples.
//!
//! A stored transition at step `t` is a valid triple centre when transitions
//! `t − 1` and `t + 1` of the same episode are also in the buffer. Episode
//! starts have no previous state and are never sampled as centres; episode
//! ends have no successor transition and are skipped as well.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor2;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s_prev: Option<Vec<f64>>,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// True terminal state: no bootstrapping from `s_next`.
    pub done: bool,
    pub episode: u64,
    pub step: usize,
}

/// Batch of `(s_prev, s, s_next)` stencils plus the usual transition fields.
#[derive(Debug, Clone)]
pub struct TripleBatch {
    pub s_prev: Option<Tensor2>,
    pub s: Tensor2,
    pub a: Tensor2,
    pub r: Vec<f64>,
    pub s_next: Tensor2,
    pub done: Vec<bool>,
}

impl TripleBatch {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Builds a batch from transitions whose stencil is already known valid.
    pub fn from_transitions(rows: &[&Transition]) -> Result<Self> {
        let s_prev = if rows.iter().all(|t| t.s_prev.is_some()) {
            let v: Vec<&[f64]> = rows.iter().map(|t| t.s_prev.as_deref().expect("checked")).collect();
            Some(Tensor2::from_rows(&v)?)
        } else {
            None
        };
        Ok(Self {
            s_prev,
            s: Tensor2::from_rows(&rows.iter().map(|t| t.s.as_slice()).collect::<Vec<_>>())?,
            a: Tensor2::from_rows(&rows.iter().map(|t| t.a.as_slice()).collect::<Vec<_>>())?,
            r: rows.iter().map(|t| t.r).collect(),
            s_next: Tensor2::from_rows(&rows.iter().map(|t| t.s_next.as_slice()).collect::<Vec<_>>())?,
            done: rows.iter().map(|t| t.done).collect(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    valid: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), items: VecDeque::new(), valid: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn valid_triples(&self) -> usize {
        self.valid
    }

    fn follows(prev: &Transition, next: &Transition) -> bool {
        prev.episode == next.episode && prev.step + 1 == next.step
    }

    fn is_centre(&self, i: usize) -> bool {
        if i == 0 || i + 1 >= self.items.len() {
            return false;
        }
        let cur = &self.items[i];
        cur.s_prev.is_some() && Self::follows(&self.items[i - 1], cur) && Self::follows(cur, &self.items[i + 1])
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if let Some(last) = self.items.back() {
            if last.s.len() != t.s.len() || last.a.len() != t.a.len() || t.s_next.len() != t.s.len() {
                return Err(Error::Shape("transition dimensions changed".into()));
            }
            if let Some(p) = &t.s_prev {
                if p.len() != t.s.len() {
                    return Err(Error::Shape("previous state has the wrong dimension".into()));
                }
            }
            if last.episode == t.episode && t.step <= last.step {
                return Err(Error::InvalidParameter(format!(
                    "step index {} does not increase within episode {}",
                    t.step, t.episode
                )));
            }
        }
        if self.items.len() == self.capacity {
            if self.is_centre(1) {
                self.valid -= 1;
            }
            self.items.pop_front();
        }
        self.items.push_back(t);
        let n = self.items.len();
        if n >= 2 && self.is_centre(n - 2) {
            self.valid += 1;
        }
        Ok(())
    }

    /// Uniform sample (with replacement) of `n` valid triple centres.
    pub fn sample_triples<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<TripleBatch> {
        if n == 0 || self.valid < n {
            return Err(Error::InsufficientData { available: self.valid, requested: n });
        }
        let mut rows = Vec::with_capacity(n);
        while rows.len() < n {
            let i = rng.gen_range(0..self.items.len());
            if self.is_centre(i) {
                rows.push(&self.items[i]);
            }
        }
        TripleBatch::from_transitions(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Pushes an episode whose 1-D states encode `(episode, step)`.
    fn push_episode(buf: &mut ReplayBuffer, episode: u64, steps: usize) {
        for k in 0..steps {
            let code = |j: usize| episode as f64 * 1000.0 + j as f64;
            buf.push(Transition {
                s_prev: (k > 0).then(|| vec![code(k - 1)]),
                s: vec![code(k)],
                a: vec![0.0],
                r: 0.0,
                s_next: vec![code(k + 1)],
                done: false,
                episode,
                step: k,
            })
            .unwrap();
        }
    }

    #[test]
    fn three_step_episode_has_one_triple() {
        let mut buf = ReplayBuffer::new(100);
        push_episode(&mut buf, 0, 3);
        assert_eq!(buf.valid_triples(), 1);
        let b = buf.sample_triples(4, &mut ChaCha8Rng::seed_from_u64(0)).err();
        assert!(b.is_some());
        let b = buf.sample_triples(1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(b.s.data(), &[1.0]);
        assert_eq!(b.s_prev.unwrap().data(), &[0.0]);
        assert_eq!(b.s_next.data(), &[2.0]);
    }

    #[test]
    fn two_short_episodes_have_no_triples() {
        let mut buf = ReplayBuffer::new(100);
        push_episode(&mut buf, 0, 2);
        push_episode(&mut buf, 1, 2);
        assert_eq!(buf.valid_triples(), 0);
        assert!(matches!(
            buf.sample_triples(1, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::InsufficientData { available: 0, requested: 1 })
        ));
    }

    #[test]
    fn long_episode_counts_interior_indices() {
        let mut buf = ReplayBuffer::new(10_000);
        push_episode(&mut buf, 0, 200);
        assert_eq!(buf.valid_triples(), 198);
    }

    #[test]
    fn non_increasing_steps_are_rejected() {
        let mut buf = ReplayBuffer::new(10);
        push_episode(&mut buf, 0, 2);
        let t = Transition {
            s_prev: None,
            s: vec![0.0],
            a: vec![0.0],
            r: 0.0,
            s_next: vec![0.0],
            done: false,
            episode: 0,
            step: 1,
        };
        assert!(buf.push(t).is_err());
    }

    proptest! {
        #[test]
        fn triples_never_cross_episode_boundaries(
            lengths in prop::collection::vec(1usize..12, 1..10),
            capacity in 3usize..60,
            seed in 0u64..1000,
        ) {
            let mut buf = ReplayBuffer::new(capacity);
            for (e, &len) in lengths.iter().enumerate() {
                push_episode(&mut buf, e as u64, len);
            }
            let expected = (0..buf.len()).filter(|&i| buf.is_centre(i)).count();
            prop_assert_eq!(buf.valid_triples(), expected);
            if expected > 0 {
                let b = buf.sample_triples(expected.min(32), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let prev = b.s_prev.as_ref().unwrap();
                for r in 0..b.len() {
                    let (p, s, n) = (prev.get(r, 0), b.s.get(r, 0), b.s_next.get(r, 0));
                    prop_assert_eq!((p / 1000.0).floor(), (s / 1000.0).floor());
                    prop_assert_eq!((n / 1000.0).floor(), (s / 1000.0).floor());
                    prop_assert_eq!(s - p, 1.0);
                    prop_assert_eq!(n - s, 1.0);
                }
            }
        }
    }
}
