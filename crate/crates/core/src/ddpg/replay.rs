//! Fixed-capacity ring buffer of transitions with uniform sampling.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub dones: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<f64>,
    len: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            obs_dim,
            act_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
            len: 0,
            head: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores a transition, overwriting the oldest one once full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.len() != self.obs_dim || t.next_obs.len() != self.obs_dim {
            return Err(Error::ShapeMismatch {
                expected: self.obs_dim,
                got: t.obs.len().max(t.next_obs.len()),
            });
        }
        if t.action.len() != self.act_dim {
            return Err(Error::ShapeMismatch {
                expected: self.act_dim,
                got: t.action.len(),
            });
        }
        let done = if t.done { 1.0 } else { 0.0 };
        if self.len < self.capacity {
            self.obs.extend_from_slice(&t.obs);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_obs.extend_from_slice(&t.next_obs);
            self.dones.push(done);
            self.len += 1;
        } else {
            let i = self.head;
            self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.obs);
            self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(&t.action);
            self.rewards[i] = t.reward;
            self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.next_obs);
            self.dones[i] = done;
        }
        self.head = (self.head + 1) % self.capacity;
        Ok(())
    }

    /// The `i`-th stored transition counted from the oldest.
    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len {
            return None;
        }
        let slot = if self.len < self.capacity { i } else { (self.head + i) % self.capacity };
        Some(Transition {
            obs: self.obs[slot * self.obs_dim..(slot + 1) * self.obs_dim].to_vec(),
            action: self.actions[slot * self.act_dim..(slot + 1) * self.act_dim].to_vec(),
            reward: self.rewards[slot],
            next_obs: self.next_obs[slot * self.obs_dim..(slot + 1) * self.obs_dim].to_vec(),
            done: self.dones[slot] == 1.0,
        })
    }

    /// Uniform draws with replacement over stored slots.
    pub fn sample_indices<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(invalid(format!("cannot sample {k} transitions from an empty buffer")));
        }
        Ok((0..k).map(|_| rng.random_range(0..self.len)).collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(k, rng)?;
        let gather = |src: &[f64], dim: usize| {
            let mut out = Vec::with_capacity(k * dim);
            for &i in &idx {
                out.extend_from_slice(&src[i * dim..(i + 1) * dim]);
            }
            Array2::from_shape_vec((k, dim), out).expect("gathered rows")
        };
        Ok(Batch {
            obs: gather(&self.obs, self.obs_dim),
            actions: gather(&self.actions, self.act_dim),
            rewards: idx.iter().map(|&i| self.rewards[i]).collect(),
            next_obs: gather(&self.next_obs, self.obs_dim),
            dones: idx.iter().map(|&i| self.dones[i]).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn tr(tag: f64) -> Transition {
        Transition {
            obs: vec![tag; 2],
            action: vec![tag],
            reward: tag,
            next_obs: vec![tag + 0.5; 2],
            done: false,
        }
    }

    #[test]
    fn evicts_oldest() {
        let mut buf = ReplayBuffer::new(2, 2, 1).unwrap();
        for t in 0..3 {
            buf.push(tr(t as f64)).unwrap();
        }
        assert_eq!(buf.len(), 2);
        assert_eq!(buf.get(0).unwrap().reward, 1.0);
        assert_eq!(buf.get(1).unwrap().reward, 2.0);
        assert!(buf.get(2).is_none());
    }

    #[test]
    fn single_element_sampled_with_replacement() {
        let mut buf = ReplayBuffer::new(8, 2, 1).unwrap();
        buf.push(tr(3.0)).unwrap();
        let b = buf.sample_batch(4, &mut rng_from_seed(0)).unwrap();
        assert_eq!(b.rewards.to_vec(), vec![3.0; 4]);
        assert_eq!(b.obs.shape(), &[4, 2]);
    }

    #[test]
    fn empty_buffer_rejects_sampling() {
        let buf = ReplayBuffer::new(8, 2, 1).unwrap();
        assert!(buf.sample_batch(1, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn shape_checked() {
        let mut buf = ReplayBuffer::new(8, 3, 1).unwrap();
        assert!(buf.push(tr(1.0)).is_err());
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(4, 2, 1).unwrap();
        for t in 0..4 {
            buf.push(tr(t as f64)).unwrap();
        }
        let draws = 1000;
        let idx = buf.sample_indices(draws, &mut rng_from_seed(12)).unwrap();
        let mut counts = [0usize; 4];
        for i in idx {
            counts[i] += 1;
        }
        let expected = draws as f64 / 4.0;
        let se = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * se, "{counts:?}");
        }
    }
}
