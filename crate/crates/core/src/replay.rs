//! Bounded FIFO experience store whose records carry the behavior network's
//! value output.
//!
//! Every [`Transition`] stores `v_behavior`: `Q(s, a)` of the network that
//! selected `a` (Q-agents) or `V(s)` of the critic (actor-critic), evaluated
//! when the action was chosen. The stored value is never rewritten, so later
//! updates can compare it against the current network.

use std::collections::HashSet;
use std::io::{self, Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminated: bool,
    pub v_behavior: f64,
    /// Policy epoch (target-network generation) that produced `action`.
    pub policy_id: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("rejected transition: {0}")]
    Rejected(String),
    #[error("buffer holds {len} transitions, need {needed}")]
    NotReady { len: usize, needed: usize },
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("buffer dump io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed buffer dump at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    write_index: usize,
    obs_dim: Option<usize>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self, ReplayError> {
        if capacity == 0 {
            return Err(ReplayError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            write_index: 0,
            obs_dim: None,
        })
    }

    /// Fixes the observation width up front; otherwise the first push sets it.
    pub fn with_obs_dim(capacity: usize, obs_dim: usize) -> Result<Self, ReplayError> {
        let mut b = Self::new(capacity)?;
        b.obs_dim = Some(obs_dim);
        Ok(b)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn obs_dim(&self) -> Option<usize> {
        self.obs_dim
    }

    pub fn push(&mut self, t: Transition) -> Result<(), ReplayError> {
        validate(&t, self.obs_dim)?;
        self.obs_dim.get_or_insert(t.obs.len());
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_index] = t;
        }
        self.write_index = (self.write_index + 1) % self.capacity;
        Ok(())
    }

    /// `batch_size` transitions drawn uniformly with replacement. A batch may
    /// be larger than the buffer; only an empty buffer (or empty batch) is
    /// refused. Training code enforces its own warm-up threshold.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>, ReplayError> {
        if batch_size == 0 || self.is_empty() {
            return Err(ReplayError::NotReady {
                len: self.len(),
                needed: batch_size.max(1),
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.storage[rng.gen_range(0..self.len())])
            .collect())
    }

    /// Retained transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> + '_ {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.write_index
        };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    pub fn distinct_policies(&self) -> usize {
        self.storage
            .iter()
            .map(|t| t.policy_id)
            .collect::<HashSet<_>>()
            .len()
    }

    /// Writes the retained transitions, oldest first, as fixed-width records.
    ///
    /// Layout (little-endian): magic `SUFTRB1`, `obs_dim: u32`, `count: u64`,
    /// then `count` records of [`record_size`] bytes each with the fields in
    /// declaration order: `obs` (f64 x obs_dim), `action` (u64), `reward`
    /// (f64), `next_obs` (f64 x obs_dim), `terminated` (u8), `v_behavior`
    /// (f64), `policy_id` (u64).
    pub fn dump<W: Write>(&self, mut w: W) -> Result<(), ReplayError> {
        let obs_dim = self.obs_dim.unwrap_or(0);
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(obs_dim as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        let mut rec = Vec::with_capacity(record_size(obs_dim));
        for t in self.iter() {
            rec.clear();
            encode_record(t, &mut rec);
            w.write_all(&rec)?;
        }
        Ok(())
    }

    /// Reads a dump back into a buffer of the given capacity.
    pub fn load<R: Read>(mut r: R, capacity: usize) -> Result<Self, ReplayError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let header = DUMP_MAGIC.len() + 12;
        if bytes.len() < header {
            return Err(malformed(bytes.len(), "truncated header"));
        }
        if &bytes[..DUMP_MAGIC.len()] != DUMP_MAGIC {
            return Err(malformed(0, "bad magic"));
        }
        let obs_dim = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[11..19].try_into().unwrap()) as usize;
        let rs = record_size(obs_dim);
        let body = &bytes[header..];
        if body.len() != count.saturating_mul(rs) {
            return Err(malformed(
                header + (body.len() / rs) * rs,
                format!("expected {count} records of {rs} bytes, found {} bytes", body.len()),
            ));
        }
        let mut buf = Self::with_obs_dim(capacity, obs_dim)?;
        for (i, chunk) in body.chunks_exact(rs).enumerate() {
            let t = decode_record(chunk, obs_dim)
                .map_err(|(off, why)| malformed(header + i * rs + off, why))?;
            buf.push(t)?;
        }
        Ok(buf)
    }
}

pub const DUMP_MAGIC: &[u8; 7] = b"SUFTRB1";

/// Bytes per dumped transition.
pub const fn record_size(obs_dim: usize) -> usize {
    // obs + next_obs, action, reward, terminated, v_behavior, policy_id
    16 * obs_dim + 8 + 8 + 1 + 8 + 8
}

/// Size of the same record without the recycled value.
pub const fn record_size_without_value(obs_dim: usize) -> usize {
    16 * obs_dim + 8 + 8 + 1 + 8
}

fn encode_record(t: &Transition, out: &mut Vec<u8>) {
    for v in &t.obs {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(t.action as u64).to_le_bytes());
    out.extend_from_slice(&t.reward.to_le_bytes());
    for v in &t.next_obs {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(t.terminated as u8);
    out.extend_from_slice(&t.v_behavior.to_le_bytes());
    out.extend_from_slice(&t.policy_id.to_le_bytes());
}

fn decode_record(b: &[u8], obs_dim: usize) -> Result<Transition, (usize, String)> {
    let mut pos = 0;
    let f64_at = |pos: &mut usize| {
        let v = f64::from_le_bytes(b[*pos..*pos + 8].try_into().unwrap());
        *pos += 8;
        v
    };
    let obs: Vec<f64> = (0..obs_dim).map(|_| f64_at(&mut pos)).collect();
    let action = u64::from_le_bytes(b[pos..pos + 8].try_into().unwrap()) as usize;
    pos += 8;
    let reward = f64_at(&mut pos);
    let next_obs: Vec<f64> = (0..obs_dim).map(|_| f64_at(&mut pos)).collect();
    let terminated = match b[pos] {
        0 => false,
        1 => true,
        other => return Err((pos, format!("terminated flag {other} is not 0/1"))),
    };
    pos += 1;
    let v_behavior = f64_at(&mut pos);
    let policy_id = u64::from_le_bytes(b[pos..pos + 8].try_into().unwrap());
    Ok(Transition {
        obs,
        action,
        reward,
        next_obs,
        terminated,
        v_behavior,
        policy_id,
    })
}

fn malformed(offset: usize, reason: impl Into<String>) -> ReplayError {
    ReplayError::Malformed {
        offset,
        reason: reason.into(),
    }
}

fn validate(t: &Transition, obs_dim: Option<usize>) -> Result<(), ReplayError> {
    if t.obs.len() != t.next_obs.len() {
        return Err(ReplayError::Rejected(format!(
            "obs has {} features but next_obs has {}",
            t.obs.len(),
            t.next_obs.len()
        )));
    }
    if let Some(d) = obs_dim {
        if t.obs.len() != d {
            return Err(ReplayError::Rejected(format!(
                "obs has {} features, buffer stores {d}",
                t.obs.len()
            )));
        }
    }
    if !t.reward.is_finite() {
        return Err(ReplayError::Rejected(format!("reward {}", t.reward)));
    }
    if !t.v_behavior.is_finite() {
        return Err(ReplayError::Rejected(format!("v_behavior {}", t.v_behavior)));
    }
    if t.obs.iter().chain(&t.next_obs).any(|v| !v.is_finite()) {
        return Err(ReplayError::Rejected("non-finite observation".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use proptest::prelude::*;

    fn tr(id: usize) -> Transition {
        Transition {
            obs: vec![id as f64, 0.5],
            action: id % 3,
            reward: id as f64 * 0.1,
            next_obs: vec![id as f64 + 1.0, -0.5],
            terminated: id % 5 == 0,
            v_behavior: id as f64 * 1.5,
            policy_id: (id / 4) as u64,
        }
    }

    fn ids(b: &ReplayBuffer) -> Vec<usize> {
        b.iter().map(|t| t.obs[0] as usize).collect()
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(2).unwrap();
        for i in 0..3 {
            b.push(tr(i)).unwrap();
        }
        assert_eq!(ids(&b), vec![1, 2]);
    }

    #[test]
    fn len_tracks_pushes() {
        let mut b = ReplayBuffer::new(10).unwrap();
        for k in 1..=7 {
            b.push(tr(k)).unwrap();
            assert_eq!(b.len(), k);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut b = ReplayBuffer::new(4).unwrap();
        let mut t = tr(1);
        t.reward = f64::NAN;
        assert!(matches!(b.push(t), Err(ReplayError::Rejected(_))));
        let mut t = tr(1);
        t.v_behavior = f64::INFINITY;
        assert!(b.push(t).is_err());
        let mut t = tr(1);
        t.next_obs[1] = f64::NAN;
        assert!(b.push(t).is_err());
        assert!(b.is_empty());
        b.push(tr(1)).unwrap();
        let mut wide = tr(2);
        wide.obs.push(0.0);
        wide.next_obs.push(0.0);
        assert!(b.push(wide).is_err());
    }

    #[test]
    fn sampling_single_item_repeats_it() {
        let mut b = ReplayBuffer::new(4).unwrap();
        assert!(matches!(
            b.sample(3, &mut rng_from_seed(0)),
            Err(ReplayError::NotReady { len: 0, needed: 3 })
        ));
        b.push(tr(7)).unwrap();
        let s = b.sample(3, &mut rng_from_seed(0)).unwrap();
        assert_eq!(s, vec![&tr(7); 3]);
        assert!(b.sample(0, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let mut b = ReplayBuffer::new(50).unwrap();
        for i in 0..50 {
            b.push(tr(i)).unwrap();
        }
        let a: Vec<_> = b.sample(16, &mut rng_from_seed(3)).unwrap().into_iter().cloned().collect();
        let c: Vec<_> = b.sample(16, &mut rng_from_seed(3)).unwrap().into_iter().cloned().collect();
        assert_eq!(a, c);
    }

    #[test]
    fn sampling_is_uniform() {
        let n_items = 20;
        let mut b = ReplayBuffer::new(n_items).unwrap();
        for i in 0..n_items {
            b.push(tr(i)).unwrap();
        }
        let mut rng = rng_from_seed(11);
        let mut counts = vec![0u64; n_items];
        let draws = 1_000_000;
        for _ in 0..draws / 100 {
            for t in b.sample(100, &mut rng).unwrap() {
                counts[t.obs[0] as usize] += 1;
            }
        }
        let expected = draws as f64 / n_items as f64;
        let sd = (draws as f64 * (1.0 / n_items as f64) * (1.0 - 1.0 / n_items as f64)).sqrt();
        let mut chi2 = 0.0;
        for &c in &counts {
            assert!((c as f64 - expected).abs() < 4.0 * sd, "count {c} vs {expected}");
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // chi-square with 19 dof: the 0.999 quantile is 43.82
        assert!(chi2 < 43.82, "chi2 {chi2}");
    }

    #[test]
    fn distinct_policy_count() {
        let mut b = ReplayBuffer::new(8).unwrap();
        assert_eq!(b.distinct_policies(), 0);
        for i in 0..4 {
            b.push(tr(i)).unwrap();
        }
        assert_eq!(b.distinct_policies(), 1);
        b.push(tr(4)).unwrap();
        assert_eq!(b.distinct_policies(), 2);
    }

    #[test]
    fn value_costs_eight_bytes_per_record() {
        for d in [4, 25] {
            assert_eq!(record_size(d) - record_size_without_value(d), 8);
        }
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            b.push(tr(i)).unwrap();
        }
        let mut bytes = Vec::new();
        b.dump(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 19 + 3 * record_size(2));
        // first record is transition 2; its v_behavior sits after obs, action,
        // reward, next_obs and the flag
        let off = 19 + 16 + 8 + 8 + 16 + 1;
        assert_eq!(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()), 3.0);
        let back = ReplayBuffer::load(&bytes[..], 3).unwrap();
        assert_eq!(ids(&back), vec![2, 3, 4]);
        assert!(back.iter().zip(b.iter()).all(|(x, y)| x == y));
        assert!(matches!(
            ReplayBuffer::load(&bytes[..bytes.len() - 1], 3),
            Err(ReplayError::Malformed { .. })
        ));
    }

    #[derive(Debug, Clone)]
    enum Op {
        Push,
        Sample(usize),
    }

    proptest! {
        #[test]
        fn matches_naive_fifo_model(
            cap in 1usize..12,
            ops in proptest::collection::vec(
                prop_oneof![3 => Just(Op::Push), 1 => (1usize..6).prop_map(Op::Sample)],
                0..200,
            ),
            seed in any::<u64>(),
        ) {
            let mut b = ReplayBuffer::new(cap).unwrap();
            let mut model: Vec<usize> = Vec::new();
            let mut rng = rng_from_seed(seed);
            let mut next = 0;
            for op in ops {
                match op {
                    Op::Push => {
                        b.push(tr(next)).unwrap();
                        model.push(next);
                        if model.len() > cap {
                            model.remove(0);
                        }
                        next += 1;
                    }
                    Op::Sample(k) => {
                        match b.sample(k, &mut rng) {
                            Ok(s) => {
                                prop_assert!(!model.is_empty());
                                prop_assert_eq!(s.len(), k);
                                for t in s {
                                    prop_assert!(model.contains(&(t.obs[0] as usize)));
                                }
                            }
                            Err(_) => prop_assert!(model.is_empty()),
                        }
                    }
                }
                prop_assert!(b.len() <= cap);
                prop_assert_eq!(ids(&b), model.clone());
            }
        }
    }
}
