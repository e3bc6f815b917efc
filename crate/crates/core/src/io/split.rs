//! Seeded train/tune/test partitions.
//!
//! The permutation is reproducible across implementations:
//!
//! 1. Seed a ChaCha8 stream with `ChaCha8Rng::seed_from_u64(seed)` (the
//!    `rand_core` PCG32 seed expansion).
//! 2. Start from the identity `0..n` and run Fisher–Yates from the top:
//!    for `i = n-1` down to `1`, draw `u = next_u64()`, set
//!    `j = (u as u128 * (i+1) as u128) >> 64` and swap positions `i` and `j`.
//! 3. Cut the permutation at `⌊train·n⌋` and `⌊(train+tune)·n⌋`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub tune: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

impl SplitSpec {
    /// 40% train, 10% tune, 50% test.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            train: 0.40,
            tune: 0.10,
            test: 0.50,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.tune, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f <= 0.0) {
            return Err(Error::InvalidSplit(format!("fractions must be positive: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("fractions sum to {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub tune: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniform random permutation of `0..n` from the documented generator.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        idx.swap(i, j);
    }
    idx
}

pub fn make_splits(n: usize, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    if n < 10 {
        return Err(Error::TooFewToSplit(n));
    }
    // the epsilon keeps exact products such as 0.4 * 100 from flooring down
    let cut = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
    let a = cut(spec.train);
    let b = cut(spec.train + spec.tune).max(a);
    let perm = permutation(n, spec.seed);
    Ok(Splits {
        train: perm[..a].to_vec(),
        tune: perm[a..b].to_vec(),
        test: perm[b..].to_vec(),
    })
}
