use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Ordered set of distinct positions in `0..universe`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
    universe: usize,
}

impl IndexSet {
    pub fn new(indices: Vec<usize>, universe: usize) -> Result<Self> {
        let mut seen = vec![false; universe];
        for &i in &indices {
            if i >= universe {
                return Err(invalid(format!("index {i} outside universe {universe}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("duplicate index {i}")));
            }
        }
        Ok(Self { indices, universe })
    }

    pub fn empty(universe: usize) -> Self {
        Self {
            indices: Vec::new(),
            universe,
        }
    }

    /// `0..universe` in order.
    pub fn full(universe: usize) -> Self {
        Self {
            indices: (0..universe).collect(),
            universe,
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    /// Union with a disjoint set over the same universe; `other` is appended.
    pub fn union(&self, other: &IndexSet) -> Result<IndexSet> {
        if self.universe != other.universe {
            return Err(invalid("index sets over different universes"));
        }
        let mut all = self.indices.clone();
        all.extend_from_slice(&other.indices);
        IndexSet::new(all, self.universe)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.indices
    }
}

/// Seed of one reproducible random stream.
///
/// `(master, draw)` selects a ChaCha8 key and stream, so draw `r` never depends
/// on how many numbers other draws consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub master: u64,
    pub draw: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSeed {
    pub fn new(master: u64) -> Self {
        Self { master, draw: 0 }
    }

    /// Stream for draw `draw` under the same master seed.
    pub fn with_draw(self, draw: u64) -> Self {
        Self { draw, ..self }
    }

    /// Independent sub-seed tagged by `tag` (restart index, phase id, ...).
    pub fn child(&self, tag: u64) -> Self {
        let master = splitmix64(splitmix64(self.master) ^ splitmix64(self.draw.wrapping_add(GOLDEN)) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        Self { master, draw: 0 }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.draw);
        rng
    }
}

/// Draws `count` distinct indices uniformly from `0..universe` minus `exclude`.
pub fn sample_indices(
    universe: usize,
    count: usize,
    exclude: &IndexSet,
    seed: &RngSeed,
) -> Result<IndexSet> {
    if exclude.universe() != universe {
        return Err(invalid(format!(
            "exclusion set universe {} differs from {universe}",
            exclude.universe()
        )));
    }
    let available = universe - exclude.len();
    if count > available {
        return Err(invalid(format!(
            "cannot draw {count} indices from {available} available (universe {universe}, {} excluded)",
            exclude.len()
        )));
    }
    let mut excluded: Vec<usize> = exclude.as_slice().to_vec();
    excluded.sort_unstable();
    let mut rng = seed.rng();
    let picked = index::sample(&mut rng, available, count);
    // Map position p among the available indices to the p-th non-excluded integer.
    let indices = picked
        .into_iter()
        .map(|p| {
            let mut v = p;
            for &e in &excluded {
                if e <= v {
                    v += 1;
                } else {
                    break;
                }
            }
            v
        })
        .collect();
    Ok(IndexSet { indices, universe })
}
