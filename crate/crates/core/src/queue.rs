//! Fixed-capacity FIFO of momentum-encoded keys used as contrastive
//! negatives.

use serde::{Deserialize, Serialize};

use crate::domain::norm;
use crate::error::{Error, Result};
use crate::tensor::Mat;

pub const DEFAULT_TOY_CAPACITY: usize = 1024;
pub const FULL_SCALE_CAPACITY: usize = 65_536;

/// Keys accepted by [`KeyQueue::enqueue`] must have norm within this of 1.
pub const KEY_NORM_TOLERANCE: f64 = 1e-3;

/// Ring buffer of unit-norm keys. `head` is the next slot to write.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyQueue {
    capacity: usize,
    dim: usize,
    storage: Vec<f64>,
    head: usize,
    fill: usize,
}

impl KeyQueue {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(Error::Config(format!(
                "queue capacity ({capacity}) and key dimension ({dim}) must be positive"
            )));
        }
        Ok(Self {
            capacity,
            dim,
            storage: vec![0.0; capacity * dim],
            head: 0,
            fill: 0,
        })
    }

    /// Rebuild from serialized parts, validating the ring invariants.
    pub fn from_parts(capacity: usize, dim: usize, storage: Vec<f64>, head: usize, fill: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 || storage.len() != capacity * dim || head >= capacity || fill > capacity {
            return Err(Error::Checkpoint("inconsistent queue state".into()));
        }
        Ok(Self {
            capacity,
            dim,
            storage,
            head,
            fill,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fill(&self) -> usize {
        self.fill
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn is_empty(&self) -> bool {
        self.fill == 0
    }

    pub fn storage(&self) -> &[f64] {
        &self.storage
    }

    /// Test hook: raw mutable access to the ring storage.
    #[doc(hidden)]
    pub fn storage_mut(&mut self) -> &mut [f64] {
        &mut self.storage
    }

    /// Append `keys` row by row; when full the oldest rows are evicted.
    /// The batch is validated as a whole before any row is written.
    pub fn enqueue(&mut self, keys: &Mat) -> Result<()> {
        if keys.rows > self.capacity {
            return Err(Error::Config(format!(
                "batch of {} keys exceeds queue capacity {}",
                keys.rows, self.capacity
            )));
        }
        if keys.rows > 0 && keys.cols != self.dim {
            return Err(Error::Contract(format!(
                "key dimension {} does not match queue dimension {}",
                keys.cols, self.dim
            )));
        }
        for r in 0..keys.rows {
            let n = norm(keys.row(r));
            if !((1.0 - KEY_NORM_TOLERANCE)..=(1.0 + KEY_NORM_TOLERANCE)).contains(&n) {
                return Err(Error::Contract(format!("key {r} has norm {n}, expected 1")));
            }
        }
        for r in 0..keys.rows {
            let slot = self.head * self.dim;
            self.storage[slot..slot + self.dim].copy_from_slice(keys.row(r));
            self.head = (self.head + 1) % self.capacity;
            self.fill = (self.fill + 1).min(self.capacity);
        }
        Ok(())
    }

    /// Snapshot of the stored keys, oldest first (`fill × dim`).
    pub fn negatives(&self) -> Mat {
        let mut data = Vec::with_capacity(self.fill * self.dim);
        let oldest = (self.head + self.capacity - self.fill) % self.capacity;
        for i in 0..self.fill {
            let slot = ((oldest + i) % self.capacity) * self.dim;
            data.extend_from_slice(&self.storage[slot..slot + self.dim]);
        }
        Mat {
            rows: self.fill,
            cols: self.dim,
            data,
        }
    }
}
