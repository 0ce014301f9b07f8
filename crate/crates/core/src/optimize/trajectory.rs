use std::fs::File;
use std::io::{Read, Seek, SeekFrom, Write};
use std::sync::Mutex;

use crate::error::{Error, Result};

/// Default in-memory budget before snapshots move to a temporary file.
pub const DEFAULT_SPILL_BYTES: usize = 256 << 20;

/// Per-epoch parameter snapshots, kept in memory up to a byte budget and
/// spilled to an anonymous temporary file beyond it.
#[derive(Debug)]
pub struct SnapshotStore {
    dim: usize,
    len: usize,
    limit_bytes: usize,
    memory: Vec<f64>,
    spill: Option<Mutex<File>>,
}

impl SnapshotStore {
    pub fn new(dim: usize, limit_bytes: usize) -> Self {
        Self { dim, len: 0, limit_bytes, memory: Vec::new(), spill: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_spilled(&self) -> bool {
        self.spill.is_some()
    }

    pub fn push(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::Dimension { what: "trajectory snapshot", expected: self.dim, got: theta.len() });
        }
        if self.spill.is_none() && (self.memory.len() + self.dim) * 8 > self.limit_bytes {
            let mut file = tempfile::tempfile().map_err(|e| Error::io("<trajectory spill>", e))?;
            write_f64s(&mut file, &self.memory)?;
            self.memory = Vec::new();
            self.spill = Some(Mutex::new(file));
        }
        match &mut self.spill {
            Some(file) => {
                let file = file.get_mut().expect("spill file lock poisoned");
                file.seek(SeekFrom::End(0)).map_err(|e| Error::io("<trajectory spill>", e))?;
                write_f64s(file, theta)?;
            }
            None => self.memory.extend_from_slice(theta),
        }
        self.len += 1;
        Ok(())
    }

    pub fn get(&self, t: usize) -> Result<Vec<f64>> {
        if t >= self.len {
            return Err(Error::Contract(format!("snapshot {t} out of range (len {})", self.len)));
        }
        match &self.spill {
            None => Ok(self.memory[t * self.dim..(t + 1) * self.dim].to_vec()),
            Some(file) => {
                let mut file = file.lock().expect("spill file lock poisoned");
                let offset = (t * self.dim * 8) as u64;
                file.seek(SeekFrom::Start(offset)).map_err(|e| Error::io("<trajectory spill>", e))?;
                let mut bytes = vec![0u8; self.dim * 8];
                file.read_exact(&mut bytes).map_err(|e| Error::io("<trajectory spill>", e))?;
                Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
            }
        }
    }

    /// Visits every snapshot in order.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[f64])) -> Result<()> {
        match &self.spill {
            None => {
                for (t, row) in self.memory.chunks_exact(self.dim.max(1)).enumerate().take(self.len) {
                    f(t, row);
                }
            }
            Some(_) => {
                for t in 0..self.len {
                    f(t, &self.get(t)?);
                }
            }
        }
        Ok(())
    }
}

fn write_f64s(file: &mut File, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes).map_err(|e| Error::io("<trajectory spill>", e))
}

/// A training run: snapshots θ₀ … θ_T, the loss at each, and ‖θ_t‖.
#[derive(Debug)]
pub struct TrajectoryRecord {
    pub snapshots: SnapshotStore,
    pub losses: Vec<f64>,
    pub radii: Vec<f64>,
    /// Last parameter vector (always kept, even when snapshots are not).
    pub final_params: Vec<f64>,
    pub initial_params: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn epochs(&self) -> usize {
        self.losses.len().saturating_sub(1)
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trajectory has at least the initial loss")
    }

    pub fn best_loss(&self) -> f64 {
        self.losses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn params_at(&self, t: usize) -> Result<Vec<f64>> {
        self.snapshots.get(t)
    }

    pub fn has_snapshots(&self) -> bool {
        self.snapshots.len() == self.losses.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spill_preserves_snapshots() {
        let mut store = SnapshotStore::new(3, 8 * 7);
        for t in 0..10 {
            store.push(&[t as f64, -(t as f64), 0.5]).unwrap();
        }
        assert!(store.is_spilled());
        assert_eq!(store.get(0).unwrap(), vec![0.0, -0.0, 0.5]);
        assert_eq!(store.get(9).unwrap(), vec![9.0, -9.0, 0.5]);
        let mut seen = 0;
        store.for_each(|t, row| {
            assert_eq!(row[0], t as f64);
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, 10);
        assert!(store.get(10).is_err());
    }

    #[test]
    fn memory_store() {
        let mut store = SnapshotStore::new(2, DEFAULT_SPILL_BYTES);
        store.push(&[1.0, 2.0]).unwrap();
        assert!(!store.is_spilled());
        assert!(store.push(&[1.0]).is_err());
        assert_eq!(store.get(0).unwrap(), vec![1.0, 2.0]);
    }
}
