use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, OffsetTable};

/// Amplitudes for one assignment of the fixed (global and pinned) qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSlice {
    pub fixed: BTreeMap<usize, u8>,
    pub local_order: Vec<usize>,
    pub amps: Vec<C64>,
}

impl StateSlice {
    pub fn new(fixed: BTreeMap<usize, u8>, local_order: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1 << local_order.len() {
            return Err(Error::SliceLength {
                expected: 1 << local_order.len(),
                got: amps.len(),
            });
        }
        if let Some(q) = local_order.iter().find(|q| fixed.contains_key(q)) {
            return Err(Error::IncompleteFamily(format!("qubit {q} both fixed and local")));
        }
        Ok(Self {
            fixed,
            local_order,
            amps,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }
}

/// Every slice of a state for one assignment of the `pinned` qubits, stored
/// contiguously: slice `g` (bit `i` of `g` is the value of `global[i]`)
/// occupies `data[g << L .. (g + 1) << L]`, and bit `j` inside a slice is
/// `local[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceFamily {
    pinned: BTreeMap<usize, u8>,
    global: Vec<usize>,
    local: Vec<usize>,
    data: Vec<C64>,
}

impl SliceFamily {
    pub fn new(
        pinned: BTreeMap<usize, u8>,
        global: Vec<usize>,
        local: Vec<usize>,
        data: Vec<C64>,
    ) -> Result<Self> {
        let all: BTreeSet<usize> = global.iter().chain(&local).copied().collect();
        if all.len() != global.len() + local.len() || all.iter().any(|q| pinned.contains_key(q)) {
            return Err(Error::IncompleteFamily(format!(
                "pinned {:?}, global {global:?} and local {local:?} overlap",
                pinned.keys().collect::<Vec<_>>()
            )));
        }
        if data.len() != 1 << all.len() {
            return Err(Error::SliceLength {
                expected: 1 << all.len(),
                got: data.len(),
            });
        }
        Ok(Self {
            pinned,
            global,
            local,
            data,
        })
    }

    /// Family over a full `n`-qubit state (qubit `q` on bit `q`) with the
    /// given global qubits; locals are the rest, ascending.
    pub fn from_state(state: &[C64], global: Vec<usize>) -> Result<Self> {
        let n = state.len().trailing_zeros() as usize;
        let identity = Self::new(BTreeMap::new(), Vec::new(), (0..n).collect(), state.to_vec())?;
        identity.swap(&global)
    }

    pub fn pinned(&self) -> &BTreeMap<usize, u8> {
        &self.pinned
    }

    pub fn global(&self) -> &[usize] {
        &self.global
    }

    pub fn local(&self) -> &[usize] {
        &self.local
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn slice_len(&self) -> usize {
        1 << self.local.len()
    }

    pub fn slice_count(&self) -> usize {
        1 << self.global.len()
    }

    pub fn slice(&self, g: usize) -> &[C64] {
        let l = self.slice_len();
        &self.data[g * l..(g + 1) * l]
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.data)
    }

    fn fixed_for(&self, g: usize) -> BTreeMap<usize, u8> {
        let mut fixed = self.pinned.clone();
        for (i, &q) in self.global.iter().enumerate() {
            fixed.insert(q, ((g >> i) & 1) as u8);
        }
        fixed
    }

    pub fn slices(&self) -> Vec<StateSlice> {
        (0..self.slice_count())
            .map(|g| StateSlice {
                fixed: self.fixed_for(g),
                local_order: self.local.clone(),
                amps: self.slice(g).to_vec(),
            })
            .collect()
    }

    /// Reassembles a family from its slices; every assignment of `global`
    /// must appear exactly once and all other fixed values must agree.
    pub fn from_slices(global: Vec<usize>, slices: Vec<StateSlice>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::IncompleteFamily("no slices".into()))?;
        let local = first.local_order.clone();
        let mut pinned = first.fixed.clone();
        for q in &global {
            if pinned.remove(q).is_none() {
                return Err(Error::IncompleteFamily(format!("global qubit {q} not fixed")));
            }
        }
        let count = 1usize << global.len();
        let l = 1usize << local.len();
        let mut data = vec![C64::new(0.0, 0.0); count * l];
        let mut seen = vec![false; count];
        for s in slices {
            if s.local_order != local {
                return Err(Error::IncompleteFamily("slices disagree on local order".into()));
            }
            let mut g = 0;
            for (i, q) in global.iter().enumerate() {
                g |= usize::from(s.fixed[q]) << i;
            }
            if s.fixed.len() != pinned.len() + global.len()
                || pinned.iter().any(|(q, v)| s.fixed.get(q) != Some(v))
            {
                return Err(Error::IncompleteFamily("slices disagree on pinned qubits".into()));
            }
            if std::mem::replace(&mut seen[g], true) {
                return Err(Error::IncompleteFamily(format!("slice {g} given twice")));
            }
            data[g * l..(g + 1) * l].copy_from_slice(&s.amps);
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::IncompleteFamily(format!("slice {g} missing")));
        }
        Self::new(pinned, global, local, data)
    }

    /// Full state over qubits `0..n` (only for unpinned families).
    pub fn to_state(&self) -> Result<Vec<C64>> {
        if !self.pinned.is_empty() {
            return Err(Error::IncompleteFamily("pinned family is not a full state".into()));
        }
        let n = self.global.len() + self.local.len();
        let full = self.swap(&[])?;
        if full.local != (0..n).collect::<Vec<_>>() {
            return Err(Error::IncompleteFamily("qubits are not 0..n".into()));
        }
        Ok(full.data)
    }

    /// Re-buckets the amplitudes so `new_global` (in that order) addresses
    /// the slices; every basis state keeps its exact amplitude.
    pub fn swap(&self, new_global: &[usize]) -> Result<SliceFamily> {
        let old_pos: BTreeMap<usize, usize> = self
            .local
            .iter()
            .chain(&self.global)
            .enumerate()
            .map(|(p, &q)| (q, p))
            .collect();
        let wanted: BTreeSet<usize> = new_global.iter().copied().collect();
        if wanted.len() != new_global.len() {
            return Err(Error::IncompleteFamily(format!("repeated qubit in {new_global:?}")));
        }
        if let Some(q) = new_global.iter().find(|q| !old_pos.contains_key(q)) {
            return Err(Error::IncompleteFamily(format!("qubit {q} not in the family")));
        }
        let new_local: Vec<usize> = old_pos.keys().copied().filter(|q| !wanted.contains(q)).collect();
        if new_global == self.global.as_slice() && new_local == self.local {
            return Ok(self.clone());
        }
        let low_strides: Vec<usize> = new_local.iter().map(|q| 1 << old_pos[q]).collect();
        let high = OffsetTable::new(&new_global.iter().map(|q| 1 << old_pos[q]).collect::<Vec<_>>());
        // Leading new-local bits that keep their old position copy as runs.
        let run_bits = low_strides
            .iter()
            .enumerate()
            .take_while(|(j, &s)| s == 1 << j)
            .count();
        let low = OffsetTable::new(&low_strides[run_bits..]);
        let run = 1usize << run_bits;
        let chunk = 1usize << new_local.len();
        let mut data = vec![C64::new(0.0, 0.0); self.data.len()];
        data.par_chunks_mut(chunk).enumerate().for_each(|(g, out)| {
            let base = high.offset(g);
            for (r, dst) in out.chunks_mut(run).enumerate() {
                let src = base | low.offset(r);
                dst.copy_from_slice(&self.data[src..src + run]);
            }
        });
        Ok(SliceFamily {
            pinned: self.pinned.clone(),
            global: new_global.to_vec(),
            local: new_local,
            data,
        })
    }
}

/// Exchanges which qubits address slices; one simulated all-to-all.
pub fn global_local_swap(family: &SliceFamily, new_global: &[usize]) -> Result<SliceFamily> {
    family.swap(new_global)
}
