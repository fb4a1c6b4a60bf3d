//! Out-of-core amplitude store.
//!
//! The state is split into logical files indexed by the bit values of the
//! index qubits; each file holds the amplitudes of the remaining (local)
//! qubits in ascending qubit order. On disk an amplitude is a little-endian
//! `f32` real part followed by an `f32` imaginary part.
//!
//! Files are accessed in cycles: a write cycle must write every file exactly
//! once and a read cycle must read every file exactly once. A read cycle and
//! the following write cycle may be open at the same time, as long as no file
//! is read after it was rewritten.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DISK_BYTES_PER_AMP: usize = 8;
pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileIndexScheme {
    index_qubits: Vec<usize>,
    local_qubits: Vec<usize>,
}

impl FileIndexScheme {
    pub fn new(index_qubits: Vec<usize>, local_qubits: Vec<usize>) -> Result<Self> {
        let mut all: Vec<usize> = index_qubits.iter().chain(&local_qubits).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Assignment(format!(
                "index qubits {index_qubits:?} and local qubits {local_qubits:?} overlap"
            )));
        }
        if index_qubits.len() >= usize::BITS as usize {
            return Err(Error::Assignment("too many index qubits".into()));
        }
        Ok(Self {
            index_qubits,
            local_qubits,
        })
    }

    /// Scheme over `n` qubits whose locals are every non-index qubit, ascending.
    pub fn for_register(n: usize, index_qubits: Vec<usize>) -> Result<Self> {
        if let Some(&q) = index_qubits.iter().find(|&&q| q >= n) {
            return Err(Error::Assignment(format!("index qubit {q} outside {n} qubits")));
        }
        let locals = (0..n).filter(|q| !index_qubits.contains(q)).collect();
        Self::new(index_qubits, locals)
    }

    pub fn index_qubits(&self) -> &[usize] {
        &self.index_qubits
    }

    pub fn local_qubits(&self) -> &[usize] {
        &self.local_qubits
    }

    pub fn n_qubits(&self) -> usize {
        self.index_qubits.len() + self.local_qubits.len()
    }

    pub fn file_count(&self) -> usize {
        1 << self.index_qubits.len()
    }

    pub fn amps_per_file(&self) -> usize {
        1 << self.local_qubits.len()
    }

    pub fn file_bytes(&self) -> usize {
        self.amps_per_file() * DISK_BYTES_PER_AMP
    }

    /// Bit `i` of the id is the value of `index_qubits[i]`.
    pub fn file_id(&self, assignment: &BTreeMap<usize, u8>) -> Result<usize> {
        if assignment.len() != self.index_qubits.len() {
            return Err(Error::Assignment(format!(
                "{} bits assigned for {} index qubits",
                assignment.len(),
                self.index_qubits.len()
            )));
        }
        self.index_qubits
            .iter()
            .enumerate()
            .try_fold(0usize, |id, (i, q)| match assignment.get(q) {
                Some(&b) if b <= 1 => Ok(id | (usize::from(b) << i)),
                Some(&b) => Err(Error::Assignment(format!("bit value {b} for qubit {q}"))),
                None => Err(Error::Assignment(format!("index qubit {q} not assigned"))),
            })
    }

    pub fn assignment(&self, id: usize) -> BTreeMap<usize, u8> {
        self.index_qubits
            .iter()
            .enumerate()
            .map(|(i, &q)| (q, ((id >> i) & 1) as u8))
            .collect()
    }

    /// Splits a full state (qubit `q` on bit `q`) into per-file blocks.
    pub fn split_state(&self, state: &[C64]) -> Result<Vec<Vec<C64>>> {
        if state.len() != 1 << self.n_qubits() {
            return Err(Error::SizeMismatch(state.len(), 1 << self.n_qubits()));
        }
        Ok((0..self.file_count())
            .map(|id| {
                let base = self.base_offset(id);
                (0..self.amps_per_file())
                    .map(|l| state[base | self.local_offset(l)])
                    .collect()
            })
            .collect())
    }

    /// Inverse of [`split_state`](Self::split_state).
    pub fn assemble_state(&self, files: &[Vec<C64>]) -> Result<Vec<C64>> {
        if files.len() != self.file_count() {
            return Err(Error::SizeMismatch(files.len(), self.file_count()));
        }
        let mut state = vec![C64::new(0.0, 0.0); 1 << self.n_qubits()];
        for (id, amps) in files.iter().enumerate() {
            if amps.len() != self.amps_per_file() {
                return Err(Error::SliceLength {
                    expected: self.amps_per_file(),
                    got: amps.len(),
                });
            }
            let base = self.base_offset(id);
            for (l, a) in amps.iter().enumerate() {
                state[base | self.local_offset(l)] = *a;
            }
        }
        Ok(state)
    }

    fn base_offset(&self, id: usize) -> usize {
        self.index_qubits
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &q)| acc | (((id >> i) & 1) << q))
    }

    fn local_offset(&self, l: usize) -> usize {
        self.local_qubits
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &q)| acc | (((l >> i) & 1) << q))
    }
}

/// Encodes amplitudes as interleaved little-endian `f32` pairs.
pub fn encode_amplitudes(amps: &[C64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(amps.len() * DISK_BYTES_PER_AMP);
    for a in amps {
        out.extend_from_slice(&(a.re as f32).to_le_bytes());
        out.extend_from_slice(&(a.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_amplitudes(bytes: &[u8]) -> Result<Vec<C64>> {
    if !bytes.len().is_multiple_of(DISK_BYTES_PER_AMP) {
        return Err(Error::SliceLength {
            expected: bytes.len().next_multiple_of(DISK_BYTES_PER_AMP),
            got: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(DISK_BYTES_PER_AMP)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            C64::new(f64::from(re), f64::from(im))
        })
        .collect())
}

pub fn file_name(id: usize) -> String {
    format!("{id:08x}.amp")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub scheme: FileIndexScheme,
    /// Completed write cycles.
    pub write_cycles: usize,
    pub bytes_per_amp: usize,
}

#[derive(Debug)]
enum Backend {
    Disk { root: PathBuf },
    Memory { files: Mutex<Vec<Option<Vec<C64>>>> },
}

#[derive(Debug, Default)]
struct CycleState {
    reading: Option<Vec<bool>>,
    writing: Option<Vec<bool>>,
}

/// Logical-file store with either a single-precision disk backend or a
/// double-precision in-memory backend.
#[derive(Debug)]
pub struct SliceStore {
    backend: Backend,
    scheme: Option<FileIndexScheme>,
    write_cycles: usize,
    read_cycles: usize,
    cycles: Mutex<CycleState>,
}

impl SliceStore {
    /// Disk store rooted at `root` (created if needed). Any existing manifest
    /// is loaded so previously written files can be read back.
    pub fn disk(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let manifest_path = root.join(MANIFEST_NAME);
        let (scheme, write_cycles) = if manifest_path.exists() {
            let m: Manifest = toml::from_str(&fs::read_to_string(&manifest_path)?)?;
            (Some(m.scheme), m.write_cycles)
        } else {
            (None, 0)
        };
        Ok(Self {
            backend: Backend::Disk { root },
            scheme,
            write_cycles,
            read_cycles: 0,
            cycles: Mutex::default(),
        })
    }

    /// Disk store at `root` with any previous store contents (the manifest and
    /// files named like logical files) removed first. Other files are kept.
    pub fn disk_fresh(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if root.is_dir() {
            for entry in fs::read_dir(&root)? {
                let path = entry?.path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                let logical = name
                    .strip_suffix(".amp")
                    .is_some_and(|stem| stem.len() == 8 && stem.bytes().all(|b| b.is_ascii_hexdigit()));
                if logical || name == MANIFEST_NAME {
                    fs::remove_file(&path)?;
                }
            }
        }
        Self::disk(root)
    }

    pub fn memory() -> Self {
        Self {
            backend: Backend::Memory {
                files: Mutex::new(Vec::new()),
            },
            scheme: None,
            write_cycles: 0,
            read_cycles: 0,
            cycles: Mutex::default(),
        }
    }

    pub fn is_disk(&self) -> bool {
        matches!(self.backend, Backend::Disk { .. })
    }

    pub fn root(&self) -> Option<&Path> {
        match &self.backend {
            Backend::Disk { root } => Some(root),
            Backend::Memory { .. } => None,
        }
    }

    pub fn scheme(&self) -> Option<&FileIndexScheme> {
        self.scheme.as_ref()
    }

    pub fn write_cycles(&self) -> usize {
        self.write_cycles
    }

    pub fn read_cycles(&self) -> usize {
        self.read_cycles
    }

    /// True when a complete write cycle has been stored.
    pub fn has_data(&self) -> bool {
        self.write_cycles > 0
    }

    pub fn begin_write(&mut self, scheme: FileIndexScheme) -> Result<()> {
        let cycles = self.cycles.get_mut().expect("cycle lock poisoned");
        if cycles.writing.is_some() {
            return Err(Error::Discipline("write cycle already open".into()));
        }
        if let Some(old) = &self.scheme {
            if cycles.reading.is_some() && *old != scheme {
                return Err(Error::Discipline(
                    "file scheme changed while a read cycle is open".into(),
                ));
            }
        }
        cycles.writing = Some(vec![false; scheme.file_count()]);
        if let Backend::Memory { files } = &mut self.backend {
            let files = files.get_mut().expect("store lock poisoned");
            if files.len() != scheme.file_count() {
                *files = vec![None; scheme.file_count()];
            }
        }
        self.scheme = Some(scheme);
        Ok(())
    }

    pub fn write_slice(&self, id: usize, amps: &[C64]) -> Result<()> {
        let scheme = self
            .scheme
            .as_ref()
            .ok_or_else(|| Error::Discipline("write outside a write cycle".into()))?;
        if amps.len() != scheme.amps_per_file() {
            return Err(Error::SliceLength {
                expected: scheme.amps_per_file(),
                got: amps.len(),
            });
        }
        {
            let mut cycles = self.cycles.lock().expect("cycle lock poisoned");
            let written = cycles
                .writing
                .as_mut()
                .ok_or_else(|| Error::Discipline("write outside a write cycle".into()))?;
            let slot = written
                .get_mut(id)
                .ok_or_else(|| Error::Discipline(format!("file id {id} out of range")))?;
            if std::mem::replace(slot, true) {
                return Err(Error::Discipline(format!(
                    "file {id} written twice in one cycle"
                )));
            }
        }
        match &self.backend {
            Backend::Disk { root } => fs::write(root.join(file_name(id)), encode_amplitudes(amps))?,
            Backend::Memory { files } => {
                files.lock().expect("store lock poisoned")[id] = Some(amps.to_vec())
            }
        }
        Ok(())
    }

    pub fn end_write(&mut self) -> Result<()> {
        let cycles = self.cycles.get_mut().expect("cycle lock poisoned");
        let written = cycles
            .writing
            .take()
            .ok_or_else(|| Error::Discipline("no write cycle open".into()))?;
        if let Some(missing) = written.iter().position(|w| !w) {
            return Err(Error::Discipline(format!(
                "write cycle ended without writing file {missing}"
            )));
        }
        self.write_cycles += 1;
        if let Backend::Disk { root } = &self.backend {
            let manifest = Manifest {
                scheme: self.scheme.clone().expect("scheme set by begin_write"),
                write_cycles: self.write_cycles,
                bytes_per_amp: DISK_BYTES_PER_AMP,
            };
            fs::write(root.join(MANIFEST_NAME), toml::to_string(&manifest)?)?;
        }
        Ok(())
    }

    pub fn begin_read(&mut self) -> Result<()> {
        let cycles = self.cycles.get_mut().expect("cycle lock poisoned");
        if cycles.reading.is_some() {
            return Err(Error::Discipline("read cycle already open".into()));
        }
        if cycles.writing.is_some() {
            return Err(Error::Discipline("read cycle opened during a write cycle".into()));
        }
        if self.write_cycles == 0 {
            return Err(Error::Discipline("read before any completed write cycle".into()));
        }
        let count = self.scheme.as_ref().expect("written store has a scheme").file_count();
        cycles.reading = Some(vec![false; count]);
        Ok(())
    }

    pub fn read_slice(&self, id: usize) -> Result<Vec<C64>> {
        let scheme = self
            .scheme
            .as_ref()
            .ok_or_else(|| Error::Discipline("read outside a read cycle".into()))?;
        {
            let mut cycles = self.cycles.lock().expect("cycle lock poisoned");
            if cycles.writing.as_ref().and_then(|w| w.get(id)) == Some(&true) {
                return Err(Error::Discipline(format!(
                    "file {id} read after being rewritten in the open write cycle"
                )));
            }
            let read = cycles
                .reading
                .as_mut()
                .ok_or_else(|| Error::Discipline("read outside a read cycle".into()))?;
            let slot = read
                .get_mut(id)
                .ok_or_else(|| Error::Discipline(format!("file id {id} out of range")))?;
            if std::mem::replace(slot, true) {
                return Err(Error::Discipline(format!("file {id} read twice in one cycle")));
            }
        }
        let amps = match &self.backend {
            Backend::Disk { root } => {
                let path = root.join(file_name(id));
                if !path.exists() {
                    return Err(Error::MissingFile {
                        id,
                        root: root.clone(),
                    });
                }
                decode_amplitudes(&fs::read(path)?)?
            }
            Backend::Memory { files } => files.lock().expect("store lock poisoned")[id]
                .clone()
                .ok_or_else(|| Error::MissingFile {
                    id,
                    root: PathBuf::from("<memory>"),
                })?,
        };
        if amps.len() != scheme.amps_per_file() {
            return Err(Error::SliceLength {
                expected: scheme.amps_per_file(),
                got: amps.len(),
            });
        }
        Ok(amps)
    }

    pub fn end_read(&mut self) -> Result<()> {
        let cycles = self.cycles.get_mut().expect("cycle lock poisoned");
        let read = cycles
            .reading
            .take()
            .ok_or_else(|| Error::Discipline("no read cycle open".into()))?;
        if let Some(missing) = read.iter().position(|r| !r) {
            return Err(Error::Discipline(format!(
                "read cycle ended without reading file {missing}"
            )));
        }
        self.read_cycles += 1;
        Ok(())
    }

    /// Writes a full state as one complete write cycle.
    pub fn store_state(&mut self, scheme: FileIndexScheme, state: &[C64]) -> Result<()> {
        let files = scheme.split_state(state)?;
        self.begin_write(scheme)?;
        for (id, f) in files.iter().enumerate() {
            self.write_slice(id, f)?;
        }
        self.end_write()
    }

    /// Reads every file in one read cycle and reassembles the full state.
    pub fn load_state(&mut self) -> Result<Vec<C64>> {
        self.begin_read()?;
        let scheme = self.scheme.clone().expect("checked by begin_read");
        let files = (0..scheme.file_count())
            .map(|id| self.read_slice(id))
            .collect::<Result<Vec<_>>>()?;
        self.end_read()?;
        scheme.assemble_state(&files)
    }
}
