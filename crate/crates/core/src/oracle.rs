//! Dense full-state reference simulator.

use num_complex::Complex64 as C64;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::linalg::{apply_matrix, norm_sqr, ONE, ZERO};

/// Largest register the oracle will allocate (1 GiB of amplitudes).
pub const ORACLE_MAX_QUBITS: usize = 26;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl DenseState {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        if n > ORACLE_MAX_QUBITS {
            return Err(Error::QubitBudget {
                n,
                cap: ORACLE_MAX_QUBITS,
            });
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(Self { n_qubits: n, amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::SizeMismatch(amps.len(), amps.len().next_power_of_two()));
        }
        let n = amps.len().trailing_zeros() as usize;
        Ok(Self { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }
}

/// Evolves `|0...0>` through every gate of `circuit`, one at a time.
pub fn dense_simulate(circuit: &Circuit) -> Result<DenseState> {
    let mut state = DenseState::zero(circuit.n_qubits)?;
    for gate in circuit.gates() {
        apply_matrix(&mut state.amps, &gate.operands, &gate.unitary);
    }
    Ok(state)
}

/// Agreement between two states in a common bit order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub max_abs_diff: f64,
    pub fidelity: f64,
}

pub fn compare_states(a: &[C64], b: &[C64]) -> Result<Comparison> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    let mut max_abs_diff = 0.0f64;
    let mut overlap = ZERO;
    for (x, y) in a.iter().zip(b) {
        max_abs_diff = max_abs_diff.max((x - y).norm());
        overlap += x.conj() * y;
    }
    Ok(Comparison {
        max_abs_diff,
        fidelity: overlap.norm_sqr(),
    })
}
