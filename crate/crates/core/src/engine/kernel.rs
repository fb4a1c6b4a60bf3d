use std::collections::BTreeSet;

use rayon::prelude::*;

use super::slice::{SliceFamily, StateSlice};
use crate::circuit::Gate;
use crate::error::{Error, Result};
use crate::linalg::{apply_matrix, Matrix};

/// Aggregate gate on at most `k_max` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    /// `qubits[0]` is the most significant operand of `unitary`.
    pub qubits: Vec<usize>,
    pub unitary: Matrix,
    /// Indices of the aggregated gates in the input list.
    pub members: Vec<usize>,
}

impl Kernel {
    /// Product of `gates` (applied in order) embedded on `qubits`.
    pub fn from_gates<'a>(
        qubits: Vec<usize>,
        gates: impl IntoIterator<Item = (&'a [usize], &'a Matrix)>,
        members: Vec<usize>,
    ) -> Result<Self> {
        let width = qubits.len();
        let mut unitary = Matrix::identity(1 << width);
        for (operands, m) in gates {
            let positions = operands
                .iter()
                .map(|q| {
                    qubits.iter().position(|k| k == q).ok_or_else(|| {
                        Error::KernelTooWide {
                            support: operands.to_vec(),
                            k_max: width,
                        }
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            unitary = Matrix::embed(m, &positions, width).matmul(&unitary);
        }
        Ok(Self {
            qubits,
            unitary,
            members,
        })
    }

    pub fn width(&self) -> usize {
        self.qubits.len()
    }
}

/// Greedy order-preserving grouping of gate supports. A gate joins the open
/// group when the union stays within `k_max` qubits and it shares no qubit
/// with a gate skipped earlier in the scan. Each group lists its qubits in
/// ascending order and its members in input order.
pub fn aggregate_supports(
    supports: &[Vec<usize>],
    k_max: usize,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if let Some(s) = supports.iter().find(|s| s.len() > k_max) {
        return Err(Error::KernelTooWide {
            support: s.clone(),
            k_max,
        });
    }
    let mut taken = vec![false; supports.len()];
    let mut groups = Vec::new();
    for start in 0..supports.len() {
        if taken[start] {
            continue;
        }
        taken[start] = true;
        let mut qubits: BTreeSet<usize> = supports[start].iter().copied().collect();
        let mut members = vec![start];
        let mut blocked: BTreeSet<usize> = BTreeSet::new();
        for i in start + 1..supports.len() {
            if taken[i] {
                continue;
            }
            let s = &supports[i];
            let free = s.iter().all(|q| !blocked.contains(q));
            let union = qubits.len() + s.iter().filter(|q| !qubits.contains(q)).count();
            if free && union <= k_max {
                taken[i] = true;
                qubits.extend(s);
                members.push(i);
            } else {
                blocked.extend(s);
            }
        }
        groups.push((qubits.into_iter().collect(), members));
    }
    Ok(groups)
}

/// Aggregates `gates` into kernels of at most `k_max` qubits; the ordered
/// product of the kernels equals the ordered product of the gates.
pub fn aggregate(gates: &[Gate], k_max: usize) -> Result<Vec<Kernel>> {
    let supports: Vec<Vec<usize>> = gates.iter().map(|g| g.operands.clone()).collect();
    aggregate_supports(&supports, k_max)?
        .into_iter()
        .map(|(qubits, members)| {
            let parts = members
                .iter()
                .map(|&i| (gates[i].operands.as_slice(), &gates[i].unitary));
            Kernel::from_gates(qubits, parts, members.clone())
        })
        .collect()
}

fn kernel_bits(local: &[usize], kernel: &Kernel) -> Result<Vec<usize>> {
    kernel
        .qubits
        .iter()
        .map(|&q| {
            local
                .iter()
                .position(|&l| l == q)
                .ok_or(Error::Locality { qubit: q })
        })
        .collect()
}

/// Multiplies the kernel into every `2^k` sub-vector of the slice.
pub fn apply_kernel(slice: &mut StateSlice, kernel: &Kernel) -> Result<()> {
    let bits = kernel_bits(&slice.local_order, kernel)?;
    apply_matrix(&mut slice.amps, &bits, &kernel.unitary);
    Ok(())
}

/// Applies a kernel to every slice of a family, one slice per task.
pub fn apply_kernel_family(family: &mut SliceFamily, kernel: &Kernel) -> Result<()> {
    let bits = kernel_bits(family.local(), kernel)?;
    let len = family.slice_len();
    family
        .data_mut()
        .par_chunks_mut(len)
        .for_each(|s| apply_matrix(s, &bits, &kernel.unitary));
    Ok(())
}
