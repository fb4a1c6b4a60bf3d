//! Hypergraph tensor networks over binary indices.
//!
//! A tensor stores its entries densely, with bit `p` of the linear offset
//! holding the value of `indices[p]`. An index shared by several tensors is a
//! hyperedge: contracting a set of tensors sums each hyperedge that is
//! interior to the set once, with every incident slot tied to the same value.
//!
//! Contraction deferral between two sub-networks is expressed with the `EI`
//! and `E2Q` operations, which introduce a pair of entanglement indices
//! `(a', a)` instead of applying a bridging two-qubit gate right away.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{apply_matrix, Matrix, OffsetTable, ONE, ZERO};

/// Every index takes values in `{0, 1}`.
pub const INDEX_DIM: usize = 2;

/// Absolute tolerance for treating a computed entry as zero.
pub const ZERO_TOL: f64 = 1e-14;

/// Largest number of index pairs the separability search accepts.
pub const MAX_SEPARABLE_PAIRS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IndexId {
    /// Current index of a qubit line; open in a full network.
    Qubit(usize),
    /// Internal hyperedge between gates.
    Wire(usize),
    /// Entanglement index of deferred pair `pair`; `primed` marks `a'`.
    Ent { pair: usize, primed: bool },
    /// Temporary label used while building tensors.
    Scratch(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexKind {
    Open,
    Internal,
    Entanglement,
}

impl IndexId {
    pub fn kind(&self) -> IndexKind {
        match self {
            IndexId::Qubit(_) => IndexKind::Open,
            IndexId::Wire(_) | IndexId::Scratch(_) => IndexKind::Internal,
            IndexId::Ent { .. } => IndexKind::Entanglement,
        }
    }

    /// Negative label used in plan listings: `a'` of pair `p` is `-(2p + 1)`
    /// and `a` is `-(2p + 2)`.
    pub fn plan_label(&self) -> Option<i64> {
        match *self {
            IndexId::Ent { pair, primed } => {
                Some(-(2 * pair as i64 + if primed { 1 } else { 2 }))
            }
            _ => None,
        }
    }

    pub fn from_plan_label(label: i64) -> Option<IndexId> {
        if label >= 0 {
            return None;
        }
        let k = -label - 1;
        Some(IndexId::Ent {
            pair: (k / 2) as usize,
            primed: k % 2 == 0,
        })
    }

    /// The other member of an entanglement pair.
    pub fn partner(&self) -> Option<IndexId> {
        match *self {
            IndexId::Ent { pair, primed } => Some(IndexId::Ent {
                pair,
                primed: !primed,
            }),
            _ => None,
        }
    }
}

/// Dense complex tensor over binary indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    indices: Vec<IndexId>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn new(indices: Vec<IndexId>, data: Vec<C64>) -> Result<Self> {
        if data.len() != 1usize << indices.len() {
            return Err(Error::Tensor(format!(
                "{} entries for {} indices",
                data.len(),
                indices.len()
            )));
        }
        let distinct: BTreeSet<_> = indices.iter().collect();
        if distinct.len() != indices.len() {
            return Err(Error::Tensor(format!("repeated index in {indices:?}")));
        }
        Ok(Self { indices, data })
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            indices: Vec::new(),
            data: vec![value],
        }
    }

    /// Rank-1 tensor `|0>` on `index`.
    pub fn ket_zero(index: IndexId) -> Self {
        Self {
            indices: vec![index],
            data: vec![ONE, ZERO],
        }
    }

    /// Gate tensor with indices `outs ++ ins`.
    pub fn from_matrix(matrix: &Matrix, outs: &[IndexId], ins: &[IndexId]) -> Result<Self> {
        let k = outs.len();
        if ins.len() != k || matrix.dim() != 1 << k {
            return Err(Error::Tensor("gate tensor arity mismatch".into()));
        }
        let mut data = vec![ZERO; 1 << (2 * k)];
        for (off, v) in data.iter_mut().enumerate() {
            let (mut row, mut col) = (0, 0);
            for i in 0..k {
                row |= ((off >> i) & 1) << (k - 1 - i);
                col |= ((off >> (k + i)) & 1) << (k - 1 - i);
            }
            *v = matrix[(row, col)];
        }
        let indices = outs.iter().chain(ins).copied().collect();
        Self::new(indices, data)
    }

    /// Tensor over qubit indices `Qubit(0..n)` holding a state vector.
    pub fn from_state(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        Self::new((0..n).map(IndexId::Qubit).collect(), amps)
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[IndexId] {
        &self.indices
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn position(&self, index: IndexId) -> Option<usize> {
        self.indices.iter().position(|&i| i == index)
    }

    pub fn has(&self, index: IndexId) -> bool {
        self.position(index).is_some()
    }

    /// Entry at the given assignment of `(index, value)` pairs; every index
    /// must be assigned.
    pub fn entry(&self, assignment: &BTreeMap<IndexId, usize>) -> C64 {
        let off = self
            .indices
            .iter()
            .enumerate()
            .fold(0, |acc, (p, i)| acc | (assignment[i] << p));
        self.data[off]
    }

    pub fn entanglement_indices(&self) -> Vec<IndexId> {
        self.indices
            .iter()
            .copied()
            .filter(|i| i.kind() == IndexKind::Entanglement)
            .collect()
    }

    pub fn relabel(&mut self, from: IndexId, to: IndexId) -> Result<()> {
        if self.has(to) {
            return Err(Error::Tensor(format!("index {to:?} already present")));
        }
        let p = self
            .position(from)
            .ok_or_else(|| Error::Tensor(format!("index {from:?} not present")))?;
        self.indices[p] = to;
        Ok(())
    }

    /// Same tensor with its indices reordered to `order`.
    pub fn permuted(&self, order: &[IndexId]) -> Result<Tensor> {
        if order.len() != self.rank() {
            return Err(Error::Tensor(format!(
                "permutation of {} indices onto {}",
                self.rank(),
                order.len()
            )));
        }
        let strides = order
            .iter()
            .map(|&i| {
                self.position(i)
                    .map(|p| 1usize << p)
                    .ok_or_else(|| Error::Tensor(format!("index {i:?} not present")))
            })
            .collect::<Result<Vec<_>>>()?;
        let tables = OffsetTable::new(&strides);
        let data = (0..self.data.len())
            .map(|x| self.data[tables.offset(x)])
            .collect();
        Tensor::new(order.to_vec(), data)
    }

    /// Slice with `index` fixed to `value`.
    pub fn fix(&self, index: IndexId, value: usize) -> Result<Tensor> {
        let p = self
            .position(index)
            .ok_or_else(|| Error::Tensor(format!("index {index:?} not present")))?;
        let low = (1usize << p) - 1;
        let data = (0..self.data.len() / 2)
            .map(|x| self.data[((x & !low) << 1) | (value << p) | (x & low)])
            .collect();
        let mut indices = self.indices.clone();
        indices.remove(p);
        Tensor::new(indices, data)
    }

    /// Multiplies `matrix` into the tensor on `targets` (first target most
    /// significant).
    pub fn apply(&mut self, targets: &[IndexId], matrix: &Matrix) -> Result<()> {
        let bits = targets
            .iter()
            .map(|&t| {
                self.position(t)
                    .ok_or_else(|| Error::Tensor(format!("index {t:?} not present")))
            })
            .collect::<Result<Vec<_>>>()?;
        apply_matrix(&mut self.data, &bits, matrix);
        Ok(())
    }

    /// Dense state over `Qubit(0..n)` in the global bit order.
    pub fn to_state(&self, n: usize) -> Result<Vec<C64>> {
        let order: Vec<_> = (0..n).map(IndexId::Qubit).collect();
        Ok(self.permuted(&order)?.data)
    }
}

/// `C[out] = Σ_sum A[..] B[..]`. Indices shared by `a` and `b` that appear in
/// `out` are tied (hyperedge), not summed.
fn einsum2(a: &Tensor, b: &Tensor, out: &[IndexId], sum: &[IndexId]) -> Tensor {
    let stride = |t: &Tensor, i: &IndexId| t.position(*i).map_or(0, |p| 1usize << p);
    let out_a = OffsetTable::new(&out.iter().map(|i| stride(a, i)).collect::<Vec<_>>());
    let out_b = OffsetTable::new(&out.iter().map(|i| stride(b, i)).collect::<Vec<_>>());
    let sum_a: Vec<usize> = {
        let t = OffsetTable::new(&sum.iter().map(|i| stride(a, i)).collect::<Vec<_>>());
        (0..1usize << sum.len()).map(|s| t.offset(s)).collect()
    };
    let sum_b: Vec<usize> = {
        let t = OffsetTable::new(&sum.iter().map(|i| stride(b, i)).collect::<Vec<_>>());
        (0..1usize << sum.len()).map(|s| t.offset(s)).collect()
    };
    let mut data = vec![ZERO; 1usize << out.len()];
    data.par_iter_mut()
        .with_min_len(1 << 10)
        .enumerate()
        .for_each(|(o, v)| {
            let (oa, ob) = (out_a.offset(o), out_b.offset(o));
            let mut acc = ZERO;
            for (sa, sb) in sum_a.iter().zip(&sum_b) {
                acc += a.data[oa + sa] * b.data[ob + sb];
            }
            *v = acc;
        });
    Tensor {
        indices: out.to_vec(),
        data,
    }
}

/// Contracts two tensors. An index survives when `keep` says so; every other
/// index of either tensor is summed.
pub fn contract_pair(a: &Tensor, b: &Tensor, keep: impl Fn(&IndexId) -> bool) -> Tensor {
    let mut out = Vec::new();
    let mut sum = Vec::new();
    for i in a.indices.iter().chain(b.indices.iter().filter(|i| !a.has(**i))) {
        if keep(i) {
            out.push(*i);
        } else {
            sum.push(*i);
        }
    }
    einsum2(a, b, &out, &sum)
}

/// Contracts a list of tensors, keeping the indices in `keep` and summing
/// every other index once. Starting from the lowest-rank tensor, each step
/// merges the tensor that gives the lowest-rank intermediate.
pub fn contract_tensors(mut tensors: Vec<Tensor>, keep: &BTreeSet<IndexId>) -> Result<Tensor> {
    if tensors.is_empty() {
        return Err(Error::Tensor("nothing to contract".into()));
    }
    tensors.sort_by_key(Tensor::rank);
    let mut acc = tensors.remove(0);
    if tensors.is_empty() {
        // Sum any interior index of a lone tensor.
        let ones = Tensor::scalar(ONE);
        return Ok(contract_pair(&acc, &ones, |i| keep.contains(i)));
    }
    let mut uses: BTreeMap<IndexId, usize> = BTreeMap::new();
    for i in tensors.iter().flat_map(|t| t.indices.iter()) {
        *uses.entry(*i).or_default() += 1;
    }
    while !tensors.is_empty() {
        let survives = |i: &IndexId, next: &Tensor, uses: &BTreeMap<IndexId, usize>| {
            keep.contains(i) || uses.get(i).copied().unwrap_or(0) > usize::from(next.has(*i))
        };
        let result_rank = |next: &Tensor| {
            acc.indices
                .iter()
                .chain(next.indices.iter().filter(|i| !acc.has(**i)))
                .filter(|i| survives(i, next, &uses))
                .count()
        };
        let pick = (0..tensors.len())
            .min_by_key(|&k| (result_rank(&tensors[k]), tensors[k].rank()))
            .expect("non-empty");
        let next = tensors.swap_remove(pick);
        for i in &next.indices {
            *uses.get_mut(i).expect("counted") -= 1;
        }
        acc = contract_pair(&acc, &next, |i| keep.contains(i) || uses.get(i).is_some_and(|&u| u > 0));
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Tensors as nodes of a hypergraph; hyperedges are derived from shared indices.
#[derive(Clone, Debug, Default)]
pub struct TensorNetwork {
    nodes: BTreeMap<NodeId, Tensor>,
    open: BTreeSet<IndexId>,
    next: usize,
}

impl TensorNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, tensor: Tensor) -> NodeId {
        let id = NodeId(self.next);
        self.next += 1;
        self.nodes.insert(id, tensor);
        id
    }

    pub fn mark_open(&mut self, index: IndexId) {
        self.open.insert(index);
    }

    pub fn open_indices(&self) -> &BTreeSet<IndexId> {
        &self.open
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn tensor(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes.get(&id)
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.keys().copied().collect()
    }

    /// Map from every index to the set of tensors incident to it.
    pub fn hyperedges(&self) -> BTreeMap<IndexId, BTreeSet<NodeId>> {
        let mut edges: BTreeMap<IndexId, BTreeSet<NodeId>> = BTreeMap::new();
        for (&id, t) in &self.nodes {
            for &i in &t.indices {
                edges.entry(i).or_default().insert(id);
            }
        }
        edges
    }

    /// Renames an index everywhere it appears, turning it into part of the
    /// hyperedge `to` when that index already exists.
    pub fn rename_index(&mut self, from: IndexId, to: IndexId) -> Result<()> {
        for t in self.nodes.values_mut() {
            if let Some(p) = t.position(from) {
                if t.has(to) {
                    return Err(Error::Tensor(format!(
                        "rename {from:?} -> {to:?} would repeat an index"
                    )));
                }
                t.indices[p] = to;
            }
        }
        if self.open.remove(&from) {
            self.open.insert(to);
        }
        Ok(())
    }

    /// Replaces `nodes` by their contraction. Hyperedges whose incident
    /// tensors all lie in the selection (and which are not open) are summed;
    /// all other indices survive, so non-adjacent selections yield an outer
    /// product.
    pub fn contract(&mut self, nodes: &[NodeId]) -> Result<NodeId> {
        if nodes.is_empty() {
            return Err(Error::Tensor("empty contraction selection".into()));
        }
        let selected: BTreeSet<NodeId> = nodes.iter().copied().collect();
        if let Some(missing) = selected.iter().find(|n| !self.nodes.contains_key(n)) {
            return Err(Error::Tensor(format!("node {missing:?} not in network")));
        }
        let edges = self.hyperedges();
        let keep: BTreeSet<IndexId> = edges
            .iter()
            .filter(|(i, inc)| self.open.contains(i) || !inc.is_subset(&selected))
            .map(|(i, _)| *i)
            .collect();
        let tensors: Vec<Tensor> = selected
            .iter()
            .map(|n| self.nodes.remove(n).expect("checked above"))
            .collect();
        let result = contract_tensors(tensors, &keep)?;
        Ok(self.add(result))
    }

    /// Contracts every node into a single tensor over the open indices.
    pub fn contract_all(&mut self) -> Result<Tensor> {
        let ids = self.node_ids();
        let id = self.contract(&ids)?;
        Ok(self.nodes[&id].clone())
    }
}

/// One `|0>` tensor per qubit followed by one tensor per gate; qubit lines
/// become hyperedges and the final index of each qubit is `Qubit(q)`.
pub fn network_from_circuit(circuit: &Circuit) -> Result<TensorNetwork> {
    let n = circuit.n_qubits;
    let mut net = TensorNetwork::new();
    let mut wire = 0usize;
    let mut fresh = || {
        wire += 1;
        IndexId::Wire(wire - 1)
    };
    let mut current: Vec<IndexId> = Vec::with_capacity(n);
    let mut holder: Vec<NodeId> = Vec::with_capacity(n);
    for _ in 0..n {
        let w = fresh();
        holder.push(net.add(Tensor::ket_zero(w)));
        current.push(w);
    }
    for gate in circuit.gates() {
        let ins: Vec<IndexId> = gate.operands.iter().map(|&q| current[q]).collect();
        let outs: Vec<IndexId> = gate.operands.iter().map(|_| fresh()).collect();
        let id = net.add(Tensor::from_matrix(&gate.unitary, &outs, &ins)?);
        for (&q, &o) in gate.operands.iter().zip(&outs) {
            current[q] = o;
            holder[q] = id;
        }
    }
    for q in 0..n {
        let t = net.nodes.get_mut(&holder[q]).expect("holder exists");
        t.relabel(current[q], IndexId::Qubit(q))?;
        net.open.insert(IndexId::Qubit(q));
    }
    Ok(net)
}

fn check_pairing(tensor: &Tensor, pairing: &[(IndexId, IndexId)]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &(i, j) in pairing {
        for x in [i, j] {
            if !tensor.has(x) || !seen.insert(x) {
                return Err(Error::Tensor(format!("malformed pairing at {x:?}")));
            }
        }
    }
    if seen.len() != tensor.rank() {
        return Err(Error::Tensor("pairing does not cover every index".into()));
    }
    Ok(())
}

/// View of `tensor` as a matrix with rows indexed by the first members of
/// `pairing` and columns by the second members (bit k ↔ pair k).
fn as_pair_matrix(tensor: &Tensor, pairing: &[(IndexId, IndexId)]) -> Vec<Vec<C64>> {
    let m = pairing.len();
    let row_pos: Vec<usize> = pairing.iter().map(|p| tensor.position(p.0).unwrap()).collect();
    let col_pos: Vec<usize> = pairing.iter().map(|p| tensor.position(p.1).unwrap()).collect();
    (0..1usize << m)
        .map(|i| {
            (0..1usize << m)
                .map(|j| {
                    let off = (0..m).fold(0, |acc, k| {
                        acc | (((i >> k) & 1) << row_pos[k]) | (((j >> k) & 1) << col_pos[k])
                    });
                    tensor.data[off]
                })
                .collect()
        })
        .collect()
}

/// True when every entry with `i_k != j_k` for some pair is zero (within
/// [`ZERO_TOL`]).
pub fn is_diagonal(tensor: &Tensor, pairing: &[(IndexId, IndexId)]) -> Result<bool> {
    check_pairing(tensor, pairing)?;
    let a = as_pair_matrix(tensor, pairing);
    Ok(a.iter().enumerate().all(|(i, row)| {
        row.iter()
            .enumerate()
            .all(|(j, v)| i == j || v.norm() <= ZERO_TOL)
    }))
}

/// Output-bit functions `f_1..f_m` of a separable tensor, stored as the
/// permutation `j -> f(j)` of pair assignments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparableMap {
    m: usize,
    table: Vec<usize>,
}

impl SeparableMap {
    pub fn identity(m: usize) -> Self {
        Self {
            m,
            table: (0..1 << m).collect(),
        }
    }

    pub fn pairs(&self) -> usize {
        self.m
    }

    /// `f(j)` as a packed assignment of the first members of the pairs.
    pub fn image(&self, j: usize) -> usize {
        self.table[j]
    }

    /// `f_k(j)`.
    pub fn component(&self, k: usize, j: usize) -> usize {
        (self.table[j] >> k) & 1
    }

    pub fn is_identity(&self) -> bool {
        self.table.iter().enumerate().all(|(j, &f)| j == f)
    }

    /// When every `f_k` copies a single input bit, returns that bit for each `k`.
    pub fn bit_permutation(&self) -> Option<Vec<usize>> {
        (0..self.m)
            .map(|k| {
                (0..self.m).find(|&src| {
                    (0..1usize << self.m).all(|j| self.component(k, j) == (j >> src) & 1)
                })
            })
            .collect()
    }
}

/// Finds maps `f` such that the tensor is non-zero only where the first
/// members of the pairs equal `f` of the second members, with `f` a
/// permutation. Each column of the pair matrix may hold at most one non-zero
/// row; zero columns take the unused rows in order.
pub fn is_separable(
    tensor: &Tensor,
    pairing: &[(IndexId, IndexId)],
) -> Result<Option<SeparableMap>> {
    check_pairing(tensor, pairing)?;
    let m = pairing.len();
    if m > MAX_SEPARABLE_PAIRS {
        return Err(Error::SearchCapacity {
            rank: tensor.rank(),
            limit: 2 * MAX_SEPARABLE_PAIRS,
        });
    }
    let a = as_pair_matrix(tensor, pairing);
    let size = 1usize << m;
    let mut table = vec![usize::MAX; size];
    let mut used = vec![false; size];
    for j in 0..size {
        let rows: Vec<usize> = (0..size).filter(|&i| a[i][j].norm() > ZERO_TOL).collect();
        match rows.as_slice() {
            [] => {}
            [i] => {
                if std::mem::replace(&mut used[*i], true) {
                    return Ok(None);
                }
                table[j] = *i;
            }
            _ => return Ok(None),
        }
    }
    let mut free = (0..size).filter(|&i| !used[i]);
    for f in table.iter_mut().filter(|f| **f == usize::MAX) {
        *f = free.next().expect("as many free rows as free columns");
    }
    Ok(Some(SeparableMap { m, table }))
}

/// Hyperedge representation of a separable tensor whose maps are bit
/// permutations: the reduced tensor over the second members of the pairs,
/// plus the renames `(i_k, j_src)` that tie each first member to the input it
/// copies.
pub fn hyperedge_form(
    tensor: &Tensor,
    pairing: &[(IndexId, IndexId)],
    map: &SeparableMap,
) -> Result<(Tensor, Vec<(IndexId, IndexId)>)> {
    check_pairing(tensor, pairing)?;
    let perm = map
        .bit_permutation()
        .ok_or_else(|| Error::Tensor("separable map is not a bit permutation".into()))?;
    let m = pairing.len();
    let a = as_pair_matrix(tensor, pairing);
    let data = (0..1usize << m).map(|j| a[map.image(j)][j]).collect();
    let indices = pairing.iter().map(|p| p.1).collect();
    let renames = (0..m).map(|k| (pairing[k].0, pairing[perm[k]].1)).collect();
    Ok((Tensor::new(indices, data)?, renames))
}

/// Entanglement pair labels of a deferred gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntanglementPair {
    /// `a'`
    pub primed: IndexId,
    /// `a`
    pub plain: IndexId,
}

impl EntanglementPair {
    pub fn new(pair: usize) -> Self {
        Self {
            primed: IndexId::Ent { pair, primed: true },
            plain: IndexId::Ent { pair, primed: false },
        }
    }

    pub fn pair(&self) -> usize {
        match self.plain {
            IndexId::Ent { pair, .. } => pair,
            _ => unreachable!(),
        }
    }
}

/// `EI`: `phi'_{a'',a',a} = I_{a'',a'} phi_a`. The old qubit index becomes the
/// entanglement index `a` and the qubit continues on `a''`.
pub fn entangle_identity(phi: &Tensor, qubit: usize, labels: EntanglementPair) -> Result<Tensor> {
    let q = IndexId::Qubit(qubit);
    if !phi.has(q) {
        return Err(Error::Entanglement(format!("qubit {qubit} not in tensor")));
    }
    let mut relabeled = phi.clone();
    relabeled.relabel(q, labels.plain)?;
    let delta = Tensor::new(vec![q, labels.primed], vec![ONE, ZERO, ZERO, ONE])?;
    Ok(contract_pair(&relabeled, &delta, |_| true))
}

/// Tensor `2Q_{a',b'',a,b}` of a two-qubit gate acting on `a` and `b`, with the
/// input `b` left on `b_in`.
fn bridging_tensor(
    gate: &Matrix,
    a_first: bool,
    b: usize,
    labels: EntanglementPair,
    b_in: IndexId,
) -> Result<Tensor> {
    let (outs, ins) = if a_first {
        ([labels.primed, IndexId::Qubit(b)], [labels.plain, b_in])
    } else {
        ([IndexId::Qubit(b), labels.primed], [b_in, labels.plain])
    };
    Tensor::from_matrix(gate, &outs, &ins)
}

/// `E2Q`: `chi'_{b'',a',a} = Σ_b 2Q_{a',b'',a,b} chi_b`. `a_first` says whether
/// the EI-side qubit is the gate's first operand.
pub fn entangle_gate(
    chi: &Tensor,
    gate: &Matrix,
    a_first: bool,
    qubit_b: usize,
    labels: EntanglementPair,
) -> Result<Tensor> {
    if gate.dim() != 4 {
        return Err(Error::Entanglement("E2Q needs a two-qubit gate".into()));
    }
    let q = IndexId::Qubit(qubit_b);
    if !chi.has(q) {
        return Err(Error::Entanglement(format!("qubit {qubit_b} not in tensor")));
    }
    let scratch = IndexId::Scratch(0);
    let mut relabeled = chi.clone();
    relabeled.relabel(q, scratch)?;
    let bridge = bridging_tensor(gate, a_first, qubit_b, labels, scratch)?;
    Ok(contract_pair(&relabeled, &bridge, |i| *i != scratch))
}

/// Result of deferring a bridging gate.
#[derive(Clone, Debug)]
pub struct Deferred {
    pub phi: Tensor,
    pub chi: Tensor,
    pub labels: EntanglementPair,
}

fn next_pair(tensors: &[&Tensor]) -> usize {
    tensors
        .iter()
        .flat_map(|t| t.indices.iter())
        .filter_map(|i| match i {
            IndexId::Ent { pair, .. } => Some(pair + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0)
}

/// Defers a two-qubit gate bridging qubit `a` of `phi` and qubit `b` of `chi`.
pub fn defer_gate(gate: &Gate, phi: &Tensor, chi: &Tensor) -> Result<Deferred> {
    if gate.arity() != 2 {
        return Err(Error::Entanglement("only two-qubit gates are deferred".into()));
    }
    let (q0, q1) = (gate.operands[0], gate.operands[1]);
    let in_phi = |q| phi.has(IndexId::Qubit(q));
    let in_chi = |q| chi.has(IndexId::Qubit(q));
    let (a, b, a_first) = if in_phi(q0) && in_chi(q1) {
        (q0, q1, true)
    } else if in_phi(q1) && in_chi(q0) {
        (q1, q0, false)
    } else {
        return Err(Error::Entanglement(format!(
            "gate on ({q0}, {q1}) does not bridge the two tensors"
        )));
    };
    let labels = EntanglementPair::new(next_pair(&[phi, chi]));
    Ok(Deferred {
        phi: entangle_identity(phi, a, labels)?,
        chi: entangle_gate(chi, &gate.unitary, a_first, b, labels)?,
        labels,
    })
}

/// `ψ = Σ_{a',a} phi' chi'` over every entanglement pair the two tensors share.
pub fn eliminate_entanglement(phi: &Tensor, chi: &Tensor) -> Result<Tensor> {
    let ea: BTreeSet<_> = phi.entanglement_indices().into_iter().collect();
    let eb: BTreeSet<_> = chi.entanglement_indices().into_iter().collect();
    if ea != eb {
        return Err(Error::Entanglement(format!(
            "unpaired entanglement indices {:?}",
            ea.symmetric_difference(&eb).collect::<Vec<_>>()
        )));
    }
    if let Some(lonely) = ea.iter().find(|i| !ea.contains(&i.partner().unwrap())) {
        return Err(Error::Entanglement(format!("{lonely:?} has no partner")));
    }
    Ok(contract_pair(phi, chi, |i| i.kind() != IndexKind::Entanglement))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::std_gates;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn plan_labels_round_trip() {
        for l in -10..0 {
            let id = IndexId::from_plan_label(l).unwrap();
            assert_eq!(id.plan_label(), Some(l));
        }
        assert_eq!(
            IndexId::from_plan_label(-1),
            Some(IndexId::Ent { pair: 0, primed: true })
        );
        assert_eq!(IndexId::from_plan_label(0), None);
    }

    #[test]
    fn network_shapes() {
        let mut circ = Circuit::new(1);
        circ.push_layer(vec![Gate::new("h", vec![0], std_gates::hadamard()).unwrap()])
            .unwrap();
        let net = network_from_circuit(&circ).unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.hyperedges().len(), 2);
        assert_eq!(net.open_indices().len(), 1);

        let mut circ = Circuit::new(2);
        circ.push_layer(vec![Gate::new("cz", vec![0, 1], std_gates::cz()).unwrap()])
            .unwrap();
        let net = network_from_circuit(&circ).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.hyperedges().len(), 4);
        assert_eq!(net.open_indices().len(), 2);
    }

    #[test]
    fn matrix_product_and_outer_product() {
        let (i, j, k) = (IndexId::Wire(0), IndexId::Wire(1), IndexId::Wire(2));
        let a = Tensor::new(vec![i, j], vec![c(1.0), c(2.0), c(3.0), c(4.0)]).unwrap();
        let b = Tensor::new(vec![j, k], vec![c(5.0), c(6.0), c(7.0), c(8.0)]).unwrap();
        let mut net = TensorNetwork::new();
        let (na, nb) = (net.add(a.clone()), net.add(b.clone()));
        net.mark_open(i);
        net.mark_open(k);
        let id = net.contract(&[na, nb]).unwrap();
        let t = net.tensor(id).unwrap().permuted(&[i, k]).unwrap();
        // A[i][j] = data[i + 2j]; C[i][k] = Σ_j A[i][j] B[j][k]
        for ii in 0..2 {
            for kk in 0..2 {
                let want: C64 = (0..2)
                    .map(|jj| a.data()[ii + 2 * jj] * b.data()[jj + 2 * kk])
                    .sum();
                assert_eq!(t.data()[ii + 2 * kk], want);
            }
        }

        let mut net = TensorNetwork::new();
        let x = Tensor::new(vec![i], vec![c(1.0), c(2.0)]).unwrap();
        let y = Tensor::new(vec![k, j], vec![c(3.0); 4]).unwrap();
        let (nx, ny) = (net.add(x), net.add(y));
        for idx in [i, j, k] {
            net.mark_open(idx);
        }
        let id = net.contract(&[nx, ny]).unwrap();
        assert_eq!(net.tensor(id).unwrap().rank(), 3);
    }

    #[test]
    fn three_tensors_on_one_hyperedge() {
        let h = IndexId::Wire(9);
        let vals = [[1.0, 2.0], [3.0, -1.0], [0.5, 4.0]];
        let mut net = TensorNetwork::new();
        let ids: Vec<_> = vals
            .iter()
            .map(|v| net.add(Tensor::new(vec![h], vec![c(v[0]), c(v[1])]).unwrap()))
            .collect();
        let id = net.contract(&ids).unwrap();
        let want: C64 = (0..2).map(|x| c(vals[0][x]) * c(vals[1][x]) * c(vals[2][x])).sum();
        let t = net.tensor(id).unwrap();
        assert_eq!(t.rank(), 0);
        assert_eq!(t.data()[0], want);
    }

    #[test]
    fn contract_rejects_foreign_nodes() {
        let mut net = TensorNetwork::new();
        net.add(Tensor::scalar(ONE));
        assert!(net.contract(&[NodeId(42)]).is_err());
        assert!(net.contract(&[]).is_err());
    }

    fn gate_tensor(m: &Matrix) -> (Tensor, Vec<(IndexId, IndexId)>) {
        let outs = [IndexId::Wire(0), IndexId::Wire(1)];
        let ins = [IndexId::Wire(2), IndexId::Wire(3)];
        let t = Tensor::from_matrix(m, &outs, &ins).unwrap();
        (t, vec![(outs[0], ins[0]), (outs[1], ins[1])])
    }

    #[test]
    fn diagonal_checks() {
        let (t, p) = gate_tensor(&Matrix::identity(4));
        assert!(is_diagonal(&t, &p).unwrap());
        let (t, p) = gate_tensor(&std_gates::cz());
        assert!(is_diagonal(&t, &p).unwrap());
        let f = crate::circuit::fsim_unitary(&crate::circuit::GateParams::nominal());
        let (t, p) = gate_tensor(&f);
        assert!(!is_diagonal(&t, &p).unwrap());
        assert!(is_diagonal(&t, &p[..1]).is_err());
    }

    #[test]
    fn separability_of_swap_and_diagonal() {
        let (t, p) = gate_tensor(&std_gates::swap());
        let map = is_separable(&t, &p).unwrap().unwrap();
        for j in 0..4 {
            // f1(j1, j2) = j2, f2(j1, j2) = j1
            assert_eq!(map.component(0, j), (j >> 1) & 1);
            assert_eq!(map.component(1, j), j & 1);
        }
        let (t, p) = gate_tensor(&std_gates::cz());
        assert!(is_separable(&t, &p).unwrap().unwrap().is_identity());
    }

    #[test]
    fn separability_capacity() {
        let idx: Vec<IndexId> = (0..8).map(IndexId::Wire).collect();
        let t = Tensor::new(idx.clone(), vec![ONE; 256]).unwrap();
        let pairing: Vec<_> = (0..4).map(|k| (idx[k], idx[k + 4])).collect();
        assert!(matches!(
            is_separable(&t, &pairing),
            Err(Error::SearchCapacity { .. })
        ));
    }

    #[test]
    fn identity_deferral_collapses_to_outer_product() {
        let phi = Tensor::new(vec![IndexId::Qubit(0)], vec![c(0.6), C64::new(0.0, 0.8)]).unwrap();
        let chi = Tensor::new(vec![IndexId::Qubit(1)], vec![c(0.8), c(-0.6)]).unwrap();
        let g = Gate::new("id", vec![0, 1], Matrix::identity(4)).unwrap();
        let d = defer_gate(&g, &phi, &chi).unwrap();
        assert_eq!(d.phi.rank(), 3);
        assert_eq!(d.chi.rank(), 3);
        let psi = eliminate_entanglement(&d.phi, &d.chi).unwrap().to_state(2).unwrap();
        for (x, amp) in psi.iter().enumerate() {
            assert!((amp - phi.data()[x & 1] * chi.data()[x >> 1]).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_deferred_gates_is_outer_product() {
        let phi = Tensor::new(vec![IndexId::Qubit(0)], vec![c(1.0), c(2.0)]).unwrap();
        let chi = Tensor::new(vec![IndexId::Qubit(1)], vec![c(3.0), c(4.0)]).unwrap();
        let psi = eliminate_entanglement(&phi, &chi).unwrap().to_state(2).unwrap();
        assert_eq!(psi, vec![c(3.0), c(6.0), c(4.0), c(8.0)]);
    }

    #[test]
    fn unpaired_labels_are_rejected() {
        let phi = Tensor::new(vec![IndexId::Qubit(0)], vec![c(1.0), c(0.0)]).unwrap();
        let labels = EntanglementPair::new(0);
        let phi2 = entangle_identity(&phi, 0, labels).unwrap();
        let chi = Tensor::new(vec![IndexId::Qubit(1)], vec![c(1.0), c(0.0)]).unwrap();
        assert!(eliminate_entanglement(&phi2, &chi).is_err());
    }

    #[test]
    fn non_bridging_gate_is_rejected() {
        let phi = Tensor::ket_zero(IndexId::Qubit(0));
        let chi = Tensor::ket_zero(IndexId::Qubit(1));
        let g = Gate::new("cz", vec![0, 2], std_gates::cz()).unwrap();
        assert!(defer_gate(&g, &phi, &chi).is_err());
    }
}
