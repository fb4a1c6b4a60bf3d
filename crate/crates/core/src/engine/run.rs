use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{apply_kernel_family, Kernel};
use super::slice::SliceFamily;
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{ONE, ZERO};
use crate::plan::{
    compile, contraction_flops, GateRef, Op, PhaseKind, PlanSummary, PreTensor, Program, SimulationPlan, Violation,
};
use crate::storage::{FileIndexScheme, SliceStore};
use crate::tensornet::{
    contract_tensors, entangle_gate, entangle_identity, IndexId, IndexKind, Tensor,
};

/// Counts observed while executing one phase, per disk slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub name: String,
    pub kernels: u64,
    pub gates: u64,
    pub all2alls: f64,
    pub transfers: u64,
}

impl PhaseTrace {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kernels: 0,
            gates: 0,
            all2alls: 0.0,
            transfers: 0,
        }
    }

    fn disk(name: &str) -> Self {
        Self {
            transfers: 1,
            all2alls: 1.0,
            ..Self::new(name)
        }
    }
}

/// Execution trace of a plan run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub n_qubits: usize,
    pub disk_slices: u64,
    pub phases: Vec<PhaseTrace>,
    pub contraction_flops: f64,
    /// The plan left the state in memory and the engine wrote it out.
    pub final_flush: bool,
}

impl Trace {
    pub fn transfers(&self) -> u64 {
        self.phases.iter().map(|p| p.transfers).sum()
    }

    pub fn all2alls(&self) -> f64 {
        self.phases.iter().map(|p| p.all2alls).sum()
    }

    pub fn kernels(&self) -> u64 {
        self.phases.iter().map(|p| p.kernels).sum()
    }

    /// True when every counted row agrees with the plan summary.
    pub fn matches(&self, summary: &PlanSummary) -> bool {
        let rows: Vec<_> = summary
            .phases
            .iter()
            .filter(|p| p.kind != PhaseKind::Contraction)
            .collect();
        rows.len() == self.phases.len()
            && rows.iter().zip(&self.phases).all(|(s, t)| {
                s.name == t.name
                    && u64::from(s.kernels) == t.kernels
                    && u64::from(s.gates) == t.gates
                    && u64::from(s.transfers) == t.transfers
                    && (s.all2alls - t.all2alls).abs() < 1e-12
            })
            && (summary.contraction_flops() - self.contraction_flops).abs() < 1e-6
            && summary.disk_slices == self.disk_slices
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn violation_error(violations: &[Violation]) -> Error {
    let first = &violations[0];
    let mut message = format!("{}: {}", first.kind, first.message);
    for v in &violations[1..] {
        message.push_str(&format!("; {v}"));
    }
    Error::PlanStep {
        step: first.step,
        message,
    }
}

fn at(step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        e @ Error::PlanStep { .. } => e,
        e => Error::PlanStep {
            step,
            message: e.to_string(),
        },
    }
}

fn circuit_gate<'a>(gates: &[&'a Gate], r: &GateRef) -> Result<&'a Gate> {
    r.circuit_index
        .and_then(|i| gates.get(i).copied())
        .ok_or_else(|| Error::PlanStep {
            step: r.step,
            message: "gate is not bound to the circuit".into(),
        })
}

fn build_kernel(qubits: &[usize], refs: &[GateRef], gates: &[&Gate]) -> Result<Kernel> {
    let members = refs
        .iter()
        .map(|r| circuit_gate(gates, r))
        .collect::<Result<Vec<_>>>()?;
    Kernel::from_gates(
        qubits.to_vec(),
        members.iter().map(|g| (g.operands.as_slice(), &g.unitary)),
        refs.iter().filter_map(|r| r.circuit_index).collect(),
    )
}

fn run_pre_tensor(t: &PreTensor, gates: &[&Gate], row: &mut PhaseTrace) -> Result<Tensor> {
    let qubits: Vec<usize> = t.block.qubits().collect();
    let mut data = vec![ZERO; 1 << qubits.len()];
    data[0] = ONE;
    let mut tensor = Tensor::new(qubits.iter().map(|&q| IndexId::Qubit(q)).collect(), data)?;
    let mut global: BTreeSet<usize> = t.block.global.iter().copied().collect();
    for op in &t.block.ops {
        match op {
            Op::Kernel {
                step,
                qubits,
                gates: refs,
                ..
            } => {
                if let Some(&q) = qubits.iter().find(|q| global.contains(q)) {
                    return Err(at(*step)(Error::Locality { qubit: q }));
                }
                let k = build_kernel(qubits, refs, gates).map_err(at(*step))?;
                let targets: Vec<IndexId> = k.qubits.iter().map(|&q| IndexId::Qubit(q)).collect();
                tensor.apply(&targets, &k.unitary).map_err(at(*step))?;
                row.kernels += 1;
                row.gates += refs.len() as u64;
            }
            Op::Ei {
                step,
                qubit,
                labels,
                ..
            } => tensor = entangle_identity(&tensor, *qubit, *labels).map_err(at(*step))?,
            Op::E2q {
                step,
                a,
                b,
                labels,
                gate,
            } => {
                let g = circuit_gate(gates, gate)?;
                let a_first = g.operands[0] == *a;
                tensor = entangle_gate(&tensor, &g.unitary, a_first, *b, *labels).map_err(at(*step))?;
                row.gates += 1;
            }
            Op::All2All {
                global: g,
                weight_exp,
                ..
            } => {
                global = g.iter().copied().collect();
                row.all2alls += 2f64.powi(*weight_exp);
            }
        }
    }
    Ok(tensor)
}

/// Eliminates the entanglement indices shared by the pre-loop tensors for one
/// assignment of the `pinned` qubits, producing the slice family with the
/// given layout. Qubits outside every tensor start in `|0>`.
pub fn apply_deferred_contraction(
    tensors: &[Tensor],
    pinned: &BTreeMap<usize, u8>,
    global: &[usize],
    local: &[usize],
) -> Result<SliceFamily> {
    let mut parts = Vec::with_capacity(tensors.len());
    let mut covered = BTreeSet::new();
    let mut ent_count: BTreeMap<IndexId, usize> = BTreeMap::new();
    for t in tensors {
        let mut cur = t.clone();
        for i in t.indices() {
            match i {
                IndexId::Qubit(q) => {
                    covered.insert(*q);
                    if let Some(&v) = pinned.get(q) {
                        cur = cur.fix(*i, usize::from(v))?;
                    }
                }
                i if i.kind() == IndexKind::Entanglement => *ent_count.entry(*i).or_default() += 1,
                _ => {}
            }
        }
        parts.push(cur);
    }
    for (i, c) in &ent_count {
        let partnered = ent_count.contains_key(&i.partner().expect("entanglement index"));
        if *c != 2 || !partnered {
            return Err(Error::Entanglement(format!(
                "label {} appears in {c} tensor(s){}",
                i.plan_label().unwrap_or_default(),
                if partnered { "" } else { " without its partner" }
            )));
        }
    }
    let zero = pinned.iter().any(|(q, &v)| !covered.contains(q) && v == 1);
    for &q in local.iter().chain(global) {
        if !covered.contains(&q) {
            parts.push(Tensor::ket_zero(IndexId::Qubit(q)));
        }
    }
    let keep: BTreeSet<IndexId> = local.iter().chain(global).map(|&q| IndexId::Qubit(q)).collect();
    let result = if parts.is_empty() {
        Tensor::scalar(ONE)
    } else {
        contract_tensors(parts, &keep)?
    };
    let order: Vec<IndexId> = local.iter().chain(global).map(|&q| IndexId::Qubit(q)).collect();
    let mut data = result.permuted(&order)?.into_data();
    if zero {
        data.iter_mut().for_each(|a| *a = ZERO);
    }
    SliceFamily::new(pinned.clone(), global.to_vec(), local.to_vec(), data)
}

fn scatter(value: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &p)| acc | (((value >> i) & 1) << p))
}

fn read_family(
    store: &SliceStore,
    scheme: &FileIndexScheme,
    pinned: BTreeMap<usize, u8>,
    files_global: &[usize],
    file_pos: &[usize],
    base_id: usize,
) -> Result<SliceFamily> {
    let blocks = (0..1usize << files_global.len())
        .into_par_iter()
        .map(|g| store.read_slice(base_id | scatter(g, file_pos)))
        .collect::<Result<Vec<_>>>()?;
    let data: Vec<C64> = blocks.into_iter().flatten().collect();
    SliceFamily::new(pinned, files_global.to_vec(), scheme.local_qubits().to_vec(), data)
}

fn write_family(store: &SliceStore, family: &SliceFamily, file_pos: &[usize], base_id: usize) -> Result<()> {
    (0..family.slice_count())
        .into_par_iter()
        .try_for_each(|g| store.write_slice(base_id | scatter(g, file_pos), family.slice(g)))
}

/// Validates `plan` against `circuit` and executes it, leaving the final
/// state in `store`.
pub fn run_plan(plan: &SimulationPlan, circuit: &Circuit, store: &mut SliceStore) -> Result<Trace> {
    let program = compile(plan, Some(circuit)).map_err(|v| violation_error(&v))?;
    run_program(&program, circuit, store)
}

/// Executes a program compiled against `circuit`.
pub fn run_program(program: &Program, circuit: &Circuit, store: &mut SliceStore) -> Result<Trace> {
    let gates: Vec<&Gate> = circuit.gates().collect();
    let n = program.n_qubits;
    let index = &program.index_qubits;
    let scheme = FileIndexScheme::for_register(n, index.clone())?;
    let mut trace = Trace {
        n_qubits: n,
        disk_slices: 1 << program.disk_bits(),
        ..Trace::default()
    };

    let mut pre = Vec::with_capacity(program.pre.len());
    for t in &program.pre {
        let mut row = PhaseTrace::new(&t.block.name);
        pre.push(run_pre_tensor(t, &gates, &mut row)?);
        trace.phases.push(row);
    }

    if program.phases.is_empty() {
        let all: Vec<usize> = (0..n).collect();
        let family = apply_deferred_contraction(&pre, &BTreeMap::new(), &[], &all)?;
        store.store_state(scheme, family.data())?;
        trace.final_flush = true;
        return Ok(trace);
    }

    for (pi, phase) in program.phases.iter().enumerate() {
        let flush = phase.write.is_none() && pi + 1 == program.phases.len();
        let writing = phase.write.is_some() || flush;
        let position = |q: &usize| index.iter().position(|i| i == q).expect("disk qubit is indexed");
        let files_global: Vec<usize> = index.iter().filter(|q| !phase.disk.contains(q)).copied().collect();
        let file_pos: Vec<usize> = files_global.iter().map(position).collect();
        let disk_pos: Vec<usize> = phase.disk.iter().map(position).collect();
        let (first_global, first_local): (Vec<usize>, Vec<usize>) = match phase.tensors.first() {
            Some(t) => {
                let mut local = t.local.clone();
                local.sort_unstable();
                (t.global.clone(), local)
            }
            None => (files_global.clone(), scheme.local_qubits().to_vec()),
        };

        let mut rows = Vec::new();
        if phase.read.is_some() {
            rows.push(PhaseTrace::disk("Disk read"));
        }
        let tensor_rows = rows.len();
        rows.extend(phase.tensors.iter().map(|t| PhaseTrace::new(&t.name)));
        if phase.write.is_some() {
            rows.push(PhaseTrace::disk("Disk write"));
        }

        if let Some(step) = phase.read {
            store.begin_read().map_err(at(step))?;
        }
        if writing {
            store
                .begin_write(scheme.clone())
                .map_err(at(phase.write.unwrap_or(phase.step)))?;
        }
        for d in 0..1usize << phase.disk.len() {
            let count = d == 0;
            let pinned: BTreeMap<usize, u8> = phase
                .disk
                .iter()
                .enumerate()
                .map(|(i, &q)| (q, ((d >> i) & 1) as u8))
                .collect();
            let base_id = scatter(d, &disk_pos);
            let mut family = match phase.read {
                Some(step) => read_family(store, &scheme, pinned, &files_global, &file_pos, base_id)
                    .and_then(|f| f.swap(&first_global))
                    .map_err(at(step))?,
                None => apply_deferred_contraction(&pre, &pinned, &first_global, &first_local)
                    .map_err(at(phase.step))?,
            };
            for (ti, t) in phase.tensors.iter().enumerate() {
                let row = &mut rows[tensor_rows + ti];
                for op in &t.ops {
                    match op {
                        Op::Kernel {
                            step,
                            qubits,
                            gates: refs,
                            ..
                        } => {
                            let k = build_kernel(qubits, refs, &gates).map_err(at(*step))?;
                            apply_kernel_family(&mut family, &k).map_err(at(*step))?;
                            if count {
                                row.kernels += 1;
                                row.gates += refs.len() as u64;
                            }
                        }
                        Op::All2All {
                            step,
                            weight_exp,
                            global,
                        } => {
                            family = family.swap(global).map_err(at(*step))?;
                            if count {
                                row.all2alls += 2f64.powi(*weight_exp);
                            }
                        }
                        Op::Ei { step, .. } | Op::E2q { step, .. } => {
                            return Err(Error::PlanStep {
                                step: *step,
                                message: "entanglement operation inside the disk loop".into(),
                            })
                        }
                    }
                }
            }
            if writing {
                let step = phase.write.unwrap_or(phase.step);
                let out = family.swap(&files_global).map_err(at(step))?;
                write_family(store, &out, &file_pos, base_id).map_err(at(step))?;
            }
        }
        if pi == 0 && !program.pre.is_empty() {
            trace.contraction_flops = contraction_flops(n, program.entanglement_bits());
        }
        if let Some(step) = phase.read {
            store.end_read().map_err(at(step))?;
        }
        if writing {
            store.end_write().map_err(at(phase.write.unwrap_or(phase.step)))?;
        }
        trace.final_flush |= flush;
        trace.phases.extend(rows);
    }
    Ok(trace)
}

/// Counts a program would produce, without touching any amplitudes.
pub fn dry_run(program: &Program) -> Trace {
    let mut trace = Trace {
        n_qubits: program.n_qubits,
        disk_slices: 1 << program.disk_bits(),
        ..Trace::default()
    };
    let count = |ops: &[Op], row: &mut PhaseTrace| {
        for op in ops {
            match op {
                Op::Kernel { gates, .. } => {
                    row.kernels += 1;
                    row.gates += gates.len() as u64;
                }
                Op::E2q { .. } => row.gates += 1,
                Op::Ei { .. } => {}
                Op::All2All { weight_exp, .. } => row.all2alls += 2f64.powi(*weight_exp),
            }
        }
    };
    for t in &program.pre {
        let mut row = PhaseTrace::new(&t.block.name);
        count(&t.block.ops, &mut row);
        trace.phases.push(row);
    }
    if !program.pre.is_empty() && !program.phases.is_empty() {
        trace.contraction_flops = contraction_flops(program.n_qubits, program.entanglement_bits());
    }
    for (pi, phase) in program.phases.iter().enumerate() {
        if phase.read.is_some() {
            trace.phases.push(PhaseTrace::disk("Disk read"));
        }
        for t in &phase.tensors {
            let mut row = PhaseTrace::new(&t.name);
            count(&t.ops, &mut row);
            trace.phases.push(row);
        }
        if phase.write.is_some() {
            trace.phases.push(PhaseTrace::disk("Disk write"));
        }
        trace.final_flush |= phase.write.is_none() && pi + 1 == program.phases.len();
    }
    trace.final_flush |= program.phases.is_empty();
    trace
}
