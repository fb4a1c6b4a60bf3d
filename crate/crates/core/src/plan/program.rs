//! Validation and compilation of plans into tensor blocks and disk phases.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use super::{Mode, PlanStep, SimulationPlan};
use crate::circuit::Circuit;
use crate::tensornet::{EntanglementPair, IndexId};

/// Widest aggregate gate a cache may declare.
pub const K_MAX: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Header,
    Layout,
    Locality,
    Dependency,
    Entanglement,
    Discipline,
    Coverage,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Header => "header",
            ViolationKind::Layout => "layout",
            ViolationKind::Locality => "locality",
            ViolationKind::Dependency => "dependency",
            ViolationKind::Entanglement => "entanglement",
            ViolationKind::Discipline => "discipline",
            ViolationKind::Coverage => "coverage",
        };
        f.write_str(s)
    }
}

/// A problem found in a plan; `step` is 1-based, 0 means end of plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub step: usize,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.step == 0 {
            write!(f, "end of plan: {}: {}", self.kind, self.message)
        } else {
            write!(f, "step {}: {}: {}", self.step, self.kind, self.message)
        }
    }
}

/// A circuit gate referenced by a plan step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateRef {
    pub step: usize,
    /// Operands in circuit order when a circuit is attached, plan order otherwise.
    pub operands: Vec<usize>,
    pub circuit_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// A cache (or a lone gate) applied as one aggregate gate. `qubits[0]` is
    /// the most significant operand of the aggregate unitary.
    Kernel {
        step: usize,
        qubits: Vec<usize>,
        gates: Vec<GateRef>,
        cached: bool,
    },
    Ei {
        step: usize,
        qubit: usize,
        labels: EntanglementPair,
        gate: GateRef,
    },
    E2q {
        step: usize,
        a: usize,
        b: usize,
        labels: EntanglementPair,
        gate: GateRef,
    },
    All2All {
        step: usize,
        weight_exp: i32,
        global: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorBlock {
    pub name: String,
    pub step: usize,
    pub local: Vec<usize>,
    pub global: Vec<usize>,
    pub ops: Vec<Op>,
}

impl TensorBlock {
    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.local.iter().chain(&self.global).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreTensor {
    pub block: TensorBlock,
    pub labels: Vec<IndexId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiskPhase {
    pub step: usize,
    pub disk: Vec<usize>,
    pub read: Option<usize>,
    pub tensors: Vec<TensorBlock>,
    pub write: Option<usize>,
}

/// A validated plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub n_qubits: usize,
    pub index_qubits: Vec<usize>,
    pub pre: Vec<PreTensor>,
    pub phases: Vec<DiskPhase>,
}

impl Program {
    /// Total entanglement indices across the deferred gates.
    pub fn entanglement_bits(&self) -> usize {
        let labels: BTreeSet<IndexId> = self
            .pre
            .iter()
            .flat_map(|t| t.labels.iter().copied())
            .collect();
        labels.len()
    }

    pub fn disk_bits(&self) -> usize {
        self.phases.first().map_or(0, |p| p.disk.len())
    }
}

struct Current {
    block: TensorBlock,
    qubits: BTreeSet<usize>,
    actual_global: Vec<usize>,
    declared_labels: Option<Vec<IndexId>>,
    introduced: BTreeSet<IndexId>,
    pre: bool,
}

impl Current {
    fn is_local(&self, q: usize) -> bool {
        self.qubits.contains(&q) && !self.actual_global.contains(&q)
    }
}

struct Cache {
    step: usize,
    qubits: Vec<usize>,
    gates: Vec<GateRef>,
}

struct Compiler<'a> {
    plan: &'a SimulationPlan,
    circuit: Option<&'a Circuit>,
    queues: Option<Vec<VecDeque<usize>>>,
    violations: Vec<Violation>,
    current: Option<Current>,
    cache: Option<Cache>,
    pending: BTreeMap<usize, (usize, Option<usize>, GateRef)>,
    used_pairs: BTreeSet<usize>,
    pre: Vec<PreTensor>,
    pre_qubits: BTreeSet<usize>,
    phases: Vec<DiskPhase>,
    written: bool,
}

fn set(v: &[usize]) -> BTreeSet<usize> {
    v.iter().copied().collect()
}

fn as_qubits(args: &[i64]) -> Vec<usize> {
    args.iter().map(|&a| a as usize).collect()
}

impl<'a> Compiler<'a> {
    fn new(plan: &'a SimulationPlan, circuit: Option<&'a Circuit>) -> Self {
        let mut c = Self {
            plan,
            circuit,
            queues: None,
            violations: Vec::new(),
            current: None,
            cache: None,
            pending: BTreeMap::new(),
            used_pairs: BTreeSet::new(),
            pre: Vec::new(),
            pre_qubits: BTreeSet::new(),
            phases: Vec::new(),
            written: false,
        };
        if let Some(circ) = circuit {
            if circ.n_qubits != plan.n_qubits() {
                c.violate(
                    1,
                    ViolationKind::Header,
                    format!("circuit has {} qubits, plan {}", circ.n_qubits, plan.n_qubits()),
                );
            } else if !circ.is_two_qubit_only() {
                c.violate(
                    1,
                    ViolationKind::Header,
                    "circuit must contain only two-qubit gates; merge single-qubit gates first"
                        .into(),
                );
            } else {
                let mut queues = vec![VecDeque::new(); circ.n_qubits];
                for (i, g) in circ.gates().enumerate() {
                    for &q in &g.operands {
                        queues[q].push_back(i);
                    }
                }
                c.queues = Some(queues);
            }
        }
        let index = &plan.header().index_qubits;
        if set(index).len() != index.len() {
            c.violate(2, ViolationKind::Header, "repeated disk-index qubit".into());
        }
        c
    }

    fn violate(&mut self, step: usize, kind: ViolationKind, message: String) {
        self.violations.push(Violation { step, kind, message });
    }

    fn n(&self) -> usize {
        self.plan.n_qubits()
    }

    fn check_qubits(&mut self, step: usize, qs: &[usize]) -> bool {
        let n = self.n();
        if let Some(&q) = qs.iter().find(|&&q| q >= n) {
            self.violate(step, ViolationKind::Layout, format!("qubit {q} outside {n} qubits"));
            return false;
        }
        if set(qs).len() != qs.len() {
            self.violate(step, ViolationKind::Layout, format!("repeated qubit in {qs:?}"));
            return false;
        }
        true
    }

    fn head(&self, q: usize) -> Option<usize> {
        self.queues.as_ref().and_then(|qs| qs[q].front().copied())
    }

    fn pop(&mut self, q: usize) {
        if let Some(qs) = self.queues.as_mut() {
            qs[q].pop_front();
        }
    }

    fn circuit_operands(&self, idx: usize) -> Vec<usize> {
        self.circuit
            .expect("queues imply a circuit")
            .gates()
            .nth(idx)
            .expect("queued gate exists")
            .operands
            .clone()
    }

    /// Resolves a two-qubit gate step against the per-qubit queues.
    fn resolve_gate(&mut self, step: usize, x: usize, y: usize) -> GateRef {
        let plan_order = GateRef {
            step,
            operands: vec![x, y],
            circuit_index: None,
        };
        if self.queues.is_none() {
            return plan_order;
        }
        match (self.head(x), self.head(y)) {
            (Some(g), Some(h)) if g == h => {
                self.pop(x);
                self.pop(y);
                GateRef {
                    step,
                    operands: self.circuit_operands(g),
                    circuit_index: Some(g),
                }
            }
            _ => {
                self.violate(
                    step,
                    ViolationKind::Dependency,
                    format!("gate on ({x}, {y}) is not the next gate on both qubits"),
                );
                plan_order
            }
        }
    }

    fn flush_cache(&mut self) {
        if let Some(cache) = self.cache.take() {
            if cache.gates.is_empty() {
                self.violate(cache.step, ViolationKind::Layout, "cache holds no gates".into());
            }
            if let Some(cur) = self.current.as_mut() {
                cur.block.ops.push(Op::Kernel {
                    step: cache.step,
                    qubits: cache.qubits,
                    gates: cache.gates,
                    cached: true,
                });
            }
        }
    }

    fn close_tensor(&mut self, step: usize) {
        self.flush_cache();
        let Some(cur) = self.current.take() else { return };
        if cur.pre {
            let declared: BTreeSet<IndexId> =
                cur.declared_labels.iter().flatten().copied().collect();
            if declared != cur.introduced {
                self.violate(
                    cur.block.step,
                    ViolationKind::Entanglement,
                    format!(
                        "tensor {} declares entanglement labels {:?} but introduces {:?}",
                        cur.block.name,
                        labels(&declared),
                        labels(&cur.introduced)
                    ),
                );
            }
            self.pre.push(PreTensor {
                block: cur.block,
                labels: cur.declared_labels.unwrap_or_default(),
            });
        } else {
            if set(&cur.actual_global) != set(&cur.block.global) {
                self.violate(
                    step,
                    ViolationKind::Layout,
                    format!(
                        "tensor {} ends before an all2all establishes its global qubits",
                        cur.block.name
                    ),
                );
            }
            self.phases
                .last_mut()
                .expect("loop tensors live in a phase")
                .tensors
                .push(cur.block);
        }
    }

    fn in_loop(&self) -> bool {
        !self.phases.is_empty()
    }

    fn step(&mut self, step: usize, s: &PlanStep) {
        let args = &s.args;
        match (s.mode, s.gate.as_deref()) {
            (Mode::Define, _) => {}
            (Mode::New, Some("tensor")) => self.new_tensor(step, args),
            (Mode::New, Some("cache")) => self.new_cache(step, &as_qubits(&args[1..])),
            (Mode::New, Some(other)) => {
                self.violate(step, ViolationKind::Layout, format!("unknown new kind `{other}`"))
            }
            (Mode::Gate, _) => self.gate(step, args[0] as usize, args[1] as usize),
            (Mode::Entgl, Some("tensor")) => self.entgl_tensor(step, args),
            (Mode::Entgl, Some("EI")) => self.ei(step, args),
            (Mode::Entgl, Some("E2Q")) => self.e2q(step, args),
            (Mode::All2All, _) => self.all2all(step, args[0] as i32, &as_qubits(&args[1..])),
            (Mode::Slice, _) => self.slice(step, &as_qubits(args)),
            (Mode::Read, _) => self.read(step, &as_qubits(args)),
            (Mode::Write, _) => self.write(step, &as_qubits(args)),
            (mode, tag) => self.violate(
                step,
                ViolationKind::Layout,
                format!("unsupported step {mode} {tag:?}"),
            ),
        }
    }

    fn new_tensor(&mut self, step: usize, args: &[i64]) {
        self.close_tensor(step);
        let l = args[0] as usize;
        let qubits = as_qubits(&args[2..]);
        if !self.check_qubits(step, &qubits) {
            return;
        }
        let (local, global) = (qubits[..l].to_vec(), qubits[l..].to_vec());
        let pre = !self.in_loop();
        let name;
        let actual_global;
        if pre {
            if let Some(q) = qubits.iter().find(|q| self.pre_qubits.contains(q)) {
                self.violate(
                    step,
                    ViolationKind::Layout,
                    format!("qubit {q} already belongs to an earlier tensor"),
                );
            }
            self.pre_qubits.extend(&qubits);
            name = (self.pre.len() + 1).to_string();
            actual_global = global.clone();
        } else {
            let base = self.pre.len() + self.phases.len();
            let phase = self.phases.last().expect("in loop").clone();
            let expected: BTreeSet<usize> =
                (0..self.n()).filter(|q| !phase.disk.contains(q)).collect();
            if set(&qubits) != expected {
                self.violate(
                    step,
                    ViolationKind::Layout,
                    "in-loop tensor must cover every qubit outside the disk set".into(),
                );
            }
            if phase.write.is_some() {
                self.violate(step, ViolationKind::Discipline, "tensor after the phase's write".into());
            }
            let first = phase.tensors.is_empty();
            if first && self.phases.len() > 1 && phase.read.is_none() {
                self.violate(
                    step,
                    ViolationKind::Discipline,
                    "disk phase must read the stored slices before computing".into(),
                );
            }
            name = format!("{}.{}", base, base + phase.tensors.len());
            actual_global = if first {
                global.clone()
            } else {
                self.current_layout_hint().unwrap_or_default()
            };
        }
        self.current = Some(Current {
            block: TensorBlock {
                name,
                step,
                local,
                global,
                ops: Vec::new(),
            },
            qubits: set(&qubits),
            actual_global,
            declared_labels: None,
            introduced: BTreeSet::new(),
            pre,
        });
    }

    /// Global qubits of the data going into the next in-loop tensor of the
    /// current phase.
    fn current_layout_hint(&self) -> Option<Vec<usize>> {
        self.phases
            .last()
            .and_then(|p| p.tensors.last())
            .map(|t| t.global.clone())
    }

    fn new_cache(&mut self, step: usize, qubits: &[usize]) {
        self.flush_cache();
        if !self.check_qubits(step, qubits) {
            return;
        }
        if qubits.len() > K_MAX {
            self.violate(
                step,
                ViolationKind::Layout,
                format!("cache of {} qubits exceeds k_max = {K_MAX}", qubits.len()),
            );
        }
        match &self.current {
            None => self.violate(step, ViolationKind::Layout, "cache outside a tensor".into()),
            Some(cur) => {
                if let Some(&q) = qubits.iter().find(|&&q| !cur.is_local(q)) {
                    self.violate(
                        step,
                        ViolationKind::Locality,
                        format!("cache qubit {q} is not local in tensor {}", cur.block.name),
                    );
                }
            }
        }
        self.cache = Some(Cache {
            step,
            qubits: qubits.to_vec(),
            gates: Vec::new(),
        });
    }

    fn gate(&mut self, step: usize, x: usize, y: usize) {
        if !self.check_qubits(step, &[x, y]) {
            return;
        }
        let Some(cur) = &self.current else {
            self.violate(step, ViolationKind::Layout, "gate outside a tensor".into());
            return;
        };
        if let Some(q) = [x, y].into_iter().find(|&q| !cur.is_local(q)) {
            self.violate(
                step,
                ViolationKind::Locality,
                format!("qubit {q} is not local in tensor {}", cur.block.name),
            );
        }
        if let Some(cache) = &self.cache {
            if !cache.qubits.contains(&x) || !cache.qubits.contains(&y) {
                self.violate(
                    step,
                    ViolationKind::Layout,
                    format!("gate ({x}, {y}) outside its cache {:?}", cache.qubits),
                );
            }
        }
        let g = self.resolve_gate(step, x, y);
        match self.cache.as_mut() {
            Some(cache) => cache.gates.push(g),
            None => {
                let cur = self.current.as_mut().expect("checked above");
                cur.block.ops.push(Op::Kernel {
                    step,
                    qubits: g.operands.clone(),
                    gates: vec![g],
                    cached: false,
                });
            }
        }
    }

    fn pair_of(&mut self, step: usize, primed: i64, plain: i64) -> Option<EntanglementPair> {
        match (IndexId::from_plan_label(primed), IndexId::from_plan_label(plain)) {
            (
                Some(IndexId::Ent { pair: p, primed: true }),
                Some(IndexId::Ent { pair: q, primed: false }),
            ) if p == q => Some(EntanglementPair::new(p)),
            _ => {
                self.violate(
                    step,
                    ViolationKind::Entanglement,
                    format!("labels {primed} {plain} are not a matched (a', a) pair"),
                );
                None
            }
        }
    }

    fn entgl_tensor(&mut self, step: usize, args: &[i64]) {
        self.flush_cache();
        let ids: Vec<IndexId> = args.iter().filter_map(|&l| IndexId::from_plan_label(l)).collect();
        match self.current.as_mut() {
            Some(cur) if cur.pre => {
                if cur.declared_labels.is_some() {
                    self.violate(step, ViolationKind::Entanglement, "labels declared twice".into());
                } else if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
                    self.violate(step, ViolationKind::Entanglement, "repeated label".into());
                } else {
                    cur.declared_labels = Some(ids);
                }
            }
            _ => self.violate(
                step,
                ViolationKind::Entanglement,
                "entanglement labels belong to pre-loop tensors".into(),
            ),
        }
    }

    fn pre_tensor_for_entgl(&mut self, step: usize) -> bool {
        self.flush_cache();
        match &self.current {
            Some(cur) if cur.pre => true,
            _ => {
                self.violate(
                    step,
                    ViolationKind::Entanglement,
                    "EI/E2Q only allowed in pre-loop tensors".into(),
                );
                false
            }
        }
    }

    fn ei(&mut self, step: usize, args: &[i64]) {
        let a = args[0] as usize;
        if !self.check_qubits(step, &[a]) || !self.pre_tensor_for_entgl(step) {
            return;
        }
        let Some(labels) = self.pair_of(step, args[1], args[2]) else { return };
        if !self.used_pairs.insert(labels.pair()) {
            self.violate(
                step,
                ViolationKind::Entanglement,
                format!("labels {} {} already used", args[1], args[2]),
            );
            return;
        }
        let cur = self.current.as_ref().expect("checked");
        let (a_local, cur_name, cur_qubits) = (cur.is_local(a), cur.block.name.clone(), cur.qubits.clone());
        if !a_local {
            self.violate(
                step,
                ViolationKind::Locality,
                format!("qubit {a} is not local in tensor {cur_name}"),
            );
        }
        let mut gate = GateRef {
            step,
            operands: vec![a],
            circuit_index: None,
        };
        let mut partner = None;
        if self.queues.is_some() {
            match self.head(a) {
                Some(g) => {
                    let ops = self.circuit_operands(g);
                    let b = if ops[0] == a { ops[1] } else { ops[0] };
                    if cur_qubits.contains(&b) {
                        self.violate(
                            step,
                            ViolationKind::Entanglement,
                            format!("next gate on {a} does not leave tensor {cur_name}"),
                        );
                    }
                    self.pop(a);
                    partner = Some(b);
                    gate = GateRef {
                        step,
                        operands: ops,
                        circuit_index: Some(g),
                    };
                }
                None => self.violate(
                    step,
                    ViolationKind::Dependency,
                    format!("no gate left on qubit {a}"),
                ),
            }
        }
        let cur = self.current.as_mut().expect("checked");
        cur.introduced.insert(labels.primed);
        cur.introduced.insert(labels.plain);
        cur.block.ops.push(Op::Ei {
            step,
            qubit: a,
            labels,
            gate: gate.clone(),
        });
        self.pending.insert(labels.pair(), (a, partner, gate));
    }

    fn e2q(&mut self, step: usize, args: &[i64]) {
        let (a, b) = (args[0] as usize, args[1] as usize);
        if !self.check_qubits(step, &[a, b]) || !self.pre_tensor_for_entgl(step) {
            return;
        }
        let Some(labels) = self.pair_of(step, args[2], args[3]) else { return };
        let Some((ea, eb, ei_gate)) = self.pending.remove(&labels.pair()) else {
            self.violate(
                step,
                ViolationKind::Entanglement,
                format!("E2Q labels {} {} have no preceding EI", args[2], args[3]),
            );
            return;
        };
        if ea != a || eb.is_some_and(|eb| eb != b) {
            self.violate(
                step,
                ViolationKind::Entanglement,
                format!("E2Q on ({a}, {b}) does not match its EI on qubit {ea}"),
            );
        }
        let cur = self.current.as_ref().expect("checked");
        let (b_local, cur_name, a_inside) = (cur.is_local(b), cur.block.name.clone(), cur.qubits.contains(&a));
        if a_inside {
            self.violate(
                step,
                ViolationKind::Entanglement,
                format!("E2Q qubit {a} must belong to another tensor"),
            );
        }
        if !b_local {
            self.violate(
                step,
                ViolationKind::Locality,
                format!("qubit {b} is not local in tensor {cur_name}"),
            );
        }
        let mut gate = GateRef {
            step,
            operands: vec![a, b],
            circuit_index: None,
        };
        if let Some(g) = ei_gate.circuit_index {
            if self.head(b) == Some(g) {
                self.pop(b);
            } else {
                self.violate(
                    step,
                    ViolationKind::Dependency,
                    format!("deferred gate on ({a}, {b}) is not the next gate on qubit {b}"),
                );
            }
            gate = GateRef {
                step,
                operands: ei_gate.operands,
                circuit_index: Some(g),
            };
        }
        let cur = self.current.as_mut().expect("checked");
        cur.introduced.insert(labels.primed);
        cur.introduced.insert(labels.plain);
        cur.block.ops.push(Op::E2q {
            step,
            a,
            b,
            labels,
            gate,
        });
    }

    fn all2all(&mut self, step: usize, weight_exp: i32, global: &[usize]) {
        self.flush_cache();
        if !self.check_qubits(step, global) {
            return;
        }
        let Some(cur) = self.current.as_mut() else {
            self.violate(step, ViolationKind::Layout, "all2all outside a tensor".into());
            return;
        };
        let mut problems = Vec::new();
        if let Some(q) = global.iter().find(|q| !cur.qubits.contains(q)) {
            problems.push(format!("qubit {q} is not in tensor {}", cur.block.name));
        }
        if global.len() != cur.actual_global.len() {
            problems.push(format!(
                "exchange changes the global count from {} to {}",
                cur.actual_global.len(),
                global.len()
            ));
        }
        if set(global) == set(&cur.actual_global) {
            problems.push("all2all does not change the global set".into());
        }
        if !cur.pre && set(global) != set(&cur.block.global) {
            problems.push(format!(
                "all2all globals differ from tensor {}'s declared globals",
                cur.block.name
            ));
        }
        cur.actual_global = global.to_vec();
        cur.block.ops.push(Op::All2All {
            step,
            weight_exp,
            global: global.to_vec(),
        });
        for p in problems {
            self.violate(step, ViolationKind::Layout, p);
        }
    }

    fn slice(&mut self, step: usize, disk: &[usize]) {
        self.close_tensor(step);
        if !self.check_qubits(step, disk) {
            return;
        }
        let index = set(&self.plan.header().index_qubits);
        if let Some(q) = disk.iter().find(|q| !index.contains(q)) {
            self.violate(
                step,
                ViolationKind::Layout,
                format!("sliced qubit {q} is not a disk-index qubit"),
            );
        }
        if self.phases.is_empty() {
            self.check_no_pending(step);
        } else if self.phases.last().is_some_and(|p| p.write.is_none()) {
            self.violate(
                step,
                ViolationKind::Discipline,
                "disk phase ended without writing its slices".into(),
            );
        }
        self.phases.push(DiskPhase {
            step,
            disk: disk.to_vec(),
            read: None,
            tensors: Vec::new(),
            write: None,
        });
    }

    fn check_no_pending(&mut self, step: usize) {
        let open: Vec<usize> = self.pending.keys().copied().collect();
        for p in open {
            let l = EntanglementPair::new(p);
            self.violate(
                step,
                ViolationKind::Entanglement,
                format!(
                    "labels {} {} are never eliminated (EI without E2Q)",
                    l.primed.plan_label().unwrap(),
                    l.plain.plan_label().unwrap()
                ),
            );
        }
        self.pending.clear();
    }

    fn disk_step_phase(&mut self, step: usize, disk: &[usize], what: &str) -> bool {
        match self.phases.last() {
            None => {
                self.violate(step, ViolationKind::Discipline, format!("{what} outside a disk phase"));
                false
            }
            Some(p) if set(&p.disk) != set(disk) => {
                self.violate(
                    step,
                    ViolationKind::Discipline,
                    format!("{what} of {disk:?} does not match the sliced qubits {:?}", p.disk),
                );
                false
            }
            Some(_) => true,
        }
    }

    fn read(&mut self, step: usize, disk: &[usize]) {
        if !self.disk_step_phase(step, disk, "read") {
            return;
        }
        let written = self.written;
        let phase = self.phases.last_mut().expect("checked");
        let mut problems = Vec::new();
        if !written {
            problems.push("read of slices that were never written".to_string());
        }
        if phase.read.is_some() || !phase.tensors.is_empty() || self.current.is_some() {
            problems.push("read must open its disk phase, once".to_string());
        }
        phase.read = Some(step);
        for p in problems {
            self.violate(step, ViolationKind::Discipline, p);
        }
    }

    fn write(&mut self, step: usize, disk: &[usize]) {
        self.close_tensor(step);
        if !self.disk_step_phase(step, disk, "write") {
            return;
        }
        let phase = self.phases.last_mut().expect("checked");
        if phase.write.replace(step).is_some() {
            self.violate(step, ViolationKind::Discipline, "phase writes its slices twice".into());
        }
        self.written = true;
    }

    fn finish(mut self) -> (Program, Vec<Violation>) {
        self.close_tensor(0);
        self.check_no_pending(0);
        if let Some(queues) = &self.queues {
            let left: usize = queues.iter().map(VecDeque::len).sum();
            if left > 0 {
                let first = queues
                    .iter()
                    .enumerate()
                    .find(|(_, q)| !q.is_empty())
                    .map(|(q, _)| q)
                    .unwrap_or(0);
                self.violate(
                    0,
                    ViolationKind::Coverage,
                    format!("{left} gate slots never applied (first on qubit {first})"),
                );
            }
        }
        let header = self.plan.header();
        let program = Program {
            n_qubits: header.n_qubits,
            index_qubits: header.index_qubits.clone(),
            pre: self.pre,
            phases: self.phases,
        };
        (program, self.violations)
    }
}

fn labels(ids: &BTreeSet<IndexId>) -> Vec<i64> {
    ids.iter().filter_map(IndexId::plan_label).collect()
}

/// All violations of `plan`, checked structurally and, when `circuit` is
/// given, against the circuit's gate order.
pub fn validate_plan(plan: &SimulationPlan, circuit: Option<&Circuit>) -> Vec<Violation> {
    run(plan, circuit).1
}

/// Compiles a plan, failing with the full violation list.
pub fn compile(
    plan: &SimulationPlan,
    circuit: Option<&Circuit>,
) -> std::result::Result<Program, Vec<Violation>> {
    let (program, violations) = run(plan, circuit);
    if violations.is_empty() {
        Ok(program)
    } else {
        Err(violations)
    }
}

fn run(plan: &SimulationPlan, circuit: Option<&Circuit>) -> (Program, Vec<Violation>) {
    let mut c = Compiler::new(plan, circuit);
    for (i, s) in plan.steps().iter().enumerate() {
        c.step(i + 1, s);
    }
    c.finish()
}
