//! Greedy plan construction.
//!
//! The pre-loop stage splits the register into two tensors and defers up to
//! `max_deferred` crossing gates through entanglement labels. Every other gate
//! runs inside disk phases, which cycle through `disk_sets`; within a phase the
//! builder switches between the candidate global sets while that unlocks gates.

use std::collections::{BTreeSet, VecDeque};

use super::{Mode, PlanHeader, PlanStep, SimulationPlan, K_MAX};
use crate::circuit::Circuit;
use crate::engine::aggregate_supports;
use crate::error::{Error, Result};
use crate::tensornet::EntanglementPair;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleSpec {
    pub index_qubits: Vec<usize>,
    /// Qubits of the first pre-loop tensor; the second takes the rest. Empty
    /// skips the pre-loop stage.
    pub tensor1: Vec<usize>,
    pub max_deferred: usize,
    /// Sliced qubits per phase, used in rotation; all the same size.
    pub disk_sets: Vec<Vec<usize>>,
    /// Candidate global sets for each disk set; all the same size.
    pub socket_sets: Vec<Vec<Vec<usize>>>,
    pub k_max: usize,
}

impl ScheduleSpec {
    /// Three disjoint disk sets of `disk_bits` qubits from the bottom of the
    /// register and, for each, three disjoint global sets of `global_bits`
    /// qubits from the top of the rest. The first pre-loop tensor is the
    /// lower half.
    pub fn alternating(n: usize, disk_bits: usize, global_bits: usize) -> Result<Self> {
        if 3 * disk_bits > n || n < disk_bits + 3 * global_bits + 2 {
            return Err(Error::Schedule(format!(
                "{n} qubits cannot hold three disk sets of {disk_bits} and three global sets of {global_bits}"
            )));
        }
        let disk_sets: Vec<Vec<usize>> = (0..3)
            .map(|i| (i * disk_bits..(i + 1) * disk_bits).collect())
            .collect();
        let socket_sets = disk_sets
            .iter()
            .map(|d| {
                let rest: Vec<usize> = (0..n).rev().filter(|q| !d.contains(q)).collect();
                if global_bits == 0 {
                    vec![Vec::new()]
                } else {
                    rest.chunks(global_bits)
                        .take(3)
                        .map(|c| {
                            let mut c = c.to_vec();
                            c.sort_unstable();
                            c
                        })
                        .collect()
                }
            })
            .collect();
        Ok(Self {
            index_qubits: (0..3 * disk_bits).collect(),
            tensor1: (0..n / 2).collect(),
            max_deferred: 2,
            disk_sets,
            socket_sets,
            k_max: K_MAX,
        })
    }

    fn check(&self, n: usize) -> Result<()> {
        let err = |m: String| Err(Error::Schedule(m));
        let index: BTreeSet<usize> = self.index_qubits.iter().copied().collect();
        if index.len() != self.index_qubits.len() || index.iter().any(|&q| q >= n) {
            return err(format!("bad index qubits {:?}", self.index_qubits));
        }
        if self.disk_sets.is_empty() || self.disk_sets.len() != self.socket_sets.len() {
            return err("every disk set needs its list of global candidates".into());
        }
        if self.k_max < 2 || self.k_max > K_MAX {
            return err(format!("k_max must lie in 2..={K_MAX}"));
        }
        let d = self.disk_sets[0].len();
        let g = self.socket_sets[0].first().map_or(0, Vec::len);
        for (disk, sockets) in self.disk_sets.iter().zip(&self.socket_sets) {
            if disk.len() != d || disk.iter().any(|q| !index.contains(q)) {
                return err(format!("disk set {disk:?} is not {d} index qubits"));
            }
            if sockets.is_empty() {
                return err(format!("disk set {disk:?} has no global candidates"));
            }
            for s in sockets {
                let distinct: BTreeSet<&usize> = s.iter().collect();
                if s.len() != g
                    || distinct.len() != g
                    || s.iter().any(|q| *q >= n || disk.contains(q))
                {
                    return err(format!("global candidate {s:?} is invalid for disk set {disk:?}"));
                }
            }
        }
        if self.tensor1.iter().any(|&q| q >= n) {
            return err("tensor1 qubit outside the register".into());
        }
        Ok(())
    }
}

enum PreItem {
    Gate(usize),
    Ei { a: usize, pair: usize },
    E2q { a: usize, b: usize, pair: usize },
}

struct Emitter {
    steps: Vec<PlanStep>,
    ops: Vec<[usize; 2]>,
    k_max: usize,
}

fn args(qs: &[usize]) -> Vec<i64> {
    qs.iter().map(|&q| q as i64).collect()
}

impl Emitter {
    fn push(&mut self, mode: Mode, gate: Option<&str>, a: Vec<i64>) {
        self.steps.push(PlanStep::new(mode, gate, a));
    }

    fn tensor(&mut self, local: &[usize], global: &[usize]) {
        let mut a = vec![local.len() as i64, global.len() as i64];
        a.extend(args(local));
        a.extend(args(global));
        self.push(Mode::New, Some("tensor"), a);
    }

    fn gates(&mut self, run: &[usize]) -> Result<()> {
        let supports: Vec<Vec<usize>> = run.iter().map(|&i| self.ops[i].to_vec()).collect();
        for (qubits, members) in aggregate_supports(&supports, self.k_max)? {
            let mut a = vec![qubits.len() as i64];
            a.extend(args(&qubits));
            self.push(Mode::New, Some("cache"), a);
            for m in members {
                let [x, y] = self.ops[run[m]];
                self.push(Mode::Gate, Some("2Q"), args(&[x, y]));
            }
        }
        Ok(())
    }

    fn pre_tensor(&mut self, qubits: &[usize], items: &[PreItem], pairs: usize) -> Result<()> {
        self.tensor(qubits, &[]);
        if pairs > 0 {
            let labels = (0..pairs)
                .flat_map(|p| {
                    let l = EntanglementPair::new(p);
                    [l.primed, l.plain]
                })
                .filter_map(|i| i.plan_label())
                .collect();
            self.push(Mode::Entgl, Some("tensor"), labels);
        }
        let mut run = Vec::new();
        for item in items {
            let label = |pair| {
                let l = EntanglementPair::new(pair);
                [l.primed.plan_label().unwrap(), l.plain.plan_label().unwrap()]
            };
            match *item {
                PreItem::Gate(i) => {
                    run.push(i);
                    continue;
                }
                PreItem::Ei { a, pair } => {
                    self.gates(&std::mem::take(&mut run))?;
                    let [p, q] = label(pair);
                    self.push(Mode::Entgl, Some("EI"), vec![a as i64, p, q]);
                }
                PreItem::E2q { a, b, pair } => {
                    self.gates(&std::mem::take(&mut run))?;
                    let [p, q] = label(pair);
                    self.push(Mode::Entgl, Some("E2Q"), vec![a as i64, b as i64, p, q]);
                }
            }
        }
        self.gates(&run)
    }
}

/// Applies every ready gate avoiding `blocked`, in readiness order.
fn sweep(queues: &mut [VecDeque<usize>], ops: &[[usize; 2]], blocked: &BTreeSet<usize>) -> Vec<usize> {
    let mut done = Vec::new();
    loop {
        let before = done.len();
        for q in 0..queues.len() {
            let Some(&g) = queues[q].front() else { continue };
            let [x, y] = ops[g];
            if q != x || blocked.contains(&x) || blocked.contains(&y) || queues[y].front() != Some(&g) {
                continue;
            }
            queues[x].pop_front();
            queues[y].pop_front();
            done.push(g);
        }
        if done.len() == before {
            return done;
        }
    }
}

fn best_socket(
    queues: &[VecDeque<usize>],
    ops: &[[usize; 2]],
    disk: &[usize],
    sockets: &[Vec<usize>],
    skip: Option<&[usize]>,
) -> (usize, usize) {
    let mut best = (0, 0);
    for (i, s) in sockets.iter().enumerate() {
        if skip == Some(s.as_slice()) {
            continue;
        }
        let blocked: BTreeSet<usize> = disk.iter().chain(s).copied().collect();
        let n = sweep(&mut queues.to_vec(), ops, &blocked).len();
        if n > best.1 {
            best = (i, n);
        }
    }
    best
}

/// Builds a valid plan for a circuit of two-qubit gates.
pub fn build_plan(circuit: &Circuit, spec: &ScheduleSpec) -> Result<SimulationPlan> {
    let n = circuit.n_qubits;
    if !circuit.is_two_qubit_only() {
        return Err(Error::Schedule("merge single-qubit gates before scheduling".into()));
    }
    spec.check(n)?;
    let ops: Vec<[usize; 2]> = circuit.gates().map(|g| [g.operands[0], g.operands[1]]).collect();
    let mut e = Emitter {
        steps: Vec::new(),
        ops: ops.clone(),
        k_max: spec.k_max,
    };

    let t1: BTreeSet<usize> = spec.tensor1.iter().copied().collect();
    let mut loop_gates = Vec::new();
    if t1.is_empty() || t1.len() == n {
        loop_gates.extend(0..ops.len());
    } else {
        let mut blocked = vec![false; n];
        let (mut items1, mut items2) = (Vec::new(), Vec::new());
        let mut pairs = 0;
        for (i, &[x, y]) in ops.iter().enumerate() {
            if blocked[x] || blocked[y] {
                blocked[x] = true;
                blocked[y] = true;
                loop_gates.push(i);
                continue;
            }
            match (t1.contains(&x), t1.contains(&y)) {
                (true, true) => items1.push(PreItem::Gate(i)),
                (false, false) => items2.push(PreItem::Gate(i)),
                _ if pairs < spec.max_deferred => {
                    let (a, b) = if t1.contains(&x) { (x, y) } else { (y, x) };
                    items1.push(PreItem::Ei { a, pair: pairs });
                    items2.push(PreItem::E2q { a, b, pair: pairs });
                    pairs += 1;
                }
                _ => {
                    blocked[x] = true;
                    blocked[y] = true;
                    loop_gates.push(i);
                }
            }
        }
        let q1: Vec<usize> = t1.iter().copied().collect();
        let q2: Vec<usize> = (0..n).filter(|q| !t1.contains(q)).collect();
        e.pre_tensor(&q1, &items1, pairs)?;
        e.pre_tensor(&q2, &items2, pairs)?;
    }

    let mut queues = vec![VecDeque::new(); n];
    for &g in &loop_gates {
        for q in ops[g] {
            queues[q].push_back(g);
        }
    }
    let mut remaining = loop_gates.len();
    let mut d = 0;
    let mut first = true;
    loop {
        let disk = &spec.disk_sets[d];
        let sockets = &spec.socket_sets[d];
        e.push(Mode::Slice, None, args(disk));
        if !first {
            e.push(Mode::Read, None, args(disk));
        }
        first = false;
        let (mut s, _) = best_socket(&queues, &ops, disk, sockets, None);
        let mut fresh = true;
        loop {
            let global = &sockets[s];
            let local: Vec<usize> = (0..n).filter(|q| !disk.contains(q) && !global.contains(q)).collect();
            e.tensor(&local, global);
            if !fresh {
                e.push(Mode::All2All, None, std::iter::once(0).chain(args(global)).collect());
            }
            fresh = false;
            let blocked: BTreeSet<usize> = disk.iter().chain(global).copied().collect();
            let done = sweep(&mut queues, &ops, &blocked);
            remaining -= done.len();
            e.gates(&done)?;
            if remaining == 0 {
                break;
            }
            match best_socket(&queues, &ops, disk, sockets, Some(global)) {
                (next, gain) if gain > 0 => s = next,
                _ => break,
            }
        }
        e.push(Mode::Write, None, args(disk));
        if remaining == 0 {
            break;
        }
        let next = (0..spec.disk_sets.len())
            .filter(|&i| i != d)
            .map(|i| (i, best_socket(&queues, &ops, &spec.disk_sets[i], &spec.socket_sets[i], None).1))
            .max_by_key(|&(i, gain)| (gain, std::cmp::Reverse(i)));
        match next {
            Some((i, gain)) if gain > 0 => d = i,
            _ => {
                return Err(Error::Schedule(format!(
                    "{remaining} gates cannot be made local by any disk set"
                )))
            }
        }
    }
    SimulationPlan::new(
        PlanHeader {
            n_qubits: n,
            index_qubits: spec.index_qubits.clone(),
        },
        e.steps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_sycamore, merge_single_qubit_gates, QubitLayout};
    use crate::plan::validate_plan;

    #[test]
    fn alternating_sets_are_disjoint() {
        let s = ScheduleSpec::alternating(12, 2, 2).unwrap();
        assert_eq!(s.disk_sets, vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        assert_eq!(s.socket_sets[0], vec![vec![10, 11], vec![8, 9], vec![6, 7]]);
        assert!(ScheduleSpec::alternating(6, 2, 2).is_err());
    }

    #[test]
    fn built_plan_validates() {
        let layout = QubitLayout::sycamore_like(3, 4).unwrap();
        let c = merge_single_qubit_gates(&generate_sycamore(&layout, 8, 7).unwrap()).unwrap();
        let spec = ScheduleSpec::alternating(12, 1, 2).unwrap();
        let plan = build_plan(&c, &spec).unwrap();
        assert_eq!(validate_plan(&plan, Some(&c)), vec![]);
    }
}
