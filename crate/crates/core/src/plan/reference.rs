//! Reference plans for the 53- and 54-qubit Sycamore runs.
//!
//! Qubit sets, disk sets and socket slicings follow the published
//! partitioning; kernel and gate counts per tensor follow the published
//! tables. Gate lines inside each cache are synthetic (the original listings
//! are not available), so these plans validate structurally but are not
//! bound to a concrete circuit.

use std::ops::RangeInclusive;

use super::{Mode, PlanHeader, PlanStep, SimulationPlan};
use crate::tensornet::EntanglementPair;

/// One socket-sliced tensor: globals, kernel count and gate count.
struct Block {
    global: Vec<usize>,
    kernels: usize,
    gates: usize,
}

struct PreBlock {
    qubits: RangeInclusive<usize>,
    first_global: Vec<usize>,
    final_global: Vec<usize>,
    kernels: usize,
    gates: usize,
}

struct Layout {
    n: usize,
    disk_a: Vec<usize>,
    disk_b: Vec<usize>,
    deferred: usize,
    amortized_exp: i64,
    pre: [PreBlock; 2],
    /// Disk phases alternate A, B, A, ...
    phases: Vec<Vec<Block>>,
}

fn r(range: RangeInclusive<usize>) -> Vec<usize> {
    range.collect()
}

fn cat(parts: &[RangeInclusive<usize>]) -> Vec<usize> {
    parts.iter().cloned().flatten().collect()
}

fn args(qs: &[usize]) -> Vec<i64> {
    qs.iter().map(|&q| q as i64).collect()
}

fn labels(pair: usize) -> [i64; 2] {
    let l = EntanglementPair::new(pair);
    [l.primed.plan_label().unwrap(), l.plain.plan_label().unwrap()]
}

struct Writer {
    steps: Vec<PlanStep>,
}

impl Writer {
    fn push(&mut self, mode: Mode, gate: Option<&str>, a: Vec<i64>) {
        self.steps.push(PlanStep::new(mode, gate, a));
    }

    fn tensor(&mut self, local: &[usize], global: &[usize]) {
        let mut a = vec![local.len() as i64, global.len() as i64];
        a.extend(args(local));
        a.extend(args(global));
        self.push(Mode::New, Some("tensor"), a);
    }

    /// `kernels` caches over windows of five local qubits holding `gates`
    /// gates between them, spread as evenly as possible.
    fn kernels(&mut self, local: &[usize], kernels: usize, gates: usize, offset: usize) {
        assert!(gates >= kernels && local.len() >= 5);
        for k in 0..kernels {
            let count = gates / kernels + usize::from(k < gates % kernels);
            let start = (offset + 5 * k) % (local.len() - 4);
            let window = &local[start..start + 5];
            let mut a = vec![5];
            a.extend(args(window));
            self.push(Mode::New, Some("cache"), a);
            for g in 0..count {
                let i = g % 4;
                self.push(Mode::Gate, Some("2Q"), args(&[window[i], window[i + 1]]));
            }
        }
    }
}

fn complement(all: &[usize], minus: &[usize]) -> Vec<usize> {
    all.iter().copied().filter(|q| !minus.contains(q)).collect()
}

fn build(l: &Layout) -> SimulationPlan {
    let mut index = Vec::new();
    index.extend(&l.disk_a);
    index.extend(&l.disk_b);
    index.sort_unstable();
    let mut w = Writer { steps: Vec::new() };
    let pair_labels: Vec<i64> = (0..l.deferred).flat_map(labels).collect();

    let ei_qubits: Vec<usize>;
    {
        let t = &l.pre[0];
        let qubits = r(t.qubits.clone());
        let before = complement(&qubits, &t.first_global);
        let after = complement(&qubits, &t.final_global);
        let half = t.kernels / 2;
        let half_gates = t.gates * half / t.kernels;
        w.tensor(&before, &t.first_global);
        w.push(Mode::Entgl, Some("tensor"), pair_labels.clone());
        w.kernels(&before, half, half_gates, 0);
        let mut a = vec![l.amortized_exp];
        a.extend(args(&t.final_global));
        w.push(Mode::All2All, None, a);
        w.kernels(&after, t.kernels - half, t.gates - half_gates, 1);
        ei_qubits = after[..l.deferred].to_vec();
        for (p, &q) in ei_qubits.iter().enumerate() {
            let [x, y] = labels(p);
            w.push(Mode::Entgl, Some("EI"), vec![q as i64, x, y]);
        }
    }
    {
        let t = &l.pre[1];
        let qubits = r(t.qubits.clone());
        let before = complement(&qubits, &t.first_global);
        let after = complement(&qubits, &t.final_global);
        let gates = t.gates - l.deferred;
        let half = t.kernels / 2;
        let half_gates = gates * half / t.kernels;
        w.tensor(&before, &t.first_global);
        w.push(Mode::Entgl, Some("tensor"), pair_labels.clone());
        w.kernels(&before, half, half_gates, 0);
        let mut a = vec![l.amortized_exp];
        a.extend(args(&t.final_global));
        w.push(Mode::All2All, None, a);
        w.kernels(&after, t.kernels - half, gates - half_gates, 1);
        for (p, &a) in ei_qubits.iter().enumerate() {
            let [x, y] = labels(p);
            w.push(Mode::Entgl, Some("E2Q"), vec![a as i64, after[p] as i64, x, y]);
        }
    }

    let all: Vec<usize> = (0..l.n).collect();
    for (i, blocks) in l.phases.iter().enumerate() {
        let disk = if i % 2 == 0 { &l.disk_a } else { &l.disk_b };
        w.push(Mode::Slice, None, args(disk));
        if i > 0 {
            w.push(Mode::Read, None, args(disk));
        }
        let active = complement(&all, disk);
        for (j, b) in blocks.iter().enumerate() {
            let local = complement(&active, &b.global);
            w.tensor(&local, &b.global);
            if j > 0 {
                let mut a = vec![0];
                a.extend(args(&b.global));
                w.push(Mode::All2All, None, a);
            }
            w.kernels(&local, b.kernels, b.gates, j);
        }
        w.push(Mode::Write, None, args(disk));
    }

    SimulationPlan::new(
        PlanHeader {
            n_qubits: l.n,
            index_qubits: index,
        },
        w.steps,
    )
    .expect("reference plans are well formed")
}

fn block(global: Vec<usize>, kernels: usize, gates: usize) -> Block {
    Block { global, kernels, gates }
}

fn layout53(phases: Vec<Vec<Block>>) -> Layout {
    Layout {
        n: 53,
        disk_a: cat(&[0..=3, 49..=52]),
        disk_b: r(23..=30),
        deferred: 7,
        amortized_exp: -10,
        pre: [
            PreBlock {
                qubits: 0..=26,
                first_global: r(14..=26),
                final_global: r(0..=12),
                kernels: 28,
                gates: 84,
            },
            PreBlock {
                qubits: 27..=52,
                first_global: r(27..=39),
                final_global: r(40..=52),
                kernels: 25,
                gates: 84,
            },
        ],
        phases,
    }
}

/// 20-cycle, 53-qubit plan: three disk phases, five transfers.
pub fn sycamore53_20() -> SimulationPlan {
    build(&layout53(vec![
        vec![
            block(cat(&[4..=10, 43..=48]), 16, 63),
            block(r(4..=16), 6, 23),
            block(r(36..=48), 8, 26),
        ],
        vec![block(r(40..=52), 11, 49), block(r(0..=12), 10, 45)],
        vec![block(r(36..=48), 9, 35), block(r(4..=16), 7, 21)],
    ]))
}

/// 10-cycle, 53-qubit plan: the first disk phase only. The per-tensor gate
/// split is not published; only the 12 loop kernels and one write are.
pub fn sycamore53_10() -> SimulationPlan {
    build(&layout53(vec![vec![
        block(cat(&[4..=10, 43..=48]), 6, 24),
        block(r(4..=16), 3, 11),
        block(r(36..=48), 3, 10),
    ]]))
}

/// 20-cycle, 54-qubit plan: three disk phases, five transfers.
pub fn sycamore54_20() -> SimulationPlan {
    build(&Layout {
        n: 54,
        disk_a: cat(&[0..=4, 50..=53]),
        disk_b: r(23..=31),
        deferred: 8,
        amortized_exp: -9,
        pre: [
            PreBlock {
                qubits: 0..=26,
                first_global: r(14..=26),
                final_global: r(0..=12),
                kernels: 28,
                gates: 84,
            },
            PreBlock {
                qubits: 27..=53,
                first_global: r(27..=39),
                final_global: r(41..=53),
                kernels: 26,
                gates: 87,
            },
        ],
        phases: vec![
            vec![
                block(cat(&[5..=10, 43..=49]), 15, 59),
                block(r(5..=17), 8, 31),
                block(r(37..=49), 8, 27),
            ],
            vec![block(r(41..=53), 11, 49), block(r(0..=12), 10, 45)],
            vec![block(r(37..=49), 9, 37), block(r(5..=17), 7, 21)],
        ],
    })
}
