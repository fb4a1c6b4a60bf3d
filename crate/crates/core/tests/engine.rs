mod common;

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{data, random_state, random_unitary};
use oocsim::circuit::{generate_sycamore, merge_single_qubit_gates, Circuit, Gate, QubitLayout};
use oocsim::engine::{
    aggregate, apply_deferred_contraction, apply_kernel_family, dry_run, Kernel, global_local_swap, run_plan, SliceFamily,
};
use oocsim::linalg::apply_matrix;
use oocsim::oracle::{compare_states, dense_simulate};
use oocsim::plan::schedule::{build_plan, ScheduleSpec};
use oocsim::plan::{compile, parse_plan, summarize_plan, SimulationPlan};
use oocsim::storage::SliceStore;
use oocsim::tensornet::{defer_gate, network_from_circuit, IndexId};

fn check(rows: usize, cols: usize, cycles: usize, seed: u64, disk: usize, global: usize, deferred: usize) {
    let layout = QubitLayout::sycamore_like(rows, cols).unwrap();
    let c = generate_sycamore(&layout, cycles, seed).unwrap();
    let merged = merge_single_qubit_gates(&c).unwrap();
    let mut spec = ScheduleSpec::alternating(c.n_qubits, disk, global).unwrap();
    spec.max_deferred = deferred;
    let plan = build_plan(&merged, &spec).unwrap();
    let mut store = SliceStore::memory();
    let trace = run_plan(&plan, &merged, &mut store).unwrap();
    assert!(trace.matches(&summarize_plan(&plan).unwrap()));
    assert!(compile(&plan, Some(&merged)).is_ok());
    let got = store.load_state().unwrap();
    let want = dense_simulate(&c).unwrap();
    let cmp = compare_states(&got, want.amplitudes()).unwrap();
    assert!(cmp.max_abs_diff < 1e-10, "{cmp:?}");
}

#[test]
fn small_plans_match_the_oracle() {
    check(3, 4, 8, 1, 1, 2, 2);
    check(3, 4, 10, 2, 2, 1, 0);
    check(4, 4, 12, 3, 1, 3, 3);
}

#[test]
fn disk_store_round_trip() {
    let layout = QubitLayout::sycamore_like(3, 4).unwrap();
    let c = generate_sycamore(&layout, 10, 9).unwrap();
    let merged = merge_single_qubit_gates(&c).unwrap();
    let plan = build_plan(&merged, &ScheduleSpec::alternating(12, 1, 2).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut store = SliceStore::disk(dir.path()).unwrap();
    let trace = run_plan(&plan, &merged, &mut store).unwrap();
    assert!(trace.transfers() >= 2);
    let got = store.load_state().unwrap();
    let want = dense_simulate(&c).unwrap();
    let cmp = compare_states(&got, want.amplitudes()).unwrap();
    assert!(cmp.max_abs_diff < 1e-4, "{cmp:?}");
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Gate-by-gate reference on a full state vector.
fn apply_gates(state: &mut [C64], gates: &[Gate]) {
    for g in gates {
        apply_matrix(state, &g.operands, &g.unitary);
    }
}

fn random_gates(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Gate> {
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..n);
            if rng.random_bool(0.3) {
                Gate::new("u1", vec![a], random_unitary(2, rng)).unwrap()
            } else {
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                Gate::new("u2", vec![a, b], random_unitary(4, rng)).unwrap()
            }
        })
        .collect()
}

#[test]
fn chained_gates_aggregate_into_one_three_qubit_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gates = vec![
        Gate::new("a", vec![0, 1], random_unitary(4, &mut rng)).unwrap(),
        Gate::new("b", vec![1, 2], random_unitary(4, &mut rng)).unwrap(),
    ];
    let kernels = aggregate(&gates, 3).unwrap();
    assert_eq!(kernels.len(), 1);
    assert_eq!(kernels[0].qubits, vec![0, 1, 2]);
    let state = random_state(3, &mut rng);
    let mut family = SliceFamily::from_state(&state, vec![]).unwrap();
    apply_kernel_family(&mut family, &kernels[0]).unwrap();
    let mut want = state.clone();
    apply_gates(&mut want, &gates);
    assert!(max_diff(&family.to_state().unwrap(), &want) <= 1e-12);
}

#[test]
fn five_qubit_kernel_keeps_the_norm_of_a_slice() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let state = random_state(20, &mut rng);
    let mut family = SliceFamily::from_state(&state, vec![]).unwrap();
    let u = random_unitary(32, &mut rng);
    let ops = [3, 17, 0, 9, 12];
    let kernel = Kernel::from_gates(ops.to_vec(), [(&ops[..], &u)], vec![0]).unwrap();
    let before = family.norm_sqr();
    apply_kernel_family(&mut family, &kernel).unwrap();
    assert!((family.norm_sqr() - before).abs() <= 1e-12);
}

#[test]
fn swap_keeps_a_basis_amplitude() {
    // |1011> with qubit 0 as the least significant bit
    let mut state = vec![C64::new(0.0, 0.0); 16];
    state[0b1011] = C64::new(0.0, 1.0);
    let family = SliceFamily::from_state(&state, vec![3]).unwrap();
    let swapped = global_local_swap(&family, &[0]).unwrap();
    assert_eq!(swapped.local(), &[1, 2, 3]);
    // slice g=1 (qubit 0 set); locals 1,2,3 = 1,0,1
    assert_eq!(swapped.slice(1)[0b101], C64::new(0.0, 1.0));
    assert_eq!(swapped.norm_sqr(), 1.0);
    assert_eq!(swapped.to_state().unwrap(), state);
}

fn deferred_pair(seed: u64, bridges: usize) -> (Vec<oocsim::tensornet::Tensor>, Circuit) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut full = Circuit::new(6);
    let mut left = Circuit::new(3);
    let mut right = Circuit::new(3);
    for g in random_gates(3, 6, &mut rng) {
        left.push_layer(vec![g.clone()]).unwrap();
        full.push_layer(vec![g]).unwrap();
    }
    for g in random_gates(3, 6, &mut rng) {
        right.push_layer(vec![g.clone()]).unwrap();
        let ops = g.operands.iter().map(|o| o + 3).collect();
        full.push_layer(vec![Gate::new("r", ops, g.unitary.clone()).unwrap()]).unwrap();
    }
    let mut phi = network_from_circuit(&left).unwrap().contract_all().unwrap();
    let mut chi = network_from_circuit(&right).unwrap().contract_all().unwrap();
    for i in (0..3).rev() {
        chi.relabel(IndexId::Qubit(i), IndexId::Qubit(i + 3)).unwrap();
    }
    for j in 0..bridges {
        let g = Gate::new("b", vec![j, 3 + j], random_unitary(4, &mut rng)).unwrap();
        full.push_layer(vec![g.clone()]).unwrap();
        let d = defer_gate(&g, &phi, &chi).unwrap();
        phi = d.phi;
        chi = d.chi;
    }
    (vec![phi, chi], full)
}

#[test]
fn deferred_contraction_rebuilds_the_six_qubit_state() {
    let (tensors, full) = deferred_pair(13, 2);
    let want = dense_simulate(&full).unwrap();
    let family = apply_deferred_contraction(&tensors, &BTreeMap::new(), &[4, 5], &[0, 1, 2, 3]).unwrap();
    assert_eq!(family.slice_count(), 4);
    assert!(max_diff(&family.to_state().unwrap(), want.amplitudes()) <= 1e-12);

    // Pinning qubit 5 to 1 keeps exactly that half of the state.
    let pinned = BTreeMap::from([(5, 1u8)]);
    let half = apply_deferred_contraction(&tensors, &pinned, &[4], &[0, 1, 2, 3]).unwrap();
    let expect: Vec<C64> = want.amplitudes()[32..].to_vec();
    assert!(max_diff(half.data(), &expect) <= 1e-12);
}

#[test]
fn unpartnered_entanglement_is_rejected() {
    let (tensors, _) = deferred_pair(14, 1);
    assert!(apply_deferred_contraction(&tensors[..1], &BTreeMap::new(), &[], &[0, 1, 2]).is_err());
}

#[test]
fn plan_without_steps_leaves_the_zero_state() {
    let plan = parse_plan("define - 3\ndefine - 0\n").unwrap();
    let mut store = SliceStore::memory();
    run_plan(&plan, &Circuit::new(3), &mut store).unwrap();
    let state = store.load_state().unwrap();
    assert_eq!(state[0], C64::new(1.0, 0.0));
    assert!(state[1..].iter().all(|a| a.norm() == 0.0));
}

#[test]
fn shipped_sixteen_qubit_plan_matches_the_oracle() {
    let circuit = Circuit::load(data("circuits/grid4x4_8.json")).unwrap();
    let merged = merge_single_qubit_gates(&circuit).unwrap();
    let plan = SimulationPlan::load(&data("plans/grid4x4_8.plan")).unwrap();
    let mut store = SliceStore::memory();
    let trace = run_plan(&plan, &merged, &mut store).unwrap();
    assert!(trace.matches(&summarize_plan(&plan).unwrap()));
    let want = dense_simulate(&circuit).unwrap();
    let cmp = compare_states(&store.load_state().unwrap(), want.amplitudes()).unwrap();
    assert!(cmp.max_abs_diff <= 1e-10, "{cmp:?}");
}

#[test]
fn dry_run_of_the_53_qubit_plan() {
    let plan = SimulationPlan::load(&data("plans/sycamore53_20.plan")).unwrap();
    let program = compile(&plan, None).unwrap();
    let trace = dry_run(&program);
    assert_eq!(trace.transfers(), 5);
    assert_eq!(trace.contraction_flops, 2f64.powi(70));
    assert!(trace.matches(&summarize_plan(&plan).unwrap()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_and_swaps_keep_the_norm(seed in any::<u64>(), n in 4usize..=12, k in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = k.min(n - 1);
        let state = random_state(n, &mut rng);
        let mut qubits: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            qubits.swap(i, rng.random_range(0..=i));
        }
        let global = qubits[..rng.random_range(0..=n - k)].to_vec();
        let mut family = SliceFamily::from_state(&state, global).unwrap();
        let support: Vec<usize> = family.local()[..k].to_vec();
        let u = random_unitary(1 << k, &mut rng);
        let kernel = Kernel::from_gates(support.clone(), [(&support[..], &u)], vec![0]).unwrap();
        apply_kernel_family(&mut family, &kernel).unwrap();
        prop_assert!((family.norm_sqr() - 1.0).abs() <= 1e-12);
        let other: Vec<usize> = qubits[n - rng.random_range(0..n)..].to_vec();
        let swapped = global_local_swap(&family, &other).unwrap();
        prop_assert!((swapped.norm_sqr() - family.norm_sqr()).abs() <= 1e-12);
    }

    #[test]
    fn swaps_move_amplitudes_exactly(seed in any::<u64>(), n in 2usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(n, &mut rng);
        let mut qubits: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            qubits.swap(i, rng.random_range(0..=i));
        }
        let global = qubits[..rng.random_range(0..=n)].to_vec();
        let family = SliceFamily::from_state(&state, global.clone()).unwrap();
        for g in 0..family.slice_count() {
            for (l, amp) in family.slice(g).iter().enumerate() {
                let mut idx = 0;
                for (j, &q) in family.local().iter().enumerate() {
                    idx |= ((l >> j) & 1) << q;
                }
                for (j, &q) in global.iter().enumerate() {
                    idx |= ((g >> j) & 1) << q;
                }
                prop_assert_eq!(*amp, state[idx]);
            }
        }
        prop_assert_eq!(family.to_state().unwrap(), state);
    }

    #[test]
    fn aggregation_is_sound(seed in any::<u64>(), n in 2usize..=10, count in 1usize..30, k_max in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gates = random_gates(n, count, &mut rng);
        let kernels = aggregate(&gates, k_max).unwrap();
        let mut members: Vec<usize> = kernels.iter().flat_map(|k| k.members.clone()).collect();
        members.sort_unstable();
        prop_assert_eq!(members, (0..count).collect::<Vec<_>>());
        let state = random_state(n, &mut rng);
        let mut family = SliceFamily::from_state(&state, vec![]).unwrap();
        for k in &kernels {
            prop_assert!(k.width() <= k_max);
            apply_kernel_family(&mut family, k).unwrap();
        }
        let mut want = state;
        apply_gates(&mut want, &gates);
        prop_assert!(max_diff(&family.to_state().unwrap(), &want) <= 1e-12);
        prop_assert!((norm_sqr(&want) - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn built_plans_run_and_match(seed in any::<u64>(), rows in 3usize..=4, cycles in 2usize..=8,
                                 disk in 1usize..=2, global in 1usize..=2, deferred in 0usize..=2) {
        let layout = QubitLayout::sycamore_like(rows, 4).unwrap();
        let c = generate_sycamore(&layout, cycles, seed).unwrap();
        // Too few cycles can leave a qubit without a coupling to merge into.
        let merged = merge_single_qubit_gates(&c);
        prop_assume!(merged.is_ok());
        let merged = merged.unwrap();
        let mut spec = ScheduleSpec::alternating(c.n_qubits, disk, global).unwrap();
        spec.max_deferred = deferred;
        let plan = build_plan(&merged, &spec).unwrap();
        prop_assert!(compile(&plan, Some(&merged)).is_ok());
        let mut store = SliceStore::memory();
        let trace = run_plan(&plan, &merged, &mut store).unwrap();
        prop_assert!(trace.matches(&summarize_plan(&plan).unwrap()));
        let want = dense_simulate(&c).unwrap();
        let cmp = compare_states(&store.load_state().unwrap(), want.amplitudes()).unwrap();
        prop_assert!(cmp.max_abs_diff <= 1e-10, "{:?}", cmp);
    }
}
