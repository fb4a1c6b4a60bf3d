mod common;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{layout, random_state, random_unitary};
use oocsim::circuit::{fsim_unitary, generate_sycamore, std_gates, Circuit, Gate, GateParams};
use oocsim::linalg::apply_matrix;
use oocsim::oracle::dense_simulate;
use oocsim::tensornet::{
    contract_pair, defer_gate, eliminate_entanglement, hyperedge_form, is_diagonal, is_separable,
    network_from_circuit, IndexId, Tensor,
};

fn q(i: usize) -> IndexId {
    IndexId::Qubit(i)
}

fn w(i: usize) -> IndexId {
    IndexId::Wire(i)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn random_circuit(n: usize, gates: usize, rng: &mut ChaCha8Rng) -> Circuit {
    let mut c = Circuit::new(n);
    for _ in 0..gates {
        let a = rng.random_range(0..n);
        let g = if rng.random_bool(0.3) {
            Gate::new("u1", vec![a], random_unitary(2, rng)).unwrap()
        } else {
            let b = (a + rng.random_range(1..n)) % n;
            Gate::new("u2", vec![a, b], random_unitary(4, rng)).unwrap()
        };
        c.push_layer(vec![g]).unwrap();
    }
    c
}

#[test]
fn full_network_contraction_matches_the_oracle() {
    let c = generate_sycamore(&layout(6), 6, 11).unwrap();
    let mut net = network_from_circuit(&c).unwrap();
    let got = net.contract_all().unwrap().to_state(6).unwrap();
    let want = dense_simulate(&c).unwrap();
    assert!(max_diff(&got, want.amplitudes()) <= 1e-12);
}

#[test]
fn cz_is_diagonal_and_swap_separable() {
    let pairing = [(w(0), w(2)), (w(1), w(3))];
    let cz = Tensor::from_matrix(&std_gates::cz(), &[w(0), w(1)], &[w(2), w(3)]).unwrap();
    assert!(is_diagonal(&cz, &pairing).unwrap());
    // Every entry enumerated: off-diagonal entries of CZ are exactly zero.
    let m = std_gates::cz();
    for r in 0..4 {
        for c in 0..4 {
            assert_eq!(m[(r, c)] == C64::new(0.0, 0.0), r != c);
        }
    }

    let swap = Tensor::from_matrix(&std_gates::swap(), &[w(0), w(1)], &[w(2), w(3)]).unwrap();
    let f = is_separable(&swap, &pairing).unwrap().expect("swap is separable");
    for j in 0..4 {
        let (j1, j2) = (j & 1, (j >> 1) & 1);
        assert_eq!(f.component(0, j), j2);
        assert_eq!(f.component(1, j), j1);
    }
}

#[test]
fn fsim_diagonality_and_separability() {
    let pairing = [(w(0), w(2)), (w(1), w(3))];
    let p = GateParams {
        theta: std::f64::consts::FRAC_PI_2,
        phi: std::f64::consts::FRAC_PI_6,
        delta_plus: 0.03,
        delta_minus: -0.07,
        delta_minus_off: 0.05,
    };
    let t = Tensor::from_matrix(&fsim_unitary(&p), &[w(0), w(1)], &[w(2), w(3)]).unwrap();
    assert!(!is_diagonal(&t, &pairing).unwrap());
    // At θ = π/2 the middle block is anti-diagonal: a phased swap.
    let f = is_separable(&t, &pairing).unwrap().expect("phased swap");
    assert_eq!(f.bit_permutation(), Some(vec![1, 0]));
    let generic = GateParams { theta: 1.0, ..p };
    let t = Tensor::from_matrix(&fsim_unitary(&generic), &[w(0), w(1)], &[w(2), w(3)]).unwrap();
    assert_eq!(is_separable(&t, &pairing).unwrap(), None);
}

#[test]
fn deferred_cz_on_plus_states() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = |i| Tensor::new(vec![q(i)], vec![C64::new(h, 0.0); 2]).unwrap();
    let (phi, chi) = (plus(0), plus(1));
    let d = defer_gate(&Gate::new("cz", vec![0, 1], std_gates::cz()).unwrap(), &phi, &chi).unwrap();
    assert_eq!(d.phi.entanglement_indices().len(), 2);
    let got = eliminate_entanglement(&d.phi, &d.chi).unwrap().to_state(2).unwrap();
    let mut want = vec![C64::new(0.5, 0.0); 4];
    want[3] = C64::new(-0.5, 0.0);
    assert!(max_diff(&got, &want) <= 1e-14);
}

#[test]
fn one_deferred_gate_sums_four_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = Tensor::new(vec![q(0)], random_state(1, &mut rng)).unwrap();
    let chi = Tensor::new(vec![q(1)], random_state(1, &mut rng)).unwrap();
    let u = random_unitary(4, &mut rng);
    let d = defer_gate(&Gate::new("u", vec![0, 1], u).unwrap(), &phi, &chi).unwrap();
    let ent = d.phi.entanglement_indices();
    assert_eq!(ent.len(), 2);
    // Explicit four-term sum over (a', a).
    let mut want = vec![C64::new(0.0, 0.0); 4];
    for s in 0..4 {
        let fix = |t: &Tensor| t.fix(ent[0], s & 1).unwrap().fix(ent[1], s >> 1).unwrap();
        let term = contract_pair(&fix(&d.phi), &fix(&d.chi), |_| true).to_state(2).unwrap();
        want.iter_mut().zip(term).for_each(|(x, y)| *x += y);
    }
    let got = eliminate_entanglement(&d.phi, &d.chi).unwrap().to_state(2).unwrap();
    assert!(max_diff(&got, &want) <= 1e-14);
}

#[test]
fn deferred_gates_between_three_qubit_subcircuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 1..=3 {
        let left = random_circuit(3, 6, &mut rng);
        let right_local = random_circuit(3, 6, &mut rng);
        // Combined six-qubit circuit: left on 0..3, right on 3..6, then k bridges.
        let mut full = Circuit::new(6);
        for g in left.gates() {
            full.push_layer(vec![g.clone()]).unwrap();
        }
        for g in right_local.gates() {
            let ops = g.operands.iter().map(|o| o + 3).collect();
            full.push_layer(vec![Gate::new("r", ops, g.unitary.clone()).unwrap()]).unwrap();
        }
        let phi0 = network_from_circuit(&left).unwrap().contract_all().unwrap();
        let mut chi0 = network_from_circuit(&right_local).unwrap().contract_all().unwrap();
        for i in (0..3).rev() {
            chi0.relabel(q(i), q(i + 3)).unwrap();
        }
        let (mut phi, mut chi) = (phi0, chi0);
        for j in 0..k {
            let g = Gate::new("b", vec![j, 3 + (j + 1) % 3], random_unitary(4, &mut rng)).unwrap();
            full.push_layer(vec![g.clone()]).unwrap();
            let d = defer_gate(&g, &phi, &chi).unwrap();
            phi = d.phi;
            chi = d.chi;
        }
        assert_eq!(phi.entanglement_indices().len(), 2 * k);
        let got = eliminate_entanglement(&phi, &chi).unwrap().to_state(6).unwrap();
        let want = dense_simulate(&full).unwrap();
        assert!(max_diff(&got, want.amplitudes()) <= 1e-12, "k = {k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn contraction_order_does_not_matter(seed in any::<u64>(), n in 2usize..=6, gates in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_circuit(n, gates, &mut rng);
        let want = dense_simulate(&c).unwrap();
        let mut net = network_from_circuit(&c).unwrap();
        // One possibly non-adjacent pair first, then random adjacent pairs.
        let ids = net.node_ids();
        let a = ids[rng.random_range(0..ids.len())];
        let b = ids[rng.random_range(0..ids.len())];
        if a != b {
            net.contract(&[a, b]).unwrap();
        }
        while net.node_count() > 1 {
            let edges: Vec<_> = net
                .hyperedges()
                .into_values()
                .filter(|inc| inc.len() > 1)
                .collect();
            let pick: Vec<_> = if edges.is_empty() {
                net.node_ids()
            } else {
                edges[rng.random_range(0..edges.len())].iter().copied().collect()
            };
            net.contract(&pick).unwrap();
        }
        let got = net.contract_all().unwrap().to_state(n).unwrap();
        prop_assert!(max_diff(&got, want.amplitudes()) <= 1e-12);
    }

    #[test]
    fn deferral_is_direct_application(seed in any::<u64>(), g in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = Tensor::new(vec![q(0), q(1)], random_state(2, &mut rng)).unwrap();
        let chi = Tensor::new(vec![q(2), q(3)], random_state(2, &mut rng)).unwrap();
        let mut direct = contract_pair(&phi, &chi, |_| true).to_state(4).unwrap();
        let (mut p, mut c) = (phi, chi);
        for _ in 0..g {
            let a = rng.random_range(0..2);
            let b = rng.random_range(2..4);
            let ops = if rng.random_bool(0.5) { vec![a, b] } else { vec![b, a] };
            let u = random_unitary(4, &mut rng);
            apply_matrix(&mut direct, &ops, &u);
            let d = defer_gate(&Gate::new("u", ops, u).unwrap(), &p, &c).unwrap();
            p = d.phi;
            c = d.chi;
        }
        prop_assert_eq!(p.entanglement_indices().len(), 2 * g);
        let got = eliminate_entanglement(&p, &c).unwrap().to_state(4).unwrap();
        prop_assert!(max_diff(&got, &direct) <= 1e-12);
    }

    #[test]
    fn separable_hyperedge_form_matches_dense(seed in any::<u64>(), m in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Random phases times a random bit permutation of the outputs.
        let mut perm: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let dim = 1usize << m;
        let mut mat = oocsim::linalg::Matrix::zeros(dim);
        for j in 0..dim {
            let i = (0..m).fold(0, |acc, k| acc | (((j >> perm[k]) & 1) << k));
            mat[(i, j)] = C64::from_polar(1.0, rng.random::<f64>() * 6.0);
        }
        let outs: Vec<_> = (0..m).map(w).collect();
        let ins: Vec<_> = (0..m).map(|k| w(10 + k)).collect();
        let t = Tensor::from_matrix(&mat, &outs, &ins).unwrap();
        let pairing: Vec<_> = outs.iter().copied().zip(ins.iter().copied()).collect();
        let f = is_separable(&t, &pairing).unwrap().expect("separable by construction");
        let (reduced, renames) = hyperedge_form(&t, &pairing, &f).unwrap();

        // Contract against a random input vector both ways.
        let x = Tensor::new(ins.clone(), random_state(m, &mut rng)).unwrap();
        let dense = contract_pair(&t, &x, |i| outs.contains(i));
        // Hyperedge form: the reduced tensor shares the inputs with x; each
        // output copies one input, so the product is read off directly.
        let prod = contract_pair(&reduced, &x, |_| true);
        for i in 0..dim {
            let mut a = std::collections::BTreeMap::new();
            for (k, o) in outs.iter().enumerate() {
                a.insert(*o, (i >> k) & 1);
            }
            let mut b = std::collections::BTreeMap::new();
            for (o, src) in &renames {
                b.insert(*src, a[o]);
            }
            if b.len() == m {
                prop_assert!((dense.entry(&a) - prod.entry(&b)).norm() <= 1e-14);
            }
        }
    }
}
