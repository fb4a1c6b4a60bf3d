mod common;

use std::collections::BTreeSet;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::random_state;
use oocsim::storage::{decode_amplitudes, encode_amplitudes, file_name, FileIndexScheme, SliceStore};
use oocsim::Error;

fn ramp(len: usize, scale: f64) -> Vec<C64> {
    (0..len).map(|i| C64::new(scale * i as f64, -scale * (i as f64 + 0.5))).collect()
}

#[test]
fn ten_qubits_over_four_index_qubits() {
    let s = FileIndexScheme::for_register(10, vec![0, 3, 5, 8]).unwrap();
    assert_eq!(s.file_count(), 16);
    assert_eq!(s.amps_per_file(), 64);
    assert_eq!(s.file_bytes(), 512);
    assert_eq!(s.local_qubits(), &[1, 2, 4, 6, 7, 9]);
}

#[test]
fn files_on_disk_have_eight_bytes_per_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = SliceStore::disk(dir.path()).unwrap();
    let scheme = FileIndexScheme::for_register(10, vec![0, 3, 5, 8]).unwrap();
    store.begin_write(scheme).unwrap();
    for id in 0..16 {
        store.write_slice(id, &ramp(64, 0.001 * id as f64)).unwrap();
    }
    store.end_write().unwrap();
    for id in 0..16 {
        let bytes = std::fs::read(dir.path().join(file_name(id))).unwrap();
        assert_eq!(bytes.len(), 512);
    }
}

#[test]
fn first_eight_bytes_hold_local_index_zero() {
    let amps = [C64::new(0.25, -1.5), C64::new(3.0, 4.0)];
    let bytes = encode_amplitudes(&amps);
    assert_eq!(&bytes[0..4], &0.25f32.to_le_bytes());
    assert_eq!(&bytes[4..8], &(-1.5f32).to_le_bytes());
    assert_eq!(&bytes[8..12], &3.0f32.to_le_bytes());
}

#[test]
fn zero_slice_round_trips_exactly() {
    let zeros = vec![C64::new(0.0, 0.0); 64];
    assert_eq!(decode_amplitudes(&encode_amplitudes(&zeros)).unwrap(), zeros);
}

#[test]
fn truncated_bytes_are_rejected() {
    assert!(decode_amplitudes(&[0u8; 12]).is_err());
}

#[test]
fn full_reassembly_keeps_the_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let state = random_state(12, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    let mut store = SliceStore::disk(dir.path()).unwrap();
    store
        .store_state(FileIndexScheme::for_register(12, vec![11, 2, 7]).unwrap(), &state)
        .unwrap();
    let back = store.load_state().unwrap();
    let norm: f64 = back.iter().map(|a| a.norm_sqr()).sum();
    assert!((norm - 1.0).abs() <= 1e-6);
    let worst = state.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(worst <= 1.2e-7 * 2f64.sqrt());
}

#[test]
fn reopening_a_disk_store_reads_the_previous_cycle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let state = random_state(6, &mut rng);
    let dir = tempfile::tempdir().unwrap();
    {
        let mut store = SliceStore::disk(dir.path()).unwrap();
        store.store_state(FileIndexScheme::for_register(6, vec![1]).unwrap(), &state).unwrap();
    }
    let mut again = SliceStore::disk(dir.path()).unwrap();
    assert!(again.has_data());
    assert_eq!(again.load_state().unwrap().len(), 64);
    let mut fresh = SliceStore::disk_fresh(dir.path()).unwrap();
    assert!(!fresh.has_data());
    assert!(matches!(fresh.load_state(), Err(Error::Discipline(_))));
}

#[test]
fn deleted_file_is_reported_missing() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = SliceStore::disk(dir.path()).unwrap();
    store
        .store_state(FileIndexScheme::for_register(4, vec![0]).unwrap(), &ramp(16, 0.1))
        .unwrap();
    std::fs::remove_file(dir.path().join(file_name(1))).unwrap();
    assert!(matches!(store.load_state(), Err(Error::MissingFile { id: 1, .. })));
}

#[test]
fn wrong_slice_length_is_rejected() {
    let mut store = SliceStore::memory();
    store.begin_write(FileIndexScheme::for_register(4, vec![0]).unwrap()).unwrap();
    assert!(matches!(store.write_slice(0, &ramp(4, 1.0)), Err(Error::SliceLength { expected: 8, got: 4 })));
}

#[test]
fn parallel_distinct_writes_complete_a_cycle() {
    for mut store in [SliceStore::memory(), SliceStore::disk(tempfile::tempdir().unwrap().keep()).unwrap()] {
        let scheme = FileIndexScheme::for_register(12, vec![0, 1, 2, 3, 4, 5]).unwrap();
        store.begin_write(scheme.clone()).unwrap();
        (0..scheme.file_count())
            .into_par_iter()
            .try_for_each(|id| store.write_slice(id, &ramp(64, id as f64 / 64.0)))
            .unwrap();
        store.end_write().unwrap();
        store.begin_read().unwrap();
        let files: Vec<Vec<C64>> = (0..64).into_par_iter().map(|id| store.read_slice(id).unwrap()).collect();
        store.end_read().unwrap();
        for (id, f) in files.iter().enumerate() {
            assert_eq!(f[1], ramp(64, id as f64 / 64.0)[1]);
        }
        if let Some(root) = store.root() {
            std::fs::remove_dir_all(root).unwrap();
        }
    }
}

#[derive(Clone, Debug)]
enum Access {
    Read(usize),
    Write(usize),
}

fn accesses(files: usize) -> impl Strategy<Value = Vec<Access>> {
    prop::collection::vec(
        prop_oneof![(0..files).prop_map(Access::Read), (0..files).prop_map(Access::Write)],
        0..40,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_slices_round_trip_within_single_precision(re in prop::collection::vec(-1.0f64..1.0, 64),
                                                        im in prop::collection::vec(-1.0f64..1.0, 64)) {
        let amps: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        let back = decode_amplitudes(&encode_amplitudes(&amps)).unwrap();
        for (a, b) in amps.iter().zip(&back) {
            prop_assert!((a.re - b.re).abs() <= 1.2e-7 * a.re.abs().max(f64::MIN_POSITIVE));
            prop_assert!((a.im - b.im).abs() <= 1.2e-7 * a.im.abs().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn split_and_assemble_are_inverse(n in 1usize..=10, seed in any::<u64>(), pick in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(n, &mut rng);
        let index: Vec<usize> = (0..n).filter(|q| (pick >> q) & 1 == 1).collect();
        let scheme = FileIndexScheme::for_register(n, index).unwrap();
        let files = scheme.split_state(&state).unwrap();
        prop_assert_eq!(files.len(), scheme.file_count());
        prop_assert_eq!(scheme.assemble_state(&files).unwrap(), state);
    }

    /// Overlapping read and write cycles follow the access rules: each file
    /// is read at most once, written at most once, and never read after
    /// being rewritten; cycles end only once every file was touched.
    #[test]
    fn access_discipline_follows_the_model(ops in accesses(4)) {
        let mut store = SliceStore::memory();
        let scheme = FileIndexScheme::for_register(3, vec![0, 2]).unwrap();
        store.store_state(scheme.clone(), &ramp(8, 1.0)).unwrap();
        store.begin_read().unwrap();
        store.begin_write(scheme).unwrap();
        let (mut read, mut written) = (BTreeSet::new(), BTreeSet::new());
        for op in ops {
            match op {
                Access::Read(id) => {
                    let ok = !read.contains(&id) && !written.contains(&id);
                    prop_assert_eq!(store.read_slice(id).is_ok(), ok);
                    if ok {
                        read.insert(id);
                    }
                }
                Access::Write(id) => {
                    let ok = !written.contains(&id);
                    prop_assert_eq!(store.write_slice(id, &ramp(2, 2.0)).is_ok(), ok);
                    written.insert(id);
                }
            }
        }
        prop_assert_eq!(store.end_read().is_ok(), read.len() == 4);
        prop_assert_eq!(store.end_write().is_ok(), written.len() == 4);
    }
}
