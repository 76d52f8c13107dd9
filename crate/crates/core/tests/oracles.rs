mod common;

use common::{lru_misses, truth_table_sat};

fn naive(n: usize, clauses: &[Vec<i32>]) -> bool {
    (0u64..1 << n).any(|bits| {
        clauses
            .iter()
            .all(|c| c.iter().any(|&x| (bits >> (x.unsigned_abs() - 1) & 1 == 1) == (x > 0)))
    })
}

#[test]
fn pruned_truth_table_matches_plain_enumeration() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..400 {
        let n = rand::Rng::gen_range(&mut rng, 1..=16);
        let m = rand::Rng::gen_range(&mut rng, 0..=6 * n);
        let cs = common::random_3cnf(&mut rng, n, m);
        assert_eq!(truth_table_sat(n, &cs), naive(n, &cs), "{n} {cs:?}");
    }
    assert!(truth_table_sat(0, &[]));
    assert!(!truth_table_sat(1, &[vec![1], vec![-1]]));
    assert!(!truth_table_sat(9, &[vec![2], vec![-2, 9], vec![-9]]));
    assert!(!truth_table_sat(9, &[vec![1, 2], vec![-1], vec![-2]]));
}

#[test]
fn list_lru_reference() {
    assert_eq!(lru_misses(&[0, 1, 2, 3, 4, 0], 1, 4), 6);
    assert_eq!(lru_misses(&[0, 1, 2, 0, 3, 0, 1], 1, 3), 5);
}
