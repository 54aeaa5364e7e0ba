mod common;

use dner_core::eval::strict_prf;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn metrics_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..300 {
        let (gold, pred) = common::random_pair(&mut rng);
        if let Err(e) = common::check_metrics(&gold, &pred) {
            panic!("pair {i}: {e}\ngold {gold:?}\npred {pred:?}");
        }
    }
}

#[test]
fn perfect_and_empty_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (gold, _) = common::random_pair(&mut rng);
    common::check_metrics(&gold, &gold).unwrap();
    let empty = vec![Vec::new(); gold.len()];
    common::check_metrics(&gold, &empty).unwrap();
    assert_eq!(strict_prf(&gold, &empty).unwrap().f1, 0.0);
}
