use btties_oracles::chi_square_uniform;
use btties_service::scheduler::{next_pair, pair_index};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn pairs_are_uniform_over_the_familiar_set() {
    let familiar: Vec<usize> = vec![2, 3, 5, 8, 13, 21, 34, 55, 89, 90];
    let m = familiar.len();
    let mut counts = vec![0u64; m * (m - 1) / 2];
    let mut sides = [0u64; 2];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100_000 {
        let pair = next_pair(&familiar, &mut rng).unwrap();
        let a = familiar.iter().position(|&w| w == pair.left).unwrap();
        let b = familiar.iter().position(|&w| w == pair.right).unwrap();
        counts[pair_index(a.min(b), a.max(b), m)] += 1;
        sides[usize::from(a < b)] += 1;
    }
    assert_eq!(counts.len(), 45);
    let p = chi_square_uniform(&counts);
    assert!(p > 0.01, "pair uniformity p = {p}");
    let p = chi_square_uniform(&sides);
    assert!(p > 0.01, "left/right balance p = {p}");
}
