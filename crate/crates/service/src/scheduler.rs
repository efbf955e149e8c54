//! Memoryless uniform pair scheduling within a judge's familiar wards.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

/// A pair as presented: `left` is shown first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledPair {
    pub left: usize,
    pub right: usize,
}

impl ScheduledPair {
    /// The pair in ascending ward order.
    pub fn unordered(&self) -> (usize, usize) {
        (self.left.min(self.right), self.left.max(self.right))
    }
}

/// Draws one of the `C(m, 2)` pairs of `familiar` uniformly, then orders it
/// by an independent coin flip. Repeats across calls are possible.
pub fn next_pair<R: Rng + ?Sized>(familiar: &[usize], rng: &mut R) -> ServiceResult<ScheduledPair> {
    let m = familiar.len();
    if m < 2 {
        return Err(ServiceError::NoPairAvailable(format!(
            "the judge is familiar with {m} ward(s); at least two are needed"
        )));
    }
    let a = rng.random_range(0..m);
    let b = (a + rng.random_range(1..m)) % m;
    let (first, second) = (familiar[a.min(b)], familiar[a.max(b)]);
    Ok(if rng.random::<bool>() {
        ScheduledPair { left: first, right: second }
    } else {
        ScheduledPair { left: second, right: first }
    })
}

/// Rank of an unordered pair `a < b` of positions among `m` items, in
/// `0..C(m, 2)`.
pub fn pair_index(a: usize, b: usize, m: usize) -> usize {
    debug_assert!(a < b && b < m);
    a * (2 * m - a - 1) / 2 + (b - a - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_wards_always_that_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(next_pair(&[3, 7], &mut rng).unwrap().unordered(), (3, 7));
        }
    }

    #[test]
    fn single_ward_has_no_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(next_pair(&[4], &mut rng), Err(ServiceError::NoPairAvailable(_))));
        assert!(next_pair(&[], &mut rng).is_err());
    }

    #[test]
    fn pair_index_is_a_bijection() {
        let m = 7;
        let mut seen = vec![false; m * (m - 1) / 2];
        for a in 0..m {
            for b in a + 1..m {
                let k = pair_index(a, b, m);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
