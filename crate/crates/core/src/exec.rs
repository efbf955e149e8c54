//! Choice between data-parallel and sequential execution.
//!
//! Work is always split into the same fixed-size chunks, each driven by its
//! own random substream, so both policies return identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How data-parallel loops run. `Parallel` degrades to sequential execution
/// when the crate is built without the `parallel` feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Random stream for chunk `chunk` of a batch keyed by `key`.
pub fn substream(key: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(chunk as u64);
    rng
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Calls `f(chunk_index, chunk)` over `chunk_size` pieces of `data`.
    pub fn for_each_chunk<T, F>(self, data: &mut [T], chunk_size: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(chunk_size)
                .enumerate()
                .for_each(|(k, chunk)| f(k, chunk));
            return;
        }
        for (k, chunk) in data.chunks_mut(chunk_size).enumerate() {
            f(k, chunk);
        }
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.into_par_iter().map(f).collect();
        }
        items.into_iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn policies_agree() {
        let run = |exec: Execution| {
            let mut data = vec![0.0f64; 1000];
            exec.for_each_chunk(&mut data, 64, |k, chunk| {
                let mut rng = substream(99, k);
                for v in chunk {
                    *v = rng.random();
                }
            });
            data
        };
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
        let squares = Execution::Parallel.map((0..100u64).collect(), |x| x * x);
        assert_eq!(squares[99], 99 * 99);
    }
}
