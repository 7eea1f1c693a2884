use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Counter-based generator used by every sampler.
pub type Rng = ChaCha8Rng;

/// Generator for `(seed, stream)`. ChaCha streams with distinct ids never
/// overlap, so per-trial or per-run generators can be derived independently.
pub fn rng_for(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for trial `trial` of experiment `experiment`.
pub fn stream_id(experiment: u32, trial: u32) -> u64 {
    (u64::from(experiment) << 32) | u64::from(trial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = rng_for(42, 3);
                move |_| r.gen()
            })
            .collect();
        let b: Vec<u64> = (0..8)
            .map({
                let mut r = rng_for(42, 3);
                move |_| r.gen()
            })
            .collect();
        assert_eq!(a, b);
        let c: u64 = rng_for(42, 4).gen();
        assert_ne!(a[0], c);
    }
}
