//! Hashed vocabulary: tokens map to embedding rows through FNV-1a.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Deterministic token id in [0, vocab) via 64-bit FNV-1a over the token's
/// UTF-8 bytes, identical across runs and platforms.
pub fn hash_token(token: &str, vocab: usize) -> usize {
    debug_assert!(vocab > 0);
    let mut hash = FNV_OFFSET;
    for byte in token.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    (hash % vocab as u64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256StarStar;
    use std::collections::HashMap;

    #[test]
    fn deterministic() {
        assert_eq!(hash_token("dog", 4096), hash_token("dog", 4096));
        assert_ne!(hash_token("dog", 4096), hash_token("cat", 4096));
    }

    fn random_token(rng: &mut Xoshiro256StarStar) -> String {
        let len = 3 + rng.below(8);
        (0..len)
            .map(|_| (b'a' + rng.below(26) as u8) as char)
            .collect()
    }

    #[test]
    fn ids_in_range() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(1);
        for _ in 0..10_000 {
            let id = hash_token(&random_token(&mut rng), 4096);
            assert!(id < 4096);
        }
    }

    #[test]
    fn collision_count_follows_birthday_bound() {
        // n distinct tokens into v buckets: expected colliding pairs is
        // about n(n-1)/(2v) (Poisson), so the observed count should land
        // within 3 sigma of that mean.
        let (n, v) = (1000usize, 4096usize);
        let mut rng = Xoshiro256StarStar::seed_from_u64(99);
        let mut tokens = std::collections::HashSet::new();
        while tokens.len() < n {
            tokens.insert(random_token(&mut rng));
        }
        let mut buckets: HashMap<usize, u64> = HashMap::new();
        for t in &tokens {
            *buckets.entry(hash_token(t, v)).or_insert(0) += 1;
        }
        let colliding_pairs: u64 = buckets.values().map(|k| k * (k - 1) / 2).sum();
        let lambda = (n * (n - 1)) as f64 / (2.0 * v as f64);
        let sigma = lambda.sqrt();
        let delta = (colliding_pairs as f64 - lambda).abs();
        assert!(delta <= 3.0 * sigma, "pairs {colliding_pairs}, expected {lambda:.1} +/- {sigma:.1}");
    }
}
