use super::{EmbedError, Embedder, EmbeddingSpec, EmbeddingVector};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Bucket index of a trigram (given as its UTF-8 string) for `dimension`.
pub fn trigram_bucket(trigram: &str, dimension: usize) -> usize {
    (fnv1a_64(trigram.as_bytes()) % dimension as u64) as usize
}

/// Hashed bag of lowercase character trigrams, L2-normalized.
///
/// Texts with fewer than three characters have no trigrams and map to e_0.
pub fn embed_local(text: &str, dimension: usize) -> EmbeddingVector {
    assert!(dimension > 0, "dimension must be positive");
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut counts = vec![0.0f32; dimension];
    let mut buf = String::with_capacity(12);
    for window in chars.windows(3) {
        buf.clear();
        buf.extend(window);
        counts[trigram_bucket(&buf, dimension)] += 1.0;
    }
    if chars.len() < 3 {
        return EmbeddingVector::basis(dimension, 0);
    }
    super::l2_normalize(&counts).expect("a text with trigrams has a non-zero count vector")
}

/// Offline embedder; needs no network and is bit-reproducible.
#[derive(Debug, Clone)]
pub struct LocalEmbedder {
    spec: EmbeddingSpec,
}

impl LocalEmbedder {
    pub fn new(dimension: usize) -> Result<Self, EmbedError> {
        Ok(Self { spec: EmbeddingSpec::local(dimension)? })
    }
}

impl Embedder for LocalEmbedder {
    fn spec(&self) -> &EmbeddingSpec {
        &self.spec
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| embed_local(t, self.spec.dimension)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a_64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a_64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a_64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn short_text_maps_to_e0() {
        let v = embed_local("ab", 64);
        assert_eq!(v.as_slice()[0], 1.0);
        assert!(v.as_slice()[1..].iter().all(|&x| x == 0.0));
        assert_eq!(embed_local("", 16).as_slice()[0], 1.0);
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(embed_local("OTTO DIX", 128), embed_local("otto dix", 128));
    }
}
