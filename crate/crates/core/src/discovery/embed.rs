//! Sentence embedding backends.

use super::EmbedderBackend;
use crate::backend::BackendError;

/// Deterministic stand-in for a sentence encoder: signed feature hashing of
/// character trigrams, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedTrigramEmbedder {
    dim: usize,
}

impl HashedTrigramEmbedder {
    pub const ID: &'static str = "hashed-trigram";
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn vector(&self, sentence: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let normalized = sentence.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        if normalized.is_empty() {
            return v;
        }
        let chars: Vec<char> = std::iter::once(' ').chain(normalized.chars()).chain(std::iter::once(' ')).collect();
        for gram in chars.windows(3) {
            let h = gram.iter().fold(0x243F_6A88_85A3_08D3u64, |h, &c| splitmix64(h ^ c as u64));
            let slot = (h % self.dim as u64) as usize;
            v[slot] += if h >> 63 == 1 { -1.0 } else { 1.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Default for HashedTrigramEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIM)
    }
}

impl EmbedderBackend for HashedTrigramEmbedder {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, sentence: &str) -> Result<Vec<f64>, BackendError> {
        Ok(self.vector(sentence))
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
