//! Feature vectors and the embedding provider contract.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub const DEFAULT_DIM: usize = 128;

/// Unit-norm real vector. Only constructed through normalizing paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    /// Normalizes `v`; a zero vector maps to the first basis vector so the
    /// result is always unit length.
    pub fn normalized(mut v: Vec<f64>) -> Self {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= f64::EPSILON {
            v.iter_mut().for_each(|x| *x = 0.0);
            if let Some(first) = v.first_mut() {
                *first = 1.0;
            }
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn cosine(&self, other: &FeatureVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `normalize(w * self + (1 - w) * other)`.
    pub fn blend(&self, other: &FeatureVector, w: f64) -> FeatureVector {
        Self::normalized(self.0.iter().zip(&other.0).map(|(a, b)| w * a + (1.0 - w) * b).collect())
    }

    /// `normalize(self + other)`.
    pub fn fuse(&self, other: &FeatureVector) -> FeatureVector {
        Self::normalized(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// What a single view reveals about an object's appearance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSnapshot {
    pub category: String,
    pub attributes: BTreeSet<String>,
}

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_text(&self, text: &str) -> FeatureVector;
    fn embed_visual(&self, view: &AttributeSnapshot) -> FeatureVector;
}

/// Words that carry no identity and are dropped before hashing.
const STOP_WORDS: &[&str] = &["a", "an", "the", "in", "on", "into", "near", "nearest", "to", "of", "at", "from"];

/// Deterministic signed feature hashing of lowercase word tokens.
#[derive(Clone, Debug)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM, seed: 0x1f2e_3d4c }
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .filter(|t| !STOP_WORDS.contains(&t.as_str()))
    }

    // FNV-1a, seeded; stable across platforms and releases.
    fn hash(&self, token: &str, salt: u64) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for b in token.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }

    fn embed_tokens(&self, tokens: impl Iterator<Item = String>) -> FeatureVector {
        let mut v = vec![0.0; self.dim];
        for t in tokens {
            for salt in 0..2u64 {
                let h = self.hash(&t, salt);
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                v[(h % self.dim as u64) as usize] += sign;
            }
        }
        FeatureVector::normalized(v)
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> FeatureVector {
        self.embed_tokens(Self::tokens(text))
    }

    /// Words of the label plus one token for the whole category, so that
    /// compound names sharing a word ("desk", "desk lamp") stay apart.
    fn embed_visual(&self, view: &AttributeSnapshot) -> FeatureVector {
        let text = view.attributes.iter().cloned().chain([view.category.replace('_', " ")]).collect::<Vec<_>>().join(" ");
        let identity = format!("category:{}", view.category.to_lowercase());
        self.embed_tokens(Self::tokens(&text).chain([identity]))
    }
}

/// Fused object feature: `normalize(embed_visual(view) + embed_text(label))`.
pub fn embed(view: &AttributeSnapshot, label: &str, p: &dyn EmbeddingProvider) -> FeatureVector {
    p.embed_visual(view).fuse(&p.embed_text(label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let p = HashingEmbedder::default();
        let a = p.embed_text("red mug");
        assert_eq!(a, p.embed_text("red mug"));
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!((FeatureVector::normalized(vec![0.0; 4]).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn related_phrases_are_closer() {
        let p = HashingEmbedder::default();
        let q = p.embed_text("red mug");
        let near = q.cosine(&p.embed_text("red mug near sink"));
        let far = q.cosine(&p.embed_text("blue sofa"));
        assert!(near > far, "{near} vs {far}");
    }

    #[test]
    fn visual_and_text_agree_on_same_description() {
        let p = HashingEmbedder::default();
        let snap = AttributeSnapshot { category: "remote_control".into(), attributes: BTreeSet::from(["black".into()]) };
        let f = embed(&snap, "black remote control", &p);
        assert!(f.cosine(&p.embed_text("black remote control")) > 0.9);
    }

    #[test]
    fn compound_categories_sharing_words_stay_apart() {
        let p = HashingEmbedder::default();
        let view = |c: &str| AttributeSnapshot { category: c.into(), attributes: BTreeSet::from(["white".into()]) };
        let desk = embed(&view("desk"), "white desk", &p);
        let lamp = embed(&view("desk_lamp"), "white desk lamp", &p);
        assert!(desk.cosine(&lamp) < 0.8);
    }
}
