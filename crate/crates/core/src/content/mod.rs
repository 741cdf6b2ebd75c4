//! Content analytics: transcript fragmentation, entity-linking annotation
//! with a persistent cache, and top-k topic ranking.

mod cache;
mod client;
mod fragment;
mod pipeline;
mod rank;
mod vocab;

use serde::{Deserialize, Serialize};

pub use cache::{AnnotationCache, CacheRecord};
pub use client::{extract_concepts, Annotator, RawConcept, WikifierClient, DEFAULT_CHAR_LIMIT};
pub use fragment::{fragment_transcript, slice_chars, CharSpan, DEFAULT_FRAGMENT_LEN};
pub use pipeline::{annotate_fragment, annotate_lectures, content_hash, AnnotateOptions, AnnotateStats, RateLimiter};
pub use rank::{rank_topics, RankWeights};
pub use vocab::Vocabulary;

/// Stable integer identifier of a knowledge component (one Wikipedia page).
pub type KcId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KnowledgeComponent {
    pub kc_id: KcId,
    pub title: String,
    pub page_url: String,
}

/// One concept reported for a fragment, with its two relevance statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicScore {
    pub kc: KnowledgeComponent,
    pub pagerank: f64,
    pub cosine: f64,
}

/// A fragment's ranked top-k knowledge components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentAnnotation {
    pub lecture_id: String,
    pub fragment_index: usize,
    pub char_span: CharSpan,
    pub topics: Vec<TopicScore>,
}
