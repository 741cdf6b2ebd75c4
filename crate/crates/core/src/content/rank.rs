use std::cmp::Ordering;

use super::TopicScore;
use crate::error::{Error, Result};

/// Linear weights combining PageRank and cosine similarity into one
/// ranking score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankWeights {
    pub pagerank: f64,
    pub cosine: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self { pagerank: 0.4, cosine: 0.6 }
    }
}

impl RankWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = self.pagerank.is_finite()
            && self.cosine.is_finite()
            && self.pagerank >= 0.0
            && self.cosine >= 0.0
            && self.pagerank + self.cosine > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("ranking weights must be non-negative with a positive sum, got {self:?}")))
        }
    }

    pub fn score(&self, topic: &TopicScore) -> f64 {
        self.pagerank * topic.pagerank + self.cosine * topic.cosine
    }
}

/// The `k` best topics by combined score, ties broken by ascending `kc_id`.
pub fn rank_topics(scores: &[TopicScore], k: usize, weights: RankWeights) -> Result<Vec<TopicScore>> {
    weights.validate()?;
    if k == 0 {
        return Err(Error::Config("top-k must be at least 1".into()));
    }
    let mut keyed: Vec<(f64, &TopicScore)> = scores.iter().map(|t| (weights.score(t), t)).collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.kc.kc_id.cmp(&b.1.kc.kc_id)));
    Ok(keyed.into_iter().take(k).map(|(_, t)| t.clone()).collect())
}
