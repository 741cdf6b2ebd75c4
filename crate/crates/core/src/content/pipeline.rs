use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::{Duration, Instant};

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::cache::{AnnotationCache, CacheRecord};
use super::client::{extract_concepts, Annotator};
use super::fragment::{fragment_transcript, slice_chars, CharSpan, DEFAULT_FRAGMENT_LEN};
use super::rank::{rank_topics, RankWeights};
use super::vocab::Vocabulary;
use super::{FragmentAnnotation, TopicScore};
use crate::error::{Error, Result};

const MAX_ATTEMPTS: u32 = 3;

/// Hex SHA-256 of the fragment text; the cache key.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Token bucket shared by all request workers.
pub struct RateLimiter {
    per_second: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(per_second: f64, burst: u32) -> Self {
        let burst = f64::from(burst.max(1));
        Self { per_second, burst, state: Mutex::new((burst, Instant::now())) }
    }

    pub fn unlimited() -> Self {
        Self::new(f64::INFINITY, 1)
    }

    pub fn acquire(&self) {
        if self.per_second.is_infinite() {
            return;
        }
        loop {
            let wait = {
                let mut st = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.per_second;
                st.0 = (st.0 + refill).min(self.burst);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.per_second
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

fn request_with_retry(annotator: &dyn Annotator, limiter: &RateLimiter, text: &str) -> Result<Value> {
    let mut attempt = 0;
    loop {
        limiter.acquire();
        match annotator.annotate(text) {
            Err(e) if e.is_retryable() && attempt + 1 < MAX_ATTEMPTS => {
                attempt += 1;
                log::warn!("annotation request failed ({e}); retry {attempt}");
                std::thread::sleep(Duration::from_millis(250 << attempt));
            }
            other => return other,
        }
    }
}

fn to_topics(response: &Value, vocab: &mut Vocabulary) -> Result<Vec<TopicScore>> {
    Ok(extract_concepts(response)?
        .into_iter()
        .map(|c| TopicScore { kc: vocab.intern(&c.title, &c.page_url), pagerank: c.pagerank, cosine: c.cosine })
        .collect())
}

/// Annotates one fragment, consulting the cache first. A cache hit never
/// contacts the service.
pub fn annotate_fragment(
    annotator: &dyn Annotator,
    cache: &AnnotationCache,
    vocab: &mut Vocabulary,
    lecture_id: &str,
    fragment_index: usize,
    text: &str,
) -> Result<Vec<TopicScore>> {
    if text.is_empty() {
        return Err(Error::Empty("fragment text"));
    }
    let hash = content_hash(text);
    if let Some(rec) = cache.get(&hash)? {
        return Ok(rec.topics);
    }
    let response = request_with_retry(annotator, &RateLimiter::unlimited(), text)?;
    let topics = to_topics(&response, vocab)?;
    cache.put(&CacheRecord {
        hash,
        lecture_id: lecture_id.to_string(),
        fragment_index,
        response,
        topics: topics.clone(),
    })?;
    Ok(topics)
}

#[derive(Debug, Clone)]
pub struct AnnotateOptions {
    pub fragment_len: usize,
    pub top_k: usize,
    pub weights: RankWeights,
    pub jobs: usize,
    pub requests_per_second: f64,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        Self {
            fragment_len: DEFAULT_FRAGMENT_LEN,
            top_k: 5,
            weights: RankWeights::default(),
            jobs: 4,
            requests_per_second: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnnotateStats {
    pub fragments: usize,
    pub cache_hits: usize,
    pub requests: usize,
    /// `(lecture_id, fragment_index, error)` for fragments left unannotated.
    pub failures: Vec<(String, usize, String)>,
}

struct WorkItem {
    lecture_id: String,
    fragment_index: usize,
    span: CharSpan,
    hash: String,
    text: String,
}

/// Fragments every transcript, annotates the fragments missing from the
/// cache with up to `jobs` concurrent requests, and returns the ranked
/// top-k annotation of every fragment that succeeded.
///
/// Responses are folded into the vocabulary and cache in (lecture id,
/// fragment index) order, so `kc_id` assignment does not depend on which
/// request finishes first.
pub fn annotate_lectures(
    transcripts: &[(String, String)],
    annotator: &dyn Annotator,
    cache: &AnnotationCache,
    vocab: &mut Vocabulary,
    opts: &AnnotateOptions,
) -> Result<(Vec<FragmentAnnotation>, AnnotateStats)> {
    opts.weights.validate()?;
    let mut sorted: Vec<&(String, String)> = transcripts.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));

    let mut items = Vec::new();
    for (lecture_id, text) in sorted {
        for (fragment_index, span) in fragment_transcript(text, opts.fragment_len)?.into_iter().enumerate() {
            let piece = slice_chars(text, span).to_string();
            items.push(WorkItem {
                lecture_id: lecture_id.clone(),
                fragment_index,
                span,
                hash: content_hash(&piece),
                text: piece,
            });
        }
    }

    let mut stats = AnnotateStats { fragments: items.len(), ..Default::default() };
    let pending: Vec<usize> = (0..items.len()).filter(|&i| !cache.contains(&items[i].hash)).collect();
    stats.cache_hits = items.len() - pending.len();
    stats.requests = pending.len();

    let limiter = RateLimiter::new(opts.requests_per_second, opts.jobs.max(1) as u32);
    let next = AtomicUsize::new(0);
    let mut failed = vec![false; items.len()];
    let write_error = std::thread::scope(|scope| -> Result<()> {
        let (tx, rx) = mpsc::channel::<(usize, Result<Value>)>();
        for _ in 0..opts.jobs.max(1).min(pending.len().max(1)) {
            let tx = tx.clone();
            let (items, pending, next, limiter) = (&items, &pending, &next, &limiter);
            scope.spawn(move || loop {
                let slot = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = pending.get(slot) else { break };
                let res = request_with_retry(annotator, limiter, &items[i].text);
                if tx.send((slot, res)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Fold results in submission order.
        let mut buffered = BTreeMap::new();
        let mut expect = 0;
        for (slot, res) in rx {
            buffered.insert(slot, res);
            while let Some(res) = buffered.remove(&expect) {
                let item = &items[pending[expect]];
                let outcome = res.and_then(|response| {
                    let topics = to_topics(&response, vocab)?;
                    Ok((response, topics))
                });
                match outcome {
                    Ok((response, topics)) => cache.put(&CacheRecord {
                        hash: item.hash.clone(),
                        lecture_id: item.lecture_id.clone(),
                        fragment_index: item.fragment_index,
                        response,
                        topics,
                    })?,
                    Err(e) => {
                        failed[pending[expect]] = true;
                        stats.failures.push((item.lecture_id.clone(), item.fragment_index, e.to_string()));
                    }
                }
                expect += 1;
            }
        }
        Ok(())
    });
    write_error?;

    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        if failed[i] {
            continue;
        }
        let rec = cache.get(&item.hash)?.ok_or_else(|| Error::MissingAnnotation {
            lecture_id: item.lecture_id.clone(),
            fragment_index: item.fragment_index,
        })?;
        out.push(FragmentAnnotation {
            lecture_id: item.lecture_id.clone(),
            fragment_index: item.fragment_index,
            char_span: item.span,
            topics: rank_topics(&rec.topics, opts.top_k, opts.weights)?,
        });
    }
    Ok((out, stats))
}
