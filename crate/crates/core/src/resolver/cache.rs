//! LRU answer cache so a scan never sends the same request twice.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};

use async_trait::async_trait;
use lru::LruCache;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{DnsAnswer, DnsQuery, Resolver};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: u64,
}

/// Answer-transparent caching decorator: for any inner resolver and query
/// sequence, answers with and without the cache are element-wise identical.
pub struct CachingResolver<R> {
    inner: R,
    cache: Mutex<LruCache<DnsQuery, DnsAnswer>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<R> CachingResolver<R> {
    pub fn new(inner: R, capacity: usize) -> Self {
        let capacity = NonZeroUsize::new(capacity.max(1)).unwrap();
        CachingResolver {
            inner,
            cache: Mutex::new(LruCache::new(capacity)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.cache.lock().len() as u64,
        }
    }
}

#[async_trait]
impl<R: Resolver> Resolver for CachingResolver<R> {
    async fn resolve(&self, query: &DnsQuery) -> DnsAnswer {
        if let Some(answer) = self.cache.lock().get(query) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return answer.clone();
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let answer = self.inner.resolve(query).await;
        self.cache.lock().put(query.clone(), answer.clone());
        answer
    }
}
