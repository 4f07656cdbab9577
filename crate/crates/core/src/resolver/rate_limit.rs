//! Token-bucket rate limiting for outbound DNS queries.

use std::time::Duration;

use async_trait::async_trait;
use tokio::sync::Mutex;
use tokio::time::Instant;

use super::{DnsAnswer, DnsQuery, Resolver};

struct BucketState {
    tokens: f64,
    refilled_at: Instant,
}

/// Decorator holding the sustained query rate to the inner resolver at or
/// below `qps`, with an initial burst of `ceil(qps)` tokens. Acquisition is
/// serialized through one async mutex; queries are never dropped or
/// reordered relative to per-caller issue order.
pub struct RateLimitedResolver<R> {
    inner: R,
    qps: f64,
    burst: f64,
    state: Mutex<BucketState>,
}

impl<R> RateLimitedResolver<R> {
    pub fn new(inner: R, qps: f64) -> Self {
        assert!(qps > 0.0, "qps must be positive");
        let burst = qps.ceil().max(1.0);
        RateLimitedResolver {
            inner,
            qps,
            burst,
            state: Mutex::new(BucketState {
                tokens: burst, // bucket starts full
                refilled_at: Instant::now(),
            }),
        }
    }

    async fn acquire(&self) {
        let mut state = self.state.lock().await;
        let now = Instant::now();
        let elapsed = now.duration_since(state.refilled_at).as_secs_f64();
        state.tokens = (state.tokens + elapsed * self.qps).min(self.burst);
        state.refilled_at = now;

        if state.tokens >= 1.0 {
            state.tokens -= 1.0;
            return;
        }

        // Sleep while holding the lock: waiters queue up and each pays
        // exactly its own token interval.
        let wait = Duration::from_secs_f64((1.0 - state.tokens) / self.qps);
        tokio::time::sleep(wait).await;
        state.tokens = 0.0;
        state.refilled_at = Instant::now();
    }
}

#[async_trait]
impl<R: Resolver> Resolver for RateLimitedResolver<R> {
    async fn resolve(&self, query: &DnsQuery) -> DnsAnswer {
        self.acquire().await;
        self.inner.resolve(query).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolver::{RrType, ZoneFixture};

    fn query(i: usize) -> DnsQuery {
        DnsQuery::new(&format!("q{i}.test"), RrType::Txt)
    }

    #[tokio::test(start_paused = true)]
    async fn hundred_queries_at_ten_qps_take_nine_seconds() {
        let limited = RateLimitedResolver::new(ZoneFixture::new(), 10.0);
        let start = Instant::now();
        for i in 0..100 {
            limited.resolve(&query(i)).await;
        }
        let elapsed = start.elapsed();
        // 10-token burst, then 90 more at 10/s.
        assert!(elapsed >= Duration::from_secs(9), "elapsed {elapsed:?}");
        assert!(elapsed < Duration::from_secs(10), "elapsed {elapsed:?}");
    }

    #[tokio::test(start_paused = true)]
    async fn high_qps_adds_no_measurable_delay() {
        let limited = RateLimitedResolver::new(ZoneFixture::new(), 1000.0);
        let start = Instant::now();
        for i in 0..10 {
            limited.resolve(&query(i)).await;
        }
        assert!(start.elapsed() < Duration::from_millis(1));
    }

    #[tokio::test(start_paused = true)]
    async fn initial_burst_is_free() {
        let limited = RateLimitedResolver::new(ZoneFixture::new(), 7.3);
        let start = Instant::now();
        for i in 0..8 {
            // ceil(7.3) = 8 tokens available immediately
            limited.resolve(&query(i)).await;
        }
        assert_eq!(start.elapsed(), Duration::ZERO);
        limited.resolve(&query(8)).await;
        assert!(start.elapsed() > Duration::ZERO);
    }
}
