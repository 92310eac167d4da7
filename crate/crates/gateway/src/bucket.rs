//! Token-bucket rate limiter.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketConfig {
    pub capacity: f64,
    /// Tokens added per second.
    pub refill_rate: f64,
}

impl Default for BucketConfig {
    fn default() -> Self {
        Self { capacity: 20.0, refill_rate: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acquire {
    Allowed,
    /// Seconds until enough tokens will have accumulated.
    Denied { retry_after: f64 },
}

/// Invariant: `0 <= tokens <= capacity` after every call.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBucket {
    capacity: f64,
    refill_rate: f64,
    tokens: f64,
    last_refill: f64,
}

impl TokenBucket {
    /// A full bucket whose clock starts at `now` seconds.
    pub fn new(config: BucketConfig, now: f64) -> Self {
        Self { capacity: config.capacity, refill_rate: config.refill_rate, tokens: config.capacity, last_refill: now }
    }

    pub fn tokens(&self) -> f64 {
        self.tokens
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    fn refill(&mut self, now: f64) {
        if now > self.last_refill {
            self.tokens = (self.tokens + self.refill_rate * (now - self.last_refill)).min(self.capacity);
            self.last_refill = now;
        }
    }

    /// Takes `n` tokens at time `now` (seconds) if available. Time never runs
    /// backwards for a bucket; an earlier `now` is treated as no elapsed time.
    pub fn acquire(&mut self, n: f64, now: f64) -> Acquire {
        self.refill(now);
        if self.tokens >= n {
            self.tokens -= n;
            Acquire::Allowed
        } else if self.refill_rate > 0.0 && n <= self.capacity {
            Acquire::Denied { retry_after: (n - self.tokens) / self.refill_rate }
        } else {
            Acquire::Denied { retry_after: f64::INFINITY }
        }
    }
}
