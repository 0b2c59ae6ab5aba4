//! Bounded retry with jittered exponential backoff for provider calls.

use std::time::Duration;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    /// Fraction of the backoff added as uniform jitter, in [0, 1].
    pub jitter: f64,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
            jitter: 0.25,
            timeout: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; used by in-process mocks and tests.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            initial_backoff: Duration::ZERO,
            jitter: 0.0,
            timeout: Duration::from_secs(60),
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.initial_backoff.as_secs_f64() * 2f64.powi(attempt as i32);
        let jitter = if self.jitter > 0.0 {
            rand::rng().random_range(0.0..=self.jitter) * base
        } else {
            0.0
        };
        Duration::from_secs_f64(base + jitter)
    }

    /// Runs `op` until it succeeds, returns a non-retryable error, or the
    /// attempt budget is spent.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, Attempt>) -> Result<T> {
        let attempts = self.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match op() {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("attempt {}/{} failed: {msg}", attempt + 1, attempts);
                    last = msg;
                    if attempt + 1 < attempts {
                        std::thread::sleep(self.backoff(attempt));
                    }
                }
            }
        }
        Err(Error::Provider(format!(
            "giving up after {attempts} attempts: {last}"
        )))
    }
}

/// Outcome of a single failed attempt.
#[derive(Debug)]
pub enum Attempt {
    Retry(String),
    Fatal(Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn succeeds_after_transient_failures() {
        let mut calls = 0;
        let out = RetryPolicy::immediate(3).run(|| {
            calls += 1;
            if calls < 3 {
                Err(Attempt::Retry("flaky".into()))
            } else {
                Ok(calls)
            }
        });
        assert_eq!(out.unwrap(), 3);
    }

    #[test]
    fn gives_up_after_budget() {
        let mut calls = 0;
        let out: Result<()> = RetryPolicy::immediate(3).run(|| {
            calls += 1;
            Err(Attempt::Retry("down".into()))
        });
        assert_eq!(calls, 3);
        assert!(matches!(out, Err(Error::Provider(_))));
    }

    #[test]
    fn fatal_stops_immediately() {
        let mut calls = 0;
        let out: Result<()> = RetryPolicy::immediate(3).run(|| {
            calls += 1;
            Err(Attempt::Fatal(Error::Provider("bad".into())))
        });
        assert_eq!(calls, 1);
        assert!(out.is_err());
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy {
            jitter: 0.0,
            ..RetryPolicy::default()
        };
        assert_eq!(p.backoff(0), Duration::from_secs(1));
        assert_eq!(p.backoff(2), Duration::from_secs(4));
    }
}
