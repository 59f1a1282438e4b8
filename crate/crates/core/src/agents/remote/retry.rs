//! Retry with exponential backoff and full jitter, plus the clock
//! abstraction shared with the rate limiter.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

/// Monotonic time and sleeping. Swapped for a fake in tests.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, duration: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration)
    }
}

/// A clock that only advances when slept on, recording every sleep.
#[derive(Debug, Default)]
pub struct FakeClock {
    state: Mutex<(Duration, Vec<Duration>)>,
}

impl FakeClock {
    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().unwrap().1.clone()
    }

    pub fn advance(&self, by: Duration) {
        self.state.lock().unwrap().0 += by;
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        self.state.lock().unwrap().0
    }

    fn sleep(&self, duration: Duration) {
        let mut s = self.state.lock().unwrap();
        s.0 += duration;
        s.1.push(duration);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the sleep after failed attempt `attempt` (0-based):
    /// `base * 2^attempt`, capped at `max_delay`.
    pub fn ceiling(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(31)).unwrap_or(u32::MAX);
        self.base_delay
            .checked_mul(factor)
            .unwrap_or(self.max_delay)
            .min(self.max_delay)
    }

    /// Full jitter: uniform in `[0, ceiling(attempt)]`.
    pub fn jittered<R: Rng + ?Sized>(&self, attempt: u32, rng: &mut R) -> Duration {
        let cap = self.ceiling(attempt).as_nanos() as u64;
        Duration::from_nanos(if cap == 0 { 0 } else { rng.random_range(0..=cap) })
    }
}

/// Outcome of one attempt as seen by the retry loop.
pub enum Attempt<T, E> {
    Done(T),
    /// Worth retrying (timeouts, throttling, server errors).
    Transient(E),
    /// Not worth retrying.
    Fatal(E),
}

/// Why the loop gave up.
#[derive(Debug)]
pub enum RetryFailure<E> {
    Fatal(E),
    Exhausted { attempts: u32, last: E },
}

pub fn retry<T, E, R, F>(
    policy: &RetryPolicy,
    clock: &dyn Clock,
    rng: &mut R,
    mut op: F,
) -> Result<T, RetryFailure<E>>
where
    R: Rng + ?Sized,
    F: FnMut(u32) -> Attempt<T, E>,
{
    let attempts = policy.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        match op(attempt) {
            Attempt::Done(v) => return Ok(v),
            Attempt::Fatal(e) => return Err(RetryFailure::Fatal(e)),
            Attempt::Transient(e) => {
                if attempt + 1 >= attempts {
                    return Err(RetryFailure::Exhausted {
                        attempts: attempt + 1,
                        last: e,
                    });
                }
                clock.sleep(policy.jittered(attempt, rng));
                attempt += 1;
            }
        }
    }
}
