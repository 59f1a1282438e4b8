use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::retry::Clock;

/// Token bucket shared by every backend talking to one provider.
/// Holds up to `requests_per_minute` tokens and refills continuously.
pub struct RateLimiter {
    capacity: f64,
    per_second: f64,
    clock: Arc<dyn Clock>,
    state: Mutex<Bucket>,
}

struct Bucket {
    tokens: f64,
    stamp: Duration,
}

impl RateLimiter {
    pub fn new(requests_per_minute: u32, clock: Arc<dyn Clock>) -> Self {
        let capacity = requests_per_minute.max(1) as f64;
        let stamp = clock.now();
        RateLimiter {
            capacity,
            per_second: capacity / 60.0,
            clock,
            state: Mutex::new(Bucket {
                tokens: capacity,
                stamp,
            }),
        }
    }

    /// Blocks until a token is available, then consumes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut b = self.state.lock().expect("limiter poisoned");
                let now = self.clock.now();
                let elapsed = now.saturating_sub(b.stamp).as_secs_f64();
                b.tokens = (b.tokens + elapsed * self.per_second).min(self.capacity);
                b.stamp = now;
                if b.tokens >= 1.0 {
                    b.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - b.tokens) / self.per_second)
            };
            self.clock.sleep(wait);
        }
    }
}
