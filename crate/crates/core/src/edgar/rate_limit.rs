use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Sliding one-second-window rate limiter shared by all fetch workers.
///
/// `acquire` blocks until issuing one more request keeps the trailing window
/// at or under the cap. SEC fair-access guidance allows 10 requests/second,
/// which is the default cap.
pub struct RateLimiter {
    cap: usize,
    window: Duration,
    recent: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn new(cap: usize) -> Self {
        assert!(cap >= 1, "rate cap must be at least 1");
        Self {
            cap,
            window: Duration::from_secs(1),
            recent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut recent = self.recent.lock().unwrap();
                let now = Instant::now();
                while let Some(&front) = recent.front() {
                    if now.duration_since(front) >= self.window {
                        recent.pop_front();
                    } else {
                        break;
                    }
                }
                if recent.len() < self.cap {
                    recent.push_back(now);
                    return;
                }
                // Window is full; sleep until the oldest request ages out.
                self.window - now.duration_since(*recent.front().unwrap())
            };
            std::thread::sleep(wait + Duration::from_millis(1));
        }
    }
}
