//! Sliding-window request throttling.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Manually advanced clock; `sleep` moves time forward instantly.
#[derive(Default)]
pub struct SimClock {
    now: Mutex<Duration>,
    slept: Mutex<Vec<Duration>>,
}

impl SimClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().expect("sim clock") += d;
    }

    /// Every sleep requested so far.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().expect("sim clock").clone()
    }
}

impl Clock for SimClock {
    fn now(&self) -> Duration {
        *self.now.lock().expect("sim clock")
    }

    fn sleep(&self, d: Duration) {
        self.slept.lock().expect("sim clock").push(d);
        self.advance(d);
    }
}

const WINDOW: Duration = Duration::from_secs(60);

/// Admits at most `rpm` requests in any 60-second window.
pub struct RateLimiter {
    rpm: usize,
    issued: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(rpm: u32) -> Self {
        Self { rpm: rpm.max(1) as usize, issued: Mutex::new(VecDeque::new()) }
    }

    /// Blocks until a request may be issued, then records it.
    pub fn acquire(&self, clock: &dyn Clock) {
        let mut issued = self.issued.lock().expect("rate limiter");
        loop {
            let now = clock.now();
            while issued.front().is_some_and(|t| now >= *t + WINDOW) {
                issued.pop_front();
            }
            if issued.len() < self.rpm {
                issued.push_back(now);
                return;
            }
            let oldest = *issued.front().expect("window is full");
            clock.sleep(oldest + WINDOW - now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn never_exceeds_cap_in_any_window() {
        let clock = SimClock::default();
        let limiter = RateLimiter::new(10);
        let mut stamps = Vec::new();
        for i in 0..57 {
            // irregular arrivals
            clock.advance(Duration::from_millis((i % 7) * 900));
            limiter.acquire(&clock);
            stamps.push(clock.now());
        }
        for (i, start) in stamps.iter().enumerate() {
            let in_window = stamps[i..].iter().take_while(|t| **t < *start + WINDOW).count();
            assert!(in_window <= 10, "{in_window} requests within 60 s of {start:?}");
        }
        assert!(!clock.sleeps().is_empty());
    }

    #[test]
    fn under_cap_never_sleeps() {
        let clock = SimClock::default();
        let limiter = RateLimiter::new(5);
        for _ in 0..5 {
            limiter.acquire(&clock);
        }
        assert!(clock.sleeps().is_empty());
        limiter.acquire(&clock);
        assert_eq!(clock.sleeps(), [WINDOW]);
    }
}
