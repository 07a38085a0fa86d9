//! Periodic CPU and RSS sampling of the benchmark process.
//!
//! The reference store runs in-process, so the harness's own process is the
//! system under test. For external systems the samples describe the client side.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::ResourceSample;
use crate::model::TimeInstant;

pub const SAMPLE_INTERVAL: Duration = Duration::from_secs(1);

#[derive(Clone, Copy)]
struct Reading {
    cpu_seconds: f64,
    rss_bytes: u64,
}

#[cfg(target_os = "linux")]
fn read_self() -> Option<Reading> {
    let stat = std::fs::read_to_string("/proc/self/stat").ok()?;
    // fields after the parenthesised command name start at `state`
    let rest = &stat[stat.rfind(')')? + 1..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let utime: u64 = fields.get(11)?.parse().ok()?;
    let stime: u64 = fields.get(12)?.parse().ok()?;
    let statm = std::fs::read_to_string("/proc/self/statm").ok()?;
    let resident: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    // SAFETY: sysconf has no preconditions.
    let (ticks, page) = unsafe { (libc::sysconf(libc::_SC_CLK_TCK), libc::sysconf(libc::_SC_PAGESIZE)) };
    if ticks <= 0 || page <= 0 {
        return None;
    }
    Some(Reading { cpu_seconds: (utime + stime) as f64 / ticks as f64, rss_bytes: resident * page as u64 })
}

#[cfg(not(target_os = "linux"))]
fn read_self() -> Option<Reading> {
    None
}

/// Background sampler; samples are returned by [`ResourceSampler::stop`].
pub struct ResourceSampler {
    stop: mpsc::Sender<()>,
    handle: JoinHandle<Vec<ResourceSample>>,
}

impl ResourceSampler {
    pub fn start() -> Self {
        Self::with_interval(SAMPLE_INTERVAL)
    }

    pub fn with_interval(interval: Duration) -> Self {
        let (stop, rx) = mpsc::channel::<()>();
        let handle = thread::spawn(move || {
            let mut samples: Vec<ResourceSample> = Vec::new();
            let Some(mut last) = read_self() else {
                return samples;
            };
            let mut last_at = Instant::now();
            loop {
                let finished = !matches!(rx.recv_timeout(interval), Err(RecvTimeoutError::Timeout));
                let now = Instant::now();
                let elapsed = now.duration_since(last_at).as_secs_f64();
                if let Some(r) = read_self() {
                    let t = TimeInstant::now();
                    if elapsed > 0.0 && samples.last().is_none_or(|s| s.t < t) {
                        samples.push(ResourceSample {
                            t,
                            cpu_percent: ((r.cpu_seconds - last.cpu_seconds) / elapsed * 100.0).max(0.0),
                            rss_bytes: r.rss_bytes,
                        });
                    }
                    last = r;
                }
                last_at = now;
                if finished {
                    return samples;
                }
            }
        });
        ResourceSampler { stop, handle }
    }

    pub fn stop(self) -> Vec<ResourceSample> {
        let _ = self.stop.send(());
        self.handle.join().unwrap_or_default()
    }
}
