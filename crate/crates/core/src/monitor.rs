//! Wall-clock and resident-memory sampling for a region of work.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

const SAMPLE_EVERY: Duration = Duration::from_millis(200);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceUsage {
    pub wall_clock_s: f64,
    /// `None` when the platform exposes no resident-set figure.
    pub peak_memory_bytes: Option<u64>,
    pub samples: u64,
}

/// Current resident set size from `/proc/self/status`.
pub fn current_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmRSS:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Samples memory on a background thread until [`stop`](Self::stop).
pub struct ResourceMonitor {
    start: Instant,
    stop: Arc<AtomicBool>,
    peak: Arc<AtomicU64>,
    samples: Arc<AtomicU64>,
    handle: Option<JoinHandle<()>>,
    supported: bool,
}

impl ResourceMonitor {
    pub fn start() -> Self {
        let supported = current_rss_bytes().is_some();
        let stop = Arc::new(AtomicBool::new(false));
        let peak = Arc::new(AtomicU64::new(current_rss_bytes().unwrap_or(0)));
        let samples = Arc::new(AtomicU64::new(u64::from(supported)));
        let handle = supported.then(|| {
            let (stop, peak, samples) = (stop.clone(), peak.clone(), samples.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    std::thread::sleep(SAMPLE_EVERY);
                    if let Some(rss) = current_rss_bytes() {
                        peak.fetch_max(rss, Ordering::Relaxed);
                        samples.fetch_add(1, Ordering::Relaxed);
                    }
                }
            })
        });
        if !supported {
            log::warn!("resident memory unavailable on this platform; recording wall-clock only");
        }
        ResourceMonitor {
            start: Instant::now(),
            stop,
            peak,
            samples,
            handle,
            supported,
        }
    }

    pub fn stop(mut self) -> ResourceUsage {
        let wall_clock_s = self.start.elapsed().as_secs_f64();
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
        if let Some(rss) = current_rss_bytes() {
            self.peak.fetch_max(rss, Ordering::Relaxed);
            self.samples.fetch_add(1, Ordering::Relaxed);
        }
        ResourceUsage {
            wall_clock_s,
            peak_memory_bytes: self.supported.then(|| self.peak.load(Ordering::Relaxed)),
            samples: self.samples.load(Ordering::Relaxed),
        }
    }
}

impl Drop for ResourceMonitor {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

/// Runs `f` under a monitor.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, ResourceUsage) {
    let m = ResourceMonitor::start();
    let out = f();
    (out, m.stop())
}
