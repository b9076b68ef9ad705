//! Clocks, the drop-oldest send queue and the deadline scheduler.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::stream::codec::{encode_frame, EncodeOptions};
use crate::stream::frame::RgbdFrame;
use crate::stream::wire::write_record;

pub const QUEUE_CAPACITY: usize = 4;

/// Monotonic nanosecond clock.
pub trait Clock: Send + Sync {
    fn now_ns(&self) -> u64;
    /// Blocks (or, for a fake clock, jumps) until `now_ns() >= t`.
    fn sleep_until(&self, t: u64);

    fn sleep(&self, d: u64) {
        self.sleep_until(self.now_ns() + d);
    }
}

/// Wall time measured from construction.
#[derive(Debug, Clone)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }

    fn sleep_until(&self, t: u64) {
        let now = self.now_ns();
        if t > now {
            std::thread::sleep(Duration::from_nanos(t - now));
        }
    }
}

/// Manually driven clock; sleeping advances it instantly. Clones share time.
#[derive(Debug, Clone, Default)]
pub struct FakeClock {
    now: Arc<AtomicU64>,
}

impl FakeClock {
    pub fn new(start_ns: u64) -> Self {
        Self {
            now: Arc::new(AtomicU64::new(start_ns)),
        }
    }

    pub fn advance(&self, d: u64) {
        self.now.fetch_add(d, Ordering::SeqCst);
    }

    pub fn set(&self, t: u64) {
        self.now.store(t, Ordering::SeqCst);
    }
}

impl Clock for FakeClock {
    fn now_ns(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep_until(&self, t: u64) {
        self.now.fetch_max(t, Ordering::SeqCst);
    }
}

#[derive(Debug)]
struct QueueState<T> {
    items: VecDeque<T>,
    dropped: Vec<T>,
    closed: bool,
}

/// Bounded FIFO that evicts its oldest item when full. Thread-safe; clones
/// share the queue.
#[derive(Debug)]
pub struct DropOldestQueue<T> {
    state: Arc<(Mutex<QueueState<T>>, Condvar)>,
    capacity: usize,
}

impl<T> Clone for DropOldestQueue<T> {
    fn clone(&self) -> Self {
        Self {
            state: Arc::clone(&self.state),
            capacity: self.capacity,
        }
    }
}

impl<T> DropOldestQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            state: Arc::new((
                Mutex::new(QueueState {
                    items: VecDeque::with_capacity(capacity),
                    dropped: Vec::new(),
                    closed: false,
                }),
                Condvar::new(),
            )),
            capacity,
        }
    }

    /// Enqueues `item`; returns true if the oldest item was evicted.
    pub fn push(&self, item: T) -> bool {
        let (lock, cv) = &*self.state;
        let mut s = lock.lock().unwrap();
        let mut evicted = false;
        if s.items.len() == self.capacity {
            let old = s.items.pop_front().unwrap();
            s.dropped.push(old);
            evicted = true;
        }
        s.items.push_back(item);
        cv.notify_one();
        evicted
    }

    pub fn try_pop(&self) -> Option<T> {
        self.state.0.lock().unwrap().items.pop_front()
    }

    /// Waits for an item; `None` once the queue is closed and drained.
    pub fn pop(&self) -> Option<T> {
        let (lock, cv) = &*self.state;
        let mut s = lock.lock().unwrap();
        loop {
            if let Some(x) = s.items.pop_front() {
                return Some(x);
            }
            if s.closed {
                return None;
            }
            s = cv.wait(s).unwrap();
        }
    }

    pub fn close(&self) {
        let (lock, cv) = &*self.state;
        lock.lock().unwrap().closed = true;
        cv.notify_all();
    }

    pub fn len(&self) -> usize {
        self.state.0.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_closed(&self) -> bool {
        self.state.0.lock().unwrap().closed
    }

    pub fn dropped_count(&self) -> usize {
        self.state.0.lock().unwrap().dropped.len()
    }

    pub fn take_dropped(&self) -> Vec<T> {
        std::mem::take(&mut self.state.0.lock().unwrap().dropped)
    }
}

/// Send slots at `start + round(n·1e9/fps)`. After an overrun the schedule
/// skips to the first slot not earlier than the current time; it never
/// drifts because each deadline is computed from `n` directly.
#[derive(Debug, Clone)]
pub struct DeadlineSchedule {
    start_ns: u64,
    fps: f64,
    slot: u64,
}

impl DeadlineSchedule {
    pub fn new(start_ns: u64, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::param("fps must be positive"));
        }
        Ok(Self { start_ns, fps, slot: 0 })
    }

    pub fn deadline_of(&self, n: u64) -> u64 {
        self.start_ns + (n as f64 * 1e9 / self.fps).round() as u64
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn deadline(&self) -> u64 {
        self.deadline_of(self.slot)
    }

    /// Moves to the next slot, skipping any whose deadline is before `now`.
    pub fn advance(&mut self, now: u64) {
        self.slot += 1;
        if self.deadline() < now {
            let est = ((now - self.start_ns) as f64 * self.fps / 1e9).floor() as u64;
            self.slot = self.slot.max(est.saturating_sub(1));
            while self.deadline() < now {
                self.slot += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentFrame {
    pub frame_seq: u64,
    pub slot: u64,
    pub deadline_ns: u64,
    /// Clock time when the write completed.
    pub done_ns: u64,
    pub bytes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SendReport {
    pub sent: Vec<SentFrame>,
    pub dropped: Vec<u64>,
}

/// Paces `frames` onto `sink` at `fps`. Each frame becomes available to the
/// sender at its `capture_ts_ns`; arrivals queue in a drop-oldest queue of
/// capacity 4 and the oldest queued frame is sent at each deadline. A slow
/// sink therefore costs the oldest waiting frames, never the newest.
///
/// Deterministic under a [`FakeClock`] whose time the sink may advance to
/// model stalls.
pub fn send_frames(
    frames: impl IntoIterator<Item = RgbdFrame>,
    sink: &mut impl Write,
    fps: f64,
    clock: &dyn Clock,
    opts: &EncodeOptions,
) -> Result<SendReport> {
    let mut schedule = DeadlineSchedule::new(clock.now_ns(), fps)?;
    let queue = DropOldestQueue::new(QUEUE_CAPACITY);
    let mut source = frames.into_iter().peekable();
    let mut report = SendReport::default();
    loop {
        clock.sleep_until(schedule.deadline());
        let now = clock.now_ns();
        while let Some(f) = source.next_if(|f| f.capture_ts_ns <= now) {
            queue.push(f);
        }
        report.dropped.extend(queue.take_dropped().iter().map(|f| f.frame_seq));
        match queue.try_pop() {
            Some(frame) => {
                let encoded = encode_frame(&frame, opts)?;
                write_record(sink, &encoded)?;
                report.sent.push(SentFrame {
                    frame_seq: frame.frame_seq,
                    slot: schedule.slot(),
                    deadline_ns: schedule.deadline(),
                    done_ns: clock.now_ns(),
                    bytes: encoded.len(),
                });
            }
            None if source.peek().is_none() => break,
            None => {}
        }
        schedule.advance(clock.now_ns());
    }
    sink.flush()?;
    Ok(report)
}
