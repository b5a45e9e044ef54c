//! Event-time window assignment.
//!
//! Windows are half-open intervals `[start, start + size)` aligned to the
//! epoch: tumbling windows start at multiples of their size, hopping windows
//! at multiples of their advance. An event belongs to every window that
//! contains its timestamp; for hopping windows that is at most
//! `ceil(size / advance)` windows, fewer near the epoch because windows
//! never start before 0.

/// Window geometry. `size_ms == advance_ms` describes a tumbling window,
/// `advance_ms < size_ms` a hopping window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub size_ms: u64,
    pub advance_ms: u64,
}

impl WindowSpec {
    pub fn new(size_ms: u64, advance_ms: u64) -> Self {
        assert!(advance_ms >= 1, "window advance must be at least 1 ms");
        assert!(size_ms >= advance_ms, "window size must be >= advance");
        Self {
            size_ms,
            advance_ms,
        }
    }

    pub fn tumbling(size_ms: u64) -> Self {
        Self::new(size_ms, size_ms)
    }

    pub fn is_tumbling(&self) -> bool {
        self.size_ms == self.advance_ms
    }
}

/// Distinguishes the two aggregate window shapes in use-case configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Tumbling,
    Hopping,
}

/// Start of the unique tumbling window containing `event_time`.
pub fn assign_tumbling(event_time: u64, size_ms: u64) -> u64 {
    assert!(size_ms >= 1);
    (event_time / size_ms) * size_ms
}

/// Starts (ascending) of every hopping window containing `event_time`.
pub fn assign_hopping(event_time: u64, size_ms: u64, advance_ms: u64) -> Vec<u64> {
    assert!(advance_ms >= 1 && size_ms >= advance_ms);
    let newest = (event_time / advance_ms) * advance_ms;
    let mut starts = Vec::with_capacity(size_ms.div_ceil(advance_ms) as usize);
    let mut start = newest;
    loop {
        if start + size_ms > event_time {
            starts.push(start);
        } else {
            break;
        }
        if start < advance_ms {
            break;
        }
        start -= advance_ms;
    }
    starts.reverse();
    starts
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: u64 = 86_400_000;

    /// Brute-force oracle: scan every aligned window start near the event.
    fn brute_force_windows(event_time: u64, size: u64, advance: u64) -> Vec<u64> {
        let mut starts = Vec::new();
        let mut s = 0u64;
        while s <= event_time {
            if s + size > event_time {
                starts.push(s);
            }
            s += advance;
        }
        starts
    }

    #[test]
    fn tumbling_floors_to_size_multiple() {
        assert_eq!(assign_tumbling(0, 60_000), 0);
        assert_eq!(assign_tumbling(59_999, 60_000), 0);
        assert_eq!(assign_tumbling(60_000, 60_000), 60_000);
        assert_eq!(assign_tumbling(150_000, 60_000), 120_000);
    }

    #[test]
    fn hopping_three_day_window_one_day_advance() {
        // Event halfway through day 2 falls in the windows starting at
        // days 0, 1 and 2.
        let t = 2 * DAY + DAY / 2;
        assert_eq!(assign_hopping(t, 3 * DAY, DAY), vec![0, DAY, 2 * DAY]);
        // Near the epoch, earlier windows do not exist.
        assert_eq!(assign_hopping(DAY / 2, 3 * DAY, DAY), vec![0]);
        assert_eq!(assign_hopping(DAY + 1, 3 * DAY, DAY), vec![0, DAY]);
    }

    #[test]
    fn hopping_with_equal_advance_is_tumbling() {
        for t in [0u64, 1, 999, 1000, 123_456, 999_999] {
            assert_eq!(
                assign_hopping(t, 1000, 1000),
                vec![assign_tumbling(t, 1000)]
            );
        }
    }

    #[test]
    fn hopping_matches_brute_force_enumeration() {
        fn splitmix64(state: &mut u64) -> u64 {
            *state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = *state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        }
        let mut state = 0x77_u64;
        for _ in 0..2000 {
            let advance = 1 + splitmix64(&mut state) % 5000;
            let size =
                advance * (1 + splitmix64(&mut state) % 7) + splitmix64(&mut state) % advance;
            let t = splitmix64(&mut state) % (20 * size);
            let got = assign_hopping(t, size, advance);
            let expect = brute_force_windows(t, size, advance);
            assert_eq!(got, expect, "t={t} size={size} advance={advance}");
            // Shape: ascending, bounded by ceil(size/advance).
            assert!(got.windows(2).all(|w| w[0] < w[1]));
            assert!(got.len() as u64 <= size.div_ceil(advance));
            assert!(!got.is_empty());
        }
    }
}
