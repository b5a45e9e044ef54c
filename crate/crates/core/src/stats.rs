//! Single-pass summary statistics with exact-merge support.
//!
//! Accumulation follows Welford's recurrence, merging follows Chan's
//! pairwise-combination formula, so a set of partial aggregates can be
//! combined in any tree shape and still agree with a two-pass computation
//! over the concatenated inputs. Population variance is `m2 / count` and is
//! derived at read time rather than stored.

use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    /// Aggregation input was NaN or infinite.
    #[error("invalid measurement: {0} is not finite")]
    InvalidMeasurement(f64),
}

/// Mergeable aggregate of a stream of scalar measurements.
///
/// The scalar type defaults to `f64`; any `num_traits::Float` works. The
/// empty aggregate is the merge identity: `min` starts at `+inf` and `max`
/// at `-inf` so the first accumulated value replaces both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats<T = f64> {
    pub count: u64,
    pub sum: T,
    pub min: T,
    pub max: T,
    pub mean: T,
    pub m2: T,
}

impl<T: Float> Default for SummaryStats<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Float> SummaryStats<T> {
    pub fn new() -> Self {
        Self {
            count: 0,
            sum: T::zero(),
            min: T::infinity(),
            max: T::neg_infinity(),
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    /// Folds one measurement into the aggregate.
    pub fn accumulate(&mut self, value: T) -> Result<(), StatsError> {
        if !value.is_finite() {
            return Err(StatsError::InvalidMeasurement(
                value.to_f64().unwrap_or(f64::NAN),
            ));
        }
        self.count += 1;
        self.sum = self.sum + value;
        self.min = self.min.min(value);
        self.max = self.max.max(value);
        let delta = value - self.mean;
        self.mean = self.mean + delta / T::from(self.count).unwrap();
        let delta2 = value - self.mean;
        self.m2 = self.m2 + delta * delta2;
        Ok(())
    }

    /// Combines two aggregates as if their inputs had been concatenated.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let na = T::from(self.count).unwrap();
        let nb = T::from(other.count).unwrap();
        let n = na + nb;
        let delta = other.mean - self.mean;
        Self {
            count: self.count + other.count,
            sum: self.sum + other.sum,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    /// Population variance (`m2 / count`); zero for an empty aggregate.
    pub fn population_variance(&self) -> T {
        if self.count == 0 {
            T::zero()
        } else {
            self.m2 / T::from(self.count).unwrap()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-pass reference: mean first, then squared deviations.
    fn two_pass(values: &[f64]) -> SummaryStats {
        let count = values.len() as u64;
        let sum: f64 = values.iter().sum();
        let mean = if count == 0 { 0.0 } else { sum / count as f64 };
        let m2 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        SummaryStats {
            count,
            sum,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            m2,
        }
    }

    fn assert_close(a: &SummaryStats, b: &SummaryStats) {
        let rel = |x: f64, y: f64| {
            let scale = x.abs().max(y.abs()).max(1e-300);
            (x - y).abs() / scale
        };
        assert_eq!(a.count, b.count);
        assert!(rel(a.sum, b.sum) < 1e-9, "sum {} vs {}", a.sum, b.sum);
        assert_eq!(a.min, b.min);
        assert_eq!(a.max, b.max);
        assert!(rel(a.mean, b.mean) < 1e-9, "mean {} vs {}", a.mean, b.mean);
        assert!(rel(a.m2, b.m2) < 1e-9, "m2 {} vs {}", a.m2, b.m2);
        assert!(
            rel(a.population_variance(), b.population_variance()) < 1e-9,
            "variance {} vs {}",
            a.population_variance(),
            b.population_variance()
        );
    }

    fn splitmix64(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    #[test]
    fn accumulate_small_case_matches_two_pass() {
        let mut s = SummaryStats::new();
        for v in [1.0, 2.0, 3.0, 4.0] {
            s.accumulate(v).unwrap();
        }
        assert_eq!(s.count, 4);
        assert_eq!(s.sum, 10.0);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert_eq!(s.mean, 2.5);
        assert!((s.m2 - 5.0).abs() < 1e-12);
        assert!((s.population_variance() - 1.25).abs() < 1e-12);
        assert_close(&s, &two_pass(&[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn merge_two_halves() {
        let mut a = SummaryStats::new();
        a.accumulate(1.0).unwrap();
        a.accumulate(2.0).unwrap();
        let mut b = SummaryStats::new();
        b.accumulate(3.0).unwrap();
        b.accumulate(4.0).unwrap();
        let m = a.merge(&b);
        assert_eq!(m.count, 4);
        assert_eq!(m.mean, 2.5);
        assert!((m.m2 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn merge_with_identity_is_exact() {
        let mut s = SummaryStats::new();
        for v in [5.5, -2.0, 17.25] {
            s.accumulate(v).unwrap();
        }
        let id = SummaryStats::new();
        assert_eq!(s.merge(&id), s);
        assert_eq!(id.merge(&s), s);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut s = SummaryStats::new();
        assert!(matches!(
            s.accumulate(f64::NAN),
            Err(StatsError::InvalidMeasurement(_))
        ));
        assert!(matches!(
            s.accumulate(f64::INFINITY),
            Err(StatsError::InvalidMeasurement(_))
        ));
        // A rejected value must not corrupt the aggregate.
        assert_eq!(s.count, 0);
        s.accumulate(1.0).unwrap();
        assert_eq!(s.count, 1);
    }

    #[test]
    fn any_permutation_and_merge_tree_matches_two_pass() {
        let mut state = 0xfeed_beef_u64;
        for trial in 0..200 {
            let len = 1 + (splitmix64(&mut state) % 64) as usize;
            let values: Vec<f64> = (0..len)
                .map(|_| (splitmix64(&mut state) % 200_000) as f64 / 1000.0 - 100.0)
                .collect();
            let oracle = two_pass(&values);

            // Shuffled single-pass accumulation.
            let mut shuffled = values.clone();
            for i in (1..shuffled.len()).rev() {
                let j = (splitmix64(&mut state) % (i as u64 + 1)) as usize;
                shuffled.swap(i, j);
            }
            let mut serial = SummaryStats::new();
            for &v in &shuffled {
                serial.accumulate(v).unwrap();
            }
            assert_close(&serial, &oracle);

            // Random binary merge tree over random-size chunks.
            let mut parts: Vec<SummaryStats> = Vec::new();
            let mut rest = &shuffled[..];
            while !rest.is_empty() {
                let take = 1 + (splitmix64(&mut state) as usize % rest.len());
                let (chunk, tail) = rest.split_at(take);
                let mut p = SummaryStats::new();
                for &v in chunk {
                    p.accumulate(v).unwrap();
                }
                parts.push(p);
                rest = tail;
            }
            while parts.len() > 1 {
                let i = (splitmix64(&mut state) as usize) % (parts.len() - 1);
                let right = parts.remove(i + 1);
                parts[i] = parts[i].merge(&right);
            }
            assert_close(&parts[0], &oracle);
            let _ = trial;
        }
    }

    #[test]
    fn generic_scalar_f32() {
        let mut s: SummaryStats<f32> = SummaryStats::new();
        for v in [1.0f32, 2.0, 3.0] {
            s.accumulate(v).unwrap();
        }
        assert_eq!(s.count, 3);
        assert_eq!(s.mean, 2.0);
    }
}
