//! Ordinary least squares on (x, y) points.

use num_traits::Float;

/// Fitted line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line<T> {
    pub slope: T,
    pub intercept: T,
    /// Residual sum of squares against the fitted line.
    pub rss: T,
    pub len: usize,
}

/// Fits by the centered normal equations: slope = sxy / sxx around the
/// means, which is numerically stable for large-x series like epoch
/// timestamps. Returns `None` for fewer than two points or when all x
/// coincide (sxx = 0, slope undefined).
pub fn fit<T: Float>(points: &[(T, T)]) -> Option<Line<T>> {
    if points.len() < 2 {
        return None;
    }
    let n = num_traits::cast::<usize, T>(points.len())?;
    let mut x_sum = T::zero();
    let mut y_sum = T::zero();
    for (x, y) in points {
        x_sum = x_sum + *x;
        y_sum = y_sum + *y;
    }
    let x_mean = x_sum / n;
    let y_mean = y_sum / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (x, y) in points {
        let dx = *x - x_mean;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * (*y - y_mean);
    }
    if sxx <= T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let mut rss = T::zero();
    for (x, y) in points {
        let r = *y - (slope * *x + intercept);
        rss = rss + r * r;
    }
    Some(Line {
        slope,
        intercept,
        rss,
        len: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook normal equations, deliberately uncentered, as an
    /// independent formulation.
    fn fit_uncentered(points: &[(f64, f64)]) -> (f64, f64) {
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        (slope, (sy - slope * sx) / n)
    }

    fn splitmix64(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn unit(state: &mut u64) -> f64 {
        (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn exact_lines_are_recovered() {
        for (a, b) in [(0.0, 500.0), (1000.0, 0.0), (-25.0, 1e6), (15_605.0, 3.0)] {
            let pts: Vec<(f64, f64)> = (0..60)
                .map(|i| (i as f64 * 5.0, a * i as f64 * 5.0 + b))
                .collect();
            let line = fit(&pts).unwrap();
            let tol = 1e-12 * a.abs().max(1.0);
            assert!(
                (line.slope - a).abs() <= tol,
                "slope {} for a={a}",
                line.slope
            );
            assert!((line.intercept - b).abs() <= 1e-9 * b.abs().max(1.0));
            assert!(line.rss < 1e-6);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(fit::<f64>(&[]).is_none());
        assert!(fit(&[(1.0, 2.0)]).is_none());
        assert!(fit(&[(3.0, 1.0), (3.0, 9.0), (3.0, 4.0)]).is_none());
        assert!(fit(&[(3.0, 1.0), (4.0, 9.0)]).is_some());
    }

    #[test]
    fn matches_independent_formulation_on_noisy_series() {
        let mut state = 0xa11ce;
        for _ in 0..200 {
            let n = 3 + (splitmix64(&mut state) % 60) as usize;
            let a = (unit(&mut state) - 0.5) * 2e4;
            let b = unit(&mut state) * 1e5;
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|i| {
                    let x = i as f64 * 5.0 + unit(&mut state);
                    (x, a * x + b + (unit(&mut state) - 0.5) * 1e3)
                })
                .collect();
            let line = fit(&pts).unwrap();
            let (slope, intercept) = fit_uncentered(&pts);
            assert!((line.slope - slope).abs() <= 1e-9 * slope.abs().max(1.0));
            assert!((line.intercept - intercept).abs() <= 1e-9 * intercept.abs().max(1.0));
        }
    }

    #[test]
    fn paired_opposite_noise_leaves_the_slope_unchanged() {
        let base: Vec<(f64, f64)> = (0..48)
            .map(|i| (60.0 + i as f64 * 5.0, 2_000.0 * i as f64))
            .collect();
        let clean = fit(&base).unwrap().slope;
        let mut noisy = base.clone();
        for (x, y) in &base {
            noisy.push((*x, *y + 750.0));
            noisy.push((*x, *y - 750.0));
        }
        let refit = fit(&noisy).unwrap().slope;
        assert!((refit - clean).abs() <= 1e-9 * clean.abs());
    }

    #[test]
    fn works_for_f32_too() {
        let pts: Vec<(f32, f32)> = (0..20).map(|i| (i as f32, 3.0 * i as f32 + 1.0)).collect();
        let line = fit(&pts).unwrap();
        assert!((line.slope - 3.0).abs() < 1e-4);
    }
}
