//! Time-weighted steady-state estimation with batch-means confidence intervals.

use serde::Serialize;
use thiserror::Error;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

pub const DEFAULT_BATCHES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Half-width of the 95% confidence interval.
    pub half_width: f64,
    pub std_error: f64,
    pub batches: usize,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn scaled(&self, factor: f64) -> Estimate {
        Estimate {
            mean: self.mean * factor,
            half_width: self.half_width * factor.abs(),
            std_error: self.std_error * factor.abs(),
            batches: self.batches,
        }
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Serialize)]
#[error("inconclusive: {batches} usable batches over {elapsed} measured time units")]
pub struct Inconclusive {
    pub batches: usize,
    pub elapsed: f64,
}

/// Integral of a piecewise-constant signal over `[warmup, end)`, split into
/// equal-length batches.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeAverageEstimator {
    warmup: f64,
    end: f64,
    batch_len: f64,
    integral: f64,
    elapsed: f64,
    batch_integrals: Vec<f64>,
    batch_times: Vec<f64>,
}

impl TimeAverageEstimator {
    /// Measures over `[warmup, end)` with `batches` equal batches.
    pub fn new(warmup: f64, end: f64, batches: usize) -> Self {
        assert!(batches >= 1, "need at least one batch");
        assert!(end > warmup, "measurement window must be non-empty");
        Self {
            warmup,
            end,
            batch_len: (end - warmup) / batches as f64,
            integral: 0.0,
            elapsed: 0.0,
            batch_integrals: vec![0.0; batches],
            batch_times: vec![0.0; batches],
        }
    }

    pub fn warmup(&self) -> f64 {
        self.warmup
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// Adds `value` held over `[clock, clock + hold)`, clipped to the measurement window.
    pub fn accumulate(&mut self, value: f64, hold: f64, clock: f64) {
        debug_assert!(hold >= 0.0, "negative holding time");
        let mut t0 = clock.max(self.warmup);
        let t1 = (clock + hold).min(self.end);
        if t1 <= t0 {
            return;
        }
        self.integral += value * (t1 - t0);
        self.elapsed += t1 - t0;
        let last = self.batch_integrals.len() - 1;
        let mut b = (((t0 - self.warmup) / self.batch_len) as usize).min(last);
        while t0 < t1 {
            let boundary = if b == last {
                f64::INFINITY
            } else {
                self.warmup + (b + 1) as f64 * self.batch_len
            };
            let seg_end = boundary.min(t1);
            if seg_end > t0 {
                self.batch_integrals[b] += value * (seg_end - t0);
                self.batch_times[b] += seg_end - t0;
                t0 = seg_end;
            }
            if t0 < t1 {
                b += 1;
            }
        }
    }

    /// Pools another estimator's batches into this one.
    pub fn merge(&mut self, other: &TimeAverageEstimator) {
        self.integral += other.integral;
        self.elapsed += other.elapsed;
        self.batch_integrals.extend_from_slice(&other.batch_integrals);
        self.batch_times.extend_from_slice(&other.batch_times);
    }

    /// Means of the batches that received measured time.
    pub fn batch_means(&self) -> Vec<f64> {
        self.batch_integrals
            .iter()
            .zip(&self.batch_times)
            .filter(|(_, &t)| t > 0.0)
            .map(|(&i, &t)| i / t)
            .collect()
    }

    pub fn finalize(&self) -> Result<Estimate, Inconclusive> {
        let means = self.batch_means();
        let n = means.len();
        if self.elapsed <= 0.0 || n < 2 {
            return Err(Inconclusive { batches: n, elapsed: self.elapsed });
        }
        let mean = self.integral / self.elapsed;
        let batch_avg = means.iter().sum::<f64>() / n as f64;
        let var = means.iter().map(|m| (m - batch_avg).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std_error = (var / n as f64).sqrt();
        Ok(Estimate {
            mean,
            half_width: Z_95 * std_error,
            std_error,
            batches: n,
        })
    }

    /// Difference between the mean of the second and the first half of the
    /// batches, with its CI. Large values flag an incomplete warm-up.
    pub fn drift(&self) -> Result<Estimate, Inconclusive> {
        let means = self.batch_means();
        let n = means.len();
        if n < 4 {
            return Err(Inconclusive { batches: n, elapsed: self.elapsed });
        }
        let (first, second) = means.split_at(n / 2);
        let stats = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            (m, v / xs.len() as f64)
        };
        let (m1, v1) = stats(first);
        let (m2, v2) = stats(second);
        let std_error = (v1 + v2).sqrt();
        Ok(Estimate {
            mean: m2 - m1,
            half_width: Z_95 * std_error,
            std_error,
            batches: n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal() {
        let mut est = TimeAverageEstimator::new(10.0, 110.0, 20);
        let mut clock = 0.0;
        for k in 0..500 {
            let hold = 0.1 + (k % 7) as f64 * 0.05;
            est.accumulate(3.5, hold, clock);
            clock += hold;
        }
        let e = est.finalize().unwrap();
        assert!((e.mean - 3.5).abs() < 1e-12);
        assert!(e.half_width < 1e-12);
        assert_eq!(e.batches, 20);
    }

    #[test]
    fn alternating_signal() {
        let mut est = TimeAverageEstimator::new(0.0, 100.0, 20);
        for k in 0..400 {
            est.accumulate((k % 2) as f64, 0.25, k as f64 * 0.25);
        }
        let e = est.finalize().unwrap();
        assert!((e.mean - 0.5).abs() < 1e-12);
        assert!(e.half_width < 1e-9);
    }

    #[test]
    fn warmup_clips_straddling_interval() {
        let mut est = TimeAverageEstimator::new(5.0, 15.0, 2);
        est.accumulate(100.0, 6.0, 0.0); // only [5, 6) counts
        est.accumulate(0.0, 9.0, 6.0);
        assert!((est.elapsed() - 10.0).abs() < 1e-12);
        assert!((est.finalize().unwrap().mean - 10.0).abs() < 1e-12);
    }

    #[test]
    fn interval_past_end_is_clipped() {
        let mut est = TimeAverageEstimator::new(0.0, 10.0, 2);
        est.accumulate(1.0, 100.0, 0.0);
        assert!((est.elapsed() - 10.0).abs() < 1e-12);
        assert_eq!(est.batch_means(), vec![1.0, 1.0]);
    }

    #[test]
    fn too_little_data_is_inconclusive() {
        let mut est = TimeAverageEstimator::new(10.0, 20.0, 20);
        assert!(est.finalize().is_err());
        est.accumulate(1.0, 5.0, 0.0);
        assert!(est.finalize().is_err());
        est.accumulate(1.0, 0.4, 10.0);
        assert_eq!(est.finalize().unwrap_err().batches, 1);
    }

    #[test]
    fn merge_pools_batches() {
        let mut a = TimeAverageEstimator::new(0.0, 4.0, 4);
        let mut b = a.clone();
        a.accumulate(1.0, 4.0, 0.0);
        b.accumulate(3.0, 4.0, 0.0);
        a.merge(&b);
        let e = a.finalize().unwrap();
        assert_eq!(e.batches, 8);
        assert!((e.mean - 2.0).abs() < 1e-12);
        assert!(e.half_width > 0.0);
    }

    #[test]
    fn drift_of_step_signal() {
        let mut est = TimeAverageEstimator::new(0.0, 20.0, 20);
        est.accumulate(0.0, 10.0, 0.0);
        est.accumulate(1.0, 10.0, 10.0);
        assert!((est.drift().unwrap().mean - 1.0).abs() < 1e-12);
    }
}
