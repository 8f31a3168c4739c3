//! Small statistics toolkit: Wilson intervals, percentile bootstrap, log-log fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided standard-normal quantile for a confidence level (0.95 -> 1.95996...).
pub fn normal_quantile(level: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(0.5 + level / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ProportionEstimate {
    /// Binomial standard error `sqrt(p(1-p)/n)` of the point estimate.
    pub fn standard_error(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval.
pub fn wilson(successes: usize, trials: usize, level: f64) -> ProportionEstimate {
    assert!(successes <= trials);
    if trials == 0 {
        return ProportionEstimate {
            successes,
            trials,
            estimate: f64::NAN,
            lower: 0.0,
            upper: 1.0,
        };
    }
    let z = normal_quantile(level);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ProportionEstimate {
        successes,
        trials,
        estimate: p,
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
}

/// Sample mean with a seeded percentile-bootstrap interval.
pub fn bootstrap_mean(values: &[f64], level: f64, resamples: usize, seed: u64) -> MeanEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 || resamples == 0 {
        return MeanEstimate {
            mean,
            lower: mean,
            upper: mean,
            samples: n,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let tail = (1.0 - level) / 2.0;
    MeanEstimate {
        mean,
        lower: q(tail),
        upper: q(1.0 - tail),
        samples: n,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(x, y)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Slope of `ln y` against `ln x`; points with `y <= 0` are dropped.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_all_successes_of_thirty() {
        let w = wilson(30, 30, 0.95);
        assert_eq!(w.estimate, 1.0);
        assert!((w.lower - 0.8865).abs() < 5e-4, "{}", w.lower);
        assert!((w.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilson_symmetric_at_half() {
        let w = wilson(50, 100, 0.95);
        assert!((w.lower + w.upper - 1.0).abs() < 1e-12);
        assert!(w.lower > 0.40 && w.upper < 0.60);
    }

    #[test]
    fn bootstrap_is_seeded_and_brackets_mean() {
        let v: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
        let a = bootstrap_mean(&v, 0.95, 500, 3);
        let b = bootstrap_mean(&v, 0.95, 500, 3);
        assert_eq!(a, b);
        assert!(a.lower <= a.mean && a.mean <= a.upper);
    }

    #[test]
    fn loglog_recovers_power() {
        let xs = [32.0, 64.0, 128.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 0.7).abs() < 1e-12);
    }
}
