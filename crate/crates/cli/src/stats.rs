use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::Statistics;

/// Sample mean with a two-sided 95% Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// Half-width of the interval; zero for a single sample.
    pub half_width: f64,
}

impl Estimate {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, std_dev: f64::NAN, half_width: f64::NAN };
        }
        let mean = samples.mean();
        if n == 1 {
            return Self { n, mean, std_dev: 0.0, half_width: 0.0 };
        }
        let std_dev = samples.std_dev();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("at least one degree of freedom").inverse_cdf(0.975);
        Self { n, mean, std_dev, half_width: t * std_dev / (n as f64).sqrt() }
    }

    pub fn low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn high(&self) -> f64 {
        self.mean + self.half_width
    }
}
