//! Small numerical helpers shared by the analytic, EM and aggregation code.

/// `1 / sqrt(2 * pi)`
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
///
/// Evaluated as `erfc(-x / sqrt 2) / 2` through `libm`, whose `erfc` is
/// accurate to about one ulp, so the absolute error is far below `1e-12`
/// over the whole real line (including the far tails, where `1 - erf`
/// would cancel).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Neumaier's variant of Kahan summation.
///
/// Summing the same values in any order agrees to within a couple of ulps,
/// which is what lets replicate aggregates stay schedule-independent.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(values);
    acc.value()
}

/// Mean and Monte Carlo standard error (sample SD / sqrt(n)).
///
/// Returns `(None, None)` for an empty slice and `(Some(mean), None)` when
/// only one value is present.
pub fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (Some(mean), None);
    }
    let ss = compensated_sum(values.iter().map(|&v| (v - mean) * (v - mean)));
    let sd = libm::sqrt(ss / (n - 1) as f64);
    (Some(mean), Some(sd / libm::sqrt(n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn cdf_reference_values() {
        // High-precision reference values of the standard normal CDF.
        let cases = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_05),
            (1.959_963_984_540_054, 0.975),
            (-3.0, 0.001_349_898_031_630_094_6),
            (-8.0, 6.220_960_574_271_785e-16),
            (5.0, 0.999_999_713_348_428_1),
        ];
        for (x, want) in cases {
            let got = normal_cdf(x);
            assert!(
                (got - want).abs() <= 1e-15_f64.max(want * 1e-13),
                "x={x} got={got} want={want}"
            );
        }
    }

    #[test]
    fn cdf_matches_trapezoid_integral_of_pdf() {
        // Independent route: integrate the density from -12 with a fine
        // composite Simpson rule.
        let simpson = |a: f64, b: f64, m: usize| {
            let h = (b - a) / m as f64;
            let mut s = normal_pdf(a) + normal_pdf(b);
            for i in 1..m {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * normal_pdf(a + i as f64 * h);
            }
            s * h / 3.0
        };
        for &x in &[-2.5, -0.3, 0.0, 0.7, 1.4, 3.1] {
            let integral = simpson(-12.0, x, 20_000);
            assert!((integral - normal_cdf(x)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = Vec::new();
        values.push(1e16);
        values.extend(core::iter::repeat_n(1.0, 1000));
        values.push(-1e16);
        assert_eq!(compensated_sum(values.iter().copied()), 1000.0);
    }

    #[test]
    fn mean_and_se_edge_cases() {
        assert_eq!(mean_and_se(&[]), (None, None));
        assert_eq!(mean_and_se(&[2.0]), (Some(2.0), None));
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        // sd = sqrt(5/3), se = sd / 2
        assert!((se.unwrap() - libm::sqrt(5.0 / 3.0) / 2.0).abs() < 1e-15);
    }
}
