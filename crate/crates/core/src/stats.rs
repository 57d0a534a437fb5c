//! Compensated summation and replica statistics.

/// Neumaier's variant of Kahan summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let n = values.len();
    if n == 0 {
        return MeanStderr { mean: f64::NAN, stderr: f64::NAN, count: 0 };
    }
    let mean = neumaier_sum(values.iter().copied()) / n as f64;
    let var = if n > 1 {
        neumaier_sum(values.iter().map(|x| (x - mean).powi(2))) / (n - 1) as f64
    } else {
        0.0
    };
    MeanStderr { mean, stderr: (var / n as f64).sqrt(), count: n }
}

/// Sample covariance of two equally long series.
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let ma = neumaier_sum(a.iter().copied()) / n as f64;
    let mb = neumaier_sum(b.iter().copied()) / n as f64;
    neumaier_sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb))) / (n - 1) as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `ln Σ e^{x}` with a single exponentiation per term.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + neumaier_sum(values.iter().map(|x| (x - m).exp())).ln()
}

/// Estimate of `E[e^{L}]` from per-replica log values `L`, returned as
/// `(ln mean, relative stderr)` by the delta method.
pub fn log_mean_exp(logs: &[f64]) -> (f64, f64) {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let ms = mean_stderr(&scaled);
    (m + ms.mean.ln(), ms.stderr / ms.mean)
}
