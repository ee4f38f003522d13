//! Small statistical helpers used by the noise validation and the sweep
//! harness: two-sample Kolmogorov-Smirnov, quantiles, Wilson intervals and a
//! least-squares slope on log-log data.

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i].min(ys[j]);
        while i < n && xs[i] <= x {
            i += 1;
        }
        while j < m && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at the given level
/// (asymptotic formula; levels 0.01 and 0.05 supported).
pub fn two_sample_ks_critical(n: usize, m: usize, level: f64) -> f64 {
    let c = if level <= 0.01 { 1.628 } else { 1.358 };
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Empirical quantile by linear interpolation on the sorted sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty() && (0.0..=1.0).contains(&q));
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_se(successes: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = successes as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64)
}

/// Least-squares slope of ln(y) against ln(x). Returns None when fewer than
/// two usable points remain after dropping non-positive entries.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(two_sample_ks(&xs, &xs), 0.0);
    }

    #[test]
    fn ks_of_disjoint_samples_is_one() {
        let a = vec![0.0, 1.0];
        let b = vec![10.0, 11.0];
        assert_eq!(two_sample_ks(&a, &b), 1.0);
    }

    #[test]
    fn quantile_endpoints() {
        let xs = vec![3.0, 1.0, 2.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 3.0);
        assert_eq!(median(&xs), 2.0);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs = vec![0.1, 0.2, 0.4];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let s = loglog_slope(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wilson_brackets_the_point_estimate() {
        let (lo, hi) = wilson_interval(10, 100, 1.96);
        assert!(lo < 0.1 && 0.1 < hi);
    }
}
