/// Integers log-spaced over `[n_min, n_max]` with `points_per_decade`
/// points per factor of ten, deduplicated after rounding. Both endpoints
/// are included.
pub fn log_grid(n_min: u64, n_max: u64, points_per_decade: u32) -> Vec<u64> {
    let n_min = n_min.max(1);
    if n_max < n_min || points_per_decade == 0 {
        return Vec::new();
    }
    let (lo, hi) = ((n_min as f64).log10(), (n_max as f64).log10());
    let steps = ((hi - lo) * f64::from(points_per_decade)).ceil() as u64;
    let mut out: Vec<u64> = (0..=steps)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / steps.max(1) as f64;
            (10f64.powf(t).round() as u64).clamp(n_min, n_max)
        })
        .collect();
    out.dedup();
    out
}

/// Indices of strict interior local maxima (plateaus count once, at their
/// first index).
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < values.len() {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < values.len() && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < values.len() && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_order() {
        let grid = log_grid(1, 1 << 20, 64);
        assert_eq!(grid[0], 1);
        assert_eq!(*grid.last().unwrap(), 1 << 20);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!(log_grid(10, 1, 4).is_empty());
        assert_eq!(log_grid(5, 5, 4), vec![5]);
    }

    #[test]
    fn maxima() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.0, 2.0, 2.0, 1.0, 3.0]), vec![1, 3]);
        assert!(local_maxima(&[1.0, 2.0, 3.0]).is_empty());
    }
}
