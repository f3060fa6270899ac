use crate::error::{Error, Result};

/// Centered running median. Windows shrink at the boundaries; an even
/// number of elements yields the mean of the two middle values.
pub fn median_filter(series: &[f64], kernel: usize) -> Result<Vec<f64>> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::Config(format!(
            "median kernel must be odd and positive, got {kernel}"
        )));
    }
    let half = kernel / 2;
    let n = series.len();
    let mut buf = Vec::with_capacity(kernel);
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            buf.clear();
            buf.extend_from_slice(&series[lo..hi]);
            median_in_place(&mut buf)
        })
        .collect())
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

/// `mean + population std`.
pub fn compute_t_base(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::dim("T_base needs at least one validation error"));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(mean + var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(median_filter(&[1.0, 9.0, 1.0], 3).unwrap(), vec![5.0, 1.0, 5.0]);
        assert_eq!(median_filter(&[2.0; 7], 5).unwrap(), vec![2.0; 7]);
        let s = [3.0, -1.0, 4.0, 1.5];
        assert_eq!(median_filter(&s, 1).unwrap(), s.to_vec());
        assert!(median_filter(&[], 3).unwrap().is_empty());
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(matches!(median_filter(&[1.0], 4), Err(Error::Config(_))));
        assert!(matches!(median_filter(&[1.0], 0), Err(Error::Config(_))));
    }

    #[test]
    fn t_base() {
        assert!((compute_t_base(&[0.1, 0.1, 0.1]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(compute_t_base(&[0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(compute_t_base(&[0.0; 4]).unwrap(), 0.0);
        assert!(compute_t_base(&[]).is_err());
    }
}
