use crate::error::{arg, Result};

/// Absolute values sorted non-increasingly.
pub fn decreasing_rearrangement(x: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_unstable_by(|p, q| q.total_cmp(p));
    a
}

/// `sup_{|I|=m} |P_I x|`: the Euclidean norm of the m largest-magnitude
/// coordinates.
pub fn top_m_energy(x: &[f64], m: usize) -> Result<f64> {
    if m == 0 || m > x.len() {
        return arg(format!("m = {m} must lie in 1..={}", x.len()));
    }
    Ok(top_m_energy_unchecked(x, m))
}

pub(crate) fn top_m_energy_unchecked(x: &[f64], m: usize) -> f64 {
    if m == x.len() {
        return crate::matrix::norm2(x);
    }
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let (top, pivot, _) = sq.select_nth_unstable_by(m - 1, |p, q| q.total_cmp(p));
    (top.iter().sum::<f64>() + *pivot).sqrt()
}

/// `X*(ℓ)`, the ℓ-th largest absolute coordinate (1-based).
pub fn order_statistic(x: &[f64], l: usize) -> Result<f64> {
    if l == 0 || l > x.len() {
        return arg(format!("ℓ = {l} must lie in 1..={}", x.len()));
    }
    Ok(order_statistic_unchecked(x, l))
}

pub(crate) fn order_statistic_unchecked(x: &[f64], l: usize) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let (_, pivot, _) = a.select_nth_unstable_by(l - 1, |p, q| q.total_cmp(p));
    *pivot
}

/// Indices of the `count` largest values of `score`, ties broken by the
/// lowest index, returned in increasing index order.
pub(crate) fn top_indices(score: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..score.len()).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn energy_examples() {
        assert_relative_eq!(top_m_energy(&[3.0, -1.0, 2.0], 2).unwrap(), 13f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(top_m_energy(&[3.0, -1.0, 2.0], 3).unwrap(), 14f64.sqrt(), max_relative = 1e-15);
        assert_eq!(top_m_energy(&[1.0; 4], 1).unwrap(), 1.0);
        assert!(top_m_energy(&[1.0, 2.0], 0).is_err());
        assert!(top_m_energy(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn order_examples() {
        let x = [3.0, -1.0, 2.0];
        assert_eq!(order_statistic(&x, 1).unwrap(), 3.0);
        assert_eq!(order_statistic(&x, 3).unwrap(), 1.0);
        assert_eq!(order_statistic(&[-5.0, 5.0], 2).unwrap(), 5.0);
        assert!(order_statistic(&x, 4).is_err());
        assert!(order_statistic(&x, 0).is_err());
    }

    #[test]
    fn ties_pick_lowest_index() {
        assert_eq!(top_indices(&[1.0, 2.0, 2.0, 2.0], 2), vec![1, 2]);
    }

    proptest! {
        #[test]
        fn squared_order_statistics_sum_to_norm(x in prop::collection::vec(-10.0f64..10.0, 1..30)) {
            let total: f64 = x.iter().map(|v| v * v).sum();
            let by_order: f64 = (1..=x.len()).map(|l| order_statistic(&x, l).unwrap().powi(2)).sum();
            prop_assert!((total - by_order).abs() <= 1e-9 * (1.0 + total));
        }

        #[test]
        fn energy_split(x in prop::collection::vec(-10.0f64..10.0, 2..30), frac in 0.0f64..1.0) {
            let m = 1 + ((x.len() - 1) as f64 * frac) as usize;
            let total: f64 = x.iter().map(|v| v * v).sum();
            let head = top_m_energy(&x, m).unwrap().powi(2);
            let tail: f64 = (m + 1..=x.len()).map(|l| order_statistic(&x, l).unwrap().powi(2)).sum();
            prop_assert!((head + tail - total).abs() <= 1e-9 * (1.0 + total));
            // energy dominates any m coordinates
            let any: f64 = x.iter().take(m).map(|v| v * v).sum();
            prop_assert!(head + 1e-12 >= any);
        }
    }
}
