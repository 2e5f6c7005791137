//! Log-space helpers shared by the weight recursion and the mixture code.

/// `ln(sum(exp(values)))`, returning `-inf` for an empty slice or when every
/// entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Softmax of `log_w`. Entries at `-inf` get probability zero. Returns `None`
/// when no entry is finite or any entry is NaN.
pub fn normalized_weights(log_w: &[f64]) -> Option<Vec<f64>> {
    if log_w.iter().any(|v| v.is_nan()) {
        return None;
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = log_w.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_sum() {
        let v = [0.1, -2.0, 3.5];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_survives_large_offsets() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn normalized_weights_drop_neg_inf() {
        let w = normalized_weights(&[0.0, f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(w, vec![0.5, 0.0, 0.5]);
        assert!(normalized_weights(&[f64::NEG_INFINITY]).is_none());
        assert!(normalized_weights(&[0.0, f64::NAN]).is_none());
    }
}
