//! False discovery rate: FP / (TP + FP) × 100%.

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FdrError {
    #[error("FDR is undefined for tp + fp = 0")]
    Undefined,
}

/// Returns the false discovery rate as a percentage.
pub fn compute_fdr(tp: u64, fp: u64) -> Result<f64, FdrError> {
    if tp + fp == 0 {
        return Err(FdrError::Undefined);
    }
    Ok(fp as f64 / (tp + fp) as f64 * 100.0)
}

/// Fixed two-decimal rendering, e.g. "28.00%".
pub fn format_fdr(percentage: f64) -> String {
    format!("{percentage:.2}%")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_anchor_values_reproduce() {
        // 7 / (18 + 7) = 28.00% and 34 / (18 + 34) = 65.38%.
        assert_eq!(format_fdr(compute_fdr(18, 7).unwrap()), "28.00%");
        assert_eq!(format_fdr(compute_fdr(18, 34).unwrap()), "65.38%");
    }

    #[test]
    fn zero_false_positives_is_zero() {
        assert_eq!(format_fdr(compute_fdr(5, 0).unwrap()), "0.00%");
    }

    #[test]
    fn empty_counts_are_undefined() {
        assert_eq!(compute_fdr(0, 0).unwrap_err(), FdrError::Undefined);
    }
}
