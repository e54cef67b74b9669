use crate::error::InferenceError;

/// One line of a model-comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct WaicRow {
    pub label: String,
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
    /// Fingerprint of the data the model was fitted to.
    pub fingerprint: String,
}

/// Ranks fits by ascending WAIC, ties broken by label. All fits must share
/// a data fingerprint.
pub fn compare(mut rows: Vec<WaicRow>) -> Result<Vec<WaicRow>, InferenceError> {
    if let Some(first) = rows.first() {
        if let Some(other) = rows.iter().find(|r| r.fingerprint != first.fingerprint) {
            return Err(InferenceError::FingerprintMismatch(
                first.fingerprint.clone(),
                other.fingerprint.clone(),
            ));
        }
    }
    rows.sort_by(|a, b| a.waic.total_cmp(&b.waic).then_with(|| a.label.cmp(&b.label)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(label: &str, waic: f64, fp: &str) -> WaicRow {
        WaicRow {
            label: label.into(),
            waic,
            lppd: 0.0,
            p_waic: 0.0,
            fingerprint: fp.into(),
        }
    }

    #[test]
    fn ranks_lowest_first() {
        let out = compare(vec![row("bym2", 1041.22, "x"), row("hgp_gauss", 1032.75, "x")]).unwrap();
        assert_eq!(out[0].label, "hgp_gauss");
        assert_eq!(compare(vec![row("icar", 1.0, "x")]).unwrap().len(), 1);
    }

    #[test]
    fn ties_ordered_by_label() {
        let out = compare(vec![row("b", 5.0, "x"), row("a", 5.0, "x")]).unwrap();
        assert_eq!(out[0].label, "a");
    }

    #[test]
    fn mismatched_data_rejected() {
        let err = compare(vec![row("a", 1.0, "x"), row("b", 2.0, "y")]).unwrap_err();
        assert!(matches!(err, InferenceError::FingerprintMismatch(..)));
    }
}
