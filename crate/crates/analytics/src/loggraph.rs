use cmd_core::{AssocArray, Key, KeySpec, Scalar};
use cmd_mask::{mask_spec, MaskKeySet, MaskedArray};

use crate::error::{AnalyticsError, Result};

fn project<T: Scalar>(e: &AssocArray<T>, prefix: &[u8]) -> Result<AssocArray<T>> {
    let sel = e.select(&KeySpec::All, &KeySpec::prefix(prefix))?;
    if sel.is_empty() {
        return Err(AnalyticsError::EmptyProjection(String::from_utf8_lossy(prefix).into_owned()));
    }
    Ok(sel)
}

/// Co-occurrence graph between two exploded columns: entry (a, b) counts
/// records holding both `a` and `b`.
pub fn log_graph<T: Scalar>(e: &AssocArray<T>, prefix_a: &[u8], prefix_b: &[u8]) -> Result<AssocArray<T>> {
    Ok(project(e, prefix_a)?.transpose().multiply(&project(e, prefix_b)?))
}

/// The columns of `cols` starting with `prefix`.
pub fn expand_prefix(cols: &[Key], prefix: &[u8]) -> Vec<Key> {
    cols.iter().filter(|c| c.starts_with(prefix)).cloned().collect()
}

/// [`log_graph`] on a masked log. Prefixes cannot be matched on DET
/// ciphertexts, so each prefix is expanded against the plaintext column list
/// known to whoever masked the log and the expansion is masked key by key.
pub fn masked_log_graph<T: Scalar>(
    m: &MaskedArray<T>,
    plain_cols: &[Key],
    prefix_a: &[u8],
    prefix_b: &[u8],
    keys: &MaskKeySet,
) -> Result<MaskedArray<T>> {
    let project = |prefix: &[u8]| -> Result<MaskedArray<T>> {
        let cols = expand_prefix(plain_cols, prefix);
        if cols.is_empty() {
            return Err(AnalyticsError::EmptyProjection(String::from_utf8_lossy(prefix).into_owned()));
        }
        let spec = mask_spec(&KeySpec::Exact(cols), keys, m.policy.cols)?;
        Ok(m.select(&KeySpec::All, &spec)?)
    };
    Ok(project(prefix_a)?.transpose().multiply(&project(prefix_b)?)?)
}
