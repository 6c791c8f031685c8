//! Frequency-based feature selection through a SpaceSaving sketch.

use crate::instance::SparseInstance;
use crate::sketch::SpaceSaving;

/// Offers every attribute of `x` to the sketch, then keeps only those
/// attributes currently in the sketch's top `top_k`.
pub fn select_features(mut x: SparseInstance, sketch: &mut SpaceSaving<u32>, top_k: usize) -> SparseInstance {
    assert!(top_k >= 1, "top_k must be positive");
    for &(a, _) in x.features() {
        sketch.offer(a);
    }
    let filter = sketch.top_filter(top_k);
    x.retain(|a| sketch.in_top(&a, &filter));
    x
}
