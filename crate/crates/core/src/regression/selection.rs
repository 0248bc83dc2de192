use super::{FitReport, ModelKind};

/// RMSE values within this relative distance of the best are treated as tied.
pub const RMSE_TIE_REL: f64 = 1e-6;
/// Absolute floor for ties, so exact fits (RMSE at rounding level) tie too.
pub const RMSE_TIE_ABS: f64 = 1e-9;

/// A scored candidate as seen by [`select_best`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub kind: ModelKind,
    pub report: FitReport,
}

/// Index of the winning candidate: lowest RMSE; ties broken by fewer
/// coefficients, then lower SSE, then a fixed family order. The result does
/// not depend on the order of `candidates`. `None` only for an empty slice.
pub fn select_best(candidates: &[ScoredCandidate]) -> Option<usize> {
    let best_rmse = candidates.iter().map(|c| c.report.rmse).fold(f64::INFINITY, f64::min);
    if !best_rmse.is_finite() {
        return None;
    }
    let cutoff = best_rmse + RMSE_TIE_REL * best_rmse + RMSE_TIE_ABS;
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.report.rmse <= cutoff)
        .min_by(|(_, a), (_, b)| {
            a.kind
                .coefficient_count()
                .cmp(&b.kind.coefficient_count())
                .then(a.report.sse.total_cmp(&b.report.sse))
                .then(a.kind.order().cmp(&b.kind.order()))
        })
        .map(|(i, _)| i)
}
