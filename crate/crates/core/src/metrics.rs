//! Verification and identification metrics.
//!
//! A score `s` is accepted at threshold `t` when `s ≥ t`, so
//! `FAR(t) = |{i ≥ t}|/|I|` and `FRR(t) = |{g < t}|/|G|`. Candidate thresholds
//! are every distinct score plus `+∞`.

use thiserror::Error;

use crate::biometric::{PairScores, ScoreMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("genuine or impostor score list is empty")]
    EmptySide,
    #[error("d' needs at least 2 scores per side")]
    TooFewScores,
    #[error("pooled variance is zero")]
    ZeroPooledVariance,
    #[error("probe {0} has no gallery entry for its subject")]
    TrueSubjectMissing(usize),
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Per-threshold counts: `(t, impostors ≥ t, genuines < t)`.
fn sweep(pairs: &PairScores) -> Vec<(f64, usize, usize)> {
    let g = sorted(&pairs.genuine);
    let i = sorted(&pairs.impostor);
    let mut thresholds: Vec<f64> = g.iter().chain(i.iter()).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    thresholds
        .into_iter()
        .map(|t| {
            let imp_accept = i.len() - i.partition_point(|&v| v < t);
            let gen_reject = g.partition_point(|&v| v < t);
            (t, imp_accept, gen_reject)
        })
        .collect()
}

/// Threshold-aligned FAR and FRR over the candidate thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub far: Vec<f64>,
    pub frr: Vec<f64>,
}

pub fn roc_curve(pairs: &PairScores) -> Result<RocCurve, MetricsError> {
    check_sides(pairs)?;
    let (ni, ng) = (pairs.impostor.len() as f64, pairs.genuine.len() as f64);
    let s = sweep(pairs);
    Ok(RocCurve {
        thresholds: s.iter().map(|x| x.0).collect(),
        far: s.iter().map(|x| x.1 as f64 / ni).collect(),
        frr: s.iter().map(|x| x.2 as f64 / ng).collect(),
    })
}

fn check_sides(pairs: &PairScores) -> Result<(), MetricsError> {
    if pairs.genuine.is_empty() || pairs.impostor.is_empty() {
        return Err(MetricsError::EmptySide);
    }
    Ok(())
}

/// Equal error rate by discrete threshold scan: the exact crossing when one
/// exists, else the FAR/FRR midpoint at the smallest threshold minimizing
/// `|FAR − FRR|`. Comparisons use exact integer arithmetic.
pub fn eer(pairs: &PairScores) -> Result<f64, MetricsError> {
    check_sides(pairs)?;
    let (ni, ng) = (pairs.impostor.len() as u128, pairs.genuine.len() as u128);
    let mut best: Option<(u128, usize, usize)> = None;
    for (_, ia, gr) in sweep(pairs) {
        // |FAR − FRR| scaled by ni·ng
        let a = ia as u128 * ng;
        let b = gr as u128 * ni;
        let diff = a.abs_diff(b);
        if diff == 0 {
            return Ok(ia as f64 / ni as f64);
        }
        if best.is_none_or(|(d, _, _)| diff < d) {
            best = Some((diff, ia, gr));
        }
    }
    let (_, ia, gr) = best.expect("at least the +inf threshold");
    Ok((ia as f64 / ni as f64 + gr as f64 / ng as f64) / 2.0)
}

/// Mann-Whitney estimate with half credit for ties. The side above one half
/// is computed as the complement of the other so `auc(G,I) + auc(I,G) = 1`
/// holds exactly in floating point.
pub fn auc(pairs: &PairScores) -> Result<f64, MetricsError> {
    check_sides(pairs)?;
    let imp = sorted(&pairs.impostor);
    let (mut twice_wins, mut twice_losses) = (0u128, 0u128);
    for &g in &pairs.genuine {
        let below = imp.partition_point(|&v| v < g) as u128;
        let not_above = imp.partition_point(|&v| v <= g) as u128;
        let ties = not_above - below;
        let above = imp.len() as u128 - not_above;
        twice_wins += 2 * below + ties;
        twice_losses += 2 * above + ties;
    }
    let denom = 2 * pairs.genuine.len() as u128 * imp.len() as u128;
    Ok(if twice_wins <= twice_losses {
        twice_wins as f64 / denom as f64
    } else {
        1.0 - twice_losses as f64 / denom as f64
    })
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var)
}

/// Decidability index with sample variances.
pub fn dprime(pairs: &PairScores) -> Result<f64, MetricsError> {
    if pairs.genuine.len() < 2 || pairs.impostor.len() < 2 {
        return Err(MetricsError::TooFewScores);
    }
    let (mg, vg) = mean_var(&pairs.genuine);
    let (mi, vi) = mean_var(&pairs.impostor);
    let pooled = (vg + vi) / 2.0;
    if !(pooled > 0.0) {
        return Err(MetricsError::ZeroPooledVariance);
    }
    Ok((mg - mi).abs() / pooled.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TarAtFar {
    pub tar: f64,
    pub threshold: f64,
    /// set when the impostor count cannot resolve the target FAR
    pub granularity_warning: Option<String>,
}

/// TAR at the smallest candidate threshold whose FAR is at most `far_target`.
pub fn tar_at_far(pairs: &PairScores, far_target: f64) -> Result<TarAtFar, MetricsError> {
    check_sides(pairs)?;
    let (ni, ng) = (pairs.impostor.len(), pairs.genuine.len());
    let (threshold, _, gr) = sweep(pairs)
        .into_iter()
        .find(|&(_, ia, _)| ia as f64 / ni as f64 <= far_target)
        .expect("FAR(+inf) = 0");
    let granularity_warning = ((ni as f64) < 1.0 / far_target)
        .then(|| format!("only {ni} impostor scores: FAR resolution 1/{ni} is coarser than target {far_target}"));
    Ok(TarAtFar {
        tar: 1.0 - gr as f64 / ng as f64,
        threshold,
        granularity_warning,
    })
}

/// Fraction of probes ranked within the top `k`, where ties with the true
/// subject's score count against the probe.
pub fn rank_accuracy(m: &ScoreMatrix, k: usize) -> Result<f64, MetricsError> {
    let mut hits = 0usize;
    for p in 0..m.n_probes() {
        let t = m.true_column(p).ok_or(MetricsError::TrueSubjectMissing(p))?;
        let row = m.row(p);
        let own = row[t];
        let rank = 1 + row.iter().enumerate().filter(|&(g, &s)| g != t && s >= own).count();
        if rank <= k {
            hits += 1;
        }
    }
    Ok(hits as f64 / m.n_probes().max(1) as f64)
}
