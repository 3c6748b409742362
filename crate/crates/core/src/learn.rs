//! Parameter fitting, model scores, and merge-only staging search.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::Dataset;
use crate::tree::{FittedClassifier, ModelMetadata, StageId, StageParameters, StagedTree};

/// Smallest score decrease that counts as an improvement during search.
pub const MIN_IMPROVEMENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    #[default]
    Bic,
    Aic,
}

/// Score settings for staging search. Scores are minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub kind: ScoreKind,
    pub smoothing: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            kind: ScoreKind::Bic,
            smoothing: 1.0,
        }
    }
}

impl ScoreConfig {
    fn penalty_per_parameter(&self, n: usize) -> f64 {
        match self.kind {
            ScoreKind::Bic => (n as f64).ln(),
            ScoreKind::Aic => 2.0,
        }
    }
}

fn check_smoothing(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("smoothing must be finite and >= 0, got {alpha}")))
    }
}

fn check_schema(tree: &StagedTree, data: &Dataset) -> Result<()> {
    if Arc::ptr_eq(tree.schema(), data.schema()) || tree.schema() == data.schema() {
        Ok(())
    } else {
        Err(Error::Domain(
            "dataset schema (variables or order) differs from the tree's".into(),
        ))
    }
}

/// Per depth, per stage, per outcome counts of the given rows.
pub(crate) fn stage_counts<'a>(tree: &StagedTree, rows: impl Iterator<Item = &'a [usize]>) -> Vec<Vec<u64>> {
    let schema = tree.schema();
    let cards = schema.cardinalities();
    let mut counts: Vec<Vec<u64>> = (0..tree.depths())
        .map(|d| vec![0; tree.n_stages(d) * cards[d]])
        .collect();
    for row in rows {
        let mut ctx = 0usize;
        for (depth, &x) in row.iter().enumerate() {
            let c = cards[depth];
            let s = tree.labels(depth)[ctx] as usize;
            counts[depth][s * c + x] += 1;
            ctx = ctx * c + x;
        }
    }
    counts
}

fn smoothed(counts: &[u64], alpha: f64) -> Vec<f64> {
    let c = counts.len() as f64;
    let total: u64 = counts.iter().sum();
    if total == 0 && alpha == 0.0 {
        return vec![1.0 / c; counts.len()];
    }
    let den = total as f64 + alpha * c;
    counts.iter().map(|&n| (n as f64 + alpha) / den).collect()
}

/// Log-likelihood contribution of one stage under its smoothed estimate.
fn stage_loglik(counts: &[u64], alpha: f64) -> f64 {
    let c = counts.len() as f64;
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let den = total as f64 + alpha * c;
    counts
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| n as f64 * ((n as f64 + alpha) / den).ln())
        .sum()
}

/// Maximum-likelihood stage parameters with additive smoothing `alpha`.
pub fn fit_mle(tree: &StagedTree, data: &Dataset, alpha: f64) -> Result<FittedClassifier> {
    fit_mle_with(tree, data, alpha, ModelMetadata::default())
}

pub fn fit_mle_with(
    tree: &StagedTree,
    data: &Dataset,
    alpha: f64,
    metadata: ModelMetadata,
) -> Result<FittedClassifier> {
    check_smoothing(alpha)?;
    check_schema(tree, data)?;
    let counts = stage_counts(tree, data.rows());
    fit_from_counts(tree, &counts, alpha, metadata)
}

pub(crate) fn fit_from_counts(
    tree: &StagedTree,
    counts: &[Vec<u64>],
    alpha: f64,
    metadata: ModelMetadata,
) -> Result<FittedClassifier> {
    let cards = tree.schema().cardinalities();
    let params = StageParameters::from_fn(tree, |id: StageId| {
        let c = cards[id.depth];
        let start = id.index as usize * c;
        smoothed(&counts[id.depth][start..start + c], alpha)
    })?;
    FittedClassifier::new(tree.clone(), params, alpha, metadata)
}

/// Σ over records of the log joint probability. `-inf` if some record has
/// probability zero (possible only without smoothing).
pub fn log_likelihood(model: &FittedClassifier, data: &Dataset) -> Result<f64> {
    check_schema(model.tree(), data)?;
    Ok(data.rows().map(|r| model.log_joint_unchecked(r)).sum())
}

/// −2·logL + d·ln n.
pub fn bic_score(model: &FittedClassifier, data: &Dataset) -> Result<f64> {
    let ll = log_likelihood(model, data)?;
    let d = model.tree().free_parameter_count() as f64;
    Ok(penalized(ll, d * (data.n_records() as f64).ln()))
}

/// −2·logL + 2d.
pub fn aic_score(model: &FittedClassifier, data: &Dataset) -> Result<f64> {
    let ll = log_likelihood(model, data)?;
    let d = model.tree().free_parameter_count() as f64;
    Ok(penalized(ll, 2.0 * d))
}

pub fn score(model: &FittedClassifier, data: &Dataset, kind: ScoreKind) -> Result<f64> {
    match kind {
        ScoreKind::Bic => bic_score(model, data),
        ScoreKind::Aic => aic_score(model, data),
    }
}

fn penalized(ll: f64, penalty: f64) -> f64 {
    if ll == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        -2.0 * ll + penalty
    }
}

/// One accepted merge: stages are named by their index in the start tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeStep {
    pub kept: StageId,
    pub absorbed: StageId,
    /// Change of the score caused by the merge (negative).
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct HillClimbOutcome {
    pub tree: StagedTree,
    pub steps: Vec<MergeStep>,
}

/// Merge-only greedy search: repeatedly joins the same-depth pair of stages
/// with the largest score decrease until no merge decreases the score.
pub fn backward_hill_climb(start: &StagedTree, data: &Dataset, cfg: &ScoreConfig) -> Result<StagedTree> {
    Ok(backward_hill_climb_traced(start, data, cfg)?.tree)
}

struct DepthState {
    card: usize,
    counts: Vec<Vec<u64>>,
    ll: Vec<f64>,
    active: Vec<bool>,
    best: Vec<Option<(f64, usize)>>,
    rep: Vec<usize>,
}

impl DepthState {
    fn delta(&self, a: usize, b: usize, alpha: f64, pen: f64) -> f64 {
        let merged: Vec<u64> = self.counts[a].iter().zip(&self.counts[b]).map(|(x, y)| x + y).collect();
        -2.0 * (stage_loglik(&merged, alpha) - self.ll[a] - self.ll[b]) - pen
    }

    fn recompute_best(&mut self, a: usize, alpha: f64, pen: f64) {
        let mut best: Option<(f64, usize)> = None;
        for b in a + 1..self.counts.len() {
            if !self.active[b] {
                continue;
            }
            let d = self.delta(a, b, alpha, pen);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, b));
            }
        }
        self.best[a] = best;
    }

    fn find(&self, mut s: usize) -> usize {
        while self.rep[s] != s {
            s = self.rep[s];
        }
        s
    }
}

/// [`backward_hill_climb`] that also returns the accepted merges in order.
pub fn backward_hill_climb_traced(start: &StagedTree, data: &Dataset, cfg: &ScoreConfig) -> Result<HillClimbOutcome> {
    check_smoothing(cfg.smoothing)?;
    check_schema(start, data)?;
    let alpha = cfg.smoothing;
    let n = data.n_records();
    let counts = stage_counts(start, data.rows());
    let cards = start.schema().cardinalities();

    let mut depths: Vec<DepthState> = Vec::with_capacity(start.depths());
    for (d, flat) in counts.iter().enumerate() {
        let card = cards[d];
        let per_stage: Vec<Vec<u64>> = flat.chunks_exact(card).map(<[u64]>::to_vec).collect();
        let m = per_stage.len();
        let mut st = DepthState {
            card,
            ll: per_stage.iter().map(|c| stage_loglik(c, alpha)).collect(),
            counts: per_stage,
            active: vec![true; m],
            best: vec![None; m],
            rep: (0..m).collect(),
        };
        let pen = cfg.penalty_per_parameter(n) * (card as f64 - 1.0);
        for a in 0..m {
            st.recompute_best(a, alpha, pen);
        }
        depths.push(st);
    }

    let mut steps = Vec::new();
    loop {
        // lexicographic on (delta, depth, a); each stage's best partner is
        // already the smallest index among its equal-delta partners
        let mut choice: Option<(f64, usize, usize, usize)> = None;
        for (d, st) in depths.iter().enumerate() {
            for (a, best) in st.best.iter().enumerate() {
                if !st.active[a] {
                    continue;
                }
                if let Some((delta, b)) = *best {
                    if choice.is_none_or(|(cd, _, _, _)| delta < cd) {
                        choice = Some((delta, d, a, b));
                    }
                }
            }
        }
        let Some((delta, d, a, b)) = choice else { break };
        let improves = delta < -MIN_IMPROVEMENT;
        if !improves {
            break;
        }
        let st = &mut depths[d];
        let pen = cfg.penalty_per_parameter(n) * (st.card as f64 - 1.0);
        let absorbed = std::mem::take(&mut st.counts[b]);
        for (x, y) in st.counts[a].iter_mut().zip(&absorbed) {
            *x += y;
        }
        st.ll[a] = stage_loglik(&st.counts[a], alpha);
        st.active[b] = false;
        st.best[b] = None;
        st.rep[b] = a;
        st.recompute_best(a, alpha, pen);
        for x in 0..st.counts.len() {
            if x == a || !st.active[x] {
                continue;
            }
            match st.best[x] {
                Some((_, p)) if p == a || p == b => st.recompute_best(x, alpha, pen),
                Some((bd, bp)) if x < a => {
                    let dx = st.delta(x, a, alpha, pen);
                    if dx < bd || (dx == bd && a < bp) {
                        st.best[x] = Some((dx, a));
                    }
                }
                None if x < a => {
                    let dx = st.delta(x, a, alpha, pen);
                    st.best[x] = Some((dx, a));
                }
                _ => {}
            }
        }
        steps.push(MergeStep {
            kept: StageId {
                depth: d,
                index: a as u32,
            },
            absorbed: StageId {
                depth: d,
                index: b as u32,
            },
            delta,
        });
    }

    let labels = depths
        .iter()
        .enumerate()
        .map(|(d, st)| start.labels(d).iter().map(|&l| st.find(l as usize) as u32).collect())
        .collect();
    let tree = StagedTree::from_labels(Arc::clone(start.schema()), labels)?;
    Ok(HillClimbOutcome { tree, steps })
}
