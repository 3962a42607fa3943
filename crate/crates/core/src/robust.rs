//! RANSAC over correspondences: global-shutter hypotheses, rolling-shutter refinement of the
//! consensus set.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Correspondence, MotionParams};
use crate::hierarchy::{build, GeneralizedEssential};
use crate::linear::solve_linear;
use crate::nonlinear::{fit, multi_start, per_point_sampson, refine, sampson_error, SampsonConfig, SampsonVariant};

/// Refine-and-reclassify rounds after consensus.
const MAX_REFITS: usize = 20;

/// How hypotheses are generated inside the sampling loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisMode {
    /// 8-point global-shutter matrix on 8 samples; the camera model enters after consensus.
    #[default]
    GlobalShutter,
    /// Multi-start Sampson fit of the target model on `minimal_point_count` samples.
    RollingShutterMinimal,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    /// Inlier bound on the per-point Sampson term (squared, normalized coordinates).
    pub threshold: f64,
    /// Bound for the model stage after consensus: scoring the inner model hypotheses, choosing
    /// between refits and the final classification. Set it far below `threshold` for noise-free
    /// data. `None` keeps `threshold`.
    pub final_threshold: Option<f64>,
    pub max_iterations: usize,
    pub confidence: f64,
    pub seed: u64,
    pub hypothesis: HypothesisMode,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            threshold: 1e-6,
            final_threshold: None,
            max_iterations: 1000,
            confidence: 0.999,
            seed: 0,
            hypothesis: HypothesisMode::GlobalShutter,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        let final_ok = self.final_threshold.is_none_or(|t| t > 0.0 && t <= self.threshold);
        if !(self.threshold > 0.0) || !final_ok {
            return Err(Error::InvalidInput("inlier thresholds must be positive, the final one at most the first".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidInput("confidence must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub params: MotionParams,
    pub inliers: Vec<bool>,
    /// Global-shutter sampling iterations actually run (never above `max_iterations`).
    pub iterations: usize,
    /// Model-hypothesis iterations of the stage after consensus.
    pub model_iterations: usize,
    /// Sampson error of `params` over the inliers.
    pub inlier_error: f64,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|b| **b).count()
    }
}

/// Iterations needed to draw one clean sample of size `s` with probability `confidence` when
/// the inlier ratio is `w`.
pub fn required_iterations(w: f64, s: usize, confidence: f64) -> usize {
    let clean = w.powi(s as i32);
    if clean >= 1.0 {
        return 1;
    }
    if clean <= 0.0 {
        return usize::MAX;
    }
    let n = (1.0 - confidence).ln() / (1.0 - clean).ln();
    if n.is_finite() {
        n.ceil().max(1.0) as usize
    } else {
        usize::MAX
    }
}

fn classify(f: &GeneralizedEssential, corrs: &[Correspondence], threshold: f64) -> Vec<bool> {
    corrs
        .iter()
        .map(|c| per_point_sampson(f, c, SampsonVariant::Lifted).is_some_and(|e| e <= threshold))
        .collect()
}

fn select(corrs: &[Correspondence], mask: &[bool]) -> Vec<Correspondence> {
    corrs.iter().zip(mask).filter(|(_, m)| **m).map(|(c, _)| *c).collect()
}

fn hypothesis(sample: &[Correspondence], model: CameraModel, rcfg: &RansacConfig, cfg: &SampsonConfig) -> Option<GeneralizedEssential> {
    match rcfg.hypothesis {
        HypothesisMode::GlobalShutter => solve_linear(sample, CameraModel::Perspective).ok().map(|e| e.essential),
        HypothesisMode::RollingShutterMinimal => {
            let quick = SampsonConfig { restarts: 0, ..*cfg };
            multi_start(sample, model, &quick, None).ok().and_then(|r| build(&r.params).ok())
        }
    }
}

fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|b| **b).count()
}

/// Model fit to a global-shutter consensus set. Candidates are the direct fit of the whole set
/// and the fit of the best consensus among linear `model` hypotheses drawn from inside the
/// set; the one with more inliers at `bound` wins. The inner sampling keeps the fit clear of
/// the outliers a loose global-shutter bound lets in.
fn refit_consensus(
    corrs: &[Correspondence],
    consensus: &[bool],
    model: CameraModel,
    bound: f64,
    rcfg: &RansacConfig,
    cfg: &SampsonConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(MotionParams, usize)> {
    let members: Vec<usize> = (0..corrs.len()).filter(|&i| consensus[i]).collect();
    let direct = fit(&select(corrs, consensus), model, cfg, None);
    let mut candidates = Vec::new();
    if let Ok(r) = &direct {
        candidates.push((r.params, count(&classify(&build(&r.params)?, corrs, bound))));
    }

    let k = model.linear_point_count();
    let mut iterations = 0;
    if model != CameraModel::Perspective && members.len() > k {
        let mut best: Option<(usize, Vec<bool>)> = None;
        let mut limit = rcfg.max_iterations;
        while iterations < limit.min(rcfg.max_iterations) {
            iterations += 1;
            let idx = sample(rng, members.len(), k);
            let chosen: Vec<Correspondence> = idx.iter().map(|i| corrs[members[i]]).collect();
            let Ok(est) = solve_linear(&chosen, model) else {
                continue;
            };
            let mask = classify(&est.essential, corrs, bound);
            let c = count(&mask);
            if best.as_ref().is_none_or(|(b, _)| c > *b) {
                let in_set = members.iter().filter(|&&i| mask[i]).count();
                limit = required_iterations(in_set as f64 / members.len() as f64, k, rcfg.confidence);
                best = Some((c, mask));
            }
        }
        if let Some((_, mask)) = best {
            let inliers = select(corrs, &mask);
            if inliers.len() >= model.minimal_point_count() {
                if let Ok(r) = fit(&inliers, model, cfg, None) {
                    candidates.push((r.params, count(&classify(&build(&r.params)?, corrs, bound))));
                }
            }
        }
    }
    // earlier candidate wins ties
    let best = candidates.into_iter().fold(None::<(MotionParams, usize)>, |acc, c| match acc {
        Some(a) if a.1 >= c.1 => Some(a),
        _ => Some(c),
    });
    match best {
        Some((p, _)) => Ok((p, iterations)),
        None => Err(direct.expect_err("direct fit failed when no candidate exists")),
    }
}

/// Robust fit of `model`. The sampling loop keeps the hypothesis with most inliers (earliest
/// iteration on ties) and stops once the adaptive bound for `rcfg.confidence` is reached. The
/// consensus set is then refit with `model`, and the fit is refined and reclassified with the
/// model's own Sampson term at `rcfg.final_threshold` until the inlier set settles.
pub fn ransac(corrs: &[Correspondence], model: CameraModel, rcfg: &RansacConfig, cfg: &SampsonConfig) -> Result<RansacResult> {
    rcfg.validate()?;
    cfg.validate()?;
    let s = match rcfg.hypothesis {
        HypothesisMode::GlobalShutter => {
            if model.is_push_broom() {
                return Err(Error::InvalidInput(
                    "global-shutter hypotheses need an image-row model; use rolling-shutter-minimal sampling for push-broom data".into(),
                ));
            }
            8
        }
        HypothesisMode::RollingShutterMinimal => model.minimal_point_count(),
    };
    let n = corrs.len();
    let needed = s.max(model.minimal_point_count());
    if n < needed {
        return Err(Error::InsufficientPoints { model, needed, got: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rcfg.seed);
    let mut best: Option<(usize, Vec<bool>)> = None;
    let mut bound = rcfg.max_iterations;
    let mut iterations = 0;
    while iterations < bound.min(rcfg.max_iterations) {
        iterations += 1;
        let idx = sample(&mut rng, n, s);
        let subset: Vec<Correspondence> = idx.iter().map(|i| corrs[i]).collect();
        let Some(f) = hypothesis(&subset, model, rcfg, cfg) else {
            continue;
        };
        let mask = classify(&f, corrs, rcfg.threshold);
        let count = mask.iter().filter(|b| **b).count();
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            bound = required_iterations(count as f64 / n as f64, s, rcfg.confidence);
            best = Some((count, mask));
        }
    }
    let (count, mask) = best.unwrap_or((0, vec![false; n]));
    let required = 2.0 * s as f64 / n as f64;
    let ratio = count as f64 / n as f64;
    if ratio < required || count < model.minimal_point_count() {
        return Err(Error::NoConsensus { ratio, required });
    }

    let bound = rcfg.final_threshold.unwrap_or(rcfg.threshold);
    let (mut current, model_iterations) = refit_consensus(corrs, &mask, model, bound, rcfg, cfg, &mut rng)?;
    let mut mask = Vec::new();
    for _ in 0..MAX_REFITS {
        let next = classify(&build(&current)?, corrs, bound);
        let inliers = select(corrs, &next);
        if inliers.len() < model.minimal_point_count() {
            return Err(Error::NoConsensus {
                ratio: inliers.len() as f64 / n as f64,
                required,
            });
        }
        if next == mask {
            break;
        }
        current = refine(&current, &inliers, model, cfg)?.params;
        mask = next;
    }
    // report the classification of the returned parameters
    let mask = classify(&build(&current)?, corrs, bound);
    let inliers = select(corrs, &mask);
    let inlier_error = sampson_error(&build(&current)?, &inliers).value;
    Ok(RansacResult {
        params: current,
        inliers: mask,
        iterations,
        model_iterations,
        inlier_error,
    })
}
