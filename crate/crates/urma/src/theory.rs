//! Computable pieces of the multi-task risk analysis: advantage bounds
//! from the reward range, the ratio filter that makes the clipped
//! surrogate boundable, its normalization to [0, 1], the Hoeffding
//! deviation term, and a Monte-Carlo Gaussian-complexity estimator for
//! small function classes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("invalid bound config: {0}")]
    InvalidConfig(String),
    #[error("loss {loss} outside [{l_min}, {l_max}]; was the ratio filter applied?")]
    LossOutOfRange { loss: f64, l_min: f64, l_max: f64 },
    #[error("gaussian complexity needs a non-empty candidate class")]
    EmptyClass,
}

/// Constants the bound machinery runs on.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundConfig {
    /// Largest per-step reward (perfect tracking: t1 + t2).
    pub r_max: f64,
    pub gamma: f64,
    /// PPO clip range.
    pub epsilon: f64,
    /// Ratio cap for negative-advantage samples.
    pub ratio_cap: f64,
    /// Confidence level (the bound holds with probability 1 - delta).
    pub delta: f64,
    /// Samples per task.
    pub n: usize,
    /// Task count.
    pub m: usize,
}

impl BoundConfig {
    pub fn validate(&self) -> Result<(), TheoryError> {
        let fail = |m: String| Err(TheoryError::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must be in (0,1), got {}", self.gamma));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon must be in (0,1), got {}", self.epsilon));
        }
        if self.ratio_cap <= self.epsilon {
            return fail(format!(
                "ratio cap {} must exceed the clip range {}",
                self.ratio_cap, self.epsilon
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must be in (0,1), got {}", self.delta));
        }
        if self.n == 0 || self.m == 0 {
            return fail("n and m must be at least 1".into());
        }
        if self.r_max < 0.0 {
            return fail(format!("r_max must be non-negative, got {}", self.r_max));
        }
        Ok(())
    }
}

/// Advantage range implied by rewards in [0, r_max]:
/// `A_max = r_max / (1 - gamma)`, `A_min = -A_max`.
pub fn advantage_bounds(r_max: f64, gamma: f64) -> Result<(f64, f64), TheoryError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(TheoryError::InvalidConfig(format!(
            "gamma must be in (0,1), got {gamma}"
        )));
    }
    let a_max = r_max / (1.0 - gamma);
    Ok((-a_max, a_max))
}

/// Normalized-loss interval: `l_min = -A_max (1 + epsilon)`,
/// `l_max = -A_min (1 + E)`.
pub fn loss_bounds(config: &BoundConfig) -> Result<(f64, f64), TheoryError> {
    let (a_min, a_max) = advantage_bounds(config.r_max, config.gamma)?;
    Ok((
        -a_max * (1.0 + config.epsilon),
        -a_min * (1.0 + config.ratio_cap),
    ))
}

/// The clipped surrogate for one sample:
/// `-min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn ppo_sample_loss(advantage: f64, ratio: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    -(ratio * advantage).min(clipped * advantage)
}

/// Discard exactly the samples with negative advantage and ratio above
/// `1 + E`; everything else is retained (clipping already bounds it).
pub fn ratio_filter(samples: &[(f64, f64)], ratio_cap: f64) -> Vec<(f64, f64)> {
    samples
        .iter()
        .copied()
        .filter(|&(advantage, ratio)| !(advantage < 0.0 && ratio > 1.0 + ratio_cap))
        .collect()
}

/// Map a raw surrogate loss into [0, 1] using the configured bounds.
/// Rejects inputs outside the bounds, which indicates the filter was
/// skipped.
pub fn normalize_loss(raw_loss: f64, config: &BoundConfig) -> Result<f64, TheoryError> {
    config.validate()?;
    let (l_min, l_max) = loss_bounds(config)?;
    if raw_loss < l_min || raw_loss > l_max {
        return Err(TheoryError::LossOutOfRange {
            loss: raw_loss,
            l_min,
            l_max,
        });
    }
    if l_max == l_min {
        return Ok(0.0);
    }
    Ok((raw_loss - l_min) / (l_max - l_min))
}

/// Deviation term of the risk bound: `sqrt(8 ln(3/delta) / (n M))`.
pub fn hoeffding_term(n: usize, m: usize, delta: f64) -> f64 {
    (8.0 * (3.0 / delta).ln() / (n as f64 * m as f64)).sqrt()
}

/// Monte-Carlo Gaussian complexity of a finite candidate class: per
/// trial draw i.i.d. standard Gaussians and take the sup of the inner
/// product over the candidates; the estimate is the trial mean.
///
/// The sup over a finite sample of the class only underestimates the
/// true sup, so this is a lower-bound estimator.
pub fn gaussian_complexity_mc(
    candidates: &[Vec<f64>],
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64), TheoryError> {
    if candidates.is_empty() {
        return Err(TheoryError::EmptyClass);
    }
    let dim = candidates[0].len();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut gammas = vec![0.0; dim];
    for _ in 0..trials {
        for g in &mut gammas {
            *g = rng.sample::<f64, _>(StandardNormal);
        }
        let sup = candidates
            .iter()
            .map(|z| z.iter().zip(gammas.iter()).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        sum += sup;
        sum_sq += sup * sup;
    }
    let mean = sum / trials as f64;
    let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
    let stderr = (var / trials as f64).sqrt();
    Ok((mean, stderr))
}

/// The full diagnostic report.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub config: BoundConfig,
    pub a_min: f64,
    pub a_max: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub hoeffding: f64,
    /// Normalized losses sampled over the filtered (advantage, ratio)
    /// domain: (min seen, max seen, count checked).
    pub normalized_loss_range: (f64, f64, usize),
    /// Monte-Carlo complexity of the +-z pair class against its closed
    /// form sqrt(2/pi) ||z||: (estimate, stderr, closed form).
    pub pair_class_complexity: (f64, f64, f64),
}

/// Assemble a report: exact formulas plus a Monte-Carlo audit of the
/// normalized-loss range and a complexity estimate on a class with a
/// known closed form.
pub fn bound_report(
    config: &BoundConfig,
    mc_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<BoundReport, TheoryError> {
    config.validate()?;
    let (a_min, a_max) = advantage_bounds(config.r_max, config.gamma)?;
    let (l_min, l_max) = loss_bounds(config)?;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut checked = 0;
    for _ in 0..mc_samples {
        let advantage = rng.gen_range(a_min..=a_max);
        let ratio = rng.gen_range(0.0..=(2.0 + 2.0 * config.ratio_cap));
        if ratio_filter(&[(advantage, ratio)], config.ratio_cap).is_empty() {
            continue;
        }
        let raw = ppo_sample_loss(advantage, ratio, config.epsilon);
        let ell = normalize_loss(raw, config)?;
        lo = lo.min(ell);
        hi = hi.max(ell);
        checked += 1;
    }

    let z: Vec<f64> = (0..16).map(|i| ((i as f64) * 0.37).sin()).collect();
    let neg: Vec<f64> = z.iter().map(|v| -v).collect();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let closed_form = (2.0 / std::f64::consts::PI).sqrt() * norm;
    let (estimate, stderr) = gaussian_complexity_mc(&[z, neg], 4000, rng)?;

    Ok(BoundReport {
        config: *config,
        a_min,
        a_max,
        l_min,
        l_max,
        hoeffding: hoeffding_term(config.n, config.m, config.delta),
        normalized_loss_range: (lo, hi, checked),
        pair_class_complexity: (estimate, stderr, closed_form),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn advantage_bound_examples() {
        let (a_min, a_max) = advantage_bounds(1.0, 0.99).unwrap();
        assert!((a_max - 100.0).abs() < 1e-9);
        assert!((a_min + 100.0).abs() < 1e-9);
        assert_eq!(advantage_bounds(0.0, 0.5).unwrap(), (0.0, 0.0));
        let (a_min, a_max) = advantage_bounds(2.0, 0.5).unwrap();
        assert_eq!((a_min, a_max), (-4.0, 4.0));
        assert!(advantage_bounds(1.0, 1.0).is_err());
    }

    #[test]
    fn filter_cases() {
        let e = 1.0;
        // negative advantage with ratio above 1 + E: removed
        assert!(ratio_filter(&[(-1.0, 2.01)], e).is_empty());
        // positive advantage with a huge ratio: retained (clipping bounds it)
        assert_eq!(ratio_filter(&[(1.0, 10.0)], e).len(), 1);
        // negative advantage, small ratio: retained
        assert_eq!(ratio_filter(&[(-1.0, 0.5)], e).len(), 1);
    }

    #[test]
    fn normalized_loss_hits_the_endpoints() {
        let config = BoundConfig {
            r_max: 1.0,
            gamma: 0.99,
            epsilon: 0.1,
            ratio_cap: 1.0,
            delta: 0.05,
            n: 1000,
            m: 16,
        };
        let (l_min, l_max) = loss_bounds(&config).unwrap();
        assert_eq!(normalize_loss(l_min, &config).unwrap(), 0.0);
        assert_eq!(normalize_loss(l_max, &config).unwrap(), 1.0);
        assert!(normalize_loss(l_max + 1.0, &config).is_err());
    }

    #[test]
    fn hoeffding_term_properties() {
        let base = hoeffding_term(1000, 16, 0.05);
        let expected = (8.0 * (3.0f64 / 0.05).ln() / 16000.0).sqrt();
        assert!((base - expected).abs() < 1e-15);
        // doubling the task count scales by 1/sqrt(2)
        let doubled = hoeffding_term(1000, 32, 0.05);
        assert!((doubled - base / 2.0f64.sqrt()).abs() < 1e-12);
        // decreasing in n, increasing as delta shrinks
        assert!(hoeffding_term(4000, 16, 0.05) < base);
        assert!(hoeffding_term(1000, 16, 0.01) > base);
    }

    #[test]
    fn zero_function_class_has_zero_complexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (est, err) = gaussian_complexity_mc(&[vec![0.0; 8]], 500, &mut rng).unwrap();
        assert_eq!(est, 0.0);
        assert_eq!(err, 0.0);
    }

    #[test]
    fn pair_class_matches_the_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z: Vec<f64> = (0..12).map(|i| (i as f64 * 0.61).cos()).collect();
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let closed = (2.0 / std::f64::consts::PI).sqrt() * norm;
        let (est, stderr) = gaussian_complexity_mc(&[z, neg], 20_000, &mut rng).unwrap();
        assert!(
            (est - closed).abs() < 3.0 * stderr,
            "estimate {est} vs closed form {closed} (stderr {stderr})"
        );
    }

    #[test]
    fn stderr_shrinks_like_inverse_sqrt_trials() {
        let z: Vec<f64> = (0..10).map(|i| (i as f64 * 0.3).sin()).collect();
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let class = [z, neg];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (_, e1) = gaussian_complexity_mc(&class, 1000, &mut rng).unwrap();
        let (_, e2) = gaussian_complexity_mc(&class, 16_000, &mut rng).unwrap();
        let shrink = e1 / e2;
        assert!(
            (2.0..8.0).contains(&shrink),
            "expected roughly 4x stderr shrink at 16x trials, got {shrink}"
        );
    }

    #[test]
    fn complexity_per_sample_shrinks_with_nm() {
        // fixed bounded class evaluated on nM inputs: G / (nM) should
        // fall like 1/sqrt(nM)
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut per_sample = Vec::new();
        for &nm in &[64usize, 256, 1024] {
            let z: Vec<f64> = (0..nm).map(|i| (i as f64 * 0.17).sin()).collect();
            let neg: Vec<f64> = z.iter().map(|v| -v).collect();
            let (est, _) = gaussian_complexity_mc(&[z, neg], 3000, &mut rng).unwrap();
            per_sample.push(est / nm as f64);
        }
        assert!(per_sample[0] > per_sample[1]);
        assert!(per_sample[1] > per_sample[2]);
    }
}
