//! Hammerstein MISO cascade and the normalization that turns a candidate's
//! QoS vector into a trust score in [0, 100].
//!
//! The model is a cascade of per-input memoryless nonlinear gains feeding one
//! linear dynamic block:
//!
//! ```text
//! y(t) = sum_{i=1..n_a} a_i y(t-i)
//!      + sum_i sum_{k=0..n_bi} b_{k,i} psi_i(u_i(t-k))
//!      + eta(t)
//! ```
//!
//! The default configuration is static (no lags): identity gains and equal
//! convex weights, which makes the trust score a plain weighted mean of the
//! normalized QoS inputs scaled to [0, 100]. Polynomial and Bernstein gains
//! and dynamic lags are available through the model configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qos::QosVector;

/// A memoryless nonlinear input gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainFunction {
    /// psi(u) = u
    Identity,
    /// psi(u) = sum_j c_j u^j
    Polynomial { coefficients: Vec<f64> },
    /// psi(u) = sum_j c_j B_{j,n}(u) on the Bernstein basis of degree
    /// n = len - 1. Defined on u in [0, 1] only.
    Bernstein { coefficients: Vec<f64> },
}

impl GainFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            GainFunction::Identity => Ok(()),
            GainFunction::Polynomial { coefficients }
            | GainFunction::Bernstein { coefficients } => {
                if coefficients.is_empty() {
                    Err(Error::invalid("gain coefficient list must not be empty"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn apply(&self, u: f64) -> Result<f64> {
        match self {
            GainFunction::Identity => Ok(u),
            GainFunction::Polynomial { coefficients } => {
                self.validate()?;
                // Horner
                Ok(coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c))
            }
            GainFunction::Bernstein { coefficients } => {
                self.validate()?;
                if !(0.0..=1.0).contains(&u) {
                    return Err(Error::invalid(format!(
                        "bernstein gain requires u in [0,1], got {u}"
                    )));
                }
                let n = coefficients.len() - 1;
                let mut acc = 0.0;
                let mut binom = 1.0f64;
                for (j, c) in coefficients.iter().enumerate() {
                    let basis = binom * u.powi(j as i32) * (1.0 - u).powi((n - j) as i32);
                    acc += c * basis;
                    if j < n {
                        binom = binom * (n - j) as f64 / (j + 1) as f64;
                    }
                }
                Ok(acc)
            }
        }
    }
}

/// The full MISO model: one gain per input, AR coefficients `a_1..a_{n_a}`
/// over past outputs, per-input MA coefficients `b_{0,i}..b_{n_bi,i}` over
/// gained inputs, and the noise variance of `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammersteinModel {
    pub gains: Vec<GainFunction>,
    /// a_1..a_{n_a}; empty for a static model.
    pub ar_coeffs: Vec<f64>,
    /// ma_coeffs[i] = b_{0,i}..b_{n_bi,i}; each list has at least one entry.
    pub ma_coeffs: Vec<Vec<f64>>,
    /// Variance of the zero-mean Gaussian noise term.
    pub noise_variance: f64,
}

impl HammersteinModel {
    /// Static model (no lags) with identity gains and the given weights,
    /// one per input.
    pub fn static_weights(weights: &[f64]) -> Self {
        HammersteinModel {
            gains: vec![GainFunction::Identity; weights.len()],
            ar_coeffs: Vec::new(),
            ma_coeffs: weights.iter().map(|w| vec![*w]).collect(),
            noise_variance: 0.0,
        }
    }

    /// Static model with equal convex weights 1/m over `m` inputs.
    pub fn static_equal_weights(m: usize) -> Self {
        assert!(m > 0);
        HammersteinModel::static_weights(&vec![1.0 / m as f64; m])
    }

    /// Number of inputs the model expects.
    pub fn arity(&self) -> usize {
        self.gains.len()
    }

    /// True when the model has no dynamic terms (n_a = 0, every n_bi = 0).
    pub fn is_static(&self) -> bool {
        self.ar_coeffs.is_empty() && self.ma_coeffs.iter().all(|c| c.len() == 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() {
            return Err(Error::invalid("model must have at least one input"));
        }
        if self.gains.len() != self.ma_coeffs.len() {
            return Err(Error::invalid(format!(
                "gain count ({}) != input coefficient list count ({})",
                self.gains.len(),
                self.ma_coeffs.len()
            )));
        }
        for g in &self.gains {
            g.validate()?;
        }
        for (i, c) in self.ma_coeffs.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::invalid(format!(
                    "input {i} needs at least the lag-0 coefficient b_0"
                )));
            }
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::invalid(format!(
                "noise_variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    /// Evaluate `y(t)` from explicit histories.
    ///
    /// `inputs[i][k]` is `u_i(t-k)` (index 0 = current sample) and
    /// `outputs[j]` is `y(t-1-j)`. Histories shorter than the declared lags
    /// are padded with zero initial conditions: an absent lagged term
    /// contributes nothing. Pass `noise = 0.0` for deterministic evaluation.
    pub fn evaluate(&self, inputs: &[&[f64]], outputs: &[f64], noise: f64) -> Result<f64> {
        self.validate()?;
        if inputs.len() != self.arity() {
            return Err(Error::invalid(format!(
                "model expects {} inputs, got {}",
                self.arity(),
                inputs.len()
            )));
        }
        let mut y = noise;
        for (i, a) in self.ar_coeffs.iter().enumerate() {
            if let Some(past) = outputs.get(i) {
                y += a * past;
            }
        }
        for (i, coeffs) in self.ma_coeffs.iter().enumerate() {
            for (k, b) in coeffs.iter().enumerate() {
                if let Some(u) = inputs[i].get(k) {
                    y += b * self.gains[i].apply(*u)?;
                }
            }
        }
        Ok(y)
    }
}

/// Stepped evaluation of a dynamic model; maintains the input and output
/// histories internally, starting from rest.
#[derive(Debug, Clone)]
pub struct HammersteinState {
    model: HammersteinModel,
    input_hist: Vec<Vec<f64>>,
    output_hist: Vec<f64>,
}

impl HammersteinState {
    pub fn new(model: HammersteinModel) -> Result<Self> {
        model.validate()?;
        let input_hist = vec![Vec::new(); model.arity()];
        Ok(HammersteinState {
            model,
            input_hist,
            output_hist: Vec::new(),
        })
    }

    pub fn model(&self) -> &HammersteinModel {
        &self.model
    }

    /// Feed one sample per input and return `y(t)`.
    pub fn step(&mut self, current: &[f64], noise: f64) -> Result<f64> {
        if current.len() != self.model.arity() {
            return Err(Error::invalid(format!(
                "model expects {} inputs, got {}",
                self.model.arity(),
                current.len()
            )));
        }
        for (i, u) in current.iter().enumerate() {
            let hist = &mut self.input_hist[i];
            hist.insert(0, *u);
            hist.truncate(self.model.ma_coeffs[i].len());
        }
        let refs: Vec<&[f64]> = self.input_hist.iter().map(|h| h.as_slice()).collect();
        let y = self.model.evaluate(&refs, &self.output_hist, noise)?;
        self.output_hist.insert(0, y);
        self.output_hist.truncate(self.model.ar_coeffs.len());
        Ok(y)
    }
}

/// Which QoS quantity feeds a model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ResponseTime,
    ServiceFailureRate,
    NodeEnergy,
    NodeReliability,
    HopCount,
}

/// Whether larger raw values are better or worse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Benefit,
    Cost,
}

fn metric_value(v: &QosVector, m: Metric) -> Result<f64> {
    Ok(match m {
        Metric::ResponseTime => v.response_time,
        Metric::ServiceFailureRate => v.service_failure_rate,
        Metric::NodeEnergy => v.node_energy,
        Metric::NodeReliability => v.node_reliability,
        Metric::HopCount => v
            .hop_count
            .ok_or_else(|| Error::invalid("hop_count input enabled but candidate has none"))?
            as f64,
    })
}

/// Ordered list of (metric, polarity) pairs feeding the model inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub entries: Vec<(Metric, Polarity)>,
}

impl InputSpec {
    /// The default four inputs: response time and failure rate as costs,
    /// energy and reliability as benefits.
    pub fn standard_four() -> Self {
        InputSpec {
            entries: vec![
                (Metric::ResponseTime, Polarity::Cost),
                (Metric::ServiceFailureRate, Polarity::Cost),
                (Metric::NodeEnergy, Polarity::Benefit),
                (Metric::NodeReliability, Polarity::Benefit),
            ],
        }
    }

    /// The four standard inputs plus hop count as a fifth cost input.
    pub fn with_hop_count() -> Self {
        let mut spec = InputSpec::standard_four();
        spec.entries.push((Metric::HopCount, Polarity::Cost));
        spec
    }

    pub fn arity(&self) -> usize {
        self.entries.len()
    }
}

/// Per-metric extrema over one candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRange {
    pub metric: Metric,
    pub polarity: Polarity,
    pub min: f64,
    pub max: f64,
}

impl MetricRange {
    /// All candidates share one value; the metric cannot discriminate.
    pub fn is_degenerate(&self) -> bool {
        self.min == self.max
    }
}

/// Min-max context over the current candidate set, one range per input.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationContext {
    ranges: Vec<MetricRange>,
}

impl NormalizationContext {
    /// Compute per-metric extrema over `candidates`.
    pub fn build(candidates: &[QosVector], spec: &InputSpec) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::invalid(
                "normalization context needs at least one candidate",
            ));
        }
        let mut ranges = Vec::with_capacity(spec.arity());
        for (metric, polarity) in &spec.entries {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for c in candidates {
                let x = metric_value(c, *metric)?;
                min = min.min(x);
                max = max.max(x);
            }
            ranges.push(MetricRange {
                metric: *metric,
                polarity: *polarity,
                min,
                max,
            });
        }
        Ok(NormalizationContext { ranges })
    }

    pub fn ranges(&self) -> &[MetricRange] {
        &self.ranges
    }

    pub fn arity(&self) -> usize {
        self.ranges.len()
    }

    /// Map a candidate onto [0, 1] per input. Benefit metrics map min -> 0
    /// and max -> 1, cost metrics the reverse; a degenerate metric maps to
    /// 1.0 for every candidate so it discriminates against no one.
    pub fn normalize(&self, v: &QosVector) -> Result<Vec<f64>> {
        self.ranges
            .iter()
            .map(|r| {
                let x = metric_value(v, r.metric)?;
                let u = if r.is_degenerate() {
                    1.0
                } else {
                    match r.polarity {
                        Polarity::Benefit => (x - r.min) / (r.max - r.min),
                        Polarity::Cost => (r.max - x) / (r.max - r.min),
                    }
                };
                Ok(u.clamp(0.0, 1.0))
            })
            .collect()
    }
}

/// Draw one noise sample `eta(t)` for the given variance. A variance of
/// zero short-circuits to 0.0 without touching the generator.
pub fn noise_sample<R: rand::Rng + ?Sized>(variance: f64, rng: &mut R) -> f64 {
    if variance == 0.0 {
        0.0
    } else {
        use rand_distr::Distribution;
        rand_distr::Normal::new(0.0, variance.sqrt())
            .expect("validated variance")
            .sample(rng)
    }
}

/// A fused trust value in [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrustScore(f64);

impl TrustScore {
    pub fn clamped(raw: f64) -> Self {
        TrustScore(raw.clamp(0.0, 100.0))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for TrustScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Score one candidate: normalize its QoS vector, run it through the model
/// and scale the output to [0, 100].
///
/// Per-discovery scoring is memoryless, so the model must be in its static
/// configuration; use [`HammersteinState`] directly for dynamic evaluation.
pub fn trust_score(
    v: &QosVector,
    ctx: &NormalizationContext,
    model: &HammersteinModel,
    noise: f64,
) -> Result<TrustScore> {
    if !model.is_static() {
        return Err(Error::invalid(
            "trust_score requires a static model (no AR or MA lags)",
        ));
    }
    if model.arity() != ctx.arity() {
        return Err(Error::invalid(format!(
            "model expects {} inputs but context provides {}",
            model.arity(),
            ctx.arity()
        )));
    }
    let normalized = ctx.normalize(v)?;
    let slices: Vec<&[f64]> = normalized.iter().map(std::slice::from_ref).collect();
    let y = model.evaluate(&slices, &[], noise)?;
    Ok(TrustScore::clamped(100.0 * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qv(rt: f64, fr: f64, en: f64, rel: f64) -> QosVector {
        QosVector {
            response_time: rt,
            service_failure_rate: fr,
            node_energy: en,
            node_reliability: rel,
            hop_count: None,
        }
    }

    #[test]
    fn gain_identity() {
        assert_eq!(GainFunction::Identity.apply(0.7).unwrap(), 0.7);
    }

    #[test]
    fn gain_polynomial_worked_value() {
        let g = GainFunction::Polynomial {
            coefficients: vec![1.0, 0.0, 2.0],
        };
        // 1 + 0*u + 2*u^2 at u = 0.5 -> 1.5
        assert_eq!(g.apply(0.5).unwrap(), 1.5);
    }

    #[test]
    fn gain_linear_bernstein_is_identity() {
        let g = GainFunction::Bernstein {
            coefficients: vec![0.0, 1.0],
        };
        assert_eq!(g.apply(0.25).unwrap(), 0.25);
    }

    #[test]
    fn gain_bernstein_rejects_out_of_domain() {
        let g = GainFunction::Bernstein {
            coefficients: vec![0.0, 1.0],
        };
        assert!(g.apply(1.5).is_err());
        assert!(g.apply(-0.1).is_err());
    }

    #[test]
    fn gain_empty_coefficients_rejected() {
        let g = GainFunction::Polynomial {
            coefficients: vec![],
        };
        assert!(g.apply(0.5).is_err());
    }

    #[test]
    fn evaluate_static_unit_inputs() {
        let model = HammersteinModel::static_equal_weights(4);
        let one = [1.0];
        let inputs: Vec<&[f64]> = vec![&one, &one, &one, &one];
        let y = model.evaluate(&inputs, &[], 0.0).unwrap();
        assert!((y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_static_dot_product() {
        let model = HammersteinModel::static_weights(&[0.4, 0.3, 0.2, 0.1]);
        let hi = [1.0];
        let lo = [0.0];
        let inputs: Vec<&[f64]> = vec![&hi, &lo, &hi, &lo];
        let y = model.evaluate(&inputs, &[], 0.0).unwrap();
        assert!((y - 0.6).abs() < 1e-15);
    }

    #[test]
    fn evaluate_dynamic_recursion() {
        // n_a = 1, a_1 = 0.5, static part contributes 1.0 per step, zero
        // initial history: y = 1.0, 1.5, 1.75, ...
        let model = HammersteinModel {
            gains: vec![GainFunction::Identity],
            ar_coeffs: vec![0.5],
            ma_coeffs: vec![vec![1.0]],
            noise_variance: 0.0,
        };
        let mut state = HammersteinState::new(model).unwrap();
        let expected = [1.0, 1.5, 1.75, 1.875];
        for want in expected {
            let y = state.step(&[1.0], 0.0).unwrap();
            assert!((y - want).abs() < 1e-15, "{y} vs {want}");
        }
    }

    #[test]
    fn evaluate_rejects_arity_mismatch() {
        let model = HammersteinModel::static_equal_weights(4);
        let one = [1.0];
        let inputs: Vec<&[f64]> = vec![&one, &one];
        assert!(model.evaluate(&inputs, &[], 0.0).is_err());
    }

    #[test]
    fn stable_ar_converges_geometrically() {
        let model = HammersteinModel {
            gains: vec![GainFunction::Identity],
            ar_coeffs: vec![0.5],
            ma_coeffs: vec![vec![1.0]],
            noise_variance: 0.0,
        };
        let mut state = HammersteinState::new(model).unwrap();
        // fixed point of y = 0.5 y + 1 is 2
        let mut prev_gap = f64::INFINITY;
        for _ in 0..20 {
            let y = state.step(&[1.0], 0.0).unwrap();
            let gap = (y - 2.0).abs();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-5);
    }

    #[test]
    fn build_normalization_single_candidate_degenerate() {
        let spec = InputSpec::standard_four();
        let ctx = NormalizationContext::build(&[qv(0.1, 0.0, 1.0, 0.5)], &spec).unwrap();
        assert!(ctx.ranges().iter().all(|r| r.is_degenerate()));
    }

    #[test]
    fn build_normalization_extrema() {
        let spec = InputSpec::standard_four();
        let cands = [qv(0.1, 0.0, 1.0, 0.5), qv(0.3, 0.2, 0.5, 0.9)];
        let ctx = NormalizationContext::build(&cands, &spec).unwrap();
        let rt = &ctx.ranges()[0];
        assert_eq!((rt.min, rt.max), (0.1, 0.3));
    }

    #[test]
    fn build_normalization_componentwise_over_three() {
        // brute-force min/max over the set, checked field by field
        let cands = [
            qv(0.10, 0.05, 2.0, 0.4),
            qv(0.25, 0.01, 0.5, 0.9),
            qv(0.15, 0.10, 1.0, 0.6),
        ];
        let spec = InputSpec::standard_four();
        let ctx = NormalizationContext::build(&cands, &spec).unwrap();
        let expect = [(0.10, 0.25), (0.01, 0.10), (0.5, 2.0), (0.4, 0.9)];
        for (r, (lo, hi)) in ctx.ranges().iter().zip(expect) {
            assert_eq!((r.min, r.max), (lo, hi));
        }
    }

    #[test]
    fn build_normalization_rejects_empty() {
        assert!(NormalizationContext::build(&[], &InputSpec::standard_four()).is_err());
    }

    #[test]
    fn normalize_best_and_worst() {
        let spec = InputSpec::standard_four();
        let best = qv(0.1, 0.0, 2.0, 1.0);
        let worst = qv(0.5, 0.3, 0.5, 0.2);
        let ctx = NormalizationContext::build(&[best, worst], &spec).unwrap();
        assert!(ctx.normalize(&best).unwrap().iter().all(|&u| u == 1.0));
        assert!(ctx.normalize(&worst).unwrap().iter().all(|&u| u == 0.0));
    }

    #[test]
    fn normalize_cost_inversion_worked_value() {
        let spec = InputSpec {
            entries: vec![(Metric::ResponseTime, Polarity::Cost)],
        };
        let cands = [qv(0.1, 0.0, 0.0, 0.0), qv(0.3, 0.0, 0.0, 0.0)];
        let ctx = NormalizationContext::build(&cands, &spec).unwrap();
        // (max - x) / (max - min) = (0.3 - 0.2) / 0.2 = 0.5
        let u = ctx.normalize(&qv(0.2, 0.0, 0.0, 0.0)).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trust_score_extremes_and_worked_value() {
        let spec = InputSpec::standard_four();
        let model = HammersteinModel::static_equal_weights(4);
        let best = qv(0.1, 0.0, 2.0, 1.0);
        let worst = qv(0.5, 0.3, 0.5, 0.2);
        let ctx = NormalizationContext::build(&[best, worst], &spec).unwrap();
        assert_eq!(
            trust_score(&best, &ctx, &model, 0.0).unwrap().value(),
            100.0
        );
        assert_eq!(trust_score(&worst, &ctx, &model, 0.0).unwrap().value(), 0.0);
    }

    #[test]
    fn trust_score_hand_dot_product() {
        // normalized inputs (1, 0.5, 0.5, 1) under equal weights -> 75.
        // Candidate b sits exactly mid-range on the two cost metrics? No:
        // construct so b normalizes to (1, 0.5, 0.5, 1).
        let spec = InputSpec::standard_four();
        let model = HammersteinModel::static_equal_weights(4);
        let a = qv(0.2, 0.0, 0.0, 0.0);
        let b = qv(0.1, 0.1, 0.5, 1.0);
        let c = qv(0.3, 0.2, 1.0, 0.0);
        let ctx = NormalizationContext::build(&[a, b, c], &spec).unwrap();
        let n = ctx.normalize(&b).unwrap();
        assert_eq!(n, vec![1.0, 0.5, 0.5, 1.0]);
        let score = trust_score(&b, &ctx, &model, 0.0).unwrap();
        assert!((score.value() - 75.0).abs() < 1e-12);
    }

    #[test]
    fn trust_score_rejects_dynamic_model() {
        let model = HammersteinModel {
            gains: vec![GainFunction::Identity; 4],
            ar_coeffs: vec![0.5],
            ma_coeffs: vec![vec![1.0]; 4],
            noise_variance: 0.0,
        };
        let spec = InputSpec::standard_four();
        let v = qv(0.1, 0.0, 1.0, 0.5);
        let ctx = NormalizationContext::build(&[v], &spec).unwrap();
        assert!(trust_score(&v, &ctx, &model, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn normalize_always_in_unit_interval(
            cands in proptest::collection::vec(
                (0.0..10.0f64, 0.0..1.0f64, 0.0..5.0f64, 0.0..1.0f64), 1..12),
            probe in 0usize..12,
        ) {
            let vs: Vec<QosVector> = cands.iter().map(|&(a, b, c, d)| qv(a, b, c, d)).collect();
            let spec = InputSpec::standard_four();
            let ctx = NormalizationContext::build(&vs, &spec).unwrap();
            let v = &vs[probe % vs.len()];
            for u in ctx.normalize(v).unwrap() {
                prop_assert!((0.0..=1.0).contains(&u));
            }
        }

        #[test]
        fn normalize_polarities_monotone(
            lo in 0.0..1.0f64, hi in 2.0..3.0f64, x1 in 0.0..3.0f64, x2 in 0.0..3.0f64,
        ) {
            // benefit increases with x, cost decreases with x
            let spec = InputSpec {
                entries: vec![
                    (Metric::NodeEnergy, Polarity::Benefit),
                    (Metric::ResponseTime, Polarity::Cost),
                ],
            };
            let c1 = qv(lo, 0.0, lo, 0.0);
            let c2 = qv(hi, 0.0, hi, 0.0);
            let ctx = NormalizationContext::build(&[c1, c2], &spec).unwrap();
            let (xa, xb) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            let na = ctx.normalize(&qv(xa, 0.0, xa, 0.0)).unwrap();
            let nb = ctx.normalize(&qv(xb, 0.0, xb, 0.0)).unwrap();
            prop_assert!(na[0] <= nb[0]); // benefit
            prop_assert!(na[1] >= nb[1]); // cost
        }

        #[test]
        fn polynomial_matches_naive_power_sum(
            coeffs in proptest::collection::vec(-10.0..10.0f64, 1..6),
            u in -1.0..1.0f64,
        ) {
            let g = GainFunction::Polynomial { coefficients: coeffs.clone() };
            let horner = g.apply(u).unwrap();
            let naive: f64 = coeffs.iter().enumerate()
                .map(|(j, c)| c * u.powi(j as i32))
                .sum();
            prop_assert!((horner - naive).abs() < 1e-12);
        }

        #[test]
        fn identical_candidates_score_identically(
            rt in 0.0..1.0f64, fr in 0.0..1.0f64, en in 0.0..5.0f64, rel in 0.0..1.0f64,
            extra in proptest::collection::vec(
                (0.0..1.0f64, 0.0..1.0f64, 0.0..5.0f64, 0.0..1.0f64), 1..6),
        ) {
            let v = qv(rt, fr, en, rel);
            let twin = v;
            let mut cands = vec![v, twin];
            cands.extend(extra.iter().map(|&(a, b, c, d)| qv(a, b, c, d)));
            let spec = InputSpec::standard_four();
            let model = HammersteinModel::static_equal_weights(4);
            let ctx = NormalizationContext::build(&cands, &spec).unwrap();
            let s1 = trust_score(&v, &ctx, &model, 0.0).unwrap();
            let s2 = trust_score(&twin, &ctx, &model, 0.0).unwrap();
            prop_assert_eq!(s1.value(), s2.value());
        }

        #[test]
        fn affine_rescaling_of_one_metric_is_bit_exact(
            nums in proptest::collection::vec((0u32..4096, 0u32..4096, 0u32..4096, 0u32..4096), 2..10),
            scale_exp in -2i32..4,
            offset_num in 0u32..4096,
        ) {
            // Raw values are dyadic rationals, the scale is a power of two
            // and the offset is dyadic, so every intermediate in the min-max
            // formula is exact and the normalized outputs must be
            // bit-identical before and after the transform.
            let base: Vec<QosVector> = nums.iter()
                .map(|&(a, b, c, d)| qv(a as f64 / 64.0, b as f64 / 64.0,
                                        c as f64 / 64.0, d as f64 / 64.0))
                .collect();
            let s = (2.0f64).powi(scale_exp);
            let o = offset_num as f64 / 64.0;
            let scaled: Vec<QosVector> = base.iter()
                .map(|v| QosVector { response_time: v.response_time * s + o, ..*v })
                .collect();
            let spec = InputSpec::standard_four();
            let ctx_a = NormalizationContext::build(&base, &spec).unwrap();
            let ctx_b = NormalizationContext::build(&scaled, &spec).unwrap();
            for (va, vb) in base.iter().zip(&scaled) {
                prop_assert_eq!(ctx_a.normalize(va).unwrap(), ctx_b.normalize(vb).unwrap());
            }
        }

        #[test]
        fn static_score_equals_weighted_mean(
            raw in proptest::collection::vec(
                (0.0..1.0f64, 0.0..1.0f64, 0.0..5.0f64, 0.0..1.0f64), 2..10),
            w in (0.01..1.0f64, 0.01..1.0f64, 0.01..1.0f64, 0.01..1.0f64),
        ) {
            let cands: Vec<QosVector> = raw.iter().map(|&(a, b, c, d)| qv(a, b, c, d)).collect();
            let total = w.0 + w.1 + w.2 + w.3;
            let weights = [w.0 / total, w.1 / total, w.2 / total, w.3 / total];
            let model = HammersteinModel::static_weights(&weights);
            let spec = InputSpec::standard_four();
            let ctx = NormalizationContext::build(&cands, &spec).unwrap();
            for v in &cands {
                let n = ctx.normalize(v).unwrap();
                let dot: f64 = n.iter().zip(&weights).map(|(u, w)| u * w).sum();
                let score = trust_score(v, &ctx, &model, 0.0).unwrap();
                prop_assert!((score.value() - 100.0 * dot).abs() < 1e-12);
            }
        }
    }
}
