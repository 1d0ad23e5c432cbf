use serde::{Deserialize, Serialize};

use super::{EvalError, Evaluator};
use crate::arch::{count_macs, count_params, ArchConfig, Theta};
use crate::score::{EvaluationRecord, RecordSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuntimeModel {
    /// `r0 + k_alpha*alpha + k_rho*rho`
    #[default]
    Linear,
    /// `r0 + seconds_per_gmac * GMACs`
    MacProportional,
}

/// Coefficients of the synthetic accuracy/runtime model.
///
/// Accuracy saturates toward `a_max` in both multipliers; the defaults put
/// the knee near alpha 1.15 and resolution 220.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub a_max: f64,
    pub c_alpha: f64,
    pub c_rho: f64,
    pub r0: f64,
    pub k_alpha: f64,
    pub k_rho: f64,
    #[serde(default)]
    pub runtime_model: RuntimeModel,
    #[serde(default = "default_seconds_per_gmac")]
    pub seconds_per_gmac: f64,
}

fn default_seconds_per_gmac() -> f64 {
    0.4
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            a_max: 28.0,
            c_alpha: 3.0,
            c_rho: 4.0,
            r0: 0.02,
            k_alpha: 0.08,
            k_rho: 0.10,
            runtime_model: RuntimeModel::Linear,
            seconds_per_gmac: default_seconds_per_gmac(),
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<(), EvalError> {
        let fields = [
            ("a_max", self.a_max),
            ("c_alpha", self.c_alpha),
            ("c_rho", self.c_rho),
            ("r0", self.r0),
            ("k_alpha", self.k_alpha),
            ("k_rho", self.k_rho),
            ("seconds_per_gmac", self.seconds_per_gmac),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(EvalError::Config(format!("surrogate {name} must be > 0, got {v}")));
            }
        }
        if self.a_max > 100.0 {
            return Err(EvalError::Config(format!("surrogate a_max must be <= 100, got {}", self.a_max)));
        }
        Ok(())
    }

    pub fn accuracy(&self, theta: Theta) -> f64 {
        self.a_max * (1.0 - (-self.c_alpha * theta.alpha()).exp()) * (1.0 - (-self.c_rho * theta.rho()).exp())
    }

    pub fn linear_runtime(&self, theta: Theta) -> f64 {
        self.r0 + self.k_alpha * theta.alpha() + self.k_rho * theta.rho()
    }
}

pub fn surrogate_evaluate(theta: Theta, params: &SurrogateParams, arch: &ArchConfig) -> Result<EvaluationRecord, EvalError> {
    let graph = arch.build(theta)?;
    let params_m = count_params(&graph) as f64 / 1e6;
    let runtime_s = match params.runtime_model {
        RuntimeModel::Linear => params.linear_runtime(theta),
        RuntimeModel::MacProportional => params.r0 + params.seconds_per_gmac * count_macs(&graph) as f64 / 1e9,
    };
    let mut record = EvaluationRecord::new(theta, params.accuracy(theta), params_m, runtime_s, RecordSource::Surrogate)?;
    record.metadata.insert("synthetic".into(), serde_json::Value::Bool(true));
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct SurrogateEvaluator {
    params: SurrogateParams,
    arch: ArchConfig,
}

impl SurrogateEvaluator {
    pub fn new(params: SurrogateParams, arch: ArchConfig) -> Self {
        Self { params, arch }
    }
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&self, theta: Theta) -> Result<EvaluationRecord, EvalError> {
        surrogate_evaluate(theta, &self.params, &self.arch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn theta(a: f64, r: u32) -> Theta {
        Theta::new(a, r).unwrap()
    }

    fn eval(a: f64, r: u32) -> EvaluationRecord {
        surrogate_evaluate(theta(a, r), &SurrogateParams::default(), &ArchConfig::default()).unwrap()
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn reference_point() {
        let r = eval(1.0, 224);
        // r0 + k_alpha + k_rho at alpha = rho = 1
        assert!((r.runtime_s - 0.20).abs() < 1e-15);
        // 28*(1-e^-3)*(1-e^-4), 50-digit mpmath
        assert!((r.accuracy - 26.118_656_891_850_779).abs() < 1e-12);
        assert_eq!(r.source, RecordSource::Surrogate);
        assert_eq!(r.metadata["synthetic"], true);
        assert_eq!(r.params_m, 3.319130);
    }

    #[test]
    fn saturation_past_1_15() {
        let lo = eval(1.15, 224).accuracy;
        let hi = eval(1.3, 224).accuracy;
        assert!(hi > lo);
        assert!((hi - lo) / lo < 0.02);
    }

    #[test]
    fn mac_proportional_runtime_grows_quadratically_in_resolution() {
        let params = SurrogateParams { runtime_model: RuntimeModel::MacProportional, ..SurrogateParams::default() };
        let arch = ArchConfig::default();
        let small = surrogate_evaluate(theta(1.0, 112), &params, &arch).unwrap().runtime_s - params.r0;
        let big = surrogate_evaluate(theta(1.0, 224), &params, &arch).unwrap().runtime_s - params.r0;
        assert!(big / small > 3.5 && big / small < 4.5, "{}", big / small);
    }

    #[test]
    fn rejects_bad_params() {
        let p = SurrogateParams { k_rho: 0.0, ..SurrogateParams::default() };
        assert!(p.validate().is_err());
        let p = SurrogateParams { a_max: 120.0, ..SurrogateParams::default() };
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn accuracy_increasing_concave_bounded(a in 0.1f64..3.0, r in 32u32..600, d in 0.01f64..0.5) {
            let p = SurrogateParams::default();
            let f = |a: f64| p.accuracy(theta(a, r));
            prop_assert!(f(a + d) > f(a));
            // concave: successive equal steps gain less
            prop_assert!(f(a + 2.0 * d) - f(a + d) < f(a + d) - f(a));
            prop_assert!(f(a) < p.a_max);
            let g = |r: u32| p.accuracy(theta(a, r));
            prop_assert!(g(r + 16) > g(r));
            prop_assert!(g(r + 32) - g(r + 16) < g(r + 16) - g(r));
        }

        #[test]
        fn runtime_linear_in_alpha(a in 0.1f64..3.0, d in 0.0f64..1.0, r in 32u32..600) {
            let p = SurrogateParams::default();
            let diff = p.linear_runtime(theta(a + d, r)) - p.linear_runtime(theta(a, r));
            prop_assert!((diff - p.k_alpha * d).abs() < 1e-12);
        }
    }
}
