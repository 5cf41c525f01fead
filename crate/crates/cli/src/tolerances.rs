use finsler::circleflow::{CircleThresholds, DEFAULT_ABORT_THRESHOLD};

use crate::ThresholdArgs;

pub const ENV_VAR: &str = "FINSLER_TOLERANCES";

/// Default tolerances after applying `FINSLER_TOLERANCES`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub thresholds: CircleThresholds,
    pub abort: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { thresholds: CircleThresholds::default(), abort: Some(DEFAULT_ABORT_THRESHOLD) }
    }
}

impl Tolerances {
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(ENV_VAR) {
            Ok(text) => Self::parse(&text).map_err(|e| format!("{ENV_VAR}: {e}")),
            Err(std::env::VarError::NotPresent) => Ok(Self::default()),
            Err(e) => Err(format!("{ENV_VAR}: {e}")),
        }
    }

    /// Parses `key=value` pairs separated by commas; keys are
    /// `parallelism`, `geodesic` and `abort` (`abort=none` disables it).
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut t = Self::default();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| format!("expected key=value, got '{item}'"))?;
            let key = key.trim();
            let value = value.trim();
            if key == "abort" && value == "none" {
                t.abort = None;
                continue;
            }
            let v = positive(value)?;
            match key {
                "parallelism" => t.thresholds.parallelism = v,
                "geodesic" => t.thresholds.geodesic = v,
                "abort" => t.abort = Some(v),
                other => return Err(format!("unknown tolerance '{other}'")),
            }
        }
        Ok(t)
    }

    pub fn thresholds_with(&self, flags: &ThresholdArgs) -> Result<CircleThresholds, String> {
        let mut th = self.thresholds;
        if let Some(v) = flags.parallelism {
            th.parallelism = check_positive(v)?;
        }
        if let Some(v) = flags.geodesic {
            th.geodesic = check_positive(v)?;
        }
        Ok(th)
    }
}

fn positive(text: &str) -> Result<f64, String> {
    let v: f64 = text.parse().map_err(|_| format!("bad number '{text}'"))?;
    check_positive(v)
}

fn check_positive(v: f64) -> Result<f64, String> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("tolerance must be positive and finite, got {v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides() {
        let t = Tolerances::parse("parallelism=1e-3, abort=none").unwrap();
        assert_eq!(t.thresholds.parallelism, 1e-3);
        assert_eq!(t.thresholds.geodesic, 1e-6);
        assert_eq!(t.abort, None);
        assert_eq!(Tolerances::parse("").unwrap(), Tolerances::default());
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(Tolerances::parse("parallelism").is_err());
        assert!(Tolerances::parse("rho=1e-4").is_err());
        assert!(Tolerances::parse("geodesic=-1").is_err());
    }

    #[test]
    fn flags_take_precedence() {
        let t = Tolerances::parse("parallelism=1e-3,geodesic=1e-5").unwrap();
        let flags = ThresholdArgs { parallelism: Some(1e-2), geodesic: None };
        let th = t.thresholds_with(&flags).unwrap();
        assert_eq!(th.parallelism, 1e-2);
        assert_eq!(th.geodesic, 1e-5);
    }
}
