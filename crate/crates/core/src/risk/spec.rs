use serde::{Deserialize, Serialize};

use crate::error::{RbError, Result};

fn default_nodes() -> usize {
    20
}

fn default_beta() -> f64 {
    1.0
}

/// The risk measure family and its parameters.
///
/// Serialized as `{"measure": "...", ...}` with the measure-specific fields
/// `alpha, beta, delta, a, b, p, c, nodes, subtract_mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "measure", rename_all = "snake_case")]
pub enum RiskMeasureSpec {
    Volatility,
    #[serde(rename = "es")]
    ExpectedShortfall {
        alpha: f64,
    },
    /// `beta * ES_alpha + delta * E`
    #[serde(rename = "es_mean")]
    EsMeanMixture {
        #[serde(default = "default_beta")]
        beta: f64,
        delta: f64,
        alpha: f64,
    },
    /// Distortion `h(s) = s^{1/c - 1} / c`, discretised on `nodes` levels.
    Spectral {
        c: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
        #[serde(default)]
        subtract_mean: bool,
    },
    /// `min_zeta E[psi_{a,b}(Z - zeta)^p]^{1/p}`
    Deviation {
        a: f64,
        b: f64,
        p: f64,
    },
    /// Deviation plus `delta * E`; the mean term only composes linearly when `p = 1`.
    #[serde(rename = "deviation_mean")]
    DeviationPlusMean {
        a: f64,
        b: f64,
        p: f64,
        delta: f64,
    },
}

impl RiskMeasureSpec {
    pub fn es(alpha: f64) -> Self {
        Self::ExpectedShortfall { alpha }
    }

    pub fn es_minus_mean(alpha: f64) -> Self {
        Self::EsMeanMixture {
            beta: 1.0,
            delta: -1.0,
            alpha,
        }
    }

    /// Mean absolute deviation around the median.
    pub fn mad() -> Self {
        Self::Deviation {
            a: 1.0,
            b: 1.0,
            p: 1.0,
        }
    }

    pub fn mad_plus_mean() -> Self {
        Self::DeviationPlusMean {
            a: 1.0,
            b: 1.0,
            p: 1.0,
            delta: 1.0,
        }
    }

    /// Square root of the variantile at level `alpha`.
    pub fn variantile(alpha: f64) -> Self {
        Self::Deviation {
            a: alpha.sqrt(),
            b: (1.0 - alpha).sqrt(),
            p: 2.0,
        }
    }

    pub fn spectral(c: f64, subtract_mean: bool) -> Self {
        Self::Spectral {
            c,
            nodes: default_nodes(),
            subtract_mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RbError::InvalidSpec(msg));
        let level = |alpha: f64| -> Result<()> {
            if alpha > 0.0 && alpha < 1.0 {
                Ok(())
            } else {
                Err(RbError::InvalidSpec(format!(
                    "alpha must lie in (0,1), got {alpha}"
                )))
            }
        };
        let deviation = |a: f64, b: f64, p: f64| -> Result<()> {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(RbError::InvalidSpec(format!(
                    "a, b must be positive, got a={a}, b={b}"
                )));
            }
            if !(p >= 1.0 && p.is_finite()) {
                return Err(RbError::InvalidSpec(format!("p must be >= 1, got {p}")));
            }
            Ok(())
        };
        match *self {
            Self::Volatility => Ok(()),
            Self::ExpectedShortfall { alpha } => level(alpha),
            Self::EsMeanMixture { beta, delta, alpha } => {
                level(alpha)?;
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad(format!("beta must be positive, got {beta}"));
                }
                if !delta.is_finite() {
                    return bad("delta must be finite".into());
                }
                Ok(())
            }
            Self::Spectral { c, nodes, .. } => {
                if !(c > 0.0 && c < 1.0) {
                    return bad(format!(
                        "spectral parameter c must lie in (0,1) (c=1 gives a degenerate distortion), got {c}"
                    ));
                }
                if nodes == 0 {
                    return bad("spectral grid needs at least one node".into());
                }
                Ok(())
            }
            Self::Deviation { a, b, p } => deviation(a, b, p),
            Self::DeviationPlusMean { a, b, p, delta } => {
                deviation(a, b, p)?;
                if p != 1.0 {
                    return bad(format!(
                        "deviation plus mean requires p = 1 (mean term is not a power-p expectation), got {p}"
                    ));
                }
                if !delta.is_finite() {
                    return bad("delta must be finite".into());
                }
                Ok(())
            }
        }
    }

    /// Exponent `q` of the homogenisation `g(x) = x^q` under which
    /// `g(R(y))` is a minimum of an expectation.
    pub fn homogenization_exponent(&self) -> f64 {
        match *self {
            Self::Volatility => 2.0,
            Self::Deviation { p, .. } => p,
            Self::DeviationPlusMean { p, .. } => p,
            Self::ExpectedShortfall { .. } | Self::EsMeanMixture { .. } | Self::Spectral { .. } => {
                1.0
            }
        }
    }

    /// Whether the measure includes a positive tail term that depends on expected returns,
    /// and so needs the long-only positivity check.
    pub fn is_es_family(&self) -> bool {
        matches!(
            self,
            Self::ExpectedShortfall { .. } | Self::EsMeanMixture { .. } | Self::Spectral { .. }
        )
    }

    /// Row label for benchmark tables.
    pub fn label(&self) -> String {
        match *self {
            Self::Volatility => "Volatility".into(),
            Self::ExpectedShortfall { alpha } => format!("ES_{alpha}"),
            Self::EsMeanMixture { beta, delta, alpha } => {
                if beta == 1.0 && delta == -1.0 {
                    format!("ES_{alpha} - E")
                } else {
                    format!("{beta}*ES_{alpha} + {delta}*E")
                }
            }
            Self::Spectral {
                c, subtract_mean, ..
            } => {
                if subtract_mean {
                    format!("rho_h(c={c}) - E")
                } else {
                    format!("rho_h(c={c})")
                }
            }
            Self::Deviation { a, b, p } => {
                if a == 1.0 && b == 1.0 && p == 1.0 {
                    "MAD".into()
                } else if a == 1.0 && b == 1.0 && p == 2.0 {
                    "Std".into()
                } else if p == 2.0 && ((a * a + b * b) - 1.0).abs() < 1e-12 {
                    format!("variantile_{}", round_level(a * a))
                } else {
                    format!("dev(a={a},b={b},p={p})")
                }
            }
            Self::DeviationPlusMean { a, b, p, delta } => {
                if a == 1.0 && b == 1.0 && p == 1.0 && delta == 1.0 {
                    "MAD + E".into()
                } else {
                    format!("dev(a={a},b={b},p={p}) + {delta}*E")
                }
            }
        }
    }
}

impl std::str::FromStr for RiskMeasureSpec {
    type Err = RbError;

    /// Accepts a JSON object or a shorthand: `volatility`, `std`, `mad`,
    /// `mad+mean`, `es:<alpha>`, `es-mean:<alpha>`, `spectral:<c>`,
    /// `spectral-mean:<c>`, `variantile:<alpha>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = if s.starts_with('{') {
            serde_json::from_str(s)
                .map_err(|e| RbError::Parse(format!("risk measure JSON: {e}")))?
        } else {
            let (name, arg) = match s.split_once(':') {
                Some((n, a)) => (n, Some(a)),
                None => (s, None),
            };
            let value = || -> Result<f64> {
                let a = arg.ok_or_else(|| {
                    RbError::Parse(format!("`{name}` needs a parameter, as in `{name}:0.95`"))
                })?;
                a.trim()
                    .parse()
                    .map_err(|e| RbError::Parse(format!("bad parameter `{a}` for `{name}`: {e}")))
            };
            match name.to_ascii_lowercase().as_str() {
                "volatility" | "vol" => Self::Volatility,
                "std" => Self::Deviation {
                    a: 1.0,
                    b: 1.0,
                    p: 2.0,
                },
                "mad" => Self::mad(),
                "mad+mean" => Self::mad_plus_mean(),
                "es" => Self::es(value()?),
                "es-mean" => Self::es_minus_mean(value()?),
                "spectral" => Self::spectral(value()?, false),
                "spectral-mean" => Self::spectral(value()?, true),
                "variantile" => Self::variantile(value()?),
                other => return Err(RbError::Parse(format!("unknown risk measure `{other}`"))),
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn round_level(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_shorthands() {
        assert_eq!(
            "es:0.95".parse::<RiskMeasureSpec>().unwrap(),
            RiskMeasureSpec::es(0.95)
        );
        assert_eq!(
            "MAD".parse::<RiskMeasureSpec>().unwrap(),
            RiskMeasureSpec::mad()
        );
        assert_eq!(
            "spectral-mean:0.05".parse::<RiskMeasureSpec>().unwrap(),
            RiskMeasureSpec::spectral(0.05, true)
        );
        assert_eq!(
            r#"{"measure": "es_mean", "delta": -1, "alpha": 0.9}"#
                .parse::<RiskMeasureSpec>()
                .unwrap(),
            RiskMeasureSpec::es_minus_mean(0.9)
        );
        assert!("es".parse::<RiskMeasureSpec>().is_err());
        assert!("es:1.5".parse::<RiskMeasureSpec>().is_err());
        assert!("cvar:0.9".parse::<RiskMeasureSpec>().is_err());
    }

    #[test]
    fn json_forms() {
        let s: RiskMeasureSpec = serde_json::from_str(r#"{"measure":"es","alpha":0.95}"#).unwrap();
        assert_eq!(s, RiskMeasureSpec::es(0.95));
        let s: RiskMeasureSpec =
            serde_json::from_str(r#"{"measure":"spectral","c":0.05,"subtract_mean":true}"#)
                .unwrap();
        assert_eq!(s, RiskMeasureSpec::spectral(0.05, true));
        let s: RiskMeasureSpec =
            serde_json::from_str(r#"{"measure":"es_mean","beta":1,"delta":-1,"alpha":0.95}"#)
                .unwrap();
        assert_eq!(s, RiskMeasureSpec::es_minus_mean(0.95));
        let s: RiskMeasureSpec = serde_json::from_str(r#"{"measure":"volatility"}"#).unwrap();
        assert_eq!(s.homogenization_exponent(), 2.0);
        let back = serde_json::to_string(&RiskMeasureSpec::mad_plus_mean()).unwrap();
        assert!(back.contains("\"deviation_mean\""));
    }

    #[test]
    fn validation() {
        assert!(RiskMeasureSpec::es(1.0).validate().is_err());
        assert!(RiskMeasureSpec::spectral(1.0, false).validate().is_err());
        assert!(RiskMeasureSpec::Deviation {
            a: 1.0,
            b: 1.0,
            p: 0.5
        }
        .validate()
        .is_err());
        assert!(RiskMeasureSpec::DeviationPlusMean {
            a: 1.0,
            b: 1.0,
            p: 2.0,
            delta: 1.0
        }
        .validate()
        .is_err());
        assert!(RiskMeasureSpec::EsMeanMixture {
            beta: 0.0,
            delta: 1.0,
            alpha: 0.9
        }
        .validate()
        .is_err());
        assert!(RiskMeasureSpec::variantile(0.99).validate().is_ok());
    }

    #[test]
    fn labels() {
        assert_eq!(RiskMeasureSpec::variantile(0.99).label(), "variantile_0.99");
        assert_eq!(RiskMeasureSpec::es_minus_mean(0.95).label(), "ES_0.95 - E");
        assert_eq!(RiskMeasureSpec::mad().label(), "MAD");
    }
}
