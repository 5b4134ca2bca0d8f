//! JSON norm specifications and the short command-line forms.
//!
//! ```text
//! {"kind": "lp", "p": 2}                      or "p": "inf"
//! {"kind": "ellipsoid", "matrix": [[2, 0], [0, 1]]}
//! {"kind": "perturbed_lp", "p": 2, "delta": 0.03, "seed": 11}
//! {"kind": "table", "terms": [{"a": [1, 0], "p": 1.5, "w": 1}, ...]}
//! ```

use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use super::kinds::{Ellipsoid, EvenPerturbation, Lp, PerturbedGauge, Table, TableTerm};
use super::{Gauge, NormError, NormOracle};

/// An `l^p` exponent in `[1, inf]`; serialized as a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl Exponent {
    pub(crate) fn label(&self, prefix: &str) -> String {
        if self.0.is_infinite() {
            format!("{prefix}:inf")
        } else {
            format!("{prefix}:{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exponent;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number >= 1 or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Exponent, E> {
                Ok(Exponent(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Exponent, E> {
                match v {
                    "inf" | "infinity" => Ok(Exponent(f64::INFINITY)),
                    other => other
                        .parse::<f64>()
                        .map(Exponent)
                        .map_err(|_| E::custom(format!("bad exponent {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormSpec {
    Lp {
        p: Exponent,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    Ellipsoid {
        matrix: Vec<Vec<f64>>,
    },
    PerturbedLp {
        p: Exponent,
        delta: f64,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    Table {
        terms: Vec<TableTerm>,
    },
}

impl NormSpec {
    /// Parses JSON (when `s` starts with `{`) or a short form:
    /// `lp:P`, `l1`, `l2`, `linf`, `euclidean`, `perturbed:P:DELTA:SEED`.
    pub fn parse(s: &str) -> Result<NormSpec, NormError> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| NormError::InvalidSpec(e.to_string()));
        }
        let bad = || NormError::InvalidSpec(format!("unrecognized norm {s:?}; expected lp:P, l1, l2, linf, euclidean, perturbed:P:DELTA:SEED or JSON"));
        let parse_p = |t: &str| -> Result<Exponent, NormError> {
            match t {
                "inf" | "infinity" => Ok(Exponent(f64::INFINITY)),
                _ => t.parse::<f64>().map(Exponent).map_err(|_| bad()),
            }
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["l1"] => Ok(NormSpec::Lp { p: Exponent(1.0), dim: None }),
            ["l2"] | ["euclidean"] => Ok(NormSpec::Lp { p: Exponent(2.0), dim: None }),
            ["linf"] => Ok(NormSpec::Lp { p: Exponent(f64::INFINITY), dim: None }),
            ["lp", p] => Ok(NormSpec::Lp { p: parse_p(p)?, dim: None }),
            ["perturbed", p, delta, seed] => Ok(NormSpec::PerturbedLp {
                p: parse_p(p)?,
                delta: delta.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
                dim: None,
            }),
            _ => Err(bad()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("norm spec serializes")
    }

    /// Builds the oracle in dimension `dim`; fails if the spec fixes a different one.
    pub fn build(&self, dim: usize) -> Result<NormOracle, NormError> {
        let check = |fixed: Option<usize>| match fixed {
            Some(k) if k != dim => Err(NormError::InvalidSpec(format!(
                "norm spec has dimension {k} but {dim} was requested"
            ))),
            _ => Ok(()),
        };
        match self {
            NormSpec::Lp { p, dim: fixed } => {
                check(*fixed)?;
                Ok(NormOracle::new(p.label("lp"), Lp::new(dim, p.0)?))
            }
            NormSpec::Ellipsoid { matrix } => {
                check(Some(matrix.len()))?;
                Ok(NormOracle::new("ellipsoid", Ellipsoid::new(matrix)?))
            }
            NormSpec::PerturbedLp { p, delta, seed, dim: fixed } => {
                check(*fixed)?;
                let base: Arc<dyn Gauge> = Arc::new(Lp::new(dim, p.0)?);
                let g = PerturbedGauge::new(base, *delta, EvenPerturbation::new(dim, *seed))?;
                Ok(NormOracle::new(format!("{}:{delta}:{seed}", p.label("perturbed")), g))
            }
            NormSpec::Table { terms } => {
                let t = Table::new(terms.clone())?;
                check(Some(t.dim()))?;
                Ok(NormOracle::new(format!("table:{}", terms.len()), t))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_forms() {
        assert_eq!(NormSpec::parse("lp:2").unwrap(), NormSpec::Lp { p: Exponent(2.0), dim: None });
        assert_eq!(
            NormSpec::parse("linf").unwrap(),
            NormSpec::Lp { p: Exponent(f64::INFINITY), dim: None }
        );
        assert!(NormSpec::parse("lp:x").is_err());
        assert!(NormSpec::parse("banana").is_err());
        let n = NormSpec::parse("perturbed:2:0.03:5").unwrap().build(3).unwrap();
        assert_eq!(n.dim(), 3);
    }

    #[test]
    fn json_forms_round_trip() {
        for src in [
            r#"{"kind":"lp","p":"inf"}"#,
            r#"{"kind":"lp","p":1.5,"dim":3}"#,
            r#"{"kind":"ellipsoid","matrix":[[2.0,0.5],[0.5,1.0]]}"#,
            r#"{"kind":"perturbed_lp","p":2.0,"delta":0.03,"seed":11}"#,
            r#"{"kind":"table","terms":[{"a":[1.0,0.0],"p":1.5,"w":1.0},{"a":[0.0,1.0],"p":3.0,"w":2.0}]}"#,
        ] {
            let spec = NormSpec::parse(src).unwrap();
            assert_eq!(NormSpec::parse(&spec.to_json()).unwrap(), spec);
        }
    }

    #[test]
    fn unknown_kind_is_diagnosed() {
        let err = NormSpec::parse(r#"{"kind":"hexagon"}"#).unwrap_err();
        let NormError::InvalidSpec(msg) = err else { panic!() };
        assert!(msg.contains("hexagon"), "{msg}");
        assert!(NormSpec::parse(r#"{"kind":"lp","p":2,"extra":1}"#).is_err());
    }

    #[test]
    fn dimension_conflicts() {
        let s = NormSpec::parse(r#"{"kind":"lp","p":2,"dim":3}"#).unwrap();
        assert!(s.build(2).is_err());
        assert!(s.build(3).is_ok());
    }
}
