//! Ensemble files.
//!
//! ```json
//! { "prior": [0.5, 0.5],
//!   "states": [ [[[1,0],[0,0]], [[0,0],[0,0]]],
//!               [[[0.5,0],[0.5,0]], [[0.5,0],[0.5,0]]] ] }
//! ```
//! Matrices are row-major nested arrays of `[re, im]` pairs. The classical
//! shorthand `"classical": [[p(y|x)]...]` replaces `states` with diagonal
//! states in a fixed basis.

use cqdual::cqtypes::{Alphabet, Sequence, TypeDistribution};
use cqdual::divergence::CqEnsemble;
use cqdual::linalg::{CMatrix, DensityOperator, C64};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet_size: Option<usize>,
    pub prior: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<Vec<Vec<f64>>>,
}

const PRIOR_TOL: f64 = 1e-9;

impl EnsembleSpec {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("spec: {e}")))
    }

    pub fn read(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<CqEnsemble, CliError> {
        let k = self.prior.len();
        if let Some(a) = self.alphabet_size {
            if a != k {
                return Err(CliError::Input(format!("alphabet_size {a} but prior has {k} entries")));
            }
        }
        if self.prior.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(CliError::Input("prior entries must be positive".into()));
        }
        let total: f64 = self.prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOL {
            return Err(CliError::Input(format!("prior sums to {total}")));
        }
        let bad = |e: String| CliError::Input(e);
        match (&self.states, &self.classical) {
            (Some(states), None) => {
                if states.len() != k {
                    return Err(bad(format!("{} states for {k} letters", states.len())));
                }
                let ops = states
                    .iter()
                    .enumerate()
                    .map(|(x, rows)| {
                        let d = rows.len();
                        if d == 0 || rows.iter().any(|r| r.len() != d) {
                            return Err(bad(format!("state {x} is not a square matrix")));
                        }
                        let m = CMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1]));
                        DensityOperator::from_matrix(m).map_err(|e| bad(format!("state {x}: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                CqEnsemble::new(self.prior.clone(), ops).map_err(|e| bad(e.to_string()))
            }
            (None, Some(rows)) => {
                if rows.len() != k {
                    return Err(bad(format!("{} rows for {k} letters", rows.len())));
                }
                CqEnsemble::classical(self.prior.clone(), rows).map_err(|e| bad(e.to_string()))
            }
            _ => Err(bad("give exactly one of `states` and `classical`".into())),
        }
    }
}

pub fn parse_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Input(format!("`{t}`: {e}"))))
        .collect()
}

pub fn parse_counts(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| CliError::Input(format!("`{t}`: {e}"))))
        .collect()
}

/// `a:b:k` gives `k` equally spaced points from `a` to `b` inclusive.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Input(format!("range `{s}` is not start:stop:count")));
    }
    let a: f64 = parts[0].parse().map_err(|_| CliError::Input(format!("bad range start `{}`", parts[0])))?;
    let b: f64 = parts[1].parse().map_err(|_| CliError::Input(format!("bad range stop `{}`", parts[1])))?;
    let k: usize = parts[2].parse().map_err(|_| CliError::Input(format!("bad range count `{}`", parts[2])))?;
    Ok(match k {
        0 => vec![],
        1 => vec![a],
        _ => (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect(),
    })
}

/// A probability vector; it must match the alphabet and sum to one.
pub fn parse_distribution(s: &str, size: usize) -> Result<Vec<f64>, CliError> {
    let v = parse_floats(s)?;
    if v.len() != size || v.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (v.iter().sum::<f64>() - 1.0).abs() > PRIOR_TOL {
        return Err(CliError::Input(format!("`{s}` is not a distribution on {size} letters")));
    }
    Ok(v)
}

pub fn parse_type(s: &str, size: usize) -> Result<TypeDistribution, CliError> {
    let c = parse_counts(s)?;
    if c.len() != size {
        return Err(CliError::Input(format!("type `{s}` needs {size} counts")));
    }
    TypeDistribution::new(c).map_err(|e| CliError::Input(e.to_string()))
}

/// Comma-separated digit strings such as `0011,0101`.
pub fn parse_sequences(s: &str, size: usize) -> Result<Vec<Sequence>, CliError> {
    let alphabet = Alphabet::new(size).map_err(|e| CliError::Input(e.to_string()))?;
    s.split(',')
        .map(|w| {
            let letters = w
                .trim()
                .chars()
                .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(|| CliError::Input(format!("bad letter `{c}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            Sequence::new(letters, alphabet).map_err(|e| CliError::Input(e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_states_and_shorthand() {
        let s = EnsembleSpec::from_json(
            r#"{"prior":[0.5,0.5],"states":[[[[1,0],[0,0]],[[0,0],[0,0]]],[[[0.5,0],[0,-0.5]],[[0,0.5],[0.5,0]]]]}"#,
        )
        .unwrap();
        let e = s.validate().unwrap();
        assert_eq!(e.dim(), 2);
        let c = EnsembleSpec::from_json(r#"{"prior":[0.3,0.7],"classical":[[0.9,0.1],[0.2,0.8]]}"#).unwrap();
        assert!(c.validate().unwrap().is_commuting(1e-12));
    }

    #[test]
    fn rejects_invalid() {
        for bad in [
            r#"{"prior":[0.5,0.6],"classical":[[1,0],[0,1]]}"#,
            r#"{"prior":[1.0,0.0],"classical":[[1,0],[0,1]]}"#,
            r#"{"prior":[1.0],"states":[[[[1,0],[0,1]],[[0,-1],[0,0]]]]}"#,
            r#"{"prior":[1.0],"states":[[[[2,0],[0,0]],[[0,0],[0,0]]]]}"#,
            r#"{"prior":[1.0]}"#,
            r#"{"prior":[1.0],"classical":[[1.0]],"extra":1}"#,
        ] {
            assert!(EnsembleSpec::from_json(bad).and_then(|s| s.validate()).is_err(), "{bad}");
        }
    }

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_sequences("01,10", 2).unwrap().len(), 2);
        assert!(parse_sequences("02", 2).is_err());
        assert!(parse_distribution("0.5,0.4", 2).is_err());
    }
}
