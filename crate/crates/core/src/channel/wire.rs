//! JSON wire format for [`ScenarioSpec`].
//!
//! ```json
//! {"N": 2,
//!  "users": [{"n": 1, "R": [[[1,0],[0,0]],[[0,0],[1,0]]], "T": [[[1,0]]],
//!             "Hbar": null, "fading": {"family": "gaussian"}}],
//!  "S": null}
//! ```
//! Matrices are arrays of rows, each row an array of `[re, im]` pairs. `Hbar` and
//! `S` may be omitted or `null` for all-zero matrices.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fading::FadingSpec;
use super::scenario::{ScenarioSpec, UserSpec};
use crate::error::{Error, Result};
use crate::linalg::{is_zero, CMat};

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson, expected: (usize, usize), name: &str) -> Result<CMat> {
    if rows.len() != expected.0 || rows.iter().any(|r| r.len() != expected.1) {
        return Err(Error::Dimension(format!(
            "{name} must be {}x{}",
            expected.0, expected.1
        )));
    }
    Ok(CMat::from_fn(expected.0, expected.1, |i, j| {
        Complex64::new(rows[i][j][0], rows[i][j][1])
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserJson {
    pub n: usize,
    #[serde(rename = "R")]
    pub r: MatrixJson,
    #[serde(rename = "T")]
    pub t: MatrixJson,
    #[serde(rename = "Hbar", default)]
    pub hbar: Option<MatrixJson>,
    #[serde(default)]
    pub fading: FadingSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioJson {
    #[serde(rename = "N")]
    pub n_rx: usize,
    pub users: Vec<UserJson>,
    #[serde(rename = "S", default)]
    pub s: Option<MatrixJson>,
}

impl From<&ScenarioSpec> for ScenarioJson {
    fn from(spec: &ScenarioSpec) -> Self {
        ScenarioJson {
            n_rx: spec.n_rx,
            users: spec
                .users
                .iter()
                .map(|u| UserJson {
                    n: u.n,
                    r: matrix_to_json(&u.r),
                    t: matrix_to_json(&u.t),
                    hbar: (!is_zero(&u.hbar)).then(|| matrix_to_json(&u.hbar)),
                    fading: u.fading,
                })
                .collect(),
            s: (!is_zero(&spec.s)).then(|| matrix_to_json(&spec.s)),
        }
    }
}

impl From<ScenarioSpec> for ScenarioJson {
    fn from(spec: ScenarioSpec) -> Self {
        ScenarioJson::from(&spec)
    }
}

impl TryFrom<ScenarioJson> for ScenarioSpec {
    type Error = Error;

    fn try_from(json: ScenarioJson) -> Result<Self> {
        let n = json.n_rx;
        let mut users = Vec::with_capacity(json.users.len());
        for (k, u) in json.users.iter().enumerate() {
            users.push(UserSpec {
                n: u.n,
                r: matrix_from_json(&u.r, (n, n), &format!("users[{k}].R"))?,
                t: matrix_from_json(&u.t, (u.n, u.n), &format!("users[{k}].T"))?,
                hbar: match &u.hbar {
                    Some(h) => matrix_from_json(h, (n, u.n), &format!("users[{k}].Hbar"))?,
                    None => CMat::zeros(n, u.n),
                },
                fading: u.fading,
            });
        }
        let s = match &json.s {
            Some(s) => matrix_from_json(s, (n, n), "S")?,
            None => CMat::zeros(n, n),
        };
        let spec = ScenarioSpec { n_rx: n, users, s };
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for ScenarioSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ScenarioJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ScenarioSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = ScenarioJson::deserialize(deserializer)?;
        ScenarioSpec::try_from(json).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::scenario::ScenarioRecipe;

    #[test]
    fn parses_documented_example() {
        let text = r#"{"N": 2,
            "users": [{"n": 1, "R": [[[1,0],[0,0]],[[0,0],[1,0]]], "T": [[[1,0]]],
                       "Hbar": null, "fading": {"family": "gaussian"}}],
            "S": null}"#;
        let spec: ScenarioSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.n_rx, 2);
        assert_eq!(spec.users[0].r, CMat::identity(2, 2));
        assert!(!spec.has_los());
        assert!(!spec.has_interference());
    }

    #[test]
    fn round_trip_preserves_complex_entries() {
        let recipe: ScenarioRecipe = serde_json::from_str(
            r#"{"N": 4, "users": [{"n": 3, "R": "random_diagonal",
                "T": {"ula": {"mean_deg": 15, "spread_deg": 12}}, "los": true}], "seed": 9}"#,
        )
        .unwrap();
        let spec = recipe.build().unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn rejects_bad_shapes_and_unknown_keys() {
        let bad = r#"{"N": 2, "users": [{"n": 1, "R": [[[1,0]]], "T": [[[1,0]]]}]}"#;
        assert!(serde_json::from_str::<ScenarioSpec>(bad).is_err());
        let unknown = r#"{"N": 1, "users": [{"n": 1, "R": [[[1,0]]], "T": [[[1,0]]], "X": 1}]}"#;
        assert!(serde_json::from_str::<ScenarioSpec>(unknown).is_err());
        let not_psd = r#"{"N": 1, "users": [{"n": 1, "R": [[[-1,0]]], "T": [[[1,0]]]}]}"#;
        assert!(serde_json::from_str::<ScenarioSpec>(not_psd).is_err());
    }
}
