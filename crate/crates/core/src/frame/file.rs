//! Frame definition files.
//!
//! ```toml
//! n = 3
//! r = 2
//! [[field]]   # X = ∂x − (y/2)∂t
//! terms = [[1, [0, 0, 0], 1.0], [3, [0, 1, 0], -0.5]]
//! [[field]]
//! terms = [[2, [0, 0, 0], 1.0], [3, [1, 0, 0], 0.5]]
//! ```
//!
//! Each term is `[component (1-based), exponent vector, coefficient]`.

use serde::{Deserialize, Serialize};

use super::{FrameError, HorizontalFrame};
use crate::poly::{Poly, PolyVectorField};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFieldSpec {
    pub terms: Vec<(usize, Vec<u32>, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFile {
    pub n: usize,
    pub r: usize,
    #[serde(rename = "field")]
    pub fields: Vec<FrameFieldSpec>,
}

impl FrameFile {
    pub fn parse(text: &str) -> Result<Self, FrameError> {
        toml::from_str(text).map_err(|e| FrameError::Definition(e.to_string()))
    }

    pub fn into_frame(self) -> Result<HorizontalFrame, FrameError> {
        if self.fields.len() != self.r {
            return Err(FrameError::Definition(format!(
                "declared r = {} but {} fields given",
                self.r,
                self.fields.len()
            )));
        }
        let n = self.n;
        let fields = self
            .fields
            .into_iter()
            .enumerate()
            .map(|(j, spec)| {
                let mut comps: Vec<Poly> = (0..n).map(|_| Poly::zero(n)).collect();
                for (comp, exps, c) in spec.terms {
                    if comp == 0 || comp > n {
                        return Err(FrameError::Definition(format!(
                            "field {}: component {comp} outside 1..={n}",
                            j + 1
                        )));
                    }
                    if exps.len() != n {
                        return Err(FrameError::Definition(format!(
                            "field {}: exponent vector of length {} in dimension {n}",
                            j + 1,
                            exps.len()
                        )));
                    }
                    if !c.is_finite() {
                        return Err(FrameError::Definition(format!("field {}: non-finite coefficient", j + 1)));
                    }
                    comps[comp - 1].add_term(exps, c);
                }
                Ok(PolyVectorField::new(comps))
            })
            .collect::<Result<Vec<_>, _>>()?;
        HorizontalFrame::new(fields)
    }
}

impl HorizontalFrame {
    /// Parses a frame definition file.
    pub fn parse_definition(text: &str) -> Result<Self, FrameError> {
        FrameFile::parse(text)?.into_frame()
    }

    /// Builtin name, or a path to a definition file.
    pub fn resolve(spec: &str) -> Result<Self, FrameError> {
        match Self::builtin(spec) {
            Ok(f) => Ok(f),
            Err(e) => {
                let path = std::path::Path::new(spec);
                if path.is_file() {
                    let text = std::fs::read_to_string(path)
                        .map_err(|io| FrameError::Definition(format!("{}: {io}", path.display())))?;
                    Self::parse_definition(&text)
                } else {
                    Err(e)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_from_file() {
        let text = r#"
n = 3
r = 2
[[field]]
terms = [[1, [0, 0, 0], 1], [3, [0, 1, 0], -0.5]]
[[field]]
terms = [[2, [0, 0, 0], 1.0], [3, [1, 0, 0], 0.5]]
"#;
        assert_eq!(HorizontalFrame::parse_definition(text).unwrap(), HorizontalFrame::heisenberg());
    }

    #[test]
    fn rejects_bad_component_and_unknown_keys() {
        let bad = "n = 2\nr = 1\n[[field]]\nterms = [[3, [0, 0], 1.0]]\n";
        assert!(HorizontalFrame::parse_definition(bad).is_err());
        let unknown = "n = 2\nr = 0\nmetric = 1\nfield = []\n";
        assert!(HorizontalFrame::parse_definition(unknown).is_err());
    }
}
