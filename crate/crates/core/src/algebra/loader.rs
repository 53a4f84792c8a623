//! Text definitions of Carnot algebras.
//!
//! ```toml
//! n = 3
//! layers = [2, 1]
//! # (i, j, k, value), 1-based: [e_i, e_j] = value * e_k
//! constants = [[1, 2, 3, 1.0]]
//! ```
//!
//! Values may also be rationals written as strings, e.g. `"1/2"`.

use serde::{Deserialize, Serialize};

use super::{AlgebraError, CarnotAlgebra};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawConstant {
    Number(f64),
    Text(String),
}

impl RawConstant {
    fn value(&self) -> Result<f64, AlgebraError> {
        match self {
            RawConstant::Number(v) => Ok(*v),
            RawConstant::Text(s) => parse_rational(s),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    #[serde(default)]
    pub n: Option<usize>,
    pub layers: Vec<usize>,
    #[serde(default)]
    pub constants: Vec<(usize, usize, usize, RawConstant)>,
}

impl AlgebraFile {
    pub fn into_algebra(self) -> Result<CarnotAlgebra, AlgebraError> {
        let total: usize = self.layers.iter().sum();
        if let Some(n) = self.n {
            if n != total {
                return Err(AlgebraError::Dimension(format!(
                    "n = {n} but layers sum to {total}"
                )));
            }
        }
        let mut entries = Vec::with_capacity(self.constants.len());
        for (i, j, k, v) in &self.constants {
            if *i == 0 || *j == 0 || *k == 0 {
                return Err(AlgebraError::Definition(
                    "structure constant indices are 1-based".into(),
                ));
            }
            entries.push((i - 1, j - 1, k - 1, v.value()?));
        }
        CarnotAlgebra::from_constants(self.layers, &entries)
    }
}

impl CarnotAlgebra {
    /// Parses an algebra definition (TOML).
    pub fn parse_definition(text: &str) -> Result<Self, AlgebraError> {
        let file: AlgebraFile =
            toml::from_str(text).map_err(|e| AlgebraError::Definition(e.to_string()))?;
        file.into_algebra()
    }

    /// Named algebras: `heisenberg1`, `heisenberg(m)`, `engel`, `filiform(n)`,
    /// `abelian(n)`, `upper-triangular(m)`.
    pub fn builtin(name: &str) -> Result<Self, AlgebraError> {
        let (head, arg) = crate::util::split_call(name)
            .ok_or_else(|| AlgebraError::Definition(format!("malformed algebra name {name:?}")))?;
        let int_arg = |min: usize| -> Result<usize, AlgebraError> {
            let v: usize = arg
                .ok_or_else(|| AlgebraError::Definition(format!("{head} needs an argument")))?
                .trim()
                .parse()
                .map_err(|_| AlgebraError::Definition(format!("bad argument in {name:?}")))?;
            if v < min {
                return Err(AlgebraError::Definition(format!("{head} needs argument >= {min}")));
            }
            Ok(v)
        };
        match head {
            "heisenberg1" | "h1" => Ok(Self::heisenberg()),
            "heisenberg" => Ok(Self::heisenberg_n(int_arg(1)?)),
            "engel" => Ok(Self::engel()),
            "filiform" => Ok(Self::filiform(int_arg(3)?)),
            "abelian" => Ok(Self::abelian(int_arg(1)?)),
            "upper-triangular" => Ok(Self::upper_triangular(int_arg(2)?)),
            _ => Err(AlgebraError::Definition(format!("unknown algebra {name:?}"))),
        }
    }
}

fn parse_rational(s: &str) -> Result<f64, AlgebraError> {
    let bad = || AlgebraError::Definition(format!("cannot parse constant {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(p as f64 / q as f64)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_heisenberg_with_completion() {
        let a = CarnotAlgebra::parse_definition(
            "n = 3\nlayers = [2, 1]\nconstants = [[1, 2, 3, 1.0]]\n",
        )
        .unwrap();
        assert_eq!(a, CarnotAlgebra::heisenberg());
        assert_eq!(a.constant(1, 0, 2), -1.0);
    }

    #[test]
    fn accepts_rationals_and_integers() {
        let a = CarnotAlgebra::parse_definition(
            "layers = [2, 1, 1]\nconstants = [[1, 2, 3, 1], [1, 3, 4, \"1/2\"]]\n",
        )
        .unwrap();
        assert_eq!(a.constant(0, 2, 3), 0.5);
        assert!(a.verify_structure().is_valid());
    }

    #[test]
    fn rejects_bad_definitions() {
        assert!(CarnotAlgebra::parse_definition("n = 4\nlayers = [2, 1]\n").is_err());
        assert!(CarnotAlgebra::parse_definition("layers = [2, 1]\nconstants = [[0, 1, 2, 1.0]]\n").is_err());
        assert!(CarnotAlgebra::parse_definition("layers = [2, 1]\nbogus = 1\n").is_err());
        assert!(CarnotAlgebra::parse_definition(
            "layers = [2, 1]\nconstants = [[1, 2, 3, 1.0], [2, 1, 3, 1.0]]\n"
        )
        .is_err());
    }

    #[test]
    fn builtin_names() {
        assert_eq!(CarnotAlgebra::builtin("engel").unwrap().layers(), &[2, 1, 1]);
        assert_eq!(CarnotAlgebra::builtin("abelian(3)").unwrap().dim(), 3);
        assert_eq!(CarnotAlgebra::builtin("heisenberg(2)").unwrap().dim(), 5);
        assert!(CarnotAlgebra::builtin("nope").is_err());
    }
}
