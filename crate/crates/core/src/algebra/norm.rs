use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    /// `max_i |x_i|^{1/w_i}`
    MaxPower,
    /// `Σ_i |x_i|^{1/w_i}`
    SumPower,
}

/// Homogeneous norm on exponential coordinates: `‖δ_λ x‖ = λ‖x‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousNorm {
    pub kind: NormKind,
    pub weights: Vec<u32>,
}

impl HomogeneousNorm {
    pub fn new(kind: NormKind, weights: Vec<u32>) -> Self {
        Self { kind, weights }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        let terms = x
            .iter()
            .zip(&self.weights)
            .map(|(v, &w)| root(v.abs(), w));
        match self.kind {
            NormKind::MaxPower => terms.fold(0.0, f64::max),
            NormKind::SumPower => terms.sum(),
        }
    }
}

fn root(v: f64, w: u32) -> f64 {
    match w {
        1 => v,
        2 => v.sqrt(),
        3 => v.cbrt(),
        _ => v.powf(1.0 / w as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_values() {
        let n = HomogeneousNorm::new(NormKind::MaxPower, vec![1, 1, 2]);
        assert_eq!(n.eval(&[3.0, 0.0, 0.0]), 3.0);
        assert_eq!(n.eval(&[0.0, 0.0, 4.0]), 2.0);
        assert_eq!(n.eval(&[0.0, 0.0, 0.0]), 0.0);
        let s = HomogeneousNorm::new(NormKind::SumPower, vec![1, 1, 2]);
        assert_eq!(s.eval(&[1.0, -1.0, 4.0]), 4.0);
    }
}
