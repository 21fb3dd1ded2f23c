//! Three-digit addition: a symbolic sum model and a hand-built one-hot network.
//!
//! The sum model has inputs `X`, `Y`, `Z` over 0..=9, `S1 = X + Y`, `W = Z`
//! and `S2 = S1 + W`. The network reads one-hot digit encodings `Dx`, `Dy`,
//! `Dz`, computes three ReLU hidden units `H1 = X + Y`, `H2 = Z`, `H3 = X + Y`
//! and outputs `O = ReLU(H1 + H2)`.

use crate::abstraction::{
    AbstractionChecker, AbstractionReport, Alignment, CheckOptions, InterventionSet, TauComponent,
};
use crate::causal::{CausalModel, Equation, EquationRegistry, ModelBuilder, Range, Value};
use crate::error::Result;

/// Weight of digit `digit` of input block `block` (0 = x, 1 = y, 2 = z) on hidden unit `unit`.
pub fn hidden_weight(block: usize, digit: usize, unit: usize) -> f64 {
    let feeds = match unit {
        0 | 2 => block < 2,
        1 => block == 2,
        _ => false,
    };
    if feeds {
        digit as f64
    } else {
        0.0
    }
}

/// Output weights on the hidden units.
pub const OUTPUT_WEIGHTS: [f64; 3] = [1.0, 1.0, 0.0];

fn hidden_equation(unit: usize) -> Equation {
    Equation::new(&format!("addition.hidden:{unit}"), move |args| {
        let mut total = 0.0;
        for (block, a) in args.iter().enumerate() {
            let (width, mask) = a.as_bits().expect("bit-vector input");
            for digit in 0..width as usize {
                if mask >> digit & 1 == 1 {
                    total += hidden_weight(block, digit, unit);
                }
            }
        }
        Value::Int(total.max(0.0) as i64)
    })
}

fn output_equation() -> Equation {
    Equation::new("addition.output", |args| {
        let total: f64 = args
            .iter()
            .zip(OUTPUT_WEIGHTS)
            .map(|(a, w)| a.as_int().expect("integer hidden unit") as f64 * w)
            .sum();
        Value::Int(total.max(0.0) as i64)
    })
}

/// Registry with the built-ins plus the network's equations, for loading model files.
pub fn registry() -> EquationRegistry {
    let mut reg = EquationRegistry::with_builtins();
    reg.register("addition.hidden", |arg| {
        let unit: usize = arg
            .and_then(|a| a.parse().ok())
            .filter(|u| *u < 3)
            .ok_or_else(|| crate::Error::parse("equation", "addition.hidden needs a unit 0..=2"))?;
        Ok(hidden_equation(unit))
    });
    reg.register("addition.output", |_| Ok(output_equation()));
    reg
}

/// The symbolic sum model.
pub fn sum_model() -> CausalModel {
    let reg = EquationRegistry::with_builtins();
    let sum = reg.resolve("sum").expect("builtin");
    let id = reg.resolve("identity").expect("builtin");
    ModelBuilder::new()
        .input("X", Range::upto(9), Value::Int(0))
        .input("Y", Range::upto(9), Value::Int(0))
        .input("Z", Range::upto(9), Value::Int(0))
        .var("W", Range::upto(9), &["Z"], id)
        .var("S1", Range::upto(18), &["X", "Y"], sum.clone())
        .var("S2", Range::upto(27), &["S1", "W"], sum)
        .build()
        .expect("well-formed sum model")
}

/// The one-hot network, as a causal model over its neurons.
pub fn network_model() -> CausalModel {
    let d = ["Dx", "Dy", "Dz"];
    ModelBuilder::new()
        .input("Dx", Range::Bits { width: 10 }, Value::one_hot(10, 0))
        .input("Dy", Range::Bits { width: 10 }, Value::one_hot(10, 0))
        .input("Dz", Range::Bits { width: 10 }, Value::one_hot(10, 0))
        .var("H1", Range::upto(90), &d, hidden_equation(0))
        .var("H2", Range::upto(45), &d, hidden_equation(1))
        .var("H3", Range::upto(90), &d, hidden_equation(2))
        .var("O", Range::upto(135), &["H1", "H2", "H3"], output_equation())
        .build()
        .expect("well-formed network model")
}

/// Which hidden units are aligned with the sum model's intermediate variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdditionAlignment {
    /// `S1` with `H1`, `W` with `H2`, `H3` excluded.
    Corrected,
    /// `W` with `H1`, `S1` with `H3`, `H2` excluded.
    Swapped,
}

/// Build the alignment between [`network_model`] and [`sum_model`].
pub fn alignment(low: &CausalModel, high: &CausalModel, which: AdditionAlignment) -> Result<Alignment> {
    let (s1, w) = match which {
        AdditionAlignment::Corrected => ("H1", "H2"),
        AdditionAlignment::Swapped => ("H3", "H1"),
    };
    Alignment::new(
        low,
        high,
        vec![
            ("X", vec!["Dx"], TauComponent::one_hot_decode()),
            ("Y", vec!["Dy"], TauComponent::one_hot_decode()),
            ("Z", vec!["Dz"], TauComponent::one_hot_decode()),
            ("S1", vec![s1], TauComponent::identity()),
            ("W", vec![w], TauComponent::identity()),
            ("S2", vec!["O"], TauComponent::identity()),
        ],
    )
}

/// Admissible high-level interventions: all that fix at least `X`, `Y` and `Z`.
pub fn admissible_high(high: &CausalModel) -> InterventionSet {
    let ids = ["X", "Y", "Z"].iter().map(|n| high.var(n).expect("input")).collect();
    InterventionSet::FixingAtLeast(ids)
}

/// Run the abstraction checker for one alignment.
pub fn verify(which: AdditionAlignment, options: CheckOptions) -> Result<AbstractionReport> {
    let low = network_model();
    let high = sum_model();
    let al = alignment(&low, &high, which)?;
    let checker = AbstractionChecker::new(&low, &high, &al, 1 << 12)?;
    checker.check(&InterventionSet::OmegaPreimage, &admissible_high(&high), options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::Intervention;

    #[test]
    fn network_adds_digits() {
        let m = network_model();
        let iv = Intervention::from_names(
            &m,
            &[
                ("Dx", Value::one_hot(10, 3)),
                ("Dy", Value::one_hot(10, 4)),
                ("Dz", Value::one_hot(10, 9)),
            ],
        )
        .unwrap();
        let s = m.evaluate(&iv).unwrap();
        let got: Vec<i64> = s.0[3..].iter().map(|v| v.as_int().unwrap()).collect();
        assert_eq!(got, vec![7, 9, 7, 16]);
    }

    #[test]
    fn network_model_file_round_trip() {
        let m = network_model();
        let again = CausalModel::from_toml(&m.to_toml(), &registry()).unwrap();
        let iv = Intervention::from_names(&again, &[("Dz", Value::one_hot(10, 6))]).unwrap();
        assert_eq!(again.evaluate(&iv).unwrap().0[6], Value::Int(6));
    }
}
