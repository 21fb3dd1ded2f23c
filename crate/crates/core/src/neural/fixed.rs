//! The two hand-weighted addition networks.

use crate::addition::{hidden_weight, OUTPUT_WEIGHTS};

/// Which fixed network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FixedAdditionNet {
    /// Scalar digit inputs, hidden units `i+j`, `i+j+k`, `k`; the output reads the middle unit.
    ThreeUnit,
    /// One-hot digit inputs (30 units), hidden `ReLU(xW)`, output `ReLU(h·[1,1,0])`.
    OneHot,
}

/// Hidden units and output of one pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdditionTrace {
    /// The three hidden units.
    pub hidden: [f64; 3],
    /// Output.
    pub output: f64,
}

const THREE_UNIT_HIDDEN: [[f64; 3]; 3] = [[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0, 1.0]];
const THREE_UNIT_OUTPUT: [f64; 3] = [0.0, 1.0, 0.0];

impl FixedAdditionNet {
    /// Input vector for three digits.
    pub fn input(self, digits: [u8; 3]) -> Vec<f64> {
        match self {
            FixedAdditionNet::ThreeUnit => digits.iter().map(|d| f64::from(*d)).collect(),
            FixedAdditionNet::OneHot => {
                let mut x = vec![0.0; 30];
                for (block, d) in digits.iter().enumerate() {
                    x[block * 10 + *d as usize] = 1.0;
                }
                x
            }
        }
    }

    /// Hidden layer for an input vector.
    pub fn hidden(self, x: &[f64]) -> [f64; 3] {
        let mut h = [0.0; 3];
        for (unit, slot) in h.iter_mut().enumerate() {
            *slot = match self {
                FixedAdditionNet::ThreeUnit => x.iter().zip(THREE_UNIT_HIDDEN[unit]).map(|(a, w)| a * w).sum(),
                FixedAdditionNet::OneHot => x
                    .iter()
                    .enumerate()
                    .map(|(j, a)| a * hidden_weight(j / 10, j % 10, unit))
                    .sum::<f64>()
                    .max(0.0),
            };
        }
        h
    }

    /// Output for a hidden layer.
    pub fn output(self, h: [f64; 3]) -> f64 {
        match self {
            FixedAdditionNet::ThreeUnit => h.iter().zip(THREE_UNIT_OUTPUT).map(|(a, w)| a * w).sum(),
            FixedAdditionNet::OneHot => h.iter().zip(OUTPUT_WEIGHTS).map(|(a, w)| a * w).sum::<f64>().max(0.0),
        }
    }

    /// Forward pass on digits.
    pub fn forward(self, digits: [u8; 3]) -> AdditionTrace {
        self.forward_with(digits, &[])
    }

    /// Forward pass with hidden units overwritten by `(unit, value)` pairs.
    pub fn forward_with(self, digits: [u8; 3], overrides: &[(usize, f64)]) -> AdditionTrace {
        let mut hidden = self.hidden(&self.input(digits));
        for (unit, v) in overrides {
            hidden[*unit] = *v;
        }
        AdditionTrace {
            hidden,
            output: self.output(hidden),
        }
    }

    /// Index of the hidden unit that the output ignores.
    pub fn inert_unit(self) -> usize {
        match self {
            FixedAdditionNet::ThreeUnit => 0,
            FixedAdditionNet::OneHot => 2,
        }
    }
}
