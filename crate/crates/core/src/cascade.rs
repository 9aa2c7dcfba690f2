//! Inline arrays of partially absorbing nanowires along one waveguide.
//!
//! A photon reaching wire k is absorbed with the conditional probability
//! `a_k = A(l_k)`; the fraction of the original input absorbed there is
//! `f_k = a_k·Π_{j<k}(1 − a_j)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::nanowire::{absorption_fraction, length_for_absorption, NanowireSpec};

/// Conditional absorption of the last wire when a design asks for "everything".
pub const DEFAULT_LAST_CAP: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeDesign {
    /// Wires in optical order.
    pub wires: Vec<NanowireSpec>,
    /// Absorption probability of each wire given that the photon reached it.
    pub conditional: Vec<f64>,
    /// Fraction of the chip input absorbed by each wire.
    pub input_fractions: Vec<f64>,
    /// Fraction transmitted past the last wire.
    pub residual: f64,
    /// Set when at least one wire was shortened to `last_cap`.
    pub capped: bool,
}

impl CascadeDesign {
    pub fn empty() -> Self {
        Self {
            wires: Vec::new(),
            conditional: Vec::new(),
            input_fractions: Vec::new(),
            residual: 1.0,
            capped: false,
        }
    }

    /// Rebuild a design from explicit wires, computing its absorption profile.
    pub fn from_wires(wires: Vec<NanowireSpec>) -> Result<Self> {
        for w in &wires {
            w.validate()?;
        }
        let conditional: Vec<f64> = wires.iter().map(NanowireSpec::absorption).collect();
        let (input_fractions, residual) = fractions_from_conditional(&conditional);
        Ok(Self { wires, conditional, input_fractions, residual, capped: false })
    }

    pub fn len(&self) -> usize {
        self.wires.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wires.is_empty()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.wires.iter().map(|w| w.length_um).collect()
    }

    pub fn total_length_um(&self) -> f64 {
        self.wires.iter().map(|w| w.length_um).sum()
    }

    /// Per-wire detection efficiency referenced to the chip input:
    /// `input_fraction × eta_int`.
    pub fn detection_efficiencies(&self) -> Vec<f64> {
        self.input_fractions
            .iter()
            .zip(&self.wires)
            .map(|(f, w)| f * w.eta_int)
            .collect()
    }

    /// Running sum of the input fractions.
    pub fn cumulative_absorption(&self) -> Vec<f64> {
        self.input_fractions
            .iter()
            .scan(0.0, |acc, f| {
                *acc += f;
                Some(*acc)
            })
            .collect()
    }
}

fn fractions_from_conditional(conditional: &[f64]) -> (Vec<f64>, f64) {
    let mut transmitted = 1.0;
    let fractions = conditional
        .iter()
        .map(|a| {
            let f = transmitted * a;
            transmitted *= 1.0 - a;
            f
        })
        .collect();
    (fractions, transmitted)
}

/// Design a cascade from the wire `template` so that wire k absorbs
/// `fractions[k]` of the chip input. Conditional absorptions above
/// `last_cap` are capped and the design is flagged.
pub fn design_with_template(fractions: &[f64], template: &NanowireSpec, last_cap: f64) -> Result<CascadeDesign> {
    let alpha = template.alpha_db_per_um;
    if !(alpha > 0.0) {
        return domain(format!("absorption coefficient must be positive, got {alpha}"));
    }
    if !(0.0..1.0).contains(&last_cap) {
        return domain(format!("last_cap must lie in [0, 1), got {last_cap}"));
    }
    if let Some(bad) = fractions.iter().find(|f| !(**f >= 0.0 && **f <= 1.0)) {
        return domain(format!("absorption fractions must lie in [0, 1], got {bad}"));
    }
    let total: f64 = fractions.iter().sum();
    if total > 1.0 + 1e-12 {
        return domain(format!("absorption fractions sum to {total}, more than the whole input"));
    }

    let mut absorbed = 0.0;
    let mut capped = false;
    let mut conditional = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let remaining = 1.0 - absorbed;
        let mut a = if f == 0.0 {
            0.0
        } else if remaining <= 0.0 {
            1.0
        } else {
            (f / remaining).min(1.0)
        };
        if a > last_cap {
            a = last_cap;
            capped = true;
        }
        conditional.push(a);
        absorbed += f;
    }

    let wires = conditional
        .iter()
        .map(|&a| {
            Ok(NanowireSpec {
                length_um: length_for_absorption(a, alpha)?,
                ..*template
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (input_fractions, residual) = fractions_from_conditional(&conditional);
    Ok(CascadeDesign { wires, conditional, input_fractions, residual, capped })
}

/// [`design_with_template`] with ideal wires of absorption `alpha`.
pub fn design_from_fractions(fractions: &[f64], alpha_db_per_um: f64, last_cap: f64) -> Result<CascadeDesign> {
    design_with_template(fractions, &NanowireSpec::ideal(0.0, alpha_db_per_um), last_cap)
}

/// N wires each absorbing 1/N of the input (the last one capped).
pub fn design_equal_split(n: usize, alpha_db_per_um: f64, last_cap: f64) -> Result<CascadeDesign> {
    equal_split_with_template(n, &NanowireSpec::ideal(0.0, alpha_db_per_um), last_cap)
}

pub fn equal_split_with_template(n: usize, template: &NanowireSpec, last_cap: f64) -> Result<CascadeDesign> {
    if n == 0 {
        return domain("an equal-split cascade needs at least one wire");
    }
    design_with_template(&vec![1.0 / n as f64; n], template, last_cap)
}

/// Forward evaluation: fraction of the input absorbed by each wire and the
/// residual transmission.
pub fn input_fractions(lengths_um: &[f64], alpha_db_per_um: f64) -> Result<(Vec<f64>, f64)> {
    let conditional = lengths_um
        .iter()
        .map(|&l| absorption_fraction(l, alpha_db_per_um))
        .collect::<Result<Vec<_>>>()?;
    Ok(fractions_from_conditional(&conditional))
}

/// Largest N for which an equal split keeps the first wire at or above
/// `min_fraction`, i.e. `floor(1/min_fraction)`.
pub fn max_equal_detectors(min_fraction: f64) -> Result<usize> {
    if !(min_fraction > 0.0 && min_fraction <= 1.0) {
        return domain(format!("minimum absorption must lie in (0, 1], got {min_fraction}"));
    }
    // 1/0.2 evaluates to 5 − ε in binary floating point.
    Ok((1.0 / min_fraction + 1e-9).floor() as usize)
}
