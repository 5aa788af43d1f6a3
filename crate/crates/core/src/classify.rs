//! Outcome categorization and discrepancy classification.
//!
//! Every run lands in one of four outcomes — NaN, Inf, Zero, or Number (a
//! nonzero finite value) — each signed. Comparing two outcomes yields one of
//! seven discrepancy classes or Consistent. Sign-only differences (−NaN vs
//! +NaN, −Inf vs +Inf, −0 vs +0) are not discrepancies. Two Numbers are
//! consistent only when bit-identical (a relative-epsilon mode is available);
//! subnormality is reported as a flag, never as a class of its own.

use serde::{Deserialize, Serialize};

use crate::ast::Precision;
use crate::error::{Error, Result};
use crate::hexfloat::{format_hex, parse_hex};

/// The four outcome categories, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeTag {
    NaN,
    Inf,
    Zero,
    Number,
}

impl OutcomeTag {
    pub const ALL: [OutcomeTag; 4] = [
        OutcomeTag::NaN,
        OutcomeTag::Inf,
        OutcomeTag::Zero,
        OutcomeTag::Number,
    ];

    /// Index into adjacency-matrix axes.
    pub fn index(self) -> usize {
        match self {
            OutcomeTag::NaN => 0,
            OutcomeTag::Inf => 1,
            OutcomeTag::Zero => 2,
            OutcomeTag::Number => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OutcomeTag::NaN => "NaN",
            OutcomeTag::Inf => "Inf",
            OutcomeTag::Zero => "Zero",
            OutcomeTag::Number => "Num",
        }
    }
}

/// The categorized result of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    NaN { negative: bool },
    Inf { negative: bool },
    Zero { negative: bool },
    Number { value: f64, subnormal: bool },
}

impl Outcome {
    pub fn tag(&self) -> OutcomeTag {
        match self {
            Outcome::NaN { .. } => OutcomeTag::NaN,
            Outcome::Inf { .. } => OutcomeTag::Inf,
            Outcome::Zero { .. } => OutcomeTag::Zero,
            Outcome::Number { .. } => OutcomeTag::Number,
        }
    }

    /// Categorize a numeric value (NaN sign comes from the bit pattern).
    pub fn of_value(value: f64, precision: Precision) -> Outcome {
        if value.is_nan() {
            Outcome::NaN {
                negative: value.is_sign_negative(),
            }
        } else if value.is_infinite() {
            Outcome::Inf {
                negative: value < 0.0,
            }
        } else if value == 0.0 {
            Outcome::Zero {
                negative: value.is_sign_negative(),
            }
        } else {
            Outcome::Number {
                value,
                subnormal: value.abs() < precision.min_normal(),
            }
        }
    }

    /// Canonical rendering; parses back to an equal outcome.
    pub fn render(&self) -> String {
        match self {
            Outcome::NaN { negative } => if *negative { "-nan" } else { "nan" }.to_string(),
            Outcome::Inf { negative } => if *negative { "-inf" } else { "inf" }.to_string(),
            Outcome::Zero { negative } => format_hex(if *negative { -0.0 } else { 0.0 }),
            Outcome::Number { value, .. } => format_hex(*value),
        }
    }
}

/// Categorize a binary's single output line.
///
/// Accepts the `inf`/`nan` words (case-insensitive, optionally signed),
/// hexfloat, and decimal forms. When the line carries extra fields (the
/// optional decimal echo), only the first is read. `precision` sets the
/// subnormal threshold.
pub fn parse_outcome(line: &str, precision: Precision) -> Result<Outcome> {
    let token = line
        .split_whitespace()
        .next()
        .ok_or_else(|| Error::OutputParse(line.to_string()))?;
    let lower = token.to_ascii_lowercase();
    let (negative, word) = match lower.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, lower.strip_prefix('+').unwrap_or(&lower)),
    };
    match word {
        "nan" => return Ok(Outcome::NaN { negative }),
        "inf" | "infinity" => return Ok(Outcome::Inf { negative }),
        _ => {}
    }
    let value = if word.starts_with("0x") {
        parse_hex(token).ok_or_else(|| Error::OutputParse(line.to_string()))?
    } else {
        token
            .parse::<f64>()
            .map_err(|_| Error::OutputParse(line.to_string()))?
    };
    if value.is_nan() {
        return Ok(Outcome::NaN { negative });
    }
    Ok(Outcome::of_value(value, precision))
}

/// The seven discrepancy classes, plus Consistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassTag {
    NaNVsInf,
    NaNVsZero,
    NaNVsNum,
    InfVsZero,
    InfVsNum,
    NumVsZero,
    NumVsNum,
    Consistent,
}

impl ClassTag {
    /// The seven discrepancy classes, in reporting order.
    pub const DISCREPANCIES: [ClassTag; 7] = [
        ClassTag::NaNVsInf,
        ClassTag::NaNVsZero,
        ClassTag::NaNVsNum,
        ClassTag::InfVsZero,
        ClassTag::InfVsNum,
        ClassTag::NumVsZero,
        ClassTag::NumVsNum,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ClassTag::NaNVsInf => "NaN, Inf",
            ClassTag::NaNVsZero => "NaN, Zero",
            ClassTag::NaNVsNum => "NaN, Num",
            ClassTag::InfVsZero => "Inf, Zero",
            ClassTag::InfVsNum => "Inf, Num",
            ClassTag::NumVsZero => "Num, Zero",
            ClassTag::NumVsNum => "Num, Num",
            ClassTag::Consistent => "Consistent",
        }
    }
}

/// Comparison verdict: the unordered class plus which side produced which tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyClass {
    pub tag: ClassTag,
    /// (side a's outcome tag, side b's outcome tag).
    pub direction: (OutcomeTag, OutcomeTag),
}

/// Number-vs-Number equality policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumberEquality {
    /// Equal iff the bit patterns match.
    Bitwise,
    /// Equal iff |a−b| ≤ eps·max(|a|,|b|).
    RelativeEpsilon(f64),
}

/// Compare two outcomes of the same (test, input) pair under bitwise Number
/// equality.
pub fn compare_outcomes(a: &Outcome, b: &Outcome) -> DiscrepancyClass {
    compare_outcomes_with(a, b, NumberEquality::Bitwise)
}

/// Compare with an explicit Number-equality policy.
///
/// Same tag in {NaN, Inf, Zero} is Consistent regardless of sign. The class
/// tag commutes under argument swap; direction flips.
pub fn compare_outcomes_with(a: &Outcome, b: &Outcome, eq: NumberEquality) -> DiscrepancyClass {
    let direction = (a.tag(), b.tag());
    let tag = match (a, b) {
        (Outcome::NaN { .. }, Outcome::NaN { .. })
        | (Outcome::Inf { .. }, Outcome::Inf { .. })
        | (Outcome::Zero { .. }, Outcome::Zero { .. }) => ClassTag::Consistent,
        (Outcome::Number { value: x, .. }, Outcome::Number { value: y, .. }) => {
            let equal = match eq {
                NumberEquality::Bitwise => x.to_bits() == y.to_bits(),
                NumberEquality::RelativeEpsilon(eps) => {
                    (x - y).abs() <= eps * x.abs().max(y.abs())
                }
            };
            if equal {
                ClassTag::Consistent
            } else {
                ClassTag::NumVsNum
            }
        }
        _ => class_for_tags(a.tag(), b.tag()),
    };
    DiscrepancyClass { tag, direction }
}

/// Class of an unordered pair of distinct outcome tags.
fn class_for_tags(a: OutcomeTag, b: OutcomeTag) -> ClassTag {
    use OutcomeTag::*;
    let pair = if a.index() <= b.index() { (a, b) } else { (b, a) };
    match pair {
        (NaN, Inf) => ClassTag::NaNVsInf,
        (NaN, Zero) => ClassTag::NaNVsZero,
        (NaN, Number) => ClassTag::NaNVsNum,
        (Inf, Zero) => ClassTag::InfVsZero,
        (Inf, Number) => ClassTag::InfVsNum,
        (Zero, Number) => ClassTag::NumVsZero,
        _ => unreachable!("equal tags handled by the caller"),
    }
}
