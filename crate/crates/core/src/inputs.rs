//! Per-test input vectors, weighted toward exceptional value classes.
//!
//! Floating-point inputs are drawn as decimal strings of the same `±d.ddddE±n`
//! shape as program literals, so the string is the value: the stored numeric
//! is the correctly rounded parse of the rendered text, and the rendered text
//! is what lands on the test binary's argv. NaN and infinity are never
//! injected directly; they must arise from computation.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ast::{ast_signature, ParamKind, Precision, ProgramAst};
use crate::error::{Error, Result};

/// Magnitude class of a sampled floating-point input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueClass {
    PosZero,
    NegZero,
    /// `0 < |x| <` smallest normal of the precision.
    Subnormal,
    /// Smallest normal `≤ |x| < 1e-290` (FP64) / `1e-30` (FP32).
    SmallNormal,
    /// `|x| > 1e300` (FP64) / `1e30` (FP32).
    LargeNormal,
    /// `1e-10 ≤ |x| ≤ 1e10`.
    Moderate,
}

impl ValueClass {
    pub const ALL: [ValueClass; 6] = [
        ValueClass::PosZero,
        ValueClass::NegZero,
        ValueClass::Subnormal,
        ValueClass::SmallNormal,
        ValueClass::LargeNormal,
        ValueClass::Moderate,
    ];

    /// Class membership predicate over the (widened) numeric value.
    pub fn matches(self, value: f64, precision: Precision) -> bool {
        let mag = value.abs();
        let (small_cap, large_floor) = match precision {
            Precision::Fp64 => (1e-290, 1e300),
            Precision::Fp32 => (1e-30, 1e30),
        };
        match self {
            ValueClass::PosZero => value == 0.0 && value.is_sign_positive(),
            ValueClass::NegZero => value == 0.0 && value.is_sign_negative(),
            ValueClass::Subnormal => mag > 0.0 && mag < precision.min_normal(),
            ValueClass::SmallNormal => mag >= precision.min_normal() && mag < small_cap,
            ValueClass::LargeNormal => mag > large_floor && value.is_finite(),
            ValueClass::Moderate => (1e-10..=1e10).contains(&mag),
        }
    }

    /// Decimal-exponent window that keeps every `d.dddd` mantissa inside the
    /// class for the given precision.
    fn exponent_window(self, precision: Precision) -> Option<(i32, i32)> {
        match (self, precision) {
            (ValueClass::Subnormal, Precision::Fp64) => Some((-323, -309)),
            (ValueClass::SmallNormal, Precision::Fp64) => Some((-307, -291)),
            (ValueClass::LargeNormal, Precision::Fp64) => Some((301, 307)),
            (ValueClass::Subnormal, Precision::Fp32) => Some((-44, -39)),
            (ValueClass::SmallNormal, Precision::Fp32) => Some((-37, -31)),
            (ValueClass::LargeNormal, Precision::Fp32) => Some((31, 37)),
            (ValueClass::Moderate, _) => Some((-9, 9)),
            (ValueClass::PosZero | ValueClass::NegZero, _) => None,
        }
    }
}

/// Default weights, skewed toward extreme magnitudes and zeros.
pub fn default_class_weights() -> BTreeMap<ValueClass, f64> {
    [
        (ValueClass::Moderate, 0.2),
        (ValueClass::LargeNormal, 0.2),
        (ValueClass::SmallNormal, 0.2),
        (ValueClass::Subnormal, 0.2),
        (ValueClass::PosZero, 0.1),
        (ValueClass::NegZero, 0.1),
    ]
    .into_iter()
    .collect()
}

/// Input-generation settings for one campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputConfig {
    /// Vectors per test.
    pub count: usize,
    pub seed: u64,
    pub class_weights: BTreeMap<ValueClass, f64>,
    /// Inclusive range for integer (loop bound) inputs; mirror the
    /// generator's loop_bound_range.
    pub int_range: (u32, u32),
}

impl InputConfig {
    pub fn new(seed: u64) -> Self {
        InputConfig {
            count: 10,
            seed,
            class_weights: default_class_weights(),
            int_range: (1, 10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InputScalar {
    Int(i64),
    Fp(f64),
}

/// One argv entry: the parameter it feeds, the exact string handed to the
/// binary, and its parsed numeric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputValue {
    pub param: String,
    pub rendered: String,
    pub value: InputScalar,
}

/// A full argument vector for one test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputVector {
    pub test_id: String,
    pub values: Vec<InputValue>,
}

impl InputVector {
    /// The rendered strings, in parameter order, ready for argv.
    pub fn argv(&self) -> Vec<String> {
        self.values.iter().map(|v| v.rendered.clone()).collect()
    }
}

/// Generate `config.count` input vectors for `ast`.
///
/// Deterministic in (AST signature, seed): the RNG stream is derived from
/// both, so regenerating inputs on another platform reproduces them exactly.
pub fn generate_input_vectors(ast: &ProgramAst, config: &InputConfig) -> Result<Vec<InputVector>> {
    if config.class_weights.values().any(|w| *w < 0.0) {
        return Err(Error::Config("negative class weight".into()));
    }
    let total: f64 = config.class_weights.values().sum();
    if total <= 0.0 {
        return Err(Error::Config("class weights must not all be zero".into()));
    }
    if config.int_range.0 > config.int_range.1 {
        return Err(Error::Config(format!(
            "int_range [{}, {}] is empty",
            config.int_range.0, config.int_range.1
        )));
    }

    let test_id = ast_signature(ast);
    let mut hasher = Sha256::new();
    hasher.update(test_id.as_bytes());
    hasher.update(config.seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());

    let mut vectors = Vec::with_capacity(config.count);
    for _ in 0..config.count {
        let mut values = Vec::with_capacity(ast.params.len());
        for param in &ast.params {
            let value = match param.kind {
                ParamKind::IntScalar => {
                    let n = rng.random_range(config.int_range.0..=config.int_range.1);
                    InputValue {
                        param: param.name.clone(),
                        rendered: n.to_string(),
                        value: InputScalar::Int(i64::from(n)),
                    }
                }
                ParamKind::CompAccumulator | ParamKind::FpScalar | ParamKind::FpArray => {
                    let class = pick_class(&config.class_weights, total, &mut rng);
                    let (rendered, numeric) = sample_class(class, ast.precision, &mut rng);
                    InputValue {
                        param: param.name.clone(),
                        rendered,
                        value: InputScalar::Fp(numeric),
                    }
                }
            };
            values.push(value);
        }
        vectors.push(InputVector {
            test_id: test_id.clone(),
            values,
        });
    }
    Ok(vectors)
}

fn pick_class<R: Rng>(
    weights: &BTreeMap<ValueClass, f64>,
    total: f64,
    rng: &mut R,
) -> ValueClass {
    let mut r = rng.random::<f64>() * total;
    let mut last = None;
    for (class, w) in weights.iter().filter(|(_, w)| **w > 0.0) {
        r -= w;
        last = Some(*class);
        if r <= 0.0 {
            return *class;
        }
    }
    last.expect("at least one positive weight")
}

/// Draw one value of the class; returns (rendered, numeric).
fn sample_class<R: Rng>(
    class: ValueClass,
    precision: Precision,
    rng: &mut R,
) -> (String, f64) {
    match class {
        ValueClass::PosZero => ("+0.0".to_string(), 0.0),
        ValueClass::NegZero => ("-0.0".to_string(), -0.0),
        _ => {
            let (lo, hi) = class
                .exponent_window(precision)
                .expect("nonzero class has a window");
            loop {
                let sign = if rng.random_bool(0.5) { '+' } else { '-' };
                let rendered = format!(
                    "{sign}{}.{}{}{}{}E{}",
                    rng.random_range(1..=9u8),
                    rng.random_range(0..=9u8),
                    rng.random_range(0..=9u8),
                    rng.random_range(0..=9u8),
                    rng.random_range(0..=9u8),
                    rng.random_range(lo..=hi),
                );
                let numeric = parse_rendered(&rendered, precision);
                // The windows keep every mantissa inside its class; the check
                // guards the boundary cases where rounding could escape it.
                if class.matches(numeric, precision) {
                    return (rendered, numeric);
                }
            }
        }
    }
}

/// Parse a rendered input string in the program's precision: FP32 inputs are
/// what strtof would produce, widened exactly.
pub fn parse_rendered(rendered: &str, precision: Precision) -> f64 {
    match precision {
        Precision::Fp64 => rendered.parse::<f64>().unwrap_or(0.0),
        Precision::Fp32 => f64::from(rendered.parse::<f32>().unwrap_or(0.0)),
    }
}
