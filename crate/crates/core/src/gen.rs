//! Seeded random program generation.
//!
//! Programs are short numerical kernels: arithmetic over the four operators
//! with optional parentheses and C math library calls, `for` loops nested up
//! to a configured depth with bounds taken from integer parameters, `if`
//! guards comparing the accumulator, and temp variables that may hold arrays
//! or single values. Generation is a pure function of the configuration,
//! including its seed.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ast::{
    catalog_arity, is_catalog_fn, AccumOp, BinOpKind, CmpOp, Expr, Literal, Param, ParamKind,
    Precision, ProgramAst, Sign, Stmt, MATH_FNS_1ARG, MATH_FNS_2ARG,
};
use crate::error::{Error, Result};

/// Decimal-exponent span representable by each precision (including the
/// subnormal range); literal exponent ranges must stay inside it.
pub fn exponent_span(precision: Precision) -> (i32, i32) {
    match precision {
        Precision::Fp64 => (-323, 308),
        Precision::Fp32 => (-45, 38),
    }
}

/// Generator configuration. `new` fills in the defaults; fields are public
/// so campaigns can override any knob before generating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub precision: Precision,
    /// Maximum loop nesting depth N; loops inside loops up to this depth.
    pub max_loop_nesting: u32,
    /// Maximum statements per block; 0 produces an empty kernel body.
    pub max_stmts_per_block: u32,
    pub num_fp_params: u32,
    pub num_int_params: u32,
    /// Probability that an FP parameter is an array rather than a scalar.
    pub array_probability: f64,
    /// Base names (no `f` suffix) drawn for math calls.
    pub math_fn_set: BTreeSet<String>,
    /// Inclusive decimal-exponent interval literals are sampled from,
    /// log-uniformly (uniform over the integer exponent).
    pub literal_exponent_range: (i32, i32),
    /// Inclusive interval integer inputs are sampled from; its upper end also
    /// sizes materialized arrays.
    pub loop_bound_range: (u32, u32),
    pub seed: u64,
    /// Probability an expression node becomes a math call (when budget allows).
    pub math_call_prob: f64,
    /// Node budget per generated expression tree.
    pub max_expr_nodes: u32,
    /// Admit `*=` accumulation alongside `+=` and `-=`.
    pub allow_mul_accumulate: bool,
    /// Admit `if` blocks lexically inside other `if` blocks.
    pub allow_nested_ifs: bool,
}

impl GenConfig {
    /// Defaults for the given precision and seed.
    pub fn new(precision: Precision, seed: u64) -> Self {
        GenConfig {
            precision,
            max_loop_nesting: 2,
            max_stmts_per_block: 5,
            num_fp_params: 8,
            num_int_params: 1,
            array_probability: 0.2,
            math_fn_set: MATH_FNS_1ARG
                .iter()
                .chain(MATH_FNS_2ARG)
                .map(|s| s.to_string())
                .collect(),
            literal_exponent_range: exponent_span(precision),
            loop_bound_range: (1, 10),
            seed,
            math_call_prob: 0.15,
            max_expr_nodes: 6,
            allow_mul_accumulate: false,
            allow_nested_ifs: false,
        }
    }

    /// Variant with no math calls, for corpora that must be reproducible
    /// against the reference interpreter bit-for-bit.
    pub fn math_free(precision: Precision, seed: u64) -> Self {
        let mut config = Self::new(precision, seed);
        config.math_fn_set.clear();
        config.math_call_prob = 0.0;
        config
    }

    pub fn validate(&self) -> Result<()> {
        let span = exponent_span(self.precision);
        let (lo, hi) = self.literal_exponent_range;
        if lo > hi || lo < span.0 || hi > span.1 {
            return Err(Error::Config(format!(
                "literal exponent range [{lo}, {hi}] outside representable span [{}, {}]",
                span.0, span.1
            )));
        }
        for name in &self.math_fn_set {
            if !is_catalog_fn(name) {
                return Err(Error::Config(format!(
                    "math function {name:?} is not in the supported catalog"
                )));
            }
        }
        if self.math_call_prob > 0.0 && self.math_fn_set.is_empty() {
            return Err(Error::Config(
                "math generation enabled with an empty math_fn_set".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.array_probability) {
            return Err(Error::Config("array_probability outside [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.math_call_prob) {
            return Err(Error::Config("math_call_prob outside [0, 1]".into()));
        }
        if self.num_fp_params == 0 || self.num_int_params == 0 {
            return Err(Error::Config(
                "num_fp_params and num_int_params must be positive".into(),
            ));
        }
        if self.loop_bound_range.0 == 0 || self.loop_bound_range.0 > self.loop_bound_range.1 {
            return Err(Error::Config(format!(
                "loop_bound_range [{}, {}] must be a positive interval",
                self.loop_bound_range.0, self.loop_bound_range.1
            )));
        }
        if self.max_expr_nodes == 0 {
            return Err(Error::Config("max_expr_nodes must be positive".into()));
        }
        Ok(())
    }
}

/// Draw one literal: sign and digits uniform, exponent uniform over the
/// configured interval (log-uniform in magnitude).
pub fn sample_literal<R: Rng>(config: &GenConfig, rng: &mut R) -> Literal {
    let sign = if rng.random_bool(0.5) { Sign::Pos } else { Sign::Neg };
    let mantissa = [
        rng.random_range(1..=9u8),
        rng.random_range(0..=9u8),
        rng.random_range(0..=9u8),
        rng.random_range(0..=9u8),
        rng.random_range(0..=9u8),
    ];
    let (lo, hi) = config.literal_exponent_range;
    Literal::new(sign, mantissa, rng.random_range(lo..=hi))
}

/// Generate one kernel program from the configuration.
///
/// Deterministic: the same config (seed included) yields a structurally
/// identical AST every time. The emitted kernel prints `comp` as its final
/// statement; the body holds everything before that print.
pub fn generate_program(config: &GenConfig) -> Result<ProgramAst> {
    config.validate()?;
    let mut gen = Generator {
        config,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        math_fns: config.math_fn_set.iter().cloned().collect(),
        tmp_counter: 0,
    };
    Ok(gen.program())
}

const INDUCTION_NAMES: [&str; 3] = ["i", "j", "k"];

fn induction_name(depth: usize) -> String {
    match INDUCTION_NAMES.get(depth) {
        Some(n) => (*n).to_string(),
        None => format!("i_{depth}"),
    }
}

struct Generator<'a> {
    config: &'a GenConfig,
    rng: ChaCha8Rng,
    math_fns: Vec<String>,
    tmp_counter: u32,
}

/// Lexical state threaded through block generation: which loops enclose us,
/// which temps are in scope, whether we sit inside an `if`.
#[derive(Clone, Default)]
struct Scope {
    induction_vars: Vec<String>,
    temps: Vec<String>,
    in_if: bool,
}

impl Generator<'_> {
    fn program(&mut self) -> ProgramAst {
        let config = self.config;
        let mut params = vec![Param {
            name: "comp".into(),
            kind: ParamKind::CompAccumulator,
        }];
        let mut n = 0;
        for _ in 0..config.num_int_params {
            n += 1;
            params.push(Param {
                name: format!("var_{n}"),
                kind: ParamKind::IntScalar,
            });
        }
        for _ in 0..config.num_fp_params {
            n += 1;
            let kind = if self.rng.random_bool(config.array_probability) {
                ParamKind::FpArray
            } else {
                ParamKind::FpScalar
            };
            params.push(Param {
                name: format!("var_{n}"),
                kind,
            });
        }

        let mut ast = ProgramAst {
            kernel_name: "compute".into(),
            params,
            body: Vec::new(),
            precision: config.precision,
        };
        let mut scope = Scope::default();
        ast.body = self.block(&ast, &mut scope, true);
        ast
    }

    /// Generate one block of statements. The top-level block may be empty
    /// when max_stmts_per_block is 0; nested blocks always hold at least one
    /// statement.
    fn block(&mut self, ast: &ProgramAst, scope: &mut Scope, top_level: bool) -> Vec<Stmt> {
        let max = self.config.max_stmts_per_block;
        if max == 0 {
            return Vec::new();
        }
        let count = if top_level {
            self.rng.random_range(1..=max)
        } else {
            self.rng.random_range(1..=max.max(1))
        };
        let temps_before = scope.temps.len();
        let mut body = Vec::with_capacity(count as usize);
        for _ in 0..count {
            body.push(self.stmt(ast, scope));
        }
        scope.temps.truncate(temps_before);
        body
    }

    fn stmt(&mut self, ast: &ProgramAst, scope: &mut Scope) -> Stmt {
        #[derive(Clone, Copy)]
        enum Kind {
            Temp,
            Accum,
            Store,
            Loop,
            If,
        }
        let in_loop = !scope.induction_vars.is_empty();
        let has_arrays = !ast.array_params().is_empty();
        let mut choices: Vec<(Kind, f64)> = vec![(Kind::Temp, 0.20), (Kind::Accum, 0.35)];
        if in_loop && has_arrays {
            choices.push((Kind::Store, 0.15));
        }
        if (scope.induction_vars.len() as u32) < self.config.max_loop_nesting {
            choices.push((Kind::Loop, 0.20));
        }
        if !scope.in_if || self.config.allow_nested_ifs {
            choices.push((Kind::If, 0.15));
        }
        match self.weighted(&choices) {
            Kind::Temp => {
                self.tmp_counter += 1;
                let name = format!("tmp_{}", self.tmp_counter);
                let init = self.expr(ast, scope, self.config.max_expr_nodes);
                scope.temps.push(name.clone());
                Stmt::TempDecl { name, init }
            }
            Kind::Accum => {
                let op = if self.config.allow_mul_accumulate && self.rng.random_bool(0.1) {
                    AccumOp::MulAssign
                } else if self.rng.random_bool(0.5) {
                    AccumOp::AddAssign
                } else {
                    AccumOp::SubAssign
                };
                Stmt::Accumulate {
                    op,
                    rhs: self.expr(ast, scope, self.config.max_expr_nodes),
                }
            }
            Kind::Store => {
                let arrays = ast.array_params();
                let array = self.pick(&arrays).to_string();
                let index_var = self.pick(&scope.induction_vars).clone();
                Stmt::ArrayStore {
                    array,
                    index_var,
                    rhs: self.expr(ast, scope, self.config.max_expr_nodes),
                }
            }
            Kind::Loop => {
                let ints = ast.int_params();
                let bound_param = self.pick(&ints).to_string();
                let induction_var = induction_name(scope.induction_vars.len());
                scope.induction_vars.push(induction_var.clone());
                let body = self.block(ast, scope, false);
                scope.induction_vars.pop();
                Stmt::ForLoop {
                    bound_param,
                    induction_var,
                    body,
                }
            }
            Kind::If => {
                let cmp = *self.pick(&CmpOp::ALL);
                let rhs = self.expr(ast, scope, self.config.max_expr_nodes);
                let was_in_if = scope.in_if;
                scope.in_if = true;
                let body = self.block(ast, scope, false);
                scope.in_if = was_in_if;
                Stmt::IfBlock {
                    lhs: Expr::CompRef,
                    cmp,
                    rhs,
                    body,
                }
            }
        }
    }

    fn expr(&mut self, ast: &ProgramAst, scope: &Scope, budget: u32) -> Expr {
        if budget >= 3 {
            let r: f64 = self.rng.random();
            if r < 0.45 {
                return self.binop(ast, scope, budget);
            }
            if r < 0.45 + self.config.math_call_prob {
                return self.math_call(ast, scope, budget);
            }
            if budget >= 4 && r < 0.53 + self.config.math_call_prob {
                let inner = self.binop(ast, scope, budget - 1);
                return Expr::Paren(Box::new(inner));
            }
        } else if budget == 2 && self.config.math_call_prob > 0.0 {
            // Room for a one-argument call over a leaf.
            if self.rng.random_bool(self.config.math_call_prob) {
                let one_arg: Vec<String> = self
                    .math_fns
                    .iter()
                    .filter(|f| catalog_arity(f) == Some(1))
                    .cloned()
                    .collect();
                if !one_arg.is_empty() {
                    let base = self.pick(&one_arg).clone();
                    let name = self.fn_name(base);
                    let arg = self.leaf(ast, scope);
                    return Expr::MathCall {
                        name,
                        args: vec![arg],
                    };
                }
            }
        }
        self.leaf(ast, scope)
    }

    fn binop(&mut self, ast: &ProgramAst, scope: &Scope, budget: u32) -> Expr {
        let op = *self.pick(&BinOpKind::ALL);
        let inner = budget - 1;
        let lhs_budget = self.rng.random_range(1..inner);
        Expr::BinOp {
            op,
            lhs: Box::new(self.expr(ast, scope, lhs_budget)),
            rhs: Box::new(self.expr(ast, scope, inner - lhs_budget)),
        }
    }

    fn math_call(&mut self, ast: &ProgramAst, scope: &Scope, budget: u32) -> Expr {
        let base = self.math_fns[self.rng.random_range(0..self.math_fns.len())].clone();
        let name = self.fn_name(base.clone());
        let inner = budget - 1;
        let args = match catalog_arity(&base) {
            Some(2) if inner >= 2 => {
                let first = self.rng.random_range(1..inner);
                vec![
                    self.expr(ast, scope, first),
                    self.expr(ast, scope, inner - first),
                ]
            }
            Some(2) => vec![self.leaf(ast, scope), self.leaf(ast, scope)],
            _ => vec![self.expr(ast, scope, inner)],
        };
        Expr::MathCall { name, args }
    }

    fn fn_name(&self, base: String) -> String {
        match self.config.precision {
            Precision::Fp32 => format!("{base}f"),
            Precision::Fp64 => base,
        }
    }

    fn leaf(&mut self, ast: &ProgramAst, scope: &Scope) -> Expr {
        let mut refs: Vec<String> = ast
            .params
            .iter()
            .filter(|p| p.kind == ParamKind::FpScalar)
            .map(|p| p.name.clone())
            .collect();
        refs.extend(scope.temps.iter().cloned());
        let arrays = ast.array_params();
        let array_ok = !arrays.is_empty() && !scope.induction_vars.is_empty();

        let r: f64 = self.rng.random();
        if r < 0.08 {
            return Expr::CompRef;
        }
        if r < 0.20 && array_ok {
            return Expr::ArrayRef {
                array: self.pick(&arrays).to_string(),
                index_var: self.pick(&scope.induction_vars).clone(),
            };
        }
        if r < 0.55 && !refs.is_empty() {
            return Expr::VarRef(self.pick(&refs).clone());
        }
        Expr::Literal(sample_literal(self.config, &mut self.rng))
    }

    fn pick<'t, T>(&mut self, items: &'t [T]) -> &'t T {
        &items[self.rng.random_range(0..items.len())]
    }

    fn weighted<T: Copy>(&mut self, choices: &[(T, f64)]) -> T {
        let total: f64 = choices.iter().map(|(_, w)| w).sum();
        let mut r = self.rng.random::<f64>() * total;
        for (item, w) in choices {
            r -= w;
            if r <= 0.0 {
                return *item;
            }
        }
        choices.last().expect("non-empty choices").0
    }
}
