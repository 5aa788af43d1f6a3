//! Reference interpreter: strict IEEE evaluation of a program on one input.
//!
//! Statements run in source order; every binary operation is individually
//! rounded to nearest-even with no contraction and no reassociation, exactly
//! the sequence a strict compilation of the emitted text performs. FP32
//! programs compute every intermediate in binary32, FP64 in binary64.
//! Comparisons follow IEEE semantics, so any comparison involving NaN is
//! false. Math calls go through a pluggable backend because library
//! implementations (fmod, ceil, ...) legitimately differ across platforms;
//! the default delegates to the host math library.

use std::collections::HashMap;

use crate::ast::{AccumOp, BinOpKind, CmpOp, Expr, Literal, ParamKind, Precision, ProgramAst, Stmt};
use crate::classify::Outcome;
use crate::error::{Error, Result};
use crate::inputs::{InputScalar, InputVector};

/// Provider of transcendental and rounding math functions.
///
/// Receives catalog base names (no `f` suffix); FP32 evaluation calls the
/// `f32` methods so single-precision library behavior can be modeled.
pub trait MathBackend {
    fn describe(&self) -> &str;
    fn call1_f64(&self, name: &str, x: f64) -> Option<f64>;
    fn call2_f64(&self, name: &str, x: f64, y: f64) -> Option<f64>;
    fn call1_f32(&self, name: &str, x: f32) -> Option<f32>;
    fn call2_f32(&self, name: &str, x: f32, y: f32) -> Option<f32>;
}

/// Default backend: the host math library, via the standard float methods.
pub struct HostMath;

impl MathBackend for HostMath {
    fn describe(&self) -> &str {
        "host-libm"
    }

    fn call1_f64(&self, name: &str, x: f64) -> Option<f64> {
        Some(match name {
            "cos" => x.cos(),
            "sin" => x.sin(),
            "sqrt" => x.sqrt(),
            "ceil" => x.ceil(),
            "floor" => x.floor(),
            "fabs" => x.abs(),
            "cosh" => x.cosh(),
            "exp" => x.exp(),
            "log" => x.ln(),
            "tanh" => x.tanh(),
            "asin" => x.asin(),
            "acos" => x.acos(),
            "atan" => x.atan(),
            _ => return None,
        })
    }

    fn call2_f64(&self, name: &str, x: f64, y: f64) -> Option<f64> {
        Some(match name {
            "fmod" => x % y,
            "pow" => x.powf(y),
            _ => return None,
        })
    }

    fn call1_f32(&self, name: &str, x: f32) -> Option<f32> {
        Some(match name {
            "cos" => x.cos(),
            "sin" => x.sin(),
            "sqrt" => x.sqrt(),
            "ceil" => x.ceil(),
            "floor" => x.floor(),
            "fabs" => x.abs(),
            "cosh" => x.cosh(),
            "exp" => x.exp(),
            "log" => x.ln(),
            "tanh" => x.tanh(),
            "asin" => x.asin(),
            "acos" => x.acos(),
            "atan" => x.atan(),
            _ => return None,
        })
    }

    fn call2_f32(&self, name: &str, x: f32, y: f32) -> Option<f32> {
        Some(match name {
            "fmod" => x % y,
            "pow" => x.powf(y),
            _ => return None,
        })
    }
}

/// Evaluate `ast` on `input` with the host math backend.
///
/// Returns the final `comp` value (FP32 results widened exactly) and its
/// categorized outcome.
pub fn interpret(ast: &ProgramAst, input: &InputVector) -> Result<(f64, Outcome)> {
    interpret_with(ast, input, &HostMath)
}

/// Evaluate with an explicit math backend.
pub fn interpret_with(
    ast: &ProgramAst,
    input: &InputVector,
    math: &dyn MathBackend,
) -> Result<(f64, Outcome)> {
    let comp = match ast.precision {
        Precision::Fp64 => EvalEnv::<f64>::new(ast, input, math)?.run(ast)?,
        Precision::Fp32 => EvalEnv::<f32>::new(ast, input, math)?.run(ast)?.into(),
    };
    Ok((comp, Outcome::of_value(comp, ast.precision)))
}

/// Scalar type evaluated in a given precision. Native Rust float ops are
/// individually rounded IEEE operations, which is exactly the contract.
pub trait FpScalarOps: Copy + PartialOrd + Into<f64> {
    const PRECISION: Precision;
    fn from_exact_f64(v: f64) -> Self;
    fn from_i64(v: i64) -> Self;
    fn literal(lit: &Literal) -> Self;
    fn binop(op: BinOpKind, a: Self, b: Self) -> Self;
    fn math1(math: &dyn MathBackend, name: &str, x: Self) -> Option<Self>;
    fn math2(math: &dyn MathBackend, name: &str, x: Self, y: Self) -> Option<Self>;
}

impl FpScalarOps for f64 {
    const PRECISION: Precision = Precision::Fp64;

    fn from_exact_f64(v: f64) -> Self {
        v
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn literal(lit: &Literal) -> Self {
        lit.value(Precision::Fp64)
    }

    fn binop(op: BinOpKind, a: Self, b: Self) -> Self {
        match op {
            BinOpKind::Add => a + b,
            BinOpKind::Sub => a - b,
            BinOpKind::Mul => a * b,
            BinOpKind::Div => a / b,
        }
    }

    fn math1(math: &dyn MathBackend, name: &str, x: Self) -> Option<Self> {
        math.call1_f64(name, x)
    }

    fn math2(math: &dyn MathBackend, name: &str, x: Self, y: Self) -> Option<Self> {
        math.call2_f64(name, x, y)
    }
}

impl FpScalarOps for f32 {
    const PRECISION: Precision = Precision::Fp32;

    fn from_exact_f64(v: f64) -> Self {
        // Input and literal values in FP32 programs are exact f32s widened.
        v as f32
    }

    fn from_i64(v: i64) -> Self {
        v as f32
    }

    fn literal(lit: &Literal) -> Self {
        lit.value(Precision::Fp32) as f32
    }

    fn binop(op: BinOpKind, a: Self, b: Self) -> Self {
        match op {
            BinOpKind::Add => a + b,
            BinOpKind::Sub => a - b,
            BinOpKind::Mul => a * b,
            BinOpKind::Div => a / b,
        }
    }

    fn math1(math: &dyn MathBackend, name: &str, x: Self) -> Option<Self> {
        math.call1_f32(name, x)
    }

    fn math2(math: &dyn MathBackend, name: &str, x: Self, y: Self) -> Option<Self> {
        math.call2_f32(name, x, y)
    }
}

enum Binding<F> {
    Scalar(F),
    Int(i64),
    Array(Vec<F>),
}

/// One evaluation's state: parameter bindings, block-scoped temps, active
/// loop variables, and the accumulator.
pub struct EvalEnv<'a, F: FpScalarOps> {
    params: HashMap<String, Binding<F>>,
    scopes: Vec<Vec<(String, F)>>,
    loops: Vec<(String, i64)>,
    comp: F,
    math: &'a dyn MathBackend,
}

impl<'a, F: FpScalarOps> EvalEnv<'a, F> {
    fn new(ast: &ProgramAst, input: &InputVector, math: &'a dyn MathBackend) -> Result<Self> {
        if input.values.len() != ast.params.len() {
            return Err(Error::Eval(format!(
                "input has {} values for {} parameters",
                input.values.len(),
                ast.params.len()
            )));
        }
        // Arrays are filled with their input scalar; length covers every
        // reachable index since loop bounds come from the integer inputs.
        let mut max_int: i64 = 0;
        for v in &input.values {
            if let InputScalar::Int(n) = v.value {
                max_int = max_int.max(n);
            }
        }
        let array_len = max_int.max(10) as usize;

        let mut params = HashMap::new();
        let mut comp = None;
        for (param, value) in ast.params.iter().zip(&input.values) {
            let binding = match (param.kind, &value.value) {
                (ParamKind::IntScalar, InputScalar::Int(n)) => Binding::Int(*n),
                (ParamKind::FpArray, InputScalar::Fp(fill)) => {
                    Binding::Array(vec![F::from_exact_f64(*fill); array_len])
                }
                (ParamKind::FpScalar, InputScalar::Fp(x)) => Binding::Scalar(F::from_exact_f64(*x)),
                (ParamKind::CompAccumulator, InputScalar::Fp(x)) => {
                    comp = Some(F::from_exact_f64(*x));
                    continue;
                }
                _ => {
                    return Err(Error::Eval(format!(
                        "input value for {:?} does not match parameter kind {:?}",
                        param.name, param.kind
                    )))
                }
            };
            params.insert(param.name.clone(), binding);
        }
        Ok(EvalEnv {
            params,
            scopes: Vec::new(),
            loops: Vec::new(),
            comp: comp.ok_or_else(|| Error::Eval("no comp input".into()))?,
            math,
        })
    }

    fn run(mut self, ast: &ProgramAst) -> Result<F> {
        self.block(&ast.body)?;
        Ok(self.comp)
    }

    fn block(&mut self, body: &[Stmt]) -> Result<()> {
        self.scopes.push(Vec::new());
        let result = body.iter().try_for_each(|stmt| self.stmt(stmt));
        self.scopes.pop();
        result
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<()> {
        match stmt {
            Stmt::TempDecl { name, init } => {
                let value = self.expr(init)?;
                self.scopes
                    .last_mut()
                    .expect("open scope")
                    .push((name.clone(), value));
            }
            Stmt::Accumulate { op, rhs } => {
                let rhs = self.expr(rhs)?;
                self.comp = match op {
                    AccumOp::AddAssign => F::binop(BinOpKind::Add, self.comp, rhs),
                    AccumOp::SubAssign => F::binop(BinOpKind::Sub, self.comp, rhs),
                    AccumOp::MulAssign => F::binop(BinOpKind::Mul, self.comp, rhs),
                };
            }
            Stmt::ArrayStore { array, index_var, rhs } => {
                let value = self.expr(rhs)?;
                let idx = self.loop_value(index_var)?;
                let slot = match self.params.get_mut(array) {
                    Some(Binding::Array(data)) => data
                        .get_mut(idx as usize)
                        .ok_or_else(|| Error::Eval(format!("index {idx} out of bounds"))),
                    _ => Err(Error::Eval(format!("{array:?} is not an array"))),
                }?;
                *slot = value;
            }
            Stmt::ForLoop {
                bound_param,
                induction_var,
                body,
            } => {
                let bound = match self.params.get(bound_param) {
                    Some(Binding::Int(n)) => *n,
                    _ => {
                        return Err(Error::Eval(format!(
                            "loop bound {bound_param:?} is not an integer parameter"
                        )))
                    }
                };
                for i in 0..bound.max(0) {
                    self.loops.push((induction_var.clone(), i));
                    let result = self.block(body);
                    self.loops.pop();
                    result?;
                }
            }
            Stmt::IfBlock { lhs, cmp, rhs, body } => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                let taken = match cmp {
                    CmpOp::Eq => l == r,
                    CmpOp::Gt => l > r,
                    CmpOp::Lt => l < r,
                    CmpOp::Ge => l >= r,
                    CmpOp::Le => l <= r,
                };
                if taken {
                    self.block(body)?;
                }
            }
        }
        Ok(())
    }

    fn loop_value(&self, name: &str) -> Result<i64> {
        self.loops
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, i)| *i)
            .ok_or_else(|| Error::Eval(format!("no active loop variable {name:?}")))
    }

    fn expr(&mut self, expr: &Expr) -> Result<F> {
        match expr {
            Expr::Literal(lit) => Ok(F::literal(lit)),
            Expr::CompRef => Ok(self.comp),
            Expr::Paren(inner) => self.expr(inner),
            Expr::VarRef(name) => self.lookup(name),
            Expr::ArrayRef { array, index_var } => {
                let idx = self.loop_value(index_var)?;
                match self.params.get(array) {
                    Some(Binding::Array(data)) => data
                        .get(idx as usize)
                        .copied()
                        .ok_or_else(|| Error::Eval(format!("index {idx} out of bounds"))),
                    _ => Err(Error::Eval(format!("{array:?} is not an array"))),
                }
            }
            Expr::BinOp { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                Ok(F::binop(*op, l, r))
            }
            Expr::MathCall { name, args } => {
                let base = match F::PRECISION {
                    Precision::Fp32 => name.strip_suffix('f').unwrap_or(name),
                    Precision::Fp64 => name,
                };
                match args.len() {
                    1 => {
                        let x = self.expr(&args[0])?;
                        F::math1(self.math, base, x)
                    }
                    2 => {
                        let x = self.expr(&args[0])?;
                        let y = self.expr(&args[1])?;
                        F::math2(self.math, base, x, y)
                    }
                    n => return Err(Error::Eval(format!("{name} called with {n} args"))),
                }
                .ok_or_else(|| Error::Eval(format!("math backend lacks {base:?}")))
            }
        }
    }

    fn lookup(&self, name: &str) -> Result<F> {
        for frame in self.scopes.iter().rev() {
            if let Some((_, v)) = frame.iter().rev().find(|(n, _)| n == name) {
                return Ok(*v);
            }
        }
        match self.params.get(name) {
            Some(Binding::Scalar(v)) => return Ok(*v),
            Some(Binding::Int(n)) => return Ok(F::from_i64(*n)),
            Some(Binding::Array(_)) => {
                return Err(Error::Eval(format!("{name:?} used without an index")))
            }
            None => {}
        }
        if let Ok(i) = self.loop_value(name) {
            return Ok(F::from_i64(i));
        }
        Err(Error::Eval(format!("unbound variable {name:?}")))
    }
}
