//! Kernel program AST: parameters, statements, expressions, and literals.
//!
//! Every generated test is a single kernel function named `compute` whose
//! first parameter is the `comp` accumulator. The kernel body is built from
//! temp declarations, accumulations into `comp`, array stores, bounded `for`
//! loops, and `if` guards. The emitted kernel always ends by printing `comp`;
//! that epilogue is a fixed part of emission, not a statement variant.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Floating-point width of a whole program: every variable, literal, and
/// math call in the program uses this one precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    Fp32,
    Fp64,
}

impl Precision {
    /// Smallest positive normal value of the format, as an `f64`.
    pub fn min_normal(self) -> f64 {
        match self {
            Precision::Fp32 => f64::from(f32::MIN_POSITIVE),
            Precision::Fp64 => f64::MIN_POSITIVE,
        }
    }

    /// C scalar type spelling.
    pub fn c_type(self) -> &'static str {
        match self {
            Precision::Fp32 => "float",
            Precision::Fp64 => "double",
        }
    }
}

/// One-argument math functions the generator may draw from.
pub const MATH_FNS_1ARG: &[&str] = &[
    "cos", "sin", "sqrt", "ceil", "floor", "fabs", "cosh", "exp", "log", "tanh", "asin", "acos",
    "atan",
];

/// Two-argument math functions the generator may draw from.
pub const MATH_FNS_2ARG: &[&str] = &["fmod", "pow"];

/// True if `name` is in the supported catalog (base name, no `f` suffix).
pub fn is_catalog_fn(name: &str) -> bool {
    MATH_FNS_1ARG.contains(&name) || MATH_FNS_2ARG.contains(&name)
}

/// Arity of a catalog function, or `None` if unknown.
pub fn catalog_arity(name: &str) -> Option<usize> {
    if MATH_FNS_1ARG.contains(&name) {
        Some(1)
    } else if MATH_FNS_2ARG.contains(&name) {
        Some(2)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Pos,
    Neg,
}

/// A decimal literal of the form `±d.ddddE±n`: one integer digit, exactly
/// four fractional digits, and a signed decimal exponent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub sign: Sign,
    /// Five decimal digits: the integer digit followed by four fractional ones.
    pub mantissa: [u8; 5],
    pub exponent: i32,
}

impl Literal {
    pub fn new(sign: Sign, mantissa: [u8; 5], exponent: i32) -> Self {
        Literal {
            sign,
            mantissa,
            exponent,
        }
    }

    /// Rendered source form, e.g. `+1.3305E12` or `-1.7744E-2`; FP32 appends `F`.
    pub fn render(&self, precision: Precision) -> String {
        let sign = match self.sign {
            Sign::Pos => '+',
            Sign::Neg => '-',
        };
        let m = self.mantissa;
        let suffix = match precision {
            Precision::Fp32 => "F",
            Precision::Fp64 => "",
        };
        format!(
            "{sign}{}.{}{}{}{}E{}{suffix}",
            m[0], m[1], m[2], m[3], m[4], self.exponent
        )
    }

    /// Numeric value: the correctly rounded binary value of the rendered
    /// decimal, in the program's precision (FP32 values widened to `f64`).
    pub fn value(&self, precision: Precision) -> f64 {
        let text = self.render(Precision::Fp64);
        match precision {
            Precision::Fp64 => text.parse::<f64>().expect("literal renders as valid float"),
            Precision::Fp32 => f64::from(text.parse::<f32>().expect("literal renders as valid float")),
        }
    }
}

/// Role of one kernel parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    /// The `comp` result accumulator; always the first parameter.
    CompAccumulator,
    /// Integer scalar; the only legal source of loop bounds.
    IntScalar,
    FpScalar,
    /// Pointer parameter; the host fills every element with one input scalar.
    FpArray,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccumOp {
    AddAssign,
    SubAssign,
    MulAssign,
}

impl AccumOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AccumOp::AddAssign => "+=",
            AccumOp::SubAssign => "-=",
            AccumOp::MulAssign => "*=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOpKind {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOpKind {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOpKind::Add => "+",
            BinOpKind::Sub => "-",
            BinOpKind::Mul => "*",
            BinOpKind::Div => "/",
        }
    }

    pub const ALL: [BinOpKind; 4] = [BinOpKind::Add, BinOpKind::Sub, BinOpKind::Mul, BinOpKind::Div];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Gt,
    Lt,
    Ge,
    Le,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
        }
    }

    pub const ALL: [CmpOp; 5] = [CmpOp::Eq, CmpOp::Gt, CmpOp::Lt, CmpOp::Ge, CmpOp::Le];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Literal(Literal),
    /// Reference to an FP parameter, an in-scope temp, or a loop induction
    /// variable (the latter converts exactly to the FP type).
    VarRef(String),
    ArrayRef {
        array: String,
        index_var: String,
    },
    BinOp {
        op: BinOpKind,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// Explicit grouping; semantically transparent.
    Paren(Box<Expr>),
    MathCall {
        /// Catalog name; carries the `f` suffix in FP32 programs (`cosf`).
        name: String,
        args: Vec<Expr>,
    },
    /// The `comp` accumulator read as a value.
    CompRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    TempDecl {
        name: String,
        init: Expr,
    },
    /// `comp op= rhs;`
    Accumulate {
        op: AccumOp,
        rhs: Expr,
    },
    /// `array[index_var] = rhs;`
    ArrayStore {
        array: String,
        index_var: String,
        rhs: Expr,
    },
    /// `for (int iv = 0; iv < bound_param; ++iv) { body }`
    ForLoop {
        bound_param: String,
        induction_var: String,
        body: Vec<Stmt>,
    },
    /// `if (lhs cmp rhs) { body }`
    IfBlock {
        lhs: Expr,
        cmp: CmpOp,
        rhs: Expr,
        body: Vec<Stmt>,
    },
}

/// A complete randomly generated kernel program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramAst {
    /// Always `"compute"`.
    pub kernel_name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub precision: Precision,
}

impl ProgramAst {
    /// Names of the array parameters, in declaration order.
    pub fn array_params(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|p| p.kind == ParamKind::FpArray)
            .map(|p| p.name.as_str())
            .collect()
    }

    pub fn int_params(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|p| p.kind == ParamKind::IntScalar)
            .map(|p| p.name.as_str())
            .collect()
    }
}

/// Stable content hash of an AST, used as the cross-platform test identifier.
///
/// Hashes the canonical JSON form, so structurally identical ASTs hash alike
/// on every platform and run.
pub fn ast_signature(ast: &ProgramAst) -> String {
    let canonical = serde_json::to_vec(ast).expect("AST serializes");
    let digest = Sha256::digest(&canonical);
    let mut id = String::with_capacity(17);
    id.push('t');
    for byte in &digest[..8] {
        id.push_str(&format!("{byte:02x}"));
    }
    id
}

/// Structural validation independent of the generator.
///
/// Walks the tree re-checking every AST invariant from scratch: parameter
/// layout, name resolution under C block scoping, loop-bound and index-var
/// discipline, temp uniqueness, nesting depth, and FP32 suffix/literal rules.
/// Returns all violations found.
pub fn validate_ast(ast: &ProgramAst, max_loop_nesting: Option<u32>) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();

    if ast.kernel_name != "compute" {
        errors.push(format!("kernel name {:?} is not \"compute\"", ast.kernel_name));
    }
    match ast.params.first() {
        Some(p) if p.kind == ParamKind::CompAccumulator => {}
        _ => errors.push("first parameter is not the comp accumulator".into()),
    }
    if ast.params.iter().skip(1).any(|p| p.kind == ParamKind::CompAccumulator) {
        errors.push("comp accumulator appears after position 0".into());
    }
    let mut seen = std::collections::HashSet::new();
    for p in &ast.params {
        if !seen.insert(p.name.as_str()) {
            errors.push(format!("duplicate parameter name {:?}", p.name));
        }
    }

    let mut ctx = ValidateCtx {
        ast,
        errors,
        temps_seen: std::collections::HashSet::new(),
        scopes: vec![Vec::new()],
        loop_stack: Vec::new(),
        max_depth_seen: 0,
    };
    ctx.check_block(&ast.body);

    if let Some(limit) = max_loop_nesting {
        if ctx.max_depth_seen > limit {
            ctx.errors.push(format!(
                "loop nesting {} exceeds limit {}",
                ctx.max_depth_seen, limit
            ));
        }
    }

    if ctx.errors.is_empty() {
        Ok(())
    } else {
        Err(ctx.errors)
    }
}

struct ValidateCtx<'a> {
    ast: &'a ProgramAst,
    errors: Vec<String>,
    temps_seen: std::collections::HashSet<String>,
    /// In-scope temp names, one frame per open block.
    scopes: Vec<Vec<String>>,
    loop_stack: Vec<String>,
    max_depth_seen: u32,
}

impl ValidateCtx<'_> {
    fn param(&self, name: &str) -> Option<&Param> {
        self.ast.params.iter().find(|p| p.name == name)
    }

    fn temp_in_scope(&self, name: &str) -> bool {
        self.scopes.iter().any(|frame| frame.iter().any(|t| t == name))
    }

    fn check_block(&mut self, body: &[Stmt]) {
        self.scopes.push(Vec::new());
        for stmt in body {
            self.check_stmt(stmt);
        }
        self.scopes.pop();
    }

    fn check_stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::TempDecl { name, init } => {
                self.check_expr(init);
                if !self.temps_seen.insert(name.clone()) {
                    self.errors.push(format!("temp name {name:?} declared twice"));
                }
                self.scopes.last_mut().expect("open scope").push(name.clone());
            }
            Stmt::Accumulate { rhs, .. } => self.check_expr(rhs),
            Stmt::ArrayStore { array, index_var, rhs } => {
                self.check_array_access(array, index_var);
                self.check_expr(rhs);
            }
            Stmt::ForLoop {
                bound_param,
                induction_var,
                body,
            } => {
                match self.param(bound_param) {
                    Some(p) if p.kind == ParamKind::IntScalar => {}
                    _ => self.errors.push(format!(
                        "loop bound {bound_param:?} is not an IntScalar parameter"
                    )),
                }
                self.loop_stack.push(induction_var.clone());
                self.max_depth_seen = self.max_depth_seen.max(self.loop_stack.len() as u32);
                self.check_block(body);
                self.loop_stack.pop();
            }
            Stmt::IfBlock { lhs, rhs, body, .. } => {
                self.check_expr(lhs);
                self.check_expr(rhs);
                self.check_block(body);
            }
        }
    }

    fn check_array_access(&mut self, array: &str, index_var: &str) {
        match self.param(array) {
            Some(p) if p.kind == ParamKind::FpArray => {}
            _ => self.errors.push(format!("{array:?} is not an FpArray parameter")),
        }
        if !self.loop_stack.iter().any(|iv| iv == index_var) {
            self.errors.push(format!(
                "index {index_var:?} is not an enclosing loop induction variable"
            ));
        }
    }

    fn check_expr(&mut self, expr: &Expr) {
        match expr {
            Expr::Literal(lit) => {
                if !(1..=9).contains(&lit.mantissa[0])
                    || lit.mantissa[1..].iter().any(|d| *d > 9)
                {
                    self.errors.push(format!("malformed literal mantissa {:?}", lit.mantissa));
                }
            }
            Expr::VarRef(name) => {
                let ok = match self.param(name) {
                    Some(p) => matches!(p.kind, ParamKind::FpScalar | ParamKind::IntScalar),
                    None => {
                        self.temp_in_scope(name) || self.loop_stack.iter().any(|iv| iv == name)
                    }
                };
                if !ok {
                    self.errors.push(format!("unresolved variable reference {name:?}"));
                }
            }
            Expr::ArrayRef { array, index_var } => self.check_array_access(array, index_var),
            Expr::BinOp { lhs, rhs, .. } => {
                self.check_expr(lhs);
                self.check_expr(rhs);
            }
            Expr::Paren(inner) => self.check_expr(inner),
            Expr::MathCall { name, args } => {
                let base = match self.ast.precision {
                    Precision::Fp32 => match name.strip_suffix('f') {
                        Some(b) => b,
                        None => {
                            self.errors
                                .push(format!("FP32 math call {name:?} lacks the f suffix"));
                            name.as_str()
                        }
                    },
                    Precision::Fp64 => name.as_str(),
                };
                match catalog_arity(base) {
                    Some(n) if n == args.len() => {}
                    Some(n) => self.errors.push(format!(
                        "math call {name:?} has {} args, expected {n}",
                        args.len()
                    )),
                    None => self
                        .errors
                        .push(format!("math call {name:?} is not in the catalog")),
                }
                for arg in args {
                    self.check_expr(arg);
                }
            }
            Expr::CompRef => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(d: [u8; 5], e: i32) -> Literal {
        Literal::new(Sign::Pos, d, e)
    }

    #[test]
    fn literal_renders_in_both_precisions() {
        let l = Literal::new(Sign::Pos, [1, 3, 3, 0, 5], 12);
        assert_eq!(l.render(Precision::Fp64), "+1.3305E12");
        assert_eq!(l.render(Precision::Fp32), "+1.3305E12F");
        let n = Literal::new(Sign::Neg, [1, 7, 7, 4, 4], -2);
        assert_eq!(n.render(Precision::Fp64), "-1.7744E-2");
    }

    #[test]
    fn literal_value_is_correctly_rounded_per_precision() {
        let l = lit([1, 2, 3, 4, 5], 0);
        assert_eq!(l.value(Precision::Fp64), 1.2345f64);
        assert_eq!(l.value(Precision::Fp32), f64::from(1.2345f32));
        // FP32 parse differs from narrowing the FP64 parse in general; the
        // widened f32 must be what strtof would produce.
        let tiny = lit([1, 7, 6, 1, 2], -38);
        assert_eq!(tiny.value(Precision::Fp32), f64::from(1.7612e-38f32));
    }

    #[test]
    fn signature_is_stable_and_content_sensitive() {
        let ast = ProgramAst {
            kernel_name: "compute".into(),
            params: vec![Param {
                name: "comp".into(),
                kind: ParamKind::CompAccumulator,
            }],
            body: vec![Stmt::Accumulate {
                op: AccumOp::AddAssign,
                rhs: Expr::Literal(lit([1, 0, 0, 0, 0], 0)),
            }],
            precision: Precision::Fp64,
        };
        assert_eq!(ast_signature(&ast), ast_signature(&ast.clone()));

        let mut other = ast.clone();
        if let Stmt::Accumulate { rhs: Expr::Literal(l), .. } = &mut other.body[0] {
            l.mantissa[4] = 1;
        }
        assert_ne!(ast_signature(&ast), ast_signature(&other));
        assert!(ast_signature(&ast).starts_with('t'));
    }

    #[test]
    fn validator_rejects_out_of_scope_temp() {
        let ast = ProgramAst {
            kernel_name: "compute".into(),
            params: vec![
                Param {
                    name: "comp".into(),
                    kind: ParamKind::CompAccumulator,
                },
                Param {
                    name: "var_1".into(),
                    kind: ParamKind::IntScalar,
                },
            ],
            body: vec![
                Stmt::ForLoop {
                    bound_param: "var_1".into(),
                    induction_var: "i".into(),
                    body: vec![Stmt::TempDecl {
                        name: "tmp_1".into(),
                        init: Expr::CompRef,
                    }],
                },
                // tmp_1 went out of scope with the loop body.
                Stmt::Accumulate {
                    op: AccumOp::AddAssign,
                    rhs: Expr::VarRef("tmp_1".into()),
                },
            ],
            precision: Precision::Fp64,
        };
        let errs = validate_ast(&ast, None).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("tmp_1")));
    }

    #[test]
    fn validator_enforces_loop_and_index_rules() {
        let ast = ProgramAst {
            kernel_name: "compute".into(),
            params: vec![
                Param {
                    name: "comp".into(),
                    kind: ParamKind::CompAccumulator,
                },
                Param {
                    name: "var_1".into(),
                    kind: ParamKind::FpScalar,
                },
                Param {
                    name: "var_2".into(),
                    kind: ParamKind::FpArray,
                },
            ],
            body: vec![
                Stmt::ForLoop {
                    bound_param: "var_1".into(), // not an IntScalar
                    induction_var: "i".into(),
                    body: vec![Stmt::Accumulate {
                        op: AccumOp::AddAssign,
                        rhs: Expr::CompRef,
                    }],
                },
                Stmt::ArrayStore {
                    array: "var_2".into(),
                    index_var: "i".into(), // no enclosing loop here
                    rhs: Expr::CompRef,
                },
            ],
            precision: Precision::Fp64,
        };
        let errs = validate_ast(&ast, None).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("not an IntScalar")));
        assert!(errs.iter().any(|e| e.contains("not an enclosing loop")));
    }

    #[test]
    fn validator_checks_fp32_suffix_discipline() {
        let ast = ProgramAst {
            kernel_name: "compute".into(),
            params: vec![Param {
                name: "comp".into(),
                kind: ParamKind::CompAccumulator,
            }],
            body: vec![Stmt::Accumulate {
                op: AccumOp::AddAssign,
                rhs: Expr::MathCall {
                    name: "cos".into(), // missing f suffix in FP32
                    args: vec![Expr::CompRef],
                },
            }],
            precision: Precision::Fp32,
        };
        let errs = validate_ast(&ast, None).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("f suffix")));
    }
}
