//! Source emission: render an AST into compilable CUDA, HIP, or portable C.
//!
//! All three dialects share the same kernel body text; they differ only in
//! headers, the kernel qualifier, and the launch/allocation API in `main()`.
//! The kernel prints `comp` as its final statement using `%a`, so program
//! output is a bit-exact hexadecimal float (`inf`/`nan` words for specials).
//!
//! Expression rendering is precedence-aware: the printed text parses back to
//! exactly the tree being printed, so a strict interpreter of the AST and a
//! strict compilation of the text perform the same operation sequence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ast::{ast_signature, BinOpKind, Expr, Param, ParamKind, Precision, ProgramAst, Stmt};

/// Target source dialect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dialect {
    #[serde(rename = "cuda")]
    Cuda,
    #[serde(rename = "hip")]
    Hip,
    #[serde(rename = "c")]
    PortableC,
}

impl Dialect {
    pub fn file_extension(self) -> &'static str {
        match self {
            Dialect::Cuda => ".cu",
            Dialect::Hip => ".hip",
            Dialect::PortableC => ".c",
        }
    }

    pub const ALL: [Dialect; 3] = [Dialect::Cuda, Dialect::Hip, Dialect::PortableC];
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dialect::Cuda => "cuda",
            Dialect::Hip => "hip",
            Dialect::PortableC => "c",
        };
        f.write_str(s)
    }
}

impl FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cuda" | "cu" => Ok(Dialect::Cuda),
            "hip" => Ok(Dialect::Hip),
            "c" | "portablec" | "portable-c" => Ok(Dialect::PortableC),
            other => Err(format!("unknown dialect {other:?} (expected cuda, hip, or c)")),
        }
    }
}

/// Emission knobs.
#[derive(Debug, Clone)]
pub struct EmitOptions {
    /// Base length of materialized arrays; `main()` grows it to cover any
    /// integer argument so loop-indexed stores always stay in bounds.
    pub array_len: u32,
    /// Also print a 17-significant-digit decimal rendering after the hexfloat.
    pub decimal_echo: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            array_len: 10,
            decimal_echo: false,
        }
    }
}

/// One emitted source file, named by the AST signature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceBundle {
    pub test_id: String,
    pub dialect: Dialect,
    pub source_text: String,
    pub precision: Precision,
}

impl SourceBundle {
    /// `<test_id><ext>` file name for this bundle.
    pub fn file_name(&self) -> String {
        format!("{}{}", self.test_id, self.dialect.file_extension())
    }
}

/// Render `ast` in the given dialect with default options.
pub fn emit_source(ast: &ProgramAst, dialect: Dialect) -> SourceBundle {
    emit_source_with(ast, dialect, &EmitOptions::default())
}

/// Render `ast` in the given dialect: kernel, argument-parsing `main()`,
/// array materialization, launch, and synchronize.
pub fn emit_source_with(ast: &ProgramAst, dialect: Dialect, options: &EmitOptions) -> SourceBundle {
    let mut out = String::with_capacity(2048);
    emit_headers(&mut out, dialect);
    emit_kernel(&mut out, ast, dialect, options);
    out.push('\n');
    emit_main(&mut out, ast, dialect, options);
    SourceBundle {
        test_id: ast_signature(ast),
        dialect,
        source_text: out,
        precision: ast.precision,
    }
}

fn emit_headers(out: &mut String, dialect: Dialect) {
    out.push_str("#include <stdio.h>\n#include <stdlib.h>\n");
    match dialect {
        Dialect::Cuda => out.push_str("#include <cuda_runtime.h>\n"),
        Dialect::Hip => out.push_str("#include <hip/hip_runtime.h>\n"),
        Dialect::PortableC => out.push_str("#include <math.h>\n"),
    }
    out.push('\n');
}

fn emit_kernel(out: &mut String, ast: &ProgramAst, dialect: Dialect, options: &EmitOptions) {
    let fp = ast.precision.c_type();
    if matches!(dialect, Dialect::Cuda | Dialect::Hip) {
        out.push_str("__global__\n");
    }
    let params: Vec<String> = ast
        .params
        .iter()
        .map(|p| match p.kind {
            ParamKind::CompAccumulator | ParamKind::FpScalar => format!("{fp} {}", p.name),
            ParamKind::IntScalar => format!("int {}", p.name),
            ParamKind::FpArray => format!("{fp}* {}", p.name),
        })
        .collect();
    out.push_str(&format!("void {}({}) {{\n", ast.kernel_name, params.join(", ")));
    for stmt in &ast.body {
        emit_stmt(out, stmt, ast.precision, 1);
    }
    if options.decimal_echo {
        out.push_str("  printf(\"%a %.17g\\n\", comp, comp);\n");
    } else {
        out.push_str("  printf(\"%a\\n\", comp);\n");
    }
    out.push_str("}\n");
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn emit_stmt(out: &mut String, stmt: &Stmt, precision: Precision, level: usize) {
    indent(out, level);
    match stmt {
        Stmt::TempDecl { name, init } => {
            out.push_str(&format!(
                "{} {name} = {};\n",
                precision.c_type(),
                render_expr(init, precision)
            ));
        }
        Stmt::Accumulate { op, rhs } => {
            out.push_str(&format!("comp {} {};\n", op.symbol(), render_expr(rhs, precision)));
        }
        Stmt::ArrayStore { array, index_var, rhs } => {
            out.push_str(&format!("{array}[{index_var}] = {};\n", render_expr(rhs, precision)));
        }
        Stmt::ForLoop {
            bound_param,
            induction_var: iv,
            body,
        } => {
            out.push_str(&format!("for (int {iv} = 0; {iv} < {bound_param}; ++{iv}) {{\n"));
            for inner in body {
                emit_stmt(out, inner, precision, level + 1);
            }
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::IfBlock { lhs, cmp, rhs, body } => {
            out.push_str(&format!(
                "if ({} {} {}) {{\n",
                render_expr(lhs, precision),
                cmp.symbol(),
                render_expr(rhs, precision)
            ));
            for inner in body {
                emit_stmt(out, inner, precision, level + 1);
            }
            indent(out, level);
            out.push_str("}\n");
        }
    }
}

fn prec_of(expr: &Expr) -> u8 {
    match expr {
        Expr::BinOp { op, .. } => match op {
            BinOpKind::Add | BinOpKind::Sub => 1,
            BinOpKind::Mul | BinOpKind::Div => 2,
        },
        _ => 3,
    }
}

/// Render an expression. Signed literals bind as primaries (`a * -1.5E2`
/// parses as `a * (-1.5E2)`), and children are parenthesized exactly where C
/// precedence or left-associativity would otherwise reshape the tree.
pub fn render_expr(expr: &Expr, precision: Precision) -> String {
    let mut s = String::new();
    write_expr(&mut s, expr, precision);
    s
}

fn write_expr(out: &mut String, expr: &Expr, precision: Precision) {
    match expr {
        Expr::Literal(lit) => out.push_str(&lit.render(precision)),
        Expr::VarRef(name) => out.push_str(name),
        Expr::ArrayRef { array, index_var } => out.push_str(&format!("{array}[{index_var}]")),
        Expr::CompRef => out.push_str("comp"),
        Expr::Paren(inner) => {
            out.push('(');
            write_expr(out, inner, precision);
            out.push(')');
        }
        Expr::MathCall { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, arg, precision);
            }
            out.push(')');
        }
        Expr::BinOp { op, lhs, rhs } => {
            let my_prec = prec_of(expr);
            write_child(out, lhs, precision, prec_of(lhs) < my_prec);
            out.push_str(&format!(" {} ", op.symbol()));
            write_child(out, rhs, precision, prec_of(rhs) <= my_prec);
        }
    }
}

fn write_child(out: &mut String, child: &Expr, precision: Precision, needs_group: bool) {
    if needs_group && !matches!(child, Expr::Paren(_)) {
        out.push('(');
        write_expr(out, child, precision);
        out.push(')');
    } else {
        write_expr(out, child, precision);
    }
}

fn emit_main(out: &mut String, ast: &ProgramAst, dialect: Dialect, options: &EmitOptions) {
    let fp = ast.precision.c_type();
    let parse_fp = match ast.precision {
        Precision::Fp64 => |arg: usize| format!("atof(argv[{arg}])"),
        Precision::Fp32 => |arg: usize| format!("strtof(argv[{arg}], 0)"),
    };
    let n_params = ast.params.len();
    out.push_str("int main(int argc, char** argv) {\n");
    out.push_str(&format!(
        "  if (argc != {}) {{\n    fprintf(stderr, \"expected {} input values\\n\");\n    return 2;\n  }}\n",
        n_params + 1,
        n_params
    ));

    // Parse every argument in parameter order; arrays receive a fill scalar.
    let arrays: Vec<&Param> = ast
        .params
        .iter()
        .filter(|p| p.kind == ParamKind::FpArray)
        .collect();
    for (idx, param) in ast.params.iter().enumerate() {
        let arg = idx + 1;
        let name = &param.name;
        match param.kind {
            ParamKind::CompAccumulator | ParamKind::FpScalar => {
                out.push_str(&format!("  {fp} {name} = {};\n", parse_fp(arg)));
            }
            ParamKind::IntScalar => {
                out.push_str(&format!("  int {name} = atoi(argv[{arg}]);\n"));
            }
            ParamKind::FpArray => {
                out.push_str(&format!("  {fp} fill_{name} = {};\n", parse_fp(arg)));
            }
        }
    }

    if !arrays.is_empty() {
        out.push_str(&format!("  int arr_len = {};\n", options.array_len));
        for p in ast.int_params() {
            out.push_str(&format!("  if ({p} > arr_len) arr_len = {p};\n"));
        }
        for p in &arrays {
            let name = &p.name;
            match dialect {
                Dialect::PortableC => {
                    out.push_str(&format!(
                        "  {fp}* {name} = ({fp}*)malloc(sizeof({fp}) * arr_len);\n"
                    ));
                    out.push_str(&format!(
                        "  for (int n = 0; n < arr_len; ++n) {name}[n] = fill_{name};\n"
                    ));
                }
                Dialect::Cuda | Dialect::Hip => {
                    let api = if dialect == Dialect::Cuda { "cuda" } else { "hip" };
                    out.push_str(&format!(
                        "  {fp}* host_{name} = ({fp}*)malloc(sizeof({fp}) * arr_len);\n"
                    ));
                    out.push_str(&format!(
                        "  for (int n = 0; n < arr_len; ++n) host_{name}[n] = fill_{name};\n"
                    ));
                    out.push_str(&format!("  {fp}* {name};\n"));
                    out.push_str(&format!(
                        "  {api}Malloc((void**)&{name}, sizeof({fp}) * arr_len);\n"
                    ));
                    out.push_str(&format!(
                        "  {api}Memcpy({name}, host_{name}, sizeof({fp}) * arr_len, {api}MemcpyHostToDevice);\n"
                    ));
                }
            }
        }
    }

    let args: Vec<&str> = ast.params.iter().map(|p| p.name.as_str()).collect();
    let args = args.join(", ");
    match dialect {
        Dialect::PortableC => {
            out.push_str(&format!("  {}({args});\n", ast.kernel_name));
        }
        Dialect::Cuda => {
            out.push_str(&format!(
                "  {}<<<dim3(1), dim3(1)>>>({args});\n",
                ast.kernel_name
            ));
            out.push_str("  cudaDeviceSynchronize();\n");
        }
        Dialect::Hip => {
            out.push_str(&format!(
                "  hipLaunchKernelGGL({}, dim3(1), dim3(1), 0, 0, {args});\n",
                ast.kernel_name
            ));
            out.push_str("  hipDeviceSynchronize();\n");
        }
    }

    for p in &arrays {
        let name = &p.name;
        match dialect {
            Dialect::PortableC => out.push_str(&format!("  free({name});\n")),
            Dialect::Cuda => {
                out.push_str(&format!("  cudaFree({name});\n  free(host_{name});\n"));
            }
            Dialect::Hip => {
                out.push_str(&format!("  hipFree({name});\n  free(host_{name});\n"));
            }
        }
    }
    out.push_str("  return 0;\n}\n");
}

/// Slice out the `compute` kernel (signature through its closing brace).
pub fn kernel_slice(source: &str) -> Option<&str> {
    let start = source.find("void compute(")?;
    let body = &source[start..];
    let open = body.find('{')?;
    let mut depth = 0usize;
    for (i, c) in body[open..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&body[..open + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Multiset of arithmetic-bearing tokens inside the kernel: numeric literals,
/// the four operators, and math call names with any `f` suffix stripped.
/// Dialect emissions of one AST must agree on this multiset exactly.
pub fn kernel_arithmetic_tokens(source: &str) -> Vec<String> {
    let kernel = match kernel_slice(source) {
        Some(k) => k,
        None => return Vec::new(),
    };
    let mut tokens: Vec<String> = crate::hipify::tokenize(kernel)
        .into_iter()
        .filter_map(|t| {
            let first = t.chars().next()?;
            if first.is_ascii_digit() {
                Some(t.trim_end_matches(['F', 'f']).to_string())
            } else if matches!(t.as_str(), "+" | "-" | "*" | "/") {
                Some(t)
            } else if crate::ast::is_catalog_fn(t.trim_end_matches('f')) {
                Some(t.trim_end_matches('f').to_string())
            } else {
                None
            }
        })
        .collect();
    tokens.sort();
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{AccumOp, CmpOp, Literal, Sign};

    fn sample_ast() -> ProgramAst {
        // A representative kernel: a guard on comp, a temp, two
        // accumulations, and a loop accumulating a square root.
        let lit = |m: [u8; 5], e: i32, s: Sign| Expr::Literal(Literal::new(s, m, e));
        ProgramAst {
            kernel_name: "compute".into(),
            params: vec![
                Param { name: "comp".into(), kind: ParamKind::CompAccumulator },
                Param { name: "var_1".into(), kind: ParamKind::IntScalar },
                Param { name: "var_2".into(), kind: ParamKind::FpScalar },
                Param { name: "var_3".into(), kind: ParamKind::FpScalar },
                Param { name: "var_4".into(), kind: ParamKind::FpArray },
            ],
            body: vec![Stmt::IfBlock {
                lhs: Expr::CompRef,
                cmp: CmpOp::Eq,
                rhs: Expr::BinOp {
                    op: BinOpKind::Add,
                    lhs: Box::new(lit([1, 3, 8, 5, 7], -36, Sign::Neg)),
                    rhs: Box::new(Expr::VarRef("var_2".into())),
                },
                body: vec![
                    Stmt::TempDecl {
                        name: "tmp_1".into(),
                        init: Expr::BinOp {
                            op: BinOpKind::Div,
                            lhs: Box::new(lit([1, 3, 3, 0, 5], 12, Sign::Pos)),
                            rhs: Box::new(Expr::VarRef("var_3".into())),
                        },
                    },
                    Stmt::Accumulate {
                        op: AccumOp::AddAssign,
                        rhs: Expr::BinOp {
                            op: BinOpKind::Mul,
                            lhs: Box::new(lit([1, 7, 7, 4, 4], -2, Sign::Neg)),
                            rhs: Box::new(Expr::VarRef("tmp_1".into())),
                        },
                    },
                    Stmt::ForLoop {
                        bound_param: "var_1".into(),
                        induction_var: "i".into(),
                        body: vec![
                            Stmt::ArrayStore {
                                array: "var_4".into(),
                                index_var: "i".into(),
                                rhs: Expr::VarRef("var_2".into()),
                            },
                            Stmt::Accumulate {
                                op: AccumOp::SubAssign,
                                rhs: Expr::MathCall {
                                    name: "sqrt".into(),
                                    args: vec![Expr::BinOp {
                                        op: BinOpKind::Add,
                                        lhs: Box::new(Expr::ArrayRef {
                                            array: "var_4".into(),
                                            index_var: "i".into(),
                                        }),
                                        rhs: Box::new(lit([1, 7, 9, 7, 6], 3, Sign::Neg)),
                                    }],
                                },
                            },
                        ],
                    },
                ],
            }],
            precision: Precision::Fp64,
        }
    }

    #[test]
    fn cuda_has_qualifier_and_chevron_launch() {
        let bundle = emit_source(&sample_ast(), Dialect::Cuda);
        assert!(bundle.source_text.contains("__global__"));
        assert!(bundle.source_text.contains("compute<<<dim3(1), dim3(1)>>>("));
        assert!(bundle.source_text.contains("cudaDeviceSynchronize();"));
        assert!(bundle.source_text.contains("if (comp == -1.3857E-36 + var_2) {"));
    }

    #[test]
    fn hip_uses_launch_call_with_identical_kernel_body() {
        let ast = sample_ast();
        let cuda = emit_source(&ast, Dialect::Cuda);
        let hip = emit_source(&ast, Dialect::Hip);
        assert!(hip.source_text.contains("hipLaunchKernelGGL(compute, dim3(1), dim3(1), 0, 0,"));
        assert_eq!(
            kernel_slice(&cuda.source_text).unwrap(),
            kernel_slice(&hip.source_text).unwrap()
        );
    }

    #[test]
    fn portable_c_calls_kernel_directly() {
        let bundle = emit_source(&sample_ast(), Dialect::PortableC);
        assert!(!bundle.source_text.contains("__global__"));
        assert!(bundle.source_text.contains("  compute(comp, var_1, var_2, var_3, var_4);"));
        assert!(bundle.source_text.contains("printf(\"%a\\n\", comp);"));
    }

    #[test]
    fn exactly_one_kernel_named_compute() {
        for dialect in Dialect::ALL {
            let bundle = emit_source(&sample_ast(), dialect);
            assert_eq!(bundle.source_text.matches("void compute(").count(), 1);
        }
    }

    #[test]
    fn rendering_preserves_tree_shape_with_minimal_parens() {
        let p = Precision::Fp64;
        let a = Expr::VarRef("a".into());
        let b = Expr::VarRef("b".into());
        let c = Expr::VarRef("c".into());
        // (a - b) - c keeps the flat left-associative form.
        let left = Expr::BinOp {
            op: BinOpKind::Sub,
            lhs: Box::new(Expr::BinOp {
                op: BinOpKind::Sub,
                lhs: Box::new(a.clone()),
                rhs: Box::new(b.clone()),
            }),
            rhs: Box::new(c.clone()),
        };
        assert_eq!(render_expr(&left, p), "a - b - c");
        // a - (b - c) needs the grouping to survive.
        let right = Expr::BinOp {
            op: BinOpKind::Sub,
            lhs: Box::new(a.clone()),
            rhs: Box::new(Expr::BinOp {
                op: BinOpKind::Sub,
                lhs: Box::new(b.clone()),
                rhs: Box::new(c.clone()),
            }),
        };
        assert_eq!(render_expr(&right, p), "a - (b - c)");
        // Same for non-associative float addition.
        let add_right = Expr::BinOp {
            op: BinOpKind::Add,
            lhs: Box::new(a.clone()),
            rhs: Box::new(Expr::BinOp {
                op: BinOpKind::Add,
                lhs: Box::new(b.clone()),
                rhs: Box::new(c.clone()),
            }),
        };
        assert_eq!(render_expr(&add_right, p), "a + (b + c)");
        // Lower-precedence child on the left gets wrapped too.
        let mul_of_add = Expr::BinOp {
            op: BinOpKind::Mul,
            lhs: Box::new(Expr::BinOp {
                op: BinOpKind::Add,
                lhs: Box::new(a.clone()),
                rhs: Box::new(b.clone()),
            }),
            rhs: Box::new(c.clone()),
        };
        assert_eq!(render_expr(&mul_of_add, p), "(a + b) * c");
        // An explicit Paren node already groups; no doubling.
        let explicit = Expr::BinOp {
            op: BinOpKind::Mul,
            lhs: Box::new(Expr::Paren(Box::new(Expr::BinOp {
                op: BinOpKind::Add,
                lhs: Box::new(a),
                rhs: Box::new(b),
            }))),
            rhs: Box::new(c),
        };
        assert_eq!(render_expr(&explicit, p), "(a + b) * c");
    }

    #[test]
    fn fp32_source_has_suffixed_literals_and_calls() {
        let mut ast = sample_ast();
        ast.precision = Precision::Fp32;
        // Suffix the math call the way FP32 generation would.
        fn suffix(stmts: &mut [Stmt]) {
            for s in stmts {
                match s {
                    Stmt::ForLoop { body, .. } | Stmt::IfBlock { body, .. } => suffix(body),
                    Stmt::Accumulate { rhs: Expr::MathCall { name, .. }, .. } => {
                        name.push('f');
                    }
                    _ => {}
                }
            }
        }
        suffix(&mut ast.body);
        let bundle = emit_source(&ast, Dialect::PortableC);
        assert!(bundle.source_text.contains("float"));
        assert!(bundle.source_text.contains("-1.7744E-2F"));
        assert!(bundle.source_text.contains("sqrtf("));
        assert!(bundle.source_text.contains("strtof(argv[1], 0)"));
    }

    #[test]
    fn fp32_emission_scan_finds_no_unsuffixed_tokens() {
        use crate::gen::{generate_program, GenConfig};
        for seed in 0..30u64 {
            let mut config = GenConfig::new(Precision::Fp32, 31_000 + seed);
            config.math_call_prob = 0.5;
            let ast = generate_program(&config).unwrap();
            let bundle = emit_source(&ast, Dialect::PortableC);
            let kernel = kernel_slice(&bundle.source_text).unwrap();
            for token in crate::hipify::tokenize(kernel) {
                let t = token.as_str();
                let is_fp_literal = t.chars().next().is_some_and(|c| c.is_ascii_digit())
                    && (t.contains('.') || t.contains('E'));
                if is_fp_literal {
                    assert!(t.ends_with('F'), "unsuffixed FP literal {t:?} in FP32 kernel");
                }
                assert!(
                    !crate::ast::is_catalog_fn(t),
                    "unsuffixed math call {t:?} in FP32 kernel"
                );
            }
        }
    }

    #[test]
    fn arithmetic_tokens_agree_across_dialects() {
        let ast = sample_ast();
        let c = kernel_arithmetic_tokens(&emit_source(&ast, Dialect::PortableC).source_text);
        let cu = kernel_arithmetic_tokens(&emit_source(&ast, Dialect::Cuda).source_text);
        let hip = kernel_arithmetic_tokens(&emit_source(&ast, Dialect::Hip).source_text);
        assert!(!c.is_empty());
        assert_eq!(c, cu);
        assert_eq!(c, hip);
    }
}
