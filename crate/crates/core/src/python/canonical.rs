//! Canonical re-rendering of parsed modules. The output has a fixed layout:
//! four-space indentation, one statement per line, no comments, no blank
//! lines, docstrings removed, composite expressions parenthesized. Two
//! sources that parse to the same tree render identically, which makes the
//! rendering usable as an equivalence key for patches.

use rustpython_parser::ast::{self, Constant, ConversionFlag, Expr, Pattern, Stmt};

use crate::python::parse::{parse_module, ParseFailure};

#[derive(Debug, Clone, thiserror::Error)]
pub enum CanonicalizationFailure {
    #[error(transparent)]
    Parse(#[from] ParseFailure),
    #[error("unrepresentable construct: {0}")]
    Unrepresentable(String),
}

type R = Result<String, CanonicalizationFailure>;

fn fail(what: impl Into<String>) -> CanonicalizationFailure {
    CanonicalizationFailure::Unrepresentable(what.into())
}

/// Parses a module and renders it in canonical form. The rendering is
/// idempotent: canonicalizing the output reproduces it byte-exactly.
pub fn canonicalize_module(source: &str, path: &str) -> Result<String, CanonicalizationFailure> {
    let suite = parse_module(source, path)?;
    let mut w = Writer {
        out: String::new(),
        indent: 0,
    };
    let body = strip_docstring(&suite);
    for stmt in body {
        w.stmt(stmt)?;
    }
    Ok(w.out)
}

/// Body with a leading string-literal statement removed.
fn strip_docstring(body: &[Stmt]) -> &[Stmt] {
    match body.first() {
        Some(Stmt::Expr(ast::StmtExpr { value, .. }))
            if matches!(
                value.as_ref(),
                Expr::Constant(ast::ExprConstant {
                    value: Constant::Str(_),
                    ..
                })
            ) =>
        {
            &body[1..]
        }
        _ => body,
    }
}

struct Writer {
    out: String,
    indent: usize,
}

impl Writer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    /// Renders a statement body one level deeper, dropping a docstring when
    /// the owner can carry one and emitting `pass` if nothing remains.
    fn body(&mut self, body: &[Stmt], strip: bool) -> Result<(), CanonicalizationFailure> {
        let body = if strip { strip_docstring(body) } else { body };
        self.indent += 1;
        if body.is_empty() {
            self.line("pass");
        } else {
            for stmt in body {
                self.stmt(stmt)?;
            }
        }
        self.indent -= 1;
        Ok(())
    }

    fn decorators(&mut self, list: &[Expr]) -> Result<(), CanonicalizationFailure> {
        for d in list {
            let rendered = format!("@{}", value(d)?);
            self.line(&rendered);
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), CanonicalizationFailure> {
        match stmt {
            Stmt::FunctionDef(ast::StmtFunctionDef {
                name,
                args,
                body,
                decorator_list,
                returns,
                ..
            }) => self.function(name.as_str(), args, body, decorator_list, returns.as_deref(), false),
            Stmt::AsyncFunctionDef(ast::StmtAsyncFunctionDef {
                name,
                args,
                body,
                decorator_list,
                returns,
                ..
            }) => self.function(name.as_str(), args, body, decorator_list, returns.as_deref(), true),
            Stmt::ClassDef(ast::StmtClassDef {
                name,
                bases,
                keywords,
                body,
                decorator_list,
                ..
            }) => {
                self.decorators(decorator_list)?;
                let header = if bases.is_empty() && keywords.is_empty() {
                    format!("class {name}:")
                } else {
                    format!("class {name}({}):", call_args(bases, keywords)?)
                };
                self.line(&header);
                self.body(body, true)
            }
            Stmt::Return(ast::StmtReturn { value: None, .. }) => {
                self.line("return");
                Ok(())
            }
            Stmt::Return(ast::StmtReturn { value: Some(v), .. }) => {
                let text = format!("return {}", value(v)?);
                self.line(&text);
                Ok(())
            }
            Stmt::Delete(ast::StmtDelete { targets, .. }) => {
                let parts = targets.iter().map(target).collect::<Result<Vec<_>, _>>()?;
                let text = format!("del {}", parts.join(", "));
                self.line(&text);
                Ok(())
            }
            Stmt::Assign(ast::StmtAssign { targets, value: v, .. }) => {
                let mut text = String::new();
                for t in targets {
                    text.push_str(&target(t)?);
                    text.push_str(" = ");
                }
                text.push_str(&value(v)?);
                self.line(&text);
                Ok(())
            }
            Stmt::AugAssign(ast::StmtAugAssign {
                target: t, op, value: v, ..
            }) => {
                let text = format!("{} {}= {}", target(t)?, bin_op(op), value(v)?);
                self.line(&text);
                Ok(())
            }
            Stmt::AnnAssign(ast::StmtAnnAssign {
                target: t,
                annotation,
                value: v,
                simple,
                ..
            }) => {
                let lhs = match t.as_ref() {
                    Expr::Name(n) if !simple => format!("({})", n.id.as_str()),
                    other => target(other)?,
                };
                let mut text = format!("{lhs}: {}", value(annotation)?);
                if let Some(v) = v {
                    text.push_str(" = ");
                    text.push_str(&value(v)?);
                }
                self.line(&text);
                Ok(())
            }
            Stmt::For(ast::StmtFor {
                target: t,
                iter,
                body,
                orelse,
                ..
            }) => self.for_loop(t, iter, body, orelse, false),
            Stmt::AsyncFor(ast::StmtAsyncFor {
                target: t,
                iter,
                body,
                orelse,
                ..
            }) => self.for_loop(t, iter, body, orelse, true),
            Stmt::While(ast::StmtWhile {
                test, body, orelse, ..
            }) => {
                let text = format!("while {}:", value(test)?);
                self.line(&text);
                self.body(body, false)?;
                self.else_block(orelse)
            }
            Stmt::If(ast::StmtIf {
                test, body, orelse, ..
            }) => {
                let text = format!("if {}:", value(test)?);
                self.line(&text);
                self.body(body, false)?;
                self.else_block(orelse)
            }
            Stmt::With(ast::StmtWith { items, body, .. }) => self.with_stmt(items, body, false),
            Stmt::AsyncWith(ast::StmtAsyncWith { items, body, .. }) => self.with_stmt(items, body, true),
            Stmt::Match(ast::StmtMatch { subject, cases, .. }) => {
                let text = format!("match {}:", value(subject)?);
                self.line(&text);
                self.indent += 1;
                for case in cases {
                    let mut head = format!("case {}", pattern(&case.pattern)?);
                    if let Some(g) = &case.guard {
                        head.push_str(" if ");
                        head.push_str(&value(g)?);
                    }
                    head.push(':');
                    self.line(&head);
                    self.body(&case.body, false)?;
                }
                self.indent -= 1;
                Ok(())
            }
            Stmt::Raise(ast::StmtRaise { exc, cause, .. }) => {
                let mut text = "raise".to_string();
                if let Some(e) = exc {
                    text.push(' ');
                    text.push_str(&value(e)?);
                    if let Some(c) = cause {
                        text.push_str(" from ");
                        text.push_str(&value(c)?);
                    }
                }
                self.line(&text);
                Ok(())
            }
            Stmt::Try(ast::StmtTry {
                body,
                handlers,
                orelse,
                finalbody,
                ..
            }) => self.try_stmt(body, handlers, orelse, finalbody, "except"),
            Stmt::TryStar(ast::StmtTryStar {
                body,
                handlers,
                orelse,
                finalbody,
                ..
            }) => self.try_stmt(body, handlers, orelse, finalbody, "except*"),
            Stmt::Assert(ast::StmtAssert { test, msg, .. }) => {
                let mut text = format!("assert {}", value(test)?);
                if let Some(m) = msg {
                    text.push_str(", ");
                    text.push_str(&value(m)?);
                }
                self.line(&text);
                Ok(())
            }
            Stmt::Import(ast::StmtImport { names, .. }) => {
                let text = format!("import {}", aliases(names));
                self.line(&text);
                Ok(())
            }
            Stmt::ImportFrom(ast::StmtImportFrom {
                module,
                names,
                level,
                ..
            }) => {
                let dots = ".".repeat(level.map(|l| l.to_usize()).unwrap_or(0));
                let module = module.as_ref().map(|m| m.as_str()).unwrap_or("");
                let text = format!("from {dots}{module} import {}", aliases(names));
                self.line(&text);
                Ok(())
            }
            Stmt::Global(ast::StmtGlobal { names, .. }) => {
                let text = format!("global {}", name_list(names));
                self.line(&text);
                Ok(())
            }
            Stmt::Nonlocal(ast::StmtNonlocal { names, .. }) => {
                let text = format!("nonlocal {}", name_list(names));
                self.line(&text);
                Ok(())
            }
            Stmt::Expr(ast::StmtExpr { value: v, .. }) => {
                let text = value(v)?;
                self.line(&text);
                Ok(())
            }
            Stmt::TypeAlias(ast::StmtTypeAlias {
                name,
                type_params,
                value: v,
                ..
            }) => {
                if !type_params.is_empty() {
                    return Err(fail("type alias with type parameters"));
                }
                let text = format!("type {} = {}", target(name)?, value(v)?);
                self.line(&text);
                Ok(())
            }
            Stmt::Pass(_) => {
                self.line("pass");
                Ok(())
            }
            Stmt::Break(_) => {
                self.line("break");
                Ok(())
            }
            Stmt::Continue(_) => {
                self.line("continue");
                Ok(())
            }
        }
    }

    fn function(
        &mut self,
        name: &str,
        args: &ast::Arguments,
        body: &[Stmt],
        decorator_list: &[Expr],
        returns: Option<&Expr>,
        is_async: bool,
    ) -> Result<(), CanonicalizationFailure> {
        self.decorators(decorator_list)?;
        let prefix = if is_async { "async def" } else { "def" };
        let mut header = format!("{prefix} {name}({})", params(args, true)?);
        if let Some(r) = returns {
            header.push_str(" -> ");
            header.push_str(&value(r)?);
        }
        header.push(':');
        self.line(&header);
        self.body(body, true)
    }

    fn for_loop(
        &mut self,
        t: &Expr,
        iter: &Expr,
        body: &[Stmt],
        orelse: &[Stmt],
        is_async: bool,
    ) -> Result<(), CanonicalizationFailure> {
        let prefix = if is_async { "async for" } else { "for" };
        let text = format!("{prefix} {} in {}:", target(t)?, value(iter)?);
        self.line(&text);
        self.body(body, false)?;
        self.else_block(orelse)
    }

    fn with_stmt(
        &mut self,
        items: &[ast::WithItem],
        body: &[Stmt],
        is_async: bool,
    ) -> Result<(), CanonicalizationFailure> {
        let mut parts = Vec::with_capacity(items.len());
        for item in items {
            let mut part = value(&item.context_expr)?;
            if let Some(v) = &item.optional_vars {
                part.push_str(" as ");
                part.push_str(&target(v)?);
            }
            parts.push(part);
        }
        let prefix = if is_async { "async with" } else { "with" };
        let text = format!("{prefix} {}:", parts.join(", "));
        self.line(&text);
        self.body(body, false)
    }

    fn try_stmt(
        &mut self,
        body: &[Stmt],
        handlers: &[ast::ExceptHandler],
        orelse: &[Stmt],
        finalbody: &[Stmt],
        keyword: &str,
    ) -> Result<(), CanonicalizationFailure> {
        self.line("try:");
        self.body(body, false)?;
        for h in handlers {
            let ast::ExceptHandler::ExceptHandler(h) = h;
            let mut head = keyword.to_string();
            if let Some(t) = &h.type_ {
                head.push(' ');
                head.push_str(&value(t)?);
                if let Some(n) = &h.name {
                    head.push_str(" as ");
                    head.push_str(n.as_str());
                }
            }
            head.push(':');
            self.line(&head);
            self.body(&h.body, false)?;
        }
        self.else_block(orelse)?;
        if !finalbody.is_empty() {
            self.line("finally:");
            self.body(finalbody, false)?;
        }
        Ok(())
    }

    fn else_block(&mut self, orelse: &[Stmt]) -> Result<(), CanonicalizationFailure> {
        if !orelse.is_empty() {
            self.line("else:");
            self.body(orelse, false)?;
        }
        Ok(())
    }
}

fn name_list(names: &[ast::Identifier]) -> String {
    names
        .iter()
        .map(|n| n.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn aliases(names: &[ast::Alias]) -> String {
    names
        .iter()
        .map(|a| match &a.asname {
            Some(asname) => format!("{} as {asname}", a.name.as_str()),
            None => a.name.to_string(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Value-context rendering. Composite expressions come back parenthesized so
/// the result can be embedded anywhere without precedence bookkeeping.
fn value(e: &Expr) -> R {
    render(e, false)
}

fn render(e: &Expr, fs: bool) -> R {
    match e {
        Expr::Name(n) => Ok(n.id.to_string()),
        Expr::Constant(c) => constant(&c.value, fs),
        Expr::JoinedStr(j) => {
            if fs {
                return Err(fail("f-string nested inside an f-string expression"));
            }
            fstring(&j.values)
        }
        Expr::BoolOp(ast::ExprBoolOp { op, values, .. }) => {
            let sep = match op {
                ast::BoolOp::And => " and ",
                ast::BoolOp::Or => " or ",
            };
            let parts = values
                .iter()
                .map(|v| render(v, fs))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(format!("({})", parts.join(sep)))
        }
        Expr::BinOp(ast::ExprBinOp {
            left, op, right, ..
        }) => Ok(format!(
            "({} {} {})",
            render(left, fs)?,
            bin_op(op),
            render(right, fs)?
        )),
        Expr::UnaryOp(ast::ExprUnaryOp { op, operand, .. }) => {
            let op = match op {
                ast::UnaryOp::Invert => "~",
                ast::UnaryOp::Not => "not ",
                ast::UnaryOp::UAdd => "+",
                ast::UnaryOp::USub => "-",
            };
            Ok(format!("({op}{})", render(operand, fs)?))
        }
        Expr::Compare(ast::ExprCompare {
            left,
            ops,
            comparators,
            ..
        }) => {
            let mut text = format!("({}", render(left, fs)?);
            for (op, right) in ops.iter().zip(comparators) {
                text.push(' ');
                text.push_str(cmp_op(op));
                text.push(' ');
                text.push_str(&render(right, fs)?);
            }
            text.push(')');
            Ok(text)
        }
        Expr::Lambda(ast::ExprLambda { args, body, .. }) => {
            let ps = params(args, false)?;
            let body = render(body, fs)?;
            if ps.is_empty() {
                Ok(format!("(lambda: {body})"))
            } else {
                Ok(format!("(lambda {ps}: {body})"))
            }
        }
        Expr::IfExp(ast::ExprIfExp {
            test, body, orelse, ..
        }) => Ok(format!(
            "({} if {} else {})",
            render(body, fs)?,
            render(test, fs)?,
            render(orelse, fs)?
        )),
        Expr::Dict(ast::ExprDict { keys, values, .. }) => {
            let mut parts = Vec::with_capacity(keys.len());
            for (k, v) in keys.iter().zip(values) {
                match k {
                    Some(k) => parts.push(format!("{}: {}", render(k, fs)?, render(v, fs)?)),
                    None => parts.push(format!("**{}", render(v, fs)?)),
                }
            }
            Ok(format!("{{{}}}", parts.join(", ")))
        }
        Expr::Set(ast::ExprSet { elts, .. }) => {
            let parts = elts
                .iter()
                .map(|v| render(v, fs))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(format!("{{{}}}", parts.join(", ")))
        }
        Expr::List(ast::ExprList { elts, .. }) => {
            let parts = elts
                .iter()
                .map(|v| render(v, fs))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(format!("[{}]", parts.join(", ")))
        }
        Expr::Tuple(ast::ExprTuple { elts, .. }) => tuple_display(elts, fs),
        Expr::ListComp(ast::ExprListComp {
            elt, generators, ..
        }) => Ok(format!(
            "[{} {}]",
            render(elt, fs)?,
            comprehensions(generators, fs)?
        )),
        Expr::SetComp(ast::ExprSetComp {
            elt, generators, ..
        }) => Ok(format!(
            "{{{} {}}}",
            render(elt, fs)?,
            comprehensions(generators, fs)?
        )),
        Expr::DictComp(ast::ExprDictComp {
            key,
            value: v,
            generators,
            ..
        }) => Ok(format!(
            "{{{}: {} {}}}",
            render(key, fs)?,
            render(v, fs)?,
            comprehensions(generators, fs)?
        )),
        Expr::GeneratorExp(ast::ExprGeneratorExp {
            elt, generators, ..
        }) => Ok(format!(
            "({} {})",
            render(elt, fs)?,
            comprehensions(generators, fs)?
        )),
        Expr::Await(ast::ExprAwait { value: v, .. }) => Ok(format!("(await {})", render(v, fs)?)),
        Expr::Yield(ast::ExprYield { value: v, .. }) => match v {
            Some(v) => Ok(format!("(yield {})", render(v, fs)?)),
            None => Ok("(yield)".to_string()),
        },
        Expr::YieldFrom(ast::ExprYieldFrom { value: v, .. }) => {
            Ok(format!("(yield from {})", render(v, fs)?))
        }
        Expr::NamedExpr(ast::ExprNamedExpr {
            target: t,
            value: v,
            ..
        }) => Ok(format!("({} := {})", render(t, fs)?, render(v, fs)?)),
        Expr::Call(ast::ExprCall {
            func,
            args,
            keywords,
            ..
        }) => Ok(format!(
            "{}({})",
            primary(func, fs)?,
            call_args_mode(args, keywords, fs)?
        )),
        Expr::Attribute(ast::ExprAttribute { value: v, attr, .. }) => {
            Ok(format!("{}.{attr}", primary(v, fs)?))
        }
        Expr::Subscript(ast::ExprSubscript {
            value: v, slice, ..
        }) => Ok(format!("{}[{}]", primary(v, fs)?, subscript_index(slice, fs)?)),
        Expr::Starred(ast::ExprStarred { value: v, .. }) => Ok(format!("*{}", render(v, fs)?)),
        Expr::Slice(_) => Err(fail("slice outside a subscript")),
        Expr::FormattedValue(_) => Err(fail("formatted value outside an f-string")),
    }
}

/// Base of a call, attribute access, or subscript. Equals value rendering
/// except numeric literals, which need parentheses before a dot.
fn primary(e: &Expr, fs: bool) -> R {
    match e {
        Expr::Constant(c)
            if matches!(
                c.value,
                Constant::Int(_) | Constant::Float(_) | Constant::Complex { .. }
            ) =>
        {
            Ok(format!("({})", constant(&c.value, fs)?))
        }
        _ => render(e, fs),
    }
}

fn tuple_display(elts: &[Expr], fs: bool) -> R {
    let parts = elts
        .iter()
        .map(|v| render(v, fs))
        .collect::<Result<Vec<_>, _>>()?;
    match parts.len() {
        0 => Ok("()".to_string()),
        1 => Ok(format!("({},)", parts[0])),
        _ => Ok(format!("({})", parts.join(", "))),
    }
}

/// Assignment, deletion, and loop targets: the restricted target grammar,
/// rendered without the value-context parenthesization.
fn target(e: &Expr) -> R {
    match e {
        Expr::Name(n) => Ok(n.id.to_string()),
        Expr::Attribute(_) | Expr::Subscript(_) => value(e),
        Expr::Starred(ast::ExprStarred { value: v, .. }) => Ok(format!("*{}", target(v)?)),
        Expr::Tuple(ast::ExprTuple { elts, .. }) => {
            let parts = elts.iter().map(target).collect::<Result<Vec<_>, _>>()?;
            match parts.len() {
                0 => Ok("()".to_string()),
                1 => Ok(format!("({},)", parts[0])),
                _ => Ok(format!("({})", parts.join(", "))),
            }
        }
        Expr::List(ast::ExprList { elts, .. }) => {
            let parts = elts.iter().map(target).collect::<Result<Vec<_>, _>>()?;
            Ok(format!("[{}]", parts.join(", ")))
        }
        other => Err(fail(format!("unsupported assignment target {other:?}"))),
    }
}

fn comprehensions(gens: &[ast::Comprehension], fs: bool) -> R {
    let mut parts = Vec::with_capacity(gens.len());
    for g in gens {
        let prefix = if g.is_async { "async for" } else { "for" };
        let mut text = format!("{prefix} {} in {}", target(&g.target)?, render(&g.iter, fs)?);
        for cond in &g.ifs {
            text.push_str(" if ");
            text.push_str(&render(cond, fs)?);
        }
        parts.push(text);
    }
    Ok(parts.join(" "))
}

fn call_args(args: &[Expr], keywords: &[ast::Keyword]) -> R {
    call_args_mode(args, keywords, false)
}

fn call_args_mode(args: &[Expr], keywords: &[ast::Keyword], fs: bool) -> R {
    let mut parts = Vec::with_capacity(args.len() + keywords.len());
    for a in args {
        parts.push(render(a, fs)?);
    }
    for k in keywords {
        match &k.arg {
            Some(name) => parts.push(format!("{name}={}", render(&k.value, fs)?)),
            None => parts.push(format!("**{}", render(&k.value, fs)?)),
        }
    }
    Ok(parts.join(", "))
}

/// Parameter list text for `def` (annotations allowed) and `lambda`.
fn params(args: &ast::Arguments, annotations: bool) -> R {
    let one = |a: &ast::ArgWithDefault| -> R {
        let mut text = a.def.arg.to_string();
        let annotated = annotations && a.def.annotation.is_some();
        if let (true, Some(ann)) = (annotations, &a.def.annotation) {
            text.push_str(": ");
            text.push_str(&value(ann)?);
        }
        if let Some(d) = &a.default {
            text.push_str(if annotated { " = " } else { "=" });
            text.push_str(&value(d)?);
        }
        Ok(text)
    };
    let bare = |a: &ast::Arg| -> R {
        let mut text = a.arg.to_string();
        if let (true, Some(ann)) = (annotations, &a.annotation) {
            text.push_str(": ");
            text.push_str(&value(ann)?);
        }
        Ok(text)
    };
    let mut parts = Vec::new();
    for a in &args.posonlyargs {
        parts.push(one(a)?);
    }
    if !args.posonlyargs.is_empty() {
        parts.push("/".to_string());
    }
    for a in &args.args {
        parts.push(one(a)?);
    }
    if let Some(v) = &args.vararg {
        parts.push(format!("*{}", bare(v)?));
    } else if !args.kwonlyargs.is_empty() {
        parts.push("*".to_string());
    }
    for a in &args.kwonlyargs {
        parts.push(one(a)?);
    }
    if let Some(k) = &args.kwarg {
        parts.push(format!("**{}", bare(k)?));
    }
    Ok(parts.join(", "))
}

/// Index text inside `[...]`. Slices keep their colon form; tuple indices
/// render bare so slice elements stay legal (`a[1:2, 3]`).
fn subscript_index(e: &Expr, fs: bool) -> R {
    match e {
        Expr::Slice(s) => slice_item(s, fs),
        Expr::Tuple(ast::ExprTuple { elts, .. }) if !elts.is_empty() => {
            let mut parts = Vec::with_capacity(elts.len());
            for elt in elts {
                match elt {
                    Expr::Slice(s) => parts.push(slice_item(s, fs)?),
                    other => parts.push(render(other, fs)?),
                }
            }
            if parts.len() == 1 {
                Ok(format!("{},", parts[0]))
            } else {
                Ok(parts.join(", "))
            }
        }
        other => render(other, fs),
    }
}

fn slice_item(s: &ast::ExprSlice, fs: bool) -> R {
    let part = |o: &Option<Box<Expr>>| -> R {
        match o {
            Some(e) => render(e, fs),
            None => Ok(String::new()),
        }
    };
    let mut text = format!("{}:{}", part(&s.lower)?, part(&s.upper)?);
    if let Some(step) = &s.step {
        text.push(':');
        text.push_str(&render(step, fs)?);
    }
    Ok(text)
}

fn bin_op(op: &ast::Operator) -> &'static str {
    match op {
        ast::Operator::Add => "+",
        ast::Operator::Sub => "-",
        ast::Operator::Mult => "*",
        ast::Operator::MatMult => "@",
        ast::Operator::Div => "/",
        ast::Operator::Mod => "%",
        ast::Operator::Pow => "**",
        ast::Operator::LShift => "<<",
        ast::Operator::RShift => ">>",
        ast::Operator::BitOr => "|",
        ast::Operator::BitXor => "^",
        ast::Operator::BitAnd => "&",
        ast::Operator::FloorDiv => "//",
    }
}

fn cmp_op(op: &ast::CmpOp) -> &'static str {
    match op {
        ast::CmpOp::Eq => "==",
        ast::CmpOp::NotEq => "!=",
        ast::CmpOp::Lt => "<",
        ast::CmpOp::LtE => "<=",
        ast::CmpOp::Gt => ">",
        ast::CmpOp::GtE => ">=",
        ast::CmpOp::Is => "is",
        ast::CmpOp::IsNot => "is not",
        ast::CmpOp::In => "in",
        ast::CmpOp::NotIn => "not in",
    }
}

fn float_literal(f: f64) -> R {
    if f.is_nan() {
        return Err(fail("float NaN literal"));
    }
    if f.is_infinite() {
        return Ok(if f < 0.0 { "-1e999" } else { "1e999" }.to_string());
    }
    Ok(format!("{f:?}"))
}

fn constant(c: &Constant, fs: bool) -> R {
    match c {
        Constant::None => Ok("None".to_string()),
        Constant::Bool(true) => Ok("True".to_string()),
        Constant::Bool(false) => Ok("False".to_string()),
        Constant::Str(s) => str_literal(s, fs),
        Constant::Bytes(b) => bytes_literal(b, fs),
        Constant::Int(i) => Ok(i.to_string()),
        Constant::Float(f) => float_literal(*f),
        Constant::Complex { real, imag } => {
            let imag = format!("{}j", float_literal(*imag)?);
            if *real == 0.0 {
                Ok(imag)
            } else {
                Ok(format!("({} + {imag})", float_literal(*real)?))
            }
        }
        Constant::Ellipsis => Ok("...".to_string()),
        Constant::Tuple(items) => {
            let parts = items
                .iter()
                .map(|c| constant(c, fs))
                .collect::<Result<Vec<_>, _>>()?;
            match parts.len() {
                0 => Ok("()".to_string()),
                1 => Ok(format!("({},)", parts[0])),
                _ => Ok(format!("({})", parts.join(", "))),
            }
        }
    }
}

/// Double-quoted string literal with a fixed escape set. Inside an f-string
/// replacement field no escapes are possible, so the value must survive
/// single-quoted and verbatim.
fn str_literal(s: &str, fs: bool) -> R {
    if fs {
        if s.chars()
            .any(|c| c == '\'' || c == '"' || c == '\\' || c < ' ' || c == '\x7f')
        {
            return Err(fail("string inside f-string expression needs escapes"));
        }
        return Ok(format!("'{s}'"));
    }
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        escape_char(ch, &mut out);
    }
    out.push('"');
    Ok(out)
}

fn escape_char(ch: char, out: &mut String) {
    match ch {
        '\\' => out.push_str("\\\\"),
        '"' => out.push_str("\\\""),
        '\n' => out.push_str("\\n"),
        '\r' => out.push_str("\\r"),
        '\t' => out.push_str("\\t"),
        c if c < ' ' || c == '\x7f' => out.push_str(&format!("\\x{:02x}", c as u32)),
        c => out.push(c),
    }
}

fn bytes_literal(b: &[u8], fs: bool) -> R {
    if fs {
        if b.iter()
            .any(|&c| !(0x20..0x7f).contains(&c) || c == b'\'' || c == b'"' || c == b'\\')
        {
            return Err(fail("bytes inside f-string expression need escapes"));
        }
        return Ok(format!("b'{}'", String::from_utf8_lossy(b)));
    }
    let mut out = String::with_capacity(b.len() + 3);
    out.push_str("b\"");
    for &byte in b {
        match byte {
            b'\\' => out.push_str("\\\\"),
            b'"' => out.push_str("\\\""),
            b'\n' => out.push_str("\\n"),
            b'\r' => out.push_str("\\r"),
            b'\t' => out.push_str("\\t"),
            0x20..=0x7e => out.push(byte as char),
            _ => out.push_str(&format!("\\x{byte:02x}")),
        }
    }
    out.push('"');
    Ok(out)
}

fn fstring(values: &[Expr]) -> R {
    let mut out = String::from("f\"");
    for v in values {
        fstring_part(v, &mut out)?;
    }
    out.push('"');
    Ok(out)
}

fn fstring_part(v: &Expr, out: &mut String) -> Result<(), CanonicalizationFailure> {
    match v {
        Expr::Constant(ast::ExprConstant {
            value: Constant::Str(s),
            ..
        }) => {
            for ch in s.chars() {
                match ch {
                    '{' => out.push_str("{{"),
                    '}' => out.push_str("}}"),
                    c => escape_char(c, out),
                }
            }
            Ok(())
        }
        Expr::FormattedValue(ast::ExprFormattedValue {
            value: v,
            conversion,
            format_spec,
            ..
        }) => {
            let inner = render(v, true)?;
            out.push('{');
            if inner.starts_with('{') {
                out.push(' ');
            }
            out.push_str(&inner);
            match conversion {
                ConversionFlag::None => {}
                ConversionFlag::Str => out.push_str("!s"),
                ConversionFlag::Ascii => out.push_str("!a"),
                ConversionFlag::Repr => out.push_str("!r"),
            }
            if let Some(spec) = format_spec {
                out.push(':');
                fstring_spec(spec, out)?;
            }
            out.push('}');
            Ok(())
        }
        other => Err(fail(format!("unexpected f-string part {other:?}"))),
    }
}

/// Format-spec body: literal text plus nested replacement fields. No escape
/// mechanism exists here, so text needing one is unrepresentable.
fn fstring_spec(spec: &Expr, out: &mut String) -> Result<(), CanonicalizationFailure> {
    let Expr::JoinedStr(j) = spec else {
        return Err(fail("format spec is not a joined string"));
    };
    for v in &j.values {
        match v {
            Expr::Constant(ast::ExprConstant {
                value: Constant::Str(s),
                ..
            }) => {
                if s.chars()
                    .any(|c| c == '"' || c == '\\' || c == '{' || c == '}' || c < ' ' || c == '\x7f')
                {
                    return Err(fail("format spec text needs escapes"));
                }
                out.push_str(s);
            }
            other => fstring_part(other, out)?,
        }
    }
    Ok(())
}

/// Match patterns. Value patterns use the literal grammar (signed numbers and
/// dotted names), which over-parenthesized rendering would break.
fn pattern(p: &Pattern) -> R {
    match p {
        Pattern::MatchValue(ast::PatternMatchValue { value: v, .. }) => literal_pattern(v),
        Pattern::MatchSingleton(ast::PatternMatchSingleton { value: v, .. }) => constant(v, false),
        Pattern::MatchSequence(ast::PatternMatchSequence { patterns, .. }) => {
            let parts = patterns.iter().map(pattern).collect::<Result<Vec<_>, _>>()?;
            Ok(format!("[{}]", parts.join(", ")))
        }
        Pattern::MatchMapping(ast::PatternMatchMapping {
            keys,
            patterns,
            rest,
            ..
        }) => {
            let mut parts = Vec::with_capacity(keys.len() + 1);
            for (k, p) in keys.iter().zip(patterns) {
                parts.push(format!("{}: {}", literal_pattern(k)?, pattern(p)?));
            }
            if let Some(rest) = rest {
                parts.push(format!("**{rest}"));
            }
            Ok(format!("{{{}}}", parts.join(", ")))
        }
        Pattern::MatchClass(ast::PatternMatchClass {
            cls,
            patterns,
            kwd_attrs,
            kwd_patterns,
            ..
        }) => {
            let mut parts = Vec::with_capacity(patterns.len() + kwd_attrs.len());
            for p in patterns {
                parts.push(pattern(p)?);
            }
            for (attr, p) in kwd_attrs.iter().zip(kwd_patterns) {
                parts.push(format!("{attr}={}", pattern(p)?));
            }
            Ok(format!("{}({})", dotted_name(cls)?, parts.join(", ")))
        }
        Pattern::MatchStar(ast::PatternMatchStar { name, .. }) => match name {
            Some(n) => Ok(format!("*{n}")),
            None => Ok("*_".to_string()),
        },
        Pattern::MatchAs(ast::PatternMatchAs {
            pattern: inner,
            name,
            ..
        }) => match (inner, name) {
            (Some(p), Some(n)) => Ok(format!("{} as {n}", grouped(p)?)),
            (None, Some(n)) => Ok(n.to_string()),
            (None, None) => Ok("_".to_string()),
            (Some(_), None) => Err(fail("as-pattern without a name")),
        },
        Pattern::MatchOr(ast::PatternMatchOr { patterns, .. }) => {
            let parts = patterns.iter().map(grouped).collect::<Result<Vec<_>, _>>()?;
            Ok(parts.join(" | "))
        }
    }
}

/// Or/as alternatives must be closed patterns; group looser ones in parens.
fn grouped(p: &Pattern) -> R {
    match p {
        Pattern::MatchAs(ast::PatternMatchAs {
            pattern: Some(_), ..
        })
        | Pattern::MatchOr(_) => Ok(format!("({})", pattern(p)?)),
        _ => pattern(p),
    }
}

/// The restricted expressions allowed as match-pattern values: literals with
/// an optional sign, complex sums, and dotted names.
fn literal_pattern(e: &Expr) -> R {
    match e {
        Expr::Constant(c) => constant(&c.value, false),
        Expr::UnaryOp(ast::ExprUnaryOp {
            op: ast::UnaryOp::USub,
            operand,
            ..
        }) => Ok(format!("-{}", literal_pattern(operand)?)),
        Expr::BinOp(ast::ExprBinOp {
            left, op, right, ..
        }) if matches!(op, ast::Operator::Add | ast::Operator::Sub) => Ok(format!(
            "{} {} {}",
            literal_pattern(left)?,
            bin_op(op),
            literal_pattern(right)?
        )),
        Expr::Name(n) => Ok(n.id.to_string()),
        Expr::Attribute(ast::ExprAttribute { value: v, attr, .. }) => {
            Ok(format!("{}.{attr}", dotted_name(v)?))
        }
        other => Err(fail(format!("unsupported pattern value {other:?}"))),
    }
}

fn dotted_name(e: &Expr) -> R {
    match e {
        Expr::Name(n) => Ok(n.id.to_string()),
        Expr::Attribute(ast::ExprAttribute { value: v, attr, .. }) => {
            Ok(format!("{}.{attr}", dotted_name(v)?))
        }
        other => Err(fail(format!("expected dotted name, got {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon(src: &str) -> String {
        canonicalize_module(src, "t.py").unwrap()
    }

    fn assert_idempotent(src: &str) {
        let once = canon(src);
        let twice = canonicalize_module(&once, "t.py").unwrap();
        assert_eq!(once, twice, "not idempotent for {src:?}");
    }

    #[test]
    fn comments_and_blank_lines_vanish() {
        let a = canon("x = 1  # set x\n\n\ny = 2\n");
        let b = canon("x = 1\ny = 2");
        assert_eq!(a, b);
        assert_eq!(a, "x = 1\ny = 2\n");
    }

    #[test]
    fn docstrings_removed_pass_inserted() {
        let src = "\
\"\"\"Module doc.\"\"\"

def f():
    'doc'

class C:
    \"\"\"doc\"\"\"
    def m(self):
        \"only a docstring\"
";
        let out = canon(src);
        let expected = "\
def f():
    pass
class C:
    def m(self):
        pass
";
        assert_eq!(out, expected);
    }

    #[test]
    fn layout_is_normalized() {
        let a = canon("def f(a,b):\n  return a+b\n");
        let b = canon("def f(a, b):\n        return (a + b)\n");
        assert_eq!(a, b);
        assert_eq!(a, "def f(a, b):\n    return (a + b)\n");
    }

    #[test]
    fn semantic_changes_stay_distinct() {
        assert_ne!(canon("x = 1\n"), canon("x = 2\n"));
        assert_ne!(canon("def f(a): pass\n"), canon("def f(b): pass\n"));
        assert_ne!(canon("x = 'a'\n"), canon("x = 'b'\n"));
    }

    #[test]
    fn string_quoting_unified() {
        assert_eq!(canon("x = 'a'\n"), canon("x = \"a\"\n"));
        assert_eq!(canon("x = 'a' \"b\"\n"), "x = \"ab\"\n");
        assert_eq!(canon(r#"x = '\n\t"'"#), "x = \"\\n\\t\\\"\"\n");
        assert_eq!(canon("x = rb'a\\n'\n"), "x = b\"a\\\\n\"\n");
    }

    #[test]
    fn tricky_expressions_round_trip() {
        let cases = [
            "x = a if b else c",
            "y = lambda p, *, q=1: p + q",
            "z = {k: v for k, v in items if v}",
            "w = [i async for i in gen()]",
            "print(*args, sep=', ', **kw)",
            "t = (1,)",
            "e = ()",
            "s = a[1:2, ::3]",
            "s2 = a[x,]",
            "v = (yield)",
            "u = (yield from gen())",
            "n = (x := f()) + x",
            "b = not a is not c",
            "m = (1).bit_length()",
            "d = {**base, 'k': 2}",
            "g = f(x for x in y)",
            "c = a @ b ** -2",
            "h = x.y.z[0].w(1)(2)",
            "del a[0], b.c",
            "a = b = c",
            "(q): int = 5",
            "async def f():\n    async with open(p) as fh:\n        await fh.read()",
            "try:\n    pass\nexcept* ValueError as e:\n    raise SystemExit(2) from e",
            "for a, (b, c) in pairs:\n    pass\nelse:\n    pass",
            "class C(Base, metaclass=M):\n    x: int = 0",
            "from ..pkg import name as alias, other",
            "if a:\n    pass\nelif b:\n    pass\nelse:\n    pass",
            "while x:\n    break\nelse:\n    pass",
            "global a, b",
            "assert x, 'message'",
            "@deco.method(arg)\ndef f() -> 'T':\n    pass",
            "x = 1e100\ny = 1e999\nz = 3.5j",
            "def g(a, /, b, *c, d=2, **e):\n    return a",
        ];
        for src in cases {
            assert_idempotent(src);
        }
    }

    #[test]
    fn fstrings_round_trip() {
        let cases = [
            "x = f'{a}'",
            "x = f'{a!r}'",
            "x = f'{a:>10}'",
            "x = f'{a:{w}.{p}}'",
            "x = f'pre {a + b} post'",
            "x = f'{{literal}}'",
            "x = f\"{d['key']}\"",
            "x = f'{ {1: 2}[1] }'",
        ];
        for src in cases {
            assert_idempotent(src);
        }
        assert_eq!(canon("x = f'{a}'"), canon("x = f\"{ a }\""));
    }

    #[test]
    fn fstring_inner_escape_is_rejected() {
        let err = canonicalize_module("x = f'{a[\"x\\ny\"]}'", "t.py").unwrap_err();
        assert!(matches!(err, CanonicalizationFailure::Unrepresentable(_)));
    }

    #[test]
    fn match_statements_round_trip() {
        let src = "\
match command:
    case 'quit' | 'exit':
        pass
    case Point(x=0, y=0):
        pass
    case [Point(x=0), *rest] if rest:
        pass
    case {'k': v, **extra}:
        pass
    case (-1 + 2j) as z:
        pass
    case Color.RED:
        pass
    case _:
        pass
";
        assert_idempotent(src);
    }

    #[test]
    fn elif_and_else_normalize_identically() {
        let a = canon("if a:\n    x = 1\nelif b:\n    x = 2\n");
        let b = canon("if a:\n    x = 1\nelse:\n    if b:\n        x = 2\n");
        assert_eq!(a, b);
    }

    #[test]
    fn parse_failure_is_reported() {
        let err = canonicalize_module("def f(:\n", "bad.py").unwrap_err();
        assert!(matches!(err, CanonicalizationFailure::Parse(_)));
    }
}
