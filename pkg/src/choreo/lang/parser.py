"""Lexer and recursive-descent parser for ``.chor`` and ``.chim`` sources.

Grammar sketch::

    program   := 'defchor' '[' Role {',' Role} ']' 'do' {def} 'end'
    def       := 'def' name '(' [param {',' param}] ')' 'do' stmts 'end'
    param     := Role '.' pattern | name
    stmt      := 'if' located [',' 'notify:' '[' roles ']'] 'do' stmts 'else' stmts 'end'
               | 'checkpoint' 'do' stmts 'rescue' stmts 'end'
               | 'with' Role '.' pattern '<-' rhs 'do' stmts 'end'
               | name '(' args ')' | name '.' '(' args ')'
               | located ['~>' Role '.' pattern]
    located   := Role '.' '(' expr ')' | Role '.' expr

Statements are newline separated; a binary operator at the start of a line
does not continue the previous expression unless inside brackets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from . import ast as A
from .evaluate import ImplRegistry, ImplTable, eval_expr, match_pattern
from .values import Atom, Crash, format_value


class ChorSyntaxError(Exception):
    def __init__(self, message: str, span: A.SourceSpan | None = None, hint: str | None = None):
        self.message = message
        self.span = span
        self.hint = hint
        text = message if span is None else f"{span}: {message}"
        if hint:
            text += f" (expected {hint})"
        super().__init__(text)


KEYWORDS = {
    "defchor", "defimpl", "do", "end", "def", "if", "else", "checkpoint",
    "rescue", "with", "rem", "nil", "true", "false",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<atom>:[a-z_][A-Za-z0-9_]*[?!]?)
  | (?P<key>[a-z_][A-Za-z0-9_]*:(?![:A-Za-z_]))
  | (?P<ident>[a-z_][A-Za-z0-9_]*[?!]?)
  | (?P<role>[A-Z][A-Za-z0-9_]*)
  | (?P<op>~>|<-|<>|<=|>=|==|!=|[<>+\-*/^@.,(){}\[\]])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass
class Token:
    kind: str  # int string atom key ident role op kw eof
    text: str
    line: int
    col: int
    nl_before: bool

    def span(self, file: str) -> A.SourceSpan:
        return A.SourceSpan(file, self.line, self.col, max(1, len(self.text)))


def tokenize(source: str, file: str = "<input>") -> list:
    toks = []
    pos = 0
    line, line_start = 1, 0
    nl = True
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            span = A.SourceSpan(file, line, pos - line_start + 1)
            raise ChorSyntaxError(f"unexpected character {source[pos]!r}", span)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        pos = m.end()
        if kind == "nl":
            line += 1
            line_start = pos
            nl = True
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "ident" and text in KEYWORDS:
            kind = "kw"
        toks.append(Token(kind, text, line, col, nl))
        nl = False
    toks.append(Token("eof", "", line, pos - line_start + 1, True))
    return toks


def _unescape(raw: str) -> str:
    body = raw[1:-1]
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


@dataclass(frozen=True)
class _RawCall:
    """A ``name(args)`` whose meaning (choreography vs local call) is resolved later."""

    fname: str
    args: tuple
    indirect: bool
    span: A.SourceSpan


@dataclass(frozen=True)
class _BareExpr:
    """Unlocated argument expression; only legal inside a local call."""

    expr: object


class _Parser:
    def __init__(self, source: str, file: str):
        self.file = file
        self.source = source
        self.toks = tokenize(source, file)
        self.i = 0
        self.depth = 0  # bracket nesting, for newline sensitivity
        self.site = 0
        self.warnings: list = []

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def span(self, t: Token | None = None) -> A.SourceSpan:
        return (t or self.tok).span(self.file)

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def at_op(self, text: str) -> bool:
        return self.at("op", text)

    def at_kw(self, text: str) -> bool:
        return self.at("kw", text)

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def fail(self, message: str, hint: str | None = None):
        got = self.tok.text or "end of input"
        raise ChorSyntaxError(f"{message}, got {got!r}", self.span(), hint)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            self.fail("syntax error", repr(text) if text else kind)
        return self.advance()

    def expect_op(self, text: str) -> Token:
        return self.expect("op", text)

    def expect_kw(self, text: str) -> Token:
        return self.expect("kw", text)

    def open_(self, text: str) -> None:
        self.expect_op(text)
        self.depth += 1

    def close(self, text: str) -> None:
        self.expect_op(text)
        self.depth -= 1

    def next_site(self) -> int:
        s = self.site
        self.site += 1
        return s

    # -- program
    def program(self) -> A.ChorProgram:
        self.expect_kw("defchor")
        self.open_("[")
        roles = [self.expect("role").text]
        while self.at_op(","):
            self.advance()
            roles.append(self.expect("role").text)
        self.close("]")
        self.expect_kw("do")
        funcs = []
        while self.at_kw("def"):
            funcs.append(self.function())
        self.expect_kw("end")
        if not self.at("eof"):
            self.fail("trailing input after choreography", "end of input")
        return A.ChorProgram(tuple(roles), tuple(funcs), self.file, self.source, self.warnings)

    def function(self) -> A.ChorFunction:
        start = self.expect_kw("def")
        name = self.expect("ident").text
        self.open_("(")
        params = []
        if not self.at_op(")"):
            params.append(self.param())
            while self.at_op(","):
                self.advance()
                params.append(self.param())
        self.close(")")
        self.expect_kw("do")
        body = self.statements()
        self.expect_kw("end")
        return A.ChorFunction(name, tuple(params), tuple(body), start.span(self.file))

    def param(self):
        if self.at("role"):
            role = self.advance().text
            self.expect_op(".")
            return A.Located(role, self.located_pattern())
        if self.at("ident"):
            return A.FuncParam(self.advance().text)
        self.fail("expected a located parameter or function parameter", "Role.pattern or name")

    def located_pattern(self):
        if self.at_op("("):
            self.open_("(")
            p = self.pattern()
            self.close(")")
            return p
        return self.pattern()

    # -- statements
    def statements(self) -> list:
        out = []
        while not (self.at_kw("end") or self.at_kw("else") or self.at_kw("rescue") or self.at("eof")):
            out.append(self.statement())
        return out

    def statement(self):
        t = self.tok
        if self.at_kw("if"):
            return self.if_stmt()
        if self.at_kw("checkpoint"):
            return self.checkpoint_stmt()
        if self.at_kw("with"):
            return self.with_stmt()
        if self.at("ident"):
            return self.call_stmt()
        if self.at("role"):
            role, expr = self.located_expr()
            if self.at_op("~>"):
                self.advance()
                recv = self.expect("role").text
                self.expect_op(".")
                pat = self.located_pattern()
                return A.Delivery(role, expr, recv, pat, self.next_site(), t.span(self.file))
            return A.LocalExpr(role, expr, t.span(self.file))
        self.fail("expected a statement", "if, checkpoint, with, a call or Role.expr")

    def if_stmt(self) -> A.If:
        t = self.expect_kw("if")
        decider, cond = self.located_expr()
        notify = None
        if self.at_op(","):
            self.advance()
            key = self.expect("key")
            if key.text != "notify:":
                raise ChorSyntaxError(f"unknown if option {key.text!r}", key.span(self.file), "notify:")
            self.open_("[")
            notify = []
            if not self.at_op("]"):
                notify.append(self.expect("role").text)
                while self.at_op(","):
                    self.advance()
                    notify.append(self.expect("role").text)
            self.close("]")
        self.expect_kw("do")
        site = self.next_site()
        branch_start = self.site
        then = self.statements()
        then_end = self.site
        if not self.at_kw("else"):
            self.fail("if requires an else branch", "else")
        self.advance()
        # both arms number their sites from the same base so identical arms merge
        self.site = branch_start
        else_ = self.statements()
        self.site = max(then_end, self.site)
        self.expect_kw("end")
        span = t.span(self.file)
        if notify is not None:
            if decider in notify:
                self.warnings.append(
                    f"{span}: notify list names the deciding actor {decider}; ignoring it")
                notify = [r for r in notify if r != decider]
            notify = tuple(dict.fromkeys(notify))
        return A.If(decider, cond, notify, tuple(then), tuple(else_), site, span)

    def checkpoint_stmt(self) -> A.Checkpoint:
        t = self.expect_kw("checkpoint")
        self.expect_kw("do")
        site = self.next_site()
        body = self.statements()
        self.expect_kw("rescue")
        rescue = self.statements()
        self.expect_kw("end")
        return A.Checkpoint(tuple(body), tuple(rescue), site, t.span(self.file))

    def with_stmt(self):
        t = self.expect_kw("with")
        role = self.expect("role").text
        self.expect_op(".")
        pat = self.located_pattern()
        self.expect_op("<-")
        if self.at("role"):
            rrole, rhs = self.located_expr()
            if rrole != role:
                raise ChorSyntaxError(
                    f"with binds a variable at {role} but its right side is located at {rrole}",
                    t.span(self.file))
        elif self.at("ident") and (self.peek().text == "(" or self.peek().text == "."):
            rhs = self.raw_call()
        else:
            rhs = self.expr()
        self.expect_kw("do")
        rest = self.statements()
        self.expect_kw("end")
        return A.With(role, pat, rhs, tuple(rest), t.span(self.file))

    def call_stmt(self):
        call = self.raw_call()
        return call

    def raw_call(self) -> _RawCall:
        t = self.expect("ident")
        indirect = False
        if self.at_op("."):
            self.advance()
            indirect = True
        self.open_("(")
        args = []
        if not self.at_op(")"):
            args.append(self.arg())
            while self.at_op(","):
                self.advance()
                args.append(self.arg())
        self.close(")")
        return _RawCall(t.text, tuple(args), indirect, t.span(self.file))

    def arg(self):
        if self.at("role"):
            role, e = self.located_expr()
            return A.LocatedArg(role, e)
        if self.at_op("@") and self._funcref_ahead():
            e = self.primary()
            return A.FuncRefArg(e.name, e.arity)
        if self.at("ident") and self.peek().kind == "op" and self.peek().text in (",", ")"):
            return A.FuncVarArg(self.advance().text)
        return _BareExpr(self.expr())

    def _funcref_ahead(self) -> bool:
        return self.peek(4).kind == "op" and self.peek(4).text in (",", ")")

    def located_expr(self):
        role = self.expect("role").text
        self.expect_op(".")
        if self.at_op("("):
            self.open_("(")
            e = self.expr()
            self.close(")")
            return role, e
        return role, self.expr()

    # -- expressions (lowest to highest precedence)
    def _binop_here(self, ops) -> bool:
        t = self.tok
        if t.kind == "op" and t.text in ops or (t.kind == "kw" and t.text in ops):
            return not (t.nl_before and self.depth == 0)
        return False

    def expr(self):
        left = self.relational()
        while self._binop_here(("==", "!=")):
            op = self.advance().text
            left = A.BinOp(op, left, self.relational())
        return left

    def relational(self):
        left = self.concat()
        while self._binop_here(("<", "<=", ">", ">=")):
            op = self.advance().text
            left = A.BinOp(op, left, self.concat())
        return left

    def concat(self):
        left = self.additive()
        if self._binop_here(("<>",)):
            self.advance()
            return A.BinOp("<>", left, self.concat())
        return left

    def additive(self):
        left = self.multiplicative()
        while self._binop_here(("+", "-")):
            op = self.advance().text
            left = A.BinOp(op, left, self.multiplicative())
        return left

    def multiplicative(self):
        left = self.unary()
        while self._binop_here(("*", "/", "rem")):
            op = self.advance().text
            left = A.BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.at_op("-"):
            self.advance()
            inner = self.unary()
            if isinstance(inner, A.Lit) and type(inner.value) is int:
                return A.Lit(-inner.value)
            return A.Neg(inner)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "int":
            self.advance()
            return A.Lit(int(t.text))
        if t.kind == "string":
            self.advance()
            return A.Lit(_unescape(t.text))
        if t.kind == "atom":
            self.advance()
            return A.Lit(Atom(t.text[1:]))
        if t.kind == "kw" and t.text in ("nil", "true", "false"):
            self.advance()
            return A.Lit({"nil": None, "true": True, "false": False}[t.text])
        if t.kind == "ident":
            self.advance()
            if self.at_op("(") and not self.tok.nl_before:
                self.open_("(")
                args = []
                if not self.at_op(")"):
                    args.append(self.expr())
                    while self.at_op(","):
                        self.advance()
                        args.append(self.expr())
                self.close(")")
                return A.LocalCall(t.text, tuple(args))
            return A.Var(t.text)
        if self.at_op("@"):
            self.advance()
            name = self.expect("ident").text
            self.expect_op("/")
            arity = int(self.expect("int").text)
            return A.FuncRefExpr(name, arity)
        if self.at_op("{"):
            return A.TupleExpr(tuple(self._seq("{", "}", self.expr)))
        if self.at_op("["):
            return A.ListExpr(tuple(self._seq("[", "]", self.expr)))
        if self.at_op("("):
            self.open_("(")
            e = self.expr()
            self.close(")")
            return e
        self.fail("expected an expression", "literal, variable, call or bracket")

    def _seq(self, open_: str, close: str, item) -> list:
        self.open_(open_)
        out = []
        if not self.at_op(close):
            out.append(item())
            while self.at_op(","):
                self.advance()
                out.append(item())
        self.close(close)
        return out

    # -- patterns
    def pattern(self):
        t = self.tok
        if t.kind == "ident":
            self.advance()
            return A.PWild() if t.text == "_" else A.PVar(t.text)
        if self.at_op("^"):
            self.advance()
            return A.PPin(self.expect("ident").text)
        if self.at_op("{"):
            return A.PTuple(tuple(self._seq("{", "}", self.pattern)))
        if self.at_op("["):
            return A.PList(tuple(self._seq("[", "]", self.pattern)))
        if self.at_op("-") and self.peek().kind == "int":
            self.advance()
            return A.PLit(-int(self.advance().text))
        if t.kind in ("int", "string", "atom") or (t.kind == "kw" and t.text in ("nil", "true", "false")):
            return A.PLit(self.primary().value)
        self.fail("expected a pattern", "variable, ^pin, _, literal, tuple or list")


# ------------------------------------------------------------- resolution


def _resolve_arg(a, fnames: set, span):
    if isinstance(a, _BareExpr):
        raise ChorSyntaxError("arguments of choreography calls must be located (Role.expr) "
                              "or function values", span)
    return a


def _local_call_from(raw: _RawCall, role: str):
    args = []
    for a in raw.args:
        if isinstance(a, _BareExpr):
            args.append(a.expr)
        elif isinstance(a, A.LocatedArg):
            if a.role != role:
                raise ChorSyntaxError(
                    f"argument located at {a.role} inside an expression located at {role}", raw.span)
            args.append(a.expr)
        elif isinstance(a, A.FuncVarArg):
            args.append(A.Var(a.name))
        else:
            args.append(A.FuncRefExpr(a.name, a.arity))
    if raw.indirect:
        raise ChorSyntaxError(f"{raw.fname} is not a function parameter here", raw.span)
    return A.LocalCall(raw.fname, tuple(args))


def _resolve_stmts(stmts, fnames: set, fparams: set) -> tuple:
    out = []
    for s in stmts:
        out.append(_resolve_stmt(s, fnames, fparams))
    return tuple(out)


def _as_call(raw: _RawCall, fnames: set, fparams: set) -> A.Call:
    return A.Call(raw.fname, tuple(_resolve_arg(a, fnames, raw.span) for a in raw.args),
                  raw.indirect, raw.span)


def _is_chor_call(raw: _RawCall, fnames: set, fparams: set) -> bool:
    if raw.indirect:
        return True
    return (raw.fname, len(raw.args)) in fnames


def _resolve_stmt(s, fnames: set, fparams: set):
    if isinstance(s, _RawCall):
        if not _is_chor_call(s, fnames, fparams):
            raise ChorSyntaxError(f"undefined choreography function {s.fname}/{len(s.args)}", s.span)
        return _as_call(s, fnames, fparams)
    if isinstance(s, A.If):
        return replace(s, then=_resolve_stmts(s.then, fnames, fparams),
                       else_=_resolve_stmts(s.else_, fnames, fparams))
    if isinstance(s, A.Checkpoint):
        return replace(s, body=_resolve_stmts(s.body, fnames, fparams),
                       rescue=_resolve_stmts(s.rescue, fnames, fparams))
    if isinstance(s, A.With):
        rhs = s.rhs
        if isinstance(rhs, _RawCall):
            rhs = (_as_call(rhs, fnames, fparams) if _is_chor_call(rhs, fnames, fparams)
                   else _local_call_from(rhs, s.role))
        return replace(s, rhs=rhs, rest=_resolve_stmts(s.rest, fnames, fparams))
    return s


# -------------------------------------------------------------- validation


def _roles_in(s) -> list:
    if isinstance(s, A.Delivery):
        return [(s.sender, s.span), (s.receiver, s.span)]
    if isinstance(s, A.If):
        return [(s.decider, s.span)] + [(r, s.span) for r in (s.notify or ())]
    if isinstance(s, (A.With, A.LocalExpr)):
        return [(s.role, s.span)]
    if isinstance(s, A.Call):
        return [(a.role, s.span) for a in s.args if isinstance(a, A.LocatedArg)]
    return []


def _irrefutable(p) -> bool:
    return p is None or isinstance(p, (A.PVar, A.PWild))


def _projected_params(f: A.ChorFunction, role: str) -> list:
    return [p.pattern if isinstance(p, A.Located) and p.role == role else None
            for p in f.params]


def validate(prog: A.ChorProgram) -> None:
    seen = set()
    for r in prog.roles:
        if r in seen:
            raise ChorSyntaxError(f"duplicate role {r}")
        seen.add(r)
    runs = [f for f in prog.functions if f.name == "run"]
    if len(runs) != 1:
        span = runs[1].span if runs else None
        raise ChorSyntaxError(
            "a choreography must define exactly one function named run"
            + ("" if runs else ": missing run"), span)
    for f in prog.functions:
        for p in f.params:
            if isinstance(p, A.Located) and p.role not in seen:
                raise ChorSyntaxError(f"unknown role {p.role} in parameters of {f.name}", f.span)
        for s in A.iter_statements(f.body):
            for role, span in _roles_in(s):
                if role not in seen:
                    raise ChorSyntaxError(f"unknown role {role}", span)
            if isinstance(s, A.Delivery) and s.sender == s.receiver:
                raise ChorSyntaxError(f"{s.sender} cannot send to itself", s.span)
    # overloads must stay distinguishable after projection
    groups: dict = {}
    for f in prog.functions:
        groups.setdefault((f.name, f.arity), []).append(f)
    for (name, arity), clauses in groups.items():
        for i, f in enumerate(clauses):
            for g in clauses[i + 1:]:
                for role in prog.roles:
                    if all(_irrefutable(p) for p in _projected_params(f, role)) and \
                            all(_irrefutable(p) for p in _projected_params(g, role)):
                        raise ChorSyntaxError(
                            f"clauses of {name}/{arity} are indistinguishable after "
                            f"projection for {role}", g.span)


def parse(source: str, file: str = "<input>") -> A.ChorProgram:
    """Parse a ``defchor`` source into a validated :class:`ChorProgram`."""
    p = _Parser(source, file)
    prog = p.program()
    fnames = {(f.name, f.arity) for f in prog.functions}
    funcs = []
    for f in prog.functions:
        fparams = {x.name for x in f.params if isinstance(x, A.FuncParam)}
        funcs.append(replace(f, body=_resolve_stmts(f.body, fnames, fparams)))
    prog.functions = tuple(funcs)
    validate(prog)
    return prog


def parse_file(path) -> A.ChorProgram:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))


# ---------------------------------------------------------------- impl files


def _impl_clause_fn(table: ImplTable, clauses: list, name: str):
    def fn(*args):
        for params, body in clauses:
            env: dict = {}
            ok = True
            for p, v in zip(params, args):
                got = match_pattern(p, v, env)
                if got is None:
                    ok = False
                    break
                env.update(got)
            if ok:
                return eval_expr(body, env, table)
        raise Crash(f"no clause of {name}/{len(args)} matches "
                    + ", ".join(format_value(a) for a in args))
    return fn


def parse_impls(source: str, file: str = "<impl>", registry: ImplRegistry | None = None) -> ImplRegistry:
    """Parse ``defimpl Role do def f(x) do expr end ... end`` blocks."""
    p = _Parser(source, file)
    reg = registry or ImplRegistry()
    while not p.at("eof"):
        p.expect_kw("defimpl")
        role = p.expect("role").text
        p.expect_kw("do")
        table = reg.table(role)
        defs: dict = {}
        while p.at_kw("def"):
            p.advance()
            name = p.expect("ident").text
            params = p._seq("(", ")", p.pattern)
            p.expect_kw("do")
            body = p.expr()
            p.expect_kw("end")
            defs.setdefault((name, len(params)), []).append((tuple(params), body))
        p.expect_kw("end")
        for (name, arity), clauses in defs.items():
            table.define(name, arity, _impl_clause_fn(table, clauses, name))
    return reg


def parse_impl_file(path, registry: ImplRegistry | None = None) -> ImplRegistry:
    with open(path, encoding="utf-8") as fh:
        return parse_impls(fh.read(), str(path), registry)


def parse_value(text: str):
    """Parse a literal value (used for CLI ``--args``)."""
    p = _Parser(text, "<args>")
    e = p.expr()
    if not p.at("eof"):
        p.fail("trailing input after value", "end of input")
    return eval_expr(e, {}, None)
