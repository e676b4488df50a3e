"""Concrete syntax: script files, proof-tree files and ground-derivation
files.

Script grammar (declarations end with a period)::

    kind <name> type.
    type <name> <type-expr>.
    define fix|ind <p> : <type-expr> [by <head> := <body> ; ...].
    measure <p> strict.
    measure <p> size <argIndex> [weight <w>] [base <b>].
    theorem <name> : <formula>.  proof file "<path>". | proof auto <depth>.

Formulas use ``true``, ``false``, ``/\\``, ``\\/``, ``=>``,
``forall x:T,`` and ``exists x:T,``; identifiers starting with an upper
case letter are clause variables inside define blocks.  ``#`` starts a
line comment.

Proof trees and ground derivations are parenthesized records; terms in
them are s-expressions like ``(s z)``, ``(fun (x nat) ...)``,
``(forall (x nat) ...)`` and ``(eqt nat a b)`` for a type-annotated
equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .definitions import Clause, DefinitionSet, FIX, IND
from .stratification import LevelMeasure, MeasureEntry
from .syntax import (
    Arrow,
    Base,
    LdmuError,
    PROP,
    Prop,
    Signature,
    SimpleType,
    VarContext,
    arg_types,
    first_order,
    type_key,
)
from .terms import (
    Abs,
    App,
    Bound,
    Const,
    FALSE,
    TRUE,
    Term,
    Var,
    app,
    bind_var,
    conj,
    disj,
    eq_const,
    exists,
    forall,
    implies,
    infer_type,
    normalize,
    strip_apps,
    view,
)
from .sequents import ProofTree


class ParseError(LdmuError):
    def __init__(self, msg: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {msg}")


# ---------------------------------------------------------------------------
# Tokenizer


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | string | punct | eof
    text: str
    line: int
    col: int


PUNCT = ("->", ":=", "=>", "/\\", "\\/", ".", ":", ";", ",", "(", ")")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            tokens.append(Token("string", text[i + 1:j], line, col))
            col += j - i + 1
            i = j + 1
            continue
        matched = None
        for p in PUNCT:
            if text.startswith(p, i):
                matched = p
                break
        if matched:
            tokens.append(Token("punct", matched, line, col))
            i += len(matched)
            col += len(matched)
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            tokens.append(Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {tok.text!r}", tok.line, tok.col)
        return self.next()

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def error(self, msg: str):
        tok = self.peek()
        raise ParseError(msg, tok.line, tok.col)


KEYWORDS = {"kind", "type", "define", "fix", "ind", "by", "measure", "strict",
            "size", "weight", "base", "theorem", "proof", "file", "auto",
            "true", "false", "forall", "exists"}


# ---------------------------------------------------------------------------
# Script representation


@dataclass
class DefineBlock:
    kind: str  # fix | ind
    pred: str
    ty: SimpleType
    clauses: list[tuple[VarContext, Term, Term]]  # vars, head, body


@dataclass
class TheoremItem:
    name: str
    statement: Term
    proof_kind: str  # "file" | "auto"
    proof_arg: str | int


@dataclass
class Script:
    kinds: list[str] = field(default_factory=list)
    consts: list[tuple[str, SimpleType]] = field(default_factory=list)
    defines: list[DefineBlock] = field(default_factory=list)
    measures: list[tuple[str, MeasureEntry]] = field(default_factory=list)
    theorems: list[TheoremItem] = field(default_factory=list)

    def signature(self) -> Signature:
        sig = Signature()
        for name, ty in self.consts:
            sig.declare(name, ty)
        return sig

    def definitions(self, sig: Signature | None = None) -> DefinitionSet:
        sig = sig or self.signature()
        defs = DefinitionSet(sig)
        for block in self.defines:
            defs.declare_predicate(block.pred, block.kind)
            for vars_, head, body in block.clauses:
                defs.add_clause(Clause.make(sig, block.kind, vars_, head, body))
        return defs

    def measure(self) -> LevelMeasure:
        m = LevelMeasure()
        for pred, entry in self.measures:
            m.declare(pred, entry)
        return m

    def __eq__(self, other) -> bool:
        if not isinstance(other, Script):
            return NotImplemented
        return (self.kinds == other.kinds and self.consts == other.consts
                and [(b.kind, b.pred, b.ty, b.clauses) for b in self.defines]
                == [(b.kind, b.pred, b.ty, b.clauses) for b in other.defines]
                and self.measures == other.measures
                and [(t.name, t.statement, t.proof_kind, t.proof_arg) for t in self.theorems]
                == [(t.name, t.statement, t.proof_kind, t.proof_arg) for t in other.theorems])


# ---------------------------------------------------------------------------
# Parsing scripts


class _ScriptParser:
    def __init__(self, text: str):
        self.ts = TokenStream(tokenize(text))
        self.script = Script()
        self.sig = Signature()
        self.kind_names: set[str] = set()

    def parse(self) -> Script:
        while not self.ts.at("eof"):
            tok = self.ts.peek()
            if tok.kind != "ident":
                self.ts.error("expected a declaration")
            if tok.text == "kind":
                self.kind_decl()
            elif tok.text == "type":
                self.const_decl()
            elif tok.text == "define":
                self.define_block()
            elif tok.text == "measure":
                self.measure_decl()
            elif tok.text == "theorem":
                self.theorem_decl()
            else:
                self.ts.error(f"unknown declaration {tok.text!r}")
        return self.script

    def ident(self) -> str:
        return self.ts.expect("ident").text

    def period(self) -> None:
        self.ts.expect("punct", ".")

    def kind_decl(self) -> None:
        self.ts.next()
        name = self.ident()
        self.ts.expect("ident", "type")
        self.period()
        if name in self.kind_names or name == "o":
            self.ts.error(f"type {name!r} already declared")
        self.kind_names.add(name)
        self.script.kinds.append(name)

    def type_expr(self) -> SimpleType:
        left = self.type_atom()
        if self.ts.at("punct", "->"):
            self.ts.next()
            return Arrow(left, self.type_expr())
        return left

    def type_atom(self) -> SimpleType:
        if self.ts.at("punct", "("):
            self.ts.next()
            ty = self.type_expr()
            self.ts.expect("punct", ")")
            return ty
        tok = self.ts.expect("ident")
        if tok.text == "o":
            return PROP
        if tok.text not in self.kind_names:
            raise ParseError(f"unknown type {tok.text!r}", tok.line, tok.col)
        return Base(tok.text)

    def const_decl(self) -> None:
        self.ts.next()
        tok = self.ts.expect("ident")
        name = tok.text
        ty = self.type_expr()
        self.period()
        if name[0].isupper():
            raise ParseError("constant names must start lower case", tok.line, tok.col)
        try:
            self.sig.declare(name, ty)
        except LdmuError as e:
            raise ParseError(str(e), tok.line, tok.col) from None
        self.script.consts.append((name, ty))

    def define_block(self) -> None:
        self.ts.next()
        kind_tok = self.ts.expect("ident")
        if kind_tok.text not in ("fix", "ind"):
            raise ParseError("define needs 'fix' or 'ind'", kind_tok.line, kind_tok.col)
        kind = FIX if kind_tok.text == "fix" else IND
        pred_tok = self.ts.expect("ident")
        pred = pred_tok.text
        self.ts.expect("punct", ":")
        ty = self.type_expr()
        try:
            self.sig.declare(pred, ty)
        except LdmuError as e:
            raise ParseError(str(e), pred_tok.line, pred_tok.col) from None
        self.script.consts.append((pred, ty))
        clauses: list[tuple[VarContext, Term, Term]] = []
        if self.ts.at("ident", "by"):
            self.ts.next()
            while True:
                clauses.append(self.clause(pred))
                if self.ts.at("punct", ";"):
                    self.ts.next()
                    continue
                break
        self.period()
        self.script.defines.append(DefineBlock(kind, pred, ty, clauses))

    def clause(self, pred: str) -> tuple[VarContext, Term, Term]:
        tok = self.ts.peek()
        elab = _Elaborator(self.sig)
        head_ast = self.formula(120)
        self.ts.expect("punct", ":=")
        body_ast = self.formula(0)
        head = elab.formula(head_ast, ())
        body = elab.formula(body_ast, ())
        vars_ = VarContext(tuple(sorted(elab.clause_vars.items())))
        head_pred, _ = strip_apps(head)
        if not (isinstance(head_pred, Const) and head_pred.name == pred):
            raise ParseError(f"clause head must use predicate {pred!r}", tok.line, tok.col)
        return vars_, head, body

    def measure_decl(self) -> None:
        self.ts.next()
        pred_tok = self.ts.expect("ident")
        if self.ts.at("ident", "strict"):
            self.ts.next()
            entry = MeasureEntry()
        else:
            self.ts.expect("ident", "size")
            idx = int(self.ts.expect("int").text)
            weight, base = 1, 0
            while self.ts.at("ident", "weight") or self.ts.at("ident", "base"):
                which = self.ts.next().text
                val = int(self.ts.expect("int").text)
                if which == "weight":
                    weight = val
                else:
                    base = val
            entry = MeasureEntry(base, ((idx, weight),))
        self.period()
        if any(p == pred_tok.text for p, _ in self.script.measures):
            raise ParseError(f"duplicate measure for {pred_tok.text!r}",
                             pred_tok.line, pred_tok.col)
        self.script.measures.append((pred_tok.text, entry))

    def theorem_decl(self) -> None:
        self.ts.next()
        name = self.ident()
        self.ts.expect("punct", ":")
        tok = self.ts.peek()
        ast = self.formula(0)
        elab = _Elaborator(self.sig, allow_clause_vars=False)
        stmt = elab.formula(ast, ())
        stmt = normalize(self.sig, VarContext(()), stmt)
        self.period()
        self.ts.expect("ident", "proof")
        if self.ts.at("ident", "file"):
            self.ts.next()
            path = self.ts.expect("string").text
            self.period()
            self.script.theorems.append(TheoremItem(name, stmt, "file", path))
        elif self.ts.at("ident", "auto"):
            self.ts.next()
            depth = int(self.ts.expect("int").text)
            self.period()
            self.script.theorems.append(TheoremItem(name, stmt, "auto", depth))
        else:
            self.ts.error("proof must be 'file \"...\"' or 'auto <depth>'")

    # -- formula ASTs: nested tuples ------------------------------------
    #    ("imp"|"or"|"and", a, b) ("quant", word, var, ty, body)
    #    ("atom", ident_token, [term asts])  ("true",) ("false",)
    #    term asts: ("app", ident_token, [term asts])

    def formula(self, prec: int):
        # prec: 0 lowest (=>), 40 (\/), 60 (/\), 120 atom-only
        if prec < 120 and (self.ts.at("ident", "forall") or self.ts.at("ident", "exists")):
            word = self.ts.next().text
            var = self.ident()
            self.ts.expect("punct", ":")
            ty = self.type_expr()
            self.ts.expect("punct", ",")
            body = self.formula(0)
            return ("quant", word, var, ty, body)
        left = self.formula_atom() if prec >= 120 else self.formula_operand(prec)
        return left

    def formula_operand(self, prec: int):
        left = self.formula(60 if prec <= 40 else 120) if prec < 60 else self.formula(120)
        while True:
            if prec <= 0 and self.ts.at("punct", "=>"):
                self.ts.next()
                right = self.formula(0)
                return ("imp", left, right)
            if prec <= 40 and self.ts.at("punct", "\\/"):
                self.ts.next()
                right = self.formula(41 if False else 60)
                left = ("or", left, right)
                continue
            if prec <= 60 and self.ts.at("punct", "/\\"):
                self.ts.next()
                right = self.formula(120)
                left = ("and", left, right)
                continue
            return left

    def formula_atom(self):
        if self.ts.at("punct", "("):
            self.ts.next()
            inner = self.formula(0)
            self.ts.expect("punct", ")")
            return inner
        if self.ts.at("ident", "forall") or self.ts.at("ident", "exists"):
            return self.formula(0)
        if self.ts.at("ident", "true"):
            self.ts.next()
            return ("true",)
        if self.ts.at("ident", "false"):
            self.ts.next()
            return ("false",)
        tok = self.ts.expect("ident")
        args = []
        while self.ts.at("ident") and self.ts.peek().text not in KEYWORDS or self.ts.at("punct", "("):
            args.append(self.term_atom())
        return ("atom", tok, args)

    def term_atom(self):
        if self.ts.at("punct", "("):
            self.ts.next()
            tok = self.ts.expect("ident")
            args = []
            while (self.ts.at("ident") and self.ts.peek().text not in KEYWORDS) or self.ts.at("punct", "("):
                args.append(self.term_atom())
            self.ts.expect("punct", ")")
            return ("app", tok, args)
        tok = self.ts.expect("ident")
        return ("app", tok, [])


class _Elaborator:
    """Expected-type-directed elaboration of formula/term ASTs.

    Upper-case identifiers become clause variables whose types are
    inferred from their argument positions.
    """

    def __init__(self, sig: Signature, allow_clause_vars: bool = True):
        self.sig = sig
        self.allow_clause_vars = allow_clause_vars
        self.clause_vars: dict[str, SimpleType] = {}

    def formula(self, ast, binders: tuple[tuple[str, SimpleType], ...]) -> Term:
        tag = ast[0]
        if tag == "true":
            return TRUE
        if tag == "false":
            return FALSE
        if tag in ("and", "or", "imp"):
            a = self.formula(ast[1], binders)
            b = self.formula(ast[2], binders)
            return {"and": conj, "or": disj, "imp": implies}[tag](a, b)
        if tag == "quant":
            _, word, var, ty, body = ast
            if not first_order(ty):
                raise LdmuError(f"quantified type {ty} must be first-order")
            inner = self.formula(body, ((var, ty),) + binders)
            make = forall if word == "forall" else exists
            return make(var, ty, inner)
        assert tag == "atom"
        term, ty = self.term(("app", ast[1], ast[2]), PROP, binders)
        return term

    def term(self, ast, expected: SimpleType | None,
             binders) -> tuple[Term, SimpleType | None]:
        _, tok, args = ast
        name = tok.text
        # equality is type-indexed: infer the index from either argument
        if name == "eq":
            if len(args) != 2:
                raise ParseError("eq expects exactly two arguments", tok.line, tok.col)
            a, ty = self.term(args[0], None, binders)
            if ty is None:
                b, ty = self.term(args[1], None, binders)
                if ty is None:
                    raise ParseError("cannot infer the type at this eq",
                                     tok.line, tok.col)
                a, _ = self.term(args[0], ty, binders)
            else:
                b, _ = self.term(args[1], ty, binders)
            return app(eq_const(ty), a, b), PROP
        head, head_ty = self.resolve(tok, binders)
        if head_ty is None:
            # a clause variable of unknown type: only valid unapplied
            if args:
                raise ParseError(f"cannot infer the type of {name!r}", tok.line, tok.col)
            if expected is None:
                return head, None
            self.clause_vars[name] = expected
            return head, expected
        out = head
        ty = head_ty
        for arg_ast in args:
            if not isinstance(ty, Arrow):
                raise ParseError(f"{name!r} is applied to too many arguments",
                                 tok.line, tok.col)
            arg, _ = self.term(arg_ast, ty.dom, binders)
            out = App(out, arg)
            ty = ty.cod
        if expected is not None and ty != expected:
            raise ParseError(f"{name!r} produces {ty}, expected {expected}",
                             tok.line, tok.col)
        return out, ty

    def resolve(self, tok: Token, binders) -> tuple[Term, SimpleType | None]:
        name = tok.text
        for i, (bname, bty) in enumerate(binders):
            if bname == name:
                return Var(name), bty
        const_ty = self.sig.type_of(name)
        if const_ty is not None:
            return Const(name), const_ty
        if name[0].isupper():
            if not self.allow_clause_vars:
                raise ParseError(f"unbound variable {name!r}", tok.line, tok.col)
            if name in self.clause_vars:
                return Var(name), self.clause_vars[name]
            return Var(name), None
        raise ParseError(f"unknown identifier {name!r}", tok.line, tok.col)


def parse_script(text: str) -> Script:
    return _ScriptParser(text).parse()


# ---------------------------------------------------------------------------
# Printing scripts


def print_type(ty: SimpleType) -> str:
    return str(ty)


def print_formula(t: Term, binders: tuple[str, ...] = ()) -> str:
    from .terms import pretty

    return pretty(t, binders)


def print_script(script: Script) -> str:
    lines: list[str] = []
    for k in script.kinds:
        lines.append(f"kind {k} type.")
    defined = {b.pred for b in script.defines}
    for name, ty in script.consts:
        if name in defined:
            continue
        lines.append(f"type {name} {print_type(ty)}.")
    for block in script.defines:
        head = f"define {'fix' if block.kind == FIX else 'ind'} {block.pred} : {print_type(block.ty)}"
        if not block.clauses:
            lines.append(head + ".")
            continue
        rendered = [f"{print_formula(h)} := {print_formula(b)}"
                    for _, h, b in block.clauses]
        lines.append(head + " by\n  " + " ;\n  ".join(rendered) + ".")
    for pred, entry in script.measures:
        if entry.strict:
            lines.append(f"measure {pred} strict.")
        else:
            idx, weight = entry.weights[0]
            extra = ""
            if weight != 1:
                extra += f" weight {weight}"
            if entry.base:
                extra += f" base {entry.base}"
            lines.append(f"measure {pred} size {idx}{extra}.")
    for thm in script.theorems:
        lines.append(f"theorem {thm.name} : {print_formula(thm.statement)}.")
        if thm.proof_kind == "file":
            lines.append(f'proof file "{thm.proof_arg}".')
        else:
            lines.append(f"proof auto {thm.proof_arg}.")
    return "\n".join(lines) + "\n"
