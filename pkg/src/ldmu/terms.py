"""Typed lambda terms in beta-normal eta-long form.

Binding uses de Bruijn indices for bound variables and names for free
(context) variables, so alpha-equivalence is plain structural equality.
The ``hint`` on an abstraction is a printing aid only and never takes
part in comparison or hashing.

All terms handed to the rest of the kernel are kept in beta-normal
eta-long form (see ``normalize``).  Eta-long forms are closed under
substitution followed by beta-normalization, which is why substitution
application does not need type information.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import (
    ALL_PREFIX,
    AND_NAME,
    EQ_PREFIX,
    EX_PREFIX,
    FALSE_NAME,
    IMP_NAME,
    OR_NAME,
    PROP,
    TRUE_NAME,
    Arrow,
    Base,
    Prop,
    Signature,
    SimpleType,
    TypeError_,
    VarContext,
    first_order,
    type_key,
)


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class Var(Term):
    """Free variable, named; its type comes from the enclosing context."""

    name: str


@dataclass(frozen=True)
class Bound(Term):
    """de Bruijn index into the enclosing abstractions."""

    index: int


@dataclass(frozen=True)
class Const(Term):
    name: str


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term


@dataclass(frozen=True)
class Abs(Term):
    ty: SimpleType
    body: Term
    hint: str = field(default="x", compare=False)


def app(fun: Term, *args: Term) -> Term:
    for a in args:
        fun = App(fun, a)
    return fun


def strip_apps(t: Term) -> tuple[Term, tuple[Term, ...]]:
    """Head and spine of an application chain."""
    args: list[Term] = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fun
    args.reverse()
    return t, tuple(args)


def free_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, App):
        return free_vars(t.fun) | free_vars(t.arg)
    if isinstance(t, Abs):
        return free_vars(t.body)
    return set()


def has_const(t: Term, name: str) -> bool:
    if isinstance(t, Const):
        return t.name == name
    if isinstance(t, App):
        return has_const(t.fun, name) or has_const(t.arg, name)
    if isinstance(t, Abs):
        return has_const(t.body, name)
    return False


def term_size(t: Term) -> int:
    """Size measure: constants and variables count 1, applications add,
    abstractions add 1 for the binder."""
    if isinstance(t, App):
        return term_size(t.fun) + term_size(t.arg)
    if isinstance(t, Abs):
        return 1 + term_size(t.body)
    return 1


def shift(t: Term, by: int, cutoff: int = 0) -> Term:
    """Add ``by`` to every de Bruijn index >= cutoff."""
    if isinstance(t, Bound):
        return Bound(t.index + by) if t.index >= cutoff else t
    if isinstance(t, App):
        return App(shift(t.fun, by, cutoff), shift(t.arg, by, cutoff))
    if isinstance(t, Abs):
        return Abs(t.ty, shift(t.body, by, cutoff + 1), t.hint)
    return t


def _subst_bound(t: Term, depth: int, value: Term) -> Term:
    if isinstance(t, Bound):
        if t.index == depth:
            return shift(value, depth)
        if t.index > depth:
            return Bound(t.index - 1)
        return t
    if isinstance(t, App):
        return App(_subst_bound(t.fun, depth, value), _subst_bound(t.arg, depth, value))
    if isinstance(t, Abs):
        return Abs(t.ty, _subst_bound(t.body, depth + 1, value), t.hint)
    return t


def instantiate(abs_term: Term, value: Term) -> Term:
    """Beta-normal result of applying an abstraction to ``value``."""
    if not isinstance(abs_term, Abs):
        raise TypeError_("instantiate expects an abstraction")
    return beta_normalize(_subst_bound(abs_term.body, 0, value))


def subst_free(t: Term, bindings: dict[str, Term]) -> Term:
    """Replace named free variables, then beta-normalize.

    The replacement terms may not contain loose bound indices, so no
    shifting is needed when pushing under binders.
    """
    def go(t: Term) -> Term:
        if isinstance(t, Var):
            return bindings.get(t.name, t)
        if isinstance(t, App):
            return App(go(t.fun), go(t.arg))
        if isinstance(t, Abs):
            return Abs(t.ty, go(t.body), t.hint)
        return t

    return beta_normalize(go(t))


def beta_normalize(t: Term) -> Term:
    """Full beta-normalization; terminates on well-typed terms."""
    if isinstance(t, App):
        fun = beta_normalize(t.fun)
        arg = beta_normalize(t.arg)
        if isinstance(fun, Abs):
            return beta_normalize(_subst_bound(fun.body, 0, arg))
        return App(fun, arg)
    if isinstance(t, Abs):
        return Abs(t.ty, beta_normalize(t.body), t.hint)
    return t


# ---------------------------------------------------------------------------
# Typing


def infer_type(
    sig: Signature,
    ctx: VarContext,
    t: Term,
    binders: tuple[SimpleType, ...] = (),
) -> SimpleType:
    """The unique type of ``t`` over ``ctx``; raises TypeError_ otherwise.

    ``binders`` holds the types of enclosing abstraction binders,
    innermost first.
    """
    if isinstance(t, Var):
        ty = ctx.type_of(t.name)
        if ty is None:
            raise TypeError_(f"unbound variable {t.name!r}")
        return ty
    if isinstance(t, Bound):
        if t.index >= len(binders):
            raise TypeError_(f"loose bound index {t.index}")
        return binders[t.index]
    if isinstance(t, Const):
        ty = sig.type_of(t.name)
        if ty is None:
            raise TypeError_(f"unbound constant {t.name!r}")
        return ty
    if isinstance(t, App):
        fun_ty = infer_type(sig, ctx, t.fun, binders)
        arg_ty = infer_type(sig, ctx, t.arg, binders)
        if not isinstance(fun_ty, Arrow):
            raise TypeError_(f"application head has non-arrow type {fun_ty}")
        if fun_ty.dom != arg_ty:
            raise TypeError_(
                f"application type mismatch: expected {fun_ty.dom}, got {arg_ty}"
            )
        return fun_ty.cod
    assert isinstance(t, Abs)
    body_ty = infer_type(sig, ctx, t.body, (t.ty,) + binders)
    return Arrow(t.ty, body_ty)


def _eta_long(sig: Signature, ctx: VarContext, t: Term, ty: SimpleType,
              binders: tuple[SimpleType, ...]) -> Term:
    # t is beta-normal; produce the eta-long form at the given type.
    if isinstance(ty, Arrow):
        if isinstance(t, Abs):
            return Abs(t.ty, _eta_long(sig, ctx, t.body, ty.cod, (t.ty,) + binders), t.hint)
        # t is neutral, so applying it to Bound(0) keeps it beta-normal.
        body = App(shift(t, 1), Bound(0))
        return Abs(ty.dom, _eta_long(sig, ctx, body, ty.cod, (ty.dom,) + binders))
    head, args = strip_apps(t)
    head_ty = infer_type(sig, ctx, head, binders)
    out = head
    for a in args:
        assert isinstance(head_ty, Arrow)
        out = App(out, _eta_long(sig, ctx, a, head_ty.dom, binders))
        head_ty = head_ty.cod
    return out


def normalize(sig: Signature, ctx: VarContext, t: Term) -> Term:
    """Beta-normal eta-long form of a well-typed term."""
    nf = beta_normalize(t)
    return _eta_long(sig, ctx, nf, infer_type(sig, ctx, nf), ())


def is_ground(t: Term) -> bool:
    return not free_vars(t)


# ---------------------------------------------------------------------------
# Formula constructors and views
#
# Formulas are just terms of type o.  The helpers below build and
# destruct the standard connective shapes.

TRUE = Const(TRUE_NAME)
FALSE = Const(FALSE_NAME)


def conj(a: Term, b: Term) -> Term:
    return app(Const(AND_NAME), a, b)


def disj(a: Term, b: Term) -> Term:
    return app(Const(OR_NAME), a, b)


def implies(a: Term, b: Term) -> Term:
    return app(Const(IMP_NAME), a, b)


def conj_all(parts: list[Term]) -> Term:
    """Right-nested conjunction; the empty conjunction is true."""
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = conj(p, out)
    return out


def disj_all(parts: list[Term]) -> Term:
    """Right-nested disjunction; the empty disjunction is false."""
    if not parts:
        return FALSE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = disj(p, out)
    return out


def forall(name: str, ty: SimpleType, body: Term) -> Term:
    """Quantified formula from a body in which ``Var(name)`` is free."""
    return App(Const(ALL_PREFIX + type_key(ty)), bind_var(name, ty, body))


def exists(name: str, ty: SimpleType, body: Term) -> Term:
    return App(Const(EX_PREFIX + type_key(ty)), bind_var(name, ty, body))


def eq_atom(sig: Signature, ctx: VarContext, a: Term, b: Term,
            binders: tuple[SimpleType, ...] = ()) -> Term:
    ty = infer_type(sig, ctx, a, binders)
    if not first_order(ty):
        raise TypeError_(f"equality requires a first-order type, got {ty}")
    return app(eq_const(ty), a, b)


def eq_const(ty: SimpleType) -> Const:
    return Const(EQ_PREFIX + type_key(ty))


def bind_var(name: str, ty: SimpleType, body: Term, hint: str | None = None) -> Abs:
    """Abstract the free variable ``name`` out of ``body``."""
    def go(t: Term, depth: int) -> Term:
        if isinstance(t, Var):
            return Bound(depth) if t.name == name else t
        if isinstance(t, App):
            return App(go(t.fun, depth), go(t.arg, depth))
        if isinstance(t, Abs):
            return Abs(t.ty, go(t.body, depth + 1), t.hint)
        return t

    return Abs(ty, go(body, 0), hint or name)


@dataclass(frozen=True)
class ConnView:
    """Shape of a formula: one of true, false, and, or, imp, all, ex, atom."""

    kind: str
    parts: tuple[Term, ...] = ()
    quant_ty: SimpleType | None = None


def view(f: Term) -> ConnView:
    head, args = strip_apps(f)
    if isinstance(head, Const):
        name = head.name
        if name == TRUE_NAME and not args:
            return ConnView("true")
        if name == FALSE_NAME and not args:
            return ConnView("false")
        if name in (AND_NAME, OR_NAME, IMP_NAME) and len(args) == 2:
            kind = {AND_NAME: "and", OR_NAME: "or", IMP_NAME: "imp"}[name]
            return ConnView(kind, args)
        if name.startswith(ALL_PREFIX) and len(args) == 1:
            body = args[0]
            assert isinstance(body, Abs)
            return ConnView("all", (body,), body.ty)
        if name.startswith(EX_PREFIX) and len(args) == 1:
            body = args[0]
            assert isinstance(body, Abs)
            return ConnView("ex", (body,), body.ty)
    return ConnView("atom")


def atom_head(f: Term) -> str | None:
    """Predicate name of an atomic formula, or None if not an atom."""
    if view(f).kind != "atom":
        return None
    head, _ = strip_apps(f)
    if isinstance(head, Const):
        return head.name
    return None


LOGICAL_VIEW_KINDS = ("true", "false", "and", "or", "imp", "all", "ex")


# ---------------------------------------------------------------------------
# Printing


def _fresh_for(hint: str, used: set[str]) -> str:
    if hint not in used:
        return hint
    i = 1
    while f"{hint}{i}" in used:
        i += 1
    return f"{hint}{i}"


def pretty(t: Term, names: tuple[str, ...] = (), prec: int = 0) -> str:
    """Readable rendering; names holds binder names, innermost first.

    Precedence levels: 0 body, 1 imp-left/or arg, 2 and arg, 3 application
    argument.
    """
    v = view(t) if names is not None else ConnView("atom")
    if v.kind == "true":
        return "true"
    if v.kind == "false":
        return "false"
    if v.kind in ("and", "or", "imp"):
        sym = {"and": "/\\", "or": "\\/", "imp": "=>"}[v.kind]
        lp, rp, here = {"and": (2, 1, 1), "or": (1, 0, 0), "imp": (1, 0, 0)}[v.kind]
        a = pretty(v.parts[0], names, lp + 1 if v.kind != "and" else 2)
        b = pretty(v.parts[1], names, rp)
        s = f"{a} {sym} {b}"
        return f"({s})" if prec > here else s
    if v.kind in ("all", "ex"):
        body = v.parts[0]
        assert isinstance(body, Abs)
        used = set(names) | free_vars(t)
        name = _fresh_for(body.hint, used)
        word = "forall" if v.kind == "all" else "exists"
        s = f"{word} {name}:{body.ty}, {pretty(body.body, (name,) + names, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Bound):
        if t.index < len(names):
            return names[t.index]
        return f"#{t.index}"
    if isinstance(t, Const):
        if t.name.startswith(EQ_PREFIX):
            return "eq"
        return t.name
    if isinstance(t, App):
        head, args = strip_apps(t)
        parts = [pretty(head, names, 3)] + [pretty(a, names, 3) for a in args]
        s = " ".join(parts)
        return f"({s})" if prec >= 3 else s
    assert isinstance(t, Abs)
    used = set(names) | free_vars(t)
    name = _fresh_for(t.hint, used)
    s = f"fun {name}:{t.ty} => {pretty(t.body, (name,) + names, 0)}"
    return f"({s})" if prec > 0 else s
