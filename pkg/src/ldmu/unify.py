"""Higher-order pattern matching and unification.

A term is a pattern with respect to a set of match variables when every
occurrence of such a variable is applied to a sequence of distinct
lambda-bound variables.  Within that fragment, matching and unification
are decidable and most general unifiers are unique, which is what makes
the definition-rule premise families finite and canonical.

Terms arrive in beta-normal eta-long form; bound-variable arguments of
a pattern variable therefore show up eta-expanded and are decoded back
to plain indices before the pattern condition is judged.

Anything outside the fragment raises ``NonPatternError`` rather than
returning a wrong or incomplete answer.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import Arrow, LdmuError, Signature, SimpleType, VarContext, arg_types
from .terms import (
    Abs,
    App,
    Bound,
    Const,
    Term,
    Var,
    app,
    beta_normalize,
    free_vars,
    normalize,
    shift,
    strip_apps,
    subst_free,
)


class NonPatternError(LdmuError):
    """Input lies outside the higher-order pattern fragment."""


class MatchFailure(Exception):
    """Internal signal: no match / no unifier (a normal outcome)."""


def decode_bound_arg(t: Term) -> int | None:
    """Index of the bound variable this term is an eta-expansion of.

    Returns None when the term is not (an eta-expansion of) a bound
    variable.  The index is relative to the position of ``t`` itself.
    """
    binders = 0
    body = t
    while isinstance(body, Abs):
        body = body.body
        binders += 1
    head, args = strip_apps(body)
    if not isinstance(head, Bound) or head.index < binders or len(args) != binders:
        return None
    for i, a in enumerate(args):
        if decode_bound_arg(a) != binders - 1 - i:
            return None
    return head.index - binders


def _flex_args(args: tuple[Term, ...]) -> list[int] | None:
    """Decode the spine of a pattern variable; None if outside the fragment."""
    out: list[int] = []
    for a in args:
        idx = decode_bound_arg(a)
        if idx is None or idx in out:
            return None
        out.append(idx)
    return out


def is_pattern(t: Term, ctx: VarContext) -> bool:
    """True iff every ctx-variable occurrence is applied to distinct bound vars."""
    match_vars = set(ctx.names())

    def go(t: Term) -> bool:
        head, args = strip_apps(t)
        if isinstance(head, Var) and head.name in match_vars:
            return _flex_args(args) is not None
        if isinstance(head, Abs):
            # head of a beta-normal spine is an Abs only when args is empty
            return go(head.body)
        return all(go(a) for a in args)

    return go(t)


# ---------------------------------------------------------------------------
# Matching


def pattern_match(
    h: Term,
    match_vars: VarContext,
    a: Term,
    bindings: dict[str, Term] | None = None,
) -> dict[str, Term] | None:
    """The unique bindings with ``h[bindings] == a``, or None.

    Variables of ``a`` are treated as constants.  ``bindings`` may carry
    earlier commitments (for matching several pairs consistently); the
    returned dict extends it.  Raises NonPatternError if ``h`` steps
    outside the pattern fragment.
    """
    acc = dict(bindings) if bindings else {}
    try:
        _match(h, a, 0, set(match_vars.names()), match_vars, acc)
    except MatchFailure:
        return None
    return acc


def _match(h: Term, a: Term, depth: int, mvars: set[str],
           mctx: VarContext, acc: dict[str, Term]) -> None:
    head, args = strip_apps(h)
    if isinstance(head, Var) and head.name in mvars:
        spine = _flex_args(args)
        if spine is None:
            raise NonPatternError(f"variable {head.name!r} applied to non-bound arguments")
        value = _invert(a, {idx: len(spine) - 1 - i for i, idx in enumerate(spine)},
                        prune=None)
        ty = mctx.type_of(head.name)
        assert ty is not None
        for dom in reversed(arg_types(ty)[: len(spine)]):
            value = Abs(dom, value)
        prev = acc.get(head.name)
        if prev is None:
            acc[head.name] = value
        elif prev != value:
            raise MatchFailure
        return
    if isinstance(h, Abs):
        if not isinstance(a, Abs) or h.ty != a.ty:
            raise MatchFailure
        _match(h.body, a.body, depth + 1, mvars, mctx, acc)
        return
    ahead, aargs = strip_apps(a)
    if head != ahead or len(args) != len(aargs):
        raise MatchFailure
    for ha, aa in zip(args, aargs):
        _match(ha, aa, depth, mvars, mctx, acc)


def _invert(t: Term, mapping: dict[int, int], prune, local: int = 0) -> Term:
    """Rewrite outer bound indices through ``mapping``.

    ``prune`` is None for matching (unmapped outer indices fail) or a
    callback(flex_name, spine) -> Term used by unification to prune
    flexible subterms.
    """
    if isinstance(t, Bound):
        if t.index < local:
            return t
        outer = t.index - local
        if outer in mapping:
            return Bound(mapping[outer] + local)
        raise MatchFailure
    if isinstance(t, Abs):
        return Abs(t.ty, _invert(t.body, mapping, prune, local + 1), t.hint)
    if isinstance(t, App):
        head, args = strip_apps(t)
        if prune is not None and isinstance(head, Var):
            handled = prune(head, args, mapping, local)
            if handled is not None:
                return handled
        out = _invert(head, mapping, prune, local)
        for a in args:
            out = App(out, _invert(a, mapping, prune, local))
        return out
    if isinstance(t, Var) and prune is not None:
        handled = prune(t, (), mapping, local)
        if handled is not None:
            return handled
    return t


# ---------------------------------------------------------------------------
# Unification


@dataclass
class Unifier:
    """Most general unifier: total on the unifiable variables.

    ``var_types`` covers every variable free in a binding, including
    fresh ones invented while solving.
    """

    bindings: dict[str, Term]
    var_types: dict[str, SimpleType]

    def restrict(self, names: tuple[str, ...]) -> dict[str, Term]:
        return {n: self.bindings[n] for n in names}

    def range_of(self, names: tuple[str, ...]) -> VarContext:
        used: set[str] = set()
        for n in names:
            used |= free_vars(self.bindings[n])
        return VarContext(tuple(
            (n, self.var_types[n]) for n in sorted(used)
        ))


class _Solver:
    def __init__(self, sig: Signature, ctx: VarContext, unifiable: set[str],
                 prefer: set[str]):
        self.sig = sig
        self.types: dict[str, SimpleType] = dict(ctx.vars)
        self.unifiable = set(unifiable)
        self.prefer = prefer
        self.solution: dict[str, Term] = {}
        self.counter = 0

    def fresh(self, ty: SimpleType) -> str:
        while True:
            name = f"_u{self.counter}"
            self.counter += 1
            if name not in self.types:
                self.types[name] = ty
                self.unifiable.add(name)
                return name

    def resolve(self, t: Term) -> Term:
        if self.solution:
            return beta_normalize(subst_free(t, self.solution))
        return t

    def bind(self, name: str, value: Term) -> None:
        if Var(name) == value:
            return
        one = {name: value}
        self.solution = {n: beta_normalize(subst_free(t, one))
                         for n, t in self.solution.items()}
        self.solution[name] = value

    def unify(self, s: Term, t: Term) -> None:
        s = self.resolve(s)
        t = self.resolve(t)
        if s == t:
            return
        if isinstance(s, Abs) or isinstance(t, Abs):
            if not (isinstance(s, Abs) and isinstance(t, Abs) and s.ty == t.ty):
                raise MatchFailure
            self.unify(s.body, t.body)
            return
        shead, sargs = strip_apps(s)
        thead, targs = strip_apps(t)
        sflex = isinstance(shead, Var) and shead.name in self.unifiable
        tflex = isinstance(thead, Var) and thead.name in self.unifiable
        if sflex and tflex:
            self._flex_flex(shead, sargs, thead, targs)
        elif sflex:
            self._flex_rigid(shead, sargs, t)
        elif tflex:
            self._flex_rigid(thead, targs, s)
        else:
            if shead != thead or len(sargs) != len(targs):
                raise MatchFailure
            for sa, ta in zip(sargs, targs):
                self.unify(sa, ta)

    def _spine(self, head: Var, args: tuple[Term, ...]) -> list[int]:
        spine = _flex_args(args)
        if spine is None:
            raise NonPatternError(
                f"variable {head.name!r} applied to non-distinct or non-bound arguments"
            )
        return spine

    def _abs_over(self, name: str, n_args: int, body: Term) -> Term:
        doms = arg_types(self.types[name])[:n_args]
        for dom in reversed(doms):
            body = Abs(dom, body)
        return body

    def _flex_flex(self, x: Var, xargs: tuple[Term, ...],
                   y: Var, yargs: tuple[Term, ...]) -> None:
        xs = self._spine(x, xargs)
        ys = self._spine(y, yargs)
        if x.name == y.name:
            if xs == ys:
                return
            # keep only the argument positions where both spines agree
            kept = [i for i, (a, b) in enumerate(zip(xs, ys)) if a == b]
            doms = arg_types(self.types[x.name])[: len(xs)]
            z_ty = _chain([doms[i] for i in kept], self.types[x.name], len(xs))
            z = self.fresh(z_ty)
            body = app(Var(z), *[Bound(len(xs) - 1 - i) for i in kept])
            self.bind(x.name, self._abs_over(x.name, len(xs), body))
            return
        # prefer keeping variables from `prefer` (and fewer fresh names)
        if set(xs) <= set(ys) and self._keep_left(x.name, y.name):
            self._project(y.name, ys, x.name, xs)
        elif set(ys) <= set(xs):
            self._project(x.name, xs, y.name, ys)
        elif set(xs) <= set(ys):
            self._project(y.name, ys, x.name, xs)
        else:
            common = [i for i in xs if i in ys]
            xdoms = arg_types(self.types[x.name])[: len(xs)]
            z_ty = _chain([xdoms[xs.index(i)] for i in common], self.types[x.name], len(xs))
            z = self.fresh(z_ty)
            zx = app(Var(z), *[Bound(len(xs) - 1 - xs.index(i)) for i in common])
            zy = app(Var(z), *[Bound(len(ys) - 1 - ys.index(i)) for i in common])
            self.bind(x.name, self._abs_over(x.name, len(xs), zx))
            self.bind(y.name, self._abs_over(y.name, len(ys), zy))

    def _keep_left(self, left: str, right: str) -> bool:
        if (left in self.prefer) != (right in self.prefer):
            return left in self.prefer
        return True

    def _project(self, solved: str, sspine: list[int], kept: str, kspine: list[int]) -> None:
        # solved spine contains every index of the kept spine
        mapping = {idx: len(sspine) - 1 - i for i, idx in enumerate(sspine)}
        body = app(Var(kept), *[Bound(mapping[i]) for i in kspine])
        self.bind(solved, self._abs_over(solved, len(sspine), body))

    def _flex_rigid(self, x: Var, xargs: tuple[Term, ...], r: Term) -> None:
        spine = self._spine(x, xargs)
        mapping = {idx: len(spine) - 1 - i for i, idx in enumerate(spine)}

        def prune(head: Var, args: tuple[Term, ...], mp: dict[int, int], local: int):
            if head.name == x.name:
                raise MatchFailure  # occurs check
            if head.name not in self.unifiable:
                return None
            hspine = self._spine(head, args)
            invertible = [i for i, idx in enumerate(hspine)
                          if idx < local or (idx - local) in mp]
            if len(invertible) == len(hspine):
                return None  # fully invertible, no pruning needed
            doms = arg_types(self.types[head.name])[: len(hspine)]
            z_ty = _chain([doms[i] for i in invertible], self.types[head.name], len(hspine))
            z = self.fresh(z_ty)
            zbody = app(Var(z), *[Bound(len(hspine) - 1 - i) for i in invertible])
            self.bind(head.name, self._abs_over(head.name, len(hspine), zbody))
            new_args = [args[i] for i in invertible]
            out: Term = Var(z)
            for a in new_args:
                out = App(out, _invert(a, mp, prune, local))
            return out

        value = _invert(self.resolve(r), mapping, prune)
        value = self.resolve(value)
        if x.name in free_vars(value):
            raise MatchFailure
        self.bind(x.name, self._abs_over(x.name, len(spine), value))


def _chain(doms: list[SimpleType], flex_ty: SimpleType, n_args: int) -> SimpleType:
    result = flex_ty
    for _ in range(n_args):
        assert isinstance(result, Arrow)
        result = result.cod
    for dom in reversed(doms):
        result = Arrow(dom, result)
    return result


def pattern_unify(
    sig: Signature,
    s: Term,
    t: Term,
    ctx: VarContext,
    unifiable: set[str],
    prefer: set[str] | None = None,
) -> Unifier | None:
    """Most general unifier of two patterns, or None when none exists.

    ``ctx`` types every free variable of both terms; only names in
    ``unifiable`` may be instantiated.  Bindings that merely rename one
    unifiable variable to another keep names in ``prefer`` when there is
    a choice.
    """
    solver = _Solver(sig, ctx, unifiable, prefer or set())
    try:
        solver.unify(s, t)
    except MatchFailure:
        return None
    bindings: dict[str, Term] = {}
    var_types = dict(solver.types)
    ctx_for_norm = VarContext(tuple(var_types.items()))
    for name in sorted(unifiable):
        raw = solver.solution.get(name, Var(name))
        bindings[name] = normalize(sig, ctx_for_norm, raw)
    return Unifier(bindings, var_types)
