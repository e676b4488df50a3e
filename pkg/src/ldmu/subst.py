"""Typed substitutions between variable contexts."""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import Signature, SimpleType, TypeError_, VarContext
from .terms import Term, Var, free_vars, infer_type, subst_free


@dataclass(frozen=True)
class Substitution:
    """Maps each variable of ``domain`` to a term over ``target``.

    ``range_ctx`` is the restriction of ``target`` to variables actually
    free in some binding; a substitution is grounding when that is empty.
    """

    domain: VarContext
    bindings: dict[str, Term]
    target: VarContext

    @staticmethod
    def identity(ctx: VarContext) -> Substitution:
        return Substitution(ctx, {n: Var(n) for n in ctx.names()}, ctx)

    @staticmethod
    def of(domain: VarContext, bindings: dict[str, Term], target: VarContext) -> Substitution:
        full = {n: bindings.get(n, Var(n)) for n in domain.names()}
        return Substitution(domain, full, target)

    def check(self, sig: Signature) -> None:
        for name, ty in self.domain.vars:
            t = self.bindings.get(name)
            if t is None:
                raise TypeError_(f"substitution misses domain variable {name!r}")
            actual = infer_type(sig, self.target, t)
            if actual != ty:
                raise TypeError_(
                    f"binding for {name!r} has type {actual}, expected {ty}"
                )

    def range_ctx(self) -> VarContext:
        used: set[str] = set()
        for t in self.bindings.values():
            used |= free_vars(t)
        return VarContext(tuple((n, ty) for n, ty in self.target.vars if n in used))

    def is_grounding(self) -> bool:
        return len(self.range_ctx()) == 0

    def apply(self, t: Term) -> Term:
        extra = free_vars(t) - set(self.domain.names())
        if extra:
            raise TypeError_(f"term mentions variables outside the domain: {sorted(extra)}")
        return subst_free(t, self.bindings)

    def then(self, other: Substitution) -> Substitution:
        """Composition: apply self first, then other."""
        return Substitution(
            self.domain,
            {n: other.apply(t) for n, t in self.bindings.items()},
            other.target,
        )

    def __str__(self) -> str:
        from .terms import pretty

        inner = ", ".join(f"{pretty(t)}/{n}" for n, t in sorted(self.bindings.items()))
        return f"[{inner}]"
