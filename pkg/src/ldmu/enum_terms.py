"""Enumeration of ground terms by size, with finiteness analysis.

Ground terms of an arrow type are closed eta-long abstractions, so the
enumerator works relative to a stack of binder types.  A base type is
finite exactly when the reachable part of its constructor graph is
acyclic, which the size analysis detects; the same analysis yields the
maximum ground-term size of a finite type.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .syntax import Arrow, Base, Prop, Signature, SimpleType, arg_types, result_type, type_key
from .terms import Abs, App, Bound, Const, Term, term_size


@dataclass(frozen=True)
class GroundProfile:
    inhabited: bool
    finite: bool
    max_size: int | None  # None when infinite; 0 when uninhabited


@dataclass(frozen=True)
class GroundEnum:
    terms: tuple[Term, ...]
    complete: bool


def _heads(sig: Signature, ty: Base, binders: tuple[SimpleType, ...]):
    """Possible spine heads producing the base type: constants and binder vars."""
    for name, cty in sorted(sig.constants.items()):
        if result_type(cty) == ty and all(
            not isinstance(a, Prop) for a in arg_types(cty)
        ):
            yield Const(name), arg_types(cty)
    for i, bty in enumerate(binders):
        if result_type(bty) == ty:
            yield Bound(i), arg_types(bty)


def _state(ty: SimpleType, binders: tuple[SimpleType, ...]) -> tuple[str, frozenset[str]]:
    return type_key(ty), frozenset(type_key(b) for b in binders)


def ground_profile(sig: Signature, ty: SimpleType,
                   binders: tuple[SimpleType, ...] = ()) -> GroundProfile:
    """Inhabitation and maximal size of ground terms at the given type."""
    inhabited = _inhabited_map(sig, ty, binders)
    if not inhabited.get(_state(ty, binders), False):
        return GroundProfile(False, True, 0)
    memo: dict[tuple[str, frozenset[str]], int | None] = {}
    in_progress: set[tuple[str, frozenset[str]]] = set()

    def max_size(ty: SimpleType, binders: tuple[SimpleType, ...]) -> int | None:
        key = _state(ty, binders)
        if not inhabited.get(key, False):
            return 0
        if key in memo:
            return memo[key]
        if key in in_progress:
            return None  # cycle among inhabited states: unbounded sizes
        in_progress.add(key)
        best: int | None = 0
        if isinstance(ty, Arrow):
            inner = max_size(ty.cod, (ty.dom,) + binders)
            best = None if inner is None else 1 + inner
        else:
            for _, args in _heads(sig, ty, binders):  # type: ignore[arg-type]
                if not all(inhabited.get(_state(a, binders), False) for a in args):
                    continue
                total = 1
                for a in args:
                    sub = max_size(a, binders)
                    if sub is None:
                        total = None
                        break
                    total += sub
                if total is None:
                    best = None
                    break
                if best is not None:
                    best = max(best, total)
        in_progress.discard(key)
        memo[key] = best
        return best

    m = max_size(ty, binders)
    return GroundProfile(True, m is not None, m)


def _inhabited_map(sig: Signature, ty: SimpleType,
                   binders: tuple[SimpleType, ...]) -> dict:
    """Least fixed point of inhabitation over the reachable states."""
    # collect reachable states first
    states: dict[tuple[str, frozenset[str]], tuple[SimpleType, tuple[SimpleType, ...]]] = {}
    work = [(ty, binders)]
    while work:
        t, b = work.pop()
        key = _state(t, b)
        if key in states:
            continue
        states[key] = (t, b)
        if isinstance(t, Arrow):
            work.append((t.cod, (t.dom,) + b))
        elif isinstance(t, Base):
            for _, args in _heads(sig, t, b):
                for a in args:
                    work.append((a, b))
    inhabited = {key: False for key in states}
    changed = True
    while changed:
        changed = False
        for key, (t, b) in states.items():
            if inhabited[key]:
                continue
            if isinstance(t, Arrow):
                ok = inhabited[_state(t.cod, (t.dom,) + b)]
            elif isinstance(t, Base):
                ok = any(
                    all(inhabited[_state(a, b)] for a in args)
                    for _, args in _heads(sig, t, b)
                )
            else:
                ok = False
            if ok:
                inhabited[key] = True
                changed = True
    return inhabited


def infinite_cycle(sig: Signature, base_name: str) -> list[str] | None:
    """A constructor cycle witnessing that a base type is infinite."""
    start = Base(base_name)
    if ground_profile(sig, start).finite:
        return None
    # walk base-type dependencies through inhabited argument positions
    inhabited = _inhabited_map(sig, start, ())

    def deps(name: str) -> list[str]:
        out: list[str] = []
        for _, args in _heads(sig, Base(name), ()):
            if not all(inhabited.get(_state(a, ()), False) for a in args):
                continue
            for a in args:
                for part in _base_parts(a):
                    if part not in out:
                        out.append(part)
        return out

    path: list[str] = []
    seen: set[str] = set()

    def dfs(name: str) -> list[str] | None:
        if name in path:
            return path[path.index(name):] + [name]
        if name in seen:
            return None
        seen.add(name)
        path.append(name)
        for d in deps(name):
            cycle = dfs(d)
            if cycle:
                return cycle
        path.pop()
        return None

    return dfs(base_name)


def _base_parts(ty: SimpleType) -> list[str]:
    if isinstance(ty, Base):
        return [ty.name]
    if isinstance(ty, Arrow):
        return _base_parts(ty.dom) + _base_parts(ty.cod)
    return []


def enumerate_ground(sig: Signature, ty: SimpleType, size_bound: int) -> GroundEnum:
    """All ground terms of the type with size <= size_bound.

    Deterministic size-lexicographic order, no duplicates.  ``complete``
    is set when the full ground-term set lies within the bound.
    """
    memo: dict[tuple[str, tuple[str, ...], int], tuple[Term, ...]] = {}

    def enum(ty: SimpleType, binders: tuple[SimpleType, ...], bound: int) -> tuple[Term, ...]:
        if bound <= 0:
            return ()
        key = (type_key(ty), tuple(type_key(b) for b in binders), bound)
        if key in memo:
            return memo[key]
        out: list[Term] = []
        if isinstance(ty, Arrow):
            for body in enum(ty.cod, (ty.dom,) + binders, bound - 1):
                out.append(Abs(ty.dom, body))
        elif isinstance(ty, Base):
            for head, args in _heads(sig, ty, binders):
                for combo in _arg_combos(args, binders, bound - 1, enum):
                    t: Term = head
                    for a in combo:
                        t = App(t, a)
                    out.append(t)
        memo[key] = tuple(out)
        return memo[key]

    terms = sorted(set(enum(ty, (), size_bound)), key=lambda t: (term_size(t), repr(t)))
    profile = ground_profile(sig, ty)
    complete = profile.finite and (profile.max_size or 0) <= size_bound
    return GroundEnum(tuple(terms), complete)


def _arg_combos(args, binders, budget, enum):
    if not args:
        yield ()
        return
    head_ty = args[0]
    rest = args[1:]
    # every remaining argument needs size at least 1
    for first in enum(head_ty, binders, budget - len(rest)):
        used = term_size(first)
        for combo in _arg_combos(rest, binders, budget - used, enum):
            yield (first,) + combo
