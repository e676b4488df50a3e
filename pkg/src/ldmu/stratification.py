"""Level assignments and stratification checking.

Levels of ground atoms come from a checkable measure family: a natural
base per predicate plus natural weights on argument sizes.  The level of
a compound ground formula follows the usual recursion (implication adds
one on the left, quantifiers take the sup over ground instances).

The symbolic checker evaluates clause levels as maxima of linear
expressions over per-variable size variables and decides head >= body by
coefficient dominance.  Sups at quantifiers are resolved exactly for
finite types (substituting the maximal ground size) and become an
unbounded marker for infinite ones.  Anything the family cannot express
is reported inconclusive, never silently accepted; claimed violations
are always backed by a concrete grounding.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field, replace

from .definitions import FIX, IND, Clause, DefinitionSet
from .enum_terms import enumerate_ground, ground_profile
from .syntax import (
    LdmuError,
    Signature,
    SimpleType,
    VarContext,
    arg_types,
    is_predicate_type,
)
from .terms import (
    Abs,
    Const,
    Term,
    Var,
    atom_head,
    free_vars,
    instantiate,
    is_ground,
    pretty,
    strip_apps,
    subst_free,
    term_size,
    view,
)

MAX_SWEEP_GROUNDINGS = 4096


class MeasureError(LdmuError):
    pass


@dataclass(frozen=True)
class MeasureEntry:
    base: int = 0
    weights: tuple[tuple[int, int], ...] = ()  # (argument index, weight)

    @property
    def strict(self) -> bool:
        return not self.weights


@dataclass
class LevelMeasure:
    """Per-predicate level entries; undeclared predicates default to strict."""

    entries: dict[str, MeasureEntry] = field(default_factory=dict)

    def entry(self, pred: str) -> MeasureEntry:
        return self.entries.get(pred, MeasureEntry())

    def strict(self, pred: str) -> bool:
        return self.entry(pred).strict

    def declare(self, pred: str, entry: MeasureEntry) -> None:
        if pred in self.entries:
            raise MeasureError(f"duplicate measure declaration for {pred!r}")
        self.entries[pred] = entry

    def validate(self, sig: Signature) -> None:
        for pred, entry in self.entries.items():
            ty = sig.type_of(pred)
            if ty is None or not is_predicate_type(ty):
                raise MeasureError(f"measure declared for non-predicate {pred!r}")
            n_args = len(arg_types(ty))
            for idx, weight in entry.weights:
                if not (0 <= idx < n_args):
                    raise MeasureError(
                        f"measure for {pred!r} weights argument {idx}, but it has {n_args}"
                    )
                if weight <= 0:
                    raise MeasureError(f"measure weight for {pred!r} must be positive")

    def with_bases(self, bases: dict[str, int]) -> LevelMeasure:
        out = dict(self.entries)
        for pred, base in bases.items():
            prev = out.get(pred, MeasureEntry())
            out[pred] = replace(prev, base=max(prev.base, base))
        return LevelMeasure(out)


def atom_level(atom: Term, m: LevelMeasure) -> int:
    pred = atom_head(atom)
    assert pred is not None
    entry = m.entry(pred)
    _, args = strip_apps(atom)
    return entry.base + sum(w * term_size(args[i]) for i, w in entry.weights)


# ---------------------------------------------------------------------------
# Ground levels


@dataclass(frozen=True)
class LevelValue:
    value: int
    exact: bool


def lvl_ground(sig: Signature, f: Term, m: LevelMeasure, enum_bound: int) -> LevelValue:
    """Level of a ground formula.

    Quantifier sups are taken over the ground terms within
    ``enum_bound``; the result is flagged exact only when every
    enumeration was complete.
    """
    if not is_ground(f):
        raise MeasureError(f"lvl_ground needs a ground formula, got {pretty(f)}")

    def go(f: Term) -> LevelValue:
        v = view(f)
        if v.kind in ("true", "false"):
            return LevelValue(0, True)
        if v.kind in ("and", "or"):
            a, b = go(v.parts[0]), go(v.parts[1])
            return LevelValue(max(a.value, b.value), a.exact and b.exact)
        if v.kind == "imp":
            a, b = go(v.parts[0]), go(v.parts[1])
            return LevelValue(max(a.value + 1, b.value), a.exact and b.exact)
        if v.kind in ("all", "ex"):
            body = v.parts[0]
            assert isinstance(body, Abs) and v.quant_ty is not None
            enum = enumerate_ground(sig, v.quant_ty, enum_bound)
            best = 0
            exact = enum.complete
            for t in enum.terms:
                sub = go(instantiate(body, t))
                best = max(best, sub.value)
                exact = exact and sub.exact
            return LevelValue(best, exact)
        return LevelValue(atom_level(f, m), True)

    return go(f)


# ---------------------------------------------------------------------------
# Symbolic levels


@dataclass(frozen=True)
class LevelExpr:
    """Linear size expression: const + sum of coeff * size(var)."""

    const: int = 0
    coeffs: tuple[tuple[str, int], ...] = ()
    unbounded: bool = False

    def coeff(self, var: str) -> int:
        for name, c in self.coeffs:
            if name == var:
                return c
        return 0

    def add_const(self, k: int) -> LevelExpr:
        return replace(self, const=self.const + k)

    def drop(self, var: str, const_delta: int) -> LevelExpr:
        coeffs = tuple((n, c) for n, c in self.coeffs if n != var)
        return LevelExpr(self.const + const_delta, coeffs, self.unbounded)

    def __str__(self) -> str:
        if self.unbounded:
            return "omega"
        parts = [f"{c}*|{n}|" if c != 1 else f"|{n}|" for n, c in self.coeffs]
        if self.const or not parts:
            parts.append(str(self.const))
        return " + ".join(parts)


def expr_sum(parts: list[LevelExpr]) -> LevelExpr:
    const = sum(p.const for p in parts)
    coeffs: dict[str, int] = {}
    for p in parts:
        for n, c in p.coeffs:
            coeffs[n] = coeffs.get(n, 0) + c
    return LevelExpr(const, tuple(sorted(coeffs.items())),
                     any(p.unbounded for p in parts))


def dominates(head: LevelExpr, body: LevelExpr) -> bool:
    """head >= body under every valuation of size variables >= 1."""
    if head.unbounded:
        return True
    if body.unbounded:
        return False
    names = {n for n, _ in head.coeffs} | {n for n, _ in body.coeffs}
    if any(head.coeff(n) < body.coeff(n) for n in names):
        return False
    head_at_one = head.const + sum(c for _, c in head.coeffs)
    body_at_one = body.const + sum(c for _, c in body.coeffs)
    return head_at_one >= body_at_one


def symbolic_size(t: Term) -> tuple[LevelExpr, bool]:
    """Linear size of a term pattern over its variables.

    The boolean reports exactness: sizes stop being linear in the
    variables once a variable occurrence is applied to arguments, since
    grounding then triggers beta steps that rearrange the term.
    """
    exact = True

    def go(t: Term) -> LevelExpr:
        nonlocal exact
        head, args = strip_apps(t)
        if isinstance(head, Var):
            if args:
                exact = False
            parts = [LevelExpr(0, ((head.name, 1),))]
            parts += [go(a) for a in args]
            return expr_sum(parts)
        if isinstance(head, Abs):
            return go(head.body).add_const(1)
        parts = [LevelExpr(1)]
        parts += [go(a) for a in args]
        return expr_sum(parts)

    return go(t), exact


@dataclass(frozen=True)
class SymbolicLevel:
    branches: tuple[LevelExpr, ...]
    exact: bool


def lvl_symbolic(sig: Signature, f: Term, m: LevelMeasure, ctx: VarContext) -> SymbolicLevel:
    """Max-of-linear upper form of the level over all groundings of ctx.

    Quantified variables in measured positions are resolved through the
    finiteness analysis of their type: finite types contribute their
    maximal ground size, infinite ones force the unbounded marker (their
    size has no finite sup).
    """
    exact = True
    used = set(ctx.names()) | free_vars(f)
    counter = itertools.count()

    def fresh(hint: str) -> str:
        name = hint
        while name in used:
            name = f"{hint}_{next(counter)}"
        used.add(name)
        return name

    def go(f: Term) -> tuple[LevelExpr, ...]:
        nonlocal exact
        v = view(f)
        if v.kind in ("true", "false"):
            return (LevelExpr(0),)
        if v.kind in ("and", "or"):
            return go(v.parts[0]) + go(v.parts[1])
        if v.kind == "imp":
            left = tuple(b.add_const(1) for b in go(v.parts[0]))
            return left + go(v.parts[1])
        if v.kind in ("all", "ex"):
            body = v.parts[0]
            assert isinstance(body, Abs) and v.quant_ty is not None
            profile = ground_profile(sig, v.quant_ty)
            if not profile.inhabited:
                return (LevelExpr(0),)
            name = fresh(body.hint)
            branches = go(instantiate(body, Var(name)))
            out: list[LevelExpr] = []
            for b in branches:
                c = b.coeff(name)
                if c == 0:
                    out.append(b)
                elif profile.finite:
                    assert profile.max_size is not None
                    out.append(b.drop(name, c * profile.max_size))
                else:
                    out.append(LevelExpr(unbounded=True))
            return tuple(out)
        # atom
        pred = atom_head(f)
        assert pred is not None
        entry = m.entry(pred)
        _, args = strip_apps(f)
        parts = [LevelExpr(entry.base)]
        for idx, weight in entry.weights:
            size, ok = symbolic_size(args[idx])
            if not ok:
                exact = False
            parts.append(expr_sum([size] * weight))
        return (expr_sum(parts),)

    branches = go(f)
    return SymbolicLevel(branches, exact)


# ---------------------------------------------------------------------------
# Clause-level verdicts


@dataclass(frozen=True)
class ClauseVerdict:
    clause: Clause
    status: str  # "verified" | "violated" | "inconclusive"
    detail: str
    witness: dict[str, Term] | None = None


def check_ground_stratified(
    sig: Signature,
    defs: DefinitionSet,
    m: LevelMeasure,
    sweep_size: int = 5,
    kinds: tuple[str, ...] = (FIX, IND),
) -> list[ClauseVerdict]:
    """Per-clause decision of lvl(head) >= lvl(body) over all groundings."""
    out = []
    for clause in defs.clauses:
        if clause.kind in kinds:
            out.append(check_clause(sig, defs, clause, m, sweep_size))
    return out


def check_clause(sig: Signature, defs: DefinitionSet, clause: Clause,
                 m: LevelMeasure, sweep_size: int = 5) -> ClauseVerdict:
    head_level = lvl_symbolic(sig, clause.head, m, clause.vars)
    body_level = lvl_symbolic(sig, clause.body, m, clause.vars)
    head = head_level.branches[0]
    if len(head_level.branches) != 1 or not head_level.exact:
        return ClauseVerdict(clause, "inconclusive", "head level is not a linear size expression")
    failing = [b for b in body_level.branches if not dominates(head, b)]
    if not failing:
        if body_level.exact:
            return ClauseVerdict(clause, "verified", f"lvl({pretty(clause.head)}) = {head} dominates the body")
        # inexact body level was still dominated as an over-approximation
        return ClauseVerdict(clause, "verified", f"{head} dominates an over-approximated body level")
    witness = _find_violation(sig, clause, m, sweep_size)
    if witness is not None:
        rho, hl, bl = witness
        shown = ", ".join(f"{pretty(t)}/{n}" for n, t in sorted(rho.items()))
        return ClauseVerdict(clause, "violated",
                             f"grounding [{shown}] gives head level {hl} < body level {bl}",
                             rho)
    inequality = f"{head} >= {failing[0]} fails under some valuation"
    if not body_level.exact:
        return ClauseVerdict(clause, "inconclusive",
                             f"body level approximated and not dominated: {inequality}")
    return ClauseVerdict(clause, "inconclusive",
                         f"symbolic inequality {inequality}, no small grounding realizes it")


def _find_violation(sig: Signature, clause: Clause, m: LevelMeasure,
                    sweep_size: int):
    for rho in _groundings(sig, clause.vars, sweep_size, MAX_SWEEP_GROUNDINGS):
        hl = lvl_ground(sig, subst_free(clause.head, rho), m, sweep_size)
        bl = lvl_ground(sig, subst_free(clause.body, rho), m, sweep_size)
        # body level is a lower bound when inexact, so this is conclusive
        if hl.value < bl.value:
            return rho, hl.value, bl.value
    return None


def _groundings(sig: Signature, ctx: VarContext, size_bound: int, cap: int):
    names = ctx.names()
    pools = []
    for _, ty in ctx.vars:
        pools.append(enumerate_ground(sig, ty, size_bound).terms)
    count = 0
    for combo in itertools.product(*pools):
        if count >= cap:
            return
        count += 1
        yield dict(zip(names, combo))


# ---------------------------------------------------------------------------
# Strict stratification by constraint solving


def _constraint_items(defs: DefinitionSet, body: Term) -> list[tuple[str | None, int]]:
    """Atoms and constants of a body with their implication depths."""
    items: list[tuple[str | None, int]] = []

    def go(f: Term, depth: int) -> None:
        v = view(f)
        if v.kind in ("true", "false"):
            items.append((None, depth))
        elif v.kind in ("and", "or"):
            go(v.parts[0], depth)
            go(v.parts[1], depth)
        elif v.kind == "imp":
            go(v.parts[0], depth + 1)
            go(v.parts[1], depth)
        elif v.kind in ("all", "ex"):
            body = v.parts[0]
            assert isinstance(body, Abs)
            go(body.body, depth)
        else:
            pred = atom_head(f)
            assert pred is not None
            items.append((pred, depth))

    go(body, 0)
    return items


def check_strict(defs: DefinitionSet, clauses: list[Clause] | None = None,
                 floors: dict[str, int] | None = None) -> dict[str, int] | None:
    """Base-only level assignment satisfying every clause, or None.

    Atoms are read as the base of their predicate; implication adds one
    on the left.  Solved by iterative relaxation; a change after the
    node-count round witnesses a positive-weight cycle.
    """
    clauses = defs.clauses if clauses is None else clauses
    constraints: list[tuple[str, list[tuple[str | None, int]]]] = []
    preds: set[str] = set(floors or {})
    for c in clauses:
        items = _constraint_items(defs, c.body)
        constraints.append((c.pred, items))
        preds.add(c.pred)
        preds.update(p for p, _ in items if p is not None)
    values: dict[str, int] = {p: 0 for p in preds}
    values.update(floors or {})
    for round_no in range(len(preds) + 2):
        changed = False
        for pred, items in constraints:
            req = 0
            for q, depth in items:
                req = max(req, (values.get(q, 0) if q else 0) + depth)
            if req > values[pred]:
                values[pred] = req
                changed = True
        if not changed:
            return values
    return None


@dataclass(frozen=True)
class InductiveVerdict:
    pred: str
    accepted: bool
    reason: str


def _reachable_clauses(defs: DefinitionSet, pred: str) -> list[Clause]:
    seen: set[str] = set()
    work = [pred]
    out: list[Clause] = []
    while work:
        p = work.pop()
        if p in seen:
            continue
        seen.add(p)
        for c in defs.clauses_for(p):
            out.append(c)
            for q, _ in _constraint_items(defs, c.body):
                if q is not None and q not in seen:
                    work.append(q)
    return out


def check_inductive_restriction(
    sig: Signature, defs: DefinitionSet, m: LevelMeasure
) -> tuple[list[InductiveVerdict], dict[str, int]]:
    """Every inductive predicate needs a strict measure and a solvable
    base assignment for the definitions it reaches.

    Returns the per-predicate verdicts and the solved bases (used as the
    effective bases when checking fixed-point clauses that mention
    inductive predicates).
    """
    verdicts: list[InductiveVerdict] = []
    solved: dict[str, int] = {}
    for pred in defs.predicates():
        if defs.kind_of(pred) != IND:
            continue
        if not m.strict(pred):
            verdicts.append(InductiveVerdict(
                pred, False,
                "inductive predicate violates strict stratification: "
                "its level measure depends on arguments"))
            continue
        reach = _reachable_clauses(defs, pred)
        weighted = sorted({c.pred for c in reach if not m.strict(c.pred)})
        if weighted:
            verdicts.append(InductiveVerdict(
                pred, False,
                f"inductive predicate depends on argument-measured {weighted}"))
            continue
        floors = {c.pred: m.entry(c.pred).base for c in reach}
        assignment = check_strict(defs, reach, floors)
        if assignment is None:
            verdicts.append(InductiveVerdict(
                pred, False,
                "inductive predicate violates strict stratification: "
                "no predicate-level assignment satisfies its clauses"))
            continue
        for q, v in assignment.items():
            solved[q] = max(solved.get(q, 0), v)
        verdicts.append(InductiveVerdict(pred, True, "strictly stratified"))
    return verdicts, solved


# ---------------------------------------------------------------------------
# The stratification gate


@dataclass
class StratReport:
    ok: bool
    inductive: list[InductiveVerdict]
    clauses: list[ClauseVerdict]
    effective: LevelMeasure

    def failures(self) -> list[str]:
        out = [f"{v.pred}: {v.reason}" for v in self.inductive if not v.accepted]
        out += [
            f"clause {pretty(c.clause.head)}: {c.detail}"
            for c in self.clauses
            if c.status != "verified"
        ]
        return out


def stratify(sig: Signature, defs: DefinitionSet, m: LevelMeasure,
             sweep_size: int = 5) -> StratReport:
    """The admission gate: inductive restriction plus per-clause ground
    stratification of the fixed-point clauses under the effective measure."""
    m.validate(sig)
    inductive, solved = check_inductive_restriction(sig, defs, m)
    effective = m.with_bases(solved)
    clause_verdicts = check_ground_stratified(sig, defs, effective,
                                              sweep_size, kinds=(FIX,))
    ok = all(v.accepted for v in inductive) and all(
        v.status == "verified" for v in clause_verdicts
    )
    return StratReport(ok, inductive, clause_verdicts, effective)


# ---------------------------------------------------------------------------
# Randomized grounding oracle


@dataclass(frozen=True)
class OracleViolation:
    rho: dict[str, Term]
    head_level: int
    body_level: int


def random_grounding_oracle(
    sig: Signature,
    clause: Clause,
    m: LevelMeasure,
    trials: int,
    size_bound: int,
    seed: int,
) -> list[OracleViolation]:
    """Sample groundings of the clause and report level violations.

    Body levels are evaluated with quantifiers enumerated up to the size
    bound; since that only under-approximates the body, every reported
    violation is real.  Deterministic for a fixed seed.
    """
    rng = random.Random(seed)
    pools = {name: enumerate_ground(sig, ty, size_bound).terms
             for name, ty in clause.vars.vars}
    if any(not terms for terms in pools.values()):
        return []
    violations: list[OracleViolation] = []
    seen: set[tuple] = set()
    n_trials = 1 if not clause.vars.vars else trials
    for _ in range(n_trials):
        rho = {name: rng.choice(pool) for name, pool in pools.items()}
        key = tuple(sorted((n, repr(t)) for n, t in rho.items()))
        if key in seen:
            continue
        seen.add(key)
        hl = lvl_ground(sig, subst_free(clause.head, rho), m, size_bound)
        bl = lvl_ground(sig, subst_free(clause.body, rho), m, size_bound)
        if hl.value < bl.value:
            violations.append(OracleViolation(rho, hl.value, bl.value))
    return violations
