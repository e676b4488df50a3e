"""Definitional clauses, the defn expansion relation, and the
translation of inductive clause sets into a single fixed-point operator.

A clause ``H := B`` over variables X is admissible when H is an atomic
pattern containing every variable of X.  Clauses are either fixed-point
or inductive; all clauses of one predicate share that kind.  Equality is
built in as the sole fixed-point clause ``eq X X := true`` at every
first-order type and cannot be redefined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .subst import Substitution
from .syntax import (
    EQ_PREFIX,
    LdmuError,
    PROP,
    Signature,
    SimpleType,
    VarContext,
    arg_types,
    first_order,
    is_predicate_type,
    parse_type_key,
)
from .terms import (
    Abs,
    Const,
    Term,
    TRUE,
    Var,
    app,
    atom_head,
    bind_var,
    conj_all,
    disj_all,
    eq_const,
    exists,
    free_vars,
    has_const,
    infer_type,
    normalize,
    pretty,
    strip_apps,
    subst_free,
    view,
)
from .unify import is_pattern, pattern_match

FIX = "fix"
IND = "ind"


class DefinitionError(LdmuError):
    pass


@dataclass(frozen=True)
class Clause:
    kind: str  # FIX | IND
    vars: VarContext
    head: Term
    body: Term

    @staticmethod
    def make(sig: Signature, kind: str, vars: VarContext, head: Term, body: Term) -> Clause:
        if kind not in (FIX, IND):
            raise DefinitionError(f"unknown clause kind {kind!r}")
        head = normalize(sig, vars, head)
        body = normalize(sig, vars, body)
        if infer_type(sig, vars, head) != PROP:
            raise DefinitionError("clause head must be a formula")
        pred = atom_head(head)
        if pred is None:
            raise DefinitionError(f"clause head must be atomic, got {pretty(head)}")
        if infer_type(sig, vars, body) != PROP:
            raise DefinitionError("clause body must be a formula")
        missing = set(vars.names()) - free_vars(head)
        if missing:
            raise DefinitionError(
                f"clause variables {sorted(missing)} do not occur in the head"
            )
        if not is_pattern(head, vars):
            raise DefinitionError(f"clause head {pretty(head)} is not a pattern")
        return Clause(kind, vars, head, body)

    @property
    def pred(self) -> str:
        name = atom_head(self.head)
        assert name is not None
        return name

    def head_args(self) -> tuple[Term, ...]:
        _, args = strip_apps(self.head)
        return args

    def rename_apart(self, avoid: set[str]) -> Clause:
        """Alpha-rename clause variables away from ``avoid``."""
        mapping: dict[str, Term] = {}
        pairs: list[tuple[str, SimpleType]] = []
        taken = set(avoid)
        for name, ty in self.vars.vars:
            new = name
            i = 0
            while new in taken:
                i += 1
                new = f"{name}{i}"
            taken.add(new)
            mapping[name] = Var(new)
            pairs.append((new, ty))
        if all(isinstance(v, Var) and v.name == n for n, v in mapping.items()):
            return self
        return Clause(
            self.kind,
            VarContext(tuple(pairs)),
            subst_free(self.head, mapping),
            subst_free(self.body, mapping),
        )


@dataclass
class DefinitionSet:
    """Ordered clause list plus the fixed-point/inductive kind per predicate."""

    sig: Signature
    clauses: list[Clause] = field(default_factory=list)
    predicate_kind: dict[str, str] = field(default_factory=dict)

    def declare_predicate(self, name: str, kind: str) -> None:
        ty = self.sig.type_of(name)
        if name.startswith(EQ_PREFIX) or name == "eq":
            raise DefinitionError("the equality predicate cannot be redefined")
        if ty is None:
            raise DefinitionError(f"predicate {name!r} is not declared")
        if not is_predicate_type(ty):
            raise DefinitionError(f"{name!r} has non-predicate type {ty}")
        if name in self.predicate_kind and self.predicate_kind[name] != kind:
            raise DefinitionError(f"predicate {name!r} redeclared with a different kind")
        self.predicate_kind[name] = kind

    def add_clause(self, clause: Clause) -> None:
        pred = clause.pred
        if pred.startswith(EQ_PREFIX):
            raise DefinitionError("the equality predicate cannot be redefined")
        kind = self.predicate_kind.get(pred)
        if kind is None:
            self.declare_predicate(pred, clause.kind)
        elif kind != clause.kind:
            raise DefinitionError(
                f"all clauses for {pred!r} must share its {kind} kind"
            )
        self.clauses.append(clause)

    def kind_of(self, pred: str) -> str | None:
        if pred.startswith(EQ_PREFIX):
            return FIX
        return self.predicate_kind.get(pred)

    def clauses_for(self, pred: str) -> list[Clause]:
        if pred.startswith(EQ_PREFIX):
            ty = parse_type_key(pred[len(EQ_PREFIX):])
            x = Var("X")
            return [Clause(FIX, VarContext.of(("X", ty)),
                           app(eq_const(ty), x, x), TRUE)]
        return [c for c in self.clauses if c.pred == pred]

    def predicates(self) -> list[str]:
        return list(self.predicate_kind)


def defn_expand(sig: Signature, clause: Clause, atom: Term,
                theta: Substitution) -> Term | None:
    """Body instance B' with H rho = A theta, or None when no rho exists."""
    target = theta.apply(atom)
    clause = clause.rename_apart(set(theta.target.names()))
    rho = pattern_match(clause.head, clause.vars, target)
    if rho is None:
        return None
    return subst_free(clause.body, rho)


@dataclass(frozen=True)
class FixedPointOperator:
    pred: str
    operator: Term  # closed, of type (pred type -> pred type)
    arg_types: tuple[SimpleType, ...]


def to_fixed_point_operator(defs: DefinitionSet, pred: str) -> FixedPointOperator:
    """Package the inductive clauses of ``pred`` as one closed operator.

    Each clause becomes a disjunct binding its clause variables
    existentially, with an equality conjunct per head argument; the
    recursive occurrences of the predicate turn into the operator's
    bound predicate variable.  No clauses yield the empty disjunction.
    """
    sig = defs.sig
    if defs.kind_of(pred) != IND:
        raise DefinitionError(f"{pred!r} is not an inductive predicate")
    pred_ty = sig.type_of(pred)
    assert pred_ty is not None
    args = arg_types(pred_ty)
    self_var = "_self"
    arg_names = [f"_x{i}" for i in range(len(args))]
    avoid = set(arg_names) | {self_var}

    disjuncts: list[Term] = []
    for clause in defs.clauses_for(pred):
        clause = clause.rename_apart(avoid)
        parts = [
            app(eq_const(ty), Var(name), t)
            for name, ty, t in zip(arg_names, args, clause.head_args())
        ]
        parts.append(_swap_pred(clause.body, pred, Var(self_var)))
        formula = conj_all(parts)
        for name, ty in reversed(clause.vars.vars):
            formula = exists(name, ty, formula)
        disjuncts.append(formula)

    body = disj_all(disjuncts)
    for name, ty in reversed(list(zip(arg_names, args))):
        body = bind_var(name, ty, body, hint=f"x{arg_names.index(name)}")
    operator = bind_var(self_var, pred_ty, body, hint="p")
    operator = normalize(sig, VarContext(()), operator)
    if has_const(operator, pred):
        raise DefinitionError(f"operator for {pred!r} still mentions the predicate")
    return FixedPointOperator(pred, operator, args)


def _swap_pred(t: Term, pred: str, replacement: Term) -> Term:
    if isinstance(t, Const) and t.name == pred:
        return replacement
    if isinstance(t, Abs):
        return Abs(t.ty, _swap_pred(t.body, pred, replacement), t.hint)
    from .terms import App

    if isinstance(t, App):
        return App(_swap_pred(t.fun, pred, replacement),
                   _swap_pred(t.arg, pred, replacement))
    return t


def apply_operator(sig: Signature, ctx: VarContext, op: FixedPointOperator,
                   pred_term: Term, args: tuple[Term, ...]) -> Term:
    """Normalized ``B p args``."""
    return normalize(sig, ctx, app(op.operator, pred_term, *args))


# ---------------------------------------------------------------------------
# Polarity


@dataclass(frozen=True)
class Occurrence:
    path: tuple[int, ...]
    sign: str  # "positive" | "negative"
    implication_depth: int


@dataclass(frozen=True)
class PolarityReport:
    pred: str
    occurrences: tuple[Occurrence, ...]

    @property
    def all_positive(self) -> bool:
        return all(o.sign == "positive" for o in self.occurrences)

    @property
    def strictly_positive(self) -> bool:
        """No occurrence sits under the left of any implication."""
        return all(o.implication_depth == 0 for o in self.occurrences)


def polarity(f: Term, pred: str) -> PolarityReport:
    """Every occurrence of the predicate with its sign and the number of
    implications whose left argument encloses it."""
    occs: list[Occurrence] = []

    def go(f: Term, path: tuple[int, ...], depth: int) -> None:
        v = view(f)
        if v.kind in ("and", "or"):
            go(v.parts[0], path + (0,), depth)
            go(v.parts[1], path + (1,), depth)
        elif v.kind == "imp":
            go(v.parts[0], path + (0,), depth + 1)
            go(v.parts[1], path + (1,), depth)
        elif v.kind in ("all", "ex"):
            body = v.parts[0]
            assert isinstance(body, Abs)
            go(body.body, path + (0,), depth)
        elif v.kind == "atom":
            if has_const(f, pred):
                sign = "negative" if depth % 2 == 1 else "positive"
                occs.append(Occurrence(path, sign, depth))

    go(f, (), 0)
    return PolarityReport(pred, tuple(occs))


def contains_pred(f: Term, pred: str) -> bool:
    return has_const(f, pred)
