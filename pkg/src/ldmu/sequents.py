"""Explicit-derivation checking for the full logic.

Proof trees carry rule tags and rule data only; the checker computes
every premise sequent downward from the goal, so trees never need to
repeat sequents and name-sensitive comparisons cannot drift.  Premise
order is significant and fixed left-to-right.

Hypotheses form a multiset kept in insertion order; left rules select an
occurrence by index.  The multicut premise partition is given by
explicit index groups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .definitions import (
    FIX,
    IND,
    Clause,
    DefinitionSet,
    apply_operator,
    to_fixed_point_operator,
)
from .stratification import LevelMeasure, StratReport, stratify
from .subst import Substitution
from .syntax import LdmuError, PROP, Signature, SimpleType, VarContext, arg_types
from .terms import (
    Abs,
    Const,
    FALSE,
    TRUE,
    Term,
    Var,
    app,
    atom_head,
    free_vars,
    infer_type,
    instantiate,
    is_ground,
    normalize,
    pretty,
    strip_apps,
    subst_free,
    view,
)
from .unify import Unifier, pattern_match, pattern_unify

RULES = (
    "top_r", "bot_l", "and_l", "and_r", "or_l", "or_r", "imp_l", "imp_r",
    "all_l", "all_r", "ex_l", "ex_r", "ax", "mc", "weaken", "contract",
    "delta_l", "delta_r", "mu_l", "mu_r",
)


class ProofError(LdmuError):
    def __init__(self, path: tuple[int, ...], reason: str):
        self.path = path
        self.reason = reason
        where = "/".join(map(str, path)) if path else "root"
        super().__init__(f"at {where}: {reason}")


@dataclass(frozen=True)
class Sequent:
    ctx: VarContext
    hyps: tuple[Term, ...]
    concl: Term

    def check_types(self, sig: Signature) -> None:
        for f in self.hyps + (self.concl,):
            ty = infer_type(sig, self.ctx, f)
            if ty != PROP:
                raise ProofError((), f"sequent formula {pretty(f)} has type {ty}, not o")

    def without(self, idx: int) -> tuple[Term, ...]:
        return self.hyps[:idx] + self.hyps[idx + 1:]

    def __str__(self) -> str:
        hyps = ", ".join(pretty(h) for h in self.hyps)
        return f"{self.ctx} ; {hyps} |- {pretty(self.concl)}"


@dataclass(frozen=True)
class ProofTree:
    rule: str
    premises: tuple[ProofTree, ...] = ()
    hyp: int | None = None
    witness: Term | None = None
    fresh: str | None = None
    side: str | None = None
    clause: int | None = None
    invariant: Term | None = None
    cuts: tuple[Term, ...] = ()
    partition: tuple[tuple[int, ...], ...] = ()

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)


@dataclass(frozen=True)
class DeltaBranch:
    """One surviving clause of a left definition rule."""

    clause_index: int
    renamed: Clause
    unifier: Unifier
    theta: dict[str, Term]
    premise: Sequent


def expand_delta_left(sig: Signature, defs: DefinitionSet, goal: Sequent,
                      hyp_idx: int) -> list[DeltaBranch]:
    """Premise family for case analysis on an atomic hypothesis.

    One branch per clause whose head unifies with the atom; the branch
    premise lives over the range of the sequent-variable part of the
    most general unifier.
    """
    atom = goal.hyps[hyp_idx]
    pred = atom_head(atom)
    assert pred is not None
    rest = goal.without(hyp_idx)
    branches: list[DeltaBranch] = []
    for ci, clause in enumerate(defs.clauses_for(pred)):
        renamed = clause.rename_apart(set(goal.ctx.names()))
        merged = goal.ctx.merge(renamed.vars)
        uni = pattern_unify(sig, atom, renamed.head, merged,
                            unifiable=set(merged.names()),
                            prefer=set(goal.ctx.names()))
        if uni is None:
            continue
        theta = uni.restrict(goal.ctx.names())
        new_ctx = uni.range_of(goal.ctx.names())
        body = subst_free(renamed.body, uni.bindings)
        stray = free_vars(body) - set(new_ctx.names())
        if stray:
            raise ProofError((), f"delta-left body escapes its context: {sorted(stray)}")
        premise = Sequent(
            new_ctx,
            tuple(subst_free(h, theta) for h in rest) + (body,),
            subst_free(goal.concl, theta),
        )
        branches.append(DeltaBranch(ci, renamed, uni, theta, premise))
    return branches


def delta_right_body(sig: Signature, defs: DefinitionSet, goal: Sequent,
                     clause_index: int) -> Term | None:
    """Body instance for unfolding the conclusion atom with one clause."""
    atom = goal.concl
    pred = atom_head(atom)
    assert pred is not None
    clauses = defs.clauses_for(pred)
    if not (0 <= clause_index < len(clauses)):
        return None
    clause = clauses[clause_index].rename_apart(set(goal.ctx.names()))
    rho = pattern_match(clause.head, clause.vars, atom)
    if rho is None:
        return None
    return subst_free(clause.body, rho)


def mu_premises(sig: Signature, defs: DefinitionSet, goal: Sequent,
                hyp_idx: int, invariant: Term) -> tuple[Sequent, Sequent]:
    """The invariant premise and the main premise of the induction rule."""
    atom = goal.hyps[hyp_idx]
    pred = atom_head(atom)
    assert pred is not None
    op = to_fixed_point_operator(defs, pred)
    if free_vars(invariant):
        raise ProofError((), "inductive invariant must be closed")
    inv = normalize(sig, VarContext(()), invariant)
    expected_ty = sig.type_of(pred)
    actual_ty = infer_type(sig, VarContext(()), inv)
    if actual_ty != expected_ty:
        raise ProofError((), f"invariant has type {actual_ty}, expected {expected_ty}")
    xs = VarContext(tuple((f"x{i + 1}", ty) for i, ty in enumerate(op.arg_types)))
    x_terms = tuple(Var(n) for n in xs.names())
    inv_prem = Sequent(
        xs,
        (apply_operator(sig, xs, op, inv, x_terms),),
        normalize(sig, xs, app(inv, *x_terms)),
    )
    _, args = strip_apps(atom)
    main_prem = Sequent(
        goal.ctx,
        goal.without(hyp_idx) + (normalize(sig, goal.ctx, app(inv, *args)),),
        goal.concl,
    )
    return inv_prem, main_prem


def _premise_goals(sig: Signature, defs: DefinitionSet, tree: ProofTree,
                   goal: Sequent) -> list[Sequent]:
    """Premise sequents required by the rule instance at the root of ``tree``."""
    rule = tree.rule
    concl_view = view(goal.concl)

    def need_hyp() -> int:
        if tree.hyp is None or not (0 <= tree.hyp < len(goal.hyps)):
            raise ProofError((), f"{rule} needs a valid hypothesis index")
        return tree.hyp

    if rule == "top_r":
        if goal.concl != TRUE:
            raise ProofError((), "top_r conclusion must be true")
        return []
    if rule == "bot_l":
        if goal.hyps[need_hyp()] != FALSE:
            raise ProofError((), "bot_l hypothesis must be false")
        return []
    if rule == "ax":
        if len(goal.hyps) != 1 or goal.hyps[0] != goal.concl:
            raise ProofError((), "axiom needs exactly the conclusion as hypothesis")
        if concl_view.kind != "atom":
            raise ProofError((), "axiom applies to atomic formulas only")
        return []
    if rule == "and_r":
        if concl_view.kind != "and":
            raise ProofError((), "and_r conclusion is not a conjunction")
        a, b = concl_view.parts
        return [Sequent(goal.ctx, goal.hyps, a), Sequent(goal.ctx, goal.hyps, b)]
    if rule == "or_r":
        if concl_view.kind != "or":
            raise ProofError((), "or_r conclusion is not a disjunction")
        if tree.side not in ("left", "right"):
            raise ProofError((), "or_r needs side 'left' or 'right'")
        part = concl_view.parts[0 if tree.side == "left" else 1]
        return [Sequent(goal.ctx, goal.hyps, part)]
    if rule == "imp_r":
        if concl_view.kind != "imp":
            raise ProofError((), "imp_r conclusion is not an implication")
        a, b = concl_view.parts
        return [Sequent(goal.ctx, goal.hyps + (a,), b)]
    if rule == "and_l":
        i = need_hyp()
        v = view(goal.hyps[i])
        if v.kind != "and":
            raise ProofError((), "and_l hypothesis is not a conjunction")
        return [Sequent(goal.ctx, goal.without(i) + v.parts, goal.concl)]
    if rule == "or_l":
        i = need_hyp()
        v = view(goal.hyps[i])
        if v.kind != "or":
            raise ProofError((), "or_l hypothesis is not a disjunction")
        rest = goal.without(i)
        return [Sequent(goal.ctx, rest + (v.parts[0],), goal.concl),
                Sequent(goal.ctx, rest + (v.parts[1],), goal.concl)]
    if rule == "imp_l":
        i = need_hyp()
        v = view(goal.hyps[i])
        if v.kind != "imp":
            raise ProofError((), "imp_l hypothesis is not an implication")
        rest = goal.without(i)
        return [Sequent(goal.ctx, rest, v.parts[0]),
                Sequent(goal.ctx, rest + (v.parts[1],), goal.concl)]
    if rule in ("all_r", "ex_l"):
        if rule == "all_r":
            v = concl_view
            if v.kind != "all":
                raise ProofError((), "all_r conclusion is not universally quantified")
        else:
            i = need_hyp()
            v = view(goal.hyps[i])
            if v.kind != "ex":
                raise ProofError((), "ex_l hypothesis is not existentially quantified")
        if not tree.fresh:
            raise ProofError((), f"{rule} needs an eigenvariable name")
        if tree.fresh in goal.ctx:
            raise ProofError((), f"eigenvariable {tree.fresh!r} is not fresh")
        body = v.parts[0]
        assert isinstance(body, Abs) and v.quant_ty is not None
        new_ctx = goal.ctx.extend(tree.fresh, v.quant_ty)
        opened = instantiate(body, Var(tree.fresh))
        if rule == "all_r":
            return [Sequent(new_ctx, goal.hyps, opened)]
        return [Sequent(new_ctx, goal.without(tree.hyp) + (opened,), goal.concl)]
    if rule in ("all_l", "ex_r"):
        if rule == "all_l":
            i = need_hyp()
            v = view(goal.hyps[i])
            if v.kind != "all":
                raise ProofError((), "all_l hypothesis is not universally quantified")
        else:
            v = concl_view
            if v.kind != "ex":
                raise ProofError((), "ex_r conclusion is not existentially quantified")
        if tree.witness is None:
            raise ProofError((), f"{rule} needs a witness term")
        body = v.parts[0]
        assert isinstance(body, Abs) and v.quant_ty is not None
        witness = normalize(sig, goal.ctx, tree.witness)
        wty = infer_type(sig, goal.ctx, witness)
        if wty != v.quant_ty:
            raise ProofError((), f"witness has type {wty}, expected {v.quant_ty}")
        opened = instantiate(body, witness)
        if rule == "all_l":
            return [Sequent(goal.ctx, goal.without(tree.hyp) + (opened,), goal.concl)]
        return [Sequent(goal.ctx, goal.hyps, opened)]
    if rule == "weaken":
        i = need_hyp()
        return [Sequent(goal.ctx, goal.without(i), goal.concl)]
    if rule == "contract":
        i = need_hyp()
        return [Sequent(goal.ctx, goal.hyps + (goal.hyps[i],), goal.concl)]
    if rule == "mc":
        groups = tree.partition
        if len(groups) != len(tree.cuts):
            raise ProofError((), "multicut needs one hypothesis group per cut formula")
        used: set[int] = set()
        for group in groups:
            for idx in group:
                if not (0 <= idx < len(goal.hyps)) or idx in used:
                    raise ProofError((), "multicut partition reuses or exceeds hypotheses")
                used.add(idx)
        cuts = tuple(normalize(sig, goal.ctx, c) for c in tree.cuts)
        for c in cuts:
            if infer_type(sig, goal.ctx, c) != PROP:
                raise ProofError((), "cut formulas must be formulas")
        rest = tuple(h for i, h in enumerate(goal.hyps) if i not in used)
        out = [Sequent(goal.ctx, tuple(goal.hyps[i] for i in group), cut)
               for group, cut in zip(groups, cuts)]
        out.append(Sequent(goal.ctx, rest + cuts, goal.concl))
        return out
    if rule == "delta_r":
        if concl_view.kind != "atom":
            raise ProofError((), "delta_r conclusion is not atomic")
        pred = atom_head(goal.concl)
        if pred is None or defs.kind_of(pred) != FIX:
            raise ProofError((), "delta_r needs a fixed-point predicate conclusion")
        if tree.clause is None:
            raise ProofError((), "delta_r needs a clause index")
        body = delta_right_body(sig, defs, goal, tree.clause)
        if body is None:
            raise ProofError((), "delta_r clause does not match the conclusion atom")
        return [Sequent(goal.ctx, goal.hyps, body)]
    if rule == "mu_r":
        if concl_view.kind != "atom":
            raise ProofError((), "mu_r conclusion is not atomic")
        pred = atom_head(goal.concl)
        if pred is None or defs.kind_of(pred) != IND:
            raise ProofError((), "mu_r needs an inductive predicate conclusion")
        op = to_fixed_point_operator(defs, pred)
        _, args = strip_apps(goal.concl)
        unfolded = apply_operator(sig, goal.ctx, op, Const(pred), args)
        return [Sequent(goal.ctx, goal.hyps, unfolded)]
    if rule == "delta_l":
        i = need_hyp()
        atom = goal.hyps[i]
        if view(atom).kind != "atom":
            raise ProofError((), "delta_l hypothesis is not atomic")
        pred = atom_head(atom)
        kind = None if pred is None else defs.kind_of(pred)
        if kind == IND:
            raise ProofError((), "delta_l does not apply to inductive atoms; use mu_l")
        if kind != FIX:
            raise ProofError((), f"hypothesis head {pred!r} is not a defined predicate")
        return [b.premise for b in expand_delta_left(sig, defs, goal, i)]
    if rule == "mu_l":
        i = need_hyp()
        atom = goal.hyps[i]
        pred = atom_head(atom)
        if pred is None or defs.kind_of(pred) != IND:
            raise ProofError((), "mu_l needs an inductive atomic hypothesis")
        if tree.invariant is None:
            raise ProofError((), "mu_l needs an invariant term")
        inv_prem, main_prem = mu_premises(sig, defs, goal, i, tree.invariant)
        return [inv_prem, main_prem]
    raise ProofError((), f"unknown rule {tree.rule!r}")


def check_proof(
    sig: Signature,
    defs: DefinitionSet,
    m: LevelMeasure,
    tree: ProofTree,
    goal: Sequent,
    unsafe_skip_strat: bool = False,
    strat_report: StratReport | None = None,
) -> None:
    """Validate every node of the tree against the goal; raises ProofError.

    Unless skipped, the definitions must first pass the stratification
    gate for the given measure.
    """
    if not unsafe_skip_strat:
        report = strat_report if strat_report is not None else stratify(sig, defs, m)
        if not report.ok:
            raise ProofError((), "stratification gate failed: " + "; ".join(report.failures()))
    goal.check_types(sig)
    _check(sig, defs, tree, goal, ())


def _check(sig: Signature, defs: DefinitionSet, tree: ProofTree,
           goal: Sequent, path: tuple[int, ...]) -> None:
    try:
        premises = _premise_goals(sig, defs, tree, goal)
    except ProofError as e:
        raise ProofError(path + e.path, e.reason) from None
    if len(premises) != len(tree.premises):
        raise ProofError(
            path,
            f"{tree.rule} needs {len(premises)} premises, tree has {len(tree.premises)}",
        )
    for i, (child, sub) in enumerate(zip(tree.premises, premises)):
        _check(sig, defs, child, sub, path + (i,))


# ---------------------------------------------------------------------------
# Bounded proof search


def search_bounded(
    sig: Signature,
    defs: DefinitionSet,
    goal: Sequent,
    depth: int,
    invariants: dict[str, Term] | None = None,
) -> ProofTree | None:
    """Depth-bounded backward search over the cut-free rules.

    A returned tree always passes the checker; failure is no verdict.
    Induction is attempted only for predicates with a supplied
    invariant.
    """
    invariants = invariants or {}
    counter = [0]
    try:
        return _search(sig, defs, goal, depth, invariants, counter)
    except RecursionError:
        return None


_SEARCH_STEP_LIMIT = 200_000


def _witness_candidates(sig: Signature, goal: Sequent, ty: SimpleType, depth: int):
    from .enum_terms import enumerate_ground

    for name, t in goal.ctx.vars:
        if t == ty:
            yield Var(name)
    yield from enumerate_ground(sig, ty, max(depth, 3)).terms[:24]


def _fresh_name(hint: str, ctx: VarContext) -> str:
    name = hint
    i = 0
    while name in ctx:
        i += 1
        name = f"{hint}{i}"
    return name


def _ax_with_weakening(goal: Sequent, idx: int) -> ProofTree:
    """Weaken the other hypotheses away down to a strict axiom."""
    remaining = list(range(len(goal.hyps)))
    chain: list[int] = []
    while len(remaining) > 1:
        drop = next(i for i, orig in enumerate(remaining) if orig != idx)
        chain.append(drop)
        remaining.pop(drop)
    node = ProofTree("ax")
    for drop in reversed(chain):
        node = ProofTree("weaken", premises=(node,), hyp=drop)
    return node


def _eager_step(sig, defs, goal: Sequent):
    """An invertible, terminating rule application, or None.

    These are applied without consuming search depth: closing rules,
    structural decompositions, and case analysis on equality atoms
    (whose premise family always shrinks the problem).
    """
    concl = goal.concl
    cv = view(concl)
    if cv.kind == "true":
        return ProofTree("top_r"), []
    for i, h in enumerate(goal.hyps):
        if h == FALSE:
            return ProofTree("bot_l", hyp=i), []
    if cv.kind == "atom" and concl in goal.hyps:
        return _ax_with_weakening(goal, goal.hyps.index(concl)), []
    if cv.kind == "imp":
        return (ProofTree("imp_r"),
                [Sequent(goal.ctx, goal.hyps + (cv.parts[0],), cv.parts[1])])
    if cv.kind == "all":
        body = cv.parts[0]
        assert isinstance(body, Abs)
        fresh = _fresh_name(body.hint, goal.ctx)
        return (ProofTree("all_r", fresh=fresh),
                [Sequent(goal.ctx.extend(fresh, cv.quant_ty), goal.hyps,
                         instantiate(body, Var(fresh)))])
    if cv.kind == "and":
        return (ProofTree("and_r"),
                [Sequent(goal.ctx, goal.hyps, cv.parts[0]),
                 Sequent(goal.ctx, goal.hyps, cv.parts[1])])
    for i, h in enumerate(goal.hyps):
        hv = view(h)
        rest = goal.without(i)
        if hv.kind == "and":
            return (ProofTree("and_l", hyp=i),
                    [Sequent(goal.ctx, rest + hv.parts, concl)])
        if hv.kind == "or":
            return (ProofTree("or_l", hyp=i),
                    [Sequent(goal.ctx, rest + (hv.parts[0],), concl),
                     Sequent(goal.ctx, rest + (hv.parts[1],), concl)])
        if hv.kind == "ex":
            body = hv.parts[0]
            assert isinstance(body, Abs)
            fresh = _fresh_name(body.hint, goal.ctx)
            return (ProofTree("ex_l", hyp=i, fresh=fresh),
                    [Sequent(goal.ctx.extend(fresh, hv.quant_ty),
                             rest + (instantiate(body, Var(fresh)),), concl)])
        if hv.kind == "atom":
            pred = atom_head(h)
            if pred is not None and pred.startswith("eq:"):
                branches = expand_delta_left(sig, defs, goal, i)
                return (ProofTree("delta_l", hyp=i),
                        [b.premise for b in branches])
    return None


def _search(sig, defs, goal: Sequent, depth: int, invariants, counter) -> ProofTree | None:
    counter[0] += 1
    if counter[0] > _SEARCH_STEP_LIMIT:
        return None

    def recurse(subgoals: list[Sequent], budget: int) -> list[ProofTree] | None:
        out = []
        for sub in subgoals:
            found = _search(sig, defs, sub, budget, invariants, counter)
            if found is None:
                return None
            out.append(found)
        return out

    eager = _eager_step(sig, defs, goal)
    if eager is not None:
        node, subgoals = eager
        if not subgoals:
            return node
        subs = recurse(subgoals, depth)
        if subs is None:
            return None
        return ProofTree(node.rule, premises=tuple(subs), hyp=node.hyp,
                         fresh=node.fresh, side=node.side)

    if depth <= 0:
        return None
    concl = goal.concl
    cv = view(concl)

    # right-hand choice points
    if cv.kind == "or":
        for side, part in (("left", cv.parts[0]), ("right", cv.parts[1])):
            subs = recurse([Sequent(goal.ctx, goal.hyps, part)], depth - 1)
            if subs:
                return ProofTree("or_r", premises=tuple(subs), side=side)
    elif cv.kind == "ex":
        body = cv.parts[0]
        assert isinstance(body, Abs) and cv.quant_ty is not None
        for w in _witness_candidates(sig, goal, cv.quant_ty, depth):
            subs = recurse([Sequent(goal.ctx, goal.hyps, instantiate(body, w))], depth - 1)
            if subs:
                return ProofTree("ex_r", premises=tuple(subs), witness=w)
    elif cv.kind == "atom":
        pred = atom_head(concl)
        kind = defs.kind_of(pred) if pred else None
        if kind == FIX:
            for ci in range(len(defs.clauses_for(pred))):
                body = delta_right_body(sig, defs, goal, ci)
                if body is None:
                    continue
                subs = recurse([Sequent(goal.ctx, goal.hyps, body)], depth - 1)
                if subs:
                    return ProofTree("delta_r", premises=tuple(subs), clause=ci)
        elif kind == IND:
            op = to_fixed_point_operator(defs, pred)
            _, args = strip_apps(concl)
            unfolded = apply_operator(sig, goal.ctx, op, Const(pred), args)
            subs = recurse([Sequent(goal.ctx, goal.hyps, unfolded)], depth - 1)
            if subs:
                return ProofTree("mu_r", premises=tuple(subs))

    # left-hand choice points
    for i, h in enumerate(goal.hyps):
        hv = view(h)
        rest = goal.without(i)
        if hv.kind == "imp":
            subs = recurse([Sequent(goal.ctx, rest, hv.parts[0]),
                            Sequent(goal.ctx, rest + (hv.parts[1],), concl)], depth - 1)
            if subs:
                return ProofTree("imp_l", premises=tuple(subs), hyp=i)
        elif hv.kind == "all":
            body = hv.parts[0]
            assert isinstance(body, Abs) and hv.quant_ty is not None
            for w in _witness_candidates(sig, goal, hv.quant_ty, depth):
                sub = Sequent(goal.ctx, rest + (instantiate(body, w),), concl)
                subs = recurse([sub], depth - 1)
                if subs:
                    return ProofTree("all_l", premises=tuple(subs), hyp=i, witness=w)
        elif hv.kind == "atom":
            pred = atom_head(h)
            kind = defs.kind_of(pred) if pred else None
            if kind == FIX and not (pred or "").startswith("eq:"):
                try:
                    branches = expand_delta_left(sig, defs, goal, i)
                except LdmuError:
                    continue
                subs = recurse([b.premise for b in branches], depth - 1)
                if subs is not None:
                    return ProofTree("delta_l", premises=tuple(subs), hyp=i)
            elif kind == IND and pred in invariants:
                try:
                    inv_prem, main_prem = mu_premises(sig, defs, goal, i, invariants[pred])
                except (LdmuError, ProofError):
                    continue
                subs = recurse([inv_prem, main_prem], depth - 1)
                if subs is not None:
                    return ProofTree("mu_l", premises=tuple(subs), hyp=i,
                                     invariant=invariants[pred])
    return None
