"""The ground engine: ground sequents, infinitary rules over finitary
signatures, the grounding interpretation, cut reduction and
normalization to cut-free form.

Ground derivations store their conclusion sequent at every node, which
makes the reduction transformations local tree surgery.  Hypotheses are
compared as multisets; left rules name their principal formula rather
than an occurrence index, since occurrences of equal ground formulas
are interchangeable.

The quantifier and induction rules carry premise *families*: total maps
from ground-term tuples to subderivations.  Realizing those families
requires every quantified type to have finitely many ground terms,
which ``check_finitary`` certifies up front.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field, replace

from .definitions import (
    FIX,
    IND,
    DefinitionSet,
    apply_operator,
    contains_pred,
    polarity,
    to_fixed_point_operator,
)
from .enum_terms import enumerate_ground, ground_profile, infinite_cycle
from .sequents import DeltaBranch, ProofTree, Sequent, expand_delta_left, mu_premises
from .subst import Substitution
from .syntax import Base, LdmuError, Signature, SimpleType, VarContext, type_key
from .terms import (
    Abs,
    App,
    Const,
    FALSE,
    TRUE,
    Term,
    Var,
    app,
    atom_head,
    instantiate,
    is_ground,
    normalize,
    pretty,
    strip_apps,
    subst_free,
    view,
)
from .unify import pattern_match


class GroundError(LdmuError):
    pass


class FinitaryError(GroundError):
    pass


# ---------------------------------------------------------------------------
# Finitary signatures


@dataclass
class FinitarySignature:
    """A signature whose first-order types all have finite ground-term sets."""

    sig: Signature
    _cache: dict[str, tuple[Term, ...]] = field(default_factory=dict)

    def ground_terms(self, ty: SimpleType) -> tuple[Term, ...]:
        key = type_key(ty)
        if key not in self._cache:
            profile = ground_profile(self.sig, ty)
            if not profile.finite:
                raise FinitaryError(f"type {ty} has infinitely many ground terms")
            enum = enumerate_ground(self.sig, ty, profile.max_size or 0)
            assert enum.complete
            self._cache[key] = enum.terms
        return self._cache[key]

    def ground_tuples(self, types: tuple[SimpleType, ...]) -> list[tuple[Term, ...]]:
        pools = [self.ground_terms(t) for t in types]
        return list(itertools.product(*pools))


def check_finitary(sig: Signature) -> FinitarySignature:
    """Certify that no declared base type admits unboundedly many ground terms."""
    for name in sorted(sig.base_type_names()):
        profile = ground_profile(sig, Base(name))
        if not profile.finite:
            cycle = infinite_cycle(sig, name) or [name]
            raise FinitaryError(
                f"type {name} is not finitary: constructor cycle "
                + " -> ".join(cycle)
            )
    return FinitarySignature(sig)


# ---------------------------------------------------------------------------
# Ground sequents and derivations


@dataclass(frozen=True)
class GroundSequent:
    hyps: tuple[Term, ...]
    concl: Term

    def __str__(self) -> str:
        return ", ".join(pretty(h) for h in self.hyps) + " |- " + pretty(self.concl)


def _multiset(formulas: tuple[Term, ...]) -> Counter:
    return Counter(formulas)


def _remove_one(hyps: tuple[Term, ...], f: Term) -> tuple[Term, ...]:
    out = list(hyps)
    try:
        out.remove(f)
    except ValueError:
        raise GroundError(f"formula {pretty(f)} not among the hypotheses") from None
    return tuple(out)


FamilyKey = tuple[Term, ...]


@dataclass(eq=False)
class GroundDerivation:
    rule: str
    sequent: GroundSequent
    premises: tuple[GroundDerivation, ...] = ()
    family: tuple[tuple[FamilyKey, GroundDerivation], ...] | None = None
    principal: Term | None = None  # left rules, weaken, contract
    witness: Term | None = None
    side: str | None = None
    clause: int | None = None
    invariant: Term | None = None
    cuts: tuple[Term, ...] = ()

    def family_map(self) -> dict[FamilyKey, GroundDerivation]:
        assert self.family is not None
        return dict(self.family)

    def size(self) -> int:
        n = 1 + sum(p.size() for p in self.premises)
        if self.family:
            n += sum(d.size() for _, d in self.family)
        return n

    def all_children(self):
        yield from self.premises
        if self.family:
            for _, d in self.family:
                yield d


def is_cut_free(d: GroundDerivation) -> bool:
    if d.rule == "mc":
        return False
    return all(is_cut_free(c) for c in d.all_children())


# ---------------------------------------------------------------------------
# Node builders: construct sequent-correct nodes from premises


def g_ax(a: Term) -> GroundDerivation:
    return GroundDerivation("ax", GroundSequent((a,), a))


def g_top_r(hyps: tuple[Term, ...]) -> GroundDerivation:
    return GroundDerivation("top_r", GroundSequent(hyps, TRUE))


def g_bot_l(hyps: tuple[Term, ...], concl: Term) -> GroundDerivation:
    if FALSE not in hyps:
        raise GroundError("bot_l needs a false hypothesis")
    return GroundDerivation("bot_l", GroundSequent(hyps, concl), principal=FALSE)


def g_and_r(left: GroundDerivation, right: GroundDerivation) -> GroundDerivation:
    from .terms import conj

    assert _multiset(left.sequent.hyps) == _multiset(right.sequent.hyps)
    seq = GroundSequent(left.sequent.hyps, conj(left.sequent.concl, right.sequent.concl))
    return GroundDerivation("and_r", seq, (left, right))


def g_or_r(side: str, sub: GroundDerivation, other: Term) -> GroundDerivation:
    from .terms import disj

    a, b = (sub.sequent.concl, other) if side == "left" else (other, sub.sequent.concl)
    return GroundDerivation("or_r", GroundSequent(sub.sequent.hyps, disj(a, b)),
                            (sub,), side=side)


def g_imp_r(sub: GroundDerivation, hypothesis: Term) -> GroundDerivation:
    from .terms import implies

    hyps = _remove_one(sub.sequent.hyps, hypothesis)
    return GroundDerivation("imp_r", GroundSequent(hyps, implies(hypothesis, sub.sequent.concl)),
                            (sub,))


def g_and_l(principal: Term, sub: GroundDerivation) -> GroundDerivation:
    v = view(principal)
    assert v.kind == "and"
    hyps = _remove_one(_remove_one(sub.sequent.hyps, v.parts[0]), v.parts[1])
    return GroundDerivation("and_l", GroundSequent(hyps + (principal,), sub.sequent.concl),
                            (sub,), principal=principal)


def g_or_l(principal: Term, left: GroundDerivation, right: GroundDerivation) -> GroundDerivation:
    v = view(principal)
    assert v.kind == "or"
    hyps = _remove_one(left.sequent.hyps, v.parts[0])
    return GroundDerivation("or_l", GroundSequent(hyps + (principal,), left.sequent.concl),
                            (left, right), principal=principal)


def g_imp_l(principal: Term, minor: GroundDerivation, major: GroundDerivation) -> GroundDerivation:
    v = view(principal)
    assert v.kind == "imp"
    hyps = minor.sequent.hyps
    return GroundDerivation("imp_l", GroundSequent(hyps + (principal,), major.sequent.concl),
                            (minor, major), principal=principal)


def g_weaken(added: Term, sub: GroundDerivation) -> GroundDerivation:
    return GroundDerivation("weaken",
                            GroundSequent(sub.sequent.hyps + (added,), sub.sequent.concl),
                            (sub,), principal=added)


def g_weaken_many(formulas, sub: GroundDerivation) -> GroundDerivation:
    for f in formulas:
        sub = g_weaken(f, sub)
    return sub


def g_contract(dup: Term, sub: GroundDerivation) -> GroundDerivation:
    hyps = _remove_one(sub.sequent.hyps, dup)
    if dup not in hyps:
        raise GroundError("contract needs a duplicated hypothesis")
    return GroundDerivation("contract", GroundSequent(hyps, sub.sequent.concl),
                            (sub,), principal=dup)


def g_contract_many(formulas, sub: GroundDerivation) -> GroundDerivation:
    for f in formulas:
        sub = g_contract(f, sub)
    return sub


def g_mc(minors: list[GroundDerivation], major: GroundDerivation,
         cuts: tuple[Term, ...]) -> GroundDerivation:
    assert len(minors) == len(cuts)
    gamma = list(major.sequent.hyps)
    for c in cuts:
        try:
            gamma.remove(c)
        except ValueError:
            raise GroundError(f"cut formula {pretty(c)} missing from the major premise") from None
    hyps: tuple[Term, ...] = ()
    for minor, cut in zip(minors, cuts):
        if minor.sequent.concl != cut:
            raise GroundError("minor premise does not conclude its cut formula")
        hyps += minor.sequent.hyps
    return GroundDerivation("mc", GroundSequent(hyps + tuple(gamma), major.sequent.concl),
                            tuple(minors) + (major,), cuts=cuts)


def g_mu_r(sub: GroundDerivation, atom: Term) -> GroundDerivation:
    return GroundDerivation("mu_r", GroundSequent(sub.sequent.hyps, atom), (sub,))


def g_delta_r(sub: GroundDerivation, atom: Term, clause: int) -> GroundDerivation:
    return GroundDerivation("delta_r", GroundSequent(sub.sequent.hyps, atom), (sub,),
                            clause=clause)


def g_all_r(hyps: tuple[Term, ...], concl: Term,
            family: dict[FamilyKey, GroundDerivation]) -> GroundDerivation:
    return GroundDerivation("all_r", GroundSequent(hyps, concl),
                            family=tuple(sorted(family.items(), key=lambda kv: repr(kv[0]))))


def g_ex_l(principal: Term, hyps: tuple[Term, ...], concl: Term,
           family: dict[FamilyKey, GroundDerivation]) -> GroundDerivation:
    return GroundDerivation("ex_l", GroundSequent(hyps, concl),
                            family=tuple(sorted(family.items(), key=lambda kv: repr(kv[0]))),
                            principal=principal)


def g_ex_r(sub: GroundDerivation, concl: Term, witness: Term) -> GroundDerivation:
    return GroundDerivation("ex_r", GroundSequent(sub.sequent.hyps, concl), (sub,),
                            witness=witness)


def g_all_l(principal: Term, witness: Term, sub: GroundDerivation) -> GroundDerivation:
    v = view(principal)
    assert v.kind == "all"
    body = v.parts[0]
    assert isinstance(body, Abs)
    opened = instantiate(body, witness)
    hyps = _remove_one(sub.sequent.hyps, opened)
    return GroundDerivation("all_l", GroundSequent(hyps + (principal,), sub.sequent.concl),
                            (sub,), principal=principal, witness=witness)


def g_delta_l(principal: Term, hyps: tuple[Term, ...], concl: Term,
              premises: tuple[GroundDerivation, ...]) -> GroundDerivation:
    return GroundDerivation("delta_l", GroundSequent(hyps, concl), premises,
                            principal=principal)


def g_mu_l(principal: Term, invariant: Term, main: GroundDerivation,
           family: dict[FamilyKey, GroundDerivation],
           hyps: tuple[Term, ...], concl: Term) -> GroundDerivation:
    return GroundDerivation("mu_l", GroundSequent(hyps, concl), (main,),
                            family=tuple(sorted(family.items(), key=lambda kv: repr(kv[0]))),
                            principal=principal, invariant=invariant)


# ---------------------------------------------------------------------------
# Checking


@dataclass
class GroundEnv:
    sig: Signature
    defs: DefinitionSet
    fsig: FinitarySignature


def check_ground_derivation(env: GroundEnv, d: GroundDerivation,
                            goal: GroundSequent) -> None:
    """Validate every node; hypotheses are compared as multisets."""
    if d.sequent.concl != goal.concl or _multiset(d.sequent.hyps) != _multiset(goal.hyps):
        raise GroundError(
            f"derivation concludes {d.sequent}, expected {goal}")
    _check_node(env, d, ())


def _fail(path, msg: str):
    where = "/".join(map(str, path)) if path else "root"
    raise GroundError(f"at {where}: {msg}")


def _expect(env: GroundEnv, path, child: GroundDerivation,
            hyps: tuple[Term, ...], concl: Term, tag) -> None:
    if child.sequent.concl != concl or _multiset(child.sequent.hyps) != _multiset(hyps):
        _fail(path, f"premise {tag} is {child.sequent}, expected "
                    f"{GroundSequent(hyps, concl)}")


def _check_node(env: GroundEnv, d: GroundDerivation, path) -> None:
    sig, defs, fsig = env.sig, env.defs, env.fsig
    seq = d.sequent
    hyps, concl = seq.hyps, seq.concl
    rule = d.rule
    cv = view(concl)

    def arity(n: int) -> None:
        if len(d.premises) != n:
            _fail(path, f"{rule} needs {n} premises, found {len(d.premises)}")

    def principal() -> Term:
        if d.principal is None or d.principal not in hyps:
            _fail(path, f"{rule} principal formula missing from the hypotheses")
        return d.principal

    def check_family(types: tuple[SimpleType, ...], expected) -> None:
        if d.family is None:
            _fail(path, f"{rule} needs a premise family")
        have = {key for key, _ in d.family}
        want = set(fsig.ground_tuples(types))
        if have != want:
            missing = want - have
            extra = have - want
            parts = []
            if missing:
                parts.append("premise family incomplete: missing "
                             + ", ".join(str(tuple(map(pretty, k))) for k in sorted(missing, key=repr)[:3]))
            if extra:
                parts.append("premise family has spurious members")
            _fail(path, f"{rule}: " + "; ".join(parts))
        for key, child in d.family:
            want_hyps, want_concl = expected(key)
            _expect(env, path, child, want_hyps, want_concl, f"family{tuple(map(pretty, key))}")
            _check_node(env, child, path + (f"fam{tuple(map(pretty, key))}",))

    if rule == "top_r":
        arity(0)
        if concl != TRUE:
            _fail(path, "top_r conclusion must be true")
        return
    if rule == "bot_l":
        arity(0)
        if FALSE not in hyps:
            _fail(path, "bot_l needs a false hypothesis")
        return
    if rule == "ax":
        arity(0)
        if len(hyps) != 1 or hyps[0] != concl or cv.kind != "atom":
            _fail(path, "axiom needs a single atomic hypothesis equal to the conclusion")
        return
    if rule == "and_r":
        arity(2)
        if cv.kind != "and":
            _fail(path, "and_r conclusion is not a conjunction")
        _expect(env, path, d.premises[0], hyps, cv.parts[0], 0)
        _expect(env, path, d.premises[1], hyps, cv.parts[1], 1)
    elif rule == "or_r":
        arity(1)
        if cv.kind != "or" or d.side not in ("left", "right"):
            _fail(path, "or_r needs a disjunction conclusion and a side")
        part = cv.parts[0 if d.side == "left" else 1]
        _expect(env, path, d.premises[0], hyps, part, 0)
    elif rule == "imp_r":
        arity(1)
        if cv.kind != "imp":
            _fail(path, "imp_r conclusion is not an implication")
        _expect(env, path, d.premises[0], hyps + (cv.parts[0],), cv.parts[1], 0)
    elif rule == "and_l":
        arity(1)
        p = principal()
        v = view(p)
        if v.kind != "and":
            _fail(path, "and_l principal is not a conjunction")
        rest = _remove_one(hyps, p)
        _expect(env, path, d.premises[0], rest + v.parts, concl, 0)
    elif rule == "or_l":
        arity(2)
        p = principal()
        v = view(p)
        if v.kind != "or":
            _fail(path, "or_l principal is not a disjunction")
        rest = _remove_one(hyps, p)
        _expect(env, path, d.premises[0], rest + (v.parts[0],), concl, 0)
        _expect(env, path, d.premises[1], rest + (v.parts[1],), concl, 1)
    elif rule == "imp_l":
        arity(2)
        p = principal()
        v = view(p)
        if v.kind != "imp":
            _fail(path, "imp_l principal is not an implication")
        rest = _remove_one(hyps, p)
        _expect(env, path, d.premises[0], rest, v.parts[0], "minor")
        _expect(env, path, d.premises[1], rest + (v.parts[1],), concl, "major")
    elif rule == "weaken":
        arity(1)
        p = principal()
        _expect(env, path, d.premises[0], _remove_one(hyps, p), concl, 0)
    elif rule == "contract":
        arity(1)
        p = principal()
        _expect(env, path, d.premises[0], hyps + (p,), concl, 0)
    elif rule == "all_r":
        if cv.kind != "all":
            _fail(path, "all_r conclusion is not universally quantified")
        body = cv.parts[0]
        assert isinstance(body, Abs) and cv.quant_ty is not None
        check_family((cv.quant_ty,),
                     lambda key: (hyps, instantiate(body, key[0])))
        return
    if rule == "ex_l":
        p = principal()
        v = view(p)
        if v.kind != "ex":
            _fail(path, "ex_l principal is not existentially quantified")
        body = v.parts[0]
        assert isinstance(body, Abs) and v.quant_ty is not None
        rest = _remove_one(hyps, p)
        check_family((v.quant_ty,),
                     lambda key: (rest + (instantiate(body, key[0]),), concl))
        return
    if rule == "all_l":
        arity(1)
        p = principal()
        v = view(p)
        if v.kind != "all" or d.witness is None:
            _fail(path, "all_l needs a universal principal and a witness")
        body = v.parts[0]
        assert isinstance(body, Abs)
        if not is_ground(d.witness):
            _fail(path, "all_l witness must be ground")
        rest = _remove_one(hyps, p)
        _expect(env, path, d.premises[0], rest + (instantiate(body, d.witness),), concl, 0)
    elif rule == "ex_r":
        arity(1)
        if cv.kind != "ex" or d.witness is None:
            _fail(path, "ex_r needs an existential conclusion and a witness")
        body = cv.parts[0]
        assert isinstance(body, Abs)
        _expect(env, path, d.premises[0], hyps, instantiate(body, d.witness), 0)
    elif rule == "mc":
        if len(d.premises) != len(d.cuts) + 1:
            _fail(path, "multicut needs one premise per cut plus the major premise")
        minors, major = d.premises[:-1], d.premises[-1]
        gamma = list(major.sequent.hyps)
        for c in d.cuts:
            if c not in gamma:
                _fail(path, f"cut formula {pretty(c)} missing from the major premise")
            gamma.remove(c)
        expected = Counter()
        for minor, c in zip(minors, d.cuts):
            if minor.sequent.concl != c:
                _fail(path, "minor premise does not conclude its cut formula")
            expected.update(minor.sequent.hyps)
        expected.update(gamma)
        if expected != _multiset(hyps):
            _fail(path, "multicut partition does not reconstruct the hypotheses")
        if major.sequent.concl != concl:
            _fail(path, "multicut major premise conclusion mismatch")
    elif rule == "delta_r":
        if cv.kind != "atom":
            _fail(path, "delta_r conclusion is not atomic")
        pred = atom_head(concl)
        if pred is None or defs.kind_of(pred) != FIX:
            _fail(path, "delta_r needs a fixed-point predicate conclusion")
        arity(1)
        clauses = defs.clauses_for(pred)
        if d.clause is None or not (0 <= d.clause < len(clauses)):
            _fail(path, "delta_r clause index out of range")
        clause = clauses[d.clause]
        rho = pattern_match(clause.head, clause.vars, concl)
        if rho is None:
            _fail(path, "delta_r clause does not match the conclusion atom")
        _expect(env, path, d.premises[0], hyps, subst_free(clause.body, rho), 0)
    elif rule == "mu_r":
        if cv.kind != "atom":
            _fail(path, "mu_r conclusion is not atomic"
                  )
        pred = atom_head(concl)
        if pred is None or defs.kind_of(pred) != IND:
            _fail(path, "mu_r needs an inductive predicate conclusion")
        arity(1)
        op = to_fixed_point_operator(defs, pred)
        _, args = strip_apps(concl)
        unfolded = apply_operator(sig, VarContext(()), op, Const(pred), args)
        _expect(env, path, d.premises[0], hyps, unfolded, 0)
    elif rule == "delta_l":
        p = principal()
        if view(p).kind != "atom":
            _fail(path, "delta_l principal is not atomic")
        pred = atom_head(p)
        if pred is None or defs.kind_of(pred) != FIX:
            _fail(path, "delta_l needs a fixed-point atomic principal")
        rest = _remove_one(hyps, p)
        expected = ground_delta_branches(env, p)
        if len(d.premises) != len(expected):
            _fail(path, f"delta_l needs {len(expected)} premises, found {len(d.premises)}")
        for i, (child, (_, body)) in enumerate(zip(d.premises, expected)):
            _expect(env, path, child, rest + (body,), concl, i)
    elif rule == "mu_l":
        p = principal()
        if view(p).kind != "atom":
            _fail(path, "mu_l principal is not atomic")
        pred = atom_head(p)
        if pred is None or defs.kind_of(pred) != IND:
            _fail(path, "mu_l needs an inductive atomic principal")
        if d.invariant is None or not is_ground(d.invariant):
            _fail(path, "mu_l needs a closed invariant")
        arity(1)
        op = to_fixed_point_operator(defs, pred)
        inv = normalize(sig, VarContext(()), d.invariant)
        rest = _remove_one(hyps, p)
        _, args = strip_apps(p)
        inv_args = normalize(sig, VarContext(()), app(inv, *args))
        _expect(env, path, d.premises[0], rest + (inv_args,), concl, "main")
        check_family(
            op.arg_types,
            lambda key: ((apply_operator(sig, VarContext(()), op, inv, key),),
                         normalize(sig, VarContext(()), app(inv, *key))),
        )
        _check_node(env, d.premises[0], path + (0,))
        return
    else:
        if rule not in ("top_r", "bot_l", "ax", "and_r", "or_r", "imp_r", "and_l",
                        "or_l", "imp_l", "weaken", "contract", "all_l", "ex_r",
                        "mc", "delta_r", "mu_r", "delta_l"):
            _fail(path, f"unknown ground rule {rule!r}")
    for i, child in enumerate(d.premises):
        _check_node(env, child, path + (i,))


def ground_delta_branches(env: GroundEnv, atom: Term) -> list[tuple[int, Term]]:
    """(clause index, body instance) for each clause matching a ground atom."""
    pred = atom_head(atom)
    assert pred is not None
    out = []
    for ci, clause in enumerate(env.defs.clauses_for(pred)):
        rho = pattern_match(clause.head, clause.vars, atom)
        if rho is not None:
            out.append((ci, subst_free(clause.body, rho)))
    return out


# ---------------------------------------------------------------------------
# Identity derivations
#
# Cut-free derivations of F |- F for any ground formula, by structural
# recursion.  Needed by the unfolding transformation when an axiom on an
# inductive atom must be replaced by its invariant instance.


def identity_derivation(env: GroundEnv, f: Term) -> GroundDerivation:
    v = view(f)
    if v.kind == "true":
        return g_top_r((TRUE,))
    if v.kind == "false":
        return g_bot_l((FALSE,), FALSE)
    if v.kind == "and":
        a, b = v.parts
        left = g_weaken(b, identity_derivation(env, a))
        right = g_weaken(a, identity_derivation(env, b))
        return g_and_l(f, g_and_r(left, right))
    if v.kind == "or":
        a, b = v.parts
        return g_or_l(f,
                      g_or_r("left", identity_derivation(env, a), b),
                      g_or_r("right", identity_derivation(env, b), a))
    if v.kind == "imp":
        a, b = v.parts
        inner = g_imp_l(f, identity_derivation(env, a),
                        g_weaken(a, identity_derivation(env, b)))
        return g_imp_r(inner, a)
    if v.kind == "all":
        body = v.parts[0]
        assert isinstance(body, Abs) and v.quant_ty is not None
        family = {}
        for t in env.fsig.ground_terms(v.quant_ty):
            opened = instantiate(body, t)
            family[(t,)] = g_all_l(f, t, identity_derivation(env, opened))
        return g_all_r((f,), f, family)
    if v.kind == "ex":
        body = v.parts[0]
        assert isinstance(body, Abs) and v.quant_ty is not None
        family = {}
        for t in env.fsig.ground_terms(v.quant_ty):
            opened = instantiate(body, t)
            family[(t,)] = g_ex_r(identity_derivation(env, opened), f, t)
        return g_ex_l(f, (f,), f, family)
    return g_ax(f)


# ---------------------------------------------------------------------------
# Unfolding: replace an inductive predicate by an invariant throughout
# the conclusion of a derivation.


class UnfoldError(GroundError):
    pass


def subst_pred_formula(env: GroundEnv, f: Term, pred: str, inv: Term) -> Term:
    """The formula with every atom of the predicate replaced by the
    invariant applied to the same arguments, renormalized."""
    from .definitions import _swap_pred

    return normalize(env.sig, VarContext(()), _swap_pred(f, pred, inv))


def unfold(env: GroundEnv, psi: GroundDerivation, pred: str, inv: Term,
           family: dict[FamilyKey, GroundDerivation]) -> GroundDerivation:
    """Derivation of D[S] from a derivation of D[p].

    The predicate must occur only outside implication left arguments in
    the conclusion; hypotheses are never touched.  Axioms on predicate
    atoms become induction nodes closed by an identity derivation, and
    unfolding nodes concluding the predicate become cuts against the
    invariant family.
    """
    f = psi.sequent.concl
    if not contains_pred(f, pred):
        return psi
    pol = polarity(f, pred)
    if not pol.strictly_positive:
        raise UnfoldError(
            f"{pred!r} occurs to the left of an implication in {pretty(f)}")
    new_concl = subst_pred_formula(env, f, pred, inv)
    hyps = psi.sequent.hyps
    rule = psi.rule

    def go(child: GroundDerivation) -> GroundDerivation:
        return unfold(env, child, pred, inv, family)

    if rule == "ax":
        # f is the predicate atom itself; close through the induction rule
        _, args = strip_apps(f)
        main = identity_derivation(env, new_concl)
        return g_mu_l(f, inv, main, family, (f,), new_concl)
    if rule == "mu_r" and atom_head(f) == pred:
        _, args = strip_apps(f)
        sub = go(psi.premises[0])  # now concludes B S args
        key = tuple(args)
        if key not in family:
            raise UnfoldError("invariant family misses an instance")
        return g_mc([sub], family[key], (sub.sequent.concl,))
    if rule == "and_r":
        return g_and_r(go(psi.premises[0]), go(psi.premises[1]))
    if rule == "or_r":
        v = view(new_concl)
        other = v.parts[1 if psi.side == "left" else 0]
        return g_or_r(psi.side, go(psi.premises[0]), other)
    if rule == "imp_r":
        v = view(f)
        return g_imp_r(go(psi.premises[0]), v.parts[0])
    if rule == "ex_r":
        sub = go(psi.premises[0])
        return g_ex_r(sub, new_concl, psi.witness)
    if rule == "all_r":
        fam = {key: go(child) for key, child in psi.family}
        return g_all_r(hyps, new_concl, fam)
    if rule == "top_r":
        return g_top_r(hyps)
    if rule == "bot_l":
        return GroundDerivation("bot_l", GroundSequent(hyps, new_concl), principal=FALSE)
    if rule == "and_l":
        return g_and_l(psi.principal, go(psi.premises[0]))
    if rule == "or_l":
        return g_or_l(psi.principal, go(psi.premises[0]), go(psi.premises[1]))
    if rule == "imp_l":
        return g_imp_l(psi.principal, psi.premises[0], go(psi.premises[1]))
    if rule == "all_l":
        return g_all_l(psi.principal, psi.witness, go(psi.premises[0]))
    if rule == "ex_l":
        v = view(psi.principal)
        body = v.parts[0]
        rest = _remove_one(hyps, psi.principal)
        fam = {key: go(child) for key, child in psi.family}
        return g_ex_l(psi.principal, hyps, new_concl, fam)
    if rule == "weaken":
        return g_weaken(psi.principal, go(psi.premises[0]))
    if rule == "contract":
        return g_contract(psi.principal, go(psi.premises[0]))
    if rule == "delta_l":
        return g_delta_l(psi.principal, hyps, new_concl,
                         tuple(go(c) for c in psi.premises))
    if rule == "mu_l":
        fam = psi.family_map()
        return g_mu_l(psi.principal, psi.invariant, go(psi.premises[0]), fam,
                      hyps, new_concl)
    if rule == "mc":
        minors, major = psi.premises[:-1], psi.premises[-1]
        return g_mc(list(minors), go(major), psi.cuts)
    if rule in ("delta_r", "mu_r"):
        # conclusion atom of a different predicate cannot contain pred
        raise UnfoldError(f"unexpected {rule} while unfolding {pretty(f)}")
    raise UnfoldError(f"unfold does not handle rule {rule!r}")


# ---------------------------------------------------------------------------
# Cut reduction


RIGHT_INTRO_FOR = {
    "and": "and_r",
    "or": "or_r",
    "imp": "imp_r",
    "all": "all_r",
    "ex": "ex_r",
}


@dataclass(frozen=True)
class ReduceStep:
    result: GroundDerivation
    case: str
    detail: str


def reduce_step(env: GroundEnv, d: GroundDerivation) -> ReduceStep:
    """One reduction of a redex (a derivation ending in a multicut).

    Deterministic: the major premise's last rule picks the case group;
    when the major premise is principal on several equal cut formulas,
    the leftmost one is cut.
    """
    if d.rule != "mc":
        raise GroundError("reduce_step needs a derivation ending in mc")
    minors, major = list(d.premises[:-1]), d.premises[-1]
    cuts = d.cuts

    if not cuts:
        return ReduceStep(major, "nullary", "mc() unwrapped")

    if major.rule == "ax":
        # the major context is a single atomic cut formula
        return ReduceStep(minors[0], "right-axiom", pretty(cuts[0]))

    if major.rule == "mc":
        return _right_multicut(env, minors, cuts, major)

    principal = major.principal
    if principal is not None and principal in cuts:
        i = cuts.index(principal)
        if major.rule == "mu_l":
            return _inductive_case(env, minors, cuts, major, i)
        if major.rule == "weaken":
            rest_minors = minors[:i] + minors[i + 1:]
            rest_cuts = cuts[:i] + cuts[i + 1:]
            inner = g_mc(rest_minors, major.premises[0], rest_cuts)
            result = g_weaken_many(minors[i].sequent.hyps, inner)
            return ReduceStep(result, "structural", f"weaken {pretty(principal)}")
        if major.rule == "contract":
            inner = g_mc(minors + [minors[i]], major.premises[0], cuts + (principal,))
            result = g_contract_many(minors[i].sequent.hyps, inner)
            return ReduceStep(result, "structural", f"contract {pretty(principal)}")
        pi = minors[i]
        if pi.rule == "ax":
            rest_minors = minors[:i] + minors[i + 1:]
            rest_cuts = cuts[:i] + cuts[i + 1:]
            return ReduceStep(g_mc(rest_minors, major, rest_cuts),
                              "left-axiom", pretty(principal))
        if pi.rule == "mc":
            return _left_multicut(env, minors, cuts, major, i)
        kind = view(principal).kind
        if kind == "atom":
            if pi.rule == "delta_r":
                return _essential_atom(env, minors, cuts, major, i)
            return _left_commutative(env, minors, cuts, major, i)
        if pi.rule == RIGHT_INTRO_FOR.get(kind):
            return _essential(env, minors, cuts, major, i)
        return _left_commutative(env, minors, cuts, major, i)

    return _right_commutative(env, minors, cuts, major)


def _replace(items: list, i: int, value) -> list:
    out = list(items)
    out[i] = value
    return out


def _right_multicut(env, minors, cuts, major) -> ReduceStep:
    """The major premise itself ends in mc: push the outer cuts into the
    inner premises they feed and merge."""
    inner_minors, inner_major = list(major.premises[:-1]), major.premises[-1]
    inner_cuts = major.cuts
    remaining = list(zip(minors, cuts))
    new_minors: list[GroundDerivation] = []
    new_cuts: list[Term] = []
    for im, icut in zip(inner_minors, inner_cuts):
        # outer cut formulas occurring in this inner minor's context get
        # cut right here
        here: list[tuple[GroundDerivation, Term]] = []
        hyp_pool = list(im.sequent.hyps)
        rest: list[tuple[GroundDerivation, Term]] = []
        for minor, cut in remaining:
            if cut in hyp_pool:
                hyp_pool.remove(cut)
                here.append((minor, cut))
            else:
                rest.append((minor, cut))
        remaining = rest
        if here:
            sub = g_mc([m for m, _ in here], im, tuple(c for _, c in here))
        else:
            sub = im
        new_minors.append(sub)
        new_cuts.append(icut)
    # whatever remains feeds the inner major premise
    for minor, cut in remaining:
        new_minors.append(minor)
        new_cuts.append(cut)
    result = g_mc(new_minors, inner_major, tuple(new_cuts))
    return ReduceStep(result, "right-multicut", f"merged {len(inner_cuts)} inner cuts")


def _left_multicut(env, minors, cuts, major, i) -> ReduceStep:
    """Minor premise i ends in mc: hoist its minors into the outer cut."""
    pi = minors[i]
    pi_minors, pi_major = list(pi.premises[:-1]), pi.premises[-1]
    inner = g_mc([pi_major], major, (cuts[i],))
    new_minors = minors[:i] + pi_minors + minors[i + 1:]
    new_cuts = cuts[:i] + pi.cuts + cuts[i + 1:]
    result = g_mc(new_minors, inner, new_cuts)
    return ReduceStep(result, "left-multicut", pretty(cuts[i]))


def _inductive_case(env, minors, cuts, major, i) -> ReduceStep:
    """The major premise inducts on cut formula i: unfold the minor
    premise by the invariant and cut the invariant instance instead."""
    atom = cuts[i]
    pred = atom_head(atom)
    assert pred is not None
    inv = major.invariant
    family = major.family_map()
    unfolded = unfold(env, minors[i], pred, inv, family)
    new_cut = unfolded.sequent.concl
    result = g_mc(_replace(minors, i, unfolded), major.premises[0],
                  cuts[:i] + (new_cut,) + cuts[i + 1:])
    return ReduceStep(result, "inductive", f"unfolded {pretty(atom)}")


def _essential_atom(env, minors, cuts, major, i) -> ReduceStep:
    """delta_r meets delta_l on the same ground atom: the unique ground
    clause instance connects them."""
    pi = minors[i]
    atom = cuts[i]
    branches = ground_delta_branches(env, atom)
    indices = [ci for ci, _ in branches]
    if pi.clause not in indices:
        raise GroundError("delta_r clause not among the delta_l branches")
    which = indices.index(pi.clause)
    body = branches[which][1]
    new_major = major.premises[which]
    result = g_mc(_replace(minors, i, pi.premises[0]), new_major,
                  cuts[:i] + (body,) + cuts[i + 1:])
    return ReduceStep(result, "essential", f"definition {pretty(atom)}")


def _essential(env, minors, cuts, major, i) -> ReduceStep:
    """Principal on both sides: decompose the cut formula."""
    pi = minors[i]
    cut = cuts[i]
    v = view(cut)
    delta_i = pi.sequent.hyps
    if v.kind == "and":
        # and_r premises share their context, so it gets contracted below
        left, right = pi.premises
        new_minors = minors[:i] + [left, right] + minors[i + 1:]
        new_cuts = cuts[:i] + (v.parts[0], v.parts[1]) + cuts[i + 1:]
        inner = g_mc(new_minors, major.premises[0], new_cuts)
        result = g_contract_many(delta_i, inner)
        return ReduceStep(result, "essential", f"conjunction {pretty(cut)}")
    if v.kind == "or":
        sub = pi.premises[0]
        which = 0 if pi.side == "left" else 1
        new_cut = v.parts[which]
        result = g_mc(_replace(minors, i, sub), major.premises[which],
                      cuts[:i] + (new_cut,) + cuts[i + 1:])
        return ReduceStep(result, "essential", f"disjunction {pretty(cut)}")
    if v.kind == "imp":
        a, b = v.parts
        others_minors = minors[:i] + minors[i + 1:]
        others_cuts = cuts[:i] + cuts[i + 1:]
        minor_a = g_mc(others_minors, major.premises[0], others_cuts)
        minor_b = g_mc([minor_a], pi.premises[0], (a,))
        inner = g_mc(_replace(minors, i, minor_b), major.premises[1],
                     cuts[:i] + (b,) + cuts[i + 1:])
        # the other cut contexts and the side context got duplicated
        dup = []
        for om in others_minors:
            dup.extend(om.sequent.hyps)
        gamma = list(major.premises[0].sequent.hyps)
        for c in others_cuts:
            gamma.remove(c)
        dup.extend(gamma)
        result = g_contract_many(dup, inner)
        return ReduceStep(result, "essential", f"implication {pretty(cut)}")
    if v.kind == "all":
        witness = major.witness
        member = pi.family_map()[(witness,)]
        body = view(cut).parts[0]
        new_cut = instantiate(body, witness)
        result = g_mc(_replace(minors, i, member), major.premises[0],
                      cuts[:i] + (new_cut,) + cuts[i + 1:])
        return ReduceStep(result, "essential", f"universal {pretty(cut)}")
    if v.kind == "ex":
        witness = pi.witness
        member = major.family_map()[(witness,)]
        body = view(cut).parts[0]
        new_cut = instantiate(body, witness)
        result = g_mc(_replace(minors, i, pi.premises[0]), member,
                      cuts[:i] + (new_cut,) + cuts[i + 1:])
        return ReduceStep(result, "essential", f"existential {pretty(cut)}")
    raise GroundError(f"no essential case for cut formula {pretty(cut)}")


def _left_commutative(env, minors, cuts, major, i) -> ReduceStep:
    """Minor premise i ends in a rule not introducing its cut formula:
    push the multicut above that rule."""
    pi = minors[i]
    rule = pi.rule

    def mc_with(sub: GroundDerivation) -> GroundDerivation:
        return g_mc(_replace(minors, i, sub), major, cuts)

    if rule == "bot_l":
        seq = GroundSequent(_conclusion_hyps(minors, cuts, major), major.sequent.concl)
        result = GroundDerivation("bot_l", seq, principal=FALSE)
    elif rule == "top_r":
        raise GroundError("left-commutative on top_r cannot happen")
    elif rule == "and_l":
        result = g_and_l(pi.principal, mc_with(pi.premises[0]))
    elif rule == "or_l":
        result = g_or_l(pi.principal, mc_with(pi.premises[0]), mc_with(pi.premises[1]))
    elif rule == "imp_l":
        extra = [h for j, m in enumerate(minors) if j != i for h in m.sequent.hyps]
        gamma = list(major.sequent.hyps)
        for c in cuts:
            gamma.remove(c)
        extra.extend(gamma)
        minor_prem = g_weaken_many(extra, pi.premises[0])
        result = g_imp_l(pi.principal, minor_prem, mc_with(pi.premises[1]))
    elif rule == "all_l":
        result = g_all_l(pi.principal, pi.witness, mc_with(pi.premises[0]))
    elif rule == "ex_l":
        fam = {key: mc_with(child) for key, child in pi.family}
        seq_hyps = _conclusion_hyps(minors, cuts, major)
        result = g_ex_l(pi.principal, seq_hyps, major.sequent.concl, fam)
    elif rule == "weaken":
        result = g_weaken(pi.principal, mc_with(pi.premises[0]))
    elif rule == "contract":
        result = g_contract(pi.principal, mc_with(pi.premises[0]))
    elif rule == "delta_l":
        result = g_delta_l(pi.principal, _conclusion_hyps(minors, cuts, major),
                           major.sequent.concl,
                           tuple(mc_with(c) for c in pi.premises))
    elif rule == "mu_l":
        result = g_mu_l(pi.principal, pi.invariant, mc_with(pi.premises[0]),
                        pi.family_map(), _conclusion_hyps(minors, cuts, major),
                        major.sequent.concl)
    else:
        raise GroundError(f"no left-commutative case for rule {rule!r}")
    return ReduceStep(result, "left-commutative", f"{rule} on premise {i}")


def _conclusion_hyps(minors, cuts, major) -> tuple[Term, ...]:
    hyps: tuple[Term, ...] = ()
    for m in minors:
        hyps += m.sequent.hyps
    gamma = list(major.sequent.hyps)
    for c in cuts:
        gamma.remove(c)
    return hyps + tuple(gamma)


def _right_commutative(env, minors, cuts, major) -> ReduceStep:
    """The major premise's last rule does not touch a cut formula: push
    the multicut into its premises."""
    rule = major.rule

    def mc_into(sub: GroundDerivation) -> GroundDerivation:
        return g_mc(list(minors), sub, cuts)

    if rule == "top_r":
        result: GroundDerivation = g_top_r(_conclusion_hyps(minors, cuts, major))
    elif rule == "bot_l":
        seq = GroundSequent(_conclusion_hyps(minors, cuts, major), major.sequent.concl)
        result = GroundDerivation("bot_l", seq, principal=FALSE)
    elif rule == "and_r":
        result = g_and_r(mc_into(major.premises[0]), mc_into(major.premises[1]))
    elif rule == "or_r":
        other = view(major.sequent.concl).parts[1 if major.side == "left" else 0]
        result = g_or_r(major.side, mc_into(major.premises[0]), other)
    elif rule == "imp_r":
        a = view(major.sequent.concl).parts[0]
        result = g_imp_r(mc_into(major.premises[0]), a)
    elif rule == "all_r":
        fam = {key: mc_into(child) for key, child in major.family}
        result = g_all_r(_conclusion_hyps(minors, cuts, major),
                         major.sequent.concl, fam)
    elif rule == "ex_r":
        result = g_ex_r(mc_into(major.premises[0]), major.sequent.concl, major.witness)
    elif rule == "and_l":
        result = g_and_l(major.principal, mc_into(major.premises[0]))
    elif rule == "or_l":
        result = g_or_l(major.principal, mc_into(major.premises[0]),
                        mc_into(major.premises[1]))
    elif rule == "imp_l":
        result = g_imp_l(major.principal, mc_into(major.premises[0]),
                         mc_into(major.premises[1]))
    elif rule == "all_l":
        result = g_all_l(major.principal, major.witness, mc_into(major.premises[0]))
    elif rule == "ex_l":
        fam = {key: mc_into(child) for key, child in major.family}
        result = g_ex_l(major.principal, _conclusion_hyps(minors, cuts, major),
                        major.sequent.concl, fam)
    elif rule == "weaken":
        result = g_weaken(major.principal, mc_into(major.premises[0]))
    elif rule == "contract":
        result = g_contract(major.principal, mc_into(major.premises[0]))
    elif rule == "delta_r":
        result = g_delta_r(mc_into(major.premises[0]), major.sequent.concl, major.clause)
    elif rule == "mu_r":
        result = g_mu_r(mc_into(major.premises[0]), major.sequent.concl)
    elif rule == "delta_l":
        result = g_delta_l(major.principal, _conclusion_hyps(minors, cuts, major),
                           major.sequent.concl,
                           tuple(mc_into(c) for c in major.premises))
    elif rule == "mu_l":
        result = g_mu_l(major.principal, major.invariant, mc_into(major.premises[0]),
                        major.family_map(), _conclusion_hyps(minors, cuts, major),
                        major.sequent.concl)
    else:
        raise GroundError(f"no right-commutative case for rule {rule!r}")
    return ReduceStep(result, "right-commutative", rule)


# ---------------------------------------------------------------------------
# Normalization


@dataclass(frozen=True)
class TraceEntry:
    step: int
    case: str
    path: str
    tree_size: int

    def line(self) -> str:
        return f"{self.step}\t{self.case}\t{self.path}\t{self.tree_size}"


@dataclass
class NormalizeResult:
    derivation: GroundDerivation
    steps: int
    trace: list[TraceEntry]
    fuel_exhausted: bool


def _find_innermost_mc(d: GroundDerivation, path=()) -> tuple | None:
    for i, child in enumerate(d.premises):
        found = _find_innermost_mc(child, path + (("p", i),))
        if found:
            return found
    if d.family:
        for key, child in d.family:
            found = _find_innermost_mc(child, path + (("f", key),))
            if found:
                return found
    if d.rule == "mc":
        return path, d
    return None


def _replace_at(d: GroundDerivation, path, new: GroundDerivation) -> GroundDerivation:
    if not path:
        return new
    kind, which = path[0]
    if kind == "p":
        premises = list(d.premises)
        premises[which] = _replace_at(premises[which], path[1:], new)
        return replace_node(d, premises=tuple(premises))
    fam = list(d.family)
    for i, (key, child) in enumerate(fam):
        if key == which:
            fam[i] = (key, _replace_at(child, path[1:], new))
            break
    return replace_node(d, family=tuple(fam))


def replace_node(d: GroundDerivation, **kw) -> GroundDerivation:
    out = GroundDerivation(
        rule=d.rule, sequent=d.sequent, premises=kw.get("premises", d.premises),
        family=kw.get("family", d.family), principal=d.principal,
        witness=d.witness, side=d.side, clause=d.clause,
        invariant=d.invariant, cuts=d.cuts,
    )
    return out


def _path_str(path) -> str:
    if not path:
        return "root"
    parts = []
    for kind, which in path:
        if kind == "p":
            parts.append(str(which))
        else:
            parts.append("fam(" + ",".join(pretty(t) for t in which) + ")")
    return "/".join(parts)


def normalize_derivation(env: GroundEnv, d: GroundDerivation,
                         fuel: int = 100_000,
                         validate_each: bool = False) -> NormalizeResult:
    """Reduce innermost multicuts until the derivation is cut-free.

    Termination is the content of the cut-admissibility theorem; the
    fuel is an engineering guard and running out on admissible input is
    a defect, not an accepted outcome.
    """
    goal = d.sequent
    trace: list[TraceEntry] = []
    steps = 0
    while steps < fuel:
        found = _find_innermost_mc(d)
        if found is None:
            return NormalizeResult(d, steps, trace, False)
        path, redex = found
        step = reduce_step(env, redex)
        if step.result.sequent.concl != redex.sequent.concl or (
            _multiset(step.result.sequent.hyps) != _multiset(redex.sequent.hyps)
        ):
            raise GroundError(
                f"reduction changed the end sequent in case {step.case}: "
                f"{redex.sequent} became {step.result.sequent}")
        d = _replace_at(d, path, step.result)
        steps += 1
        trace.append(TraceEntry(steps, step.case, _path_str(path), d.size()))
        if validate_each:
            check_ground_derivation(env, d, goal)
    return NormalizeResult(d, steps, trace, True)


# ---------------------------------------------------------------------------
# Grounding interpretation


def ground_interpret(env: GroundEnv, tree: ProofTree, goal: Sequent,
                     delta: Substitution) -> GroundDerivation:
    """Interpret an accepted derivation at a grounding substitution.

    Quantifier and induction premises materialize as full families over
    the finitary enumerations; definition-rule branches whose unifier is
    incompatible with the grounding are pruned.
    """
    missing = set(goal.ctx.names()) - set(delta.bindings)
    if missing:
        raise GroundError(f"substitution misses goal variables {sorted(missing)}")
    if not all(is_ground(t) for t in delta.bindings.values()):
        raise GroundError("interpretation needs a grounding substitution")
    return _interp(env, tree, goal, dict(delta.bindings))


def _ground_seq(goal: Sequent, dl: dict[str, Term]) -> GroundSequent:
    return GroundSequent(tuple(subst_free(h, dl) for h in goal.hyps),
                         subst_free(goal.concl, dl))


def _interp(env: GroundEnv, tree: ProofTree, goal: Sequent,
            dl: dict[str, Term]) -> GroundDerivation:
    from .sequents import _premise_goals

    sig, defs, fsig = env.sig, env.defs, env.fsig
    rule = tree.rule
    gseq = _ground_seq(goal, dl)
    premise_goals = _premise_goals(sig, defs, tree, goal)

    def child(i: int, sub_dl: dict[str, Term] | None = None) -> GroundDerivation:
        return _interp(env, tree.premises[i], premise_goals[i],
                       dl if sub_dl is None else sub_dl)

    if rule in ("top_r", "bot_l", "ax"):
        principal = FALSE if rule == "bot_l" else None
        return GroundDerivation(rule, gseq, principal=principal)
    if rule in ("and_r", "or_l", "imp_l"):
        principal = subst_free(goal.hyps[tree.hyp], dl) if tree.hyp is not None else None
        return GroundDerivation(rule, gseq, (child(0), child(1)), principal=principal)
    if rule in ("and_l", "imp_r", "or_r"):
        principal = subst_free(goal.hyps[tree.hyp], dl) if tree.hyp is not None else None
        return GroundDerivation(rule, gseq, (child(0),), principal=principal,
                                side=tree.side)
    if rule in ("weaken", "contract"):
        principal = subst_free(goal.hyps[tree.hyp], dl)
        return GroundDerivation(rule, gseq, (child(0),), principal=principal)
    if rule in ("all_l", "ex_r"):
        witness = subst_free(normalize(sig, goal.ctx, tree.witness), dl)
        principal = subst_free(goal.hyps[tree.hyp], dl) if rule == "all_l" else None
        return GroundDerivation(rule, gseq, (child(0),), principal=principal,
                                witness=witness)
    if rule in ("all_r", "ex_l"):
        sub_goal = premise_goals[0]
        if rule == "all_r":
            quant_ty = view(goal.concl).quant_ty
            principal = None
        else:
            quant_ty = view(goal.hyps[tree.hyp]).quant_ty
            principal = subst_free(goal.hyps[tree.hyp], dl)
        fam = {}
        for t in fsig.ground_terms(quant_ty):
            sub_dl = dict(dl)
            sub_dl[tree.fresh] = t
            fam[(t,)] = _interp(env, tree.premises[0], sub_goal, sub_dl)
        fam_t = tuple(sorted(fam.items(), key=lambda kv: repr(kv[0])))
        return GroundDerivation(rule, gseq, family=fam_t, principal=principal)
    if rule == "mc":
        subs = [child(i) for i in range(len(tree.premises))]
        cuts = tuple(subst_free(normalize(sig, goal.ctx, c), dl) for c in tree.cuts)
        return GroundDerivation("mc", gseq, tuple(subs), cuts=cuts)
    if rule == "delta_r":
        return GroundDerivation("delta_r", gseq, (child(0),), clause=_ground_clause_index(
            env, gseq.concl, tree.clause))
    if rule == "mu_r":
        return GroundDerivation("mu_r", gseq, (child(0),))
    if rule == "delta_l":
        atom = goal.hyps[tree.hyp]
        ground_atom = subst_free(atom, dl)
        branches = expand_delta_left(sig, defs, goal, tree.hyp)
        ground_branches = ground_delta_branches(env, ground_atom)
        premises: list[GroundDerivation] = []
        for ci, body in ground_branches:
            which = next((j for j, b in enumerate(branches) if b.clause_index == ci), None)
            if which is None:
                raise GroundError(
                    "ground clause instance has no generic counterpart")
            branch = branches[which]
            sub_dl = _branch_substitution(env, branch, goal, dl, ground_atom)
            premises.append(_interp(env, tree.premises[which], branch.premise, sub_dl))
        return GroundDerivation("delta_l", gseq, tuple(premises), principal=ground_atom)
    if rule == "mu_l":
        atom = goal.hyps[tree.hyp]
        ground_atom = subst_free(atom, dl)
        pred = atom_head(atom)
        op = to_fixed_point_operator(defs, pred)
        inv_goal, _ = premise_goals
        fam = {}
        for key in fsig.ground_tuples(op.arg_types):
            sub_dl = dict(zip(inv_goal.ctx.names(), key))
            fam[key] = _interp(env, tree.premises[0], inv_goal, sub_dl)
        fam_t = tuple(sorted(fam.items(), key=lambda kv: repr(kv[0])))
        main = _interp(env, tree.premises[1], premise_goals[1], dl)
        inv = normalize(sig, VarContext(()), tree.invariant)
        return GroundDerivation("mu_l", gseq, (main,), family=fam_t,
                                principal=ground_atom, invariant=inv)
    raise GroundError(f"cannot interpret rule {rule!r}")


def _ground_clause_index(env: GroundEnv, atom: Term, clause: int) -> int:
    branches = ground_delta_branches(env, atom)
    for ci, _ in branches:
        if ci == clause:
            return clause
    raise GroundError("delta_r clause no longer matches after grounding")


def _branch_substitution(env: GroundEnv, branch: DeltaBranch, goal: Sequent,
                         dl: dict[str, Term], ground_atom: Term) -> dict[str, Term]:
    """Grounding of the branch premise context compatible with the goal
    grounding and the unique ground clause match."""
    rho = pattern_match(branch.renamed.head, branch.renamed.vars, ground_atom)
    assert rho is not None
    acc: dict[str, Term] = {}
    for y in goal.ctx.names():
        acc = pattern_match(branch.theta[y], branch.premise.ctx, dl[y], acc)
        if acc is None:
            raise GroundError("grounding does not factor through the unifier")
    for x in branch.renamed.vars.names():
        acc = pattern_match(branch.unifier.bindings[x], branch.premise.ctx,
                            rho[x], acc)
        if acc is None:
            raise GroundError("ground clause match does not factor through the unifier")
    for name in branch.premise.ctx.names():
        if name not in acc:
            raise GroundError(f"branch grounding misses {name!r}")
    return acc


# ---------------------------------------------------------------------------
# Consistency check


@dataclass
class NoBotReport:
    ok: bool
    analysis: list[str]
    counterexample: GroundDerivation | None = None


def verify_no_bot(env: GroundEnv, depth: int = 4) -> NoBotReport:
    """Exhaustive rule-by-rule analysis of cut-free derivability of |- false.

    With no hypotheses and a false conclusion no rule applies at the
    root, so the search space is exhausted immediately; the report
    records the per-rule reasons.
    """
    analysis = []
    analysis.append("ax: conclusion false is not an atomic formula")
    analysis.append("top_r: conclusion is false, not true")
    analysis.append("and_r, or_r, imp_r, all_r, ex_r: conclusion false has no top-level connective")
    analysis.append("delta_r, mu_r: conclusion false is not a predicate atom")
    analysis.append("bot_l, and_l, or_l, imp_l, all_l, ex_l, delta_l, mu_l, weaken, contract:"
                    " no hypothesis to act on")
    analysis.append("mc: excluded, the search is over cut-free derivations")
    found = _search_cutfree(env, GroundSequent((), FALSE), depth)
    if found is not None:
        return NoBotReport(False, analysis, found)
    return NoBotReport(True, analysis)


def _search_cutfree(env: GroundEnv, goal: GroundSequent, depth: int):
    """Bounded backward search over the cut-free ground rules.

    Only used as a soundness alarm; for |- false nothing is applicable.
    """
    if depth <= 0:
        return None
    concl = goal.concl
    cv = view(concl)
    if cv.kind == "true":
        return g_top_r(goal.hyps)
    if FALSE in goal.hyps:
        return GroundDerivation("bot_l", goal, principal=FALSE)
    if cv.kind == "atom" and len(goal.hyps) == 1 and goal.hyps[0] == concl:
        return g_ax(concl)
    if cv.kind == "atom":
        pred = atom_head(concl)
        kind = env.defs.kind_of(pred) if pred else None
        if kind == FIX:
            for ci, body in ground_delta_branches(env, concl):
                sub = _search_cutfree(env, GroundSequent(goal.hyps, body), depth - 1)
                if sub is not None:
                    return g_delta_r(sub, concl, ci)
    return None
