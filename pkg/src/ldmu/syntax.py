"""Simple types, signatures and variable contexts.

The typing universe: base types, the type ``o`` of propositions and
arrow types.  A type is *first-order* when ``o`` does not occur in it;
predicate types are ``o`` or arrows from first-order types into a
predicate type.  Variable contexts only ever carry first-order types.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class LdmuError(Exception):
    """Base class for all kernel errors."""


class TypeError_(LdmuError):
    """Ill-typed term or ill-formed declaration."""


# ---------------------------------------------------------------------------
# Simple types


@dataclass(frozen=True)
class SimpleType:
    pass


@dataclass(frozen=True)
class Base(SimpleType):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Prop(SimpleType):
    def __str__(self) -> str:
        return "o"


@dataclass(frozen=True)
class Arrow(SimpleType):
    dom: SimpleType
    cod: SimpleType

    def __str__(self) -> str:
        dom = f"({self.dom})" if isinstance(self.dom, Arrow) else str(self.dom)
        return f"{dom} -> {self.cod}"


PROP = Prop()


def arrow(*types: SimpleType) -> SimpleType:
    """Right-nested arrow type from the given components."""
    if not types:
        raise ValueError("arrow() needs at least one type")
    result = types[-1]
    for ty in reversed(types[:-1]):
        result = Arrow(ty, result)
    return result


def first_order(ty: SimpleType) -> bool:
    """True iff ``o`` does not occur in the type."""
    if isinstance(ty, Base):
        return True
    if isinstance(ty, Prop):
        return False
    assert isinstance(ty, Arrow)
    return first_order(ty.dom) and first_order(ty.cod)


def is_predicate_type(ty: SimpleType) -> bool:
    """True iff the type is ``o`` or first-order arguments ending in ``o``."""
    if isinstance(ty, Prop):
        return True
    if isinstance(ty, Arrow):
        return first_order(ty.dom) and is_predicate_type(ty.cod)
    return False


def arg_types(ty: SimpleType) -> tuple[SimpleType, ...]:
    """Argument types of an arrow chain, outermost first."""
    args: list[SimpleType] = []
    while isinstance(ty, Arrow):
        args.append(ty.dom)
        ty = ty.cod
    return tuple(args)


def result_type(ty: SimpleType) -> SimpleType:
    while isinstance(ty, Arrow):
        ty = ty.cod
    return ty


def type_key(ty: SimpleType) -> str:
    """Compact canonical spelling, used to index type-instantiated constants."""
    if isinstance(ty, Base):
        return ty.name
    if isinstance(ty, Prop):
        return "o"
    assert isinstance(ty, Arrow)
    return f"({type_key(ty.dom)}>{type_key(ty.cod)})"


# ---------------------------------------------------------------------------
# Logical constants
#
# true, false, and, or, imp are ordinary constants.  Quantifiers and
# equality exist at every first-order type; they are realized as
# type-indexed constant names "all:<key>", "ex:<key>", "eq:<key>" so
# that every term keeps a unique simple type.

TRUE_NAME = "true"
FALSE_NAME = "false"
AND_NAME = "and"
OR_NAME = "or"
IMP_NAME = "imp"
ALL_PREFIX = "all:"
EX_PREFIX = "ex:"
EQ_PREFIX = "eq:"

RESERVED_NAMES = frozenset(
    {TRUE_NAME, FALSE_NAME, AND_NAME, OR_NAME, IMP_NAME, "all", "ex", "eq",
     "forall", "exists"}
)

_FIXED_LOGICAL_TYPES: dict[str, SimpleType] = {
    TRUE_NAME: PROP,
    FALSE_NAME: PROP,
    AND_NAME: arrow(PROP, PROP, PROP),
    OR_NAME: arrow(PROP, PROP, PROP),
    IMP_NAME: arrow(PROP, PROP, PROP),
}


def logical_constant_type(name: str, base_types: dict[str, SimpleType] | None = None) -> SimpleType | None:
    """Type of a logical constant name, or None if the name is not logical.

    Type-indexed names carry their index in the name itself, so the
    index is re-parsed here rather than looked up.
    """
    if name in _FIXED_LOGICAL_TYPES:
        return _FIXED_LOGICAL_TYPES[name]
    for prefix in (ALL_PREFIX, EX_PREFIX, EQ_PREFIX):
        if name.startswith(prefix):
            ty = parse_type_key(name[len(prefix):])
            if prefix == EQ_PREFIX:
                return arrow(ty, ty, PROP)
            return Arrow(Arrow(ty, PROP), PROP)
    return None


def parse_type_key(key: str) -> SimpleType:
    """Inverse of type_key."""
    pos = 0

    def parse() -> SimpleType:
        nonlocal pos
        if pos < len(key) and key[pos] == "(":
            pos += 1
            dom = parse()
            assert key[pos] == ">", key
            pos += 1
            cod = parse()
            assert key[pos] == ")", key
            pos += 1
            return Arrow(dom, cod)
        start = pos
        while pos < len(key) and key[pos] not in "()>":
            pos += 1
        name = key[start:pos]
        return PROP if name == "o" else Base(name)

    ty = parse()
    if pos != len(key):
        raise ValueError(f"trailing junk in type key {key!r}")
    return ty


# ---------------------------------------------------------------------------
# Signatures and variable contexts


@dataclass(frozen=True)
class Signature:
    """Declared constants.  Logical constants are implicit and reserved."""

    constants: dict[str, SimpleType] = field(default_factory=dict)

    def declare(self, name: str, ty: SimpleType) -> None:
        if name in RESERVED_NAMES or logical_constant_type(name) is not None:
            raise TypeError_(f"cannot redeclare logical constant {name!r}")
        if name in self.constants:
            raise TypeError_(f"duplicate constant {name!r}")
        if not (first_order(ty) or is_predicate_type(ty)):
            raise TypeError_(
                f"constant {name!r} must have a first-order or predicate type, got {ty}"
            )
        self.constants[name] = ty

    def type_of(self, name: str) -> SimpleType | None:
        ty = logical_constant_type(name)
        if ty is not None:
            return ty
        return self.constants.get(name)

    def is_predicate(self, name: str) -> bool:
        ty = self.type_of(name)
        return ty is not None and is_predicate_type(ty) and (
            name.startswith(EQ_PREFIX) or name in self.constants
        )

    def base_type_names(self) -> set[str]:
        names: set[str] = set()

        def collect(ty: SimpleType) -> None:
            if isinstance(ty, Base):
                names.add(ty.name)
            elif isinstance(ty, Arrow):
                collect(ty.dom)
                collect(ty.cod)

        for ty in self.constants.values():
            collect(ty)
        return names


@dataclass(frozen=True)
class VarContext:
    """Finite map from variable names to first-order types."""

    vars: tuple[tuple[str, SimpleType], ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name, ty in self.vars:
            if name in seen:
                raise TypeError_(f"duplicate context variable {name!r}")
            seen.add(name)
            if not first_order(ty):
                raise TypeError_(f"context variable {name!r} must be first-order, got {ty}")

    @staticmethod
    def of(*pairs: tuple[str, SimpleType]) -> VarContext:
        return VarContext(tuple(pairs))

    def type_of(self, name: str) -> SimpleType | None:
        for n, ty in self.vars:
            if n == name:
                return ty
        return None

    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.vars)

    def extend(self, name: str, ty: SimpleType) -> VarContext:
        return VarContext(self.vars + ((name, ty),))

    def remove(self, name: str) -> VarContext:
        return VarContext(tuple((n, t) for n, t in self.vars if n != name))

    def merge(self, other: VarContext) -> VarContext:
        ctx = self
        for n, t in other.vars:
            existing = ctx.type_of(n)
            if existing is None:
                ctx = ctx.extend(n, t)
            elif existing != t:
                raise TypeError_(f"variable {n!r} carried two types: {existing} and {t}")
        return ctx

    def __contains__(self, name: str) -> bool:
        return self.type_of(name) is not None

    def __len__(self) -> int:
        return len(self.vars)

    def __str__(self) -> str:
        return ", ".join(f"{n}:{t}" for n, t in self.vars) or "."


EMPTY_CTX = VarContext()
