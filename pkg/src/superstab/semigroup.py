"""Commutative semigroups with identity and their element algebra.

Two concrete families are provided:

* ``pos_real`` -- the strictly positive reals under multiplication,
  identity 1.0;
* ``free_monoid`` -- the free commutative monoid over k named generators,
  elements are k-vectors of nonnegative integer exponents, the operation
  is componentwise addition, identity is the zero vector.

Positive-real elements also carry their natural logarithm so that deep
anchor orbits (a^n y for n up to ~60) stay usable even when the raw
product approaches the floating-point range.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import DomainMismatchError, OrbitRangeError

POS_REAL = "pos_real"
FREE_MONOID = "free_monoid"

# exp_vector components must stay exactly representable as float64 and
# safely addable without wraparound
_EXP_COMPONENT_CAP = 2**62


@dataclass(frozen=True)
class Element:
    """A semigroup point: positive real or exponent vector, never both."""

    real: float | None = None
    exp: tuple[int, ...] | None = None
    # ln(real); excluded from equality/hash, maintained alongside products
    log_real: float = field(default=0.0, compare=False, repr=False)

    def __post_init__(self):
        if (self.real is None) == (self.exp is None):
            raise ValueError("element needs exactly one of real/exp payloads")
        if self.real is not None:
            if not (math.isfinite(self.real) and self.real > 0):
                raise ValueError(f"pos_real payload must be finite and > 0, got {self.real!r}")
        else:
            if any((not isinstance(c, int)) or c < 0 for c in self.exp):
                raise ValueError(f"exp_vector components must be nonnegative integers, got {self.exp!r}")

    @classmethod
    def from_real(cls, value: float) -> "Element":
        value = float(value)
        return cls(real=value, log_real=math.log(value))

    @classmethod
    def from_exponents(cls, exponents) -> "Element":
        return cls(exp=tuple(int(c) for c in exponents))

    @property
    def kind(self) -> str:
        return POS_REAL if self.real is not None else FREE_MONOID

    @property
    def arity(self) -> int:
        return 0 if self.exp is None else len(self.exp)

    def to_obj(self) -> dict:
        if self.real is not None:
            return {"real": self.real}
        return {"exp": list(self.exp)}

    @classmethod
    def from_obj(cls, obj: dict) -> "Element":
        if "real" in obj:
            return cls.from_real(obj["real"])
        if "exp" in obj:
            return cls.from_exponents(obj["exp"])
        raise ValueError(f"element object needs a 'real' or 'exp' field, got {obj!r}")


def canonical_key(x: Element) -> str:
    """Stable string form used for table keys and deterministic tie-breaks."""
    return json.dumps(x.to_obj(), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class SemigroupDescriptor:
    """Names one of the two supported families and its generators."""

    kind: str
    generators: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (POS_REAL, FREE_MONOID):
            raise ValueError(f"unknown semigroup kind {self.kind!r}")
        if self.kind == POS_REAL and self.generators:
            raise ValueError("pos_real semigroups carry no generator names")
        if self.kind == FREE_MONOID and not self.generators:
            raise ValueError("free_monoid semigroups need at least one generator")
        object.__setattr__(self, "generators", tuple(self.generators))

    @property
    def arity(self) -> int:
        return len(self.generators)

    def identity(self) -> Element:
        if self.kind == POS_REAL:
            return Element(real=1.0, log_real=0.0)
        return Element(exp=(0,) * self.arity)

    def belongs(self, x: Element) -> bool:
        if self.kind == POS_REAL:
            return x.real is not None
        return x.exp is not None and len(x.exp) == self.arity

    def ensure_member(self, x: Element) -> None:
        if not self.belongs(x):
            raise DomainMismatchError(
                f"element {canonical_key(x)} does not belong to {self.kind} semigroup of arity {self.arity}"
            )

    def to_obj(self) -> dict:
        return {"kind": self.kind, "generators": list(self.generators)}

    @classmethod
    def from_obj(cls, obj: dict) -> "SemigroupDescriptor":
        return cls(kind=obj["kind"], generators=tuple(obj.get("generators", ())))


def combine(semigroup: SemigroupDescriptor, x: Element, y: Element) -> Element:
    """Semigroup product: real multiplication or componentwise exponent sum."""
    semigroup.ensure_member(x)
    semigroup.ensure_member(y)
    if semigroup.kind == POS_REAL:
        raw = x.real * y.real
        if not math.isfinite(raw):
            raise OrbitRangeError("positive-real product left the float range")
        return Element(real=raw, log_real=x.log_real + y.log_real)
    comps = tuple(a + b for a, b in zip(x.exp, y.exp))
    if any(c > _EXP_COMPONENT_CAP for c in comps):
        raise OrbitRangeError(f"exponent component exceeded {_EXP_COMPONENT_CAP} in product")
    return Element(exp=comps)


def power(semigroup: SemigroupDescriptor, a: Element, n: int) -> Element:
    """n-fold product of ``a`` with itself; ``power(a, 0)`` is the identity."""
    semigroup.ensure_member(a)
    if n < 0 or n != int(n):
        raise ValueError(f"power exponent must be a nonnegative integer, got {n!r}")
    n = int(n)
    if n == 0:
        return semigroup.identity()
    if semigroup.kind == POS_REAL:
        try:
            raw = a.real**n
        except OverflowError:
            raise OrbitRangeError(f"a^{n} left the float range; reduce the iteration depth") from None
        if not math.isfinite(raw):
            raise OrbitRangeError(f"a^{n} left the float range; reduce the iteration depth")
        return Element(real=raw, log_real=n * a.log_real)
    comps = tuple(c * n for c in a.exp)
    if any(c > _EXP_COMPONENT_CAP for c in comps):
        raise OrbitRangeError(
            f"exponent component exceeded {_EXP_COMPONENT_CAP} at power {n}; reduce the iteration depth"
        )
    return Element(exp=comps)


def orbit_elements(
    semigroup: SemigroupDescriptor, a: Element, y: Element, depth: int
) -> list[Element]:
    """Canonical orbit [y, ay, a^2 y, ..., a^depth y].

    Every module computes orbit points through this helper (power first,
    then one combine) so that table lookups and report keys agree bit for
    bit across call sites.
    """
    return [combine(semigroup, power(semigroup, a, k), y) for k in range(depth + 1)]
