"""Deterministic instance generators behind the CLI ``generate`` command.

Every preset is fully determined by its flags and seed: omitted numeric
parameters are drawn from ``numpy.random.default_rng(seed)``, so equal
command lines reproduce byte-identical instance files.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .instance import (
    BoundedSin,
    ConstantBound,
    ExactExponential,
    IdentityMap,
    Instance,
    MultiplicativeForm,
    Perturbed,
)
from .semigroup import FREE_MONOID, POS_REAL, Element, SemigroupDescriptor

DEFAULT_SEED = 0


def auto_amplitude(delta: float, g_max: float) -> float:
    """Largest decaying-perturbation amplitude that keeps the sample
    inside the constant-delta band, with 10% headroom.

    The worst ratio over pairs is at most (1 + amp)^g_max, so choosing
    amp = (1 + 0.9 delta)^(1/g_max) - 1 caps it at 1 + 0.9 delta.
    """
    if delta <= 0:
        return 0.0
    return (1.0 + 0.9 * delta) ** (1.0 / g_max) - 1.0


def _real_grid(values) -> tuple[Element, ...]:
    return tuple(Element.from_real(v) for v in values)


def _draw_c(c: float | None, seed: int) -> float:
    if c is not None:
        return float(c)
    rng = np.random.default_rng(seed)
    return float(rng.uniform(-2.0, 2.0))


def make_exact_cor23(
    c: float | None = None, grid=None, seed: int = DEFAULT_SEED
) -> Instance:
    """Exact solution on positive reals: f(x) = e^{c x}, g the identity."""
    values = list(grid) if grid is not None else [float(v) for v in range(1, 9)]
    return Instance(
        semigroup=SemigroupDescriptor(kind=POS_REAL),
        f=ExactExponential(c=_draw_c(c, seed)),
        g=IdentityMap(),
        psi=ConstantBound(delta=0.0),
        grid=_real_grid(values),
    )


def make_perturbed_cor23(
    delta: float = 0.2,
    amp: float | None = None,
    c: float | None = None,
    grid=None,
    seed: int = DEFAULT_SEED,
) -> Instance:
    """Approximate solution with a decaying relative error.

    f(x) = e^{c x} / (1 + amp x^{-2}); with the default auto amplitude the
    constant-delta band holds on the whole sample grid.  An explicit
    ``amp`` is taken verbatim, even if it breaks the band.
    """
    values = list(grid) if grid is not None else [float(v) for v in range(1, 9)]
    if min(values) < 1.0:
        raise ValueError("perturbed preset needs grid values >= 1 (band fails below 1)")
    if amp is None:
        amp = auto_amplitude(delta, max(values))
    return Instance(
        semigroup=SemigroupDescriptor(kind=POS_REAL),
        f=Perturbed(
            base=ExactExponential(c=_draw_c(c, seed)),
            family="inv_square_log",
            amplitude=float(amp),
            sign=-1,
        ),
        g=IdentityMap(),
        psi=ConstantBound(delta=float(delta)),
        grid=_real_grid(values),
    )


def make_bounded_g(
    bound: float = 1.0,
    frequency: float = 1.0,
    delta: float = 0.5,
    grid=None,
    seed: int = DEFAULT_SEED,
) -> Instance:
    """Bounded-exponent instance: |g| <= bound, f = exp(sin), no anchors."""
    values = list(grid) if grid is not None else [float(v) for v in range(1, 9)]
    return Instance(
        semigroup=SemigroupDescriptor(kind=POS_REAL),
        f=Perturbed(
            base=ExactExponential(c=0.0),
            family="sin_log",
            amplitude=1.0,
            frequency=1.0,
        ),
        g=BoundedSin(amplitude=float(bound), frequency=float(frequency)),
        psi=ConstantBound(delta=float(delta)),
        grid=_real_grid(values),
    )


def make_free_monoid(
    bases=(2.0, 1.5),
    c: float | None = None,
    delta: float = 0.2,
    amp: float | None = None,
    max_exp: int = 2,
    generators=None,
    seed: int = DEFAULT_SEED,
) -> Instance:
    """Free-commutative-monoid instance with multiplicative g.

    Exact when ``amp`` resolves to 0; otherwise the same decaying
    perturbation as the positive-real preset (which then requires all
    bases >= 1 so the band survives on the sample).
    """
    bases = tuple(float(b) for b in bases)
    k = len(bases)
    names = tuple(generators) if generators else tuple(f"g{i}" for i in range(k))
    if len(names) != k:
        raise ValueError("one generator name per base is required")
    semigroup = SemigroupDescriptor(kind=FREE_MONOID, generators=names)
    grid = tuple(
        Element.from_exponents(e)
        for e in itertools.product(range(max_exp + 1), repeat=k)
    )
    g_vals = [abs(math.prod(b**e for b, e in zip(bases, p.exp))) for p in grid]
    g_max = max(g_vals)
    if g_max <= 1.0:
        raise ValueError("free-monoid preset needs at least one base with |b| > 1")
    c_val = _draw_c(c, seed)
    base = ExactExponential(c=c_val, bases=bases)
    if amp is None:
        amp = auto_amplitude(delta, g_max) if delta > 0 else 0.0
    f = (
        base
        if amp == 0.0
        else Perturbed(base=base, family="inv_square_log", amplitude=float(amp), sign=-1)
    )
    if amp != 0.0 and any(b < 1.0 for b in bases):
        raise ValueError("perturbed free-monoid preset needs all bases >= 1")
    return Instance(
        semigroup=semigroup,
        f=f,
        g=MultiplicativeForm(bases=bases),
        psi=ConstantBound(delta=float(delta) if amp != 0.0 else 0.0),
        grid=grid,
    )


def make_jung(
    delta: float = 0.1,
    c: float | None = None,
    grid=None,
    seed: int = DEFAULT_SEED,
) -> Instance:
    """Sandwich-ready instance: f(x) = a^x / (1 + (delta/10) x^{-2}).

    The amplitude delta/10 keeps the constant-delta band comfortably
    satisfied on the sample and the ratio a^x/f(x) = 1 + (delta/10) x^{-2}
    inside the alpha-series sandwich.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    values = list(grid) if grid is not None else [float(v) for v in range(1, 9)]
    if min(values) < 1.0:
        raise ValueError("jung preset needs grid values >= 1")
    return Instance(
        semigroup=SemigroupDescriptor(kind=POS_REAL),
        f=Perturbed(
            base=ExactExponential(c=_draw_c(c, seed)),
            family="inv_square_log",
            amplitude=delta / 10.0,
            sign=-1,
        ),
        g=IdentityMap(),
        psi=ConstantBound(delta=float(delta)),
        grid=_real_grid(values),
    )


PRESETS = {
    "exact-cor23": make_exact_cor23,
    "perturbed-cor23": make_perturbed_cor23,
    "bounded-g": make_bounded_g,
    "free-monoid": make_free_monoid,
    "jung": make_jung,
}
