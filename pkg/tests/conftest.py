import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from superstab import (
    ConstantBound,
    Element,
    ExactExponential,
    IdentityMap,
    Instance,
    MultiplicativeForm,
    SemigroupDescriptor,
)


@pytest.fixture
def pos_semigroup():
    return SemigroupDescriptor(kind="pos_real")


@pytest.fixture
def free_semigroup():
    return SemigroupDescriptor(kind="free_monoid", generators=("u", "v"))


def real_grid(values):
    return tuple(Element.from_real(v) for v in values)


@pytest.fixture
def exact_pos_instance():
    return Instance(
        semigroup=SemigroupDescriptor(kind="pos_real"),
        f=ExactExponential(c=1.0),
        g=IdentityMap(),
        psi=ConstantBound(delta=0.0),
        grid=real_grid(range(1, 9)),
    )


@pytest.fixture
def exact_free_instance():
    # modest bases keep float noise in m(xy) vs m(x) m(y) below 1e-12
    # even on orbit-replaced validation pairs
    bases = (1.4, 1.25)
    grid = tuple(
        Element.from_exponents((i, j)) for i in range(3) for j in range(3)
    )
    return Instance(
        semigroup=SemigroupDescriptor(kind="free_monoid", generators=("u", "v")),
        f=ExactExponential(c=0.8, bases=bases),
        g=MultiplicativeForm(bases=bases),
        psi=ConstantBound(delta=0.0),
        grid=grid,
    )
