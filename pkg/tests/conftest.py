import numpy as np
import pytest
from hypothesis import strategies as st

from eqfkit.lie import exp_so3
from eqfkit.rng import TrialStream


@pytest.fixture
def stream():
    return TrialStream(seed=20240817, index=0)


def finite_floats(lo, hi):
    return st.floats(min_value=lo, max_value=hi, allow_nan=False,
                     allow_infinity=False)


@st.composite
def vectors3(draw, scale=1.0):
    return np.array([draw(finite_floats(-scale, scale)) for _ in range(3)])


@st.composite
def unit_vectors(draw):
    v = draw(vectors3())
    n = np.linalg.norm(v)
    if n < 1e-2:
        v = v + np.array([1.0, 0.0, 0.0])
        n = np.linalg.norm(v)
    return v / n


@st.composite
def rotations(draw, max_angle=3.0):
    w = draw(vectors3())
    n = np.linalg.norm(w)
    if n > max_angle:
        w = w * (max_angle / n)
    return exp_so3(w)


@st.composite
def chart_points(draw, max_angle=np.pi - 0.2):
    """Unit vector strictly inside the chart domain about E1."""
    v = draw(unit_vectors())
    angle = np.arccos(np.clip(v[0], -1.0, 1.0))
    if angle > max_angle:
        v = -v
    return v
