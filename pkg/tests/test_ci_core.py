import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dasec.ci_core import (
    CompositePrecoder,
    Region,
    SymbolSpec,
    ci_margin,
    ci_sinr,
    classify,
    destructive_mask,
    margins_from_points,
    noiseless_rx,
    psk_phase,
    rotated_rx,
)


def test_psk_phases():
    assert psk_phase(4, 0) == pytest.approx(math.pi / 4)
    assert psk_phase(4, 3) == pytest.approx(7 * math.pi / 4)
    assert psk_phase(8, 0) == pytest.approx(math.pi / 8)


def test_symbol_spec_defaults():
    s = SymbolSpec(4)
    assert s.theta == pytest.approx(math.pi / 4)
    assert s.tan_theta == pytest.approx(1.0)
    assert s.phi_d == pytest.approx(math.pi / 4)
    s8 = SymbolSpec(8, phi_d=0.3)
    assert s8.phi_d == 0.3
    assert s8.theta == pytest.approx(math.pi / 8)


def test_noiseless_rx_unconjugated():
    h = np.array([1 + 1j, 2.0])
    u = np.array([1j, 0.5])
    # transpose without conjugation: (1+1j)*1j + 2*0.5
    assert noiseless_rx(h, u) == pytest.approx((1 + 1j) * 1j + 1.0)
    with pytest.raises(ValueError):
        noiseless_rx(h, np.ones(3))


def test_rotated_rx():
    s = SymbolSpec(4)
    h = np.array([1.0 + 0j])
    u = np.array([cmath.exp(1j * s.phi_d)])
    r = rotated_rx(h, u, s)
    assert r == pytest.approx(1.0 + 0j)


def _direct_region(r: complex, tan_theta: float, thr: float) -> Region:
    # scalar inequality pair evaluated directly, no shared code with ci_margin
    ok1 = r.imag - (r.real - thr) * tan_theta <= 0
    ok2 = -r.imag - (r.real - thr) * tan_theta <= 0
    return Region.CONSTRUCTIVE if (ok1 and ok2) else Region.DESTRUCTIVE


def test_classify_against_inequality_pair_oracle():
    s = SymbolSpec(8)
    sigma_n = 0.7
    gamma = 2.5
    thr = sigma_n * math.sqrt(gamma)
    rng = np.random.default_rng(0)
    for _ in range(10000):
        r = complex(*rng.normal(scale=2.0, size=2))
        h = np.array([1.0 + 0j])
        u = np.array([r * cmath.exp(1j * s.phi_d)])
        assert classify(h, u, s, sigma_n, gamma) is _direct_region(r, s.tan_theta, thr)


def test_boundary_is_constructive():
    s = SymbolSpec(4)
    sigma_n, gamma = 1.0, 4.0
    # point exactly on the upper boundary: Im = (Re - 2) * 1
    r = complex(3.0, 1.0)
    h = np.array([1.0 + 0j])
    u = np.array([r * cmath.exp(1j * s.phi_d)])
    assert ci_margin(h, u, s, sigma_n, gamma) == pytest.approx(0.0, abs=1e-12)
    assert classify(h, u, s, sigma_n, gamma) is Region.CONSTRUCTIVE


def test_margin_rejects_negative_gamma():
    s = SymbolSpec(4)
    with pytest.raises(ValueError):
        ci_margin(np.array([1.0 + 0j]), np.array([1.0 + 0j]), s, 1.0, -1.0)


@given(
    re=st.floats(-5, 5),
    im=st.floats(-5, 5),
    m=st.sampled_from([4, 8, 16]),
    k=st.integers(0, 15),
)
@settings(max_examples=300, deadline=None)
def test_rotation_equivariance(re, im, m, k):
    """Rotating u by a full symbol phase step leaves the margin unchanged
    when the spec's phase rotates along."""
    k %= m
    h = np.array([0.8 - 0.3j])
    u = np.array([complex(re, im)])
    s0 = SymbolSpec(m, psk_phase(m, 0))
    s1 = SymbolSpec(m, psk_phase(m, k))
    shift = cmath.exp(1j * (psk_phase(m, k) - psk_phase(m, 0)))
    m0 = ci_margin(h, u, s0, 0.5, 1.5)
    m1 = ci_margin(h, u * shift, s1, 0.5, 1.5)
    assert m1 == pytest.approx(m0, abs=1e-9)


@given(c=st.floats(0.1, 10), re=st.floats(-3, 3), im=st.floats(-3, 3))
@settings(max_examples=200, deadline=None)
def test_sinr_homogeneity(c, re, im):
    h = np.array([1.0 + 2j, -0.5j])
    u = np.array([complex(re, im), 1.0 + 0j])
    base = ci_sinr(h, u, 0.3)
    assert ci_sinr(h, c * u, 0.3) == pytest.approx(c * c * base, rel=1e-9)


def test_sinr_value():
    h = np.array([3.0 + 4j])
    u = np.array([1.0 + 0j])
    assert ci_sinr(h, u, 2.0) == pytest.approx(25.0 / 4.0)


def test_vectorized_matches_scalar():
    s = SymbolSpec(4)
    rng = np.random.default_rng(1)
    pts = rng.normal(size=100) + 1j * rng.normal(size=100)
    m_vec = margins_from_points(pts, s.tan_theta, 0.9, 1.7)
    d_vec = destructive_mask(pts, s.tan_theta, 0.9, 1.7)
    for p, mv, dv in zip(pts, m_vec, d_vec):
        h = np.array([1.0 + 0j])
        u = np.array([p * cmath.exp(1j * s.phi_d)])
        assert mv == pytest.approx(ci_margin(h, u, s, 0.9, 1.7), abs=1e-12)
        assert dv == (classify(h, u, s, 0.9, 1.7) is Region.DESTRUCTIVE)


def test_composite_consistency():
    rng = np.random.default_rng(2)
    w = rng.normal(size=3) + 1j * rng.normal(size=3)
    z = rng.normal(size=3) + 1j * rng.normal(size=3)
    phi = psk_phase(4, 0)
    u = w + z * cmath.exp(-1j * phi)
    cp = CompositePrecoder(u=u, w=w, z=z)
    assert cp.check_consistent(phi)
    assert not cp.check_consistent(phi + 0.5)
    assert CompositePrecoder(u=u).check_consistent(phi)  # partial is vacuous
