"""Constructive-interference geometry for M-PSK.

All region tests are evaluated on r = h^T u * exp(-j*phi_d): rotating the
received point back by the symbol phase lets one precoder serve every
symbol of the constellation. SINR thresholds here are linear scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Region(Enum):
    CONSTRUCTIVE = "Constructive"
    DESTRUCTIVE = "Destructive"


class ConstellationError(ValueError):
    """Unsupported constellation geometry (tan(theta) unbounded)."""


def psk_phase(m_psk: int, index: int = 0) -> float:
    """Standard M-PSK symbol phase (2i+1)*pi/M."""
    return (2 * index + 1) * math.pi / m_psk


@dataclass
class SymbolSpec:
    """Constellation size, symbol phase and detection half-angle theta = pi/M."""

    m_psk: int
    phi_d: float | None = None

    def __post_init__(self):
        if self.phi_d is None:
            self.phi_d = psk_phase(self.m_psk)

    @property
    def theta(self) -> float:
        return math.pi / self.m_psk

    @property
    def tan_theta(self) -> float:
        return math.tan(self.theta)


@dataclass
class CompositePrecoder:
    """Composite precoder u = w + z*exp(-j*phi_d); w or z may be absent when
    only the composite is optimized."""

    u: np.ndarray
    w: np.ndarray | None = None
    z: np.ndarray | None = None

    def check_consistent(self, phi_d: float, tol: float = 1e-9) -> bool:
        if self.w is None or self.z is None:
            return True
        recon = self.w + self.z * np.exp(-1j * phi_d)
        return bool(np.max(np.abs(recon - self.u)) <= tol)


def noiseless_rx(h: np.ndarray, u: np.ndarray) -> complex:
    """Noise-free received point h^T u (unconjugated transpose)."""
    h = np.asarray(h)
    u = np.asarray(u)
    if h.shape != u.shape:
        raise ValueError("h and u must have equal length")
    return complex(np.dot(h, u))


def rotated_rx(h: np.ndarray, u: np.ndarray, sym: SymbolSpec) -> complex:
    return noiseless_rx(h, u) * np.exp(-1j * sym.phi_d)


def ci_margin(h, u, sym: SymbolSpec, sigma_n: float, gamma_lin: float) -> float:
    """Signed distance to the constructive-region boundary at target gamma.

    Nonnegative iff |Im r| <= (Re r - sigma_n*sqrt(gamma)) * tan(theta)
    after rotating by the symbol phase.
    """
    if gamma_lin < 0:
        raise ValueError("gamma_lin must be nonnegative (linear scale)")
    r = rotated_rx(h, u, sym)
    return (r.real - sigma_n * math.sqrt(gamma_lin)) * sym.tan_theta - abs(r.imag)


def classify(h, u, sym: SymbolSpec, sigma_n: float, gamma_lin: float) -> Region:
    """Constructive iff the margin is >= 0; boundary counts as constructive."""
    if ci_margin(h, u, sym, sigma_n, gamma_lin) >= 0:
        return Region.CONSTRUCTIVE
    return Region.DESTRUCTIVE


def ci_sinr(h, u, sigma_n: float) -> float:
    """CI-aware SINR |h^T u|^2 / sigma_n^2 (artificial noise counts as signal)."""
    return abs(noiseless_rx(h, u)) ** 2 / sigma_n**2


# Vectorized variants used by the Monte Carlo oracle; `r` are already-rotated
# received points.

def margins_from_points(r: np.ndarray, tan_theta: float, sigma_n: float, gamma_lin: float) -> np.ndarray:
    return (r.real - sigma_n * math.sqrt(gamma_lin)) * tan_theta - np.abs(r.imag)


def destructive_mask(r: np.ndarray, tan_theta: float, sigma_n: float, gamma_lin: float) -> np.ndarray:
    """Destructive-region test |Im r| >= (Re r - sigma_n*sqrt(gamma))*tan(theta)."""
    return np.abs(r.imag) >= (r.real - sigma_n * math.sqrt(gamma_lin)) * tan_theta
