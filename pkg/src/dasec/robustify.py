"""Compilation of robust CI constraints into conic blocks.

Probabilistic constraints become second-order-cone blocks
    a_bar^T x + scale * ||Theta^{1/2} x||_2 <= rhs
on the stacked real precoder x = [u_R; u_I]; deterministic (worst-case)
constraints become either the ellipsoidal SOC counterpart or the literal
multiplier LMIs, selectable per config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .ci_core import ConstellationError, SymbolSpec
from .scenario import ScenarioConfig, noise_power

_TAN_SINGULAR = math.pi / 2 - 1e-6


# ---------------------------------------------------------------------------
# Stacked-real representation

def stack_complex(v: np.ndarray) -> np.ndarray:
    """Complex length-N vector -> real length-2N stack [Re; Im]."""
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag])


def unstack_complex(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size // 2
    if x.size != 2 * n:
        raise ValueError("stacked vector must have even length")
    return x[:n] + 1j * x[n:]


# ---------------------------------------------------------------------------
# Constraint block containers

@dataclass
class SocBlock:
    """a_bar^T x + scale * ||theta_sqrt @ x||_2 <= rhs over a bound x."""

    a_bar: np.ndarray       # (2N,)
    theta_sqrt: np.ndarray  # (2N, 2N) diagonal, nonnegative
    scale: float
    rhs: float

    def __post_init__(self):
        d = np.diag(np.diag(self.theta_sqrt))
        if not np.array_equal(d, self.theta_sqrt) or np.any(np.diag(self.theta_sqrt) < 0):
            raise ValueError("theta_sqrt must be diagonal with nonnegative entries")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def violation(self, x: np.ndarray) -> float:
        """Signed constraint value; <= 0 means satisfied."""
        return float(self.a_bar @ x + self.scale * np.linalg.norm(self.theta_sqrt @ x) - self.rhs)

    def rescaled(self, factor: float) -> "SocBlock":
        """Multiply both sides by factor > 0 (row equilibration)."""
        return replace(
            self,
            a_bar=self.a_bar * factor,
            theta_sqrt=self.theta_sqrt * factor,
            rhs=self.rhs * factor,
        )


class LmiBlock:
    """Affine map from a local variable vector to a symmetric matrix >= 0.

    Stored as vec(M(x)) = G @ x + c with G symmetrized by construction, so
    the assembled matrix equals its transpose exactly for any x.
    """

    def __init__(self, size: int, n_local: int):
        self.size = size
        self.n_local = n_local
        self._g = np.zeros((size * size, n_local))
        self._c = np.zeros(size * size)

    def add_term(self, i: int, j: int, var: int, coeff: float):
        """Add coeff * x[var] at entries (i, j) and (j, i)."""
        self._g[i * self.size + j, var] += coeff
        if i != j:
            self._g[j * self.size + i, var] += coeff

    def add_const(self, i: int, j: int, value: float):
        self._c[i * self.size + j] += value
        if i != j:
            self._c[j * self.size + i] += value

    @property
    def g(self) -> np.ndarray:
        return self._g

    @property
    def c(self) -> np.ndarray:
        return self._c

    def assemble(self, x_local: np.ndarray) -> np.ndarray:
        return (self._g @ np.asarray(x_local, dtype=float) + self._c).reshape(self.size, self.size)

    def min_eig(self, x_local: np.ndarray) -> float:
        return float(np.linalg.eigvalsh(self.assemble(x_local))[0])


# ---------------------------------------------------------------------------
# Quantiles

def quantile(eta: float, kind: str = "normal") -> float:
    """Inverse of the probability transform used in the chance constraints.

    "normal" is the standard normal quantile (the convention the SOC
    derivation requires); "erf_literal" inverts the plain error function.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    if kind == "normal":
        return float(special.ndtri(eta))
    if kind == "erf_literal":
        return float(special.erfinv(eta))
    raise ValueError(f"unknown quantile kind {kind!r}")


# ---------------------------------------------------------------------------
# Mean vectors and covariance roots of the stacked channel coefficients

def _check_theta(theta: float):
    if theta >= _TAN_SINGULAR:
        raise ConstellationError(
            "tan(theta) is unbounded at theta >= pi/2; BPSK-style half-plane "
            "regions are not supported by this formulation"
        )


def abar_ir(h_hat_stacked: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean coefficient vectors of the two IR inequalities."""
    _check_theta(theta)
    t = math.tan(theta)
    x = np.asarray(h_hat_stacked, dtype=float)
    n = x.size // 2
    h_r, h_i = x[:n], x[n:]
    a1 = np.concatenate([h_i - h_r * t, h_r + h_i * t])
    a2 = np.concatenate([-h_i - h_r * t, -h_r + h_i * t])
    return a1, a2


def abar_eve(h_hat_stacked: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean coefficient vectors of the two eavesdropper inequalities."""
    _check_theta(theta)
    t = math.tan(theta)
    x = np.asarray(h_hat_stacked, dtype=float)
    n = x.size // 2
    h_r, h_i = x[:n], x[n:]
    a1 = np.concatenate([h_i + h_r * t, h_r - h_i * t])
    a2 = np.concatenate([-h_i + h_r * t, -h_r - h_i * t])
    return a1, a2


def cov_sqrt(theta: float, sigma_e: float, n: int, mode: str = "paper") -> np.ndarray:
    """Diagonal square root of the coefficient covariance, 2N x 2N.

    "paper" uses (1 + tan(theta))^2 * sigma_e^2 on every diagonal entry of
    Theta. "derived" uses the exact variance (sigma_e^2 / 2) * (1 + tan^2)
    under the split where each real/imaginary error component carries half
    the complex variance; only this mode matches Monte Carlo rates exactly.
    """
    _check_theta(theta)
    t = math.tan(theta)
    if mode == "paper":
        entry = (1.0 + t) * sigma_e
    elif mode == "derived":
        entry = sigma_e * math.sqrt((1.0 + t * t) / 2.0)
    else:
        raise ValueError(f"unknown covariance mode {mode!r}")
    return entry * np.eye(2 * n)


def chance_to_soc(a_bar: np.ndarray, cov_root: np.ndarray, eta: float, rhs: float,
                  kind: str = "normal") -> SocBlock:
    scale = quantile(eta, kind)
    if scale <= 0.0:
        raise ValueError(
            "chance constraint needs a positive quantile scale "
            f"(eta={eta}, kind={kind!r}); raise eta above the quantile's zero"
        )
    return SocBlock(a_bar=np.asarray(a_bar, dtype=float), theta_sqrt=np.asarray(cov_root, dtype=float),
                    scale=scale, rhs=float(rhs))


def soc_to_lmi(soc: SocBlock) -> LmiBlock:
    """Schur lifting of a SocBlock: [[s*I, Tx], [(Tx)^T, s]] >= 0 with
    s = (rhs - a_bar^T x) / scale and T = theta_sqrt."""
    m2 = soc.a_bar.size
    lmi = LmiBlock(size=m2 + 1, n_local=m2)
    for j in range(m2):
        coeff = -soc.a_bar[j] / soc.scale
        for i in range(m2):
            lmi.add_term(i, i, j, coeff)
            tij = soc.theta_sqrt[i, j]
            if tij != 0.0:
                lmi.add_term(i, m2, j, tij)
        lmi.add_term(m2, m2, j, coeff)
    const = soc.rhs / soc.scale
    for i in range(m2 + 1):
        lmi.add_const(i, i, const)
    return lmi


# ---------------------------------------------------------------------------
# Per-node block builders

def ir_chance_blocks(h_hat: np.ndarray, cfg: ScenarioConfig, sym: SymbolSpec) -> tuple[SocBlock, SocBlock]:
    """The two probabilistic IR blocks; rhs = -sigma_n*sqrt(gamma_d)*tan(theta)."""
    sigma_n = math.sqrt(noise_power(cfg))
    rhs = -sigma_n * math.sqrt(cfg.gamma_d_lin) * sym.tan_theta
    a1, a2 = abar_ir(stack_complex(h_hat), sym.theta)
    root = cov_sqrt(sym.theta, cfg.sigma_e, len(h_hat), cfg.cov_mode)
    return (
        chance_to_soc(a1, root, cfg.eta_d, rhs, cfg.quantile),
        chance_to_soc(a2, root, cfg.eta_d, rhs, cfg.quantile),
    )


def eve_chance_blocks(h_hat_k: np.ndarray, cfg: ScenarioConfig, sym: SymbolSpec) -> tuple[SocBlock, SocBlock]:
    """The two probabilistic blocks confining one Eve to the destructive side."""
    sigma_n = math.sqrt(noise_power(cfg))
    rhs = sigma_n * math.sqrt(cfg.gamma_k_lin) * sym.tan_theta
    a1, a2 = abar_eve(stack_complex(h_hat_k), sym.theta)
    root = cov_sqrt(sym.theta, cfg.sigma_e, len(h_hat_k), cfg.cov_mode)
    return (
        chance_to_soc(a1, root, cfg.eta_k, rhs, cfg.quantile),
        chance_to_soc(a2, root, cfg.eta_k, rhs, cfg.quantile),
    )


def _sproc_norm_robust(a_bars, rhs: float, n: int, sigma_ball: float, theta: float) -> tuple[SocBlock, SocBlock]:
    # Exact worst case of (a_bar + T e)^T x <= rhs over ||e||_2 <= sigma:
    # the perturbation operator satisfies T^T T = sec^2(theta) * I, so the
    # supremum is sigma * sec(theta) * ||x||.
    sec = 1.0 / math.cos(theta)
    root = sec * np.eye(2 * n)
    sigma = math.sqrt(sigma_ball)
    return tuple(SocBlock(a_bar=a, theta_sqrt=root, scale=sigma, rhs=rhs) for a in a_bars)


def _sproc_paper_lmi(a_bar: np.ndarray, rhs_shift: float, sigma_ball: float) -> LmiBlock:
    # Literal multiplier LMI: [[lam*I - diag(x), 0], [0, -lam*sigma^2 - rho]]
    # with rho = a_bar^T x - rhs_shift, over local vars [x (2N); lam].
    m2 = a_bar.size
    lam = m2
    lmi = LmiBlock(size=m2 + 1, n_local=m2 + 1)
    for i in range(m2):
        lmi.add_term(i, i, lam, 1.0)
        lmi.add_term(i, i, i, -1.0)
    lmi.add_term(m2, m2, lam, -sigma_ball)
    for j in range(m2):
        lmi.add_term(m2, m2, j, -a_bar[j])
    lmi.add_const(m2, m2, rhs_shift)
    return lmi


def ir_sproc_lmis(h_hat: np.ndarray, cfg: ScenarioConfig, sym: SymbolSpec,
                  mode: str | None = None):
    """Worst-case IR blocks: two SocBlocks ("norm_robust") or two LmiBlocks
    with one trailing multiplier variable each ("paper_faithful")."""
    mode = mode or cfg.sproc_mode
    sigma_n = math.sqrt(noise_power(cfg))
    shift = sigma_n * math.sqrt(cfg.gamma_d_lin) * sym.tan_theta
    a_bars = abar_ir(stack_complex(h_hat), sym.theta)
    if mode == "norm_robust":
        return _sproc_norm_robust(a_bars, -shift, len(h_hat), cfg.sigma_ball, sym.theta)
    if mode == "paper_faithful":
        # rho_d = a_bar^T x + shift, so the corner constant is -shift.
        return tuple(_sproc_paper_lmi(a, -shift, cfg.sigma_ball) for a in a_bars)
    raise ValueError(f"unknown S-procedure mode {mode!r}")


def eve_sproc_lmis(h_hat_k: np.ndarray, cfg: ScenarioConfig, sym: SymbolSpec,
                   mode: str | None = None):
    mode = mode or cfg.sproc_mode
    sigma_n = math.sqrt(noise_power(cfg))
    shift = sigma_n * math.sqrt(cfg.gamma_k_lin) * sym.tan_theta
    a_bars = abar_eve(stack_complex(h_hat_k), sym.theta)
    if mode == "norm_robust":
        return _sproc_norm_robust(a_bars, shift, len(h_hat_k), cfg.sigma_ball, sym.theta)
    if mode == "paper_faithful":
        # rho_k = a_bar^T x - shift, so the corner constant is +shift.
        return tuple(_sproc_paper_lmi(a, shift, cfg.sigma_ball) for a in a_bars)
    raise ValueError(f"unknown S-procedure mode {mode!r}")
