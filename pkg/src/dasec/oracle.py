"""Independent verification: Monte Carlo region statistics, brute-force
antenna selection and symbol-error simulation.

Nothing here reuses the solver's constraint machinery; classifications go
through the scalar region geometry so a bug in the conic assembly cannot
hide itself.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .ci_core import SymbolSpec, destructive_mask, margins_from_points, psk_phase
from .precoder import (
    PrecoderSolution,
    SolverFailure,
    Variant,
    _fixed_subset_solve,
)
from .scenario import ChannelSet, ScenarioConfig, noise_power

BRUTE_FORCE_MAX_N = 12


@dataclass
class McReport:
    n_samples: int
    ir_ci_prob: float
    eve_destr_prob: list[float]
    eve_sinr_exceed_prob: list[float]
    mean_margin: float
    worst_violation: float

    def __post_init__(self):
        if self.n_samples < 1000:
            raise ValueError("need at least 1e3 samples for an accepted report")


@dataclass
class BruteForceResult:
    best_t: np.ndarray | None
    best_total_mw: float | None
    table: list = field(default_factory=list)  # (t tuple, total_mw or None)

    @property
    def feasible(self) -> bool:
        return self.best_t is not None


def _complex_gaussian(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    return sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _ball_errors(rng: np.random.Generator, n_samples: int, n: int, radius: float) -> np.ndarray:
    """Stacked-error draws with ||e||_2 <= radius: half on the surface (the
    worst-case shell), half in the interior."""
    g = rng.standard_normal((n_samples, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = np.full(n_samples, radius)
    half = n_samples // 2
    r[half:] = radius * rng.random(n_samples - half) ** (1.0 / (2 * n))
    stacked = g * r[:, None]
    return stacked[:, :n] + 1j * stacked[:, n:]


def mc_validate(
    sol: PrecoderSolution,
    channels: ChannelSet,
    cfg: ScenarioConfig,
    sym: SymbolSpec,
    n_samples: int,
    rng: np.random.Generator,
    ball_radius: float | None = None,
) -> McReport:
    """Empirical region statistics of a returned precoder under fresh errors.

    Draws h = h_hat + e with per-entry e ~ CN(0, sigma_e^2), or uniformly in
    the stacked-error ball when ball_radius is given (deterministic variants).
    The IR is scored against the constructive region at gamma_d, each Eve
    against the destructive region at gamma_k.
    """
    sigma_n = math.sqrt(noise_power(cfg))
    rot = np.exp(-1j * sym.phi_d)
    u = sol.u

    def _errors(shape_rows):
        if ball_radius is None:
            return _complex_gaussian(rng, (n_samples, shape_rows), cfg.sigma_e)
        return _ball_errors(rng, n_samples, shape_rows, ball_radius)

    n = cfg.n_das
    r_d = ((channels.h_d_hat + _errors(n)) @ u) * rot
    m_d = margins_from_points(r_d, sym.tan_theta, sigma_n, cfg.gamma_d_lin)
    eve_destr = []
    eve_exceed = []
    for k in range(channels.h_k_hat.shape[0]):
        h_k = channels.h_k_hat[k] + _errors(n)
        y = h_k @ u
        destr = destructive_mask(y * rot, sym.tan_theta, sigma_n, cfg.gamma_k_lin)
        eve_destr.append(float(np.mean(destr)))
        eve_exceed.append(float(np.mean(np.abs(y) ** 2 / sigma_n**2 > cfg.gamma_k_lin)))
    return McReport(
        n_samples=n_samples,
        ir_ci_prob=float(np.mean(m_d >= 0.0)),
        eve_destr_prob=eve_destr,
        eve_sinr_exceed_prob=eve_exceed,
        mean_margin=float(np.mean(m_d)),
        worst_violation=float(max(0.0, -np.min(m_d))),
    )


def ir_points(
    sol: PrecoderSolution,
    channels: ChannelSet,
    cfg: ScenarioConfig,
    sym: SymbolSpec,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Rotated received points (IR, Eves) under fresh errors, for plotting."""
    rot = np.exp(-1j * sym.phi_d)
    n = cfg.n_das
    r_d = ((channels.h_d_hat + _complex_gaussian(rng, (n_samples, n), cfg.sigma_e)) @ sol.u) * rot
    r_k = np.empty((channels.h_k_hat.shape[0], n_samples), dtype=complex)
    for k in range(channels.h_k_hat.shape[0]):
        h_k = channels.h_k_hat[k] + _complex_gaussian(rng, (n_samples, n), cfg.sigma_e)
        r_k[k] = (h_k @ sol.u) * rot
    return r_d, r_k


def brute_force_selection(
    variant: Variant,
    channels: ChannelSet,
    cfg: ScenarioConfig,
    sym: SymbolSpec,
    solver: str = "CLARABEL",
) -> BruteForceResult:
    """Global optimum over all 2^N on/off patterns via fixed-t solves."""
    n = cfg.n_das
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force capped at N={BRUTE_FORCE_MAX_N} (2^N solves)")
    result = BruteForceResult(best_t=None, best_total_mw=None)
    for bits in itertools.product((0.0, 1.0), repeat=n):
        t = np.array(bits)
        try:
            sol = _fixed_subset_solve(variant, channels, cfg, sym, t, solver)
        except SolverFailure:
            result.table.append((bits, None))
            continue
        total = sol.power.total_mw
        result.table.append((bits, total))
        if result.best_total_mw is None or total < result.best_total_mw:
            result.best_t = t
            result.best_total_mw = total
    return result


def _detect_psk(y: np.ndarray, m_psk: int) -> np.ndarray:
    """Nearest-phase detection onto the (2i+1)*pi/M constellation."""
    base = psk_phase(m_psk, 0)
    idx = np.round((np.angle(y) - base) * m_psk / (2.0 * math.pi)).astype(int)
    return idx % m_psk


def ser_sim(
    sol_builder,
    channels: ChannelSet,
    cfg: ScenarioConfig,
    sym: SymbolSpec,
    n_symbols: int,
    rng: np.random.Generator,
    per_symbol_solve: bool = False,
) -> float:
    """Symbol error rate at the IR with receiver noise.

    The fast path solves once for the reference symbol and rotates the
    precoder by each transmitted symbol's phase offset, which is exact for
    PSK because every region test commutes with a common rotation. The slow
    path (n_symbols <= 100) re-invokes sol_builder per symbol, which only
    matches the fast path when the builder itself is rotation-equivariant.

    sol_builder(spec: SymbolSpec) must return an object with attribute u.
    """
    sigma_n = math.sqrt(noise_power(cfg))
    h = channels.h_d_true if channels.h_d_true is not None else channels.h_d_hat
    tx = rng.integers(0, sym.m_psk, size=n_symbols)
    ref = sol_builder(sym)
    if per_symbol_solve:
        if n_symbols > 100:
            raise ValueError("per-symbol solving is capped at 100 symbols")
        y0 = np.array([
            complex(h @ sol_builder(SymbolSpec(sym.m_psk, psk_phase(sym.m_psk, i))).u)
            for i in tx
        ])
    else:
        phases = np.exp(1j * (np.array([psk_phase(sym.m_psk, i) for i in tx]) - sym.phi_d))
        y0 = complex(h @ ref.u) * phases
    y = y0 + _complex_gaussian(rng, n_symbols, sigma_n)
    detected = _detect_psk(y, sym.m_psk)
    return float(np.mean(detected != tx))


def awgn_psk_ser(snr_lin: float, m_psk: int) -> float:
    """Closed-form uncoded M-PSK symbol error rate reference over AWGN,
    SER = erfc(sqrt(snr)*sin(pi/M)) for M > 2 (tight standard approximation;
    exact for M = 2 with the half factor)."""
    arg = math.sqrt(snr_lin) * math.sin(math.pi / m_psk)
    ser = math.erfc(arg)
    return 0.5 * ser if m_psk == 2 else ser


def conventional_sinr_report(
    sol: PrecoderSolution,
    channels: ChannelSet,
    cfg: ScenarioConfig,
) -> tuple[float, list[float]]:
    """SINR with the AN treated as interference (reporting only; the CI
    design intentionally violates this view at the IR)."""
    if sol.w is None or sol.z is None:
        raise ValueError("conventional SINR needs explicit w and z")
    s2 = noise_power(cfg)
    ir = abs(np.dot(channels.h_d_hat, sol.w)) ** 2 / (s2 + abs(np.dot(channels.h_d_hat, sol.z)) ** 2)
    eves = [
        float(abs(np.dot(hk, sol.w)) ** 2 / (s2 + abs(np.dot(hk, sol.z)) ** 2))
        for hk in channels.h_k_hat
    ]
    return float(ir), eves
