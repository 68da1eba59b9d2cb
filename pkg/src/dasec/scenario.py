"""Deployment geometry, channel draws and CSI-error models.

Everything here is a pure function of (config, rng): the same config and
seed always reproduce the same deployment and channel set bit for bit.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path

import numpy as np

# Log-distance path-loss substitute (indoor-like): PL_dB(d) = PL0 + 10*gamma*log10(d/d0).
PL0_DB = 38.0
PL_EXPONENT = 3.0
PL_REF_DIST_M = 1.0


class Layout(Enum):
    DA_GRID = "DaGrid"
    CA_CENTER = "CaCenter"


class ConfigError(ValueError):
    """Raised for malformed config files or invalid parameter combinations."""


@dataclass
class ScenarioConfig:
    """All knobs for one experiment: geometry, power model, constellation,
    robustness levels and solver behaviour.

    Power values are in mW unless the field name says dBm/dB. SINR thresholds
    are stored in dB and converted to linear scale at problem assembly.
    """

    cell_side_m: float = 100.0
    n_das: int = 16
    n_eves: int = 3
    layout: Layout = Layout.DA_GRID
    carrier_hz: float = 2e9
    bandwidth_hz: float = 1e6
    noise_psd_dbm_hz: float = -174.0
    sigma_e: float = 1e-6
    alpha: float = 0.4
    p_on_mw: float = 500.0
    p_off_mw: float = 50.0
    p_da_mw: float = 1000.0
    gamma_d_db: float = 20.0
    gamma_k_db: float = -10.0
    eta_d: float = 0.95
    eta_k: float = 0.95
    p_an_dbm: float = 25.0
    m_psk: int = 4
    penalty_phi: float | None = None  # default 10*N*p_on, set in __post_init__
    sigma_ball: float | None = None   # squared radius of the stacked-error ball
    edge_fraction: float = 0.0
    seed: int = 0
    max_sca_iters: int = 30
    conv_tol: float = 1e-4
    # Reformulation switches (defaults per the documented design decisions).
    quantile: str = "normal"          # "normal" | "erf_literal"
    cov_mode: str = "paper"           # "paper" (verbatim) | "derived" (exact variance)
    sproc_mode: str = "norm_robust"   # "norm_robust" | "paper_faithful"
    chance_form: str = "soc"          # "soc" | "lmi" (Schur-lifted chance blocks)

    def __post_init__(self):
        if self.n_das < 1:
            raise ConfigError("n_das must be >= 1")
        if self.n_eves < 0:
            raise ConfigError("n_eves must be >= 0")
        # eta = 0.5 is admitted so the literal-quantile reading stays usable;
        # the chance-constraint builder rejects any combination whose scale
        # factor would come out nonpositive.
        if not (0.5 <= self.eta_d < 1.0 and 0.5 <= self.eta_k < 1.0):
            raise ConfigError("eta_d and eta_k must lie in [0.5, 1)")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError("alpha must lie in (0, 1]")
        if self.p_off_mw > self.p_on_mw:
            raise ConfigError("p_off_mw must not exceed p_on_mw")
        if self.m_psk not in (2, 4, 8, 16):
            raise ConfigError("m_psk must be one of 2, 4, 8, 16")
        if self.sigma_e < 0:
            raise ConfigError("sigma_e must be nonnegative")
        if not (0.0 <= self.edge_fraction <= 1.0):
            raise ConfigError("edge_fraction must lie in [0, 1]")
        if self.penalty_phi is None:
            self.penalty_phi = 10.0 * self.n_das * self.p_on_mw
        if self.sigma_ball is None:
            # cover ~3 sigma of the stacked error norm, E||e||^2 = N*sigma_e^2
            self.sigma_ball = 9.0 * self.n_das * self.sigma_e**2
        if self.sigma_ball < self.sigma_e**2:
            raise ConfigError("sigma_ball must be >= sigma_e^2")
        if self.quantile not in ("normal", "erf_literal"):
            raise ConfigError("quantile must be 'normal' or 'erf_literal'")
        if self.cov_mode not in ("paper", "derived"):
            raise ConfigError("cov_mode must be 'paper' or 'derived'")
        if self.sproc_mode not in ("norm_robust", "paper_faithful"):
            raise ConfigError("sproc_mode must be 'norm_robust' or 'paper_faithful'")
        if self.chance_form not in ("soc", "lmi"):
            raise ConfigError("chance_form must be 'soc' or 'lmi'")
        if isinstance(self.layout, str):
            self.layout = Layout(self.layout)

    @property
    def gamma_d_lin(self) -> float:
        return 10.0 ** (self.gamma_d_db / 10.0)

    @property
    def gamma_k_lin(self) -> float:
        return 10.0 ** (self.gamma_k_db / 10.0)

    @property
    def p_an_mw(self) -> float:
        return 10.0 ** (self.p_an_dbm / 10.0)


@dataclass
class Deployment:
    """Antenna and user positions, all inside [0, cell_side]^2 (metres)."""

    da_positions: np.ndarray   # (N, 2)
    ir_position: np.ndarray    # (2,)
    eve_positions: np.ndarray  # (K, 2)


@dataclass
class ChannelSet:
    """Estimated and (optionally) true channels, h_true = h_hat + e."""

    h_d_hat: np.ndarray            # (N,) complex
    h_k_hat: np.ndarray            # (K, N) complex
    sigma_e: float
    h_d_true: np.ndarray | None = None
    h_k_true: np.ndarray | None = None


def noise_power(cfg: ScenarioConfig) -> float:
    """AWGN power sigma_n^2 in mW: PSD (dBm/Hz) integrated over the bandwidth."""
    return 10.0 ** (cfg.noise_psd_dbm_hz / 10.0) * cfg.bandwidth_hz


def path_loss(d_m: np.ndarray | float) -> np.ndarray | float:
    """Linear-scale path-loss coefficient at distance d (metres).

    Distances below the reference distance are clamped to it, which covers
    the degenerate user-on-antenna case.
    """
    d = np.maximum(np.asarray(d_m, dtype=float), PL_REF_DIST_M)
    pl_db = PL0_DB + 10.0 * PL_EXPONENT * np.log10(d / PL_REF_DIST_M)
    return 10.0 ** (-pl_db / 10.0)


def grid_positions(n: int, side: float) -> np.ndarray:
    """Equal-margin g x g grid (g = ceil(sqrt(n))) truncated to n points."""
    g = math.ceil(math.sqrt(n))
    coords = side * (2 * np.arange(g) + 1) / (2 * g)
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return pts[:n]


def _draw_user_position(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """One user position: on the edge ring with prob edge_fraction, else interior.

    The ring is the outer 10% of the cell (band of width 0.05*side along each
    wall); ring points are drawn by rejection from the uniform square.
    """
    side = cfg.cell_side_m
    band = 0.05 * side
    on_edge = rng.random() < cfg.edge_fraction
    while True:
        p = rng.random(2) * side
        dist_to_wall = min(p[0], side - p[0], p[1], side - p[1])
        if on_edge == (dist_to_wall <= band):
            return p


def make_deployment(cfg: ScenarioConfig) -> Deployment:
    """Place antennas per the layout and draw user positions from cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    if cfg.layout is Layout.DA_GRID:
        das = grid_positions(cfg.n_das, cfg.cell_side_m)
    else:
        center = np.full(2, cfg.cell_side_m / 2.0)
        das = np.tile(center, (cfg.n_das, 1))
    ir = _draw_user_position(cfg, rng)
    eves = np.array([_draw_user_position(cfg, rng) for _ in range(cfg.n_eves)])
    eves = eves.reshape(cfg.n_eves, 2)
    return Deployment(da_positions=das, ir_position=ir, eve_positions=eves)


def _rayleigh_channel(dists: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    g = (rng.standard_normal(dists.shape) + 1j * rng.standard_normal(dists.shape)) / math.sqrt(2.0)
    return np.sqrt(path_loss(dists)) * g


def draw_channels(dep: Deployment, cfg: ScenarioConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw true channels (path loss x Rayleigh) and estimation errors.

    The estimate is h_hat = h_true - e with per-entry e ~ CN(0, sigma_e^2),
    so h_true = h_hat + e matches the estimation-error convention used by
    the robust constraint builders.
    """
    d_ir = np.linalg.norm(dep.da_positions - dep.ir_position, axis=1)
    h_d_true = _rayleigh_channel(d_ir, rng)
    k = dep.eve_positions.shape[0]
    h_k_true = np.empty((k, cfg.n_das), dtype=complex)
    for i in range(k):
        d = np.linalg.norm(dep.da_positions - dep.eve_positions[i], axis=1)
        h_k_true[i] = _rayleigh_channel(d, rng)

    def _err(shape):
        return cfg.sigma_e * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)

    e_d = _err(h_d_true.shape)
    e_k = _err(h_k_true.shape)
    return ChannelSet(
        h_d_hat=h_d_true - e_d,
        h_k_hat=h_k_true - e_k,
        sigma_e=cfg.sigma_e,
        h_d_true=h_d_true,
        h_k_true=h_k_true,
    )


# ---------------------------------------------------------------------------
# Config file ingestion: flat UTF-8 "key = value" lines, '#' comments.

_BOOL = {"true": True, "false": False}


def _coerce(name: str, raw: str):
    ftypes = {f.name: f.type for f in fields(ScenarioConfig)}
    if name not in ftypes:
        raise ConfigError(f"unknown config key: {name!r}")
    if name == "layout":
        try:
            return Layout(raw)
        except ValueError:
            raise ConfigError(f"layout must be DaGrid or CaCenter, got {raw!r}") from None
    if name in ("quantile", "cov_mode", "sproc_mode", "chance_form"):
        return raw
    if name in ("n_das", "n_eves", "m_psk", "seed", "max_sca_iters"):
        return int(raw)
    return float(raw)


def parse_config(text: str) -> ScenarioConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        try:
            values[key] = _coerce(key, raw)
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {raw!r}") from exc
    return ScenarioConfig(**values)


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def config_hash(cfg: ScenarioConfig) -> str:
    """Short stable digest of a config, used for CSV provenance lines."""
    items = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, Layout):
            v = v.value
        items.append(f"{f.name}={v!r}")
    return hashlib.sha256(";".join(items).encode()).hexdigest()[:12]


def with_overrides(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    return replace(cfg, **kw)
