"""Power-minimizing secure precoding with antenna selection for
distributed-antenna downlinks.

Submodules:
  scenario     deployment geometry, channels, config files
  ci_core      constructive-interference region geometry for M-PSK
  robustify    chance / worst-case constraint compilation to conic blocks
  conic_model  solver-agnostic conic program container and backend bridge
  precoder     the four robust problem assemblies and the SCA solver
  oracle       Monte Carlo, brute-force and symbol-error verification
  cli          experiment harness (`dasec` entry point)
"""

from .ci_core import CompositePrecoder, Region, SymbolSpec
from .precoder import PowerBreakdown, PrecoderSolution, SelectionVector, Variant, fixed_t_solve, sca_solve
from .scenario import ChannelSet, ConfigError, Layout, ScenarioConfig, load_config

__all__ = [
    "ChannelSet",
    "CompositePrecoder",
    "ConfigError",
    "Layout",
    "PowerBreakdown",
    "PrecoderSolution",
    "Region",
    "ScenarioConfig",
    "SelectionVector",
    "SymbolSpec",
    "Variant",
    "fixed_t_solve",
    "load_config",
    "sca_solve",
]

__version__ = "0.1.0"
