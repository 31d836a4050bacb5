"""CTMC-lattice Monte-Carlo and multilevel Monte-Carlo engine for Levy drivers.

The package builds a finite jump lattice for a (possibly multidimensional)
Levy measure, simulates the resulting jump-diffusion scheme, couples
consecutive lattice resolutions for multilevel estimation, and prices path
functionals (options, credit instruments, swaptions on a Levy forward
market model) against closed-form benchmarks where they exist.
"""

__version__ = "0.1.0"

from .copula import ClaytonCopula, CopulaMeasure
from .coupling import CouplingSampler, mark_distribution, simulate_coupled_paths, verify_rate_identity
from .grid import GridSpec, JumpTable, build_jump_table, choose_truncation_by_mass, params_from_eps
from .mlmc import LevelLadder, MLMCConfig, PayoffLevelSampler, level_diagnostics, run_mlmc
from .models import CGMY, HEM, VG, LevyModel1D, TruncatedMeasure1D
from .pathsim import ExpLevyAsset, SchemeProcess, mc_estimate, sample_poisson, simulate_path
from .sde import FMMSpec, SDESpec, euler_path, simulate_sde_path

__all__ = [
    "__version__",
    "ClaytonCopula",
    "CopulaMeasure",
    "CouplingSampler",
    "mark_distribution",
    "simulate_coupled_paths",
    "verify_rate_identity",
    "GridSpec",
    "JumpTable",
    "build_jump_table",
    "choose_truncation_by_mass",
    "params_from_eps",
    "LevelLadder",
    "MLMCConfig",
    "PayoffLevelSampler",
    "level_diagnostics",
    "run_mlmc",
    "CGMY",
    "HEM",
    "VG",
    "LevyModel1D",
    "TruncatedMeasure1D",
    "ExpLevyAsset",
    "SchemeProcess",
    "mc_estimate",
    "sample_poisson",
    "simulate_path",
    "FMMSpec",
    "SDESpec",
    "euler_path",
    "simulate_sde_path",
]
