"""Measurement-based dynamic load-altering attack (data-driven, receding horizon)."""

from .agent import MdlaaAgent, MdlaaTrace, OfflineRecord, PlantHandle, collect_offline, run_mdlaa
from .config import Excitation, MdlaaConfig, MdlaaSpec, pe_bound
from .hankel import HankelBlocks, check_persistent_excitation, hankel, numerical_rank
from .qp import AttackQP, PredictorSolution, solve_attack_qp
