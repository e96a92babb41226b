"""Simulation costs of Hermitian-preserving maps and shot-level runs of their decompositions.

Two ways of simulating a Hermitian-preserving map on a quantum device are
compared: sampling completely positive maps with signed weights
(quasi-probability decomposition) and running one quantum instrument whose
outcomes control a sign in post-processing (a scaled twisted channel).
"""
from hpsim._backend import BACKEND
from hpsim.cost import (CostReport, cost_report, diamond_variational, gamma_qpd, gamma_tc,
                        robustness)
from hpsim.decompose import (QpdDecomposition, TwistedChannel, combine_twisted, hp_to_twisted,
                             qpd_from_certificate, twisted_from_certificate)
from hpsim.errors import HpsimError
from hpsim.maps import (ExtractionSpec, KrausSet, MapRep, amplitude_damping, apply,
                        choi_from_kraus, compose, dephasing, depolarizing, entry_extraction,
                        identity_map, kraus_from_choi, parity_sign_map, transpose_map)
from hpsim.recovery import RecoveryProblem, RecoverySolution, optimal_recovery, sweep_recovery
from hpsim.settings import DEFAULT, NumericSettings
from hpsim.simulate import EstimateResult, ShotPlan, plan_shots, run_mcpp, run_qpd

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CostReport", "DEFAULT", "EstimateResult", "ExtractionSpec", "HpsimError",
    "KrausSet", "MapRep", "NumericSettings", "QpdDecomposition", "RecoveryProblem",
    "RecoverySolution", "ShotPlan", "TwistedChannel", "amplitude_damping", "apply",
    "choi_from_kraus", "combine_twisted", "compose", "cost_report", "dephasing", "depolarizing",
    "diamond_variational", "entry_extraction", "gamma_qpd", "gamma_tc", "hp_to_twisted",
    "identity_map", "kraus_from_choi", "optimal_recovery", "parity_sign_map", "plan_shots",
    "qpd_from_certificate", "robustness", "run_mcpp", "run_qpd", "sweep_recovery",
    "transpose_map", "twisted_from_certificate",
]
