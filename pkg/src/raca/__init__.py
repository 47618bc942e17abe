"""Relay-assisted carrier aggregation (RACA) uplink: channels, optimizers, experiments."""

from raca.baselines import BaselineKind, solve_ca, solve_mimo, solve_ra
from raca.channel import ChannelSet, Geometry, generate_channels, path_loss_db, stack_channels
from raca.harness import ExperimentSpec, count_streams, run_convergence_study, run_experiment
from raca.metrics import PowerModel, actual_powers, energy_report
from raca.protocol import overhead
from raca.sysmodel import (
    BeamformerSolution,
    OptimizerTrace,
    SystemConfig,
    achievable_rate,
    dbm_to_watt,
    validate_solution,
)
from raca.svdwf import SvdwfSettings, solve_svdwf
from raca.wmmse import WmmseSettings, solve_wmmse, solve_wmmse_batch

__all__ = [
    "BaselineKind",
    "BeamformerSolution",
    "ChannelSet",
    "ExperimentSpec",
    "Geometry",
    "OptimizerTrace",
    "PowerModel",
    "SvdwfSettings",
    "SystemConfig",
    "WmmseSettings",
    "achievable_rate",
    "actual_powers",
    "count_streams",
    "dbm_to_watt",
    "energy_report",
    "generate_channels",
    "overhead",
    "path_loss_db",
    "run_convergence_study",
    "run_experiment",
    "solve_ca",
    "solve_mimo",
    "solve_ra",
    "solve_svdwf",
    "solve_wmmse",
    "solve_wmmse_batch",
    "stack_channels",
    "validate_solution",
]
