"""Mixed PAV traffic model: simulation, equilibria, stability and throughput."""

from ._core import (
    HeadwayParams,
    ModelParams,
    NumericalError,
    ValidationError,
    choose_k,
    drift,
    effective_rates,
    erlang_cdf,
    find_common_lyapunov,
    leader_independent_equilibrium,
    leader_probabilities,
    preset,
    preset_names,
    run_oracle,
    simulate,
    solve_equilibrium,
    throughput,
    wasserstein_to_dirac,
)

__all__ = [
    "HeadwayParams",
    "ModelParams",
    "NumericalError",
    "ValidationError",
    "choose_k",
    "drift",
    "effective_rates",
    "erlang_cdf",
    "find_common_lyapunov",
    "leader_independent_equilibrium",
    "leader_probabilities",
    "preset",
    "preset_names",
    "run_oracle",
    "simulate",
    "solve_equilibrium",
    "throughput",
    "wasserstein_to_dirac",
]
