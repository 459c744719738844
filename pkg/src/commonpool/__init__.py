"""Threshold Nash equilibria for n-agent stochastic resource extraction games.

Analytic solvers (ODE fundamentals plus constant-coefficient closed forms)
compute the equilibrium thresholds and value functions; an independent
Monte-Carlo engine estimates rewards and statistically verifies the Nash
property by deviation scanning.
"""

from . import errors
from .asymmetric import (
    AsymmetricEquilibrium,
    BestResponse,
    ThresholdProfile,
    agent_fundamentals,
    best_response,
    solve_asymmetric,
    sweep_K2,
    value_at_i,
)
from .closed_form import (
    CharacteristicRoots,
    TwoPlayerEquilibrium,
    TwoPlayerPieces,
    one_player_barrier,
    symmetric_closed_form,
    two_player_equilibrium,
    two_player_pieces,
)
from .fundamentals import (
    FundamentalSolution,
    RatioEvaluator,
    inflection_point,
    ratio_f,
    solve_phi,
    solve_psi,
)
from .model import (
    AssumptionReport,
    CoefficientModel,
    GameParams,
    ShiftedDrift,
    affine_drift,
    asymmetric_game,
    constant,
    extinction_bound,
    game_from_json,
    model_from_json,
    symmetric_game,
    user_defined,
    validate_assumptions,
)
from .simulate import (
    DeviationVerdict,
    ExtinctionEstimate,
    RewardEstimate,
    SimConfig,
    estimate_extinction_time,
    estimate_many,
    estimate_reward,
    verify_nash,
)
from .symmetric import (
    SingularBenchmark,
    SymmetricEquilibrium,
    singular_benchmark,
    solve_symmetric,
    sweep_K,
    sweep_n,
    sweep_n_fixed_total,
    value_at,
)

__version__ = "0.1.0"
