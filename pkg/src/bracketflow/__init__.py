"""Homogeneous Ricci flow in bracket form, stratum labels and Lyapunov functions."""

from .bracket_space import (
    Bracket,
    Subspace,
    act,
    bracket_inner,
    bracket_norm,
    derivation_residual,
    jacobi_residual,
    make_bracket,
    nilradical,
    pi_action,
    scale_bracket,
)
from .curvature import (
    CurvatureReport,
    EstimateReport,
    classify,
    curvature_report,
    estimates,
    m_identity_check,
    moment_map,
    ricci,
    ricci_mod,
)
from .flows import (
    FlowTrajectory,
    MetricState,
    beta_volume,
    blow_down,
    bracket_flow,
    collapse_diagnostic,
    equivalence_check,
    lyapunov_F,
    metric_ricci_flow,
)
from .stratification import (
    BetaGroups,
    StratumLabel,
    beta_from_nilradical,
    beta_groups,
    energy,
    energy_gradient,
    gauge_to_Vnn,
    project_p_beta,
    stratum_label,
    x_q_projection,
)

__version__ = "0.1.0"
