"""Translation-invariant Gibbs measures of continuous-spin models on Cayley trees.

The package builds Hammerstein-type fixed-point equations, verifies the known
explicit multi-solution constructions, and samples the resulting measures.
"""

from .construction import (
    AnalyticSolution,
    Construction,
    ConstructionRecord,
    analytic_solution,
    asymptotic_diagnostics,
    build_family_kernel,
    builtin_construction,
    compute_gamma,
    construct,
    eval_P,
    eval_Q,
    family_construction,
    solve_xi,
    sweep,
    verify_solution,
)
from .gibbs import (
    MeasureHandle,
    TreeBall,
    build_measure,
    marginal_stats,
    measure_from_eigenfunction,
    root_density,
    sample_ball,
    sample_balls,
    transition_density,
)
from .kernels import (
    ConstantsK2,
    ConstantsK3,
    K2Explicit,
    K3Explicit,
    Kernel,
    LinearFamily,
    eval_kernel,
    load_kernel_csv,
    odd_root,
    user_table,
)
from .operators import (
    FixedPointReport,
    GridFunction,
    apply_H,
    apply_R,
    apply_W,
    eigen_to_fixed,
    fixed_to_eigen,
    iterate_R,
)
from .quadrature import QuadratureRule, build_rule, default_rule, integrate

__version__ = "0.1.0"
