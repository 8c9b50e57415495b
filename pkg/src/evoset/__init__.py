"""Evolving sets, conductance profiles and exact mixing-time oracles for finite Markov chains."""
from .benchmarks import (Benchmark, c2, c3, clique, cycle, hypercube, lamplighter_cycle, lazy_box,
                         parse_benchmark, percolation_box, random_chain, random_holes, two_expanders)
from .bounds import (BoundReport, ClampWarning, chain_gap_lower_bound, chi_square_bound,
                     continuous_bound, convex_variant_bound, gap_lower_bound, infinite_bound,
                     lemma_rr_steps, tau_uniform_bound, weighted_log_integral)
from .chain import ChainKernel, StateSet, build_chain, conductance, lazify, q_flow, time_reversal
from .checks import CheckResult, run_suite
from .errors import *  # noqa: F401,F403
from .evolving import (EvolvingTrace, SetChainKernel, breakpoints, estimate_transition,
                       evolve_step, psi, sample_trace, set_kernel, theta, varphi)
from .exact import (MixingReport, chi_square, continuous_distribution, distribution_at,
                    mixing_report, spectral_gap, tau_tv, tau_uniform, tau_uniform_continuous)
from .profiles import (AnalyticProfile, StepFunctionProfile, conductance_profile, gauge_profile,
                       h2_plus, parse_analytic, profile_query, root_profile)

__version__ = "0.1.0"
