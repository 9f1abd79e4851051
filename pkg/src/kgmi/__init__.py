"""Recovering multi-parent DAGs with kernel-guided mutual information and multi-head attention."""

__version__ = "0.1.0"

from .attention import gradient, init_state, objective, optimal_objective, tau_star, tau_star_node, train
from .decoder import decode, score
from .errors import KgmiError
from .estimator import chi2_kgmi_estimate, empirical_mu, estimate_table
from .exactdist import concentration_check, exact_pair_joints
from .graph import Dag, build_dag, diagnostics, disjoint_copies, effective_sequence_length, meta_graph
from .infometric import FKind, KgmiTable, chi2_closed_form, f_divergence, f_mutual_information, kgmi_table, naive_table
from .kernel import (KernelMixture, KernelStats, TransitionKernel, build_kernel, kernel_stats, lift_kernel,
                     marginal_kernels, paper_kernel, reduce_kernel, spectral_stats, stationary)
from .sampler import Dataset, sample_dataset, sample_extended, sample_sequence
