"""Perturb-and-max-product: sampling and learning in discrete EBMs.

Sampling draws a Gumbel perturbation of the unary potentials and decodes
an approximate MAP of the perturbed model with damped parallel
max-product.  Learning matches data and model moments using those samples
for the negative (and, with hidden variables, positive) phase.

Layout: ``graph`` (factor graphs), ``maxprod`` (message passing and the
specialized Ising/RBM/OR/AND kernels), ``perturb`` (noise), ``samplers``
(PMP + Gibbs baselines, the deconvolution posterior), ``learning``,
``evaluation`` (enumeration oracles, bounds, divergences, MMD),
``lp_export``, ``data_io``, ``experiments``/``cli`` (drivers).
"""

from .graph import (AndFactor, CapacityError, DenseTable, Factor, FactorGraph,
                    GraphError, IsingEdge, OrFactor, RbmBlock, VariableSpec,
                    binary_pairwise_graph, clamp, ising_graph, rbm_graph)
from .maxprod import SweepConfig, run_max_product
from .perturb import (EULER_GAMMA, PersistentGumbel, chain_rng, draw_gumbel,
                      gumbel_icdf, perturb)
from .samplers import (DeconvPosterior, SamplerSpec, gibbs_sweep,
                       ising_gibbs_run, ising_pmp_sample, pmp_posterior_sample,
                       pmp_sample, pmp_sample_chains, rbm_pmp_sample,
                       spin_kernel_params)
from .learning import (TrainConfig, TrainState, exact_moment_train,
                       grad_estimate, init_rbm, train, train_ising_spin,
                       train_rbm)
from .evaluation import (cyclic_lattice_logZ, empirical_joint,
                         exact_distribution, exact_log_partition,
                         exact_map_perturbed, exact_marginals, exact_moments,
                         kl_divergence, mmd2, pmap_logZ_upper_bound,
                         total_variation)
from .lp_export import (LinearProgram, map_reduced_to_full, parse_lp,
                        reduced_lp_ising, reduced_lp_rbm, serialize_lp)
from .data_io import (BinaryImageSet, DeconvTruth, build_deconv_graph,
                      deconv_forward, extract_zero_contours,
                      gen_deconv_dataset, read_idx, write_idx)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
