"""Offline training of softmax recommendation policies over large catalogs.

The fast path estimates the policy gradient as a covariance under the policy,
approximated with self-normalised importance sampling from a mixture of a
uniform law and a softmax over MIPS-retrieved top-K items.
"""
from .core import (
    ActionDistribution,
    Catalog,
    ConfigurationError,
    ItemEmbeddings,
    LoggedBanditRecord,
    PolicyParams,
    policy_argmax_exact,
    policy_probabilities_exact,
    relevance_score,
)
from .grad import (
    GradientEstimate,
    exact_covariance_gradient,
    exact_gradient,
    reinforce_mc_gradient,
    snis_covariance_gradient,
)
from .mips import IndexConfig, TopKSet, build_index, load_index, top_k
from .proposal import MixtureProposal, build_proposal, proposal_prob, proposal_sample
from .trainer import RunReport, TrainConfig, evaluate, train

__version__ = "0.1.0"
