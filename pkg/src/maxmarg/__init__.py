"""Exact maximum-marginal decoding of X in triplet Markov models.

The decoder is a branch and bound over prefixes of ``x``; see
:func:`maxmarg.search.branch_and_bound`.
"""

from .logdomain import ZERO, log_sum_exp
from .model import PairChain, TripletModel, condition_on_observations, sample_tmm

__all__ = [
    "ZERO",
    "log_sum_exp",
    "PairChain",
    "TripletModel",
    "condition_on_observations",
    "sample_tmm",
]
