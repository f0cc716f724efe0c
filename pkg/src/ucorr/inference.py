"""Null distribution and p-values for uCorr."""
import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from ._validation import ValidationError, check_positive_int
from .forest import ForestConfig, ucorr
from .rank_space import RawSample

DEFAULT_K_BIAS = 0.5


class Method(enum.Enum):
    ANALYTIC = "analytic"
    PERMUTATION = "permutation"
    MANN_WHITNEY = "mann_whitney"


def null_variance(n, m, k_bias=DEFAULT_K_BIAS):
    """Variance of uCorr under independence.

    The Mann-Whitney variance ``(1 + n + m) / (3 n m)`` with the ``m`` term
    inflated by ``1 + k_bias`` to absorb the correlation between scores of
    nearby points.
    """
    if n <= 8 or m <= 8:
        raise ValidationError(f"null approximation needs n > 8 and m > 8 (assumption A2), got n={n}, m={m}")
    return (1.0 + n + m * (1.0 + k_bias)) / (3.0 * n * m)


@dataclass(frozen=True)
class NullParams:
    n: int
    m: int
    k_bias: float = DEFAULT_K_BIAS

    @property
    def sigma0(self):
        return math.sqrt(null_variance(self.n, self.m, self.k_bias))


def normal_sf(z):
    """Upper tail of the standard normal, ``1 - Phi(z)``."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def p_value_analytic(rho, params):
    """One-sided p-value of ``rho`` under the normal null approximation."""
    return normal_sf(rho / params.sigma0)


def permutation_null(sample, config, n_perms, rng):
    """uCorr of ``n_perms`` copies of ``sample`` with the y column shuffled."""
    return np.array([ucorr(RawSample(sample.x, rng.permutation(sample.y)), config)[0]
                     for _ in range(n_perms)])


def p_value_permutation(sample, config, n_perms, rng, observed=None):
    """Monte Carlo p-value ``(1 + #{null >= observed}) / (n_perms + 1)``."""
    check_positive_int(n_perms, "n_perms", minimum=19)
    if observed is None:
        observed = ucorr(sample, config)[0]
    null = permutation_null(sample, config, n_perms, rng)
    return (1 + int(np.count_nonzero(null >= observed))) / (n_perms + 1)


@dataclass
class TestResult:
    rho: float
    sigma0: float
    z: float
    p_value: float
    method: Method
    n: int
    m: int
    config: dict = field(default_factory=dict)
    elapsed_ms: int = 0
    degenerate: bool = False

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self):
        return {
            "rho": self.rho,
            "sigma0": self.sigma0,
            "z": self.z,
            "p_value": self.p_value,
            "n": self.n,
            "m": self.m,
            "method": self.method.value,
            "config": self.config,
            "elapsed_ms": self.elapsed_ms,
        }


def mann_whitney_u(first, second):
    """U statistic of ``first`` against ``second`` (ties count one half)."""
    first = np.asarray(first, dtype=np.float64)
    second = np.asarray(second, dtype=np.float64)
    n1 = first.size
    ranks = rankdata(np.concatenate([first, second]))
    return float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)


def mann_whitney_test(table):
    """One-sided Mann-Whitney test that observed scores exceed permuted scores.

    Uses the normal approximation with the usual tie correction.  The
    returned ``rho`` is ``2U / (n1 n2) - 1`` over the scored examples.
    """
    obs = table.obs_scores
    perm = table.perm_scores
    obs = obs[~np.isnan(obs)]
    perm = perm[~np.isnan(perm)]
    n1, n2 = obs.size, perm.size
    if n1 == 0 or n2 == 0:
        raise ValidationError("Mann-Whitney test needs scored examples in both groups")
    pooled = np.concatenate([obs, perm])
    ranks = rankdata(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    big_n = n1 + n2
    _, tie_sizes = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_sizes.astype(np.float64) ** 3 - tie_sizes))
    var_u = n1 * n2 / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    rho = 2.0 * u / (n1 * n2) - 1.0
    if var_u <= 0:
        return TestResult(rho, 0.0, 0.0, 0.5, Method.MANN_WHITNEY, n1, n2, degenerate=True)
    z = (u - n1 * n2 / 2.0) / math.sqrt(var_u)
    sigma0 = 2.0 * math.sqrt(var_u) / (n1 * n2)
    return TestResult(rho, sigma0, z, normal_sf(z), Method.MANN_WHITNEY, n1, n2)


def ucorr_test(sample, config=ForestConfig(), method=Method.ANALYTIC, k_bias=DEFAULT_K_BIAS,
               n_perms=99, rng=None):
    """Compute uCorr and its one-sided p-value in one call."""
    if not isinstance(sample, RawSample):
        sample = RawSample(*sample)
    method = Method(method)
    start = time.perf_counter()
    config = config.resolve(sample.n)
    rho, table = ucorr(sample, config)
    sigma0 = NullParams(sample.n, config.m, k_bias).sigma0
    echo = dict(config.to_dict(), k_bias=k_bias)
    if method is Method.MANN_WHITNEY:
        result = mann_whitney_test(table)
        result.config = echo
    else:
        if method is Method.ANALYTIC:
            p = normal_sf(rho / sigma0)
        else:
            if rng is None:
                rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(2,)))
            p = p_value_permutation(sample, config, n_perms, rng, observed=rho)
            echo["permutations"] = n_perms
        result = TestResult(rho, sigma0, rho / sigma0, p, method, sample.n, config.m, echo)
    result.elapsed_ms = int(round((time.perf_counter() - start) * 1000))
    return result

