"""scikit-learn style wrappers around the tree learner and the uCorr test."""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_pair, check_xy_matrix
from .forest import ForestConfig
from .inference import DEFAULT_K_BIAS, Method, ucorr_test
from .rank_space import RawSample
from .tree import Criterion, TreeConfig, fit_tree


def _columns(X, y, min_size):
    if y is None:
        return check_xy_matrix(X, min_size=min_size)
    return check_pair(np.ravel(X), y, min_size=min_size)


class SecondOrderTree(BaseEstimator):
    """Single tree separating a bivariate sample from its permutations.

    ``fit`` takes an ``(n, 2)`` array (or ``x`` and ``y`` vectors);
    ``predict`` returns the leaf label of each point, i.e. the weighted share
    of observed rows in its leaf.  Labels above 0.5 mark regions denser than
    independence would predict.
    """

    def __init__(self, max_leaf_count=16, split_trials=10, min_leaf_width=1,
                 criterion="gini", random_state=0):
        self.max_leaf_count = max_leaf_count
        self.split_trials = split_trials
        self.min_leaf_width = min_leaf_width
        self.criterion = criterion
        self.random_state = random_state

    def fit(self, X, y=None):
        x, y = _columns(X, y, min_size=2)
        config = TreeConfig(self.max_leaf_count, self.split_trials, self.min_leaf_width,
                            criterion=Criterion(self.criterion))
        self.tree_ = fit_tree(x, y, config, self.random_state)
        self.n_leaves_ = self.tree_.n_leaves
        return self

    def predict(self, X, y=None):
        check_is_fitted(self, "tree_")
        x, y = _columns(X, y, min_size=1)
        return self.tree_.score(x, y)


class UCorr(BaseEstimator):
    """uCorr dependence coefficient with a one-sided test of independence.

    Parameters
    ----------
    n_trees : int, default=100
        Number of bootstrapped trees.
    random_split_fraction : float, default=0.5
        Share of trees grown with semi-random split scores.
    m : int or None
        Number of permuted pairs scored; ``None`` means ``min(2000, n(n-1))``.
    max_leaf_count, min_leaf_width : int or None
        Tree size limits; ``None`` means ``min(ceil(sqrt(n)), 64)`` and ``ceil(0.03 n)``.
    split_trials : int, default=10
        Random split points tried per leaf.
    k_bias : float, default=0.5
        Variance inflation used by the analytic p-value.
    pvalue : {"analytic", "permutation", "mann_whitney"}
    n_permutations : int, default=99
        Shuffles used when ``pvalue="permutation"``.
    random_state : int, default=0
    n_jobs : int, default=1
        Threads used to train trees; results do not depend on it.

    Attributes
    ----------
    rho_ : float
    p_value_ : float
    sigma0_ : float
    result_ : TestResult
    """

    def __init__(self, n_trees=100, random_split_fraction=0.5, m=None, max_leaf_count=None,
                 min_leaf_width=None, split_trials=10, k_bias=DEFAULT_K_BIAS, pvalue="analytic",
                 n_permutations=99, random_state=0, n_jobs=1):
        self.n_trees = n_trees
        self.random_split_fraction = random_split_fraction
        self.m = m
        self.max_leaf_count = max_leaf_count
        self.min_leaf_width = min_leaf_width
        self.split_trials = split_trials
        self.k_bias = k_bias
        self.pvalue = pvalue
        self.n_permutations = n_permutations
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _forest_config(self):
        return ForestConfig(
            tree_count=self.n_trees,
            random_split_fraction=self.random_split_fraction,
            m=self.m,
            max_leaf_count=self.max_leaf_count,
            min_leaf_width=self.min_leaf_width,
            split_trials=self.split_trials,
            seed=self.random_state,
            threads=self.n_jobs,
        )

    def fit(self, X, y=None):
        x, y = _columns(X, y, min_size=2)
        self.result_ = ucorr_test(RawSample(x, y), self._forest_config(), Method(self.pvalue),
                                  k_bias=self.k_bias, n_perms=self.n_permutations)
        self.rho_ = self.result_.rho
        self.p_value_ = self.result_.p_value
        self.sigma0_ = self.result_.sigma0
        self.n_samples_ = x.size
        return self

