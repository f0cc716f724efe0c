"""Synthetic relationships, power and null-distribution experiments, and classical baselines.

The functional forms are representative reconstructions of common test
relationships; ``noise`` runs from 0 (noiseless) to 100 (relation mostly
washed out) and is mapped to a kind-specific amplitude.
"""
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from ._validation import ValidationError, check_positive_int
from .forest import ForestConfig, ucorr
from .inference import NullParams, normal_sf
from .rank_space import RawSample


class Relationship(enum.Enum):
    INDEPENDENT = "independent"
    LINEAR = "linear"
    PARABOLA = "parabola"
    SINE = "sine"
    CIRCLE = "circle"
    CROSS = "cross"
    CHECKERBOARD = "checkerboard"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValidationError(f"unknown relationship {value!r}; valid kinds: {valid}") from None


# half-width of the uniform noise at noise level 100
NOISE_SCALE = {
    Relationship.INDEPENDENT: 0.0,
    Relationship.LINEAR: 2.0,
    Relationship.PARABOLA: 1.0,
    Relationship.SINE: 2.0,
    Relationship.CIRCLE: 1.0,
    Relationship.CROSS: 2.0,
    Relationship.CHECKERBOARD: 0.5,
}


@dataclass(frozen=True)
class RelationshipSpec:
    kind: Relationship
    n: int
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Relationship.parse(self.kind))
        check_positive_int(self.n, "n")
        if not 0.0 <= self.noise <= 100.0:
            raise ValidationError(f"noise must lie in [0, 100], got {self.noise}")


def _checkerboard(rng, n):
    cells = np.array([(i, j) for i in range(4) for j in range(4) if (i + j) % 2 == 0])
    pick = cells[rng.integers(0, len(cells), size=n)]
    x = -1.0 + 0.5 * (pick[:, 0] + rng.uniform(size=n))
    y = -1.0 + 0.5 * (pick[:, 1] + rng.uniform(size=n))
    return x, y


def generate(spec, rng=None):
    """Draw ``spec.n`` points from the relationship ``spec.kind``.

    Noise is additive uniform on ``[-s, s]`` with ``s = noise / 100 * scale``;
    for the circle it perturbs both coordinates, otherwise only y.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    n = spec.n
    s = spec.noise / 100.0 * NOISE_SCALE[spec.kind]
    kind = spec.kind
    if kind is Relationship.CIRCLE:
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        x = np.cos(theta) + rng.uniform(-s, s, size=n)
        y = np.sin(theta) + rng.uniform(-s, s, size=n)
        return RawSample(x, y)
    if kind is Relationship.CHECKERBOARD:
        x, y = _checkerboard(rng, n)
        return RawSample(x, y + rng.uniform(-s, s, size=n))

    x = rng.uniform(-1.0, 1.0, size=n)
    if kind is Relationship.INDEPENDENT:
        y = rng.uniform(-1.0, 1.0, size=n)
    elif kind is Relationship.LINEAR:
        y = x.copy()
    elif kind is Relationship.PARABOLA:
        y = x ** 2
    elif kind is Relationship.SINE:
        y = np.sin(4.0 * np.pi * x)
    elif kind is Relationship.CROSS:
        y = np.where(rng.uniform(size=n) < 0.5, x, -x)
    else:  # pragma: no cover - enum is exhaustive
        raise ValidationError(f"unknown relationship {kind!r}")
    return RawSample(x, y + rng.uniform(-s, s, size=n))


def pearson(sample):
    x, y = np.asarray(sample.x), np.asarray(sample.y)
    if x.size < 3:
        raise ValidationError("correlation needs at least 3 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ValidationError("correlation is undefined for a constant variable")
    return float(np.clip(np.dot(dx, dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def spearman(sample):
    return pearson(RawSample(rankdata(sample.x), rankdata(sample.y)))


class Coefficient(enum.Enum):
    UCORR = "ucorr"
    PEARSON = "pearson"
    SPEARMAN = "spearman"


def coefficient_value(coefficient, sample, config=ForestConfig()):
    coefficient = Coefficient(coefficient)
    if coefficient is Coefficient.UCORR:
        return ucorr(sample, config)[0]
    if coefficient is Coefficient.PEARSON:
        return pearson(sample)
    return spearman(sample)


@dataclass(frozen=True)
class PowerResult:
    kind: Relationship
    noise: float
    coefficient: Coefficient
    power: float
    reps: int
    null_quantile_95: float

    def to_row(self):
        return {
            "relation": self.kind.value,
            "noise": self.noise,
            "coefficient": self.coefficient.value,
            "power": self.power,
            "reps": self.reps,
            "null_quantile_95": self.null_quantile_95,
        }


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def power_experiment(kind, n, noise_grid, reps, coefficients=(Coefficient.UCORR,), seed=0,
                     config=ForestConfig(), threads=1):
    """Estimate detection power at each noise level.

    For every noise level, ``reps`` datasets are drawn from the relationship
    and another ``reps`` are drawn and then shuffled along y.  The 95%
    quantile of the shuffled coefficients is the threshold; power is the
    fraction of unshuffled coefficients above it.
    """
    kind = Relationship.parse(kind)
    check_positive_int(reps, "reps", minimum=50)
    coefficients = [Coefficient(c) for c in coefficients]
    results = []
    for level_idx, noise in enumerate(noise_grid):
        def replicate(r, level_idx=level_idx, noise=noise):
            ss = np.random.SeedSequence(int(seed), spawn_key=(level_idx, r))
            alt_ss, null_ss, shuffle_ss = ss.spawn(3)
            alt = generate(RelationshipSpec(kind, n, noise), np.random.default_rng(alt_ss))
            base = generate(RelationshipSpec(kind, n, noise), np.random.default_rng(null_ss))
            null = RawSample(base.x, np.random.default_rng(shuffle_ss).permutation(base.y))
            return [(coefficient_value(c, alt, config), coefficient_value(c, null, config))
                    for c in coefficients]

        values = np.array(_map(replicate, range(reps), threads))  # (reps, coeff, 2)
        for c_idx, coefficient in enumerate(coefficients):
            alt_vals = values[:, c_idx, 0]
            null_vals = values[:, c_idx, 1]
            q95 = float(np.quantile(null_vals, 0.95))
            results.append(PowerResult(kind, float(noise), coefficient,
                                       float(np.mean(alt_vals > q95)), reps, q95))
    return results


@dataclass
class NullDistribution:
    """Summary of uCorr replicates on independent data, with the predicted normal overlay."""

    n: int
    m: int
    reps: int
    values: np.ndarray
    predicted_sigma: float
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def std(self):
        return float(np.std(self.values, ddof=1))

    def quantile(self, q):
        return float(np.quantile(self.values, q))

    def rejection_rate(self, alpha=0.05):
        p = np.array([normal_sf(v / self.predicted_sigma) for v in self.values])
        return float(np.mean(p < alpha))

    def histogram_rows(self):
        """One row per bin: edges, empirical density and predicted normal density."""
        widths = np.diff(self.bin_edges)
        density = self.counts / (self.reps * widths)
        centers = 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])
        s = self.predicted_sigma
        predicted = np.exp(-0.5 * (centers / s) ** 2) / (s * np.sqrt(2.0 * np.pi))
        rows = []
        for k in range(self.counts.size):
            rows.append({
                "bin_lo": float(self.bin_edges[k]),
                "bin_hi": float(self.bin_edges[k + 1]),
                "count": int(self.counts[k]),
                "density": float(density[k]),
                "predicted_density": float(predicted[k]),
                "mean": self.mean,
                "std": self.std,
                "q05": self.quantile(0.05),
                "q50": self.quantile(0.5),
                "q95": self.quantile(0.95),
                "predicted_sigma": s,
            })
        return rows


def null_dist_experiment(n, m, reps, seed=0, config=ForestConfig(), bins=30, k_bias=0.5, threads=1):
    """Repeat uCorr on independent uniform samples of size ``n``."""
    check_positive_int(reps, "reps", minimum=200)
    config = replace(config, m=m)

    def replicate(r):
        ss = np.random.SeedSequence(int(seed), spawn_key=(r,))
        rng = np.random.default_rng(ss)
        sample = RawSample(rng.uniform(size=n), rng.uniform(size=n))
        forest_seed = int(ss.generate_state(1, dtype=np.uint64)[0])
        return ucorr(sample, replace(config, seed=forest_seed))[0]

    values = np.array(_map(replicate, range(reps), threads))
    counts, edges = np.histogram(values, bins=bins)
    sigma = NullParams(n, m, k_bias).sigma0
    return NullDistribution(n, m, reps, values, sigma, edges, counts)
