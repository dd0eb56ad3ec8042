"""Goodness-of-fit tools for partition samplers and scalar samples."""

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from ..errors import DegenerateTestError, DomainError
from ..partitions import SetPartition, partition_index, rgs_table

SIGNIFICANCE = 0.01
MAX_CHI_N = 8
MIN_EXPECTED = 5.0

REPORT_FIELDS = ("name", "statistic", "p_value", "abs_error", "n_samples", "pass", "seed",
                 "runtime_ms")


@dataclass
class ExperimentReport:
    """One experiment outcome; ``passed`` follows the declared criterion."""

    name: str
    statistic: float
    p_value: float = float("nan")
    abs_error: float = float("nan")
    n_samples: int = 0
    passed: bool = False
    seed: int = 0
    runtime_ms: int = 0
    details: dict = field(default_factory=dict)

    def row(self):
        return {"name": self.name, "statistic": self.statistic, "p_value": self.p_value,
                "abs_error": self.abs_error, "n_samples": self.n_samples, "pass": self.passed,
                "seed": self.seed, "runtime_ms": self.runtime_ms}

    def to_dict(self):
        return asdict(self)


def p_value_report(name, statistic, p, n_samples, significance=SIGNIFICANCE, **details):
    return ExperimentReport(name, float(statistic), p_value=float(p), n_samples=int(n_samples),
                            passed=bool(p > significance), details=details)


def error_report(name, err, tol, n_samples=0, **details):
    return ExperimentReport(name, float(err), abs_error=float(err), n_samples=int(n_samples),
                            passed=bool(err < tol), details=dict(details, tolerance=tol))


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = int(round(1000 * (time.perf_counter() - self.t0)))


def combine(name, reports, significance=SIGNIFICANCE):
    """Joint verdict over several parts: every part must pass on its own.

    The reported p-value is the smallest part p-value, so ``pass`` still reads
    as p_value > significance for purely statistical experiments.
    """
    ps = [r.p_value for r in reports if not math.isnan(r.p_value)]
    errs = [r.abs_error for r in reports if math.isnan(r.p_value)]
    p = min(ps) if ps else float("nan")
    err = max(errs) if errs else float("nan")
    return ExperimentReport(name, p if ps else err, p_value=p, abs_error=err,
                            n_samples=max((r.n_samples for r in reports), default=0),
                            passed=all(r.passed for r in reports),
                            details={r.name: r.row() for r in reports})


# ---------------------------------------------------------------------------
# cell probabilities
# ---------------------------------------------------------------------------

def _eppf_fn(evaluator):
    if hasattr(evaluator, "eppf"):
        return evaluator.eppf
    if callable(evaluator):
        return evaluator
    raise DomainError("evaluator must be callable on block sizes")


def _partition_count(sizes):
    """Number of set partitions of [n] with the given block sizes."""
    n = sum(sizes)
    out = math.lgamma(n + 1) - sum(math.lgamma(s + 1) for s in sizes)
    _, mult = np.unique(sizes, return_counts=True)
    out -= sum(math.lgamma(m + 1) for m in mult)
    return math.exp(out)


def partition_probs(evaluator, n):
    """EPPF probability of every partition of [n], in restricted-growth order."""
    fn = _eppf_fn(evaluator)
    return np.array([fn(SetPartition.from_labels(r.tolist()).sizes) for r in rgs_table(n)])


def composition_key(labels):
    """Row-wise sorted block sizes, as tuples."""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.zeros((labels.shape[0], labels.shape[1]), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(labels.shape[0]), labels.shape[1]), labels.ravel()), 1)
    counts = -np.sort(-counts, axis=1)
    return [tuple(int(x) for x in row if x) for row in counts]


def pooled_chisquare(observed, expected_prob, min_expected=MIN_EXPECTED):
    """Chi-square goodness of fit; cells with small expectation are merged smallest first."""
    observed = np.asarray(observed, dtype=float)
    p = np.asarray(expected_prob, dtype=float)
    total = observed.sum()
    if total <= 0:
        raise DegenerateTestError("no samples")
    if abs(p.sum() - 1.0) > 1e-6:
        raise DomainError(f"cell probabilities sum to {p.sum()!r}")
    expected = p * total
    order = np.argsort(expected)
    obs, exp_ = [], []
    acc_o = acc_e = 0.0
    for i in order:
        acc_o += observed[i]
        acc_e += expected[i]
        if acc_e >= min_expected:
            obs.append(acc_o)
            exp_.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_:
            obs[-1] += acc_o
            exp_[-1] += acc_e
        else:
            obs.append(acc_o)
            exp_.append(acc_e)
    if len(obs) < 2:
        raise DegenerateTestError("fewer than two cells after pooling")
    obs, exp_ = np.array(obs), np.array(exp_)
    stat = float(((obs - exp_) ** 2 / exp_).sum())
    return stat, float(stats.chi2.sf(stat, len(obs) - 1)), len(obs)


def chi_square_vs_eppf(samples, evaluator, n, name="chi-square", significance=SIGNIFICANCE):
    """Partition samples of [n] (label rows or SetPartitions) against EPPF cell probabilities.

    Exact partitions are the cells for n <= 6; for n = 7, 8 the cells are block-size
    classes, each weighted by its number of set partitions.
    """
    n = int(n)
    if n > MAX_CHI_N:
        raise DomainError(f"chi-square binning needs n <= {MAX_CHI_N}")
    if n < 2:
        raise DegenerateTestError("a single element has only one partition")
    if not isinstance(samples, np.ndarray):
        samples = np.array([s.labels() if isinstance(s, SetPartition) else s for s in samples])
    labels = np.asarray(samples, dtype=np.int64)
    if labels.ndim != 2 or labels.shape[1] != n:
        raise DomainError("samples must be label rows of length n")
    if n <= 6:
        p = partition_probs(evaluator, n)
        obs = np.bincount(partition_index(labels), minlength=p.size)
    else:
        fn = _eppf_fn(evaluator)
        keys = composition_key(labels)
        classes = sorted(set(composition_key(rgs_table(n))))
        pos = {c: i for i, c in enumerate(classes)}
        p = np.array([fn(c) * _partition_count(c) for c in classes])
        obs = np.bincount([pos[k] for k in keys], minlength=len(classes))
    stat, pv, cells = pooled_chisquare(obs, p)
    return p_value_report(name, stat, pv, labels.shape[0], significance, cells=cells)


def category_codes(rows):
    """Integer code per distinct row (rows may contain -1 padding)."""
    _, inv = np.unique(np.asarray(rows), axis=0, return_inverse=True)
    return inv.ravel()


def homogeneity_test(a, b, name="homogeneity", significance=SIGNIFICANCE):
    """Chi-square test that two label-row samples share one law (sparse categories pooled)."""
    codes = category_codes(np.vstack([a, b]))
    na = len(a)
    table = np.vstack([np.bincount(codes[:na], minlength=codes.max() + 1),
                       np.bincount(codes[na:], minlength=codes.max() + 1)])
    table = _pool_columns(table)
    res = stats.chi2_contingency(table, correction=False)
    return p_value_report(name, res.statistic, res.pvalue, len(a) + len(b), significance)


def _pool_columns(table, min_expected=MIN_EXPECTED):
    exp_ = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / table.sum()
    small = exp_.min(axis=0) < min_expected
    if small.any():
        table = np.hstack([table[:, ~small], table[:, small].sum(axis=1, keepdims=True)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        raise DegenerateTestError("fewer than two categories")
    return table


def independence_test(x_codes, y_codes, name="independence", significance=SIGNIFICANCE):
    """Contingency chi-square test of independence between two categorical samples."""
    x = np.asarray(x_codes)
    y = np.asarray(y_codes)
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    table = np.zeros((xi.max() + 1, yi.max() + 1))
    np.add.at(table, (xi, yi), 1)
    table = _pool_columns(table)
    table = _pool_columns(table.T).T
    res = stats.chi2_contingency(table, correction=False)
    return p_value_report(name, res.statistic, res.pvalue, x.size, significance)


def ks_vs_cdf(x, cdf, name="ks", significance=SIGNIFICANCE):
    res = stats.kstest(np.asarray(x), cdf)
    return p_value_report(name, res.statistic, res.pvalue, len(x), significance)


def ks_two_sample(x, y, name="ks2", significance=SIGNIFICANCE):
    res = stats.ks_2samp(np.asarray(x), np.asarray(y))
    return p_value_report(name, res.statistic, res.pvalue, len(x) + len(y), significance)


def mean_z_test(x, target, name="mean", k_se=3.0):
    """|mean - target| within ``k_se`` standard errors."""
    x = np.asarray(x, dtype=float)
    se = x.std(ddof=1) / math.sqrt(x.size)
    z = (x.mean() - target) / se
    return ExperimentReport(name, float(z), abs_error=float(abs(x.mean() - target)),
                            n_samples=x.size, passed=bool(abs(z) < k_se),
                            details={"mean": float(x.mean()), "se": float(se), "target": target})


class QuadratureCDF:
    """CDF of a positive density by composite Gauss-Legendre on fixed panels.

    Values at panel edges are cumulative sums; inside a panel the partial panel
    is integrated afresh, so no interpolation error enters.
    """

    def __init__(self, pdf, edges, nodes=24):
        self.pdf = pdf
        self.edges = np.asarray(edges, dtype=float)
        self.x, self.w = np.polynomial.legendre.leggauss(nodes)
        panels = self._panel(self.edges[:-1], self.edges[1:])
        self.cum = np.concatenate([[0.0], np.cumsum(panels)])
        self.total = float(self.cum[-1])

    def _panel(self, lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        pts = mid[:, None] + half[:, None] * self.x[None, :]
        vals = np.asarray(self.pdf(pts.ravel())).reshape(pts.shape)
        return half * (vals @ self.w)

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        sc = np.clip(s, self.edges[0], self.edges[-1])
        i = np.clip(np.searchsorted(self.edges, sc, side="right") - 1, 0, self.edges.size - 2)
        out = self.cum[i] + self._panel(self.edges[i], sc)
        return out / self.total
