"""Monte Carlo harness: attack, trace, and compare rates against predictions.

Each trial draws a fresh bias vector and coalition, forges a copy under the
configured strategy, and scores both the coalition and a sample of innocent
users against the scheme threshold. Innocent rows are sampled
(``innocents_per_trial`` per trial) instead of materializing the full user
matrix; innocent rows are i.i.d. given the bias and the forged copy, so the
sampled false-positive rate estimates the per-user rate exactly. Columns
where the forged copy is 0 contribute nothing to any score, so innocent bits
are only drawn in the forged copy's one-columns.

Aggregates are deterministic for a fixed (config, seed) and independent of
the thread count: every trial has its own counter-based random substream and
per-trial results land in preallocated slots that are reduced in trial order.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attacks import Strategy, forge
from .errors import CapacityError, ParameterError
from .gaussian import MomentSummary, erfc_inv, moments, normal_cdf
from .model import ARCSINE, BiasDistribution, SchemeParams
from .rng import TAG_TRIAL, substreams
from .tracer import _score_pieces

__all__ = ["SimConfig", "SimReport", "Histogram", "HistogramBundle",
           "run", "score_histograms", "wilson_interval"]

_WILSON_Z = math.sqrt(2.0) * erfc_inv(2.0 * 0.005)  # two-sided 99% normal
_CI_METHOD = "wilson-99"
_HIST_HALF_WIDTH = 6.0
_BIT_BUDGET = 2 * 10 ** 11


def wilson_interval(successes, n, z=_WILSON_Z):
    """Wilson score interval for a binomial rate; well-behaved at 0 and n."""
    if n < 1:
        raise ParameterError("need at least one observation")
    if not 0 <= successes <= n:
        raise ParameterError("successes must lie in [0, n]")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class SimConfig:
    """One simulation campaign: scheme parameters, adversary, and budget."""

    params: SchemeParams
    strategy: Strategy
    c: int
    trials: int
    innocents_per_trial: int
    seed: int
    threads: int = 1
    keep_scores: bool = False
    histogram_bins: int = 80

    def __post_init__(self):
        if isinstance(self.strategy, str):
            object.__setattr__(self, "strategy",
                               Strategy.from_kind(self.strategy, self.c))
        if not isinstance(self.strategy, Strategy):
            object.__setattr__(self, "strategy",
                               Strategy.from_table(self.strategy))
        if self.c < 1:
            raise ParameterError("coalition size must be at least 1")
        if self.c > self.params.c0:
            raise ParameterError(
                f"coalition size {self.c} exceeds the design size {self.params.c0}")
        if self.strategy.c != self.c:
            raise ParameterError("strategy table size disagrees with coalition size")
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if self.innocents_per_trial < 1:
            raise ParameterError("innocents_per_trial must be at least 1")
        if self.params.Z is None:
            raise ParameterError("scheme parameters must include a threshold Z")
        if self.histogram_bins < 1:
            raise ParameterError("histogram_bins must be at least 1")


@dataclass(frozen=True)
class Histogram:
    """Equal-width bins of normalized scores; density integrates to one.

    Samples beyond the range are clipped into the edge bins, so the full
    sample mass is always represented.
    """

    edges: tuple
    density: tuple
    count: int

    def to_csv(self, fh):
        fh.write("bin_lo,bin_hi,density\n")
        for lo, hi, d in zip(self.edges[:-1], self.edges[1:], self.density):
            fh.write(f"{lo!r},{hi!r},{d!r}\n")


@dataclass(frozen=True)
class HistogramBundle:
    innocent: Histogram
    coalition: Histogram
    ks_innocent: float
    ks_coalition: float


@dataclass(frozen=True)
class SimReport:
    """Aggregated simulation outcome.

    Rates come with Wilson 99% intervals. ``innocent_score_moments`` is
    (mean, variance) of raw innocent scores pooled over trials;
    ``coalition_score_moments`` the same for the per-trial coalition score
    totals; the ``*_moment_se`` tuples hold their standard errors. Innocent
    histogram scores are normalized per trial by sqrt(#ones in the forged
    copy), which makes their variance exactly one; coalition totals are
    normalized by the predicted mean and standard deviation in ``predicted``.
    """

    fp_hat: float
    fp_ci: tuple
    fn_hat: float
    fn_ci: tuple
    ci_method: str
    innocent_score_moments: tuple
    innocent_moment_se: tuple
    coalition_score_moments: tuple
    coalition_moment_se: tuple
    histograms: HistogramBundle
    ks_innocent: float
    ks_coalition: float
    predicted: MomentSummary
    trials: int
    innocents_total: int
    m: int
    Z: float
    c: int
    trial_fn: tuple
    trial_innocents_accused: tuple
    trial_coalition_total: tuple
    trial_coalition_max: tuple
    innocent_scores: object = None  # raw pooled scores when keep_scores

    def to_jsonl(self, fh):
        """One record per trial plus a final aggregate record."""
        for k in range(self.trials):
            fh.write(json.dumps({
                "trial": k,
                "fn": bool(self.trial_fn[k]),
                "innocents_accused": int(self.trial_innocents_accused[k]),
                "coalition_total": self.trial_coalition_total[k],
                "coalition_max": self.trial_coalition_max[k],
            }, sort_keys=True) + "\n")
        fh.write(json.dumps({"aggregate": {
            "fp_hat": self.fp_hat, "fp_ci": list(self.fp_ci),
            "fn_hat": self.fn_hat, "fn_ci": list(self.fn_ci),
            "ci_method": self.ci_method,
            "trials": self.trials, "innocents_total": self.innocents_total,
            "m": self.m, "Z": self.Z, "c": self.c,
            "innocent_mean": self.innocent_score_moments[0],
            "innocent_variance": self.innocent_score_moments[1],
            "coalition_mean": self.coalition_score_moments[0],
            "coalition_variance": self.coalition_score_moments[1],
            "ks_innocent": self.ks_innocent,
            "ks_coalition": self.ks_coalition,
        }}, sort_keys=True) + "\n")


def _ks_distance(sample):
    """Two-sided Kolmogorov-Smirnov distance to the standard normal."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    cdf = normal_cdf(x)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(grid - cdf), np.max(cdf - (grid - 1.0 / n))))


def _histogram(sample, bins):
    half = _HIST_HALF_WIDTH
    clipped = np.clip(sample, -half, half * (1.0 - 1e-12))
    counts, edges = np.histogram(clipped, bins=bins, range=(-half, half))
    width = edges[1] - edges[0]
    density = counts / (sample.size * width)
    return Histogram(edges=tuple(float(e) for e in edges),
                     density=tuple(float(d) for d in density),
                     count=int(sample.size))


def _run_trials(cfg, dist, lo, hi, slots):
    """Fill per-trial result slots for trial indices [lo, hi)."""
    m, Z, c = cfg.params.m, cfg.params.Z, cfg.c
    table = cfg.strategy
    K = cfg.innocents_per_trial
    for k in range(lo, hi):
        g_bias, g_rows, g_forge, g_innocent = substreams(cfg.seed, TAG_TRIAL, k, 4)
        p = dist.sample(m, g_bias)
        rows = (g_rows.random((c, m)) < p).astype(np.uint8)
        y = forge(rows, table, rng=g_forge)
        mask, w, base = _score_pieces(y.bits, p)
        m1 = w.size
        coal = rows[:, mask].astype(np.float64) @ w + base
        bits = g_innocent.random((K, m1)) < p[mask]
        scores = bits.astype(np.float64) @ w + base

        slots["fn"][k] = not bool(np.any(coal > Z))
        slots["accused"][k] = int(np.count_nonzero(scores > Z))
        slots["coal_total"][k] = float(coal.sum())
        slots["coal_max"][k] = float(coal.max())
        slots["s1"][k] = float(scores.sum())
        slots["s2"][k] = float((scores ** 2).sum())
        slots["s3"][k] = float((scores ** 3).sum())
        slots["s4"][k] = float((scores ** 4).sum())
        slots["normalized"][k] = scores / math.sqrt(max(m1, 1))
        if cfg.keep_scores:
            slots["raw"][k] = scores


def run(cfg):
    """Execute the campaign and aggregate rates, moments, and histograms."""
    m, Z, c = cfg.params.m, cfg.params.Z, cfg.c
    K, trials = cfg.innocents_per_trial, cfg.trials
    if trials * (K + c) * m > _BIT_BUDGET:
        raise CapacityError(
            f"simulation would draw {trials * (K + c) * m:.2e} bits; "
            f"budget is {_BIT_BUDGET:.2e}")
    dist = BiasDistribution(kind=ARCSINE, t=cfg.params.t)
    predicted = moments(cfg.strategy, c, cfg.params.t)

    slots = {
        "fn": np.zeros(trials, dtype=bool),
        "accused": np.zeros(trials, dtype=np.int64),
        "coal_total": np.zeros(trials, dtype=np.float64),
        "coal_max": np.zeros(trials, dtype=np.float64),
        "s1": np.zeros(trials, dtype=np.float64),
        "s2": np.zeros(trials, dtype=np.float64),
        "s3": np.zeros(trials, dtype=np.float64),
        "s4": np.zeros(trials, dtype=np.float64),
        "normalized": [None] * trials,
        "raw": [None] * trials,
    }
    threads = max(1, int(cfg.threads))
    if threads == 1 or trials == 1:
        _run_trials(cfg, dist, 0, trials, slots)
    else:
        step = (trials + threads - 1) // threads
        ranges = [(lo, min(lo + step, trials)) for lo in range(0, trials, step)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda r: _run_trials(cfg, dist, r[0], r[1], slots),
                          ranges))

    N = trials * K
    s1, s2, s3, s4 = (float(np.sum(slots[k])) for k in ("s1", "s2", "s3", "s4"))
    mean_inn = s1 / N
    m2 = s2 / N - mean_inn ** 2
    m4 = (s4 - 4.0 * mean_inn * s3 + 6.0 * mean_inn ** 2 * s2) / N - 3.0 * mean_inn ** 4
    se_mean = math.sqrt(max(m2, 0.0) / N)
    se_var = math.sqrt(max(m4 - m2 * m2, 0.0) / N)

    coal_total = slots["coal_total"]
    mean_coal = float(np.mean(coal_total))
    d = coal_total - mean_coal
    c2 = float(np.mean(d ** 2))
    c4 = float(np.mean(d ** 4))
    se_coal_mean = math.sqrt(max(c2, 0.0) / trials)
    se_coal_var = math.sqrt(max(c4 - c2 * c2, 0.0) / trials)

    accused_total = int(np.sum(slots["accused"]))
    fn_total = int(np.count_nonzero(slots["fn"]))
    normalized = np.concatenate(slots["normalized"])
    ks_inn = _ks_distance(normalized)
    scale = predicted.sigma_scaled * math.sqrt(m)
    coal_norm = (coal_total - predicted.mu_scaled * m) / scale
    ks_coal = _ks_distance(coal_norm)
    bundle = HistogramBundle(
        innocent=_histogram(normalized, cfg.histogram_bins),
        coalition=_histogram(coal_norm, cfg.histogram_bins),
        ks_innocent=ks_inn, ks_coalition=ks_coal)

    return SimReport(
        fp_hat=accused_total / N,
        fp_ci=wilson_interval(accused_total, N),
        fn_hat=fn_total / trials,
        fn_ci=wilson_interval(fn_total, trials),
        ci_method=_CI_METHOD,
        innocent_score_moments=(mean_inn, m2),
        innocent_moment_se=(se_mean, se_var),
        coalition_score_moments=(mean_coal, c2),
        coalition_moment_se=(se_coal_mean, se_coal_var),
        histograms=bundle,
        ks_innocent=ks_inn,
        ks_coalition=ks_coal,
        predicted=predicted,
        trials=trials,
        innocents_total=N,
        m=m, Z=float(Z), c=c,
        trial_fn=tuple(bool(v) for v in slots["fn"]),
        trial_innocents_accused=tuple(int(v) for v in slots["accused"]),
        trial_coalition_total=tuple(float(v) for v in coal_total),
        trial_coalition_max=tuple(float(v) for v in slots["coal_max"]),
        innocent_scores=(np.concatenate(slots["raw"]) if cfg.keep_scores else None),
    )


def score_histograms(cfg):
    """Convenience wrapper returning only the binned scores and KS distances."""
    return run(cfg).histograms
