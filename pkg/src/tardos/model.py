"""Core model: accusation weights, bias distributions, scheme parameters.

A binary fingerprinting code draws one bias p_i per column from a distribution
f on [t, 1-t]; codeword bits are Bernoulli(p_i). When a suspect copy shows a 1
in column i, a user whose codeword has a 1 there collects weight g1(p_i) and a
user with a 0 collects g0(p_i). The weights are tied together by

    p * g1(p) + (1 - p) * g0(p) = 0,

so an innocent user's expected score contribution is zero in every column no
matter what the bias was. The standard (and default) choice is

    g1(p) = sqrt((1-p)/p),       g0(p) = -sqrt(p/(1-p)),

with the arcsine-shaped bias density f(p) = 1 / ((pi - 4 t') sqrt(p (1-p))),
t' = arcsin(sqrt(t)). For this pair the score of an innocent user has unit
variance per column, independent of the bias draw; the functional ``nu``
below measures that per-column second moment for other weight choices.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ParameterError, QuadratureError

ARCSINE = "tardos_arcsine"
BETA = "beta_family"
DIST_KINDS = (ARCSINE, BETA)

# Absolute accuracy target for all adaptive quadrature in the package.
QUAD_TOL = 1e-10

# Slop allowed when checking that a probability sits inside [t, 1-t]; bias
# values reconstructed through sin^2 round-trips can land an ulp outside.
_SUPPORT_SLOP = 1e-12


def _as_prob_array(p, where):
    arr = np.asarray(p, dtype=np.float64)
    if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0)):
        raise ParameterError(f"{where}: probabilities must lie strictly inside (0, 1)")
    return arr


def _scalar_like(p, out):
    if np.ndim(p) == 0:
        return float(out)
    return out


def g1(p):
    """Accusation weight for a matching 1-symbol: sqrt((1-p)/p)."""
    arr = _as_prob_array(p, "g1")
    return _scalar_like(p, np.sqrt((1.0 - arr) / arr))


def g0(p):
    """Accusation weight for a mismatching 0-symbol: -sqrt(p/(1-p)).

    Equals -g1(1-p), and -g1(p) * p / (1-p); both identities are exercised by
    the test suite.
    """
    arr = _as_prob_array(p, "g0")
    return _scalar_like(p, -np.sqrt(arr / (1.0 - arr)))


def tprime(t):
    """Angle cutoff t' = arcsin(sqrt(t)) of the bias support."""
    if not 0.0 < t < 0.5:
        raise ParameterError("cutoff t must lie in (0, 1/2)")
    return math.asin(math.sqrt(t))


def default_cutoff(c0):
    """Classic cutoff choice t = 1/(300 c0)."""
    if c0 < 1:
        raise ParameterError("c0 must be at least 1")
    return 1.0 / (300.0 * c0)


@dataclass(frozen=True)
class BiasDistribution:
    """Bias density on [t, 1-t].

    kind "tardos_arcsine": f(p) = 1 / ((pi - 4 t') sqrt(p(1-p))).
    kind "beta_family":    f(p) proportional to p^(a-1) (1-p)^(b-1), normalized
    by quadrature over [t, 1-t]; symmetric exactly when a == b, and identical
    to tardos_arcsine when a == b == 1/2.
    """

    kind: str
    t: float
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise ParameterError(f"unknown bias distribution kind {self.kind!r}")
        if not 0.0 < self.t < 0.5:
            raise ParameterError("cutoff t must lie in (0, 1/2)")
        if self.kind == BETA:
            if self.a is None or self.b is None or self.a <= 0.0 or self.b <= 0.0:
                raise ParameterError("beta_family requires shape parameters a > 0 and b > 0")
        elif self.a is not None or self.b is not None:
            raise ParameterError("tardos_arcsine takes no shape parameters")

    @property
    def support(self):
        return (self.t, 1.0 - self.t)

    @property
    def symmetric(self):
        return self.kind == ARCSINE or self.a == self.b

    def _check_support(self, arr, where):
        lo, hi = self.support
        if arr.size and (np.any(arr < lo - _SUPPORT_SLOP) or np.any(arr > hi + _SUPPORT_SLOP)):
            raise ParameterError(f"{where}: probability outside the support [{lo}, {hi}]")

    def density(self, p):
        arr = _as_prob_array(p, "bias_density")
        self._check_support(arr, "bias_density")
        if self.kind == ARCSINE:
            out = 1.0 / ((math.pi - 4.0 * tprime(self.t)) * np.sqrt(arr * (1.0 - arr)))
        else:
            out = arr ** (self.a - 1.0) * (1.0 - arr) ** (self.b - 1.0) / _beta_normalizer(
                self.a, self.b, self.t)
        return _scalar_like(p, out)

    def sample(self, size, rng):
        """Draw ``size`` i.i.d. biases using generator ``rng``."""
        if self.kind == ARCSINE:
            tp = tprime(self.t)
            r = rng.uniform(tp, math.pi / 2.0 - tp, size=size)
            return np.sin(r) ** 2
        # Truncated beta via rejection; acceptance is the truncated mass.
        out = np.empty(size, dtype=np.float64)
        filled = 0
        lo, hi = self.support
        while filled < size:
            draw = rng.beta(self.a, self.b, size=max(size - filled, 16))
            keep = draw[(draw >= lo) & (draw <= hi)]
            take = min(keep.size, size - filled)
            out[filled:filled + take] = keep[:take]
            filled += take
        return out


def bias_density(dist, p):
    """Density of ``dist`` at ``p`` (raises outside the support)."""
    return dist.density(p)


def _quad(fn, lo, hi, tol=QUAD_TOL):
    val, err = integrate.quad(fn, lo, hi, epsabs=tol * 1e-2, epsrel=tol * 1e-2, limit=200)
    if not math.isfinite(val) or err > max(tol, tol * abs(val)):
        raise QuadratureError(
            f"quadrature did not reach tolerance {tol:g} (achieved {err:g})", achieved=err)
    return val


@lru_cache(maxsize=256)
def _beta_normalizer(a, b, t):
    # Angle space: p = sin^2 r turns p^(a-1)(1-p)^(b-1) dp into
    # 2 sin^(2a-1) r cos^(2b-1) r dr, removing endpoint singularities.
    tp = tprime(t)
    return _quad(lambda r: 2.0 * math.sin(r) ** (2.0 * a - 1.0) * math.cos(r) ** (2.0 * b - 1.0),
                 tp, math.pi / 2.0 - tp)


def expectation(dist, h, upper=None, tol=QUAD_TOL):
    """E_f[h(p)] over [t, upper] (default the whole support) by quadrature.

    Integrates in the angle variable p = sin^2 r so that the arcsine density
    becomes flat and inverse-square-root endpoints stay benign.
    """
    tp = tprime(dist.t)
    hi_p = 1.0 - dist.t if upper is None else upper
    if not dist.t <= hi_p <= 1.0 - dist.t + _SUPPORT_SLOP:
        raise ParameterError("expectation: upper limit outside the support")
    hi_r = math.asin(math.sqrt(min(hi_p, 1.0)))

    if dist.kind == ARCSINE:
        scale = 2.0 / (math.pi - 4.0 * tp)

        def fr(r):
            return scale * h(math.sin(r) ** 2)
    else:
        nrm = _beta_normalizer(dist.a, dist.b, dist.t)

        def fr(r):
            s, c = math.sin(r), math.cos(r)
            return 2.0 * s ** (2.0 * dist.a - 1.0) * c ** (2.0 * dist.b - 1.0) * h(s * s) / nrm

    return _quad(fr, tp, hi_r, tol=tol)


def nu(dist, g1_choice="tardos", tol=1e-9):
    """Per-column second moment of an innocent score weight.

    nu = 2 * integral_t^{1/2} f(p) * (p/(1-p)) * g1(p)^2 dp. Equals 1 for the
    default weights with any normalized symmetric f. ``g1_choice`` is either
    the string "tardos" or a callable g(p) that is positive on (t, 1/2].
    """
    if g1_choice == "tardos":
        gfun = g1
    elif callable(g1_choice):
        gfun = g1_choice
        probe = np.linspace(dist.t, 0.5, 7)
        vals = np.asarray([float(gfun(p)) for p in probe])
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise ParameterError("nu: g1_choice must be positive on (t, 1/2]")
    else:
        raise ParameterError("nu: g1_choice must be 'tardos' or a callable")
    return 2.0 * expectation(
        dist, lambda p: (p / (1.0 - p)) * float(gfun(p)) ** 2, upper=0.5, tol=tol)


def _ln_ceil(eps1):
    return math.ceil(math.log(1.0 / eps1))


@dataclass(frozen=True)
class SchemeParams:
    """Static parameters of one code instance.

    n users, m columns, design coalition size c0, soundness target eps1
    (innocent accusation probability), completeness target eps2 (probability
    some size-<=c0 coalition escapes), bias cutoff t. The accusation threshold
    Z and the length/threshold coefficients A and B are optional: codebooks
    are often generated before a threshold is committed.
    """

    n: int
    m: int
    c0: int
    eps1: float
    eps2: float
    t: float
    Z: float | None = None
    A: float | None = None
    B: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("n must be a positive integer")
        if int(self.m) != self.m or self.m < 1:
            raise ParameterError("m must be a positive integer")
        if int(self.c0) != self.c0 or self.c0 < 1:
            raise ParameterError("c0 must be a positive integer")
        for name in ("eps1", "eps2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ParameterError(f"{name} must lie in (0, 1)")
        if not 0.0 < self.t < 0.5:
            raise ParameterError("t must lie in (0, 1/2)")
        if self.c0 * self.t >= 0.5:
            raise ParameterError("tau = c0 * t must stay below 1/2")
        for name in ("A", "B"):
            v = getattr(self, name)
            if v is not None and (not math.isfinite(v) or v <= 0.0):
                raise ParameterError(f"{name} must be positive when given")
        # Z is any real threshold; deployments use Z > 0, but degenerate
        # thresholds are meaningful in tests and simulations.
        if self.Z is not None and math.isnan(self.Z):
            raise ParameterError("Z must not be NaN")

    @classmethod
    def from_coefficients(cls, n, c0, eps1, eps2, A, B, t=None):
        """Build params from length/threshold coefficients.

        m = ceil(A * c0^2 * ceil(ln(1/eps1))), Z = B * c0 * ceil(ln(1/eps1)).
        """
        if A <= 0.0 or B <= 0.0:
            raise ParameterError("A and B must be positive")
        if t is None:
            t = default_cutoff(c0)
        lc = _ln_ceil(eps1)
        m = math.ceil(A * c0 ** 2 * lc)
        Z = B * c0 * lc
        return cls(n=n, m=m, c0=c0, eps1=eps1, eps2=eps2, t=t, Z=Z, A=float(A), B=float(B))

    _FIELD_ORDER = ("n", "m", "c0", "eps1", "eps2", "t", "Z", "A", "B")
    _INT_FIELDS = ("n", "m", "c0")

    def kv_text(self):
        """Serialize to the flat key=value text format (one pair per line)."""
        lines = []
        for name in self._FIELD_ORDER:
            v = getattr(self, name)
            if v is None:
                continue
            lines.append(f"{name}={int(v) if name in self._INT_FIELDS else repr(float(v))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv_text(cls, text):
        kv = parse_kv_text(text)
        unknown = set(kv) - set(cls._FIELD_ORDER)
        if unknown:
            raise ParameterError(f"unknown parameter keys: {sorted(unknown)}")
        missing = {"n", "m", "c0", "eps1", "eps2", "t"} - set(kv)
        if missing:
            raise ParameterError(f"missing parameter keys: {sorted(missing)}")
        args = {}
        for name, raw in kv.items():
            args[name] = int(raw) if name in cls._INT_FIELDS else float(raw)
        return cls(**args)


def parse_kv_text(text):
    """Parse ``key=value`` lines into a dict; '#' starts a comment line."""
    out = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError(f"line {ln}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True)
class DerivedConstants:
    """Quantities derived from (t, c0) and the bias/weight choice."""

    tau: float
    tprime: float
    nu: float

    @classmethod
    def from_scheme(cls, t, c0, dist=None, g1_choice="tardos"):
        if dist is None:
            dist = BiasDistribution(ARCSINE, t=t)
        elif abs(dist.t - t) > _SUPPORT_SLOP:
            raise ParameterError("distribution cutoff disagrees with t")
        tau = c0 * t
        if not 0.0 < tau < 0.5:
            raise ParameterError("tau = c0 * t must lie in (0, 1/2)")
        return cls(tau=tau, tprime=tprime(t), nu=nu(dist, g1_choice))
