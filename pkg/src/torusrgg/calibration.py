"""Connection-threshold calibration.

For finite q the per-coordinate distance of a uniform pair is U^q with
U ~ Uniform(0, 1/2), so the pair distance is a sum of d i.i.d. copies.
The threshold tau achieving marginal edge probability p is either the
empirical p-quantile of simulated pair distances or the Gaussian proxy
mu*d + sigma*sqrt(d)*PhiInv(p).  For the max norm, (2*tau)^d = p gives the
closed form tau = p^(1/d) / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .rng import stream
from .torus import INFINITY

EMPIRICAL_QUANTILE = "empirical_quantile"
GAUSSIAN = "gaussian"
CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class CoordinateMoments:
    """Moments of U^q, U ~ Uniform(0, 1/2): E[U^{jq}] = (1/2)^{jq} / (jq+1)."""

    q: int
    mu: float
    sigma2: float
    raw_moments: tuple[float, ...]  # E[U^{jq}] for j = 1..8

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def central_moment(self, r: int) -> float:
        """E[(U^q - mu)^r] from the raw moments (r <= 8)."""
        if r > len(self.raw_moments):
            raise ValueError(f"central moment {r} needs raw moments up to {r}")
        raw = (1.0,) + self.raw_moments
        return float(
            sum(math.comb(r, j) * raw[j] * (-self.mu) ** (r - j) for j in range(r + 1))
        )

    def standardized_cumulant(self, r: int) -> float:
        """kappa_r / sigma^r for r in {3, 4}."""
        if r == 3:
            return self.central_moment(3) / self.sigma2 ** 1.5
        if r == 4:
            return (self.central_moment(4) - 3 * self.sigma2**2) / self.sigma2**2
        raise ValueError(f"standardized cumulant only for r in {{3, 4}}, got {r}")


@lru_cache(maxsize=None)
def coordinate_moments(q: int) -> CoordinateMoments:
    if q < 1 or int(q) != q:
        raise ValueError(f"need integer q >= 1, got {q}")
    q = int(q)
    raw = tuple(0.5 ** (j * q) / (j * q + 1) for j in range(1, 9))
    mu = raw[0]
    sigma2 = raw[1] - mu * mu
    # numerical-integration cross-check (density of U is 2 on (0, 1/2))
    for j, value in enumerate(raw, start=1):
        oracle, _ = quad(lambda u, jq=j * q: 2.0 * u**jq, 0.0, 0.5, epsabs=1e-14)
        if abs(oracle - value) > 1e-12:
            raise AssertionError(f"closed-form moment j={j} disagrees with quadrature")
    return CoordinateMoments(q=q, mu=mu, sigma2=sigma2, raw_moments=raw)


def norm_cdf(x: float) -> float:
    """Standard normal CDF via erfc (accurate in both tails)."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Acklam's rational approximation of PhiInv (|rel err| < 1.15e-9), then one
# Newton step on Phi brings it to full double precision.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def norm_ppf(p: float) -> float:
    """Standard normal quantile, abs error far below 1e-10."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"need 0 < p < 1, got {p}")
    a, b, c, d = _PPF_A, _PPF_B, _PPF_C, _PPF_D
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        t = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) / \
            ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0)
    elif p <= p_high:
        t = p - 0.5
        r = t * t
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * t / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        t = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) / \
            ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0)
    return x - (norm_cdf(x) - p) / norm_pdf(x)


@dataclass(frozen=True)
class ThresholdResult:
    tau: float
    tau_hat: float
    method: str
    achieved_p: float = float("nan")
    achieved_p_stderr: float = float("nan")
    extra: dict = field(default_factory=dict)


def rescale(tau: float, q: int, d: int) -> float:
    """tau_hat = (tau - mu*d) / (sigma*sqrt(d))."""
    m = coordinate_moments(q)
    return (tau - m.mu * d) / (m.sigma * math.sqrt(d))


def inverse_rescale(tau_hat: float, q: int, d: int) -> float:
    m = coordinate_moments(q)
    return tau_hat * m.sigma * math.sqrt(d) + m.mu * d


def sample_pair_distances(q: int, d: int, count: int, gen: np.random.Generator,
                          block: int = 1 << 23) -> np.ndarray:
    """i.i.d. pair distances Delta for uniform pairs.

    The wrapped difference of two independent uniforms is itself
    Uniform[-1/2, 1/2), so one draw per coordinate suffices.  Coordinates
    are generated in float32 (quantile granularity is orders of magnitude
    below the Monte Carlo noise) and accumulated pairwise in float64.
    """
    out = np.empty(count)
    done = 0
    rows = max(1, block // max(d, 1))
    while done < count:
        m = min(rows, count - done)
        u = np.abs(gen.random((m, d), dtype=np.float32) - np.float32(0.5))
        if q == 1:
            out[done:done + m] = u.sum(axis=1, dtype=np.float64)
        elif q == 2:
            out[done:done + m] = np.square(u).sum(axis=1, dtype=np.float64)
        else:
            out[done:done + m] = (u ** q).sum(axis=1, dtype=np.float64)
        done += m
    return out


def calibrate_threshold_linf(d: int, p: float) -> ThresholdResult:
    """xi = 1 - p^(1/d); tau = (1 - xi)/2. Exact."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"need 0 < p < 1, got {p}")
    xi = -math.expm1(math.log(p) / d)
    tau = (1.0 - xi) / 2.0
    return ThresholdResult(tau=tau, tau_hat=float("nan"), method=CLOSED_FORM,
                           achieved_p=p, achieved_p_stderr=0.0, extra={"xi": xi})


def calibrate_threshold_lq(q: int, d: int, p: float, method: str = EMPIRICAL_QUANTILE,
                           sample_budget: int = 2_000_000, stream_id: int = 0,
                           master_seed: int = 0, validation_budget: int | None = None,
                           ) -> ThresholdResult:
    """Threshold for finite q.

    empirical_quantile: order statistic at index ceil(p*N) (ties broken low)
    of `sample_budget` simulated pair distances.
    gaussian: tau = mu*d + sigma*sqrt(d)*PhiInv(p).
    Both validate achieved p on an independent stream.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"need 0 < p < 1, got {p}")
    if method == EMPIRICAL_QUANTILE:
        if sample_budget < 10_000:
            raise ValueError(f"empirical quantile needs >= 1e4 samples, got {sample_budget}")
        gen = stream(master_seed, (stream_id << 8) | 0x11)
        dist = sample_pair_distances(q, d, sample_budget, gen)
        dist.sort()
        tau = float(dist[math.ceil(p * sample_budget) - 1])
    elif method == GAUSSIAN:
        m = coordinate_moments(q)
        tau = m.mu * d + m.sigma * math.sqrt(d) * norm_ppf(p)
    else:
        raise ValueError(f"unknown method {method!r}")

    if validation_budget is None:
        validation_budget = sample_budget
    vgen = stream(master_seed, (stream_id << 8) | 0x12)
    vdist = sample_pair_distances(q, d, validation_budget, vgen)
    hits = float(np.count_nonzero(vdist <= tau))
    achieved = hits / validation_budget
    stderr = math.sqrt(max(achieved * (1 - achieved), 1e-300) / validation_budget)
    return ThresholdResult(tau=tau, tau_hat=rescale(tau, q, d), method=method,
                           achieved_p=achieved, achieved_p_stderr=stderr)


def calibrate(norm: float, d: int, p: float, method: str | None = None,
              sample_budget: int = 2_000_000, stream_id: int = 0,
              master_seed: int = 0) -> ThresholdResult:
    """Dispatch on the norm; the default method is the empirical quantile."""
    if norm == INFINITY:
        return calibrate_threshold_linf(d, p)
    return calibrate_threshold_lq(int(norm), d, p, method or EMPIRICAL_QUANTILE,
                                  sample_budget, stream_id, master_seed)
