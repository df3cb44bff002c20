"""Joint cumulants, the cycle cumulant, and Edgeworth-style densities.

The central objects are the centered per-coordinate distances
gamma({u,v}) = |x_u - x_v|_C^q - E[.] for uniform circle positions, their
order-(1,..,1) mixed cumulant for a length-k cycle, and density
approximations for the rescaled distance vector of a cycle: the product of
per-edge marginals ("ground state") plus the leading mixed-cumulant
correction (-1)^k * kappa * d^{-(k-2)/2} * prod_j phi'(x_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .calibration import coordinate_moments
from .rng import stream

MAX_PARTITION_ORDER = 8  # Bell(8) = 4140 partitions; beyond that, refuse


class UnsupportedOrderError(ValueError):
    pass


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class CumulantIndex:
    """Multi-index s = (s_1, ..., s_k); pure iff exactly one entry is nonzero."""

    s: tuple[int, ...]

    def __post_init__(self):
        if any(v < 0 for v in self.s) or self.order < 1:
            raise ValueError(f"invalid cumulant index {self.s}")

    @property
    def order(self) -> int:
        return sum(self.s)

    @property
    def pure(self) -> bool:
        return sum(1 for v in self.s if v > 0) == 1

    @property
    def mixed(self) -> bool:
        return not self.pure


@lru_cache(maxsize=None)
def set_partitions(r: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All set partitions of {0..r-1}, enumerated via restricted-growth strings."""
    if r == 0:
        return ((),)
    results = []
    rgs = [0] * r

    def emit():
        nblocks = max(rgs) + 1
        blocks = [[] for _ in range(nblocks)]
        for idx, b in enumerate(rgs):
            blocks[b].append(idx)
        results.append(tuple(tuple(b) for b in blocks))

    def extend(i: int, m: int):
        if i == r:
            emit()
            return
        for b in range(m + 2):
            rgs[i] = b
            extend(i + 1, max(m, b))

    rgs[0] = 0
    extend(1, 0)
    return tuple(results)


def joint_cumulant_from_moments(moment_oracle, r: int) -> float:
    """kappa(X_1..X_r) = sum_pi (|pi|-1)! (-1)^{|pi|-1} prod_B E[prod_{j in B} X_j].

    moment_oracle maps a tuple of indices (subset of 0..r-1) to the mixed
    moment of those variables.
    """
    if r > MAX_PARTITION_ORDER:
        raise UnsupportedOrderError(f"order {r} > {MAX_PARTITION_ORDER} not supported")
    total = 0.0
    for pi in set_partitions(r):
        nb = len(pi)
        term = math.factorial(nb - 1) * (-1.0) ** (nb - 1)
        for block in pi:
            term *= moment_oracle(block)
        total += term
    return total


def _plugin_cumulant(data: np.ndarray, index: CumulantIndex) -> float:
    """Plug-in estimator: sample moments fed through the partition sum."""
    cols = [j for j, mult in enumerate(index.s) for _ in range(mult)]
    expanded = data[:, cols]

    def oracle(block):
        prod = expanded[:, block[0]].copy()
        for j in block[1:]:
            prod *= expanded[:, j]
        return float(prod.mean())

    return joint_cumulant_from_moments(oracle, len(cols))


@dataclass(frozen=True)
class CumulantEstimate:
    value: float
    stderr: float
    degenerate: bool = False


def sample_cumulant(samples: np.ndarray, index: CumulantIndex,
                    bootstrap: int = 200, seed: int = 0) -> CumulantEstimate:
    """Plug-in estimate of kappa_s with a bootstrap standard error.

    The plug-in estimator is exactly |s|-homogeneous: scaling the data by c
    scales the estimate by c^{|s|}.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2:
        raise ValueError("samples must be trials x k")
    trials, k = data.shape
    if trials < 100:
        raise ValueError(f"need >= 100 trials, got {trials}")
    if len(index.s) != k:
        raise ValueError(f"index length {len(index.s)} != {k} columns")
    if index.order > 6:
        raise UnsupportedOrderError(f"|s| = {index.order} > 6 not supported")

    active = [j for j, mult in enumerate(index.s) if mult > 0]
    if any(np.var(data[:, j]) == 0.0 for j in active):
        return CumulantEstimate(value=_plugin_cumulant(data, index),
                                stderr=float("inf"), degenerate=True)

    value = _plugin_cumulant(data, index)
    gen = stream(seed, 0xB007)
    reps = np.empty(max(bootstrap, 200))
    for b in range(len(reps)):
        pick = gen.integers(0, trials, size=trials)
        reps[b] = _plugin_cumulant(data[pick], index)
    return CumulantEstimate(value=value, stderr=float(np.std(reps, ddof=1)))


# ---------------------------------------------------------------------------
# the triangle moment E[gamma gamma gamma] and the cycle cumulant
# ---------------------------------------------------------------------------

def _gamma_scalar(c: float, q: int, mu: float) -> float:
    return c**q - mu


def triangle_gamma_moment(q: int, tol: float = 1e-8) -> float:
    """E[gamma(e1) gamma(e2) gamma(e3)] for a triangle of uniform circle points.

    Vertex 1 is fixed at 0 (translation invariance); the other two are
    integrated by nested adaptive quadrature.  The integrand has kinks where
    a circle distance wraps (y = x +- 1/2) or hits 0 (y = 0, y = x), so the
    inner integral is split there explicitly.  Strictly negative for all
    q >= 1.
    """
    q = int(q)
    mu = coordinate_moments(q).mu

    def circ(t: float) -> float:
        t = abs(t)
        if t > 1.0:
            t -= math.floor(t)
        return t if t <= 0.5 else 1.0 - t

    def inner(x: float) -> float:
        gx = _gamma_scalar(abs(x), q, mu)

        def f(y: float) -> float:
            return gx * _gamma_scalar(circ(x - y), q, mu) * _gamma_scalar(abs(y), q, mu)

        kinks = sorted({p for p in (0.0, x, x - 0.5, x + 0.5) if -0.5 < p < 0.5})
        val, err = quad(f, -0.5, 0.5, points=kinks, epsabs=tol / 20, limit=200)
        if err > tol:
            raise QuadratureError(f"inner quadrature error {err} > {tol}", err)
        return val

    val, err = quad(inner, -0.5, 0.5, points=[0.0], epsabs=tol / 2, limit=200)
    if err > tol:
        raise QuadratureError(f"outer quadrature error {err} > {tol}", err)
    return val


def triangle_gamma_moment_mc(q: int, samples: int = 100_000_000,
                             master_seed: int = 0, stream_id: int = 0,
                             block: int = 5_000_000) -> tuple[float, float]:
    """Independent Monte Carlo oracle for the triangle moment (mean, stderr)."""
    mu = coordinate_moments(q).mu
    gen = stream(master_seed, (stream_id << 8) | 0x71)
    total = 0.0
    total2 = 0.0
    done = 0
    while done < samples:
        m = min(block, samples - done)
        x = gen.random((3, m))  # positions on [0,1); circle distance is shift-free
        d12 = np.abs(x[0] - x[1]); np.minimum(d12, 1 - d12, out=d12)
        d23 = np.abs(x[1] - x[2]); np.minimum(d23, 1 - d23, out=d23)
        d31 = np.abs(x[2] - x[0]); np.minimum(d31, 1 - d31, out=d31)
        prod = (d12**q - mu) * (d23**q - mu) * (d31**q - mu)
        total += float(prod.sum())
        total2 += float((prod * prod).sum())
        done += m
    mean = total / samples
    var = total2 / samples - mean * mean
    return mean, math.sqrt(var / samples)


def cycle_gamma_moment_mc(q: int, k: int, samples: int = 10_000_000,
                          master_seed: int = 0, stream_id: int = 0,
                          block: int = 2_000_000) -> tuple[float, float]:
    """MC estimate of E[prod_{j=1}^k gamma(e_j)] for a length-k cycle."""
    mu = coordinate_moments(q).mu
    gen = stream(master_seed, (stream_id << 8) | 0x72)
    total = 0.0
    total2 = 0.0
    done = 0
    while done < samples:
        m = min(block, samples - done)
        x = gen.random((k, m))
        prod = np.ones(m)
        for j in range(k):
            dd = np.abs(x[j] - x[(j + 1) % k])
            np.minimum(dd, 1 - dd, out=dd)
            prod *= dd**q - mu
        total += float(prod.sum())
        total2 += float((prod * prod).sum())
        done += m
    mean = total / samples
    var = total2 / samples - mean * mean
    return mean, math.sqrt(var / samples)


@dataclass(frozen=True)
class CycleKappa:
    rho: float          # per-dimension order-(1,..,1) cumulant, (zeta*sigma)^{-k} E[prod gamma]
    kappa_d: float      # cumulant of the normalized sum: d^{-(k-2)/2} * rho
    stderr: float       # 0 for the quadrature path
    method: str


def cycle_kappa(q: int, k: int, d: int, zeta: float = 1.0,
                mc_samples: int = 10_000_000, master_seed: int = 0) -> CycleKappa:
    """Cycle cumulant: k=3 by quadrature, k>=4 by Monte Carlo."""
    if k < 3:
        raise ValueError(f"cycle length must be >= 3, got {k}")
    if zeta < 1.0:
        raise ValueError(f"need zeta >= 1, got {zeta}")
    sigma = coordinate_moments(q).sigma
    scale = (zeta * sigma) ** (-k)
    if k == 3:
        moment = triangle_gamma_moment(q)
        err = 0.0
        method = "quadrature"
    else:
        moment, err = cycle_gamma_moment_mc(q, k, mc_samples, master_seed)
        method = "monte_carlo"
    rho = scale * moment
    return CycleKappa(rho=rho, kappa_d=d ** (-(k - 2) / 2.0) * rho,
                      stderr=scale * err, method=method)


# ---------------------------------------------------------------------------
# Edgeworth densities
# ---------------------------------------------------------------------------

def _hermite(n: int, x):
    """Probabilists' Hermite polynomial He_n."""
    x = np.asarray(x, dtype=float)
    if n == 3:
        return x**3 - 3 * x
    if n == 4:
        return x**4 - 6 * x**2 + 3
    if n == 6:
        return x**6 - 15 * x**4 + 45 * x**2 - 15
    raise ValueError(f"He_{n} not needed here")


def _phi(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def _phi_prime(x):
    x = np.asarray(x, dtype=float)
    return -x * _phi(x)


def edgeworth_marginal_density(x, q: int, d: int, order: int = 3):
    """Edgeworth density of the standardized d-fold sum of U^q coordinates.

    order 2 is the plain Gaussian; order 3 adds the skewness term
    (k3/6) He_3(x) / sqrt(d); order 4 adds (k4/24) He_4 + (k3^2/72) He_6
    over d.  For q = 1 the summand is symmetric, so k3 = 0 and order 3
    coincides with the Gaussian.
    """
    if order not in (2, 3, 4):
        raise ValueError(f"order must be 2, 3 or 4, got {order}")
    x = np.asarray(x, dtype=float)
    m = coordinate_moments(q)
    corr = np.zeros_like(x)
    if order >= 3:
        k3 = m.standardized_cumulant(3)
        corr = corr + (k3 / 6.0) * _hermite(3, x) / math.sqrt(d)
    if order >= 4:
        k3 = m.standardized_cumulant(3)
        k4 = m.standardized_cumulant(4)
        corr = corr + ((k4 / 24.0) * _hermite(4, x) + (k3**2 / 72.0) * _hermite(6, x)) / d
    return _phi(x) * (1.0 + corr)


@dataclass(frozen=True)
class EdgeworthParams:
    d: int
    k: int
    kappa: float
    zeta: float = 1.0
    order: int = 3

    def __post_init__(self):
        if self.d < 1 or self.k < 2 or self.zeta < 1.0:
            raise ValueError("need d >= 1, k >= 2, zeta >= 1")


def edgeworth_joint_leading(x, params: EdgeworthParams, q: int):
    """Ground-state product density plus the leading mixed-cumulant correction.

    f(x) = prod_j f_marginal(x_j) + (-1)^k kappa d^{-(k-2)/2} prod_j phi'(x_j).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != params.k:
        raise ValueError(f"x must have {params.k} components")
    f_ind = np.prod(edgeworth_marginal_density(x, q, params.d, params.order), axis=-1)
    corr = ((-1.0) ** params.k * params.kappa
            * params.d ** (-(params.k - 2) / 2.0)
            * np.prod(_phi_prime(x), axis=-1))
    out = f_ind + corr
    return out[0] if out.shape == (1,) else out


# ---------------------------------------------------------------------------
# characteristic-function inversion oracle for the marginal density
# ---------------------------------------------------------------------------

class MarginalDensityOracle:
    """Ground-truth marginal density via CF inversion.

    The CF of the standardized sum is psi(t/(sigma sqrt(d)))^d times a
    phase, with psi the CF of a single U^q coordinate (closed form for
    q = 1, Gauss-Legendre panels otherwise).  The inversion integral is
    evaluated with an FFT on a t-grid wide enough that the CF has decayed
    below 1e-14, then cubic-interpolated.  Outside |x| > 15 the density is
    reported as 0 (underflow flag).
    """

    X_LIMIT = 15.0

    def __init__(self, q: int, d: int):
        if d > 4096:
            raise ValueError(f"need d <= 4096, got {d}")
        self.q = int(q)
        self.d = int(d)
        self.m = coordinate_moments(self.q)
        self._build()

    def _psi(self, u: np.ndarray) -> np.ndarray:
        """CF of U^q, U ~ Uniform(0, 1/2) (density 2 du)."""
        q = self.q
        if q == 1:
            out = np.ones(len(u), dtype=complex)
            nz = u != 0
            iu = 1j * u[nz]
            out[nz] = (np.exp(iu * 0.5) - 1.0) / (iu * 0.5)
            return out
        # Gauss-Legendre panels sized to the worst-case phase u * (1/2)^q
        umax = float(np.max(np.abs(u))) if len(u) else 0.0
        phase = umax * 0.5**q
        nodes = int(min(4000, max(200, 3 * phase)))
        xs, ws = np.polynomial.legendre.leggauss(nodes)
        xs = 0.25 * (xs + 1.0)       # map to (0, 1/2)
        ws = ws * 0.25 * 2.0         # du weight times density 2
        return np.exp(1j * np.outer(u, xs**q)) @ ws

    def _cf_standardized(self, t: np.ndarray) -> np.ndarray:
        s = self.m.sigma * math.sqrt(self.d)
        u = t / s
        single = self._psi(u) * np.exp(-1j * u * self.m.mu)
        return single**self.d

    def _cutoff(self) -> float:
        """Smallest T with |CF| < 1e-14 beyond it (scanned, then padded)."""
        if self.q == 1 and self.d == 1:
            return 1.2e5   # CF decays like 1/t; large T for pointwise accuracy
        t = 10.0
        while t < 1e5:
            probe = np.linspace(t / 2, t, 64)
            if np.all(np.abs(self._cf_standardized(probe)) < 1e-14):
                return t
            t *= 2.0
        return 1e5

    def _build(self):
        T = self._cutoff()
        T_pad = max(T, 400.0)  # fine x-grid for interpolation
        span = 2 * self.X_LIMIT + 4.0
        N = 1 << max(12, math.ceil(math.log2(span * T_pad / math.pi)))
        dt = 2 * T_pad / N
        t = -T_pad + dt * np.arange(N)
        cf = np.where(np.abs(t) <= T, self._cf_standardized(t), 0.0)
        # f(x_m) = dt/(2 pi) sum_j e^{-i x_m t_j} C(t_j) on x_m = -pi/dt + m dx
        x0 = -math.pi / dt
        dx = 2 * math.pi / (N * dt)
        phase = np.exp(-1j * x0 * t)
        vals = np.fft.fft(cf * phase)
        x = x0 + dx * np.arange(N)
        f = (vals * np.exp(-1j * (x - x0) * (-T_pad))).real * dt / (2 * math.pi)
        keep = np.abs(x) <= self.X_LIMIT + 1.0
        self._spline = CubicSpline(x[keep], f[keep])

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros_like(x)
        inside = np.abs(x) <= self.X_LIMIT
        out[inside] = self._spline(x[inside])
        if scalar:
            return float(out[0])
        return out

    def underflow(self, x) -> np.ndarray:
        return np.abs(np.asarray(x, dtype=float)) > self.X_LIMIT


def marginal_density_oracle(x, q: int, d: int) -> np.ndarray | float:
    return MarginalDensityOracle(q, d)(x)
