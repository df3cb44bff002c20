"""Spectrum of the centered adjacency matrix and explicit arc vectors.

Centering subtracts p everywhere (diagonal becomes -p), removing the
Perron direction.  Below the spectral threshold (d << np for finite q,
d << sqrt(np) for the max norm) the spectrum carries many eigenvalues of
order np/sqrt(d) (resp. np/d); the arc vectors make that lower bound
constructive: +-1 indicator vectors of two opposing circular arcs in one
latent dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import coordinate_moments

EIG_N_LIMIT = 4000


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray          # sorted descending
    lambda2_abs_max: float           # max(|lambda_2|, |lambda_n|)
    counts: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


def center_adjacency(adjacency: np.ndarray, p: float) -> np.ndarray:
    """A - p * ones: off-diagonal A_uv - p, diagonal -p."""
    return adjacency.astype(np.float64) - p


def spectrum(matrix: np.ndarray, spot_checks: int = 5) -> SpectrumReport:
    """Full symmetric eigendecomposition with residual spot checks."""
    M = np.asarray(matrix, dtype=np.float64)
    n = M.shape[0]
    if n > EIG_N_LIMIT:
        raise ValueError(f"dense solver capped at n = {EIG_N_LIMIT}, got {n}")
    asym = float(np.max(np.abs(M - M.T))) if n else 0.0
    if asym > 1e-12:
        raise ValueError(f"matrix asymmetric beyond 1e-12 (max dev {asym})")
    vals, vecs = np.linalg.eigh(M)
    norm = float(np.max(np.abs(vals))) if n else 0.0
    if norm > 0:
        idx = np.linspace(0, n - 1, min(spot_checks, n)).astype(int)
        for i in idx:
            resid = float(np.linalg.norm(M @ vecs[:, i] - vals[i] * vecs[:, i]))
            if resid > 1e-8 * norm:
                raise ArithmeticError(f"eigenpair residual {resid} too large")
    desc = vals[::-1].copy()
    lam2 = max(abs(desc[1]), abs(desc[-1])) if n >= 2 else 0.0
    return SpectrumReport(eigenvalues=desc, lambda2_abs_max=float(lam2))


def count_large_eigs(report: SpectrumReport, a: float, regime: str,
                     n: int | None = None, p: float | None = None,
                     d: int | None = None, np_product: float | None = None) -> int:
    """#{i >= 2 : |lambda_i| >= np/(a sqrt(d))} (lq) or np/(a d) (linf).

    lambda_1 is always excluded as the Perron value.
    """
    if regime not in ("lq", "linf"):
        raise ValueError(f"regime must be 'lq' or 'linf', got {regime}")
    if np_product is None:
        np_product = n * p
    scale = math.sqrt(d) if regime == "lq" else d
    threshold = np_product / (a * scale)
    count = int(np.count_nonzero(np.abs(report.eigenvalues[1:]) >= threshold))
    report.counts[threshold] = count
    return count


@dataclass(frozen=True)
class ArcVector:
    entries: np.ndarray              # over {+1, 0, -1}
    dimension_index: int
    arc_spec: tuple                  # ((center, half_width) for +1, same for -1)
    degenerate: bool = False

    @property
    def normalized(self) -> np.ndarray:
        nrm = float(np.linalg.norm(self.entries))
        if nrm == 0.0:
            return self.entries.astype(np.float64)
        return self.entries / nrm


def default_arc_half_width(q: int) -> float:
    """c with (2c)^q = mu_q / 2: the within-arc coordinate contribution sits
    at half the per-coordinate mean, keeping the intra-arc lift positive."""
    mu = coordinate_moments(q).mu
    return 0.5 * (mu / 2.0) ** (1.0 / q)


def arc_vector_q(positions: np.ndarray, i: int, c: float) -> ArcVector:
    """+1 on {|x_i|_C <= c}, -1 on {|x_i|_C >= 1/2 - c}, 0 elsewhere."""
    if not 0.0 < c < 0.25:
        raise ValueError(f"need 0 < c < 1/4, got {c}")
    col = np.abs(positions[:, i])  # canonical coords: |x|_C = |x|
    y = np.zeros(len(col))
    y[col <= c] = 1.0
    y[col >= 0.5 - c] = -1.0
    return ArcVector(entries=y, dimension_index=i,
                     arc_spec=((0.0, c), (0.5, c)),
                     degenerate=not np.any(y))


def _in_arc(col: np.ndarray, center: float, half_width: float) -> np.ndarray:
    """Half-open arc [center - hw, center + hw) in circle coordinates."""
    delta = ((col - center) + 0.5) % 1.0 - 0.5
    return (delta >= -half_width) & (delta < half_width)


def arc_vectors_linf(positions: np.ndarray, i: int, xi: float) -> list[ArcVector]:
    """floor(1/xi) vectors for dimension i, arcs of length xi/2.

    The +1 and -1 arcs of vector t sit at antipodal centers t/(2r) and
    t/(2r) + 1/2 on the lattice j/(2r), r = floor(1/xi), which keeps the
    supports of distinct vectors disjoint while preserving the exact
    no-inter-cluster-edge property: the arcs are half-open above, so any
    u in the +arc and v in the -arc are at circle distance strictly
    greater than (1 - xi)/2 in this dimension.
    """
    if not 0.0 < xi < 0.5:
        raise ValueError(f"need 0 < xi < 1/2, got {xi}")
    r = int(math.floor(1.0 / xi))
    col = positions[:, i]
    hw = xi / 4.0
    out = []
    for t in range(r):
        plus_center = t / (2.0 * r)
        minus_center = (plus_center + 0.5) % 1.0
        y = np.zeros(len(col))
        y[_in_arc(col, plus_center, hw)] = 1.0
        y[_in_arc(col, minus_center, hw)] = -1.0
        out.append(ArcVector(entries=y, dimension_index=i,
                             arc_spec=((plus_center, hw), (minus_center, hw)),
                             degenerate=not np.any(y)))
    return out


def rayleigh(matrix: np.ndarray, vector: np.ndarray) -> float:
    v = np.asarray(vector, dtype=float)
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        raise ValueError("zero vector")
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"vector must be unit length, got norm {nrm}")
    return float(v @ (matrix @ v))


def gram_offdiag(vectors) -> float:
    """max |y_i . y_j| over i != j for the normalized vectors."""
    mats = [v.normalized if isinstance(v, ArcVector) else np.asarray(v, dtype=float)
            for v in vectors]
    if len(mats) < 2:
        raise ValueError("need >= 2 vectors")
    Y = np.stack(mats)
    G = Y @ Y.T
    np.fill_diagonal(G, 0.0)
    return float(np.max(np.abs(G)))
