"""SINR, analytical symbol error rates, and linear precoding.

For aggregated channels z_k and beamformers w_k, the per-user SINR is

    rho |z_k^H w_k|^2 / (sum_{k' != k} rho |z_k^H w_k'|^2 + sigma^2)

with the convention z^H w = sum_i conj(z_i) w_i.  The closed-form m-QAM
symbol error rate as a function of the SINR,

    SER(g) = 2 a erfc(sqrt(3 g / (m-1))) - a^2 erfc^2(sqrt(3 g / (m-1))),
    a = 1 - 1/sqrt(m),

comes from treating mutual interference plus noise as Gaussian and summing
decision-region escape probabilities over the corner, boundary, and interior
point subsets.  Two truncated-series companions cover the low- and
high-SINR regimes at reduced evaluation cost.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

MRT = "mrt"
ZF = "zf"
RZF = "rzf"
SCHEMES = (MRT, ZF, RZF)


@dataclass(frozen=True)
class LinkBudget:
    """Per-symbol transmit power, noise variance, and the power cap.

    Beamformers are scaled onto the sphere ||w_k||^2 = pmax / rho, so each
    user radiates with the full budget pmax.
    """

    rho: float
    sigma2: float
    pmax: float

    def __post_init__(self):
        if not 0 < self.rho <= self.pmax:
            raise ValueError("need 0 < rho <= pmax")
        if self.sigma2 <= 0:
            raise ValueError("noise variance must be positive")

    @property
    def beam_norm2(self):
        return self.pmax / self.rho


@dataclass(frozen=True)
class BeamformerSet:
    """Beamforming vectors as columns of ``w`` (M x K) plus their budget."""

    w: np.ndarray
    rho: float
    pmax: float

    def __post_init__(self):
        if self.w.ndim != 2:
            raise ValueError("w must be an M x K matrix")


def gain_matrix(agg, bf):
    """Effective gains G[k, j] = z_k^H w_j."""
    return agg.z.conj().T @ bf.w


def sinr_all(agg, bf, budget):
    """Per-user SINR vector for the given channels and beamformers."""
    G = gain_matrix(agg, bf)
    power = np.abs(G) ** 2
    signal = np.diag(power)
    interference = power.sum(axis=1) - signal
    return budget.rho * signal / (budget.rho * interference + budget.sigma2)


def sinr(agg, bf, budget, k):
    """SINR of user ``k``."""
    return float(sinr_all(agg, bf, budget)[k])


def ser_analytic(sinr_value, m):
    """Closed-form m-QAM symbol error rate at the given SINR (element-wise)."""
    g = np.asarray(sinr_value, dtype=float)
    if np.any(g < 0):
        raise ValueError("SINR must be non-negative")
    a = 1.0 - 1.0 / np.sqrt(m)
    x = erfc(np.sqrt(3.0 * g / (m - 1.0)))
    out = 2.0 * a * x - (a * x) ** 2
    return out if g.ndim else float(out)


def ser_series_low(sinr_value, m):
    """Two-term power-series approximation, accurate at low-to-moderate SINR.

    Truncates the erf series at its first two terms; diverges for large
    SINR, where :func:`ser_series_high` applies instead.
    """
    g = np.asarray(sinr_value, dtype=float)
    if np.any(g < 0):
        raise ValueError("SINR must be non-negative")
    a = 1.0 - 1.0 / np.sqrt(m)
    z = np.sqrt(3.0 * g / (m - 1.0))
    x = 1.0 - 2.0 / np.sqrt(np.pi) * (z - z**3 / 3.0)
    out = 2.0 * a * x - (a * x) ** 2
    return out if g.ndim else float(out)


def _double_factorial(n):
    """(n)!! with the (-1)!! = 1 convention."""
    result = 1.0
    while n > 1:
        result *= n
        n -= 2
    return result


def ser_series_high(sinr_value, m, order=1):
    """Asymptotic (large-SINR) approximation of the symbol error rate.

    Uses the divergent-tail erfc expansion with double-factorial
    coefficients, keeping the leading exponential term plus ``order``
    corrections; order=1 is the cheap closed form for the high-SINR regime.
    """
    if order < 1:
        raise ValueError("order must be a positive integer")
    g = np.asarray(sinr_value, dtype=float)
    if np.any(g <= 0):
        raise ValueError("SINR must be positive (the expansion divides by it)")
    a = 1.0 - 1.0 / np.sqrt(m)
    lead = np.exp(-3.0 * g / (m - 1.0)) * np.sqrt(m - 1.0) / np.sqrt(3.0 * np.pi * g)
    ratio = (m - 1.0) / (6.0 * g)
    series = sum(
        (-1.0) ** l * _double_factorial(2 * l - 1) * ratio**l for l in range(order + 1)
    )
    x = lead * series
    out = 2.0 * a * x - (a * x) ** 2
    return out if g.ndim else float(out)


def precode(agg, scheme, budget):
    """Linear beamformers (MRT, ZF, or RZF), scaled onto the power sphere.

    Directions are unit-norm; the returned vectors carry the Lemma-style
    scaling sqrt(pmax / rho).  A singular Gram matrix propagates as
    ``numpy.linalg.LinAlgError``.
    """
    Z = agg.z
    M, K = Z.shape
    if scheme == MRT:
        raw = Z
    elif scheme in (ZF, RZF):
        if scheme == ZF and M < K:
            raise ValueError(f"zero-forcing needs M >= K, got M={M}, K={K}")
        gram = Z.conj().T @ Z
        if scheme == RZF:
            gram = gram + budget.sigma2 * np.eye(K)
        raw = Z @ np.linalg.solve(gram, np.eye(K, dtype=complex))
    else:
        raise ValueError(f"unknown precoding scheme {scheme!r}")
    dirs = raw / np.linalg.norm(raw, axis=0)
    w = dirs * np.sqrt(budget.beam_norm2)
    return BeamformerSet(w=w, rho=budget.rho, pmax=budget.pmax)


def sinr_linear(agg, scheme, budget, k):
    """Per-user SINR of a linear scheme from its closed-form table entry.

    With sphere-scaled beamformers the effective per-user power is pmax, so
    the unit-norm table entries pick up a pmax/rho factor on the signal and
    interference terms.
    """
    Z = agg.z
    scale = budget.pmax
    if scheme == MRT:
        zk = Z[:, k]
        signal = scale * np.linalg.norm(zk) ** 2
        cross = Z.conj().T @ zk
        norms2 = np.linalg.norm(Z, axis=0) ** 2
        inter = np.abs(cross) ** 2 / norms2
        interference = scale * (inter.sum() - inter[k])
        return float(signal / (interference + budget.sigma2))
    if scheme == ZF:
        K = Z.shape[1]
        if Z.shape[0] < K:
            raise ValueError("zero-forcing needs M >= K")
        gram = Z.conj().T @ Z
        v = Z @ np.linalg.solve(gram, np.eye(K, dtype=complex)[:, k])
        return float(scale / np.linalg.norm(v) ** 2 / budget.sigma2)
    if scheme == RZF:
        return sinr(agg, precode(agg, RZF, budget), budget, k)
    raise ValueError(f"unknown precoding scheme {scheme!r}")


def ser_linear(agg, scheme, budget, m, k):
    """Analytical SER of user ``k`` under a linear precoding scheme."""
    return float(ser_analytic(sinr_linear(agg, scheme, budget, k), m))


def fitness_avg_ser(agg, bf, budget, m):
    """Average analytical SER over users; the optimizer's objective."""
    return float(np.mean(ser_analytic(sinr_all(agg, bf, budget), m)))


def fitness_alt(agg, bf, budget, mode):
    """Alternative objectives, negated so that smaller is better.

    ``sum_rate`` is -sum_k log2(1 + SINR_k) and ``min_sinr`` is
    -min_k SINR_k; both are maximization metrics folded into the same
    minimizing convention as the average SER.
    """
    g = sinr_all(agg, bf, budget)
    if mode == "sum_rate":
        return float(-np.sum(np.log2(1.0 + g)))
    if mode == "min_sinr":
        return float(-np.min(g))
    raise ValueError(f"unknown fitness mode {mode!r}")
