"""Link-level Monte Carlo simulation of the downlink.

Transmits uniformly drawn constellation symbols for every user through the
aggregated channel with beamforming, adds per-user noise, equalizes by the
per-user effective gain, detects with minimum distance, and counts symbol
errors.  This is the empirical counterpart of the analytical SER: the two
must agree within binomial fluctuation whenever the Gaussian-interference
treatment holds.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import streams
from .channel import aggregate
from .modem import build_constellation, detect

SER_CSV_FIELDS = ("seed", "scheme", "M", "N", "K", "m", "rho_db", "user", "ser")


class EqualizationError(RuntimeError):
    """Raised when some z_k^H w_k = 0 makes the equalizer undefined."""

    def __init__(self, users):
        self.users = tuple(int(u) for u in users)
        super().__init__(f"zero effective gain for user(s) {self.users}")


@dataclass(frozen=True)
class SerReport:
    """Per-user and average empirical symbol error rates of one run."""

    per_user_ser: np.ndarray
    avg_ser: float
    symbols_per_user: int
    seed: int


def run_downlink(ch, theta, bf, budget, m, n_symbols, seed=0):
    """Simulate ``n_symbols`` downlink slots and report symbol error rates.

    Per slot, each user's symbol is drawn uniformly from the constellation;
    user k receives y_k = sqrt(rho) z_k^H sum_j w_j s_j + n_k with
    n_k ~ CN(0, sigma^2), equalizes by sqrt(rho) z_k^H w_k, and detects.
    Deterministic given the seed.
    """
    if n_symbols < 1:
        raise ValueError("need at least one symbol slot")
    agg = aggregate(ch, theta)
    const = build_constellation(m)
    K = agg.z.shape[1]

    G = agg.z.conj().T @ bf.w
    diag = np.diag(G)
    dead = np.flatnonzero(diag == 0)
    if dead.size:
        raise EqualizationError(dead)

    idx = streams.substream(seed, streams.SYMBOLS).integers(0, m, size=(K, n_symbols))
    s = const.points[idx]
    noise = streams.complex_normal(
        streams.substream(seed, streams.NOISE), (K, n_symbols), variance=budget.sigma2
    )
    y = np.sqrt(budget.rho) * (G @ s) + noise
    r = y / (np.sqrt(budget.rho) * diag[:, None])
    decided = detect(r, const)
    per_user = (decided != idx).mean(axis=1)
    return SerReport(
        per_user_ser=per_user,
        avg_ser=float(per_user.mean()),
        symbols_per_user=int(n_symbols),
        seed=int(seed),
    )


def report_rows(report, scheme, dims, m, rho_db):
    """Flatten a report into per-user CSV rows."""
    return [
        {
            "seed": report.seed,
            "scheme": scheme,
            "M": dims.M,
            "N": dims.N,
            "K": dims.K,
            "m": m,
            "rho_db": rho_db,
            "user": k,
            "ser": float(report.per_user_ser[k]),
        }
        for k in range(dims.K)
    ]


def write_ser_csv(path, rows):
    """Write per-user SER rows with the stable column schema."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SER_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
