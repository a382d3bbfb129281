"""Propagation channels for the RIS-assisted multi-user downlink.

A base station with ``M`` antennas serves ``K`` single-antenna users, aided
by a reflecting surface with ``N`` phase-shifting elements (``N = 0`` means
no surface).  Small-scale fading is Rayleigh or Rician with a configurable
number of specular components; large-scale fading enters as per-link linear
power gains folded into the channel entries.  The per-user aggregated
channel for a phase configuration ``theta`` is

    z_k = u_k + H diag(exp(j theta)) g_k.

All generators are pure functions of their inputs and a seed.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import streams


@dataclass(frozen=True)
class SystemDims:
    """Array sizes: M BS antennas, N RIS elements (0 = no RIS), K users."""

    M: int
    N: int
    K: int

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.N < 0:
            raise ValueError(
                f"invalid dimensions M={self.M}, N={self.N}, K={self.K}"
            )


@dataclass(frozen=True)
class Betas:
    """Large-scale linear power gains per link.

    ``bs_ris`` is a scalar; ``ris_user`` and ``bs_user`` hold one gain per
    user.
    """

    bs_ris: float
    ris_user: np.ndarray
    bs_user: np.ndarray

    @classmethod
    def uniform(cls, dims, value=1.0):
        """Equal gain ``value`` on every link."""
        return cls(
            bs_ris=float(value),
            ris_user=np.full(dims.K, float(value)),
            bs_user=np.full(dims.K, float(value)),
        )

    def validate(self, dims):
        if np.shape(self.ris_user) != (dims.K,) or np.shape(self.bs_user) != (dims.K,):
            raise ValueError("per-user beta arrays must have length K")
        if self.bs_ris < 0 or np.any(np.asarray(self.ris_user) < 0) or np.any(
            np.asarray(self.bs_user) < 0
        ):
            raise ValueError("large-scale gains must be non-negative")


@dataclass(frozen=True)
class ChannelRealization:
    """One block-fading draw of all propagation links.

    ``H`` is M x N (BS-RIS), column ``k`` of ``g`` (N x K) is the RIS-user-k
    vector and column ``k`` of ``u`` (M x K) the direct BS-user-k vector.
    Large-scale gains are already folded into the entries; ``betas`` records
    them for serialization and replay.
    """

    dims: SystemDims
    H: np.ndarray
    g: np.ndarray
    u: np.ndarray
    betas: Betas

    def __post_init__(self):
        d = self.dims
        if self.H.shape != (d.M, d.N) or self.g.shape != (d.N, d.K) or self.u.shape != (d.M, d.K):
            raise ValueError("channel array shapes do not match dims")
        for arr in (self.H, self.g, self.u):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError("channel entries must be finite")


@dataclass(frozen=True)
class PhaseVector:
    """RIS phase shifts in radians, one per element, each in [-pi, pi]."""

    theta: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", th)
        if th.ndim != 1:
            raise ValueError("theta must be a 1-D vector")
        if th.size and (np.max(np.abs(th)) > np.pi + 1e-12):
            raise ValueError("phase shifts must lie in [-pi, pi]")


@dataclass(frozen=True)
class AggregatedChannel:
    """Effective BS-to-user channels; column k is z_k = u_k + H Phi g_k."""

    z: np.ndarray

    def __post_init__(self):
        if self.z.ndim != 2:
            raise ValueError("z must be an M x K matrix")


@dataclass(frozen=True)
class RicianConfig:
    """Rician small-scale fading with ``s_*`` specular components per link.

    Setting every count to zero reduces each link to Rayleigh fading.  The
    Rician factor of a link follows 13 - 0.03 * distance (dB) plus a global
    offset; the dominant (LoS) component keeps ``los_power_ratio`` of the
    specular power when a link has more than one component, and the other
    components share the rest uniformly with angles spread around the LoS
    direction by at most ``azimuth_spread`` / ``elevation_spread``.
    """

    s_bs_user: int = 1
    s_ris_user: int = 1
    s_bs_ris: int = 1
    dist_bs_user: float = 100.0
    dist_ris_user: float = 100.0
    dist_bs_ris: float = 100.0
    k_factor_offset_db: float = 0.0
    los_power_ratio: float = 0.5
    azimuth_spread: float = np.pi / 3
    elevation_spread: float = np.pi / 12

    def validate(self):
        if min(self.s_bs_user, self.s_ris_user, self.s_bs_ris) < 0:
            raise ValueError("specular counts must be non-negative")
        for d in (self.dist_bs_user, self.dist_ris_user, self.dist_bs_ris):
            if d < 0:
                raise ValueError(f"distances must be non-negative, got {d}")
        if not 0.0 < self.los_power_ratio <= 1.0:
            raise ValueError("los_power_ratio must lie in (0, 1]")


def k_factor_db(distance_m, offset_db=0.0):
    """Distance-dependent Rician factor in dB: 13 - 0.03 * distance + offset."""
    if distance_m < 0:
        raise ValueError("distance must be non-negative")
    return 13.0 - 0.03 * distance_m + offset_db


def k_factor_linear(distance_m, offset_db=0.0):
    """Linear Rician factor for a link of the given length in meters."""
    return 10.0 ** (k_factor_db(distance_m, offset_db) / 10.0)


def _diffuse(seed, code, shape, *tags):
    """Unit-variance diffuse draw; shared by the Rayleigh and Rician paths."""
    return streams.complex_normal(streams.substream(seed, code, *tags), shape)


def gen_rayleigh(dims, betas=None, seed=0):
    """Draw a Rayleigh block-fading realization.

    Entries are i.i.d. CN(0, 1) scaled by the square root of the link gain.
    Each link uses its own seed sub-stream, so the draw for one link is
    unaffected by the presence of others.
    """
    if betas is None:
        betas = Betas.uniform(dims)
    betas.validate(dims)
    H = np.sqrt(betas.bs_ris) * _diffuse(seed, streams.BS_RIS, (dims.M, dims.N))
    u = np.empty((dims.M, dims.K), dtype=complex)
    g = np.empty((dims.N, dims.K), dtype=complex)
    for k in range(dims.K):
        u[:, k] = np.sqrt(betas.bs_user[k]) * _diffuse(seed, streams.BS_USER, dims.M, k)
        g[:, k] = np.sqrt(betas.ris_user[k]) * _diffuse(seed, streams.RIS_USER, dims.N, k)
    return ChannelRealization(dims=dims, H=H, g=g, u=u, betas=betas)


def _ula_steering(m, azimuth):
    """Half-wavelength uniform linear array response (unit-modulus entries)."""
    return np.exp(1j * np.pi * np.arange(m) * np.sin(azimuth))


def _upa_shape(n):
    """Near-square factorization n = rows * cols for the planar RIS array."""
    if n == 0:
        return 0, 1
    rows = int(np.sqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


def _upa_steering(n, azimuth, elevation):
    """Half-wavelength uniform planar array response, flattened to length n."""
    rows, cols = _upa_shape(n)
    i = np.arange(rows)[:, None]
    j = np.arange(cols)[None, :]
    phase = np.pi * (i * np.sin(azimuth) * np.cos(elevation) + j * np.sin(elevation))
    return np.exp(1j * phase).reshape(n)


def _component_angles(rng, cfg, count):
    """LoS direction plus ``count - 1`` offsets bounded by the angular spread."""
    az0 = rng.uniform(-np.pi / 2, np.pi / 2)
    el0 = rng.uniform(-np.pi / 6, np.pi / 6)
    angles = [(az0, el0)]
    for _ in range(count - 1):
        angles.append(
            (
                az0 + rng.uniform(-cfg.azimuth_spread, cfg.azimuth_spread),
                el0 + rng.uniform(-cfg.elevation_spread, cfg.elevation_spread),
            )
        )
    return angles


def _component_weights(cfg, count):
    """Specular power split: LoS keeps its ratio, the rest share uniformly."""
    if count == 1:
        return [1.0]
    rest = (1.0 - cfg.los_power_ratio) / (count - 1)
    return [cfg.los_power_ratio] + [rest] * (count - 1)


def _specular_vector(rng, cfg, count, steer):
    """Sum of weighted, uniformly phased steering vectors (unit mean power)."""
    angles = _component_angles(rng, cfg, count)
    weights = _component_weights(cfg, count)
    total = 0.0
    for (az, el), w in zip(angles, weights):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        total = total + np.sqrt(w) * np.exp(1j * phase) * steer(az, el)
    return total


def _specular_matrix(rng, cfg, count, m, n):
    """Like :func:`_specular_vector` but with steering at both link ends."""
    bs_angles = _component_angles(rng, cfg, count)
    ris_angles = _component_angles(rng, cfg, count)
    weights = _component_weights(cfg, count)
    total = 0.0
    for (az_b, _), (az_r, el_r), w in zip(bs_angles, ris_angles, weights):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        term = np.outer(_ula_steering(m, az_b), np.conj(_upa_steering(n, az_r, el_r)))
        total = total + np.sqrt(w) * np.exp(1j * phase) * term
    return total


def _rician_link(diffuse, specular, kappa):
    return np.sqrt(kappa / (kappa + 1.0)) * specular + np.sqrt(1.0 / (kappa + 1.0)) * diffuse


def gen_rician(dims, cfg=None, betas=None, seed=0):
    """Draw a Rician realization with per-link specular components.

    A link with specular count 0 falls back to the exact Rayleigh draw of
    :func:`gen_rayleigh` (same seed sub-stream), so ``s_* = 0`` everywhere
    reproduces that generator bit for bit.
    """
    if cfg is None:
        cfg = RicianConfig()
    cfg.validate()
    if betas is None:
        betas = Betas.uniform(dims)
    betas.validate(dims)
    off = cfg.k_factor_offset_db

    H_dif = _diffuse(seed, streams.BS_RIS, (dims.M, dims.N))
    if cfg.s_bs_ris == 0 or dims.N == 0:
        H = H_dif
    else:
        rng = streams.substream(seed, streams.SPECULAR, streams.BS_RIS)
        spec = _specular_matrix(rng, cfg, cfg.s_bs_ris, dims.M, dims.N)
        H = _rician_link(H_dif, spec, k_factor_linear(cfg.dist_bs_ris, off))
    H = np.sqrt(betas.bs_ris) * H

    u = np.empty((dims.M, dims.K), dtype=complex)
    g = np.empty((dims.N, dims.K), dtype=complex)
    for k in range(dims.K):
        u_dif = _diffuse(seed, streams.BS_USER, dims.M, k)
        if cfg.s_bs_user == 0:
            uk = u_dif
        else:
            rng = streams.substream(seed, streams.SPECULAR, streams.BS_USER, k)
            spec = _specular_vector(
                rng, cfg, cfg.s_bs_user, lambda az, el: _ula_steering(dims.M, az)
            )
            uk = _rician_link(u_dif, spec, k_factor_linear(cfg.dist_bs_user, off))
        u[:, k] = np.sqrt(betas.bs_user[k]) * uk

        g_dif = _diffuse(seed, streams.RIS_USER, dims.N, k)
        if cfg.s_ris_user == 0 or dims.N == 0:
            gk = g_dif
        else:
            rng = streams.substream(seed, streams.SPECULAR, streams.RIS_USER, k)
            spec = _specular_vector(
                rng, cfg, cfg.s_ris_user, lambda az, el: _upa_steering(dims.N, az, el)
            )
            gk = _rician_link(g_dif, spec, k_factor_linear(cfg.dist_ris_user, off))
        g[:, k] = np.sqrt(betas.ris_user[k]) * gk

    return ChannelRealization(dims=dims, H=H, g=g, u=u, betas=betas)


def aggregate(ch, theta):
    """Compose per-user effective channels z_k = u_k + H diag(e^{j theta}) g_k."""
    th = theta.theta if isinstance(theta, PhaseVector) else np.asarray(theta, float)
    if th.shape != (ch.dims.N,):
        raise ValueError(f"theta must have length N={ch.dims.N}, got {th.shape}")
    phases = np.exp(1j * th)
    z = ch.u + ch.H @ (phases[:, None] * ch.g)
    return AggregatedChannel(z=z)


def corrupt_csi(agg, sigma_e2, seed=0):
    """Additive estimation error: z_k + e_k with e_k i.i.d. CN(0, sigma_e2)."""
    if sigma_e2 < 0:
        raise ValueError("error variance must be non-negative")
    if sigma_e2 == 0:
        return agg
    err = streams.complex_normal(
        streams.substream(seed, streams.CSI_ERROR), agg.z.shape, variance=sigma_e2
    )
    return AggregatedChannel(z=agg.z + err)


# -- serialization -----------------------------------------------------------


def _complex_to_list(arr):
    """Flatten a complex array to interleaved re/im doubles."""
    return np.stack([arr.real, arr.imag], axis=-1).ravel().tolist()


def _complex_from_list(values, shape):
    flat = np.asarray(values, dtype=float).reshape(tuple(shape) + (2,))
    return flat[..., 0] + 1j * flat[..., 1]


def channel_to_dict(ch):
    """Self-describing JSON-ready record of a realization."""
    return {
        "dims": {"M": ch.dims.M, "N": ch.dims.N, "K": ch.dims.K},
        "betas": {
            "bs_ris": ch.betas.bs_ris,
            "ris_user": np.asarray(ch.betas.ris_user).tolist(),
            "bs_user": np.asarray(ch.betas.bs_user).tolist(),
        },
        "H": _complex_to_list(ch.H),
        "g": _complex_to_list(ch.g),
        "u": _complex_to_list(ch.u),
    }


def channel_from_dict(record):
    dims = SystemDims(**record["dims"])
    betas = Betas(
        bs_ris=record["betas"]["bs_ris"],
        ris_user=np.asarray(record["betas"]["ris_user"], dtype=float),
        bs_user=np.asarray(record["betas"]["bs_user"], dtype=float),
    )
    return ChannelRealization(
        dims=dims,
        H=_complex_from_list(record["H"], (dims.M, dims.N)),
        g=_complex_from_list(record["g"], (dims.N, dims.K)),
        u=_complex_from_list(record["u"], (dims.M, dims.K)),
        betas=betas,
    )


def save_channel(ch, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(channel_to_dict(ch), fh)


def load_channel(path):
    with open(path, encoding="utf-8") as fh:
        return channel_from_dict(json.load(fh))
