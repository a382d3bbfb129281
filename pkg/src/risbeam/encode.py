"""Real-vector encoding of optimizer individuals.

An individual is a vector of length N + 2MK with entries in [-1, 1].  The
first N entries scale by pi to the RIS phase shifts; the remaining 2MK
entries split into K segments of consecutive (re, im) pairs that form the
beamforming vectors, normalized onto the power sphere ||w_k||^2 = pmax/rho.
Out-of-range entries produced by vector arithmetic are repaired per entry:
phase entries wrap around the unit circle, beam entries contract halfway
toward the parent individual.
"""

import numpy as np

from . import streams
from .channel import PhaseVector
from .linkmath import BeamformerSet


def individual_length(dims):
    """Encoded dimension N + 2MK."""
    return dims.N + 2 * dims.M * dims.K


def wrap_phase_entry(u):
    """Wrap a phase entry into (-1, 1] preserving its angle exp(j pi u).

    Element-wise: u + 2 floor((1 - u) / 2).  Idempotent on its own output;
    u = -1 maps to +1 (both encode the angle pi).
    """
    u = np.asarray(u, dtype=float)
    out = u + 2.0 * np.floor((1.0 - u) / 2.0)
    return out if out.ndim else float(out)


def clamp_beam_entry(u, x_parent):
    """Repair a beam entry by contracting toward the parent's entry.

    Values below -1 become (-1 + parent)/2, above +1 become (1 + parent)/2,
    in-range values pass through.  Element-wise.
    """
    u = np.asarray(u, dtype=float)
    x_parent = np.asarray(x_parent, dtype=float)
    out = np.where(u < -1.0, (-1.0 + x_parent) / 2.0, u)
    out = np.where(u > 1.0, (1.0 + x_parent) / 2.0, out)
    return out if out.ndim else float(out)


def repair(vector, parent, n_phase):
    """Apply both entry repairs: wrap the first ``n_phase``, clamp the rest."""
    vector = np.asarray(vector, dtype=float)
    out = np.empty_like(vector)
    out[:n_phase] = wrap_phase_entry(vector[:n_phase])
    out[n_phase:] = clamp_beam_entry(vector[n_phase:], parent[n_phase:])
    return out


def beams_from_segments(segments, budget):
    """Beamformers from raw (re, im) segments, supporting a batch axis.

    ``segments`` has shape (..., K, 2M); returns complex (..., M, K) arrays
    with each column scaled to the power sphere.  An all-zero segment (a
    measure-zero event under continuous sampling) falls back to the first
    standard basis direction so the fitness stays defined.
    """
    seg = np.asarray(segments, dtype=float)
    k, two_m = seg.shape[-2], seg.shape[-1]
    m = two_m // 2
    pairs = seg.reshape(seg.shape[:-1] + (m, 2))
    wt = pairs[..., 0] + 1j * pairs[..., 1]  # (..., K, M)
    norms = np.linalg.norm(wt, axis=-1)
    zero = norms == 0.0
    if np.any(zero):
        wt = wt.copy()
        wt[zero] = 0.0
        wt[..., 0] = np.where(zero, 1.0, wt[..., 0])
        norms = np.where(zero, 1.0, norms)
    dirs = wt / norms[..., None]
    scaled = dirs * np.sqrt(budget.beam_norm2)
    return np.swapaxes(scaled, -1, -2)  # (..., M, K)


def decode(x, dims, budget):
    """Decode an individual to (PhaseVector, BeamformerSet)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (individual_length(dims),):
        raise ValueError(
            f"individual must have length {individual_length(dims)}, got {x.shape}"
        )
    theta = np.pi * x[: dims.N]
    seg = x[dims.N :].reshape(dims.K, 2 * dims.M)
    w = beams_from_segments(seg, budget)
    return PhaseVector(theta=theta), BeamformerSet(w=w, rho=budget.rho, pmax=budget.pmax)


def random_individual(dims, seed=0):
    """Uniform draw on [-1, 1]^(N + 2MK), deterministic per seed."""
    rng = streams.substream(seed, streams.INIT_POPULATION)
    return rng.uniform(-1.0, 1.0, size=individual_length(dims))
