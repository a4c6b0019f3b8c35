"""Seeded random streams and positive-stable / inverse-stable variates.

Every sampler takes an :class:`RngStream`. A stream is identified by a
``(seed, stream_id)`` pair and wraps a numpy ``PCG64DXSM`` bit generator
seeded through ``SeedSequence(seed, spawn_key=(stream_id,))``. Distinct
stream ids therefore give independent sequences (the SeedSequence spawning
guarantee), which is how replications are split across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "ISPrior",
    "RngStream",
    "sample_alpha_stable",
    "sample_inverse_stable",
]


class RngStream:
    """A reproducible random stream.

    Parameters
    ----------
    seed : int
        Root seed (64-bit).
    stream_id : int, optional
        Sub-stream index. Streams with the same seed but different ids are
        statistically independent.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        seed, stream_id = int(seed), int(stream_id)
        if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
            raise DomainError("seed and stream_id must be 64-bit unsigned integers")
        self.seed = seed
        self.stream_id = stream_id
        ss = np.random.SeedSequence(seed, spawn_key=(stream_id,))
        self.generator = np.random.Generator(np.random.PCG64DXSM(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def child(self, stream_id: int) -> "RngStream":
        """Fresh stream sharing this seed, for replication ``stream_id``."""
        return RngStream(self.seed, stream_id)

    def uniform(self, size=None):
        """Uniform draws on the open interval (0, 1)."""
        u = self.generator.random(size)
        if np.ndim(u) == 0:
            while u == 0.0:
                u = self.generator.random()
            return float(u)
        bad = u == 0.0
        while bad.any():
            u[bad] = self.generator.random(int(bad.sum()))
            bad = u == 0.0
        return u


@dataclass(frozen=True)
class ISPrior:
    """Hyperparameters of the inverse stable prior IS(alpha, rho)."""

    alpha: float
    rho: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (self.rho > 0.0 and np.isfinite(self.rho)):
            raise DomainError(f"rho must be positive, got {self.rho}")

    @property
    def mean(self) -> float:
        from scipy.special import gamma

        return self.rho / gamma(1.0 + self.alpha)


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _log_alpha_stable(alpha, rng, size):
    u1 = rng.uniform(size)
    u2 = rng.uniform(size)
    v = np.pi * u2
    e = -np.log(u1)
    q = 1.0 / alpha - 1.0
    # log form keeps small alpha from overflowing the power terms
    return (
        np.log(np.sin(alpha * v))
        + q * np.log(np.sin((1.0 - alpha) * v))
        - np.log(np.sin(v)) / alpha
        - q * np.log(e)
    )


def sample_alpha_stable(alpha: float, rng: RngStream, size=None):
    """Draw from the positive stable law with Laplace transform exp(-s**alpha).

    Kanter's representation: with ``V`` uniform on (0, pi) and ``E`` a unit
    exponential,

        S = sin(alpha V) sin((1-alpha) V)**(1/alpha - 1)
            / (sin(V)**(1/alpha) E**(1/alpha - 1)).
    """
    _check_alpha(alpha)
    s = np.exp(_log_alpha_stable(alpha, rng, size))
    return float(s) if np.ndim(s) == 0 else s


def inverse_stable_log_draws(prior: ISPrior, rng: RngStream, size):
    """Logs of inverse stable draws, for estimators that work in log space."""
    return np.log(prior.rho) - prior.alpha * _log_alpha_stable(prior.alpha, rng, size)


def sample_inverse_stable(prior: ISPrior, rng: RngStream, size=None):
    """Draw Theta = rho * S**(-alpha) with S positive alpha-stable."""
    y = np.exp(inverse_stable_log_draws(prior, rng, size))
    return float(y) if np.ndim(y) == 0 else y
