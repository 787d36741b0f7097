"""Closed-form MMSE receive beamformers for fixed transmit beams."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericalError
from .metrics import ReceiverSet

# Hermitian solve is refused beyond this condition number; with N0 > 0 the
# covariance is strictly positive definite so this only trips on bad input.
COND_LIMIT = 1e12


def receive_covariance(k, beams, channels, topology, n0):
    """Covariance of user k's received signal: every transmit beam (its own
    included) plus the noise floor N0 I.  Hermitian positive definite."""
    m = topology.user_rx_antennas[k]
    cov = n0 * np.eye(m, dtype=complex)
    for (i, j), w in beams.private.items():
        hw = channels.h(topology.user_bs[i], k) @ w
        cov += np.outer(hw, hw.conj())
    for g, w in beams.common.items():
        hw = channels.h(topology.group_bs[g], k) @ w
        cov += np.outer(hw, hw.conj())
    return cov


def mmse_receivers(beams, channels, topology, n0):
    """u = C^{-1} H w for every stream, via one Cholesky factor per user.

    A zero transmit beam yields a zero receiver.  Raises NumericalError if a
    covariance is too ill-conditioned to trust the solve.
    """
    private = {}
    common = {}
    for k in range(topology.num_users):
        cov = receive_covariance(k, beams, channels, topology, n0)
        if np.linalg.cond(cov) > COND_LIMIT:
            raise NumericalError(f"receive covariance of user {k} is near singular")
        factor = cho_factor(cov)
        h = channels.h(topology.user_bs[k], k)
        for l in range(topology.num_private_streams(k)):
            private[(k, l)] = cho_solve(factor, h @ beams.private[(k, l)])
        g = topology.user_group[k]
        common[k] = cho_solve(factor, h @ beams.common[g])
    return ReceiverSet(private=private, common=common)
