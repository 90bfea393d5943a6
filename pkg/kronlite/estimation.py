"""
Phasor measurements at measured nodes and least-squares estimation of the
Kron-reduced admittance matrix from them (I1 = Ybar V1 at every sample).
"""

import logging

import numpy as np
import scipy.linalg

from kronlite._utils import KronError
from kronlite.blockmat import BlockMatrix, PHASES, normalize_diagonal
from kronlite.config import get_tolerances


__all__ = ['RankDeficient', 'MeasurementSet', 'simulate_measurements',
           'estimate_kron_reduced', 'estimation_error']


logger = logging.getLogger(__name__)

# Relative spread of simulated voltages around the flat profile
_PERTURBATION = 0.05

_PHASE_ROTATION = np.exp(-2j * np.pi * np.arange(PHASES) / PHASES)


class RankDeficient(KronError, ArithmeticError):
    pass


class MeasurementSet(object):
    """
    T samples of voltage and current phasors at M measured nodes.  V1 and
    I1 are T x 3M complex arrays, columns ordered node by node (phases a,
    b, c); *labels* are the node labels (default 1..M).
    """

    def __init__(self, V1, I1, noise_sigma=0.0, labels=None):
        V1 = np.array(V1, dtype=complex)
        I1 = np.array(I1, dtype=complex)
        if V1.ndim != 2 or V1.shape != I1.shape:
            raise ValueError("V1 and I1 must be 2-D arrays of equal shape, "
                             "got %s and %s" % (V1.shape, I1.shape))
        if V1.shape[0] < 1:
            raise ValueError("need at least one sample")
        if V1.shape[1] % PHASES:
            raise ValueError("column count %d is not a multiple of 3"
                             % V1.shape[1])
        m = V1.shape[1] // PHASES
        labels = tuple(range(1, m + 1)) if labels is None else tuple(labels)
        if len(labels) != m:
            raise ValueError("expected %d labels, got %d" % (m, len(labels)))
        self.V1 = V1
        self.I1 = I1
        self.noise_sigma = float(noise_sigma)
        self.labels = labels

    @property
    def T(self):
        return self.V1.shape[0]

    @property
    def M(self):
        return len(self.labels)

    def __repr__(self):
        return "<MeasurementSet T=%d M=%d noise_sigma=%g>" % (
            self.T, self.M, self.noise_sigma)


def simulate_measurements(Ybar, T, noise_sigma=0.0, seed=0):
    """
    Draw T voltage samples near the flat profile (1 plus a small complex
    perturbation per phase, phases 120 degrees apart) and the currents
    I1 = Ybar V1, plus complex gaussian noise of scale *noise_sigma*.
    """
    if T < 1:
        raise ValueError("need at least one sample, got %d" % T)
    rng = np.random.default_rng(seed)
    n = PHASES * Ybar.n
    pert = rng.standard_normal((T, n)) + 1j * rng.standard_normal((T, n))
    V1 = (1 + _PERTURBATION * pert) * np.tile(_PHASE_ROTATION, Ybar.n)
    I1 = V1 @ Ybar.array.T
    if noise_sigma > 0:
        noise = rng.standard_normal((T, n)) + 1j * rng.standard_normal((T, n))
        I1 = I1 + noise_sigma / np.sqrt(2) * noise
    return MeasurementSet(V1, I1, noise_sigma, Ybar.labels)


def estimate_kron_reduced(ms, tol=None):
    """
    Least-squares fit of Ybar to I1 = Ybar V1 over all samples, through
    the normal equations (Cholesky) with a rank-revealing least-squares
    fallback.  The fit is symmetrized and then given zero row-block sums.
    """
    tol = get_tolerances(tol)
    V, I = ms.V1, ms.I1
    n = V.shape[1]
    rank = np.linalg.matrix_rank(V)
    if rank < n:
        raise RankDeficient("voltage samples have rank %d, %d needed; "
                            "take at least %d samples" % (rank, n, n))
    gram = V.conj().T @ V
    X = None
    if np.linalg.cond(gram) <= tol.kappa_max:
        try:
            factor = scipy.linalg.cho_factor(gram)
            X = scipy.linalg.cho_solve(factor, V.conj().T @ I)
        except np.linalg.LinAlgError:
            pass
    if X is None:
        logger.debug("normal equations unusable, falling back to lstsq")
        X = scipy.linalg.lstsq(V, I)[0]
    Y = X.T
    Y = (Y + Y.T) / 2
    est = normalize_diagonal(BlockMatrix(Y, ms.labels))
    logger.info("estimated %d-node reduction from %d samples, residual %.3g",
                ms.M, ms.T, estimation_error(ms, est))
    return est


def estimation_error(ms, Ybar_hat):
    """Relative residual ||I1 - Ybar_hat V1|| / ||I1||."""
    res = np.linalg.norm(ms.I1 - ms.V1 @ Ybar_hat.array.T)
    scale = np.linalg.norm(ms.I1)
    if scale == 0:
        return float(res)
    return float(res / scale)
