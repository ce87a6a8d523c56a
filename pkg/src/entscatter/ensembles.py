"""Random ensembles of scattering amplitudes and Gram matrices.

The statistical model for a disordered medium: every detected scattering
amplitude is an independent complex Gaussian, real and imaginary parts of
zero mean and variance one (the variance drops out of the normalized density
matrix, so it is fixed at 1).  The Gram matrix ``g = w w^H`` of a ``p x N``
amplitude matrix is then a complex Wishart matrix whose nonzero eigenvalues
follow the Laguerre unitary ensemble with weight ``exp(-g_n / 2)`` and whose
eigenvector matrix is Haar distributed.

Reproducibility: all sampling goes through `RngStream`, a thin wrapper over
numpy's counter-based Philox generator keyed by ``(seed, stream_id)``.
Distinct stream ids give statistically independent streams, and a fixed
``(seed, stream_id)`` pair reproduces the same sequence bit-exactly across
runs and platforms, independent of how work is scheduled.
"""

from dataclasses import dataclass, field

import numpy as np

from .smallalg import unitarize

# variance of each real component of an amplitude ("fixed at 1")
GAUSSIAN_COMPONENT_VARIANCE = 1.0
# the matching exponential rate c in the Wishart/Laguerre weight exp(-c tr g)
LAGUERRE_EXPONENT_C = 0.5

_MASK64 = (1 << 64) - 1


@dataclass
class RngStream:
    """A named, reproducible random stream: Philox4x64 keyed by (seed, stream_id).

    The underlying generator is created lazily and then consumed statefully,
    so repeated draws from one ``RngStream`` instance advance the sequence;
    a fresh instance with the same key restarts it.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.seed = int(self.seed) & _MASK64
        self.stream_id = int(self.stream_id) & _MASK64

    @property
    def generator(self):
        if self._gen is None:
            key = np.array([self.seed, self.stream_id], dtype=np.uint64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen


def as_generator(rng):
    """Accept an RngStream, a numpy Generator, or an integer seed."""
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator
    raise TypeError(f"rng must be RngStream, Generator or int, got {type(rng)!r}")


def _check_p(p):
    if p not in (2, 4):
        raise ValueError(f"p must be 2 (conserving) or 4 (mixing), got {p}")


def sample_amplitudes(p, n_modes, rng, size=None):
    """Draw a p x N complex Gaussian amplitude matrix.

    Each entry's real and imaginary parts are i.i.d. normal with mean 0 and
    variance ``GAUSSIAN_COMPONENT_VARIANCE``; for one sample the stream is
    consumed as the p*N real parts followed by the p*N imaginary parts.

    Parameters
    ----------
    p : {2, 4}
        Number of amplitude rows (4 for polarization-mixing media, 2 for
        polarization-conserving ones).
    n_modes : int
        Number of detected spatial modes N >= 1.
    rng : RngStream | numpy.random.Generator | int
    size : int, optional
        If given, return ``size`` stacked samples of shape (size, p, n_modes).
    """
    _check_p(p)
    n_modes = int(n_modes)
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    g = as_generator(rng)
    shape = (2, p, n_modes) if size is None else (int(size), 2, p, n_modes)
    z = g.standard_normal(shape)
    return z[..., 0, :, :] + 1j * z[..., 1, :, :]


def gram(w):
    """Gram matrix ``g = w w^H`` of an amplitude matrix; exactly Hermitian."""
    w = np.asarray(w, dtype=np.complex128)
    return np.einsum("...in,...jn->...ij", w, np.conj(w))


def sample_laguerre_eigenvalues(p, n_modes, rng, size=None):
    """Nonzero Wishart/Laguerre eigenvalues, descending.

    Implemented by diagonalizing the Gram matrix of a fresh Gaussian
    amplitude sample, which is distribution-exact by construction; at p <= 4
    this is cheap and avoids any separate sampler to validate.  When
    ``n_modes < p`` the remaining ``p - n_modes`` eigenvalues vanish and only
    the ``min(p, n_modes)`` nonzero ones are returned.
    """
    h = gram(sample_amplitudes(p, n_modes, rng, size=size))
    w = np.linalg.eigvalsh(h)[..., ::-1]
    return w[..., : min(p, int(n_modes))]


def sample_haar_unitary(p, rng, size=None):
    """Haar-distributed p x p unitary.

    QR of a complex Ginibre sample, with the positive-diagonal-R phase
    convention enforced by `smallalg.unitarize` (required for Haar
    correctness of the Q factor).
    """
    _check_p(p)
    g = as_generator(rng)
    shape = (2, p, p) if size is None else (int(size), 2, p, p)
    z = g.standard_normal(shape)
    return unitarize(z[..., 0, :, :] + 1j * z[..., 1, :, :])


def assemble_gram(eigenvalues, u):
    """Build ``u diag(eigenvalues) u^H``, zero-padding the spectrum to size p.

    Inverse of the eigendecomposition route: assembling Laguerre eigenvalues
    with an independent Haar eigenvector matrix reproduces the Gram-matrix
    ensemble of `gram(sample_amplitudes(...))`.
    """
    u = np.asarray(u, dtype=np.complex128)
    lam = np.atleast_1d(np.asarray(eigenvalues, dtype=np.float64))
    p = u.shape[-1]
    k = lam.shape[-1]
    if k > p:
        raise ValueError(f"got {k} eigenvalues for a {p} x {p} eigenvector matrix")
    if k < p:
        pad = np.zeros(lam.shape[:-1] + (p - k,), dtype=np.float64)
        lam = np.concatenate([lam, pad], axis=-1)
    g = (u * lam[..., None, :]) @ np.conj(np.swapaxes(u, -1, -2))
    return 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
