"""Exact-size dense linear algebra for 2x2, 3x3 and 4x4 matrices.

Everything here operates on small fixed-size blocks (the two-qubit density
matrix, the Gram matrices of detected scattering amplitudes and the 3x3
correlation-matrix product), so the routines favour unconditional stability
and determinism over asymptotic scaling.  All functions accept stacked
inputs with leading batch dimensions.

Determinism: the eigensolvers are backed by single-threaded LAPACK drivers
through numpy; identical input bits produce identical output bits within a
given build of the package, and ties in the descending eigenvalue sort are
broken by a stable argsort of the LAPACK output.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, NotHermitian, NotPSD, NotSymmetric, SingularInput

# entrywise absolute tolerance for the Hermitian/symmetric precondition checks
HERMITIAN_ATOL = 1e-10
# eigenvalues below -PSD_REL_TOL * trace fail the PSD check; above it they clamp to 0
PSD_REL_TOL = 1e-10
# relative singular-value cutoff for unitarization
SINGULAR_RTOL = 1e-12

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

# sigma_y (x) sigma_y, the spin-flip kernel of the concurrence
SIGMA_YY = np.kron(SIGMA_Y, SIGMA_Y)

_TWO_PI_3 = 2.0 * np.pi / 3.0


@dataclass
class HermitianEigen:
    """Eigendecomposition of a Hermitian matrix.

    ``eigenvalues`` are sorted descending; column ``k`` of ``eigenvectors``
    belongs to ``eigenvalues[k]``.  Both carry the input's batch shape.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _as_square(m, sizes, name):
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if m.shape[-1] not in sizes:
        raise ValueError(f"{name} must have size in {sizes}, got {m.shape[-1]}")
    return m


def _hermitian_deviation(m):
    return np.abs(m - np.conj(np.swapaxes(m, -1, -2))).max()


def hermitian_eigen(m):
    """Eigendecomposition of a Hermitian p x p matrix, p in {2, 3, 4}.

    Parameters
    ----------
    m : array_like, shape (..., p, p)
        Hermitian within ``HERMITIAN_ATOL`` (max entrywise deviation).

    Returns
    -------
    HermitianEigen
        Descending eigenvalues and the matching unitary eigenvector matrix.

    Raises
    ------
    NotHermitian
        If the symmetry check fails.
    ConvergenceFailure
        If the underlying eigensolver does not converge.
    """
    m = _as_square(np.asarray(m, dtype=np.complex128), (2, 3, 4), "m")
    dev = _hermitian_deviation(m)
    if dev > HERMITIAN_ATOL:
        raise NotHermitian(f"max |m - m^H| = {dev:.3e} exceeds {HERMITIAN_ATOL:.0e}")
    h = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
    try:
        w, u = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"hermitian eigensolver failed: {exc}") from exc
    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    u = np.take_along_axis(u, order[..., None, :], axis=-1)
    return HermitianEigen(eigenvalues=w, eigenvectors=u)


def hermitian_sqrt(m):
    """Hermitian PSD square root of a Hermitian PSD matrix.

    Eigenvalues in ``[-PSD_REL_TOL * trace, 0)`` are treated as rounding
    noise and clamped to zero; anything below that raises ``NotPSD``.
    """
    eig = hermitian_eigen(m)
    w, u = eig.eigenvalues, eig.eigenvectors
    tr = w.sum(axis=-1)
    if np.any(w < -PSD_REL_TOL * tr[..., None]):
        raise NotPSD(f"eigenvalue {w.min():.3e} below -{PSD_REL_TOL:.0e} * trace")
    root = np.sqrt(np.clip(w, 0.0, None))
    s = (u * root[..., None, :]) @ np.conj(np.swapaxes(u, -1, -2))
    # symmetrize away the O(eps) residue of the reconstruction
    return 0.5 * (s + np.conj(np.swapaxes(s, -1, -2)))


def sym3_eigenvalues(m):
    """Descending eigenvalues of a real symmetric 3x3 matrix.

    Uses the trigonometric closed form of the characteristic cubic, which is
    branch-free and cheap enough for the Monte Carlo hot loop.  When the
    normalized discriminant is within 1e-12 of a degenerate root the closed
    form loses accuracy, so those entries fall back to the iterative
    symmetric eigensolver.
    """
    m = _as_square(np.asarray(m, dtype=np.float64), (3,), "m")
    dev = np.abs(m - np.swapaxes(m, -1, -2)).max()
    if dev > HERMITIAN_ATOL:
        raise NotSymmetric(f"max |m - m^T| = {dev:.3e} exceeds {HERMITIAN_ATOL:.0e}")
    m = 0.5 * (m + np.swapaxes(m, -1, -2))

    q = np.trace(m, axis1=-2, axis2=-1) / 3.0
    d = m - q[..., None, None] * np.eye(3)
    p = np.sqrt(np.einsum("...ij,...ij->...", d, d) / 6.0)
    scalarlike = p <= 0.0  # m is exactly q * identity
    psafe = np.where(scalarlike, 1.0, p)
    b = d / psafe[..., None, None]
    r = np.clip(np.linalg.det(b) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + _TWO_PI_3)
    e2 = 3.0 * q - e1 - e3
    out = np.stack([e1, e2, e3], axis=-1)

    near_degenerate = (1.0 - np.abs(r) < 1e-12) & ~scalarlike
    if np.any(near_degenerate):
        fallback = np.linalg.eigvalsh(m[near_degenerate])[..., ::-1]
        out[near_degenerate] = fallback
    return out


def unitarize(g):
    """Project a nonsingular complex matrix onto the unitary group by QR.

    The QR decomposition is normalized so that the triangular factor has a
    real positive diagonal.  This phase convention makes the map from a
    Ginibre sample to its Q factor produce the Haar measure, so it is load
    bearing for `ensembles.sample_haar_unitary`.
    """
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim < 2 or g.shape[-1] != g.shape[-2]:
        raise ValueError(f"g must be a square matrix, got shape {g.shape}")
    sv = np.linalg.svd(g, compute_uv=False)
    if np.any(sv[..., -1] <= SINGULAR_RTOL * sv[..., 0]):
        raise SingularInput("matrix is singular to working precision")
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phase = diag / np.abs(diag)
    return q * phase[..., None, :]
