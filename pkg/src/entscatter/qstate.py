"""Reduced two-qubit density matrices of scattered Bell pairs and their
entanglement measures.

Basis and index conventions
---------------------------
The polarization product basis is ordered ``|++>, |+->, |-+>, |-->`` with
``+ -> 0`` and ``- -> 1``, i.e. basis index ``2*s + t`` where ``s`` is the
polarization of photon 1 and ``t`` that of photon 2.

A 4x4 Gram matrix ``a`` holds the mutual overlaps of the four detected
amplitude vectors of one medium, rows/columns ordered
``(++, +-, -+, --) = (input branch, output polarization)``:
``a[i, j] = u_i . conj(u_j)``.  For polarization-conserving media only the
branch-diagonal overlaps survive and are collected in a 2x2 matrix
``A[s, t] = a[(s,s), (t,t)]`` with rows/columns ``(+, -)``.

Complex conjugation in the spin-flip transform is entrywise in this fixed
product basis.  All functions accept stacked inputs with leading batch
dimensions.
"""

from dataclasses import dataclass

import numpy as np

from . import smallalg
from .errors import ConvergenceFailure, DegenerateNormalization, NotHermitian, NotPSD

# entrywise tolerance on Gram-matrix hermiticity
GRAM_HERMITIAN_ATOL = 1e-12
# normalizations below Z_DEGENERACY_REL * (trace scale) are rejected as degenerate
Z_DEGENERACY_REL = 1e-14

# rho index 2s+t picks Gram index 2*(1-t)+s when a single scattered beam is
# detected together with an unscattered partner beam
PERM_SINGLE_BEAM = np.array([2, 0, 3, 1])

# stack of the nine sigma_k (x) sigma_l products, k,l in (x, y, z)
_PAULI_KRON = np.stack(
    [np.kron(a, b) for a in smallalg.PAULIS for b in smallalg.PAULIS]
)


@dataclass
class Measures:
    """Entanglement measures of one two-qubit state.

    ``pseudo_concurrence`` is derived from ``chsh_max`` by construction,
    so the triple always satisfies C' = sqrt(max(0, E^2/4 - 1)).
    """

    concurrence: float
    chsh_max: float
    pseudo_concurrence: float


def _check_gram(g, p, name):
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim < 2 or g.shape[-2:] != (p, p):
        raise ValueError(f"{name} must have shape (..., {p}, {p}), got {g.shape}")
    dev = np.abs(g - np.conj(np.swapaxes(g, -1, -2))).max()
    if dev > GRAM_HERMITIAN_ATOL:
        raise NotHermitian(f"{name}: max |g - g^H| = {dev:.3e} exceeds {GRAM_HERMITIAN_ATOL:.0e}")
    return g


def unscattered_gram(p=4):
    """Gram matrix of an unscattered beam (single mode, polarization kept).

    For ``p=4`` the only surviving amplitudes are the branch-conserving ones,
    giving ones at the (++, --) corner positions; for ``p=2`` every entry of
    the conserving 2x2 overlap matrix equals one.
    """
    if p == 4:
        g = np.zeros((4, 4), dtype=np.complex128)
        g[np.ix_([0, 3], [0, 3])] = 1.0
        return g
    if p == 2:
        return np.ones((2, 2), dtype=np.complex128)
    raise ValueError(f"p must be 2 or 4, got {p}")


def _kron22(x, y):
    out = np.einsum("...ij,...kl->...ikjl", x, y)
    return out.reshape(out.shape[:-4] + (4, 4))


def _two_beam_unnormalized(a, b):
    """Unnormalized rho and Z from the 4x4 Gram matrices of the two media."""
    app, apm = a[..., 0:2, 0:2], a[..., 0:2, 2:4]
    amp, amm = a[..., 2:4, 0:2], a[..., 2:4, 2:4]
    bpp, bpm = b[..., 0:2, 0:2], b[..., 0:2, 2:4]
    bmp, bmm = b[..., 2:4, 0:2], b[..., 2:4, 2:4]
    zr = _kron22(app, bmm) + _kron22(amm, bpp) + _kron22(amp, bpm) + _kron22(apm, bmp)
    z = np.trace(zr, axis1=-2, axis2=-1).real
    return zr, z


def rho_two_beam(a, b, *, validate=True):
    """Reduced polarization density matrix when both beams are scattered.

    Parameters
    ----------
    a, b : array_like, shape (..., 4, 4)
        Hermitian PSD Gram matrices of the detected amplitudes of medium 1
        (photon 1) and medium 2 (photon 2).

    Returns
    -------
    ndarray, shape (..., 4, 4)
        Unit-trace Hermitian PSD density matrix in the product basis.

    Raises
    ------
    DegenerateNormalization
        If the normalization Z falls below ``Z_DEGENERACY_REL`` relative to
        trace(a) * trace(b); such samples form a measure-zero set and are
        discarded (and counted) by the Monte Carlo driver.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if validate:
        a = _check_gram(a, 4, "a")
        b = _check_gram(b, 4, "b")
    zr, z = _two_beam_unnormalized(a, b)
    scale = np.trace(a, axis1=-2, axis2=-1).real * np.trace(b, axis1=-2, axis2=-1).real
    if np.any(z <= Z_DEGENERACY_REL * scale):
        raise DegenerateNormalization(f"Z = {np.min(z):.3e} is degenerate")
    return zr / z[..., None, None]


def rho_single_beam(a, *, validate=True):
    """Reduced density matrix when only beam 1 is scattered.

    The unscattered partner beam keeps its mode and polarization, which
    reduces rho to an index-permuted copy of ``a`` normalized by its trace.
    """
    a = np.asarray(a, dtype=np.complex128)
    if validate:
        a = _check_gram(a, 4, "a")
    z = np.trace(a, axis1=-2, axis2=-1).real
    if np.any(z <= 0.0):
        raise DegenerateNormalization(f"trace(a) = {np.min(z):.3e} is not positive")
    rho = a[..., PERM_SINGLE_BEAM, :][..., :, PERM_SINGLE_BEAM]
    return rho / z[..., None, None]


def rho_pol_conserving(A, B, *, validate=True):
    """Reduced density matrix for polarization-conserving scattering.

    ``A`` and ``B`` are the 2x2 overlap matrices of the two media.  The state
    is supported on the ``|+->, |-+>`` block only; all other entries are
    exactly zero.
    """
    A = np.asarray(A, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    if validate:
        A = _check_gram(A, 2, "A")
        B = _check_gram(B, 2, "B")
    z = A[..., 0, 0].real * B[..., 1, 1].real + A[..., 1, 1].real * B[..., 0, 0].real
    scale = np.trace(A, axis1=-2, axis2=-1).real * np.trace(B, axis1=-2, axis2=-1).real
    if np.any(z <= Z_DEGENERACY_REL * scale):
        raise DegenerateNormalization(f"Z = {np.min(z):.3e} is degenerate")
    shape = np.broadcast_shapes(A.shape[:-2], B.shape[:-2])
    rho = np.zeros(shape + (4, 4), dtype=np.complex128)
    rho[..., 1, 1] = A[..., 0, 0].real * B[..., 1, 1].real / z
    rho[..., 1, 2] = A[..., 0, 1] * B[..., 1, 0] / z
    rho[..., 2, 1] = A[..., 1, 0] * B[..., 0, 1] / z
    rho[..., 2, 2] = A[..., 1, 1].real * B[..., 0, 0].real / z
    return rho


def wootters_sqrt_spectrum(rho):
    """Descending square roots of the spin-flip spectrum of rho.

    The concurrence needs the eigenvalues lambda_i of
    ``rho . (sy x sy) . conj(rho) . (sy x sy)``.  They coincide with the
    spectrum of the Hermitian product ``sqrt(rho) rho~ sqrt(rho)``, whose
    square factor is ``K = sqrt(rho) . (sy x sy) . conj(sqrt(rho))``; the
    singular values of K are the sqrt(lambda_i) directly.  Computing them by
    SVD instead of squaring keeps the small ones at absolute accuracy
    O(eps * lambda_max) instead of O(sqrt(eps)), which the pure-state
    identity checks rely on.
    """
    s = smallalg.hermitian_sqrt(rho)
    k = s @ smallalg.SIGMA_YY @ np.conj(s)
    try:
        return np.linalg.svd(k, compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pathological input
        raise ConvergenceFailure(f"svd failed: {exc}") from exc


def concurrence(rho):
    """Concurrence of a two-qubit density matrix, in [0, 1]."""
    sig = wootters_sqrt_spectrum(rho)
    return np.maximum(0.0, 2.0 * sig[..., 0] - sig.sum(axis=-1))


def correlation_matrix(rho):
    """3x3 real correlation matrix R_kl = Tr rho (sigma_k x sigma_l)."""
    rho = np.asarray(rho, dtype=np.complex128)
    r = np.einsum("...ij,kji->...k", rho, _PAULI_KRON).real
    return r.reshape(r.shape[:-1] + (3, 3))


def chsh_max(rho):
    """Largest attainable CHSH value of rho over measurement settings.

    Equal to ``2 sqrt(u1 + u2)`` with u1, u2 the two largest eigenvalues of
    R^T R built from the correlation matrix.  Ranges from 0 to 2 sqrt(2);
    values above 2 certify entanglement.
    """
    r = correlation_matrix(rho)
    g = np.swapaxes(r, -1, -2) @ r
    u = smallalg.sym3_eigenvalues(g)
    return 2.0 * np.sqrt(np.clip(u[..., 0] + u[..., 1], 0.0, None))


def pseudo_from_chsh(e):
    """Entanglement inferred from a CHSH value alone: sqrt(max(0, E^2/4 - 1))."""
    e = np.asarray(e, dtype=np.float64)
    return np.sqrt(np.clip(e * e / 4.0 - 1.0, 0.0, None))


def pseudo_concurrence(rho):
    """Pseudo-concurrence C' = sqrt(max(0, E^2/4 - 1)) <= C."""
    return pseudo_from_chsh(chsh_max(rho))


def measures(rho):
    """All three entanglement measures of a single state."""
    e = chsh_max(rho)
    return Measures(
        concurrence=float(concurrence(rho)),
        chsh_max=float(e),
        pseudo_concurrence=float(pseudo_from_chsh(e)),
    )


def concurrence_pol_closed_form(A, B, *, validate=True):
    """Closed-form concurrence for polarization-conserving two-beam scattering.

    ``C = C' = 2 |A01| |B01| / (A00 B11 + A11 B00)``.  Equals the full
    pipeline value of `rho_pol_conserving` followed by `concurrence` (and by
    `pseudo_concurrence`: the two measures coincide for these states).
    """
    A = np.asarray(A, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    if validate:
        A = _check_gram(A, 2, "A")
        B = _check_gram(B, 2, "B")
    den = A[..., 0, 0].real * B[..., 1, 1].real + A[..., 1, 1].real * B[..., 0, 0].real
    scale = np.trace(A, axis1=-2, axis2=-1).real * np.trace(B, axis1=-2, axis2=-1).real
    if np.any(den <= Z_DEGENERACY_REL * scale):
        raise DegenerateNormalization(f"denominator = {np.min(den):.3e} is degenerate")
    return 2.0 * np.abs(A[..., 0, 1]) * np.abs(B[..., 0, 1]) / den


def concurrence_pol_single_beam(A, *, validate=True):
    """Closed-form concurrence for conserving scattering of one beam only.

    Specialization of the two-beam closed form to an unscattered partner
    (B identically one): ``C = 2 |A01| / (A00 + A11)``.
    """
    A = np.asarray(A, dtype=np.complex128)
    if validate:
        A = _check_gram(A, 2, "A")
    return 2.0 * np.abs(A[..., 0, 1]) / (A[..., 0, 0].real + A[..., 1, 1].real)


def check_density_matrix(rho, *, hermitian_atol=1e-10, trace_atol=1e-12, psd_atol=1e-10):
    """Validate the density-matrix invariants; raises on violation."""
    rho = np.asarray(rho, dtype=np.complex128)
    dev = np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))).max()
    if dev > hermitian_atol:
        raise NotHermitian(f"max |rho - rho^H| = {dev:.3e}")
    tr = np.trace(rho, axis1=-2, axis2=-1)
    terr = np.abs(tr - 1.0).max()
    if terr > trace_atol:
        raise ValueError(f"max |trace(rho) - 1| = {terr:.3e}")
    wmin = np.linalg.eigvalsh(0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))).min()
    if wmin < -psd_atol:
        raise NotPSD(f"min eigenvalue = {wmin:.3e}")
    return rho
