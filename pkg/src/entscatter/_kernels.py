"""Fused per-sample Monte Carlo kernels (numba).

These compute both entanglement measures of every sample of a block without
materializing intermediate 4x4 stacks, which is what makes 1e8-sample runs
of the polarization-mixing scenarios affordable on one core.  The numpy
implementations in `qstate` remain the reference; `tests/test_montecarlo.py`
pins the two routes against each other sample by sample.

Algorithm per sample: build the Gram matrices and the normalized rho, factor
rho = Phi Phi^H (thin amplitude factor when the rank is forced below 4,
Cholesky otherwise), then read the sqrt spin-flip spectrum off the singular
values of tau = Phi^T (sy x sy) Phi via one-sided Jacobi.  CHSH comes from
the trigonometric eigenvalues of R^T R.

fastmath is enabled: results are deterministic for a given build on a given
machine (the compiled code is cached), and the Monte Carlo contract only
requires bit-stability across reruns and worker counts, not across CPUs.
"""

import math

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except Exception:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        return deco


_TWO_PI_3 = 2.0 * np.pi / 3.0


def _pauli_terms():
    """Sparse form of the nine sigma_k (x) sigma_l: R_kl = sum_t c_t * rho[i_t, j_t]."""
    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sy = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    sz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    paulis = (sx, sy, sz)
    ii = np.zeros((9, 4), dtype=np.int64)
    jj = np.zeros((9, 4), dtype=np.int64)
    cc = np.zeros((9, 4), dtype=np.complex128)
    for k in range(3):
        for l in range(3):
            m = np.kron(paulis[k], paulis[l])
            t = 0
            for j in range(4):
                for i in range(4):
                    if m[j, i] != 0:
                        ii[3 * k + l, t] = i
                        jj[3 * k + l, t] = j
                        cc[3 * k + l, t] = m[j, i]
                        t += 1
    return ii, jj, cc


PII, PJJ, PCC = _pauli_terms()


@njit(cache=True, fastmath=True)
def _svdvals(ar, ai, k, sig):
    """Descending singular values of the k x k complex matrix (ar + i*ai), k <= 4.

    One-sided Jacobi with cached column norms; converges quadratically, the
    sweep cap is a safety net only.  Workspaces are overwritten."""
    nrm = np.empty(4, dtype=np.float64)
    for p in range(k):
        acc = 0.0
        for i in range(k):
            acc += ar[i, p] * ar[i, p] + ai[i, p] * ai[i, p]
        nrm[p] = acc
    for _ in range(30):
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                xr = 0.0
                xi = 0.0
                for i in range(k):
                    xr += ar[i, p] * ar[i, q] + ai[i, p] * ai[i, q]
                    xi += ar[i, p] * ai[i, q] - ai[i, p] * ar[i, q]
                m2 = xr * xr + xi * xi
                app = nrm[p]
                aqq = nrm[q]
                if m2 <= 1e-30 * app * aqq:
                    continue
                rotated = True
                m = math.sqrt(m2)
                phr = xr / m
                phi = xi / m
                tau = (aqq - app) / (2.0 * m)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                csm = 2.0 * c * s * m
                nrm[p] = c * c * app + s * s * aqq - csm
                nrm[q] = s * s * app + c * c * aqq + csm
                spr = s * phr
                spi = -s * phi
                for i in range(k):
                    vpr = ar[i, p]
                    vpi = ai[i, p]
                    vqr = ar[i, q]
                    vqi = ai[i, q]
                    ar[i, p] = c * vpr - (spr * vqr - spi * vqi)
                    ai[i, p] = c * vpi - (spr * vqi + spi * vqr)
                    ar[i, q] = s * (phr * vpr - phi * vpi) + c * vqr
                    ai[i, q] = s * (phr * vpi + phi * vpr) + c * vqi
        if not rotated:
            break
    for p in range(k):
        acc = 0.0
        for i in range(k):
            acc += ar[i, p] * ar[i, p] + ai[i, p] * ai[i, p]
        sig[p] = math.sqrt(acc)
    for i in range(1, k):
        key = sig[i]
        j = i - 1
        while j >= 0 and sig[j] < key:
            sig[j + 1] = sig[j]
            j -= 1
        sig[j + 1] = key


@njit(cache=True, fastmath=True)
def _cholesky4(m, out):
    """Lower Cholesky factor of a 4x4 Hermitian PD matrix; False if not PD."""
    for i in range(4):
        for j in range(4):
            out[i, j] = 0.0 + 0.0j
    for j in range(4):
        s = m[j, j].real
        for k in range(j):
            s -= out[j, k].real * out[j, k].real + out[j, k].imag * out[j, k].imag
        if s <= 0.0:
            return False
        d = math.sqrt(s)
        out[j, j] = d
        for i in range(j + 1, 4):
            c = m[i, j]
            for k in range(j):
                c -= out[i, k] * np.conj(out[j, k])
            out[i, j] = c / d
    return True


@njit(cache=True, fastmath=True)
def _factor_rho(rho, phi):
    """rho = phi phi^H via Cholesky, with tiny diagonal jitter retries.

    Returns True on success; a False means the sample is numerically on the
    PSD boundary (measure zero) and should be discarded."""
    if _cholesky4(rho, phi):
        return True
    eps = 1e-14
    for _ in range(2):
        for i in range(4):
            rho[i, i] = rho[i, i].real + eps
        if _cholesky4(rho, phi):
            return True
        eps *= 100.0
    return False


@njit(cache=True, fastmath=True)
def _sym3_eigs(g00, g01, g02, g11, g12, g22):
    """Descending eigenvalues of a real symmetric 3x3 (trigonometric form)."""
    q = (g00 + g11 + g22) / 3.0
    d00 = g00 - q
    d11 = g11 - q
    d22 = g22 - q
    p2 = d00 * d00 + d11 * d11 + d22 * d22 + 2.0 * (g01 * g01 + g02 * g02 + g12 * g12)
    p = math.sqrt(p2 / 6.0)
    if p <= 0.0:
        return q, q, q
    b00 = d00 / p
    b11 = d11 / p
    b22 = d22 / p
    b01 = g01 / p
    b02 = g02 / p
    b12 = g12 / p
    detb = (
        b00 * (b11 * b22 - b12 * b12)
        - b01 * (b01 * b22 - b12 * b02)
        + b02 * (b01 * b12 - b11 * b02)
    )
    r = detb / 2.0
    if r > 1.0:
        r = 1.0
    elif r < -1.0:
        r = -1.0
    phi = math.acos(r) / 3.0
    e1 = q + 2.0 * p * math.cos(phi)
    e3 = q + 2.0 * p * math.cos(phi + _TWO_PI_3)
    e2 = 3.0 * q - e1 - e3
    return e1, e2, e3


@njit(cache=True, fastmath=True)
def _chsh_from_rho(rho, pii, pjj, pcc):
    """Maximal CHSH value from the normalized rho."""
    r = np.empty((3, 3), dtype=np.float64)
    for k in range(3):
        for l in range(3):
            acc = 0.0
            m = 3 * k + l
            for t in range(4):
                acc += (rho[pii[m, t], pjj[m, t]] * pcc[m, t]).real
            r[k, l] = acc
    g00 = r[0, 0] * r[0, 0] + r[1, 0] * r[1, 0] + r[2, 0] * r[2, 0]
    g01 = r[0, 0] * r[0, 1] + r[1, 0] * r[1, 1] + r[2, 0] * r[2, 1]
    g02 = r[0, 0] * r[0, 2] + r[1, 0] * r[1, 2] + r[2, 0] * r[2, 2]
    g11 = r[0, 1] * r[0, 1] + r[1, 1] * r[1, 1] + r[2, 1] * r[2, 1]
    g12 = r[0, 1] * r[0, 2] + r[1, 1] * r[1, 2] + r[2, 1] * r[2, 2]
    g22 = r[0, 2] * r[0, 2] + r[1, 2] * r[1, 2] + r[2, 2] * r[2, 2]
    e1, e2, _ = _sym3_eigs(g00, g01, g02, g11, g12, g22)
    ee = e1 + e2
    if ee < 0.0:
        ee = 0.0
    return 2.0 * math.sqrt(ee)


@njit(cache=True, fastmath=True)
def _measures_from_factor(rho, phi, k, ar, ai, sig, pii, pjj, pcc):
    """(C, C') from normalized rho and a factor rho = phi[:, :k] phi[:, :k]^H."""
    # tau = phi^T (sy x sy) phi; (sy x sy) v = (-v3, v2, v1, -v0)
    for a in range(k):
        for b in range(k):
            t = (
                -phi[0, a] * phi[3, b]
                + phi[1, a] * phi[2, b]
                + phi[2, a] * phi[1, b]
                - phi[3, a] * phi[0, b]
            )
            ar[a, b] = t.real
            ai[a, b] = t.imag
    _svdvals(ar, ai, k, sig)
    tot = 0.0
    for i in range(k):
        tot += sig[i]
    c = 2.0 * sig[0] - tot
    if c < 0.0:
        c = 0.0
    e = _chsh_from_rho(rho, pii, pjj, pcc)
    x = e * e / 4.0 - 1.0
    cp = math.sqrt(x) if x > 0.0 else 0.0
    return c, cp


# rho index 2s+t picks Gram index 2*(1-t)+s in the single-beam reduction
_PERM = np.array([2, 0, 3, 1], dtype=np.int64)


@njit(cache=True, fastmath=True)
def mixing_single_block(w, out_c, out_cp, out_disc, pii, pjj, pcc):
    """Measures of |w.shape[0]| single-beam samples; w is (m, 4, N) amplitudes."""
    nb = w.shape[0]
    n = w.shape[2]
    k = n if n < 4 else 4
    a = np.empty((4, 4), dtype=np.complex128)
    rho = np.empty((4, 4), dtype=np.complex128)
    phi = np.empty((4, 4), dtype=np.complex128)
    ar = np.empty((4, 4), dtype=np.float64)
    ai = np.empty((4, 4), dtype=np.float64)
    sig = np.empty(4, dtype=np.float64)
    for s in range(nb):
        for i in range(4):
            for j in range(i, 4):
                acc = 0.0 + 0.0j
                for t in range(n):
                    acc += w[s, i, t] * np.conj(w[s, j, t])
                a[i, j] = acc
                if i != j:
                    a[j, i] = np.conj(acc)
        z = a[0, 0].real + a[1, 1].real + a[2, 2].real + a[3, 3].real
        if z <= 0.0:
            out_disc[s] = True
            out_c[s] = 0.0
            out_cp[s] = 0.0
            continue
        for i in range(4):
            for j in range(4):
                rho[i, j] = a[_PERM[i], _PERM[j]] / z
        if n <= 4:
            rz = 1.0 / math.sqrt(z)
            for i in range(4):
                for t in range(n):
                    phi[i, t] = w[s, _PERM[i], t] * rz
            ok = True
        else:
            ok = _factor_rho(rho, phi)
        if not ok:
            out_disc[s] = True
            out_c[s] = 0.0
            out_cp[s] = 0.0
            continue
        out_disc[s] = False
        c, cp = _measures_from_factor(rho, phi, k, ar, ai, sig, pii, pjj, pcc)
        out_c[s] = c
        out_cp[s] = cp


@njit(cache=True, fastmath=True)
def mixing_two_block(wa, wb, out_c, out_cp, out_disc, pii, pjj, pcc):
    """Measures of two-beam samples; wa is (m, 4, N1), wb is (m, 4, N2)."""
    nb = wa.shape[0]
    n1 = wa.shape[2]
    n2 = wb.shape[2]
    thin = n1 * n2 <= 4
    k = n1 * n2 if thin else 4
    a = np.empty((4, 4), dtype=np.complex128)
    b = np.empty((4, 4), dtype=np.complex128)
    rho = np.empty((4, 4), dtype=np.complex128)
    phi = np.empty((4, 4), dtype=np.complex128)
    ar = np.empty((4, 4), dtype=np.float64)
    ai = np.empty((4, 4), dtype=np.float64)
    sig = np.empty(4, dtype=np.float64)
    for s in range(nb):
        for i in range(4):
            for j in range(i, 4):
                acca = 0.0 + 0.0j
                accb = 0.0 + 0.0j
                for t in range(n1):
                    acca += wa[s, i, t] * np.conj(wa[s, j, t])
                for t in range(n2):
                    accb += wb[s, i, t] * np.conj(wb[s, j, t])
                a[i, j] = acca
                b[i, j] = accb
                if i != j:
                    a[j, i] = np.conj(acca)
                    b[j, i] = np.conj(accb)
        # Z rho[2s+t, 2s'+t'] = App[s,s'] Bmm[t,t'] + Amm[s,s'] Bpp[t,t']
        #                      + Amp[s,s'] Bpm[t,t'] + Apm[s,s'] Bmp[t,t']
        for s1 in range(2):
            for t1 in range(2):
                for s2 in range(2):
                    for t2 in range(2):
                        rho[2 * s1 + t1, 2 * s2 + t2] = (
                            a[s1, s2] * b[2 + t1, 2 + t2]
                            + a[2 + s1, 2 + s2] * b[t1, t2]
                            + a[2 + s1, s2] * b[t1, 2 + t2]
                            + a[s1, 2 + s2] * b[2 + t1, t2]
                        )
        z = (rho[0, 0] + rho[1, 1] + rho[2, 2] + rho[3, 3]).real
        tra = (a[0, 0] + a[1, 1] + a[2, 2] + a[3, 3]).real
        trb = (b[0, 0] + b[1, 1] + b[2, 2] + b[3, 3]).real
        if z <= 1e-14 * tra * trb:
            out_disc[s] = True
            out_c[s] = 0.0
            out_cp[s] = 0.0
            continue
        for i in range(4):
            for j in range(4):
                rho[i, j] = rho[i, j] / z
        if thin:
            # columns kron(u_p, v_m) + kron(u_m, v_p) per detected mode pair
            rz = 1.0 / math.sqrt(z)
            col = 0
            for ta in range(n1):
                for tb in range(n2):
                    for s1 in range(2):
                        for t1 in range(2):
                            phi[2 * s1 + t1, col] = (
                                wa[s, s1, ta] * wb[s, 2 + t1, tb]
                                + wa[s, 2 + s1, ta] * wb[s, t1, tb]
                            ) * rz
                    col += 1
            ok = True
        else:
            ok = _factor_rho(rho, phi)
        if not ok:
            out_disc[s] = True
            out_c[s] = 0.0
            out_cp[s] = 0.0
            continue
        out_disc[s] = False
        c, cp = _measures_from_factor(rho, phi, k, ar, ai, sig, pii, pjj, pcc)
        out_c[s] = c
        out_cp[s] = cp
