"""Monte Carlo estimation of the average entanglement measures versus the
number of detected modes, for the four scattering scenarios.

Scenarios
---------
``Scenario(mixing=..., beams=..., n1=..., n2=...)`` selects

* ``mixing="mixing"``    : the disorder mixes the two polarizations; the
  detected amplitudes of a beam form a 4 x N complex Gaussian matrix.
* ``mixing="conserving"``: the polarizations do not mix; a beam contributes
  a 2 x N Gaussian matrix and both measures reduce to one closed form,
  which is used directly (so the C and C' estimates coincide exactly per
  sample, as they must for these states).
* ``beams="both" | "single"``: whether the partner beam is also scattered.

Determinism
-----------
A run is split into fixed-size sample blocks; block ``i`` draws from the
Philox stream ``(seed, (stream_context << 32) | i)``, and blocks are reduced
in index order with exactly rounded summation (`math.fsum`).  The result is
therefore bit-identical for any worker count, and every sweep row is
independently reproducible from ``(seed, N)``.
"""

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, qstate
from .ensembles import RngStream, gram
from .errors import InsufficientData
from .qstate import Z_DEGENERACY_REL

MIXING = "mixing"
CONSERVING = "conserving"
BOTH = "both"
SINGLE = "single"

# fixed block size; part of the reproducibility contract (results depend on it)
BLOCK_SIZE = 1 << 16
# target scalar count per drawn amplitude chunk, bounds peak memory at large N
_CHUNK_SCALARS = 1 << 21

_USE_NUMBA = _kernels.NUMBA_AVAILABLE and not os.environ.get("ENTSCATTER_DISABLE_NUMBA")


@dataclass(frozen=True)
class Scenario:
    """One scattering configuration: mixing class, scattered beams, mode counts."""

    mixing: str
    beams: str
    n1: int
    n2: int | None = None

    def __post_init__(self):
        if self.mixing not in (MIXING, CONSERVING):
            raise ValueError(f"mixing must be '{MIXING}' or '{CONSERVING}', got {self.mixing!r}")
        if self.beams not in (BOTH, SINGLE):
            raise ValueError(f"beams must be '{BOTH}' or '{SINGLE}', got {self.beams!r}")
        if int(self.n1) < 1:
            raise ValueError(f"n1 must be >= 1, got {self.n1}")
        object.__setattr__(self, "n1", int(self.n1))
        if self.beams == BOTH:
            n2 = self.n1 if self.n2 is None else int(self.n2)
            if n2 < 1:
                raise ValueError(f"n2 must be >= 1, got {self.n2}")
            object.__setattr__(self, "n2", n2)
        else:
            object.__setattr__(self, "n2", None)  # ignored for single-beam runs

    @property
    def p(self):
        return 4 if self.mixing == MIXING else 2

    def with_n(self, n):
        n2 = n if self.beams == BOTH else None
        return Scenario(self.mixing, self.beams, n, n2)


@dataclass
class MCEstimate:
    """Sample mean with its standard error.

    ``n_samples`` counts the samples that entered the mean; ``n_discarded``
    counts degenerate-normalization rejections (a measure-zero event, so the
    rate is flagged if it ever exceeds 1e-6 of the total).
    """

    mean: float
    stderr: float
    n_samples: int
    n_discarded: int


@dataclass
class SweepRow:
    """One sweep row: mode count and the two averaged measures."""

    n: int
    c: MCEstimate
    cp: MCEstimate


@dataclass
class DecayFit:
    """Weighted least-squares fit of a decay law to a sweep table.

    ``rate_or_power`` is the slope of ln<C> against N (exponential model) or
    against ln N (algebraic model); ``covariance`` is the 2x2 covariance of
    ``(rate_or_power, ln amplitude)``.
    """

    model: str
    rate_or_power: float
    amplitude: float
    covariance: np.ndarray
    n_range: tuple[int, int]
    chi2_dof: float
    n_used: int
    n_excluded: int
    excluded_n: tuple[int, ...] = field(default_factory=tuple)


def _chunk_len(scenario):
    # depends only on the scenario so the in-block draw pattern is fixed
    n_max = scenario.n1 if scenario.n2 is None else max(scenario.n1, scenario.n2)
    per_sample = scenario.p * n_max
    return int(min(BLOCK_SIZE, max(1024, _CHUNK_SCALARS // per_sample)))


def _draw_amplitudes(g, p, n, m):
    z = g.standard_normal((m, 2, p, n))
    return z[:, 0] + 1j * z[:, 1]


def _measures_mixing_numpy(scenario, wa, wb):
    """Reference (non-numba) route through the qstate pipeline, with masking."""
    if scenario.beams == SINGLE:
        a = gram(wa)
        z = np.trace(a, axis1=-2, axis2=-1).real
        valid = z > 0.0
        zr = a[:, qstate.PERM_SINGLE_BEAM][:, :, qstate.PERM_SINGLE_BEAM]
    else:
        a = gram(wa)
        b = gram(wb)
        zr, z = qstate._two_beam_unnormalized(a, b)
        scale = np.trace(a, axis1=-2, axis2=-1).real * np.trace(b, axis1=-2, axis2=-1).real
        valid = z > Z_DEGENERACY_REL * scale
    zsafe = np.where(valid, z, 1.0)
    rho = zr / zsafe[:, None, None]
    rho[~valid] = 0.25 * np.eye(4)  # inert placeholder for discarded samples
    c = qstate.concurrence(rho)
    cp = qstate.pseudo_concurrence(rho)
    return np.where(valid, c, 0.0), np.where(valid, cp, 0.0), ~valid


def _measures_mixing_numba(scenario, wa, wb):
    m = wa.shape[0]
    c = np.empty(m)
    cp = np.empty(m)
    disc = np.empty(m, dtype=np.bool_)
    if scenario.beams == SINGLE:
        _kernels.mixing_single_block(wa, c, cp, disc, _kernels.PII, _kernels.PJJ, _kernels.PCC)
    else:
        _kernels.mixing_two_block(wa, wb, c, cp, disc, _kernels.PII, _kernels.PJJ, _kernels.PCC)
    return c, cp, disc


def _measures_conserving(scenario, WA, WB):
    """Closed-form route; C' equals C exactly for conserving scattering."""
    A = gram(WA)
    a01 = np.abs(A[:, 0, 1])
    a00 = A[:, 0, 0].real
    a11 = A[:, 1, 1].real
    if scenario.beams == SINGLE:
        den = a00 + a11
        valid = den > 0.0
        c = 2.0 * a01 / np.where(valid, den, 1.0)
    else:
        B = gram(WB)
        den = a00 * B[:, 1, 1].real + a11 * B[:, 0, 0].real
        valid = den > Z_DEGENERACY_REL * (a00 + a11) * (B[:, 0, 0].real + B[:, 1, 1].real)
        c = 2.0 * a01 * np.abs(B[:, 0, 1]) / np.where(valid, den, 1.0)
    c = np.where(valid, c, 0.0)
    return c, c.copy(), ~valid


def _check_block_invariants(scenario, wa, wb, c, cp, disc, fraction):
    """Recompute a subsample through the reference pipeline and assert the
    measure invariants; used by tests and debugging runs."""
    m = len(c)
    take = max(1, int(m * fraction))
    idx = np.arange(take)
    keep = idx[~disc[idx]]
    if keep.size == 0:
        return
    if scenario.mixing == MIXING:
        a = gram(wa[keep])
        if scenario.beams == SINGLE:
            rho = qstate.rho_single_beam(a)
        else:
            rho = qstate.rho_two_beam(a, gram(wb[keep]))
        rc = qstate.concurrence(rho)
        e = qstate.chsh_max(rho)
        rcp = qstate.pseudo_from_chsh(e)
        assert np.abs(rc - c[keep]).max() < 1e-7, "kernel concurrence disagrees"
        assert np.abs(rcp - cp[keep]).max() < 1e-7, "kernel pseudo-concurrence disagrees"
        assert np.all(rcp <= rc + 1e-10), "C' <= C violated"
        assert np.all(e >= 2.0 * math.sqrt(2.0) * rc - 1e-9), "E >= 2 sqrt(2) C violated"
        assert np.all(e <= 2.0 * np.sqrt(1.0 + rc**2) + 1e-9), "E <= 2 sqrt(1+C^2) violated"
    else:
        assert np.array_equal(c[keep], cp[keep]), "conserving C != C'"
        assert np.all((c[keep] >= 0.0) & (c[keep] <= 1.0 + 1e-12))


def _block_moments(scenario, seed, stream_context, block_index, block_len, check_fraction=0.0):
    g = RngStream(seed, (int(stream_context) << 32) | int(block_index)).generator
    chunk = _chunk_len(scenario)
    c_sums, c2_sums, cp_sums, cp2_sums = [], [], [], []
    kept = 0
    discarded = 0
    pos = 0
    p = scenario.p
    while pos < block_len:
        m = min(chunk, block_len - pos)
        wa = _draw_amplitudes(g, p, scenario.n1, m)
        wb = _draw_amplitudes(g, p, scenario.n2, m) if scenario.beams == BOTH else None
        if scenario.mixing == CONSERVING:
            c, cp, disc = _measures_conserving(scenario, wa, wb)
        elif _USE_NUMBA:
            c, cp, disc = _measures_mixing_numba(scenario, wa, wb)
        else:
            c, cp, disc = _measures_mixing_numpy(scenario, wa, wb)
        if check_fraction > 0.0:
            _check_block_invariants(scenario, wa, wb, c, cp, disc, check_fraction)
        c_sums.append(float(np.sum(c)))
        c2_sums.append(float(np.sum(c * c)))
        cp_sums.append(float(np.sum(cp)))
        cp2_sums.append(float(np.sum(cp * cp)))
        ndisc = int(np.count_nonzero(disc))
        discarded += ndisc
        kept += m - ndisc
        pos += m
    return (
        math.fsum(c_sums),
        math.fsum(c2_sums),
        math.fsum(cp_sums),
        math.fsum(cp2_sums),
        kept,
        discarded,
    )


def _to_estimate(total, total_sq, kept, discarded):
    if kept <= 0:
        return MCEstimate(math.nan, math.nan, 0, discarded)
    mean = total / kept
    if kept > 1:
        var = max(0.0, (total_sq - total * total / kept) / (kept - 1))
        stderr = math.sqrt(var / kept)
    else:
        stderr = math.inf
    return MCEstimate(mean, stderr, kept, discarded)


def estimate(scenario, n_samples, seed, workers=1, *, stream_context=0, check_fraction=0.0):
    """Monte Carlo averages <C> and <C'> for one scenario.

    Parameters
    ----------
    scenario : Scenario
    n_samples : int
        Total samples to draw (>= 1).
    seed : int
        Philox seed; together with ``stream_context`` it fixes every draw.
    workers : int
        Worker threads; changes scheduling only, never the result.
    check_fraction : float
        If positive, re-verify this fraction of every block through the
        reference pipeline (slow; meant for tests).

    Returns
    -------
    (MCEstimate, MCEstimate)
        Estimates for the concurrence and the pseudo-concurrence.
    """
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    n_blocks = (n_samples + BLOCK_SIZE - 1) // BLOCK_SIZE
    lengths = [
        BLOCK_SIZE if i < n_blocks - 1 else n_samples - BLOCK_SIZE * (n_blocks - 1)
        for i in range(n_blocks)
    ]

    def run(i):
        return _block_moments(scenario, seed, stream_context, i, lengths[i], check_fraction)

    if workers == 1 or n_blocks == 1:
        results = [run(i) for i in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(n_blocks)))

    # ordered, exactly-rounded merge: identical for every worker count
    c_tot = math.fsum(r[0] for r in results)
    c2_tot = math.fsum(r[1] for r in results)
    cp_tot = math.fsum(r[2] for r in results)
    cp2_tot = math.fsum(r[3] for r in results)
    kept = sum(r[4] for r in results)
    discarded = sum(r[5] for r in results)
    if discarded > 1e-6 * n_samples:
        warnings.warn(
            f"{discarded} of {n_samples} samples discarded as degenerate "
            f"(rate {discarded / n_samples:.2e} exceeds 1e-6)",
            RuntimeWarning,
        )
    return (
        _to_estimate(c_tot, c2_tot, kept, discarded),
        _to_estimate(cp_tot, cp2_tot, kept, discarded),
    )


def sweep(scenario, n_values, n_samples, seed, workers=1, *, check_fraction=0.0):
    """Run `estimate` for every N in ``n_values``.

    Row N draws from streams derived from ``(seed, N)`` (the stream context
    is the row's N), so any row can be reproduced in isolation.
    """
    n_values = [int(n) for n in n_values]
    if not n_values:
        raise ValueError("n_values must be nonempty")
    if any(n < 1 for n in n_values):
        raise ValueError(f"all n_values must be >= 1, got {n_values}")
    rows = []
    for n in n_values:
        est_c, est_cp = estimate(
            scenario.with_n(n),
            n_samples,
            seed,
            workers,
            stream_context=n,
            check_fraction=check_fraction,
        )
        rows.append(SweepRow(n=n, c=est_c, cp=est_cp))
    return rows


def fit_decay(rows, model, measure="concurrence"):
    """Weighted least-squares decay fit on the log of the sweep means.

    Rows whose mean does not exceed 3x its standard error carry no usable
    signal and are excluded (and reported in the fit result).

    Parameters
    ----------
    rows : list of SweepRow
    model : {"exponential", "algebraic"}
        ``exponential`` fits ln mean = ln A + rate * N,
        ``algebraic`` fits ln mean = ln A + power * ln N.
    measure : {"concurrence", "pseudo"}
    """
    if model not in ("exponential", "algebraic"):
        raise ValueError(f"model must be 'exponential' or 'algebraic', got {model!r}")
    if measure not in ("concurrence", "pseudo"):
        raise ValueError(f"measure must be 'concurrence' or 'pseudo', got {measure!r}")
    picked = [(r.n, r.c if measure == "concurrence" else r.cp) for r in rows]
    usable = []
    excluded = []
    for n, e in picked:
        if e.mean > 3.0 * e.stderr and e.mean > 0.0:
            usable.append((n, e))
        else:
            excluded.append(n)
    excluded = tuple(excluded)
    if len(usable) < 3:
        raise InsufficientData(
            f"{len(usable)} usable rows (need >= 3); excluded N = {list(excluded)}"
        )
    ns = np.array([n for n, _ in usable], dtype=float)
    means = np.array([e.mean for _, e in usable])
    errs = np.array([e.stderr for _, e in usable])
    x = ns if model == "exponential" else np.log(ns)
    y = np.log(means)
    sigma = errs / means  # delta method for ln(mean)
    pos = sigma > 0.0
    if not pos.any():
        w = np.ones_like(y)
        sigma_eff = np.ones_like(y)
        exact = True
    else:
        floor = sigma[pos].min() * 1e-3
        sigma_eff = np.maximum(sigma, floor)
        w = 1.0 / sigma_eff
        exact = False
    coef, cov = np.polyfit(x, y, 1, w=w, cov="unscaled")
    resid = (y - np.polyval(coef, x)) / sigma_eff
    dof = len(usable) - 2
    if exact or dof <= 0:
        chi2_dof = math.nan
    else:
        chi2_dof = float(np.sum(resid**2) / dof)
    return DecayFit(
        model=model,
        rate_or_power=float(coef[0]),
        amplitude=float(math.exp(coef[1])),
        covariance=np.asarray(cov, dtype=float),
        n_range=(int(ns.min()), int(ns.max())),
        chi2_dof=chi2_dof,
        n_used=len(usable),
        n_excluded=len(excluded),
        excluded_n=excluded,
    )
