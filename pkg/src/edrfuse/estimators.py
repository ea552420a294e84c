"""Beat-wise respiratory surrogates and their 10 Hz interpolants.

Every estimator turns per-beat information into a value sequence attached to
beat instants: R-S amplitude differences, projections onto beat-matrix
covariance eigenvectors, kernel-eigenvector coordinates of a self-tuned
affinity graph, cross-lead singular projections, and eigenvectors of
products and averages of the two leads' Markov kernels.  A driver runs the
whole family and splines each result onto the shared 10 Hz grid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import eig, eigh
from scipy.sparse.linalg import eigs, eigsh
from scipy.spatial.distance import pdist, squareform

from .preprocess import ECG_RATE, BeatSet, PreprocessedEcg, QrsMatrix
from .signalcore import (
    DegenerateDataError,
    InsufficientDataError,
    SampledSignal,
    TimedSeries,
    spline_interpolate,
)

EDR_RATE = 10.0
DEFAULT_COMPONENTS = 5
# below this size dense LAPACK beats ARPACK on wall time and robustness
DENSE_EIG_CUTOFF = 600
RESIDUAL_TOL = 1e-8
IMAG_FLAG_TOL = 1e-6


@dataclass(frozen=True)
class KernelSet:
    """Self-tuned affinity graph of one beat matrix and its normalizations."""

    affinity: np.ndarray        # symmetric, unit diagonal, entries in (0, 1]
    bandwidths: np.ndarray      # per-row median squared distances
    affinity_norm: np.ndarray   # affinity divided by row degrees on both sides
    degree_norm: np.ndarray     # row sums of affinity_norm
    isotropic: np.ndarray       # symmetric conjugation of affinity_norm
    markov: np.ndarray          # row-stochastic kernel

    @property
    def n_beats(self) -> int:
        return self.affinity.shape[0]


@dataclass(frozen=True)
class EdrEstimate:
    """One respiratory surrogate: knots at beat instants plus its 10 Hz spline."""

    method: str                 # trad | pca | dm | cca | ad_re | ad_im | ad_sym | dl
    lead: str                   # "1", "2", or "joint"
    component: int | None
    knots: TimedSeries
    series10: np.ndarray | None = None
    degenerate: bool = False
    flags: tuple[str, ...] = ()

    @property
    def label(self) -> str:
        parts = [self.method, self.lead]
        if self.component is not None:
            parts.append(str(self.component))
        return "/".join(parts)


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs returned by one of the solvers, sorted by the caller's rule."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # one eigenvector per column

    def residuals(self, matrix: np.ndarray) -> np.ndarray:
        r = matrix @ self.eigenvectors - self.eigenvectors * self.eigenvalues[None, :]
        return np.linalg.norm(r, axis=0)


def _check_residuals(basis: SpectralBasis, matrix: np.ndarray) -> None:
    scale = np.linalg.norm(matrix, 2) if matrix.shape[0] <= DENSE_EIG_CUTOFF else np.linalg.norm(matrix, "fro")
    bad = basis.residuals(matrix) > RESIDUAL_TOL * max(scale, 1e-300)
    if bad.any():
        worst = float(basis.residuals(matrix).max())
        raise DegenerateDataError(f"eigensolver failed to converge: residual {worst:.3e}")


def _arpack_v0(n: int) -> np.ndarray:
    # fixed pseudo-random start keeps the iterative solvers deterministic
    return np.random.default_rng(0).standard_normal(n)


def _orient(v: np.ndarray) -> np.ndarray:
    """Resolve sign (real) or phase (complex) so the largest entry is real positive."""
    i = int(np.argmax(np.abs(v)))
    if v[i] == 0:
        return v
    if np.iscomplexobj(v):
        return v * (np.conj(v[i]) / np.abs(v[i]))
    return -v if v[i] < 0 else v


def _unit(v: np.ndarray) -> np.ndarray:
    nv = np.linalg.norm(v)
    return v if nv == 0 else v / nv


def _top_symmetric(matrix: np.ndarray, k: int) -> SpectralBasis:
    """Largest-eigenvalue pairs of a symmetric matrix, descending."""
    n = matrix.shape[0]
    if n <= DENSE_EIG_CUTOFF or k >= n - 1:
        vals, vecs = eigh(matrix)
        order = np.argsort(vals, kind="stable")[::-1][:k]
    else:
        vals, vecs = eigsh(matrix, k=k, which="LA", v0=_arpack_v0(n))
        order = np.argsort(vals, kind="stable")[::-1]
    basis = SpectralBasis(vals[order], vecs[:, order])
    _check_residuals(basis, matrix)
    return basis


def _top_hermitian_magnitude(matrix: np.ndarray, k: int) -> SpectralBasis:
    """Largest-|eigenvalue| pairs of a Hermitian matrix, descending magnitude."""
    n = matrix.shape[0]
    if n <= DENSE_EIG_CUTOFF or k >= n - 1:
        vals, vecs = eigh(matrix)
        order = np.argsort(np.abs(vals), kind="stable")[::-1][:k]
    else:
        vals, vecs = eigsh(matrix, k=k, which="LM", v0=_arpack_v0(n))
        order = np.argsort(np.abs(vals), kind="stable")[::-1]
    basis = SpectralBasis(vals[order], vecs[:, order])
    _check_residuals(basis, matrix)
    return basis


def _top_real_part(matrix: np.ndarray, k: int) -> SpectralBasis:
    """Largest-real-part eigenpairs of a general real matrix, descending.

    Ties keep the solver's own eigenvector order.
    """
    n = matrix.shape[0]
    if n <= DENSE_EIG_CUTOFF or k >= n - 2:
        vals, vecs = eig(matrix)
    else:
        try:
            vals, vecs = eigs(matrix, k=k, which="LR", v0=_arpack_v0(n))
        except Exception:
            vals, vecs = eig(matrix)
    order = np.argsort(-vals.real, kind="stable")[:k]
    basis = SpectralBasis(vals[order], vecs[:, order])
    _check_residuals(basis, matrix)
    return basis


def build_kernels(qrs: QrsMatrix) -> KernelSet:
    """Self-tuned Gaussian affinity over beats and its normalized kernels.

    The bandwidth of row i is the median squared Euclidean distance from
    beat i to every other beat, and each pairwise affinity averages the two
    rows' bandwidth kernels, which keeps the matrix symmetric.  Degrees are
    divided out of both sides once (removing density effects), and the result
    is turned into a symmetric kernel and a row-stochastic one.
    """
    rows = qrs.values
    n = rows.shape[0]
    if n < 2:
        raise InsufficientDataError("insufficient beats: need at least 2")
    d2 = squareform(pdist(rows, "sqeuclidean"))
    if not np.any(d2 > 0):
        raise DegenerateDataError("degenerate point cloud: all beats identical")
    bw = np.empty(n)
    for i in range(n):
        others = np.delete(d2[i], i)
        s = float(np.median(others))
        if s <= 0:
            pos = others[others > 0]
            if pos.size == 0:
                raise DegenerateDataError("degenerate point cloud: all beats identical")
            s = float(pos.min())
        bw[i] = s
    half = np.exp(-d2 / bw[:, None])
    affinity = 0.5 * half + 0.5 * half.T
    degree = affinity.sum(axis=1)
    affinity_norm = affinity / degree[:, None] / degree[None, :]
    degree_norm = affinity_norm.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degree_norm)
    isotropic = affinity_norm * inv_sqrt[:, None] * inv_sqrt[None, :]
    markov = affinity_norm / degree_norm[:, None]
    return KernelSet(affinity, bw, affinity_norm, degree_norm, isotropic, markov)


def edr_traditional(lead: SampledSignal, beats: BeatSet, lead_idx: int) -> EdrEstimate:
    """R-minus-S amplitude per beat, the classic single-number surrogate."""
    r = beats.r_peaks[lead_idx]
    s = beats.s_peaks[lead_idx]
    if r.size == 0:
        raise InsufficientDataError("no usable beats")
    values = lead.samples[r] - lead.samples[s]
    knots = TimedSeries(r / lead.rate, values)
    return EdrEstimate("trad", str(lead_idx + 1), None, knots)


def edr_pca(qrs: QrsMatrix, count: int = DEFAULT_COMPONENTS) -> list[EdrEstimate]:
    """Projections of raw beat rows onto top covariance eigenvectors.

    Eigenvectors beyond the covariance rank yield all-zero series flagged as
    degenerate, so the pool keeps a fixed column count.
    """
    x = qrs.values
    n = x.shape[0]
    if n < 3:
        raise InsufficientDataError("insufficient beats: need at least 3")
    times = qrs.beat_times()
    cov = np.cov(x, rowvar=False)
    vals, vecs = eigh(cov)
    order = np.argsort(vals, kind="stable")[::-1]
    floor = max(float(vals[order[0]]), 0.0) * 1e-12
    out = []
    for j in range(count):
        if j < order.size and vals[order[j]] > floor:
            p = _orient(vecs[:, order[j]])
            series = x @ p
            degenerate = False
        else:
            series = np.zeros(n)
            degenerate = True
        out.append(
            EdrEstimate("pca", qrs.lead, j + 1, TimedSeries(times, series), degenerate=degenerate)
        )
    return out


def edr_diffusion_maps(
    kernels: KernelSet,
    beat_times: np.ndarray,
    lead: str,
    count: int = DEFAULT_COMPONENTS,
) -> list[EdrEstimate]:
    """Leading nontrivial kernel eigenvector coordinates per beat.

    Eigenvectors of the symmetric kernel are computed, the single trivial one
    is skipped, and each remaining vector is mapped back through the degree
    scaling so the coordinates correspond to the row-stochastic kernel.
    """
    n = kernels.n_beats
    if n < count + 2:
        raise InsufficientDataError("insufficient beats for the requested components")
    basis = _top_symmetric(kernels.isotropic, count + 1)
    if basis.eigenvalues.size > 1 and basis.eigenvalues[1] >= 1.0 - 1e-10:
        raise DegenerateDataError("disconnected affinity graph")
    scale = 1.0 / np.sqrt(kernels.degree_norm)
    out = []
    for j in range(1, count + 1):
        vec = _orient(_unit(scale * basis.eigenvectors[:, j]))
        out.append(EdrEstimate("dm", lead, j, TimedSeries(beat_times, vec)))
    return out


def edr_cca(
    qrs1: QrsMatrix, qrs2: QrsMatrix, count: int = DEFAULT_COMPONENTS
) -> list[EdrEstimate]:
    """Per-lead projections onto the singular directions of the cross matrix.

    The left and right singular vectors of ``X1' X2`` give one projection
    series per lead and component.  Each pair is sign-fixed jointly (flipping
    both sides preserves the decomposition).
    """
    x1 = qrs1.values
    x2 = qrs2.values
    if x1.shape[0] != x2.shape[0]:
        raise ValueError("beat matrices must pair the same beats")
    if x1.shape[0] < 3:
        raise InsufficientDataError("insufficient beats: need at least 3")
    if count > x1.shape[1]:
        raise ValueError("more components than beat-window columns")
    cross = x1.T @ x2
    u, _, vt = np.linalg.svd(cross)
    t1 = qrs1.beat_times()
    t2 = qrs2.beat_times()
    first, second = [], []
    for j in range(count):
        uj = u[:, j]
        vj = vt[j]
        i = int(np.argmax(np.abs(uj)))
        if uj[i] < 0:
            uj = -uj
            vj = -vj
        first.append(EdrEstimate("cca", qrs1.lead, j + 1, TimedSeries(t1, x1 @ uj)))
        second.append(EdrEstimate("cca", qrs2.lead, j + 1, TimedSeries(t2, x2 @ vj)))
    return first + second


def edr_alternating_diffusion(
    k1: KernelSet,
    k2: KernelSet,
    joint_times: np.ndarray,
    count: int = DEFAULT_COMPONENTS,
) -> list[EdrEstimate]:
    """Estimates from the product of the two leads' Markov kernels.

    The product is split into its antisymmetric and symmetric parts.  The
    antisymmetric part is diagonalized through the equivalent Hermitian
    problem; one eigenvector per conjugate pair (the positive-imaginary-part
    representative) contributes its real and imaginary coordinates.  The
    symmetric part contributes its top eigenvectors directly.  A vanishing
    antisymmetric part (identical kernels) yields zero series flagged as
    degenerate rather than noise.
    """
    if k1.n_beats != k2.n_beats:
        raise ValueError("kernel sets must pair the same beats")
    n = k1.n_beats
    if n < 2 * count:
        raise InsufficientDataError("insufficient beats for the requested components")
    cross = k1.markov @ k2.markov.T
    sym = cross + cross.T
    anti = cross - cross.T

    sym_basis = _top_symmetric(sym, count)
    sym_out = []
    for j in range(count):
        vec = _orient(_unit(sym_basis.eigenvectors[:, j]))
        sym_out.append(EdrEstimate("ad_sym", "joint", j + 1, TimedSeries(joint_times, vec)))

    re_out, im_out = [], []
    anti_scale = np.linalg.norm(anti, "fro")
    if anti_scale <= 1e-12 * max(np.linalg.norm(sym, "fro"), 1e-300):
        zero = np.zeros(n)
        for j in range(count):
            re_out.append(
                EdrEstimate("ad_re", "joint", j + 1, TimedSeries(joint_times, zero), degenerate=True)
            )
            im_out.append(
                EdrEstimate("ad_im", "joint", j + 1, TimedSeries(joint_times, zero), degenerate=True)
            )
    else:
        hermitian = 1j * anti
        basis = _top_hermitian_magnitude(hermitian, 2 * count)
        # eigenvalue mu of the Hermitian problem maps to -i*mu for the
        # antisymmetric matrix, so mu < 0 marks the positive-imaginary-part
        # representative of each conjugate pair
        neg = np.flatnonzero(basis.eigenvalues < 0)
        for j in range(count):
            if j < neg.size:
                vec = _orient(basis.eigenvectors[:, neg[j]])
                re_out.append(
                    EdrEstimate("ad_re", "joint", j + 1, TimedSeries(joint_times, vec.real))
                )
                im_out.append(
                    EdrEstimate("ad_im", "joint", j + 1, TimedSeries(joint_times, vec.imag))
                )
            else:
                zero = np.zeros(n)
                re_out.append(
                    EdrEstimate("ad_re", "joint", j + 1, TimedSeries(joint_times, zero), degenerate=True)
                )
                im_out.append(
                    EdrEstimate("ad_im", "joint", j + 1, TimedSeries(joint_times, zero), degenerate=True)
                )
    return re_out + im_out + sym_out


def edr_dynamic_laplacian(
    k1: KernelSet,
    k2: KernelSet,
    joint_times: np.ndarray,
    count: int = DEFAULT_COMPONENTS,
) -> list[EdrEstimate]:
    """Nontrivial right eigenvectors of the averaged Markov kernel.

    The average of two row-stochastic kernels is row-stochastic, so its top
    eigenvector is constant and gets skipped.  Eigenvalues are ordered by
    descending real part; numerically complex vectors contribute their real
    part and are flagged.
    """
    if k1.n_beats != k2.n_beats:
        raise ValueError("kernel sets must pair the same beats")
    n = k1.n_beats
    if n < count + 2:
        raise InsufficientDataError("insufficient beats for the requested components")
    averaged = 0.5 * (k1.markov + k2.markov)
    basis = _top_real_part(averaged, count + 1)
    out = []
    for j in range(1, count + 1):
        vec = basis.eigenvectors[:, j]
        flags = ()
        imag_norm = float(np.linalg.norm(vec.imag)) if np.iscomplexobj(vec) else 0.0
        if imag_norm > IMAG_FLAG_TOL * max(float(np.linalg.norm(vec)), 1e-300):
            flags = ("complex-eigenvector",)
        real = vec.real if np.iscomplexobj(vec) else vec
        real = _orient(_unit(real.copy()))
        out.append(EdrEstimate("dl", "joint", j, TimedSeries(joint_times, real), flags=flags))
    return out


def interpolate_to_10hz(estimate: EdrEstimate, duration: float) -> EdrEstimate:
    """Spline the knot series onto the shared grid ``i / 10`` for ``i < floor(10 T)``.

    Grid points outside the knot span stay null.
    """
    m = int(np.floor(EDR_RATE * duration))
    grid = np.arange(m) / EDR_RATE
    series = spline_interpolate(estimate.knots, grid)
    return replace(estimate, series10=series)


def compute_estimates(
    pre: PreprocessedEcg, components: int = DEFAULT_COMPONENTS
) -> list[EdrEstimate]:
    """Run every estimator the record supports and interpolate all of them.

    A two-lead record yields ``2*(1 + 2*components) + 6*components`` series
    (52 at the default count); one lead yields ``1 + 2*components`` (11).
    """
    if components < 1:
        raise ValueError("components must be at least 1")
    record, beats, qrs = pre.record, pre.beats, pre.qrs
    estimates: list[EdrEstimate] = []
    kernel_sets = []
    for k, (lead, q) in enumerate(zip(record.leads, qrs)):
        estimates.append(edr_traditional(lead, beats, k))
        estimates.extend(edr_pca(q, components))
        kern = build_kernels(q)
        kernel_sets.append(kern)
        estimates.extend(edr_diffusion_maps(kern, q.beat_times(), q.lead, components))
    if record.n_leads == 2:
        joint_times = (beats.r_peaks[0] + beats.r_peaks[1]) / (2.0 * ECG_RATE)
        estimates.extend(edr_cca(qrs[0], qrs[1], components))
        estimates.extend(
            edr_alternating_diffusion(kernel_sets[0], kernel_sets[1], joint_times, components)
        )
        estimates.extend(
            edr_dynamic_laplacian(kernel_sets[0], kernel_sets[1], joint_times, components)
        )
    return [interpolate_to_10hz(e, record.duration) for e in estimates]
