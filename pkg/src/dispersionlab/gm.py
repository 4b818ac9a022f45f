"""Gaussian deviation calculus for empirical types.

Covariance matrices of the Gaussian law that approximates a scaled type
deviation sqrt(n) * (empirical type - center): construction for a source and
for a conditional kernel, composition of deviations along memoryless channels
and along constant-composition code generators with an affine deviation map,
scalar pushforwards, reproducible sampling, and Gaussian orthant
probabilities in 1 to 4 dimensions.

All specs are immutable; sampling takes an explicit seed and is reentrant, so
concurrent callers only need distinct seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import DomainError, InvalidInputError, ShapeError, UnsupportedOperationError
from .probkit import (
    Alphabet,
    CondKernel,
    ProbVec,
    RealFunc,
    TangentVec,
    _align,
    _domain_shape,
    as_func,
)

SYM_TOL = 1e-12        # covariance symmetry tolerance
PSD_TOL = 1e-10        # eigenvalue floor for validation
FACTOR_TOL = 1e-8      # hard error threshold when factorizing for sampling
ORTHANT_SEED = 1905    # fixed scramble seed so QMC orthants are reproducible
ORTHANT_POINTS = 1 << 16


# ---------------------------------------------------------------------------
# spec types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, init=False)
class GaussianSpec:
    """Zero-mean-by-default Gaussian law on the cells of a product domain.

    ``cov`` is indexed by row-major raveling of the domain cells.  ``center``
    is the distribution whose tangent space the deviation lives in (a pmf
    over the domain, or kernel rows when ``row_axes > 0``); compositions need
    it.  ``row_axes`` counts leading conditioning axes: samples sum to zero
    over the trailing axes for each fixed conditioning cell.
    """

    domain: tuple[Alphabet, ...]
    cov: np.ndarray
    mean: np.ndarray
    center: np.ndarray          # shape = domain shape
    row_axes: int

    def __init__(self, domain, cov, mean=None, center=None, row_axes: int = 0):
        if isinstance(domain, Alphabet):
            domain = (domain,)
        domain = tuple(domain)
        n = int(np.prod(_domain_shape(domain)))
        cov = np.asarray(cov, dtype=float).reshape(n, n)
        if not np.all(np.isfinite(cov)):
            raise InvalidInputError("covariance entries must be finite")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYM_TOL * max(1.0, np.abs(cov).max(initial=0.0)):
            raise InvalidInputError("covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        scale = max(1.0, float(np.abs(cov).max(initial=0.0)))
        if np.linalg.eigvalsh(cov).min(initial=0.0) < -PSD_TOL * scale:
            raise InvalidInputError("covariance must be PSD up to roundoff")
        mean = np.zeros(n) if mean is None else np.asarray(mean, dtype=float).reshape(n)
        if center is None:
            center = np.full(_domain_shape(domain), np.nan)
        center = np.asarray(center, dtype=float).reshape(_domain_shape(domain))
        for arr in (cov, mean, center):
            arr.flags.writeable = False
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "cov", cov.copy())
        object.__setattr__(self, "mean", mean.copy())
        object.__setattr__(self, "center", center.copy())
        object.__setattr__(self, "row_axes", int(row_axes))
        self.cov.flags.writeable = False
        self.mean.flags.writeable = False
        self.center.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    def center_pmf(self) -> np.ndarray:
        if np.any(np.isnan(self.center)):
            raise InvalidInputError("spec carries no center distribution")
        return self.center


@dataclass(frozen=True, init=False)
class ScalarGaussianPair:
    """Jointly Gaussian zero-mean scalars (e.g. an information/distortion pair)."""

    labels: tuple[str, ...]
    cov: np.ndarray

    def __init__(self, labels, cov):
        labels = tuple(labels)
        k = len(labels)
        cov = np.asarray(cov, dtype=float).reshape(k, k)
        cov = 0.5 * (cov + cov.T)
        scale = max(1.0, float(np.abs(cov).max(initial=0.0)))
        if np.linalg.eigvalsh(cov).min(initial=0.0) < -PSD_TOL * scale:
            raise InvalidInputError("scalar covariance must be PSD")
        cov = cov.copy()
        cov.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def var(self, label: str) -> float:
        i = self.labels.index(label)
        return float(self.cov[i, i])


class OrthantProb(NamedTuple):
    value: float
    radius: float


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def nm_covariance(p: ProbVec) -> GaussianSpec:
    """Gaussian law of the scaled type deviation of an i.i.d. source.

    Covariance equals Var of the one-hot encoding: diag(p) - p p^T.
    """
    m = p.mass
    cov = np.diag(m) - np.outer(m, m)
    return GaussianSpec((p.alphabet,), cov, center=m, row_axes=0)


def nm_cond_covariance(k: CondKernel) -> GaussianSpec:
    """Stacked independent per-row deviations of a conditional kernel.

    Block-diagonal over conditioning cells; block x is the one-hot covariance
    of row x.  Cross-row covariances are zero.
    """
    n_rows, n_to = k.rows.shape
    cov = np.zeros((n_rows * n_to, n_rows * n_to))
    for r in range(n_rows):
        m = k.rows[r]
        sl = slice(r * n_to, (r + 1) * n_to)
        cov[sl, sl] = np.diag(m) - np.outer(m, m)
    return GaussianSpec(k.domain, cov, center=k.rows.reshape(_domain_shape(k.domain)),
                        row_axes=len(k.given))


def zero_deviation(p: ProbVec) -> GaussianSpec:
    """Deterministic (all-zero) deviation around ``p`` (constant composition)."""
    n = p.alphabet.size
    return GaussianSpec((p.alphabet,), np.zeros((n, n)), center=p.mass, row_axes=0)


# ---------------------------------------------------------------------------
# pushforward and composition
# ---------------------------------------------------------------------------

def _map_matrix(spec: GaussianSpec, maps) -> np.ndarray:
    rows = []
    for f in maps:
        ff = as_func(f)
        aligned = np.broadcast_to(_align(ff, spec.domain), _domain_shape(spec.domain))
        if np.any(np.isnan(aligned)):
            raise InvalidInputError("pushforward map contains sentinel (NaN) cells")
        rows.append(aligned.ravel())
    return np.asarray(rows)


def linear_pushforward(spec: GaussianSpec, maps, labels=None) -> ScalarGaussianPair:
    """Joint Gaussian of the inner products of the deviation with each map.

    ``cov_ij = f_i^T Sigma f_j``; for the deviation of an i.i.d. source the
    diagonal equals the per-letter variance of each map.
    """
    maps = list(maps)
    F = _map_matrix(spec, maps)
    if labels is None:
        labels = tuple(f"f{i}" for i in range(len(maps)))
    cov = F @ spec.cov @ F.T
    # roundoff can leave a tiny negative diagonal on degenerate directions
    cov[np.diag_indices_from(cov)] = np.maximum(np.diag(cov), 0.0)
    return ScalarGaussianPair(tuple(labels), cov)


def pushforward_mean(spec: GaussianSpec, maps) -> np.ndarray:
    """Means of the same inner products (nonzero only for offset deviations)."""
    return _map_matrix(spec, list(maps)) @ spec.mean


def compose_channel_deviation(spec_x: GaussianSpec, k: CondKernel) -> GaussianSpec:
    """Joint deviation of (input, output) across a memoryless channel.

    The output law is the law of ``A . k + sqrt(center) . B`` where ``A`` is
    the input deviation and ``B`` is the kernel deviation, independent.  With
    an i.i.d. input deviation this equals the one-hot covariance of the joint.
    """
    if k.given != spec_x.domain:
        raise ShapeError(f"kernel conditions on {k.given}, spec lives on {spec_x.domain}")
    cx = spec_x.center_pmf().ravel()
    n_x, n_y = k.rows.shape
    # first part: out[(x, y)] = A(x) k(y|x), linear in A
    M1 = np.zeros((n_x * n_y, n_x))
    for x in range(n_x):
        M1[x * n_y:(x + 1) * n_y, x] = k.rows[x]
    cov = M1 @ spec_x.cov @ M1.T
    mean = M1 @ spec_x.mean
    # second part: out[(x, y)] = sqrt(cx(x)) B(y|x), independent across x
    for x in range(n_x):
        m = k.rows[x]
        sl = slice(x * n_y, (x + 1) * n_y)
        cov[sl, sl] += cx[x] * (np.diag(m) - np.outer(m, m))
    domain = spec_x.domain + (k.to,)
    center = np.einsum("i,ij->ij", cx, k.rows).reshape(_domain_shape(domain))
    return GaussianSpec(domain, cov, mean=mean, center=center, row_axes=0)


@dataclass(frozen=True, init=False)
class AffineDeviationMap:
    """Affine map from input-type deviations into the tangent space of a kernel.

    ``apply(v) = matrix @ v + offset`` with cells of the kernel raveled
    row-major.  Validated so that every tangent input lands in the tangent
    space of ``kernel`` (rows sum to zero, support dominated).
    """

    kernel: CondKernel
    input_alphabet: Alphabet
    matrix: np.ndarray   # (n_rows * n_to, n_in)
    offset: np.ndarray   # (n_rows * n_to,)

    def __init__(self, kernel: CondKernel, input_alphabet: Alphabet, matrix, offset=None):
        n_cells = kernel.rows.size
        n_in = input_alphabet.size
        matrix = np.asarray(matrix, dtype=float).reshape(n_cells, n_in)
        offset = (np.zeros(n_cells) if offset is None
                  else np.asarray(offset, dtype=float).reshape(n_cells))
        # offset and every column image must be valid tangent matrices
        TangentVec(kernel, offset.reshape(kernel.rows.shape))
        for j in range(n_in):
            TangentVec(kernel, matrix[:, j].reshape(kernel.rows.shape))
        matrix = matrix.copy()
        offset = offset.copy()
        matrix.flags.writeable = False
        offset.flags.writeable = False
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "input_alphabet", input_alphabet)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "offset", offset)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(v, dtype=float).ravel() + self.offset).reshape(
            self.kernel.rows.shape
        )

    @classmethod
    def zero(cls, kernel: CondKernel, input_alphabet: Alphabet) -> "AffineDeviationMap":
        return cls(kernel, input_alphabet, np.zeros((kernel.rows.size, input_alphabet.size)))

    @classmethod
    def scaled_direction(cls, direction: TangentVec, weights: np.ndarray,
                         input_alphabet: Alphabet) -> "AffineDeviationMap":
        """Map ``v -> <weights, v> * direction`` (rank-one linear map)."""
        kernel = direction.base
        if not isinstance(kernel, CondKernel):
            raise InvalidInputError("direction must be tangent to a kernel")
        w = np.asarray(weights, dtype=float).reshape(input_alphabet.size)
        return cls(kernel, input_alphabet, np.outer(direction.delta.ravel(), w))


def compose_gcc_deviation(spec_x: GaussianSpec, k: CondKernel, zeta) -> GaussianSpec:
    """Joint deviation of (input, codeword) for a constant-composition code
    generator whose conditional type tracks an affine deviation map.

    The joint deviation is ``A . k + center_x . zeta(A)``; nonlinear maps are
    outside this evaluator (they are handled by sampling in simlab).
    """
    if len(spec_x.domain) != 1:
        raise ShapeError("gcc composition expects a single-factor input deviation")
    if k.given != spec_x.domain:
        raise ShapeError(f"kernel conditions on {k.given}, spec lives on {spec_x.domain}")
    if zeta is None:
        zeta = AffineDeviationMap.zero(k, spec_x.domain[0])
    if not isinstance(zeta, AffineDeviationMap):
        raise UnsupportedOperationError(
            "only affine deviation maps are supported here; sample nonlinear maps instead"
        )
    if zeta.kernel is not k and not np.array_equal(zeta.kernel.rows, k.rows):
        raise ShapeError("deviation map is tangent to a different kernel")
    cx = spec_x.center_pmf().ravel()
    n_x, n_u = k.rows.shape
    M1 = np.zeros((n_x * n_u, n_x))
    for x in range(n_x):
        M1[x * n_u:(x + 1) * n_u, x] = k.rows[x]
    # center_x . zeta(A): cell (x, u) gets cx(x) * zeta(A)(u|x)
    P = np.repeat(cx, n_u)[:, None]
    L = M1 + P * zeta.matrix
    cov = L @ spec_x.cov @ L.T
    mean = L @ spec_x.mean + P.ravel() * zeta.offset
    domain = spec_x.domain + (k.to,)
    center = np.einsum("i,ij->ij", cx, k.rows).reshape(_domain_shape(domain))
    return GaussianSpec(domain, cov, mean=mean, center=center, row_axes=0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric factor A with A A^T = cov; negative eigenvalues clipped at 0.

    Tangent covariances are always rank-deficient, so eigendecomposition with
    clipping is used instead of Cholesky.  Eigenvalues below -FACTOR_TOL are
    a hard error.
    """
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    scale = max(1.0, float(np.abs(cov).max(initial=0.0)))
    if w.min(initial=0.0) < -FACTOR_TOL * scale:
        raise InvalidInputError(f"covariance has eigenvalue {w.min()} < -{FACTOR_TOL}")
    # zero out near-null directions so rank-deficient tangent covariances
    # produce samples that satisfy the zero-row-sum constraint exactly
    w = np.where(w < 1e-13 * scale, 0.0, w)
    return v * np.sqrt(w)


def sample_gaussian(spec: GaussianSpec, seed: int, count: int) -> np.ndarray:
    """``count`` reproducible draws, shape (count, dim)."""
    rng = np.random.default_rng(seed)
    A = _psd_factor(spec.cov)
    z = rng.standard_normal((count, spec.dim))
    return spec.mean + z @ A.T


def sample_scalar_pair(pair: ScalarGaussianPair, seed: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    A = _psd_factor(pair.cov)
    return rng.standard_normal((count, pair.dim)) @ A.T


# ---------------------------------------------------------------------------
# orthant probabilities
# ---------------------------------------------------------------------------

_GL_6 = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970]),
)
_GL_12 = (
    np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
              0.2031674267230659, 0.2334925365383547, 0.2491470458134029]),
    np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
              0.5873179542866171, 0.3678314989981802, 0.1252334085114692]),
)
_GL_20 = (
    np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
              0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
              0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
              0.1527533871307259]),
    np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
              0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
              0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
              0.07652652113349733]),
)


def _bvn_upper(dh: float, dk: float, r: float) -> float:
    """P(X > dh, Y > dk) for standard bivariate normal with correlation r.

    Gauss-Legendre on the correlation integral, with the transformed
    high-correlation form when |r| > 0.925; absolute error below 5e-16.
    """
    if math.isinf(dh) or math.isinf(dk):
        if dh == math.inf or dk == math.inf:
            return 0.0
        if dh == -math.inf:
            return float(ndtr(-dk)) if dk > -math.inf else 1.0
        return float(ndtr(-dh))
    if abs(r) < 0.3:
        w, x = _GL_6
    elif abs(r) < 0.75:
        w, x = _GL_12
    else:
        w, x = _GL_20
    h, k = dh, dk
    hk = h * k
    bvn = 0.0
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r)
        for wi, xi in zip(w, x):
            for sgn in (-1.0, 1.0):
                sn = math.sin(asr * (sgn * xi + 1.0) / 2.0)
                bvn += wi * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / (4.0 * math.pi) + ndtr(-h) * ndtr(-k)
    else:
        twopi = 2.0 * math.pi
        if r < 0.0:
            k = -k
            hk = -hk
        if abs(r) < 1.0:
            ass = (1.0 - r) * (1.0 + r)
            a = math.sqrt(ass)
            bs = (h - k) ** 2
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 16.0
            asr = -(bs / ass + hk) / 2.0
            if asr > -100.0:
                bvn = a * math.exp(asr) * (1.0 - c * (bs - ass) * (1.0 - d * bs / 5.0) / 3.0
                                           + c * d * ass * ass / 5.0)
            if -hk < 100.0:
                b = math.sqrt(bs)
                sp = math.sqrt(twopi) * ndtr(-b / a)
                bvn -= math.exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            a = a / 2.0
            for wi, xi in zip(w, x):
                for sgn in (-1.0, 1.0):
                    xs = (a * (sgn * xi + 1.0)) ** 2
                    rs = math.sqrt(1.0 - xs)
                    asr = -(bs / xs + hk) / 2.0
                    if asr > -100.0:
                        sp = 1.0 + c * xs * (1.0 + d * xs)
                        ep = math.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                        bvn += a * wi * math.exp(asr) * (ep - sp)
            bvn = -bvn / twopi
        if r > 0.0:
            bvn += ndtr(-max(h, k))
        else:
            bvn = -bvn
            if k > h:
                bvn += ndtr(k) - ndtr(h)
    return float(min(max(bvn, 0.0), 1.0))


def bivariate_normal_cdf(b1: float, b2: float, rho: float) -> float:
    """P(Z1 <= b1, Z2 <= b2) for standard normals with correlation rho."""
    rho = min(max(rho, -1.0), 1.0)
    if rho == 1.0:
        return float(ndtr(min(b1, b2)))
    if rho == -1.0:
        return float(max(0.0, ndtr(b1) + ndtr(b2) - 1.0))
    return _bvn_upper(-b1, -b2, rho)


def _qmc_orthant(cov: np.ndarray, upper: np.ndarray, points: int, seed: int) -> OrthantProb:
    """Scrambled-Sobol separation-of-variables estimate of P(Z <= upper).

    Runs 8 independently scrambled batches; radius is the standard error of
    the batch means.
    """
    d = cov.shape[0]
    scale = float(np.abs(np.diag(cov)).max(initial=1.0))
    L = np.linalg.cholesky(cov + (1e-10 * scale) * np.eye(d))
    n_batches = 8
    per = max(points // n_batches, 2)
    means = []
    tiny = 1e-15
    for b in range(n_batches):
        sob = qmc.Sobol(d=max(d - 1, 1), scramble=True, seed=seed + 7919 * b)
        u = sob.random(per)
        f = np.full(per, ndtr(upper[0] / L[0, 0]))
        y = np.zeros((per, d))
        e_prev = f.copy()
        for i in range(1, d):
            y[:, i - 1] = ndtri(np.clip(u[:, i - 1] * e_prev, tiny, 1.0 - tiny))
            num = upper[i] - y[:, :i] @ L[i, :i]
            e_prev = ndtr(num / L[i, i])
            f = f * e_prev
        means.append(f.mean())
    means = np.asarray(means)
    value = float(np.clip(means.mean(), 0.0, 1.0))
    radius = float(means.std(ddof=1) / math.sqrt(n_batches))
    return OrthantProb(value, radius)


def gaussian_orthant(pair: ScalarGaussianPair, upper, points: int = ORTHANT_POINTS,
                     seed: int = ORTHANT_SEED) -> OrthantProb:
    """P(Z_i <= upper_i for all i) for a zero-mean Gaussian vector.

    Dimensions 1-2 use deterministic quadrature (absolute error <= 1e-10);
    dimensions 3-4 use scrambled QMC and report a standard-error radius.
    Zero-variance coordinates are resolved deterministically against their
    (zero) mean before integration.
    """
    upper = np.asarray(upper, dtype=float).ravel()
    cov = np.array(pair.cov, dtype=float)
    if upper.shape[0] != cov.shape[0]:
        raise ShapeError("threshold vector length must match dimension")
    if cov.shape[0] > 4:
        raise UnsupportedOperationError("orthant probabilities supported up to dimension 4")
    scale = float(np.abs(np.diag(cov)).max(initial=0.0))
    degenerate = np.diag(cov) <= 1e-14 * max(scale, 1.0)
    if np.any(degenerate):
        if np.any(upper[degenerate] < 0.0):
            return OrthantProb(0.0, 0.0)
        keep = ~degenerate
        if not np.any(keep):
            return OrthantProb(1.0, 0.0)
        cov = cov[np.ix_(keep, keep)]
        upper = upper[keep]
    d = cov.shape[0]
    sd = np.sqrt(np.diag(cov))
    if d == 1:
        return OrthantProb(float(ndtr(upper[0] / sd[0])), 0.0)
    if d == 2:
        rho = float(cov[0, 1] / (sd[0] * sd[1]))
        return OrthantProb(bivariate_normal_cdf(upper[0] / sd[0], upper[1] / sd[1], rho), 1e-10)
    return _qmc_orthant(cov, upper, points, seed)


def q_function(x: float) -> float:
    """Standard normal upper tail probability."""
    return float(ndtr(-x))


def q_inverse(t: float) -> float:
    if not 0.0 < t < 1.0:
        raise DomainError("Q^{-1} requires an argument in (0, 1)")
    return float(-ndtri(t))
