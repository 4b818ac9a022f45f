"""Exact finite-alphabet probability algebra.

Distributions, conditional kernels, empirical types, semidirect products,
generalized inner products, tangent spaces, and information functionals in
bits.  Every object is immutable after construction and every operation is a
pure function, so values are safe to share across concurrent tasks.

Conventions
-----------
* All logarithms are base 2; entropies and information densities are in bits.
* A product domain is an ordered tuple of :class:`Alphabet` objects.  Two
  functions are aligned factor-by-factor using alphabet equality, so distinct
  random variables over the same symbol set must use distinctly *named*
  alphabets (e.g. ``Alphabet(("0", "1"), name="X")`` vs ``name="Y"``).
* When one operand lives on a smaller product domain, its values broadcast
  over the missing factors ("domain extension").
* Information densities at zero-probability cells are stored as NaN
  sentinels.  They are never read by :func:`inner` under a measure that
  dominates them; reading one under a non-dominated measure is an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError

MASS_TOL = 1e-12       # normalization tolerance for pmfs and kernel rows
TANGENT_TOL = 1e-10    # per-row zero-sum tolerance for tangent vectors


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Alphabet:
    """Finite ordered symbol set; the ordering fixes the index map everywhere.

    ``name`` distinguishes random variables that share a symbol set: factors
    of a product domain are matched by full equality (symbols and name).
    """

    symbols: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if len(symbols) == 0:
            raise InvalidInputError("alphabet must contain at least one symbol")
        if len(set(symbols)) != len(symbols):
            raise InvalidInputError(f"alphabet symbols must be unique, got {symbols}")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol) -> int:
        try:
            return self.symbols.index(str(symbol))
        except ValueError:
            raise InvalidInputError(
                f"symbol {symbol!r} not in alphabet {self.name or self.symbols}"
            ) from None

    def __repr__(self):
        label = self.name or ",".join(self.symbols)
        return f"Alphabet({label}:{self.size})"


def product_alphabet(*parts: Alphabet, name: str = "") -> Alphabet:
    """Alphabet over the Cartesian product, symbol labels joined with '*'."""
    syms = [""]
    for i, a in enumerate(parts):
        syms = [f"{s}*{t}" if i else t for s in syms for t in a.symbols]
    return Alphabet(tuple(syms), name=name or "*".join(p.name or "?" for p in parts))


def _domain_shape(domain: tuple[Alphabet, ...]) -> tuple[int, ...]:
    return tuple(a.size for a in domain)


def _check_distinct(domain: tuple[Alphabet, ...]):
    if len(set(domain)) != len(domain):
        raise ShapeError(f"product domain has repeated factors: {domain}")


@dataclass(frozen=True, init=False)
class ProbVec:
    """Probability mass function over a finite alphabet."""

    alphabet: Alphabet
    mass: np.ndarray

    def __init__(self, alphabet: Alphabet, mass, renormalize: bool = False):
        mass = np.asarray(mass, dtype=float)
        if mass.shape != (alphabet.size,):
            raise ShapeError(f"mass has shape {mass.shape}, expected ({alphabet.size},)")
        if np.any(mass < -MASS_TOL) or not np.all(np.isfinite(mass)):
            raise InvalidInputError("probability masses must be finite and >= 0")
        mass = np.maximum(mass, 0.0)
        total = mass.sum()
        if abs(total - 1.0) > MASS_TOL:
            if renormalize and total > 0:
                mass = mass / total
            else:
                raise InvalidInputError(f"mass sums to {total!r}, not 1")
        mass = mass.copy()
        mass.flags.writeable = False
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "mass", mass)

    @property
    def support(self) -> np.ndarray:
        """Indices of symbols with strictly positive mass."""
        return np.flatnonzero(self.mass > 0)

    def prob(self, symbol) -> float:
        return float(self.mass[self.alphabet.index(symbol)])

    def as_func(self) -> "RealFunc":
        return RealFunc((self.alphabet,), self.mass)

    def to_json_dict(self) -> dict:
        return {"alphabet": list(self.alphabet.symbols), "values": self.mass.tolist()}

    @classmethod
    def from_json_dict(cls, obj: dict, name: str = "") -> "ProbVec":
        alph = Alphabet(tuple(obj["alphabet"]), name=name or obj.get("name", ""))
        return cls(alph, np.asarray(obj["values"], dtype=float))


@dataclass(frozen=True, init=False)
class CondKernel:
    """Conditional pmf from a (possibly product) domain to one alphabet.

    ``rows`` has shape ``(prod(given sizes), to.size)``, row-major over the
    conditioning factors; every row is a pmf.
    """

    given: tuple[Alphabet, ...]
    to: Alphabet
    rows: np.ndarray

    def __init__(self, given, to: Alphabet, rows, renormalize: bool = False):
        if isinstance(given, Alphabet):
            given = (given,)
        given = tuple(given)
        _check_distinct(given + (to,))
        n_rows = int(np.prod([a.size for a in given]))
        rows = np.asarray(rows, dtype=float).reshape(n_rows, to.size)
        if np.any(rows < -MASS_TOL) or not np.all(np.isfinite(rows)):
            raise InvalidInputError("kernel entries must be finite and >= 0")
        rows = np.maximum(rows, 0.0)
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > MASS_TOL):
            if renormalize and np.all(sums > 0):
                rows = rows / sums[:, None]
            else:
                bad = int(np.argmax(np.abs(sums - 1.0)))
                raise InvalidInputError(f"kernel row {bad} sums to {sums[bad]!r}")
        rows = rows.copy()
        rows.flags.writeable = False
        object.__setattr__(self, "given", given)
        object.__setattr__(self, "to", to)
        object.__setattr__(self, "rows", rows)

    @property
    def from_alphabet(self) -> Alphabet:
        if len(self.given) != 1:
            raise ShapeError("kernel conditions on a product domain")
        return self.given[0]

    @property
    def domain(self) -> tuple[Alphabet, ...]:
        return self.given + (self.to,)

    def row(self, idx: int) -> ProbVec:
        return ProbVec(self.to, self.rows[idx])

    def as_func(self) -> "RealFunc":
        return RealFunc(self.domain, self.rows.reshape(_domain_shape(self.domain)))

    def to_json_dict(self) -> dict:
        alph = [list(a.symbols) for a in self.given] + [list(self.to.symbols)]
        return {"alphabet": alph, "values": self.rows.ravel().tolist()}

    @classmethod
    def from_json_dict(cls, obj: dict, names: tuple[str, ...] = ()) -> "CondKernel":
        alphs = obj["alphabet"]
        if not isinstance(alphs[0], (list, tuple)):
            raise InvalidInputError("kernel JSON needs a list of alphabets")
        names = tuple(names) + ("",) * (len(alphs) - len(names))
        parts = [Alphabet(tuple(a), name=nm) for a, nm in zip(alphs, names)]
        return cls(tuple(parts[:-1]), parts[-1], np.asarray(obj["values"], dtype=float))


@dataclass(frozen=True, init=False)
class RealFunc:
    """Dense real-valued function on a product of alphabets.

    When paired against a function on a larger product domain, values
    broadcast over the missing factors.  NaN entries act as "unusable"
    sentinels (information densities at zero-mass cells).
    """

    domain: tuple[Alphabet, ...]
    values: np.ndarray

    def __init__(self, domain, values):
        if isinstance(domain, Alphabet):
            domain = (domain,)
        domain = tuple(domain)
        _check_distinct(domain)
        values = np.asarray(values, dtype=float).reshape(_domain_shape(domain)).copy()
        values.flags.writeable = False
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "values", values)

    def at(self, *symbols) -> float:
        idx = tuple(a.index(s) for a, s in zip(self.domain, symbols))
        return float(self.values[idx])

    def to_json_dict(self) -> dict:
        return {
            "alphabet": [list(a.symbols) for a in self.domain],
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict, names: tuple[str, ...] = ()) -> "RealFunc":
        alphs = obj["alphabet"]
        if alphs and not isinstance(alphs[0], (list, tuple)):
            alphs = [alphs]
        names = tuple(names) + ("",) * (len(alphs) - len(names))
        domain = tuple(Alphabet(tuple(a), name=nm) for a, nm in zip(alphs, names))
        return cls(domain, np.asarray(obj["values"], dtype=float))


@dataclass(frozen=True, init=False)
class TangentVec:
    """Perturbation of a pmf or kernel: dominated by the base, rows sum to 0."""

    base: object  # ProbVec or CondKernel
    delta: np.ndarray

    def __init__(self, base, delta):
        if isinstance(base, ProbVec):
            ref = base.mass
        elif isinstance(base, CondKernel):
            ref = base.rows
        else:
            raise InvalidInputError("tangent base must be a ProbVec or CondKernel")
        delta = np.asarray(delta, dtype=float)
        if delta.size != ref.size:
            raise ShapeError(f"delta shape {delta.shape} incompatible with base")
        delta = delta.reshape(ref.shape)
        if not bool(np.all(delta[ref == 0.0] == 0.0)):
            raise InvalidInputError("tangent delta must vanish off the base support")
        sums = np.abs(np.atleast_2d(delta).sum(axis=-1))
        if np.any(sums > TANGENT_TOL):
            raise InvalidInputError(f"tangent rows must sum to 0, max |sum| = {sums.max()}")
        delta = delta.copy()
        delta.flags.writeable = False
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "delta", delta)

    def as_func(self) -> RealFunc:
        if isinstance(self.base, ProbVec):
            return RealFunc((self.base.alphabet,), self.delta)
        return RealFunc(self.base.domain, self.delta.reshape(_domain_shape(self.base.domain)))


# ---------------------------------------------------------------------------
# coercion and domain alignment
# ---------------------------------------------------------------------------

def as_func(obj) -> RealFunc:
    """Coerce ProbVec / CondKernel / TangentVec / RealFunc to a RealFunc."""
    if isinstance(obj, RealFunc):
        return obj
    if isinstance(obj, (ProbVec, CondKernel, TangentVec)):
        return obj.as_func()
    raise InvalidInputError(f"cannot interpret {type(obj).__name__} as a function")


def _align(f: RealFunc, target: tuple[Alphabet, ...]) -> np.ndarray:
    """View of ``f.values`` broadcastable against the shape of ``target``.

    Every factor of ``f.domain`` must occur in ``target``.
    """
    positions = []
    for a in f.domain:
        if a not in target:
            raise ShapeError(f"factor {a!r} not present in target domain {target}")
        positions.append(target.index(a))
    order = tuple(np.argsort(positions))
    moved = np.transpose(f.values, axes=order) if f.domain else f.values
    shape = [1] * len(target)
    for rank, pos in enumerate(sorted(positions)):
        shape[pos] = moved.shape[rank]
    return moved.reshape(shape)


def _union_domain(d1: tuple[Alphabet, ...], d2: tuple[Alphabet, ...]) -> tuple[Alphabet, ...]:
    return d1 + tuple(a for a in d2 if a not in d1)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def empirical_type(seq, alphabet: Alphabet) -> ProbVec:
    """Empirical distribution (type) of a symbol sequence; entries are k/n."""
    seq = list(seq)
    if not seq:
        raise InvalidInputError("cannot take the type of an empty sequence")
    counts = np.zeros(alphabet.size, dtype=float)
    for s in seq:
        counts[alphabet.index(s)] += 1.0
    return ProbVec(alphabet, counts / len(seq))


def semidirect(f, g) -> RealFunc:
    """Semidirect product ``(f . g)(x, ..., y) = f(x, ...) g(x, y)``.

    Applied to ``(P_X, P_{Y|X})`` this returns the joint over (X, Y); shared
    factors are matched by alphabet equality and missing ones broadcast.
    """
    ff, gg = as_func(f), as_func(g)
    target = _union_domain(ff.domain, gg.domain)
    return RealFunc(target, _align(ff, target) * _align(gg, target))


def inner(f, g) -> float:
    """Generalized expectation ``<f, g> = sum_cells f * g``.

    The smaller-domain operand extends to the union domain by broadcast.
    NaN sentinel cells are tolerated only where the other operand is zero.
    """
    ff, gg = as_func(f), as_func(g)
    target = _union_domain(ff.domain, gg.domain)
    a = np.broadcast_to(_align(ff, target), _domain_shape(target))
    b = np.broadcast_to(_align(gg, target), _domain_shape(target))
    prod = np.where((a == 0.0) | (b == 0.0), 0.0, a * b)
    if np.any(np.isnan(prod)):
        raise InvalidInputError(
            "inner product reads an unusable (zero-probability) sentinel cell "
            "under a non-dominated measure"
        )
    return float(prod.sum())


def marginal(f, keep) -> RealFunc:
    """Sum a function over all factors not listed in ``keep`` (order kept)."""
    ff = as_func(f)
    if isinstance(keep, Alphabet):
        keep = (keep,)
    keep = tuple(keep)
    for a in keep:
        if a not in ff.domain:
            raise ShapeError(f"cannot keep absent factor {a!r}")
    drop = tuple(i for i, a in enumerate(ff.domain) if a not in keep)
    vals = ff.values.sum(axis=drop) if drop else ff.values
    remaining = tuple(a for a in ff.domain if a in keep)
    if remaining != keep:
        vals = np.transpose(vals, tuple(remaining.index(a) for a in keep))
    return RealFunc(keep, vals)


def is_dominated(f, g) -> bool:
    """True iff ``g(x) = 0`` implies ``f(x) = 0`` cellwise (same shape)."""
    fa = as_func(f).values if isinstance(f, (RealFunc, ProbVec, CondKernel, TangentVec)) else np.asarray(f, dtype=float)
    ga = as_func(g).values if isinstance(g, (RealFunc, ProbVec, CondKernel, TangentVec)) else np.asarray(g, dtype=float)
    if fa.shape != ga.shape:
        raise ShapeError(f"shapes {fa.shape} and {ga.shape} differ")
    return bool(np.all(fa[ga == 0.0] == 0.0))


def _safe_neg_log2(p: np.ndarray) -> np.ndarray:
    """-log2 p with NaN sentinels at p = 0."""
    out = np.full(p.shape, np.nan)
    pos = p > 0
    out[pos] = -np.log2(p[pos])
    return out


@dataclass(frozen=True)
class InfoFunctionals:
    """Self/mutual information densities and entropies of a 2-factor joint."""

    iota_x: RealFunc
    iota_y: RealFunc
    iota_xy: RealFunc
    H_x: float
    H_y: float
    I_xy: float


def info_functionals(joint) -> InfoFunctionals:
    """Information functionals of a joint pmf over exactly two factors.

    ``iota_x(x) = -log2 P_X(x)``, ``iota_xy(x, y) = log2 P(x,y)/(P(x)P(y))``;
    densities at zero-probability cells are NaN sentinels.
    """
    jf = as_func(joint)
    if len(jf.domain) != 2:
        raise ShapeError("info_functionals expects a joint over exactly two factors")
    J = jf.values
    if np.any(J < -MASS_TOL) or abs(J.sum() - 1.0) > 1e-9:
        raise InvalidInputError("joint is not a probability mass function")
    J = np.maximum(J, 0.0)
    px, py = J.sum(axis=1), J.sum(axis=0)
    ax, ay = jf.domain
    ix, iy = _safe_neg_log2(px), _safe_neg_log2(py)
    ixy = np.full(J.shape, np.nan)
    pos = J > 0
    ixy[pos] = np.log2(J[pos]) - np.log2(np.outer(px, py)[pos])
    H_x = float(np.sum(px[px > 0] * ix[px > 0]))
    H_y = float(np.sum(py[py > 0] * iy[py > 0]))
    I_xy = float(np.sum(J[pos] * ixy[pos]))
    if abs(I_xy) < 1e-14:
        I_xy = abs(I_xy)
    return InfoFunctionals(
        iota_x=RealFunc((ax,), ix),
        iota_y=RealFunc((ay,), iy),
        iota_xy=RealFunc((ax, ay), ixy),
        H_x=H_x,
        H_y=H_y,
        I_xy=I_xy,
    )


def tangent_basis(base) -> list[TangentVec]:
    """Basis of the tangent space at a pmf or kernel.

    One vector per adjacent support pair and per row (``e_i - e_j`` patterns
    restricted to the support), spanning ``{v << base, rows sum to 0}``.
    """
    if isinstance(base, ProbVec):
        rows = base.mass.reshape(1, -1)
        shape = base.mass.shape
    elif isinstance(base, CondKernel):
        rows = base.rows
        shape = base.rows.shape
    else:
        raise InvalidInputError("tangent_basis expects a ProbVec or CondKernel")
    out = []
    for r in range(rows.shape[0]):
        supp = np.flatnonzero(rows[r] > 0)
        for a, b in zip(supp[:-1], supp[1:]):
            delta = np.zeros_like(rows)
            delta[r, a] = 1.0
            delta[r, b] = -1.0
            out.append(TangentVec(base, delta.reshape(shape)))
    return out


def entropy_bits(p) -> float:
    """Shannon entropy in bits of a pmf-like array."""
    arr = p.mass if isinstance(p, ProbVec) else np.asarray(p, dtype=float)
    pos = arr[arr > 0]
    return float(-(pos * np.log2(pos)).sum())


def binary_entropy(x: float) -> float:
    """H_b(x) in bits, with 0 log 0 = 0."""
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def convolve_binary(a: float, b: float) -> float:
    """Binary convolution a*b = a(1-b) + b(1-a)."""
    return a * (1 - b) + b * (1 - a)
