"""Finite spaces, probability vectors, functions, couplings and kernels.

All containers are immutable: their arrays are copied on construction and
flagged read-only.  Extended reals are IEEE floats restricted to finite
values and the two infinities; NaN is rejected everywhere and the sum
``inf + (-inf)`` raises :class:`ExtendedRealError` instead of producing NaN.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    ExtendedRealError,
    Malformed,
    NegativeMass,
    NoEmbedding,
    NotAProbability,
    SpaceMismatch,
)

INPUT_TOL = 1e-9
NEG_TOL = 1e-12

__all__ = [
    "Space", "Measure", "Fn", "Coupling", "Kernel",
    "make_measure", "dirac", "uniform", "marginals", "disintegrate",
    "kernel_to_coupling", "barycenter", "pushforward", "disjoint_union",
    "ext_add", "integrate", "encode_real", "decode_real",
    "space_to_json", "space_from_json", "measure_to_json", "measure_from_json",
]


def _frozen(a: Any, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------- extended reals

def ext_add(a: float, b: float) -> float:
    """Add two extended reals; ``+inf`` and ``-inf`` together are an error."""
    if (a == np.inf and b == -np.inf) or (a == -np.inf and b == np.inf):
        raise ExtendedRealError("+inf + -inf is undefined")
    return a + b


def integrate(values: Sequence[float] | np.ndarray, weights: Sequence[float] | np.ndarray) -> float:
    """Integrate an extended-real function against nonnegative weights.

    Points of zero weight are ignored, so ``0 * inf = 0``.  A positive
    weight on ``+inf`` and another on ``-inf`` raises.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.shape != w.shape:
        raise DimensionMismatch(f"function has shape {v.shape}, weights {w.shape}")
    charged = w > 0
    v, w = v[charged], w[charged]
    has_pos = bool(np.any(v == np.inf))
    has_neg = bool(np.any(v == -np.inf))
    if has_pos and has_neg:
        raise ExtendedRealError("integrand takes both +inf and -inf on charged points")
    if has_pos:
        return np.inf
    if has_neg:
        return -np.inf
    return float(np.dot(v, w))


def encode_real(x: float) -> float | str:
    """JSON encoding of an extended real: infinities become strings."""
    if x == np.inf:
        return "inf"
    if x == -np.inf:
        return "-inf"
    return float(x)


def decode_real(x: Any) -> float:
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return np.inf
        if s in ("-inf", "-infinity"):
            return -np.inf
        raise Malformed(f"not an extended real: {x!r}")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise Malformed(f"not an extended real: {x!r}")
    if x != x:
        raise Malformed("NaN is not an extended real")
    return float(x)


# ------------------------------------------------------------------------ types

@dataclass(frozen=True, eq=False)
class Space:
    """A finite ground set, optionally embedded in R^d and/or metrized."""

    labels: tuple
    coords: np.ndarray | None = None
    metric: np.ndarray | None = None

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise Malformed("a space needs at least one point")
        if len(set(labels)) != len(labels):
            raise Malformed("space labels must be distinct")
        object.__setattr__(self, "labels", labels)
        n = len(labels)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            if c.ndim != 2 or c.shape[0] != n:
                raise DimensionMismatch("need one coordinate vector per point, all of equal length")
            if not np.all(np.isfinite(c)):
                raise Malformed("coordinates must be finite")
            object.__setattr__(self, "coords", _frozen(c))
        if self.metric is not None:
            d = np.asarray(self.metric, dtype=float)
            if d.shape != (n, n):
                raise DimensionMismatch("metric must be n x n")
            if not np.all(np.isfinite(d)) or np.any(d < 0):
                raise Malformed("metric entries must be finite and nonnegative")
            if np.any(np.diag(d) != 0) or not np.array_equal(d, d.T):
                raise Malformed("metric must be symmetric with zero diagonal")
            object.__setattr__(self, "metric", _frozen(d))

    @classmethod
    def grid(cls, points: Iterable[float]) -> "Space":
        """A 1-D space labelled by its own coordinates."""
        pts = [float(p) for p in points]
        return cls(tuple(pts), coords=np.array(pts)[:, None])

    @classmethod
    def of_size(cls, n: int) -> "Space":
        return cls(tuple(range(n)))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int | None:
        return None if self.coords is None else self.coords.shape[1]

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise Malformed(f"unknown point {label!r}") from None

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Space):
            return NotImplemented
        return (
            self.labels == other.labels
            and _opt_equal(self.coords, other.coords)
            and _opt_equal(self.metric, other.metric)
        )

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"Space({list(self.labels)!r})"


def _opt_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and bool(np.array_equal(a, b))


def require_same(a: Space, b: Space, what: str = "spaces") -> None:
    if a != b:
        raise SpaceMismatch(f"{what} differ: {a!r} vs {b!r}")


def disjoint_union(left: Space, right: Space) -> Space:
    """The union of two spaces with labels tagged ``("L", ...)``/``("R", ...)``."""
    labels = tuple(("L", l) for l in left.labels) + tuple(("R", l) for l in right.labels)
    coords = None
    if left.coords is not None and right.coords is not None and left.dim == right.dim:
        coords = np.vstack([left.coords, right.coords])
    return Space(labels, coords=coords)


@dataclass(frozen=True, eq=False)
class Measure:
    """A probability vector on a finite space.  Build with :func:`make_measure`."""

    space: Space
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.space),):
            raise DimensionMismatch(f"expected {len(self.space)} weights, got shape {w.shape}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12 * max(1, len(w)):
            raise NotAProbability("use make_measure to validate raw weights")
        object.__setattr__(self, "weights", _frozen(w))

    def __len__(self) -> int:
        return len(self.weights)

    def __repr__(self) -> str:
        return f"Measure({np.array2string(self.weights, precision=4)})"

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)


def make_measure(space: Space, weights: Sequence[float] | np.ndarray) -> Measure:
    """Validate raw weights and return a probability measure.

    Parameters
    ----------
    space : Space
        The ground set.
    weights : array_like
        One weight per point.  Entries down to ``-1e-12`` are clamped to
        zero; a total within ``1e-9`` of one is renormalized.

    Returns
    -------
    Measure
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] != len(space):
        raise DimensionMismatch(f"expected {len(space)} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise NotAProbability("weights must be finite")
    if np.any(w < -NEG_TOL):
        raise NegativeMass(f"negative weight {w.min():.3g}")
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if abs(total - 1.0) > INPUT_TOL:
        raise NotAProbability(f"weights sum to {total!r}")
    return Measure(space, w / total)


def dirac(space: Space, i: int) -> Measure:
    w = np.zeros(len(space))
    w[i] = 1.0
    return Measure(space, w)


def uniform(space: Space) -> Measure:
    return Measure(space, np.full(len(space), 1.0 / len(space)))


@dataclass(frozen=True, eq=False)
class Fn:
    """An extended-real function on a finite space."""

    space: Space
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.space),):
            raise DimensionMismatch(f"expected {len(self.space)} values, got shape {v.shape}")
        if np.any(np.isnan(v)):
            raise Malformed("NaN is not an extended real")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        return f"Fn({np.array2string(self.values, precision=6)})"


@dataclass(frozen=True, eq=False)
class Coupling:
    """A joint probability on ``row_space x col_space``."""

    row_space: Space
    col_space: Space
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.row_space), len(self.col_space)):
            raise DimensionMismatch(f"coupling matrix has shape {m.shape}")
        if np.any(m < -NEG_TOL) or not np.all(np.isfinite(m)):
            raise NegativeMass("coupling entries must be finite and nonnegative")
        m = np.clip(m, 0.0, None)
        if abs(m.sum() - 1.0) > INPUT_TOL:
            raise NotAProbability(f"coupling mass {m.sum()!r}")
        object.__setattr__(self, "matrix", _frozen(m / m.sum()))


@dataclass(frozen=True, eq=False)
class Kernel:
    """A Markov kernel: one probability row per point of ``row_space``.

    ``defaulted`` lists rows that were filled in by convention (uniform)
    because the disintegrated coupling gave them no mass.
    """

    row_space: Space
    col_space: Space
    matrix: np.ndarray
    defaulted: tuple = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.row_space), len(self.col_space)):
            raise DimensionMismatch(f"kernel matrix has shape {m.shape}")
        if np.any(m < -NEG_TOL) or not np.all(np.isfinite(m)):
            raise NegativeMass("kernel entries must be finite and nonnegative")
        m = np.clip(m, 0.0, None)
        sums = m.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > INPUT_TOL):
            raise NotAProbability("every kernel row must be a probability")
        object.__setattr__(self, "matrix", _frozen(m / sums[:, None]))
        object.__setattr__(self, "defaulted", tuple(int(i) for i in self.defaulted))

    @property
    def rows(self) -> list[Measure]:
        return [Measure(self.col_space, r) for r in self.matrix]

    @classmethod
    def identity(cls, space: Space) -> "Kernel":
        return cls(space, space, np.eye(len(space)))


# ------------------------------------------------------------------- operations

def marginals(pi: Coupling) -> tuple[Measure, Measure]:
    return (
        make_measure(pi.row_space, pi.matrix.sum(axis=1)),
        make_measure(pi.col_space, pi.matrix.sum(axis=0)),
    )


def disintegrate(pi: Coupling) -> tuple[Measure, Kernel]:
    """Split a coupling into its first marginal and conditional rows.

    Rows without mass get the uniform distribution and are listed in
    ``kernel.defaulted``.
    """
    mu_w = pi.matrix.sum(axis=1)
    rows = np.empty_like(pi.matrix)
    empty = []
    for i, mass in enumerate(mu_w):
        if mass > 0:
            rows[i] = pi.matrix[i] / mass
        else:
            rows[i] = 1.0 / len(pi.col_space)
            empty.append(i)
    return make_measure(pi.row_space, mu_w), Kernel(pi.row_space, pi.col_space, rows, tuple(empty))


def kernel_to_coupling(mu: Measure, k: Kernel) -> Coupling:
    if mu.space != k.row_space:
        raise DimensionMismatch("measure does not live on the kernel's row space")
    return Coupling(k.row_space, k.col_space, mu.weights[:, None] * k.matrix)


def barycenter(sigma: Measure) -> np.ndarray:
    """Mean position of a measure on an embedded space."""
    if sigma.space.coords is None:
        raise NoEmbedding("space has no coordinates")
    return sigma.weights @ sigma.space.coords


def pushforward(mu: Measure, k: Kernel) -> Measure:
    if mu.space != k.row_space:
        raise DimensionMismatch("measure does not live on the kernel's row space")
    return make_measure(k.col_space, mu.weights @ k.matrix)


# ------------------------------------------------------------------------- JSON

def _label_to_json(label):
    if isinstance(label, tuple):
        return [_label_to_json(l) for l in label]
    if isinstance(label, (np.integer,)):
        return int(label)
    if isinstance(label, (np.floating,)):
        return float(label)
    return label


def _label_from_json(label):
    if isinstance(label, list):
        return tuple(_label_from_json(l) for l in label)
    return label


def space_to_json(space: Space) -> dict:
    out: dict = {"labels": [_label_to_json(l) for l in space.labels]}
    if space.coords is not None:
        out["coords"] = space.coords.tolist()
    if space.metric is not None:
        out["metric"] = space.metric.tolist()
    return out


def space_from_json(obj: Any) -> Space:
    if not isinstance(obj, dict) or "labels" not in obj:
        raise Malformed("a space is an object with a 'labels' list")
    extra = set(obj) - {"labels", "coords", "metric"}
    if extra:
        raise Malformed(f"unknown space fields {sorted(extra)}")
    return Space(
        tuple(_label_from_json(l) for l in obj["labels"]),
        coords=obj.get("coords"),
        metric=obj.get("metric"),
    )


def measure_to_json(mu: Measure, space_name: str | None = None) -> dict:
    return {
        "space": space_name if space_name is not None else space_to_json(mu.space),
        "weights": mu.weights.tolist(),
    }


def measure_from_json(obj: Any, spaces: dict[str, Space] | None = None) -> Measure:
    """Read a measure whose ``space`` is either a name or an inline space."""
    if not isinstance(obj, dict) or "weights" not in obj or "space" not in obj:
        raise Malformed("a measure is an object with 'space' and 'weights'")
    ref = obj["space"]
    if isinstance(ref, str):
        if not spaces or ref not in spaces:
            raise Malformed(f"unknown space name {ref!r}")
        space = spaces[ref]
    else:
        space = space_from_json(ref)
    return make_measure(space, [decode_real(w) for w in obj["weights"]])
