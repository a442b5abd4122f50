"""Functions on truncated uniform grids.

A :class:`GridFunction` stands in for a bounded uniformly continuous
function on R^d: node values on a box plus multilinear interpolation inside
the box and an extension policy outside it.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from ._parallel import chunked_map

__all__ = [
    "EXTENSIONS",
    "GridSpec",
    "GridFunction",
    "sample",
    "interp",
    "sup_norm",
    "sup_distance",
    "read_csv",
]

EXTENSIONS = ("clamp", "zero", "periodic")


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid: per axis ``nodes`` points from ``lo`` to ``hi``."""

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    nodes: Tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        nodes = tuple(int(v) for v in np.atleast_1d(self.nodes))
        if not (len(lo) == len(hi) == len(nodes)) or not lo:
            raise ValueError("lo, hi and nodes must have the same positive length")
        for a, b, n in zip(lo, hi, nodes):
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ValueError(f"invalid axis bounds [{a}, {b}]")
            if n < 2:
                raise ValueError("each axis needs at least 2 nodes")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def cube(cls, lo: float, hi: float, nodes: int, d: int) -> "GridSpec":
        return cls((lo,) * d, (hi,) * d, (nodes,) * d)

    @property
    def d(self) -> int:
        return len(self.nodes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.nodes

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes))

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / (np.array(self.nodes) - 1)

    def axes(self):
        return [np.linspace(a, b, n) for a, b, n in zip(self.lo, self.hi, self.nodes)]

    def points(self) -> np.ndarray:
        """All node coordinates, shape ``(size, d)``, lexicographic in the
        node indices (last axis fastest)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def indices(self) -> np.ndarray:
        return np.stack(np.unravel_index(np.arange(self.size), self.shape), axis=1)

    def inner_mask(self, fraction: float = 0.5) -> np.ndarray:
        """Boolean node mask of the centred sub-box scaled by ``fraction``."""
        pts = self.points()
        lo, hi = np.array(self.lo), np.array(self.hi)
        mid, half = (lo + hi) / 2, fraction * (hi - lo) / 2
        return np.all(np.abs(pts - mid) <= half * (1 + 1e-12), axis=1)


def _locate(spec: GridSpec, P: np.ndarray, extension: str):
    """Cell index and fractional offset per axis, plus an outside mask."""
    lo, hi = np.array(spec.lo), np.array(spec.hi)
    outside = np.zeros(P.shape[0], dtype=bool)
    if extension == "clamp":
        P = np.clip(P, lo, hi)
    elif extension == "zero":
        outside = np.any((P < lo) | (P > hi), axis=1)
        P = np.clip(P, lo, hi)
    elif extension == "periodic":
        inside = np.all((P >= lo) & (P <= hi), axis=1, keepdims=True)
        P = np.where(inside, P, lo + np.mod(P - lo, hi - lo))
    else:
        raise ValueError(f"unknown extension {extension!r}")
    h = spec.spacing
    i0 = np.empty(P.shape, dtype=np.intp)
    frac = np.empty(P.shape)
    for ax, axis in enumerate(spec.axes()):
        n = spec.nodes[ax]
        s = (P[:, ax] - lo[ax]) / h[ax]
        k = np.clip(np.floor(s), 0, n - 1).astype(np.intp)
        f = np.clip(s - k, 0.0, 1.0)
        # points that coincide with a node read it exactly
        r = np.clip(np.rint(s), 0, n - 1).astype(np.intp)
        on_node = axis[r] == P[:, ax]
        k = np.where(on_node, r, k)
        f = np.where(on_node | (k == n - 1), 0.0, f)
        i0[:, ax] = k
        frac[:, ax] = f
    return i0, frac, outside


def _multilinear(values: np.ndarray, i0: np.ndarray, frac: np.ndarray) -> np.ndarray:
    # nested lerps a + f*(b - a): exact on constants and at nodes
    d = values.ndim
    upper = np.minimum(i0 + 1, np.array(values.shape) - 1)
    corners = np.empty((2,) * d + (i0.shape[0],))
    for bits in np.ndindex(*(2,) * d):
        idx = tuple(np.where(bits[ax], upper[:, ax], i0[:, ax]) for ax in range(d))
        corners[bits] = values[idx]
    for ax in reversed(range(d)):
        a, b = corners[..., 0, :], corners[..., 1, :]
        corners = a + frac[:, ax] * (b - a)
    return corners


def _interp_values(spec, values, extension, P):
    i0, frac, outside = _locate(spec, P, extension)
    out = _multilinear(values, i0, frac)
    if np.any(outside):
        out = np.where(outside, 0.0, out)
    return out


@dataclass(frozen=True)
class GridFunction:
    spec: GridSpec
    values: np.ndarray
    extension: str = "clamp"
    metadata: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(self.spec.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        if self.extension not in EXTENSIONS:
            raise ValueError(f"unknown extension {self.extension!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __call__(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float).reshape(-1, self.spec.d)
        return _interp_values(self.spec, self.values, self.extension, P)

    def with_values(self, values, **metadata) -> "GridFunction":
        return GridFunction(self.spec, values, self.extension, {**self.metadata, **metadata})

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def to_csv(self, path=None, metadata: Optional[Mapping] = None) -> str:
        meta = {**self.metadata, **(metadata or {})}
        d = self.spec.d
        buf = io.StringIO()
        for key, value in meta.items():
            buf.write(f"# {key}={value}\n")
        axes = " | ".join(
            f"lo={a!r};hi={b!r};nodes={n}" for a, b, n in zip(self.spec.lo, self.spec.hi, self.spec.nodes)
        )
        buf.write(f"# grid {axes}; extension={self.extension}\n")
        cols = [f"i{j + 1}" for j in range(d)] + [f"x{j + 1}" for j in range(d)] + ["value"]
        buf.write(",".join(cols) + "\n")
        for idx, x, v in zip(self.spec.indices(), self.spec.points(), self.flat()):
            buf.write(",".join([*map(str, idx), *map(repr, x.tolist()), repr(float(v))]) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def read_csv(path_or_text: str) -> GridFunction:
    """Inverse of :meth:`GridFunction.to_csv`."""
    text = path_or_text
    if "\n" not in text:
        with open(text) as fh:
            text = fh.read()
    lo, hi, nodes, extension, meta, rows = [], [], [], "clamp", {}, []
    for line in text.splitlines():
        if line.startswith("# grid "):
            axes, ext = line[len("# grid "):].rsplit("; extension=", 1)
            extension = ext.strip()
            for part in axes.split(" | "):
                kv = dict(item.split("=") for item in part.split(";"))
                lo.append(float(kv["lo"]))
                hi.append(float(kv["hi"]))
                nodes.append(int(kv["nodes"]))
        elif line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        elif line and not line.startswith("i1"):
            rows.append(float(line.rsplit(",", 1)[1]))
    spec = GridSpec(tuple(lo), tuple(hi), tuple(nodes))
    return GridFunction(spec, np.array(rows), extension, meta)


def sample(f: Callable, spec: GridSpec, extension: str = "clamp", threads=None) -> GridFunction:
    """Evaluate ``f`` (vectorised over ``(m, d)`` arrays) at every node."""
    pts = spec.points()
    values = chunked_map(lambda lo, hi: np.asarray(f(pts[lo:hi]), dtype=float).reshape(-1), spec.size, threads)
    return GridFunction(spec, values, extension)


def interp(gf: GridFunction, p) -> float:
    """Interpolated value of ``gf`` at a single point."""
    return float(gf(np.asarray(p, dtype=float).reshape(1, -1))[0])


def sup_norm(gf: GridFunction) -> float:
    return float(np.max(np.abs(gf.values)))


def sup_distance(gf: GridFunction, g: Callable, mask: Optional[np.ndarray] = None) -> float:
    """Max over nodes (optionally restricted by ``mask``) of ``|gf - g|``."""
    pts = gf.spec.points()
    diff = np.abs(gf.flat() - np.asarray(g(pts), dtype=float).reshape(-1))
    if mask is not None:
        diff = diff[mask]
    return float(np.max(diff)) if diff.size else 0.0
