"""Box domains, boundary pieces, uniform samplers and the boundary factor.

Domains are axis-aligned boxes in 1D or 2D.  Boundary pieces are either
finite point sets (1D) or unions of axis-aligned segments (2D); each piece
carries the measure used to weight Monte-Carlo estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ConfigurationError, JetBatch, Tape

__all__ = [
    "BoundaryPiece",
    "ProblemDomain",
    "unit_box",
    "sample_uniform",
    "boundary_factor",
    "boundary_factor_jets",
]


@dataclass(frozen=True)
class BoundaryPiece:
    name: str
    # 1D: finite point set (k, d); 2D: segments (S, 2, d) as endpoint pairs
    points: tuple | None = None
    segments: tuple | None = None

    def as_points(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def as_segments(self) -> np.ndarray:
        return np.asarray(self.segments, dtype=float)

    @property
    def measure(self) -> float:
        if self.segments is not None:
            seg = self.as_segments()
            return float(np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1).sum())
        return 0.0  # finite point sets carry counting measure in the losses


@dataclass(frozen=True)
class ProblemDomain:
    """Axis-aligned box with named boundary pieces."""

    bounds: tuple  # ((a1, b1), ..., (ad, bd))
    pieces: dict = field(default_factory=dict)

    def __post_init__(self):
        for a, b in self.bounds:
            if not b > a:
                raise ConfigurationError("degenerate box bounds")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def measure(self) -> float:
        return float(np.prod([b - a for a, b in self.bounds]))

    @property
    def center(self) -> np.ndarray:
        return np.array([(a + b) / 2 for a, b in self.bounds])

    def piece(self, name: str) -> BoundaryPiece:
        return self.pieces[name]


def _box_boundary(bounds) -> BoundaryPiece:
    if len(bounds) == 1:
        (a, b), = bounds
        return BoundaryPiece("boundary", points=((a,), (b,)))
    (a1, b1), (a2, b2) = bounds
    segs = (
        (((a1, a2)), ((b1, a2))),  # bottom
        (((b1, a2)), ((b1, b2))),  # right
        (((b1, b2)), ((a1, b2))),  # top
        (((a1, b2)), ((a1, a2))),  # left
    )
    return BoundaryPiece("boundary", segments=segs)


def unit_box(dim: int, lo: float = 0.0, hi: float = 1.0,
             extra_pieces: dict | None = None) -> ProblemDomain:
    bounds = tuple((lo, hi) for _ in range(dim))
    pieces = {"boundary": _box_boundary(bounds)}
    if extra_pieces:
        pieces.update(extra_pieces)
    return ProblemDomain(bounds, pieces)


def sample_uniform(region, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in a domain interior or on a boundary piece.

    For 1D boundary pieces (finite point sets) the points themselves are
    returned, cycled to length ``n``.
    """
    if n < 1:
        raise ConfigurationError("sample count must be >= 1")
    if isinstance(region, ProblemDomain):
        lo = np.array([a for a, _ in region.bounds])
        hi = np.array([b for _, b in region.bounds])
        return lo + (hi - lo) * rng.random((n, region.dim))
    if region.points is not None:
        pts = region.as_points()
        reps = int(np.ceil(n / len(pts)))
        return np.tile(pts, (reps, 1))[:n]
    seg = region.as_segments()
    lengths = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1)
    which = rng.choice(len(seg), size=n, p=lengths / lengths.sum())
    t = rng.random((n, 1))
    return seg[which, 0] + t * (seg[which, 1] - seg[which, 0])


# ---------------------------------------------------------------------------
# boundary factor: vanishes exactly on the box boundary, positive inside
# ---------------------------------------------------------------------------


def boundary_factor(x: np.ndarray, domain: ProblemDomain):
    """Value, gradient and Hessian of ``prod_i (x_i - a_i)(b_i - x_i)``.

    Shapes: ``(B,)``, ``(B, d)``, ``(B, d, d)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    B, d = x.shape
    f = np.empty((B, d))
    f1 = np.empty((B, d))
    for i, (a, b) in enumerate(domain.bounds):
        f[:, i] = (x[:, i] - a) * (b - x[:, i])
        f1[:, i] = a + b - 2.0 * x[:, i]
    f2 = -2.0 * np.ones((B, d))
    val = np.prod(f, axis=1)
    grad = np.empty((B, d))
    hess = np.empty((B, d, d))
    for i in range(d):
        others_i = np.prod(np.delete(f, i, axis=1), axis=1)
        grad[:, i] = f1[:, i] * others_i
        hess[:, i, i] = f2[:, i] * others_i
        for j in range(i + 1, d):
            rest = np.prod(np.delete(f, (i, j), axis=1), axis=1)
            hess[:, i, j] = hess[:, j, i] = f1[:, i] * f1[:, j] * rest
    return val, grad, hess


def boundary_factor_jets(tape: Tape, x: np.ndarray, domain: ProblemDomain) -> JetBatch:
    """Boundary factor as a constant jet batch with channels ``(B, 1, ...)``."""
    val, grad, hess = boundary_factor(x, domain)
    B, d = grad.shape
    return JetBatch(
        tape.constant(val.reshape(B, 1)),
        tape.constant(grad.reshape(B, 1, d)),
        tape.constant(hess.reshape(B, 1, d, d)),
    )
