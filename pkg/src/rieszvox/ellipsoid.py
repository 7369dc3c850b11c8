"""Moment-based ellipsoid fitting, homothetic triple fits, and the slice
interval machinery: per-fiber interval fits, center fields, affine center
regression, and the three-set center compatibility score.

A solid ellipsoid {x : (x-v)^T Q (x-v) <= 1} has second central moment
matrix inv(Q) / (dim + 2), which makes the moment fit closed-form and exact
on true ellipsoids.
"""

import math
from dataclasses import dataclass

import numpy as np

from .functional import unit_ball_volume
from .grid import (
    SetTriple,
    VoxelSet,
    rasterize_ellipsoid,
    symmetric_difference_measure,
)

SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class Ellipsoid:
    """Center v and symmetric positive definite shape matrix Q, with the
    convention {x : (x-v)^T Q (x-v) <= 1}."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.center, dtype=float).reshape(-1)
        Q = np.asarray(self.shape, dtype=float)
        if Q.shape != (v.size, v.size):
            raise ValueError("shape matrix does not match the center length")
        if np.max(np.abs(Q - Q.T)) > 1e-12 * max(1.0, float(np.max(np.abs(Q)))):
            raise ValueError("shape matrix must be symmetric")
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise ValueError("shape matrix must be positive definite")
        v.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "center", v)
        object.__setattr__(self, "shape", Q)

    @property
    def dim(self):
        return self.center.size

    @property
    def measure(self):
        return unit_ball_volume(self.dim) / math.sqrt(np.linalg.det(self.shape))


@dataclass
class HomotheticFit:
    """A common centered shape, one translate and radius per set.

    shape is normalized to measure omega_dim (det Q = 1); centers sum to
    zero by construction; radii are (|E_j| / omega)^(1/dim); epsilons are
    the relative symmetric differences against the rasterized translates.
    """

    shape: Ellipsoid
    centers: np.ndarray  # (3, dim)
    radii: np.ndarray  # (3,)
    epsilons: np.ndarray  # (3,)


@dataclass(frozen=True)
class IntervalFit:
    center: float
    length: float
    residual: float  # relative symmetric difference of fiber vs interval


# -- moment fits ------------------------------------------------------------


def fit_ellipsoid_moments(e):
    """Fit an ellipsoid to a voxel set by matching centroid and second moments.

    For a solid ellipsoid of shape Q the second central moment matrix is
    inv(Q) / (dim + 2), so Q0 = inv(Sigma) / (dim + 2) recovers the shape
    exactly in the continuum; Q0 is then rescaled so the fitted measure
    equals measure(E).  Cell centers carry the mass (no intra-cell spread),
    so sets concentrated on a single cell or a hyperplane of cells raise a
    singular-covariance error.
    """
    if e.is_empty:
        raise ValueError("cannot fit an empty set")
    pts = e.cell_centers()
    v = pts.mean(axis=0)
    diff = pts - v
    sigma = diff.T @ diff / pts.shape[0]
    sigma = np.atleast_2d(sigma)
    w = np.linalg.eigvalsh(sigma)
    if w.min() <= SINGULAR_RTOL * max(w.max(), 1.0):
        raise ValueError("singular covariance: set is concentrated on a hyperplane")
    d = e.dim
    q0 = np.linalg.inv(sigma) / (d + 2)
    q0 = (q0 + q0.T) / 2
    # rescale so the fitted measure matches the voxel measure exactly
    target = e.measure
    scale = (unit_ball_volume(d) / (target * math.sqrt(np.linalg.det(q0)))) ** (
        2.0 / d
    )
    return Ellipsoid(center=v, shape=scale * q0)


def _epsilon_one(e, shape, center, radius, supersample):
    """Relative symmetric difference of E against the rasterized r*shape+v."""
    q = shape / radius**2
    ras = rasterize_ellipsoid(
        Ellipsoid(center=center, shape=q), e.spacing, supersample
    )
    return symmetric_difference_measure(e, ras) / e.measure


def fit_homothetic_triple(t, supersample=3):
    """Fit one centered shape plus per-set translates to a SetTriple.

    Per-set moment fits are averaged on the squared-semi-axis scale: each
    fitted Q_j is normalized to det 1, the mean of their inverses is
    inverted, re-symmetrized, and renormalized to det 1 (measure omega_dim).
    Centers are mean-subtracted so they sum to zero; radii follow from the
    measures; epsilons compare against rasterizations at the triple's
    spacing.
    """
    if not isinstance(t, SetTriple):
        t = SetTriple(t)
    d = t.dim
    fits = [fit_ellipsoid_moments(e) for e in t]
    inv_mean = np.zeros((d, d))
    for f in fits:
        qn = f.shape / np.linalg.det(f.shape) ** (1.0 / d)
        inv_mean += np.linalg.inv(qn)
    inv_mean /= 3.0
    s = np.linalg.inv(inv_mean)
    s = (s + s.T) / 2
    s = s / np.linalg.det(s) ** (1.0 / d)  # det 1, measure omega_dim
    centers = np.array([f.center for f in fits])
    centers = centers - centers.mean(axis=0)
    w = unit_ball_volume(d)
    radii = np.array([(e.measure / w) ** (1.0 / d) for e in t])
    shape = Ellipsoid(center=np.zeros(d), shape=s)
    eps = np.array(
        [
            _epsilon_one(e, s, c, r, supersample)
            for e, c, r in zip(t, centers, radii)
        ]
    )
    return HomotheticFit(shape=shape, centers=centers, radii=radii, epsilons=eps)


def epsilon_of_fit(t, fit, supersample=3):
    """Worst-case relative symmetric difference of the fit, max over the sets."""
    if not isinstance(t, SetTriple):
        t = SetTriple(t)
    vals = [
        _epsilon_one(e, fit.shape.shape, c, r, supersample)
        for e, c, r in zip(t, fit.centers, fit.radii)
    ]
    return float(max(vals))


# -- slice machinery ---------------------------------------------------------


def fit_interval_1d(fiber):
    """Best centered-mass interval for a 1-D fiber.

    The interval has the fiber's measure and is centered at its centroid;
    the residual is |fiber symdiff interval| / measure(fiber), computed
    exactly from per-cell overlaps.
    """
    if fiber.dim != 1:
        raise ValueError("fiber must be one-dimensional")
    if fiber.is_empty:
        raise ValueError("empty fiber")
    h = fiber.spacing
    cells = fiber.global_indices()[:, 0]
    centers = (cells + 0.5) * h
    c = float(centers.mean())
    length = fiber.measure
    lo, hi = c - length / 2, c + length / 2
    overlap = np.clip(
        np.minimum((cells + 1) * h, hi) - np.maximum(cells * h, lo), 0.0, None
    ).sum()
    sym = 2.0 * (length - float(overlap))
    return IntervalFit(center=c, length=length, residual=sym / length)


def _column_data(e, axis):
    """Fiber interval fits along `axis`, keyed by physical column coordinates."""
    occ = np.moveaxis(e.occupancy, axis, -1)
    lead_origin = np.delete(e.origin_index, axis)
    ax_origin = int(e.origin_index[axis])
    h = e.spacing
    out = {}
    for col in np.argwhere(occ.sum(axis=-1) > 0):
        bits = occ[tuple(col)]
        fiber = VoxelSet.from_index(bits, [ax_origin], h)
        key = tuple((col + lead_origin + 0.5) * h)
        out[key] = fit_interval_1d(fiber)
    return out


def slice_center_field(e, axis=None):
    """Interval fit of every nonempty fiber along `axis` (default: last).

    Returns a dict keyed by the physical center coordinates of the column
    (a (dim-1)-tuple) with IntervalFit values; empty columns are absent.
    """
    if e.dim < 2:
        raise ValueError("slice fields need dim >= 2")
    if axis is None:
        axis = e.dim - 1
    return _column_data(e, axis)


def affine_regress_centers(field, weights=None):
    """Weighted least-squares affine fit of a center field.

    field maps (dim-1)-tuples x' to IntervalFit objects (or bare center
    values); weights maps the same keys to nonnegative weights, defaulting
    to the fiber lengths.  Returns ((a, b), rms) for the model
    center(x') = a . x' + b, with the weighted root-mean-square residual.
    """
    keys = sorted(field.keys())
    if not keys:
        raise ValueError("empty center field")
    x = np.array(keys, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    cvals = []
    wvals = []
    for k in keys:
        f = field[k]
        cvals.append(f.center if isinstance(f, IntervalFit) else float(f))
        if weights is not None:
            wvals.append(float(weights[k]))
        elif isinstance(f, IntervalFit):
            wvals.append(f.length)
        else:
            wvals.append(1.0)
    y = np.array(cvals)
    w = np.array(wvals)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be nonnegative with positive total")
    design = np.hstack([x, np.ones((x.shape[0], 1))])
    sw = np.sqrt(w)
    dw = design * sw[:, None]
    if np.linalg.matrix_rank(dw) < design.shape[1]:
        raise ValueError("rank-deficient center field: columns not in general position")
    coef, _, _, _ = np.linalg.lstsq(dw, y * sw, rcond=None)
    a, b = coef[:-1], float(coef[-1])
    resid = y - (x @ a + b)
    rms = math.sqrt(float((w * resid**2).sum() / w.sum()))
    return (a, b), rms


def _weighted_median(values, weights):
    order = np.argsort(values)
    v = np.asarray(values)[order]
    w = np.asarray(weights)[order]
    cum = np.cumsum(w)
    return float(v[np.searchsorted(cum, 0.5 * cum[-1])])


def center_compatibility(t, radii=None, samples=400, seed=0):
    """Weighted median of |sum_j center_j(y_j)| over sampled column triples
    with y_1 + y_2 + y_3 = 0.

    In the scaled form of the theory the constraint reads
    sum_j r_j x'_j = 0 and the score is |sum_j r_j c_j(x'_j)|; substituting
    y_j = r_j x'_j shows the radii cancel, so the score is computed in
    physical coordinates (radii are validated when given but do not affect
    the value).  The third column is snapped to the nearest occupied column
    of the third set; the exact zero-sum point sits half a cell off the
    center lattice, so snapping moves it by at most one cell.  Weights are
    the smallest of the three fiber measures.  Small scores mean the three
    slice center fields are mutually consistent with translates summing to
    zero.
    """
    if not isinstance(t, SetTriple):
        t = SetTriple(t)
    if t.dim < 2:
        raise ValueError("center compatibility needs dim >= 2")
    if radii is not None:
        rv = radii.radii if hasattr(radii, "radii") else tuple(radii)
        if len(rv) != 3 or min(rv) <= 0:
            raise ValueError("radii must be three positive numbers")
    h = t.spacing
    fields = [_column_data(e, e.dim - 1) for e in t]
    if any(not f for f in fields):
        raise ValueError("a set has no occupied columns")
    keys1 = sorted(fields[0].keys())
    keys2 = sorted(fields[1].keys())
    rng = np.random.default_rng(seed)
    vals = []
    wts = []
    for _ in range(int(samples)):
        k1 = keys1[rng.integers(len(keys1))]
        k2 = keys2[rng.integers(len(keys2))]
        y3 = -(np.asarray(k1) + np.asarray(k2))
        # y3 lies half a cell off the center lattice; try both straddles
        base = np.floor(y3 / h - 0.5)
        hit = None
        for shift in (0.0, 1.0):
            cand = tuple((base + shift + 0.5) * h)
            if cand in fields[2]:
                hit = cand
                break
        if hit is None:
            continue
        f1, f2, f3 = fields[0][k1], fields[1][k2], fields[2][hit]
        vals.append(abs(f1.center + f2.center + f3.center))
        wts.append(min(f1.length, f2.length, f3.length))
    if not vals:
        raise ValueError("no admissible sample triples: slice supports do not meet")
    return _weighted_median(vals, wts)
