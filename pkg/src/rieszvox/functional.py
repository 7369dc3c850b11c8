"""The trilinear convolution form T, the ball functional Lambda_d, deficits,
superadditivity checks, and the layer coupling factor theta.

T(E1,E2,E3) integrates 1_{E1} * 1_{E2} against the reflection of E3.  For
voxel sets this has an exact closed form in integer cell counts: with global
cell indices a, b, c, the overlap of the unit-cell tent (1_{[a,a+1)} *
1_{[b,b+1)}) with [-c-1,-c) equals 1/2 per axis when a+b+c is -1 or -2 and
vanishes otherwise.  Hence

    T = h^(2 dim) * 2^(-dim) * sum over s in {-1,-2}^dim of N_s,
    N_s = #{(a,b,c) in G1 x G2 x G3 : a + b + c = s},

which is symmetric under permutations, invariant under reflection about the
origin (s maps to -s-3, a bijection of the corner set), and exactly
covariant under integer grid refinement, because it IS the continuum T of
the voxelized sets.  Two independent evaluation paths are provided: a
Fourier convolution (entries rounded to exact integers before use) and a
brute-force loop over occupied cells.
"""

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.signal import fftconvolve

from .admissibility import measure_margin, set_triple_margin
from .grid import SetTriple, VoxelSet
from .symmetrize import dyadic_layers

DIRECT_PAIR_GUARD = 10**8  # max product of the two smallest cell counts


def unit_ball_volume(dim):
    """Volume of the unit ball in R^dim."""
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def slice_profile(t):
    """Slice-radius profile of the unit ball: (1 - t^2)^(1/2) for |t| <= 1."""
    if abs(t) > 1:
        raise ValueError("profile argument must satisfy |t| <= 1")
    return math.sqrt(1.0 - t * t)


@dataclass(frozen=True)
class RadiusTriple:
    """Three positive ball radii; converts to and from measure triples."""

    radii: tuple

    def __post_init__(self):
        r = tuple(float(x) for x in self.radii)
        if len(r) != 3 or min(r) <= 0:
            raise ValueError("radii must be three positive numbers")
        object.__setattr__(self, "radii", r)

    @classmethod
    def from_measures(cls, gamma, dim):
        w = unit_ball_volume(dim)
        return cls(tuple((float(g) / w) ** (1.0 / dim) for g in gamma))

    def measures(self, dim):
        w = unit_ball_volume(dim)
        return tuple(w * r**dim for r in self.radii)


@dataclass
class DeficitReport:
    t_value: float
    lambda_value: float
    delta: float
    tau_margin: float
    fit: Optional[object] = None


# -- the trilinear form -----------------------------------------------------


def _coerce_triple(t):
    """Accept a SetTriple or any 3-sequence of aligned VoxelSets.

    The plain-sequence form may contain empty sets (T is then zero), which
    SetTriple itself rejects.
    """
    if isinstance(t, SetTriple):
        return t.sets
    sets = tuple(t)
    if len(sets) != 3 or not all(isinstance(e, VoxelSet) for e in sets):
        raise ValueError("expected a SetTriple or three VoxelSets")
    for e in sets[1:]:
        if e.dim != sets[0].dim:
            raise ValueError("triple members must share the dimension")
        if not e.same_grid(sets[0]):
            raise ValueError("triple members live on mismatched grids")
    return sets


def _corners(dim):
    return list(product((-1, -2), repeat=dim))


def trilinear_corner_counts(t, method="fft"):
    """The exact integer counts N_s for s in {-1,-2}^dim, keyed by corner.

    method 'fft' uses a Fourier convolution with entries rounded to the
    nearest integer (the true values are integers); 'direct' enumerates
    occupied cells.  Both produce identical counts.
    """
    sets = _coerce_triple(t)
    if any(e.is_empty for e in sets):
        return {s: 0 for s in _corners(sets[0].dim)}
    if method == "fft":
        return _corner_counts_fft(sets)
    if method == "direct":
        return _corner_counts_direct(sets)
    raise ValueError(f"unknown method {method!r}")


def _corner_counts_fft(sets):
    e1, e2, e3 = sets
    d = e1.dim
    conv = fftconvolve(
        e1.occupancy.astype(np.float64), e2.occupancy.astype(np.float64)
    )
    base = e1.origin_index + e2.origin_index  # global index of conv[0,...]
    g3 = e3.global_indices()
    shape = np.asarray(conv.shape)
    out = {}
    for corner in _corners(d):
        idx = np.asarray(corner, dtype=np.int64)[None, :] - g3 - base[None, :]
        ok = np.all((idx >= 0) & (idx < shape), axis=1)
        if np.any(ok):
            vals = conv[tuple(idx[ok].T)]
            out[corner] = int(np.rint(vals).sum())
        else:
            out[corner] = 0
    return out


def _corner_counts_direct(sets):
    # loop the two smallest sets, look the third up in its occupancy array
    e1, e2, e3 = sorted(sets, key=lambda e: e.count)
    n1, n2 = e1.count, e2.count
    if n1 * n2 > DIRECT_PAIR_GUARD:
        raise ValueError(
            f"direct path guard exceeded: {n1} * {n2} > {DIRECT_PAIR_GUARD}"
        )
    d = e1.dim
    g1 = e1.global_indices()
    g2 = e2.global_indices()
    o3 = e3.origin_index
    shape3 = np.asarray(e3.shape)
    occ3 = e3.occupancy
    block = max(1, int(2e6) // max(n2, 1))
    out = {}
    for corner in _corners(d):
        s = np.asarray(corner, dtype=np.int64)
        total = 0
        for i0 in range(0, n1, block):
            idx = s[None, None, :] - g1[i0 : i0 + block, None, :] - g2[None, :, :] - o3
            ok = np.all((idx >= 0) & (idx < shape3), axis=-1)
            sel = idx[ok]
            if sel.size:
                total += int(occ3[tuple(sel.T)].sum())
        out[corner] = total
    return out


def trilinear_form(t):
    """T of a voxel triple via Fourier convolution, exact in counts."""
    sets = _coerce_triple(t)
    h = sets[0].spacing
    d = sets[0].dim
    counts = trilinear_corner_counts(sets, method="fft")
    return h ** (2 * d) * 2.0 ** (-d) * sum(counts.values())


def trilinear_form_direct(t):
    """Brute-force oracle for T; identical counts to the Fourier path."""
    sets = _coerce_triple(t)
    h = sets[0].spacing
    d = sets[0].dim
    counts = trilinear_corner_counts(sets, method="direct")
    return h ** (2 * d) * 2.0 ** (-d) * sum(counts.values())


# -- the ball functional ----------------------------------------------------


def lambda_1(gamma):
    """Lambda_1: T of centered intervals with lengths gamma.

    For admissible gamma (each entry at most the sum of the others) this is
    (2(g1 g2 + g1 g3 + g2 g3) - g1^2 - g2^2 - g3^2) / 4; when one entry
    dominates, the convolution mass saturates at the product of the two
    smallest.  Zero entries give 0; negative entries are rejected.
    """
    g = tuple(float(x) for x in gamma)
    if len(g) != 3:
        raise ValueError("gamma must be a triple")
    if min(g) < 0:
        raise ValueError("measures must be nonnegative")
    if min(g) == 0.0:
        return 0.0
    s = sorted(g)
    if s[2] >= s[0] + s[1]:
        return s[0] * s[1]
    g1, g2, g3 = g
    return (
        2 * (g1 * g2 + g1 * g3 + g2 * g3) - g1 * g1 - g2 * g2 - g3 * g3
    ) / 4.0


def _lens_area_2d(r1, r2, s):
    # area of the intersection of two disks with center distance s
    if s >= r1 + r2:
        return 0.0
    if s <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    d1 = (s * s + r1 * r1 - r2 * r2) / (2 * s)
    d2 = s - d1
    a1 = r1 * r1 * math.acos(max(-1.0, min(1.0, d1 / r1)))
    a2 = r2 * r2 * math.acos(max(-1.0, min(1.0, d2 / r2)))
    t1 = d1 * math.sqrt(max(0.0, r1 * r1 - d1 * d1))
    t2 = d2 * math.sqrt(max(0.0, r2 * r2 - d2 * d2))
    return a1 + a2 - t1 - t2


def _lens_volume_3d(r1, r2, s):
    # volume of the intersection of two balls with center distance s
    if s >= r1 + r2:
        return 0.0
    if s <= abs(r1 - r2):
        return 4.0 / 3.0 * math.pi * min(r1, r2) ** 3
    rrd = r1 + r2 - s
    return (
        math.pi
        * rrd
        * rrd
        * (s * s + 2 * s * r2 - 3 * r2 * r2 + 2 * s * r1 + 6 * r1 * r2 - 3 * r1 * r1)
        / (12 * s)
    )


def lambda_d(gamma, dim):
    """Lambda_dim: T of centered balls with measures gamma.

    dim=1 delegates to the closed form; dim 2 and 3 integrate the two-ball
    intersection profile radially over the smallest ball:

        Lambda = dim * omega * integral_0^r3 s^(dim-1) lens(r1, r2, s) ds

    with a quadrature break at the containment radius |r1 - r2|.
    """
    g = tuple(float(x) for x in gamma)
    if len(g) != 3:
        raise ValueError("gamma must be a triple")
    if min(g) < 0:
        raise ValueError("measures must be nonnegative")
    if min(g) == 0.0:
        return 0.0
    if dim == 1:
        return lambda_1(g)
    if dim not in (2, 3):
        raise ValueError("dim must be 1, 2, or 3")
    w = unit_ball_volume(dim)
    r1, r2, r3 = sorted(((x / w) ** (1.0 / dim) for x in g), reverse=True)
    lens = _lens_area_2d if dim == 2 else _lens_volume_3d
    kink = abs(r1 - r2)
    pts = [kink] if 0.0 < kink < r3 else None
    val, _ = quad(
        lambda s: s ** (dim - 1) * lens(r1, r2, s),
        0.0,
        r3,
        points=pts,
        limit=200,
        epsabs=0.0,
        epsrel=1e-9,
    )
    return dim * w * val


def deficit(t, with_fit=False, supersample=3):
    """Deficit report: delta = 1 - T / Lambda_dim(measures).

    The reference is the continuum ball functional of the exact voxel
    measures, so a single rasterization error enters, not two.  with_fit
    attaches the homothetic ellipsoid fit and its per-set epsilons.
    """
    if not isinstance(t, SetTriple):
        t = SetTriple(t)
    tv = trilinear_form(t)
    lam = lambda_d(t.measures, t.dim)
    if lam <= 0:
        raise ValueError("degenerate triple: zero ball functional")
    fit = None
    if with_fit:
        from .ellipsoid import fit_homothetic_triple  # deferred: keeps deps acyclic

        fit = fit_homothetic_triple(t, supersample=supersample)
    return DeficitReport(
        t_value=tv,
        lambda_value=lam,
        delta=1.0 - tv / lam,
        tau_margin=set_triple_margin(t).margin,
        fit=fit,
    )


def superadditivity_gap(alpha, beta, dim):
    """Lambda_dim(alpha + beta) - Lambda_dim(alpha) - Lambda_dim(beta).

    alpha and beta are nonnegative measure triple summands; their sum must
    be positive and admissible (dim-th root margin >= 0).
    """
    a = np.asarray([float(x) for x in alpha])
    b = np.asarray([float(x) for x in beta])
    if a.min() < 0 or b.min() < 0:
        raise ValueError("summands must be nonnegative")
    g = a + b
    if g.min() <= 0:
        raise ValueError("total measures must be positive")
    if measure_margin(g, dim).margin < 0:
        raise ValueError("total measure triple is inadmissible")
    return lambda_d(g, dim) - lambda_d(a, dim) - lambda_d(b, dim)


def strong_triangle_rho(tau, eta, dim, samples, seed=0):
    """Empirical strict-superadditivity constant.

    Samples tau-admissible measure triples gamma and random splits
    gamma = alpha + beta; among splits with both max_j alpha_j and
    max_j beta_j at least eta * min_i gamma_i, returns the minimum of
    gap / Lambda(gamma).  The sample stream depends only on
    (tau, dim, samples, seed), never on eta, so shrinking eta can only
    enlarge the qualifying set and lower the minimum.
    """
    if not (0 < tau < 1) or not (0 < eta < 1):
        raise ValueError("tau and eta must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    w = unit_ball_volume(dim)
    best = None
    found = 0
    for _ in range(int(samples)):
        while True:  # rejection-sample a tau-admissible radius triple
            r = rng.uniform(0.2, 1.0, size=3)
            top = r.max()
            # the binding pairing excludes the largest radius
            if (r.sum() - 2 * top) / top >= tau:
                break
        gamma = w * r**dim
        u = rng.uniform(0.0, 1.0, size=3)
        alpha = u * gamma
        beta = gamma - alpha
        thresh = eta * gamma.min()
        if alpha.max() < thresh or beta.max() < thresh:
            continue
        lam = lambda_d(gamma, dim)
        gap = lam - lambda_d(alpha, dim) - lambda_d(beta, dim)
        ratio = gap / lam
        found += 1
        if best is None or ratio < best:
            best = ratio
    if found == 0:
        raise ValueError("no qualifying splits sampled; eta too demanding")
    return best


# -- dyadic layer coupling --------------------------------------------------


def theta(layer_records):
    """The coupling factor of three selected dyadic layers.

    layer_records is a sequence of three (k, projection_measure,
    layer_measure) records.  theta = 2^(-max|k_m - k_n|/3) *
    (min proj / max proj)^(1/3), which never exceeds 1.
    """
    recs = list(layer_records)
    if len(recs) != 3:
        raise ValueError("expected three layer records")
    ks = [int(r[0]) for r in recs]
    projs = [float(r[1]) for r in recs]
    meas = [float(r[2]) for r in recs]
    if min(projs) <= 0 or min(meas) <= 0:
        raise ValueError("empty layer")
    spread = max(abs(ks[i] - ks[j]) for i in range(3) for j in range(3))
    return 2.0 ** (-spread / 3.0) * (min(projs) / max(projs)) ** (1.0 / 3.0)


def theta_bound_check(t, k, constant=4.0):
    """Check T(E_{1,k1}, E_{2,k2}, E_{3,k3}) <= C theta prod |E_{j,kj}|^(2/3).

    Returns (lhs, rhs, ratio).  k is the triple of dyadic indices; each
    selected layer must be populated.
    """
    if not isinstance(t, SetTriple):
        t = SetTriple(t)
    ks = tuple(int(x) for x in k)
    layers = []
    records = []
    for e, kj in zip(t, ks):
        dec = dyadic_layers(e)
        if kj not in dec.layers:
            raise ValueError(f"empty layer k={kj}")
        lay = dec.layers[kj]
        layers.append(lay)
        records.append((kj, dec.projections[kj], lay.measure))
    lhs = trilinear_form(layers)
    th = theta(records)
    prod = 1.0
    for _, _, m in records:
        prod *= m ** (2.0 / 3.0)
    rhs = constant * th * prod
    return lhs, rhs, lhs / rhs
