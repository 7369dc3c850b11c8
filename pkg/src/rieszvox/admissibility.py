"""Triangle-type admissibility margins for radius and set triples.

The margin of a radius triple is min over the three pairings of
(r_i + r_j - r_k) / max(r); it is scale and permutation invariant, at most 1,
with equality only for equal radii.  A triple is tau-admissible when
margin >= tau.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdmissibilityReport:
    margin: float
    strict: bool
    min_over_max: float  # min r / max r, the ball-ratio form of the condition

    def tau_satisfied(self, tau):
        return self.margin >= tau


def radius_margin(r):
    """Admissibility report for a triple of positive radii."""
    r1, r2, r3 = (float(x) for x in r)
    if min(r1, r2, r3) <= 0:
        raise ValueError("radii must be strictly positive")
    top = max(r1, r2, r3)
    margin = min(
        (r1 + r2 - r3) / top,
        (r1 + r3 - r2) / top,
        (r2 + r3 - r1) / top,
    )
    return AdmissibilityReport(
        margin=margin, strict=margin > 0, min_over_max=min(r1, r2, r3) / top
    )


def measure_margin(gamma, dim):
    """radius_margin applied to the dim-th roots of a measure triple."""
    g = [float(x) for x in gamma]
    if min(g) <= 0:
        raise ValueError("measures must be strictly positive")
    return radius_margin([x ** (1.0 / dim) for x in g])


def set_triple_margin(t):
    """Admissibility of a SetTriple via the dim-th roots of the measures."""
    return measure_margin(t.measures, t.dim)


def slice_margin_profile(r, t):
    """Admissibility of the slice-radius triple (r_j * (1 - t_j^2)^(1/2)).

    t is the triple of slice heights in (-1, 1); callers sampling slices
    keep sum(r_j * t_j) = 0, which this function does not enforce.
    """
    tv = [float(x) for x in t]
    if max(abs(x) for x in tv) >= 1.0:
        raise ValueError("slice parameters must satisfy |t| < 1")
    rv = np.asarray([float(x) for x in r], dtype=float)
    prof = np.array([math.sqrt(1.0 - x * x) for x in tv])
    return radius_margin(rv * prof)
