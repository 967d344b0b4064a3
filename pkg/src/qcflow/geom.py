"""Plane and Poincare-disk primitives used by embedding and edge surgery.

The hyperbolic plane is modelled as the unit disk with metric
``4 dz dzbar / (1 - z zbar)^2``; distances are
``d(p, q) = 2 atanh |(p - q) / (1 - conj(q) p)|`` and rigid motions are
Mobius transformations ``z -> e^{i t} (z - z0) / (1 - conj(z0) z)``.
"""

from __future__ import annotations

import numpy as np

from .errors import LayoutError

# relative slack accepted when a circle-circle intersection is near-tangent
_TANGENT_SLACK = 1e-9


def hyperbolic_distance(p, q):
    """Poincare-disk distance, elementwise on arrays."""
    p = np.asarray(p, dtype=np.complex128)
    q = np.asarray(q, dtype=np.complex128)
    ratio = np.abs(p - q) / np.abs(1.0 - np.conj(q) * p)
    return 2.0 * np.arctanh(ratio)


def mobius_to_origin(c, z):
    """The disk automorphism sending ``c`` to 0, applied to ``z``."""
    return (z - c) / (1.0 - np.conj(c) * z)


def mobius_from_origin(c, w):
    """Inverse of :func:`mobius_to_origin`."""
    return (w + c) / (1.0 + np.conj(c) * w)


def poincare_circle_to_euclidean(c, r):
    """Euclidean (center, radius) of the hyperbolic circle (c, r).

    With ``m = tanh(r/2)``: center ``(1 - m^2) c / (1 - m^2 |c|^2)`` and
    radius from ``R^2 = |C|^2 - (|c|^2 - m^2) / (1 - m^2 |c|^2)``.
    """
    c = complex(c)
    m = np.tanh(0.5 * r)
    m2 = m * m
    cc = (c * c.conjugate()).real
    denom = 1.0 - m2 * cc
    center = (1.0 - m2) / denom * c
    r2 = (center * center.conjugate()).real - (cc - m2) / denom
    return center, float(np.sqrt(max(r2, 0.0)))


def place_third_euclidean(pa, pb, la, lb):
    """Point at distance ``la`` from ``pa`` and ``lb`` from ``pb`` on the
    counter-clockwise side of the segment ``pa -> pb``.

    Computed in the local frame of the base edge (equivalently, by the
    law-of-cosines angle construction), which stays well conditioned for
    near-tangent circles.
    """
    chord = pb - pa
    d = abs(chord)
    if d <= 0.0:
        raise LayoutError("degenerate base edge")
    x = (d * d + la * la - lb * lb) / (2.0 * d)
    h2 = la * la - x * x
    if h2 < -_TANGENT_SLACK * la * la:
        raise LayoutError(
            f"circle intersection failed (la={la}, lb={lb}, base={d})")
    y = np.sqrt(max(h2, 0.0))
    return pa + (x + 1j * y) * (chord / d)


def _euclidean_circle_intersection(c1, r1, c2, r2):
    """Both intersection points of two Euclidean circles, or None when
    near-tangent/ill-conditioned."""
    chord = c2 - c1
    d = abs(chord)
    if d <= 0.0:
        return None
    x = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
    h2 = r1 * r1 - x * x
    if h2 < _TANGENT_SLACK * r1 * r1:
        return None
    y = np.sqrt(h2)
    u = chord / d
    return c1 + (x + 1j * y) * u, c1 + (x - 1j * y) * u


def place_third_hyperbolic(pa, pb, la, lb):
    """Hyperbolic analogue of :func:`place_third_euclidean`: intersection of
    hyperbolic circles (pa, la) and (pb, lb) on the counter-clockwise side of
    the geodesic ``pa -> pb``.

    The circles are converted to their Euclidean counterparts and
    intersected; the side is selected in the Mobius frame centred at ``pa``
    (where the geodesic is a straight ray). Near-tangent configurations fall
    back to the hyperbolic law-of-cosines construction in that frame.
    """
    C1, R1 = poincare_circle_to_euclidean(pa, la)
    C2, R2 = poincare_circle_to_euclidean(pb, lb)
    ref = mobius_to_origin(pa, pb)
    candidates = _euclidean_circle_intersection(C1, R1, C2, R2)
    if candidates is not None:
        for cand in candidates:
            if abs(cand) >= 1.0:
                continue
            w = mobius_to_origin(pa, cand)
            if (w * ref.conjugate()).imag > 0.0:
                return cand
    # Fallback: angle at pa from the cosine law, laid out in the frame at pa.
    d = float(hyperbolic_distance(pa, pb))
    if d <= 0.0:
        raise LayoutError("degenerate base edge")
    arg = ((np.cosh(d) * np.cosh(la) - np.cosh(lb))
           / (np.sinh(d) * np.sinh(la)))
    if abs(arg) > 1.0 + _TANGENT_SLACK:
        raise LayoutError(
            f"hyperbolic circle intersection failed (la={la}, lb={lb}, base={d})")
    alpha = np.arccos(np.clip(arg, -1.0, 1.0))
    direction = ref / abs(ref)
    w = np.tanh(0.5 * la) * direction * np.exp(1j * alpha)
    return mobius_from_origin(pa, w)


def hyperbolic_segment_real_axis_crossing(k, l):
    """Real-axis crossing of the geodesic through ``k`` (upper half disk) and
    ``l`` (lower half disk), or None for the degenerate diameter case.

    The geodesic is the circle through k and l orthogonal to the unit circle;
    orthogonality forces its real-axis intersections x1, x2 to satisfy
    ``x1 * x2 = 1``, so exactly one lies inside the disk.
    """
    kx, ky = k.real, k.imag
    lx, ly = l.real, l.imag
    det = kx * ly - ky * lx
    scale = max(abs(k), abs(l))
    if abs(det) <= 1e-14 * scale * scale:
        # k, 0, l collinear: the geodesic is a diameter through the origin.
        return 0.0 if ky * ly < 0.0 else None
    bk = ((kx * kx + ky * ky) + 1.0) / 2.0
    bl = ((lx * lx + ly * ly) + 1.0) / 2.0
    mx = (bk * ly - bl * ky) / det
    my = (bl * kx - bk * lx) / det
    r2 = mx * mx + my * my - 1.0
    disc = r2 - my * my
    if disc < 0.0:
        return None
    root = np.sqrt(disc)
    for x in (mx - root, mx + root):
        if abs(x) < 1.0:
            return float(x)
    return None
