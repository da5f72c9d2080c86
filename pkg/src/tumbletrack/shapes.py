"""Procedural surface models.

Surfaces are sampled uniformly at random with about one point per
``spacing**2`` of area. Regular lattices are avoided on purpose: a scan
drawn from a lattice-sampled face matches the face again after a shift by
one lattice step, which plants spurious ICP minima a few degrees from the
truth. Every shape is a deterministic function of ``(size, spacing, seed)``.
"""

import numpy as np


def _count(area, spacing):
    return max(3, int(round(area / spacing**2)))


def _frame(normal):
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(normal, helper)
    e1 /= np.linalg.norm(e1)
    return normal, e1, np.cross(normal, e1)


def rectangle(origin, edge_u, edge_v, spacing, rng):
    """Points on the parallelogram ``origin + s*edge_u + t*edge_v``, s, t in [0, 1]."""
    origin, edge_u, edge_v = (np.asarray(a, dtype=float) for a in (origin, edge_u, edge_v))
    n = _count(np.linalg.norm(np.cross(edge_u, edge_v)), spacing)
    st = rng.random((n, 2))
    return origin + np.outer(st[:, 0], edge_u) + np.outer(st[:, 1], edge_v)


def box(center, dims, spacing, rng):
    a, b, c = (0.5 * d for d in dims)
    lo = np.asarray(center, dtype=float) - [a, b, c]
    ex, ey, ez = np.array([2 * a, 0, 0]), np.array([0, 2 * b, 0]), np.array([0, 0, 2 * c])
    return np.vstack([
        rectangle(lo, ey, ez, spacing, rng), rectangle(lo + ex, ey, ez, spacing, rng),
        rectangle(lo, ex, ez, spacing, rng), rectangle(lo + ey, ex, ez, spacing, rng),
        rectangle(lo, ex, ey, spacing, rng), rectangle(lo + ez, ex, ey, spacing, rng),
    ])


def disk(center, normal, radius, spacing, rng, depth=0.0):
    """Flat disk, or a paraboloid dish of the given ``depth`` at the rim."""
    normal, e1, e2 = _frame(normal)
    n = _count(np.pi * radius**2, spacing)
    rho = radius * np.sqrt(rng.random(n))
    th = 2 * np.pi * rng.random(n)
    pts = np.outer(rho * np.cos(th), e1) + np.outer(rho * np.sin(th), e2)
    pts += np.outer(depth * (rho / radius) ** 2, normal)
    return np.asarray(center, dtype=float) + pts


def cylinder(base, axis, radius, length, spacing, rng):
    """Lateral surface plus the far end cap."""
    axis, e1, e2 = _frame(axis)
    n = _count(2 * np.pi * radius * length, spacing)
    th = 2 * np.pi * rng.random(n)
    h = length * rng.random(n)
    side = np.outer(radius * np.cos(th), e1) + np.outer(radius * np.sin(th), e2) + np.outer(h, axis)
    base = np.asarray(base, dtype=float)
    cap = disk(base + length * axis, axis, radius, spacing, rng)
    return np.vstack([base + side, cap])


def satellite(size=1.0, spacing=0.03, seed=0):
    """Asymmetric satellite: bus, one solar panel, a tilted dish, a boom antenna.

    The bus is ``0.8 x 0.6 x 0.5`` times ``size``; overall extent is about
    ``1.6 * size``. No rotation maps the shape onto itself.
    """
    s = size
    rng = np.random.default_rng(seed)
    return np.vstack([
        box((0.0, 0.0, 0.0), (0.8 * s, 0.6 * s, 0.5 * s), spacing, rng),
        rectangle((-1.0 * s, -0.2 * s, 0.05 * s), (0.6 * s, 0.0, 0.0), (0.0, 0.4 * s, 0.0), spacing, rng),
        disk((0.15 * s, 0.38 * s, -0.05 * s), (0.25, 1.0, 0.15), 0.22 * s, spacing, rng, depth=-0.06 * s),
        cylinder((0.25 * s, -0.15 * s, 0.25 * s), (0.2, -0.1, 1.0), 0.035 * s, 0.45 * s, spacing, rng),
    ])


def skew_box(size=1.0, spacing=0.05, seed=0):
    """Box with unequal edges and a corner block; a small asymmetric model."""
    s = size
    rng = np.random.default_rng(seed)
    return np.vstack([
        box((0.0, 0.0, 0.0), (0.9 * s, 0.5 * s, 0.3 * s), spacing, rng),
        box((0.35 * s, 0.15 * s, 0.25 * s), (0.2 * s, 0.2 * s, 0.2 * s), spacing, rng),
    ])


SHAPES = {"satellite": satellite, "skew_box": skew_box}


def build(shape="satellite", size=1.0, spacing=0.03, seed=0):
    try:
        fn = SHAPES[shape]
    except KeyError:
        raise ValueError(f"unknown shape {shape!r}; choose from {sorted(SHAPES)}") from None
    return fn(size=size, spacing=spacing, seed=seed)
