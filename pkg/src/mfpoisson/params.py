"""Parameter manifold for one neuron: (c, a, w, b) with w on the unit sphere
and b in [-(sqrt(d)+2), sqrt(d)+2].

Ambient vectors are laid out as (c, a, w_1..w_d, b), size d + 3. The tangent
space at a point fixes c, a, b free and restricts the w-block to the plane
orthogonal to w; an explicit update step is mapped back to the manifold by
normalizing w and clamping b (projection retraction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .activation import DEFAULT_TAU

W_NORM_TOL = 1e-12
_DEGENERATE = 1e-14


def b_half_width(d: int) -> float:
    """Half-width sqrt(d) + 2 of the admissible b interval."""
    return math.sqrt(d) + 2.0


@dataclass
class ParamPoint:
    """One neuron: output offset c, output weight a, direction w, shift b."""

    c: float
    a: float
    w: np.ndarray
    b: float

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def validate(self) -> None:
        if abs(float(np.linalg.norm(self.w)) - 1.0) > W_NORM_TOL:
            raise ValueError("w is not on the unit sphere")
        half = b_half_width(self.dim)
        if not -half <= self.b <= half:
            raise ValueError("b outside its admissible interval")

    def ambient(self) -> np.ndarray:
        """Coordinates as one (d + 3,) vector (c, a, w, b)."""
        out = np.empty(self.dim + 3)
        out[0] = self.c
        out[1] = self.a
        out[2:-1] = self.w
        out[-1] = self.b
        return out

    @staticmethod
    def from_ambient(vec: np.ndarray) -> "ParamPoint":
        return ParamPoint(float(vec[0]), float(vec[1]), np.array(vec[2:-1]),
                          float(vec[-1]))


class ParticleCloud:
    """m neurons stored as column arrays; the network is their feature average.

    The struct-of-arrays layout keeps the training loop vectorized; a
    ParamPoint view of any single particle is available through particle().
    """

    __slots__ = ("dim", "tau", "c", "a", "w", "b")

    def __init__(self, dim: int, tau: float, c: np.ndarray, a: np.ndarray,
                 w: np.ndarray, b: np.ndarray):
        self.dim = int(dim)
        self.tau = float(tau)
        self.c = np.asarray(c, dtype=float)
        self.a = np.asarray(a, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.w.shape != (self.c.size, self.dim) or self.a.shape != self.c.shape \
                or self.b.shape != self.c.shape:
            raise ValueError("inconsistent particle array shapes")
        if self.c.size < 1:
            raise ValueError("cloud needs at least one particle")

    @property
    def m(self) -> int:
        return self.c.size

    def particle(self, i: int) -> ParamPoint:
        return ParamPoint(float(self.c[i]), float(self.a[i]),
                          self.w[i].copy(), float(self.b[i]))

    @classmethod
    def from_particles(cls, particles, tau: float = DEFAULT_TAU) -> "ParticleCloud":
        d = particles[0].dim
        return cls(d, tau,
                   np.array([p.c for p in particles]),
                   np.array([p.a for p in particles]),
                   np.array([p.w for p in particles]),
                   np.array([p.b for p in particles]))

    def copy(self) -> "ParticleCloud":
        return ParticleCloud(self.dim, self.tau, self.c.copy(), self.a.copy(),
                             self.w.copy(), self.b.copy())

    def validate(self) -> None:
        norms = np.linalg.norm(self.w, axis=1)
        if np.max(np.abs(norms - 1.0)) > W_NORM_TOL:
            raise ValueError("some w is off the unit sphere")
        half = b_half_width(self.dim)
        if np.any(np.abs(self.b) > half):
            raise ValueError("some b outside its admissible interval")

    def finite(self) -> bool:
        return bool(np.isfinite(self.c).all() and np.isfinite(self.a).all()
                    and np.isfinite(self.w).all() and np.isfinite(self.b).all())

    # -- snapshot format: header "d m tau", then one line per particle ------

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"{self.dim} {self.m} {self.tau!r}\n")
            for i in range(self.m):
                fields = [repr(float(self.c[i])), repr(float(self.a[i]))]
                fields += [repr(float(v)) for v in self.w[i]]
                fields.append(repr(float(self.b[i])))
                fh.write(" ".join(fields) + "\n")

    @staticmethod
    def load(path) -> "ParticleCloud":
        with open(path) as fh:
            head = fh.readline().split()
            if len(head) != 3:
                raise ValueError("malformed snapshot header")
            d, m, tau = int(head[0]), int(head[1]), float(head[2])
            c = np.empty(m)
            a = np.empty(m)
            w = np.empty((m, d))
            b = np.empty(m)
            for i in range(m):
                parts = fh.readline().split()
                if len(parts) != d + 3:
                    raise ValueError(f"malformed snapshot line {i}")
                vals = [float(v) for v in parts]
                c[i], a[i], b[i] = vals[0], vals[1], vals[-1]
                w[i] = vals[2:-1]
        return ParticleCloud(d, tau, c, a, w, b)


def init_cloud(m: int, d: int, seed: int, tau: float = DEFAULT_TAU) -> ParticleCloud:
    """Width-m cloud with a = c = 0, w uniform on the sphere, b uniform on its
    interval; the represented network is identically zero."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((m, d))
    w = g / np.linalg.norm(g, axis=1, keepdims=True)
    half = b_half_width(d)
    b = rng.uniform(-half, half, size=m)
    return ParticleCloud(d, tau, np.zeros(m), np.zeros(m), w, b)


def tangent_project(p: ParamPoint, g: np.ndarray) -> np.ndarray:
    """Project an ambient vector onto the tangent space at p: the w-block loses
    its radial component, the c, a, b entries pass through."""
    out = np.array(g, dtype=float)
    gw = out[2:-1]
    out[2:-1] = gw - (gw @ p.w) * p.w
    return out


def tangent_project_cloud(w: np.ndarray, ambient: np.ndarray) -> np.ndarray:
    """Row-wise tangent projection for a whole cloud; ambient is (m, d + 3)."""
    out = np.array(ambient, dtype=float)
    gw = out[:, 2:-1]
    radial = np.einsum("ij,ij->i", gw, w)
    out[:, 2:-1] = gw - radial[:, None] * w
    return out


def retract(p: ParamPoint, delta: np.ndarray, step: float) -> ParamPoint:
    """Move step * delta from p and map back to the manifold.

    w is renormalized to the sphere, b clamped to its interval (the clamp is a
    safety net: the flow's boundary velocity vanishes for tau > 1)."""
    delta = np.asarray(delta, dtype=float)
    if step == 0.0 or not delta.any():
        return ParamPoint(p.c, p.a, p.w.copy(), p.b)
    w_new = p.w + step * delta[2:-1]
    norm = float(np.linalg.norm(w_new))
    if norm < _DEGENERATE:
        raise ValueError("retraction degenerate: step moved w to the origin")
    half = b_half_width(p.dim)
    b_new = min(max(p.b + step * float(delta[-1]), -half), half)
    return ParamPoint(p.c + step * float(delta[0]), p.a + step * float(delta[1]),
                      w_new / norm, b_new)


def retract_cloud(cloud: ParticleCloud, deltas: np.ndarray, step: float) -> ParticleCloud:
    """Vectorized retract over all particles; deltas is (m, d + 3).

    Particles whose w-delta is exactly zero keep their w bit-for-bit (no
    spurious renormalization drift for inactive neurons)."""
    if step == 0.0 or not deltas.any():
        return cloud.copy()
    c = cloud.c + step * deltas[:, 0]
    a = cloud.a + step * deltas[:, 1]
    wd = deltas[:, 2:-1]
    moved = wd.any(axis=1)
    w = cloud.w + step * wd
    norms = np.linalg.norm(w, axis=1)
    if np.min(norms[moved], initial=np.inf) < _DEGENERATE:
        raise ValueError("retraction degenerate: step moved some w to the origin")
    w[moved] /= norms[moved, None]
    half = b_half_width(cloud.dim)
    b = np.clip(cloud.b + step * deltas[:, -1], -half, half)
    return ParticleCloud(cloud.dim, cloud.tau, c, a, w, b)


def in_ball(p: ParamPoint, r: float) -> bool:
    """Membership in the compact slab |c| <= 2r, |a| <= 4r (w, b constrained by type)."""
    if r <= 0.0:
        raise ValueError("r must be positive")
    return abs(p.c) <= 2.0 * r and abs(p.a) <= 4.0 * r
