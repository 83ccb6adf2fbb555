"""Root systems, Weyl chambers, multiplicities and the Bessel drift fields.

Conventions
-----------
Coordinates are always stored in descending chamber order. Nothing in this
module sorts its input: an unordered vector is a :class:`ChamberError`.

Drift fields for ``N`` particles::

    A:  k * sum_{j != i} 1/(x_i - x_j)
    B:  beta * sum_{j != i} [1/(x_i - x_j) + 1/(x_i + x_j)] + nu*beta/x_i
    D:  k * sum_{j != i} [1/(x_i - x_j) + 1/(x_i + x_j)]

The frozen field ``H`` is the same with every coupling set to one (``nu``
survives in the B case).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ChamberError, SingularityError, UsageError

COLLISION_RTOL = 1e-12


class Kind(str, enum.Enum):
    A = "A"
    B = "B"
    D = "D"


@dataclass(frozen=True)
class RootSystem:
    """Root system of type A, B or D acting on ``n`` coordinates.

    For type A the usual label is ``A_{n-1}``; ``n`` is always the particle count.
    """

    kind: Kind
    n: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.n) != self.n or self.n < 1:
            raise UsageError(f"particle count must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.kind is Kind.D and self.n < 2:
            raise UsageError("type D needs at least two coordinates")

    def __str__(self):
        return f"{self.kind.value}{self.n}"


@dataclass(frozen=True)
class Multiplicity:
    """Coupling constants.

    ``k`` is the pair coupling (``k`` for A and D, ``k2 = beta`` for B).
    ``nu`` is only used for type B, where ``k1 = nu * beta``; ``nu = 0`` is the
    degenerate ``(0, k)`` multiplicity that is handled through type D.
    """

    kind: Kind
    k: float
    nu: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.k > 0:
            raise UsageError(f"coupling must be positive, got {self.k!r}")
        if self.kind is Kind.B:
            if self.nu is None or self.nu < 0:
                raise UsageError("type B needs nu >= 0 (nu = 0 is the degenerate (0, k) case)")
        elif self.nu is not None:
            raise UsageError(f"nu is only meaningful for type B, got nu={self.nu!r} for {self.kind.value}")

    @classmethod
    def type_a(cls, k):
        return cls(Kind.A, float(k))

    @classmethod
    def type_b(cls, nu, beta):
        if not nu > 0:
            raise UsageError("coupled type-B multiplicity needs nu > 0; use type_b_degenerate for k1 = 0")
        return cls(Kind.B, float(beta), float(nu))

    @classmethod
    def type_b_degenerate(cls, k):
        return cls(Kind.B, float(k), 0.0)

    @classmethod
    def type_d(cls, k):
        return cls(Kind.D, float(k))

    @property
    def k1(self):
        return self.nu * self.k if self.kind is Kind.B else None

    @property
    def k2(self):
        return self.k if self.kind is Kind.B else None

    @property
    def degenerate(self):
        return self.kind is Kind.B and self.nu == 0

    @property
    def avoids_boundary(self):
        """True when every nonzero coupling is at least 1/2."""
        couplings = [self.k] + ([self.k1] if self.kind is Kind.B and not self.degenerate else [])
        return all(c >= 0.5 for c in couplings)


@dataclass(frozen=True)
class ChamberPoint:
    coords: np.ndarray
    strict: bool

    @classmethod
    def of(cls, rs: RootSystem, x) -> "ChamberPoint":
        """Validate ``x`` against the closed chamber of ``rs``."""
        x = _as_vector(rs, x)
        if not chamber_contains(rs, x, strict=False):
            raise ChamberError(f"{x} is not in the closed {rs.kind.value}-chamber")
        x.setflags(write=False)
        return cls(x, chamber_contains(rs, x, strict=True))

    def __len__(self):
        return len(self.coords)


def _as_vector(rs: RootSystem, x) -> np.ndarray:
    if isinstance(x, ChamberPoint):
        x = x.coords
    x = np.array(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != rs.n:
        raise UsageError(f"expected a vector of length {rs.n} for {rs}, got shape {x.shape}")
    return x


def chamber_contains(rs: RootSystem, x, strict: bool = False) -> bool:
    """Membership test for the closed (or, with ``strict``, open) Weyl chamber."""
    x = _as_vector(rs, x)
    ge = np.greater if strict else np.greater_equal
    if rs.kind is Kind.D:
        return bool(np.all(ge(x[:-2], x[1:-1])) and ge(x[-2], abs(x[-1])))
    ok = bool(np.all(ge(x[:-1], x[1:])))
    if rs.kind is Kind.B:
        ok = ok and bool(ge(x[-1], 0.0))
    return ok


def _mirrored(kind: Kind) -> bool:
    return kind is not Kind.A


def _collision_scale(x):
    return COLLISION_RTOL * (1.0 + np.max(np.abs(x)))


def check_singularity(rs: RootSystem, x, zero_is_singular: bool) -> None:
    """Raise :class:`SingularityError` if the drift is undefined at ``x``."""
    tol = _collision_scale(x)
    n = rs.n
    for i in range(n):
        for j in range(i + 1, n):
            if abs(x[i] - x[j]) < tol:
                raise SingularityError(f"coordinates {i} and {j} coincide at {x[i]!r}", pair=(i, j))
            if _mirrored(rs.kind) and abs(x[i] + x[j]) < tol:
                raise SingularityError(f"coordinates {i} and -{j} coincide at {x[i]!r}", pair=(i, -j))
        if zero_is_singular and abs(x[i]) < tol:
            raise SingularityError(f"coordinate {i} is zero", pair=(i, None))


def _validated(rs: RootSystem, x, zero_is_singular: bool) -> np.ndarray:
    x = _as_vector(rs, x)
    if not chamber_contains(rs, x, strict=False):
        raise ChamberError(f"{x} is not ordered as a point of the {rs.kind.value}-chamber")
    check_singularity(rs, x, zero_is_singular)
    return x


# -- batched kernels; x has shape (..., N) and is assumed valid -------------


def _inverse_gaps(x):
    diff = x[..., :, None] - x[..., None, :]
    n = x.shape[-1]
    eye = np.eye(n, dtype=bool)
    with np.errstate(divide="ignore"):
        inv = np.where(eye, 0.0, 1.0 / np.where(eye, 1.0, diff))
    return inv, eye


def pair_field(kind: Kind, x: np.ndarray) -> np.ndarray:
    """``sum_{j != i} 1/(x_i - x_j)`` (plus ``1/(x_i + x_j)`` for B and D)."""
    inv, eye = _inverse_gaps(x)
    out = inv.sum(axis=-1)
    if _mirrored(kind):
        s = x[..., :, None] + x[..., None, :]
        out = out + np.where(eye, 0.0, 1.0 / np.where(eye, 1.0, s)).sum(axis=-1)
    return out


def frozen_field(kind: Kind, x: np.ndarray, nu: float | None = None) -> np.ndarray:
    h = pair_field(kind, x)
    if kind is Kind.B and nu:
        h = h + nu / x
    return h


def frozen_jacobian_batch(kind: Kind, x: np.ndarray, nu: float | None = None) -> np.ndarray:
    inv, eye = _inverse_gaps(x)
    off = inv**2
    diag = -off.sum(axis=-1)
    if _mirrored(kind):
        s = x[..., :, None] + x[..., None, :]
        inv_s2 = np.where(eye, 0.0, 1.0 / np.where(eye, 1.0, s) ** 2)
        off = off - inv_s2
        diag = diag - inv_s2.sum(axis=-1)
        if kind is Kind.B and nu:
            diag = diag - nu / x**2
    jac = np.where(eye, 0.0, off)
    idx = np.arange(x.shape[-1])
    jac[..., idx, idx] = diag
    return jac


def drift_batch(m: Multiplicity, x: np.ndarray) -> np.ndarray:
    """Un-normalized Bessel drift for a batch of states (no validation)."""
    drift = m.k * pair_field(m.kind, x)
    if m.kind is Kind.B and m.nu:
        drift = drift + m.nu * m.k / x
    return drift


# -- public, validating operations -----------------------------------------


def bessel_drift(rs: RootSystem, m: Multiplicity, x) -> np.ndarray:
    """Full drift ``(1/2) grad log w_k`` of the Bessel SDE at ``x``."""
    if m.kind is not rs.kind:
        raise UsageError(f"multiplicity of type {m.kind.value} used with root system {rs}")
    x = _validated(rs, x, zero_is_singular=rs.kind is Kind.B and not m.degenerate)
    return drift_batch(m, x)


def _frozen_args(rs: RootSystem, nu, x) -> np.ndarray:
    if rs.kind is Kind.B:
        if nu is None or nu < 0:
            raise UsageError("type B frozen drift needs nu >= 0")
        # nu = 0 with a zero coordinate is deliberately rejected: that face is
        # reached only through the type-D reduction.
        return _validated(rs, x, zero_is_singular=True)
    if nu is not None:
        raise UsageError(f"nu is only meaningful for type B, got nu={nu!r}")
    return _validated(rs, x, zero_is_singular=False)


def frozen_drift(rs: RootSystem, nu, x) -> np.ndarray:
    """The frozen vector field ``H(x)``."""
    x = _frozen_args(rs, nu, x)
    return frozen_field(rs.kind, x, nu)


def frozen_drift_jacobian(rs: RootSystem, nu, x) -> np.ndarray:
    """Closed-form Jacobian ``dH_i/dx_j``."""
    x = _frozen_args(rs, nu, x)
    return frozen_jacobian_batch(rs.kind, x, nu)
