"""Counter-based sampling, base distributions, and parameter transforms.

Randomness is a pure function of (seed, stream, sample index, coordinate):
draws are generated by hashing the four counters through a 64-bit finaliser
chain, so any sample can be regenerated in isolation, out of order, or from
a different worker partition, bit-for-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import ndtri

_U64 = np.uint64
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)
_SALTS = (_U64(0xD6E8FEB86659FD93), _U64(0xA5CB3F2D1E096FAD),
          _U64(0xC2B2AE3D27D4EB4F), _U64(0x165667B19E3779F9))


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finaliser: a bijective 64-bit scramble
    z = (z ^ (z >> _U64(30))) * _M1
    z = (z ^ (z >> _U64(27))) * _M2
    return z ^ (z >> _U64(31))


@dataclass(frozen=True)
class RngStream:
    """A named sequence of i.i.d. draws under a fixed seed.

    Distinct streams under one seed are independent; within a stream, draw
    ``index`` is independent of every other index.
    """
    seed: int
    stream: int = 0


def uniform_block(rng: RngStream, indices, n_coords: int) -> np.ndarray:
    """Open-interval (0,1) uniforms, shape (len(indices), n_coords)."""
    mask = (1 << 64) - 1
    idx = np.asarray(indices, dtype=np.uint64).reshape(-1, 1)
    coord = np.arange(n_coords, dtype=np.uint64).reshape(1, -1)
    # seed/stream are folded in as python ints (arbitrary precision, no
    # scalar-overflow warnings), the per-draw counters as wrapping arrays
    s0 = np.atleast_1d(_U64((rng.seed + int(_SALTS[0])) & mask))
    h = _mix(s0)
    h = _mix(h ^ _U64((rng.stream + int(_SALTS[1])) & mask))
    h = _mix(h ^ (idx + _SALTS[2]))
    h = _mix(h ^ (coord + _SALTS[3]))
    return ((h >> _U64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


# --------------------------------------------------------------------------
# Base distributions (inverse-CDF sampling so draws stay counter-addressed)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StdNormal:
    n: int


@dataclass(frozen=True)
class HalfNormal:
    n: int
    sigma: float = 1.0


@dataclass(frozen=True)
class Exponential:
    n: int
    rate: float = 1.0


@dataclass(frozen=True)
class Logistic:
    n: int
    mu: float = 0.0
    s: float = 1.0


BaseDistribution = Union[StdNormal, HalfNormal, Exponential, Logistic]


def sample_block(dist: BaseDistribution, rng: RngStream, indices) -> np.ndarray:
    """Draw vectors for the given sample indices, shape (B, dist.n)."""
    u = uniform_block(rng, indices, dist.n)
    match dist:
        case StdNormal():
            return ndtri(u)
        case HalfNormal(_, sigma):
            return sigma * ndtri(0.5 * (1.0 + u))
        case Exponential(_, rate):
            return -np.log1p(-u) / rate
        case Logistic(_, mu, s):
            return mu + s * (np.log(u) - np.log1p(-u))
    raise TypeError(f"not a base distribution: {dist!r}")


def sample(dist: BaseDistribution, rng: RngStream, index: int) -> np.ndarray:
    return sample_block(dist, rng, [index])[0]


_LOG_2PI = math.log(2.0 * math.pi)


def logpdf(dist: BaseDistribution, x) -> float:
    """Log density of a full vector draw (sum over coordinates)."""
    x = np.asarray(x, dtype=float)
    match dist:
        case StdNormal():
            return float(np.sum(-0.5 * _LOG_2PI - 0.5 * x * x))
        case HalfNormal(_, sigma):
            if np.any(x < 0.0):
                return -math.inf
            return float(np.sum(0.5 * math.log(2.0) - 0.5 * math.log(math.pi)
                                - math.log(sigma) - x * x / (2.0 * sigma ** 2)))
        case Exponential(_, rate):
            if np.any(x < 0.0):
                return -math.inf
            return float(np.sum(math.log(rate) - rate * x))
        case Logistic(_, mu, s):
            t = np.abs((x - mu) / s)
            return float(np.sum(-t - 2.0 * np.log1p(np.exp(-t)) - math.log(s)))
    raise TypeError(f"not a base distribution: {dist!r}")


# --------------------------------------------------------------------------
# Per-coordinate parameter transforms x = mu(theta) + sigma(theta) * s
# --------------------------------------------------------------------------
#
# Rules are encoded as tagged tuples so configs can spell them directly:
#   mu    : ("theta", i) | ("const", c)
#   sigma : ("exp", i) | ("softplus", i) | ("linear", i) | ("const", c)
# Fixed coordinates pass the base draw through untouched.

SIGMA_FLOOR = 1e-4


@dataclass(frozen=True)
class LocationScale:
    mu: tuple
    sigma: tuple


@dataclass(frozen=True)
class Fixed:
    pass


@dataclass(frozen=True)
class ParamBox:
    """Axis-aligned feasible region for theta."""
    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box bounds must have equal length")
        if any(l > u for l, u in zip(self.lower, self.upper)):
            raise ValueError("box has empty interior")

    @property
    def m(self) -> int:
        return len(self.lower)


def _softplus(t):
    return np.logaddexp(0.0, t)


def _sigmoid(t):
    e = np.exp(-np.abs(t))
    return np.where(np.asarray(t) >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass(frozen=True)
class Transform:
    coords: tuple  # of LocationScale | Fixed

    @property
    def n(self) -> int:
        return len(self.coords)

    def _mu_sigma(self, theta):
        theta = np.asarray(theta, dtype=float)
        mu = np.zeros(self.n)
        sg = np.ones(self.n)
        for j, c in enumerate(self.coords):
            if isinstance(c, Fixed):
                continue
            tag, ref = c.mu
            mu[j] = theta[ref] if tag == "theta" else ref
            stag, sref = c.sigma
            if stag == "exp":
                sg[j] = math.exp(theta[sref])
            elif stag == "softplus":
                sg[j] = float(_softplus(theta[sref])) + SIGMA_FLOOR
            elif stag == "linear":
                sg[j] = theta[sref]
            else:
                sg[j] = sref
        return mu, sg

    def apply(self, theta, s) -> np.ndarray:
        """x = mu + sigma * s, elementwise over the trailing axis."""
        mu, sg = self._mu_sigma(theta)
        return mu + sg * np.asarray(s, dtype=float)

    def log_abs_det_jacobian(self, theta, s=None) -> float:
        _, sg = self._mu_sigma(theta)
        return float(np.sum(np.log(sg)))

    def theta_rows(self, theta, s_block):
        """Chain-rule hooks d x_j / d theta_i evaluated on a draw block.

        Yields (coord j, theta index i, coefficient array over the block).
        """
        s_block = np.atleast_2d(np.asarray(s_block, dtype=float))
        theta = np.asarray(theta, dtype=float)
        _, sg = self._mu_sigma(theta)
        ones = np.ones(s_block.shape[0])
        for j, c in enumerate(self.coords):
            if isinstance(c, Fixed):
                continue
            tag, ref = c.mu
            if tag == "theta":
                yield j, ref, ones
            stag, sref = c.sigma
            if stag == "exp":
                yield j, sref, s_block[:, j] * sg[j]
            elif stag == "softplus":
                yield j, sref, s_block[:, j] * float(_sigmoid(theta[sref]))
            elif stag == "linear":
                yield j, sref, s_block[:, j]

    def score_rows(self, theta, s_block, m: int) -> np.ndarray:
        """d log q_theta(x) / d theta at x = apply(theta, s), shape (B, m).

        Valid for a standard-normal base: the density of x is the product of
        N(mu_j, sigma_j^2) over transformed coordinates.
        """
        s_block = np.atleast_2d(np.asarray(s_block, dtype=float))
        theta = np.asarray(theta, dtype=float)
        _, sg = self._mu_sigma(theta)
        rows = np.zeros((s_block.shape[0], m))
        for j, c in enumerate(self.coords):
            if isinstance(c, Fixed):
                continue
            tag, ref = c.mu
            if tag == "theta":
                rows[:, ref] += s_block[:, j] / sg[j]
            stag, sref = c.sigma
            ssq = s_block[:, j] ** 2 - 1.0
            if stag == "exp":
                rows[:, sref] += ssq              # (s^2-1)/sigma * dsigma/dtheta
            elif stag == "softplus":
                rows[:, sref] += ssq / sg[j] * float(_sigmoid(theta[sref]))
            elif stag == "linear":
                rows[:, sref] += ssq / sg[j]
        return rows

    def log_sigma_sum_and_grad(self, theta, m: int):
        """Sum of log sigma_j(theta) and its gradient (entropy-style bonus)."""
        theta = np.asarray(theta, dtype=float)
        _, sg = self._mu_sigma(theta)
        total = 0.0
        grad = np.zeros(m)
        for j, c in enumerate(self.coords):
            if isinstance(c, Fixed):
                continue
            total += math.log(sg[j])
            stag, sref = c.sigma
            if stag == "exp":
                grad[sref] += 1.0
            elif stag == "softplus":
                grad[sref] += float(_sigmoid(theta[sref])) / sg[j]
            elif stag == "linear":
                grad[sref] += 1.0 / sg[j]
        return total, grad


class TransformViolation(ValueError):
    pass


@dataclass(frozen=True)
class TransformCheck:
    ok: bool
    sigma_min: float
    issues: tuple


def validate_transform(t: Transform, box: ParamBox) -> TransformCheck:
    """Interval-arithmetic check that every scale stays bounded away from 0.

    The scale infimum over the box must be strictly positive, otherwise the
    transform can degenerate and pathwise gradients blow up.
    """
    issues: list[str] = []
    sigma_min = math.inf
    lo, hi = np.asarray(box.lower, float), np.asarray(box.upper, float)

    def need_index(i):
        if not (0 <= i < box.m):
            issues.append(f"theta index {i} outside box dimension {box.m}")
            return False
        return True

    for j, c in enumerate(t.coords):
        if isinstance(c, Fixed):
            continue
        tag, ref = c.mu
        if tag == "theta":
            need_index(ref)
        stag, sref = c.sigma
        if stag == "exp":
            if need_index(sref):
                sigma_min = min(sigma_min, math.exp(lo[sref]))
        elif stag == "softplus":
            if need_index(sref):
                sigma_min = min(sigma_min, float(_softplus(lo[sref])) + SIGMA_FLOOR)
        elif stag == "linear":
            if need_index(sref):
                inf_j = lo[sref]
                sigma_min = min(sigma_min, inf_j)
                if inf_j <= 0.0:
                    issues.append(
                        f"coord {j}: raw scale theta_{sref} has infimum "
                        f"{inf_j} <= 0 over the box")
        elif stag == "const":
            sigma_min = min(sigma_min, sref)
            if sref <= 0.0:
                issues.append(f"coord {j}: constant scale {sref} <= 0")
        else:
            issues.append(f"coord {j}: unknown scale rule {stag!r}")
        if tag not in ("theta", "const"):
            issues.append(f"coord {j}: unknown location rule {tag!r}")
    return TransformCheck(not issues, sigma_min, tuple(issues))
