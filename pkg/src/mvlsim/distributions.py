"""Bounded distributions specified by their observed mean, sd and range.

Published summaries give the moments of the *truncated* sample, so the
underlying (pre-truncation) location and scale are solved for numerically
such that the truncated distribution reproduces those moments.  Sampling is
plain rejection from the underlying normal/lognormal.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import optimize
from scipy.special import logsumexp

log = logging.getLogger(__name__)

FAMILIES = ("normal", "lognormal")
MIN_ACCEPTANCE = 1e-3
FALLBACK_MIN_ACCEPTANCE = 0.05
MAX_REJECTIONS = 100_000

_NODES, _WEIGHTS = leggauss(32)


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class Fit:
    loc: float
    scale: float
    mean: float
    sd: float
    acceptance: float
    exact: bool


@dataclass(frozen=True)
class TruncatedDist:
    """Target moments on [low, high]; ``integer`` rounds draws to the nearest integer."""

    mean: float
    sd: float
    low: float
    high: float
    family: str = "normal"
    integer: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DistributionError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not self.low <= self.high:
            raise DistributionError(f"range [{self.low}, {self.high}] has low > high")
        if not self.low <= self.mean <= self.high:
            raise DistributionError(f"mean {self.mean} outside range [{self.low}, {self.high}]")
        if self.sd < 0:
            raise DistributionError("sd must be >= 0")
        if self.family == "lognormal" and self.low <= (0.5 if self.integer else 0):
            raise DistributionError("lognormal family needs a positive lower bound")

    @property
    def degenerate(self) -> bool:
        return self.sd == 0 or self.low == self.high

    def fit(self) -> Fit:
        return _fit(self)

    def sample(self, rng: np.random.Generator):
        if self.degenerate:
            return int(round(self.mean)) if self.integer else float(self.mean)
        f = self.fit()
        lo, hi = (self.low - 0.5, self.high + 0.5) if self.integer else (self.low, self.high)
        for _ in range(MAX_REJECTIONS):
            z = f.loc + f.scale * rng.standard_normal()
            x = math.exp(z) if self.family == "lognormal" else z
            if self.integer:
                if lo <= x < hi:
                    return int(math.floor(x + 0.5))
            elif lo <= x <= hi:
                return x
        raise DistributionError(f"rejection sampler exceeded {MAX_REJECTIONS} draws for {self}")


def _grid(d: TruncatedDist):
    if d.integer:
        edges = np.arange(d.low - 0.5, d.high + 1.0, 1.0)
    else:
        edges = np.linspace(d.low, d.high, 65)
    a, b = edges[:-1, None], edges[1:, None]
    x = (b - a) / 2 * _NODES + (a + b) / 2
    w = (b - a) / 2 * _WEIGHTS
    if d.integer:
        values = np.floor(x + 0.5)
    else:
        values = x
    return x.ravel(), np.log(w.ravel()), values.ravel()


def _moments(d: TruncatedDist, loc: float, scale: float, grid=None):
    x, logw, values = grid if grid is not None else _grid(d)
    if d.family == "lognormal":
        t = np.log(x)
        logjac = -t
    else:
        t = x
        logjac = 0.0
    logpdf = -0.5 * ((t - loc) / scale) ** 2 - math.log(scale) - 0.5 * math.log(2 * math.pi) + logjac
    lw = logpdf + logw
    log_mass = logsumexp(lw)
    p = np.exp(lw - log_mass)
    mean = float(np.dot(p, values))
    var = float(np.dot(p, (values - mean) ** 2))
    return mean, math.sqrt(max(var, 0.0)), math.exp(min(log_mass, 0.0))


def _initial_guess(d: TruncatedDist):
    if d.family == "lognormal":
        cv2 = (d.sd / d.mean) ** 2
        s2 = math.log1p(cv2)
        return math.log(d.mean) - s2 / 2, 0.5 * math.log(s2)
    return d.mean, math.log(d.sd)


@lru_cache(maxsize=64)
def _fit(d: TruncatedDist) -> Fit:
    grid = _grid(d)

    def resid(p):
        m, s, _ = _moments(d, p[0], math.exp(p[1]), grid)
        return [(m - d.mean) / d.sd, (s - d.sd) / d.sd]

    loc0, lscale0 = _initial_guess(d)
    for start in ((loc0, lscale0), (loc0, lscale0 + 1.0), (loc0 - 1.0, lscale0 + 0.5)):
        sol = optimize.least_squares(resid, start, xtol=1e-14, ftol=1e-14, gtol=1e-14)
        loc, scale = float(sol.x[0]), math.exp(sol.x[1])
        mean, sd, acc = _moments(d, loc, scale, grid)
        if max(abs(r) for r in sol.fun) < 1e-7 and acc >= MIN_ACCEPTANCE:
            return Fit(loc, scale, mean, sd, acc, True)
    return _fit_mean_only(d, grid)


def _fit_mean_only(d: TruncatedDist, grid) -> Fit:
    """Exact mean, sd as close to target as a samplable member of the family allows."""
    if d.family == "lognormal":
        tlo, thi = math.log(d.low), math.log(d.high)
    else:
        tlo, thi = d.low, d.high
    width = thi - tlo
    best = None
    for scale in width * np.geomspace(0.02, 20.0, 80):

        def f(loc):
            return _moments(d, loc, scale, grid)[0] - d.mean

        lo, hi = tlo - 200 * scale, thi + 200 * scale
        try:
            loc = optimize.brentq(f, lo, hi, xtol=1e-12)
        except ValueError:
            continue
        mean, sd, acc = _moments(d, loc, scale, grid)
        if acc < FALLBACK_MIN_ACCEPTANCE:
            continue
        if best is None or abs(sd - d.sd) < abs(best.sd - d.sd):
            best = Fit(float(loc), float(scale), mean, sd, acc, False)
    if best is None:
        raise DistributionError(f"cannot fit a samplable {d.family} distribution to {d}")
    log.warning(
        "target sd %.4g unattainable for truncated %s on [%g, %g]; using sd %.4g with exact mean",
        d.sd, d.family, d.low, d.high, best.sd,
    )
    return best
