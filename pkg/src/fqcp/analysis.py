"""Effective exponents, crossing estimates and bootstrap errors."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCrossing, NonpositiveValue, TooFewSamples


@dataclass(frozen=True)
class EffExpSeries:
    dt: int
    values: dict  # t -> delta(t)
    p: float | None = None
    base: dict = field(default_factory=dict, repr=False)

    def times(self):
        return sorted(self.values)

    def at(self, t):
        return self.values[t]


def effective_exponent(series, dt, p=None, times=None):
    """Forward log-derivative ``delta(t)`` of ``series`` (a mapping ``t -> O(t)``).

    Evaluated at every ``t > 0`` with ``t + dt`` also present, or at ``times``
    when given.  Raises :class:`NonpositiveValue` where a logarithm is taken
    of a value that is not positive.
    """
    if dt < 1:
        raise ValueError("dt must be >= 1")
    data = {int(t): float(v) for t, v in dict(series).items()}
    cand = sorted(data) if times is None else sorted(int(t) for t in times)
    out = {}
    for t in cand:
        if t <= 0 or t + dt not in data:
            if times is not None:
                raise KeyError(f"series lacks t={t} or t+dt={t + dt}")
            continue
        a, b = data[t], data[t + dt]
        if not a > 0:
            raise NonpositiveValue(t)
        if not b > 0:
            raise NonpositiveValue(t + dt)
        out[t] = (math.log(b) - math.log(a)) / (math.log(t + dt) - math.log(t))
    return EffExpSeries(dt, out, p, data)


@dataclass(frozen=True)
class Crossing:
    p_c: float
    delta_c: float
    pairs: list  # (t1, t2, p, delta) for each adjacent time pair that crosses
    skipped: list  # adjacent time pairs without a crossing inside the grid

    @property
    def p_scatter(self):
        ps = [c[2] for c in self.pairs]
        return float(np.std(ps, ddof=1)) if len(ps) > 1 else 0.0

    @property
    def delta_scatter(self):
        ds = [c[3] for c in self.pairs]
        return float(np.std(ds, ddof=1)) if len(ds) > 1 else 0.0

    def to_dict(self):
        return {
            "p_c": self.p_c,
            "delta_c": self.delta_c,
            "p_scatter": self.p_scatter,
            "delta_scatter": self.delta_scatter,
            "pairs": [{"t1": a, "t2": b, "p": p, "delta": d} for a, b, p, d in self.pairs],
            "skipped": [list(s) for s in self.skipped],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _pair_crossing(ps, d1, d2):
    """First sign change of ``d2 - d1`` along the p grid, linearly interpolated."""
    diff = d2 - d1
    for i in range(len(ps) - 1):
        a, b = diff[i], diff[i + 1]
        if a == 0.0:
            return ps[i], d1[i]
        if a * b < 0:
            w = a / (a - b)
            p = ps[i] + w * (ps[i + 1] - ps[i])
            return p, d1[i] + w * (d1[i + 1] - d1[i])
    if diff[-1] == 0.0:
        return ps[-1], d1[-1]
    return None


def crossing_estimate(curves, times):
    """Locate where effective-exponent curves for different p cross.

    ``curves`` maps p to an :class:`EffExpSeries`; for each adjacent pair of
    ``times`` the crossing of ``delta(p; t1)`` and ``delta(p; t2)`` is found by
    linear interpolation in p.  Pairs that do not cross inside the grid are
    listed in ``skipped``; if none crosses, :class:`NoCrossing` is raised.
    """
    ps = sorted(curves)
    ts = list(times)
    if len(ps) < 2 or len(ts) < 2:
        raise ValueError("need at least two p values and two times")
    grid = np.array([[curves[p].at(t) for t in ts] for p in ps])
    pairs, skipped = [], []
    for j in range(len(ts) - 1):
        hit = _pair_crossing(np.array(ps, float), grid[:, j], grid[:, j + 1])
        if hit is None:
            skipped.append((ts[j], ts[j + 1]))
        else:
            pairs.append((ts[j], ts[j + 1], float(hit[0]), float(hit[1])))
    if not pairs:
        raise NoCrossing(f"no crossing inside p grid {ps} for times {ts}")
    return Crossing(
        float(np.mean([c[2] for c in pairs])),
        float(np.mean([c[3] for c in pairs])),
        pairs,
        skipped,
    )


def bootstrap_se(values, statistic=None, resamples=200, seed=0, weights=None):
    """Bootstrap standard error of ``statistic`` over shots.

    ``values`` has one row per shot.  With ``weights`` the statistic is called
    as ``statistic(values, weights)`` and weights are resampled with their
    rows; the default statistic is then the weighted mean ``sum(w v) / M``.
    """
    v = np.asarray(values, dtype=float)
    m = v.shape[0]
    if m < 2:
        raise TooFewSamples(f"need >= 2 samples, got {m}")
    w = None if weights is None else np.asarray(weights, dtype=float)
    if statistic is None:
        if w is None:
            def statistic(x):
                return x.mean(axis=0)
        else:
            def statistic(x, ww):
                return (ww.reshape((-1,) + (1,) * (x.ndim - 1)) * x).mean(axis=0)
    rng = np.random.default_rng(seed)
    stats = []
    for _ in range(resamples):
        idx = rng.integers(0, m, size=m)
        stats.append(statistic(v[idx]) if w is None else statistic(v[idx], w[idx]))
    return np.std(np.asarray(stats), axis=0, ddof=1)
