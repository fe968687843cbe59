"""Circuit geometry of the two-qubit-reset Floquet quantum contact process.

One period is four layers of controlled-R_x gates followed by one layer of
two-site resets on the aligned pairs ``(2k, 2k+1)``::

    L1  (2k, 2k+1)    control left
    L2  (2k, 2k+1)    control right
    L3  (2k+1, 2k+2)  control left
    L4  (2k+1, 2k+2)  control right
    R   (2k, 2k+1)    reset to |00> with probability p

The gate is ``exp(-i theta |1><1| (x) X / 2)``: it rotates the target only when
the control is |1>, so the all-zero configuration is a fixed point.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import InvalidParams

N_LAYERS = 4

# (offset of the pair's left site, control is left?)
LAYER_LAYOUT = (
    (0, True),
    (0, False),
    (1, True),
    (1, False),
)


@dataclass(frozen=True)
class ModelParams:
    theta: float
    p: float
    t_max: int
    origin: int = 0

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise InvalidParams(f"theta must be finite, got {self.theta}")
        if not (0.0 <= self.p <= 1.0):
            raise InvalidParams(f"p must lie in [0, 1], got {self.p}")
        if int(self.t_max) != self.t_max or self.t_max < 0:
            raise InvalidParams(f"t_max must be a non-negative integer, got {self.t_max}")


@dataclass(frozen=True)
class SpacetimePoint:
    r: int
    t: int

    def __post_init__(self):
        if self.t < 1:
            raise InvalidParams(f"period index is 1-based, got t={self.t}")


@dataclass(frozen=True)
class Period:
    gate_layers: tuple  # 4 tuples of (control, target)
    reset_layer: tuple  # tuple of ((a, a+1), block)


@dataclass(frozen=True)
class CircuitSpec:
    periods: tuple
    site_range: tuple  # inclusive (lo, hi)
    origin: int = 0

    @property
    def t_max(self):
        return len(self.periods)

    @property
    def n_sites(self):
        return self.site_range[1] - self.site_range[0] + 1

    def sites(self):
        return range(self.site_range[0], self.site_range[1] + 1)

    def blocks(self):
        """Block indices ``k`` of the reset pairs ``(2k, 2k+1)``."""
        return list(range(self.site_range[0] // 2, self.site_range[1] // 2 + 1))

    def reset_slots(self):
        """All ``(block, period)`` pairs, 1-based periods."""
        return [(k, t) for t in range(1, self.t_max + 1) for k in self.blocks()]

    def to_dict(self):
        return {
            "site_range": list(self.site_range),
            "origin": self.origin,
            "periods": [
                {
                    "gate_layers": [[list(g) for g in layer] for layer in per.gate_layers],
                    "reset_layer": [[list(pair), k] for pair, k in per.reset_layer],
                }
                for per in self.periods
            ],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def flip_prob(theta):
    """Probability that an active control flips its target in the dephased limit."""
    return math.sin(theta / 2.0) ** 2


def layer_pairs(layer, lo, hi):
    """(control, target) pairs of gate layer ``layer`` (0-based) inside [lo, hi]."""
    offset, control_left = LAYER_LAYOUT[layer]
    start = lo + ((lo - offset) % 2)
    out = []
    for a in range(start, hi, 2):
        b = a + 1
        out.append((a, b) if control_left else (b, a))
    return out


def causal_cone(t, origin=0):
    """Inclusive site interval that activity can reach from ``origin`` in ``t`` periods.

    Traced on the gate adjacency: a site joins the cone once a gate has it as
    target and an in-cone site as control.
    """
    if t < 0:
        raise InvalidParams(f"t must be non-negative, got {t}")
    lo = hi = origin
    for _ in range(t):
        for layer in range(N_LAYERS):
            for c, tg in layer_pairs(layer, lo - 2, hi + 2):
                if lo <= c <= hi:
                    lo, hi = min(lo, tg), max(hi, tg)
    return lo, hi


def build_circuit(params):
    """Lay out ``params.t_max`` periods on a lattice covering the causal cone."""
    if not isinstance(params, ModelParams):
        raise InvalidParams("expected ModelParams")
    lo, hi = causal_cone(params.t_max, params.origin)
    # pad so reset pairs (2k, 2k+1) are whole
    lo -= lo % 2
    hi += 1 - hi % 2
    gate_layers = tuple(tuple(layer_pairs(layer, lo, hi)) for layer in range(N_LAYERS))
    resets = tuple(((a, a + 1), a // 2) for a in range(lo, hi, 2))
    periods = tuple(Period(gate_layers, resets) for _ in range(params.t_max))
    return CircuitSpec(periods=periods, site_range=(lo, hi), origin=params.origin)
