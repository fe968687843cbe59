"""Post-selection-free adaptive protocol: calibration, injection, main run, reweighting.

Every reset slot ``(r, t)`` is identified by the block index ``r`` of the
pair ``(2r, 2r+1)`` and the 1-based period ``t``.  At each slot the backend
is asked for a detection first; only if nothing was detected does an
injected reset fire with probability ``p_inject(r, t)``.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateRate, DetectionExceedsTarget, InvalidParams, UnknownKind
from .model import LAYER_LAYOUT, CircuitSpec, flip_prob
from .rng import CH_DETECT, CH_INJECT, CH_NOISE, derive_seed, key_uniform

EVENT_KINDS = (
    "none",
    "injected",
    "detected_sx",
    "detected_sz",
    "detected_leakage",
    "detected_gadget",
)
DETECTED_KINDS = EVENT_KINDS[2:]
_KIND_CODE = {k: i for i, k in enumerate(EVENT_KINDS)}


# -- rate fields ---------------------------------------------------------------


@dataclass(frozen=True)
class RateField:
    """Probabilities on the reset slots ``(r, t)`` of a circuit."""

    values: dict

    def __post_init__(self):
        for pt, v in self.values.items():
            if not (0.0 <= v <= 1.0) or not math.isfinite(v):
                raise InvalidParams(f"rate {v} at {pt} outside [0, 1]")

    @classmethod
    def uniform(cls, circuit, value):
        return cls({slot: float(value) for slot in circuit.reset_slots()})

    @classmethod
    def from_function(cls, circuit, fn):
        return cls({(r, t): float(fn(r, t)) for r, t in circuit.reset_slots()})

    @classmethod
    def from_array(cls, circuit, arr):
        blocks = circuit.blocks()
        return cls({(r, t): float(arr[t - 1, j]) for t in range(1, circuit.t_max + 1)
                    for j, r in enumerate(blocks)})

    def __getitem__(self, pt):
        return self.values[pt]

    def __len__(self):
        return len(self.values)

    def points(self):
        return sorted(self.values, key=lambda rt: (rt[1], rt[0]))

    def domain(self):
        return set(self.values)

    def matches(self, circuit):
        return self.domain() == set(circuit.reset_slots())

    def as_array(self, circuit):
        """``(t_max, n_blocks)`` array in the block order of ``circuit.blocks()``."""
        blocks = circuit.blocks()
        out = np.zeros((circuit.t_max, len(blocks)))
        for j, r in enumerate(blocks):
            for t in range(1, circuit.t_max + 1):
                out[t - 1, j] = self.values[(r, t)]
        return out

    def max(self):
        return max(self.values.values()) if self.values else 0.0

    def to_rows(self):
        return [(t, r, self.values[(r, t)]) for r, t in self.points()]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "r", "p"])
            for t, r, p in self.to_rows():
                w.writerow([t, r, repr(float(p))])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls({(int(row["r"]), int(row["t"])): float(row["p"]) for row in rows})


def injection_field(p_target, detect):
    """Pointwise ``(p - p_detect) / (1 - p_detect)``.

    Raises :class:`DetectionExceedsTarget` listing every point where the
    detection rate is already above ``p_target``.
    """
    if not 0.0 <= p_target <= 1.0:
        raise InvalidParams(f"p_target {p_target} outside [0, 1]")
    bad = sorted((pt for pt, d in detect.values.items() if d > p_target),
                 key=lambda rt: (rt[1], rt[0]))
    if bad:
        raise DetectionExceedsTarget(bad, p_target)
    out = {}
    for pt, d in detect.values.items():
        out[pt] = 0.0 if d >= 1.0 else (p_target - d) / (1.0 - d)
    return RateField(out)


# -- shot records --------------------------------------------------------------


@dataclass
class ShotRecord:
    shot: int
    seed: int
    events: dict  # (r, t) -> kind, only slots with a reset
    final_bits: dict  # site -> bit after the last period
    n_right: list = field(default_factory=list)  # N_R(t) for t = 0..t_max
    weight: float | None = None

    def m(self, r, t):
        return 1 if self.events.get((r, t), "none") != "none" else 0

    def to_json(self):
        d = {
            "shot": self.shot,
            "seed": self.seed,
            "events": [{"r": r, "t": t, "kind": k}
                       for (r, t), k in sorted(self.events.items(), key=lambda e: (e[0][1], e[0][0]))],
            "final_bits": {str(s): b for s, b in sorted(self.final_bits.items())},
            "n_right": list(self.n_right),
        }
        if self.weight is not None:
            d["weight"] = self.weight
        return json.dumps(d, separators=(",", ":"))

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        return cls(
            shot=int(d["shot"]),
            seed=int(d["seed"]),
            events={(int(e["r"]), int(e["t"])): e["kind"] for e in d["events"]},
            final_bits={int(s): int(b) for s, b in d["final_bits"].items()},
            n_right=[int(v) for v in d.get("n_right", [])],
            weight=d.get("weight"),
        )


def write_records(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_records(path):
    with open(path) as fh:
        return [ShotRecord.from_json(line) for line in fh if line.strip()]


# -- synthetic backend ---------------------------------------------------------

_LAYER_OFFSET = np.array([o for o, _ in LAYER_LAYOUT], dtype=np.int64)
_LAYER_CTRL_LEFT = np.array([c for _, c in LAYER_LAYOUT], dtype=np.bool_)
_KIND_SALT = 1 << 20


@njit(cache=True, nogil=True)
def _synthetic_block(seed, shot_lo, shot_hi, t_max, flip, site_lo, n_sites, origin_idx,
                     layer_offset, layer_ctrl_left, detect, inject, lerr, lerr_mask,
                     kind_cum, events, nr, final_bits):
    n_blocks = n_sites // 2
    bits = np.zeros(n_sites, dtype=np.uint8)
    for shot in range(shot_lo, shot_hi):
        row = shot - shot_lo
        bits[:] = 0
        bits[origin_idx] = 1
        nr[row, 0] = 1
        for t in range(1, t_max + 1):
            for layer in range(4):
                off = layer_offset[layer]
                a = 0 if (site_lo - off) % 2 == 0 else 1
                while a + 1 < n_sites:
                    if layer_ctrl_left[layer]:
                        c, tg = a, a + 1
                    else:
                        c, tg = a + 1, a
                    if bits[c] == 1:
                        if key_uniform(seed, shot, t, layer, a + site_lo) < flip:
                            bits[tg] ^= 1
                    a += 2
            for b in range(n_blocks):
                a = 2 * b
                blk = (a + site_lo) // 2
                if lerr[t - 1, b] > 0.0:
                    if key_uniform(seed, shot, t, CH_NOISE, blk) < lerr[t - 1, b]:
                        if lerr_mask & 1:
                            bits[a] ^= 1
                        if lerr_mask & 2:
                            bits[a + 1] ^= 1
                code = 0
                if detect[t - 1, b] > 0.0 and key_uniform(seed, shot, t, CH_DETECT, blk) < detect[t - 1, b]:
                    u = key_uniform(seed, shot, t, CH_DETECT, blk + _KIND_SALT)
                    code = 2
                    for k in range(len(kind_cum)):
                        if u < kind_cum[k]:
                            code = 2 + k
                            break
                elif inject[t - 1, b] > 0.0 and key_uniform(seed, shot, t, CH_INJECT, blk) < inject[t - 1, b]:
                    code = 1
                if code != 0:
                    bits[a] = 0
                    bits[a + 1] = 0
                events[row, t - 1, b] = code
            s = 0
            for i in range(origin_idx, n_sites):
                s += bits[i]
            nr[row, t] = s
        final_bits[row, :] = bits


@dataclass
class SyntheticBackend:
    """Dephased-limit model state with detections drawn from a rate field.

    ``logical_error_field`` optionally flips the block's bits (an undetected
    logical ``X`` error, ``logical_pauli`` in ``X1``/``X2``/``X1X2``) just
    before the slot's detection check.
    """

    theta: float
    detect_field: RateField | None = None
    logical_error_field: RateField | None = None
    logical_pauli: str = "X1"
    kind_weights: dict = field(default_factory=lambda: {"detected_sx": 1.0, "detected_sz": 1.0})
    kind: str = "synthetic"

    def __post_init__(self):
        if self.logical_pauli not in ("X1", "X2", "X1X2"):
            raise InvalidParams(f"unknown logical Pauli {self.logical_pauli}")
        for k, w in self.kind_weights.items():
            if k not in DETECTED_KINDS or w < 0:
                raise InvalidParams(f"bad detection kind weight {k}={w}")

    def _arrays(self, circuit, injection):
        shape = (circuit.t_max, len(circuit.blocks()))
        det = self.detect_field.as_array(circuit) if self.detect_field else np.zeros(shape)
        inj = injection.as_array(circuit) if injection is not None else np.zeros(shape)
        le = self.logical_error_field.as_array(circuit) if self.logical_error_field else np.zeros(shape)
        return det, inj, le

    def _kind_cum(self):
        w = np.array([self.kind_weights.get(k, 0.0) for k in DETECTED_KINDS], dtype=float)
        if w.sum() <= 0:
            w[0] = 1.0
        return np.cumsum(w / w.sum())

    def run_block(self, circuit, injection, seed, shot_lo, shot_hi):
        lo, hi = circuit.site_range
        n_sites = hi - lo + 1
        det, inj, le = self._arrays(circuit, injection)
        n = shot_hi - shot_lo
        T = circuit.t_max
        events = np.zeros((n, T, n_sites // 2), dtype=np.int8)
        nr = np.zeros((n, T + 1), dtype=np.int32)
        final_bits = np.zeros((n, n_sites), dtype=np.uint8)
        mask = {"X1": 1, "X2": 2, "X1X2": 3}[self.logical_pauli]
        _synthetic_block(np.uint64(seed), shot_lo, shot_hi, T, flip_prob(self.theta), lo, n_sites,
                         circuit.origin - lo, _LAYER_OFFSET, _LAYER_CTRL_LEFT, det, inj, le,
                         mask, self._kind_cum(), events, nr, final_bits)
        return events, nr, final_bits

    def run(self, circuit, injection, shots, seed, threads=1, chunk=5000):
        bounds = [(s, min(s + chunk, shots)) for s in range(0, shots, chunk)]

        def work(b):
            return b, self.run_block(circuit, injection, seed, b[0], b[1])

        if threads > 1 and len(bounds) > 1:
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(work, bounds))
        else:
            parts = [work(b) for b in bounds]
        blocks = circuit.blocks()
        lo = circuit.site_range[0]
        records = []
        for (s0, _), (events, nr, fb) in parts:
            for i in range(events.shape[0]):
                ev = {}
                for ti, bi in zip(*np.nonzero(events[i])):
                    ev[(blocks[bi], int(ti) + 1)] = EVENT_KINDS[events[i, ti, bi]]
                final = {lo + j: int(v) for j, v in enumerate(fb[i])}
                records.append(ShotRecord(s0 + i, int(seed), ev, final, nr[i].tolist()))
        return records


def make_backend(kind, **params):
    """Construct a noise backend: ``synthetic`` or ``physical_trajectory``."""
    if kind == "synthetic":
        return SyntheticBackend(**params)
    if kind == "physical_trajectory":
        from .physical import PhysicalTrajectoryBackend

        return PhysicalTrajectoryBackend(**params)
    raise UnknownKind(f"unknown backend {kind!r}")


# -- protocol ------------------------------------------------------------------


def _check_shots(shots):
    if int(shots) < 1:
        raise InvalidParams("shots must be >= 1")


def run_calibration(circuit, backend, shots, seed, threads=1):
    """Detection frequencies with injection switched off."""
    _check_shots(shots)
    sub = derive_seed(seed, "calibration")
    records = backend.run(circuit, None, shots, sub, threads=threads)
    counts = {slot: 0 for slot in circuit.reset_slots()}
    for rec in records:
        for slot, kind in rec.events.items():
            if kind in DETECTED_KINDS:
                counts[slot] += 1
    return RateField({slot: c / shots for slot, c in counts.items()})


def run_main(circuit, backend, injection, shots, seed, threads=1):
    """Main run: detections reset their block, otherwise inject at ``injection``."""
    _check_shots(shots)
    if not injection.matches(circuit):
        raise InvalidParams("injection field does not cover the circuit's reset slots")
    sub = derive_seed(seed, "main")
    return backend.run(circuit, injection, shots, sub, threads=threads)


@dataclass(frozen=True)
class EmpiricalRates:
    field: RateField
    degenerate: tuple  # points with p_hat in {0, 1}
    shots: int


def empirical_rates(records, circuit=None):
    """Per-slot fraction of shots with a reset of any kind."""
    if not records:
        raise InvalidParams("need at least one record")
    slots = circuit.reset_slots() if circuit is not None else sorted(
        {s for rec in records for s in rec.events})
    counts = {s: 0 for s in slots}
    for rec in records:
        for s, kind in rec.events.items():
            if kind != "none" and s in counts:
                counts[s] += 1
    m = len(records)
    field_ = RateField({s: c / m for s, c in counts.items()})
    degenerate = tuple(sorted((s for s, v in field_.values.items() if v in (0.0, 1.0)),
                              key=lambda rt: (rt[1], rt[0])))
    return EmpiricalRates(field_, degenerate, m)


@dataclass
class ReweightResult:
    weights: np.ndarray
    log_weights: np.ndarray
    reset_rate: dict  # (r, t) -> weighted mean of m
    reset_rate_se: dict
    n_right: np.ndarray  # weighted N_R(t)
    n_right_se: np.ndarray
    final_density: dict  # site -> weighted final-period density
    clipped: tuple

    @property
    def mean_weight(self):
        return float(self.weights.mean())

    @property
    def weight_se(self):
        return float(self.weights.std(ddof=1) / math.sqrt(len(self.weights)))


def reset_matrix(records, points):
    idx = {pt: j for j, pt in enumerate(points)}
    m = np.zeros((len(records), len(points)), dtype=np.int8)
    for i, rec in enumerate(records):
        for pt, kind in rec.events.items():
            if kind != "none" and pt in idx:
                m[i, idx[pt]] = 1
    return m


def reweight(records, p_target, empirical, strict=False):
    """Importance weights turning the empirical reset pattern into uniform ``p_target``.

    ``empirical`` is a :class:`RateField` or :class:`EmpiricalRates`.
    Degenerate rates (0 or 1) are clipped to ``[1/(2M), 1 - 1/(2M)]`` and
    reported in ``clipped``; with ``strict`` they raise :class:`DegenerateRate`.
    """
    if isinstance(empirical, EmpiricalRates):
        empirical = empirical.field
    M = len(records)
    if M < 1:
        raise InvalidParams("need at least one record")
    points = empirical.points()
    phat = np.array([empirical[pt] for pt in points], dtype=float)
    clipped = []
    interior = 0.0 < p_target < 1.0
    for j, v in enumerate(phat):
        if v in (0.0, 1.0) and interior:
            if strict:
                raise DegenerateRate(points[j])
            clipped.append(points[j])
    lo, hi = 1.0 / (2 * M), 1.0 - 1.0 / (2 * M)
    if interior:
        phat = np.clip(phat, lo, hi)
    mat = reset_matrix(records, points)
    with np.errstate(divide="ignore"):
        lr1 = np.log(p_target) - np.log(phat)
        lr0 = np.log1p(-p_target) - np.log1p(-phat)
    # exact zero when p_hat == p_target so uniform runs stay bit-identical
    lr1 = np.where(phat == p_target, 0.0, lr1)
    lr0 = np.where(phat == p_target, 0.0, lr0)
    logw = np.where(mat == 1, lr1[None, :], lr0[None, :]).sum(axis=1)
    w = np.exp(logw)
    for rec, wi in zip(records, w):
        rec.weight = float(wi)

    def wmean(x):
        x = np.asarray(x, dtype=float)
        y = w.reshape((-1,) + (1,) * (x.ndim - 1)) * x
        mean = y.sum(axis=0) / M
        se = y.std(axis=0, ddof=1) / math.sqrt(M) if M > 1 else np.full_like(mean, np.nan)
        return mean, se

    rate, rate_se = wmean(mat)
    nr, nr_se = wmean(np.array([rec.n_right for rec in records]))
    sites = sorted(records[0].final_bits)
    fd, _ = wmean(np.array([[rec.final_bits[s] for s in sites] for rec in records]))
    return ReweightResult(
        w, logw,
        {pt: float(v) for pt, v in zip(points, rate)},
        {pt: float(v) for pt, v in zip(points, rate_se)},
        nr, nr_se,
        {s: float(v) for s, v in zip(sites, fd)},
        tuple(clipped),
    )


def unweighted_n_right(records):
    arr = np.array([rec.n_right for rec in records], dtype=float)
    M = len(records)
    return arr.sum(axis=0) / M, arr.std(axis=0, ddof=1) / math.sqrt(M)
