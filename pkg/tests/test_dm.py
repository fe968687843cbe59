import itertools
import math

import numpy as np
import pytest

from fqcp.dephased import exact_enumeration
from fqcp.dm import DensityWindow, build_reuse_schedule, run_schedule, simulate, simulate_bruteforce
from fqcp.errors import WindowTooLarge
from fqcp.model import ModelParams, build_circuit, causal_cone

from conftest import THETA


def test_identity_gate():
    for t in (1, 3):
        s = simulate(ModelParams(0.0, 0.0, t))
        assert np.allclose(s.n_right, 1.0)
        assert s.density_at(0, t) == pytest.approx(1.0)
        assert s.density.sum(axis=1) == pytest.approx(np.ones(t + 1))


def test_full_reset():
    s = simulate(ModelParams(THETA, 1.0, 3))
    assert np.allclose(s.n_right[1:], 0.0, atol=1e-14)


def test_bruteforce_t0_and_clifford():
    assert simulate_bruteforce(ModelParams(THETA, 0.2, 0)).n_right[0] == 1.0
    s = simulate_bruteforce(ModelParams(math.pi, 0.0, 1))
    d = s.density
    assert np.all((np.abs(d) < 1e-10) | (np.abs(d - 1) < 1e-10))


@pytest.mark.parametrize("t", [0, 1, 2, 3])
@pytest.mark.parametrize("theta", [0.7, THETA, math.pi])
@pytest.mark.parametrize("p", [0.0, 0.2, 0.6])
def test_reuse_vs_bruteforce(t, theta, p):
    a = simulate(ModelParams(theta, p, t))
    b = simulate_bruteforce(ModelParams(theta, p, t))
    assert np.abs(a.density - b.density).max() < 1e-8
    assert np.abs(a.n_right - b.n_right).max() < 1e-8


def test_theta_pi_matches_classical():
    # flip probability 1: quantum and dephased dynamics coincide on basis states
    for p in (0.0, 0.3):
        q = simulate(ModelParams(math.pi, p, 3))
        c = exact_enumeration(build_circuit(ModelParams(math.pi, p, 3)), math.pi, p)
        assert np.abs(q.n_right - c.n_right).max() < 1e-10


def test_window_invariants_each_step():
    circuit = build_circuit(ModelParams(THETA, 0.3, 3))
    sched = build_reuse_schedule(circuit)
    worst = [0.0, 0.0, 0.0]

    def check(_ins, w):
        m = w.as_matrix()
        worst[0] = max(worst[0], abs(np.trace(m) - 1))
        worst[1] = max(worst[1], np.abs(m - m.T.conj()).max())
        if w.dim <= 2**10:
            worst[2] = min(worst[2], np.linalg.eigvalsh(m).min())

    run_schedule(sched, THETA, 0.3, DensityWindow(), on_step=check)
    assert worst[0] < 1e-10 and worst[1] < 1e-10 and worst[2] > -1e-8


def test_purity_before_first_retirement():
    circuit = build_circuit(ModelParams(THETA, 0.0, 2))
    sched = build_reuse_schedule(circuit)
    retired = [False]
    purities = []

    def check(ins, w):
        if ins[0] == "retire":
            retired[0] = True
        if not retired[0]:
            purities.append(w.purity())

    run_schedule(sched, THETA, 0.0, DensityWindow(), on_step=check)
    assert purities and max(abs(p - 1) for p in purities) < 1e-8


def test_dephase_then_trace_equals_trace():
    circuit = build_circuit(ModelParams(THETA, 0.25, 3))
    sched = build_reuse_schedule(circuit)
    w = DensityWindow()
    checked = 0
    for ins in sched.instructions:
        if ins[0] == "retire":
            k = w.bit(ins[1])
            m = w.as_matrix().copy()
            idx = np.arange(w.dim)
            same = ((idx[:, None] >> k) & 1) == ((idx[None, :] >> k) & 1)
            deph = np.where(same, m, 0.0)
            for other in w.live_sites:
                j = w.bit(other)
                direct = np.diag(m)[(idx >> j) & 1 == 1].sum()
                via = np.diag(deph)[(idx >> j) & 1 == 1].sum()
                assert via == pytest.approx(direct, abs=1e-14)
            checked += 1
        run_schedule(type(sched)([ins], sched.max_live, sched.t_max), THETA, 0.25, w)
    assert checked > 0


def test_schedule_small_cases():
    s0 = build_reuse_schedule(build_circuit(ModelParams(THETA, 0.2, 0)))
    assert s0.max_live == 1
    assert ("record", 0, 0) in s0.instructions
    s2 = build_reuse_schedule(build_circuit(ModelParams(THETA, 0.2, 2)))
    lo, hi = causal_cone(2)
    assert s2.max_live < hi - lo + 1


def test_schedule_order_respects_dependencies():
    circuit = build_circuit(ModelParams(THETA, 0.2, 4))
    sched = build_reuse_schedule(circuit)
    live = set()
    last_t = {}
    for ins in sched.instructions:
        if ins[0] == "admit":
            assert ins[1] not in live
            live.add(ins[1])
        elif ins[0] == "retire":
            live.remove(ins[1])
        elif ins[0] == "gate":
            for s in ins[3:5]:
                assert s in live
                assert last_t.get(s, (0, -1)) <= (ins[1], ins[2])
                last_t[s] = (ins[1], ins[2])
        elif ins[0] == "reset":
            for s in ins[2]:
                assert s in live
                last_t[s] = (ins[1], 4)


@pytest.mark.parametrize("t", range(0, 13))
def test_schedule_cone_bound(t):
    sched = build_reuse_schedule(build_circuit(ModelParams(THETA, 0.2, t)))
    lo, hi = causal_cone(t)
    assert sched.max_live <= (hi - lo + 1) - t // 2 or t == 0


@pytest.mark.parametrize("t", range(0, 13))
def test_schedule_engineering_target(t):
    # target of t + 4 live sites (16 at t = 12); the layout spreads activity
    # two sites per period in each direction, which forces about 2t + 1
    sched = build_reuse_schedule(build_circuit(ModelParams(THETA, 0.2, t)))
    assert sched.max_live <= t + 4


def test_window_cap():
    with pytest.raises(WindowTooLarge):
        simulate(ModelParams(THETA, 0.2, 7))
    with pytest.raises(WindowTooLarge):
        simulate_bruteforce(ModelParams(THETA, 0.2, 3), max_sites=5)
