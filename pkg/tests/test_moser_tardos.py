import numpy as np
import pytest

from shiftlab.groups import (CyclicTranslation, GroupCtx, GroupError,
                             TorusTranslation, gset, integer_interval)
from shiftlab.lll import ExplicitEvent, FrequencyDeviationEvent
from shiftlab.moser_tardos import (EventFamily, TapeSpace, defect,
                                   defect_translation_identity, index_report,
                                   resample_fraction, run_mt,
                                   stabilization_ledger, tape_consistency,
                                   violated_anchors)
from shiftlab.shift import Config, Pattern

Z = GroupCtx("integers")
L2 = GroupCtx("lattice", 2)


def test_tape_deterministic_and_roughly_uniform():
    tape = TapeSpace(seed=123, k=2)
    assert tape.symbol(17, 4) == tape.symbol(17, 4)
    row = tape.row(20_000, 0)
    ones = int(row.sum())
    assert abs(ones - 10_000) < 4 * (20_000 * 0.25) ** 0.5
    # distinct t give fresh draws
    row1 = tape.row(20_000, 1)
    agree = int((row == row1).sum())
    assert abs(agree - 10_000) < 4 * (20_000 * 0.25) ** 0.5


def test_tape_k3_frequencies():
    tape = TapeSpace(seed=5, k=3)
    row = tape.row(30_000, 0)
    for c in range(3):
        frac = (row == c).mean()
        assert abs(frac - 1 / 3) < 4 * (1 / 3 * 2 / 3 / 30_000) ** 0.5


def test_empty_family_converges_immediately():
    act = CyclicTranslation(100)
    tape = TapeSpace(seed=9, k=2)
    res = run_mt(act, EventFamily(()), tape)
    assert res.converged and res.steps == 0
    assert np.array_equal(res.coloring, tape.row(100, 0))
    assert (res.t == 0).all()
    fr = resample_fraction(res)
    assert fr.frac_resampled == 0 and fr.frac_changed == 0


def test_single_site_event_geometric_resampling():
    # forbid color 0 at every point: t(p) = first index with a 1 on p's tape
    phi0 = Pattern.from_map(Z, {0: 0}, 2)
    ev = ExplicitEvent((phi0,), 2)
    act = CyclicTranslation(4000)
    tape = TapeSpace(seed=21, k=2)
    res = run_mt(act, EventFamily.of(ev), tape, check_maximality=True)
    assert res.converged
    assert (res.coloring == 1).all()
    # oracle: first-1 index per tape
    for p in [0, 17, 555, 3999]:
        t_expect = 0
        while tape.symbol(p, t_expect) == 0:
            t_expect += 1
        assert res.t[p] == t_expect
    # geometric with mean 1; 4000 independent points, sigma = sqrt(2/4000)
    assert abs(res.t.mean() - 1.0) < 3 * (2 / 4000) ** 0.5 + 1e-9


def test_mt_requires_total_action():
    from shiftlab.groups import lattice_window
    ev = ExplicitEvent((Pattern.from_map(Z, {0: 0}, 2),), 2)
    with pytest.raises(GroupError):
        run_mt(lattice_window([10]), EventFamily.of(ev), TapeSpace(seed=0, k=2))


def test_mt_requires_freeness():
    ev = FrequencyDeviationEvent(2, integer_interval(1), "0.2", gset(Z, [0, 10]))
    with pytest.raises(GroupError):
        run_mt(CyclicTranslation(10), EventFamily.of(ev), TapeSpace(seed=0, k=2))


def test_mt_determinism():
    ev = FrequencyDeviationEvent(2, integer_interval(1), "0.25", integer_interval(20))
    act = CyclicTranslation(200)
    r1 = run_mt(act, EventFamily.of(ev), TapeSpace(seed=77, k=2))
    r2 = run_mt(act, EventFamily.of(ev), TapeSpace(seed=77, k=2))
    assert np.array_equal(r1.coloring, r2.coloring)
    assert np.array_equal(r1.t, r2.t)
    assert r1.index_counts == r2.index_counts
    assert r1.steps == r2.steps


def test_mt_stress_resampling_converges():
    # uncertified parameters chosen so the initial coloring violates somewhere
    ev = FrequencyDeviationEvent(2, integer_interval(1), "0.25", integer_interval(20))
    act = CyclicTranslation(200)
    tape = TapeSpace(seed=77, k=2)
    res = run_mt(act, EventFamily.of(ev), tape, check_maximality=True)
    assert res.converged
    assert res.steps > 0 and res.t.max() >= 1  # resampling actually happened
    assert tape_consistency(res)
    assert stabilization_ledger(res, act, EventFamily.of(ev))
    assert violated_anchors(act, ev, res.coloring).size == 0
    fr = resample_fraction(res)
    assert fr.frac_changed <= fr.frac_resampled


def test_mt_two_member_family_ledger():
    ev1 = FrequencyDeviationEvent(2, integer_interval(1), "0.3", integer_interval(12))
    ev2 = FrequencyDeviationEvent(2, integer_interval(2), "0.3", integer_interval(9))
    act = CyclicTranslation(150)
    fam = EventFamily.of(ev1, ev2)
    res = run_mt(act, fam, TapeSpace(seed=5, k=2), check_maximality=True)
    assert res.converged
    assert stabilization_ledger(res, act, fam)
    assert tape_consistency(res)
    for _n, ev in fam:
        assert defect(res.coloring, ev, act) == ()


def test_mt_on_torus_generic_path():
    block = gset(L2, [(i, j) for i in range(2) for j in range(2)])
    ev = FrequencyDeviationEvent(2, gset(L2, [(0, 0)]), "0.3", block)
    act = TorusTranslation(12, 12)
    res = run_mt(act, EventFamily.of(ev), TapeSpace(seed=3, k=2),
                 check_maximality=True)
    assert res.converged
    assert stabilization_ledger(res, act, EventFamily.of(ev))
    assert defect(res.coloring, ev, act) == ()


def test_max_steps_exhaustion_reports_defect():
    # an unsatisfiable single-site family: both colors forbidden
    phis = (Pattern.from_map(Z, {0: 0}, 2), Pattern.from_map(Z, {0: 1}, 2))
    ev = ExplicitEvent(phis, 2)
    act = CyclicTranslation(16)
    res = run_mt(act, EventFamily.of(ev), TapeSpace(seed=1, k=2), max_steps=5)
    assert not res.converged
    assert res.steps == 5
    assert res.defect_points == tuple(range(16))


def test_defect_examples():
    act = CyclicTranslation(4)
    ev = FrequencyDeviationEvent(2, integer_interval(1), "0.4", integer_interval(2))
    constant = np.zeros(4, dtype=np.int64)
    assert defect(constant, ev, act) == (0, 1, 2, 3)
    # one violating anchor by hand: window pairs (g[x], g[x+1])
    g = np.array([0, 0, 1, 0])
    # anchors: (0,0) dev 1/2 >= .4 bad; (0,1) ok; (1,0) ok; (0,0) bad
    assert defect(g, ev, act) == (0, 3)
    assert defect_translation_identity(g, ev, act)
    assert defect(g, ev, act, translated=True) == (0, 1, 3)


def test_frequency_counts_match_event_holds():
    # vectorized anchor counts agree with the per-config event test
    ev = FrequencyDeviationEvent(2, integer_interval(2), "0.3", integer_interval(5))
    act = CyclicTranslation(40)
    rng = np.random.default_rng(8)
    g = rng.integers(0, 2, size=40)
    bad = set(violated_anchors(act, ev, g).tolist())
    F = ev.domain
    for x in range(40):
        vals = {e: int(g[act.act(e, x)]) for e in F}
        assert ev.holds(Config.from_map(Z, vals)) == (x in bad)


def test_index_report_bounds():
    assert index_report(
        _dummy_result(), {0: 0.5})[0].bound == pytest.approx(1.0)


def _dummy_result():
    from shiftlab.moser_tardos import MTResult
    return MTResult(np.zeros(4, dtype=np.int64), np.zeros(4, dtype=np.int64),
                    {}, 0, True, (), TapeSpace(seed=0, k=2))


def test_resample_fraction_bound():
    ev = FrequencyDeviationEvent(2, integer_interval(1), "0.25", integer_interval(20))
    act = CyclicTranslation(200)
    fam = EventFamily.of(ev)
    res = run_mt(act, fam, TapeSpace(seed=77, k=2))
    fr = resample_fraction(res, fam, {0: 0.5})
    assert fr.bound == pytest.approx(len(ev.domain) * 1.0)


def test_event_family_canonical_order():
    ev1 = ExplicitEvent((Pattern.from_map(Z, {0: 0}, 2),), 2)
    ev2 = ExplicitEvent((Pattern.from_map(Z, {0: 1}, 2),), 2)
    fam = EventFamily(((5, ev1), (2, ev2)))
    assert [n for n, _ in fam] == [2, 5]


def test_frequency_counts_rejects_partial_action():
    from shiftlab.groups import lattice_window
    from shiftlab.moser_tardos import frequency_counts
    ev = FrequencyDeviationEvent(2, gset(Z, [0]), "0.2", gset(Z, [0, 1]))
    w = lattice_window([6])
    with pytest.raises(GroupError):
        list(frequency_counts(w, ev, np.zeros(6, dtype=np.int64)))
