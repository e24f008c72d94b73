import pytest

from motsteen.corpus import counterexample_module, generate_corpus
from motsteen.errors import DomainError
from motsteen.modules import (
    algebra_data,
    direct_sum,
    free_module,
    margolis,
    reduce_mod_tau,
    suspend,
    trivial_module,
)
from motsteen.profiles import a_profile
from motsteen.resolutions import (
    ChartEntry,
    ExtChart,
    LesReport,
    Window,
    bockstein_E1,
    chart_to_json,
    chart_to_svg,
    les_check,
    resolve_mod_tau,
    resolve_over_M2,
    vanishing_check,
    verify_f2_resolution,
    verify_m2_resolution,
)

from oracles import bar_ext_dims, koszul_exterior_chart


def test_koszul_a0():
    n = reduce_mod_tau(trivial_module(a_profile(0)))
    res = resolve_mod_tau(n, p_max=20, q_max=24)
    verify_f2_resolution(res)
    chart = res.chart()
    expected = koszul_exterior_chart(20)
    actual = {k: e.free_rank for k, e in chart.nonzero()}
    assert actual == expected


def test_free_module_resolves_at_stage_zero():
    n = reduce_mod_tau(free_module(a_profile(1), [("x", 0, 0)]))
    res = resolve_mod_tau(n, p_max=4, q_max=20)
    verify_f2_resolution(res)
    assert res.stages[1].gens == []
    chart = res.chart()
    assert all(p == 0 for (p, _, _) in chart.entries)
    assert res.complete


def test_a1_modtau_chart_matches_bar_oracle():
    p1 = a_profile(1)
    n = reduce_mod_tau(trivial_module(p1))
    res = resolve_mod_tau(n, p_max=6, q_max=20)
    verify_f2_resolution(res)
    chart = res.chart()
    data = algebra_data(p1, mod_tau=True)
    unit = 0

    def multiply(i, j):
        return frozenset(data.index[t] for t in data.prod(i, j).terms)

    oracle = bar_ext_dims([bd for bd in data.bidegrees], unit, multiply,
                          p_max=6, q_max=20)
    actual = {k: e.free_rank for k, e in chart.nonzero()}
    assert actual == oracle


def test_m2_resolution_a0_tower():
    m = trivial_module(a_profile(0))
    res = resolve_over_M2(m, p_max=8, q_max=12)
    verify_m2_resolution(res)
    chart = res.chart()
    expected = {(p, p, 0): ChartEntry(1) for p in range(9) if p <= 12}
    assert dict(chart.nonzero()) == expected


def test_m2_resolution_free_stage_zero():
    m = free_module(a_profile(1), [("x", 0, 0)])
    res = resolve_over_M2(m, p_max=3, q_max=16)
    verify_m2_resolution(res)
    assert res.stages[1].gens == []
    chart = res.chart()
    assert set(chart.entries) == {(0, 0, 0)}
    assert chart.entries[(0, 0, 0)] == ChartEntry(1)


def test_m2_chart_weightwise_against_tau_truncation():
    # F2-dimension per (p, q, w) of the M2 chart must agree with the
    # mod-tau chart through the Bockstein inequality and, for the A(0)
    # fixtures, exactly.
    m = trivial_module(a_profile(0))
    res = resolve_over_M2(m, p_max=6, q_max=10)
    chart = res.chart()
    modtau = resolve_mod_tau(reduce_mod_tau(m), p_max=6, q_max=10).chart()
    e1 = bockstein_E1(modtau)
    for p in range(7):
        for q in range(11):
            for w in range(-6, 3):
                assert chart.f2_dim(p, q, w) == e1.f2_dim(p, q, w)


def test_bockstein_tower():
    chart = ExtChart(kind="f2", window=Window(2, 2),
                     entries={(0, 0, 0): ChartEntry(1)})
    e1 = bockstein_E1(chart)
    for k in range(4):
        assert e1.f2_dim(0, 0, -k) == 1
    assert e1.f2_dim(0, 0, 1) == 0


def test_e1_domination_on_counterexample():
    m = counterexample_module()
    res = resolve_over_M2(m, p_max=4, q_max=16)
    verify_m2_resolution(res)
    chart = res.chart()
    modtau = resolve_mod_tau(reduce_mod_tau(m), p_max=4, q_max=16).chart()
    e1 = bockstein_E1(modtau)
    ws = set(w for (_, _, w) in chart.entries) | set(w for (_, _, w) in e1.entries)
    for p in range(5):
        for q in range(17):
            for w in sorted(ws | {0}):
                assert e1.f2_dim(p, q, w) >= chart.f2_dim(p, q, w), (p, q, w)


def test_vanishing_free_module():
    m = free_module(a_profile(1), [("x", 0, 0)])
    chart = resolve_over_M2(m, p_max=6, q_max=20).chart()
    for d in (1, 2, 3):
        v = vanishing_check(chart, d)
        assert v.passed and v.c == 0  # single class at (0, 0)
    shifted = resolve_over_M2(suspend(m, 3, 1), p_max=6, q_max=20).chart()
    v = vanishing_check(shifted, 2)
    assert v.passed and v.c == -3  # c = -q_min for a stage-zero chart


def test_vanishing_trivial_module_fails_slope2():
    n = reduce_mod_tau(trivial_module(a_profile(1)))
    chart = resolve_mod_tau(n, p_max=8, q_max=24).chart()
    v = vanishing_check(chart, 2)
    assert not v.passed
    assert v.first_attained_p is not None and v.first_attained_p >= chart.window.p_max - 1


def test_vanishing_counterexample_passes_slope2():
    # the counterexample is Q_0-free, so Theorem B(ii) applies with d = 2
    m = counterexample_module()
    n = reduce_mod_tau(m)
    assert margolis(n, ("Q", 0)).total == 0
    chart = resolve_over_M2(m, p_max=8, q_max=24).chart()
    v = vanishing_check(chart, 2)
    assert v.passed, v


def test_vanishing_given_c_lists_violations():
    chart = ExtChart(kind="f2", window=Window(4, 10),
                     entries={(3, 1, 0): ChartEntry(1)})
    v = vanishing_check(chart, 2, c=2)
    assert not v.holds_in_window
    assert v.violations == ((3, 1, 0),)


def test_les_split_case():
    m = trivial_module(a_profile(1))
    chart_m = resolve_mod_tau(reduce_mod_tau(m), p_max=6, q_max=14).chart()
    # C = M + Sigma^{2,1} M: dims add
    shifted = {(p, q - 2, w - 1): e for (p, q, w), e in chart_m.entries.items()}
    entries = dict(chart_m.entries)
    for k, e in shifted.items():
        prev = entries.get(k, ChartEntry(0))
        entries[k] = ChartEntry(prev.free_rank + e.free_rank)
    chart_c = ExtChart(kind="f2", window=chart_m.window, entries=entries,
                       complete=chart_m.complete)
    rep = les_check(chart_m, chart_c, shift=(-2, -1))
    assert rep.forced_iso == ()  # C is nowhere zero where M lives


def test_les_window_mismatch():
    a = ExtChart(kind="f2", window=Window(2, 4), entries={})
    b = ExtChart(kind="f2", window=Window(3, 4), entries={})
    with pytest.raises(DomainError):
        les_check(a, b)


def test_les_forced_iso_consistency():
    # artificial example: M-chart an h-tower along q = 3p, C vanishing
    entries = {(p, 3 * p, p): ChartEntry(1) for p in range(7)}
    chart_m = ExtChart(kind="f2", window=Window(6, 20), entries=entries)
    chart_c = ExtChart(kind="f2", window=Window(6, 20), entries={})
    rep = les_check(chart_m, chart_c, shift=(-3, -1))
    assert rep.iso_consistent
    assert rep.forced_iso


def test_chart_json_deterministic_and_svg():
    m = counterexample_module()
    chart = resolve_over_M2(m, p_max=3, q_max=10).chart()
    j1 = chart_to_json(chart)
    j2 = chart_to_json(chart)
    assert j1 == j2
    assert '"window"' in j1
    svg = chart_to_svg(chart)
    assert svg.startswith("<svg") and "circle" in svg


def test_m2_chart_dims_against_weight_slice_oracle():
    # Taking the weight-w component of a complex of free M2-modules is
    # exact, so chart F2-dimensions must agree with naive row reduction
    # of the weight slices of the dual complex (the tau-truncation view:
    # any truncation beyond the window computes the same slices).
    from oracles import naive_rank
    corpus = generate_corpus(a_profile(1), seed=77, count=8)
    for entry in corpus:
        res = resolve_over_M2(entry.module, p_max=4, q_max=16)
        chart = res.chart()
        qs = {q for st in res.stages for (q, _) in st.gens}
        ws = sorted({w for st in res.stages for (_, w) in st.gens})
        if not ws:
            continue
        for p in range(5):
            for q in sorted(qs):
                outgoing = res.dual_complex(p, q)
                if p == 0:
                    from motsteen.grlinalg import GradedTauMatrix
                    incoming = GradedTauMatrix(outgoing.col_weights, (),
                                               (0,) * outgoing.ncols)
                else:
                    incoming = res.dual_complex(p - 1, q)
                for w in range(min(ws) - 3, max(ws) + 2):
                    u = -w  # dual complexes carry negated weights
                    out_m, _, cis = outgoing.weight_slice(u)
                    in_m, _, _ = incoming.weight_slice(u)
                    rank_out = naive_rank(out_m.to_lists())
                    rank_in = naive_rank(in_m.to_lists())
                    expected = len(cis) - rank_out - rank_in
                    assert chart.f2_dim(p, q, w) == expected, (entry.name, p, q, w)


def test_freeness_chart_consistency_on_corpus():
    # Free <=> mod-tau resolution has empty stage 1 <=> chart lives in p = 0
    from motsteen.modules import freeness_check
    corpus = generate_corpus(a_profile(1), seed=41, count=12)
    for entry in corpus:
        m = entry.module
        free = freeness_check(m).free
        res = resolve_mod_tau(reduce_mod_tau(m), p_max=3, q_max=24)
        stage1_empty = not res.stages[1].gens
        chart = res.chart()
        concentrated = all(p == 0 for (p, _, _) in chart.entries)
        assert free == stage1_empty == concentrated, entry.name


def test_les_inconclusive_when_window_too_small():
    entries = {(p, p, 0): ChartEntry(1) for p in range(3)}
    chart_m = ExtChart(kind="f2", window=Window(2, 6), entries=entries)
    chart_c = ExtChart(kind="f2", window=Window(2, 6), entries={})
    rep = les_check(chart_m, chart_c, shift=(-2, -1))
    assert rep.strands_inconclusive > 0
