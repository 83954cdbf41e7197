from __future__ import annotations

from hypothesis import given, strategies as st

from contextserv.bench import (
    MIN_REPS,
    BenchmarkReport,
    Sample,
    bench_aspect_vs_inline,
    bench_empty_activation,
    bench_selection,
    monotone_within,
    parse_report_lines,
)


def test_sample_statistics():
    s = Sample.of(7, [1.0, 2.0, 6.0])
    assert (s.parameter, s.repetitions, s.mean_ms, s.min_ms, s.max_ms) == ("7", 3, 3.0, 1.0, 6.0)


def test_report_lines_round_trip():
    rep = BenchmarkReport("demo", [Sample.of(1, [0.5, 1.5]), Sample.of(2, [3.0])], {"python": "3", "cpus": "4"})
    (again,) = parse_report_lines(rep.to_lines())
    assert again == rep
    assert rep.to_csv().splitlines()[0] == "scenario,parameter,repetitions,mean_ms,min_ms,max_ms"
    assert rep.mean(2) == 3.0


def test_monotone_within():
    assert monotone_within([1, 2, 3])
    assert monotone_within([1.0, 0.97, 1.2])
    assert not monotone_within([1.0, 0.9])
    assert monotone_within([])


@given(st.lists(st.floats(0.001, 1e3), max_size=8))
def test_sorted_sequences_are_monotone(xs):
    assert monotone_within(sorted(xs), 0.0)


def test_minimum_repetitions_enforced():
    for rep in (bench_selection((10, 20), reps=1), bench_empty_activation((0, 5), reps=1, inner=2),
                bench_aspect_vs_inline((2,), (1, 2), reps=1, inner=2)):
        assert all(s.repetitions >= MIN_REPS for s in rep.samples)
        assert rep.environment["python"]


def test_aspect_vs_inline_parameters():
    rep = bench_aspect_vs_inline((2, 3), (1,), reps=5, inner=1)
    assert [s.parameter for s in rep.samples] == ["aspect:L1:R2", "inline:L1:R2", "aspect:L1:R3", "inline:L1:R3"]


def test_full_selection_pipeline():
    rep = bench_selection((20,), reps=5, full=True)
    assert rep.scenario == "selection-full" and rep.samples[0].mean_ms > 0
