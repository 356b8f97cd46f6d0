import json
import math
import warnings

import numpy as np
import pytest

from atiyah.harness import (
    CampaignSpec,
    SUMMARY_FIELDS,
    load,
    minimize_absD,
    persist,
    run_campaign,
    run_e3,
    run_strong,
    run_weak,
    sample_input,
    sample_seed,
    summarize,
    write_summary_csv,
)


def strong(n=3, count=300, **kw):
    return CampaignSpec("strong-complex", n, sample_count=count, **kw)


def test_spec_validation():
    with pytest.raises(ValueError):
        CampaignSpec("strong-complex", 1)
    with pytest.raises(ValueError):
        CampaignSpec("nonsense", 3)
    with pytest.raises(ValueError):
        CampaignSpec("e3", 2, k=(2,))
    with pytest.raises(ValueError):
        CampaignSpec("e3", 2, k=(7, 7))
    with pytest.raises(ValueError):
        CampaignSpec("strong-complex", 3, sampler="lattice")
    assert CampaignSpec("e3", 3).k == (1, 1, 1)
    spec = CampaignSpec("e2", 2, k=(2, 1), sample_count=5)
    assert spec.real and spec.space_dim == 2
    assert CampaignSpec.from_json(json.loads(json.dumps(spec.to_json()))) == spec


def test_sample_seed_is_stable():
    assert sample_seed(0, 0) == sample_seed(0, 0)
    assert len({sample_seed(0, i) for i in range(1000)}) == 1000
    assert sample_seed(1, 5) != sample_seed(5, 1)


def test_strong_determinism_and_index_addressing():
    a = run_strong(strong(count=200))
    b = run_strong(strong(count=200))
    assert a == b
    tail = run_strong(strong(count=50, start_index=150))
    assert [r.value for r in tail.records] == [r.value for r in a.records[150:]]
    assert a.confirmed_violations == 0 and a.summary["min"] >= 1 - 1e-9


def test_parallel_matches_serial():
    spec = strong(n=4, count=300)
    serial = run_strong(spec, workers=1)
    from atiyah import harness

    par = harness._run(spec, None, workers=2, chunk=50)
    assert par == serial


def test_strong_real():
    rep = run_campaign(CampaignSpec("strong-real", 4, sample_count=200))
    assert rep.confirmed_violations == 0 and rep.summary["min"] >= 1 - 1e-9


def test_persist_load_round_trip(tmp_path):
    rep = run_strong(strong(count=100))
    path = tmp_path / "c.jsonl"
    persist(rep, path)
    back = load(path)
    assert back == rep
    assert back.summary == rep.summary


def test_streaming_output_matches_persist(tmp_path):
    path = tmp_path / "c.jsonl"
    rep = run_strong(strong(count=100), out=path)
    assert load(path) == rep


def test_append_resume(tmp_path):
    path = tmp_path / "c.jsonl"
    full = run_strong(strong(count=120))
    run_strong(strong(count=70), out=path)
    run_strong(strong(count=50, start_index=70), out=path, append=True)
    resumed = load(path)
    assert resumed.records == full.records
    assert resumed.spec == full.spec
    with pytest.raises(ValueError):
        run_strong(strong(n=4, count=10), out=path, append=True)


def test_truncated_final_line(tmp_path):
    path = tmp_path / "c.jsonl"
    run_strong(strong(count=30), out=path)
    text = path.read_text()
    path.write_text(text + '{"type": "sample", "index": 3')
    with pytest.warns(RuntimeWarning):
        rep = load(path)
    assert len(rep.records) == 30
    lines = text.splitlines()
    lines.insert(2, "{broken")
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        load(path)


def test_weak_campaign():
    rep = run_weak(CampaignSpec("weak-complex", 4, sample_count=100))
    assert rep.summary["min"] > 1e-10 and rep.confirmed_violations == 0
    rep = run_weak(CampaignSpec("weak-real", 3, sample_count=50))
    assert rep.summary["min"] > 1e-10


def test_e3_with_unit_blocks_equals_weak():
    e3 = run_e3(CampaignSpec("e3", 4, sample_count=100, seed=3))
    weak = run_weak(CampaignSpec("weak-complex", 4, sample_count=100, seed=3))
    np.testing.assert_allclose(e3.values(), weak.values(), atol=1e-12, rtol=0)
    e2 = run_e3(CampaignSpec("e2", 3, sample_count=50, seed=3))
    weak_real = run_weak(CampaignSpec("weak-real", 3, sample_count=50, seed=3))
    np.testing.assert_allclose(e2.values(), weak_real.values(), atol=1e-12, rtol=0)


def test_e3_variants():
    for tree_kind in ("flat", "nested"):
        for state_kind in ("random", "collinear"):
            spec = CampaignSpec("e3", 3, k=(2, 1, 2), sample_count=20, tree_kind=tree_kind, state_kind=state_kind)
            rep = run_e3(spec)
            assert rep.summary["min"] > 1e-10
    _, (tree, states) = sample_input(CampaignSpec("e3", 3, k=(2, 1, 2), tree_kind="nested"), 0)
    assert tree.arity == 3 and [s.arity for s in states] == [2, 1, 2]


def test_summary_flags_and_threshold():
    spec = strong(count=3)
    from atiyah.harness import SampleRecord

    recs = [
        SampleRecord(0, 1, "a", 1.5),
        SampleRecord(1, 2, "b", 0.5, flags=["LOW_CONFIDENCE"]),
        SampleRecord(2, 3, "c", 0.9, confirmation={"confirmed": False}),
    ]
    s = summarize(spec, recs)
    assert s["min"] == 0.9 and s["argmin_index"] == 2 and s["flagged"] == 1
    assert s["count_below_threshold"] == 1 and s["confirmed_violations"] == 0
    assert s["threshold"] == 1 - 1e-9


def test_csv_summary(tmp_path):
    path = tmp_path / "s.csv"
    a, b = run_strong(strong(count=20)), run_weak(CampaignSpec("weak-complex", 3, sample_count=20))
    write_summary_csv([a], path)
    write_summary_csv([b], path, append=True)
    rows = path.read_text().splitlines()
    assert rows[0].split(",") == list(SUMMARY_FIELDS)
    assert len(rows) == 3 and rows[1].startswith("strong-complex,3")


def test_minimize_small():
    spec = CampaignSpec("minimize", 3, restarts=2, seed=1, max_iter=1500)
    rep = minimize_absD(spec)
    assert len(rep.records) == 2
    best = rep.summary["min"]
    assert -1e-8 <= best <= 1e-2
    for r in rep.records:
        # traces never go below the reported value and are non-increasing
        assert min(r.trace) == pytest.approx(r.value)
        assert all(b <= a + 1e-15 for a, b in zip(r.trace, r.trace[1:]))


def test_minimize_n2_constant(tmp_path):
    rep = minimize_absD(CampaignSpec("minimize", 2, restarts=1, max_iter=50), out=tmp_path / "m.jsonl")
    assert rep.summary["constant_objective"] is True
    assert abs(rep.summary["min"]) < 1e-14
    assert load(tmp_path / "m.jsonl").records == rep.records
