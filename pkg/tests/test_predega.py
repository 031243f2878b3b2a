import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bgpredict.predega import (
    GlycemicRange,
    PredEgaReport,
    Verdict,
    ZoneTableError,
    ZoneTables,
    accurate_or_benign,
    central_rate,
    central_rates,
    classify_point,
    classify_rate,
    classify_sequence,
    combine,
    glycemic_range,
    score_sequence,
)

bg = st.floats(0, 450, allow_nan=False)


def smooth_reference(n=200, seed=0):
    t = np.arange(n) * 5.0
    rng = np.random.default_rng(seed)
    ref = 130 + 90 * np.sin(t / 90.0 + rng.uniform(0, 6)) + 20 * np.sin(t / 23.0)
    return t, np.clip(ref, 40, 400)


class TestRates:
    def test_printed_formula(self):
        assert central_rate([100, 110, 120], [0, 5, 10], 1) == pytest.approx(1.0)

    def test_usual_formula_option(self):
        assert central_rate([100, 110, 120], [0, 5, 10], 1, denominator_factor=1) == pytest.approx(2.0)

    def test_constant(self):
        assert central_rate([90, 90, 90], [0, 5, 10], 1) == 0

    def test_endpoints_undefined(self):
        assert central_rate([100, 110, 120], [0, 5, 10], 0) is None
        assert central_rate([100, 110, 120], [0, 5, 10], 2) is None

    def test_segment_boundaries_undefined(self):
        rates, defined = central_rates([1, 2, 3, 4, 5, 6], np.arange(6) * 5.0, [0, 0, 0, 1, 1, 1])
        assert defined.tolist() == [False, True, False, False, True, False]


class TestZones:
    @pytest.mark.parametrize("ref, expected", [(70, "HYPO"), (100, "EU"), (180, "EU"), (181, "HYPER"), (0, "HYPO")])
    def test_range(self, ref, expected):
        assert glycemic_range(ref) is GlycemicRange[expected]

    @pytest.mark.parametrize("pred, ref, zone", [
        (100, 100, "A"), (60, 60, "A"), (200, 60, "E"), (60, 250, "E"), (119, 100, "A"),
        (130, 100, "B"), (250, 100, "C"), (150, 60, "D"), (100, 300, "D"),
    ])
    def test_point(self, pred, ref, zone):
        assert classify_point(pred, ref) == zone

    @pytest.mark.parametrize("p, r, zone", [
        (1.5, 1.5, "A"), (-2, 2, "E"), (0, 0.5, "A"), (0.5, 2.0, "B"), (0.0, 3.0, "D"), (3.5, 0.0, "C"),
    ])
    def test_rate(self, p, r, zone):
        assert classify_rate(p, r) == zone

    @pytest.mark.parametrize("pz, rz, rng, verdict", [
        ("A", "A", "eu", Verdict.ACCURATE), ("A", "E", "hypo", Verdict.ERROR),
        ("B", "C", "eu", Verdict.BENIGN), ("C", "A", "hypo", Verdict.ERROR),
        ("C", "A", "hyper", Verdict.BENIGN), ("D", "A", "eu", Verdict.ERROR),
        ("B", None, "eu", Verdict.ACCURATE), ("C", None, "hypo", Verdict.BENIGN),
    ])
    def test_combine(self, pz, rz, rng, verdict):
        assert combine(pz, rz, rng) is verdict

    def test_verdict_order(self):
        assert Verdict.ACCURATE > Verdict.BENIGN > Verdict.ERROR


class TestTables:
    def test_default_metadata(self):
        t = ZoneTables.default()
        assert t.version == "1"
        assert len(t.source_hash) == 64

    def test_roundtrip_and_hash(self, tmp_path):
        path = tmp_path / "z.json"
        path.write_text(json.dumps(ZoneTables.default().to_dict()))
        t = ZoneTables.load(path)
        assert np.array_equal(t.combination, ZoneTables.default().combination)
        assert t.source_hash != ""

    def test_incomplete_matrix_rejected(self):
        doc = ZoneTables.default().to_dict()
        doc["combination"]["eu"][2] = doc["combination"]["eu"][2][:4]
        with pytest.raises(ZoneTableError):
            ZoneTables.from_dict(doc)

    def test_bad_cell_rejected(self):
        doc = ZoneTables.default().to_dict()
        doc["combination"]["hyper"][0][0] = "Maybe"
        with pytest.raises(ValueError):
            ZoneTables.from_dict(doc)

    def test_missing_key(self):
        doc = ZoneTables.default().to_dict()
        del doc["rate_zones"]["benign"]
        with pytest.raises(ZoneTableError, match="benign"):
            ZoneTables.from_dict(doc)


class TestScore:
    def test_idempotent(self):
        t, ref = smooth_reference()
        report = score_sequence(ref, ref, t)
        pct = report.percentages
        for r in range(3):
            if report.totals[r]:
                assert pct[r].tolist() == [100.0, 0.0, 0.0]
        assert report.totals.sum() == ref.size

    def test_row_arithmetic(self):
        rep = PredEgaReport([[2, 0, 1], [0, 0, 0], [0, 0, 0]])
        np.testing.assert_allclose(rep.row("hypo"), [200 / 3, 0, 100 / 3], atol=1e-12)
        assert rep.row("eu") == (0.0, 0.0, 0.0)
        assert rep.to_dict()["eu"]["count"] == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            score_sequence([1, 2, 3], [1, 2], [0, 5, 10])

    def test_segment_additivity(self):
        t1, r1 = smooth_reference(80, 1)
        t2, r2 = smooth_reference(60, 2)
        rng = np.random.default_rng(0)
        p1 = r1 + rng.normal(0, 15, r1.size)
        p2 = r2 + rng.normal(0, 15, r2.size)
        whole = score_sequence(np.concatenate([p1, p2]), np.concatenate([r1, r2]),
                               np.concatenate([t1, t2 + 1e4]),
                               segments=np.repeat([0, 1], [r1.size, r2.size]))
        parts = score_sequence(p1, r1, t1) + score_sequence(p2, r2, t2)
        assert np.array_equal(whole.counts, parts.counts)

    @given(st.floats(0.1, 10), st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_unit_coherence(self, c, seed):
        t, ref = smooth_reference(120, seed)
        pred = ref + np.random.default_rng(seed).normal(0, 25, ref.size)
        base = classify_sequence(pred, ref, t)
        scaled = classify_sequence(c * pred, c * ref, t, ZoneTables.default().scaled(c))
        assert np.array_equal(base.verdicts, scaled.verdicts)

    @given(st.lists(st.tuples(bg, bg), min_size=3, max_size=60))
    @settings(max_examples=50, deadline=None)
    def test_percentages_from_counts(self, pairs):
        pred, ref = np.array(pairs).T
        rep = score_sequence(pred, ref, np.arange(len(pairs)) * 5.0)
        for r in range(3):
            total = rep.totals[r]
            s = rep.percentages[r].sum()
            assert (total == 0 and s == 0) or abs(s - 100) <= 1e-9

    def test_mask(self):
        t, ref = smooth_reference(50)
        mask = np.zeros(50, dtype=bool)
        mask[:10] = True
        assert score_sequence(ref, ref, t, mask=mask).totals.sum() == 10

    def test_report_dict_roundtrip(self):
        rep = PredEgaReport([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        assert np.array_equal(PredEgaReport.from_dict(rep.to_dict()).counts, rep.counts)
        assert accurate_or_benign(rep, "eu") == pytest.approx(100 * 9 / 15)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            PredEgaReport([[-1, 0, 0], [0, 0, 0], [0, 0, 0]])
