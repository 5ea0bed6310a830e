import numpy as np
import pytest
from oracles import naive_ap

from gaptal.evaluation import EvalReport, evaluate, interpolated_ap, map_suite, recall_auc
from gaptal.fileio import ActionInstance, AnnotationSet
from gaptal.zeroshot import Detection

THUMOS_MAP_GRID = [0.3, 0.4, 0.5, 0.6, 0.7]
THUMOS_TIOU_GRID = [0.5 + 0.05 * i for i in range(11)]  # 0.5 .. 1.0


def ann(video_id, spans, label="a", duration=100.0):
    return AnnotationSet(
        video_id=video_id,
        duration_seconds=duration,
        instances=[ActionInstance(s, e, label) for s, e in spans],
    )


class TestInterpolatedAp:
    def test_perfect_detection(self):
        gt = [("v", 0.2, 0.5)]
        for thr in THUMOS_MAP_GRID:
            assert interpolated_ap([("v", 0.2, 0.5, 1.0)], gt, thr) == 1.0

    def test_hand_walked_fp_then_tp(self):
        dets = [("v", 0.8, 0.9, 0.9), ("v", 0.2, 0.5, 0.5)]
        gt = [("v", 0.2, 0.5)]
        assert interpolated_ap(dets, gt, 0.5) == pytest.approx(0.5, abs=1e-12)

    def test_empty_detections(self):
        assert interpolated_ap([], [("v", 0.1, 0.4)], 0.5) == 0.0

    def test_no_ground_truth(self):
        assert interpolated_ap([("v", 0.1, 0.4, 1.0)], [], 0.5) == 0.0

    def test_matches_oracle_on_micro_cases(self):
        # acceptance scope: >= 200 seeded micro-cases, 1e-9 absolute
        rng = np.random.default_rng(99)
        for case in range(220):
            n_videos = int(rng.integers(1, 4))
            videos = [f"v{i}" for i in range(n_videos)]
            gt = []
            for vid in videos:
                for _ in range(int(rng.integers(0, 3))):
                    s = rng.uniform(0, 0.7)
                    gt.append((vid, s, s + rng.uniform(0.05, 0.3)))
            dets = []
            for _ in range(int(rng.integers(0, 7))):
                vid = videos[int(rng.integers(0, n_videos))]
                s = rng.uniform(0, 0.7)
                dets.append((vid, s, s + rng.uniform(0.05, 0.3), rng.uniform()))
            thr = float(rng.choice([0.3, 0.5, 0.7]))
            got = interpolated_ap(dets, gt, thr)
            want = naive_ap(dets, gt, thr)
            assert got == pytest.approx(want, abs=1e-9), f"case {case}"

    def test_removing_fp_never_decreases_ap(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            gt = [("v", 0.2, 0.5), ("v", 0.6, 0.9)]
            dets = []
            for _ in range(5):
                s = rng.uniform(0, 0.8)
                dets.append(("v", s, s + rng.uniform(0.02, 0.2), rng.uniform()))
            base = interpolated_ap(dets, gt, 0.5)
            flags = _match_flags_for(dets, gt, 0.5)
            fps = [i for i, f in enumerate(flags) if not f]
            if not fps:
                continue
            smaller = [d for k, d in enumerate(_score_order(dets)) if k != fps[0]]
            assert interpolated_ap(smaller, gt, 0.5) >= base - 1e-12

    def test_lower_threshold_never_decreases_ap(self):
        rng = np.random.default_rng(6)
        for _ in range(40):
            gt = [("v", rng.uniform(0, 0.4), rng.uniform(0.5, 0.9))]
            dets = [("v", rng.uniform(0, 0.5), rng.uniform(0.5, 1.0), rng.uniform()) for _ in range(4)]
            assert interpolated_ap(dets, gt, 0.3) >= interpolated_ap(dets, gt, 0.7) - 1e-12

    def test_score_rank_invariance(self):
        dets = [("v", 0.1, 0.3, 0.9), ("v", 0.4, 0.6, 0.5), ("v", 0.7, 0.9, 0.1)]
        gt = [("v", 0.1, 0.3), ("v", 0.7, 0.9)]
        base = interpolated_ap(dets, gt, 0.5)
        squashed = [(v, s, e, np.tanh(5 * sc) + 2) for v, s, e, sc in dets]
        assert interpolated_ap(squashed, gt, 0.5) == pytest.approx(base, abs=1e-12)


def _score_order(dets):
    return sorted(dets, key=lambda d: -d[3])


def _match_flags_for(dets, gt, thr):
    from oracles import naive_interval_iou

    remaining = list(gt)
    flags = []
    for v, s, e, _ in _score_order(dets):
        best, bj = 0.0, -1
        for j, (gv, gs, ge) in enumerate(remaining):
            if gv != v:
                continue
            iou = naive_interval_iou((s, e), (gs, ge))
            if iou >= thr and iou > best:
                best, bj = iou, j
        if bj >= 0:
            remaining.pop(bj)
            flags.append(True)
        else:
            flags.append(False)
    return flags


class TestMapSuite:
    def test_perfect_detector(self):
        annotations = [ann("v1", [(0.1, 0.3)], "a"), ann("v2", [(0.5, 0.8)], "b")]
        dets = [Detection("v1", 0.1, 0.3, "a", 0.9), Detection("v2", 0.5, 0.8, "b", 0.8)]
        per_iou, avg, per_class = map_suite(dets, annotations, THUMOS_MAP_GRID)
        assert all(v == 1.0 for v in per_iou.values())
        assert avg == 1.0
        assert set(per_class) == {"a", "b"}

    def test_grid_has_five_thresholds(self):
        assert THUMOS_MAP_GRID == [0.3, 0.4, 0.5, 0.6, 0.7]

    def test_class_without_gt_excluded(self):
        annotations = [ann("v1", [(0.1, 0.3)], "a")]
        dets = [
            Detection("v1", 0.1, 0.3, "a", 0.9),
            Detection("v1", 0.4, 0.6, "ghost", 0.99),
        ]
        per_iou, avg, per_class = map_suite(dets, annotations, [0.5])
        assert "ghost" not in per_class
        assert avg == 1.0

    def test_average_is_mean_of_grid(self):
        rng = np.random.default_rng(11)
        annotations = [ann("v1", [(0.2, 0.5), (0.6, 0.8)], "a")]
        dets = [
            Detection("v1", rng.uniform(0, 0.5), rng.uniform(0.5, 1.0), "a", rng.uniform())
            for _ in range(6)
        ]
        per_iou, avg, _ = map_suite(dets, annotations, THUMOS_MAP_GRID)
        assert avg == pytest.approx(np.mean(list(per_iou.values())))


class TestRecallAuc:
    def test_exact_proposals_full_recall(self):
        annotations = [ann("v1", [(0.1, 0.3), (0.5, 0.8)])]
        props = [
            Detection("v1", 0.1, 0.3, "", 0.9),
            Detection("v1", 0.5, 0.8, "", 0.8),
        ]
        ar, auc, miou, _ = recall_auc(props, annotations, THUMOS_TIOU_GRID, [2, 10], an_max=10)
        assert ar[2] == 1.0 and ar[10] == 1.0
        assert miou == 1.0
        # AR curve is [0.5, 1, 1, ...] over AN=1..10: trapezoid 8.75 / 10
        assert auc == pytest.approx(0.875, abs=1e-12)

    def test_single_proposal_partial_overlap_hand_case(self):
        # best tIoU 0.6 counts at thresholds {0.50, 0.55, 0.60} of the
        # 11-point grid
        annotations = [ann("v1", [(0.2, 0.5)])]
        props = [Detection("v1", 0.0, 0.5, "", 0.7)]
        ar, _, miou, _ = recall_auc(props, annotations, THUMOS_TIOU_GRID, [1], an_max=1)
        assert ar[1] == pytest.approx(3 / 11, abs=1e-12)
        assert miou == pytest.approx(0.6, abs=1e-12)

    def test_ar_nondecreasing_in_an(self):
        rng = np.random.default_rng(13)
        annotations = [ann("v1", [(0.1, 0.4), (0.5, 0.9)]), ann("v2", [(0.3, 0.6)])]
        props = []
        for vid in ("v1", "v2"):
            for _ in range(12):
                s = rng.uniform(0, 0.8)
                props.append(Detection(vid, s, min(1.0, s + rng.uniform(0.05, 0.4)), "", rng.uniform()))
        ar, _, _, _ = recall_auc(props, annotations, THUMOS_TIOU_GRID, [1, 2, 4, 8, 12], an_max=12)
        values = [ar[k] for k in (1, 2, 4, 8, 12)]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_videos_without_gt_skipped(self):
        annotations = [ann("v1", [(0.1, 0.4)]), ann("empty", [])]
        props = [Detection("v1", 0.1, 0.4, "", 0.9), Detection("empty", 0.2, 0.5, "", 0.9)]
        ar, _, _, _ = recall_auc(props, annotations, [0.5], [1], an_max=1)
        assert ar[1] == 1.0

    def test_score_rank_invariance(self):
        annotations = [ann("v1", [(0.1, 0.4), (0.6, 0.9)])]
        props = [
            Detection("v1", 0.1, 0.4, "", 0.8),
            Detection("v1", 0.55, 0.95, "", 0.6),
            Detection("v1", 0.2, 0.3, "", 0.4),
        ]
        base = recall_auc(props, annotations, THUMOS_TIOU_GRID, [1, 2], an_max=3)
        boosted = [Detection(d.video_id, d.start, d.end, d.label, d.score**3 + 1) for d in props]
        got = recall_auc(boosted, annotations, THUMOS_TIOU_GRID, [1, 2], an_max=3)
        assert got == base


class TestEvaluate:
    def test_report_fields_and_ranges(self):
        rng = np.random.default_rng(17)
        annotations = [ann(f"v{i}", [(0.2, 0.5)], "a") for i in range(3)]
        dets = [
            Detection(f"v{i}", rng.uniform(0, 0.4), rng.uniform(0.4, 1.0), "a", rng.uniform())
            for i in range(3)
            for _ in range(4)
        ]
        report = evaluate(dets, dets, annotations, THUMOS_MAP_GRID, THUMOS_TIOU_GRID, [1, 2, 4], 4)
        assert isinstance(report, EvalReport)
        for v in list(report.map_per_iou.values()) + list(report.ar_at_an.values()):
            assert 0.0 <= v <= 1.0
        assert 0.0 <= report.auc <= 1.0
        assert 0.0 <= report.miou <= 1.0
        d = report.to_dict()
        assert set(d) == {"map_per_iou", "average_map", "ar_at_an", "auc", "miou", "per_class_ap"}
