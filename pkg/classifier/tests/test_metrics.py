import numpy as np
import pytest

from gestureclf import LABELS
from gestureclf.metrics import EvalReport, confusion_matrix, f1_scores


def brute_force_report(y_true, y_pred, n=8):
    """Definition-level oracle computed without any shared code paths."""
    matrix = [[0] * n for _ in range(n)]
    for t, p in zip(y_true, y_pred):
        matrix[t][p] += 1
    f1 = []
    for c in range(n):
        tp = matrix[c][c]
        pred_c = sum(matrix[r][c] for r in range(n))
        true_c = sum(matrix[c])
        precision = tp / pred_c if pred_c else 0.0
        recall = tp / true_c if true_c else 0.0
        f1.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return np.array(matrix), np.array(f1)


class TestConfusionAndF1:
    def test_matches_brute_force_on_50_random_sets(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            size = int(rng.integers(1, 200))
            y_true = rng.integers(0, 8, size=size)
            y_pred = rng.integers(0, 8, size=size)
            matrix = confusion_matrix(y_true, y_pred)
            ref_matrix, ref_f1 = brute_force_report(y_true, y_pred)
            np.testing.assert_array_equal(matrix, ref_matrix)
            np.testing.assert_array_equal(f1_scores(matrix), ref_f1)
            assert matrix.sum() == size

    def test_row_sums_are_truth_counts(self):
        y_true = [0, 0, 1, 2, 2, 2]
        y_pred = [0, 1, 1, 0, 2, 2]
        matrix = confusion_matrix(y_true, y_pred)
        np.testing.assert_array_equal(matrix.sum(axis=1)[:3], [2, 1, 3])

    def test_perfect_predictions(self):
        y = list(range(8)) * 2
        report = EvalReport.from_predictions(y, y)
        np.testing.assert_array_equal(np.diag(report.confusion), 2)
        assert report.confusion.sum() == 16
        np.testing.assert_array_equal(report.per_class_f1, np.ones(8))
        assert report.macro_f1 == 1.0

    def test_all_predicted_as_class_a_on_balanced_two_class_subset(self):
        # precision_A = 1/2, recall_A = 1 -> F1_A = 2/3; F1_B = 0
        y_true = [0, 0, 1, 1]
        y_pred = [0, 0, 0, 0]
        report = EvalReport.from_predictions(y_true, y_pred)
        assert report.per_class_f1[0] == pytest.approx(2 / 3)
        assert report.per_class_f1[1] == 0.0

    def test_a_e_confusion_lowers_their_f1(self):
        # fist-like signs: swapping some A <-> E predictions should hurt
        # exactly those two classes
        a, e = LABELS.index("A"), LABELS.index("E")
        y_true = [c for c in range(8) for _ in range(10)]
        y_pred = list(y_true)
        for i, t in enumerate(y_true):
            if t == a and i % 2 == 0:
                y_pred[i] = e
            elif t == e and i % 2 == 0:
                y_pred[i] = a
        report = EvalReport.from_predictions(y_true, y_pred)
        others = [report.per_class_f1[c] for c in range(8) if c not in (a, e)]
        assert report.per_class_f1[a] < min(others)
        assert report.per_class_f1[e] < min(others)
        assert report.confusion[a, e] == 5 and report.confusion[e, a] == 5

    def test_label_outside_range_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            confusion_matrix([0, 8], [0, 0])

    def test_report_validation(self):
        with pytest.raises(ValueError, match="sample count"):
            EvalReport(np.eye(8, dtype=np.int64), np.ones(8), 1.0, sample_count=42)

    def test_report_roundtrip(self, tmp_path):
        report = EvalReport.from_predictions([0, 1, 2], [0, 1, 1])
        out = tmp_path / "report.json"
        report.save(out)
        import json

        loaded = json.loads(out.read_text())
        assert loaded["sample_count"] == 3
        assert loaded["per_class_f1"]["A"] == 1.0
        assert len(loaded["confusion"]) == 8
