import json
import time

import numpy as np
import pytest

from floquet_monodromy.bounds import bracket
from floquet_monodromy.cli import main
from floquet_monodromy.config import potential_to_dict
from floquet_monodromy.potential import FourierPotential
from floquet_monodromy.report import read_operator_csv

from conftest import H, p1_potential


def write_cfg(tmp_path, name="c.json", potential=None, **over):
    raw = {
        "h": H,
        "K": 32,
        "N": 8,
        "potential": potential_to_dict(potential or p1_potential()),
        "margin": 16,
        "refine": 16,
    }
    raw.update(over)
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


FREE = FourierPotential.zero(alpha=3.0)


class TestDecompose:
    def test_free(self, tmp_path):
        cfg = write_cfg(tmp_path, potential=FREE, refine=0)
        out = tmp_path / "r.json"
        assert main(["decompose", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["blocks"]["residual_m2"]["max_abs"] <= 1e-9

    def test_p1_and_csv_recomputable(self, tmp_path):
        cfg = write_cfg(tmp_path)
        out, csv = tmp_path / "r.json", tmp_path / "m2.csv"
        assert main(["decompose", "--config", cfg, "--out", str(out), "--csv", str(csv)]) == 0
        rep = json.loads(out.read_text())
        assert rep["passed"]
        for tag in ("sms", "monodromy", "refined", "backward"):
            assert (tmp_path / f"m2.{tag}.csv").exists()
        # the fitted constant follows from the CSV alone
        _, rows = read_operator_csv(csv)
        c = max(
            abs(z) * bracket(j) * bracket(k) * bracket(j - k) ** 2
            for (j, k), (z, _, _) in rows.items()
            if abs(j) <= 16 and abs(k) <= 16
        )
        assert c == pytest.approx(rep["blocks"]["residual_m2"]["c_min"], rel=1e-12)
        m, _ = read_operator_csv(tmp_path / "m2.monodromy.csv")
        assert np.max(np.abs(m.conj().T @ m - np.eye(65))[16:49, 16:49]) <= 1e-7

    def test_N_too_large(self, tmp_path):
        assert main(["decompose", "--config", write_cfg(tmp_path, N=11)]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["decompose", "--config", str(tmp_path / "nope.json")]) == 2

    def test_bad_arguments(self):
        assert main(["decompose"]) == 2
        assert main(["frobnicate"]) == 2

    def test_failed_check_exits_1(self, tmp_path):
        # declared c_v far too small: the class check fails
        p = FourierPotential.from_modes({2: {0: 1.0}}, alpha=3, c_v=1.0)
        assert main(["decompose", "--config", write_cfg(tmp_path, potential=p, refine=0, K=16, N=4, margin=8)]) == 1


class TestDiagonalize:
    def test_free(self, tmp_path):
        out = tmp_path / "d.json"
        assert main(["diagonalize", "--config", write_cfg(tmp_path, potential=FREE), "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["blocks"]["splitting"]["middle_sup"] <= 1e-9

    def test_p1(self, tmp_path):
        out, csv = tmp_path / "d.json", tmp_path / "t.csv"
        assert main(["diagonalize", "--config", write_cfg(tmp_path), "--out", str(out), "--csv", str(csv)]) == 0
        rep = json.loads(out.read_text())
        assert set(rep["blocks"]["splitting"]["regions"]) == {"middle", "rows_out", "cols_out", "both_out"}
        assert (tmp_path / "t.middle_before.csv").exists() and (tmp_path / "t.wprime.csv").exists()

    def test_small_N_reported(self, tmp_path, capsys):
        out = tmp_path / "d.json"
        assert main(["diagonalize", "--config", write_cfg(tmp_path, N=1), "--out", str(out)]) == 1
        assert "NTooSmall" in capsys.readouterr().err
        assert not json.loads(out.read_text())["passed"]


class TestLemmas:
    def test_small(self, tmp_path):
        out = tmp_path / "l.json"
        assert main(["lemmas", "--range", "8", "--out", str(out)]) == 0
        assert set(json.loads(out.read_text())["blocks"]) == {"ineq1", "ineq2", "tech1"}

    def test_range_64_fast(self, tmp_path):
        t = time.perf_counter()
        assert main(["lemmas", "--range", "64"]) == 0
        assert time.perf_counter() - t < 10

    def test_with_config(self, tmp_path):
        out = tmp_path / "l.json"
        assert main(["lemmas", "--range", "8", "--config", write_cfg(tmp_path), "--out", str(out)]) == 0
        assert "generator_powers" in json.loads(out.read_text())["blocks"]

    def test_invalid_range(self):
        assert main(["lemmas", "--range", "1"]) == 2


class TestConverge:
    def test_free(self, tmp_path):
        out = tmp_path / "c.json"
        assert main(["converge", "--config", write_cfg(tmp_path, potential=FREE), "--K", "16,32", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["blocks"]["truncation"]["deltas"][0] <= 1e-12

    def test_p1_monotone(self, tmp_path):
        out = tmp_path / "c.json"
        assert main(["converge", "--config", write_cfg(tmp_path), "--K", "32,48,64", "--out", str(out)]) == 0
        blk = json.loads(out.read_text())["blocks"]["truncation"]
        assert blk["monotone"] and blk["final_delta"] <= 1e-6

    @pytest.mark.parametrize("ks", ["32", "48,32", "32,x"])
    def test_bad_lists(self, tmp_path, ks):
        assert main(["converge", "--config", write_cfg(tmp_path), "--K", ks]) == 2


def test_thread_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("FLOQUET_THREADS", "1")
    assert main(["lemmas", "--range", "4"]) == 0
    monkeypatch.setenv("FLOQUET_THREADS", "zero")
    assert main(["lemmas", "--range", "4"]) == 2
