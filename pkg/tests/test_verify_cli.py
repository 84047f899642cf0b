import csv
import io
import json
import math
from pathlib import Path

import pytest

from viterbo import cli, verify
from viterbo.errors import NumericFailure
from viterbo.verify import (
    ConfigError,
    ViterboReport,
    auxiliary_grid,
    check_ineq,
    emit_figure_data,
    format_rows,
    l2sum_capacity_upper_bound,
    load_config,
    run_report,
    viterbo_ratio,
)

ONE_CYCLE = 4 * math.asin(3 / 5)


def write(tmp_path, text, name="body.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


L1LINF = """
family: l2-sum
label: l1-linf
dimension: 2
level: 1
parameters:
  norm: ell-infinity
"""

UNIT_BALL = """
family: quadratic
dimension: 1
parameters: {matrix: [1, 0, 0, 1]}
"""

HARMONIC = """
family: direct-sum
level: 1
parameters: {systems: [1, {kind: harmonic, omega: 2}]}
"""


# -- ratios and the dimension inequality -------------------------------------


def test_viterbo_ratio_examples():
    assert viterbo_ratio(4.0, ONE_CYCLE, 2) == pytest.approx(1.2074, abs=1e-4)
    for n in (1, 2, 5):
        assert viterbo_ratio(math.pi**n / math.factorial(n), math.pi, n) == pytest.approx(1.0, rel=1e-12)
    assert viterbo_ratio(math.pi, ONE_CYCLE, 3) == pytest.approx(1.105, abs=1e-3)
    with pytest.raises(ValueError):
        viterbo_ratio(0.0, 1.0, 2)


def test_capacity_upper_bound_examples():
    assert l2sum_capacity_upper_bound(1) == pytest.approx(math.pi)
    assert l2sum_capacity_upper_bound(2) == pytest.approx(2 * math.sqrt(2))
    assert l2sum_capacity_upper_bound(3) == pytest.approx((6 * math.pi) ** (1 / 3))
    assert l2sum_capacity_upper_bound(4) == pytest.approx(4 * (1 / 6) ** 0.25)


def test_check_ineq_examples():
    c = check_ineq(1)
    assert c.equality and c.holds and c.lhs == pytest.approx(2 * math.asin(1))
    c = check_ineq(2)
    assert c.holds and not c.equality and c.lhs > 2.6 > c.rhs
    c = check_ineq(100)
    assert c.holds and c.stirling and c.cubic_sine and c.log_step and c.chain
    assert check_ineq(4).log_step is None


def test_check_ineq_predicates_everywhere():
    for n in range(1, 1001):
        c = check_ineq(n)
        assert c.holds and c.stirling and c.cubic_sine
        if n >= 5:
            assert c.log_step and c.chain


def test_auxiliary_grid():
    assert all(auxiliary_grid(count=2001).values())


# -- configuration and reports -------------------------------------------------


def test_report_rows(tmp_path):
    status, rows = run_report(write(tmp_path, L1LINF), samples=10_000)
    assert status == 0
    (row,) = rows
    assert row.ratio == pytest.approx(1.2074, abs=1e-4) and row.ok
    assert row.volume_method == "exact" and row.capacity_tag == "exact"

    status, (row,) = run_report(write(tmp_path, UNIT_BALL))
    assert status == 0 and row.ratio == pytest.approx(1.0, rel=1e-12)

    status, (row,) = run_report(write(tmp_path, HARMONIC), samples=200_000)
    assert status == 0 and row.capacity == pytest.approx(math.pi, rel=1e-8) and row.ok


def test_l2sum_level_scaling(tmp_path):
    _, (a,) = run_report(write(tmp_path, L1LINF))
    _, (b,) = run_report(write(tmp_path, L1LINF.replace("level: 1", "level: 2.5")))
    assert b.volume == pytest.approx(a.volume * 2.5**2)
    assert b.capacity == pytest.approx(a.capacity * 2.5)
    assert b.ratio == pytest.approx(a.ratio)


def test_l2sum_n3_is_upper_bound(tmp_path):
    _, (row,) = run_report(write(tmp_path, L1LINF.replace("dimension: 2", "dimension: 3")))
    assert row.capacity_tag == "upper-bound"
    assert row.capacity == pytest.approx(6 * math.asin(5 / 13))
    assert row.ratio >= viterbo_ratio(math.pi, ONE_CYCLE, 3)


def test_reports_reproducible(tmp_path):
    path = write(tmp_path, HARMONIC)
    a = format_rows(run_report(path, samples=100_000, seed=4)[1], "structured")
    b = format_rows(run_report(path, samples=100_000, seed=4, workers=2)[1], "structured")
    assert a == b


@pytest.mark.parametrize(
    "text",
    [
        "family: cube\n",
        "- 1\n- 2\n",
        "family: quadratic\ndimension: 1\nparameters: {matrix: [1, 2, 3]}\n",
        "family: quadratic\ndimension: 1\nparameters: {matrix: [1, 0, 0, -1]}\n",
        "family: l2-sum\ndimension: 2\nparameters: {norm: ell-1, dual_norm: ell-2}\n",
        "family: l2-sum\ndimension: 2\nlevel: -1\n",
        "family: direct-sum\nparameters: {systems: []}\n",
        "family: direct-sum\nparameters: {systems: [{kind: anharmonic}]}\n",
        "bodies: []\n",
        "family: quadratic\n  bad: [indent\n",
    ],
)
def test_bad_configs_exit_2(tmp_path, text, capsys):
    assert cli.main(["verify", write(tmp_path, text)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert cli.main(["capacity", str(tmp_path / "nope.yaml")]) == 2


def test_split_without_sandwich_is_input_error(tmp_path):
    text = """
family: split-T-V
dimension: 2
parameters:
  T: {kind: norm, norm: ell-1}
  V: {kind: norm, norm: ell-infinity}
"""
    with pytest.raises(ConfigError):
        run_report(write(tmp_path, text))


def test_load_config_list(tmp_path):
    bodies = load_config(Path(__file__).parents[1] / "configs" / "all.yaml")
    assert [b["family"] for b in bodies] == ["l2-sum", "l2-sum", "quadratic", "direct-sum", "split-T-V"]


# -- command line ----------------------------------------------------------------


def test_cli_verify_table_and_structured(tmp_path, capsys):
    path = write(tmp_path, L1LINF)
    assert cli.main(["verify", path]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out), delimiter="\t"))
    assert float(rows[0]["ratio"]) == pytest.approx(1.2074, abs=1e-4)
    out = tmp_path / "r.json"
    assert cli.main(["verify", path, "--format", "structured", "--out", str(out)]) == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["all_ok"] and doc["rows"][0]["capacity_tag"] == "exact"


def test_cli_capacity_and_volume(tmp_path, capsys):
    path = write(tmp_path, HARMONIC)
    assert cli.main(["capacity", path, "--format", "structured", "--samples", "1e4"]) == 0
    assert json.loads(capsys.readouterr().out)[0]["capacity"] == pytest.approx(math.pi)
    assert cli.main(["volume", write(tmp_path, UNIT_BALL, "b.yaml")]) == 0
    assert "exact" in capsys.readouterr().out


def test_cli_exit_1_when_a_row_fails(tmp_path, monkeypatch):
    bad = ViterboReport("bad", 1, 1.0, "exact", 0.0, 4.0, "exact", 0.25, False)
    monkeypatch.setattr(cli, "body_report", lambda *a, **k: bad)
    assert cli.main(["verify", write(tmp_path, UNIT_BALL)]) == 1


def test_cli_exit_3_on_numeric_failure(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise NumericFailure("quadrature did not converge", {"E": 1.0})

    monkeypatch.setattr(cli, "body_report", boom)
    assert cli.main(["verify", write(tmp_path, UNIT_BALL)]) == 3
    assert "numeric failure" in capsys.readouterr().err


def test_cli_simulate(tmp_path, capsys):
    assert cli.main(["simulate", write(tmp_path, "start: one-cycle\n"), "--format", "structured"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["closed"] and doc["events"] == 8 and doc["cycles"] == 1
    assert doc["action"] == pytest.approx(ONE_CYCLE, abs=1e-12)
    assert cli.main(["simulate", write(tmp_path, "start: explicit\ndimension: 4\n")]) == 0
    assert "# events: 16" in capsys.readouterr().out
    assert cli.main(["simulate", write(tmp_path, "start: {p: [0, 0], q: [0, 0]}\n")]) == 2


def test_figure_data():
    rows = list(csv.DictReader(io.StringIO(emit_figure_data("trajectory-nd", n=3, dense=False))))
    assert [r["event"] for r in rows].count("start") == 1 and len(rows) == 13
    rows = list(csv.DictReader(io.StringIO(emit_figure_data("trajectory-2d", per_segment=4))))
    assert sum(1 for r in rows if r["event"] in ("p-zero", "max-tie")) == 8
    # each q_i is monotone between consecutive events
    rows = list(csv.DictReader(io.StringIO(emit_figure_data("coordinate-evolution", n=3, per_segment=16))))
    cuts = [i for i, r in enumerate(rows) if r["event"]]
    for a, b in zip(cuts, cuts[1:]):
        for i in range(1, 4):
            q = [float(r[f"q_{i}"]) for r in rows[a : b + 1]]
            d = [y - x for x, y in zip(q, q[1:])]
            assert all(v >= -1e-12 for v in d) or all(v <= 1e-12 for v in d)
    with pytest.raises(ValueError):
        emit_figure_data("phase-portrait")


def test_cli_figures(tmp_path):
    out = tmp_path / "fig.csv"
    assert cli.main(["figures", "trajectory-nd", "--n", "4", "--events-only", "--out", str(out)]) == 0
    assert len(out.read_text(encoding="utf-8").splitlines()) == 1 + 1 + 16


def test_module_exports():
    assert verify.FAMILIES == ("quadratic", "split-T-V", "l2-sum", "direct-sum")
