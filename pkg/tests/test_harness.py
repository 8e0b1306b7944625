import json
import math

import numpy as np
import pytest

from dichotomy_lab import harness
from dichotomy_lab.errors import ConfigError, MissingStage
from dichotomy_lab.evolution import write_coefficient_table


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


CONFIG = """\
schema: 1
problems:
  - name: switch
    family:
      kind: piecewise
      A_plus: [[-1, 0], [0, 1]]
      A_minus: [[1, 0], [0, -1]]
    window: 16
    expected: [1, 1, 0]
  - name: tanh
    family: {builtin: scalar-tanh}
  - name: saddle
    family: {kind: constant, A: [[-1, 0], [0, 2]]}
    expected: [0, 0, 0]
    tolerances: {rank_rtol: 1.0e-9}
"""


class TestConfig:
    def test_parse(self, tmp_path):
        specs = harness.load_config(write(tmp_path, CONFIG))
        assert [s.name for s in specs] == ["switch", "tanh", "saddle"]
        assert specs[0].expected == (1, 1, 0) and specs[2].tolerances == {"rank_rtol": 1e-9}

    @pytest.mark.parametrize("text", [
        "problems: []\n",
        "schema: 2\nproblems: [{name: a, family: {builtin: scalar-tanh}}]\n",
        "schema: 1\nproblems: [{name: a, family: {kind: nope}}]\n",
        "schema: 1\nproblems: [{name: a, family: {kind: constant, A: [[1, 2]]}}]\n",
        "schema: 1\nproblems: [{name: a, family: {builtin: scalar-tanh}, tolerances: {bogus: 1}}]\n",
        "schema: 1\nproblems: [{name: a, family: {builtin: nothing}}]\n",
        "schema: 1\nproblems: [{name: a, family: {builtin: scalar-tanh}, window: 3}]\n",
        "schema: 1\nproblems: [{name: a, family: {builtin: scalar-tanh}, colour: red}]\n",
        "schema: 1\nproblems: [{name: a, family: {kind: table, csv: missing.csv}}]\n",
        "schema: 1\nproblems: [{name: a, family: {builtin: scalar-tanh}}, {name: a, family: {builtin: scalar-tanh}}]\n",
        "schema: 1\nproblems: [oops\n",
    ])
    def test_rejects(self, tmp_path, text):
        with pytest.raises(ConfigError):
            harness.load_config(write(tmp_path, text))

    def test_table_family(self, tmp_path):
        ts = np.linspace(-30, 30, 601)
        write_coefficient_table(tmp_path / "a.csv", ts, [[[-math.tanh(t)]] for t in ts])
        text = "schema: 1\nproblems: [{name: tab, family: {kind: table, csv: a.csv}, expected: [1, 0, 1]}]\n"
        (spec,) = harness.load_config(write(tmp_path, text))
        rep = harness.run_analyze(spec)
        assert rep.verdict == "pass", rep.to_dict()

    def test_discrete_family(self, tmp_path):
        e = math.e
        steps = [[[e, 0], [0, 1 / e]]] * 12 + [[[1 / e, 0], [0, 1 / e]]] * 12
        text = ("schema: 1\nproblems:\n  - name: disc\n    window: 10\n    expected: [1, 0, 1]\n"
                "    methods: {plus: qr-product, minus: qr-product}\n"
                f"    family: {{kind: discrete, start: -12, steps: {json.dumps(steps)}}}\n")
        (spec,) = harness.load_config(write(tmp_path, text))
        assert harness.run_analyze(spec).verdict == "pass"


class TestAnalyze:
    def test_config_run(self, tmp_path):
        reps = harness.run_many(harness.load_config(write(tmp_path, CONFIG)), workers=2)
        assert [r.verdict for r in reps] == ["pass"] * 3
        assert reps[0].stages["D"] == {"dim_ker": 1, "codim_im": 1, "index": 0}

    def test_scalar_tanh_all_plus_one(self):
        rep = harness.run_analyze(harness.spec_from_builtin("scalar-tanh"))
        assert rep.verdict == "pass"
        s = rep.stages
        assert s["D"]["index"] == s["node"]["N(0,0)"]["index"] == s["pair"]["index"] == s["flow"]["flow"] == 1

    def test_petrovskij(self):
        rep = harness.run_analyze(harness.spec_from_builtin("petrovskij-k8"))
        assert rep.verdict == "pass"
        assert rep.stages["rank_plus"] == 17 and rep.stages["D"]["index"] == 0

    def test_refusal_is_reported_not_raised(self):
        rep = harness.run_analyze(harness.spec_from_builtin("imaginary-limit"))
        assert rep.verdict == "fail" and "dichotomy.plus" in rep.errors

    def test_expected_mismatch_fails(self, tmp_path):
        text = "schema: 1\nproblems: [{name: a, family: {builtin: scalar-tanh}, expected: [0, 0, 0]}]\n"
        (spec,) = harness.load_config(write(tmp_path, text))
        assert harness.run_analyze(spec).verdict == "fail"

    def test_tolerance_override_reaches_the_run(self, tmp_path):
        text = ("schema: 1\nproblems: [{name: a, family: {builtin: scalar-tanh}, "
                "tolerances: {rank_gap: 1.0e+300}}]\n")
        (spec,) = harness.load_config(write(tmp_path, text))
        assert harness.run_analyze(spec).verdict == "fail"

    def test_deterministic_json(self):
        a = harness.dumps(harness.reports_document([harness.run_analyze(harness.spec_from_builtin("flow-2d"))]))
        b = harness.dumps(harness.reports_document([harness.run_analyze(harness.spec_from_builtin("flow-2d"))]))
        assert a == b and json.loads(a)["schema"] == 1
        assert "timings" not in json.loads(a)["reports"][0]


class TestPlotData:
    def test_kernel_profile_is_sech(self, tmp_path):
        rep = harness.run_analyze(harness.spec_from_builtin("scalar-tanh")).to_dict()
        (path,) = harness.emit_plotdata(rep, "kernel-profile", tmp_path)
        rows = np.loadtxt(path)
        assert np.allclose(rows[:, 1], 1 / np.cosh(rows[:, 0]), atol=1e-6)

    def test_autonomous_decay_is_straight(self, tmp_path):
        text = "schema: 1\nproblems: [{name: saddle, family: {kind: constant, A: [[-1, 0], [0, 2]]}}]\n"
        (spec,) = harness.load_config(write(tmp_path, text))
        (path,) = harness.emit_plotdata(harness.run_analyze(spec).to_dict(), "dichotomy-decay", tmp_path)
        rows = np.loadtxt(path)
        assert np.allclose(np.diff(rows[:, 1]), -1.0, atol=1e-10)

    def test_eigenvalue_path_crosses_at_zero(self, tmp_path):
        rep = harness.run_analyze(harness.spec_from_builtin("flow-2d")).to_dict()
        (path,) = harness.emit_plotdata(rep, "eigenvalue-path", tmp_path)
        rows = np.loadtxt(path)
        mid = rows[np.argmin(np.abs(rows[:, 0]))]
        assert mid[0] == 0.0 and np.min(np.abs(mid[1:])) < 1e-12

    def test_missing_stage(self, tmp_path):
        rep = harness.run_analyze(harness.spec_from_builtin("autonomous-hyperbolic-4d")).to_dict()
        with pytest.raises(MissingStage):
            harness.emit_plotdata(rep, "kernel-profile", tmp_path)
        with pytest.raises(MissingStage):
            harness.emit_plotdata(rep, "eigenvalue-path", tmp_path)


class TestSuite:
    def test_flow_filter(self):
        res = harness.run_verify_suite("flow")
        assert {c.invariant for c in res.checks} == {"flow-index"}
        assert res.passed and len(res.checks) >= 3

    def test_adversarial_fails(self):
        res = harness.run_verify_suite("riesz", adversarial=True)
        bad = [c for c in res.checks if not c.passed]
        assert [c.invariant for c in bad] == ["adversarial-corrupted-projector"]
        assert not res.passed

    def test_core_invariants_on_two_problems(self):
        res = harness.run_verify_suite(problems=["scalar-tanh", "mixed-channel-0"], perturbation_seeds=2)
        assert res.passed, res.matrix()
        assert {"index-stability", "node-invertibility", "kernel-isomorphism"} <= {c.invariant for c in res.checks}

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv("DICHOTOMY_LAB_THREADS", "3")
        assert harness.worker_count() == 3
        monkeypatch.setenv("DICHOTOMY_LAB_THREADS", "x")
        with pytest.raises(ConfigError):
            harness.worker_count()
