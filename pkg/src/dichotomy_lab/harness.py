"""Problem specifications, the analysis driver, reports, and the verification suite.

Configuration files are YAML with a mandatory ``schema: 1`` key::

    schema: 1
    problems:
      - name: my-switch
        family:
          kind: piecewise          # piecewise | constant | table | discrete | builtin
          A_plus: [[-1, 0], [0, 1]]
          A_minus: [[1, 0], [0, -1]]
        window: 20
        methods: {plus: spectral-limit, minus: spectral-limit}
        expected: [1, 1, 0]
        tolerances: {rank_rtol: 1.0e-9}
      - name: tanh
        family: {builtin: scalar-tanh}

Reports are JSON documents with ``"schema": 1``; they are byte-identical for
identical inputs unless timings are requested.
"""

from __future__ import annotations

import json
import math
import os
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, config
from .dichotomy import (
    continuous_record,
    halfline_dichotomy,
    verify_dichotomy,
)
from .errors import (
    ConfigError,
    DichotomyLabError,
    MissingStage,
    NoSpectralGap,
    RankAmbiguous,
    SpectrumOnContour,
    UnstableTruncation,
)
from .evolution import ContinuousCoefficients, DiscreteSequence, PiecewiseConstantPerturbed
from .flows import (
    commensurability_check,
    eigenvalue_paths,
    index_for_family,
    perturbation_invariance,
    piecewise_pipeline,
    random_vanishing_perturbation,
    spectral_flow,
)
from .fredholm import (
    apply_Dplus,
    assemble_truncated_D,
    dichotomy_theorem_verify,
    index_of_D,
    kernel_basis,
    kernel_fibers,
    left_inverse_Dplus,
    same_side_node,
)
from .problems import REFUSALS, REGISTRY, Problem, get_problem
from .reduction import map_B, verify_correspondence
from .subspace import Projector, eigen_projection, matrix_rank, riesz_projection

__all__ = [
    "SCHEMA",
    "ProblemSpec",
    "RunReport",
    "SuiteResult",
    "load_config",
    "spec_from_builtin",
    "run_analyze",
    "run_many",
    "run_verify_suite",
    "emit_plotdata",
    "worker_count",
    "INVARIANTS",
]

SCHEMA = 1
PLOT_KINDS = ("kernel-profile", "dichotomy-decay", "eigenvalue-path")


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    family: dict
    window: int = 20
    methods: dict = field(default_factory=dict)
    period: int = 1
    expected: tuple | None = None
    tolerances: dict = field(default_factory=dict)
    base_dir: str = "."

    def problem(self) -> Problem:
        fam = self.family
        if "builtin" in fam:
            base = get_problem(fam["builtin"])
            return Problem(self.name, base.build, self.expected or base.expected, self.window,
                           {**base.methods, **self.methods}, self.period if self.period != 1
                           else base.period, base.tags, base.path, base.description,
                           base.rank_plus)
        return Problem(self.name, _builder(fam, self.base_dir), self.expected, self.window,
                       dict(self.methods), self.period, ("config",))


def _matrix(value, what):
    try:
        rows = [[complex(x) if isinstance(x, str) else x for x in row] for row in value]
        arr = np.array(rows)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: not a matrix ({exc})") from exc
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"{what}: expected a square matrix, got shape {arr.shape}")
    if np.iscomplexobj(arr) and np.all(arr.imag == 0):
        arr = arr.real
    return arr.astype(complex if np.iscomplexobj(arr) else float)


def _builder(fam: dict, base_dir):
    kind = fam.get("kind")
    if kind == "piecewise":
        Ap = _matrix(fam.get("A_plus"), "A_plus")
        Am = _matrix(fam.get("A_minus"), "A_minus")
        if Ap.shape != Am.shape:
            raise ConfigError("A_plus and A_minus differ in size")
        s = float(fam.get("switch_time", 0.0))
        return lambda: PiecewiseConstantPerturbed(Ap, Am, switch_time=s)
    if kind == "constant":
        A = _matrix(fam.get("A"), "A")
        return lambda: PiecewiseConstantPerturbed(A, A)
    if kind == "table":
        path = Path(base_dir) / str(fam.get("csv", ""))
        if not path.is_file():
            raise ConfigError(f"coefficient table {path} not found")
        h = fam.get("h")
        try:
            ContinuousCoefficients.from_table(path, h=h)
        except DichotomyLabError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return lambda: ContinuousCoefficients.from_table(path, h=h)
    if kind == "discrete":
        steps = [_matrix(m, "step") for m in fam.get("steps", [])]
        if not steps:
            raise ConfigError("discrete family needs a non-empty 'steps' list")
        if len({m.shape for m in steps}) != 1:
            raise ConfigError("discrete steps differ in size")
        start = int(fam.get("start", 0))
        return lambda: DiscreteSequence(steps, start=start)
    raise ConfigError(f"unknown family kind {kind!r}")


_SPEC_KEYS = {"name", "family", "window", "methods", "period", "expected", "tolerances"}


def _parse_spec(entry, base_dir) -> ProblemSpec:
    if not isinstance(entry, dict):
        raise ConfigError("each problem must be a mapping")
    unknown = set(entry) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown problem keys: {sorted(unknown)}")
    name = entry.get("name")
    fam = entry.get("family")
    if not isinstance(name, str) or not name:
        raise ConfigError("problem needs a string 'name'")
    if not isinstance(fam, dict):
        raise ConfigError(f"{name}: 'family' must be a mapping")
    if "builtin" in fam and fam["builtin"] not in REGISTRY and fam["builtin"] not in REFUSALS:
        raise ConfigError(f"{name}: unknown builtin {fam['builtin']!r}")
    tol = entry.get("tolerances") or {}
    known = set(config.Tolerances.__dataclass_fields__)
    if not isinstance(tol, dict) or set(tol) - known:
        raise ConfigError(f"{name}: unknown tolerance names {sorted(set(tol) - known)}")
    window = entry.get("window", 20)
    if not isinstance(window, int) or window < 6:
        raise ConfigError(f"{name}: window must be an integer >= 6")
    methods = entry.get("methods") or {}
    if not isinstance(methods, dict) or set(methods) - {"plus", "minus"}:
        raise ConfigError(f"{name}: methods must map plus/minus to a construction method")
    expected = entry.get("expected")
    if expected is not None:
        if not (isinstance(expected, list) and len(expected) == 3):
            raise ConfigError(f"{name}: expected must be [dim_ker, codim_im, index]")
        expected = tuple(int(v) for v in expected)
    spec = ProblemSpec(name, dict(fam), window, dict(methods), int(entry.get("period", 1)),
                       expected, dict(tol), str(base_dir))
    if "builtin" not in fam:
        _builder(fam, base_dir)  # validate eagerly
    return spec


def load_config(path) -> list:
    """Parse a YAML configuration into :class:`ProblemSpec` objects (``ConfigError`` on misuse)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if doc.get("schema") != SCHEMA:
        raise ConfigError(f"{path}: unsupported or missing schema (need schema: {SCHEMA})")
    probs = doc.get("problems")
    if not isinstance(probs, list) or not probs:
        raise ConfigError(f"{path}: 'problems' must be a non-empty list")
    specs = [_parse_spec(p, path.parent) for p in probs]
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: duplicate problem names")
    return specs


def spec_from_builtin(name, window=None) -> ProblemSpec:
    if name not in REGISTRY and name not in REFUSALS:
        raise ConfigError(f"unknown builtin problem {name!r}")
    base = get_problem(name)
    return ProblemSpec(name, {"builtin": name}, base.window if window is None else window,
                       dict(base.methods), base.period, base.expected)


# ---------------------------------------------------------------- reports


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


@dataclass
class RunReport:
    problem: str
    stages: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if self.errors:
            return "fail"
        return "pass" if all(ok for _, ok, _ in self.checks) else "fail"

    def to_dict(self, include_timings=False) -> dict:
        out = {
            "schema": SCHEMA,
            "version": __version__,
            "problem": self.problem,
            "verdict": self.verdict,
            "stages": self.stages,
            "errors": self.errors,
            "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in self.checks],
            "data": self.data,
        }
        if include_timings:
            out["timings"] = self.timings
        return _clean(out)


def _triple(nums):
    return {"dim_ker": nums.dim_ker, "codim_im": nums.codim_im, "index": nums.index}


def _record_summary(rec, ver):
    return {
        "method": rec.method,
        "grid": [rec.grid[0], rec.grid[-1]],
        "rank": rec.rank,
        "M": rec.M,
        "alpha": rec.alpha,
        "sup_projector_norm": rec.sup_norm,
        "verification": {
            "passed": ver.passed,
            "intertwining": ver.intertwining,
            "failures": list(ver.failures),
        },
    }


def _stage(report, name, fn):
    t0 = time.perf_counter()
    try:
        return fn()
    except DichotomyLabError as exc:
        report.errors[name] = {"type": type(exc).__name__, "message": str(exc)}
    except (ValueError, np.linalg.LinAlgError) as exc:
        report.errors[name] = {"type": type(exc).__name__, "message": str(exc),
                               "trace": traceback.format_exc(limit=3).splitlines()[-1]}
    finally:
        report.timings[name] = time.perf_counter() - t0
    return None


def _decay_table(rec):
    """Rows ``(t, log|U(t, t0)|_Im P|)`` from the window start, via restricted step products."""
    S = [p.image() for p in rec.projectors]
    prod = np.eye(S[0].dim)
    rows = [(rec.grid[0], 0.0 if S[0].dim else float("nan"))]
    for i, U in enumerate(rec.steps):
        prod = (S[i + 1].basis.conj().T @ U @ S[i].basis) @ prod
        rows.append((rec.grid[i + 1], math.log(np.linalg.norm(prod, 2)) if prod.size else float("nan")))
    return rows


def _kernel_profile(T, basis):
    """Kernel vectors block by block, each scaled so that ``x_0`` is a real unit vector.

    The phase is fixed by making the largest entry of ``x_0`` real positive.
    """
    m, n = T.window
    prof = []
    for j in range(basis.shape[1]):
        v = basis[:, j]
        x0 = T.block(v, 0)
        nrm = np.linalg.norm(x0)
        if nrm > 0:
            k = int(np.argmax(np.abs(x0)))
            v = v * (abs(x0[k]) / x0[k]) / nrm
        prof.append([[t] + np.real(T.block(v, t)).tolist() for t in range(m, n + 1)])
    return prof


def run_analyze(spec: ProblemSpec | Problem, include_timings=False) -> RunReport:
    """Run the full chain for one problem and collect a report.

    Stages: dichotomies on both half-lines (with verification), node operators
    ``N(0,0)`` and ``N(b,a)``, the Fredholm pair at 0, the boundary-closed
    section of ``D`` (with fibers), and the spectral flow when the problem
    comes with a symmetric path.
    """
    problem = spec.problem() if isinstance(spec, ProblemSpec) else spec
    overrides = spec.tolerances if isinstance(spec, ProblemSpec) else {}
    with config.tolerances(**overrides):
        return _analyze(problem)


def _analyze(p: Problem) -> RunReport:
    rep = RunReport(p.name)
    fam = _stage(rep, "family", lambda: p.family)
    if fam is None:
        return rep
    N = p.window
    recs = {}
    for side in ("minus", "plus"):
        rec = _stage(rep, f"dichotomy.{side}",
                     lambda side=side: halfline_dichotomy(fam, side, N, p.methods.get(side),
                                                          period=p.period))
        if rec is not None:
            ver = verify_dichotomy(rec, tolerance=config.current().dichotomy)
            recs[side] = rec
            rep.stages.setdefault("dichotomy", {})[side] = _record_summary(rec, ver)
            rep.checks.append((f"dichotomy.{side}", ver.passed, "; ".join(ver.failures)))
    if len(recs) < 2:
        return rep
    rep.data["dichotomy_decay"] = {"rows": _decay_table(recs["plus"]), "M": recs["plus"].M,
                                   "alpha": recs["plus"].alpha}
    a, b = -min(3, N // 2), min(3, N // 2)
    theorem = _stage(rep, "theorem", lambda: dichotomy_theorem_verify(
        p, records=(recs["minus"], recs["plus"]), ab=(a, b)))
    if theorem is not None:
        rep.stages["node"] = {"N(0,0)": _triple(theorem.node_00),
                              f"N({b},{a})": _triple(theorem.node_ba)}
        rep.stages["pair"] = {"alpha": theorem.pair.alpha, "beta": theorem.pair.beta,
                              "index": theorem.pair.index}
        rep.stages["D"] = _triple(theorem.D)
        rep.stages["rank_plus"] = theorem.rank_plus
        rep.checks.append(("theorem-chain", theorem.consistent, "; ".join(theorem.failures)))
        if p.expected is not None:
            ok = theorem.D.as_tuple() == tuple(p.expected)
            rep.checks.append(("expected", ok, f"got {theorem.D.as_tuple()}, expected {tuple(p.expected)}"))
        if p.rank_plus is not None:
            rep.checks.append(("rank-plus", theorem.rank_plus == p.rank_plus,
                               f"rank P+ = {theorem.rank_plus}, expected {p.rank_plus}"))

        def fibers():
            T = assemble_truncated_D(fam, (-N, N), (recs["minus"], recs["plus"]))
            basis = kernel_basis(T)
            fib = kernel_fibers(T, basis)
            return T, basis, fib

        out = _stage(rep, "fibers", fibers)
        if out is not None:
            T, basis, fib = out
            dims = sorted(set(fib.values()))
            rep.stages["fibers"] = {"dims": dims}
            if theorem.D.dim_ker:
                rep.checks.append(("fiber-constancy", dims == [theorem.D.dim_ker],
                                   f"fiber dims {dims}, dim ker {theorem.D.dim_ker}"))
            rep.data["kernel_profile"] = _kernel_profile(T, basis)
    path = p.selfadjoint_path()
    if path is not None:
        flow = _stage(rep, "flow", lambda: spectral_flow(path))
        if flow is not None:
            rep.stages["flow"] = {
                "flow": flow.flow,
                "endpoint_unstable_dims": list(flow.endpoint_unstable_dims),
                "crossings": [list(c) for c in flow.crossings],
            }
            if theorem is not None:
                rep.checks.append(("flow-equals-index", flow.flow == theorem.D.index,
                                   f"flow {flow.flow}, index {theorem.D.index}"))
            rep.checks.append(("crossings-equal-endpoints", flow.crossing_count == flow.flow,
                               f"signed crossings {flow.crossing_count}, flow {flow.flow}"))
            ts = np.linspace(-path.span, path.span, 801)
            rep.data["eigenvalue_path"] = [[float(t)] + np.linalg.eigvalsh(path(t)).tolist()
                                           for t in ts]
    return rep


def worker_count(default=None) -> int:
    env = os.environ.get("DICHOTOMY_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"DICHOTOMY_LAB_THREADS={env!r} is not an integer") from exc
    return default or min(8, os.cpu_count() or 1)


def run_many(specs, include_timings=False, workers=None) -> list:
    """Analyse several problems in a thread pool; results keep the input order."""
    workers = worker_count(workers)
    if workers == 1 or len(specs) == 1:
        return [run_analyze(s, include_timings) for s in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_analyze(s, include_timings), specs))


def reports_document(reports, include_timings=False) -> dict:
    verdict = "pass" if all(r.verdict == "pass" for r in reports) else "fail"
    return {"schema": SCHEMA, "version": __version__, "verdict": verdict,
            "reports": [r.to_dict(include_timings) for r in reports]}


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, ensure_ascii=False, allow_nan=False) + "\n"


# ---------------------------------------------------------------- plot data


def _pick(report, problem):
    if "reports" in report:
        reps = report["reports"]
        if problem is None:
            return reps[0]
        for r in reps:
            if r["problem"] == problem:
                return r
        raise MissingStage(f"no report for problem {problem!r}")
    return report


def emit_plotdata(report, what, out_dir=".", problem=None) -> list:
    """Write whitespace-separated columns for external plotting; returns the paths.

    ``report`` is a report dict, a document with several reports, or a path to
    a JSON file.
    """
    if what not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {what!r}; choose from {PLOT_KINDS}")
    if isinstance(report, (str, Path)):
        report = json.loads(Path(report).read_text(encoding="utf-8"))
    if isinstance(report, RunReport):
        report = report.to_dict()
    rep = _pick(report, problem)
    data = rep.get("data", {})
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = rep["problem"]
    paths = []
    if what == "kernel-profile":
        prof = data.get("kernel_profile")
        if not prof:
            raise MissingStage(f"{stem}: report has no kernel vectors (dim ker D = 0 or stage failed)")
        for j, rows in enumerate(prof):
            d = len(rows[0]) - 1
            path = out_dir / f"{stem}.kernel-profile.{j}.txt"
            _write_rows(path, ["n"] + [f"x{i + 1}" for i in range(d)], rows)
            paths.append(path)
    elif what == "dichotomy-decay":
        dec = data.get("dichotomy_decay")
        if not dec:
            raise MissingStage(f"{stem}: report has no dichotomy stage")
        M, alpha = dec["M"], dec["alpha"]
        rows = [[t, v if v is not None else float("nan"), math.log(M) - alpha * (t - dec["rows"][0][0])]
                for t, v in dec["rows"]]
        path = out_dir / f"{stem}.dichotomy-decay.txt"
        _write_rows(path, ["t", "log_norm_stable", "log_M_minus_alpha_t"], rows)
        paths.append(path)
    else:
        ev = data.get("eigenvalue_path")
        if not ev:
            raise MissingStage(f"{stem}: report has no eigenvalue path (not a symmetric path problem)")
        d = len(ev[0]) - 1
        path = out_dir / f"{stem}.eigenvalue-path.txt"
        _write_rows(path, ["t"] + [f"lambda{i + 1}" for i in range(d)], ev)
        paths.append(path)
    return paths


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------- verification suite


@dataclass(frozen=True)
class Check:
    invariant: str
    subject: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteResult:
    checks: list

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def matrix(self) -> str:
        width = max((len(c.invariant) for c in self.checks), default=10)
        sub = max((len(c.subject) for c in self.checks), default=10)
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            tail = f"  {c.detail}" if c.detail and not c.passed else ""
            lines.append(f"{mark}  {c.invariant:<{width}}  {c.subject:<{sub}}{tail}")
        n_ok = sum(c.passed for c in self.checks)
        lines.append(f"{n_ok}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def _inv_chain(p: Problem):
    r = dichotomy_theorem_verify(p)
    ok = r.consistent and (p.expected is None or r.D.as_tuple() == tuple(p.expected))
    return ok, f"D {r.D.as_tuple()}, node {r.node_00.as_tuple()}/{r.node_ba.as_tuple()}, " \
               f"pair {(r.pair.alpha, r.pair.beta, r.pair.index)}; {'; '.join(r.failures)}"


def _numbers_at(p: Problem, N):
    return index_for_family(p.family, N, p.methods if p.methods else None)


def _inv_index_stability(p: Problem):
    a = _numbers_at(p, p.window)
    b = _numbers_at(p, p.window + 4)
    return a == b, f"N={p.window}: {a.as_tuple()}, N={p.window + 4}: {b.as_tuple()}"


def _inv_two_windows(p: Problem):
    a = _numbers_at(p, 20)
    b = _numbers_at(p, 30)
    ok = a == b and (p.expected is None or a.as_tuple() == tuple(p.expected))
    return ok, f"N=20: {a.as_tuple()}, N=30: {b.as_tuple()}, expected {p.expected}"


def _records(p: Problem, N=None):
    N = p.window if N is None else N
    return (halfline_dichotomy(p.family, "minus", N, p.methods.get("minus"), period=p.period),
            halfline_dichotomy(p.family, "plus", N, p.methods.get("plus"), period=p.period))


def _inv_fibers(p: Problem):
    rm, rp = _records(p)
    T = assemble_truncated_D(p.family, (-p.window, p.window), (rm, rp))
    nums = index_of_D(T)
    dims = sorted(set(kernel_fibers(T).values()))
    want = [nums.dim_ker] if nums.dim_ker else [0]
    return dims == want, f"fiber dims {dims}, dim ker {nums.dim_ker}"


def _inv_node_invertible(p: Problem):
    rm, rp = _records(p)
    worst = math.inf
    for n in (1, 2, 3):
        for mat in (same_side_node(rp, 0, n), same_side_node(rm, -n, 0)):
            if mat.size:
                worst = min(worst, float(np.linalg.svd(mat, compute_uv=False).min()))
            elif mat.shape[0] != mat.shape[1]:
                worst = 0.0
    return worst > 1e-8, f"smallest singular value {worst:.3e}"


def _inv_left_inverse(p: Problem, samples=20, seed=7):
    _, rp = _records(p)
    rng = np.random.default_rng(seed)
    worst_x = worst_r = 0.0
    for i in range(samples):
        b = int(rng.integers(0, 4))
        L = rp.grid[-1] - b
        x = np.zeros((L, rp.dim), dtype=complex if p.family.dtype == complex else float)
        k = int(rng.integers(1, 9))
        x[:k] = rng.standard_normal((k, rp.dim))
        if p.family.dtype == complex:
            x[:k] = x[:k] + 1j * rng.standard_normal((k, rp.dim))
        steps = rp.steps[rp.index_of(b + 1):]
        y = apply_Dplus(steps, x)
        res = left_inverse_Dplus(rp, b, y=y)
        worst_x = max(worst_x, float(np.linalg.norm(res.x - x) / np.linalg.norm(x)))
        worst_r = max(worst_r, res.range_residual / max(1.0, float(np.linalg.norm(y))))
    return (worst_x <= 1e-9 and worst_r <= 1e-9,
            f"max relative error {worst_x:.2e}, range residual {worst_r:.2e}")


def _inv_dichotomy(p: Problem):
    rm, rp = _records(p)
    vm = verify_dichotomy(rm, tolerance=config.current().dichotomy)
    vp = verify_dichotomy(rp, tolerance=config.current().dichotomy)
    return vm.passed and vp.passed, "; ".join(vm.failures + vp.failures)


def _inv_extension(p: Problem, count=50, seed=11):
    worst = 0.0
    msgs = []
    for rec in _records(p):
        rng = np.random.default_rng(seed)
        lo, hi = rec.grid[0], rec.grid[-1]
        ts = [t for t in rng.uniform(lo, hi, count) if t != round(t)]
        crec = continuous_record(rec, p.family, ts)
        ver = verify_dichotomy(crec, tolerance=1e-6)
        msgs.extend(ver.failures)
        for k in rec.grid:
            worst = max(worst, float(np.linalg.norm(crec.projector_at(k).matrix
                                                    - rec.projector_at(k).matrix, 2)))
    ok = not msgs and worst <= 1e-10
    return ok, f"integer-time mismatch {worst:.2e}; {'; '.join(msgs)}"


def _inv_flow(p: Problem):
    path = p.selfadjoint_path()
    flow = spectral_flow(path)
    idx = _numbers_at(p, p.window).index
    ok = flow.flow == idx and flow.crossing_count == flow.flow
    return ok, f"flow {flow.flow}, signed crossings {flow.crossing_count}, index {idx}"


def _inv_perturbation(p: Problem, seeds=10):
    fam = p.family
    base = _numbers_at(p, p.window)
    methods = p.methods
    if any(m == "floquet" for m in methods.values()):
        # perturbed periodic families are no longer periodic
        methods = {"plus": "qr-product", "minus": "qr-product"}
    bad = []
    for seed in range(seeds):
        rng = np.random.default_rng(1000 + seed)
        B = random_vanishing_perturbation(fam.dim, rng, dtype=fam.dtype)
        rep = perturbation_invariance(fam, B, p.window, base_numbers=base, methods=methods)
        if not rep.preserved:
            bad.append((seed, rep.perturbed.as_tuple()))
    return not bad, f"base {base.as_tuple()}, {seeds} seeds, changed: {bad}"


def _inv_correspondence(p: Problem):
    fam = p.family
    d = fam.dim
    v = np.ones(d) / math.sqrt(d)

    def u(t):
        return math.exp(-t * t) * v

    def du(t):
        return -2.0 * t * math.exp(-t * t) * v

    rep = verify_correspondence(fam, u, du, window=(-6, 6))
    return rep.passed, f"R residual {rep.r_residual:.2e}, mild {rep.mild_residual:.2e}, " \
                       f"R(-Sy)+Dy-y {rep.surjectivity_residual:.2e}; {'; '.join(rep.failures)}"


def _inv_kernel_isomorphism(p: Problem, h=0.1):
    """``B`` maps the kernel of the section onto as many independent, decaying, continuous solutions."""
    N = p.window
    rm, rp = _records(p)
    T = assemble_truncated_D(p.family, (-N, N), (rm, rp))
    basis = kernel_basis(T)
    if basis.shape[1] == 0:
        return True, "trivial kernel"
    cols, jump, edge = [], 0.0, 0.0
    for j in range(basis.shape[1]):
        xs = np.array([T.block(basis[:, j], n) for n in range(-N, N + 1)])
        f = map_B(xs, p.family, -N, h=h)
        vals = f.values
        peak = float(np.max(np.linalg.norm(vals, axis=1)))
        edge = max(edge, float(max(np.linalg.norm(vals[0]), np.linalg.norm(vals[-1]))) / peak)
        for n in range(-N, N):
            left = p.family.propagate(n + 1, n) @ xs[n + N]
            jump = max(jump, float(np.linalg.norm(left - xs[n + N + 1])) / peak)
        cols.append(vals.ravel())
    rank = matrix_rank(np.array(cols).T)
    ok = rank == basis.shape[1] and jump <= 1e-8 and edge <= 1e-6
    return ok, f"dim ker {basis.shape[1]}, rank of B-images {rank}, jump {jump:.1e}, edge {edge:.1e}"


def _inv_necessity(p: Problem):
    try:
        nums = index_for_family(p.family, p.window, p.methods or None)
    except (UnstableTruncation, SpectrumOnContour, RankAmbiguous, NoSpectralGap) as exc:
        return True, f"refused: {type(exc).__name__}"
    return False, f"produced an integer {nums.as_tuple()} for a non-hyperbolic problem"


def _inv_piecewise(p: Problem):
    fam = p.family
    B = None
    rep = piecewise_pipeline(fam.A_plus, fam.A_minus, B, p.window)
    return rep.consistent, f"node {rep.node.as_tuple()}, D {rep.D.as_tuple()}; {'; '.join(rep.failures)}"


def _inv_commensurable(p: Problem):
    if isinstance(p.family, PiecewiseConstantPerturbed):
        Am, Ap = p.family.A_minus, p.family.A_plus
    else:
        path = p.selfadjoint_path()
        Am, Ap = path.A_minus, path.A_plus
    rep = commensurability_check(_orth_unstable(Am), _orth_unstable(Ap))
    ok = rep.node_fredholm and rep.consistency.consistent
    return ok, f"sv(P1-P2) = {np.round(rep.singular_values, 4).tolist()}"


def _orth_unstable(A):
    w, V = np.linalg.eigh(A)
    U = V[:, w > 0]
    return Projector.from_matrix(U @ U.conj().T)


def _global_riesz(count=50, seed=2024):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 51))
        k = int(rng.integers(0, n + 1))
        mod = np.concatenate([rng.uniform(0.0, 0.8, k), rng.uniform(1.25, 3.0, n - k)])
        ang = rng.uniform(0, 2 * np.pi, n)
        lam = mod * np.exp(1j * ang)
        S = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        S = S / np.linalg.norm(S, 2) + np.eye(n)
        M = S @ np.diag(lam) @ np.linalg.inv(S)
        P1 = riesz_projection(M).matrix
        P2 = eigen_projection(M, lambda z: abs(z) < 1).matrix
        worst = max(worst, float(np.linalg.norm(P1 - P2, 2)))
    return worst <= 1e-10, f"max |P_riesz - P_eig| = {worst:.2e} over {count} matrices"


def _adversarial():
    p = get_problem("autonomous-hyperbolic-4d")
    _, rp = _records(p)
    bad = rp.swapped()
    ver = verify_dichotomy(bad, tolerance=config.current().dichotomy)
    return ver.passed, "corrupted projector fixture: " + ("; ".join(ver.failures) or "accepted")


def _has(p, tag):
    return tag in p.tags


def _is_piecewise(p):
    return isinstance(p.family, PiecewiseConstantPerturbed) and p.family.B is None


# invariant name -> (tags, applicability predicate, runner)
INVARIANTS = {
    "theorem-chain": (("chain", "index"), lambda p: True, _inv_chain),
    "index-stability": (("index",), lambda p: True, _inv_index_stability),
    "two-window-oracle": (("index", "oracle"), lambda p: p.expected is not None, _inv_two_windows),
    "fiber-constancy": (("fibers",), lambda p: True, _inv_fibers),
    "node-invertibility": (("node",), lambda p: True, _inv_node_invertible),
    "left-inverse": (("left-inverse",), lambda p: True, _inv_left_inverse),
    "dichotomy-estimates": (("dichotomy",), lambda p: True, _inv_dichotomy),
    "continuous-extension": (("dichotomy", "extension"),
                             lambda p: not isinstance(p.family, DiscreteSequence), _inv_extension),
    "reduction-correspondence": (("reduction",), lambda p: _has(p, "scalar"), _inv_correspondence),
    "kernel-isomorphism": (("reduction", "kernel"),
                           lambda p: not isinstance(p.family, DiscreteSequence),
                           _inv_kernel_isomorphism),
    "flow-index": (("flow",), lambda p: p.path is not None, _inv_flow),
    "perturbation-invariance": (("perturbation",),
                                lambda p: not isinstance(p.family, DiscreteSequence),
                                _inv_perturbation),
    "piecewise-pipeline": (("piecewise",), _is_piecewise, _inv_piecewise),
    "commensurability": (("commensurable",), lambda p: _has(p, "commensurable"), _inv_commensurable),
}


def _run_check(name, runner, p):
    try:
        ok, detail = runner(p)
    except DichotomyLabError as exc:
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return Check(name, p.name, bool(ok), detail)


def run_verify_suite(filter=None, adversarial=False, problems=None, workers=None,
                     perturbation_seeds=10) -> SuiteResult:
    """Run every applicable invariant on every registered problem.

    ``filter`` keeps invariants whose name or tags contain it (e.g. ``"flow"``);
    ``adversarial`` adds a corrupted-projector fixture that must be reported as
    a failure, making the suite exit nonzero.
    """
    names = list(REGISTRY) if problems is None else list(problems)
    jobs = []
    for inv, (tags, applies, runner) in INVARIANTS.items():
        if filter and filter != inv and filter not in tags:
            continue
        if inv == "perturbation-invariance":
            def runner(p, _seeds=perturbation_seeds):
                return _inv_perturbation(p, _seeds)
        for name in names:
            p = get_problem(name)
            if applies(p):
                jobs.append((inv, runner, name))
    extra = []
    if not filter or filter in ("necessity", "index"):
        for name in REFUSALS:
            jobs.append(("necessity", _inv_necessity, name))
    if not filter or filter in ("riesz", "subspace"):
        extra.append(("riesz-accuracy", _global_riesz))
    if adversarial:
        extra.append(("adversarial-corrupted-projector", _adversarial))

    def work(job):
        inv, runner, name = job
        return _run_check(inv, runner, get_problem(name))

    w = worker_count(workers)
    if w == 1:
        checks = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            checks = list(pool.map(work, jobs))
    for inv, fn in extra:
        try:
            ok, detail = fn()
        except DichotomyLabError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        checks.append(Check(inv, "-", bool(ok), detail))
    return SuiteResult(checks)
