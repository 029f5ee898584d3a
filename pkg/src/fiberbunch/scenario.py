"""Scenario files: parsing and the five batch tasks.

A scenario is a JSON object::

    {
      "task": "certify",                      # optional, must match the subcommand
      "shift": {"adjacency": [[1, 1], [1, 1]], "nu": 0.5},
      "beta": 1.0,
      "seed": 0,
      "cocycles": {"A": {"kind": "symbol", "values": {"1": ..., "2": ...}}, ...},
      "params": {...}                          # task parameters
    }

Matrices are nested lists, ``{"diag": [...]}`` or ``{"exp_diag": [...]}``.
Generator kinds: ``symbol``, ``constant``, ``identity``, ``table``,
``near_identity`` and ``coboundary`` (``base`` cocycle name plus a
``transfer`` generator).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import bunching, conjugacy, holonomy, lyapunov
from .cocycle import (
    CocycleInstance,
    LocallyConstantGenerator,
    constant_generator,
    identity_generator,
    make_coboundary,
    symbol_generator,
)
from .errors import FiberBunchError
from .examples import near_identity
from .linops import InvertibleOperator
from .shift_space import PeriodicOrbitPoint, ShiftSpec, enumerate_periodic

TASKS = ("certify", "lyapunov", "holonomy-verify", "conjugacy-synth", "verify")


class ScenarioError(Exception):
    """Invalid scenario input; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class Scenario:
    task: str | None
    shift: ShiftSpec
    beta: float
    cocycles: dict[str, CocycleInstance]
    transfers: dict[str, LocallyConstantGenerator]
    params: dict[str, Any]
    seed: int


@dataclass
class TaskResult:
    checks: list[dict] = field(default_factory=list)
    results: dict[str, Any] = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)

    def add(self, name: str, status: str, max_residual: float | None = None,
            witness: str | None = None, **extra) -> None:
        row = {"name": name, "status": status, "max_residual": max_residual, "witness": witness}
        row.update(extra)
        self.checks.append(row)

    @property
    def exit_code(self) -> int:
        statuses = {c["status"] for c in self.checks}
        if "fail" in statuses:
            return 1
        if "undetermined" in statuses:
            return 2
        return 0


# -- parsing -----------------------------------------------------------------


def _matrix(value, where: str) -> np.ndarray:
    try:
        if isinstance(value, dict):
            if "diag" in value:
                return np.diag(np.asarray(value["diag"], dtype=float))
            if "exp_diag" in value:
                return np.diag(np.exp(np.asarray(value["exp_diag"], dtype=float)))
            raise ScenarioError(where, "matrix object needs 'diag' or 'exp_diag'")
        m = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(where, f"not a numeric matrix ({exc})") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ScenarioError(where, f"expected a square matrix, got shape {m.shape}")
    return m


def _word(text, where: str) -> tuple[int, ...]:
    if isinstance(text, list):
        return tuple(int(s) for s in text)
    text = str(text).strip()
    parts = text.split(",") if "," in text else list(text)
    try:
        return tuple(int(s) for s in parts)
    except ValueError as exc:
        raise ScenarioError(where, f"cannot read word {text!r}") from exc


def _operator(value, where: str) -> InvertibleOperator:
    try:
        return InvertibleOperator.from_matrix(_matrix(value, where))
    except ScenarioError:
        raise
    except FiberBunchError as exc:
        raise ScenarioError(where, str(exc)) from exc


def _generator(spec: ShiftSpec, d: dict, beta: float, where: str) -> LocallyConstantGenerator:
    kind = d.get("kind")
    if kind == "symbol":
        values = d.get("values")
        if not isinstance(values, dict):
            raise ScenarioError(f"{where}.values", "expected an object keyed by symbol")
        ops = {}
        for s in spec.symbols:
            if str(s) not in values:
                raise ScenarioError(f"{where}.values", f"missing symbol {s}")
            ops[s] = _operator(values[str(s)], f"{where}.values.{s}")
        return symbol_generator(spec, ops, beta)
    if kind == "constant":
        return constant_generator(spec, _operator(d.get("value"), f"{where}.value"), beta)
    if kind == "identity":
        return identity_generator(spec, int(d.get("dim", 2)), beta)
    if kind == "table":
        entries = d.get("entries")
        if not isinstance(entries, dict):
            raise ScenarioError(f"{where}.entries", "expected an object keyed by word")
        table = {_word(w, f"{where}.entries"): _operator(m, f"{where}.entries.{w}") for w, m in entries.items()}
        return LocallyConstantGenerator(int(d.get("window_radius", 0)), table, beta)
    if kind == "near_identity":
        c = near_identity(spec, int(d.get("window_radius", 1)), float(d.get("scale", 0.05)),
                          int(d.get("seed", 0)), int(d.get("dim", 2)))
        return LocallyConstantGenerator(c.r, c.generator.table, beta)
    raise ScenarioError(f"{where}.kind", f"unknown generator kind {kind!r}")


def parse_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario", "top level must be a JSON object")
    task = data.get("task")
    if task is not None and task not in TASKS:
        raise ScenarioError("task", f"unknown task {task!r}")
    sh = data.get("shift")
    if not isinstance(sh, dict) or "adjacency" not in sh:
        raise ScenarioError("shift.adjacency", "missing")
    try:
        spec = ShiftSpec(tuple(tuple(row) for row in sh["adjacency"]), float(sh.get("nu", 0.5)))
    except FiberBunchError as exc:
        raise ScenarioError("shift.adjacency" if "nu" not in str(exc) else "shift.nu", str(exc)) from exc
    except TypeError as exc:
        raise ScenarioError("shift.adjacency", f"expected a list of rows ({exc})") from exc
    if "alphabet_size" in sh and int(sh["alphabet_size"]) != spec.alphabet_size:
        raise ScenarioError("shift.alphabet_size", f"{sh['alphabet_size']} does not match the adjacency")
    beta = float(data.get("beta", 1.0))
    if not 0 < beta <= 1:
        raise ScenarioError("beta", f"must lie in (0, 1], got {beta}")
    raw = data.get("cocycles", {})
    if not isinstance(raw, dict):
        raise ScenarioError("cocycles", "expected an object")
    cocycles: dict[str, CocycleInstance] = {}
    transfers: dict[str, LocallyConstantGenerator] = {}

    def resolve(name: str, stack: tuple[str, ...] = ()) -> CocycleInstance:
        where = f"cocycles.{name}"
        if name in cocycles:
            return cocycles[name]
        if name not in raw:
            raise ScenarioError(where, "undefined cocycle")
        if name in stack:
            raise ScenarioError(where, "circular coboundary definition")
        d = raw[name]
        try:
            if d.get("kind") == "coboundary":
                base = resolve(str(d.get("base")), stack + (name,))
                transfer = _generator(spec, d.get("transfer", {}), beta, f"{where}.transfer")
                c = make_coboundary(base, transfer)
                transfers[name] = transfer
            else:
                c = CocycleInstance(spec, _generator(spec, d, beta, where))
        except ScenarioError:
            raise
        except (FiberBunchError, ValueError, AttributeError) as exc:
            raise ScenarioError(where, str(exc)) from exc
        cocycles[name] = c
        return c

    for name in raw:
        resolve(name)
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioError("params", "expected an object")
    return Scenario(task, spec, beta, cocycles, transfers, params, int(data.get("seed", 0)))


# -- helpers ----------------------------------------------------------------


def _cocycle(sc: Scenario, key: str, default: str | None = None) -> CocycleInstance:
    name = sc.params.get(key, default)
    if name is None:
        raise ScenarioError(f"params.{key}", "missing")
    if name not in sc.cocycles:
        raise ScenarioError(f"params.{key}", f"cocycle {name!r} is not defined")
    return sc.cocycles[name]


def _int(sc: Scenario, key: str, default: int, lo: int = 1, hi: int = 10_000) -> int:
    try:
        v = int(sc.params.get(key, default))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"params.{key}", "expected an integer") from exc
    if not lo <= v <= hi:
        raise ScenarioError(f"params.{key}", f"must lie in [{lo}, {hi}], got {v}")
    return v


def _orbit(sc: Scenario, key: str = "p0") -> PeriodicOrbitPoint:
    try:
        return sc.shift.periodic(_word(sc.params.get(key, "1"), f"params.{key}"))
    except FiberBunchError as exc:
        raise ScenarioError(f"params.{key}", str(exc)) from exc


def _trace_counts(spec: ShiftSpec, K: int) -> list[tuple[int, int, int]]:
    m = spec.matrix.astype(object)
    power = np.identity(spec.alphabet_size, dtype=object)
    rows = []
    for k in range(1, K + 1):
        power = power.dot(m)
        rows.append((k, len(enumerate_periodic(spec, k)), int(np.trace(power))))
    return rows


# -- tasks ------------------------------------------------------------------


def run_certify(sc: Scenario, workers: int) -> TaskResult:
    c = _cocycle(sc, "cocycle")
    out = TaskResult()
    K = _int(sc, "K", 10, hi=16)
    try:
        premise = bunching.periodic_premise_check(c, K)
        status = "pass" if premise.status == "evidence" else "undetermined"
        out.add("periodic_premise", status, None, premise.worst_orbit, evidence_only=True)
        out.results["premise"] = premise.to_dict()
    except bunching.PremiseViolation as v:
        out.add("periodic_premise", "fail", v.rate, str(v.orbit), kind="Violation")
        out.results["premise"] = {"status": "violation", "orbit": str(v.orbit), "rate": v.rate}
    N_max = _int(sc, "N_max", 20, hi=40)
    try:
        cert = bunching.find_uniform_N(c, N_max)
    except bunching.Undetermined as u:
        out.add("uniform_N", "undetermined", u.max_gap, u.witness_word, N_max=N_max)
        return out
    out.add("uniform_N", "pass", None, cert.witness_word, N=cert.N, theta=cert.theta, margin=cert.margin)
    out.results["certificate"] = cert.to_dict()
    horizon = _int(sc, "horizon", 10, hi=24)
    rep = bunching.direct_check(c, cert, horizon)
    witness = None if rep.violation is None else f"{rep.violation[0]} n={rep.violation[1]}"
    out.add("direct_check", "pass" if rep.passed else "fail", max(0.0, rep.worst_ratio - 1), witness,
            horizon=horizon, words_checked=rep.words_checked, worst_ratio=rep.worst_ratio)
    return out


def _measure(sc: Scenario) -> lyapunov.MarkovMeasure:
    m = sc.params.get("measure", "parry")
    try:
        if m == "parry":
            return lyapunov.parry_measure(sc.shift)
        if isinstance(m, dict) and "bernoulli" in m:
            return lyapunov.MarkovMeasure.bernoulli(sc.shift, m["bernoulli"])
        if isinstance(m, dict) and "transition" in m:
            return lyapunov.MarkovMeasure.from_transition(sc.shift, m["transition"])
    except FiberBunchError as exc:
        raise ScenarioError("params.measure", str(exc)) from exc
    raise ScenarioError("params.measure", f"unknown measure {m!r}")


def run_lyapunov(sc: Scenario, workers: int) -> TaskResult:
    c = _cocycle(sc, "cocycle")
    mu = _measure(sc)
    out = TaskResult()
    resid = mu.stationarity_residual()
    out.add("stationarity", "pass" if resid <= lyapunov.STATIONARITY_TOL else "fail", resid)
    n = _int(sc, "n", 2000, hi=100_000)
    trials = _int(sc, "trials", 50, lo=2, hi=10_000)
    est = lyapunov.estimate_exponents(c, mu, n, trials, sc.seed, workers)
    chi = lyapunov.chi_from_estimate(c, est)
    out.results["estimate"] = est.to_dict()
    out.results["chi"] = {"value": chi.value, "stderr": chi.stderr}
    out.results["entropy"] = mu.entropy
    out.tables["exponent_trials"] = (["trial", "lambda_plus", "lambda_minus"],
                                     [[i, a, b] for i, (a, b) in enumerate(zip(est.plus_samples, est.minus_samples))])
    sigma = float(sc.params.get("sigma", 3.0))
    expected = sc.params.get("expected", {})
    observed = {"lambda_plus": (est.lambda_plus, est.stderr_plus),
                "lambda_minus": (est.lambda_minus, est.stderr_minus),
                "chi": (chi.value, chi.stderr)}
    for key in ("lambda_plus", "lambda_minus", "chi"):
        if key in expected:
            value, se = observed[key]
            diff = abs(value - float(expected[key]))
            out.add(f"{key}_within_{sigma:g}_stderr", "pass" if diff <= sigma * se else "fail", diff,
                    None, estimate=value, stderr=se, target=float(expected[key]))
    K = _int(sc, "K", 6, hi=16)
    rows = lyapunov.periodic_approximants(c, K)
    out.tables["approximants"] = (["orbit", "period", "lambda_plus", "lambda_minus"],
                                  [[str(r.orbit), r.k, r.plus_value, r.minus_value] for r in rows])
    counts = _trace_counts(sc.shift, K)
    per_k = {k: sum(1 for r in rows if r.k == k) for k in range(1, K + 1)}
    bad = [k for k, _, tr in counts if per_k[k] != tr]
    out.add("approximant_counts", "fail" if bad else "pass", float(len(bad)),
            None if not bad else f"period {bad[0]}")
    target = sc.params.get("approximant_target")
    if target is not None:
        best, err = lyapunov.best_approximant(rows, float(target.get("lambda_plus", 0.0)),
                                              float(target.get("lambda_minus", 0.0)))
        tol = float(target.get("tol", 1e-12))
        out.add("approximant_target", "pass" if err <= tol else "fail", err, str(best.orbit))
    return out


def run_holonomy_verify(sc: Scenario, workers: int) -> TaskResult:
    names = sc.params.get("cocycle", [])
    names = [names] if isinstance(names, str) else list(names)
    if not names:
        raise ScenarioError("params.cocycle", "missing")
    pairs = _int(sc, "pairs", 200, hi=100_000)
    out = TaskResult()
    rng = np.random.default_rng(sc.seed)
    for name in names:
        if name not in sc.cocycles:
            raise ScenarioError("params.cocycle", f"cocycle {name!r} is not defined")
        c = sc.cocycles[name]
        try:
            cert = bunching.find_uniform_N(c, _int(sc, "N_max", 20, hi=40))
        except bunching.Undetermined as u:
            out.add(f"{name}.certificate", "undetermined", u.max_gap, u.witness_word)
            continue
        rep = holonomy.verify_holonomies(c, cert, rng, pairs)
        for row in rep.checks():
            row = dict(row)
            row["name"] = f"{name}.{row['name']}"
            row.setdefault("witness", None)
            out.checks.append(row)
        out.results[name] = {"window_radius": c.r, "pairs": pairs, "h4_constant": rep.h4_constant}
    return out


def _C_p0(sc: Scenario, p0, scan) -> InvertibleOperator:
    choice = sc.params.get("C_p0", "scan")
    if choice == "scan":
        if not isinstance(scan, conjugacy.PeriodicScan):
            raise ScenarioError("params.C_p0", "periodic data scan failed, no C_p0 available")
        return scan.datum(p0).C_p
    if choice == "transfer":
        name = sc.params.get("A")
        if name not in sc.transfers:
            raise ScenarioError("params.C_p0", f"cocycle {name!r} has no transfer map")
        t = sc.transfers[name]
        r = t.window_radius
        return t.table[tuple(p0.word[i % p0.period] for i in range(-r, r + 1))]
    return _operator(choice, "params.C_p0")


def _synth(sc: Scenario, A, B, p0, C, budget, workers, out: TaskResult, label: str = "defect"):
    tol = float(sc.params.get("tol", 1e-8))
    try:
        s = conjugacy.synth_homoclinic(A, B, p0, C, budget, tol, workers=workers)
    except FiberBunchError as exc:
        witness = str(getattr(exc, "point", None) or p0)
        out.add(label, "fail", getattr(exc, "defect", None), witness, error=type(exc).__name__,
                message=str(exc))
        return None
    out.add(label, "pass" if s.defect < tol else "fail", s.defect, None,
            points=len(s.values), holder_constant=s.holder_constant)
    return s


def _scan(sc: Scenario, A, B, p0, out: TaskResult):
    K = _int(sc, "K", 6, hi=14)
    scan = conjugacy.scan_periodic_data(A, B, K, p0)
    if isinstance(scan, conjugacy.FailureWitness):
        out.add("periodic_data", "fail", None, str(scan.orbit), period=scan.k, reason=scan.reason,
                kind="FailureWitness")
        out.results["periodic_data"] = scan.to_dict()
    else:
        worst = max(d.residual for d in scan.data)
        out.add("periodic_data", "pass" if worst <= conjugacy.DATUM_RTOL else "fail", worst, None,
                M=scan.M, holder_at_p0=scan.holder_at_p0, diagnostic_only=True)
        out.results["periodic_data"] = scan.to_dict()
        out.tables["periodic_data"] = (
            ["orbit", "period", "equal", "residual", "bound_check"],
            [[str(d.orbit), d.k, int(d.equal), d.residual, d.bound_check] for d in scan.data])
    return scan


def _transfer_check(sc: Scenario, s, out: TaskResult) -> None:
    name = sc.params.get("reference_transfer")
    if name is None:
        return
    if name not in sc.transfers:
        raise ScenarioError("params.reference_transfer", f"cocycle {name!r} has no transfer map")
    t = sc.transfers[name]
    r = t.window_radius
    worst, witness = 0.0, None
    for x, v in s.values.items():
        ref = t.table[x.window(-r, r)]
        err = float(np.abs(v.entries - ref.entries).max())
        if err > worst:
            worst, witness = err, str(x)
    tol = float(sc.params.get("tol", 1e-8))
    out.add("transfer_match", "pass" if worst < tol else "fail", worst, witness, points=len(s.values))


def run_conjugacy_synth(sc: Scenario, workers: int) -> TaskResult:
    A, B = _cocycle(sc, "A"), _cocycle(sc, "B")
    p0 = _orbit(sc)
    out = TaskResult()
    scan = _scan(sc, A, B, p0, out)
    if isinstance(scan, conjugacy.FailureWitness) and sc.params.get("C_p0", "scan") == "scan":
        return out
    C = _C_p0(sc, p0, scan)
    budget = _int(sc, "budget", 8, lo=0, hi=16)
    s = _synth(sc, A, B, p0, C, budget, workers, out)
    if s is None:
        return out
    _transfer_check(sc, s, out)
    out.results["conjugacy"] = {"p0": str(p0), "C_p0": C.entries.tolist(), "budget": budget,
                                "points": len(s.values), "defect": s.defect,
                                "holder_constant": s.holder_constant}
    d = A.dim
    out.tables["conjugacy"] = (["point"] + [f"c{i + 1}{j + 1}" for i in range(d) for j in range(d)],
                               [[str(x)] + v.entries.ravel().tolist() for x, v in s.values.items()])
    return out


def run_verify(sc: Scenario, workers: int) -> TaskResult:
    checks = sc.params.get("checks")
    if not isinstance(checks, list) or not checks:
        raise ScenarioError("params.checks", "expected a nonempty list")
    known = {"cocycle_equation", "periodic_counts", "periodic_data", "cohomology", "step_relation", "uniqueness"}
    for name in checks:
        if name not in known:
            raise ScenarioError("params.checks", f"unknown check {name!r}")
    out = TaskResult()
    rng = np.random.default_rng(sc.seed)
    if "cocycle_equation" in checks:
        c = _cocycle(sc, "cocycle", sc.params.get("A"))
        samples = _int(sc, "samples", 500, hi=100_000)
        bound = _int(sc, "n_bound", 20, hi=1000)
        worst, witness = 0.0, None
        for _ in range(samples):
            x = sc.shift.random_point(rng)
            n, k = (int(v) for v in rng.integers(-bound, bound + 1, size=2))
            lhs = c.iterate(x, n + k)
            rhs = c.iterate(x.shift(k), n) @ c.iterate(x, k)
            r = float(np.abs(lhs.entries - rhs.entries).max() / np.abs(lhs.entries).max())
            if r > worst:
                worst, witness = r, f"{x} n={n} k={k}"
        out.add("cocycle_equation", "pass" if worst <= 1e-12 else "fail", worst, witness, samples=samples)
    if "periodic_counts" in checks:
        rows = _trace_counts(sc.shift, _int(sc, "K_counts", 12, hi=16))
        bad = [k for k, n, tr in rows if n != tr]
        out.add("periodic_counts", "fail" if bad else "pass", float(len(bad)),
                None if not bad else f"period {bad[0]}")
        out.tables["periodic_counts"] = (["period", "count", "trace"], [list(r) for r in rows])
    needs_pair = {"periodic_data", "cohomology", "step_relation", "uniqueness"} & set(checks)
    if not needs_pair:
        return out
    A, B = _cocycle(sc, "A"), _cocycle(sc, "B")
    p0 = _orbit(sc)
    scan = _scan(sc, A, B, p0, out) if "periodic_data" in checks else None
    pair = sc.params.get("table_pair", [sc.params.get("A"), sc.params.get("B")])
    if not isinstance(pair, list) or len(pair) != 2 or any(n not in sc.cocycles for n in pair):
        raise ScenarioError("params.table_pair", "expected two defined cocycle names")
    TA, TB = sc.cocycles[pair[0]], sc.cocycles[pair[1]]
    same_pair = pair == [sc.params.get("A"), sc.params.get("B")]
    if sc.params.get("C_p0", "scan") == "scan" and (scan is None or not same_pair):
        scan = conjugacy.scan_periodic_data(TA, TB, _int(sc, "K", 6, hi=14), p0)
    C = _C_p0(sc, p0, scan)
    budget = _int(sc, "budget", 8, lo=0, hi=16)
    s = _synth(sc, TA, TB, p0, C, budget, workers, out, "table_defect")
    if s is None:
        return out
    tol = float(sc.params.get("tol", 1e-8))
    if "cohomology" in checks:
        rep = conjugacy.verify_cohomology(A, B, s, _int(sc, "cohomology_samples", 100),
                                          _int(sc, "n_max", 10, lo=0, hi=1000), tol, sc.seed)
        out.checks.append(rep.to_dict())
    if "step_relation" in checks:
        rep = conjugacy.verify_step_relation(A, B, s, _int(sc, "step_samples", 50), tol=tol, seed=sc.seed)
        out.checks.append(rep.to_dict())
    if "uniqueness" in checks:
        other = _int(sc, "budget_small", 6, lo=0, hi=16)
        s2 = conjugacy.synth_homoclinic(TA, TB, p0, C, other, tol, s.cert_A, s.cert_B, workers)
        worst = max(float(np.abs(v.entries - s.values[x].entries).max())
                    for x, v in s2.values.items() if x in s.values)
        out.add("uniqueness", "pass" if worst < 1e-10 else "fail", worst, None, budgets=[other, budget])
    _transfer_check(sc, s, out)
    out.results["conjugacy"] = {"points": len(s.values), "defect": s.defect,
                                "holder_constant": s.holder_constant}
    return out


RUNNERS = {
    "certify": run_certify,
    "lyapunov": run_lyapunov,
    "holonomy-verify": run_holonomy_verify,
    "conjugacy-synth": run_conjugacy_synth,
    "verify": run_verify,
}


def run_task(task: str, sc: Scenario, workers: int = 1) -> TaskResult:
    if sc.task is not None and sc.task != task:
        raise ScenarioError("task", f"scenario is for {sc.task!r}, not {task!r}")
    return RUNNERS[task](sc, workers)
