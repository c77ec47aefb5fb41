"""Command-line driver: ``vmprox run|compare|verify|reference``.

Exit codes: 0 ok, 1 unexpected failure, 2 unreadable or malformed data,
3 divergence, 4 invalid configuration, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .data_io import ParseError, component_lipschitz, load_libsvm, normalize_rows
from .diagnostics import MaxIterations, ReferenceSolution, compute_reference
from .model import Regularizer, SmoothPart
from .solvers import ALGORITHMS, DivergenceError, SolverConfig, canonical_algorithm, run

log = logging.getLogger("vmprox")

EXIT_OK, EXIT_ERROR, EXIT_DATA, EXIT_DIVERGED, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3, 4, 5

COLUMNS = ["epoch", "passes", "seconds", "objective", "gap", "grad_map_norm",
           "u_min", "u_max", "alpha1", "alpha2", "t_k"]

PASS_BUDGETS = (5, 10, 20, 30)

# regularization and best VM-mSRGBB settings of the benchmark sets
PRESETS = {
    "ijcnn1": dict(lambda2=1e-4, lambda1=1e-5, b=4, m="0.07n"),
    "rcv1": dict(lambda2=1e-4, lambda1=1e-5, b=2, m="0.2n"),
    "real-sim": dict(lambda2=1e-4, lambda1=1e-5, b=2, m="0.15n"),
    "covtype": dict(lambda2=1e-5, lambda1=1e-4, b=8, m="0.008n", positive_label=1.0),
}


class ConfigError(ValueError):
    pass


_M_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*\*?\s*n\s*$")
_ETA_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*/\s*L\s*$")


def resolve_m(m, n: int) -> int:
    """Inner-loop cap from an int or an ``n``-suffixed fraction such as "0.07n"."""
    if isinstance(m, (int, np.integer)) and not isinstance(m, bool):
        value = int(m)
    elif isinstance(m, float):
        if m != int(m):
            raise ConfigError(f"m must be an integer or a fraction of n, got {m}")
        value = int(m)
    else:
        text = str(m).strip()
        match = _M_RE.match(text)
        if match:
            value = max(1, int(math.floor(float(match.group(1)) * n + 0.5)))
        else:
            try:
                value = int(text)
            except ValueError:
                raise ConfigError(f"cannot parse m={m!r}; use an integer or e.g. '0.07n'") from None
    if value < 1:
        raise ConfigError(f"m must be >= 1, got {value}")
    return value


def resolve_eta(eta, L: float) -> float:
    """Initial stepsize from a number or a multiple of 1/L written "c/L"."""
    if isinstance(eta, (int, float)) and not isinstance(eta, bool):
        return float(eta)
    text = str(eta).strip()
    match = _ETA_RE.match(text)
    if match:
        return float(match.group(1)) / L
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse eta0={eta!r}; use a number or e.g. '0.1/L'") from None


@dataclass
class RunSpec:
    """Everything needed to reproduce one solver run."""

    dataset: Optional[str] = None
    algorithm: str = "vm-msrgbb"
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None
    m: object = None
    b: Optional[int] = None
    K: int = 30
    eta0: object = 0.1
    omega: float = 1.0
    sampling: str = "uniform"
    seed: int = 0
    ref_tol: float = 1e-13
    out: Optional[str] = None
    preset: Optional[str] = None
    n_features: Optional[int] = None
    positive_label: Optional[float] = None
    normalize: bool = False
    inner_rule: Optional[str] = None
    step_cap: Optional[float] = None
    max_passes: Optional[float] = None
    reference: Optional[str] = None
    timing: bool = False
    label: Optional[str] = None

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "RunSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown RunSpec field(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunSpec":
        return cls.from_dict(json.loads(text))

    def resolved(self) -> "RunSpec":
        """Copy with preset values filled in and defaults applied."""
        spec = replace(self)
        if spec.preset is not None:
            if spec.preset not in PRESETS:
                raise ConfigError(f"unknown preset {spec.preset!r}; choose from {', '.join(PRESETS)}")
            for key, value in PRESETS[spec.preset].items():
                if getattr(spec, key) is None:
                    setattr(spec, key, value)
        if spec.lambda1 is None:
            spec.lambda1 = 0.0
        if spec.lambda2 is None:
            spec.lambda2 = 0.0
        if spec.m is None:
            spec.m = 100
        if spec.b is None:
            spec.b = 1
        return spec

    def validate(self):
        if not self.dataset:
            raise ConfigError("no dataset given")
        try:
            canonical_algorithm(self.algorithm)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be a nonnegative number, got {v!r}")
        if not self.ref_tol > 0:
            raise ConfigError("ref_tol must be positive")

    @property
    def display_name(self) -> str:
        return self.label or ALGORITHMS[canonical_algorithm(self.algorithm)].name


def data_path(path: str) -> str:
    """Resolve relative dataset paths against $VMPROX_DATA_DIR when set."""
    root = os.environ.get("VMPROX_DATA_DIR")
    if root and not os.path.isabs(path) and not os.path.exists(path):
        return os.path.join(root, path)
    return path


def load_problem(spec: RunSpec):
    path = data_path(spec.dataset)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"dataset not found: {path}")
    ds = load_libsvm(path, n_features=spec.n_features, positive_label=spec.positive_label)
    if spec.normalize:
        ds = normalize_rows(ds)
    return SmoothPart(ds, spec.lambda2), Regularizer(l1=spec.lambda1, l2=0.0)


def solver_config(spec: RunSpec, smooth) -> SolverConfig:
    n = smooth.n
    try:
        cfg = SolverConfig(
            algorithm=spec.algorithm,
            m=resolve_m(spec.m, n),
            b=int(spec.b),
            K=int(spec.K),
            eta0=resolve_eta(spec.eta0, smooth.lipschitz.max),
            omega=float(spec.omega),
            sampling=spec.sampling,
            seed=int(spec.seed),
            inner_rule=spec.inner_rule,
            step_cap=spec.step_cap,
            max_passes=spec.max_passes,
        )
        cfg.validate(n)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def get_reference(spec: RunSpec, smooth, reg) -> ReferenceSolution:
    if spec.reference:
        with open(spec.reference) as fh:
            return ReferenceSolution.from_dict(json.load(fh))
    return compute_reference(smooth, reg, tol=spec.ref_tol)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def trace_rows(trace, timing: bool) -> List[List[str]]:
    rows = []
    for rec in trace.records:
        row = []
        for col in COLUMNS:
            v = getattr(rec, col)
            row.append("nan" if col == "seconds" and not timing else _fmt(v))
        rows.append(row)
    return rows


def write_atomic(path: str, text: str):
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _execute(spec: RunSpec, smooth, reg, ref: ReferenceSolution):
    cfg = solver_config(spec, smooth)
    return run(cfg, smooth, reg, p_star=ref.p_star, keep_output=False)


def gap_at_budget(trace, n: int, budget: float) -> float:
    """Gap of the last epoch finished within ``budget`` effective passes."""
    best = float("nan")
    for rec in trace.records:
        if rec.passes <= budget + 1e-12:
            best = rec.gap
    return best


# ---------------------------------------------------------------- commands

def cmd_run(spec: RunSpec) -> int:
    spec = spec.resolved()
    spec.validate()
    if not spec.out:
        raise ConfigError("no output path given (--out)")
    smooth, reg = load_problem(spec)
    cfg = solver_config(spec, smooth)
    ref = get_reference(spec, smooth, reg)
    trace = run(cfg, smooth, reg, p_star=ref.p_star, keep_output=False)
    write_atomic(spec.out, render_csv(COLUMNS, trace_rows(trace, spec.timing)))
    last = trace.records[-1]
    print(f"{spec.display_name}: {len(trace.records)} epochs, {last.passes:.3f} passes, "
          f"gap {last.gap:.3e}, P* {ref.p_star:.17g}")
    return EXIT_OK


def _run_one(args):
    spec, ref = args
    smooth, reg = load_problem(spec)
    return _execute(spec, smooth, reg, ref)


def expand_sweeps(base: RunSpec, sweeps: Sequence[str]) -> List[RunSpec]:
    """Cartesian product of ``key=v1,v2,...`` axes over ``base``."""
    axes = []
    names = {f.name for f in fields(RunSpec)}
    for item in sweeps:
        if "=" not in item:
            raise ConfigError(f"sweep {item!r} is not of the form key=v1,v2")
        key, values = item.split("=", 1)
        key = key.strip()
        if key not in names:
            raise ConfigError(f"cannot sweep unknown field {key!r}")
        axes.append([(key, _coerce(key, v.strip())) for v in values.split(",") if v.strip()])
    specs = []
    for combo in itertools.product(*axes) if axes else [()]:
        spec = replace(base, **dict(combo))
        if combo:
            tag = " ".join(f"{k}={v}" for k, v in combo)
            spec.label = f"{(base.label or ALGORITHMS[canonical_algorithm(spec.algorithm)].name)} {tag}"
        specs.append(spec)
    return specs


def _coerce(key: str, text: str):
    if key in ("b", "K", "seed", "n_features"):
        return int(text)
    if key in ("lambda1", "lambda2", "omega", "ref_tol", "step_cap", "max_passes", "positive_label"):
        return float(text)
    if key in ("eta0", "m"):
        try:
            return float(text) if key == "eta0" else int(text)
        except ValueError:
            return text
    if key in ("normalize", "timing"):
        return text.lower() in ("1", "true", "yes")
    return text


def suite_specs(suite: str, base: RunSpec) -> List[RunSpec]:
    """Canned comparisons: initial-stepsize sensitivity, batch sizes, and baselines."""
    runs = []
    base = replace(base, max_passes=base.max_passes or 30.0, K=max(base.K, 1000))
    if suite == "stepsize":
        for eta in (1.0, 0.1, 0.01):
            runs.append(replace(base, algorithm="vm-msrgbb", b=1, eta0=eta, label=f"VM-mSRGBB eta0={eta:g}"))
        for c in ("10", "1", "0.1"):
            runs.append(replace(base, algorithm="prox-svrg", b=1, m="2n", eta0=f"{c}/L",
                                label=f"Prox-SVRG eta={c}/L"))
        for eta in (1.0, 0.1, 0.01):
            runs.append(replace(base, algorithm="prox-svrg-bb", b=1, eta0=eta,
                                label=f"Prox-SVRG-BB eta0={eta:g}"))
    elif suite == "batch":
        for b in (1, 2, 4, 8, 16):
            runs.append(replace(base, algorithm="vm-msrgbb", b=b, label=f"VM-mSRGBB b={b}"))
    elif suite == "baselines":
        runs.append(replace(base, algorithm="vm-msrgbb", label="VM-mSRGBB"))
        for alg in ("ms2gd", "ms2gd-bb", "msarah", "msarah-bb"):
            runs.append(replace(base, algorithm=alg, b=8, label=ALGORITHMS[alg].name))
    else:
        raise ConfigError(f"unknown suite {suite!r}")
    return runs


def cmd_compare(specs: List[RunSpec], out: str, jobs: int = 1,
                summary: Optional[str] = None) -> int:
    if not specs:
        raise ConfigError("nothing to compare")
    specs = [s.resolved() for s in specs]
    for s in specs:
        s.validate()
    first = specs[0]
    shared = ("dataset", "lambda1", "lambda2", "normalize", "n_features", "positive_label")
    for s in specs[1:]:
        for key in shared:
            if getattr(s, key) != getattr(first, key):
                raise ConfigError(f"compared runs must share {key}")
    labels = [s.display_name for s in specs]
    if len(set(labels)) != len(labels):
        labels = [f"{lab} #{i}" for i, lab in enumerate(labels)]

    smooth, reg = load_problem(first)
    for s in specs:
        solver_config(s, smooth)
    ref = get_reference(first, smooth, reg)

    header = ["solver"] + COLUMNS
    rows: List[List[str]] = []
    traces = []
    failure = None
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, (s, ref)) for s in specs]
            results = []
            for fut in futures:
                try:
                    results.append(fut.result())
                except DivergenceError as exc:
                    failure = exc
                    break
    else:
        results = []
        for s in specs:
            try:
                results.append(_execute(s, smooth, reg, ref))
            except DivergenceError as exc:
                failure = exc
                break
    for label, s, trace in zip(labels, specs, results):
        traces.append((label, trace))
        rows += [[label] + r for r in trace_rows(trace, s.timing)]
    write_atomic(out, render_csv(header, rows))

    lines = ["solver," + ",".join(f"gap@{b}" for b in PASS_BUDGETS)]
    for label, trace in traces:
        lines.append(label + "," + ",".join(_fmt(gap_at_budget(trace, smooth.n, b)) for b in PASS_BUDGETS))
    text = "\n".join(lines) + "\n"
    if summary:
        write_atomic(summary, text)
    sys.stdout.write(f"P* = {ref.p_star:.17g}\n" + text)
    if failure is not None:
        raise failure
    return EXIT_OK


def cmd_verify(seed: int = 0, fault: Optional[str] = None) -> int:
    from .verify import FAULTS, run_checks

    prox_fn = None
    if fault is not None:
        if fault not in FAULTS:
            raise ConfigError(f"unknown fault {fault!r}; choose from {', '.join(FAULTS)}")
        prox_fn = FAULTS[fault]
    results = run_checks(seed=seed, prox_fn=prox_fn)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("FAILED: " + ", ".join(failed))
        return EXIT_VERIFY
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def cmd_reference(spec: RunSpec) -> int:
    spec = spec.resolved()
    spec.validate()
    smooth, reg = load_problem(spec)
    ref = compute_reference(smooth, reg, tol=spec.ref_tol)
    raw = component_lipschitz(smooth.dataset, spec.lambda2)
    nrm = component_lipschitz(normalize_rows(smooth.dataset), spec.lambda2)
    print(f"n={smooth.n} d={smooth.d}")
    print(f"L_i max={raw.max:.6g} mean={raw.mean:.6g} (rows as given)")
    print(f"L_i max={nrm.max:.6g} mean={nrm.mean:.6g} (unit-norm rows)")
    print(f"P* = {ref.p_star:.17g}  residual = {ref.residual:.3e}  iterations = {ref.iterations}")
    if spec.out:
        write_atomic(spec.out, json.dumps(ref.to_dict()) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- parsing

def _add_spec_args(p: argparse.ArgumentParser):
    S = argparse.SUPPRESS
    p.add_argument("dataset", nargs="?", default=S, help="LIBSVM file (gzip/bz2 ok)")
    p.add_argument("--config", help="JSON RunSpec; flags override its fields")
    p.add_argument("--preset", default=S, choices=sorted(PRESETS))
    p.add_argument("--algorithm", "-a", default=S)
    p.add_argument("--lambda1", type=float, default=S)
    p.add_argument("--lambda2", type=float, default=S)
    p.add_argument("-m", dest="m", default=S, help="inner cap, integer or fraction like 0.07n")
    p.add_argument("-b", dest="b", type=int, default=S)
    p.add_argument("-K", dest="K", type=int, default=S)
    p.add_argument("--eta0", default=S, help="initial stepsize, number or c/L")
    p.add_argument("--omega", type=float, default=S)
    p.add_argument("--sampling", choices=["uniform", "importance"], default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--ref-tol", dest="ref_tol", type=float, default=S)
    p.add_argument("--reference", default=S, help="JSON written by 'vmprox reference'")
    p.add_argument("--out", "-o", default=S)
    p.add_argument("--n-features", dest="n_features", type=int, default=S)
    p.add_argument("--positive-label", dest="positive_label", type=float, default=S)
    p.add_argument("--normalize", action="store_true", default=S)
    p.add_argument("--inner-rule", dest="inner_rule", choices=["random", "fixed"], default=S)
    p.add_argument("--step-cap", dest="step_cap", type=float, default=S)
    p.add_argument("--max-passes", dest="max_passes", type=float, default=S)
    p.add_argument("--timing", action="store_true", default=S,
                   help="fill the seconds column (makes output machine dependent)")
    p.add_argument("--label", default=S)


def _spec_from_args(ns, base: Optional[Dict] = None) -> RunSpec:
    data = dict(base or {})
    if getattr(ns, "config", None):
        with open(ns.config) as fh:
            doc = json.load(fh)
        if "base" in doc:
            doc = doc["base"]
        data.update(doc)
    skip = {"command", "config", "verbose", "jobs", "sweep", "suite", "summary",
            "seed_sweep", "inject_fault"}
    for key, value in vars(ns).items():
        if key not in skip:
            data[key] = value
    for key in ("eta0", "m"):
        if isinstance(data.get(key), str):
            data[key] = _coerce(key, data[key])
    return RunSpec.from_dict(data)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmprox", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one solver and write its per-epoch trace")
    _add_spec_args(p)

    p = sub.add_parser("compare", help="run several solvers against one reference")
    _add_spec_args(p)
    p.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2")
    p.add_argument("--suite", choices=["stepsize", "batch", "baselines"],
                   help="canned run list; combine with a dataset preset")
    p.add_argument("--jobs", "-j", type=int, default=1)
    p.add_argument("--summary", help="also write the gap summary table here")

    p = sub.add_parser("reference", help="compute P* to high accuracy")
    _add_spec_args(p)

    p = sub.add_parser("verify", help="run the oracle and property checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", dest="inject_fault", choices=["prox"])
    return parser


def _compare_specs(ns) -> List[RunSpec]:
    doc = None
    if ns.config:
        with open(ns.config) as fh:
            doc = json.load(fh)
    base = _spec_from_args(ns)
    if ns.suite:
        specs = suite_specs(ns.suite, base)
    elif doc is not None and "runs" in doc:
        specs = [replace(base, **RunSpec.from_dict({**base.to_dict(), **r}).to_dict()) for r in doc["runs"]]
    else:
        specs = [base]
    out = []
    for s in specs:
        out += expand_sweeps(s, ns.sweep)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if ns.command == "verify":
            return cmd_verify(ns.seed, ns.inject_fault)
        if ns.command == "compare":
            specs = _compare_specs(ns)
            out = specs[0].out if specs else None
            if not out:
                raise ConfigError("no output path given (--out)")
            return cmd_compare(specs, out, jobs=ns.jobs, summary=ns.summary)
        spec = _spec_from_args(ns)
        if ns.command == "run":
            return cmd_run(spec)
        return cmd_reference(spec)
    except (ParseError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MaxIterations as exc:
        print(f"reference solve failed: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
