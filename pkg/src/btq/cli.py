"""Batch front-end: ``btq <command> [--config file.json] [--out dir]``.

Exit codes: 0 all checks passed, 1 usage or configuration error, 2 a check failed.
"""

from __future__ import annotations

import argparse
import ast
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import serial
from . import asymptotics as asy
from . import index as idx
from . import moyal
from .errors import ConfigurationError, LiftError
from .quantize import MAPS, quantization_map
from .sections import make_space
from .sphere import ONE, U, V, W, SpherePoint, SpherePolynomial, poisson_bracket, sup_norm

log = logging.getLogger("btq")

SCHEMA_VERSION = 1
COMMANDS = (
    "gram",
    "toeplitz",
    "commutator-scan",
    "star-defect",
    "phi1-probe",
    "norm-scan",
    "moyal-check",
    "index-check",
    "beta-check",
    "theta",
)
DEFAULT_TOLERANCES = {
    "index": 1e-6,
    "decay_limit": 0.02,
    "phi1_rel": 0.05,
    "jitter": 0.05,
}
DEFAULT_FUNCTIONS = {"f": "u", "g": "v"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    levels: tuple[int, ...] = asy.DEFAULT_LEVELS
    k0: int = 0
    functions: dict = field(default_factory=lambda: dict(DEFAULT_FUNCTIONS))
    K: int = moyal.DEFAULT_K
    output_dir: str = "out"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    map_kind: str = "toeplitz"
    order: int = 0
    idempotents: tuple[str, ...] = ("trivial1", "bott+1")
    points: tuple[tuple[float, float, float], ...] = ((0.0, 0.0, 1.0),)
    seed: int = 0
    trials: int = 100

    def function(self, name: str) -> SpherePolynomial:
        try:
            text = self.functions[name]
        except KeyError:
            raise ConfigurationError(f"functions: missing entry {name!r}") from None
        return parse_function(text)


# -- function expressions ---------------------------------------------------------

_GENERATORS = {"u": U, "v": V, "w": W}


def parse_function(text: str) -> SpherePolynomial:
    """Parse expressions such as ``u*v + w - 1/3`` or ``2*u^2``."""
    try:
        tree = ast.parse(str(text).replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"functions: cannot parse {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Name) and node.id in _GENERATORS:
            return _GENERATORS[node.id]
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return Fraction(node.value) if isinstance(node.value, int) else Fraction(str(node.value))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            val = ev(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.BinOp):
            left, right = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if isinstance(node.op, ast.Div) and isinstance(right, Fraction):
                return left / right
            if isinstance(node.op, ast.Pow) and isinstance(right, Fraction) and right.denominator == 1 and right >= 0:
                return left ** int(right)
        raise ConfigurationError(f"functions: unsupported expression {ast.unparse(node)!r} in {text!r}")

    value = ev(tree)
    if isinstance(value, Fraction):
        return ONE * value
    return value


# -- configuration -------------------------------------------------------------------


def _levels(value) -> tuple[int, ...]:
    if not isinstance(value, list) or not value or not all(isinstance(N, int) and not isinstance(N, bool) for N in value):
        raise ConfigurationError("levels: expected a nonempty list of integers")
    if any(N <= 0 for N in value):
        raise ConfigurationError("levels: levels must be positive")
    if any(b <= a for a, b in zip(value, value[1:])):
        raise ConfigurationError("levels: levels not increasing")
    return tuple(value)


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Validate a JSON configuration; unknown keys are rejected."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config: top level must be a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"unknown key {unknown[0]!r}")
    cmd = data.get("command", command)
    if command is not None and cmd != command:
        raise ConfigurationError(f"command: config says {cmd!r} but {command!r} was requested")
    if cmd not in COMMANDS:
        raise ConfigurationError(f"command: unknown command {cmd!r}")

    cfg = RunConfig(cmd)
    kw = {}
    if "levels" in data:
        kw["levels"] = _levels(data["levels"])
    for key in ("k0", "K", "order", "seed", "trials"):
        if key in data:
            if not isinstance(data[key], int) or isinstance(data[key], bool):
                raise ConfigurationError(f"{key}: expected an integer")
            kw[key] = data[key]
    if kw.get("K", 0) < 0:
        raise ConfigurationError("K: truncation order must be >= 0")
    if kw.get("order", 0) < 0:
        raise ConfigurationError("order: must be >= 0")
    if "functions" in data:
        if not isinstance(data["functions"], dict):
            raise ConfigurationError("functions: expected an object of name -> expression")
        funcs = dict(DEFAULT_FUNCTIONS)
        funcs.update({str(k): str(v) for k, v in data["functions"].items()})
        for name, expr in funcs.items():
            parse_function(expr)
        kw["functions"] = funcs
    if "tolerances" in data:
        tols = dict(DEFAULT_TOLERANCES)
        for k, v in data["tolerances"].items():
            if k not in DEFAULT_TOLERANCES:
                raise ConfigurationError(f"tolerances: unknown tolerance {k!r}")
            if not isinstance(v, (int, float)) or v < 0:
                raise ConfigurationError(f"tolerances: {k} must be a nonnegative number")
            tols[k] = float(v)
        kw["tolerances"] = tols
    if "output_dir" in data:
        kw["output_dir"] = str(data["output_dir"])
    if "map_kind" in data:
        if data["map_kind"] not in MAPS:
            raise ConfigurationError(f"map_kind: unknown map kind {data['map_kind']!r}")
        kw["map_kind"] = data["map_kind"]
    if "idempotents" in data:
        names = data["idempotents"]
        if not isinstance(names, list):
            raise ConfigurationError("idempotents: expected a list of names")
        for name in names:
            try:
                idx.named_idempotent(name)
            except ValueError as exc:
                raise ConfigurationError(f"idempotents: {exc}") from None
        kw["idempotents"] = tuple(names)
    if "points" in data:
        try:
            pts = tuple(tuple(float(c) for c in p) for p in data["points"])
            for p in pts:
                SpherePoint(*p)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"points: {exc}") from None
        kw["points"] = pts
    return replace(cfg, **kw)


# -- emission --------------------------------------------------------------------------


class Emitter:
    """Single writer; outputs are byte-stable for a fixed configuration."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list[Path] = []

    def json(self, name: str, payload: dict) -> Path:
        payload = {"schema_version": SCHEMA_VERSION, **payload}
        return self._write(name, serial.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")

    def text(self, name: str, content: str) -> Path:
        return self._write(name, content)

    def _write(self, name, content):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        path.write_text(content)
        self.written.append(path)
        return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return int(obj) if obj.denominator == 1 else float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


# -- commands ----------------------------------------------------------------------------


def _cmd_theta(cfg, out):
    theta = idx.theta_class(cfg.k0)
    out.json("theta.json", {
        "command": "theta",
        "k0": cfg.k0,
        "theta_deg0": theta.deg0.to_dict(),
        "theta_deg2": theta.deg2.to_dict(),
    })
    return True


def _cmd_gram(cfg, out):
    rows = ["N,k0,M,j,gram"]
    spaces = []
    for N in cfg.levels:
        space = make_space(N, cfg.k0)
        spaces.append(json.loads(space.to_json()))
        rows += [f"{N},{cfg.k0},{space.M},{j},{g:.17g}" for j, g in enumerate(space.gram_diag)]
    out.text("gram.csv", "\n".join(rows) + "\n")
    out.json("gram.json", {"command": "gram", "spaces": spaces})
    return True


def _cmd_toeplitz(cfg, out):
    f = cfg.function("f")
    qmap = quantization_map(cfg.map_kind)
    ok = True
    summary = []
    for N in cfg.levels:
        op = qmap(make_space(N, cfg.k0), f)
        out.text(f"{cfg.map_kind}_N{N}.csv", op.to_csv())
        out.text(f"{cfg.map_kind}_N{N}.json", op.to_json() + "\n")
        herm = op.is_hermitian(1e-12)
        if f.is_real():
            ok &= herm
        summary.append({"N": N, "hermitian": herm, "trace": complex(np.trace(op.matrix))})
    out.json("toeplitz_report.json", {"command": "toeplitz", "function": cfg.functions["f"],
                                      "map_kind": cfg.map_kind, "levels": summary, "pass": ok})
    return ok


def _cmd_commutator_scan(cfg, out):
    f, g = cfg.function("f"), cfg.function("g")
    tol = cfg.tolerances["decay_limit"]
    scans = {s: asy.commutator_scan(f, g, cfg.levels, cfg.map_kind, cfg.k0, s) for s in (+1, -1)}
    result = {}
    for s, scan in scans.items():
        fit = asy.fit_inverse_powers(scan, min(2, len(scan.levels) - 2))
        decays = scan.strictly_decreasing() and abs(fit.coefficients[0]) <= tol
        result[s] = decays
        tag = "plus" if s > 0 else "minus"
        out.text(f"commutator_{tag}.csv", scan.to_csv())
        out.text(f"commutator_{tag}_fit.json", fit.to_json() + "\n")
    ok = result[asy.COMMUTATOR_SIGN] and not result[-asy.COMMUTATOR_SIGN]
    out.json("commutator_report.json", {
        "command": "commutator-scan",
        "inputs": {"f": cfg.functions["f"], "g": cfg.functions["g"], "levels": list(cfg.levels)},
        "decays": {"+i": result[1], "-i": result[-1]},
        "configured_sign": asy.COMMUTATOR_SIGN,
        "pass": ok,
    })
    return ok


def _cmd_star_defect(cfg, out):
    f, g = cfg.function("f"), cfg.function("g")
    phis = []
    for j in range(cfg.order + 1):
        name = f"phi{j}"
        if name in cfg.functions:
            phis.append(cfg.function(name))
        elif j == 0:
            phis.append(f * g)
        else:
            raise ConfigurationError(f"functions: order {cfg.order} needs {name!r}")
    map_kind = cfg.map_kind
    scan = asy.star_defect_scan(f, g, phis, cfg.order, cfg.levels, map_kind, cfg.k0)
    vals = np.real(scan.array())
    jitter = cfg.tolerances["jitter"]
    monotone = bool(np.all(vals[1:] <= vals[:-1] * (1 + jitter) + 1e-14))
    out.text("star_defect.csv", scan.to_csv())
    C = float(np.max(vals * np.asarray(scan.levels)))
    out.json("star_defect_report.json", {
        "command": "star-defect",
        "inputs": {"f": cfg.functions["f"], "g": cfg.functions["g"], "order": cfg.order,
                   "levels": list(cfg.levels), "map_kind": map_kind},
        "measured": list(vals),
        "C_over_N_bound": C,
        "pass": monotone,
    })
    return monotone


def _cmd_phi1_probe(cfg, out):
    f, g = cfg.function("f"), cfg.function("g")
    bracket = poisson_bracket(f, g)
    rel = cfg.tolerances["phi1_rel"]
    rows, ok = [], True
    for p in cfg.points:
        x = SpherePoint(*p)
        fit = asy.phi1_antisym_probe(f, g, x, cfg.levels, cfg.k0, cfg.map_kind)
        expected = -1j * bracket(x)
        got = complex(fit.coefficients[0])
        err = abs(got - expected)
        passed = err <= rel * max(abs(expected), 1e-12)
        ok &= passed
        rows.append({"point": list(p), "measured": got, "predicted": expected, "residual": err, "pass": passed})
    out.json("phi1_report.json", {"command": "phi1-probe", "inputs": {"f": cfg.functions["f"], "g": cfg.functions["g"],
              "levels": list(cfg.levels)}, "points": rows, "pass": ok})
    return ok


def _cmd_norm_scan(cfg, out):
    f = cfg.function("f")
    scan = asy.norm_scan(f, cfg.levels, cfg.map_kind, cfg.k0)
    target = sup_norm(f, 20_000)
    vals = np.real(scan.array())
    gaps = np.abs(vals - target)
    ok = bool(np.all(np.diff(gaps) <= 1e-12))
    out.text("norm_scan.csv", scan.to_csv())
    out.json("norm_report.json", {"command": "norm-scan", "inputs": {"f": cfg.functions["f"], "levels": list(cfg.levels)},
              "measured": list(vals), "sup_norm": target, "pass": ok})
    return ok


def _cmd_moyal_check(cfg, out):
    rng = np.random.default_rng(cfg.seed)
    K = cfg.K
    worst = 0.0
    failures = []
    for t in range(cfg.trials):
        n = 1 + t % 2
        f, g, h = (moyal.random_series(rng, n, K=K) for _ in range(3))
        a = moyal.associator(f, g, h, K)
        worst = max(worst, a.max_abs_coefficient())
        one = moyal.FormalSeries.constant(n, 1, K)
        if moyal.moyal_product(f, one, K) != f.truncate(K) or moyal.moyal_product(one, f, K) != f.truncate(K):
            failures.append(f"unit law, trial {t}")
        lhs = moyal.star_conjugate(moyal.moyal_product(f, g, K))
        rhs = moyal.moyal_product(moyal.star_conjugate(g), moyal.star_conjugate(f), K)
        if lhs != rhs:
            failures.append(f"conjugation law, trial {t}")
    ok = worst == 0.0 and not failures
    out.json("moyal_report.json", {
        "command": "moyal-check",
        "inputs": {"seed": cfg.seed, "trials": cfg.trials, "K": K},
        "associator": f"max |coeff| = {worst:g}",
        "failures": failures,
        "pass": ok,
    })
    return ok


def _cmd_index_check(cfg, out):
    reports = []
    ok = True
    rows = ["N,k0,idempotent,measured,predicted"]
    for name in cfg.idempotents:
        e = idx.named_idempotent(name)
        for N in cfg.levels:
            try:
                rep = idx.index_check(N, cfg.k0, e, cfg.map_kind, cfg.tolerances["index"])
            except LiftError as exc:
                ok = False
                reports.append({"inputs": {"N": N, "k0": cfg.k0, "idempotent": name}, "error": str(exc), "pass": False})
                continue
            ok &= rep.passed
            reports.append(rep.to_dict())
            rows.append(f"{N},{cfg.k0},{name},{rep.measured_trace:.17g},{rep.predicted}")
    out.text("index_traces.csv", "\n".join(rows) + "\n")
    out.json("index_report.json", {"command": "index-check", "reports": reports, "pass": ok})
    return ok


def _cmd_beta_check(cfg, out):
    es = [idx.named_idempotent(n) for n in cfg.idempotents]
    try:
        rep = idx.beta_check(cfg.levels, cfg.k0, es, cfg.map_kind, cfg.tolerances["index"])
    except LiftError as exc:
        out.json("beta_report.json", {"command": "beta-check", "error": str(exc), "pass": False})
        return False
    rows = ["N,idempotent,trace"]
    for name, traces in rep.traces.items():
        rows += [f"{N},{name},{t:.17g}" for N, t in zip(rep.levels, traces)]
    out.text("beta_traces.csv", "\n".join(rows) + "\n")
    out.json("beta_report.json", {"command": "beta-check", **rep.to_dict()})
    return rep.passed


HANDLERS = {
    "theta": _cmd_theta,
    "gram": _cmd_gram,
    "toeplitz": _cmd_toeplitz,
    "commutator-scan": _cmd_commutator_scan,
    "star-defect": _cmd_star_defect,
    "phi1-probe": _cmd_phi1_probe,
    "norm-scan": _cmd_norm_scan,
    "moyal-check": _cmd_moyal_check,
    "index-check": _cmd_index_check,
    "beta-check": _cmd_beta_check,
}


def run(cfg: RunConfig, out_dir: str | Path | None = None) -> int:
    out = Emitter(Path(out_dir if out_dir is not None else cfg.output_dir))
    try:
        passed = HANDLERS[cfg.command](cfg, out)
    except ConfigurationError as exc:
        print(f"btq: configuration error: {exc}", file=sys.stderr)
        return 1
    status = "PASS" if passed else "FAIL"
    print(f"btq {cfg.command}: {status} ({len(out.written)} files in {out.out_dir})")
    return 0 if passed else 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="btq", description="Berezin-Toeplitz vs. formal deformation quantization checks on CP^1")
    parser.add_argument("command", help="one of: " + ", ".join(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        text = args.config.read_text() if args.config else "{}"
        cfg = parse_config(text, args.command)
    except ConfigurationError as exc:
        print(f"btq: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"btq: cannot read config: {exc}", file=sys.stderr)
        return 1
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
