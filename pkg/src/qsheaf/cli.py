"""Command-line scenario runner.

Exit codes: 0 success, 1 a verification failed, 2 the scenario could not be
parsed, 3 the scenario is invalid, 4 a size guard was exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import fixtures, linops, spectral, translate, truth
from .contexts import DEFAULT_MAX_CONTEXTS, ContextPoset, build_poset
from .errors import QSheafError, SizeLimit
from .presheaves import DEFAULT_GUARD, TruthValue, count_global_elements

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INVALID, EXIT_SIZE = 0, 1, 2, 3, 4
KS_FIXTURES = ("peres33", "cabello18")


class ScenarioError(ValueError):
    """Scenario content does not validate."""


# Scenario parsing ------------------------------------------------------------

def parse_matrix(data, dim: int | None = None) -> np.ndarray:
    """Row-major matrix of ``[re, im]`` pairs."""
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed matrix: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ScenarioError("matrix must be an n x n array of [re, im] pairs")
    if dim is not None and arr.shape[0] != dim:
        raise ScenarioError(f"matrix has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError("matrix entries must be finite")
    return arr[..., 0] + 1j * arr[..., 1]


def parse_vector(data, dim: int) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed vector: {exc}") from None
    if arr.shape != (dim, 2):
        raise ScenarioError("vector must be a list of [re, im] pairs of the scenario dimension")
    return arr[:, 0] + 1j * arr[:, 1]


def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


class Scenario:
    """Validated scenario: poset inputs, named states and projections, commands."""

    def __init__(self, doc: dict, options: dict):
        if not isinstance(doc, dict):
            raise ScenarioError("scenario must be a JSON object")
        try:
            self.dim = int(doc["dimension"])
        except (KeyError, TypeError, ValueError):
            raise ScenarioError("scenario needs an integer 'dimension'") from None
        if not 1 <= self.dim <= linops.MAX_DIM:
            raise ScenarioError(f"dimension must lie in 1..{linops.MAX_DIM}")
        self.name = str(doc.get("name", "scenario"))
        self.observables = {k: parse_matrix(v, self.dim)
                            for k, v in sorted(doc.get("observables", {}).items())}
        self.seed_contexts = {k: [parse_matrix(m, self.dim) for m in v]
                              for k, v in doc.get("seed_contexts", {}).items()}
        self.states: dict[str, np.ndarray] = {}
        self.vectors: dict[str, np.ndarray] = {}
        for k, v in doc.get("states", {}).items():
            if not isinstance(v, dict) or len(v) != 1:
                raise ScenarioError(f"state {k!r} must be {{'vector': ...}} or {{'density': ...}}")
            if "vector" in v:
                vec = linops.as_unit_vector(parse_vector(v["vector"], self.dim), self.dim)
                self.vectors[k] = vec
                self.states[k] = linops.ket_projector(vec)
            elif "density" in v:
                self.states[k] = linops.as_density(parse_matrix(v["density"], self.dim), self.dim)
            else:
                raise ScenarioError(f"state {k!r} must give 'vector' or 'density'")
        self.projections = {k: linops.as_projection(parse_matrix(v, self.dim), self.dim, 1e-7)
                            for k, v in doc.get("projections", {}).items()}
        self.r_values = [float(r) for r in doc.get("r_values", [])]
        if any(not 0.0 <= r <= 1.0 for r in self.r_values):
            raise ScenarioError("r values must lie in [0, 1]")
        self.commands = doc.get("commands", [])
        if not isinstance(self.commands, list):
            raise ScenarioError("'commands' must be a list")
        opts = dict(doc.get("options", {}))
        opts.update({k: v for k, v in options.items() if v is not None})
        self.eps = float(opts.get("epsilon", linops.EPS))
        self.max_contexts = int(opts.get("max_contexts", DEFAULT_MAX_CONTEXTS))
        self.guard = int(opts.get("guard", DEFAULT_GUARD))
        self.seed = int(opts.get("seed", linops.DEFAULT_SEED))
        self.out = opts.get("out")
        self._poset: ContextPoset | None = None

    @property
    def poset(self) -> ContextPoset:
        if self._poset is None:
            self._poset = build_poset(self.observables, self.seed_contexts, dim=self.dim,
                                      max_contexts=self.max_contexts, eps=self.eps,
                                      seed=self.seed)
        return self._poset

    def projection(self, name: str) -> np.ndarray:
        if name not in self.projections:
            raise ScenarioError(f"unknown projection {name!r}")
        return self.projections[name]

    def state(self, name: str) -> np.ndarray:
        if name not in self.states:
            raise ScenarioError(f"unknown state {name!r}")
        return self.states[name]


def load_scenario(path: str | Path, options: dict | None = None) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return Scenario(doc, options or {})


def fixture_a_scenario() -> dict:
    """FIXTURE-A as a scenario document."""
    return {
        "name": "fixture-a",
        "dimension": 2,
        "observables": {"a": encode_matrix(fixtures.SIGMA_Z)},
        "seed_contexts": {"D": [encode_matrix(fixtures.SIGMA_Z)],
                          "Vx": [encode_matrix(fixtures.SIGMA_X)]},
        "states": {"zero": {"vector": [[1, 0], [0, 0]]},
                   "plus": {"vector": [[0.7071067811865476, 0], [0.7071067811865476, 0]]}},
        "projections": {"P0": encode_matrix(np.diag([1, 0])),
                        "P1": encode_matrix(np.diag([0, 1]))},
        "r_values": [0.0, 0.6, 1.0],
        "commands": [{"cmd": "poset"}, {"cmd": "verify", "theorem": 1}],
    }


# Reports ------------------------------------------------------------------------

def sieve_family(poset: ContextPoset, tv: TruthValue) -> dict[str, list[str]]:
    return {poset.label(v): [poset.label(w) for w in sorted(s)] for v, s in enumerate(tv.sieves)}


def poset_summary(poset: ContextPoset) -> dict:
    return {
        "dimension": poset.dim,
        "contexts": [{"id": c.id, "label": c.label, "atoms": c.size,
                      "flat": poset.label(poset.flat(c.id)),
                      "below": [poset.label(w) for w in poset.below(c.id)]}
                     for c in poset.contexts],
        "covers": [[poset.label(a), poset.label(b)] for a, b in poset.covers()],
        "fixed_points": [poset.label(v) for v in poset.fixed_points()],
    }


def _atoms(poset: ContextPoset, v: int, mask: int) -> list[int]:
    return [i for i in range(poset.contexts[v].size) if mask >> i & 1]


def rays_poset(rays) -> ContextPoset:
    """Contexts generated by the maximal orthogonal sets of the given rays."""
    rays = [np.asarray(r, dtype=np.complex128) for r in rays]
    if not rays or len({r.shape for r in rays}) != 1 or rays[0].ndim != 1:
        raise ScenarioError("rays must be nonempty vectors of one dimension")
    bases = fixtures.orthogonal_cliques(rays)
    seeds = {f"B{k}": [linops.ket_projector(linops.as_unit_vector(rays[i])) for i in b]
             for k, b in enumerate(bases)}
    return build_poset({}, seeds, dim=len(rays[0]), max_contexts=fixtures.KS_MAX_CONTEXTS)


def ks_check(fixture, guard: int = DEFAULT_GUARD) -> dict:
    """Count global sections of the spectral presheaf.

    ``fixture`` is ``"peres33"``, ``"cabello18"``, a :class:`ContextPoset`, or
    a sequence of rays.
    """
    if isinstance(fixture, str):
        if fixture not in KS_FIXTURES:
            raise ScenarioError(f"unknown KS fixture {fixture!r}")
        name, poset = fixture, getattr(fixtures, fixture)()
    elif isinstance(fixture, ContextPoset):
        name, poset = "scenario", fixture
    else:
        name, poset = "rays", rays_poset(fixture)
    sigma = spectral.build_sigma(poset)
    return {"fixture": name, "dimension": poset.dim, "contexts": len(poset),
            "maximal_contexts": len(poset.maximal()),
            "global_sections": count_global_elements(sigma, guard)}


def export_dot(poset: ContextPoset, color: TruthValue | None = None) -> str:
    """Hasse diagram; dashed edges show the flat map, filled nodes a truth value's down-set."""
    filled = color.downset if color is not None else frozenset()
    lines = ["digraph contexts {", "  rankdir=BT;", "  node [shape=box];"]
    for c in poset.contexts:
        style = ', style=filled, fillcolor="lightblue"' if c.id in filled else ""
        lines.append(f'  "{c.label}" [label="{c.label} ({c.size})"{style}];')
    for a, b in poset.covers():
        lines.append(f'  "{poset.label(a)}" -> "{poset.label(b)}";')
    for v in poset.ids:
        if poset.flat(v) != v:
            lines.append(f'  "{poset.label(v)}" -> "{poset.label(poset.flat(v))}" '
                         f'[style=dashed, constraint=false];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _flavors(cmd: dict) -> list[str]:
    fl = cmd.get("flavor", "both")
    return list(spectral.FLAVORS) if fl == "both" else [fl]


def _r_list(sc: Scenario, cmd: dict) -> list[float]:
    rs = cmd.get("r", sc.r_values or [1.0])
    rs = [float(r) for r in (rs if isinstance(rs, list) else [rs])]
    if any(not 0.0 <= r <= 1.0 for r in rs):
        raise ScenarioError("r values must lie in [0, 1]")
    return rs


def run_command(sc: Scenario, cmd: dict) -> tuple[dict, bool]:
    """Execute one command; returns ``(result, ok)``."""
    if not isinstance(cmd, dict) or "cmd" not in cmd:
        raise ScenarioError("every command needs a 'cmd' field")
    kind = cmd["cmd"]
    if kind == "poset":
        return {"cmd": "poset", **poset_summary(sc.poset)}, True
    if kind == "ks":
        if "rays" in cmd:
            target = [parse_vector(r, len(cmd["rays"][0])) for r in cmd["rays"]]
        else:
            target = cmd.get("fixture", "scenario")
            target = sc.poset if target == "scenario" else target
        return {"cmd": "ks", **ks_check(target, sc.guard)}, True
    p = sc.poset
    if kind == "daseinize":
        proj = sc.projection(cmd["projection"])
        rows = {}
        for v in p.ids:
            rows[p.label(v)] = {"delta": _atoms(p, v, spectral.daseinize_mask(p, proj, v)),
                                "delta_j": _atoms(p, p.flat(v), spectral.daseinize_j_mask(p, proj, v))}
        return {"cmd": "daseinize", "projection": cmd["projection"], "stages": rows}, True
    if kind == "assign":
        proj = sc.projection(cmd["projection"])
        rho = sc.state(cmd["state"])
        out = []
        for r in _r_list(sc, cmd):
            item: dict[str, Any] = {"r": r}
            for fl in _flavors(cmd):
                t = truth.truth_rho_r(p, rho, r, fl, sc.eps)
                item[fl] = sieve_family(p, truth.nu(spectral.proposition_of(p, proj, fl), t))
            out.append(item)
        return {"cmd": "assign", "projection": cmd["projection"], "state": cmd["state"],
                "values": out}, True
    if kind == "translate":
        proj = sc.projection(cmd["projection"])
        rho = sc.state(cmd["state"])
        out, ok = [], True
        pp = spectral.proposition_of(p, proj, spectral.PRESHEAF)
        pj = spectral.proposition_of(p, proj, spectral.SHEAF)
        for r in _r_list(sc, cmd):
            t = truth.truth_rho_r(p, rho, r, spectral.PRESHEAF, sc.eps)
            tj = truth.truth_rho_r(p, rho, r, spectral.SHEAF, sc.eps)
            checks = {"proposition": translate.is_translation_prop(p, pp, pj),
                      "truth_object": translate.is_translation_truth(t, tj, sc.guard),
                      "truth_value": translate.verify_nu_relation(p, pp, t, pj, tj)}
            ok &= all(checks.values())
            out.append({"r": r, "checks": checks})
        return {"cmd": "translate", "projection": cmd["projection"], "state": cmd["state"],
                "results": out, "passed": ok}, ok
    if kind == "verify":
        which = cmd.get("theorem", "all")
        nums = [1, 2, 3] if which == "all" else [int(which)]
        reports = []
        for n in nums:
            rep = translate.verify_theorem(n, p, sc.guard, sc.seed)
            print(f"theorem {n}: {'pass' if rep['passed'] else 'FAIL'} "
                  f"({rep.pop('_seconds'):.3f} s)", file=sys.stderr)
            reports.append(rep)
        ok = all(r["passed"] for r in reports)
        return {"cmd": "verify", "reports": reports, "passed": ok}, ok
    if kind == "dot":
        color = None
        if "projection" in cmd:
            flavor = cmd.get("flavor", spectral.SHEAF)
            t = truth.truth_rho_r(p, sc.state(cmd["state"]), float(cmd.get("r", 1.0)), flavor, sc.eps)
            color = truth.nu(spectral.proposition_of(p, sc.projection(cmd["projection"]), flavor), t)
        text = export_dot(p, color)
        fname = cmd.get("file", "poset.dot")
        if sc.out:
            Path(sc.out).mkdir(parents=True, exist_ok=True)
            Path(sc.out, fname).write_text(text, encoding="utf-8")
        return {"cmd": "dot", "file": fname, "nodes": len(p), "dot": text}, True
    raise ScenarioError(f"unknown command {kind!r}")


def run(sc: Scenario) -> tuple[dict, bool]:
    results, ok = [], True
    for cmd in sc.commands:
        start = time.perf_counter()
        res, good = run_command(sc, cmd)
        print(f"{res['cmd']}: {'ok' if good else 'FAILED'} ({time.perf_counter() - start:.3f} s)",
              file=sys.stderr)
        results.append(res)
        ok &= good
    return {"scenario": sc.name, "seed": sc.seed, "results": results, "passed": ok}, ok


def dump_report(report: dict, out: str | None, name: str = "report.json") -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        Path(out, name).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# Entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--epsilon", type=float, help="numerical tolerance")
    common.add_argument("--max-contexts", type=int, dest="max_contexts",
                        help="abort when the poset grows past this many contexts")
    common.add_argument("--guard", type=int, help="enumeration size guard")
    common.add_argument("--out", help="directory for report.json and DOT files")
    common.add_argument("--seed", type=int, help="seed for canonicalization and sampling")

    parser = argparse.ArgumentParser(prog="qsheaf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="execute a JSON scenario")
    p_run.add_argument("file")
    p_ver = sub.add_parser("verify", parents=[common],
                           help="verify the coarse-graining theorems on a scenario's poset")
    p_ver.add_argument("theorem", choices=["1", "2", "3", "all"])
    p_ver.add_argument("file", nargs="?", help="scenario (default: the qubit fixture)")
    p_ks = sub.add_parser("ks", parents=[common], help="Kochen-Specker section count")
    p_ks.add_argument("fixture", choices=KS_FIXTURES)
    p_dot = sub.add_parser("dot", parents=[common], help="print the context poset as DOT")
    p_dot.add_argument("file", nargs="?", help="scenario (default: the qubit fixture)")
    return parser


def _scenario(args) -> Scenario:
    opts = {"epsilon": args.epsilon, "max_contexts": args.max_contexts,
            "guard": args.guard, "seed": args.seed, "out": args.out}
    if getattr(args, "file", None):
        return load_scenario(args.file, opts)
    return Scenario(fixture_a_scenario(), opts)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "ks":
            guard = args.guard or DEFAULT_GUARD
            start = time.perf_counter()
            rep = ks_check(args.fixture, guard)
            print(f"ks {args.fixture}: {rep['global_sections']} global sections "
                  f"({time.perf_counter() - start:.3f} s)", file=sys.stderr)
            dump_report(rep, args.out)
            return EXIT_OK
        sc = _scenario(args)
        if args.command == "run":
            report, ok = run(sc)
        elif args.command == "verify":
            sc.commands = [{"cmd": "verify", "theorem": args.theorem}]
            report, ok = run(sc)
        else:
            sys.stdout.write(export_dot(sc.poset))
            if sc.out:
                Path(sc.out).mkdir(parents=True, exist_ok=True)
                Path(sc.out, "poset.dot").write_text(export_dot(sc.poset), encoding="utf-8")
            return EXIT_OK
        dump_report(report, sc.out)
        return EXIT_OK if ok else EXIT_FAIL
    except json.JSONDecodeError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SizeLimit as exc:
        print(f"size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (ScenarioError, QSheafError, KeyError, TypeError, ValueError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
