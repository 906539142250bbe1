"""Command-line entry point: ``synth``, ``estimate``, ``analyze``, ``infer`` and ``oracle``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .config import RunConfig, apply_overrides, load_config
from .errors import (CapacityError, InfeasibleModelError, OracleMismatchError, SchemaError, TableSceneError,
                     UsageError)
from .estimation import estimate_poses
from .evidence import TABLE, EvidenceSet
from .geometry import extract_evidence
from .harness import (FALSE_VARIANTS, KINDS, ScenarioSpec, generate_scenario, load_bundle,
                      oracle_prior, oracle_query_marginals, product_form_likelihood)
from .knowledge import classify_queries, default_knowledge_base, ground, infer, load_knowledge_base
from .knowledge.inference import query_marginals_exact, unnormalized_prior
from .pipeline import analyze_scene
from .scene import SceneModel
from .scenegraph import emit_dot, emit_json
from .sensing import CameraModel, Measurement, object_log_likelihood

ORACLE_TOL = 1e-12
LIKELIHOOD_REL_TOL = 1e-9


# ---------------------------------------------------------------------------
# file helpers
# ---------------------------------------------------------------------------

def write_outputs(out_dir, files: dict[str, str]) -> list[Path]:
    """Write every file to a temporary name first, then rename them all.

    Nothing is renamed unless every temporary file was written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
            staged.append((tmp, out / name))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, dest in staged:
        os.replace(tmp, dest)
    return [dest for _, dest in staged]


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def _read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None


def _kb(path):
    if path is None or path == "builtin":
        return default_knowledge_base()
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    return load_knowledge_base(path)


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {}
    if args.seed is not None:
        over["chain.seed"] = args.seed
    if getattr(args, "iterations", None) is not None:
        over["chain.iterations"] = args.iterations
    if getattr(args, "mode", None) is not None:
        over["inference.mode"] = args.mode
    return apply_overrides(cfg, over)


def _load_inputs(args):
    if args.scenario:
        return load_bundle(_read_json(args.scenario))
    if not args.scene:
        raise UsageError("give --scenario, or --scene with --measurements and --cameras")
    scene = SceneModel.from_dict(_read_json(args.scene))
    meas, cams = {}, {}
    if args.measurements:
        for d in _read_json(args.measurements):
            m = Measurement.from_dict(d)
            meas[m.object_id] = m
    if args.cameras:
        try:
            cams = {str(d["cam_id"]): CameraModel.from_dict(d) for d in _read_json(args.cameras)}
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed cameras file: {exc}") from None
    return scene, meas, cams, []


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _kind(text: str) -> str:
    for k in KINDS:
        if text.lower().replace("-", "").replace("_", "") == k.lower():
            return k
    raise UsageError(f"unknown scenario kind {text!r}; choose from {', '.join(KINDS)}")


def cmd_synth(args, cfg: RunConfig) -> int:
    if args.objects < 1:
        raise UsageError("--objects must be at least 1")
    spec = ScenarioSpec(kind=_kind(args.kind), objects=args.objects, keypoints=args.keypoints,
                        noise_px=args.noise, variant=args.variant, outlier_fraction=args.outliers,
                        seed=cfg.seed)
    sc = generate_scenario(spec, cfg.geometry)
    write_outputs(args.out, {"scenario.json": sc.to_json()})
    g = sc.truth.graph
    print(f"{spec.kind}: {len(sc.initial.objects)} reported object(s), seed {cfg.seed}")
    for a, b in g.support:
        print(f"  support {a} -> {b}")
    for a, b in g.contact:
        print(f"  contact {a} -- {b}")
    for oid in sc.truth.false_estimates:
        print(f"  false estimate O{oid}")
    for oid, sup in sc.truth.omitted.items():
        print(f"  O{oid} has hidden supporter O{sup}")
    return 0


def cmd_estimate(args, cfg: RunConfig) -> int:
    scene, _, _, corrs = load_bundle(_read_json(args.scenario))
    if not corrs:
        raise SchemaError("scenario has no 3D correspondences")
    hyps = estimate_poses(corrs, seed=cfg.seed)
    for oid, h in sorted(hyps.items()):
        if oid in scene.ids:
            scene = scene.with_pose(oid, h.pose)
    report = {str(oid): {"pose": h.pose.to_dict(), "inliers": h.inlier_count} for oid, h in sorted(hyps.items())}
    write_outputs(args.out, {"estimated_scene.json": _dump(scene.to_dict()), "estimates.json": _dump(report)})
    for oid, h in sorted(hyps.items()):
        print(f"O{oid}: {h.inlier_count} inliers")
    return 0


def cmd_analyze(args, cfg: RunConfig) -> int:
    scene, meas, cams, _ = _load_inputs(args)
    kb = _kb(args.kb)
    a = analyze_scene(scene, meas, kb, cams, cfg)
    files = {
        "graph.json": emit_json(a.graph),
        "graph.dot": emit_dot(a.graph),
        "marginals.json": a.marginals.to_json(),
        "trace.jsonl": a.chain.trace.to_jsonl() if a.chain else "",
    }
    write_outputs(args.out, files)
    for name, d in a.decisions.items():
        if name.startswith(("hidden(", "false(")) and d.value == "true":
            print(f"{name} = {a.marginals[name]:.3f}")
    return 0


def read_evidence(path, extra_constants=()) -> EvidenceSet:
    ev = EvidenceSet.from_text(_read_text(path), constants=[TABLE, *extra_constants], source=str(path))
    # the reserved table constant carries its own attributes unless stated otherwise
    for pred in ("table", "stable"):
        if ev.get(pred, (TABLE,)) is None:
            ev.set(pred, (TABLE,), True)
    return ev


def cmd_infer(args, cfg: RunConfig) -> int:
    kb = _kb(args.kb)
    ev = read_evidence(args.evidence, args.constants or ())
    gn = ground(kb, ev.constants, ev)
    qr = infer(gn, cfg.inference_mode, cfg.cap, cfg.sweeps, cfg.burn_in, cfg.hard_cap_weight, cfg.seed)
    write_outputs(args.out, {"marginals.json": qr.to_json()})
    dec = classify_queries(qr, cfg.lo, cfg.hi)
    print(f"{len(qr.marginals)} query atoms by {qr.method} inference")
    for name, d in dec.items():
        if d.value == "true" and name.startswith(("hidden(", "false(")):
            print(f"{name} = {qr[name]:.3f}")
    return 0


def cmd_oracle(args, cfg: RunConfig) -> int:
    scene, meas, cams, _ = load_bundle(_read_json(args.scenario))
    kb = _kb(args.kb)
    ref = _kb(args.reference_kb)
    ev = extract_evidence(scene, cfg.geometry)
    failures = []

    gn = ground(kb, ev.constants, ev)
    if gn.n_atoms > cfg.cap:
        raise CapacityError(f"{gn.n_atoms} ground query atoms exceed the exact cap of {cfg.cap}")
    try:
        main = query_marginals_exact(gn, cfg.cap)
        oracle = oracle_query_marginals(ref, ev.constants, ev, cfg.cap)
    except InfeasibleModelError as exc:
        raise InfeasibleModelError(f"oracle check needs a feasible scene: {exc}", exc.violated) from None
    worst = max(main.marginals, key=lambda k: abs(main[k] - oracle[k]))
    diff = abs(main[worst] - oracle[worst])
    ok = diff <= ORACLE_TOL
    print(f"{'PASS' if ok else 'FAIL'} marginals: max |diff| {diff:.3g} at {worst}")
    if not ok:
        failures.append(f"marginal of {worst}: {main[worst]!r} vs oracle {oracle[worst]!r}")

    p_main = unnormalized_prior(gn)
    p_oracle = oracle_prior(ref, ev.constants, ev, cfg.cap)
    ok = abs(p_main - p_oracle) <= 1e-9 * max(1.0, abs(p_oracle))
    print(f"{'PASS' if ok else 'FAIL'} log prior: {p_main:.12g} vs {p_oracle:.12g}")
    if not ok:
        failures.append("log prior")

    for oid in sorted(meas):
        ll = object_log_likelihood(meas[oid], scene.pose(oid), cams, cfg.noise)
        lp = product_form_likelihood(meas[oid], scene.pose(oid), cams, cfg.noise)
        ok = math.isclose(ll, lp, rel_tol=LIKELIHOOD_REL_TOL, abs_tol=1e-9)
        print(f"{'PASS' if ok else 'FAIL'} likelihood O{oid}: log form {ll:.12g}, product form {lp:.12g}")
        if not ok:
            failures.append(f"likelihood of O{oid}")
    if failures:
        raise OracleMismatchError("mismatch: " + "; ".join(failures))
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value config file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    p = _Parser(prog="tablescene", description="Table-top scene analysis with a Markov-logic prior.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=".")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic scenario")
    s.add_argument("--kind", default="FlatLayout", help=f"one of {', '.join(KINDS)} (case-insensitive)")
    s.add_argument("--objects", type=int, default=3)
    s.add_argument("--variant", choices=FALSE_VARIANTS, default="intersect")
    s.add_argument("--keypoints", type=int, default=30)
    s.add_argument("--noise", type=float, default=1.0, help="pixel noise sigma")
    s.add_argument("--outliers", type=float, default=0.0, help="fraction of gross 3D outliers")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("estimate", parents=[common], help="pose hypotheses from 3D correspondences")
    s.add_argument("--scenario", required=True)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("analyze", parents=[common], help="refine, infer and build the scene graph")
    s.add_argument("--scenario")
    s.add_argument("--scene")
    s.add_argument("--measurements")
    s.add_argument("--cameras")
    s.add_argument("--kb", help="knowledge base file (default: built-in)")
    s.add_argument("--iterations", type=int)
    s.add_argument("--mode", choices=("auto", "exact", "gibbs"))
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("infer", parents=[common], help="query marginals from an evidence file")
    s.add_argument("--evidence", required=True)
    s.add_argument("--kb")
    s.add_argument("--mode", choices=("auto", "exact", "gibbs"))
    s.add_argument("--constants", nargs="*", help="extra constants without evidence atoms")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("oracle", parents=[common], help="dual-implementation checks on a scenario")
    s.add_argument("--scenario", required=True)
    s.add_argument("--kb", help="knowledge base under test (default: built-in)")
    s.add_argument("--reference-kb", default="builtin", help="knowledge base for the oracle side")
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config(args)
        return args.func(args, cfg)
    except TableSceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, InfeasibleModelError) and exc.violated:
            for v in exc.violated:
                print(f"  violated: {v}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return UsageError.exit_code


if __name__ == "__main__":
    sys.exit(main())
