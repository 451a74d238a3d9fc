"""Command-line entry point: ``sightline <command> ...``.

Exit codes: 0 success, 1 domain error (JSON on stderr), 2 usage error.

Configuration is layered: built-in defaults, then ``--config FILE`` (YAML),
then ``SIGHTLINE_<FIELD>`` environment variables, then ``--<field>`` flags.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .core import Config, DetectionSet, SightlineError, load_config


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration")
    g.add_argument("--config", metavar="FILE", help="YAML config file")
    defaults = Config()
    for f in dataclasses.fields(Config):
        g.add_argument(_flag(f.name), dest=f"cfg_{f.name}", metavar=str(f.type).upper().replace("OPTIONAL[STR]", "STR"),
                       help=f"default: {getattr(defaults, f.name)!r}")
    return p


def _build_config(args) -> Config:
    overrides = {}
    for f in dataclasses.fields(Config):
        env = os.environ.get(f"SIGHTLINE_{f.name.upper()}")
        if env is not None:
            overrides[f.name] = env
    for f in dataclasses.fields(Config):
        value = getattr(args, f"cfg_{f.name}", None)
        if value is not None:
            overrides[f.name] = value
    return load_config(args.config, overrides)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_enroll(args, cfg: Config) -> int:
    from .store import ProfileStore, load_or_empty, save, upsert_profile
    from .voiceid import MfccParams, enroll, read_wav

    path = args.store or cfg.store_path
    store = load_or_empty(path, "profiles", n_coeffs=cfg.mfcc_n_coeffs)
    profile = enroll(args.user, read_wav(args.wav), MfccParams.from_config(cfg))
    store = upsert_profile(store, profile)
    save(store, path)
    _emit({"user_id": profile.user_id, "store": str(path), "profiles": len(store.profiles)})
    return 0


def cmd_verify(args, cfg: Config) -> int:
    from .store import load
    from .voiceid import MfccParams, read_wav, verify

    store = load(args.store or cfg.store_path, "profiles")
    threshold = args.threshold if args.threshold is not None else cfg.auth_distance_threshold
    result = verify(read_wav(args.wav), store.profiles, threshold, MfccParams.from_config(cfg))
    _emit({"accepted": result.accepted, "user_id": result.user_id,
           "distance": None if result.distance == float("inf") else result.distance,
           "threshold": threshold})
    return 0


def cmd_classify(args, cfg: Config) -> int:
    from .safety import classify_query, gate_query, load_taxonomy

    taxonomy = load_taxonomy(cfg.taxonomy_path)
    if args.age is None:
        _emit(classify_query(args.text, taxonomy).to_dict())
        return 0
    decision = gate_query(args.text, args.age, taxonomy)
    _emit({"forward": decision.forward, "filtered": decision.filtered,
           "verdict": decision.verdict.to_dict() if decision.verdict else None})
    return 0


def _load_scene(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SightlineError(f"scene file {path}: {exc}") from None
    if isinstance(data, dict):
        data = data.get("detections", [])
    return DetectionSet.from_list(data)


def cmd_rewrite(args, cfg: Config) -> int:
    from .safety import load_rules, rewrite_response

    scene = _load_scene(args.scene) if args.scene else None
    result = rewrite_response(args.text, load_rules(cfg.rules_path), scene, cfg.near_area_threshold,
                              query=args.query)
    _emit({"text": result.text, "blocked": result.blocked,
           "applied": [[rid, list(span)] for rid, span in result.applied]})
    return 0


def cmd_simulate(args, cfg: Config) -> int:
    from .simcli import dumps_outputs, load_scenario, run_scenario

    transcript, report, traces = run_scenario(load_scenario(args.scenario), cfg)
    t_text, r_text, tr_text = dumps_outputs(transcript, report, traces)
    _write(args.out, r_text)
    if args.transcript:
        _write(args.transcript, t_text)
    if args.traces:
        _write(args.traces, tr_text)
    if not args.quiet:
        sys.stdout.write(t_text)
    return 0


def _parse_param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def cmd_experiment(args, cfg: Config) -> int:
    from .simcli import run_experiment

    params = dict(args.param or [])
    if args.seed is not None:
        params["seed"] = args.seed
    if args.n is not None:
        params["n"] = args.n
    result = run_experiment(args.name, params, cfg)
    out = Path(args.out_dir)
    _write(out / f"{args.name}.csv", result.to_csv())
    _write(out / f"{args.name}.json", result.report.to_json())
    _emit({"experiment": args.name, "csv": str(out / f"{args.name}.csv"),
           "report": str(out / f"{args.name}.json"), "summary": result.report.summary,
           "correlations": result.report.correlations})
    return 0


def cmd_report(args, cfg: Config) -> int:
    from .simcli import report_from_traces, traces_from_jsonl

    try:
        traces = traces_from_jsonl(Path(args.traces).read_text(encoding="utf-8"))
    except ValueError as exc:
        raise SightlineError(str(exc)) from None
    text = report_from_traces(traces).to_json()
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_config_print_default(args, cfg: Config) -> int:
    sys.stdout.write(Config().to_yaml())
    return 0


def cmd_store_inspect(args, cfg: Config) -> int:
    from .store import inspect, load

    _emit(inspect(load(args.path)))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .simcli import EXPERIMENTS

    parent = _config_parent()
    parser = argparse.ArgumentParser(prog="sightline", description="Assistive vision pipeline tools.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("enroll", parents=[parent], help="enroll a speaker from a WAV file")
    p.add_argument("--user", required=True)
    p.add_argument("--wav", required=True, help="16-bit PCM mono WAV")
    p.add_argument("--store", help="profile store (default: config store_path)")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", parents=[parent], help="verify a speaker against enrolled profiles")
    p.add_argument("--wav", required=True)
    p.add_argument("--store")
    p.add_argument("--threshold", type=float, help="distance threshold (default: config)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("classify", parents=[parent], help="run the query safety classifier")
    p.add_argument("--text", required=True)
    p.add_argument("--age", choices=["under18", "over18"], help="apply the age gate too")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("rewrite", parents=[parent], help="rewrite an answer for a blind listener")
    p.add_argument("--text", required=True)
    p.add_argument("--scene", help="JSON detections file used to ground vague phrases")
    p.add_argument("--query", help="the question the answer responds to")
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("simulate", parents=[parent], help="replay a scenario file")
    p.add_argument("--scenario", required=True, help="JSONL scenario")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--transcript", help="transcript JSONL path")
    p.add_argument("--traces", help="execution traces JSONL path")
    p.add_argument("--quiet", action="store_true", help="do not echo the transcript")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", parents=[parent], help="run a synthetic experiment")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--out-dir", default=".", help="directory for NAME.csv and NAME.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="number of interactions")
    p.add_argument("--param", action="append", type=_parse_param, metavar="KEY=VALUE",
                   help="extra experiment parameter (JSON value)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", parents=[parent], help="recompute a report from traces")
    p.add_argument("--traces", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("config", help="configuration helpers")
    csub = p.add_subparsers(dest="config_command", required=True, metavar="ACTION")
    c = csub.add_parser("print-default", parents=[parent], help="print the default config as YAML")
    c.set_defaults(func=cmd_config_print_default)

    p = sub.add_parser("store", help="store helpers")
    ssub = p.add_subparsers(dest="store_command", required=True, metavar="ACTION")
    s = ssub.add_parser("inspect", parents=[parent], help="summarize a store file")
    s.add_argument("path")
    s.set_defaults(func=cmd_store_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
        return args.func(args, cfg)
    except (SightlineError, ValueError, OSError) as exc:
        err = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
