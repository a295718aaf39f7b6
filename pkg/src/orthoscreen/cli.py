"""Batch entry points for every pipeline stage.

Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.
With --json every subcommand prints a single JSON document on stdout;
otherwise output is short ``key: value`` lines.
"""

import argparse
import dataclasses
import json
import sys

from .ablation import parse_grid, run_grid, table_lines
from .casegen import SEVERITIES, CaseGenConfig, PlanGenConfig, generate_case, generate_plan
from .cases import parse_plan
from .constraints import default_knowledge_base, kb_from_json
from .errors import DomainError
from .pipeline import analyze_case
from .pointcloud import SynthConfig, synthesize_cloud
from .scoring import WavfConfig
from .segnet import (ModelConfig, SegModel, TrainConfig, checkpoint_bytes,
                     evaluate_clouds, load_into, train_model)
from .store import NotFound, Workspace


class BadConfig(DomainError):
    """Config file does not parse or names an unknown option."""


def _derive(seed, stream, index):
    """Deterministic per-artifact seed from the CLI seed."""
    return (seed * 1000003 + stream * 101159 + index) % (2 ** 31 - 1)


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise BadConfig(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadConfig(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise BadConfig("config root must be a JSON object")
    return doc


def _configured(cls, section, **extra):
    """Instance of ``cls`` with config-file overrides applied."""
    section = dict(section or {})
    section.update(extra)
    try:
        if dataclasses.is_dataclass(cls):
            return dataclasses.replace(cls(), **section)
        obj = cls()
        for key, value in section.items():
            if not hasattr(obj, key):
                raise BadConfig(f"{cls.__name__} has no option {key!r}")
            setattr(obj, key, value)
        return obj
    except TypeError as exc:
        raise BadConfig(f"{cls.__name__}: {exc}") from exc
    except ValueError as exc:
        raise BadConfig(f"{cls.__name__}: {exc}") from exc


def _kb_from(config):
    if "kb" in config:
        return kb_from_json(json.dumps(config["kb"]))
    return default_knowledge_base()


def _emit(payload, args, text_lines=None):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    elif text_lines is not None:
        for line in text_lines:
            print(line)
    else:
        for key, value in payload.items():
            print(f"{key}: {value}")


def _load_model(workspace, name, config):
    model = SegModel(_configured(ModelConfig, config.get("model")))
    load_into(model, workspace.checkpoint_path(name))
    return model


def _load_clouds(workspace, limit=None):
    ids = workspace.list_clouds()
    if limit:
        ids = ids[:limit]
    return [workspace.get_cloud(cid) for cid in ids], ids


def cmd_gen_synthetic(args, workspace, config):
    case_cfg = _configured(CaseGenConfig, config.get("casegen"))
    plan_cfg = _configured(PlanGenConfig, config.get("plangen"))
    kb = _kb_from(config)
    case_ids = []
    for i in range(args.n):
        case = generate_case(_derive(args.seed, 1, i), case_cfg, case_id=f"case-{i:04d}")
        severity = args.severity
        if severity == "mixed":
            severity = SEVERITIES[i % len(SEVERITIES)]
        plan = generate_plan(case, _derive(args.seed, 2, i), severity=severity,
                             cfg=plan_cfg, kb=kb)
        workspace.put_case(case)
        workspace.put_plan(case.case_id, plan)
        case_ids.append(case.case_id)
    _emit({"cases": len(case_ids), "first": case_ids[0] if case_ids else None,
           "last": case_ids[-1] if case_ids else None}, args)
    return 0


def cmd_synth(args, workspace, config):
    synth_cfg = _configured(SynthConfig, config.get("synth"))
    case_ids = workspace.list_cases()
    if args.limit:
        case_ids = case_ids[:args.limit]
    written = 0
    for i, cid in enumerate(case_ids):
        case = workspace.get_case(cid)
        cloud = synthesize_cloud(case, _derive(args.seed, 3, i), synth_cfg)
        workspace.put_cloud(cloud)
        written += 1
    _emit({"clouds": written}, args)
    return 0


def cmd_train(args, workspace, config):
    train_cfg = _configured(TrainConfig, config.get("train"), seed=args.seed,
                            **({"epochs": args.epochs} if args.epochs else {}))
    clouds, _ = _load_clouds(workspace, args.limit)
    model_cfg = _configured(ModelConfig, config.get("model"), k=train_cfg.k)
    model = SegModel(model_cfg, seed=args.seed)
    result = train_model(model, clouds, train_cfg)
    model.params = result.best_params
    model.stats = result.best_stats
    ckpt_path = workspace.put_checkpoint(args.name, checkpoint_bytes(model, train_cfg.digest()))
    workspace.put_history(args.name, result.history)
    _emit({
        "clouds": len(clouds),
        "epochs": len(result.history),
        "best_epoch": result.best_epoch,
        **{k: result.best_metrics[k] for k in ("miou", "tiou", "acc", "tir")},
        "checkpoint": str(ckpt_path),
    }, args)
    return 0


def cmd_eval(args, workspace, config):
    model = _load_model(workspace, args.model, config)
    clouds, _ = _load_clouds(workspace, args.limit)
    report = evaluate_clouds(model, clouds)
    doc = report.as_dict()
    workspace.put_report(f"eval-{args.model}", doc)
    _emit({k: doc[k] for k in ("miou", "tiou", "acc", "tir", "mode")}, args)
    return 0


def cmd_analyze(args, workspace, config):
    case = workspace.get_case(args.case)
    if args.plan:
        with open(args.plan, "rb") as fh:
            plan = parse_plan(fh.read())
    else:
        plan = workspace.get_plan(args.case)
    kb = _kb_from(config)
    wavf = _configured(WavfConfig, config.get("wavf"))

    model, use_gt = None, args.gt_labels
    if not use_gt:
        try:
            model = _load_model(workspace, args.model, config)
        except NotFound:
            use_gt = True
    cloud = workspace.get_cloud(args.case)
    report, evaluation, _ = analyze_case(case, cloud, plan, kb, wavf,
                                         model=model, use_gt_labels=use_gt)
    workspace.put_report(args.case, report)
    _emit({
        "case_id": args.case,
        "score": report["score"],
        "grade": report["grade"],
        "alerts": len(evaluation.alerts),
        "labels": report["segmentation"]["source"],
    } if not args.json else report, args)
    return 0


def cmd_score(args, workspace, config):
    report = workspace.get_report(args.case)
    _emit({"case_id": args.case, "score": report["score"], "grade": report["grade"],
           "subscores": report["subscores"]} if args.json else
          {"case_id": args.case, "score": report["score"], "grade": report["grade"]}, args)
    return 0


def cmd_sensitivity(args, workspace, config):
    report = workspace.get_report(args.case)
    payload = {"case_id": args.case, "sensitivity": report["sensitivity"]}
    if args.json:
        _emit(payload, args)
    else:
        lines = [f"case_id: {args.case}"]
        for name, row in report["sensitivity"].items():
            lines.append(f"{name}: lowered -> {row['lowered']:.2f}, "
                         f"raised -> {row['raised']:.2f}")
        _emit(payload, args, text_lines=lines)
    return 0


def cmd_ablate(args, workspace, config):
    variants = parse_grid(args.grid)
    clouds, _ = _load_clouds(workspace, args.limit)
    base = _configured(TrainConfig, config.get("train"), seed=args.seed,
                       **({"epochs": args.epochs} if args.epochs else {}))
    rows = run_grid(clouds, variants, base)
    workspace.put_report("ablation", {"seed": args.seed, "epochs": base.epochs,
                                      "clouds": len(clouds), "rows": rows})
    if args.json:
        _emit({"rows": rows}, args)
    else:
        _emit({}, args, text_lines=table_lines(rows))
    return 0


def cmd_serve(args, workspace, config):
    import uvicorn

    from .service import create_app

    app = create_app(workspace.root, model_name=args.model, kb=_kb_from(config),
                     wavf=_configured(WavfConfig, config.get("wavf")),
                     ui_dir=args.ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="orthoscreen",
        description="Synthetic dental arch screening pipeline.")
    parser.add_argument("--workspace", default="workspace", help="artifact directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--config", default=None, help="JSON file overriding defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate labeled cases and plans")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--severity", choices=SEVERITIES + ("mixed",), default="mixed")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("synth", help="sample point clouds for stored cases")
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the segmentation model")
    p.add_argument("--name", default="model")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="segmentation metrics over stored clouds")
    p.add_argument("--model", default="model")
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="full assessment for one case")
    p.add_argument("--case", required=True)
    p.add_argument("--plan", default=None, help="plan JSON path (default: stored plan)")
    p.add_argument("--model", default="model")
    p.add_argument("--gt-labels", action="store_true",
                   help="use stored labels instead of model predictions")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("score", help="score and grade from a stored assessment")
    p.add_argument("--case", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sensitivity", help="weight perturbation table from a stored assessment")
    p.add_argument("--case", required=True)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("ablate", help="train and compare model variants")
    p.add_argument("--grid", action="append", required=True,
                   help="axis spec, e.g. k=3,5,10,20 (repeatable)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve", help="run the local HTTP service")
    p.add_argument("--port", type=int, default=7420)
    p.add_argument("--model", default="model")
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        workspace = Workspace(args.workspace)
        return args.func(args, workspace, config)
    except DomainError as exc:
        message = {"error": type(exc).__name__, "message": str(exc)}
        if args.json:
            print(json.dumps(message), file=sys.stderr)
        else:
            print(f"error ({message['error']}): {message['message']}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
