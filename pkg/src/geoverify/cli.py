"""Command-line front end over every pipeline.

Subcommands: verify, score, funnel, stats, render, assert, grpo-demo, serve.
Configuration precedence is environment (GEOVERIFY_*) < --config file < flags.
Exit codes: 0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import judges as judges_mod
from . import funnel as funnel_mod
from . import grpo as grpo_mod
from . import metrics as metrics_mod
from .ggb import engine, parser as ggb_parser, predicates
from .render import RenderOptions, encode_png, fit_viewport, object_pixel_bboxes, render_state
from .reward import RewardConfig, verify_trace
from .service import serve_reward
from .traces import parse_trace

ENV_PREFIX = "GEOVERIFY_"


def _env_overrides() -> dict:
    mapping = {
        "BETA": ("reward", "beta", float),
        "GATE_MODE": ("reward", "gate_mode", str),
        "TAU_PERC": ("reward", "tau_perc", float),
        "EPS_GEO": ("reward", "eps_geo", float),
        "MODE": ("backend", "mode", str),
        "ENDPOINT": ("backend", "endpoint", str),
        "MODEL": ("backend", "model_id", str),
        "CACHE_DIR": ("backend", "cache_dir", str),
    }
    out: dict = {"reward": {}, "backend": {}}
    for suffix, (section, key, cast) in mapping.items():
        raw = os.environ.get(ENV_PREFIX + suffix)
        if raw is not None:
            out[section][key] = cast(raw)
    return out


def _merged_config(args: argparse.Namespace) -> tuple[RewardConfig, judges_mod.JudgeBackendConfig]:
    layers = [_env_overrides()]
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            layers.append(json.load(fh))
    flag_layer: dict = {"reward": {}, "backend": {}}
    for key in ("beta", "gate_mode", "tau_perc"):
        value = getattr(args, key, None)
        if value is not None:
            flag_layer["reward"][key] = value
    for src, dst in (("mode", "mode"), ("endpoint", "endpoint"),
                     ("cache_dir", "cache_dir"), ("model", "model_id")):
        value = getattr(args, src, None)
        if value is not None:
            flag_layer["backend"][dst] = value
    layers.append(flag_layer)
    reward_kwargs: dict = {}
    backend_kwargs: dict = {}
    for layer in layers:
        reward_kwargs.update(layer.get("reward", {}))
        backend_kwargs.update(layer.get("backend", {}))
    return RewardConfig(**reward_kwargs), judges_mod.JudgeBackendConfig(**backend_kwargs)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file with reward/backend sections")
    sub.add_argument("--mode", choices=("live", "replay", "heuristic"),
                     help="judge backend mode")
    sub.add_argument("--endpoint", help="judge backend endpoint URL")
    sub.add_argument("--model", help="judge backend model id")
    sub.add_argument("--cache-dir", dest="cache_dir", help="judge verdict cache directory")
    sub.add_argument("--beta", type=float, help="verifier bonus coefficient")
    sub.add_argument("--gate-mode", dest="gate_mode", choices=("hard_gate", "additive"))
    sub.add_argument("--tau-perc", dest="tau_perc", type=float,
                     help="visual judge binarization threshold")


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(prog="geoverify",
                                   description="Verify, score, and reward "
                                               "interleaved geometric reasoning traces.")
    subs = root.add_subparsers(dest="command", required=True)

    p = subs.add_parser("verify", help="verify one trace against one problem")
    p.add_argument("--trace", required=True, help="trace file (markdown with fences)")
    p.add_argument("--problem", required=True, help="problem JSON file")
    _add_common(p)

    p = subs.add_parser("score", help="score a JSONL dataset into a report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--report", required=True, help="output report JSON path")
    _add_common(p)

    p = subs.add_parser("funnel", help="run the dataset verification funnel")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--strict-semantic", action="store_true")
    p.add_argument("--disable-filter", action="append", default=[],
                   choices=list(funnel_mod.FILTER_IDS))
    _add_common(p)

    p = subs.add_parser("stats", help="split-level statistics of a dataset")
    p.add_argument("--dataset", required=True)

    p = subs.add_parser("render", help="render a program to PNG")
    p.add_argument("--program", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--metadata", help="write object pixel-bbox sidecar JSON here")
    p.add_argument("--lenient", action="store_true",
                   help="flag degenerate objects instead of failing")

    p = subs.add_parser("assert", help="evaluate an assertion file against a program")
    p.add_argument("--program", required=True)
    p.add_argument("--asserts", required=True)
    p.add_argument("--eps", type=float, default=predicates.DEFAULT_EPS)
    p.add_argument("--key-gate", action="store_true")

    p = subs.add_parser("grpo-demo", help="run the fixture training experiment")
    p.add_argument("--out", help="metrics JSONL output path")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--steps", type=int, help="override GRPO step count")

    p = subs.add_parser("serve", help="serve the reward endpoint")
    p.add_argument("--bind", default="127.0.0.1:8787")
    _add_common(p)

    return root


def _cmd_verify(args) -> int:
    config, backends = _merged_config(args)
    with open(args.trace, "r", encoding="utf-8") as fh:
        trace = parse_trace(fh.read())
    with open(args.problem, "r", encoding="utf-8") as fh:
        problem = funnel_mod.problem_from_json(json.load(fh))
    breakdown = verify_trace(trace, problem, config, backends)
    print(breakdown.to_json())
    gates_ok = breakdown.c_ans == 1 and breakdown.c_exe in (None, 1)
    return 0 if gates_ok else 1


def _cmd_score(args) -> int:
    config, backends = _merged_config(args)
    rows = []
    with open(args.dataset, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip():
                rows.append((line_no, json.loads(line)))
    per_sample = []
    for line_no, row in rows:
        problem = funnel_mod.problem_from_json(row, line_no)
        trace = parse_trace(row["trace"])
        breakdown = verify_trace(trace, problem, config, backends)
        entry = {"id": problem.id, "acc": breakdown.c_ans,
                 "parser": breakdown.s_sem, "code": breakdown.s_form,
                 "judge": breakdown.s_vis, "draw": breakdown.s_draw}
        reference_code = row.get("reference_code")
        if reference_code:
            sim = metrics_mod.code_similarity(trace.combined_code(), reference_code)
            entry.update(bleu=sim.bleu, rouge_l=sim.rouge_l, chrf=sim.chrf,
                         edit_distance=sim.edit_distance, ruby=sim.ruby)
            entry.update(_image_pair_metrics(trace.combined_code(), reference_code))
        per_sample.append(entry)

    def mean(key: str) -> float | None:
        values = [s[key] for s in per_sample if s.get(key) is not None]
        return sum(values) / len(values) if values else None

    def pct(value: float | None) -> float | None:
        return round(value * 100.0, 2) if value is not None else None

    report = {
        "n": len(per_sample),
        "acc": pct(mean("acc")),
        "code_similarity": {
            "bleu": pct(mean("bleu")), "rouge_l": pct(mean("rouge_l")),
            "chrf": pct(mean("chrf")), "edit_distance": mean("edit_distance"),
            "ruby": pct(mean("ruby")),
        },
        "image_similarity": {
            "psnr_db": mean("psnr_db"), "ssim": pct(mean("ssim")),
        },
        "verification": {
            "parser": pct(mean("parser")), "code": pct(mean("code")),
            "judge": pct(mean("judge")), "avg": pct(mean("draw")),
        },
        "samples": per_sample,
    }
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
    print(json.dumps({k: report[k] for k in
                      ("n", "acc", "code_similarity", "image_similarity", "verification")},
                     sort_keys=True, indent=2))
    return 0


def _image_pair_metrics(candidate_code: str, reference_code: str) -> dict:
    try:
        cand_prog = ggb_parser.parse_program(candidate_code)
        ref_prog = ggb_parser.parse_program(reference_code)
        cand_state = engine.execute_program(cand_prog, mode="strict")
        ref_state = engine.execute_program(ref_prog, mode="strict")
        size = 256
        cand_img = render_state(cand_state, fit_viewport(cand_state, size, size))
        ref_img = render_state(ref_state, fit_viewport(ref_state, size, size))
        return {"psnr_db": metrics_mod.psnr(cand_img, ref_img),
                "ssim": metrics_mod.ssim(cand_img, ref_img)}
    except (ggb_parser.GgbParseError, engine.ExecutionError, Exception):
        return {}


def _cmd_funnel(args) -> int:
    _, backends = _merged_config(args)
    enabled = tuple(f for f in funnel_mod.FILTER_IDS if f not in args.disable_filter)
    report = funnel_mod.run_funnel(args.input, args.output, backends,
                                   workers=args.workers,
                                   strict_semantic=args.strict_semantic,
                                   enabled=enabled)
    print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    return 0


def _cmd_stats(args) -> int:
    stats = funnel_mod.split_stats(args.dataset)
    print(json.dumps(stats, sort_keys=True, indent=2))
    return 0


def _cmd_render(args) -> int:
    with open(args.program, "r", encoding="utf-8") as fh:
        program = ggb_parser.parse_program(fh.read())
    try:
        state = engine.execute_program(program,
                                       mode="lenient" if args.lenient else "strict")
    except engine.ExecutionError as exc:
        print(f"execution failed: {exc}", file=sys.stderr)
        return 1
    viewport = fit_viewport(state, args.width, args.height)
    image = render_state(state, viewport, RenderOptions())
    with open(args.out, "wb") as fh:
        fh.write(encode_png(image))
    if args.metadata:
        boxes = object_pixel_bboxes(state, viewport)
        with open(args.metadata, "w", encoding="utf-8") as fh:
            json.dump({k: list(v) for k, v in boxes.items()}, fh, sort_keys=True,
                      indent=2)
    print(args.out)
    return 0


def _cmd_assert(args) -> int:
    with open(args.program, "r", encoding="utf-8") as fh:
        program = ggb_parser.parse_program(fh.read())
    with open(args.asserts, "r", encoding="utf-8") as fh:
        assertions = predicates.parse_assertion_file(fh.read())
    try:
        state = engine.execute_program(program, mode="strict")
    except engine.ExecutionError as exc:
        print(f"execution failed: {exc}", file=sys.stderr)
        return 1
    form = predicates.eval_assertions(state, assertions, eps=args.eps,
                                      key_gate=args.key_gate)
    print(f"{form.score:g}")
    for verdict in form.verdicts:
        status = "pass" if verdict.passed else "FAIL"
        print(f"  [{status}] {verdict.assertion.text()}", file=sys.stderr)
    return 0 if form.score == 1.0 else 1


def _cmd_grpo_demo(args) -> int:
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    config = grpo_mod.RunConfig()
    if args.steps:
        config = replace(config, grpo_steps=args.steps)
    ok = True
    for seed in seeds:
        metrics_path = None
        if args.out:
            base, ext = os.path.splitext(args.out)
            metrics_path = f"{base}.seed{seed}{ext or '.jsonl'}"
        result = grpo_mod.run_fixture_experiment(seed=seed, config=config,
                                                 metrics_path=metrics_path)
        print(json.dumps(result.to_dict(), sort_keys=True))
        ok = ok and (result.reward_grpo > result.reward_mle
                     and result.reward_grpo > result.reward_grpo_answer_only
                     and result.mi_grpo > result.mi_mle)
    return 0 if ok else 1


def _cmd_serve(args) -> int:
    config, backends = _merged_config(args)
    serve_reward(args.bind, config, backends)
    return 0


_COMMANDS = {
    "verify": _cmd_verify,
    "score": _cmd_score,
    "funnel": _cmd_funnel,
    "stats": _cmd_stats,
    "render": _cmd_render,
    "assert": _cmd_assert,
    "grpo-demo": _cmd_grpo_demo,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (funnel_mod.SchemaError, ggb_parser.GgbParseError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
