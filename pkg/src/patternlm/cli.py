"""``patternlm`` command line.

Exit codes: 0 success, 1 usage error, 2 validation or grammar failure,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import collections
import json
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("patternlm")


class UsageError(Exception):
    pass


class InvalidInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _apply_threads() -> None:
    value = os.environ.get("PATTERNLM_THREADS")
    if not value:
        return
    try:
        n = int(value)
        if n < 1:
            raise ValueError
    except ValueError:
        raise UsageError(f"PATTERNLM_THREADS must be a positive integer, got {value!r}") from None
    import torch

    torch.set_num_threads(n)
    try:
        torch.set_num_interop_threads(n)
    except RuntimeError:  # already fixed once parallel work has started in this process
        pass


def _effective(args: argparse.Namespace, keys: dict[str, object]) -> dict:
    """Defaults, then the ``--config`` JSON file, then explicitly given flags."""
    cfg = dict(keys)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"config {args.config} must hold a JSON object")
        cfg.update(loaded)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _echo_config(out_dir: Path | None, command: str, cfg: dict) -> None:
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command} | {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}
    payload["threads"] = os.environ.get("PATTERNLM_THREADS")
    (out_dir / "run_config.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _load_stats(path: str | None, fallback):
    from patternlm.codec import NormStats

    if not path:
        return fallback
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("stats", "norm_stats"):
        if isinstance(data, dict) and key in data:
            data = data[key]
    return NormStats.from_dict(data)


def _read_pattern_checked(path: str):
    from patternlm.pattern import PatternError, read_pattern

    try:
        return read_pattern(path)
    except PatternError as exc:
        raise InvalidInput(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    from patternlm.datagen import emit_dataset

    cfg = _effective(args, {"n": 1000, "seed": 0, "out": None})
    if cfg["out"] is None:
        raise UsageError("gen needs --out")
    if int(cfg["n"]) < 20:
        raise UsageError("--n must be at least 20")
    out = Path(cfg["out"])
    manifest = emit_dataset(int(cfg["n"]), int(cfg["seed"]), out)
    _echo_config(out, "gen", cfg)
    print(json.dumps(manifest["counts"], sort_keys=True))
    return EXIT_OK


def cmd_tokenize(args) -> int:
    from patternlm.codec import CodecError, encode, load_vocabulary

    vocab, stats = load_vocabulary(args.vocab)
    stats = _load_stats(args.stats, stats)
    pattern = _read_pattern_checked(args.pattern)
    try:
        tg = encode(pattern, vocab, stats)
    except CodecError as exc:
        raise InvalidInput(f"cannot tokenize {args.pattern}: {exc}") from None
    line = json.dumps(tg.to_record(vocab), separators=(",", ":")) + "\n"
    if args.out:
        Path(args.out).write_text(line)
    else:
        sys.stdout.write(line)
    return EXIT_OK


def cmd_detokenize(args) -> int:
    from patternlm.codec import CodecError, TokenizedGarment, decode, load_vocabulary
    from patternlm.pattern import dumps_pattern

    vocab, stats = load_vocabulary(args.vocab)
    stats = _load_stats(args.stats, stats)
    text = Path(args.tokens).read_text(encoding="utf-8").strip()
    try:
        tg = TokenizedGarment.from_record(json.loads(text.splitlines()[0]), vocab)
        pattern, repairs = decode(tg, vocab, stats)
    except (CodecError, KeyError, ValueError, IndexError) as exc:
        raise InvalidInput(f"{args.tokens}: {exc}") from None
    for r in repairs:
        print(f"repair: {r}", file=sys.stderr)
    out = dumps_pattern(pattern)
    if args.out:
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def cmd_validate(args) -> int:
    from patternlm.pattern import PatternError, read_pattern, validate

    try:
        pattern = read_pattern(args.pattern, check=False)
    except PatternError as exc:
        print(f"{args.pattern}: {exc}")
        return EXIT_INVALID
    report = validate(pattern)
    for v in report:
        print(f"{v.code}: {v.message}")
    if not report:
        print(f"{args.pattern}: ok")
    return EXIT_OK if not report else EXIT_INVALID


def cmd_render(args) -> int:
    from patternlm.render import render_svg

    pattern = _read_pattern_checked(args.pattern)
    Path(args.out).write_text(render_svg(pattern))
    return EXIT_OK


def cmd_train(args) -> int:
    from patternlm.checkpoint import load_model, load_optimizer, read_checkpoint, save_checkpoint
    from patternlm.model import ModelConfig
    from patternlm.train import TrainConfig, build_model, load_training_set, make_optimizer, train

    model_keys = {k: None for k in ModelConfig.__dataclass_fields__ if k != "vocab_size"}
    train_keys = {k: None for k in TrainConfig.__dataclass_fields__}
    cfg = _effective(args, {"out": None, "lambda": None, "checkpoint": None} | model_keys | train_keys)
    if cfg["out"] is None:
        raise UsageError("train needs --out")
    if cfg["lambda"] is not None:
        cfg["reg_lambda"] = cfg["lambda"]
    out = Path(cfg["out"])
    vocab, stats, data = load_training_set(args.manifest)
    mcfg = ModelConfig.from_dict({k: v for k, v in cfg.items() if k in model_keys and v is not None}
                                 | {"vocab_size": len(vocab)})
    tcfg = TrainConfig.from_dict({k: v for k, v in cfg.items() if k in train_keys and v is not None})
    effective = cfg | {"model": mcfg.to_dict(), "train": tcfg.to_dict(), "manifest": args.manifest}
    _echo_config(out, "train", effective)

    extra = {"tokens": vocab.tokens, "num_tags": vocab.num_tags, "stats": stats.to_dict(), "train": tcfg.to_dict()}
    start, history = 0, []
    if cfg["checkpoint"]:
        ckpt = read_checkpoint(cfg["checkpoint"])
        model = load_model(ckpt, mcfg)
        optimizer = make_optimizer(model, tcfg)
        load_optimizer(ckpt, model, optimizer)
        start, history = ckpt.step, ckpt.header.get("extra", {}).get("history", [])
    else:
        model = build_model(mcfg, tcfg.seed)
        optimizer = make_optimizer(model, tcfg)

    def checkpoint(step, model, optimizer, history):
        save_checkpoint(out / f"step_{step:06d}.plm", model, optimizer, step, extra | {"history": history})

    result = train(model, data, vocab, tcfg, optimizer, start, history, out_dir=out, on_checkpoint=checkpoint)
    save_checkpoint(out / "final.plm", result.model, result.optimizer, result.step, extra | {"history": result.history})
    with open(out / "history.jsonl", "w") as fh:
        for row in result.history:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(json.dumps({"steps": result.step, "final": result.history[-1] if result.history else None}))
    return EXIT_OK


def _model_and_vocab(checkpoint: str, vocab_path: str | None, stats_path: str | None):
    from patternlm.checkpoint import load_checkpoint
    from patternlm.codec import NormStats, Vocabulary, load_vocabulary

    model, ckpt = load_checkpoint(checkpoint)
    extra = ckpt.header.get("extra", {})
    if vocab_path:
        vocab, stats = load_vocabulary(vocab_path)
    elif "tokens" in extra:
        vocab, stats = Vocabulary(extra["tokens"], extra["num_tags"]), NormStats.from_dict(extra["stats"])
    else:
        raise UsageError("checkpoint carries no vocabulary; pass --vocab")
    if len(vocab) != model.cfg.vocab_size:
        raise InvalidInput(f"vocabulary has {len(vocab)} tokens but the checkpoint expects {model.cfg.vocab_size}")
    return model, vocab, _load_stats(stats_path, stats)


def cmd_sample(args) -> int:
    from patternlm.codec import CodecError, decode, encode
    from patternlm.model import edit_prompt, text_prompt
    from patternlm.pattern import dumps_pattern
    from patternlm.sampling import SamplingError, sample

    cfg = _effective(args, {
        "checkpoint": None, "prompt": None, "greedy": None, "temperature": None, "max_len": 1024,
        "grammar_constraint": None, "seed": 0, "edit": None, "out": None, "vocab": None, "stats": None,
    })
    if not cfg["checkpoint"] or cfg["prompt"] is None:
        raise UsageError("sample needs --checkpoint and --prompt")
    greedy = bool(cfg["greedy"]) or cfg["temperature"] is None
    constrained = cfg["grammar_constraint"] is not False
    model, vocab, stats = _model_and_vocab(cfg["checkpoint"], cfg["vocab"], cfg["stats"])
    words = str(cfg["prompt"]).lower().split()
    if cfg["edit"]:
        before = encode(_read_pattern_checked(cfg["edit"]), vocab, stats)
        prompt = edit_prompt(before, words, vocab)
    else:
        prompt = text_prompt(words, vocab)
    try:
        result = sample(model, prompt, vocab, greedy=greedy, temperature=float(cfg["temperature"] or 1.0),
                        max_len=int(cfg["max_len"]), constrained=constrained, seed=int(cfg["seed"]))
    except SamplingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(vocab.render(exc.prefix.tokens), file=sys.stderr)
        return EXIT_RUNTIME
    print(vocab.render(result.garment.tokens), file=sys.stderr)
    try:
        pattern, repairs = decode(result.garment, vocab, stats)
    except CodecError as exc:
        raise InvalidInput(f"generated tokens do not decode: {exc}") from None
    for r in repairs:
        print(f"repair: {r}", file=sys.stderr)
    text = dumps_pattern(pattern)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        _echo_config(out.parent, "sample", cfg)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    from patternlm.metrics import evaluate, mean_report

    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        raise UsageError("eval needs two directories of pattern files")
    names = sorted(p.name for p in gt_dir.glob("*.json"))
    if not names:
        raise UsageError(f"no *.json patterns in {gt_dir}")
    missing = [n for n in names if not (pred_dir / n).exists()]
    if missing:
        raise InvalidInput(f"{len(missing)} ground-truth files have no prediction, first: {missing[0]}")
    rows, reports = [], []
    for n in names:
        r = evaluate(_read_pattern_checked(str(pred_dir / n)), _read_pattern_checked(str(gt_dir / n)))
        reports.append(r)
        rows.append({"file": n} | r.to_dict())
    summary = mean_report(reports).to_dict() | {"pairs": len(reports)}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(summary, indent=1) + "\n")
        with open(out / "pairs.jsonl", "w") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        _echo_config(out, "eval", {"pred_dir": str(pred_dir), "gt_dir": str(gt_dir)})
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def _histogram(values: list[int], width: int = 25) -> dict[str, int]:
    hist = collections.Counter((v // width) * width for v in values)
    return {f"{lo}-{lo + width - 1}": hist[lo] for lo in sorted(hist)}


def cmd_stats(args) -> int:
    from patternlm.codec import encode_length
    from patternlm.pattern import pattern_from_dict

    root = Path(args.dataset)
    manifest_path = root / "manifest.json" if root.is_dir() else root
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    lengths, families, edges = [], collections.Counter(), collections.Counter()
    for split, shards in sorted(manifest["shards"].items()):
        for modality in ("text", "edit"):
            name = shards.get(modality)
            if not name:
                continue
            for line in (manifest_path.parent / name).read_text(encoding="utf-8").splitlines():
                rec = json.loads(line)
                p = pattern_from_dict(rec["pattern"])
                lengths.append(encode_length(p))
                if modality == "text":
                    families[rec.get("family", "unknown")] += 1
                for panel in p.panels:
                    edges.update(e.kind for e in panel.edges)
    report = {
        "patterns": len(lengths),
        "tokens": {
            "mean": sum(lengths) / len(lengths) if lengths else 0.0,
            "max": max(lengths, default=0),
            "min": min(lengths, default=0),
            "histogram": _histogram(lengths),
        },
        "families": dict(sorted(families.items())),
        "edge_types": dict(sorted(edges.items())),
    }
    print(json.dumps(report, indent=1))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="patternlm", description="Sewing-pattern tokenization, training and evaluation.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("tokenize", help="pattern JSON to a token-stream line")
    p.add_argument("pattern")
    p.add_argument("--vocab", required=True)
    p.add_argument("--stats")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("detokenize", help="token-stream line to pattern JSON")
    p.add_argument("tokens")
    p.add_argument("--vocab", required=True)
    p.add_argument("--stats")
    p.add_argument("--out")
    p.set_defaults(func=cmd_detokenize)

    p = sub.add_parser("validate", help="check a pattern file")
    p.add_argument("pattern")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("render", help="draw a pattern as SVG")
    p.add_argument("pattern")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("train", help="train on a generated dataset")
    p.add_argument("manifest")
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--checkpoint", help="resume from this checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate a pattern from a prompt")
    p.add_argument("--checkpoint")
    p.add_argument("--prompt")
    p.add_argument("--edit", help="pattern file to edit; --prompt is then the instruction")
    p.add_argument("--greedy", action="store_true", default=None)
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--no-grammar-constraint", dest="grammar_constraint", action="store_false", default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--vocab")
    p.add_argument("--stats")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="score predicted patterns against ground truth")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="corpus statistics of a generated dataset")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        _apply_threads()
        return args.func(args)
    except UsageError as exc:
        print(f"patternlm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidInput as exc:
        print(f"patternlm: invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - anything else is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"patternlm: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
