"""Command-line pipeline: synth, stage1, stage2, eval, analyze.

Every option can also come from a flat key=value config file
(``--config``); explicit flags win over the file, the file wins over
defaults. Each command writes a resolved-config echo next to its primary
output, and rerunning with only ``--config <echo>`` reproduces the same
bytes. Exit codes: 0 ok, 2 usage, 3 data/format, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable


@dataclass
class Opt:
    """One CLI option that may also be set from the config file."""

    name: str
    type: Callable[[str], Any]
    default: Any
    help: str
    is_flag: bool = False


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_seeds(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _parse_sigmas(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _parse_hidden(text: str) -> tuple[int, ...]:
    cleaned = text.strip()
    if not cleaned:
        return ()
    return tuple(int(part) for part in cleaned.split(","))


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments ignored."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


def _add_options(parser: argparse.ArgumentParser, options: list[Opt]) -> None:
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument(
        "--echo-config",
        default=None,
        help="where to write the resolved config (default: next to the main output)",
    )
    for opt in options:
        flag = f"--{opt.name}"
        if opt.is_flag:
            parser.add_argument(flag, dest=opt.name, action="store_const", const=True,
                                default=None, help=opt.help)
        else:
            parser.add_argument(flag, dest=opt.name, type=str, default=None, help=opt.help)


def _resolve(
    parser: argparse.ArgumentParser, args: argparse.Namespace, options: list[Opt]
) -> dict[str, Any]:
    file_values: dict[str, str] = {}
    if args.config:
        try:
            file_values = read_config_file(args.config)
        except OSError as exc:
            parser.error(f"cannot read config file: {exc}")
        except ValueError as exc:
            parser.error(str(exc))
        unknown = set(file_values) - {opt.name for opt in options}
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
    resolved: dict[str, Any] = {}
    for opt in options:
        raw = getattr(args, opt.name.replace("-", "_"), None)
        if raw is None:
            raw = getattr(args, opt.name, None)
        if raw is not None:
            value = raw if opt.is_flag else _try_parse(parser, opt, str(raw))
        elif opt.name in file_values:
            text = file_values[opt.name]
            if opt.is_flag:
                value = _try_parse_bool(parser, opt, text)
            else:
                value = _try_parse(parser, opt, text)
        else:
            value = opt.default
        resolved[opt.name] = value
    return resolved


def _try_parse(parser: argparse.ArgumentParser, opt: Opt, text: str) -> Any:
    try:
        return opt.type(text)
    except (ValueError, TypeError):
        parser.error(f"invalid value for --{opt.name}: {text!r}")


def _try_parse_bool(parser: argparse.ArgumentParser, opt: Opt, text: str) -> bool:
    try:
        return _parse_bool(text)
    except ValueError:
        parser.error(f"invalid boolean for {opt.name}: {text!r}")


def _write_echo(path: Path, options: list[Opt], resolved: dict[str, Any]) -> None:
    lines = []
    for opt in options:
        value = resolved[opt.name]
        if value is None:
            continue
        lines.append(f"{opt.name}={_format_value(value)}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _require(parser: argparse.ArgumentParser, resolved: dict, names: list[str]) -> None:
    missing = [name for name in names if resolved[name] is None]
    if missing:
        parser.error(f"missing required options: {', '.join('--' + m for m in missing)}")


def _write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


SYNTH_OPTS = [
    Opt("out", str, None, "output directory"),
    Opt("dim", int, 16, "embedding dimension"),
    Opt("classes", int, 4, "number of classes"),
    Opt("per-class", int, 100, "training samples per class"),
    Opt("val-per-class", int, None, "validation samples per class (default per-class/4)"),
    Opt("test-per-class", int, None, "test samples per class (default per-class)"),
    Opt("sigma", _parse_sigmas, (0.1,), "per-class noise scale (single value or comma list)"),
    Opt("shift-magnitude", float, 0.5, "domain shift magnitude for the out-domain test set"),
    Opt("seed", int, 0, "root seed"),
]


def cmd_synth(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    resolved = _resolve(parser, args, SYNTH_OPTS)
    _require(parser, resolved, ["out"])
    if resolved["dim"] < resolved["classes"]:
        parser.error("orthogonal class means need dim >= classes")
    if any(s < 0 for s in resolved["sigma"]):
        parser.error("sigma must be non-negative")

    from .store import write_class_text_file, write_embedding_file
    from .synthetic import BundleSpec, generate_bundle

    sigma = resolved["sigma"]
    spec = BundleSpec(
        dim=resolved["dim"],
        n_classes=resolved["classes"],
        per_class=resolved["per-class"],
        spread_sigma=sigma[0] if len(sigma) == 1 else sigma,
        seed=resolved["seed"],
        val_per_class=resolved["val-per-class"],
        test_per_class=resolved["test-per-class"],
        shift_magnitude=resolved["shift-magnitude"],
    )
    bundle = generate_bundle(spec)
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_embedding_file(bundle.train, out / "train.rgbx")
    write_embedding_file(bundle.val, out / "val.rgbx")
    write_embedding_file(bundle.test_in_domain, out / "test_in.rgbx")
    write_embedding_file(bundle.test_out_domain, out / "test_out.rgbx")
    write_class_text_file(bundle.class_text, out / "class_text.rgbt")
    echo = Path(args.echo_config) if args.echo_config else out / "synth.resolved.cfg"
    _write_echo(echo, SYNTH_OPTS, resolved)
    print(f"wrote bundle to {out}")
    return 0


STAGE1_OPTS = [
    Opt("train", str, None, "training RGBX file"),
    Opt("val", str, None, "validation RGBX file"),
    Opt("class-text", str, None, "RGBT class-text file"),
    Opt("out-model", str, None, "output RGBM checkpoint"),
    Opt("out-trace", str, None, "output trace JSON (default <out-model>.trace.json)"),
    Opt("alpha", float, 0.5, "loss mix: (1-alpha)*volume + alpha*consistency"),
    Opt("epochs", int, 100, "training epochs"),
    Opt("batch-size", int, 512, "mini-batch size"),
    Opt("learning-rate", float, 1e-3, "AdamW learning rate"),
    Opt("weight-decay", float, 1e-2, "AdamW decoupled weight decay"),
    Opt("seed", int, 0, "root seed"),
    Opt("hidden", _parse_hidden, None, "hidden layer widths, comma separated"),
    Opt("activation", str, "softplus", "hidden activation: softplus, relu, or linear"),
    Opt("temperature", float, 1.0, "similarity logit temperature"),
    Opt("raw-midpoint", _parse_bool, False, "skip midpoint renormalization", is_flag=True),
    Opt("select", str, "best_val", "returned checkpoint: best_val or final"),
]


def cmd_stage1(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    resolved = _resolve(parser, args, STAGE1_OPTS)
    _require(parser, resolved, ["train", "val", "class-text", "out-model"])
    if not 0.0 <= resolved["alpha"] <= 1.0:
        parser.error(f"alpha must be in [0, 1], got {resolved['alpha']}")
    if resolved["epochs"] < 1 or resolved["batch-size"] < 1:
        parser.error("epochs and batch-size must be positive")
    if resolved["select"] not in ("best_val", "final"):
        parser.error("select must be best_val or final")

    from .boxnet import Stage1Config, save_model, train_stage1
    from .store import read_class_text_file, read_embedding_file

    train = read_embedding_file(resolved["train"])
    val = read_embedding_file(resolved["val"])
    class_text = read_class_text_file(resolved["class-text"])
    config = Stage1Config(
        alpha=resolved["alpha"],
        epochs=resolved["epochs"],
        batch_size=resolved["batch-size"],
        learning_rate=resolved["learning-rate"],
        weight_decay=resolved["weight-decay"],
        seed=resolved["seed"],
        hidden_dims=resolved["hidden"],
        activation=resolved["activation"],
        temperature=resolved["temperature"],
        raw_midpoint=resolved["raw-midpoint"],
        select=resolved["select"],
    )
    model, trace = train_stage1(train, val, class_text, config)
    out_model = Path(resolved["out-model"])
    out_model.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out_model)
    trace_path = Path(resolved["out-trace"] or f"{out_model}.trace.json")
    _write_json(trace_path, trace.to_dict())
    echo = Path(args.echo_config) if args.echo_config else Path(f"{out_model}.resolved.cfg")
    _write_echo(echo, STAGE1_OPTS, resolved)
    print(f"wrote checkpoint {out_model} and trace {trace_path}")
    return 0


STAGE2_OPTS = [
    Opt("train", str, None, "training RGBX file"),
    Opt("val", str, None, "validation RGBX file"),
    Opt("class-text", str, None, "RGBT class-text file"),
    Opt("model", str, None, "stage-1 RGBM checkpoint"),
    Opt("out-augmented", str, None, "output augmented RGBX file"),
    Opt("out-manifest", str, None, "output manifest JSON (default <out-augmented>.manifest.json)"),
    Opt("out-probe", str, None, "output RGBP probe checkpoint"),
    Opt("samples", int, 5, "box samples per image"),
    Opt("seed", int, 0, "root seed"),
    Opt("renormalize", _parse_bool, True, "renormalize box samples to unit norm"),
    Opt("probe-epochs", int, 100, "probe training epochs"),
    Opt("probe-batch-size", int, 512, "probe mini-batch size"),
    Opt("probe-learning-rate", float, 1e-3, "probe AdamW learning rate"),
    Opt("probe-weight-decay", float, 1e-2, "probe AdamW weight decay"),
    Opt("early-stop", _parse_bool, True, "keep the best-validation probe checkpoint"),
    Opt("bias", _parse_bool, True, "train a probe bias term"),
]


def cmd_stage2(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    resolved = _resolve(parser, args, STAGE2_OPTS)
    _require(parser, resolved, ["train", "val", "class-text", "model", "out-augmented", "out-probe"])
    if resolved["samples"] < 0:
        parser.error("samples must be non-negative")

    from .boxnet import load_model
    from .probe import ProbeConfig, save_probe, train_probe
    from .sampler import AugmentationConfig, augment_dataset, augmentation_manifest
    from .seeding import derive_seed
    from .store import read_class_text_file, read_embedding_file, write_embedding_file

    train = read_embedding_file(resolved["train"])
    val = read_embedding_file(resolved["val"])
    class_text = read_class_text_file(resolved["class-text"])
    model = load_model(resolved["model"])
    aug_config = AugmentationConfig(
        samples_per_image=resolved["samples"],
        seed=derive_seed(resolved["seed"], "augment"),
        renormalize_samples=resolved["renormalize"],
    )
    augmented = augment_dataset(train, model, aug_config)
    out_aug = Path(resolved["out-augmented"])
    out_aug.parent.mkdir(parents=True, exist_ok=True)
    write_embedding_file(augmented, out_aug)
    manifest = augmentation_manifest(train.count, aug_config)
    manifest["model"] = str(resolved["model"])
    manifest_path = Path(resolved["out-manifest"] or f"{out_aug}.manifest.json")
    _write_json(manifest_path, manifest)

    probe_config = ProbeConfig(
        epochs=resolved["probe-epochs"],
        batch_size=resolved["probe-batch-size"],
        learning_rate=resolved["probe-learning-rate"],
        weight_decay=resolved["probe-weight-decay"],
        seed=derive_seed(resolved["seed"], "probe"),
        early_stop=resolved["early-stop"],
        use_bias=resolved["bias"],
    )
    probe = train_probe(augmented, val, class_text.n_classes, probe_config)
    out_probe = Path(resolved["out-probe"])
    out_probe.parent.mkdir(parents=True, exist_ok=True)
    save_probe(probe, out_probe, has_bias=resolved["bias"])
    echo = Path(args.echo_config) if args.echo_config else Path(f"{out_probe}.resolved.cfg")
    _write_echo(echo, STAGE2_OPTS, resolved)
    print(f"wrote augmented set {out_aug}, manifest {manifest_path}, probe {out_probe}")
    return 0


EVAL_OPTS = [
    Opt("train", str, None, "training RGBX file"),
    Opt("val", str, None, "validation RGBX file"),
    Opt("test-in", str, None, "in-domain test RGBX file"),
    Opt("test-out", str, None, "out-of-domain test RGBX file (optional)"),
    Opt("class-text", str, None, "RGBT class-text file"),
    Opt("method", str, "probe", "zero-shot, probe, or augmented"),
    Opt("protocol", str, "standard", "standard, few-shot, or imbalanced"),
    Opt("shots", int, None, "items per class for few-shot"),
    Opt("percent", float, None, "percent of classes reduced for imbalanced"),
    Opt("reduced", int, None, "items kept in reduced classes for imbalanced"),
    Opt("seeds", _parse_seeds, [0], "comma-separated seeds"),
    Opt("out-json", str, None, "output report JSON"),
    Opt("out-csv", str, None, "output report CSV (default <out-json>.csv)"),
    Opt("alpha", float, 0.5, "stage-1 loss mix"),
    Opt("epochs", int, 100, "stage-1 epochs"),
    Opt("batch-size", int, 512, "stage-1 batch size"),
    Opt("learning-rate", float, 1e-3, "stage-1 learning rate"),
    Opt("weight-decay", float, 1e-2, "stage-1 weight decay"),
    Opt("samples", int, 5, "box samples per image for augmented runs"),
    Opt("probe-epochs", int, 100, "probe epochs"),
    Opt("probe-batch-size", int, 512, "probe batch size"),
    Opt("probe-learning-rate", float, 1e-3, "probe learning rate"),
    Opt("probe-weight-decay", float, 1e-2, "probe weight decay"),
]


def _report_csv(path: Path, report) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "in_domain", "out_domain", "extended"])

        def fmt(value):
            return "" if value is None else f"{value:.10g}"

        for row in report.per_seed:
            writer.writerow(
                [row["seed"], fmt(row["in_domain"]), fmt(row["out_domain"]), fmt(row["extended"])]
            )
        writer.writerow(["mean", fmt(report.mean["in_domain"]), fmt(report.mean["out_domain"]), fmt(report.mean["extended"])])
        writer.writerow(["std", fmt(report.std["in_domain"]), fmt(report.std["out_domain"]), fmt(report.std["extended"])])


def cmd_eval(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    resolved = _resolve(parser, args, EVAL_OPTS)
    _require(parser, resolved, ["train", "val", "test-in", "class-text", "out-json"])
    method = resolved["method"].replace("-", "_")
    if method not in ("zero_shot", "probe", "augmented"):
        parser.error(f"unknown method {resolved['method']!r}")
    if not resolved["seeds"]:
        parser.error("seeds must be nonempty")
    if not 0.0 <= resolved["alpha"] <= 1.0:
        parser.error(f"alpha must be in [0, 1], got {resolved['alpha']}")

    from .analytics import Protocol, run_protocol
    from .boxnet import Stage1Config
    from .probe import ProbeConfig
    from .sampler import AugmentationConfig
    from .store import DatasetBundle, read_class_text_file, read_embedding_file

    protocol_name = resolved["protocol"].replace("-", "_")
    if protocol_name == "standard":
        protocol = Protocol.standard()
    elif protocol_name == "few_shot":
        if resolved["shots"] is None:
            parser.error("few-shot needs --shots")
        protocol = Protocol.few_shot(resolved["shots"])
    elif protocol_name == "imbalanced":
        if resolved["percent"] is None or resolved["reduced"] is None:
            parser.error("imbalanced needs --percent and --reduced")
        protocol = Protocol.imbalanced(resolved["percent"], resolved["reduced"])
    else:
        parser.error(f"unknown protocol {resolved['protocol']!r}")

    bundle = DatasetBundle(
        train=read_embedding_file(resolved["train"]),
        val=read_embedding_file(resolved["val"]),
        test_in_domain=read_embedding_file(resolved["test-in"]),
        test_out_domain=(
            read_embedding_file(resolved["test-out"]) if resolved["test-out"] else None
        ),
        class_text=read_class_text_file(resolved["class-text"]),
    )
    report = run_protocol(
        bundle,
        protocol,
        method,
        resolved["seeds"],
        stage1_config=Stage1Config(
            alpha=resolved["alpha"],
            epochs=resolved["epochs"],
            batch_size=resolved["batch-size"],
            learning_rate=resolved["learning-rate"],
            weight_decay=resolved["weight-decay"],
        ),
        augment_config=AugmentationConfig(samples_per_image=resolved["samples"]),
        probe_config=ProbeConfig(
            epochs=resolved["probe-epochs"],
            batch_size=resolved["probe-batch-size"],
            learning_rate=resolved["probe-learning-rate"],
            weight_decay=resolved["probe-weight-decay"],
        ),
    )
    out_json = Path(resolved["out-json"])
    out_json.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out_json, report.to_dict())
    csv_path = Path(resolved["out-csv"] or f"{out_json.with_suffix('')}.csv")
    _report_csv(csv_path, report)
    echo = Path(args.echo_config) if args.echo_config else Path(f"{out_json}.resolved.cfg")
    _write_echo(echo, EVAL_OPTS, resolved)
    print(f"wrote report {out_json} and {csv_path}")
    return 0


ANALYZE_OPTS = [
    Opt("model", str, None, "stage-1 RGBM checkpoint"),
    Opt("data", str, None, "RGBX file to analyze"),
    Opt("class-text", str, None, "RGBT class-text file (names for the rankings)"),
    Opt("out-volumes", str, None, "output volume-ranking CSV"),
    Opt("out-dimensions", str, None, "output per-dimension side-length ranking CSV"),
    Opt("epsilon", float, 1e-12, "side-length clamp for log volumes"),
]


def cmd_analyze(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    resolved = _resolve(parser, args, ANALYZE_OPTS)
    _require(parser, resolved, ["model", "data", "class-text", "out-volumes", "out-dimensions"])
    if resolved["epsilon"] <= 0:
        parser.error("epsilon must be positive")

    from .analytics import rank_classes_by_dimension, rank_classes_by_volume, region_stats
    from .boxnet import load_model
    from .store import read_class_text_file, read_embedding_file

    model = load_model(resolved["model"])
    data = read_embedding_file(resolved["data"])
    class_text = read_class_text_file(resolved["class-text"])
    stats = region_stats(
        model, data, epsilon=resolved["epsilon"], n_classes=class_text.n_classes
    )
    id_to_row = {int(c): i for i, c in enumerate(stats.class_ids)}

    out_vol = Path(resolved["out-volumes"])
    out_vol.parent.mkdir(parents=True, exist_ok=True)
    with open(out_vol, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "class_name", "mean_log_volume"])
        for rank, cls in enumerate(rank_classes_by_volume(stats), 1):
            writer.writerow(
                [
                    rank,
                    class_text.class_names[cls],
                    f"{stats.class_mean_log_volume[id_to_row[cls]]:.10g}",
                ]
            )

    out_dim = Path(resolved["out-dimensions"])
    out_dim.parent.mkdir(parents=True, exist_ok=True)
    with open(out_dim, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dimension", "rank", "class_name", "mean_side_length"])
        for dim_index in range(data.dim):
            for rank, cls in enumerate(rank_classes_by_dimension(stats, dim_index), 1):
                writer.writerow(
                    [
                        dim_index,
                        rank,
                        class_text.class_names[cls],
                        f"{stats.class_mean_side_lengths[id_to_row[cls], dim_index]:.10g}",
                    ]
                )
    echo = Path(args.echo_config) if args.echo_config else Path(f"{out_vol}.resolved.cfg")
    _write_echo(echo, ANALYZE_OPTS, resolved)
    print(f"wrote rankings {out_vol} and {out_dim}")
    return 0


COMMANDS = {
    "synth": (cmd_synth, SYNTH_OPTS, "generate a synthetic bundle"),
    "stage1": (cmd_stage1, STAGE1_OPTS, "train the box network"),
    "stage2": (cmd_stage2, STAGE2_OPTS, "augment from boxes and train the probe"),
    "eval": (cmd_eval, EVAL_OPTS, "run an evaluation protocol"),
    "analyze": (cmd_analyze, ANALYZE_OPTS, "rank classes by region size"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regibox",
        description="latent-region embedding augmentation pipeline",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (_, options, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        _add_options(sub, options)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = COMMANDS[args.command][0]

    from .errors import FormatError, NumericError, ValidationError

    try:
        return handler(parser, args)
    except (FormatError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
