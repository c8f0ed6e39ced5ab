"""Command-line pipeline: ingest, build regions, train, verify, report.

Subcommands: synth, ingest-check, regions, train, verify, pipeline, report.
Exit codes: 0 success, 2 validation error, 3 runtime failure, 4 verification
completed with no region verified (a legitimate, detectable outcome rather than
an error, so scripts can tell "nothing certifies" apart from "something broke").

Every artifact embeds the hash of the config that produced it; commands that
combine artifacts refuse mismatched hashes unless --force is given.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import dataset as dataset_io
from . import figures, kvio, reports, robust, synth
from . import geometry as geo
from . import network as net_mod
from . import verify as verify_mod
from .config import ExperimentConfig, default_config, load_config, save_config
from .errors import (
    BadSpec,
    ConfigError,
    DimMismatch,
    DuplicateId,
    EmptyInput,
    HypercertError,
    KTooLarge,
    MalformedFile,
    NonFiniteValue,
    ProvenanceMismatch,
)
from .network import EpochMetrics

TARGET = 0  # the positive class index in the binary view

_VALIDATION_ERRORS = (ConfigError, MalformedFile, BadSpec, EmptyInput, DuplicateId,
                      DimMismatch, KTooLarge, NonFiniteValue, ProvenanceMismatch)


def _say(msg: str) -> None:
    print(msg)


def _derive_seeds(seed: int, names) -> dict:
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: int(child.generate_state(1)[0]) for name, child in zip(names, children)}


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _sanitize(variant: str) -> str:
    return variant.replace(":", "-")


def _region_path(out: Path, variant: str) -> Path:
    return out / f"regions-{_sanitize(variant)}.region"


class Artifacts:
    """Files a run emitted, in order, with content hashes for the summary."""

    def __init__(self):
        self.entries = []

    def add(self, name: str, path: Path, hashed: bool = True) -> Path:
        self.entries.append((name, Path(path), hashed))
        return Path(path)


# ---------------------------------------------------------------------------
# Shared stages


def _effective_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default_config()
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.strict_fp:
        overrides.append("verify.strict=yes")
    return cfg.with_overrides(overrides)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(cfg: ExperimentConfig, out: Path) -> dataset_io.EmbeddingDataset:
    path = cfg.get("dataset.path")
    if not path:
        fallback = out / "dataset.emb"
        if fallback.exists():
            path = str(fallback)
        else:
            raise ConfigError("dataset.path", "no dataset configured and none found in --out-dir")
    if not Path(path).exists():
        raise ConfigError("dataset.path", f"file not found: {path}")
    return dataset_io.load(path)


def _region_partitions(cfg, ds) -> tuple:
    """(positives, negatives) used for region construction, per config."""
    positives = dataset_io.partition(ds, dataset_io.Split.TRAIN,
                                     dataset_io.Label.POSITIVE, three_way=True)
    negatives = dataset_io.partition(ds, dataset_io.Split.TRAIN,
                                     dataset_io.Label.NEGATIVE, three_way=True)
    if cfg.get("regions.shrink_negatives") == "train+test":
        test_neg = dataset_io.partition(ds, dataset_io.Split.TEST,
                                        dataset_io.Label.NEGATIVE, three_way=True)
        if test_neg.shape[0]:
            negatives = np.concatenate([negatives, test_neg])
    return positives, negatives


def _build_one_region_set(cfg, ds, variant: str, seed: int) -> geo.RegionSet:
    spec = geo.parse_variant(variant)
    positives, negatives = _region_partitions(cfg, ds)
    try:
        return geo.build_region_set(
            positives, negatives, spec["kind"], k=spec["k"],
            rotate=spec["rotate"], shrink=spec["shrink"], seed=seed,
        )
    except HypercertError as exc:
        exc.args = (f"regions.variants={variant}: {exc}",)
        raise


def _stage_regions(cfg, ds, out: Path, artifacts: Artifacts) -> list:
    seeds = _derive_seeds(cfg.get("seed"), ["regions"])
    sets = []
    meta = {"config_hash": cfg.hash()}
    for variant in cfg.get("regions.variants"):
        regions = _build_one_region_set(cfg, ds, variant, seeds["regions"])
        path = _region_path(out, variant)
        geo.save_region_set(regions, path, meta=meta)
        artifacts.add(f"regions.{_sanitize(variant)}", path)
        sets.append(regions)
    rows = geo.containment_report(sets, ds)
    txt = out / "containment.txt"
    kvio.write_text(txt, reports.containment_text(rows))
    artifacts.add("containment.txt", txt)
    csv_path = out / "containment.csv"
    kvio.write_text(csv_path, reports.containment_csv(rows))
    artifacts.add("containment.csv", csv_path)
    fig = figures.containment_figure(rows, out / "containment.png")
    artifacts.add("containment.png", Path(fig))
    _say(reports.containment_text(rows))
    return sets


def _load_regions(cfg, out: Path) -> list:
    sets = []
    for variant in cfg.get("regions.variants"):
        path = _region_path(out, variant)
        if not path.exists():
            raise ConfigError("regions.variants",
                              f"region file missing for {variant!r}: {path} (run `regions` first)")
        regions, meta = geo.load_region_set(path)
        sets.append((variant, regions, meta))
    return sets


def _check_provenance(hashes: dict, force: bool) -> None:
    """hashes: artifact name -> embedded config hash (None allowed)."""
    seen = {h for h in hashes.values() if h}
    if len(seen) > 1 and not force:
        detail = ", ".join(f"{name}={h or '?'}" for name, h in sorted(hashes.items()))
        raise ProvenanceMismatch(
            f"artifacts come from different configs ({detail}); pass --force to mix them"
        )


def _stage_train(cfg, ds, out: Path, artifacts: Artifacts) -> tuple:
    seeds = _derive_seeds(cfg.get("seed"), ["init", "train", "augment", "regions"])
    X, y = dataset_io.split_arrays(ds, dataset_io.Split.TRAIN)
    X_test, y_test = dataset_io.split_arrays(ds, dataset_io.Split.TEST)

    variant = cfg.get("train.region")
    region_file = _region_path(out, variant)
    if region_file.exists():
        regions, _ = geo.load_region_set(region_file)
    else:
        regions = _build_one_region_set(cfg, ds, variant, seeds["regions"])
        geo.save_region_set(regions, region_file, meta={"config_hash": cfg.hash()})
        artifacts.add(f"regions.{_sanitize(variant)}", region_file)

    augment = None
    aug_cfg = cfg.augment_config(seeds["augment"])
    if aug_cfg.n_positive + aug_cfg.n_negative > 0:
        envelope = geo.bounding_box(X)
        augment = robust.augment_from_regions(regions, envelope, aug_cfg)
        _say(f"augmentation: +{aug_cfg.n_positive} inside, +{aug_cfg.n_negative} complement")

    adversary = None
    n_adv = cfg.get("adversary.samples")
    if n_adv > 0 and cfg.get("train.beta") > 0:
        adversary = robust.make_adversary(regions, cfg.attack_config(), n_adv)
        _say(f"adversary: {n_adv} fresh region samples per step, "
             f"{cfg.get('attack.mode')} mode, {cfg.get('attack.steps')} steps")

    specs = net_mod.default_layer_specs(ds.dim, cfg.get("network.hidden"))
    net = net_mod.init_network(specs, seeds["init"])
    net, metrics = net_mod.train(net, X, y, cfg.train_config(seeds["train"]),
                                 augment=augment, adversary=adversary)

    net_path = out / "network.net"
    net_mod.save_network(net, net_path, meta={"config_hash": cfg.hash()})
    artifacts.add("network", net_path)
    metrics_path = out / "training.csv"
    kvio.write_text(metrics_path, reports.metrics_csv(metrics))
    artifacts.add("training.csv", metrics_path)
    artifacts.add("training.png", Path(figures.training_figure(metrics, out / "training.png")))

    train_eval = net_mod.evaluate(net, X, y)
    test_eval = net_mod.evaluate(net, X_test, y_test, regions=regions)
    _say(f"train accuracy {100 * train_eval.accuracy:.2f}%  "
         f"test accuracy {100 * test_eval.accuracy:.2f}%")
    if test_eval.in_region_accuracy is not None:
        _say(f"accuracy on the {test_eval.in_region_count} test points inside "
             f"{regions.describe()}: {100 * test_eval.in_region_accuracy:.2f}%")
    return net, metrics, test_eval


def _stage_verify(cfg, ds, net, region_sets, out: Path, artifacts: Artifacts,
                  workers: int = 1) -> dict:
    """Verify each region set and the configured eps-balls; emit reports."""
    seeds = _derive_seeds(cfg.get("seed"), ["verify"])
    options = verify_mod.VerifyOptions(
        attack=robust.AttackConfig(steps=max(cfg.get("attack.steps"), 10),
                                   mode="adaptive",
                                   fraction=cfg.get("attack.fraction"),
                                   step_scale=cfg.get("attack.step_scale")),
        restarts=cfg.get("verify.restarts"),
        presamples=cfg.get("verify.presamples"),
        seed=seeds["verify"],
        budget_s=cfg.get("verify.budget_s"),
        strict=cfg.get("verify.strict"),
    )
    entries = []
    results = {}
    for variant, regions in region_sets:
        result = verify_mod.verify_region_set(net, regions, TARGET, options, workers=workers)
        results[variant] = result
        entries.append(reports.VerifyEntry(
            region=regions.describe(), boxes=len(regions.boxes), status=result.status,
            margin=result.margin, wall_time=result.wall_time,
            counterexample=result.counterexample,
        ))

    # certified radii around correctly-classified test positives
    X_test, y_test = dataset_io.split_arrays(ds, dataset_io.Split.TEST)
    pos = X_test[y_test == TARGET]
    pred = net_mod.predict_batch(net, pos) if pos.shape[0] else np.empty(0, int)
    correct = pos[pred == TARGET][: cfg.get("verify.points")]
    radii = [
        verify_mod.epsilon_search(net, x, TARGET, cfg.get("verify.eps_max"),
                                  cfg.get("verify.tolerance"), strict=cfg.get("verify.strict"))
        for x in correct
    ]
    ball_lines = []
    for eps in cfg.get("verify.eps_grid"):
        n_ok = sum(
            verify_mod.certified_margin(net, x - eps, x + eps, TARGET,
                                        cfg.get("verify.strict")) > 0
            for x in correct
        )
        ball_lines.append(f"eps-ball({eps:g}): {n_ok}/{len(correct)} sampled points verified")

    vol_rows = reports.volume_rows([r for _, r in region_sets], ds.dim, cfg.get("verify.eps_grid"))
    summary = reports.radius_summary(radii)

    # The human-readable report carries wall-clock timings, so it is exempt
    # from the byte-identical rerun contract; the CSVs are fully deterministic.
    verify_txt = (reports.verification_text(entries) + "\n"
                  + "\n".join(ball_lines) + "\n\n"
                  + reports.volume_text(vol_rows) + "\n"
                  + reports.radius_text(summary))
    txt_path = out / "verify.txt"
    kvio.write_text(txt_path, verify_txt)
    artifacts.add("verify.txt", txt_path, hashed=False)

    csv_path = out / "verify.csv"
    kvio.write_text(csv_path, reports.verification_csv(entries))
    artifacts.add("verify.csv", csv_path)
    vol_path = out / "volumes.csv"
    kvio.write_text(vol_path, reports.volume_csv(vol_rows))
    artifacts.add("volumes.csv", vol_path)
    radii_path = out / "radii.csv"
    kvio.write_text(radii_path, reports.radius_csv(radii))
    artifacts.add("radii.csv", radii_path)
    artifacts.add("margins.png", Path(figures.margins_figure(entries, out / "margins.png")))
    artifacts.add("radii.png", Path(figures.radii_figure(radii, out / "radii.png")))

    _say(verify_txt)
    return {
        "results": results,
        "radii": summary,
        "any_verified": any(r.status == verify_mod.VERIFIED for r in results.values()),
    }


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(args, cfg) -> int:
    out = _out_dir(args)
    ds = synth.generate_from_config(cfg, cfg.get("seed"))
    path = out / "dataset.emb"
    dataset_io.save(ds, path)
    counts = ds.counts()
    _say(f"wrote {path}: {len(ds)} records, dim {ds.dim}")
    for (split, label), n in sorted(counts.items()):
        _say(f"  {split.spell():5s} {label.spell():9s} {n}")
    return 0


def cmd_ingest_check(args, cfg) -> int:
    path = args.path or cfg.get("dataset.path")
    if not path:
        _say("error: no dataset path given (positional argument or dataset.path)")
        return 2
    try:
        ds = dataset_io.load(path)
    except HypercertError as exc:
        _say(f"FAIL {path}: {exc}")
        return 2
    _say(f"OK, {len(ds)} records, dim {ds.dim}")
    for (split, label), n in sorted(ds.counts().items()):
        _say(f"  {split.spell():5s} {label.spell():9s} {n}")
    return 0


def cmd_regions(args, cfg) -> int:
    out = _out_dir(args)
    ds = _load_dataset(cfg, out)
    _stage_regions(cfg, ds, out, Artifacts())
    return 0


def cmd_train(args, cfg) -> int:
    out = _out_dir(args)
    ds = _load_dataset(cfg, out)
    _stage_train(cfg, ds, out, Artifacts())
    return 0


def cmd_verify(args, cfg) -> int:
    out = _out_dir(args)
    ds = _load_dataset(cfg, out)
    net_path = out / "network.net"
    if not net_path.exists():
        raise ConfigError("network", f"network file missing: {net_path} (run `train` first)")
    net, net_meta = net_mod.load_network(net_path)
    loaded = _load_regions(cfg, out)
    hashes = {"network": net_meta.get("config_hash")}
    for variant, _, meta in loaded:
        hashes[f"regions[{variant}]"] = meta.get("config_hash")
    _check_provenance(hashes, args.force)
    outcome = _stage_verify(cfg, ds, net, [(v, r) for v, r, _ in loaded], out,
                            Artifacts(), workers=args.workers)
    return 0 if outcome["any_verified"] else 4


def cmd_pipeline(args, cfg) -> int:
    out = _out_dir(args)
    # Resolve the dataset before anything is written, so a validation error
    # (bad dataset.path, malformed file) leaves no partial artifacts behind.
    synthesized = not cfg.get("dataset.path")
    if synthesized:
        ds = synth.generate_from_config(cfg, cfg.get("seed"))
    else:
        ds = _load_dataset(cfg, out)
    artifacts = Artifacts()
    save_config(cfg, out / "config.used")
    artifacts.add("config", out / "config.used")
    stage = "dataset"
    try:
        if synthesized:
            ds_path = out / "dataset.emb"
            dataset_io.save(ds, ds_path)
            artifacts.add("dataset", ds_path)
        stage = "regions"
        sets = _stage_regions(cfg, ds, out, artifacts)
        stage = "train"
        net, _, test_eval = _stage_train(cfg, ds, out, artifacts)
        stage = "verify"
        variants = cfg.get("regions.variants")
        outcome = _stage_verify(cfg, ds, net, list(zip(variants, sets)), out,
                                artifacts, workers=args.workers)
    except HypercertError as exc:
        _write_summary(out, cfg, artifacts, status=f"failed at {stage}: {exc}")
        raise
    code = 0 if outcome["any_verified"] else 4
    lines = [f"test_accuracy = {test_eval.accuracy:.4f}"]
    for variant, result in outcome["results"].items():
        lines.append(f"verify.{_sanitize(variant)} = {result.status}")
    r = outcome["radii"]
    if r["count"]:
        lines.append(f"radii = min {r['min']:.3e} median {r['median']:.3e} max {r['max']:.3e}")
    lines.append(f"exit_code = {code}")
    _write_summary(out, cfg, artifacts, status="ok", extra=lines)
    _say(f"pipeline complete, exit code {code} (4 means nothing verified, by design)")
    return code


def _write_summary(out: Path, cfg, artifacts: Artifacts, status: str, extra=()) -> None:
    lines = [f"# generated {datetime.now(timezone.utc).isoformat()}"]
    lines.append(f"status = {status}")
    lines.append(f"config_hash = {cfg.hash()}")
    for name, path, hashed in artifacts.entries:
        digest = _sha256_file(path) if hashed and path.exists() else "-"
        lines.append(f"artifact.{name} = {digest}")
    lines.extend(extra)
    kvio.write_text(out / "summary.txt", "\n".join(lines) + "\n")


def cmd_report(args, cfg) -> int:
    out = _out_dir(args)
    ds = _load_dataset(cfg, out)
    loaded = _load_regions(cfg, out)
    hashes = {f"regions[{v}]": meta.get("config_hash") for v, _, meta in loaded}
    net_path = out / "network.net"
    if net_path.exists():
        _, net_meta = net_mod.load_network(net_path)
        hashes["network"] = net_meta.get("config_hash")
    _check_provenance(hashes, args.force)

    sets = [regions for _, regions, _ in loaded]
    rows = geo.containment_report(sets, ds)
    kvio.write_text(out / "containment.txt", reports.containment_text(rows))
    kvio.write_text(out / "containment.csv", reports.containment_csv(rows))
    figures.containment_figure(rows, out / "containment.png")
    vol_rows = reports.volume_rows(sets, ds.dim, cfg.get("verify.eps_grid"))
    kvio.write_text(out / "volumes.csv", reports.volume_csv(vol_rows))
    _say(reports.containment_text(rows))
    _say(reports.volume_text(vol_rows))

    metrics_path = out / "training.csv"
    if metrics_path.exists():
        metrics = _read_metrics(metrics_path)
        figures.training_figure(metrics, out / "training.png")
    return 0


def _read_metrics(path: Path) -> list:
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    return [EpochMetrics(int(r["epoch"]), float(r["loss"]), float(r["train_accuracy"]))
            for r in rows]


# ---------------------------------------------------------------------------
# Parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypercert",
        description="Box regions around embedding classes: build, train against, verify.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (key = value lines)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--workers", type=int, default=1,
                        help="parallel workers for per-box verification")
    common.add_argument("--out-dir", default="out", help="artifact directory (default: out)")
    common.add_argument("--strict-fp", action="store_true",
                        help="widen interval bounds for floating-point soundness")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config value (repeatable)")
    common.add_argument("--force", action="store_true",
                        help="allow mixing artifacts from different configs")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common],
                   help="generate a synthetic embedding dataset").set_defaults(handler=cmd_synth)
    p = sub.add_parser("ingest-check", parents=[common],
                       help="validate an embedding file and print its counts")
    p.add_argument("path", nargs="?", help="embedding file (defaults to dataset.path)")
    p.set_defaults(handler=cmd_ingest_check)
    sub.add_parser("regions", parents=[common],
                   help="build region sets and the containment table").set_defaults(handler=cmd_regions)
    sub.add_parser("train", parents=[common],
                   help="train the classifier per config").set_defaults(handler=cmd_train)
    sub.add_parser("verify", parents=[common],
                   help="verify regions and eps-balls against the trained network").set_defaults(handler=cmd_verify)
    sub.add_parser("pipeline", parents=[common],
                   help="regions + train + verify with one summary").set_defaults(handler=cmd_pipeline)
    sub.add_parser("report", parents=[common],
                   help="re-render reports and figures from stored artifacts").set_defaults(handler=cmd_report)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        return args.handler(args, cfg)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HypercertError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
