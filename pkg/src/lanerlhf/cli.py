"""Pipeline driver: pretrain, preference data, reward model, fine-tune, eval.

Every subcommand validates inputs up front, writes outputs atomically, and
records resolved configs and seeds in its artifacts.  Exit codes: 0 success,
1 validation failure, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .evaluation import (
    GAP_THRESHOLD_M,
    GREEDY,
    STOCHASTIC,
    compare_models,
    export_report,
    load_report,
    run_eval,
)
from .finetune import CompatibilityError, finetune
from .ioutil import atomic_write_json, dumps_json
from .mdp import LaneChangeEnv
from .mdp.observation import obs_dim
from .nn import CheckpointError
from .ppo import PolicyNet, PpoConfig, PpoTrainer, load_policy_checkpoint, save_policy_checkpoint
from .prefs import (
    STYLES,
    SegmentPair,
    SegmentStore,
    StyleOracle,
    collect_segments,
    label_from_dict,
    replay_document,
    sample_pairs,
)
from .prefs.export import export_training_set
from .reward import SequencePreferenceClassifier
from .sim import ScenarioConfig, ScenarioError, load_scenario, resolve_scenario


def _scenario(arg: str) -> ScenarioConfig:
    p = Path(arg)
    if p.suffix == ".json" or p.exists():
        if not p.exists():
            raise ScenarioError(f"scenario file not found: {arg}")
        return load_scenario(p)
    return resolve_scenario(arg)


def _require(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return p


def _ppo_config(config_path, steps) -> PpoConfig:
    kwargs = {}
    if config_path:
        with open(_require(config_path, "config file")) as f:
            kwargs = json.load(f)
    if steps is not None:
        kwargs["total_decision_steps"] = steps
    return PpoConfig(**kwargs)


def _progress_printer(enabled: bool):
    if not enabled:
        return None

    def show(rec: dict) -> None:
        msg = (
            f"iter {rec['iteration']:4d} steps {rec['steps']:7d} "
            f"loss {rec['loss']:+.4f} entropy {rec['entropy']:.3f}"
        )
        if "mean_episode_reward" in rec:
            msg += f" ep_reward {rec['mean_episode_reward']:+.2f}"
        print(msg, file=sys.stderr)

    return show


# -- subcommands -----------------------------------------------------------


def cmd_pretrain(args) -> int:
    scenario = _scenario(args.scenario)
    cfg = _ppo_config(args.config, args.steps)
    policy = PolicyNet(obs_dim(scenario.road.lane_count), seed=args.seed)
    trainer = PpoTrainer(policy, cfg, seed=args.seed)
    trainer.fit(
        lambda: LaneChangeEnv(scenario),
        stats_path=args.stats,
        progress=_progress_printer(args.verbose),
    )
    save_policy_checkpoint(
        args.out,
        policy,
        config=cfg,
        trained_steps=trainer.steps,
        scenario_id=scenario.name,
        seed_lineage={"seed": args.seed},
    )
    print(f"pretrained {trainer.steps} decision steps on {scenario.name} -> {args.out}")
    return 0


def cmd_collect_segments(args) -> int:
    scenario = _scenario(args.scenario)
    policy, meta = load_policy_checkpoint(
        _require(args.ckpt, "checkpoint"), expect_obs_dim=obs_dim(scenario.road.lane_count)
    )
    if args.count < 1:
        raise ValueError("--count must be >= 1")
    segments = collect_segments(policy, scenario, args.count, args.seed)
    store = SegmentStore(args.out)
    store.write_segments(
        segments,
        provenance={
            "checkpoint": str(args.ckpt),
            "checkpoint_trained_steps": meta.get("trained_steps"),
            "scenario_id": scenario.name,
            "count": args.count,
            "seed": args.seed,
        },
        road=asdict(scenario.road),
    )
    print(f"collected {len(segments)} segments from {scenario.name} -> {args.out}")
    return 0


def cmd_pair(args) -> int:
    store = SegmentStore(_require(args.store, "segment store"))
    ids = store.segment_ids()
    pairs = sample_pairs(ids, args.pairs, args.seed)
    store.write_pairs([p.to_dict() for p in pairs])
    print(f"sampled {len(pairs)} pairs over {len(ids)} segments -> {store.root}")
    return 0


def cmd_synth_label(args) -> int:
    store = SegmentStore(_require(args.store, "segment store"))
    pair_rows = store.pairs()
    if not pair_rows:
        raise ValueError(f"no pairs in store {args.store}; run the pair subcommand first")
    oracle = StyleOracle(args.style, noise=args.noise, seed=args.seed)
    segments = store.load_segments()
    pairs = [SegmentPair(r["pair_id"], r["left"], r["right"]) for r in pair_rows]
    labels = oracle.label_pairs(pairs, segments)
    # idempotent per annotator: replace this oracle's previous rows, keep others
    kept = [r for r in store.labels() if r.get("annotator") != oracle.annotator]
    store.write_labels(kept + [l.to_dict() for l in labels])
    n_skip = sum(1 for l in labels if l.choice == "skip")
    print(
        f"labeled {len(labels) - n_skip} pairs, skipped {n_skip} "
        f"as {oracle.annotator} (noise={args.noise}) -> {store.root}"
    )
    return 0


def cmd_annotate(args) -> int:
    from .annotate import serve

    store = SegmentStore(_require(args.store, "segment store"))
    if not store.pairs():
        raise ValueError(f"no pairs in store {args.store}; run the pair subcommand first")
    print(f"serving annotation UI for {store.root} on http://{args.host}:{args.port}")
    serve(str(store.root), host=args.host, port=args.port)
    return 0


def cmd_train_reward(args) -> int:
    store = SegmentStore(_require(args.store, "segment store"))
    rows = [r for r in store.labels() if r.get("style") == args.style]
    if not rows:
        raise ValueError(f"no labels with style {args.style!r} in store {args.store}")
    labels = [label_from_dict(r) for r in rows]
    segments = store.load_segments()
    X, y = export_training_set(labels, segments)
    if len(y) == 0:
        raise ValueError("all labels are skips; nothing to train on")
    params = {}
    if args.config:
        with open(_require(args.config, "config file")) as f:
            params = json.load(f)
    if args.seed is not None:
        params["seed"] = args.seed
    clf = SequencePreferenceClassifier(**params)
    clf.fit(X, y)
    val_acc = clf.history_["val_accuracy"][clf.best_epoch_] if clf.history_["val_accuracy"] else None
    clf.save(
        args.out,
        extra_meta={
            "style": args.style,
            "store": str(args.store),
            "n_examples": int(len(y)),
            "n_labeled_pairs": int(len(y) // 2),
            "val_accuracy": val_acc,
        },
    )
    print(
        f"trained reward model on {len(y)} examples ({args.style}), "
        f"val accuracy {val_acc:.3f} -> {args.out}"
    )
    return 0


def cmd_finetune(args) -> int:
    _require(args.base, "base checkpoint")
    _require(args.reward_model, "reward model checkpoint")
    if args.scenario:
        scenario = _scenario(args.scenario)
    else:
        _, base_meta = load_policy_checkpoint(args.base)
        scenario = resolve_scenario(base_meta["scenario_id"])
    cfg = _ppo_config(args.config, args.steps)
    _, meta = finetune(
        args.base,
        args.reward_model,
        scenario,
        cfg,
        args.out,
        seed=args.seed,
        keep_env_safety=not args.no_keep_safety,
        critic_warmup_steps=args.critic_warmup,
        style=args.style,
        stats_path=args.stats,
        progress=_progress_printer(args.verbose),
    )
    print(
        f"fine-tuned {meta['trained_steps']} decision steps "
        f"({args.style or 'unstyled'}) on {scenario.name} -> {args.out}"
    )
    return 0


def cmd_evaluate(args) -> int:
    scenario = _scenario(args.scenario)
    policy, _ = load_policy_checkpoint(
        _require(args.ckpt, "checkpoint"), expect_obs_dim=obs_dim(scenario.road.lane_count)
    )
    if args.episodes < 1:
        raise ValueError("--episodes must be >= 1")
    if args.workers < 1:
        raise ValueError("--workers must be >= 1")
    report = run_eval(
        policy,
        scenario,
        episodes=args.episodes,
        seed=args.seed,
        mode=args.mode,
        model_id=args.model_id or Path(args.ckpt).name,
        threshold=args.threshold,
        workers=args.workers,
        keep_traces=not args.no_traces,
    )
    paths = export_report(report, args.out, fmt=args.format)
    print(
        f"evaluated {args.episodes} episodes ({args.mode}) on {scenario.name}: "
        f"{len(report.events)} lane changes, "
        f"le40 {report.proportion_le_threshold:.3f} / gt40 {report.proportion_gt_threshold:.3f}, "
        f"collisions {report.collision_rate:.3f} -> {', '.join(str(p) for p in paths)}"
    )
    return 0


def cmd_compare(args) -> int:
    base = load_report(_require(args.base, "base report"))
    variant = load_report(_require(args.variant, "variant report"))
    comp = compare_models(base, variant)
    text = json.dumps(comp, indent=2)
    if args.out:
        atomic_write_json(args.out, comp)
    print(text)
    return 0


def cmd_replay_export(args) -> int:
    store = SegmentStore(_require(args.store, "segment store"))
    doc = replay_document(store, args.segment, road=store.index.get("road"))
    atomic_write_json(args.out, doc)
    print(f"exported replay {args.segment} -> {args.out}")
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanerlhf",
        description="Lane-change policy training with preference-based reward models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train a policy from scratch on a scenario")
    p.add_argument("--scenario", required=True, help="bundled scenario name or JSON file")
    p.add_argument("--config", help="JSON file with training hyperparameters")
    p.add_argument("--steps", type=int, help="override total decision steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--stats", help="write per-iteration training stats JSONL here")
    p.add_argument("--verbose", action="store_true", help="print progress to stderr")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("collect-segments", help="roll the policy and store trajectory segments")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="segment store directory")
    p.set_defaults(func=cmd_collect_segments)

    p = sub.add_parser("pair", help="sample segment pairs for labeling")
    p.add_argument("--store", required=True)
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("synth-label", help="label pairs with the synthetic style oracle")
    p.add_argument("--store", required=True)
    p.add_argument("--style", required=True, choices=list(STYLES))
    p.add_argument("--noise", type=float, default=0.0, help="probability of flipping a choice")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth_label)

    p = sub.add_parser("annotate", help="serve the human annotation UI")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train-reward", help="fit the preference reward model on stored labels")
    p.add_argument("--store", required=True)
    p.add_argument("--style", required=True, help="train on labels with this style tag")
    p.add_argument("--config", help="JSON file with classifier hyperparameters")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_reward)

    p = sub.add_parser("finetune", help="fine-tune a policy against a reward model")
    p.add_argument("--base", required=True, help="pre-trained policy checkpoint")
    p.add_argument("--reward-model", required=True)
    p.add_argument("--style", help="style tag recorded in the output checkpoint")
    p.add_argument("--scenario", help="defaults to the base checkpoint's scenario")
    p.add_argument("--config", help="JSON file with training hyperparameters")
    p.add_argument("--steps", type=int, help="override total decision steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--no-keep-safety",
        action="store_true",
        help="train on the surrogate alone, without the collision penalty",
    )
    p.add_argument(
        "--critic-warmup",
        type=int,
        default=0,
        help="decision steps of value-head-only training before the policy moves",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--stats")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="run seeded evaluation episodes and export a report")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=[STOCHASTIC, GREEDY], default=STOCHASTIC)
    p.add_argument("--threshold", type=float, default=GAP_THRESHOLD_M)
    p.add_argument("--model-id", help="label stored in the report; defaults to the file name")
    p.add_argument("--workers", type=int, default=1, help="parallel episode workers")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--no-traces", action="store_true", help="omit lateral traces")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="bucket shifts between two evaluation reports")
    p.add_argument("--base", required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--out", help="also write the comparison as JSON")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("replay-export", help="export one segment's replay document")
    p.add_argument("--store", required=True)
    p.add_argument("--segment", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay_export)

    return parser


VALIDATION_ERRORS = (
    ValueError,
    KeyError,
    FileNotFoundError,
    NotADirectoryError,
    ScenarioError,
    CheckpointError,
    CompatibilityError,
    TypeError,
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse exits itself; remap usage errors to 1
        return 0 if not e.code else 1
    try:
        return args.func(args)
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
