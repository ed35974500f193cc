"""End-to-end acceptance checks for the full training pipeline.

The heavyweight artifacts (pre-trained bases, reward models, fine-tuned
policies, evaluation reports) are built once into ``tests/.acceptance_cache``
and reused on later runs; delete that directory to force a cold rebuild.
Per-stage wall times are recorded at build time, so the runtime budgets keep
applying to cached runs.  Stage determinism is checked separately on small
double-runs, so cache reuse cannot hide a determinism break.

Run with ``pytest tests/test_acceptance.py -v``; a one-line verdict per
criterion is printed in the terminal summary.
"""
import json
import os
import time
from pathlib import Path
from time import perf_counter
from types import SimpleNamespace

import numpy as np
import pytest

from lanerlhf import experiments as ex
from lanerlhf.evaluation import load_report, export_report, run_eval
from lanerlhf.mdp import Action, LaneChangeEnv
from lanerlhf.mdp.rewards import (
    COLLISION_PENALTY,
    LANE_CHANGE_PENALTY,
    reward_efficiency,
    reward_lane_change,
    reward_safety,
)
from lanerlhf.nn import (
    ParamSet,
    grad_check,
    linear_backward,
    linear_forward,
    linear_init,
    lstm_backward,
    lstm_forward,
    lstm_init,
    log_softmax,
    softmax,
    softmax_cross_entropy,
)
from lanerlhf.ppo import PolicyNet, PpoConfig, PpoTrainer, save_policy_checkpoint
from lanerlhf.ppo.checkpoint import load_policy_checkpoint
from lanerlhf.ppo.rollout import play_episode
from lanerlhf.ppo.trainer import clipped_surrogate, ppo_clip_loss
from lanerlhf.prefs import StyleOracle, collect_segments, sample_pairs
from lanerlhf.prefs.segments import SegmentStore
from lanerlhf.reward.model import RewardNet, SequencePreferenceClassifier
from lanerlhf.sim import resolve_scenario

from conftest import check_criterion
from test_policy_net import randomize_heads

CACHE_DIR = Path(__file__).parent / ".acceptance_cache"
EVAL_SEED = 4242
GRAD_TOL = 1e-5


def _artifact(name: str, build) -> Path:
    """Build-once cache: ``build(tmp_path)`` then an atomic rename, with the
    build wall time recorded next to the artifact."""
    path = CACHE_DIR / name
    if path.exists():
        return path
    CACHE_DIR.mkdir(exist_ok=True)
    tmp = CACHE_DIR / (name + ".build")
    t0 = time.time()
    build(tmp)
    seconds = time.time() - t0
    os.replace(tmp, path)
    (CACHE_DIR / (name + ".time.json")).write_text(json.dumps({"seconds": seconds}))
    return path


def _build_seconds(name: str) -> float:
    return json.loads((CACHE_DIR / (name + ".time.json")).read_text())["seconds"]


def _policy(path: Path) -> PolicyNet:
    return load_policy_checkpoint(path)[0]


@pytest.fixture(scope="session")
def arts():
    """All pipeline artifacts, built lazily and cached across runs."""
    ns = SimpleNamespace()

    ns.base_obstacle = _artifact(
        "base_obstacle.json", lambda p: ex.pretrain_base("obstacle", out_path=p)
    )
    ns.base_mixed = _artifact(
        "base_mixed.json", lambda p: ex.pretrain_base("mixed", out_path=p)
    )
    ns.pool_keeper = _artifact(
        "pool_keeper.json",
        lambda p: ex.pretrain_base(
            "obstacle", out_path=p, total_decision_steps=ex.POOL_KEEPER_STEPS
        ),
    )
    ns.pool_hopper = _artifact(
        "pool_hopper.json",
        lambda p: ex.pretrain_base(
            "obstacle", out_path=p, total_decision_steps=ex.POOL_HOPPER_STEPS
        ),
    )

    def build_rm(scenario, style, pool_paths):
        def go(path):
            base = _policy(getattr(ns, f"base_{scenario}"))
            pools = [_policy(p) for p in pool_paths]
            _, info = ex.train_style_reward_model(scenario, style, base, pools, out_path=path)
            (CACHE_DIR / f"rm_{scenario}_{style}.info.json").write_text(json.dumps(info))

        return go

    ns.rm_obstacle_conservative = _artifact(
        "rm_obstacle_conservative.json", build_rm("obstacle", "conservative", [])
    )
    ns.rm_obstacle_aggressive = _artifact(
        "rm_obstacle_aggressive.json",
        build_rm("obstacle", "aggressive", [ns.pool_keeper, ns.pool_hopper]),
    )
    ns.rm_mixed_conservative = _artifact(
        "rm_mixed_conservative.json", build_rm("mixed", "conservative", [])
    )
    ns.rm_mixed_aggressive = _artifact(
        "rm_mixed_aggressive.json", build_rm("mixed", "aggressive", [])
    )

    def build_ft(scenario, style):
        def go(path):
            ex.finetune_style(
                scenario, style,
                getattr(ns, f"base_{scenario}"),
                getattr(ns, f"rm_{scenario}_{style}"),
                path,
            )

        return go

    for scenario in ("obstacle", "mixed"):
        for style in ("conservative", "aggressive"):
            setattr(
                ns, f"ft_{scenario}_{style}",
                _artifact(f"ft_{scenario}_{style}.json", build_ft(scenario, style)),
            )

    def build_eval(ckpt_attr, scenario, episodes):
        def go(path):
            report = run_eval(
                _policy(getattr(ns, ckpt_attr)), resolve_scenario(scenario),
                episodes=episodes, seed=EVAL_SEED, mode="stochastic",
                model_id=ckpt_attr, keep_traces=False,
            )
            export_report(report, path)

        return go

    ns.eval_obstacle_200 = _artifact(
        "eval_obstacle_base_200.json", build_eval("base_obstacle", "obstacle", 200)
    )
    for scenario in ("obstacle", "mixed"):
        setattr(
            ns, f"eval_{scenario}_base",
            _artifact(f"eval_{scenario}_base_1000.json", build_eval(f"base_{scenario}", scenario, 1000)),
        )
        for style in ("conservative", "aggressive"):
            setattr(
                ns, f"eval_{scenario}_{style}",
                _artifact(
                    f"eval_{scenario}_{style}_1000.json",
                    build_eval(f"ft_{scenario}_{style}", scenario, 1000),
                ),
            )

    def build_onsets(path):
        scenario = resolve_scenario("obstacle")
        out = {}
        for attr in ("base_obstacle", "ft_obstacle_conservative", "ft_obstacle_aggressive"):
            policy = _policy(getattr(ns, attr))
            onsets = []
            for seed in range(50):
                summary = play_episode(policy, LaneChangeEnv(scenario), env_seed=seed, greedy=True)
                onsets.append(min((e["t"] for e in summary.events), default=None))
            out[attr] = onsets
        path.write_text(json.dumps(out))

    ns.greedy_onsets = _artifact("greedy_onsets_obstacle.json", build_onsets)
    return ns


class TestRewardArithmetic:
    def test_criterion_01_reward_terms(self):
        t0 = perf_counter()
        ok = (
            reward_safety(True) == COLLISION_PENALTY == -10.0
            and reward_safety(False) == 0.0
            and reward_lane_change(Action.LANE_LEFT, True) == LANE_CHANGE_PENALTY == -1.0
            and reward_lane_change(Action.LANE_RIGHT, True) == -1.0
            and reward_lane_change(Action.LANE_LEFT, False) == 0.0
            and reward_lane_change(Action.KEEP, True) == 0.0
            and reward_lane_change(Action.ACCELERATE, True) == 0.0
        )
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(1000):
            v_min = float(rng.uniform(0.0, 10.0))
            v_max = v_min + float(rng.uniform(0.5, 30.0))
            v = float(rng.uniform(-5.0, v_max + 15.0))
            if v < v_min:
                expect = (v - v_min) / (v_max - v_min)
            elif v > v_max:
                expect = (v_max - v) / (v_max - v_min)
            else:
                expect = v / v_max
            worst = max(worst, abs(reward_efficiency(v, v_min, v_max) - expect))
        elapsed = perf_counter() - t0
        ok = ok and worst <= 1e-12 and elapsed < 1.0
        check_criterion(
            1, ok,
            f"collision -10, lane change -1, efficiency max err {worst:.1e} "
            f"on 1000 triples ({elapsed:.3f} s)",
        )


class TestClippedObjective:
    def test_criterion_02_clip_values_and_gradient(self):
        t0 = perf_counter()
        hand = (
            abs(clipped_surrogate(np.array([1.5]), np.array([1.0]), 0.2)[0] - 1.2) <= 1e-12
            and abs(clipped_surrogate(np.array([0.5]), np.array([-1.0]), 0.2)[0] + 0.8) <= 1e-12
        )
        adv = np.array([2.0, -0.7, 0.0])
        at_old = np.max(np.abs(clipped_surrogate(np.ones(3), adv, 0.2) - adv)) <= 1e-12

        rng = np.random.default_rng(3)
        policy = PolicyNet(obs_dim=5, width=6, seed=3)
        randomize_heads(policy, rng)
        B = 8
        obs = rng.normal(size=(B, 5))
        state = (rng.normal(size=(B, 6)) * 0.1, rng.normal(size=(B, 6)) * 0.1)
        actions = rng.integers(0, 5, size=B)
        logits, _, _, _ = policy.forward(obs, state)
        batch = {
            "obs": obs, "h": state[0], "c": state[1], "actions": actions,
            "old_log_probs": log_softmax(logits)[np.arange(B), actions],
            "advantages": rng.normal(size=B) * 2.0,
            "returns": rng.normal(size=B),
        }
        policy.params.zero_grads()
        ppo_clip_loss(policy, batch, 0.2, 0.0, 0.0)
        clip_grads = {n: p.grad.copy() for n, p in policy.params.items()}
        policy.params.zero_grads()
        logits, _, _, cache = policy.forward(obs, state)
        dlp = -batch["advantages"] / B
        dlogits = -softmax(logits) * dlp[:, None]
        dlogits[np.arange(B), actions] += dlp
        policy.backward(cache, dlogits, np.zeros(B))
        gap = max(
            float(np.max(np.abs(clip_grads[n] - p.grad)))
            for n, p in policy.params.items()
        )
        elapsed = perf_counter() - t0
        ok = hand and at_old and gap <= 1e-10 and elapsed < 1.0
        check_criterion(
            2, ok,
            f"hand examples exact, grad vs policy-gradient at theta_old "
            f"max abs diff {gap:.1e} ({elapsed:.3f} s)",
        )


class TestGradientFidelity:
    def test_criterion_03_finite_difference_checks(self):
        t0 = perf_counter()
        rng = np.random.default_rng(0)
        errs = {}

        ps = ParamSet()
        w, b = linear_init(rng, 4, 3)
        ps.add("lin.W", w), ps.add("lin.b", b)
        x = rng.normal(size=(5, 4))
        r = rng.normal(size=(5, 3))

        def linear_lag():
            ps.zero_grads()
            out = linear_forward(x, ps["lin.W"].value, ps["lin.b"].value)
            _, dw, db = linear_backward(r, x, ps["lin.W"].value)
            ps["lin.W"].grad += dw
            ps["lin.b"].grad += db
            return float((out * r).sum())

        errs["linear"] = grad_check(linear_lag, ps)["max_rel_err"]

        width = 4
        ps = ParamSet()
        w, b = lstm_init(rng, 3, width)
        ps.add("lstm.W", w), ps.add("lstm.b", b)
        xs = rng.normal(size=(2, 3, 3))
        h0 = np.zeros((2, width))
        c0 = np.zeros((2, width))
        rh = rng.normal(size=(2, 3, width))

        def lstm_lag():
            ps.zero_grads()
            hs, _, _, caches = lstm_forward(xs, h0, c0, ps["lstm.W"].value, ps["lstm.b"].value)
            _, dw, db, _, _ = lstm_backward(rh, caches, ps["lstm.W"].value, 3)
            ps["lstm.W"].grad += dw
            ps["lstm.b"].grad += db
            return float((hs * rh).sum())

        errs["lstm_bptt3"] = grad_check(lstm_lag, ps)["max_rel_err"]

        ps = ParamSet()
        ps.add("logits", rng.normal(size=(6, 4)))
        y = rng.integers(0, 4, size=6)

        def ce_lag():
            ps.zero_grads()
            losses, dlogits = softmax_cross_entropy(ps["logits"].value, y)
            ps["logits"].grad += dlogits / 6.0
            return float(losses.mean())

        errs["softmax_ce"] = grad_check(ce_lag, ps)["max_rel_err"]

        policy = PolicyNet(obs_dim=3, width=4, seed=11)
        randomize_heads(policy, rng)
        B = 4
        obs = rng.normal(size=(B, 3))
        state = (rng.normal(size=(B, 4)) * 0.1, rng.normal(size=(B, 4)) * 0.1)
        actions = rng.integers(0, 5, size=B)
        logits, _, _, _ = policy.forward(obs, state)
        lp = log_softmax(logits)[np.arange(B), actions]
        batch = {
            "obs": obs, "h": state[0], "c": state[1], "actions": actions,
            "old_log_probs": lp - rng.uniform(-0.05, 0.05, size=B),
            "advantages": rng.normal(size=B), "returns": rng.normal(size=B),
        }

        def policy_lag():
            policy.params.zero_grads()
            loss, _ = ppo_clip_loss(policy, batch, 0.2, 0.5, 0.01)
            return loss

        errs["policy_loss"] = grad_check(policy_lag, policy.params)["max_rel_err"]

        net = RewardNet(obs_dim=3, width=4, seed=0)
        for name in ("linear_out.W", "linear_out.b"):
            p = net.params[name]
            p.value[...] = rng.normal(size=p.value.shape) * 0.3
        X = rng.normal(size=(5, 6, 3))
        yr = rng.integers(0, 2, size=5)

        def reward_lag():
            net.params.zero_grads()
            logits, cache = net.forward(X)
            losses, dlogits = softmax_cross_entropy(logits, yr)
            net.backward(cache, dlogits / len(yr))
            return float(losses.mean())

        errs["reward_loss"] = grad_check(reward_lag, net.params)["max_rel_err"]

        elapsed = perf_counter() - t0
        worst = max(errs.values())
        ok = worst <= GRAD_TOL and elapsed < 30.0
        detail = ", ".join(f"{k}={v:.1e}" for k, v in errs.items())
        check_criterion(3, ok, f"{detail} ({elapsed:.1f} s)")


def _events_by_episode(report):
    out = {}
    for ev in report.events:
        out.setdefault(ev.episode, []).append(ev)
    return out


class TestPipelineCriteria:
    def test_criterion_04_pretrain_competence(self, arts):
        _, meta = load_policy_checkpoint(arts.base_obstacle)
        report = load_report(arts.eval_obstacle_200)
        by_ep = _events_by_episode(report)
        clean = sum(
            1
            for episode in range(report.episodes)
            if len(by_ep.get(episode, [])) == 1
            and by_ep[episode][0].from_lane == 0
            and by_ep[episode][0].to_lane == 1
        )
        share = clean / report.episodes
        budget = _build_seconds("base_obstacle.json") + _build_seconds(
            "eval_obstacle_base_200.json"
        )
        ok = (
            meta["trained_steps"] <= 300_000
            and report.collision_rate <= 0.05
            and share >= 0.95
            and budget <= 1800.0
        )
        check_criterion(
            4, ok,
            f"{meta['trained_steps']} steps, collisions {report.collision_rate:.1%}, "
            f"exactly-one-change {share:.1%} of 200 episodes ({budget:.0f} s)",
        )

    def test_criterion_05_reward_model_accuracy(self, arts):
        info = json.loads((CACHE_DIR / "rm_obstacle_conservative.info.json").read_text())
        budget = _build_seconds("rm_obstacle_conservative.json")
        ok = (
            info["n_pairs"] == 1000
            and info["holdout_accuracy"] >= 0.90
            and 0.45 <= info["untrained_accuracy"] <= 0.55
            and budget <= 300.0
        )
        check_criterion(
            5, ok,
            f"holdout accuracy {info['holdout_accuracy']:.2f} on 100 of "
            f"{info['n_pairs']} pairs, untrained {info['untrained_accuracy']:.2f} "
            f"({budget:.0f} s)",
        )

    def test_criterion_06_obstacle_style_shifts(self, arts):
        base = load_report(arts.eval_obstacle_base)
        aggr = load_report(arts.eval_obstacle_aggressive)
        cons = load_report(arts.eval_obstacle_conservative)
        d_aggr = aggr.proportion_le_threshold - base.proportion_le_threshold
        d_cons = cons.proportion_gt_threshold - base.proportion_gt_threshold
        ok = d_aggr >= 0.10 and d_cons >= 0.05
        check_criterion(
            6, ok,
            f"aggressive <=40 m {d_aggr:+.1%} (need >=+10 pp), "
            f"conservative >40 m {d_cons:+.1%} (need >=+5 pp)",
        )

    def test_criterion_07_mixed_style_shifts(self, arts):
        base = load_report(arts.eval_mixed_base)
        aggr = load_report(arts.eval_mixed_aggressive)
        cons = load_report(arts.eval_mixed_conservative)
        d_aggr = aggr.proportion_le_threshold - base.proportion_le_threshold
        d_cons = cons.proportion_gt_threshold - base.proportion_gt_threshold
        ok = d_aggr >= 0.08 and d_cons >= 0.08
        check_criterion(
            7, ok,
            f"aggressive <=40 m {d_aggr:+.1%}, conservative >40 m {d_cons:+.1%} "
            f"(both need >=+8 pp)",
        )

    def test_criterion_08_greedy_onset_ordering(self, arts):
        onsets = json.loads(Path(arts.greedy_onsets).read_text())
        keys = ("ft_obstacle_conservative", "base_obstacle", "ft_obstacle_aggressive")
        usable = [
            seed for seed in range(50)
            if all(onsets[k][seed] is not None for k in keys)
        ]
        medians = {
            k: float(np.median([onsets[k][s] for s in usable])) for k in keys
        }
        ok = (
            len(usable) > 0
            and medians[keys[0]] < medians[keys[1]] < medians[keys[2]]
        )
        check_criterion(
            8, ok,
            f"median change onset conservative {medians[keys[0]]:.1f} s "
            f"< base {medians[keys[1]]:.1f} s "
            f"< aggressive {medians[keys[2]]:.1f} s "
            f"({len(usable)}/50 matched seeds)",
        )

    def test_criterion_10_finetune_freeze_contract(self, arts):
        base = json.loads(Path(arts.base_obstacle).read_text())["tensors"]
        failures = []
        for style in ("conservative", "aggressive"):
            tuned = json.loads(
                Path(getattr(arts, f"ft_obstacle_{style}")).read_text()
            )["tensors"]
            frozen_same = all(
                tuned[k] == base[k]
                for k in base
                if k.startswith(("linear_in.", "lstm."))
            )
            any_moved = any(
                tuned[k] != base[k]
                for k in base
                if not k.startswith(("linear_in.", "lstm."))
            )
            if not (frozen_same and any_moved):
                failures.append(style)
        check_criterion(
            10, not failures,
            "input/LSTM tensors bitwise equal to base, post-LSTM tensors moved "
            f"(both obstacle fine-tunes){'; failed: ' + ', '.join(failures) if failures else ''}",
        )


class TestStageDeterminism:
    def test_criterion_09_stage_reruns_byte_identical(self, tmp_path):
        mismatches = []

        def twice(stage, build):
            paths = []
            for k in (0, 1):
                p = tmp_path / f"{stage}{k}"
                build(p)
                paths.append(p)
            a, b = paths
            if a.is_dir():
                names = sorted(q.name for q in a.iterdir())
                same = names == sorted(q.name for q in b.iterdir()) and all(
                    (a / n).read_bytes() == (b / n).read_bytes() for n in names
                )
            else:
                same = a.read_bytes() == b.read_bytes()
            if not same:
                mismatches.append(stage)

        scenario = resolve_scenario("obstacle")

        def pretrain(path):
            policy = PolicyNet(obs_dim=15, seed=0)
            trainer = PpoTrainer(
                policy,
                PpoConfig(n_steps=16, batch_size=8, n_epochs=2, total_decision_steps=32),
                seed=0,
            )
            trainer.fit(lambda: LaneChangeEnv(scenario))
            save_policy_checkpoint(
                path, policy, config=trainer.config, trained_steps=trainer.steps,
                scenario_id=scenario.name, seed_lineage={"seed": 0},
            )

        twice("pretrain", pretrain)

        base = PolicyNet(obs_dim=15, seed=0)
        segments = None

        def collect(path):
            nonlocal segments
            segments = collect_segments(base, scenario, count=8, seed=5)
            store = SegmentStore(path)
            store.write_segments(segments, provenance={"seed": 5})
            pairs = sample_pairs([s.segment_id for s in segments], count=40, seed=6)
            store.write_pairs([p.to_dict() for p in pairs])
            oracle = StyleOracle("aggressive", noise=0.2, seed=7)
            by_id = {s.segment_id: s for s in segments}
            store.write_labels([oracle.label(p, by_id[p.left_id], by_id[p.right_id]).to_dict() for p in pairs])

        twice("prefs", collect)

        rng = np.random.default_rng(0)
        n = 24
        halves = rng.normal(size=(n // 2, 5, 15)) * 0.3
        X = np.concatenate([halves + 0.5, halves - 0.5])
        X = X.reshape(2, n // 2, 5, 15).transpose(1, 0, 2, 3).reshape(n, 5, 15)
        y = np.tile([1, 0], n // 2)

        def train_rm(path):
            clf = SequencePreferenceClassifier(lr=1e-2, max_epochs=5, seed=0)
            clf.fit(X, y)
            clf.save(path)

        twice("reward_model", train_rm)

        rm_path = tmp_path / "reward_model0"
        base_path = tmp_path / "pretrain0"

        def tune(path):
            ex.finetune(
                base_path, rm_path, scenario,
                PpoConfig(n_steps=16, batch_size=8, n_epochs=2, total_decision_steps=16),
                path, seed=0,
            )

        twice("finetune", tune)

        def evaluate(path):
            report = run_eval(
                base, scenario, episodes=5, seed=3, mode="stochastic", keep_traces=False
            )
            export_report(report, path)

        twice("evaluate", evaluate)

        check_criterion(
            9, not mismatches,
            "pretrain, segment store, pair labels, reward model, fine-tune, and "
            f"evaluation reruns byte-identical{'; mismatched: ' + ', '.join(mismatches) if mismatches else ''}",
        )
