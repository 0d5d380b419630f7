"""End-to-end acceptance gate.

Each test prints one ACCEPT line so a suite run with ``pytest -s`` reads as
a checklist.  Tolerances are pinned here on purpose; loosening them is a
behavior change, not a test fix.
"""

import json
import math
import time
from contextlib import contextmanager

import numpy as np

from momentum_planning.cli import main
from momentum_planning.curation import SampleRecord, curate
from momentum_planning.interactor import (
    QueryBatch,
    WeightBundle,
    cross_attention,
    mix_history,
    mpi_forward,
    plan_head,
    softmax,
    trajectory_sq_loss_and_grads,
)
from momentum_planning.matching import (
    DistanceKind,
    TrajectorySet,
    hausdorff,
    ttm_select,
)
from momentum_planning.metrics import (
    LossWeights,
    ObstacleBox,
    boxes_overlap,
    combined_losses,
    focal_loss,
    tpc,
)
from momentum_planning.simulator import (
    RunSettings,
    ScenarioSpec,
    log_to_jsonl,
    run_closed_loop,
)
from momentum_planning.trajectory import (
    OverlapMask,
    Pose2,
    Trajectory,
    overlap_mask,
    relative_pose,
    rotation_matrix,
    transform_from_frame,
    transform_to_frame,
)

from helpers import fd_grad, max_rel_err


@contextmanager
def criterion(number, description):
    try:
        yield
    except BaseException:
        print(f"ACCEPT {number:02d}: FAIL - {description}")
        raise
    print(f"ACCEPT {number:02d}: PASS - {description}")


# ---------------------------------------------------------------------------
# 1-2: distance foundations


def brute_hausdorff(a, b):
    def directed(p, q):
        worst = 0.0
        for x1, y1 in p:
            best = math.inf
            for x2, y2 in q:
                dx, dy = x1 - x2, y1 - y2
                d = math.sqrt(dx * dx + dy * dy)
                if d < best:
                    best = d
            if best > worst:
                worst = best
        return worst

    return max(directed(a, b), directed(b, a))


def test_hausdorff_equals_brute_force():
    with criterion(1, "hausdorff matches the brute-force loop exactly on 1000 pairs in under 5 s"):
        rng = np.random.default_rng(101)
        start = time.perf_counter()
        for _ in range(1000):
            a = rng.uniform(-50.0, 50.0, size=(int(rng.integers(2, 26)), 2))
            b = rng.uniform(-50.0, 50.0, size=(int(rng.integers(2, 26)), 2))
            assert hausdorff(a, b) == brute_hausdorff(a, b)
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f} s"


def test_hausdorff_metric_axioms():
    with criterion(2, "hausdorff is a metric on 1000 triples (triangle slack 1e-9)"):
        rng = np.random.default_rng(202)
        for _ in range(1000):
            a, b, c = (
                rng.uniform(-20.0, 20.0, size=(int(rng.integers(2, 11)), 2))
                for _ in range(3)
            )
            dab, dba = hausdorff(a, b), hausdorff(b, a)
            assert dab >= 0.0
            assert dab == dba
            assert hausdorff(a, a) == 0.0
            assert hausdorff(a, c) <= dab + hausdorff(b, c) + 1e-9


# ---------------------------------------------------------------------------
# 3: selection invariance


def _compose_world_motion(delta: Pose2, motion: Pose2) -> Pose2:
    """Pose d' with to_frame(p, d') == from_frame(to_frame(p, d), motion)."""
    rot = delta.rotation @ motion.rotation.T
    trans = (
        delta.translation @ delta.rotation @ motion.rotation.T - motion.translation
    ) @ rot.T
    return Pose2(rot, trans)


def test_selection_invariant_under_rigid_motion():
    with criterion(3, "shape-based selection is invariant under rigid motions, 500/500 cases"):
        rng = np.random.default_rng(303)
        agree = 0
        for case in range(500):
            kind = DistanceKind.HAUSDORFF if case % 2 == 0 else DistanceKind.MEAN_EUCLIDEAN
            k = int(rng.integers(2, 8))
            n = int(rng.integers(4, 13))
            cands = TrajectorySet(
                tuple(Trajectory(rng.uniform(-10, 10, (n, 2))) for _ in range(k)),
                rng.uniform(0.0, 1.0, k),
                rng.normal(size=(k, 4)),
            )
            history = Trajectory(rng.uniform(-10, 10, (int(rng.integers(4, 13)), 2)))
            delta = Pose2.from_heading(rng.uniform(-math.pi, math.pi), rng.uniform(-5, 5, 2))
            base = ttm_select(cands, history, delta, kind)

            motion = Pose2.from_heading(rng.uniform(-math.pi, math.pi), rng.uniform(-30, 30, 2))
            moved_history = transform_from_frame(history, motion)
            agree += (
                ttm_select(cands, moved_history, _compose_world_motion(delta, motion), kind)
                == base
            )
        assert agree == 500


# ---------------------------------------------------------------------------
# 4-5: refinement stack


def test_forward_equals_staged_composition():
    with criterion(4, "the fused refinement forward is bit-identical to the staged one, 200 draws"):
        rng = np.random.default_rng(404)
        activations = ("identity", "relu", "tanh")
        for draw in range(200):
            d_q = int(rng.integers(3, 13))
            k = int(rng.integers(2, 7))
            n_t = int(rng.integers(3, 9))
            depth = int(rng.integers(1, 3))
            act = activations[draw % 3]
            w = WeightBundle.seeded(d_q, k, n_t, seed=int(rng.integers(0, 10_000)))
            hist = [
                QueryBatch(rng.normal(size=(k, d_q)), rng.normal(size=k))
                for _ in range(depth)
            ]
            query = rng.normal(size=d_q)
            feats = rng.normal(size=(k, d_q))

            fused_traj, fused_scores = mpi_forward(query, hist, feats, w, act)
            mixed = mix_history(hist, w, act)
            refined = cross_attention(query, mixed, mixed, w)
            staged_traj, staged_scores = plan_head(refined, feats, w)
            assert np.array_equal(fused_traj, staged_traj)
            assert np.array_equal(fused_scores, staged_scores)


def test_analytic_gradients_match_finite_differences():
    with criterion(5, "analytic gradients agree with central differences to 1e-4, 20 draws"):
        rng = np.random.default_rng(505)
        d_q, k, n_t = 8, 4, 6
        for draw in range(20):
            depth = 1 + draw % 2
            w = WeightBundle.seeded(d_q, k, n_t, seed=int(rng.integers(0, 10_000)))
            hist = [
                QueryBatch(rng.normal(size=(k, d_q)), rng.normal(size=k))
                for _ in range(depth)
            ]
            query = rng.normal(size=d_q)
            feats = rng.normal(size=(k, d_q))

            _, grads = trajectory_sq_loss_and_grads(query, hist, feats, w)

            def loss_fn(bundle):
                value, _ = trajectory_sq_loss_and_grads(query, hist, feats, bundle)
                return value

            for name in w.names():
                numeric = fd_grad(loss_fn, w, name)
                err = max_rel_err(grads[name], numeric)
                assert err <= 1e-4, f"{name}: rel err {err:.2e} on draw {draw}"


# ---------------------------------------------------------------------------
# 6: softmax normalization


def test_softmax_normalizes_wide_logits():
    with criterion(6, "softmax output sums to 1 within 1e-12 for 10^4 logit vectors in [-50, 50]"):
        rng = np.random.default_rng(606)
        for _ in range(10_000):
            logits = rng.uniform(-50.0, 50.0, size=int(rng.integers(1, 17)))
            out = softmax(logits)
            assert abs(out.sum() - 1.0) <= 1e-12
            assert np.all(out >= 0.0)


# ---------------------------------------------------------------------------
# 7: consistency examples


def test_consistency_fixed_points():
    with criterion(7, "consistency is 0 for a re-planned path, 1.0 for a unit offset, sqrt(1.8) for one 3 m outlier"):
        # same world-frame plan seen from two consecutive ego poses
        world = np.column_stack([2.0 * np.arange(8.0), 0.05 * np.arange(8.0) ** 2])
        prev_pose = Pose2.from_heading(0.2, (3.0, 1.0))
        cur_pose = Pose2.from_heading(0.5, (5.0, 2.0))
        prev_pred = transform_to_frame(Trajectory(world[1:7]), prev_pose)
        cur_pred = transform_to_frame(Trajectory(world[2:8]), cur_pose)
        delta = relative_pose(prev_pose, cur_pose)
        mask = overlap_mask(cur_pred, prev_pred, 1)
        value = tpc(cur_pred, prev_pred, delta, mask)
        assert value <= 1e-12

        # constant unit offset across the whole overlap
        prev_pts = np.column_stack([np.arange(6.0), np.zeros(6)])
        cur_pts = prev_pts[1:] + np.array([0.6, 0.8])
        unit = tpc(
            Trajectory(cur_pts),
            Trajectory(prev_pts),
            Pose2.identity(),
            OverlapMask(np.ones(5, dtype=bool)),
        )
        assert abs(unit - 1.0) <= 1e-12

        # one 3 m outlier among five matched waypoints
        cur_out = prev_pts[1:].copy()
        cur_out[2] += np.array([0.0, 3.0])
        outlier = tpc(
            Trajectory(cur_out),
            Trajectory(prev_pts),
            Pose2.identity(),
            OverlapMask(np.ones(5, dtype=bool)),
        )
        assert abs(outlier - math.sqrt(1.8)) <= 1e-12


# ---------------------------------------------------------------------------
# 8: collision test vs sampling


def _box_samples(box: ObstacleBox, per_edge: int) -> np.ndarray:
    corners = box.corners()
    chunks = [corners, np.array([list(box.center)])]
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        ts = np.linspace(0.0, 1.0, per_edge, endpoint=False)[1:, None]
        chunks.append(a + ts * (b - a))
    return np.vstack(chunks)


def _max_signed_depth(points: np.ndarray, box: ObstacleBox) -> float:
    rel = (points - np.array(box.center)) @ rotation_matrix(box.heading)
    inset = np.minimum(
        box.length / 2.0 - np.abs(rel[:, 0]),
        box.width / 2.0 - np.abs(rel[:, 1]),
    )
    return float(inset.max())


def test_box_overlap_matches_sampling_oracle():
    with criterion(8, "box overlap agrees with a 10^4-point sampling oracle on 1000 pairs (1e-3 guard band)"):
        rng = np.random.default_rng(808)
        checked = disagreements = 0
        for _ in range(1000):
            a = ObstacleBox(
                tuple(rng.uniform(-4.0, 4.0, 2)),
                float(rng.uniform(-math.pi, math.pi)),
                float(rng.uniform(0.5, 5.0)),
                float(rng.uniform(0.5, 5.0)),
            )
            b = ObstacleBox(
                tuple(rng.uniform(-4.0, 4.0, 2)),
                float(rng.uniform(-math.pi, math.pi)),
                float(rng.uniform(0.5, 5.0)),
                float(rng.uniform(0.5, 5.0)),
            )
            samples_a = _box_samples(a, per_edge=1250)
            samples_b = _box_samples(b, per_edge=1250)
            signed = max(
                _max_signed_depth(samples_a, b), _max_signed_depth(samples_b, a)
            )
            if abs(signed) <= 1e-3:
                continue
            checked += 1
            disagreements += boxes_overlap(a, b) != (signed > 0.0)
        assert checked >= 900, f"only {checked} pairs fell outside the guard band"
        assert disagreements == 0


# ---------------------------------------------------------------------------
# 9: the turning study


def _turn_spec(seed):
    return ScenarioSpec(
        "arc_turn", duration_s=4.0, speed_mps=5.0, radius_m=20.0,
        angle_rad=math.pi / 2.0, seed=seed,
    )


def _sign_test_p(wins, losses):
    n = wins + losses
    return sum(math.comb(n, i) for i in range(wins, n + 1)) / 2.0**n


def test_momentum_planner_is_more_consistent_on_turns():
    with criterion(9, "momentum beats one-shot on turn consistency over 50 paired seeds (sign test p < 0.01, under 60 s)"):
        momentum = RunSettings(planner="momentum", history_depth=1)
        oneshot = RunSettings(planner="oneshot", history_depth=0)
        start = time.perf_counter()
        m_vals, o_vals = [], []
        for seed in range(50):
            spec = _turn_spec(seed)
            _, rep_m = run_closed_loop(spec, momentum)
            _, rep_o = run_closed_loop(spec, oneshot)
            m_vals.append(rep_m.tpc[3.0])
            o_vals.append(rep_o.tpc[3.0])
        elapsed = time.perf_counter() - start

        wins = sum(m < o for m, o in zip(m_vals, o_vals))
        losses = sum(m > o for m, o in zip(m_vals, o_vals))
        p = _sign_test_p(wins, losses)
        assert math.fsum(m_vals) / 50 < math.fsum(o_vals) / 50
        assert p < 0.01, f"wins {wins}, losses {losses}, p {p:.3g}"
        assert elapsed < 60.0, f"took {elapsed:.1f} s"


# ---------------------------------------------------------------------------
# 10: why sup-inf distance for matching


def test_distance_choice_decides_density_skewed_match():
    with criterion(10, "sup-inf matching rejects a single large deviation that mean matching accepts"):
        r, n = 10.0, 12
        angles = np.linspace(0.0, math.pi / 2.0, n)
        arc = np.column_stack([r * np.sin(angles), r * (1.0 - np.cos(angles))])
        radial = (arc - np.array([0.0, r])) / r

        uniform_offset = arc + 0.5 * radial
        one_outlier = arc.copy()
        one_outlier[-1] += 2.5 * radial[-1]

        history = Trajectory(arc)
        cands = TrajectorySet(
            (Trajectory(uniform_offset), Trajectory(one_outlier)),
            np.array([0.5, 0.5]),
            np.zeros((2, 4)),
        )
        picked_h = ttm_select(cands, history, Pose2.identity(), DistanceKind.HAUSDORFF)
        picked_e = ttm_select(cands, history, Pose2.identity(), DistanceKind.MEAN_EUCLIDEAN)
        assert picked_h == 0
        assert picked_e == 1


# ---------------------------------------------------------------------------
# 11: history depth semantics


def test_history_depth_zero_and_one():
    with criterion(11, "depth 0 reproduces the one-shot log bit for bit; depth 1 never hurts mean consistency"):
        for seed in (0, 7, 21):
            spec = _turn_spec(seed)
            log_zero, _ = run_closed_loop(spec, RunSettings(planner="momentum", history_depth=0))
            log_one_shot, _ = run_closed_loop(spec, RunSettings(planner="oneshot", history_depth=0))
            assert (
                log_to_jsonl(log_zero).splitlines()[1:]
                == log_to_jsonl(log_one_shot).splitlines()[1:]
            )

        depth0 = RunSettings(planner="momentum", history_depth=0)
        depth1 = RunSettings(planner="momentum", history_depth=1)
        tpc0, tpc1 = [], []
        for seed in range(1000, 1030):
            spec = _turn_spec(seed)
            _, rep0 = run_closed_loop(spec, depth0)
            _, rep1 = run_closed_loop(spec, depth1)
            tpc0.append(rep0.tpc[3.0])
            tpc1.append(rep1.tpc[3.0])
        assert math.fsum(tpc1) / 30 <= math.fsum(tpc0) / 30


# ---------------------------------------------------------------------------
# 12: curation


def _drift_sample(sample_id, scene_id, drift):
    xs = np.linspace(0.0, drift, 6)
    ys = np.linspace(0.0, 12.0, 6)
    return SampleRecord(sample_id, scene_id, Trajectory(np.column_stack([xs, ys]), dt=0.5))


def test_curation_matches_brute_force():
    with criterion(12, "scene curation matches the brute-force filter on 1000 samples, default threshold 25 m, monotone in the threshold"):
        rng = np.random.default_rng(1212)
        pool = [
            _drift_sample(f"s{i:04d}", f"scene{int(rng.integers(0, 120)):03d}", float(rng.uniform(0.0, 50.0)))
            for i in range(998)
        ]
        pool.append(_drift_sample("edge_hi", "edge_hi_scene", 25.0))
        pool.append(_drift_sample("edge_lo", "edge_lo_scene", 24.999))

        kept_default = curate(pool)
        turning = {
            s.scene_id
            for s in pool
            if abs(s.gt_future.points[5, 0] - s.gt_future.points[0, 0]) >= 25.0
        }
        expected = [s for s in pool if s.scene_id in turning]
        assert [s.sample_id for s in kept_default] == [s.sample_id for s in expected]
        kept_ids = {s.sample_id for s in kept_default}
        assert "edge_hi" in kept_ids and "edge_lo" not in kept_ids

        previous = None
        for eps in (5.0, 15.0, 25.0, 40.0):
            ids = {s.sample_id for s in curate(pool, eps)}
            oracle_scenes = {
                s.scene_id
                for s in pool
                if abs(s.gt_future.points[5, 0] - s.gt_future.points[0, 0]) >= eps
            }
            assert ids == {s.sample_id for s in pool if s.scene_id in oracle_scenes}
            if previous is not None:
                assert ids <= previous
            previous = ids


# ---------------------------------------------------------------------------
# 13: replay closure through the command line


def test_replayed_metrics_are_byte_identical(tmp_path):
    with criterion(13, "metrics recomputed from saved logs are byte-identical to the run's metrics for 10 random configs"):
        rng = np.random.default_rng(1313)
        kinds = ["straight", "arc_turn", "s_curve"]
        for i in range(10):
            scenario = {
                "kind": kinds[int(rng.integers(0, 3))],
                "duration_s": float(rng.choice([1.5, 2.0, 2.5])),
                "speed_mps": float(rng.choice([4.0, 5.0, 8.0])),
                "radius_m": float(rng.choice([12.0, 20.0])),
                "seed": int(rng.integers(0, 1000)),
            }
            settings = {
                "planner": ["oneshot", "momentum"][int(rng.integers(0, 2))],
                "history_depth": int(rng.integers(0, 3)),
                "distance": ["hausdorff", "euclidean"][int(rng.integers(0, 2))],
                "protocol": ["vad", "uniad"][int(rng.integers(0, 2))],
                "ns": float(rng.choice([0.0, 0.1, 0.3])),
                "k": int(rng.choice([4, 6])),
            }
            cfg_path = tmp_path / f"cfg{i}.json"
            cfg_path.write_text(json.dumps({"scenario": scenario, "settings": settings}))
            out = tmp_path / f"out{i}"
            assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0

            seed = scenario["seed"]
            eval_out = tmp_path / f"eval{i}"
            assert main([
                "eval", "--log", str(out / f"run_seed{seed}.jsonl"), "--out", str(eval_out),
            ]) == 0
            run_bytes = (out / f"metrics_seed{seed}.csv").read_bytes()
            eval_bytes = (eval_out / f"run_seed{seed}.metrics.csv").read_bytes()
            assert run_bytes == eval_bytes


# ---------------------------------------------------------------------------
# 14: loss bookkeeping


def test_loss_fixed_points():
    with criterion(14, "combined losses hit 13.25 and 16.15 on unit terms; focal loss matches its closed form"):
        weights = LossWeights()
        l_two_task, l_full = combined_losses(
            (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0, 1.0), weights
        )
        assert abs(l_two_task - 13.25) <= 1e-12
        assert abs(l_full - 16.15) <= 1e-12

        value = focal_loss(0.5, 1)
        assert abs(value - 0.25 * 0.25 * math.log(2.0)) <= 1e-12
        assert abs(value - 0.0433217) <= 1e-6
