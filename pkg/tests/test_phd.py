"""Identity-informed GM-PHD filter: prediction, association, update, lifecycle."""

import math

import numpy as np
import pytest

from bevtrack.config import TrackerConfig
from bevtrack.fusion import FusedCluster
from bevtrack.phd import (GaussianComponent, GmPhdTracker, MotionModel,
                          TrackState, kalman_update, soft_identity_scores)


def cluster(x, y, cov=0.2, conf=0.9, feature=None, pass_label="high", cls="pedestrian"):
    return FusedCluster(
        z=np.array([float(x), float(y)]), p_fused=cov * np.eye(2),
        r_pose=np.zeros((2, 2)), beta_max=conf, obj_class=cls,
        member_count=2, pass_label=pass_label,
        feature=None if feature is None else np.asarray(feature, dtype=float))


def make_tracker(**overrides) -> GmPhdTracker:
    return GmPhdTracker(TrackerConfig(**overrides))


def unit(vec):
    v = np.asarray(vec, dtype=float)
    return v / np.linalg.norm(v)


# --- motion model -------------------------------------------------------------


def test_mode_chain_rows_sum_to_one():
    motion = MotionModel(TrackerConfig())
    pi = motion.pi("pedestrian")
    np.testing.assert_allclose(pi.sum(axis=1), np.ones(3), atol=1e-9)
    np.testing.assert_allclose(np.diag(pi), [0.75, 0.94, 0.10])


def test_cv_transition_is_exact():
    motion = MotionModel(TrackerConfig(dt=0.5))
    m = np.array([0.0, 0.0, 2.0, 0.0])
    np.testing.assert_allclose(motion.f[2] @ m, [1.0, 0.0, 2.0, 0.0])


def test_maneuver_noise_dominates():
    motion = MotionModel(TrackerConfig())
    q2 = motion.q(2, "pedestrian")
    q3 = motion.q(3, "pedestrian")
    np.testing.assert_allclose(q3, 10.0 * q2, atol=1e-12)


# --- prediction -----------------------------------------------------------------


def test_predicted_self_mode_weight():
    tracker = make_tracker()
    tracker.components = [GaussianComponent(
        weight=1.0, mean=np.zeros(4), cov=np.eye(4), track_id=1, mode=2,
        obj_class="pedestrian")]
    tracker.predict()
    self_mode = [c for c in tracker.components if c.mode == 2]
    assert self_mode[0].weight == pytest.approx(0.99 * 0.94)


def test_prediction_splits_into_three_modes():
    tracker = make_tracker()
    tracker.components = [GaussianComponent(
        weight=0.8, mean=np.array([0.0, 0.0, 2.0, 0.0]), cov=np.eye(4),
        track_id=1, mode=2, obj_class="pedestrian")]
    tracker.predict()
    assert len(tracker.components) == 3
    assert sorted(c.mode for c in tracker.components) == [1, 2, 3]
    cv = next(c for c in tracker.components if c.mode == 2)
    np.testing.assert_allclose(cv.mean, [1.0, 0.0, 2.0, 0.0])


def test_predicted_mass_is_survival_times_weight():
    tracker = make_tracker()
    tracker.components = [GaussianComponent(
        weight=0.7, mean=np.zeros(4), cov=np.eye(4), track_id=1, mode=3,
        obj_class="pedestrian")]
    tracker.predict()
    total = sum(c.weight for c in tracker.components)
    assert total == pytest.approx(0.99 * 0.7, abs=1e-12)


# --- birth -----------------------------------------------------------------------


def test_birth_weights_follow_stationary_prior():
    tracker = make_tracker()
    c = cluster(3.0, -1.0, conf=0.8)
    tracker.spawn_births([c])
    weights = sorted((comp.mode, comp.weight) for comp in tracker.components)
    assert weights == [(1, pytest.approx(0.6)), (2, pytest.approx(0.1)),
                       (3, pytest.approx(0.1))]
    assert c.track_id is not None
    rec = tracker.records[c.track_id]
    assert rec.state is TrackState.TENTATIVE
    assert rec.hits == 1


def test_birth_requires_confidence():
    tracker = make_tracker()
    tracker.spawn_births([cluster(0, 0, conf=0.5)])
    assert tracker.components == []


def test_birth_requires_high_pass():
    tracker = make_tracker()
    tracker.spawn_births([cluster(0, 0, conf=0.9, pass_label="low")])
    assert tracker.components == []


def test_birth_velocity_prior_block():
    tracker = make_tracker()
    tracker.spawn_births([cluster(0, 0, conf=0.9)])
    cov = tracker.components[0].cov
    np.testing.assert_allclose(cov[2:, 2:], 1.0 * np.eye(2))
    np.testing.assert_allclose(cov[:2, 2:], np.zeros((2, 2)))


# --- identity assignment -----------------------------------------------------------


def seeded_tracker_with_track(x=0.0, y=0.0, tid=1, state=TrackState.CONFIRMED,
                              feature=None, vx=0.0, vy=0.0, **overrides):
    tracker = make_tracker(**overrides)
    tracker.components = [GaussianComponent(
        weight=0.9, mean=np.array([x, y, vx, vy]), cov=0.2 * np.eye(4),
        track_id=tid, mode=2, obj_class="pedestrian",
        feature=None if feature is None else np.asarray(feature, dtype=float))]
    from bevtrack.phd import TrackRecord
    tracker.records[tid] = TrackRecord(track_id=tid, obj_class="pedestrian",
                                       state=state, hits=3)
    tracker._next_id = tid + 1
    return tracker


def test_assign_single_gated_track():
    tracker = seeded_tracker_with_track(0, 0)
    c = cluster(0.05, 0.0)
    tracker.assign_identities([c], tracker.export_track_pool())
    assert c.track_id == 1
    assert c.soft_ids[1] == pytest.approx(1.0)


def test_assign_equidistant_tracks_split_soft_mass():
    tracker = seeded_tracker_with_track(-1.0, 0.0, tid=1)
    from bevtrack.phd import TrackRecord
    tracker.components.append(GaussianComponent(
        weight=0.9, mean=np.array([1.0, 0.0, 0.0, 0.0]), cov=0.2 * np.eye(4),
        track_id=2, mode=2, obj_class="pedestrian"))
    tracker.records[2] = TrackRecord(track_id=2, obj_class="pedestrian",
                                     state=TrackState.CONFIRMED, hits=3)
    c = cluster(0.0, 0.0)
    tracker.assign_identities([c], tracker.export_track_pool())
    assert c.soft_ids[1] == pytest.approx(0.5, abs=1e-9)
    assert c.soft_ids[2] == pytest.approx(0.5, abs=1e-9)


def test_assign_far_cluster_is_new():
    tracker = seeded_tracker_with_track(0, 0)
    c = cluster(50.0, 50.0)
    tracker.assign_identities([c], tracker.export_track_pool())
    assert c.track_id is None
    assert c.soft_ids == {}


def test_assign_empty_pool_all_new():
    tracker = make_tracker()
    cs = [cluster(0, 0), cluster(5, 5)]
    tracker.assign_identities(cs, [])
    assert all(c.track_id is None and c.soft_ids == {} for c in cs)


def test_soft_scores_sum_to_one_and_track_argmin():
    cfg = TrackerConfig()
    d2 = {1: 4.0, 2: 1.0, 3: 8.0}
    scores = soft_identity_scores(d2, hard_id=2, cfg=cfg)
    assert sum(scores.values()) == pytest.approx(1.0)
    assert max(scores, key=scores.get) == 2  # argmax matches argmin d^2


def test_soft_scores_gate():
    cfg = TrackerConfig()
    scores = soft_identity_scores({1: 4.0, 2: 20.0}, hard_id=1, cfg=cfg)
    assert set(scores) == {1}


# --- association cost ---------------------------------------------------------------


def test_cost_zero_innovation_identity_s():
    tracker = make_tracker()
    comp = GaussianComponent(weight=1.0, mean=np.zeros(4), cov=np.zeros((4, 4)),
                             track_id=1, mode=2, obj_class="pedestrian")
    c = cluster(0.0, 0.0, cov=1.0)
    base, d2 = tracker.nll_cost(comp, c)
    assert d2 == pytest.approx(0.0)
    assert base == pytest.approx(-math.log(0.9), abs=1e-9)
    assert base == pytest.approx(0.1054, abs=1e-4)


def test_cost_gated_out_beyond_chi2():
    tracker = make_tracker()
    comp = GaussianComponent(weight=1.0, mean=np.zeros(4), cov=np.zeros((4, 4)),
                             track_id=1, mode=2, obj_class="pedestrian")
    c = cluster(math.sqrt(10.0), 0.0, cov=1.0)  # d^2 = 10 > 9.21
    cost, d2 = tracker.association_cost(comp, c)
    assert d2 == pytest.approx(10.0)
    assert cost == math.inf


def test_turn_penalty_zero_for_stationary():
    tracker = make_tracker()
    comp = GaussianComponent(weight=1.0, mean=np.zeros(4), cov=np.zeros((4, 4)),
                             track_id=1, mode=1, obj_class="pedestrian")
    ahead = cluster(0.5, 0.0, cov=1.0)
    behind = cluster(-0.5, 0.0, cov=1.0)
    assert (tracker.association_cost(comp, ahead)[0]
            == pytest.approx(tracker.association_cost(comp, behind)[0]))


def test_turn_penalty_punishes_reversal():
    tracker = make_tracker(mu_sem=0.0, lambda_assoc=0.0)
    comp = GaussianComponent(
        weight=1.0, mean=np.array([0.0, 0.0, 2.0, 0.0]), cov=np.zeros((4, 4)),
        track_id=1, mode=2, obj_class="pedestrian")
    # pre-prediction position is (-1, 0); a measurement back at (-2, 0)
    # implies reversal, one at (0,0) implies continuing straight.
    forward = cluster(0.0, 0.0, cov=1.0)
    backward = cluster(-2.0, 0.0, cov=1.0)
    cost_fwd, _ = tracker.association_cost(comp, forward)
    cost_bwd, _ = tracker.association_cost(comp, backward)
    assert cost_bwd > cost_fwd


def test_appearance_term_reduces_cost():
    tracker = make_tracker()
    f = unit([1.0, 2.0, 3.0])
    comp = GaussianComponent(weight=1.0, mean=np.zeros(4), cov=np.zeros((4, 4)),
                             track_id=1, mode=2, obj_class="pedestrian", feature=f)
    same = cluster(0.0, 0.0, cov=1.0, feature=f)
    other = cluster(0.0, 0.0, cov=1.0, feature=unit([-1.0, -2.0, -3.0]))
    none = cluster(0.0, 0.0, cov=1.0)
    assert tracker.association_cost(comp, same)[0] < tracker.association_cost(comp, none)[0]
    assert tracker.association_cost(comp, none)[0] < tracker.association_cost(comp, other)[0]


# --- Kalman update -------------------------------------------------------------------


def test_joseph_update_zero_innovation_keeps_mean():
    mean = np.array([1.0, 2.0, 0.5, -0.5])
    cov = np.diag([1.0, 1.0, 0.5, 0.5])
    new_mean, new_cov = kalman_update(mean, cov, np.array([1.0, 2.0]), np.eye(2))
    np.testing.assert_allclose(new_mean, mean, atol=1e-12)
    assert new_cov[0, 0] == pytest.approx(0.5)


def test_joseph_form_psd_over_random_trials():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        a = rng.normal(size=(4, 4))
        cov = a @ a.T + 1e-6 * np.eye(4)
        b = rng.normal(size=(2, 2))
        r = b @ b.T + 1e-6 * np.eye(2)
        mean = rng.normal(size=4)
        z = rng.normal(size=2)
        _, post = kalman_update(mean, cov, z, r)
        assert np.linalg.eigvalsh(post).min() >= -1e-9


def test_posterior_position_trace_never_grows():
    rng = np.random.default_rng(321)
    h = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    for _ in range(200):
        a = rng.normal(size=(4, 4))
        cov = a @ a.T + 1e-6 * np.eye(4)
        b = rng.normal(size=(2, 2))
        r = b @ b.T + 1e-6 * np.eye(2)
        _, post = kalman_update(rng.normal(size=4), cov, rng.normal(size=2), r)
        assert np.trace(h @ post @ h.T) <= np.trace(h @ cov @ h.T) + 1e-9


# --- confirmed update -----------------------------------------------------------------


def test_update_confirmed_miss_penalty():
    tracker = seeded_tracker_with_track(0, 0)
    tracker.components[0].weight = 0.5
    report, claimed = tracker.update_confirmed([])
    assert report == {1: "miss"}
    assert claimed == set()
    assert tracker.components[0].weight == pytest.approx(0.05)


def test_update_confirmed_match_boost_and_joseph():
    tracker = seeded_tracker_with_track(0, 0)
    tracker.components[0].cov = np.diag([1.0, 1.0, 0.5, 0.5])
    tracker.components[0].weight = 0.5
    c = cluster(0.0, 0.0, cov=1.0)
    report, claimed = tracker.update_confirmed([c])
    assert report == {1: "hit"}
    assert claimed == {0}
    assert tracker.components[0].weight == pytest.approx(0.65)
    assert tracker.components[0].cov[0, 0] == pytest.approx(0.5)


def test_update_confirmed_weight_clamped_at_one():
    tracker = seeded_tracker_with_track(0, 0)
    tracker.components[0].weight = 0.95
    tracker.update_confirmed([cluster(0.0, 0.0)])
    assert tracker.components[0].weight == 1.0


def test_sibling_modes_take_miss_path():
    tracker = seeded_tracker_with_track(0, 0)
    tracker.components[0].weight = 0.6
    tracker.components.append(GaussianComponent(
        weight=0.4, mean=np.array([0.0, 0.0, 0.0, 0.0]), cov=0.2 * np.eye(4),
        track_id=1, mode=1, obj_class="pedestrian"))
    tracker.update_confirmed([cluster(0.0, 0.0)])
    by_mode = {c.mode: c.weight for c in tracker.components}
    assert by_mode[2] == pytest.approx(0.6 + 0.15)
    assert by_mode[1] == pytest.approx(0.4 * 0.1)


# --- tentative / lost update -------------------------------------------------------------


def test_tight_gate_blocks_update():
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.TENTATIVE)
    tracker.components[0].cov = np.zeros((4, 4))
    c = cluster(math.sqrt(5.0), 0.0, cov=1.0)  # d^2 = 5 in [4.61, 9.21)
    report = tracker.update_tentative_lost([c], claimed=set())
    assert report == {1: "miss"}


def test_lost_track_reidentifies_on_coincident_match():
    f = unit([1.0, 0.5, 0.2])
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.LOST, feature=f)
    tracker.records[1].feature = f
    c = cluster(0.0, 0.0, feature=f)
    report = tracker.update_tentative_lost([c], claimed=set())
    assert report == {1: "hit"}


def test_lost_track_keeps_weight_while_unmatched():
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.LOST)
    w0 = tracker.components[0].weight
    tracker.update_tentative_lost([], claimed=set())
    assert tracker.components[0].weight == w0


def test_spatial_only_reid_when_lambda_zero():
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.LOST, lambda_reid=0.0)
    near_wrong_feature = cluster(0.1, 0.0, feature=unit([1, 0, 0]))
    far_same_feature = cluster(1.3, 0.0, feature=unit([0, 1, 0]))
    tracker.records[1].feature = unit([0, 1, 0])
    report = tracker.update_tentative_lost([near_wrong_feature, far_same_feature],
                                           claimed=set())
    assert report == {1: "hit"}
    # purely spatial: the nearer cluster is claimed
    np.testing.assert_allclose(tracker.components[0].mean[:2],
                               near_wrong_feature.z, atol=0.2)


def test_lost_has_priority_over_fresh_birth():
    f = unit([0.3, 0.9, 0.1])
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.LOST, feature=f)
    tracker.records[1].feature = f
    c = cluster(0.1, 0.0, conf=0.9, feature=f)
    tracker.assign_identities([c], tracker.export_track_pool())
    assert c.track_id is None  # lost tracks are invisible to the pool
    tracker.spawn_births([c])
    birth_id = c.track_id
    report = tracker.update_tentative_lost([c], claimed=set())
    assert report[1] == "hit"
    assert report[birth_id] == "miss"


# --- prune / merge / collapse -------------------------------------------------------------


def test_prune_drops_low_weight_siblings():
    tracker = seeded_tracker_with_track(0, 0)
    tracker.components[0].weight = 0.5
    tracker.components.append(GaussianComponent(
        weight=0.04, mean=np.array([5.0, 5.0, 0.0, 0.0]), cov=np.eye(4),
        track_id=1, mode=1, obj_class="pedestrian"))
    tracker.prune_merge_collapse()
    assert len(tracker.components) == 1
    assert tracker.components[0].mode == 2


def test_merge_identical_components_sums_weight():
    tracker = seeded_tracker_with_track(0, 0)
    base = tracker.components[0]
    base.weight = 0.3
    twin = GaussianComponent(weight=0.3, mean=base.mean.copy(),
                             cov=base.cov.copy(), track_id=1, mode=2,
                             obj_class="pedestrian")
    tracker.components.append(twin)
    tracker.prune_merge_collapse()
    assert len(tracker.components) == 1
    merged = tracker.components[0]
    assert merged.weight == pytest.approx(0.6)
    np.testing.assert_allclose(merged.mean, base.mean, atol=1e-12)
    np.testing.assert_allclose(merged.cov, base.cov, atol=1e-12)


def test_collapse_keeps_max_weight_mode():
    tracker = seeded_tracker_with_track(0, 0)
    tracker.components = []
    for mode, w in ((1, 0.5), (2, 0.3), (3, 0.1)):
        tracker.components.append(GaussianComponent(
            weight=w, mean=np.array([mode * 10.0, 0.0, 0.0, 0.0]),
            cov=np.eye(4), track_id=1, mode=mode, obj_class="pedestrian"))
    tracker.prune_merge_collapse()
    assert len(tracker.components) == 1
    assert tracker.components[0].mode == 1


def test_each_live_id_keeps_exactly_one_component():
    tracker = make_tracker()
    rng = np.random.default_rng(0)
    from bevtrack.phd import TrackRecord
    for tid in range(1, 6):
        tracker.records[tid] = TrackRecord(track_id=tid, obj_class="pedestrian")
        for mode in (1, 2, 3):
            tracker.components.append(GaussianComponent(
                weight=float(rng.uniform(0.01, 1.0)),
                mean=rng.normal(size=4), cov=np.eye(4), track_id=tid,
                mode=mode, obj_class="pedestrian"))
    tracker.prune_merge_collapse()
    ids = [c.track_id for c in tracker.components]
    assert sorted(ids) == [1, 2, 3, 4, 5]


def test_component_cap_evicts_whole_tracks():
    tracker = make_tracker(j_max=3)
    from bevtrack.phd import TrackRecord
    for tid in range(1, 6):
        tracker.records[tid] = TrackRecord(track_id=tid, obj_class="pedestrian")
        tracker.components.append(GaussianComponent(
            weight=tid / 10.0, mean=np.zeros(4), cov=np.eye(4),
            track_id=tid, mode=2, obj_class="pedestrian"))
    tracker.prune_merge_collapse()
    assert sorted(c.track_id for c in tracker.components) == [3, 4, 5]
    assert sorted(tracker.records) == [3, 4, 5]


# --- lifecycle ----------------------------------------------------------------------------


def test_tentative_confirms_after_n_init_hits():
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.TENTATIVE)
    tracker.records[1].hits = 1
    tracker.lifecycle_step({1: "hit"})
    assert tracker.records[1].state is TrackState.CONFIRMED


def test_confirmed_lost_after_single_miss_default_config():
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.CONFIRMED)
    tracker.lifecycle_step({1: "miss"})
    assert tracker.records[1].state is TrackState.LOST


def test_hit_counter_decays_without_reset():
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.CONFIRMED,
                                        tau_confirmed=5)
    tracker.records[1].hits = 3
    tracker.lifecycle_step({1: "miss"})
    assert tracker.records[1].hits == 2
    assert tracker.records[1].state is TrackState.CONFIRMED


def test_tentative_deleted_after_tau_tent_misses():
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.TENTATIVE)
    tracker.lifecycle_step({1: "miss"})
    assert 1 in tracker.records
    tracker.lifecycle_step({1: "miss"})
    assert 1 not in tracker.records
    assert tracker.components == []


def test_lost_deleted_after_k_max():
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.LOST)
    for _ in range(2):
        tracker.lifecycle_step({1: "miss"})
        assert 1 in tracker.records
    tracker.lifecycle_step({1: "miss"})
    assert 1 not in tracker.records


def test_reid_restores_confirmed():
    tracker = seeded_tracker_with_track(0, 0, state=TrackState.LOST)
    tracker.records[1].lost_age = 1
    tracker.lifecycle_step({1: "hit"})
    assert tracker.records[1].state is TrackState.CONFIRMED
    assert tracker.records[1].lost_age == 0


# --- full step ------------------------------------------------------------------------------


def test_empty_frame_penalizes_without_births():
    tracker = seeded_tracker_with_track(0, 0)
    tracker.components[0].weight = 1.0
    n_ids = len(tracker.records)
    tracker.step([])
    assert len(tracker.records) <= n_ids
    assert all(c.weight <= 1.0 for c in tracker.components)


def test_single_target_confirms_and_keeps_one_id():
    tracker = make_tracker(p_d=0.99)
    seen_ids = set()
    for frame in range(10):
        outs = tracker.step([cluster(0.1 * frame, 0.0, conf=0.9)])
        for o in outs:
            seen_ids.add(o.track_id)
        if frame >= 2:
            assert len(outs) == 1
    assert len(seen_ids) == 1


def test_weights_stay_in_unit_interval():
    tracker = make_tracker()
    rng = np.random.default_rng(3)
    for frame in range(30):
        clusters = [cluster(rng.uniform(-5, 5), rng.uniform(-5, 5),
                            conf=float(rng.uniform(0.5, 1.0)))
                    for _ in range(rng.integers(0, 4))]
        tracker.step(clusters)
        for comp in tracker.components:
            assert 0.0 <= comp.weight <= 1.0


def test_crossing_targets_keep_ids_with_appearance():
    f1 = unit(np.concatenate([np.ones(8), np.zeros(8)]))
    f2 = unit(np.concatenate([np.zeros(8), np.ones(8)]))
    tracker = make_tracker()
    dt = tracker.cfg.dt
    id_at = {}
    for frame in range(16):
        t = frame * dt
        # two targets crossing at the origin around frame 8
        p1 = np.array([-4.0 + 1.0 * t, 0.0])
        p2 = np.array([4.0 - 1.0 * t, 0.05])
        outs = tracker.step([cluster(*p1, cov=0.1, feature=f1),
                             cluster(*p2, cov=0.1, feature=f2)])
        for o in outs:
            pos = np.array([o.x, o.y])
            key = 1 if np.linalg.norm(pos - p1) < np.linalg.norm(pos - p2) else 2
            id_at.setdefault(key, set()).add(o.track_id)
    assert len(id_at[1]) == 1
    assert len(id_at[2]) == 1
    assert id_at[1] != id_at[2]


def test_pool_export_representative_and_exclusions():
    tracker = seeded_tracker_with_track(0, 0)
    tracker.components.append(GaussianComponent(
        weight=0.95, mean=np.ones(4), cov=np.eye(4), track_id=1, mode=3,
        obj_class="pedestrian"))
    pool = tracker.export_track_pool()
    assert len(pool) == 1
    assert pool[0].mode == 3  # higher weight wins

    tracker.components[1].weight = tracker.components[0].weight
    pool = tracker.export_track_pool()
    assert pool[0].mode == 2  # tie broken toward the lower mode

    tracker.records[1].state = TrackState.LOST
    assert tracker.export_track_pool() == []


def test_empty_filter_exports_empty_pool():
    assert make_tracker().export_track_pool() == []


def test_stable_ids_under_injective_gating():
    tracker = make_tracker()
    paths = [np.array([-6.0, y]) for y in (-6.0, 0.0, 6.0)]
    vels = [np.array([1.0, 0.0])] * 3
    ids_per_target = [set(), set(), set()]
    for frame in range(20):
        clusters = []
        for p, v in zip(paths, vels):
            pos = p + v * frame * 0.5
            clusters.append(cluster(*pos, cov=0.1, conf=0.9))
        outs = tracker.step(clusters)
        if frame >= 2:
            assert len(outs) == 3
        for o in outs:
            pos = np.array([o.x, o.y])
            nearest = min(range(3), key=lambda i: np.linalg.norm(
                pos - (paths[i] + vels[i] * frame * 0.5)))
            ids_per_target[nearest].add(o.track_id)
    assert all(len(s) == 1 for s in ids_per_target)
