import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from followsim.dtw import (Trajectory, case_name, dtw_exact,
                           dtw_fast, evaluate_run, read_run_log,
                           read_trajectory_csv, trajectories_from_records,
                           write_report)


def oracle_dtw(a, b):
    """Independent reference DP: plain loops, same tie-break contract
    (diagonal, then advance-j, then advance-i)."""
    a, b = np.atleast_2d(np.asarray(a, float)), np.atleast_2d(np.asarray(b, float))
    n, m = len(a), len(b)
    c = [[float(np.linalg.norm(a[i] - b[j])) for j in range(m)] for i in range(n)]
    D = [[math.inf] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                D[i][j] = c[0][0]
                continue
            best = math.inf
            if i > 0 and j > 0:
                best = min(best, D[i - 1][j - 1])
            if i > 0:
                best = min(best, D[i - 1][j])
            if j > 0:
                best = min(best, D[i][j - 1])
            D[i][j] = c[i][j] + best
    i, j, path = n - 1, m - 1, [(n - 1, m - 1)]
    while i > 0 or j > 0:
        diag = D[i - 1][j - 1] if i > 0 and j > 0 else math.inf
        left = D[i][j - 1] if j > 0 else math.inf
        up = D[i - 1][j] if i > 0 else math.inf
        best = min(diag, left, up)
        if diag == best:
            i, j = i - 1, j - 1
        elif left == best:
            j -= 1
        else:
            i -= 1
        path.append((i, j))
    path.reverse()
    return D[n - 1][m - 1], path, D


def smooth_walk(rng, k):
    v = np.cumsum(rng.normal(0, 0.08, (k, 2)), axis=0)
    return np.cumsum(v, axis=0)


def test_identical_sequences():
    a = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    r = dtw_exact(a, a)
    assert r.distance == 0.0
    assert r.path == [(0, 0), (1, 1), (2, 2)]
    assert r.mean_distance == 0.0


def test_single_point_pair():
    r = dtw_exact(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]))
    assert r.distance == 5.0
    assert r.mean_distance == 5.0
    assert r.path == [(0, 0)]


def test_three_point_example_against_oracle():
    a, b = [[0.0], [1.0], [2.0]], [[0.0], [2.0]]
    dist, path, D = oracle_dtw(a, b)
    assert dist == 1.0
    assert D[1][1] == 1.0 and D[2][1] == 1.0
    r = dtw_exact(a, b)
    assert r.distance == 1.0
    assert r.path == path == [(0, 0), (1, 0), (2, 1)]
    assert r.mean_distance == pytest.approx(1.0 / 3.0)


def test_exact_matches_oracle_on_random_pairs():
    rng = np.random.Generator(np.random.PCG64(11))
    for _ in range(25):
        a = rng.normal(0, 1, (int(rng.integers(1, 12)), 2))
        b = rng.normal(0, 1, (int(rng.integers(1, 12)), 2))
        dist, path, _ = oracle_dtw(a, b)
        r = dtw_exact(a, b)
        assert r.distance == pytest.approx(dist, abs=1e-9)
        assert r.path == path


def test_path_shape_invariants():
    rng = np.random.Generator(np.random.PCG64(4))
    a, b = rng.normal(0, 1, (9, 2)), rng.normal(0, 1, (13, 2))
    r = dtw_exact(a, b)
    assert r.path[0] == (0, 0) and r.path[-1] == (8, 12)
    for (i0, j0), (i1, j1) in zip(r.path, r.path[1:]):
        assert (i1 - i0, j1 - j0) in {(1, 0), (0, 1), (1, 1)}
    # pair distances re-derive bit-exactly from path and raw positions
    re_pairs = [float(np.linalg.norm(a[i] - b[j])) for i, j in r.path]
    assert re_pairs == r.pair_distances
    assert r.distance == sum(r.pair_distances)
    assert r.mean_distance == float(np.mean(r.pair_distances))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_symmetry_and_self_distance(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    a = rng.normal(0, 1, (int(rng.integers(1, 16)), 2))
    b = rng.normal(0, 1, (int(rng.integers(1, 16)), 2))
    assert dtw_exact(a, b).distance == pytest.approx(dtw_exact(b, a).distance, abs=1e-9)
    assert dtw_exact(a, a).distance == 0.0


def test_monotonicity_append_identical_tail():
    rng = np.random.Generator(np.random.PCG64(9))
    for _ in range(10):
        a = rng.normal(0, 1, (8, 2))
        b = rng.normal(0, 1, (6, 2))
        base = dtw_exact(a, b)
        tail = rng.normal(0, 1, (1, 2))
        grown = dtw_exact(np.vstack([a, tail]), np.vstack([b, tail]))
        assert grown.mean_distance <= max(base.pair_distances) + 1e-12


def test_fast_equals_exact_with_covering_radius():
    rng = np.random.Generator(np.random.PCG64(21))
    for _ in range(30):
        n, m = int(rng.integers(2, 40)), int(rng.integers(2, 40))
        a, b = rng.normal(0, 1, (n, 2)), rng.normal(0, 1, (m, 2))
        e, f = dtw_exact(a, b), dtw_fast(a, b, radius=max(n, m))
        assert f.distance == e.distance
        assert f.path == e.path


def test_fast_identical_sequences_radius_one():
    a = smooth_walk(np.random.Generator(np.random.PCG64(2)), 40)
    assert dtw_fast(a, a, radius=1).distance == 0.0


def test_fast_never_undershoots_and_mostly_matches():
    # approximation property at radius 1 over 100 smooth trajectory pairs
    rng = np.random.Generator(np.random.PCG64(42))
    equal = 0
    for _ in range(100):
        a = smooth_walk(rng, int(rng.integers(8, 65)))
        b = smooth_walk(rng, int(rng.integers(8, 65)))
        e, f = dtw_exact(a, b), dtw_fast(a, b, radius=1)
        assert f.distance >= e.distance - 1e-9
        equal += abs(f.distance - e.distance) < 1e-9
    assert equal >= 80


def test_fast_radius_validation():
    with pytest.raises(ValueError):
        dtw_fast(np.zeros((3, 2)), np.zeros((3, 2)), radius=-1)
    with pytest.raises(ValueError):
        dtw_exact(np.zeros((0, 2)), np.zeros((3, 2)))


def _records(drone_xy, target_xy, dt=0.05):
    out = []
    for k, (d, g) in enumerate(zip(drone_xy, target_xy)):
        out.append({"t": k * dt, "drone": {"p": [d[0], d[1], 4.0]},
                    "target": [g[0], g[1]]})
    return out


def test_evaluate_run_glued_and_offset():
    t = np.linspace(0, 3, 50)
    glued_target = np.stack([np.cos(t), np.sin(t)], axis=1)
    glued = evaluate_run(_records(glued_target, glued_target))
    assert glued.mean_distance == 0.0
    # constant offset perpendicular to the motion: the diagonal is optimal
    # and every matched pair costs exactly the offset norm
    target = np.stack([np.zeros_like(t), t], axis=1)
    offset = evaluate_run(_records(target + np.array([1.0, 0.0]), target))
    assert offset.mean_distance == pytest.approx(1.0, abs=1e-12)


def test_evaluate_run_missing_target_errors():
    recs = _records(np.zeros((3, 2)), np.zeros((3, 2)))
    recs[1]["target"] = None
    with pytest.raises(ValueError):
        evaluate_run(recs)


def test_evaluate_run_xyz_mode():
    t = np.linspace(0, 1, 10)
    target = np.stack([t, t], axis=1)
    rep = evaluate_run(_records(target, target), dims="xyz")
    assert rep.mean_distance == pytest.approx(4.0)  # constant altitude offset


def test_case_names():
    assert case_name("turtle", "fan", "bb", "no") == "turtle_fan_bb_no"
    assert case_name("apriltag", "fan", "dino", "o") == "apriltag_fan_dino_o"
    assert case_name("apriltag", "vtm", "node") == "apriltag_vtm_node"
    with pytest.raises(ValueError):
        case_name("", "fan", "bb", "no")


def test_trajectory_validation_and_resample():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, -1.0]), np.zeros((2, 2)))
    tr = Trajectory(np.array([0.0, 1.0]), np.array([[0.0, 0.0], [2.0, 2.0]]))
    rs = tr.resample(0.5)
    assert rs.points[1] == pytest.approx([1.0, 1.0])
    assert len(rs) == 3


def test_write_report_and_reread(tmp_path):
    t = np.linspace(0, 2, 30)
    target = np.stack([t, np.sin(t)], axis=1)
    drone = target + np.array([0.5, 0.0])
    dr = Trajectory(t, drone)
    tg = Trajectory(t, target)
    rep = dtw_fast(dr, tg, case_name="turtle_fan_bb_no")
    files = write_report(rep, dr, tg, tmp_path, base="case")
    data = json.loads((tmp_path / "case_report.json").read_text())
    assert data["case"] == "turtle_fan_bb_no"
    assert data["mean_distance"] == rep.mean_distance
    csv_tr = read_trajectory_csv(files["pairs"])
    assert len(csv_tr) == len(rep.path)


def test_run_log_roundtrip(tmp_path):
    from followsim.runner import RunLog

    log = RunLog({"type": "header", "seed": 1})
    log.records.append({"t": 0.0, "seq": 0, "drone": {"p": [0.1, 0.2, 4.0]},
                        "target": [0.0, 0.0], "status": "TRACKING", "events": []})
    p = tmp_path / "run.jsonl"
    log.save(p)
    header, records = read_run_log(p)
    assert header["seed"] == 1
    drone, target = trajectories_from_records(records)
    assert drone.points[0] == pytest.approx([0.1, 0.2])
