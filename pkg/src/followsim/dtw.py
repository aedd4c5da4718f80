"""Dynamic time warping over trajectory pairs: exact dynamic program,
multiresolution fast approximation, per-pair distances along the warp path,
and run-report generation.

The exact DP is the reference: Euclidean ground metric, cumulative cost,
backtracking that prefers the diagonal step on ties, then advancing the
second sequence, then the first.  The fast variant restricts the same DP to
a window projected from a coarsened solution, so its distance can never
undershoot the exact one and matches it exactly once the window covers the
full matrix.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist


@dataclass
class Trajectory:
    """Time-stamped positions in a common world frame."""

    times: np.ndarray
    points: np.ndarray    # (n, dims)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] < 1:
            raise ValueError("trajectory needs at least one sample")
        if self.times.shape[0] != self.points.shape[0]:
            raise ValueError("times and points must have equal length")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("timestamps must be nondecreasing")

    def __len__(self) -> int:
        return self.points.shape[0]

    def resample(self, dt: float) -> "Trajectory":
        """Linear-interpolation resampling onto a uniform time grid."""
        if dt <= 0:
            raise ValueError("dt must be > 0")
        t0, t1 = self.times[0], self.times[-1]
        grid = np.arange(t0, t1 + dt / 2, dt)
        cols = [np.interp(grid, self.times, self.points[:, k])
                for k in range(self.points.shape[1])]
        return Trajectory(grid, np.stack(cols, axis=1))


@dataclass
class DtwReport:
    distance: float
    path: list[tuple[int, int]]
    pair_distances: list[float]
    mean_distance: float
    case_name: str | None = None


def _positions(traj) -> np.ndarray:
    if isinstance(traj, Trajectory):
        return traj.points
    pts = np.atleast_2d(np.asarray(traj, dtype=float))
    if pts.shape[0] == 1 and pts.shape[1] > 1 and np.ndim(traj) == 1:
        pts = pts.T   # 1-D sequence given as a flat list
    return pts


def _accumulate(cost: np.ndarray, allowed: np.ndarray | None = None) -> np.ndarray:
    """Cumulative DTW matrix, vectorized over anti-diagonals."""
    n, m = cost.shape
    acc = np.full((n, m), np.inf)
    if allowed is not None and not allowed[0, 0]:
        raise ValueError("window must contain the start cell")
    acc[0, 0] = cost[0, 0]
    for k in range(1, n + m - 1):
        i0, i1 = max(0, k - (m - 1)), min(n - 1, k)
        ii = np.arange(i0, i1 + 1)
        jj = k - ii
        diag = np.full(ii.size, np.inf)
        up = diag.copy()
        left = diag.copy()
        sel = (ii > 0) & (jj > 0)
        diag[sel] = acc[ii[sel] - 1, jj[sel] - 1]
        sel = ii > 0
        up[sel] = acc[ii[sel] - 1, jj[sel]]
        sel = jj > 0
        left[sel] = acc[ii[sel], jj[sel] - 1]
        best = np.minimum(np.minimum(diag, up), left)
        vals = cost[ii, jj] + best
        if allowed is not None:
            vals = np.where(allowed[ii, jj], vals, np.inf)
        acc[ii, jj] = vals
    return acc


def _backtrack(acc: np.ndarray) -> list[tuple[int, int]]:
    """Warp path from the cumulative matrix; ties prefer diagonal, then
    advancing j, then advancing i."""
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        diag = acc[i - 1, j - 1] if i > 0 and j > 0 else np.inf
        left = acc[i, j - 1] if j > 0 else np.inf
        up = acc[i - 1, j] if i > 0 else np.inf
        best = min(diag, left, up)
        if diag == best:
            i, j = i - 1, j - 1
        elif left == best:
            j = j - 1
        else:
            i = i - 1
        path.append((i, j))
    path.reverse()
    return path


def _report(a_pts: np.ndarray, b_pts: np.ndarray, path: list[tuple[int, int]],
            case_name: str | None) -> DtwReport:
    pairs = [float(np.linalg.norm(a_pts[i] - b_pts[j])) for i, j in path]
    return DtwReport(distance=float(sum(pairs)), path=path, pair_distances=pairs,
                     mean_distance=float(np.mean(pairs)), case_name=case_name)


def dtw_exact(a, b, case_name: str | None = None) -> DtwReport:
    """Full O(n*m) dynamic program with Euclidean ground metric."""
    a_pts, b_pts = _positions(a), _positions(b)
    if a_pts.shape[0] == 0 or b_pts.shape[0] == 0:
        raise ValueError("trajectories must be nonempty")
    cost = cdist(a_pts, b_pts)
    acc = _accumulate(cost)
    path = _backtrack(acc)
    return _report(a_pts, b_pts, path, case_name)


def _halve(pts: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    even = pts[: n - n % 2]
    coarse = (even[0::2] + even[1::2]) / 2.0
    if n % 2:
        coarse = np.vstack([coarse, pts[-1:]])
    return coarse


def _expand_window(path: list[tuple[int, int]], n: int, m: int, radius: int) -> np.ndarray:
    """Project a coarse path to fine resolution: inflate by radius in coarse
    cells, then upsample each coarse cell to its 2x2 fine block."""
    allowed = np.zeros((n, m), dtype=bool)
    seen = set()
    for i, j in path:
        for di in range(-radius, radius + 1):
            for dj in range(-radius, radius + 1):
                seen.add((i + di, j + dj))
    for i, j in seen:
        fi, fj = 2 * i, 2 * j
        lo_i, hi_i = max(0, fi), min(n, fi + 2)
        lo_j, hi_j = max(0, fj), min(m, fj + 2)
        if lo_i < hi_i and lo_j < hi_j:
            allowed[lo_i:hi_i, lo_j:hi_j] = True
    return allowed


def dtw_fast(a, b, radius: int = 4, case_name: str | None = None) -> DtwReport:
    """FastDTW: recursive coarsening, windowed DP around the projected path.

    With radius >= max(len(a), len(b)) the window covers the whole matrix and
    the result equals dtw_exact, path included.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    a_pts, b_pts = _positions(a), _positions(b)
    if a_pts.shape[0] == 0 or b_pts.shape[0] == 0:
        raise ValueError("trajectories must be nonempty")
    path = _fast_path(a_pts, b_pts, radius)
    return _report(a_pts, b_pts, path, case_name)


def _fast_path(a_pts: np.ndarray, b_pts: np.ndarray, radius: int) -> list[tuple[int, int]]:
    n, m = a_pts.shape[0], b_pts.shape[0]
    if n < radius + 2 or m < radius + 2:
        return _backtrack(_accumulate(cdist(a_pts, b_pts)))
    coarse_path = _fast_path(_halve(a_pts), _halve(b_pts), radius)
    allowed = _expand_window(coarse_path, n, m, radius)
    acc = _accumulate(cdist(a_pts, b_pts), allowed)
    return _backtrack(acc)


# ---------------------------------------------------------------------------
# Run evaluation and reporting

def case_name(target: str, algorithm: str, modality: str,
              obstruction: str | None = None) -> str:
    """Join run-naming tokens, e.g. turtle_fan_bb_no; obstruction optional."""
    tokens = [target, algorithm, modality] + ([obstruction] if obstruction else [])
    out = []
    for tok in tokens:
        if not tok:
            raise ValueError("case-name tokens must be nonempty")
        out.append(str(tok).lower())
    return "_".join(out)


def read_run_log(path) -> tuple[dict, list[dict]]:
    """Read a run JSONL file into (header, records)."""
    header, records = None, []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("type") == "header":
                header = rec
            else:
                records.append(rec)
    return header or {}, records


def trajectories_from_records(records: list[dict], dims: str = "xy"
                              ) -> tuple[Trajectory, Trajectory]:
    """Extract (drone, target) trajectories from per-tick records."""
    if dims not in ("xy", "xyz"):
        raise ValueError("dims must be 'xy' or 'xyz'")
    times, drone, target = [], [], []
    for rec in records:
        if rec.get("target") is None:
            raise ValueError("log is missing target ground truth")
        times.append(rec["t"])
        p = rec["drone"]["p"]
        g = rec["target"]
        if dims == "xy":
            drone.append(p[:2])
            target.append(g[:2])
        else:
            drone.append(p[:3])
            target.append([g[0], g[1], 0.0])  # targets live on the ground plane
    return (Trajectory(np.array(times), np.array(drone)),
            Trajectory(np.array(times), np.array(target)))


def read_trajectory_csv(path) -> Trajectory:
    """Two-column x,y CSV (optional leading t column, header rows skipped)."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                continue
    if not rows:
        raise ValueError(f"no numeric rows in {path}")
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] >= 3:
        return Trajectory(arr[:, 0], arr[:, 1:3])
    return Trajectory(np.arange(arr.shape[0], dtype=float), arr[:, :2])


def evaluate_run(log, dims: str = "xy", resample_dt: float | None = None,
                 radius: int = 4, case: str | None = None) -> DtwReport:
    """Compare drone-vs-target trajectories of a run with fast DTW."""
    if isinstance(log, (str, Path)):
        _, records = read_run_log(log)
    else:
        records = list(log)
    drone, target = trajectories_from_records(records, dims)
    if resample_dt is not None:
        drone, target = drone.resample(resample_dt), target.resample(resample_dt)
    return dtw_fast(drone, target, radius=radius, case_name=case)


def write_report(report: DtwReport, drone: Trajectory, target: Trajectory,
                 out_dir, base: str = "dtw") -> dict:
    """Write report JSON, per-pair CSV, and plot-data CSV; returns file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / f"{base}_report.json",
        "pairs": out / f"{base}_pair_distances.csv",
        "plot": out / f"{base}_plot_data.csv",
    }
    with open(paths["report"], "w", encoding="utf-8") as fh:
        json.dump({"case": report.case_name, "distance": report.distance,
                   "mean_distance": report.mean_distance,
                   "path_len": len(report.path)}, fh, indent=2)
        fh.write("\n")
    with open(paths["pairs"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "i", "j", "distance"])
        for k, ((i, j), d) in enumerate(zip(report.path, report.pair_distances)):
            w.writerow([k, i, j, repr(d)])
    with open(paths["plot"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "i", "x", "y", "x2", "y2"])
        for i, p in enumerate(drone.points):
            w.writerow(["drone", i, repr(float(p[0])), repr(float(p[1])), "", ""])
        for j, p in enumerate(target.points):
            w.writerow(["target", j, repr(float(p[0])), repr(float(p[1])), "", ""])
        for i, j in report.path:
            a, b = drone.points[i], target.points[j]
            w.writerow(["match", i, repr(float(a[0])), repr(float(a[1])),
                        repr(float(b[0])), repr(float(b[1]))])
    return {k: str(v) for k, v in paths.items()}
