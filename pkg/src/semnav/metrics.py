"""Episode scoring: semantic accuracy, node-selection accuracy, collision
rate, success rate, and path efficiency, plus the grid-geodesic ground
truth they lean on.

Ground-truth shortest paths come from an A* search over a fine occupancy
grid inflated by (slightly less than) the robot clearance, followed by
line-of-sight shortcutting, so the reported geodesic never exceeds the best
achievable path by more than a couple of grid cells. Node-selection
oracles use a single-source distance field from the goal over the same
grid.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .simworld import World, clearance_to_obstacles

CELL = 0.1  # [m]
INFLATE = 0.27  # [m]; slightly under the 0.30 collision clearance on purpose

_SQRT2 = math.sqrt(2.0)
_NEIGHBORS = [(-1, -1, _SQRT2), (-1, 0, 1.0), (-1, 1, _SQRT2),
              (0, -1, 1.0), (0, 1, 1.0),
              (1, -1, _SQRT2), (1, 0, 1.0), (1, 1, _SQRT2)]


# ---------------------------------------------------------------------------
# occupancy grid and geodesics
# ---------------------------------------------------------------------------

class _Grid:
    def __init__(self, world: World, cell: float, inflate: float):
        xmin, ymin, xmax, ymax = world.bounds
        self.cell = cell
        self.x0 = xmin + cell / 2.0
        self.y0 = ymin + cell / 2.0
        self.nx = max(1, int(round((xmax - xmin) / cell)))
        self.ny = max(1, int(round((ymax - ymin) / cell)))
        xs = self.x0 + cell * np.arange(self.nx)
        ys = self.y0 + cell * np.arange(self.ny)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        clearance = np.minimum.reduce([
            pts[:, 0] - xmin, xmax - pts[:, 0], pts[:, 1] - ymin, ymax - pts[:, 1],
        ])
        for ob in world.obstacles:
            clearance = np.minimum(clearance, _obstacle_distance(ob, pts))
        self.free = (clearance > inflate).reshape(self.nx, self.ny)

    def index(self, p) -> tuple:
        i = int(round((p[0] - self.x0) / self.cell))
        j = int(round((p[1] - self.y0) / self.cell))
        return min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1)

    def center(self, ij) -> np.ndarray:
        return np.array([self.x0 + ij[0] * self.cell, self.y0 + ij[1] * self.cell])

    def nearest_free(self, p, max_radius: float = 0.6) -> Optional[tuple]:
        i0, j0 = self.index(p)
        if self.free[i0, j0]:
            return (i0, j0)
        r_cells = int(math.ceil(max_radius / self.cell))
        best = None
        for di in range(-r_cells, r_cells + 1):
            for dj in range(-r_cells, r_cells + 1):
                i, j = i0 + di, j0 + dj
                if 0 <= i < self.nx and 0 <= j < self.ny and self.free[i, j]:
                    d = di * di + dj * dj
                    if best is None or d < best[0]:
                        best = (d, (i, j))
        return None if best is None else best[1]


def _obstacle_distance(ob, pts: np.ndarray) -> np.ndarray:
    from .simworld import Circle, Polygon

    if isinstance(ob, Circle):
        return np.linalg.norm(pts - ob.center, axis=1) - ob.radius
    v = ob.vertices
    n = len(v)
    d = np.full(len(pts), np.inf)
    inside = np.ones(len(pts), dtype=bool)
    for k in range(n):
        a, b = v[k], v[(k + 1) % n]
        ab = b - a
        denom = float(ab @ ab)
        t = np.clip((pts - a) @ ab / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(pts))
        proj = a + t[:, None] * ab
        d = np.minimum(d, np.linalg.norm(pts - proj, axis=1))
        cross = ab[0] * (pts[:, 1] - a[1]) - ab[1] * (pts[:, 0] - a[0])
        inside &= cross >= 0
    return np.where(inside, 0.0, d)


_GRID_CACHE: dict = {}


def _grid_for(world: World, cell: float = CELL, inflate: float = INFLATE) -> _Grid:
    key = (id(world), cell, inflate)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = _Grid(world, cell, inflate)
    return _GRID_CACHE[key]


def _segment_free(world: World, a: np.ndarray, b: np.ndarray, inflate: float,
                  step_len: float) -> bool:
    length = float(np.linalg.norm(b - a))
    n = max(2, int(math.ceil(length / step_len)) + 1)
    for t in np.linspace(0.0, 1.0, n):
        if clearance_to_obstacles(world, a + t * (b - a)) <= inflate:
            return False
    return True


def grid_geodesic(world: World, start, goal, cell: float = CELL,
                  inflate: float = INFLATE) -> Optional[float]:
    """Length of a clearance-respecting shortest path, or None if cut off.

    A* over the inflated grid, then greedy line-of-sight shortcutting
    against the continuous clearance field, so the answer is within a
    couple of cells of the true geodesic rather than 8 percent over.
    """
    grid = _grid_for(world, cell, inflate)
    s = grid.nearest_free(start)
    g = grid.nearest_free(goal)
    if s is None or g is None:
        return None
    path = _astar(grid, s, g)
    if path is None:
        return None
    pts = [np.asarray(start, dtype=float)[:2]] + [grid.center(ij) for ij in path] \
        + [np.asarray(goal, dtype=float)[:2]]
    smooth = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _segment_free(world, pts[i], pts[j], inflate, cell / 2):
            j -= 1
        smooth.append(pts[j])
        i = j
    return float(sum(np.linalg.norm(b - a) for a, b in zip(smooth, smooth[1:])))


def _astar(grid: _Grid, s: tuple, g: tuple):
    def h(ij):
        di, dj = abs(ij[0] - g[0]), abs(ij[1] - g[1])
        return (max(di, dj) - min(di, dj)) + _SQRT2 * min(di, dj)

    open_heap = [(h(s), 0.0, s)]
    best = {s: 0.0}
    parent = {}
    while open_heap:
        f, cost, cur = heapq.heappop(open_heap)
        if cur == g:
            path = [cur]
            while cur in parent:
                cur = parent[cur]
                path.append(cur)
            return path[::-1]
        if cost > best.get(cur, math.inf):
            continue
        for di, dj, w in _NEIGHBORS:
            nxt = (cur[0] + di, cur[1] + dj)
            if not (0 <= nxt[0] < grid.nx and 0 <= nxt[1] < grid.ny):
                continue
            if not grid.free[nxt[0], nxt[1]]:
                continue
            ncost = cost + w * grid.cell
            if ncost < best.get(nxt, math.inf) - 1e-12:
                best[nxt] = ncost
                parent[nxt] = cur
                heapq.heappush(open_heap, (ncost + h(nxt) * grid.cell, ncost, nxt))
    return None


_FIELD_CACHE: dict = {}


def geodesic_field(world: World, goal, cell: float = CELL,
                   inflate: float = INFLATE):
    """Single-source grid distances from the goal to every free cell."""
    key = (id(world), round(goal[0], 3), round(goal[1], 3), cell, inflate)
    if key in _FIELD_CACHE:
        return _FIELD_CACHE[key]
    grid = _grid_for(world, cell, inflate)
    dist = np.full((grid.nx, grid.ny), np.inf)
    g = grid.nearest_free(goal)
    if g is not None:
        dist[g] = 0.0
        heap = [(0.0, g)]
        while heap:
            d, cur = heapq.heappop(heap)
            if d > dist[cur] + 1e-12:
                continue
            for di, dj, w in _NEIGHBORS:
                nxt = (cur[0] + di, cur[1] + dj)
                if not (0 <= nxt[0] < grid.nx and 0 <= nxt[1] < grid.ny):
                    continue
                if not grid.free[nxt[0], nxt[1]]:
                    continue
                nd = d + w * cell
                if nd < dist[nxt] - 1e-12:
                    dist[nxt] = nd
                    heapq.heappush(heap, (nd, nxt))
    out = (grid, dist)
    _FIELD_CACHE[key] = out
    return out


def field_distance(field, p) -> float:
    grid, dist = field
    ij = grid.nearest_free(p)
    if ij is None:
        return math.inf
    return float(dist[ij])


# ---------------------------------------------------------------------------
# per-metric computations
# ---------------------------------------------------------------------------

def _final_xy(record) -> np.ndarray:
    return np.array(record.final_pose[:2], dtype=float)


def compute_sa(records: Sequence, world: World) -> float:
    """Fraction of episodes ending within r_s of an instructed-label object."""
    if not records:
        raise ValueError("need at least one record")
    hits = 0
    for rec in records:
        final = _final_xy(rec)
        for obj in world.objects:
            if obj.label == rec.goal_label and \
                    float(np.linalg.norm(final - obj.position)) < rec.success_radius:
                hits += 1
                break
    return hits / len(records)


def compute_oracle_choice(candidates: Sequence, world: World, goal_xy) -> int:
    """Candidate minimizing (recorded travel cost + geodesic to the goal)."""
    if not candidates:
        raise ValueError("empty candidate set")
    fld = geodesic_field(world, goal_xy)
    best = None
    for c in sorted(candidates, key=lambda c: c["id"]):
        total = c["distance"] + field_distance(fld, c["position"][:2])
        if best is None or total < best[0] - 1e-12:
            best = (total, c["id"])
    return best[1]


def compute_gnsa(records: Sequence, world: World) -> float:
    """Pooled fraction of subgoal decisions matching the oracle choice."""
    goal = world.goal_object().position
    matches = 0
    total = 0
    for rec in records:
        for decision in rec.decisions:
            if decision["chosen"] is None:
                continue  # exhausted marker, not a node selection
            if not decision.get("candidates"):
                raise ValueError("decision log is missing its candidate set")
            oracle = compute_oracle_choice(decision["candidates"], world, goal)
            matches += int(decision["chosen"] == oracle)
            total += 1
    if total == 0:
        raise ValueError("no decisions to score")
    return matches / total


def per_trial_gnsa(record, world: World) -> Optional[float]:
    goal = world.goal_object().position
    matches, total = 0, 0
    for decision in record.decisions:
        if decision["chosen"] is None:
            continue
        oracle = compute_oracle_choice(decision["candidates"], world, goal)
        matches += int(decision["chosen"] == oracle)
        total += 1
    return None if total == 0 else matches / total


def compute_oasr(records: Sequence) -> float:
    """Fraction of trials with zero collision events."""
    if not records:
        raise ValueError("need at least one record")
    clean = sum(1 for r in records if not r.collision_steps)
    return clean / len(records)


def compute_sr_spl(records: Sequence, world: World):
    """Success rate and success-weighted path efficiency.

    Returns (sr, spl, warnings). Episodes whose ground-truth geodesic is
    unavailable are excluded from the SPL mean with a warning but still
    count toward SR.
    """
    if not records:
        raise ValueError("need at least one record")
    goal = world.goal_object().position
    successes = 0
    terms = []
    warnings = []
    for rec in records:
        final = _final_xy(rec)
        s_i = float(np.linalg.norm(final - goal)) < rec.success_radius
        successes += int(s_i)
        start = np.array(rec.trajectory[0][:2], dtype=float)
        l_star = grid_geodesic(world, start, goal)
        if l_star is None:
            warnings.append(
                f"seed {rec.seed}: goal unreachable on the ground-truth grid; "
                "episode excluded from SPL")
            continue
        l_exec = rec.path_length()
        terms.append(float(s_i) * l_star / max(l_exec, l_star) if l_star > 0 else float(s_i))
    sr = successes / len(records)
    spl = sum(terms) / len(terms) if terms else 0.0
    return sr, spl, warnings


# ---------------------------------------------------------------------------
# batch report
# ---------------------------------------------------------------------------

@dataclass
class MetricReport:
    n: int
    sa: float
    gnsa: float
    oasr: float
    sr: float
    spl: float
    per_trial: dict = field(default_factory=dict)  # metric -> list of values
    warnings: list = field(default_factory=list)

    def summary(self) -> dict:
        out = {}
        for name, headline in [("sa", self.sa), ("gnsa", self.gnsa),
                               ("oasr", self.oasr), ("sr", self.sr), ("spl", self.spl)]:
            values = [v for v in self.per_trial.get(name, []) if v is not None]
            std = float(np.std(values)) if values else 0.0
            out[name] = {"mean": headline, "std": std}
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "metrics": self.summary(),
            "per_trial": self.per_trial,
            "warnings": self.warnings,
        }


def evaluate(records: Sequence, world: World) -> MetricReport:
    """Score a batch of episode records against one world."""
    sa = compute_sa(records, world)
    oasr = compute_oasr(records)
    sr, spl, warnings = compute_sr_spl(records, world)
    try:
        gnsa = compute_gnsa(records, world)
    except ValueError:
        gnsa = 0.0
        warnings = warnings + ["no decisions logged; GNSA reported as 0"]
    goal = world.goal_object().position
    per_trial = {"sa": [], "gnsa": [], "oasr": [], "sr": [], "spl": []}
    for rec in records:
        final = _final_xy(rec)
        sa_i = any(
            obj.label == rec.goal_label
            and float(np.linalg.norm(final - obj.position)) < rec.success_radius
            for obj in world.objects)
        per_trial["sa"].append(float(sa_i))
        per_trial["oasr"].append(0.0 if rec.collision_steps else 1.0)
        s_i = float(np.linalg.norm(final - goal)) < rec.success_radius
        per_trial["sr"].append(float(s_i))
        start = np.array(rec.trajectory[0][:2], dtype=float)
        l_star = grid_geodesic(world, start, goal)
        if l_star is None:
            per_trial["spl"].append(None)
        else:
            l_exec = rec.path_length()
            per_trial["spl"].append(
                float(s_i) * l_star / max(l_exec, l_star) if l_star > 0 else float(s_i))
        per_trial["gnsa"].append(per_trial_gnsa(rec, world))
    return MetricReport(n=len(records), sa=sa, gnsa=gnsa, oasr=oasr, sr=sr, spl=spl,
                        per_trial=per_trial, warnings=warnings)


def render_table(reports: dict) -> str:
    """Plain-text scene-by-metric table with mean +/- std percentages."""
    cols = ["sa", "gnsa", "oasr", "sr", "spl"]
    header = f"{'scene':<16}" + "".join(f"{c.upper():>16}" for c in cols)
    lines = [header, "-" * len(header)]
    for name in sorted(reports):
        rep = reports[name]
        summ = rep.summary()
        cells = "".join(
            f"{100 * summ[c]['mean']:>8.1f}±{100 * summ[c]['std']:>5.1f}% "
            for c in cols)
        lines.append(f"{name:<16}" + cells)
    return "\n".join(lines)
