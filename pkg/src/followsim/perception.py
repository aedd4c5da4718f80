"""Synthetic perception: per-pixel descriptors, instance segmentation, region
pooling, query resolution, and cosine-similarity detection.

Descriptors are unit vectors.  Every pixel of an object carries its class
prototype plus seeded Gaussian noise; noise is a pure function of
(descriptor seed, frame seq, pixel index, dim) so any access pattern sees
identical values and whole runs stay bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import ndtri

_MIX1 = np.uint64(0x9E3779B97F4A7C15)
_MIX2 = np.uint64(0xBF58476D1CE4E5B9)
_MIX3 = np.uint64(0x94D049BB133111EB)


class QueryError(ValueError):
    """Raised when a query cannot be resolved against the frame's regions."""


def unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def _splitmix64(x) -> np.ndarray:
    # uint64 wrap-around is intentional here
    with np.errstate(over="ignore"):
        x = (np.asarray(x, dtype=np.uint64) + _MIX1).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(30))) * _MIX2).astype(np.uint64)
        x = ((x ^ (x >> np.uint64(27))) * _MIX3).astype(np.uint64)
        return x ^ (x >> np.uint64(31))


def _counter_normals(key: np.uint64, counters: np.ndarray) -> np.ndarray:
    """Standard normals addressed by counter: order-independent and replayable."""
    z = _splitmix64(_splitmix64(counters.astype(np.uint64)) ^ key)
    u = ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)
    return ndtri(u)


class _FrameStream(object):
    """Descriptor access for one frame (owns that frame's noise key)."""

    def __init__(self, model: "DescriptorModel", key: np.uint64):
        self.model = model
        self.key = key

    def _noise(self, flat_pixels: np.ndarray) -> np.ndarray:
        d = self.model.dim
        idx = flat_pixels.astype(np.uint64)[:, None] * np.uint64(d) + np.arange(d, dtype=np.uint64)
        return _counter_normals(self.key, idx)

    def values(self, frame, flat_pixels: np.ndarray) -> np.ndarray:
        protos = self.model.prototype_table[frame.class_map.ravel()[flat_pixels]]
        if self.model.sigma == 0.0:
            return protos
        return protos + self.model.sigma * self._noise(flat_pixels)

    def mean_over(self, frame, flat_pixels: np.ndarray) -> np.ndarray:
        return self.values(frame, flat_pixels).mean(axis=0)

    def at(self, frame, x: int, y: int) -> np.ndarray:
        flat = np.array([y * frame.width + x])
        return self.values(frame, flat)[0]

    def full_field(self, frame) -> np.ndarray:
        flat = np.arange(frame.width * frame.height)
        return self.values(frame, flat).reshape(frame.height, frame.width, self.model.dim)


class DescriptorModel:
    """Seeded class prototypes + per-pixel noise level.

    Random prototypes are regenerated with a bumped seed until all
    non-engineered pairs have |cos| < 0.5.  Engineered entries pin an exact
    prototype cosine against a base class (used to stage look-alike objects).
    """

    def __init__(self, class_ids, dim: int = 16, sigma: float = 0.05, seed: int = 0,
                 similar: list[dict] | None = None):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.dim = int(dim)
        self.sigma = float(sigma)
        self.seed = int(seed)
        similar = similar or []
        engineered = {int(s["class_id"]): (int(s["base"]), float(s["cosine"])) for s in similar}
        ids = sorted({0} | {int(c) for c in class_ids} | set(engineered))
        free = [c for c in ids if c not in engineered]

        protos = None
        s = self.seed
        for _ in range(64):
            rng = np.random.Generator(np.random.PCG64(s))
            cand = {c: unit(rng.standard_normal(self.dim)) for c in free}
            mat = np.stack([cand[c] for c in free])
            sims = mat @ mat.T
            np.fill_diagonal(sims, 0.0)
            if np.abs(sims).max(initial=0.0) < 0.5:
                protos = cand
                break
            s += 1
        if protos is None:
            raise ValueError("could not draw well-separated prototypes; raise dim")
        self.effective_seed = s

        rng = np.random.Generator(np.random.PCG64(s + 1))
        for cid, (base, cos_target) in engineered.items():
            if base not in protos:
                raise ValueError(f"similar class {cid} references unknown base {base}")
            w = rng.standard_normal(self.dim)
            w = unit(w - np.dot(w, protos[base]) * protos[base])
            protos[cid] = cos_target * protos[base] + np.sqrt(1 - cos_target ** 2) * w

        self.prototypes = protos
        table = np.zeros((max(ids) + 1, self.dim))
        for c, v in protos.items():
            table[c] = v
        self.prototype_table = table

    def prototype(self, class_id: int) -> np.ndarray:
        try:
            return self.prototypes[int(class_id)]
        except KeyError:
            raise KeyError(f"no prototype for class {class_id}") from None

    def pixel_descriptor(self, class_id: int, rng: np.random.Generator) -> np.ndarray:
        """One noisy pixel descriptor: normalize(prototype + sigma * eps)."""
        proto = self.prototype(class_id)
        if self.sigma == 0.0:
            return proto.copy()
        return unit(proto + self.sigma * rng.standard_normal(self.dim))

    def frame_stream(self, seq: int) -> _FrameStream:
        key = _splitmix64(np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF) ^ _splitmix64(np.uint64(seq + 1)))
        return _FrameStream(self, np.uint64(key))


# ---------------------------------------------------------------------------
# Masks and segmentation

_EIGHT = np.ones((3, 3), dtype=int)


@dataclass(eq=False)
class Mask:
    """Region as sorted flat pixel indices over an H x W grid.

    Masks are per-frame values compared by identity.
    """

    pixels: np.ndarray
    shape: tuple[int, int]
    instance_id: int = 0     # ground-truth id, used for logging/tests only

    def __post_init__(self):
        if self.pixels.size == 0:
            raise ValueError("mask must contain at least one pixel")
        h, w = self.shape
        ys, xs = np.divmod(self.pixels, w)
        self.pixel_count = int(self.pixels.size)
        self.centroid = (float(xs.mean()) + 0.5, float(ys.mean()) + 0.5)
        self.bbox = (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))

    def to_array(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        out.ravel()[self.pixels] = True
        return out

    def iou(self, other: "Mask") -> float:
        ax0, ay0, ax1, ay1 = self.bbox
        bx0, by0, bx1, by1 = other.bbox
        if ax0 > bx1 or bx0 > ax1 or ay0 > by1 or by0 > ay1:
            return 0.0
        inter = np.intersect1d(self.pixels, other.pixels, assume_unique=True).size
        union = self.pixel_count + other.pixel_count - inter
        return inter / union

    def contains_point(self, x: int, y: int) -> bool:
        h, w = self.shape
        if not (0 <= x < w and 0 <= y < h):
            return False
        flat = int(y) * w + int(x)
        i = np.searchsorted(self.pixels, flat)
        return i < self.pixels.size and self.pixels[i] == flat


def _split_by_chord(mask: Mask, rng: np.random.Generator) -> list[Mask]:
    w = mask.shape[1]
    ys, xs = np.divmod(mask.pixels, w)
    angle = rng.uniform(0.0, np.pi)
    side = (xs - xs.mean()) * np.cos(angle) + (ys - ys.mean()) * np.sin(angle) >= 0
    if side.all() or not side.any():
        return [mask]
    return [Mask(mask.pixels[side], mask.shape, mask.instance_id),
            Mask(mask.pixels[~side], mask.shape, mask.instance_id)]


def segment(frame, oversegment: bool = False, p_split: float = 0.0,
            rng: np.random.Generator | None = None) -> list[Mask]:
    """Connected components (8-connectivity) of each nonzero instance id.

    With oversegmentation on, each mask is independently split by a random
    chord through its centroid with probability p_split.
    """
    masks: list[Mask] = []
    id_map = frame.id_map
    for k in np.unique(id_map):
        if k == 0:
            continue
        labels, n = ndimage.label(id_map == k, structure=_EIGHT)
        flat = labels.ravel()
        order = np.argsort(flat, kind="stable")
        sorted_vals = flat[order]
        for comp in range(1, n + 1):
            lo = np.searchsorted(sorted_vals, comp, side="left")
            hi = np.searchsorted(sorted_vals, comp, side="right")
            masks.append(Mask(np.sort(order[lo:hi]), id_map.shape, int(k)))
    if oversegment and p_split > 0:
        if rng is None:
            raise ValueError("oversegmentation needs an rng")
        out: list[Mask] = []
        for m in masks:
            if rng.random() < p_split:
                out.extend(_split_by_chord(m, rng))
            else:
                out.append(m)
        masks = out
    return masks


# ---------------------------------------------------------------------------
# Region pooling and queries

def region_mean(frame, mask: Mask) -> np.ndarray:
    """Un-normalized arithmetic mean descriptor over a mask."""
    return frame.descriptor_mean(mask.pixels)


def pool_region(frame, mask: Mask) -> np.ndarray:
    """Mean descriptor over a mask, L2-normalized for cosine comparisons.

    Memoized per (mask, frame seq): masks are per-frame values and several
    pipeline stages pool the same region.
    """
    if mask.pixel_count == 0:
        raise ValueError("cannot pool an empty mask")
    cached = getattr(mask, "_pooled", None)
    if cached is not None and cached[0] == frame.seq:
        return cached[1]
    pooled = unit(region_mean(frame, mask))
    mask._pooled = (frame.seq, pooled)
    return pooled


@dataclass(frozen=True)
class Query:
    kind: str                       # click | bbox | template | stored
    x: float = 0.0
    y: float = 0.0
    x1: float = 0.0
    y1: float = 0.0
    class_id: int = 0
    descriptor: np.ndarray | None = None

    @staticmethod
    def click(x, y) -> "Query":
        return Query("click", x=x, y=y)

    @staticmethod
    def bbox(x0, y0, x1, y1) -> "Query":
        if not (x1 > x0 and y1 > y0):
            raise ValueError("bounding box must be nonempty")
        return Query("bbox", x=x0, y=y0, x1=x1, y1=y1)

    @staticmethod
    def template(class_id: int) -> "Query":
        return Query("template", class_id=class_id)

    @staticmethod
    def stored(descriptor: np.ndarray) -> "Query":
        return Query("stored", descriptor=descriptor)


def _bbox_iou(mask: Mask, x0, y0, x1, y1) -> float:
    # bbox treated as the pixel set [x0,x1) x [y0,y1)
    w = mask.shape[1]
    ys, xs = np.divmod(mask.pixels, w)
    inter = int(((xs >= x0) & (xs < x1) & (ys >= y0) & (ys < y1)).sum())
    area = max(0, int(x1) - int(x0)) * max(0, int(y1) - int(y0))
    union = mask.pixel_count + area - inter
    return inter / union if union else 0.0


def mask_at_click(masks: list[Mask], x, y) -> tuple[int, Mask]:
    for i, m in enumerate(masks):
        if m.contains_point(int(x), int(y)):
            return i, m
    raise QueryError("no region at click")


def mask_for_bbox(masks: list[Mask], x0, y0, x1, y1) -> tuple[int, Mask]:
    ious = [_bbox_iou(m, x0, y0, x1, y1) for m in masks]
    if not ious or max(ious) <= 0.0:
        raise QueryError("no region overlaps the bounding box")
    best = int(np.argmax(ious))  # ties -> lowest region index
    return best, masks[best]


def resolve_query(frame, masks: list[Mask], q: Query, model: DescriptorModel) -> np.ndarray:
    """Turn a click/bbox/template query into a unit query descriptor."""
    if q.kind == "click":
        if not (0 <= q.x < frame.width and 0 <= q.y < frame.height):
            raise QueryError("click outside the frame")
        _, m = mask_at_click(masks, q.x, q.y)
        return pool_region(frame, m)
    if q.kind == "bbox":
        _, m = mask_for_bbox(masks, q.x, q.y, q.x1, q.y1)
        return pool_region(frame, m)
    if q.kind == "template":
        return model.prototype(q.class_id).copy()
    if q.kind == "stored":
        return np.asarray(q.descriptor, dtype=float)
    raise QueryError(f"unknown query kind {q.kind!r}")


@dataclass
class DetectionResult:
    region_index: int
    mask: Mask
    similarity: float
    label: int                 # index into the query list
    best_for_query: bool = False


def detect(frame, masks: list[Mask], queries: list[np.ndarray],
           threshold: float = 0.8) -> list[DetectionResult]:
    """Label regions by the most similar query descriptor.

    A region is labeled with its argmax query iff that similarity clears the
    threshold; results are sorted by similarity descending and the single
    best region per query is flagged.  Ties break toward the lower index.
    """
    if not (-1.0 < threshold < 1.0):
        raise ValueError("threshold must lie in (-1, 1)")
    if not masks or not queries:
        return []
    region_vecs = np.stack([pool_region(frame, m) for m in masks])
    query_vecs = np.stack([unit(np.asarray(q, dtype=float)) for q in queries])
    sims = region_vecs @ query_vecs.T    # regions x queries

    results = []
    for j, m in enumerate(masks):
        q = int(np.argmax(sims[j]))
        s = float(sims[j, q])
        if s >= threshold:
            results.append(DetectionResult(j, m, s, q))
    for q in range(len(queries)):
        labeled = [r for r in results if r.label == q]
        if labeled:
            best = max(labeled, key=lambda r: (r.similarity, -r.region_index))
            best.best_for_query = True
    results.sort(key=lambda r: (-r.similarity, r.region_index))
    return results
