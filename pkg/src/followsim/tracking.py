"""Frame-to-frame tracking, loss handling, and three-level re-detection.

The tracker scores candidate regions by a blend of overlap with the previous
mask and descriptor similarity.  On loss it escalates to the configured
re-detection level: 1 = appearance-only greedy match against the last
tracked descriptor, 2 = wait for a human click/bbox, 3 = automatic detection
using the mean of the descriptor bank as query.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import perception
from .perception import Mask, Query, cosine, detect, pool_region, unit

IDLE = "IDLE"                      # before any query has been resolved
TRACKING = "TRACKING"
LOST = "LOST"                      # the single transition tick out of TRACKING
REDETECTING = "REDETECTING"
AWAITING_HUMAN = "AWAITING_HUMAN"


@dataclass
class TrackerParams:
    alpha: float = 0.5             # IoU-vs-appearance blend
    iou_min: float = 0.05
    s_min: float = 0.6
    thresh_redetect: float = 0.8   # cosine floor, shared with detect()
    tau: int = 10                  # bank storage interval (iterations)

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if self.tau <= 0:
            raise ValueError("tau must be a positive integer")


class DescriptorBank:
    """Mean descriptors of the tracked object stored every tau iterations."""

    def __init__(self, tau: int, capacity: int | None = None):
        if tau <= 0:
            raise ValueError("tau must be a positive integer")
        self.tau = int(tau)
        self.capacity = capacity
        self.entries: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self.entries)

    def maybe_store(self, iteration: int, descriptor: np.ndarray) -> bool:
        if iteration % self.tau != 0:
            return False
        if self.capacity is not None and len(self.entries) >= self.capacity:
            return False
        self.entries.append(np.asarray(descriptor, dtype=float).copy())
        return True

    def query(self) -> np.ndarray:
        """Normalized arithmetic mean of the stored descriptors."""
        if not self.entries:
            raise ValueError("descriptor bank is empty")
        return unit(np.mean(self.entries, axis=0))


@dataclass
class TrackState:
    status: str = IDLE
    current_mask: Mask | None = None
    v_track: np.ndarray | None = None
    iteration: int = 0
    bank: DescriptorBank = field(default_factory=lambda: DescriptorBank(10))
    redetect_level: int = 3
    last_similarity: float | None = None


class Tracker:
    """Owns the track state machine for one session.

    Per-tick events ("lost", "reacquired", ...) are appended to .events and
    drained by the pipeline for logging and the servo reset wiring.
    """

    def __init__(self, params: TrackerParams | None = None, redetect_level: int = 3,
                 fallback_query: np.ndarray | None = None):
        if redetect_level not in (1, 2, 3):
            raise ValueError("redetect level must be 1, 2, or 3")
        self.params = params or TrackerParams()
        self.state = TrackState(bank=DescriptorBank(self.params.tau),
                                redetect_level=redetect_level)
        self.fallback_query = fallback_query
        self.events: list[dict] = []

    # -- acquisition -------------------------------------------------------

    def acquire(self, frame, mask: Mask, similarity: float | None = None) -> None:
        st = self.state
        st.current_mask = mask
        st.v_track = pool_region(frame, mask)
        st.last_similarity = similarity
        st.status = TRACKING

    def start(self, frame, mask: Mask, query_descriptor: np.ndarray | None = None) -> None:
        """Acquisition from a resolved user query: a new target identity, so
        the iteration count and the descriptor bank start over."""
        if query_descriptor is not None:
            self.fallback_query = np.asarray(query_descriptor, dtype=float)
        self.state.iteration = 0
        self.state.bank = DescriptorBank(self.params.tau)
        self.acquire(frame, mask)
        self.events.append({"kind": "query_acquired", "instance_id": mask.instance_id})
        self._post_frame(frame)

    def start_from_query(self, frame, masks: list[Mask], query, model) -> bool:
        """Resolve the initial user query against this frame.

        Click/bbox queries bind to their region directly (QueryError when the
        geometry hits nothing); template queries run a detection pass and may
        simply find nothing yet, reported by the False return.
        """
        qdesc = perception.resolve_query(frame, masks, query, model)
        if query.kind in ("click", "bbox"):
            if query.kind == "click":
                _, mask = perception.mask_at_click(masks, query.x, query.y)
            else:
                _, mask = perception.mask_for_bbox(masks, query.x, query.y, query.x1, query.y1)
            self.start(frame, mask, qdesc)
            return True
        for r in detect(frame, masks, [qdesc], threshold=self.params.thresh_redetect):
            if r.best_for_query:
                self.start(frame, r.mask, qdesc)
                return True
        self.fallback_query = qdesc
        return False

    # -- per-frame stepping --------------------------------------------------

    def process(self, frame, masks: list[Mask], human_answer: Query | None = None) -> None:
        """Run one frame through the state machine, then advance the iteration."""
        st = self.state
        if st.status == AWAITING_HUMAN and human_answer is not None:
            self.answer_human(frame, masks, human_answer)
        elif st.status == TRACKING:
            self._track_step(frame, masks)
        elif st.status == LOST:
            # Loss was declared last tick; attempts start now.
            if st.redetect_level == 2:
                st.status = AWAITING_HUMAN
                self.events.append({"kind": "redetect_request"})
            else:
                st.status = REDETECTING
                self._redetect_auto(frame, masks)
        elif st.status == REDETECTING:
            self._redetect_auto(frame, masks)
        self._post_frame(frame)

    def _post_frame(self, frame) -> None:
        if self.state.status != IDLE:
            self.update_bank(frame)
            self.state.iteration += 1

    def _track_step(self, frame, masks: list[Mask]) -> None:
        st, p = self.state, self.params
        best_j, best_score, best_iou = -1, -np.inf, 0.0
        for j, m in enumerate(masks):
            iou = st.current_mask.iou(m)
            if iou < p.iou_min:
                continue
            score = p.alpha * iou + (1 - p.alpha) * cosine(st.v_track, pool_region(frame, m))
            if score > best_score:
                best_j, best_score, best_iou = j, score, iou
        if best_j >= 0 and best_score >= p.s_min:
            self.acquire(frame, masks[best_j], similarity=best_score)
        else:
            st.status = LOST
            st.current_mask = None
            st.last_similarity = None
            self.events.append({"kind": "lost"})

    def update_bank(self, frame) -> None:
        st = self.state
        if st.status == TRACKING and st.current_mask is not None:
            if st.bank.maybe_store(st.iteration, pool_region(frame, st.current_mask)):
                self.events.append({"kind": "bank_store", "iteration": st.iteration})

    # -- re-detection --------------------------------------------------------

    def _redetect_query(self) -> np.ndarray | None:
        st = self.state
        if len(st.bank):
            return st.bank.query()
        return self.fallback_query

    def _redetect_auto(self, frame, masks: list[Mask]) -> None:
        st, p = self.state, self.params
        if not masks:
            return
        if st.redetect_level == 1:
            # Tracker-only: greedy appearance match, IoU gate dropped.
            sims = [cosine(st.v_track, pool_region(frame, m)) for m in masks]
            j = int(np.argmax(sims))
            if sims[j] >= p.thresh_redetect:
                self._reacquire(frame, masks[j], sims[j])
        else:
            q = self._redetect_query()
            if q is None:
                return
            for r in detect(frame, masks, [q], threshold=p.thresh_redetect):
                if r.best_for_query:
                    self._reacquire(frame, r.mask, r.similarity)
                    break

    def answer_human(self, frame, masks: list[Mask], answer: Query) -> None:
        """Apply a human click/bbox while AWAITING_HUMAN."""
        if self.state.status != AWAITING_HUMAN:
            raise ValueError("no human answer expected in status " + self.state.status)
        if answer.kind == "click":
            _, m = perception.mask_at_click(masks, answer.x, answer.y)
        elif answer.kind == "bbox":
            _, m = perception.mask_for_bbox(masks, answer.x, answer.y, answer.x1, answer.y1)
        else:
            raise perception.QueryError("human answer must be a click or a bbox")
        self._reacquire(frame, m, None)
        self.events.append({"kind": "human_answer_applied"})

    def _reacquire(self, frame, mask: Mask, similarity: float | None) -> None:
        # v_track becomes the new region's descriptor; the bank is preserved
        # as cross-trajectory memory and iteration keeps counting.
        self.acquire(frame, mask, similarity=similarity)
        self.events.append({"kind": "reacquired", "instance_id": mask.instance_id})

    def set_redetect_level(self, level: int) -> None:
        if level not in (1, 2, 3):
            raise ValueError("redetect level must be 1, 2, or 3")
        prev = self.state.redetect_level
        self.state.redetect_level = level
        if prev == 2 and level != 2 and self.state.status == AWAITING_HUMAN:
            self.state.status = REDETECTING
        self.events.append({"kind": "level_set", "level": level})

    def drain_events(self) -> list[dict]:
        out, self.events = self.events, []
        return out
