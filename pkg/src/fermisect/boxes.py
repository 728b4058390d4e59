"""Uniform-grid index over axis-aligned boxes for batched overlap queries.

Boxes live in a fixed 2D frame as (n_lo, n_hi, t_lo, t_hi) rows.  The grid
cell size matches the largest box extent per axis, so each box registers in
at most four cells; a query box gathers the candidate lists of every cell it
touches and exact-checks them.  All paths are vectorized and deterministic.
"""

from __future__ import annotations

import numpy as np

_OFF = 1 << 30


class BoxGrid:
    def __init__(self, boxes):
        boxes = np.asarray(boxes, dtype=float)
        self.boxes = boxes
        self.n = len(boxes)
        if self.n == 0:
            self.cell = np.array([1.0, 1.0])
            self._codes = np.empty(0, dtype=np.int64)
            self._starts = np.empty(0, dtype=np.int64)
            self._counts = np.empty(0, dtype=np.int64)
            self._members = np.empty(0, dtype=np.int64)
            return
        ext_n = (boxes[:, 1] - boxes[:, 0]).max()
        ext_t = (boxes[:, 3] - boxes[:, 2]).max()
        self.cell = np.array([max(ext_n, 1e-12), max(ext_t, 1e-12)])

        ix_lo = np.floor(boxes[:, 0] / self.cell[0]).astype(np.int64)
        ix_hi = np.floor(boxes[:, 1] / self.cell[0]).astype(np.int64)
        iy_lo = np.floor(boxes[:, 2] / self.cell[1]).astype(np.int64)
        iy_hi = np.floor(boxes[:, 3] / self.cell[1]).astype(np.int64)

        codes, members = [], []
        idx = np.arange(self.n, dtype=np.int64)
        for dx in (0, 1):
            for dy in (0, 1):
                ok = (ix_lo + dx <= ix_hi) & (iy_lo + dy <= iy_hi)
                codes.append(self._encode(ix_lo[ok] + dx, iy_lo[ok] + dy))
                members.append(idx[ok])
        codes = np.concatenate(codes)
        members = np.concatenate(members)
        order = np.lexsort((members, codes))
        codes, members = codes[order], members[order]
        uniq, starts, counts = np.unique(codes, return_index=True,
                                         return_counts=True)
        self._codes = uniq
        self._starts = starts.astype(np.int64)
        self._counts = counts.astype(np.int64)
        self._members = members

    @staticmethod
    def _encode(ix, iy):
        return ((ix + _OFF) << 32) | (iy + _OFF)

    def query_pairs(self, queries, mask=None):
        """Candidate (query_index, box_index) pairs with exact overlap check.

        ``queries`` is (M, 4); boxes and queries are closed, so boundary
        contact counts as intersection.  ``mask`` optionally restricts the
        admissible boxes.
        """
        q = np.asarray(queries, dtype=float)
        if q.size == 0 or self.n == 0:
            return (np.empty(0, dtype=np.int64),) * 2
        jx_lo = np.floor(q[:, 0] / self.cell[0]).astype(np.int64)
        jx_hi = np.floor(q[:, 1] / self.cell[0]).astype(np.int64)
        jy_lo = np.floor(q[:, 2] / self.cell[1]).astype(np.int64)
        jy_hi = np.floor(q[:, 3] / self.cell[1]).astype(np.int64)
        span_x = int((jx_hi - jx_lo).max()) + 1
        span_y = int((jy_hi - jy_lo).max()) + 1

        qi_all, bi_all = [], []
        base_idx = np.arange(len(q), dtype=np.int64)
        for dx in range(span_x):
            okx = jx_lo + dx <= jx_hi
            for dy in range(span_y):
                ok = okx & (jy_lo + dy <= jy_hi)
                if not ok.any():
                    continue
                qi = base_idx[ok]
                codes = self._encode(jx_lo[ok] + dx, jy_lo[ok] + dy)
                pos = np.searchsorted(self._codes, codes)
                hit = (pos < len(self._codes)) & \
                    (self._codes[np.minimum(pos, len(self._codes) - 1)] == codes)
                if not hit.any():
                    continue
                qi = qi[hit]
                pos = pos[hit]
                counts = self._counts[pos]
                starts = self._starts[pos]
                total = int(counts.sum())
                if total == 0:
                    continue
                reps = np.repeat(np.arange(len(qi)), counts)
                offs = np.arange(total) - np.repeat(
                    np.cumsum(counts) - counts, counts)
                bi_all.append(self._members[np.repeat(starts, counts) + offs])
                qi_all.append(qi[reps])
        if not qi_all:
            return (np.empty(0, dtype=np.int64),) * 2
        qi = np.concatenate(qi_all)
        bi = np.concatenate(bi_all)
        key = qi * self.n + bi
        _, first = np.unique(key, return_index=True)
        qi, bi = qi[first], bi[first]

        b = self.boxes[bi]
        qq = q[qi]
        keep = (b[:, 0] <= qq[:, 1]) & (b[:, 1] >= qq[:, 0]) & \
               (b[:, 2] <= qq[:, 3]) & (b[:, 3] >= qq[:, 2])
        if mask is not None:
            keep &= mask[bi]
        return qi[keep], bi[keep]

    def query_counts(self, queries, mask=None):
        qi, _ = self.query_pairs(queries, mask=mask)
        return np.bincount(qi, minlength=len(queries)).astype(np.int64)


def neg_box(box):
    """Box of the negated set: [lo, hi] -> [-hi, -lo] per axis."""
    box = np.asarray(box, dtype=float)
    return np.stack([-box[..., 1], -box[..., 0], -box[..., 3], -box[..., 2]],
                    axis=-1)


def signed_box(box, sign):
    return np.asarray(box, dtype=float) if sign > 0 else neg_box(box)


def add_boxes(a, b):
    """Minkowski interval sum, componentwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.stack([a[..., 0] + b[..., 0], a[..., 1] + b[..., 1],
                     a[..., 2] + b[..., 2], a[..., 3] + b[..., 3]], axis=-1)


def contains_zero(box):
    box = np.asarray(box, dtype=float)
    return (box[..., 0] <= 0) & (box[..., 1] >= 0) & \
           (box[..., 2] <= 0) & (box[..., 3] >= 0)


def point_box(v_n, v_t):
    return np.array([v_n, v_n, v_t, v_t], dtype=float)


def hull_of(boxes):
    boxes = np.asarray(boxes, dtype=float)
    return np.array([boxes[:, 0].min(), boxes[:, 1].max(),
                     boxes[:, 2].min(), boxes[:, 3].max()])
