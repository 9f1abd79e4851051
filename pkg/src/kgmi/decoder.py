"""Thresholded decoding of attention into a DAG, and edge-level scoring."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import BadThreshold, DimensionMismatch
from .infometric import ESTIMATED, KgmiTable

CONCENTRATED = "concentrated"
DIFFUSE = "diffuse"
REJECTED = "rejected"


@dataclass(frozen=True)
class Verdict:
    kind: str
    j: int | None
    weight: float


@dataclass
class DecodedGraph:
    """Decoded adjacency ``A_hat[j-1, i-1]`` with per-(head, node) verdicts (1-based keys)."""

    A_hat: np.ndarray = field(repr=False)
    verdicts: dict[tuple[int, int], Verdict] = field(repr=False)
    parents: dict[int, tuple[int, ...]]
    collapse: dict[int, dict[int, list[int]]]
    threshold: float
    noise_floor: float | None

    @property
    def collapsed_nodes(self) -> list[int]:
        return sorted(self.collapse)

    def head_mass_on(self, attn: np.ndarray, j: int, i: int) -> float:
        return float(attn[:, j - 1, i - 1].sum())


def noise_floor(table: KgmiTable) -> float:
    """Largest |entry| over root-target columns; population tables give 0."""
    roots = [i for i in range(2, table.T + 1) if table.responsible[i - 1] == 0]
    if not roots:
        return 0.0
    return float(max(np.abs(table.values[:, : i - 1, i - 1]).max() for i in roots))


def decode(attn: np.ndarray, threshold: float = 0.9, table: KgmiTable | None = None,
           min_information: float | None = 0.0) -> DecodedGraph:
    """Turn final attention into parent sets.

    A head is concentrated on ``j`` when ``attn[l, j, i] > threshold``. With a
    table at hand two filters apply: a column with a single visible position
    is kept only if its entry beats the root-column noise floor, and any
    concentrated head whose entry is ``<= min_information`` is rejected as
    uninformative (pass ``None`` to disable). The second filter is skipped for
    estimated tables, whose entries carry a bias of unknown sign. Without a
    table single-position columns are reported diffuse.
    """
    if not 0.5 < threshold < 1:
        raise BadThreshold(f"threshold must lie in (1/2, 1), got {threshold}")
    attn = np.asarray(attn, dtype=float)
    K, T, _ = attn.shape
    floor = noise_floor(table) if table is not None else None
    if table is not None and table.mode == ESTIMATED:
        min_information = None
    verdicts: dict[tuple[int, int], Verdict] = {}
    A_hat = np.zeros((T, T), dtype=int)
    argmaxes: dict[int, dict[int, list[int]]] = {}
    for i in range(2, T + 1):
        col = attn[:, : i - 1, i - 1]
        for ell in range(1, K + 1):
            j = int(np.argmax(col[ell - 1])) + 1
            w = float(col[ell - 1, j - 1])
            argmaxes.setdefault(i, {}).setdefault(j, []).append(ell)
            if w <= threshold:
                verdicts[(ell, i)] = Verdict(DIFFUSE, None, w)
                continue
            if i == 2 and (table is None or table.values[ell - 1, 0, 1] <= floor):
                verdicts[(ell, i)] = Verdict(DIFFUSE, None, w)
                continue
            if table is not None and min_information is not None and table.values[ell - 1, j - 1, i - 1] <= min_information:
                verdicts[(ell, i)] = Verdict(REJECTED, j, w)
                continue
            verdicts[(ell, i)] = Verdict(CONCENTRATED, j, w)
            A_hat[j - 1, i - 1] = 1
    parents = {i: tuple(int(j) + 1 for j in np.flatnonzero(A_hat[:, i - 1])) for i in range(1, T + 1)}
    collapse = {i: {j: heads for j, heads in d.items() if len(heads) > 1}
                for i, d in argmaxes.items() if i > 2 and any(len(h) > 1 for h in d.values())}
    return DecodedGraph(A_hat, verdicts, parents, collapse, threshold, floor)


@dataclass(frozen=True)
class ScoreReport:
    f1: float
    shd: int
    precision: float
    recall: float
    runtime: float = 0.0

    def to_dict(self) -> dict:
        return {"F1": self.f1, "SHD": self.shd, "precision": self.precision, "recall": self.recall,
                "runtime_seconds": self.runtime}


def score(A_hat: np.ndarray, A: np.ndarray, runtime: float = 0.0) -> ScoreReport:
    """Edge precision, recall, F1 and structural Hamming distance."""
    A_hat = np.asarray(A_hat).astype(bool)
    A = np.asarray(A).astype(bool)
    if A_hat.shape != A.shape:
        raise DimensionMismatch(f"{A_hat.shape} vs {A.shape}")
    tp = int(np.sum(A_hat & A))
    n_pred, n_true = int(A_hat.sum()), int(A.sum())
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_true if n_true else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ScoreReport(f1, int(np.sum(A_hat ^ A)), precision, recall, runtime)


def combined_heatmap(attn: np.ndarray) -> np.ndarray:
    """Head 1 as positive values, head 2 as negative, whichever is larger per cell."""
    attn = np.asarray(attn)
    if attn.shape[0] == 1:
        return attn[0].copy()
    a, b = attn[0], attn[1]
    return np.where(a >= b, a, -b)


def heatmap_csv(M: np.ndarray) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows([[f"{v:.6f}" for v in row] for row in M])
    return buf.getvalue()


def _colour(v: float) -> str:
    v = max(-1.0, min(1.0, v))
    if v >= 0:
        r, g, b = 255, int(255 * (1 - v)), int(255 * (1 - v))
    else:
        r, g, b = int(255 * (1 + v)), int(255 * (1 + v)), 255
    return f"rgb({r},{g},{b})"


def heatmap_svg(M: np.ndarray, cell: int = 24) -> str:
    """Grid of coloured squares: red for positive, blue for negative."""
    n_rows, n_cols = M.shape
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{n_cols * cell}" height="{n_rows * cell}">']
    for r in range(n_rows):
        for c in range(n_cols):
            parts.append(f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" height="{cell}" '
                         f'fill="{_colour(float(M[r, c]))}" stroke="#888" stroke-width="0.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
