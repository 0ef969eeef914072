"""Trace capture and dimensionality reduction for inspecting what a trained
model computes: controller-state clusters, memory action probabilities, and
memory contents over time. Export is CSV only; plotting is out of scope.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .models import one_hot


@dataclass
class Trace:
    """Per-step capture: input token, hidden vector, action probabilities,
    memory snapshot, and output logits. Transformers record per-layer
    activations instead.
    """
    steps: list = field(default_factory=list)

    def append(self, entry):
        self.steps.append(entry)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]


def record_trace(model, padded_tokens, input_length=None, mem_size=None):
    """Run one sequence through the model, capturing every step.

    Recording never alters the computation; the returned trace also carries
    the final logits under .logits for purity checks.
    """
    trace = Trace()
    tokens = np.asarray(padded_tokens)
    x = one_hot(tokens[None, :], model.config.vocab_in, dtype=model.params.dtype)
    out = model.forward(x, input_length=input_length, mem_size=mem_size, trace=trace)
    trace.logits = out.data[0].copy()
    return trace


# ---------------------------------------------------------------------------
# PCA via cyclic Jacobi eigendecomposition
# ---------------------------------------------------------------------------

def jacobi_eigh(matrix, tol=1e-10, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Deterministic and accurate for the small dimensions used here. Returns
    (eigenvalues, eigenvectors as columns), unsorted.
    """
    s = np.array(matrix, dtype=np.float64, copy=True)
    n = s.shape[0]
    if s.shape != (n, n) or not np.allclose(s, s.T, atol=1e-12 * max(1.0, np.abs(s).max())):
        raise ValueError("jacobi_eigh expects a symmetric square matrix")
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.abs(s - np.diag(np.diag(s))).max() if n > 1 else 0.0
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(s[p, q]) <= tol * 1e-2:
                    continue
                tau = (s[q, q] - s[p, p]) / (2.0 * s[p, q])
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = t * c
                for m in (s, v):
                    mp, mq = m[:, p].copy(), m[:, q].copy()
                    m[:, p] = c * mp - sn * mq
                    m[:, q] = sn * mp + c * mq
                sp, sq = s[p, :].copy(), s[q, :].copy()
                s[p, :] = c * sp - sn * sq
                s[q, :] = sn * sp + c * sq
    return np.diag(s).copy(), v


def pca(points, k):
    """Top-k principal components of an n x d point cloud.

    Returns (projection n x k, components k x d, explained variances k).
    Components use a deterministic sign: largest-magnitude coordinate
    positive. Components beyond the rank carry zero variance.
    """
    pts = np.asarray(points, dtype=np.float64)
    n, d = pts.shape
    if n < 2:
        raise ValueError("pca needs at least two points")
    if not 1 <= k <= min(n, d):
        raise ValueError("k must satisfy 1 <= k <= min(n, d)")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = jacobi_eigh(cov)
    order = np.argsort(eigvals)[::-1]
    comps = eigvecs[:, order].T[:k]
    for i in range(k):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    explained = np.clip(eigvals[order][:k], 0.0, None)
    return centered @ comps.T, comps, explained


def single_linkage_clusters(points, radius):
    """Number of connected components when points within radius are linked."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    dists = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    for i in range(n):
        for j in range(i + 1, n):
            if dists[i, j] <= radius:
                parent[find(i)] = find(j)
    return len({find(i) for i in range(n)})


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating))
                              else str(v) for v in row) + "\n")


def export_trace(trace, path):
    """Write states.csv, actions.csv, memory.csv under the given directory."""
    os.makedirs(path, exist_ok=True)
    recurrent = bool(trace.steps) and "hidden" in trace.steps[0]
    states_rows, actions_rows, memory_rows = [], [], []
    if recurrent:
        d_h = len(trace.steps[0]["hidden"])
        states_header = ["step", "token"] + [f"h{i}" for i in range(d_h)]
        for e in trace:
            states_rows.append([e["step"], e["token"]] + [float(v) for v in e["hidden"]])
        if "actions" in trace.steps[0]:
            n_a = len(trace.steps[0]["actions"])
            actions_header = ["step"] + [f"a{i}" for i in range(n_a)]
            n_m = trace.steps[0]["memory"].size
            memory_header = ["step"] + [f"m{i}" for i in range(n_m)]
            for e in trace:
                actions_rows.append([e["step"]] + [float(v) for v in e["actions"]])
                memory_rows.append([e["step"]] + [float(v) for v in e["memory"].ravel()])
        else:
            actions_header = ["step"]
            memory_header = ["step"]
    else:  # transformer: per-layer activations at every position
        d_h = trace.steps[0]["activations"].shape[-1] if trace.steps else 0
        states_header = ["step", "layer"] + [f"h{i}" for i in range(d_h)]
        for e in trace:
            for pos, row in enumerate(e["activations"]):
                states_rows.append([pos, e["layer"]] + [float(v) for v in row])
        actions_header = ["step"]
        memory_header = ["step"]
    _write_csv(os.path.join(path, "states.csv"), states_header, states_rows)
    _write_csv(os.path.join(path, "actions.csv"), actions_header, actions_rows)
    _write_csv(os.path.join(path, "memory.csv"), memory_header, memory_rows)


def load_csv(path):
    """Parse a bundle CSV back into (header list, float rows)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    return header, rows
