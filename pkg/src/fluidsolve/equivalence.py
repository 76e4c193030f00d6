"""Mappings from classical schemes to equivalent diffusion iterations.

Every scheme has a diffusion twin that reproduces its iterates exactly,
update for update, via the reconstruction x_n = H_n + offset:

    scheme              diffusion twin
    ------------------  ------------------------------------------
    PI(P, x0)           VLU on P,  f0 = P x0 - x0,  offset x0
    GSl(P, x0, seq)     CLU on P,  f0 = P x0 - x0,  offset x0
    Jac(P, b)           VLU on P,  f0 = b,          offset 0
    GSa(P, b, seq)      CLU on P,  f0 = b,          offset 0

For PI the fluid and history have closed forms as well:
F_n = x_{n+1} - x_n and H_n = x_n - x0.

A PageRank operator d*Q + (1-d)/n * ones is never materialized: whenever
sigma(x) = 1 it acts as x -> d Q x + (1-d) e, so the diffusion twin can run
on the sparse d*Q alone with the rank-one part folded into the initial
fluid. :func:`pagerank_decompose` builds that form; :func:`pagerank_matrix`
materializes the full operator only for small-scale verification runs.

Everything here is a pure function over immutable inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionState, diffuse_coordinate, diffuse_vector
from .io import format_float
from .linalg import SparseColumnMatrix, UpdateSequence, as_vector, l1_norm, sigma, uniform_vector
from .schemes import RowView, SchemeSpec, step_gsa, step_gsl, step_jacobi, step_pi

__all__ = [
    "DiffusionEquivalent",
    "EquivalenceReport",
    "to_diffusion",
    "pagerank_decompose",
    "pagerank_matrix",
    "dense_solve_oracle",
    "verify_equivalence",
    "write_reports_csv",
]

# Dense LU is acceptable at desk scale only.
MAX_DENSE_N = 1000


@dataclass(frozen=True)
class DiffusionEquivalent:
    """A diffusion iteration plus the offset that reconstructs the iterates."""

    matrix: SparseColumnMatrix
    f0: np.ndarray
    mode: str  # "vlu" or "clu"
    seq: UpdateSequence | None
    offset: np.ndarray

    def __post_init__(self):
        if self.mode not in ("vlu", "clu"):
            raise ValueError(f"mode must be 'vlu' or 'clu', got {self.mode!r}")
        if self.mode == "clu" and self.seq is None:
            raise ValueError("coordinate-level equivalent needs an update sequence")
        object.__setattr__(self, "f0", as_vector(self.f0, self.matrix.n))
        object.__setattr__(self, "offset", as_vector(self.offset, self.matrix.n))

    def reconstruct(self, h: np.ndarray) -> np.ndarray:
        """Map accumulated history back to the classical iterate."""
        return h + self.offset


def to_diffusion(spec: SchemeSpec) -> DiffusionEquivalent:
    """Diffusion twin of a classical scheme (same matrix, same granularity)."""
    p = spec.matrix
    if spec.kind in ("PI", "GSl"):
        f0 = p.matvec(spec.x0) - spec.x0
        offset = spec.x0.copy()
    else:
        f0 = spec.b.copy()
        offset = np.zeros(p.n)
    mode = "clu" if spec.coordinate_level else "vlu"
    return DiffusionEquivalent(p, f0, mode, spec.seq, offset)


def pagerank_decompose(q: SparseColumnMatrix, d: float, x0) -> DiffusionEquivalent:
    """Diffusion form of power iteration on d*Q + (1-d)/n * ones, from x0.

    Requires sigma(x0) = 1; that is what lets the rank-one part collapse to
    the constant vector (1-d) e. Q should be column-stochastic; columns
    whose absolute sum strays from 1 (dangling nodes) only draw a warning.
    """
    if not 0.0 < d < 1.0:
        raise ValueError(f"damping factor must lie in (0, 1), got {d}")
    x0 = as_vector(x0, q.n)
    if abs(sigma(x0) - 1.0) > 1e-12:
        raise ValueError(f"decomposition needs sigma(x0) = 1, got {sigma(x0)!r}")
    col_norms = q.column_l1_norms()
    off = np.abs(col_norms - 1.0)
    if np.any(off > 1e-12):
        worst = int(np.argmax(off))
        warnings.warn(
            f"matrix is not column-stochastic: column {worst} has L1 norm "
            f"{col_norms[worst]!r}",
            stacklevel=2,
        )
    e = uniform_vector(q.n)
    f0 = d * q.matvec(x0) + (1.0 - d) * e - x0
    return DiffusionEquivalent(q.scaled(d), f0, "vlu", None, x0.copy())


def pagerank_matrix(q: SparseColumnMatrix, d: float) -> SparseColumnMatrix:
    """Materialize d*Q + (1-d)/n * ones. Verification-only: dense pattern."""
    if q.n > MAX_DENSE_N:
        raise ValueError(f"refusing to materialize a dense {q.n}x{q.n} operator")
    if not 0.0 < d < 1.0:
        raise ValueError(f"damping factor must lie in (0, 1), got {d}")
    dense = d * q.to_dense() + (1.0 - d) / q.n
    return SparseColumnMatrix.from_dense(dense)


def dense_solve_oracle(p: SparseColumnMatrix, b) -> np.ndarray:
    """Ground-truth solve of (I - P) x = b by dense LU with partial pivoting.

    Independent of every sparse kernel in this package, which is the point:
    it anchors the solver tests. Self-checks its own residual.
    """
    if p.n > MAX_DENSE_N:
        raise ValueError(f"dense oracle is limited to n <= {MAX_DENSE_N}, got {p.n}")
    b = as_vector(b, p.n)
    a = np.eye(p.n) - p.to_dense()
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"I - P is singular: {exc}") from None
    residual = float(np.abs(a @ x - b).sum())
    if residual > 1e-10 * l1_norm(b):
        raise ArithmeticError(
            f"oracle residual {residual!r} exceeds 1e-10 * l1(b) = {1e-10 * l1_norm(b)!r}"
        )
    return x


@dataclass
class EquivalenceReport:
    """Max deviations between a scheme and its diffusion twin, run in lockstep."""

    scheme: str
    steps: int
    max_discrepancy: float
    # Power iteration only: the closed forms F_n = x_{n+1} - x_n, H_n = x_n - x0.
    max_fluid_discrepancy: float | None = None
    max_history_discrepancy: float | None = None

    def csv_row(self) -> str:
        return f"{self.scheme},{self.steps},{format_float(self.max_discrepancy)}"


def write_reports_csv(path, reports) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("scheme,steps,max_discrepancy\n")
        for report in reports:
            fh.write(report.csv_row() + "\n")


def verify_equivalence(spec: SchemeSpec, n_steps: int) -> EquivalenceReport:
    """Run a scheme and its diffusion twin side by side for ``n_steps`` updates.

    One vector-level diffusion step pairs with one PI/Jac iteration; one
    coordinate-level step pairs with one Gauss-Seidel coordinate update on
    the same index. Reports the max over steps of l1(x_n - (H_n + offset)).
    Never raises on mismatch; the report carries the discrepancies.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    equiv = to_diffusion(spec)
    p = spec.matrix
    state = DiffusionState.start(equiv.f0)
    x = spec.initial_vector()
    max_disc = float(np.abs(x - equiv.reconstruct(state.h)).sum())

    track_pi = spec.kind == "PI"
    max_fluid = max_hist = 0.0 if track_pi else None
    if track_pi:
        x_next = step_pi(x, p)
        max_fluid = float(np.abs(state.f - (x_next - x)).sum())
        max_hist = float(np.abs(state.h - (x - spec.x0)).sum())

    row_view = RowView(p) if spec.coordinate_level else None
    indices = spec.seq.iter_indices() if spec.coordinate_level else None
    for _ in range(n_steps):
        if spec.coordinate_level:
            i = next(indices)
            diffuse_coordinate(state, p, i)
            x = step_gsl(x, p, i, row_view) if spec.kind == "GSl" else step_gsa(x, p, spec.b, i, row_view)
        else:
            diffuse_vector(state, p)
            if spec.kind == "PI":
                x = x_next
                x_next = step_pi(x, p)
            else:
                x = step_jacobi(x, p, spec.b)
        max_disc = max(max_disc, float(np.abs(x - equiv.reconstruct(state.h)).sum()))
        if track_pi:
            max_fluid = max(max_fluid, float(np.abs(state.f - (x_next - x)).sum()))
            max_hist = max(max_hist, float(np.abs(state.h - (x - spec.x0)).sum()))

    return EquivalenceReport(
        scheme=spec.kind,
        steps=n_steps,
        max_discrepancy=max_disc,
        max_fluid_discrepancy=max_fluid,
        max_history_discrepancy=max_hist,
    )
