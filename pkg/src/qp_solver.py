"""
QP Solver Module
Exact active-set solver for the two-variable safety QP

    minimize    1/2 (u - u_nom)^T P (u - u_nom)
    subject to  a_k . u + b_k >= 0        (constraint rows)
                v_min <= v <= v_max, omega_min <= omega <= omega_max
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

try:
    from .exceptions import IllConditioned
    from .geometry import DEFAULT_BOUNDS, ControlInput, InputBounds
except ImportError:
    from exceptions import IllConditioned
    from geometry import DEFAULT_BOUNDS, ControlInput, InputBounds

logger = logging.getLogger(__name__)

NOMINAL_FEASIBLE = "nominal_feasible"
FILTERED = "filtered"
INFEASIBLE = "infeasible"

EIGENVALUE_FLOOR = 1e-9
PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
SINGULAR_TOL = 1e-12

ConstraintRow = Tuple[np.ndarray, float]


@dataclass(frozen=True, eq=False)
class QpProblem:
    """
    One safety QP instance.

    Constraint indices: rows 0..m-1 are the supplied rows, m..m+3 are the
    box faces in the order v >= v_min, v <= v_max, omega >= omega_min,
    omega <= omega_max.
    """
    P: np.ndarray
    u_nom: ControlInput
    rows: Sequence[ConstraintRow] = ()
    bounds: InputBounds = DEFAULT_BOUNDS

    def __post_init__(self):
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))
        rows = [(np.asarray(a, dtype=float).reshape(2), float(b)) for a, b in self.rows]
        for k, (a, b) in enumerate(rows):
            if not (np.all(np.isfinite(a)) and np.isfinite(b)):
                raise ValueError(f"Constraint row {k} is not finite: a={a}, b={b}")
        object.__setattr__(self, "rows", tuple(rows))

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def all_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        """Stacked (A, b) of the supplied rows followed by the box faces"""
        rows = list(self.rows) + list(self.bounds.box_rows())
        A = np.array([a for a, _ in rows]).reshape(-1, 2)
        b = np.array([b for _, b in rows], dtype=float)
        return A, b


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Result of solve_qp"""
    u_safe: ControlInput
    status: str
    active_set: Tuple[int, ...] = ()
    multipliers: Dict[int, float] = field(default_factory=dict)
    max_violation: float = 0.0

    @property
    def filter_active(self) -> bool:
        return self.status != NOMINAL_FEASIBLE


def check_weight(P: np.ndarray) -> np.ndarray:
    """
    Validate the QP cost matrix.

    Raises:
        IllConditioned: if P is not a symmetric 2x2 matrix with eigenvalues >= 1e-9
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (2, 2) or not np.all(np.isfinite(P)):
        raise IllConditioned(f"Cost matrix must be a finite 2x2 matrix, got shape {P.shape}")
    if not np.allclose(P, P.T, rtol=0.0, atol=1e-12):
        raise IllConditioned(f"Cost matrix is not symmetric: {P.tolist()}")
    smallest = float(np.linalg.eigvalsh(P).min())
    if smallest < EIGENVALUE_FLOOR:
        raise IllConditioned(f"Cost matrix eigenvalue {smallest:.3e} below floor {EIGENVALUE_FLOOR}")
    return P


def _cost(P: np.ndarray, u: np.ndarray, u0: np.ndarray) -> float:
    du = u - u0
    return 0.5 * float(du @ P @ du)


def _equality_solve(
    P_inv: np.ndarray,
    u0: np.ndarray,
    A_S: np.ndarray,
    b_S: np.ndarray
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """
    Minimize the cost with the rows in S held at equality.

    From P (u - u0) = A_S^T lam and A_S u + b_S = 0:
    lam = -(A_S P^-1 A_S^T)^-1 (A_S u0 + b_S), u = u0 + P^-1 A_S^T lam.
    Returns None when the working set is linearly dependent.
    """
    schur = A_S @ P_inv @ A_S.T
    scale = max(1.0, float(np.abs(schur).max()))
    if abs(np.linalg.det(schur)) <= SINGULAR_TOL * scale ** len(b_S):
        return None
    lam = -np.linalg.solve(schur, A_S @ u0 + b_S)
    return u0 + P_inv @ A_S.T @ lam, lam


def _solve_feasible(
    P: np.ndarray,
    u0: np.ndarray,
    A: np.ndarray,
    b: np.ndarray
) -> Optional[Tuple[np.ndarray, Tuple[int, ...], np.ndarray]]:
    """
    Enumerate working sets of size 0, 1 and 2.

    Two variables admit at most two independent active constraints, so the
    optimum is the candidate that is primal feasible with nonnegative
    multipliers. Returns None when no candidate is primal feasible.
    """
    if np.all(A @ u0 + b >= 0.0):
        return u0, (), np.zeros(0)

    P_inv = np.linalg.inv(P)
    certified = None
    fallback = None

    for size in (1, 2):
        for S in combinations(range(len(b)), size):
            idx = list(S)
            result = _equality_solve(P_inv, u0, A[idx], b[idx])
            if result is None:
                continue
            u, lam = result
            if np.any(A @ u + b < -PRIMAL_TOL):
                continue
            cost = _cost(P, u, u0)
            candidate = (cost, u, S, lam)
            if np.all(lam >= -DUAL_TOL):
                if certified is None or cost < certified[0]:
                    certified = candidate
            elif fallback is None or cost < fallback[0]:
                fallback = candidate

    best = certified if certified is not None else fallback
    if best is None:
        return None
    if certified is None:
        logger.warning("No KKT-certified working set found, using lowest-cost feasible point")
    _, u, S, lam = best
    return u, S, lam


def _relaxation_candidates(A: np.ndarray, b: np.ndarray, bounds: InputBounds) -> List[np.ndarray]:
    """
    Vertices of the max-violation landscape over the box: corners, points on
    box edges where two rows violate equally, and interior points where
    three rows violate equally.
    """
    v_lo, v_hi = bounds.v_min, bounds.v_max
    w_lo, w_hi = bounds.omega_min, bounds.omega_max
    points = [np.array([v, w]) for v in (v_lo, v_hi) for w in (w_lo, w_hi)]
    m = len(b)

    for k, l in combinations(range(m), 2):
        da, db = A[k] - A[l], b[k] - b[l]
        if abs(da[1]) > SINGULAR_TOL:
            for v in (v_lo, v_hi):
                points.append(np.array([v, -(db + da[0] * v) / da[1]]))
        if abs(da[0]) > SINGULAR_TOL:
            for w in (w_lo, w_hi):
                points.append(np.array([-(db + da[1] * w) / da[0], w]))

    for k, l, n in combinations(range(m), 3):
        M = np.array([A[k] - A[l], A[k] - A[n]])
        if abs(np.linalg.det(M)) <= SINGULAR_TOL:
            continue
        points.append(np.linalg.solve(M, -np.array([b[k] - b[l], b[k] - b[n]])))

    tol = 1e-12
    return [
        p for p in points
        if v_lo - tol <= p[0] <= v_hi + tol and w_lo - tol <= p[1] <= w_hi + tol
    ]


def _min_max_violation(A: np.ndarray, b: np.ndarray, bounds: InputBounds) -> float:
    """Smallest achievable worst-row violation t over the box"""
    candidates = _relaxation_candidates(A, b, bounds)
    return min(float(np.max(-(A @ p + b))) for p in candidates)


def solve_qp(q: QpProblem) -> QpSolution:
    """
    Solve a safety QP exactly.

    Args:
        q: QP instance

    Returns:
        QpSolution. status is nominal_feasible when u_nom already satisfies
        every row and the box (u_safe is then u_nom itself), filtered when the
        minimizer differs, infeasible when no input satisfies all rows; in the
        last case u_safe minimizes the cost among inputs in the box whose worst
        row violation is the smallest achievable, reported as max_violation.

    Raises:
        IllConditioned: if P fails the symmetry or eigenvalue checks
    """
    P = check_weight(q.P)
    u0 = q.u_nom.as_array()
    A, b = q.all_rows()

    if np.all(A @ u0 + b >= 0.0):
        return QpSolution(u_safe=q.u_nom, status=NOMINAL_FEASIBLE)

    m = q.n_rows
    status = FILTERED
    max_violation = 0.0
    b_eff = b

    solved = _solve_feasible(P, u0, A, b)
    if solved is None:
        t_star = _min_max_violation(A[:m], b[:m], q.bounds)
        max_violation = max(t_star, 0.0)
        status = INFEASIBLE
        b_eff = b.copy()
        b_eff[:m] += t_star + PRIMAL_TOL
        solved = _solve_feasible(P, u0, A, b_eff)
        if solved is None:
            raise RuntimeError("Relaxed safety QP has no feasible working set")
        logger.warning(
            f"Safety QP infeasible: worst constraint violation {max_violation:.4e}"
        )

    u, S, lam = solved
    multipliers = {int(k): max(float(l), 0.0) for k, l in zip(S, lam)}
    return QpSolution(
        u_safe=ControlInput.from_array(u, q.bounds),
        status=status,
        active_set=tuple(int(k) for k in S),
        multipliers=multipliers,
        max_violation=max_violation,
    )


def kkt_residuals(q: QpProblem, sol: QpSolution) -> Tuple[float, float, float]:
    """
    KKT certificate of a solution.

    For infeasible solutions the residuals refer to the relaxed problem, so
    complementarity is measured against the shifted rows.

    Returns:
        (stationarity norm, smallest multiplier, largest |lambda_k * slack_k|)
    """
    P = check_weight(q.P)
    A, b = q.all_rows()
    if sol.status == INFEASIBLE:
        b = b.copy()
        b[:q.n_rows] += sol.max_violation

    u = sol.u_safe.as_array()
    lam = np.zeros(len(b))
    for k, value in sol.multipliers.items():
        lam[k] = value

    stationarity = float(np.linalg.norm(P @ (u - q.u_nom.as_array()) - A.T @ lam))
    slack = A @ u + b
    complementarity = float(np.max(np.abs(lam * slack))) if len(b) else 0.0
    return stationarity, float(lam.min()) if len(lam) else 0.0, complementarity


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)

    q = QpProblem(P=np.eye(2), u_nom=ControlInput(1.0, 0.0), rows=[(np.array([1.0, 0.0]), -1.2)])
    print(f"One-row projection: {solve_qp(q)}")

    q = QpProblem(P=np.eye(2), u_nom=ControlInput(0.5, 0.5))
    print(f"Unconstrained: {solve_qp(q)}")

    q = QpProblem(
        P=np.eye(2),
        u_nom=ControlInput(0.0, 0.0),
        rows=[(np.array([1.0, 0.0]), -3.0), (np.array([-1.0, 0.0]), -3.0)],
    )
    sol = solve_qp(q)
    print(f"Infeasible: {sol}")
    print(f"KKT residuals: {kkt_residuals(q, sol)}")
