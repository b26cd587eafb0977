"""IOU geometry and minimum-cost bipartite assignment.

Association everywhere in this toolkit is spatial-overlap matching solved
as a rectangular assignment problem: cost 1 - IOU per candidate pair, a
feasibility gate on the overlap, maximal pair count first, then minimal
total cost. Ties between equal-cost optima are broken toward the
lexicographically smallest (row, col) pair sequence so results are
reproducible across runs.

The solver is the O(n^3) shortest-augmenting-path form of the Hungarian
method on a padded square matrix. ``brute_force_assign`` provides an
independent exhaustive oracle for small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .mot_io import Box

# Accepted drift between a tie-refined matching and the solver optimum.
# True ties agree to float-summation noise (~1e-15); anything above this
# means the tolerance admitted a non-tie, so the refinement is discarded.
_REFINE_COST_TOL = 1e-12


def iou(a: Box, b: Box) -> float:
    """Intersection area over union area of two boxes, in [0, 1]."""
    a_right, a_bottom = a.right, a.bottom
    b_right, b_bottom = b.right, b.bottom
    iw = min(a_right, b_right) - max(a.left, b.left)
    if iw <= 0:
        return 0.0
    ih = min(a_bottom, b_bottom) - max(a.top, b.top)
    if ih <= 0:
        return 0.0
    intersection = iw * ih
    # Areas use the same edge arithmetic as the intersection so identical
    # boxes score exactly 1.0 despite rounding in left + width.
    area_a = (a_right - a.left) * (a_bottom - a.top)
    area_b = (b_right - b.left) * (b_bottom - b.top)
    return intersection / (area_a + area_b - intersection)


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise association costs plus a feasibility mask.

    ``costs[i][j]`` is in [0, 1]; infeasible cells are never selected by
    any solver in this module.
    """

    costs: tuple[tuple[float, ...], ...]
    feasible: tuple[tuple[bool, ...], ...]

    @property
    def rows(self) -> int:
        return len(self.costs)

    @property
    def cols(self) -> int:
        return len(self.costs[0]) if self.costs else 0


@dataclass(frozen=True)
class Assignment:
    """A legal partial matching: each row and column used at most once."""

    pairs: tuple[tuple[int, int, float], ...]

    @property
    def total_cost(self) -> float:
        return sum(cost for _, _, cost in self.pairs)

    @property
    def pair_count(self) -> int:
        return len(self.pairs)

    def as_index_pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j, _ in self.pairs]


def build_iou_cost(set_a: Sequence[Box], set_b: Sequence[Box], gate: float = 0.0,
                   *, inclusive: bool = False) -> CostMatrix:
    """Cost matrix with cost 1 - IOU and feasibility gated on the overlap.

    A cell is feasible iff its IOU exceeds ``gate`` (or reaches it when
    ``inclusive`` is set, as the thresholded detection measures require).
    """
    if not 0.0 <= gate < 1.0 and not (inclusive and gate == 1.0):
        raise ValueError("gate must lie in [0, 1)")
    costs = []
    feasible = []
    for a in set_a:
        cost_row = []
        feas_row = []
        for b in set_b:
            overlap = iou(a, b)
            cost_row.append(1.0 - overlap)
            feas_row.append(overlap >= gate if inclusive else overlap > gate)
        costs.append(tuple(cost_row))
        feasible.append(tuple(feas_row))
    return CostMatrix(costs=tuple(costs), feasible=tuple(feasible))


def _min_cost_perfect(square: list[list[float]]) -> tuple[list[int], list[float], list[float]]:
    """Min-cost perfect matching on a square matrix (shortest augmenting paths).

    Returns (col_of_row, row_potentials, col_potentials). The potentials are
    optimal duals: reduced costs are non-negative and zero on matched cells,
    which is what the tie-break refinement needs.
    """
    n = len(square)
    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    row_of_col = [0] * (n + 1)  # 1-based rows; col index n+... col 0 is scratch
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            delta = INF
            j1 = -1
            cost_row = square[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost_row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[row_of_col[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
    col_of_row = [-1] * n
    for j in range(1, n + 1):
        col_of_row[row_of_col[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _lexicographic_refine(square: list[list[float]], col_of_row: list[int],
                          u: list[float], v: list[float],
                          candidate: list[list[bool]]) -> list[int]:
    """Nudge an optimal matching toward the lexicographically smallest optimum.

    Complementary slackness confines every equal-cost optimum to the tight
    cells of the duals, so we greedily re-match each row to its smallest
    tight candidate column, displacing other rows along alternating paths
    within the tight subgraph. Rows already processed stay locked.
    """
    n = len(square)
    scale = max(1.0, max(abs(x) for row in square for x in row)) if n else 1.0
    tol = 1e-9 * scale
    tight = [[square[i][j] - u[i] - v[j] <= tol for j in range(n)] for i in range(n)]
    row_of_col = [-1] * n
    for i, j in enumerate(col_of_row):
        row_of_col[j] = i
    locked_col = [False] * n

    def reroute(row: int, freed_col: int, visited: list[bool]) -> bool:
        # Kuhn-style augmenting search for a new column for `row`.
        for j in range(n):
            if visited[j] or locked_col[j] or not tight[row][j]:
                continue
            visited[j] = True
            if j == freed_col or row_of_col[j] == -1:
                col_of_row[row] = j
                row_of_col[j] = row
                return True
            displaced = row_of_col[j]
            if reroute(displaced, freed_col, visited):
                col_of_row[row] = j
                row_of_col[j] = row
                return True
        return False

    for i in range(n):
        current = col_of_row[i]
        limit = current if candidate[i][current] else n
        for j in range(n):
            if j >= limit:
                break
            if locked_col[j] or not candidate[i][j] or not tight[i][j]:
                continue
            displaced = row_of_col[j]
            if displaced == i:
                continue
            saved_cols = list(col_of_row)
            saved_rows = list(row_of_col)
            col_of_row[i] = j
            row_of_col[j] = i
            col_of_row[displaced] = -1
            row_of_col[current] = -1
            # Column j is taken by row i now; the search must not displace it.
            visited = [False] * n
            visited[j] = True
            if reroute(displaced, current, visited):
                break
            col_of_row[:] = saved_cols
            row_of_col[:] = saved_rows
        # Only a real pair joins the output prefix; a row parked on padding
        # or a blocked cell may still be shuffled by later reroutes (it can
        # never gain a real pair: that optimum would have been found here).
        if candidate[i][col_of_row[i]]:
            locked_col[col_of_row[i]] = True
    return col_of_row


def _solve_padded(costs: Sequence[Sequence[float]], usable: Sequence[Sequence[bool]],
                  fill: float, blocked: float) -> list[tuple[int, int]]:
    """Shared driver: pad to square, solve, tie-refine, extract usable pairs.

    ``fill`` is the cost of padding cells (one per unmatched row/column in
    any perfect matching), ``blocked`` the cost standing in for unusable
    real cells. Returns the selected usable (row, col) pairs, row-sorted.
    """
    n_rows = len(costs)
    n_cols = len(costs[0]) if n_rows else 0
    if n_rows == 0 or n_cols == 0:
        return []
    n = max(n_rows, n_cols)
    square = [[fill] * n for _ in range(n)]
    candidate = [[False] * n for _ in range(n)]
    for i in range(n_rows):
        for j in range(n_cols):
            if usable[i][j]:
                square[i][j] = costs[i][j]
                candidate[i][j] = True
            else:
                square[i][j] = blocked

    col_of_row, u, v = _min_cost_perfect(square)

    def extract(mapping: list[int]) -> list[tuple[int, int]]:
        return [(i, mapping[i]) for i in range(n_rows)
                if mapping[i] < n_cols and candidate[i][mapping[i]]]

    base_pairs = extract(col_of_row)
    base_cost = sum(costs[i][j] for i, j in base_pairs)
    refined = _lexicographic_refine(square, list(col_of_row), u, v, candidate)
    refined_pairs = extract(refined)
    refined_cost = sum(costs[i][j] for i, j in refined_pairs)
    if (len(refined_pairs) == len(base_pairs)
            and abs(refined_cost - base_cost) <= _REFINE_COST_TOL * max(1.0, abs(base_cost))):
        return sorted(refined_pairs)
    return sorted(base_pairs)


def hungarian_solve(matrix: CostMatrix) -> Assignment:
    """Maximal-cardinality, minimum-cost matching over the feasible cells.

    Among all matchings that use only feasible cells, the pair count is
    maximized first and the total cost minimized second; equal-cost optima
    resolve to the lexicographically smallest pair sequence. Empty or fully
    infeasible matrices yield an empty assignment.
    """
    n_rows, n_cols = matrix.rows, matrix.cols
    if n_rows == 0 or n_cols == 0:
        return Assignment(pairs=())
    # Padding cells cost 0 and blocked cells cost more than any achievable
    # real total, so minimizing the padded perfect matching maximizes the
    # number of feasible pairs before it minimizes their summed cost.
    blocked = float(max(n_rows, n_cols) + 1)
    pairs = _solve_padded(matrix.costs, matrix.feasible, fill=0.0, blocked=blocked)
    return Assignment(pairs=tuple((i, j, matrix.costs[i][j]) for i, j in pairs))


def max_profit_pairs(profit: Sequence[Sequence[float]]) -> list[tuple[int, int]]:
    """Matching maximizing total profit; zero-profit cells count as unmatched.

    Used for trajectory-level association where the objective is a plain
    maximum (no cardinality-first rule): leaving a pair unmatched is free.
    """
    n_rows = len(profit)
    n_cols = len(profit[0]) if n_rows else 0
    if n_rows == 0 or n_cols == 0:
        return []
    top = max((x for row in profit for x in row), default=0.0)
    if top <= 0.0:
        return []
    # Shift so all entries are non-negative; padded perfect matchings all
    # have exactly n cells, so the constant shift cannot change the optimum.
    costs = [[top - x for x in row] for row in profit]
    usable = [[x > 0.0 for x in row] for row in profit]
    return _solve_padded(costs, usable, fill=top, blocked=top)


def brute_force_assign(matrix: CostMatrix) -> Assignment:
    """Exhaustive oracle: best maximal feasible matching by enumeration.

    Enumerates row choices in lexicographic order with branch-and-bound
    pruning, so it returns the same (count, cost, tie-break) optimum the
    solver must produce. Limited to max(rows, cols) <= 7.
    """
    n_rows, n_cols = matrix.rows, matrix.cols
    if max(n_rows, n_cols, 0) > 7:
        raise ValueError("brute_force_assign supports at most 7 rows/columns")
    if n_rows == 0 or n_cols == 0:
        return Assignment(pairs=())

    max_count = _max_matching_size(matrix.feasible, n_rows, n_cols)
    best_cost = math.inf
    best_pairs: list[tuple[int, int]] | None = None
    chosen: list[tuple[int, int]] = []

    def recurse(row: int, used_cols: int, count: int, cost: float) -> None:
        nonlocal best_cost, best_pairs
        # Enumeration is lexicographic (columns ascending, skip last), so the
        # first matching reaching the minimum is the tie-break winner; only
        # strict improvements are accepted afterwards.
        if count + (n_rows - row) < max_count or cost >= best_cost:
            return
        if row == n_rows:
            if count == max_count:
                best_cost = cost
                best_pairs = list(chosen)
            return
        for col in range(n_cols):
            bit = 1 << col
            if used_cols & bit or not matrix.feasible[row][col]:
                continue
            chosen.append((row, col))
            recurse(row + 1, used_cols | bit, count + 1, cost + matrix.costs[row][col])
            chosen.pop()
        recurse(row + 1, used_cols, count, cost)

    recurse(0, 0, 0, 0.0)
    assert best_pairs is not None
    return Assignment(pairs=tuple((i, j, matrix.costs[i][j]) for i, j in best_pairs))


def brute_force_max_profit(profit: Sequence[Sequence[float]]) -> float:
    """Exhaustive total-profit optimum over all legal partial matchings."""
    n_rows = len(profit)
    n_cols = len(profit[0]) if n_rows else 0
    if max(n_rows, n_cols, 0) > 7:
        raise ValueError("brute_force_max_profit supports at most 7 rows/columns")
    best = 0.0
    cols = range(n_cols)
    for size in range(min(n_rows, n_cols), 0, -1):
        for rows in itertools.combinations(range(n_rows), size):
            for perm in itertools.permutations(cols, size):
                total = sum(max(profit[r][c], 0.0) for r, c in zip(rows, perm))
                best = max(best, total)
    return best


def _max_matching_size(feasible: Sequence[Sequence[bool]], n_rows: int, n_cols: int) -> int:
    match_of_col = [-1] * n_cols

    def try_assign(row: int, seen: list[bool]) -> bool:
        for col in range(n_cols):
            if feasible[row][col] and not seen[col]:
                seen[col] = True
                if match_of_col[col] == -1 or try_assign(match_of_col[col], seen):
                    match_of_col[col] = row
                    return True
        return False

    return sum(try_assign(row, [False] * n_cols) for row in range(n_rows))
