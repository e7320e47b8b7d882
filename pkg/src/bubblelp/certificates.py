"""Independent verification of everything the solver emits.

These checkers are the trust anchor for the test suite and for the `check`
CLI command.  They deliberately share no code with the solving path beyond
plain `fractions.Fraction`: linear solves, rank computations and the
canonical row-basis rule are reimplemented here from scratch, so a defect in
the solver's linear algebra cannot silently vouch for itself.

An infeasibility verdict has no single witness vector.  Its proof object is
the audit trail: the ordered list of bound updates, each justified by a
separating pair that is valid over the current box, followed by variable
fixings at the threshold and a terminal reduced system with no nonnegative
solution.  `replay_audit` re-derives every step of that trail from the
original problem data alone and accepts only if the whole chain verifies.
"""

from __future__ import annotations

import math
from fractions import Fraction

_ZERO = Fraction(0)


def _fvec(xs) -> list[Fraction]:
    return [Fraction(x) for x in xs]


def _fmat(rows) -> list[list[Fraction]]:
    return [_fvec(r) for r in rows]


def check_feasible(a, b, x) -> bool:
    """Exact test of Ax = b and x >= 0."""
    am = _fmat(a)
    bv = _fvec(b)
    xv = _fvec(x)
    if any(len(row) != len(xv) for row in am) or len(am) != len(bv):
        raise ValueError("dimension mismatch in check_feasible")
    if any(xi < 0 for xi in xv):
        return False
    for row, bi in zip(am, bv):
        if sum((r * xi for r, xi in zip(row, xv)), _ZERO) != bi:
            return False
    return True


def check_separator(a, b, u, n_active, v, w) -> bool:
    """Validity of (v, w) as a box separator.

    True iff w >= 0, w != 0 and the strict inequality
        (v^T A + w^T) x  <  v^T b + (1/(2 n_active)) w^T u
    holds for every x in {0 <= x <= u}.  The left-hand maximum over the box
    is sum_j u_j * max(0, (A^T v + w)_j), attained at a vertex.
    """
    am = _fmat(a)
    bv = _fvec(b)
    uv = _fvec(u)
    vv = _fvec(v)
    wv = _fvec(w)
    n = len(uv)
    if len(wv) != n or len(vv) != len(am) or any(len(row) != n for row in am):
        return False
    if n_active <= 0:
        return False
    if any(wj < 0 for wj in wv) or all(wj == 0 for wj in wv):
        return False
    lhs = _ZERO
    for j in range(n):
        coeff = wv[j]
        for r in range(len(am)):
            if am[r][j] != 0 and vv[r] != 0:
                coeff += am[r][j] * vv[r]
        if coeff > 0:
            lhs += uv[j] * coeff
    rhs = sum((vi * bi for vi, bi in zip(vv, bv)), _ZERO)
    rhs += sum((wj * uj for wj, uj in zip(wv, uv)), _ZERO) / (2 * n_active)
    return lhs < rhs


def check_farkas(a, b, ell, v, w) -> bool:
    """True iff A^T v + w = 0, w >= 0 and b^T v + ell^T w > 0, exactly."""
    am = _fmat(a)
    bv = _fvec(b)
    lv = _fvec(ell)
    vv = _fvec(v)
    wv = _fvec(w)
    n = len(lv)
    if len(wv) != n or len(vv) != len(am) or any(len(row) != n for row in am):
        return False
    if any(wj < 0 for wj in wv):
        return False
    for j in range(n):
        coeff = wv[j]
        for r in range(len(am)):
            coeff += am[r][j] * vv[r]
        if coeff != 0:
            return False
    value = sum((vi * bi for vi, bi in zip(vv, bv)), _ZERO)
    value += sum((wj * lj for wj, lj in zip(wv, lv)), _ZERO)
    return value > 0


def _eliminate(rows: list[list[Fraction]]) -> tuple[list[int], list[int]]:
    """In-place forward elimination; returns (kept row indices, pivot cols)."""
    kept: list[int] = []
    pivot_cols: list[int] = []
    ncols = len(rows[0]) if rows else 0
    for r in range(len(rows)):
        row = rows[r]
        for k, pc in zip(kept, pivot_cols):
            f = row[pc]
            if f == 0:
                continue
            piv = rows[k]
            f = f / piv[pc]
            for j in range(ncols):
                if piv[j] != 0:
                    row[j] -= f * piv[j]
        pc = next((j for j, val in enumerate(row) if val != 0), None)
        if pc is not None:
            kept.append(r)
            pivot_cols.append(pc)
    return kept, pivot_cols


def _rank(a) -> int:
    rows = _fmat(a)
    if not rows or not rows[0]:
        return 0
    kept, _ = _eliminate(rows)
    return len(kept)


def canonical_row_basis(a) -> list[int]:
    """First maximal independent row subset, scanning rows top to bottom.

    This is the shared convention for which rows of an input system carry
    the run: any implementation following the same rule selects the same set.
    """
    rows = _fmat(a)
    if not rows or not rows[0]:
        return []
    kept, _ = _eliminate(rows)
    return kept


def _solve_exact(a, b):
    """Solve Ax = b exactly over the rationals, using all rows.

    Returns ("inconsistent", None), ("unique", x) or ("underdetermined", None).
    """
    am = _fmat(a)
    bv = _fvec(b)
    m = len(am)
    n = len(am[0]) if am else 0
    if n == 0:
        if any(bi != 0 for bi in bv):
            return "inconsistent", None
        return "unique", []
    aug = [am[r] + [bv[r]] for r in range(m)]
    kept: list[int] = []
    pivot_cols: list[int] = []
    for r in range(m):
        row = aug[r]
        for k, pc in zip(kept, pivot_cols):
            f = row[pc]
            if f == 0:
                continue
            piv = aug[k]
            f = f / piv[pc]
            for j in range(n + 1):
                if piv[j] != 0:
                    row[j] -= f * piv[j]
        pc = next((j for j, val in enumerate(row[:n]) if val != 0), None)
        if pc is None:
            if row[n] != 0:
                return "inconsistent", None
        else:
            kept.append(r)
            pivot_cols.append(pc)
    if len(kept) < n:
        return "underdetermined", None
    x = [_ZERO] * n
    for k in range(len(kept) - 1, -1, -1):
        row = aug[kept[k]]
        pc = pivot_cols[k]
        s = row[n]
        for j in range(pc + 1, n):
            if row[j] != 0:
                s -= row[j] * x[j]
        x[pc] = s / row[pc]
    return "unique", x


def _delta_sq_of(a_rows, b_entries) -> int:
    """Product of the len(a_rows) largest squared column norms of (A, b)."""
    m = len(a_rows)
    if m == 0:
        return 1
    n = len(a_rows[0])
    norms = []
    for j in range(n):
        norms.append(sum(int(a_rows[r][j]) ** 2 for r in range(m)))
    norms.append(sum(int(x) ** 2 for x in b_entries))
    norms.sort(reverse=True)
    out = 1
    for v in norms[:m]:
        out *= v
    return out


def _isqrt_ceil(k: int) -> int:
    c = math.isqrt(k)
    return c if c * c == k else c + 1


def _grid_ceil(x: Fraction, step: Fraction) -> Fraction:
    q, r = divmod(x.numerator * step.denominator, x.denominator * step.numerator)
    if r != 0:
        q += 1
    return q * step


def _entry_witness_ok(a_act, b, u, n_act, v, w) -> bool:
    """Exact structural identities pinning (v, w) to a genuine solver state.

    Either A^T v + w = 0 with b.v + ell.w > 0 (an emptiness certificate for
    the shifted region), or the implied iterate zhat = D^{-1}(A^T v + w)
    solves the active system with ||zhat||_D^2 = b.v + ell.w > 4*n_act.
    The box inequality alone has slack; these equalities do not, which is
    what makes tampered pairs detectable.
    """
    m = len(a_act)
    coeff = []
    for j in range(n_act):
        c = w[j]
        for r in range(m):
            if a_act[r][j] != 0 and v[r] != 0:
                c += a_act[r][j] * v[r]
        coeff.append(c)
    ell_w = sum((wj * uj for wj, uj in zip(w, u)), _ZERO) / (2 * n_act)
    value = sum((vi * bi for vi, bi in zip(v, b)), _ZERO) + ell_w
    if all(c == 0 for c in coeff):
        return value > 0
    zhat = [coeff[j] * u[j] * u[j] / 4 for j in range(n_act)]
    for r in range(m):
        lhs = sum((a_act[r][j] * zhat[j] for j in range(n_act)), _ZERO)
        if lhs != b[r]:
            return False
    norm_sq = sum((coeff[j] * zhat[j] for j in range(n_act)), _ZERO)
    return norm_sq == value and norm_sq > 4 * n_act


def replay_audit(a, b, report) -> bool:
    """Re-derive a report's verdict from the problem data alone.

    `report` is the parsed JSON report emitted by the solver (rationals as
    "p/q" strings or numbers).  For a feasible verdict the point is checked
    directly.  For an infeasible verdict every audit entry is replayed: the
    separating pair must be valid over the recorded box, the shrunk and
    rounded bounds are recomputed and compared, each fixing must clear the
    1/delta_hat threshold, and the terminal reduced system is re-solved here
    and must admit no nonnegative solution.  Bound entries attached to a
    feasible report are validated the same way.
    """
    am = _fmat(a)
    bv = _fvec(b)
    m = len(am)
    n = len(am[0]) if am else 0
    if not isinstance(report, dict):
        return False
    verdict = report.get("verdict")
    if verdict not in ("feasible", "infeasible"):
        return False
    entries = list(report.get("audit") or [])
    if verdict == "feasible":
        x = report.get("x")
        if x is None or len(x) != n:
            return False
        if not check_feasible(a, b, _fvec(x)):
            return False
        if not entries:
            return True
    bound_entries = [e for e in entries if "terminal" not in e]

    if bound_entries:
        basis = canonical_row_basis(am)
        a_sel = [am[r] for r in basis]
        b_sel = [bv[r] for r in basis]
        delta_sq = _delta_sq_of(a_sel, b_sel)
        if str(delta_sq) != str(report.get("delta_sq")):
            return False
        delta_hat = _isqrt_ceil(delta_sq)
        threshold = Fraction(1, delta_hat)
        active = list(range(n))
        u = {j: Fraction(delta_hat) for j in active}
        for entry in bound_entries:
            try:
                e_active = [int(j) for j in entry["active"]]
                u_before = _fvec(entry["u_before"])
                v = _fvec(entry["v"])
                w = _fvec(entry["w"])
                u_after = _fvec(entry["u_after"])
                fixed_now = [int(j) for j in entry["fixed"]]
            except (KeyError, ValueError, TypeError):
                return False
            if e_active != active:
                return False
            n_act = len(active)
            if len(u_before) != n_act or len(w) != n_act or len(u_after) != n_act:
                return False
            if len(v) != m:
                return False
            if [u[j] for j in active] != u_before:
                return False
            a_act = [[am[r][j] for j in active] for r in range(m)]
            if not check_separator(a_act, bv, u_before, n_act, v, w):
                return False
            if not _entry_witness_ok(a_act, bv, u_before, n_act, v, w):
                return False
            # Claim-1 shrink, then ceiling to the 1/(3 n delta_hat) grid,
            # capped at the previous bound so u never increases.
            s = sum((u_before[t] * w[t] for t in range(n_act)), _ZERO)
            grid = Fraction(1, 3 * n_act * delta_hat)
            u_prime = []
            for t in range(n_act):
                if w[t] == 0:
                    u_prime.append(u_before[t])
                else:
                    u_prime.append(min(u_before[t], s / (2 * n_act * w[t])))
            p_best = max(range(n_act), key=lambda t: (u_before[t] * w[t], -t))
            if u_prime[p_best] > u_before[p_best] / 2:
                return False
            u_round = [
                min(u_before[t], _grid_ceil(u_prime[t], grid)) for t in range(n_act)
            ]
            if u_round != u_after:
                return False
            expect_fixed = [active[t] for t in range(n_act) if u_round[t] < threshold]
            if expect_fixed != sorted(fixed_now):
                return False
            for t in range(n_act):
                u[active[t]] = u_round[t]
            for j in fixed_now:
                del u[j]
            active = [j for j in active if j not in set(fixed_now)]

    if verdict == "feasible":
        return True

    # Terminal reduced system: substitute the fixed variables with zero and
    # re-solve with every original row; only a system with no nonnegative
    # solution supports the verdict.
    if bound_entries:
        final_active = active
    else:
        final_active = list(range(n))
    a_fin = [[am[r][j] for j in final_active] for r in range(m)]
    status, x = _solve_exact(a_fin, bv)
    if status == "inconsistent":
        return True
    if status == "unique":
        return any(xi < 0 for xi in x)
    return False
