"""The specific laminate families the rest of the package realizes.

`doubling_laminate(p, k)` splits k*Id in two rank-one moves into

    alpha * delta_{kA}  +  beta(1-alpha) * delta_{2k Id}  +  (1-beta)(1-alpha) * delta_{kB}

with s = 2^p, alpha = (s-1)/(s+1), beta = (s+1)/(2s),
A = diag((s-3)/(s-1), 1), B = diag(2, -2/(s-1)). The surviving large atom
doubles the scale and carries weight exactly 2^-p, which is what makes the
cascade (`doubling_cascade`) produce diagonal-moment growth while the trace
stays positive: for p < log2(3) the A-atom's first entry is negative, and the
q-th negative-part moments grow geometrically in the cascade whenever q > p.

`staircase_params` produces the level schedule p_j = 1 + kappa/j with
kappa = 2/ln 2, where the running product of level weights 2^-p_j equals
4^-j * (j!)^... — what matters downstream is only 2^(-kappa*H_j) <= (j+1)^-2,
i.e. summable level contributions against exploding negative parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from subhess.laminate import Laminate, elementary_split, moment
from subhess.scalars import (
    DEFAULT_PREC,
    Iv,
    IvLike,
    Undecided,
    as_iv,
    dyadic_floor_iv,
    ln_iv,
    log2_iv,
    pow2,
    rpow,
)
from subhess.sym2 import SymMat2


@dataclass(frozen=True)
class DoublingParams:
    p: Iv
    two_p: Iv
    k: Fraction
    alpha: Iv
    beta: Iv
    mat_a: SymMat2
    mat_b: SymMat2
    mat_m: SymMat2
    mat_id: SymMat2
    mat_2id: SymMat2

    @staticmethod
    def make(
        p: IvLike,
        k: Fraction = Fraction(1),
        two_p: Optional[IvLike] = None,
        prec: int = DEFAULT_PREC,
    ) -> "DoublingParams":
        pv = as_iv(p)
        if not pv.certainly_gt(1):
            raise ValueError(f"exponent must be certainly > 1, got {pv}")
        s = as_iv(two_p) if two_p is not None else pow2(pv, prec)
        if not s.certainly_gt(2):
            raise ValueError(f"2^p must be certainly > 2, got {s}")
        alpha = (s - 1) / (s + 1)
        beta = (s + 1) / (2 * s)
        a11 = (s - 3) / (s - 1)
        b22 = -2 / (s - 1)
        kk = Iv(k)
        return DoublingParams(
            p=pv,
            two_p=s,
            k=k,
            alpha=alpha,
            beta=beta,
            mat_a=SymMat2.diag(kk * a11, kk),
            mat_b=SymMat2.diag(2 * kk, kk * b22),
            mat_m=SymMat2.diag(2 * kk, kk),
            mat_id=SymMat2.diag(kk, kk),
            mat_2id=SymMat2.diag(2 * kk, 2 * kk),
        )

    @property
    def weights(self) -> tuple[Iv, Iv, Iv]:
        """(A-atom, doubling atom, B-atom) weights; middle one is 2^-p."""
        return (
            self.alpha,
            self.beta * (1 - self.alpha),
            (1 - self.beta) * (1 - self.alpha),
        )


def p_threshold(prec: int = DEFAULT_PREC) -> Iv:
    """Exponent below which the A-atom's first diagonal entry is negative."""
    return log2_iv(3, prec)


def doubling_laminate(
    p: IvLike,
    k: Fraction = Fraction(1),
    two_p: Optional[IvLike] = None,
    prec: int = DEFAULT_PREC,
) -> tuple[Laminate, DoublingParams]:
    params = DoublingParams.make(p, k, two_p, prec)
    lam = Laminate.dirac(params.mat_id)
    # split along e1: k*Id = alpha * kA + (1-alpha) * kM
    lam = elementary_split(lam, 0, params.alpha, params.mat_a, params.mat_m)
    # split along e2: k*M = beta * 2k*Id + (1-beta) * kB
    lam = elementary_split(lam, 1, params.beta, params.mat_2id, params.mat_b)
    return lam, params


def l1_growth_constant(params: DoublingParams) -> Iv:
    """C(p): the l1-diagonal moment of the unit-scale laminate.

    Closed form 4/s + 4/(s+1) for s < 3 and 2 + 4/(s(s+1)) for s >= 3;
    certified > 2 for every p > 1. Computed here from the definition so the
    closed forms can be cross-checked in tests.
    """
    s = params.two_p
    alpha, beta = params.alpha, params.beta
    a11_abs = abs((s - 3) / (s - 1))
    w_mid = beta * (1 - alpha)
    w_b = (1 - beta) * (1 - alpha)
    return alpha * (a11_abs + 1) + w_mid * 4 + w_b * (2 + 2 / (s - 1))


def neg_moment_constant(params: DoublingParams, q: IvLike, i: int, prec: int = DEFAULT_PREC) -> Iv:
    """c_i(p, q): q-th negative-part moment of diagonal entry i, unit scale.

    i = 0 is zero (not just small) when p >= log2(3); i = 1 is positive for
    every p > 1.
    """
    s = params.two_p
    qv = as_iv(q)
    if i == 0:
        neg = ((s - 3) / (s - 1)).neg_part()
        if neg.hi == 0:
            return Iv(0)
        return params.alpha * rpow(neg, qv, prec)
    if i == 1:
        w_b = (1 - params.beta) * (1 - params.alpha)
        return w_b * rpow(2 / (s - 1), qv, prec)
    raise ValueError(f"diagonal index must be 0 or 1, got {i}")


def l1_limit_constant(params: DoublingParams, prec: int = DEFAULT_PREC) -> Iv:
    """a_inf = 2 + (C-2)/(1 - 2^(1-p)): the cascade's l1-diagonal ceiling."""
    c = l1_growth_constant(params)
    lam_half = 2 / params.two_p  # 2^(1-p)
    if not lam_half.certainly_lt(1):
        raise Undecided(f"2^(1-p) not certainly < 1: {lam_half}")
    return 2 + (c - 2) / (1 - lam_half)


def verify_doubling(
    lam: Laminate,
    params: DoublingParams,
    q_list: Sequence[IvLike] = (),
    width_tol: Fraction = Fraction(1, 10**9),
    prec: int = DEFAULT_PREC,
) -> dict:
    """Certified item-by-item report on a doubling laminate.

    Each item: {'ok': bool, ...values...}; 'ok' asserts the certified claim.
    The negative-part item for i = 0 reports applicable=False (and ok=True
    vacuously) when p >= log2(3) certified.
    """
    report: dict[str, dict] = {}
    k = Iv(params.k)

    atoms = lam.atoms
    bc_resid_entries = []
    from subhess.laminate import barycenter  # local to avoid cycle at import time

    bc = barycenter(lam)
    target = SymMat2.diag(k, k)
    ok = True
    for entry in (bc - target).entries():
        bc_resid_entries.append(entry)
        ok = ok and entry.contains(0) and entry.width <= width_tol
    report["barycenter"] = {"ok": ok, "residual": bc_resid_entries}

    mass = Iv(0)
    for atom in atoms:
        mass = mass + atom.weight
    report["mass"] = {"ok": mass.contains(1) and mass.width <= width_tol, "mass": mass}

    # the doubling atom is the unique one equal to 2k*Id
    mid = atoms[1]
    lam_weight = 1 / params.two_p
    diff = mid.weight - lam_weight
    report["doubling_weight"] = {
        "ok": diff.contains(0) and diff.width <= width_tol,
        "weight": mid.weight,
        "target": lam_weight,
    }

    diag_ok = all(a.matrix.a12 == 0 for a in atoms)
    traces = [a.matrix.trace() for a in atoms]
    tr_pos = all(t.certainly_gt(0) for t in traces)
    tr_ab = atoms[0].matrix.trace() - atoms[2].matrix.trace()
    report["trail_interior"] = {
        "ok": diag_ok and tr_pos and tr_ab.contains(0),
        "diagonal": diag_ok,
        "min_trace": Iv.hull(traces),
        "trace_a_minus_b": tr_ab,
    }

    c_val = l1_growth_constant(params)
    measured = moment(lam, "l1_diag") / k
    report["l1_moment"] = {
        "ok": c_val.certainly_gt(2)
        and (measured - c_val).contains(0)
        and measured.width <= width_tol,
        "constant": c_val,
        "measured": measured,
    }

    thresh = p_threshold(prec)
    for q in q_list:
        qv = as_iv(q)
        key = f"neg_moment_q={qv.mid}"
        row: dict = {}
        if params.p.certainly_lt(thresh):
            c0 = neg_moment_constant(params, qv, 0, prec)
            m0 = moment(lam, ("neg_pow", 0, qv)) / rpow(k, qv, prec)
            row["i0"] = {
                "applicable": True,
                "ok": c0.certainly_gt(0) and (m0 - c0).contains(0),
                "constant": c0,
                "measured": m0,
            }
        elif params.p.certainly_gt(thresh):
            m0 = moment(lam, ("neg_pow", 0, qv))
            row["i0"] = {"applicable": False, "ok": m0 == Iv(0), "measured": m0}
        else:
            raise Undecided(f"p vs log2(3) undecided: {params.p}")
        c1 = neg_moment_constant(params, qv, 1, prec)
        m1 = moment(lam, ("neg_pow", 1, qv)) / rpow(k, qv, prec)
        row["i1"] = {
            "applicable": True,
            "ok": c1.certainly_gt(0) and (m1 - c1).contains(0),
            "constant": c1,
            "measured": m1,
        }
        row["ok"] = row["i1"]["ok"] and row["i0"]["ok"]
        report[key] = row

    report["ok"] = all(v["ok"] for v in report.values() if isinstance(v, dict))
    return report


# -- the cascade -------------------------------------------------------------------


def doubling_cascade(
    p: IvLike,
    m: int,
    two_p: Optional[IvLike] = None,
    prec: int = DEFAULT_PREC,
) -> tuple[Laminate, list[DoublingParams]]:
    """m rounds of doubling starting from delta_Id; scale doubles each round.

    Returns the final laminate and the per-round params. Round j (0-based)
    splits the weight-(2^-p)^j atom at matrix 2^j * Id; the doubled atom's
    flat index after a round at index i is i + 1.
    """
    if m < 0:
        raise ValueError("cascade length must be >= 0")
    lam = Laminate.dirac(SymMat2.identity(1))
    rounds: list[DoublingParams] = []
    idx = 0
    for j in range(m):
        params = DoublingParams.make(p, Fraction(2**j), two_p, prec)
        lam = elementary_split(lam, idx, params.alpha, params.mat_a, params.mat_m)
        lam = elementary_split(lam, idx + 1, params.beta, params.mat_2id, params.mat_b)
        idx += 1
        rounds.append(params)
    return lam, rounds


def cascade_moment_table(
    p: IvLike,
    q_list: Sequence[IvLike],
    m_max: int,
    two_p: Optional[IvLike] = None,
    prec: int = DEFAULT_PREC,
) -> list[dict]:
    """Direct vs recursion values of the cascade moments, m = 0..m_max.

    Row fields: m, a_direct, a_rec (l1 diagonal), and per q: b0/b1 direct and
    recursion values. The recursions are
        a_m = a_{m-1} + (C-2) * 2^((1-p)(m-1)),
        b_{m,i} = b_{m-1,i} + c_i * 2^((q-p)(m-1)),
    seeded at a_0 = 2, b_{0,i} = 0.
    """
    params0 = DoublingParams.make(p, Fraction(1), two_p, prec)
    c_const = l1_growth_constant(params0)
    lam_w = 1 / params0.two_p
    q_vals = [as_iv(q) for q in q_list]
    c_i = {(i, qi): neg_moment_constant(params0, qv, i, prec) for qi, qv in enumerate(q_vals) for i in (0, 1)}

    rows: list[dict] = []
    a_rec = Iv(2)
    b_rec = {(i, qi): Iv(0) for qi in range(len(q_vals)) for i in (0, 1)}
    lam = Laminate.dirac(SymMat2.identity(1))
    idx = 0
    for m in range(m_max + 1):
        row: dict = {"m": m}
        row["a_direct"] = moment(lam, "l1_diag")
        row["a_rec"] = a_rec
        for qi, qv in enumerate(q_vals):
            for i in (0, 1):
                row[f"b{i}_direct_q{qi}"] = moment(lam, ("neg_pow", i, qv))
                row[f"b{i}_rec_q{qi}"] = b_rec[(i, qi)]
        rows.append(row)
        if m == m_max:
            break
        # advance: split the doubling atom, update recursions
        params = DoublingParams.make(p, Fraction(2**m), two_p, prec)
        lam = elementary_split(lam, idx, params.alpha, params.mat_a, params.mat_m)
        lam = elementary_split(lam, idx + 1, params.beta, params.mat_2id, params.mat_b)
        idx += 1
        growth = lam_w.pow_int(m) * Iv(2).pow_int(m)  # 2^((1-p)m)
        a_rec = a_rec + (c_const - 2) * growth
        for qi, qv in enumerate(q_vals):
            scale_q = rpow(Iv(2).pow_int(m), qv, prec)  # (2^m)^q
            for i in (0, 1):
                b_rec[(i, qi)] = b_rec[(i, qi)] + c_i[(i, qi)] * lam_w.pow_int(m) * scale_q
    return rows


# -- staircase schedule --------------------------------------------------------------


@dataclass(frozen=True)
class StairLevel:
    j: int
    p: Iv
    k: Fraction
    eps: Fraction


def staircase_params(
    levels: int,
    prec: int = DEFAULT_PREC,
    eps_bits: int = 30,
) -> list[StairLevel]:
    """Level schedule: p_j = 1 + kappa/j (kappa = 2/ln 2), k_j = 2^(j-1),
    eps_j = dyadic floor of min(4^-j, 2^-p_j).

    The eps_j <= 2^-p_j strengthening keeps the level-area two-sided bounds
    inside a factor-2 corridor of prod 2^-p_m.
    """
    if levels < 1:
        raise ValueError("need at least one level")
    kappa = 2 / ln_iv(2, prec)
    out: list[StairLevel] = []
    for j in range(1, levels + 1):
        pj = 1 + kappa / j
        cap = Iv.hull([pow2(-pj, prec)])
        eps_cap = min(Fraction(1, 4**j), cap.lo)
        eps = dyadic_floor_iv(Iv(eps_cap), eps_bits)
        if eps <= 0:
            raise ValueError(f"level {j} epsilon underflow")
        out.append(StairLevel(j=j, p=pj, k=Fraction(2 ** (j - 1)), eps=eps))
    return out
