"""Piecewise-polynomial potentials whose Hessians realize a laminate.

One pattern level perturbs a quadratic base u0(x) = c + b.x + x.A x/2 by
psi(xi, ups) = eta(ups) * W(xi), where xi runs along the split axis and

* W is the second antiderivative of a periodic two-value wave taking the
  exact values (B-A) and (C-A) on the split axis, arranged in mirrored
  pairs so W and W' vanish at every pair boundary up to a tiny drift;
* eta is a piecewise-quadratic ramp, 0 at the perpendicular edges and 1 on
  the core, so the gradient matches the base affine map exactly on the
  whole rectangle boundary.

Cells whose Hessian equals an atom exactly host the next pattern level
through an exact affine handoff. The potential is stored symbolically: one
`PatternNode` per level with O(1) cell *classes* (all stripes of a class are
translates), so measurement is closed-form per class times multiplicity and
the object stays small even when the geometric cell count is astronomical.
Materializing actual cells is lazy and budget-capped.

Two exactness devices make the symbolic representation certified:

* the split fraction t is irrational in general, so stripe widths use a
  dyadic rounding t_hat with |t_hat - t| <= 2^-T_BITS; each pair then fails
  to close by a tiny drift, which two compensator stripes of width
  sigma = delta * 2^-SIGMA_BITS at the end of that same pair cancel exactly
  (their second-derivative offsets solve the 2x2 closure system), so
  W = W' = 0 at every pair boundary is an algebraic identity, every pair is
  an identical closed module, and no drift accumulates across the pattern;
* every numeric claim (Hessian boxes, segment distances, gradient
  deviations) is an interval computed from exact rational endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

from subhess.laminate import Laminate, SplitNode
from subhess.scalars import Iv, IvLike, as_iv, dyadic_floor_iv, dyadic_round, sqrt_iv
from subhess.sym2 import SymMat2, rank_one_connected

T_BITS = 80
SIGMA_BITS = 20  # compensator width sigma = delta / 2^SIGMA_BITS
DELTA_FLOOR_BITS = 20  # materialization guard: never enumerate finer stripes
DEFAULT_BUDGET = 10**7

ZERO = Iv(0)
HALF = Fraction(1, 2)


class BuildError(ValueError):
    pass


class NonAxisRankOne(BuildError):
    """Split direction is rank one but not a coordinate axis."""


class BudgetExceeded(RuntimeError):
    pass


def _ceil_div(a: Fraction, b: Fraction) -> int:
    q = a / b
    return -((-q.numerator) // q.denominator)


# -- ramp profile eta ---------------------------------------------------------------


@dataclass(frozen=True)
class EtaPiece:
    lo: Fraction
    hi: Fraction
    c0: Fraction
    c1: Fraction
    c2: Fraction
    rng: Iv
    d_rng: Iv
    dd: Fraction
    core: bool = False

    def value(self, u: Fraction) -> Fraction:
        return self.c0 + self.c1 * u + self.c2 * u * u

    def deriv(self, u: Fraction) -> Fraction:
        return self.c1 + 2 * self.c2 * u


def _build_etas(perp: Fraction, rho: Fraction) -> tuple[EtaPiece, ...]:
    if not 0 < 2 * rho < perp:
        raise BuildError(f"ramp height {rho} does not fit twice in {perp}")
    r2 = rho * rho
    p = perp
    pieces = (
        EtaPiece(0, rho / 2, Fraction(0), Fraction(0), 2 / r2, Iv(0, HALF), Iv(0, 2 / rho), 4 / r2),
        EtaPiece(rho / 2, rho, Fraction(-1), 4 / rho, -2 / r2, Iv(HALF, 1), Iv(0, 2 / rho), -4 / r2),
        EtaPiece(rho, p - rho, Fraction(1), Fraction(0), Fraction(0), Iv(1), Iv(0), Fraction(0), core=True),
        EtaPiece(
            p - rho,
            p - rho / 2,
            -1 + 4 * p / rho - 2 * p * p / r2,
            -4 / rho + 4 * p / r2,
            -2 / r2,
            Iv(HALF, 1),
            Iv(-2 / rho, 0),
            -4 / r2,
        ),
        EtaPiece(
            p - rho / 2,
            p,
            2 * p * p / r2,
            -4 * p / r2,
            2 / r2,
            Iv(0, HALF),
            Iv(-2 / rho, 0),
            4 / r2,
        ),
    )
    # seam identities are exact rational facts; fail loudly if broken
    assert pieces[0].value(Fraction(0)) == 0 and pieces[0].deriv(Fraction(0)) == 0
    assert pieces[0].value(rho / 2) == HALF == pieces[1].value(rho / 2)
    assert pieces[0].deriv(rho / 2) == 2 / rho == pieces[1].deriv(rho / 2)
    assert pieces[1].value(rho) == 1 and pieces[1].deriv(rho) == 0
    assert pieces[3].value(p - rho) == 1 and pieces[3].deriv(p - rho) == 0
    assert pieces[3].value(p - rho / 2) == HALF == pieces[4].value(p - rho / 2)
    assert pieces[3].deriv(p - rho / 2) == -2 / rho == pieces[4].deriv(p - rho / 2)
    assert pieces[4].value(p) == 0 and pieces[4].deriv(p) == 0
    return pieces


# -- stripe profile W ----------------------------------------------------------------


@dataclass(frozen=True)
class StripeClass:
    role: str  # 'B' | 'C' | 'comp'
    x_lo: Fraction  # offset within the pair period
    x_hi: Fraction
    w2: Iv  # W'' on the stripe
    s0: Iv  # W' at x_lo (every pair starts from the exact state (0, 0))
    v0: Iv  # W  at x_lo
    slope_rng: Iv
    value_rng: Iv


def _quad_ranges(v0: Iv, s0: Iv, w2: Iv, width: Fraction) -> tuple[Iv, Iv, Iv, Iv]:
    """(value range, slope range, end value, end slope) on [0, width]."""
    s1 = s0 + w2 * width
    v1 = v0 + s0 * width + w2 * width * width * HALF
    slope = s0.union(s1)
    vals = v0.union(v1)
    if slope.lo < 0 < slope.hi:
        # slope may vanish inside: add vertex value, or a coarse sweep bound
        # when w2's enclosure does not exclude zero
        if w2.lo > 0 or w2.hi < 0:
            vals = vals.union(v0 - s0.sq() / (2 * w2))
        else:
            vals = vals.union(v0 + Iv(0, width) * slope)
    return vals, slope, v1, s1


@dataclass
class _Profile:
    stripes: tuple[StripeClass, ...]  # 4 two-value classes + 2 compensators
    period: Fraction  # 2*delta + 2*sigma
    c1: Iv
    c2: Iv
    closure_width: Fraction  # certification width of the residual identities
    w_sup: Iv  # sup |W| over the pattern
    dw_sup: Iv  # sup |W'|


def _build_profile(
    delta: Fraction,
    sigma: Fraction,
    t_hat: Fraction,
    w2_b: Iv,
    w2_c: Iv,
) -> _Profile:
    a = t_hat * delta
    b = (1 - t_hat) * delta
    # mirrored pair B C | C B telescoped from (0, 0); the residual drift from
    # t_hat != t is cancelled by the two compensators ending the same period
    segs = [
        (Fraction(0), a, "B", w2_b),
        (a, delta, "C", w2_c),
        (delta, delta + b, "C", w2_c),
        (delta + b, 2 * delta, "B", w2_b),
    ]
    s_cur, v_cur = ZERO, ZERO
    rel: list[tuple] = []
    for x_lo, x_hi, role, w2 in segs:
        vals, slope, v_end, s_end = _quad_ranges(v_cur, s_cur, w2, x_hi - x_lo)
        rel.append((x_lo, x_hi, role, w2, s_cur, v_cur, vals, slope))
        s_cur, v_cur = s_end, v_end

    # compensators: close W and W' exactly at the period end
    s_d, v_d = s_cur, v_cur
    c1 = -(v_d / (sigma * sigma) + 3 * s_d / (2 * sigma))
    s1c = s_d + c1 * sigma
    v1c = v_d + s_d * sigma + c1 * sigma * sigma * HALF
    c2 = -s1c / sigma
    resid_s = s1c + c2 * sigma
    resid_v = v1c + s1c * sigma + c2 * sigma * sigma * HALF
    if not (resid_s.contains(0) and resid_v.contains(0)):
        raise BuildError("compensator closure identities failed")
    closure_width = max(resid_s.width, resid_v.width)

    rel.append((2 * delta, 2 * delta + sigma, "comp", c1, s_d, v_d))
    rel.append((2 * delta + sigma, 2 * delta + 2 * sigma, "comp", c2, s1c, v1c))

    stripes: list[StripeClass] = []
    for item in rel:
        x_lo, x_hi, role, w2, s0, v0 = item[:6]
        if len(item) == 8:
            vals, slope = item[6], item[7]
        else:
            vals, slope, _, _ = _quad_ranges(v0, s0, w2, x_hi - x_lo)
        stripes.append(
            StripeClass(
                role=role,
                x_lo=x_lo,
                x_hi=x_hi,
                w2=w2,
                s0=s0,
                v0=v0,
                slope_rng=slope,
                value_rng=vals,
            )
        )

    w_sup = Iv.hull([abs(s.value_rng) for s in stripes])
    dw_sup = Iv.hull([abs(s.slope_rng) for s in stripes])
    return _Profile(
        stripes=tuple(stripes),
        period=2 * delta + 2 * sigma,
        c1=c1,
        c2=c2,
        closure_width=closure_width,
        w_sup=Iv(0, w_sup.hi),
        dw_sup=Iv(0, dw_sup.hi),
    )


# -- pattern nodes -------------------------------------------------------------------


@dataclass
class ChildLink:
    node: "PatternNode"
    sub_nx: int  # subdivision of the hosting core cell along global x
    sub_ny: int


@dataclass
class PatternNode:
    tag: str
    level: int
    omega: int
    axis: int  # global axis the profile runs along
    long: Fraction  # extent along `axis`
    perp: Fraction
    base: SymMat2
    mat_b: SymMat2
    mat_c: SymMat2
    t: Iv
    t_hat: Fraction
    gamma: Iv
    delta: Fraction
    n_pairs: int
    sigma: Fraction
    rho: Fraction
    etas: tuple[EtaPiece, ...]
    profile: _Profile
    eps_h: Fraction
    eps_a: Fraction
    ball_sq: Iv  # certified sup over ramp cells of dist^2 to [B, C]
    grad_dev: Iv  # certified sup |grad psi| of this level alone
    val_dev: Iv
    children: dict[str, ChildLink] = field(default_factory=dict)
    mult: int = 1
    _floats: Optional[dict] = None

    # geometry helpers -----------------------------------------------------------

    @property
    def rect_w(self) -> Fraction:
        return self.long if self.axis == 0 else self.perp

    @property
    def rect_h(self) -> Fraction:
        return self.perp if self.axis == 0 else self.long

    @property
    def period(self) -> Fraction:
        return 2 * (self.delta + self.sigma)

    def core_span(self) -> tuple[Fraction, Fraction]:
        return self.rho, self.perp - self.rho

    def stripe_width(self, s: StripeClass) -> Fraction:
        return s.x_hi - s.x_lo

    def pair_stripes(self) -> tuple[StripeClass, ...]:
        return self.profile.stripes[:4]

    def comp_stripes(self) -> tuple[StripeClass, ...]:
        return self.profile.stripes[4:]

    def atom_for_role(self, role: str) -> SymMat2:
        return self.mat_b if role == "B" else self.mat_c

    def weight_for_role(self, role: str) -> Iv:
        return self.t if role == "B" else (1 - self.t)

    def global_box(self, h_long2: Iv, h_mixed: Iv, h_perp2: Iv) -> tuple[Iv, Iv, Iv]:
        """Map local Hessian contributions to global (a11, a12, a22)."""
        if self.axis == 0:
            return (self.base.a11 + h_long2, self.base.a12 + h_mixed, self.base.a22 + h_perp2)
        return (self.base.a11 + h_perp2, self.base.a12 + h_mixed, self.base.a22 + h_long2)


def _seg_dist_sq_box(node, h11: Iv, h12: Iv, h22: Iv) -> Iv:
    """Worst-case dist^2 from a global Hessian box to segment [B, C].

    `node` is anything carrying mat_b, mat_c, axis (a PatternNode or probe).
    """
    b, c = node.mat_b, node.mat_c
    if node.axis == 0:
        seg_var, fix_off, fix_perp = b.a11.union(c.a11), b.a12, b.a22
        var, off, perp = h11, h12, h22
    else:
        seg_var, fix_off, fix_perp = b.a22.union(c.a22), b.a12, b.a11
        var, off, perp = h22, h12, h11

    def coord(viv: Iv, seg: Iv) -> Iv:
        below = (seg.lo - viv).pos_part()
        above = (viv - seg.hi).pos_part()
        return Iv(0, max(below.hi, above.hi))

    d_var = coord(var, seg_var)
    d_off = coord(off, fix_off)
    d_perp = coord(perp, fix_perp)
    return d_var.sq() + 2 * d_off.sq() + d_perp.sq()


def build_pattern_node(
    *,
    tag: str,
    level: int,
    omega: int,
    base: SymMat2,
    mat_b: SymMat2,
    mat_c: SymMat2,
    t: IvLike,
    rect_w: Fraction,
    rect_h: Fraction,
    eps_h: Fraction,
    eps_a: Fraction,
    dev_cap: Optional[Fraction] = None,
) -> PatternNode:
    """One certified pattern level on a rect of the given size.

    Raises NonAxisRankOne when B - C is not supported on a coordinate axis,
    BuildError when the barycenter identity or any certification fails.
    """
    t_iv = as_iv(t)
    if not (t_iv.certainly_gt(0) and t_iv.certainly_lt(1)):
        raise BuildError(f"volume fraction not certainly in (0,1): {t_iv}")
    recon = mat_b.scale(t_iv) + mat_c.scale(1 - t_iv) - base
    for entry in recon.entries():
        if not entry.contains(0):
            raise BuildError(f"base is not the t-average of the targets: residual {entry}")
    conn = rank_one_connected(mat_b, mat_c)
    if conn is None:
        raise BuildError("targets are not rank-one connected")
    if conn.axis is None:
        raise NonAxisRankOne("only axis-aligned rank-one directions are realizable")
    axis = conn.axis
    long = rect_w if axis == 0 else rect_h
    perp = rect_h if axis == 0 else rect_w

    diff = mat_b - mat_c
    gamma = diff.a11 if axis == 0 else diff.a22  # (B - C)[axis, axis]
    w2_b = gamma * (1 - t_iv)
    w2_c = -(gamma * t_iv)

    t_hat = dyadic_round(t_iv.mid, T_BITS)
    if not 0 < t_hat < 1:
        raise BuildError(f"dyadic fraction escaped (0,1): {t_hat}")
    rho = eps_a * perp / 2
    if not 0 < 2 * rho < perp:
        raise BuildError("ramp fraction too large for the rect")

    g_hi = abs(gamma).hi
    m_hi = (t_iv * (1 - t_iv)).hi
    if g_hi == 0:
        raise BuildError("degenerate split: targets coincide on the axis")
    delta_ball = rho * eps_h / (4 * m_hi * g_hi)
    caps = [delta_ball, rho]
    if dev_cap is not None:
        caps.append(Fraction(dev_cap) / (2 * m_hi * g_hi))
    delta_cap = min(caps)
    # period = 2*delta*(1 + 2^-SIGMA_BITS) and n_pairs * period = long exactly
    pscale = 2 * (1 + Fraction(1, 1 << SIGMA_BITS))
    n_pairs = max(1, _ceil_div(long, delta_cap * pscale))

    eps_h_sq = Iv(eps_h * eps_h)
    probe = _ProbeNode(base, mat_b, mat_c, axis)
    etas = _build_etas(perp, rho)
    for _attempt in range(64):
        period = long / n_pairs
        delta = period / pscale
        sigma = delta / (1 << SIGMA_BITS)
        profile = _build_profile(delta, sigma, t_hat, w2_b, w2_c)

        # on-segment check for compensator offsets
        comp_ok = all(
            abs(ci).certainly_le(abs(w2_b)) and abs(ci).certainly_le(abs(w2_c))
            for ci in (profile.c1, profile.c2)
        )

        # ramp-cell certification: every (stripe x ramp-row) Hessian box within
        # eps_h of [B, C]
        ball_sq = ZERO
        for stripe in profile.stripes:
            for eta in etas:
                if eta.core:
                    continue
                h_long2 = eta.rng * stripe.w2
                h_mixed = eta.d_rng * stripe.slope_rng
                h_perp2 = Iv(eta.dd) * stripe.value_rng
                h11, h12, h22 = (
                    (h_long2, h_mixed, h_perp2) if axis == 0 else (h_perp2, h_mixed, h_long2)
                )
                d_sq = _seg_dist_sq_box(
                    probe,
                    base.a11 + h11,
                    base.a12 + h12,
                    base.a22 + h22,
                )
                ball_sq = Iv(0, max(ball_sq.hi, d_sq.hi))
        # core rows of comp stripes sit within |c_i| of the base, also in-ball
        for stripe in profile.stripes[4:]:
            h_axis = stripe.w2.union(ZERO)
            h11, h12, h22 = (
                (h_axis, ZERO, ZERO) if axis == 0 else (ZERO, ZERO, h_axis)
            )
            d_sq = _seg_dist_sq_box(probe, base.a11 + h11, base.a12 + h12, base.a22 + h22)
            ball_sq = Iv(0, max(ball_sq.hi, d_sq.hi))

        grad_long = profile.dw_sup
        grad_perp = Iv(0, Fraction(2) / rho) * profile.w_sup
        grad_dev = Iv(
            0, sqrt_iv(grad_long.sq() + grad_perp.sq()).hi
        )  # Euclidean sup bound
        val_dev = profile.w_sup

        ok = comp_ok and ball_sq.certainly_le(eps_h_sq)
        if dev_cap is not None:
            ok = ok and grad_dev.certainly_le(Iv(Fraction(dev_cap)))
        if ok:
            return PatternNode(
                tag=tag,
                level=level,
                omega=omega,
                axis=axis,
                long=long,
                perp=perp,
                base=base,
                mat_b=mat_b,
                mat_c=mat_c,
                t=t_iv,
                t_hat=t_hat,
                gamma=gamma,
                delta=delta,
                n_pairs=n_pairs,
                sigma=sigma,
                rho=rho,
                etas=etas,
                profile=profile,
                eps_h=eps_h,
                eps_a=eps_a,
                ball_sq=ball_sq,
                grad_dev=grad_dev,
                val_dev=val_dev,
            )
        n_pairs *= 2
    raise BuildError(f"certification did not converge for node {tag}")


@dataclass(frozen=True)
class _ProbeNode:
    base: SymMat2
    mat_b: SymMat2
    mat_c: SymMat2
    axis: int


# -- cell classes (the measurement interface) -----------------------------------------


@dataclass(frozen=True)
class CellClass:
    kind: str  # 'atom' | 'ramp' | 'frame'
    area: Fraction  # of one cell
    count: int  # across the whole potential
    hess: Optional[SymMat2]  # exact Hessian ('atom'/'frame')
    h_box: Optional[tuple[Iv, Iv, Iv]]  # global entry enclosures ('ramp')
    ball_sq: Iv  # certified dist^2 to the owning segment (0 for atoms)
    node_tag: str
    level: int
    omega: int
    atom_tag: Optional[str]  # terminal atom id for fraction accounting


def _node_cell_classes(node: PatternNode) -> Iterator[CellClass]:
    core_lo, core_hi = node.core_span()
    core_h = core_hi - core_lo
    for stripe in node.profile.stripes:
        w = node.stripe_width(stripe)
        count = node.n_pairs * node.mult
        for eta in node.etas:
            if eta.core:
                continue
            h_long2 = eta.rng * stripe.w2
            h_mixed = eta.d_rng * stripe.slope_rng
            h_perp2 = Iv(eta.dd) * stripe.value_rng
            if node.axis == 0:
                box = (node.base.a11 + h_long2, node.base.a12 + h_mixed, node.base.a22 + h_perp2)
            else:
                box = (node.base.a11 + h_perp2, node.base.a12 + h_mixed, node.base.a22 + h_long2)
            d_sq = _seg_dist_sq_box(node, *box)
            yield CellClass(
                kind="ramp",
                area=w * (eta.hi - eta.lo),
                count=count,
                hess=None,
                h_box=box,
                ball_sq=Iv(0, d_sq.hi),
                node_tag=node.tag,
                level=node.level,
                omega=node.omega,
                atom_tag=None,
            )
        # core row
        if stripe.role == "comp":
            h_axis = stripe.w2.union(ZERO)
            if node.axis == 0:
                box = (node.base.a11 + h_axis, node.base.a12, node.base.a22)
            else:
                box = (node.base.a11, node.base.a12, node.base.a22 + h_axis)
            d_sq = _seg_dist_sq_box(node, *box)
            yield CellClass(
                kind="ramp",
                area=w * core_h,
                count=count,
                hess=None,
                h_box=box,
                ball_sq=Iv(0, d_sq.hi),
                node_tag=node.tag,
                level=node.level,
                omega=node.omega,
                atom_tag=None,
            )
            continue
        link = node.children.get(stripe.role)
        if link is None:
            yield CellClass(
                kind="atom",
                area=w * core_h,
                count=count,
                hess=node.atom_for_role(stripe.role),
                h_box=None,
                ball_sq=ZERO,
                node_tag=node.tag,
                level=node.level,
                omega=node.omega,
                atom_tag=f"{node.tag}.{stripe.role}",
            )


def iter_cell_classes(node: PatternNode) -> Iterator[CellClass]:
    yield from _node_cell_classes(node)
    for link in node.children.values():
        yield from iter_cell_classes(link.node)


# -- the potential --------------------------------------------------------------------


@dataclass(frozen=True)
class FrameCell:
    rect: tuple[Fraction, Fraction, Fraction, Fraction]
    matrix: SymMat2
    tag: str
    level: int
    omega: int


@dataclass(frozen=True)
class AtomInfo:
    matrix: SymMat2
    weight: Iv  # laminate weight (product of fractions along the split path)
    terminal: bool


class PiecewisePotential:
    """u on a rectangle, gradient equal to base affine map on the boundary.

    `root` may be None (pure frame). Evaluation descends the pattern tree in
    O(depth); measurements aggregate cell classes. The base map is
    grad u0 = A0 (x - origin) + b0 with u0(origin) = c0.
    """

    def __init__(
        self,
        domain: tuple[Fraction, Fraction, Fraction, Fraction],
        base_matrix: SymMat2,
        root: Optional[PatternNode],
        root_origin: Optional[tuple[Fraction, Fraction]] = None,
        frame_cells: tuple[FrameCell, ...] = (),
        atoms: Optional[dict[str, AtomInfo]] = None,
        meta: Optional[dict] = None,
    ):
        self.domain = domain
        self.base_matrix = base_matrix
        self.root = root
        self.root_origin = root_origin if root_origin is not None else (domain[0], domain[1])
        self.frame_cells = frame_cells
        self.atoms = atoms or {}
        self.meta = meta or {}

    # ---- aggregation ------------------------------------------------------------

    def cell_classes(self) -> Iterator[CellClass]:
        for fc in self.frame_cells:
            x0, y0, w, h = fc.rect
            yield CellClass(
                kind="frame",
                area=w * h,
                count=1,
                hess=fc.matrix,
                h_box=None,
                ball_sq=ZERO,
                node_tag=fc.tag,
                level=fc.level,
                omega=fc.omega,
                atom_tag=None,
            )
        if self.root is not None:
            yield from iter_cell_classes(self.root)

    def nodes(self) -> Iterator[PatternNode]:
        def walk(n: PatternNode) -> Iterator[PatternNode]:
            yield n
            for link in n.children.values():
                yield from walk(link.node)

        if self.root is not None:
            yield from walk(self.root)

    def cell_count(self) -> int:
        total = len(self.frame_cells)
        for node in self.nodes():
            rows = len(node.etas)
            total += node.mult * 6 * node.n_pairs * rows
            # hosted cores are replaced by child instances, subtract them
            total -= len(node.children) * node.mult * 2 * node.n_pairs
        return total

    def grad_deviation(self) -> Iv:
        """Certified sup over the domain of |grad u - base affine| (per axis)."""

        def walk(n: PatternNode) -> Iv:
            worst_child = ZERO
            for link in n.children.values():
                child_dev = walk(link.node)
                worst_child = Iv(0, max(worst_child.hi, child_dev.hi))
            return n.grad_dev + worst_child

        if self.root is None:
            return ZERO
        return walk(self.root)

    def boundary_report(self) -> dict:
        """Structural boundary exactness + compensator closure widths."""
        closure = Fraction(0)
        exact = True
        for node in self.nodes():
            closure = max(closure, node.profile.closure_width)
            first = node.profile.stripes[0]
            exact = exact and first.s0 == ZERO and first.v0 == ZERO
            eta0, eta_last = node.etas[0], node.etas[-1]
            exact = exact and eta0.value(eta0.lo) == 0 and eta0.deriv(eta0.lo) == 0
            exact = exact and eta_last.value(eta_last.hi) == 0 and eta_last.deriv(eta_last.hi) == 0
        return {
            "max_deviation": Fraction(0) if exact else None,
            "exact": exact,
            "closure_width": closure,
        }

    # ---- evaluation ---------------------------------------------------------------

    def _locate_eta(self, node: PatternNode, u: Fraction) -> EtaPiece:
        for piece in node.etas:
            if u < piece.hi or piece.hi == node.perp:
                if u >= piece.lo or piece.lo == 0:
                    return piece
        raise ValueError(f"perp coordinate {u} outside [0, {node.perp}]")

    def _profile_state(self, node: PatternNode, xi: Fraction):
        """(stripe, dxi, pair_index) at profile coordinate xi; None at xi >= long
        where W = W' = 0 exactly."""
        prof = node.profile
        if xi >= node.long:
            return None
        period = prof.period
        k = int(xi // period)
        if k >= node.n_pairs:
            k = node.n_pairs - 1
        xp = xi - period * k
        for stripe in prof.stripes:
            if xp < stripe.x_hi or stripe.x_hi == period:
                if xp >= stripe.x_lo:
                    return stripe, xp - stripe.x_lo, k
        raise AssertionError("unreachable: stripe lookup")

    def _w_eval(self, node: PatternNode, xi: Fraction) -> tuple[Iv, Iv, Iv]:
        """(W, W', W'') at xi in [0, long]."""
        state = self._profile_state(node, xi)
        if state is None:
            return ZERO, ZERO, ZERO
        stripe, dxi, _k = state
        w = stripe.v0 + stripe.s0 * dxi + stripe.w2 * dxi * dxi * HALF
        dw = stripe.s0 + stripe.w2 * dxi
        return w, dw, stripe.w2

    def eval_all(self, x: Fraction, y: Fraction):
        """(value, (gx, gy), (h11, h12, h22)) as certified intervals."""
        x = Fraction(x)
        y = Fraction(y)
        x0, y0, wd, hd = self.domain
        if not (x0 <= x <= x0 + wd and y0 <= y <= y0 + hd):
            raise ValueError("point outside the domain")
        c = ZERO
        gx = ZERO
        gy = ZERO
        a_cur = self.base_matrix
        ox, oy = self.root_origin
        node = self.root
        if node is not None:
            rx0, ry0 = ox, oy
            inside = rx0 <= x <= rx0 + node.rect_w and ry0 <= y <= ry0 + node.rect_h
        else:
            inside = False
        if not inside:
            # frame region: pure quadratic in the domain-local coordinates
            dx, dy = x - x0, y - y0
            hx, hy = a_cur.apply(dx, dy)
            val = c + gx * dx + gy * dy + (hx * dx + hy * dy) * HALF
            return val, (gx + hx, gy + hy), a_cur.entries()
        # frame origin shift to the pattern origin
        dx, dy = ox - x0, oy - y0
        hx, hy = a_cur.apply(dx, dy)
        c = c + gx * dx + gy * dy + (hx * dx + hy * dy) * HALF
        gx, gy = gx + hx, gy + hy

        while True:
            lx, ly = x - ox, y - oy
            xi, up = (lx, ly) if node.axis == 0 else (ly, lx)
            eta = self._locate_eta(node, up)
            w, dw, ddw = self._w_eval(node, xi)
            stripe_state = self._profile_state(node, xi)
            link = None
            if (
                stripe_state is not None
                and eta.core
                and stripe_state[0].role in node.children
            ):
                link = node.children[stripe_state[0].role]
            if link is None:
                ev = Iv(eta.value(up))
                edv = Iv(eta.deriv(up))
                edd = Iv(eta.dd)
                psi = ev * w
                d_long = ev * dw
                d_perp = edv * w
                h_ll = ev * ddw
                h_lp = edv * dw
                h_pp = edd * w
                if node.axis == 0:
                    pgx, pgy = d_long, d_perp
                    hh = (h_ll, h_lp, h_pp)
                else:
                    pgx, pgy = d_perp, d_long
                    hh = (h_pp, h_lp, h_ll)
                hx, hy = a_cur.apply(lx, ly)
                val = c + gx * lx + gy * ly + (hx * lx + hy * ly) * HALF + psi
                grad = (gx + hx + pgx, gy + hy + pgy)
                hess = (a_cur.a11 + hh[0], a_cur.a12 + hh[1], a_cur.a22 + hh[2])
                return val, grad, hess
            # descend: locate the hosting core subcell
            stripe, dxi, k = stripe_state
            cell_xi0 = node.profile.period * k + stripe.x_lo
            core_lo, _ = node.core_span()
            sw = node.stripe_width(stripe)
            ch = node.perp - 2 * node.rho
            # subcell indices in local (xi, up)
            n_xi = link.sub_nx if node.axis == 0 else link.sub_ny
            n_up = link.sub_ny if node.axis == 0 else link.sub_nx
            i_xi = int((xi - cell_xi0) // (sw / n_xi))
            i_xi = min(i_xi, n_xi - 1)
            i_up = int((up - core_lo) // (ch / n_up))
            i_up = min(i_up, n_up - 1)
            sub_xi0 = cell_xi0 + (sw / n_xi) * i_xi
            sub_up0 = core_lo + (ch / n_up) * i_up
            # handoff: value and gradient of this level at the subcell corner
            w0, dw0, _ = self._w_eval(node, sub_xi0)
            lx0, ly0 = (sub_xi0, sub_up0) if node.axis == 0 else (sub_up0, sub_xi0)
            hx, hy = a_cur.apply(lx0, ly0)
            c = c + gx * lx0 + gy * ly0 + (hx * lx0 + hy * ly0) * HALF + w0  # eta == 1
            add_gx, add_gy = (dw0, ZERO) if node.axis == 0 else (ZERO, dw0)
            gx = gx + hx + add_gx
            gy = gy + hy + add_gy
            ox, oy = ox + lx0, oy + ly0
            a_cur = link.node.base
            node = link.node

    def eval(self, x, y) -> Iv:
        return self.eval_all(x, y)[0]

    def grad(self, x, y) -> tuple[Iv, Iv]:
        return self.eval_all(x, y)[1]

    # float fast path (obstacle sampling); mirrors eval_all's value branch
    def eval_float(self, x: float, y: float) -> float:
        node = self.root
        x0, y0, _, _ = self.domain
        c = 0.0
        gx = gy = 0.0
        a11, a12, a22 = (float(e.mid) for e in self.base_matrix.entries())
        ox, oy = float(self.root_origin[0]), float(self.root_origin[1])
        if node is None or not (
            ox <= x <= ox + float(node.rect_w) and oy <= y <= oy + float(node.rect_h)
        ):
            dx, dy = x - float(x0), y - float(y0)
            return 0.5 * (a11 * dx * dx + 2 * a12 * dx * dy + a22 * dy * dy)
        dx, dy = ox - float(x0), oy - float(y0)
        c = 0.5 * (a11 * dx * dx + 2 * a12 * dx * dy + a22 * dy * dy)
        gx, gy = a11 * dx + a12 * dy, a12 * dx + a22 * dy
        while True:
            f = _float_view(node)
            lx, ly = x - ox, y - oy
            xi, up = (lx, ly) if node.axis == 0 else (ly, lx)
            w, dw, stripe_idx, cell_xi0 = _w_eval_float(f, xi)
            eta_val, eta_core = _eta_eval_float(f, up)
            role = f["roles"][stripe_idx] if stripe_idx is not None else None
            link = node.children.get(role) if (eta_core and role) else None
            if link is None:
                hx = a11 * lx + a12 * ly
                hy = a12 * lx + a22 * ly
                return c + gx * lx + gy * ly + 0.5 * (hx * lx + hy * ly) + eta_val * w
            sw = f["widths"][stripe_idx]
            core_lo = f["rho"]
            ch = f["perp"] - 2 * f["rho"]
            n_xi = link.sub_nx if node.axis == 0 else link.sub_ny
            n_up = link.sub_ny if node.axis == 0 else link.sub_nx
            i_xi = min(int((xi - cell_xi0) / (sw / n_xi)), n_xi - 1)
            i_up = min(int((up - core_lo) / (ch / n_up)), n_up - 1)
            sub_xi0 = cell_xi0 + (sw / n_xi) * i_xi
            sub_up0 = core_lo + (ch / n_up) * i_up
            w0, dw0, _, _ = _w_eval_float(f, sub_xi0)
            lx0, ly0 = (sub_xi0, sub_up0) if node.axis == 0 else (sub_up0, sub_xi0)
            hx = a11 * lx0 + a12 * ly0
            hy = a12 * lx0 + a22 * ly0
            c += gx * lx0 + gy * ly0 + 0.5 * (hx * lx0 + hy * ly0) + w0
            gx += hx + (dw0 if node.axis == 0 else 0.0)
            gy += hy + (0.0 if node.axis == 0 else dw0)
            ox, oy = ox + lx0, oy + ly0
            node = link.node
            a11, a12, a22 = (float(e.mid) for e in node.base.entries())


def _float_view(node: PatternNode) -> dict:
    if node._floats is None:
        prof = node.profile
        node._floats = {
            "long": float(node.long),
            "perp": float(node.perp),
            "period": float(prof.period),
            "rho": float(node.rho),
            "n_pairs": node.n_pairs,
            "x_lo": [float(s.x_lo) for s in prof.stripes],
            "x_hi": [float(s.x_hi) for s in prof.stripes],
            "w2": [float(s.w2.mid) for s in prof.stripes],
            "s0": [float(s.s0.mid) for s in prof.stripes],
            "v0": [float(s.v0.mid) for s in prof.stripes],
            "roles": [s.role for s in prof.stripes],
            "widths": [float(s.x_hi - s.x_lo) for s in prof.stripes],
            "eta": [
                (float(e.lo), float(e.hi), float(e.c0), float(e.c1), float(e.c2), e.core)
                for e in node.etas
            ],
        }
    return node._floats


def _w_eval_float(f: dict, xi: float):
    if xi >= f["long"]:
        return 0.0, 0.0, None, 0.0
    period = f["period"]
    k = min(int(xi // period), f["n_pairs"] - 1)
    xp = xi - period * k
    idx = 5
    for i in range(6):
        if xp < f["x_hi"][i]:
            idx = i
            break
    d = xp - f["x_lo"][idx]
    w = f["v0"][idx] + f["s0"][idx] * d + 0.5 * f["w2"][idx] * d * d
    dw = f["s0"][idx] + f["w2"][idx] * d
    return w, dw, idx, period * k + f["x_lo"][idx]


def _eta_eval_float(f: dict, up: float):
    for lo, hi, c0, c1, c2, core in f["eta"]:
        if up < hi or hi == f["perp"]:
            if up >= lo or lo == 0.0:
                return c0 + c1 * up + c2 * up * up, core
    raise ValueError("perp coordinate outside the pattern")


# -- materialization -------------------------------------------------------------------


@dataclass(frozen=True)
class MaterialCell:
    rect: tuple[Fraction, Fraction, Fraction, Fraction]
    kind: str
    coeffs: dict[tuple[int, int], Iv]  # u restricted to the cell, local coords
    node_tag: str
    atom_tag: Optional[str]


def iter_cells(pot: PiecewisePotential, budget: int = DEFAULT_BUDGET) -> Iterator[MaterialCell]:
    """Enumerate geometric cells with their polynomials; budget-capped.

    Refuses to start when the exact cell count exceeds the budget, and also
    refuses patterns whose stripe width underruns the materialization floor
    long/2^DELTA_FLOOR_BITS (such potentials are measurement-only).
    """
    total = pot.cell_count()
    if total > budget:
        raise BudgetExceeded(f"{total} cells exceed the budget of {budget}")
    for node in pot.nodes():
        if node.delta < node.long / (1 << DELTA_FLOOR_BITS):
            raise BudgetExceeded(
                f"node {node.tag}: stripe width below the materialization floor"
            )

    # the global function is the base quadratic centered at the domain corner,
    # plus the pattern's perturbations; every cell polynomial is cell-local
    dx0, dy0 = pot.domain[0], pot.domain[1]
    for fc in pot.frame_cells:
        x0, y0, _, _ = fc.rect
        c0, g0 = _shift_quad(ZERO, (ZERO, ZERO), fc.matrix, x0 - dx0, y0 - dy0)
        yield MaterialCell(fc.rect, "frame", _quad_coeffs(c0, g0, fc.matrix), fc.tag, None)
    if pot.root is None:
        return
    ox, oy = pot.root_origin
    c0, g0 = _shift_quad(ZERO, (ZERO, ZERO), pot.base_matrix, ox - dx0, oy - dy0)
    yield from _iter_node_cells(pot.root, ox, oy, c0, g0)


def _quad_coeffs(c: Iv, g: tuple[Iv, Iv], a: SymMat2) -> dict[tuple[int, int], Iv]:
    return {
        (0, 0): c,
        (1, 0): g[0],
        (0, 1): g[1],
        (2, 0): a.a11 * HALF,
        (1, 1): a.a12,
        (0, 2): a.a22 * HALF,
    }


def _shift_quad(c: Iv, g: tuple[Iv, Iv], a: SymMat2, dx: Fraction, dy: Fraction):
    """Re-center a quadratic at origin + (dx, dy)."""
    hx, hy = a.apply(dx, dy)
    c2 = c + g[0] * dx + g[1] * dy + (hx * dx + hy * dy) * HALF
    return c2, (g[0] + hx, g[1] + hy)


def _iter_node_cells(node: PatternNode, ox: Fraction, oy: Fraction, c: Iv, g: tuple[Iv, Iv]):
    """Cells of one node instance whose base quadratic is (c, g, node.base) at (ox, oy)."""
    period = node.profile.period
    for k in range(node.n_pairs):
        for stripe in node.profile.stripes:
            xi0 = period * k + stripe.x_lo
            yield from _stripe_cells(node, stripe, xi0, ox, oy, c, g)


def _stripe_cells(node, stripe, xi0, ox, oy, c, g):
    sw = stripe.x_hi - stripe.x_lo
    # profile quadratic on the stripe in local d = xi - xi0:
    # W(d) = w0 + w1 d + w2 d^2 / 2
    wq = (stripe.v0, stripe.s0, stripe.w2 * HALF)
    link = node.children.get(stripe.role)
    for eta in node.etas:
        up0, up1 = eta.lo, eta.hi
        if eta.core and link is not None:
            # child instances tile this core cell
            n_xi = link.sub_nx if node.axis == 0 else link.sub_ny
            n_up = link.sub_ny if node.axis == 0 else link.sub_nx
            ch = (up1 - up0) / n_up
            cw = sw / n_xi
            for ix in range(n_xi):
                for iu in range(n_up):
                    sub_xi0 = xi0 + cw * ix
                    sub_up0 = up0 + ch * iu
                    w_c = wq[0] + wq[1] * (cw * ix) + wq[2] * (cw * ix) ** 2
                    dw_c = wq[1] + stripe.w2 * (cw * ix)
                    lx0, ly0 = (sub_xi0, sub_up0) if node.axis == 0 else (sub_up0, sub_xi0)
                    c2, g2 = _shift_quad(c, g, node.base, lx0, ly0)
                    c2 = c2 + w_c
                    if node.axis == 0:
                        g2 = (g2[0] + dw_c, g2[1])
                    else:
                        g2 = (g2[0], g2[1] + dw_c)
                    yield from _iter_node_cells(link.node, ox + lx0, oy + ly0, c2, g2)
            continue
        # plain cell: u = base quadratic + eta(up) * W(xi), local to the cell corner
        lx0, ly0 = (xi0, up0) if node.axis == 0 else (up0, xi0)
        c2, g2 = _shift_quad(c, g, node.base, lx0, ly0)
        coeffs = _quad_coeffs(c2, g2, node.base)
        # shift eta to up-local: e(t) = e0 + e1 t + e2 t^2 at up = up0 + t
        e0 = Iv(eta.value(up0))
        e1 = Iv(eta.deriv(up0))
        e2 = Iv(eta.c2)
        for (i, wc) in ((0, wq[0]), (1, wq[1]), (2, wq[2])):
            for (j, ec) in ((0, e0), (1, e1), (2, e2)):
                key = (i, j) if node.axis == 0 else (j, i)
                add = wc * ec
                coeffs[key] = coeffs.get(key, ZERO) + add
        rect = (
            (ox + xi0, oy + up0, sw, up1 - up0)
            if node.axis == 0
            else (ox + up0, oy + xi0, up1 - up0, sw)
        )
        kind = "atom" if (eta.core and stripe.role != "comp") else "ramp"
        atom_tag = f"{node.tag}.{stripe.role}" if kind == "atom" else None
        yield MaterialCell(rect, kind, coeffs, node.tag, atom_tag)


# -- builders ---------------------------------------------------------------------------


def realize_simple(
    base: SymMat2,
    mat_b: SymMat2,
    mat_c: SymMat2,
    t: IvLike,
    rect: tuple[Fraction, Fraction, Fraction, Fraction],
    eps: Fraction,
    dev_cap: Optional[Fraction] = None,
) -> PiecewisePotential:
    """Single-level realization: Hessian equals B on a t-fraction and C on a
    (1-t)-fraction up to eps losses, gradient exactly affine on the boundary."""
    x0, y0, w, h = (Fraction(v) for v in rect)
    eps = Fraction(eps)
    if eps <= 0 or eps >= 1:
        raise BuildError("eps must be in (0,1)")
    node = build_pattern_node(
        tag="0",
        level=0,
        omega=0,
        base=base,
        mat_b=mat_b,
        mat_c=mat_c,
        t=t,
        rect_w=w,
        rect_h=h,
        eps_h=eps * Fraction(3, 4),
        eps_a=eps / 2,
        dev_cap=dev_cap if dev_cap is not None else eps,
    )
    t_iv = as_iv(t)
    atoms = {
        "0.B": AtomInfo(mat_b, t_iv, True),
        "0.C": AtomInfo(mat_c, 1 - t_iv, True),
    }
    return PiecewisePotential(
        domain=(x0, y0, w, h),
        base_matrix=base,
        root=node,
        root_origin=(x0, y0),
        atoms=atoms,
        meta={"eps": eps, "kind": "simple"},
    )


def realize_laminate(
    lam: Laminate,
    rect: tuple[Fraction, Fraction, Fraction, Fraction],
    eps: Fraction,
    dev_cap: Optional[Fraction] = None,
) -> PiecewisePotential:
    """Realize a laminate's split tree: each split is one pattern level and
    child levels live inside the exact-atom core cells of their parents."""
    x0, y0, w, h = (Fraction(v) for v in rect)
    eps = Fraction(eps)
    if eps <= 0 or eps >= 1:
        raise BuildError("eps must be in (0,1)")
    if lam.root.is_leaf():
        raise BuildError("laminate has no splits to realize")
    depth = lam.depth()
    eps_h = eps * Fraction(3, 4)
    eps_a = eps / (2 * depth)
    total_dev = Fraction(dev_cap) if dev_cap is not None else eps
    atoms: dict[str, AtomInfo] = {}

    def build(split: SplitNode, tag: str, level: int, rw: Fraction, rh: Fraction, weight: Iv) -> PatternNode:
        node = build_pattern_node(
            tag=tag,
            level=level,
            omega=0,
            base=split.matrix,
            mat_b=split.left.matrix,
            mat_c=split.right.matrix,
            t=split.s,
            rect_w=rw,
            rect_h=rh,
            eps_h=eps_h,
            eps_a=eps_a,
            dev_cap=total_dev / (2 ** (level + 1)),
        )
        for role, child, share in (
            ("B", split.left, split.s),
            ("C", split.right, 1 - split.s),
        ):
            child_weight = weight * share
            if child.is_leaf():
                atoms[f"{tag}.{role}"] = AtomInfo(child.matrix, child_weight, True)
                continue
            atoms[f"{tag}.{role}"] = AtomInfo(child.matrix, child_weight, False)
            host = [s for s in node.pair_stripes() if s.role == role][0]
            crw, crh = _core_cell_dims(node, host)
            child_node = build(child, f"{tag}.{role}", level + 1, crw, crh, child_weight)
            node.children[role] = ChildLink(child_node, 1, 1)
        return node

    root = build(lam.root, "0", 0, w, h, Iv(1))
    _fix_mults(root)
    return PiecewisePotential(
        domain=(x0, y0, w, h),
        base_matrix=lam.root.matrix,
        root=root,
        root_origin=(x0, y0),
        atoms=atoms,
        meta={"eps": eps, "kind": "laminate", "depth": depth},
    )


def _core_cell_dims(node: PatternNode, stripe: StripeClass) -> tuple[Fraction, Fraction]:
    sw = stripe.x_hi - stripe.x_lo
    ch = node.perp - 2 * node.rho
    return (sw, ch) if node.axis == 0 else (ch, sw)


def _fix_mults(node: PatternNode, mult: int = 1):
    node.mult = mult
    for link in node.children.values():
        _fix_mults(link.node, mult * 2 * node.n_pairs * link.sub_nx * link.sub_ny)


# -- the staircase ------------------------------------------------------------------------


@dataclass
class StairLayerReport:
    j: int
    p: Iv
    k: Fraction
    eps: Fraction
    omega_area: Fraction  # |Omega_j| exactly
    grad_step: Iv  # certified sup |grad u_j - grad u_{j-1}|
    node_tags: tuple[str, str]


@dataclass
class StaircaseResult:
    potential: PiecewisePotential
    layers: list[StairLayerReport]
    terminal_omega_area: Fraction  # |Omega_{J+1}|


def staircase_build(levels_or_schedule, margin_bits: int = 30) -> StaircaseResult:
    """Nested realization over a level schedule (int J or list of StairLevel).

    Layer j realizes the doubling laminate at (p_j, k_j = 2^(j-1)) inside
    every current doubling cell, after subdividing those cells to diameter
    <= eps_j. u = |x|^2/2 outside the inner rectangle Omega_1.
    """
    from subhess.constructions import DoublingParams, staircase_params

    if isinstance(levels_or_schedule, int):
        schedule = staircase_params(levels_or_schedule)
    else:
        schedule = list(levels_or_schedule)
    if not schedule:
        raise BuildError("empty staircase schedule")

    eps1 = schedule[0].eps
    m = dyadic_floor_iv(Iv(eps1 / 4), margin_bits)
    if m <= 0:
        raise BuildError("margin underflow")
    side = Fraction(1)
    inner = side - 2 * m
    domain = (Fraction(0), Fraction(0), side, side)
    frame = (
        FrameCell((Fraction(0), Fraction(0), m, side), SymMat2.identity(1), "frame.L", 0, 0),
        FrameCell((side - m, Fraction(0), m, side), SymMat2.identity(1), "frame.R", 0, 0),
        FrameCell((m, Fraction(0), inner, m), SymMat2.identity(1), "frame.B", 0, 0),
        FrameCell((m, side - m, inner, m), SymMat2.identity(1), "frame.T", 0, 0),
    )

    atoms: dict[str, AtomInfo] = {}
    layers: list[StairLayerReport] = []
    tags_by_level: dict[int, tuple[str, str]] = {}

    def build_layer(idx: int, rw: Fraction, rh: Fraction, weight: Iv, tag: str):
        """Returns (node_a, layer grad dev iv, doubling-cell data)."""
        lvl = schedule[idx]
        params = DoublingParams.make(lvl.p, lvl.k)
        j = lvl.j
        dev_cap = Fraction(1, 2**j) / 4
        eps_h = lvl.eps / 2
        eps_a = lvl.eps / 8
        node_a = build_pattern_node(
            tag=f"{tag}.a",
            level=j,
            omega=j,
            base=params.mat_id,
            mat_b=params.mat_a,
            mat_c=params.mat_m,
            t=params.alpha,
            rect_w=rw,
            rect_h=rh,
            eps_h=eps_h,
            eps_a=eps_a,
            dev_cap=dev_cap,
        )
        atoms[f"{tag}.a.B"] = AtomInfo(params.mat_a, weight * params.alpha, True)
        host_a = [s for s in node_a.pair_stripes() if s.role == "C"][0]
        arw, arh = _core_cell_dims(node_a, host_a)
        w_mid = weight * (1 - params.alpha)
        node_b = build_pattern_node(
            tag=f"{tag}.b",
            level=j,
            omega=j,
            base=params.mat_m,
            mat_b=params.mat_2id,
            mat_c=params.mat_b,
            t=params.beta,
            rect_w=arw,
            rect_h=arh,
            eps_h=eps_h,
            eps_a=eps_a,
            dev_cap=dev_cap,
        )
        node_a.children["C"] = ChildLink(node_b, 1, 1)
        atoms[f"{tag}.a.C"] = AtomInfo(params.mat_m, w_mid, False)
        atoms[f"{tag}.b.C"] = AtomInfo(params.mat_b, w_mid * (1 - params.beta), True)
        tags_by_level[j] = (f"{tag}.a", f"{tag}.b")
        w_dbl = w_mid * params.beta
        grad_step = node_a.grad_dev + node_b.grad_dev

        host_b = [s for s in node_b.pair_stripes() if s.role == "B"][0]
        brw, brh = _core_cell_dims(node_b, host_b)
        if idx + 1 < len(schedule):
            atoms[f"{tag}.b.B"] = AtomInfo(params.mat_2id, w_dbl, False)
            nxt = schedule[idx + 1]
            nx = max(1, _ceil_div(brw, nxt.eps / 2))
            ny = max(1, _ceil_div(brh, nxt.eps / 2))
            child, child_grad, _ = build_layer(
                idx + 1, brw / nx, brh / ny, w_dbl, f"{tag}.b.B"
            )
            node_b.children["B"] = ChildLink(child, nx, ny)
        else:
            atoms[f"{tag}.b.B"] = AtomInfo(params.mat_2id, w_dbl, True)
        return node_a, grad_step, (brw, brh)

    root, _, _ = build_layer(0, inner, inner, Iv(1), "s1")
    _fix_mults(root)

    pot = PiecewisePotential(
        domain=domain,
        base_matrix=SymMat2.identity(1),
        root=root,
        root_origin=(m, m),
        frame_cells=frame,
        atoms=atoms,
        meta={"kind": "staircase", "levels": len(schedule), "margin": m},
    )

    # per-layer reports: omega areas are exact sums over level-j node rects
    area_by_omega: dict[int, Fraction] = {}
    grads: dict[int, Iv] = {}
    for node in pot.nodes():
        if node.tag.endswith(".a"):
            area_by_omega[node.omega] = (
                area_by_omega.get(node.omega, Fraction(0))
                + node.mult * node.rect_w * node.rect_h
            )
        grads[node.omega] = grads.get(node.omega, ZERO) + node.grad_dev

    terminal = Fraction(0)
    for cc in pot.cell_classes():
        if cc.kind == "atom" and cc.atom_tag and cc.atom_tag.endswith(".b.B"):
            terminal += cc.area * cc.count

    for lvl in schedule:
        layers.append(
            StairLayerReport(
                j=lvl.j,
                p=lvl.p,
                k=lvl.k,
                eps=lvl.eps,
                omega_area=area_by_omega.get(lvl.j, Fraction(0)),
                grad_step=grads.get(lvl.j, ZERO),
                node_tags=tags_by_level[lvl.j],
            )
        )
    return StaircaseResult(potential=pot, layers=layers, terminal_omega_area=terminal)
