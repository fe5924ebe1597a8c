"""Admissible oscillation directions for diagonal second-derivative systems.

A direction vector v collects the pure second derivatives (d_11 v, ..., d_nn v)
that a one-dimensional profile oscillating along a frequency xi can produce;
those are proportional to (xi_1^2, ..., xi_n^2), so v is attainable exactly
when its entries share one sign (zero entries allowed, since frequency
components may vanish). `member` decides that in exact arithmetic.

`member_bruteforce` is the independent oracle: it minimizes the pairwise
residual max_{i<j} |xi_i^2 v_j - xi_j^2 v_i| over the frequency sphere.
The residual depends on xi only through zeta = xi^2, and |xi| = 1 makes zeta
range over the probability simplex, so the search runs in zeta with exact
rational arithmetic: an exact candidate zeta = |v| / sum|v| pins members at
residual zero, and non-members get a certified positive floor from interval
bounds on adaptively subdivided simplex patches (never just a sampled
minimum).
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

Vec = Sequence[Fraction]


class CertificationError(RuntimeError):
    """The patch subdivision hit its depth cap without a verdict."""


def member(v: Iterable) -> bool:
    """Exact sign-consistency test: all entries >= 0 or all <= 0."""
    vs = [Fraction(x) for x in v]
    return all(x >= 0 for x in vs) or all(x <= 0 for x in vs)


def residual(v: Vec, zeta: Vec) -> Fraction:
    """max over pairs of |zeta_i v_j - zeta_j v_i|, exact."""
    n = len(v)
    worst = Fraction(0)
    for i in range(n):
        for j in range(i + 1, n):
            worst = max(worst, abs(zeta[i] * v[j] - zeta[j] * v[i]))
    return worst


def exact_candidate(v: Vec) -> tuple[Fraction, ...]:
    """zeta = |v| / sum|v|; the barycenter when v = 0."""
    total = sum(abs(x) for x in v)
    n = len(v)
    if total == 0:
        return tuple(Fraction(1, n) for _ in range(n))
    return tuple(abs(x) / total for x in v)


@dataclass(frozen=True)
class BruteForceResult:
    member: bool
    best_residual: Fraction
    best_zeta: tuple[Fraction, ...]
    floor: Fraction  # certified min residual over the whole sphere (0 for members)
    patches: int


def _pair_lower(v: Vec, box) -> Fraction:
    """Lower bound of the patch residual: max over pairs of the certain
    distance of zeta_i v_j - zeta_j v_i from 0.

    Every pair residual is affine in the free coordinates (the tail
    coordinate is 1 - sum), so its exact range over the box is attained at
    box corners."""
    n = len(v)
    corners = []
    for choice in itertools.product(*box):
        corners.append(tuple(choice) + (1 - sum(choice),))
    best = Fraction(0)
    for i in range(n):
        for j in range(i + 1, n):
            vals = [z[i] * v[j] - z[j] * v[i] for z in corners]
            lo, hi = min(vals), max(vals)
            if lo > 0:
                best = max(best, lo)
            elif hi < 0:
                best = max(best, -hi)
    return best


def _certified_floor(v: Vec, depth_cap: int) -> tuple[Fraction, int]:
    """Certified positive lower bound of the residual over the simplex.

    Adaptive bisection from the root box: refinement concentrates near the
    zero sets of the pair residuals. Raises CertificationError when some
    patch still straddles zero at the depth cap (cannot happen for
    sign-inconsistent rational v with sane caps).
    """
    free = len(v) - 1
    one = Fraction(1)
    stack = [(tuple((Fraction(0), one) for _ in range(free)), 0)]
    floor: Optional[Fraction] = None
    patches = 0
    while stack:
        box, depth = stack.pop()
        if sum(b[0] for b in box) > 1:
            continue  # entirely outside the simplex
        patches += 1
        pf = _pair_lower(v, box)
        if pf > 0:
            floor = pf if floor is None else min(floor, pf)
            continue
        if depth >= depth_cap:
            raise CertificationError(
                f"residual floor unresolved at depth {depth} for {tuple(v)}"
            )
        halves = [((b[0], (b[0] + b[1]) / 2), ((b[0] + b[1]) / 2, b[1])) for b in box]
        for choice in itertools.product(*halves):
            stack.append((choice, depth + 1))
    return floor if floor is not None else Fraction(0), patches


def member_bruteforce(
    v: Iterable, resolution: int = 16, depth_cap: int = 12
) -> BruteForceResult:
    """Frequency search: exact candidate plus a certified simplex scan."""
    vs = tuple(Fraction(x) for x in v)
    if len(vs) < 2:
        raise ValueError("need dimension >= 2")
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    cand = exact_candidate(vs)
    best = residual(vs, cand)
    best_zeta = cand
    if best == 0:
        return BruteForceResult(True, best, best_zeta, Fraction(0), 0)

    # grid vertices give the sampled minimum; patches certify the floor
    free = len(vs) - 1
    step = Fraction(1, resolution)
    for idx in itertools.product(range(resolution + 1), repeat=free):
        zs = [k * step for k in idx]
        tail = 1 - sum(zs)
        if tail < 0:
            continue
        r = residual(vs, tuple(zs) + (tail,))
        if r < best:
            best, best_zeta = r, tuple(zs) + (tail,)
    floor, patches = _certified_floor(vs, depth_cap)
    return BruteForceResult(floor == 0, best, best_zeta, floor, patches)


# ---- suites ---------------------------------------------------------------------------


def _random_vector(rng: random.Random, n: int) -> tuple[Fraction, ...]:
    out = []
    for _ in range(n):
        if rng.random() < Fraction(1, 8):
            out.append(Fraction(0))
        else:
            num = rng.randint(1, 9) * rng.choice((1, -1))
            out.append(Fraction(num, rng.randint(1, 9)))
    return tuple(out)


def agreement_suite(
    n: int, trials: int, seed: int = 0, resolution: int = 16
) -> dict:
    """member vs member_bruteforce on random rational vectors."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = random.Random(seed)
    disagreements = []
    members = 0
    for _ in range(trials):
        v = _random_vector(rng, n)
        m = member(v)
        bf = member_bruteforce(v, resolution)
        members += m
        if bf.member != m:
            disagreements.append({"v": v, "member": m, "bruteforce": bf})
    return {
        "n": n,
        "trials": trials,
        "members": members,
        "nonmembers": trials - members,
        "disagreements": disagreements,
        "all_agree": not disagreements,
    }


def lattice_suite(n: int, radius: int = 2, resolution: int = 16) -> dict:
    """Exhaustive oracle agreement and cone invariants on the integer lattice.

    Checks, for every v in {-radius..radius}^n: oracle agreement, scaling
    invariance member(t v) = member(v) for t != 0, permutation invariance,
    and the sign step: a member with nonnegative trace is entrywise
    nonnegative.
    """
    scales = (Fraction(2), Fraction(-1), Fraction(1, 3), Fraction(-5, 2))
    checked = 0
    failures = []
    for raw in itertools.product(range(-radius, radius + 1), repeat=n):
        v = tuple(Fraction(x) for x in raw)
        m = member(v)
        checked += 1
        if member_bruteforce(v, resolution).member != m:
            failures.append(("oracle", v))
        if any(member(tuple(t * x for x in v)) != m for t in scales):
            failures.append(("scaling", v))
        if any(member(p) != m for p in itertools.permutations(v)):
            failures.append(("permutation", v))
        if m and sum(v) >= 0 and not all(x >= 0 for x in v):
            failures.append(("sign-step", v))
    return {
        "n": n,
        "radius": radius,
        "vectors": checked,
        "failures": failures,
        "all_ok": not failures,
    }
