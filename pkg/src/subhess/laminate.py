"""Finitely supported matrix measures built by rank-one splitting.

A `Laminate` is a binary split tree: the root carries the barycenter, each
split replaces a Dirac mass delta_M by s*delta_B + (1-s)*delta_C where
M = s*B + (1-s)*C and B - C has rank one, and the leaves in depth-first
order are the atoms. The tree is the object the synthesizer walks — the flat
atom list forgets the order of splits, which is exactly the data a nested
stripe construction needs.

All scalars are certified intervals; `validate` re-derives every invariant
(mass, positivity, barycenter identities, rank-one connections) instead of
trusting construction-time checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from subhess.scalars import Iv, IvLike, as_iv, fr_str, rpow
from subhess.sym2 import RankOne, SymMat2, rank_one_connected

PhiLike = Union[str, tuple, Callable[[SymMat2], Iv]]


@dataclass(frozen=True)
class SplitNode:
    """Leaf (s is None) or split of `matrix` into left=B (weight s), right=C."""

    matrix: SymMat2
    s: Optional[Iv] = None
    left: Optional["SplitNode"] = None
    right: Optional["SplitNode"] = None

    def is_leaf(self) -> bool:
        return self.s is None

    def leaf_count(self) -> int:
        if self.is_leaf():
            return 1
        return self.left.leaf_count() + self.right.leaf_count()

    def depth(self) -> int:
        if self.is_leaf():
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


@dataclass(frozen=True)
class Atom:
    matrix: SymMat2
    weight: Iv


class Laminate:
    """Immutable laminate; construct via `dirac` and `elementary_split`."""

    def __init__(self, root: SplitNode):
        self.root = root
        self._atoms: Optional[tuple[Atom, ...]] = None

    @staticmethod
    def dirac(matrix: SymMat2) -> "Laminate":
        return Laminate(SplitNode(matrix))

    @property
    def atoms(self) -> tuple[Atom, ...]:
        if self._atoms is None:
            out: list[Atom] = []

            def walk(node: SplitNode, weight: Iv):
                if node.is_leaf():
                    out.append(Atom(node.matrix, weight))
                    return
                walk(node.left, weight * node.s)
                walk(node.right, weight * (1 - node.s))

            walk(self.root, Iv(1))
            self._atoms = tuple(out)
        return self._atoms

    @property
    def trail(self) -> tuple[tuple[SymMat2, SymMat2], ...]:
        """(B, C) pairs of every split, depth-first."""
        out: list[tuple[SymMat2, SymMat2]] = []

        def walk(node: SplitNode):
            if node.is_leaf():
                return
            out.append((node.left.matrix, node.right.matrix))
            walk(node.left)
            walk(node.right)

        walk(self.root)
        return tuple(out)

    def depth(self) -> int:
        return self.root.depth()

    def __len__(self) -> int:
        return self.root.leaf_count()


def elementary_split(
    lam: Laminate,
    atom_index: int,
    s: IvLike,
    b: SymMat2,
    c: SymMat2,
) -> Laminate:
    """Split atom `atom_index` into s*delta_B + (1-s)*delta_C.

    Certifies s in (0,1), M = s*B + (1-s)*C, and that B - C is rank one
    before rebuilding the tree. Raises ValueError on violations and
    Undecided when enclosures are too wide to certify.
    """
    sv = as_iv(s)
    if not (sv.certainly_gt(0) and sv.certainly_lt(1)):
        raise ValueError(f"split fraction not certainly in (0,1): {sv}")
    n = len(lam)
    if not 0 <= atom_index < n:
        raise ValueError(f"atom index {atom_index} out of range (have {n})")
    if rank_one_connected(b, c) is None:
        raise ValueError("split endpoints are not rank-one connected")

    target = lam.atoms[atom_index].matrix
    recon = b.scale(sv) + c.scale(1 - sv)
    resid = recon - target
    for entry in resid.entries():
        if not entry.contains(0):
            raise ValueError(f"barycenter identity fails: residual {entry}")

    counter = [0]

    def rebuild(node: SplitNode) -> SplitNode:
        if node.is_leaf():
            i = counter[0]
            counter[0] += 1
            if i == atom_index:
                return SplitNode(node.matrix, sv, SplitNode(b), SplitNode(c))
            return node
        left = rebuild(node.left)
        right = rebuild(node.right)
        if left is node.left and right is node.right:
            return node
        return SplitNode(node.matrix, node.s, left, right)

    return Laminate(rebuild(lam.root))


def barycenter(lam: Laminate) -> SymMat2:
    total = SymMat2.diag(0, 0)
    for atom in lam.atoms:
        total = total + atom.matrix.scale(atom.weight)
    return total


# -- moment functionals -----------------------------------------------------------


def phi_trace(m: SymMat2) -> Iv:
    return m.trace()


def phi_l1_diag(m: SymMat2) -> Iv:
    return abs(m.a11) + abs(m.a22)


def phi_frobenius(m: SymMat2) -> Iv:
    return m.frob()


def phi_neg_pow(i: int, q: IvLike) -> Callable[[SymMat2], Iv]:
    qv = as_iv(q)

    def phi(m: SymMat2) -> Iv:
        entry = m.a11 if i == 0 else m.a22
        return rpow(entry.neg_part(), qv)

    return phi


def resolve_phi(phi: PhiLike) -> Callable[[SymMat2], Iv]:
    if callable(phi):
        return phi
    if isinstance(phi, str):
        try:
            return {
                "trace": phi_trace,
                "l1_diag": phi_l1_diag,
                "frobenius": phi_frobenius,
            }[phi]
        except KeyError:
            raise ValueError(f"unknown moment functional {phi!r}") from None
    if isinstance(phi, tuple) and len(phi) == 3 and phi[0] == "neg_pow":
        return phi_neg_pow(int(phi[1]), phi[2])
    raise ValueError(f"unknown moment functional {phi!r}")


def moment(lam: Laminate, phi: PhiLike) -> Iv:
    fn = resolve_phi(phi)
    total = Iv(0)
    for atom in lam.atoms:
        total = total + atom.weight * fn(atom.matrix)
    return total


# -- validation --------------------------------------------------------------------


def validate(lam: Laminate, width_tol: Fraction = Fraction(1, 10**9)) -> dict:
    """Re-derive every laminate invariant; returns a report dict.

    report['ok'] is True only if all checks are certified. Splits are checked
    at the tree (not the flat view): weight bookkeeping, barycenter
    identities, rank-one connections, fraction ranges.
    """
    problems: list[str] = []

    mass = Iv(0)
    for atom in lam.atoms:
        mass = mass + atom.weight
        if not atom.weight.certainly_gt(0):
            problems.append(f"weight not certainly positive: {atom.weight}")
    if not mass.contains(1):
        problems.append(f"total mass does not contain 1: {mass}")
    if mass.width > width_tol:
        problems.append(f"total mass enclosure too wide: {mass.width}")

    bc = barycenter(lam)
    resid = bc - lam.root.matrix
    for entry in resid.entries():
        if not entry.contains(0):
            problems.append(f"barycenter drifted from root: {entry}")

    splits = 0

    def walk(node: SplitNode):
        nonlocal splits
        if node.is_leaf():
            return
        splits += 1
        if not (node.s.certainly_gt(0) and node.s.certainly_lt(1)):
            problems.append(f"split fraction not in (0,1): {node.s}")
        recon = node.left.matrix.scale(node.s) + node.right.matrix.scale(1 - node.s)
        for entry in (recon - node.matrix).entries():
            if not entry.contains(0):
                problems.append(f"split identity residual off zero: {entry}")
            if entry.width > width_tol:
                problems.append(f"split identity residual too wide: {entry.width}")
        conn = rank_one_connected(node.left.matrix, node.right.matrix)
        if conn is None:
            problems.append("split endpoints not rank-one connected")
        walk(node.left)
        walk(node.right)

    walk(lam.root)

    return {
        "ok": not problems,
        "problems": problems,
        "atoms": len(lam),
        "splits": splits,
        "depth": lam.depth(),
        "mass": mass,
    }


def split_connections(lam: Laminate) -> tuple[RankOne, ...]:
    """RankOne data for every split, depth-first; raises if any fails."""
    out: list[RankOne] = []

    def walk(node: SplitNode):
        if node.is_leaf():
            return
        conn = rank_one_connected(node.left.matrix, node.right.matrix)
        if conn is None:
            raise ValueError("split endpoints not rank-one connected")
        out.append(conn)
        walk(node.left)
        walk(node.right)

    walk(lam.root)
    return tuple(out)


# -- serialization -----------------------------------------------------------------


def _iv_jsonable(v: Iv):
    if v.is_exact():
        return fr_str(v.lo)
    return {"lo": fr_str(v.lo), "hi": fr_str(v.hi)}


def _iv_parse(obj) -> Iv:
    if isinstance(obj, str):
        return Iv(Fraction(obj))
    return Iv(Fraction(obj["lo"]), Fraction(obj["hi"]))


def _mat_jsonable(m: SymMat2):
    return [_iv_jsonable(m.a11), _iv_jsonable(m.a12), _iv_jsonable(m.a22)]


def _mat_parse(obj) -> SymMat2:
    return SymMat2(_iv_parse(obj[0]), _iv_parse(obj[1]), _iv_parse(obj[2]))


def _node_jsonable(node: SplitNode):
    if node.is_leaf():
        return {"matrix": _mat_jsonable(node.matrix)}
    return {
        "matrix": _mat_jsonable(node.matrix),
        "s": _iv_jsonable(node.s),
        "left": _node_jsonable(node.left),
        "right": _node_jsonable(node.right),
    }


def _node_parse(obj) -> SplitNode:
    if "s" not in obj:
        return SplitNode(_mat_parse(obj["matrix"]))
    return SplitNode(
        _mat_parse(obj["matrix"]),
        _iv_parse(obj["s"]),
        _node_parse(obj["left"]),
        _node_parse(obj["right"]),
    )


def to_jsonable(lam: Laminate) -> dict:
    return {"kind": "laminate", "tree": _node_jsonable(lam.root)}


def from_jsonable(obj: dict) -> Laminate:
    if obj.get("kind") != "laminate":
        raise ValueError("not a laminate payload")
    return Laminate(_node_parse(obj["tree"]))


def dumps(lam: Laminate, indent: Optional[int] = None) -> str:
    return json.dumps(to_jsonable(lam), indent=indent, sort_keys=True)


def loads(payload: str) -> Laminate:
    return from_jsonable(json.loads(payload))
