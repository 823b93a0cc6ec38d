"""Named Lie brackets used as examples and test fixtures.

Entries are addressed by name, optionally with a parameter:
``abelian(3)``, ``hyp(4)``, ``e2_eps(0.2)``.  ``names()`` lists the
standard set.  Each entry records the stratum spectrum and the
classification of its background metric, both as rationals derived by
hand, so tests can compare against them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .bracket_space import Bracket, make_bracket
from .errors import UnknownEntry

F = Fraction


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    bracket: Bracket
    tags: frozenset[str]
    description: str = ""
    beta: tuple[Fraction, ...] | None = None  # ascending stratum spectrum
    kind: str | None = None  # classification of the background metric
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "tags": sorted(self.tags),
            "description": self.description,
            "beta": None if self.beta is None else [[f.numerator, f.denominator] for f in self.beta],
            "kind": self.kind,
            "bracket": self.bracket.to_dict(),
        }


def _abelian(n: int) -> CatalogEntry:
    if not 1 <= n <= 4:
        raise UnknownEntry(f"abelian({n}): dimension must be 1..4")
    return CatalogEntry(
        f"abelian({n})",
        make_bracket(0, n, []),
        frozenset({"abelian", "nilpotent", "solvable", "unimodular", "flat"}),
        f"abelian R^{n}",
        None,
        "Flat",
        {"n": n},
    )


def _hyp(n: int) -> CatalogEntry:
    if n < 2:
        raise UnknownEntry(f"hyp({n}): dimension must be at least 2")
    entries = [(1, j, j, 1.0) for j in range(2, n + 1)]
    return CatalogEntry(
        f"hyp({n})",
        make_bracket(0, n, entries),
        frozenset({"solvable", "non_unimodular", "einstein"}),
        f"real hyperbolic space of dimension {n}: ad e1 = Id on the rest",
        tuple([F(-1)] + [F(0)] * (n - 1)),
        "Soliton",
        {"n": n},
    )


def _e2_eps(eps: float = 0.1) -> CatalogEntry:
    # ad e1 on span(e2, e3) is a rotation plus diag(eps, -eps)
    entries = [(1, 2, 2, eps), (1, 2, 3, 1.0), (1, 3, 2, -1.0), (1, 3, 3, -eps)]
    name = "e2_eps" if eps == 0.1 else f"e2_eps({eps:g})"
    if not 0 <= eps < 1:
        raise UnknownEntry(f"{name}: eps must lie in [0, 1) to stay in E(2)")
    return CatalogEntry(
        name,
        make_bracket(0, 3, entries),
        frozenset({"solvable", "unimodular"}),
        "non-flat metric on E(2)",
        (F(-1), F(0), F(0)),
        "Generic" if eps else "Flat",
        {"eps": eps},
    )


def _fixed() -> dict[str, CatalogEntry]:
    third = F(-1, 3)
    out = [
        CatalogEntry(
            "heis3",
            make_bracket(0, 3, [(1, 2, 3, 1.0)]),
            frozenset({"nilpotent", "solvable", "unimodular"}),
            "3-dimensional Heisenberg algebra",
            (F(-1), F(-1), F(1)),
            "Soliton",
        ),
        CatalogEntry(
            "heis5",
            make_bracket(0, 5, [(1, 2, 5, 1.0), (3, 4, 5, 1.0)]),
            frozenset({"nilpotent", "solvable", "unimodular"}),
            "5-dimensional Heisenberg algebra",
            (F(-1, 2),) * 4 + (F(1),),
            "Soliton",
        ),
        CatalogEntry(
            "su2",
            make_bracket(0, 3, [(1, 2, 3, 1.0), (2, 3, 1, 1.0), (3, 1, 2, 1.0)]),
            frozenset({"semisimple", "unimodular", "compact"}),
            "su(2) with the round metric",
            (third,) * 3,
            "Soliton",
        ),
        CatalogEntry(
            "sl2r",
            make_bracket(0, 3, [(1, 2, 2, 2.0), (1, 3, 3, -2.0), (2, 3, 1, 1.0)]),
            frozenset({"semisimple", "unimodular"}),
            "sl(2,R) in the basis H, E, F",
            (third,) * 3,
            "Generic",
        ),
        CatalogEntry(
            "e2",
            make_bracket(0, 3, [(1, 2, 3, 1.0), (1, 3, 2, -1.0)]),
            frozenset({"solvable", "unimodular", "flat"}),
            "euclidean motions of the plane, flat metric",
            (F(-1), F(0), F(0)),
            "Flat",
        ),
        CatalogEntry(
            "e11",
            make_bracket(0, 3, [(1, 2, 2, 1.0), (1, 3, 3, -1.0)]),
            frozenset({"solvable", "unimodular"}),
            "rigid motions of the Minkowski plane",
            (F(-1), F(0), F(0)),
            "Soliton",
        ),
        CatalogEntry(
            "r_heis3",
            make_bracket(0, 4, [(1, 2, 2, 1.0), (1, 3, 3, 1.0), (1, 4, 4, 2.0), (2, 3, 4, 1.0)]),
            frozenset({"solvable", "non_unimodular"}),
            "R acting on heis3 by the derivation diag(1, 1, 2)",
            (F(-3, 4), F(-1, 4), F(-1, 4), F(1, 4)),
            "Generic",
        ),
        CatalogEntry(
            "h2_isotropy",
            make_bracket(1, 2, [(1, 2, 3, -2.0), (1, 3, 2, 2.0), (2, 3, 1, 2.0)], homogeneous=True),
            frozenset({"semisimple", "unimodular", "isotropy", "einstein"}),
            "hyperbolic plane as SL(2,R)/SO(2); h spanned by the rotation",
            (third,) * 3,
            "Soliton",
        ),
    ]
    return {e.name: e for e in out}


_PARAM = re.compile(r"^(?P<base>[a-z0-9_]+)\((?P<arg>[^)]*)\)$")
_FACTORIES: dict[str, Callable] = {
    "abelian": lambda a: _abelian(int(a)),
    "hyp": lambda a: _hyp(int(a)),
    "e2_eps": lambda a: _e2_eps(float(a)),
}


def get(name: str) -> CatalogEntry:
    """Look up an entry by name (``hyp(3)`` style parameters allowed)."""
    fixed = _fixed()
    if name in fixed:
        return fixed[name]
    if name == "e2_eps":
        return _e2_eps()
    m = _PARAM.match(name.strip())
    if m and m.group("base") in _FACTORIES:
        try:
            return _FACTORIES[m.group("base")](m.group("arg"))
        except ValueError as exc:
            raise UnknownEntry(f"bad parameter in {name!r}") from exc
    raise UnknownEntry(f"no catalog entry named {name!r}")


def names() -> list[str]:
    std = [f"abelian({n})" for n in range(1, 5)]
    std += ["heis3", "heis5", "su2", "sl2r", "e2", "e11"]
    std += [f"hyp({n})" for n in (2, 3, 4)]
    std += ["e2_eps", "r_heis3", "h2_isotropy"]
    return std


def entries(tag: str | None = None) -> list[CatalogEntry]:
    out = [get(n) for n in names()]
    return [e for e in out if tag is None or tag in e.tags]


def load_json(path: str | Path, name: str | None = None) -> CatalogEntry:
    """Read a bracket record ``{"dim_h", "dim_m", "entries"}`` from disk."""
    data = json.loads(Path(path).read_text())
    mu = Bracket.from_dict(data, homogeneous=data.get("dim_h", 0) > 0)
    return CatalogEntry(name or data.get("name", Path(path).stem), mu, frozenset(data.get("tags", [])))


def resolve(spec: str) -> CatalogEntry:
    """Catalog name or path to a bracket JSON file."""
    p = Path(spec)
    if p.suffix == ".json" or p.exists():
        if not p.exists():
            raise UnknownEntry(f"no such file {spec!r}")
        return load_json(p)
    return get(spec)
