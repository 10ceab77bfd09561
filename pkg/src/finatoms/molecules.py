"""Molecules: bound groups of atoms, their bonds, and supermolecules.

Fragments come from complete-link growth on the full (un-zeroed) matrix
seeded at each atom; every natural boundary past the atom itself yields
one fragment.  Fragments sharing a constituent atom merge transitively
into a molecule.  Bond kinds between constituent atoms follow the
max/min cross-pair counts compared against an upper level c1 and a lower
level c2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .atoms import Atom, rerun_history
from .comovement import CoMatrix
from .errors import (
    BadThresholds,
    NoStrongAtoms,
    PreconditionError,
    UnknownAtom,
)
from .phc import Boundary, detect_boundaries, grow_cluster

FRAGMENT_PROMINENCE = 5.0


@dataclass(frozen=True)
class Fragment:
    """Stocks admitted up to one natural boundary of a seed atom's history."""

    seed_atom: int
    stocks: tuple[int, ...]
    boundary: Boundary


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    kind: str  # thick | thin | dashed
    max_inter: int
    min_inter: int


@dataclass(frozen=True)
class Molecule:
    id: int
    atom_ids: frozenset[int]
    nonatomic_stocks: frozenset[int]
    bonds: tuple[Bond, ...] = ()
    c1: int | None = None
    c2: int | None = None
    shaded: frozenset[int] = field(default_factory=frozenset)


@dataclass(frozen=True)
class SupermoleculeReport:
    seed_atom: int
    boundaries: tuple[Boundary, ...]
    member_stocks_at: dict[int, tuple[int, ...]]
    molecular_level_mean: float | None


def _atom_by_id(atoms, atom_id: int) -> Atom:
    for atom in atoms:
        if atom.id == atom_id:
            return atom
    raise UnknownAtom(f"no atom with id {atom_id}")


def _boundaries_past_atom(matrix, atom, max_size, prominence):
    """Full-matrix history from the atom seed, with the boundary window
    opened only beyond the size at which the whole atom is present."""
    history = grow_cluster(
        matrix, atom.seed, "complete", max_size=min(max_size, matrix.n_stocks)
    )
    members = history.members()
    admitted: set[int] = set()
    atom_complete_at = None
    for size, idx in enumerate(members, start=1):
        admitted.add(idx)
        if atom.members <= admitted:
            atom_complete_at = size
            break
    if atom_complete_at is None:
        raise UnknownAtom(f"atom {atom.id} never fully admitted (max_size too small?)")
    if len(history.admissions) < 3 or atom_complete_at + 1 > history.max_size - 1:
        return history, []
    boundaries = detect_boundaries(
        history,
        min_size=atom_complete_at + 1,
        max_size=history.max_size - 1,
        prominence=prominence,
    )
    return history, boundaries


def molecule_fragments(
    matrix: CoMatrix,
    atoms: list[Atom],
    seed_atom: int,
    max_size: int,
    prominence: float = FRAGMENT_PROMINENCE,
) -> list[Fragment]:
    """One fragment per natural boundary past the seed atom, sharpest first."""
    atom = _atom_by_id(atoms, seed_atom)
    if len(atom.members) < 2:
        raise PreconditionError(f"seed atom {seed_atom} has < 2 members")
    history, boundaries = _boundaries_past_atom(matrix, atom, max_size, prominence)
    return [
        Fragment(
            seed_atom=seed_atom,
            stocks=history.members(size=b.size),
            boundary=b,
        )
        for b in boundaries
    ]


def assemble_molecules(fragments: list[Fragment], atoms: list[Atom]) -> list[Molecule]:
    """Union fragments into molecules via shared constituent atoms.

    An atom is a constituent of a fragment as soon as one of its stocks
    appears there; fragments sharing any constituent merge transitively.
    """
    stock_atom = {m: a.id for a in atoms for m in a.members}
    frag_atoms = []
    for frag in fragments:
        frag_atoms.append({stock_atom[s] for s in frag.stocks if s in stock_atom})

    # union-find over atom ids
    parent: dict[int, int] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    for ids in frag_atoms:
        ids = sorted(ids)
        for other in ids[1:]:
            union(ids[0], other)

    groups: dict[int, set[int]] = {}
    nonatomic: dict[int, set[int]] = {}
    for frag, ids in zip(fragments, frag_atoms):
        if not ids:
            continue
        root = find(min(ids))
        groups.setdefault(root, set()).update(ids)
        nonatomic.setdefault(root, set()).update(
            s for s in frag.stocks if s not in stock_atom
        )

    molecules = []
    for k, root in enumerate(sorted(groups, key=lambda r: min(groups[r])), start=1):
        molecules.append(
            Molecule(
                id=k,
                atom_ids=frozenset(groups[root]),
                nonatomic_stocks=frozenset(nonatomic[root]),
            )
        )
    return molecules


@dataclass(frozen=True)
class MolecularLevelReport:
    mean: float | None
    per_atom: dict[int, int]


def molecular_level(
    matrix: CoMatrix, molecules: list[Molecule], atoms: list[Atom]
) -> MolecularLevelReport:
    """Mean admission level of the first atom foreign to each strong
    constituent atom's molecule, over full-matrix reruns."""
    strong = {a.id for a in atoms if a.strength == "strong"}
    constituents = {aid for m in molecules for aid in m.atom_ids}
    if not (strong & constituents):
        raise NoStrongAtoms("no strong constituent atoms")
    stock_atom = {m: a.id for a in atoms for m in a.members}
    molecule_of = {aid: m.id for m in molecules for aid in m.atom_ids}

    per_atom: dict[int, int] = {}
    for atom in atoms:
        if atom.id not in strong or atom.id not in constituents:
            continue
        own_mol = molecule_of[atom.id]
        history = rerun_history(matrix, atom)
        for idx, level in history.admissions:
            other = stock_atom.get(idx)
            if other is not None and molecule_of.get(other, -1) != own_mol:
                per_atom[atom.id] = int(level)
                break
        # no foreign atom in the market -> this atom contributes nothing
    mean = float(np.mean(list(per_atom.values()))) if per_atom else None
    return MolecularLevelReport(mean=mean, per_atom=per_atom)


def bond_graph(
    matrix: CoMatrix,
    molecule: Molecule,
    atoms: list[Atom],
    c1: int,
    c2: int,
) -> Molecule:
    """Populate bonds, pruning, and shading for one molecule.

    Bond kind per atom pair from the max/min cross-pair counts: thick
    (max >= c1, min >= c2), thin (max >= c1, min < c2), dashed
    (c2 <= max < c1), none otherwise.  Atoms carrying both a solid and a
    dashed bond lose their dashed bonds.  An atom is shaded when its
    strongest count to a non-atomic molecule stock reaches c2.
    """
    if c2 >= c1:
        raise BadThresholds(f"need c2 < c1, got c1={c1}, c2={c2}")
    members = {a.id: sorted(a.members) for a in atoms if a.id in molecule.atom_ids}
    if len(members) != len(molecule.atom_ids):
        raise UnknownAtom("molecule references atoms not in the atom list")

    bonds = []
    ids = sorted(members)
    for x, a in enumerate(ids):
        for b in ids[x + 1 :]:
            cross = matrix.counts[np.ix_(members[a], members[b])]
            max_inter, min_inter = int(cross.max()), int(cross.min())
            if max_inter >= c1:
                kind = "thick" if min_inter >= c2 else "thin"
            elif max_inter >= c2:
                kind = "dashed"
            else:
                continue
            bonds.append(
                Bond(a=a, b=b, kind=kind, max_inter=max_inter, min_inter=min_inter)
            )

    solid_ends = {e for bond in bonds if bond.kind in ("thick", "thin") for e in (bond.a, bond.b)}
    bonds = [
        bond
        for bond in bonds
        if bond.kind != "dashed" or (bond.a not in solid_ends and bond.b not in solid_ends)
    ]

    shaded = set()
    non = sorted(molecule.nonatomic_stocks)
    if non:
        for aid in ids:
            if int(matrix.counts[np.ix_(members[aid], non)].max()) >= c2:
                shaded.add(aid)

    return replace(
        molecule, bonds=tuple(bonds), c1=c1, c2=c2, shaded=frozenset(shaded)
    )


def supermolecule_boundaries(
    matrix: CoMatrix,
    atoms: list[Atom],
    seed_atom: int,
    max_size: int,
    prominence: float = FRAGMENT_PROMINENCE,
) -> SupermoleculeReport:
    """Boundary search at large cluster sizes (bound states of molecules)."""
    if max_size > matrix.n_stocks:
        raise PreconditionError(f"max_size {max_size} exceeds N")
    atom = _atom_by_id(atoms, seed_atom)
    history, boundaries = _boundaries_past_atom(matrix, atom, max_size, prominence)
    member_stocks_at = {
        b.size: history.members(size=b.size) for b in boundaries
    }
    levels = history.levels_by_size()
    mean_level = None
    if boundaries:
        top = max(b.size for b in boundaries)
        mean_level = float(levels[: top - 1].mean())
    return SupermoleculeReport(
        seed_atom=seed_atom,
        boundaries=tuple(boundaries),
        member_stocks_at=member_stocks_at,
        molecular_level_mean=mean_level,
    )


def molecule_to_json(molecule: Molecule, atoms, tickers, sectors=None) -> dict:
    sectors = sectors or {}
    atom_map = {a.id: a for a in atoms}
    atom_items = []
    for aid in sorted(molecule.atom_ids):
        atom = atom_map[aid]
        names = [tickers[m] for m in sorted(atom.members)]
        atom_items.append(
            {
                "id": aid,
                "tickers": names,
                "strength": atom.strength,
                "sectors": [sectors.get(t) for t in names],
            }
        )
    return {
        "id": molecule.id,
        "atoms": atom_items,
        "nonatomic": [tickers[s] for s in sorted(molecule.nonatomic_stocks)],
        "bonds": [
            {
                "a": b.a,
                "b": b.b,
                "kind": b.kind,
                "max_inter": b.max_inter,
                "min_inter": b.min_inter,
            }
            for b in sorted(molecule.bonds, key=lambda b: (b.a, b.b))
        ],
        "c1": molecule.c1,
        "c2": molecule.c2,
        "shaded": sorted(molecule.shaded),
    }


def molecule_to_dot(molecule: Molecule, atoms, tickers) -> str:
    """Graphviz DOT rendering of one molecule.

    Node area scales with member count (width/height proportional to
    sqrt(size)), strong atoms get a solid outline and weak atoms a dashed
    one, shaded atoms are filled gray; thick/thin bonds map to penwidth
    2/1 and dashed bonds to a dashed edge style.
    """
    atom_map = {a.id: a for a in atoms}
    lines = [f"graph molecule_{molecule.id} {{", "  node [shape=circle];"]
    for aid in sorted(molecule.atom_ids):
        atom = atom_map[aid]
        side = round(0.5 * np.sqrt(len(atom.members)), 3)
        label = "\\n".join(tickers[m] for m in sorted(atom.members))
        style_parts = ["solid" if atom.strength == "strong" else "dashed"]
        attrs = [
            f'label="{label}"',
            f"width={side}",
            f"height={side}",
            "fixedsize=true",
        ]
        if aid in molecule.shaded:
            style_parts.append("filled")
            attrs.append('fillcolor="lightgray"')
        attrs.append(f'style="{",".join(style_parts)}"')
        lines.append(f"  atom{aid} [{', '.join(attrs)}];")
    for bond in sorted(molecule.bonds, key=lambda b: (b.a, b.b)):
        if bond.kind == "thick":
            attr = "penwidth=2"
        elif bond.kind == "thin":
            attr = "penwidth=1"
        else:
            attr = 'style="dashed"'
        lines.append(f"  atom{bond.a} -- atom{bond.b} [{attr}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
