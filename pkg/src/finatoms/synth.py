"""Planted-hierarchy market generator and its closed-form oracle.

Signs are generated directly through a layered flip chain: a market sign
per window, molecule signs copied from it with probability p_market,
atom signs from their molecule with probability p_mol, stock signs from
their atom with probability p_atom, then per-stock unassignment.  Stocks
outside every planted atom act as singleton atoms, and atoms outside
every planted molecule as singleton molecules, so the same-sign
probability of any pair has an exact closed form through the chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .comovement import SignMatrix
from .errors import InvalidSpec

RELATIONS = ("same_atom", "same_molecule", "background")


@dataclass(frozen=True)
class PlantedSpec:
    n_stocks: int
    atom_partition: tuple[tuple[int, ...], ...]
    molecule_partition: tuple[tuple[int, ...], ...]  # groups of atom indices
    T: int
    p_market: float
    p_mol: float
    p_atom: float
    p_unassigned: float
    rng_seed: int

    def __post_init__(self):
        if self.n_stocks < 2 or self.T < 1:
            raise InvalidSpec("need n_stocks >= 2 and T >= 1")
        flat = [s for block in self.atom_partition for s in block]
        if len(flat) != len(set(flat)) or any(
            not 0 <= s < self.n_stocks for s in flat
        ):
            raise InvalidSpec("atom blocks must be disjoint stock subsets")
        if any(len(block) < 2 for block in self.atom_partition):
            raise InvalidSpec("atom blocks need >= 2 stocks")
        flat_atoms = [a for grp in self.molecule_partition for a in grp]
        if len(flat_atoms) != len(set(flat_atoms)) or any(
            not 0 <= a < len(self.atom_partition) for a in flat_atoms
        ):
            raise InvalidSpec("molecule groups must be disjoint atom subsets")
        # weak ordering: degenerate equal-probability specs are legal and
        # useful as analytic edge cases
        if not 0.5 <= self.p_market <= self.p_mol <= self.p_atom <= 1.0:
            raise InvalidSpec("need 0.5 <= p_market <= p_mol <= p_atom <= 1")
        if not 0 <= self.p_unassigned < 1:
            raise InvalidSpec("p_unassigned must be in [0, 1)")


@dataclass(frozen=True)
class PlantedTruth:
    spec: PlantedSpec
    stock_atom: tuple[int, ...]  # stock -> atom label (singletons included)
    atom_molecule: tuple[int, ...]  # atom label -> molecule label
    expected_pairwise: dict[str, float] = field(default_factory=dict)

    def stock_molecule(self, stock: int) -> int:
        return self.atom_molecule[self.stock_atom[stock]]

    def relation(self, i: int, j: int) -> str:
        if self.stock_atom[i] == self.stock_atom[j]:
            return "same_atom"
        if self.stock_molecule(i) == self.stock_molecule(j):
            return "same_molecule"
        return "background"


def default_spec(rng_seed: int = 522) -> PlantedSpec:
    """Desk-scale reference market: 100 stocks, 12 atoms in 3 molecules."""
    sizes = (3, 4, 5, 6, 7, 8, 9, 10, 6, 8, 5, 7)  # 78 stocks, 22 background
    blocks, start = [], 0
    for size in sizes:
        blocks.append(tuple(range(start, start + size)))
        start += size
    return PlantedSpec(
        n_stocks=100,
        atom_partition=tuple(blocks),
        molecule_partition=((0, 1, 2, 3), (4, 5, 6, 7), (8, 9, 10, 11)),
        T=522,
        p_market=0.55,
        p_mol=0.80,
        p_atom=0.95,
        p_unassigned=0.05,
        rng_seed=rng_seed,
    )


def _labels(spec: PlantedSpec) -> tuple[list[int], list[int]]:
    """Stock -> atom and atom -> molecule labels, with singleton fill-ins."""
    stock_atom = [-1] * spec.n_stocks
    for a, block in enumerate(spec.atom_partition):
        for s in block:
            stock_atom[s] = a
    next_atom = len(spec.atom_partition)
    for s in range(spec.n_stocks):
        if stock_atom[s] == -1:
            stock_atom[s] = next_atom
            next_atom += 1

    atom_molecule = [-1] * next_atom
    for m, grp in enumerate(spec.molecule_partition):
        for a in grp:
            atom_molecule[a] = m
    next_mol = len(spec.molecule_partition)
    for a in range(next_atom):
        if atom_molecule[a] == -1:
            atom_molecule[a] = next_mol
            next_mol += 1
    return stock_atom, atom_molecule


def _agree(x: float, y: float) -> float:
    """Same-outcome probability of two flips composed in series."""
    return x * y + (1 - x) * (1 - y)


def expected_comovement(spec: PlantedSpec, relation: str) -> float:
    """Closed-form expected count for a pair in the given relation."""
    if relation not in RELATIONS:
        raise InvalidSpec(f"unknown relation {relation!r}")
    if relation == "same_atom":
        p_same = _agree(spec.p_atom, spec.p_atom)
    else:
        r = _agree(spec.p_atom, spec.p_mol)  # stock agrees with molecule sign
        if relation == "same_molecule":
            p_same = _agree(r, r)
        else:
            s = _agree(r, spec.p_market)  # stock agrees with market sign
            p_same = _agree(s, s)
    return spec.T * p_same * (1 - spec.p_unassigned) ** 2


def generate_market(spec: PlantedSpec) -> tuple[SignMatrix, PlantedTruth]:
    """Draw a full sign matrix; bitwise reproducible per rng_seed."""
    stock_atom, atom_molecule = _labels(spec)
    n_atoms = len(atom_molecule)
    n_mols = max(atom_molecule) + 1
    rng = np.random.default_rng(spec.rng_seed)

    market = rng.choice(np.array([-1, 1], dtype=np.int8), size=spec.T)
    mol_keep = rng.random((n_mols, spec.T)) < spec.p_market
    atom_keep = rng.random((n_atoms, spec.T)) < spec.p_mol
    stock_keep = rng.random((spec.n_stocks, spec.T)) < spec.p_atom
    unassigned = rng.random((spec.n_stocks, spec.T)) < spec.p_unassigned

    mol_signs = np.where(mol_keep, market, -market).astype(np.int8)
    atom_signs = np.where(
        atom_keep, mol_signs[atom_molecule], -mol_signs[atom_molecule]
    ).astype(np.int8)
    signs = np.where(
        stock_keep, atom_signs[stock_atom], -atom_signs[stock_atom]
    ).astype(np.int8)
    signs[unassigned] = 0

    truth = PlantedTruth(
        spec=spec,
        stock_atom=tuple(stock_atom),
        atom_molecule=tuple(atom_molecule),
        expected_pairwise={rel: expected_comovement(spec, rel) for rel in RELATIONS},
    )
    tickers = tuple(f"S{i:03d}" for i in range(spec.n_stocks))
    windows = tuple(f"w{t:04d}" for t in range(spec.T))
    return SignMatrix(signs=signs, tickers=tickers, windows=windows), truth


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected partition agreement in [-1, 1]."""
    labels_a = list(labels_a)
    labels_b = list(labels_b)
    if len(labels_a) != len(labels_b):
        raise InvalidSpec("label sequences differ in length")
    n = len(labels_a)
    table: dict[tuple, int] = {}
    for a, b in zip(labels_a, labels_b):
        table[(a, b)] = table.get((a, b), 0) + 1
    row: dict = {}
    col: dict = {}
    for (a, b), c in table.items():
        row[a] = row.get(a, 0) + c
        col[b] = col.get(b, 0) + c
    sum_cells = sum(math.comb(c, 2) for c in table.values())
    sum_row = sum(math.comb(c, 2) for c in row.values())
    sum_col = sum(math.comb(c, 2) for c in col.values())
    total = math.comb(n, 2)
    expected = sum_row * sum_col / total if total else 0.0
    max_index = (sum_row + sum_col) / 2
    if max_index == expected:
        return 1.0
    return (sum_cells - expected) / (max_index - expected)


def parse_spec_config(path) -> PlantedSpec:
    """Read a plain-text key=value spec file.

    Keys: n_stocks, T, p_market, p_mol, p_atom, p_unassigned, rng_seed,
    atom_sizes (comma list), molecule_sizes (comma list of atoms per
    molecule, consumed in order).
    """
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidSpec(f"line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()

    def intlist(key):
        return [int(v) for v in values[key].split(",") if v.strip()]

    try:
        n_stocks = int(values["n_stocks"])
        sizes = intlist("atom_sizes")
        blocks, start = [], 0
        for size in sizes:
            blocks.append(tuple(range(start, start + size)))
            start += size
        groups, at = [], 0
        for g in intlist("molecule_sizes"):
            groups.append(tuple(range(at, at + g)))
            at += g
        return PlantedSpec(
            n_stocks=n_stocks,
            atom_partition=tuple(blocks),
            molecule_partition=tuple(groups),
            T=int(values["T"]),
            p_market=float(values["p_market"]),
            p_mol=float(values["p_mol"]),
            p_atom=float(values["p_atom"]),
            p_unassigned=float(values.get("p_unassigned", "0")),
            rng_seed=int(values.get("rng_seed", "0")),
        )
    except KeyError as exc:
        raise InvalidSpec(f"missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise InvalidSpec(str(exc)) from None


def export_truth_csv(truth: PlantedTruth, tickers, path) -> None:
    """Ground-truth labels: ticker,atom_label,molecule_label."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("ticker,atom_label,molecule_label\n")
        for i, ticker in enumerate(tickers):
            fh.write(
                f"{ticker},{truth.stock_atom[i]},{truth.stock_molecule(i)}\n"
            )


def load_truth_csv(path) -> dict[str, tuple[int, int]]:
    out: dict[str, tuple[int, int]] = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)  # header
        for line in fh:
            line = line.strip()
            if not line:
                continue
            ticker, atom, mol = line.split(",")
            out[ticker] = (int(atom), int(mol))
    return out
