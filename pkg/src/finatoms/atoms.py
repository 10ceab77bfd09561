"""Iterative extraction and classification of financial atoms.

Extraction repeatedly seeds a complete-link partial clustering at the
largest remaining matrix entry, cuts it at the sharpest small-size
boundary, records the atom, and zeroes its rows and columns so the next
atom is found independently.  Classification compares each atom's peak
internal count against the upper (self-consistency) and lower (first
foreign admission) atomic correlation levels.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .comovement import CoMatrix, background_level
from .errors import AtomNotFromMatrix, EmptyMatrix, PreconditionError
from .phc import ClusterHistory, detect_boundaries, grow_cluster

log = logging.getLogger(__name__)

DEFAULT_MAX_ATOM_SIZE = 20
STOP_LEVEL_SIGMAS = 3.0
# Boundary search inside extraction allows size-2 cuts (seed-pair atoms are
# common: dual listings of one company) and a low prominence gate; the
# sharpest-boundary rule does the real selection.
EXTRACTION_PROMINENCE = 2.0


@dataclass(frozen=True)
class Atom:
    """An extracted cluster of very strongly co-moving stocks."""

    id: int
    members: frozenset[int]
    seed: tuple[int, int]
    max_intra: int
    min_intra: int
    first_foreign_level: int | None = None
    self_consistent: bool | None = None
    strength: str = "candidate"  # strong | weak | candidate

    def __post_init__(self):
        if len(self.members) < 2:
            raise PreconditionError(f"atom {self.id} has < 2 members")
        if self.min_intra > self.max_intra:
            raise PreconditionError(f"atom {self.id}: min_intra > max_intra")


@dataclass(frozen=True)
class AtomicLevels:
    """Upper / lower atomic correlation levels for one extraction."""

    upper: int  # T+1 sentinel when no atom is self-consistent
    lower_mean: float
    per_atom_lower: tuple[int, ...]
    inverted: bool = field(default=False)  # lower_mean > upper, reported not fatal


def default_stop_level(matrix: CoMatrix) -> int:
    """Background cutoff c0 + 3 sigma of the off-diagonal histogram."""
    summary = background_level(matrix)
    off = matrix.off_diagonal()
    return int(np.ceil(summary.c0 + STOP_LEVEL_SIGMAS * off.std()))


def _intra_stats(counts: np.ndarray, members) -> tuple[int, int]:
    idx = sorted(members)
    sub = counts[np.ix_(idx, idx)]
    iu = np.triu_indices(len(idx), k=1)
    vals = sub[iu]
    return int(vals.max()), int(vals.min())


def _argmax_pair(counts: np.ndarray) -> tuple[int, int, int]:
    """Largest off-diagonal entry; ties resolve to the lexicographically
    smallest (i, j) with i < j (row-major scan of the upper triangle)."""
    n = counts.shape[0]
    upper = np.triu(counts, k=1)
    flat = int(np.argmax(upper))
    i, j = divmod(flat, n)
    return i, j, int(upper[i, j])


def extract_candidates(
    matrix: CoMatrix,
    max_atoms: int | None = None,
    max_atom_size: int = DEFAULT_MAX_ATOM_SIZE,
    stop_level: int | None = None,
) -> list[Atom]:
    """Extract candidate atoms until the working maximum falls below
    ``stop_level`` (default: background level + 3 sigma)."""
    if matrix.n_stocks < 2:
        raise EmptyMatrix("co-matrix has fewer than 2 stocks")
    if max_atom_size < 2:
        raise PreconditionError("max_atom_size must be >= 2")
    if stop_level is None:
        stop_level = default_stop_level(matrix)
    if stop_level < 0:
        raise PreconditionError("stop_level must be >= 0")

    working = matrix.counts.astype(np.int64)
    np.fill_diagonal(working, 0)
    extracted: set[int] = set()
    atoms: list[Atom] = []

    while max_atoms is None or len(atoms) < max_atoms:
        i, j, peak = _argmax_pair(working)
        if peak < stop_level or peak <= 0:
            break
        members = _cut_atom(matrix, (i, j), extracted, max_atom_size)
        max_intra, min_intra = _intra_stats(matrix.counts, members)
        atoms.append(
            Atom(
                id=len(atoms) + 1,
                members=frozenset(members),
                seed=(i, j),
                max_intra=max_intra,
                min_intra=min_intra,
            )
        )
        extracted.update(members)
        idx = list(members)
        working[idx, :] = 0
        working[:, idx] = 0
    return atoms


def _cut_atom(matrix, seed, masked, max_atom_size) -> tuple[int, ...]:
    """Grow from a seed and cut at the sharpest boundary within the atom
    size cap; fall back to the seed pair when no boundary is found."""
    # a couple of extra admissions so the slope beyond max_atom_size exists
    cap = min(matrix.n_stocks, max_atom_size + 3)
    history = grow_cluster(matrix, seed, "complete", masked=masked, max_size=cap)
    if len(history.admissions) < 3:
        return seed
    boundaries = detect_boundaries(
        history,
        min_size=2,
        max_size=min(max_atom_size, history.max_size - 1),
        prominence=EXTRACTION_PROMINENCE,
    )
    if not boundaries:
        return seed
    return history.members(size=boundaries[0].size)


def _check_atoms(matrix: CoMatrix, atoms) -> None:
    if not atoms:
        raise PreconditionError("atom list is empty")
    seen: set[int] = set()
    for atom in atoms:
        if any(not 0 <= m < matrix.n_stocks for m in atom.members):
            raise AtomNotFromMatrix(f"atom {atom.id} indexes outside matrix")
        if seen & atom.members:
            raise AtomNotFromMatrix(f"atom {atom.id} overlaps a previous atom")
        seen |= atom.members


def rerun_history(matrix: CoMatrix, atom: Atom, max_size: int | None = None) -> ClusterHistory:
    """Complete-link growth from an atom's seed on the full, un-zeroed matrix."""
    if max_size is None:
        max_size = matrix.n_stocks
    return grow_cluster(matrix, atom.seed, "complete", max_size=max_size)


def _first_foreign_level(matrix: CoMatrix, atom: Atom) -> int:
    size = min(matrix.n_stocks, len(atom.members) + 1)
    history = rerun_history(matrix, atom, max_size=size)
    for idx, level in history.admissions:
        if idx not in atom.members:
            return int(level)
    # all admissions were members (possible only when the atom spans N-1+)
    history = rerun_history(matrix, atom)
    for idx, level in history.admissions:
        if idx not in atom.members:
            return int(level)
    raise AtomNotFromMatrix(f"atom {atom.id} leaves no foreign stock")


def _is_self_consistent(matrix: CoMatrix, atom: Atom) -> bool:
    """Every internal pair must beat every member-to-outsider count."""
    idx = sorted(atom.members)
    outside = np.ones(matrix.n_stocks, dtype=bool)
    outside[idx] = False
    if not outside.any():
        return False
    max_out = int(matrix.counts[np.ix_(idx, outside.nonzero()[0])].max())
    return atom.min_intra > max_out


def atomic_levels(matrix: CoMatrix, atoms: list[Atom]) -> tuple[list[Atom], AtomicLevels]:
    """Annotate atoms with foreign-admission levels and self-consistency,
    and derive the upper / lower atomic correlation levels.

    The upper level is emergent: the smallest max_intra among
    self-consistent atoms (sentinel T+1 when there is none).  The lower
    level is the mean admission level of the first non-member across the
    full-matrix reruns.
    """
    _check_atoms(matrix, atoms)
    annotated = []
    for atom in atoms:
        annotated.append(
            replace(
                atom,
                first_foreign_level=_first_foreign_level(matrix, atom),
                self_consistent=_is_self_consistent(matrix, atom),
            )
        )
    per_atom_lower = tuple(a.first_foreign_level for a in annotated)
    lower_mean = float(np.mean(per_atom_lower))
    consistent = [a.max_intra for a in annotated if a.self_consistent]
    upper = min(consistent) if consistent else matrix.T + 1
    inverted = lower_mean > upper
    if inverted:
        log.warning(
            "lower atomic level %.1f exceeds upper %d; reporting anyway",
            lower_mean,
            upper,
        )
    levels = AtomicLevels(
        upper=upper,
        lower_mean=lower_mean,
        per_atom_lower=per_atom_lower,
        inverted=inverted,
    )
    return annotated, levels


def classify_atoms(atoms: list[Atom], levels: AtomicLevels) -> list[Atom]:
    """Assign strong / weak / candidate per the atomic levels."""
    out = []
    for atom in atoms:
        if atom.first_foreign_level is None or atom.self_consistent is None:
            raise PreconditionError(f"atom {atom.id} not annotated by atomic_levels")
        if atom.self_consistent and atom.max_intra >= levels.upper:
            strength = "strong"
        elif atom.max_intra > levels.lower_mean:
            strength = "weak"
        else:
            strength = "candidate"
        out.append(replace(atom, strength=strength))
    return out


@dataclass(frozen=True)
class AtomRecord:
    """Ticker-level view of an atom, as serialized to JSON."""

    id: int
    tickers: tuple[str, ...]
    sectors: tuple[str | None, ...]
    max_intra: int | None  # None in reference fixtures without published levels
    min_intra: int | None
    first_foreign_level: int | None
    strength: str


def to_records(atoms, tickers, sectors=None) -> list[AtomRecord]:
    sectors = sectors or {}
    out = []
    for atom in atoms:
        names = tuple(tickers[m] for m in sorted(atom.members))
        out.append(
            AtomRecord(
                id=atom.id,
                tickers=names,
                sectors=tuple(sectors.get(t) for t in names),
                max_intra=atom.max_intra,
                min_intra=atom.min_intra,
                first_foreign_level=atom.first_foreign_level,
                strength=atom.strength,
            )
        )
    return out


def records_to_json(records: list[AtomRecord]) -> str:
    payload = [
        {
            "id": r.id,
            "tickers": list(r.tickers),
            "sectors": list(r.sectors),
            "max_intra": r.max_intra,
            "min_intra": r.min_intra,
            "first_foreign_level": r.first_foreign_level,
            "strength": r.strength,
        }
        for r in records
    ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def records_from_json(text: str) -> list[AtomRecord]:
    def opt_int(value):
        return None if value is None else int(value)

    out = []
    for item in json.loads(text):
        out.append(
            AtomRecord(
                id=int(item["id"]),
                tickers=tuple(item["tickers"]),
                sectors=tuple(item["sectors"]),
                max_intra=opt_int(item["max_intra"]),
                min_intra=opt_int(item["min_intra"]),
                first_foreign_level=opt_int(item["first_foreign_level"]),
                strength=item["strength"],
            )
        )
    return out


def load_reference_atoms(name: str = "sgx_strong_atoms") -> list[AtomRecord]:
    """Bundled reference fixtures (e.g. the SGX strong-atom list)."""
    from importlib.resources import files

    text = files("finatoms.data").joinpath(f"{name}.json").read_text("utf-8")
    return records_from_json(text)
