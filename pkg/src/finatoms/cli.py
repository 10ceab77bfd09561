"""Command-line pipeline: prices -> co-matrix -> atoms -> molecules.

Every stage is independently invocable; ``analyze`` runs the whole
pipeline and writes the full artifact set plus a manifest of all
effective parameters.  Exit codes: 0 success, 2 parse error, 3
precondition violation, 4 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, atoms as atoms_mod, comovement, ingest, kernels
from . import molecules as molecules_mod, phc, synth
from .errors import FinatomsError

DEFAULT_PROMINENCE = phc.DEFAULT_PROMINENCE


class ArtifactWriter:
    """Tracks written files so a failed run leaves no partial artifacts."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(p)
        return p

    def write_json(self, name: str, payload) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
        return p

    def cleanup(self):
        for p in self.written:
            p.unlink(missing_ok=True)


def _load_comatrix(args) -> comovement.CoMatrix:
    if getattr(args, "comatrix", None):
        return comovement.load_cmx(args.comatrix)
    panel = _load_panel(args)
    signs = comovement.sign_deltas(panel)
    return comovement.comovement_matrix(signs)


def _load_panel(args) -> ingest.MarketPanel:
    series = ingest.load_prices(args.prices)
    sectors = ingest.load_sectors(args.sectors) if args.sectors else None
    return ingest.align_panel(series, args.min_coverage, sectors=sectors)


def _sector_map(args) -> dict[str, str]:
    if not getattr(args, "sectors", None):
        return {}
    table = ingest.load_sectors(args.sectors)
    return {t: info.sector for t, info in table.entries.items()}


def _atom_stage(matrix, args):
    stop = args.stop_level
    effective_stop = stop if stop is not None else atoms_mod.default_stop_level(matrix)
    extracted = atoms_mod.extract_candidates(
        matrix,
        max_atoms=args.max_atoms,
        max_atom_size=args.max_atom_size,
        stop_level=effective_stop,
    )
    if not extracted:
        return [], None, effective_stop
    annotated, levels = atoms_mod.atomic_levels(matrix, extracted)
    classified = atoms_mod.classify_atoms(annotated, levels)
    return classified, levels, effective_stop


def _molecule_stage(matrix, classified, levels, args):
    seeds = [a for a in classified if a.strength == "strong"] or classified
    fragments = []
    for atom in seeds:
        found = molecules_mod.molecule_fragments(
            matrix,
            classified,
            atom.id,
            max_size=args.molecule_max_size or matrix.n_stocks,
            prominence=args.prominence,
        )
        # only the sharpest boundary per seed is a molecule edge; weaker
        # ones are noise kinks or larger-scale (supermolecule) structure
        if found:
            fragments.append(found[0])
    assembled = molecules_mod.assemble_molecules(fragments, classified)
    reported = [m for m in assembled if len(m.atom_ids) >= 2]
    c1 = args.c1 if args.c1 is not None else (levels.upper if levels else None)
    c2 = args.c2 if args.c2 is not None else (
        int(round(levels.lower_mean)) if levels else None
    )
    bonded = []
    if c1 is not None and c2 is not None:
        for mol in reported:
            bonded.append(molecules_mod.bond_graph(matrix, mol, classified, c1, c2))
    else:
        bonded = reported
    return fragments, bonded, c1, c2


def _levels_payload(matrix, summary, levels, mol_report):
    def with_fraction(value):
        if value is None:
            return None
        return {"count": value, "fraction": round(value / matrix.T, 6)}

    return {
        "T": matrix.T,
        "c0": with_fraction(summary.c0),
        "upper_atomic": with_fraction(levels.upper if levels else None),
        "lower_atomic_mean": with_fraction(levels.lower_mean if levels else None),
        "per_atom_lower": list(levels.per_atom_lower) if levels else [],
        "lower_exceeds_upper": levels.inverted if levels else False,
        "molecular": with_fraction(mol_report.mean if mol_report else None),
    }


def _recovery_payload(matrix, classified, bonded, truth_path):
    truth = synth.load_truth_csv(truth_path)
    tickers = matrix.tickers
    truth_atoms = [truth[t][0] for t in tickers]
    truth_mols = [truth[t][1] for t in tickers]

    stock_atom = {}
    for atom in classified:
        for m in atom.members:
            stock_atom[m] = atom.id
    found_atoms = [stock_atom.get(i, -(i + 1)) for i in range(len(tickers))]

    stock_mol = {}
    for mol in bonded:
        for atom in classified:
            if atom.id in mol.atom_ids:
                for m in atom.members:
                    stock_mol[m] = mol.id
    found_mols = [stock_mol.get(i, -(i + 1)) for i in range(len(tickers))]

    return {
        "atom_ari": round(synth.adjusted_rand_index(truth_atoms, found_atoms), 6),
        "molecule_ari": round(synth.adjusted_rand_index(truth_mols, found_mols), 6),
        "n_atoms_found": len(classified),
        "n_molecules_found": len(bonded),
    }


def _manifest(args, extra):
    keys = (
        "prices",
        "sectors",
        "comatrix",
        "min_coverage",
        "max_atoms",
        "max_atom_size",
        "stop_level",
        "c1",
        "c2",
        "prominence",
        "linkage",
        "molecule_max_size",
        "spec",
        "rng_seed",
    )
    manifest = {"finatoms_version": __version__, "kernel": kernels.active_backend()}
    for key in keys:
        if hasattr(args, key):
            value = getattr(args, key)
            manifest[key] = str(value) if isinstance(value, Path) else value
    manifest.update(extra)
    return manifest


def cmd_ingest(args, writer: ArtifactWriter) -> None:
    panel = _load_panel(args)
    path = writer.path("panel.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,ticker,close\n")
        for series in panel.to_series():
            for d, p in zip(series.dates, series.prices):
                fh.write(f"{d.isoformat()},{series.ticker},{p}\n")
    writer.write_json(
        "panel_meta.json",
        {
            "tickers": list(panel.tickers),
            "n_dates": len(panel.dates),
            "dropped": list(panel.dropped),
        },
    )
    writer.write_json("manifest.json", _manifest(args, {"command": "ingest"}))


def cmd_comatrix(args, writer: ArtifactWriter) -> None:
    matrix = _load_comatrix(args)
    comovement.save_cmx(matrix, writer.path("comatrix.cmx"))
    comovement.export_csv(matrix, writer.path("comatrix.csv"))
    writer.write_json("manifest.json", _manifest(args, {"command": "comatrix"}))


def cmd_atoms(args, writer: ArtifactWriter) -> None:
    matrix = _load_comatrix(args)
    sectors = _sector_map(args)
    classified, levels, effective_stop = _atom_stage(matrix, args)
    records = atoms_mod.to_records(classified, matrix.tickers, sectors)
    writer.path("atoms.json").write_text(atoms_mod.records_to_json(records), "utf-8")
    summary = comovement.background_level(matrix)
    writer.write_json(
        "levels.json", _levels_payload(matrix, summary, levels, None)
    )
    for atom in classified:
        history = atoms_mod.rerun_history(matrix, atom)
        phc.export_history_csv(
            history, matrix.tickers, writer.path(f"histories/atom{atom.id:03d}.csv")
        )
    writer.write_json(
        "manifest.json",
        _manifest(args, {"command": "atoms", "effective_stop_level": effective_stop}),
    )


def cmd_molecules(args, writer: ArtifactWriter) -> None:
    _run_analysis(args, writer, command="molecules")


def cmd_supermolecule(args, writer: ArtifactWriter) -> None:
    matrix = _load_comatrix(args)
    classified, _, _ = _atom_stage(matrix, args)
    report = molecules_mod.supermolecule_boundaries(
        matrix,
        classified,
        args.seed_atom,
        max_size=args.max_size or matrix.n_stocks,
        prominence=args.prominence,
    )
    writer.write_json(
        "supermolecule.json",
        {
            "seed_atom": report.seed_atom,
            "boundaries": [
                {"size": b.size, "sharpness": b.sharpness, "kind": b.kind}
                for b in report.boundaries
            ],
            "member_stocks_at": {
                str(size): [matrix.tickers[s] for s in stocks]
                for size, stocks in sorted(report.member_stocks_at.items())
            },
            "molecular_level_mean": report.molecular_level_mean,
        },
    )
    writer.write_json("manifest.json", _manifest(args, {"command": "supermolecule"}))


def cmd_synth(args, writer: ArtifactWriter) -> None:
    spec = synth.parse_spec_config(args.spec) if args.spec else synth.default_spec()
    if args.rng_seed is not None:
        from dataclasses import replace

        spec = replace(spec, rng_seed=args.rng_seed)
    signs, truth = synth.generate_market(spec)
    matrix = comovement.comovement_matrix(signs)
    comovement.save_cmx(matrix, writer.path("comatrix.cmx"))
    synth.export_truth_csv(truth, signs.tickers, writer.path("truth.csv"))
    writer.write_json(
        "manifest.json",
        _manifest(
            args,
            {
                "command": "synth",
                "effective_rng_seed": spec.rng_seed,
                "expected_pairwise": truth.expected_pairwise,
            },
        ),
    )


def _run_analysis(args, writer: ArtifactWriter, command: str) -> None:
    matrix = _load_comatrix(args)
    sectors = _sector_map(args)
    summary = comovement.background_level(matrix)
    classified, levels, effective_stop = _atom_stage(matrix, args)

    if command == "analyze":
        comovement.save_cmx(matrix, writer.path("comatrix.cmx"))

    records = atoms_mod.to_records(classified, matrix.tickers, sectors)
    writer.path("atoms.json").write_text(atoms_mod.records_to_json(records), "utf-8")

    fragments, bonded, c1, c2 = ([], [], None, None)
    mol_report = None
    if classified:
        fragments, bonded, c1, c2 = _molecule_stage(matrix, classified, levels, args)
        if bonded and any(a.strength == "strong" for a in classified):
            mol_report = molecules_mod.molecular_level(matrix, bonded, classified)
        for atom in classified:
            history = atoms_mod.rerun_history(matrix, atom)
            phc.export_history_csv(
                history,
                matrix.tickers,
                writer.path(f"histories/atom{atom.id:03d}.csv"),
            )

    writer.write_json(
        "molecules.json",
        [
            molecules_mod.molecule_to_json(m, classified, matrix.tickers, sectors)
            for m in bonded
        ],
    )
    for mol in bonded:
        writer.path(f"molecule{mol.id:03d}.dot").write_text(
            molecules_mod.molecule_to_dot(mol, classified, matrix.tickers), "utf-8"
        )
    writer.write_json(
        "levels.json", _levels_payload(matrix, summary, levels, mol_report)
    )

    truth_path = args.truth
    if truth_path is None and getattr(args, "comatrix", None):
        candidate = Path(args.comatrix).parent / "truth.csv"
        if candidate.exists():
            truth_path = candidate
    if truth_path:
        writer.write_json(
            "recovery.json",
            _recovery_payload(matrix, classified, bonded, truth_path),
        )

    writer.write_json(
        "manifest.json",
        _manifest(
            args,
            {
                "command": command,
                "effective_stop_level": effective_stop,
                "effective_c1": c1,
                "effective_c2": c2,
            },
        ),
    )


def cmd_analyze(args, writer: ArtifactWriter) -> None:
    _run_analysis(args, writer, command="analyze")


def _add_input_flags(p, comatrix=True):
    p.add_argument("--prices", help="price CSV (date,ticker,close)")
    p.add_argument("--sectors", help="sector CSV (ticker,name,sector[,remarks])")
    if comatrix:
        p.add_argument("--comatrix", help="precomputed .cmx file (skips ingest)")
    p.add_argument("--min-coverage", type=float, default=ingest.DEFAULT_MIN_COVERAGE)


def _add_atom_flags(p):
    p.add_argument("--max-atoms", type=int, default=None)
    p.add_argument("--max-atom-size", type=int, default=atoms_mod.DEFAULT_MAX_ATOM_SIZE)
    p.add_argument("--stop-level", type=int, default=None)


def _add_molecule_flags(p):
    p.add_argument("--c1", type=int, default=None, help="upper bond level override")
    p.add_argument("--c2", type=int, default=None, help="lower bond level override")
    p.add_argument("--prominence", type=float, default=DEFAULT_PROMINENCE)
    p.add_argument("--molecule-max-size", type=int, default=None)
    p.add_argument("--linkage", choices=phc.LINKAGES, default="complete")
    p.add_argument("--truth", default=None, help="truth CSV for recovery scoring")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finatoms",
        description="Co-movement clustering of daily price panels into "
        "atoms, molecules, and supermolecules.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="align price files onto a trading-day grid")
    _add_input_flags(p, comatrix=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("comatrix", help="compute and export the co-movement matrix")
    _add_input_flags(p)
    p.set_defaults(func=cmd_comatrix)

    p = sub.add_parser("atoms", help="extract and classify financial atoms")
    _add_input_flags(p)
    _add_atom_flags(p)
    p.set_defaults(func=cmd_atoms)

    p = sub.add_parser("molecules", help="assemble molecules and bond graphs")
    _add_input_flags(p)
    _add_atom_flags(p)
    _add_molecule_flags(p)
    p.set_defaults(func=cmd_molecules)

    p = sub.add_parser("supermolecule", help="large-size boundary report")
    _add_input_flags(p)
    _add_atom_flags(p)
    p.add_argument("--seed-atom", type=int, required=True)
    p.add_argument("--max-size", type=int, default=None)
    p.add_argument("--prominence", type=float, default=DEFAULT_PROMINENCE)
    p.set_defaults(func=cmd_supermolecule)

    p = sub.add_parser("synth", help="generate a planted synthetic market")
    p.add_argument("--spec", default=None, help="key=value spec file")
    p.add_argument("--rng-seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="full pipeline with all artifacts")
    _add_input_flags(p)
    _add_atom_flags(p)
    _add_molecule_flags(p)
    p.set_defaults(func=cmd_analyze)

    for sp in sub.choices.values():
        sp.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    writer = ArtifactWriter(Path(args.out))
    try:
        args.func(args, writer)
    except FinatomsError as exc:
        writer.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - map to the invariant exit code
        writer.cleanup()
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
