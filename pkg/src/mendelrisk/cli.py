"""Command-line interface.

Exit codes: 0 success (warnings allowed), 1 fatal pedigree check
(including loops), 2 input/output, schema or option errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import registry
from .bench import rows_to_csv, sample_path, sweep
from .errors import MendelRiskError, PedigreeCheckError
from .model_db import ModelSpec, load_database, save_database, synthesize_database
from .pedigree import load_pedigree
from .pipeline import document_to_csv, run_pipeline

log = logging.getLogger("mendelrisk")

DATABASE_ENV = "MENDELRISK_DATABASE"


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in _csv_list(text)]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "t", "y"):
        return True
    if t in ("0", "false", "no", "f", "n"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _load_db(path: str | None, seed: int):
    path = path or os.environ.get(DATABASE_ENV)
    if path:
        return load_database(path)
    log.warning("no database given; using a synthetic database (seed %d) for demonstration only", seed)
    return synthesize_database(len(registry.GENES), len(registry.CANCERS), seed=seed)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    ped = load_pedigree(args.pedigree)
    full = _load_db(args.database, args.seed)
    cancers = [full.cancers[full.cancer_index(c)] for c in args.cancers]
    spec = ModelSpec(
        cancers=cancers,
        genes=args.genes,
        max_mut=args.max_mut,
        net_future_risk=args.net,
        age_by=args.age_by,
        impute_iterations=args.iterations,
        parallel=args.parallel,
        seed=args.seed,
    )
    try:
        doc = run_pipeline(ped, full, spec, conditional=not args.unconditional)
    except PedigreeCheckError as exc:
        print(json.dumps({"check_report": exc.report.to_dict()}, indent=2), file=sys.stderr)
        log.error("%s", exc)
        return 1
    text = json.dumps(doc, indent=2) + "\n" if args.format == "json" else document_to_csv(doc)
    _write(text, args.out)
    return 0


def cmd_bench(args) -> int:
    ped = load_pedigree(args.pedigree) if args.pedigree else None
    rows = sweep(
        genes=args.genes_sweep,
        paring=args.paring_sweep,
        members=args.members_sweep,
        repeats=args.repeats,
        iterations=args.iterations,
        pedigree=ped,
        fixed_K=args.fixed_genes,
        fixed_T=args.fixed_paring,
        seed=args.seed,
    )
    _write(rows_to_csv(rows), args.out)
    return 0


def cmd_synth_db(args) -> int:
    genes = args.genes if args.genes else len(registry.GENES)
    cancers = args.cancers if args.cancers else len(registry.CANCERS)
    db = synthesize_database(genes, cancers, args.profile, args.seed, other_death=args.other_death)
    save_database(db, args.out)
    return 0


def cmd_sample(args) -> int:
    text = sample_path(args.name).read_text()
    _write(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mendelrisk", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="carrier probabilities and future risks for the probands")
    run.add_argument("pedigree", help="pedigree file (.csv or .json)")
    run.add_argument("database", nargs="?", default=None,
                     help=f"database JSON (default: ${DATABASE_ENV}, else a synthetic database)")
    run.add_argument("--cancers", type=_csv_list, default=["BC", "OC"])
    run.add_argument("--genes", type=_csv_list, default=["BRCA1", "BRCA2", "ATM", "MSH2"])
    run.add_argument("--max-mut", type=int, default=None, help="paring parameter (default 2)")
    run.add_argument("--iterations", type=int, default=20)
    run.add_argument("--net", type=_bool, nargs="?", const=True, default=False)
    run.add_argument("--unconditional", action="store_true",
                     help="report risks without conditioning on being event-free at the current age")
    run.add_argument("--age-by", type=int, default=5)
    run.add_argument("--parallel", type=_bool, nargs="?", const=True, default=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.add_argument("--out", default=None)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="timing sweeps, CSV output")
    bench.add_argument("--genes-sweep", type=_int_list, default=[2, 6, 10, 14, 18, 22])
    bench.add_argument("--paring-sweep", type=_int_list, default=[2])
    bench.add_argument("--members-sweep", type=_int_list, default=[])
    bench.add_argument("--fixed-genes", type=int, default=6)
    bench.add_argument("--fixed-paring", type=int, default=2)
    bench.add_argument("--repeats", type=int, default=10)
    bench.add_argument("--iterations", type=int, default=10)
    bench.add_argument("--pedigree", default=None, help="pedigree for the gene sweep (default: bundled sample)")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", default=None)
    bench.set_defaults(func=cmd_bench)

    synth = sub.add_parser("synth-db", help="write a synthetic database JSON")
    synth.add_argument("out")
    synth.add_argument("--genes", type=_csv_list, default=None)
    synth.add_argument("--cancers", type=_csv_list, default=None)
    synth.add_argument("--profile", choices=("constant-hazard", "ramp", "peaked"), default="peaked")
    synth.add_argument("--other-death", type=float, default=1.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth_db)

    sample = sub.add_parser("sample", help="print a bundled sample pedigree")
    sample.add_argument("name", choices=("small_fam", "fam10"))
    sample.add_argument("--out", default=None)
    sample.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (MendelRiskError, OSError, ValueError, KeyError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
