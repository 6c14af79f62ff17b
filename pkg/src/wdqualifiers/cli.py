"""``wdqual`` command line: extract, diversity, plotdata, report, project, synth, validate.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
Every command that writes files also writes a run manifest with SHA-256
digests of its inputs and outputs. Set ``WDQUAL_TMPDIR`` to stage output
files in another directory before they are moved into place.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .abstraction import TemporalError, join_rule_head, project_statement, statements_from_json
from .ingest import DumpReadError, dumps_json, extract_dump, read_tables, tables_to_documents
from .metrics import (
    coverage_of_top_k,
    frequency_distribution,
    importance_scores,
    read_scores_csv,
    write_scores_csv,
)
from .model import AdmissibilityConfig
from .synth import SynthSpec, SynthSpecError, generate_dump
from .taxonomy import (
    ClassificationError,
    category_report,
    load_classification,
    load_default_classification,
    validate_registry,
)

logger = logging.getLogger("wdqualifiers")

TMPDIR_ENV = "WDQUAL_TMPDIR"
MANIFEST_NAME = "run-manifest.json"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path: Path, data: str | bytes) -> None:
    """Write via a temp file and rename, so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    staging = os.environ.get(TMPDIR_ENV) or str(path.parent)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=staging)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode("utf-8") if isinstance(data, str) else data)
        try:
            os.replace(tmp, path)
        except OSError:
            shutil.move(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: Optional[str] = None
    started_at: str = ""
    finished_at: str = ""
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    counters: dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    def add_input(self, path: Path) -> None:
        if path.is_file():
            self.inputs[str(path)] = _sha256(path)

    def write_output(self, path: Path, data: str | bytes) -> None:
        atomic_write(path, data)
        self.outputs[path.name] = _sha256(path)

    def finish(self, manifest_path: Optional[Path]) -> None:
        self.finished_at = _now()
        if manifest_path is not None:
            atomic_write(manifest_path, json.dumps(asdict(self), indent=1, sort_keys=True) + "\n")


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise DataError(f"{what} not found: {path}")
    return path


def _load_registry(path: Optional[Path], manifest: RunManifest):
    if path is None:
        return load_default_classification()
    _require_file(path, "classification CSV")
    manifest.add_input(path)
    with open(path, encoding="utf-8", newline="") as fh:
        try:
            return load_classification(fh)
        except ClassificationError as exc:
            raise DataError(f"{path}: {exc}") from None


def _load_scores(path: Path, manifest: RunManifest):
    _require_file(path, "scores CSV")
    manifest.add_input(path)
    with open(path, encoding="utf-8", newline="") as fh:
        try:
            return read_scores_csv(fh)
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None


def _load_tables(directory: Path, manifest: RunManifest):
    if not directory.is_dir():
        raise DataError(f"tables directory not found: {directory}")
    for name in sorted(os.listdir(directory)):
        if name.endswith(".json") and name != MANIFEST_NAME:
            manifest.add_input(directory / name)
    try:
        tables = read_tables(directory)
    except FileNotFoundError as exc:
        raise DataError(f"missing table file: {exc.filename}") from None
    except (json.JSONDecodeError, AttributeError, TypeError) as exc:
        raise DataError(f"{directory}: malformed table file: {exc}") from None
    problems = tables.check_consistency()
    if problems:
        raise DataError(f"{directory}: inconsistent tables: {'; '.join(problems[:5])}")
    return tables


def _check_k(k: int, n: int) -> None:
    if k < 0:
        raise UsageError("--top must be non-negative")
    if k > n:
        raise DataError(f"--top {k} exceeds the {n} scored qualifiers")


# --- commands --------------------------------------------------------------------

def cmd_extract(args: argparse.Namespace, m: RunManifest) -> None:
    dump = _require_file(Path(args.dump), "dump")
    cfg = AdmissibilityConfig.load(args.config) if args.config else AdmissibilityConfig.default()
    m.config = args.config
    m.add_input(dump)
    prop_src = Path(args.properties) if args.properties else None
    if prop_src is not None:
        m.add_input(_require_file(prop_src, "property file"))
    res = extract_dump(
        dump, cfg, shards=args.shards, property_source=prop_src,
        compression=args.compression, batch_lines=args.batch_lines,
    )
    out = Path(args.out)
    for name, text in tables_to_documents(res.tables, res.catalog, res.stats).items():
        m.write_output(out / name, text)
    m.counters.update(
        entities=res.stats.entities,
        skipped_lines=res.stats.skipped_lines,
        statements=res.tables.total_statements,
        qualified_statements=res.tables.qualified_statements,
        qualifications=res.tables.total_qualifications,
        admissible_qualifiers=len(res.tables.q_freq),
        shards=args.shards,
    )


def cmd_diversity(args: argparse.Namespace, m: RunManifest) -> None:
    tables = _load_tables(Path(args.tables), m)
    scores = importance_scores(tables, args.diversity)
    k = len(scores) if args.top is None else args.top
    _check_k(k, len(scores))
    buf = io.StringIO()
    write_scores_csv(scores[:k], buf)
    m.write_output(Path(args.out), buf.getvalue())
    m.counters.update(qualifiers=len(scores), top=k, coverage=coverage_of_top_k(tables, scores, k))


def cmd_plotdata(args: argparse.Namespace, m: RunManifest) -> None:
    tables = _load_tables(Path(args.tables), m)
    scores = _load_scores(Path(args.scores), m)
    out = Path(args.out)
    summary = frequency_distribution(tables, args.thresholds)

    def table(header: Sequence[str], rows) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()

    m.write_output(out / "rank-frequency.csv", table(("rank", "frequency"), ((r, f) for r, _, f in summary.series)))
    ranked = sorted(scores, key=lambda s: s.rank)
    m.write_output(out / "freq-diversity.csv", table(
        ("qualifier_id", "frequency", "diversity_proportional"),
        ((s.qualifier, s.frequency, f"{s.diversity_proportional:.6f}") for s in ranked),
    ))
    m.write_output(out / "freq-property-count.csv", table(
        ("qualifier_id", "frequency", "property_count"),
        ((s.qualifier, s.frequency, s.property_count) for s in ranked),
    ))
    m.write_output(out / "frequency-summary.json", dumps_json({
        "qualifiers": summary.qualifiers,
        "thresholds": [asdict(b) for b in summary.buckets],
    }))


def cmd_report(args: argparse.Namespace, m: RunManifest) -> None:
    scores = _load_scores(Path(args.scores), m)
    reg = _load_registry(Path(args.classes) if args.classes else None, m)
    _check_k(args.top, len(scores))
    report = category_report(reg, scores, args.top)
    out = Path(args.out)
    m.write_output(out / "category-report.json", report.to_json())
    m.write_output(out / "category-report.csv", report.to_csv())
    m.counters.update(top=args.top, unassigned=len(report.unassigned))


def cmd_project(args: argparse.Namespace, m: RunManifest) -> Optional[str]:
    path = _require_file(Path(args.statement), "statement JSON")
    m.add_input(path)
    reg = _load_registry(Path(args.classes) if args.classes else None, m)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        stmts = statements_from_json(doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise DataError(f"{path}: not a statement: {exc}") from None
    projected = [project_statement(s, reg) for s in stmts]
    if len(projected) == 1:
        result: Any = projected[0].to_json()
    elif len(projected) == 2:
        result = {
            "statements": [p.to_json() for p in projected],
            "rule": join_rule_head(projected[0], projected[1]).to_json(),
        }
    else:
        raise DataError(f"{path}: expected one or two statements, got {len(projected)}")
    return json.dumps(result, indent=1, ensure_ascii=False) + "\n"


def cmd_synth(args: argparse.Namespace, m: RunManifest) -> None:
    spec_path = _require_file(Path(args.spec), "synth spec")
    m.add_input(spec_path)
    try:
        spec = SynthSpec.from_dict(json.loads(spec_path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise DataError(f"{spec_path}: {exc}") from None
    out = Path(args.out)
    cfg = AdmissibilityConfig.load(args.config) if args.config else AdmissibilityConfig.default()
    data, truth = generate_dump(spec, cfg, compress=out.suffix == ".gz")
    m.write_output(out, data)
    if args.truth:
        for name, text in tables_to_documents(truth).items():
            m.write_output(Path(args.truth) / name, text)
    m.counters.update(entities=spec.entities, statements=truth.total_statements)


def cmd_validate(args: argparse.Namespace, m: RunManifest) -> Optional[str]:
    scores = _load_scores(Path(args.scores), m)
    reg = _load_registry(Path(args.classes) if args.classes else None, m)
    _check_k(args.top, len(scores))
    violations = validate_registry(reg, scores, args.top)
    m.counters["violations"] = len(violations)
    text = "".join(f"{v}\n" for v in violations)
    if violations:
        sys.stdout.write(text)
        raise DataError(f"{len(violations)} registry violation(s)")
    return text


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wdqual", description="Wikidata qualifier frequency, diversity and taxonomy tools")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("extract", help="count statements and qualifiers in a dump")
    s.add_argument("dump")
    s.add_argument("--config", help="admissibility config JSON (default: bundled)")
    s.add_argument("--out", required=True)
    s.add_argument("--shards", type=int, default=1)
    s.add_argument("--properties", help="property-only dump for pass 1")
    s.add_argument("--compression", choices=("auto", "none", "gzip", "bzip2"), default="auto")
    s.add_argument("--batch-lines", type=int, default=20_000)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("diversity", help="score and rank qualifiers")
    s.add_argument("--tables", required=True)
    s.add_argument("--out", default="q-diversity-score.csv")
    s.add_argument("--top", type=int)
    s.add_argument("--diversity", choices=("proportional", "raw"), default="proportional")
    s.set_defaults(func=cmd_diversity)

    s = sub.add_parser("plotdata", help="write plot-ready CSVs")
    s.add_argument("--tables", required=True)
    s.add_argument("--scores", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--thresholds", type=int, nargs="+", default=[100, 1_000_000])
    s.set_defaults(func=cmd_plotdata)

    s = sub.add_parser("report", help="per-category counts, frequency sums and average diversity")
    s.add_argument("--scores", required=True)
    s.add_argument("--classes")
    s.add_argument("--top", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("project", help="category values of one statement, or the rule head of two")
    s.add_argument("--statement", required=True)
    s.add_argument("--classes")
    s.add_argument("--out")
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("synth", help="generate a synthetic dump")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--truth", help="also write ground-truth tables to this directory")
    s.add_argument("--config")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("validate", help="check the classification against the top-K scores")
    s.add_argument("--scores", required=True)
    s.add_argument("--classes")
    s.add_argument("--top", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_validate)
    return p


def _manifest_path(args: argparse.Namespace) -> Optional[Path]:
    if args.command in ("extract", "plotdata", "report"):
        return Path(args.out) / MANIFEST_NAME
    out = getattr(args, "out", None)
    if out:
        if args.command == "synth":
            return Path(out).with_name(Path(out).name + ".manifest.json")
        return Path(str(out) + ".manifest.json")
    return None


def run(argv: Sequence[str]) -> int:
    try:
        args = build_parser().parse_args(list(argv))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    manifest = RunManifest(command=args.command, argv=list(argv), started_at=_now())
    try:
        text = args.func(args, manifest)
        if text is not None:
            if getattr(args, "out", None):
                manifest.write_output(Path(args.out), text)
            else:
                sys.stdout.write(text)
        manifest.finish(_manifest_path(args))
    except UsageError as exc:
        print(f"wdqual {args.command}: {exc}", file=sys.stderr)
        return 1
    except (DataError, DumpReadError, SynthSpecError, TemporalError) as exc:
        print(f"wdqual {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"wdqual {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
