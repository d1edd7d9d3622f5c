"""Text-table IO: expression TSV, label CSV, split CSV."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError
from .survival import SurvivalRecord


@dataclass
class ExpressionTable:
    """Genes as rows, samples as columns."""

    gene_names: list
    sample_ids: list
    values: np.ndarray  # n_genes x n_samples

    def column(self, sample_id: str) -> np.ndarray:
        try:
            j = self.sample_ids.index(sample_id)
        except ValueError:
            raise DataError(f"sample {sample_id!r} not in expression table") from None
        return self.values[:, j].copy()


def load_expression(path) -> ExpressionTable:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header:
            raise ParseError(f"{path}: empty file")
        cols = header.split("\t")
        if cols[0] != "gene_id" or len(cols) < 2:
            raise ParseError(
                f"{path}: header must start with 'gene_id' and name >= 1 sample"
            )
        sample_ids = cols[1:]
        if len(set(sample_ids)) != len(sample_ids):
            dupes = sorted({s for s in sample_ids if sample_ids.count(s) > 1})
            raise DataError(
                f"{path}: duplicate sample ids in header: {', '.join(dupes)}"
            )
        gene_names = []
        seen = set()
        rows = []
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != len(cols):
                raise ParseError(
                    f"{path}: line {lineno}: expected {len(cols)} fields, "
                    f"got {len(fields)}"
                )
            if fields[0] in seen:
                raise DataError(f"{path}: line {lineno}: duplicate gene {fields[0]!r}")
            seen.add(fields[0])
            gene_names.append(fields[0])
            try:
                rows.append([float(v) for v in fields[1:]])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
    if not gene_names:
        raise DataError(f"{path}: no gene rows")
    return ExpressionTable(gene_names, sample_ids, np.array(rows, dtype=np.float64))


def write_expression(path, table: ExpressionTable) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("gene_id\t" + "\t".join(table.sample_ids) + "\n")
        for name, row in zip(table.gene_names, table.values):
            fh.write(name + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")


@dataclass
class CaseLabel:
    case_id: str
    slide_id: str
    time_months: float
    censorship: int

    def to_record(self) -> SurvivalRecord:
        return SurvivalRecord(self.case_id, self.time_months, self.censorship)


LABEL_HEADER = ["case_id", "slide_id", "time_months", "censorship"]


def load_labels(path) -> list:
    labels = []
    seen = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header != LABEL_HEADER:
            raise ParseError(
                f"{path}: header must be {','.join(LABEL_HEADER)}, "
                f"got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"{path}: line {lineno}: expected 4 fields")
            case_id, slide_id, time_s, cens_s = row
            if case_id in seen:
                raise DataError(f"{path}: line {lineno}: duplicate case {case_id!r}")
            seen.add(case_id)
            try:
                time_months = float(time_s)
                censorship = int(cens_s)
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if censorship not in (0, 1):
                raise DataError(
                    f"{path}: line {lineno}: censorship must be 0 or 1"
                )
            if time_months < 0:
                raise DataError(f"{path}: line {lineno}: negative time")
            labels.append(CaseLabel(case_id, slide_id, time_months, censorship))
    return labels


def write_labels(path, labels) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LABEL_HEADER)
        for lab in labels:
            writer.writerow(
                [lab.case_id, lab.slide_id, repr(float(lab.time_months)),
                 lab.censorship]
            )


SPLIT_HEADER = ["case_id", "fold", "role"]
SPLIT_ROLES = ("train", "val")


def load_splits(path) -> dict:
    """Returns {fold: {"train": [...], "val": [...]}} preserving file order."""
    folds: dict = {}
    seen = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header != SPLIT_HEADER:
            raise ParseError(
                f"{path}: header must be {','.join(SPLIT_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: line {lineno}: expected 3 fields")
            case_id, fold_s, role = row
            try:
                fold = int(fold_s)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: fold must be an integer"
                ) from None
            if role not in SPLIT_ROLES:
                raise DataError(
                    f"{path}: line {lineno}: role must be train or val, "
                    f"got {role!r}"
                )
            key = (case_id, fold)
            if key in seen:
                raise DataError(
                    f"{path}: line {lineno}: case {case_id!r} assigned twice "
                    f"in fold {fold}"
                )
            seen.add(key)
            folds.setdefault(fold, {"train": [], "val": []})[role].append(case_id)
    return folds


def write_splits(path, folds: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SPLIT_HEADER)
        for fold in sorted(folds):
            for role in SPLIT_ROLES:
                for case_id in folds[fold][role]:
                    writer.writerow([case_id, fold, role])
