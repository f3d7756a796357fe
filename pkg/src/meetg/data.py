"""Dataset ingestion, min-max scaling, stratified folds and synthetic Twonorm."""

import configparser
import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DataParseError",
    "Dataset",
    "CsvSchema",
    "NormalizerParams",
    "FoldPlan",
    "load_csv",
    "save_csv",
    "load_schemas",
    "one_hot",
    "normalize_fit",
    "normalize_apply",
    "stratified_folds",
    "generate_twonorm",
]

SCHEMA_FORMAT_VERSION = 1
MISSING_TOKENS = {"", "?", "na", "nan", "null", "none"}


class DataParseError(ValueError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.row = row
        self.column = column


def one_hot(labels, m):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], m))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple
    name: str = "dataset"

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"features must be a nonempty 2-D array, got shape {x.shape}")
        if labels.shape != (x.shape[0],):
            raise ValueError(f"labels length {labels.shape} does not match {x.shape[0]} samples")
        names = tuple(str(c) for c in self.class_names)
        if len(names) < 2:
            raise ValueError(f"need at least 2 classes, got {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError(f"class names are not distinct: {names}")
        if labels.min() < 0 or labels.max() >= len(names):
            raise ValueError(f"labels must lie in [0, {len(names)})")
        if not np.all(np.isfinite(x)):
            raise ValueError("features contain NaN or Inf")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    @property
    def targets(self):
        """One-hot target matrix, shape (N, m)."""
        return one_hot(self.labels, self.n_classes)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)

    def subset(self, index):
        return Dataset(self.features[index], self.labels[index], self.class_names, self.name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.class_names == other.class_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class CsvSchema:
    """How to read one CSV file.

    `label_column` is a 0-based index (negative counts from the end) or a
    header name. `drop_columns` lists further columns to ignore (ids etc.).
    """

    label_column: object = -1
    header: bool = False
    delimiter: str = ","
    drop_columns: tuple = ()
    path: str | None = None
    name: str | None = None


def _resolve_column(spec, header_row, width, row_no):
    if isinstance(spec, str) and not _is_int(spec):
        if header_row is None:
            raise DataParseError(f"column {spec!r} given by name but the file has no header", row=row_no)
        try:
            return header_row.index(spec)
        except ValueError:
            raise DataParseError(f"no column named {spec!r} in header {header_row}", row=row_no) from None
    idx = int(spec)
    if not -width <= idx < width:
        raise DataParseError(f"column index {idx} out of range for {width} columns", row=row_no)
    return idx % width


def _is_int(text):
    try:
        int(text)
    except (TypeError, ValueError):
        return False
    return True


def _read_rows(text, delimiter):
    if delimiter in (" ", "whitespace"):
        return [line.split() for line in text.splitlines()]
    return list(csv.reader(io.StringIO(text), delimiter=delimiter))


def load_csv(source, schema=None, name=None):
    """Read a labelled numeric CSV into a :class:`Dataset`.

    `source` is a path or a text file object. Class indices follow the order
    of first appearance. Missing cells (empty, ``?``, ``NA``...) are rejected.
    A delimiter of ``" "`` splits on runs of whitespace.
    """
    schema = schema or CsvSchema()
    if hasattr(source, "read"):
        text = source.read()
        default_name = name or "dataset"
    else:
        source = Path(source)
        text = source.read_text(encoding="utf-8")
        default_name = name or source.stem
    rows = _read_rows(text, schema.delimiter)

    header_row = None
    first = 1
    if schema.header:
        if not rows:
            raise DataParseError("file is empty")
        header_row = [h.strip() for h in rows[0]]
        rows = rows[1:]
        first = 2
    # (file line number, cells); blank lines are skipped
    numbered = [(first + i, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not numbered:
        raise DataParseError("file has no data rows")

    width = len(numbered[0][1])
    label_idx = _resolve_column(schema.label_column, header_row, width, numbered[0][0])
    drop = {_resolve_column(c, header_row, width, numbered[0][0]) for c in schema.drop_columns}
    drop.discard(label_idx)
    feature_idx = [c for c in range(width) if c != label_idx and c not in drop]
    if not feature_idx:
        raise DataParseError("no feature columns left after removing the label column")

    features = np.empty((len(numbered), len(feature_idx)))
    labels = np.empty(len(numbered), dtype=np.int64)
    class_index = {}
    for i, (line_no, cells) in enumerate(numbered):
        if len(cells) != width:
            raise DataParseError(f"expected {width} cells, found {len(cells)}", row=line_no)
        for j, c in enumerate(feature_idx):
            cell = cells[c].strip()
            if cell.lower() in MISSING_TOKENS:
                raise DataParseError(f"missing value {cell!r}", row=line_no, column=c)
            try:
                value = float(cell)
            except ValueError:
                raise DataParseError(f"non-numeric value {cell!r}", row=line_no, column=c) from None
            if not math.isfinite(value):
                raise DataParseError(f"non-finite value {cell!r}", row=line_no, column=c)
            features[i, j] = value
        label = cells[label_idx].strip()
        if label.lower() in MISSING_TOKENS:
            raise DataParseError(f"missing label {label!r}", row=line_no, column=label_idx)
        labels[i] = class_index.setdefault(label, len(class_index))

    if len(class_index) < 2:
        raise ValueError(f"{default_name}: found a single class {list(class_index)}; need at least 2")
    return Dataset(features, labels, tuple(class_index), schema.name or default_name)


def save_csv(dataset, destination):
    """Write features then the class name as the last column, no header.

    Floats use ``repr`` so :func:`load_csv` reads back identical values.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row, label in zip(dataset.features, dataset.labels):
        writer.writerow([repr(float(v)) for v in row] + [dataset.class_names[label]])
    if hasattr(destination, "write"):
        destination.write(buf.getvalue())
    else:
        Path(destination).write_text(buf.getvalue(), encoding="utf-8")


def _parse_schema_section(name, section, base_dir):
    label = section.get("label_column", "-1").strip()
    drop = tuple(c.strip() for c in section.get("drop_columns", "").split(",") if c.strip())
    delimiter = section.get("delimiter", ",")
    if delimiter.lower() == "comma":
        delimiter = ","
    elif delimiter.lower() in ("space", "whitespace", "\\s"):
        delimiter = " "
    elif delimiter.lower() in ("tab", "\\t"):
        delimiter = "\t"
    path = section.get("path")
    if path and base_dir is not None and not Path(path).is_absolute():
        path = str(base_dir / path)
    return CsvSchema(
        label_column=int(label) if _is_int(label) else label,
        header=section.getboolean("header", fallback=False),
        delimiter=delimiter,
        drop_columns=tuple(int(c) if _is_int(c) else c for c in drop),
        path=path,
        name=name,
    )


def load_schemas(path):
    """Read an INI schema file into ``{dataset name: CsvSchema}``.

    The ``[meta]`` section must carry ``format_version = 1``. Each other
    section describes one dataset with keys ``path``, ``label_column``,
    ``header``, ``delimiter`` (``comma``, ``space``, ``tab`` or a literal)
    and optionally ``drop_columns``. Relative paths resolve against the
    schema file's directory.
    """
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    with path.open(encoding="utf-8") as f:
        parser.read_file(f)
    version = parser.get("meta", "format_version", fallback=None)
    if version is None:
        raise ValueError(f"{path}: missing [meta] format_version")
    if version.strip() != str(SCHEMA_FORMAT_VERSION):
        raise ValueError(f"{path}: unsupported schema format_version {version}")
    out = {}
    for name in parser.sections():
        if name == "meta":
            continue
        out[name] = _parse_schema_section(name, parser[name], path.parent)
    return out


@dataclass(frozen=True)
class NormalizerParams:
    minimum: np.ndarray
    maximum: np.ndarray


def normalize_fit(train_features):
    x = np.asarray(train_features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"need a nonempty 2-D feature matrix, got shape {x.shape}")
    return NormalizerParams(x.min(axis=0), x.max(axis=0))


def normalize_apply(params, features):
    """Per-column min-max map onto [0, 1]; constant columns go to 0.5.

    Values outside the fitted range are not clamped.
    """
    x = np.asarray(features, dtype=np.float64)
    span = params.maximum - params.minimum
    constant = span == 0
    out = (x - params.minimum) / np.where(constant, 1.0, span)
    out[:, constant] = 0.5
    return out


@dataclass(frozen=True, eq=False)
class FoldPlan:
    n_folds: int
    assignments: np.ndarray
    seed: int = 0

    def test_index(self, fold):
        return np.flatnonzero(self.assignments == fold)

    def train_index(self, fold):
        return np.flatnonzero(self.assignments != fold)

    def splits(self):
        """Yield ``(fold, train_index, test_index)`` for every fold in order."""
        for f in range(self.n_folds):
            yield f, self.train_index(f), self.test_index(f)


def stratified_folds(dataset, n_folds, seed=0):
    """Stratified fold assignment.

    Indices are shuffled within each class, the classes are laid end to end
    (in class-index order) and position ``p`` of that sequence goes to fold
    ``p mod n_folds``. Each class then spreads over the folds with counts
    differing by at most one, and so do the fold sizes.
    """
    if n_folds < 2:
        raise ValueError(f"n_folds must be >= 2, got {n_folds}")
    labels = dataset.labels if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.int64)
    n = labels.shape[0]
    if n_folds > n:
        raise ValueError(f"n_folds ({n_folds}) exceeds the number of samples ({n})")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        order.append(members[rng.permutation(members.shape[0])])
    order = np.concatenate(order)
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % n_folds
    return FoldPlan(n_folds, assignments, seed)


def generate_twonorm(n=7400, dim=20, seed=0):
    """Two unit-variance Gaussians with means +-(2/sqrt(dim)) in every coordinate.

    The first ``n/2`` rows are class ``"0"`` (positive mean), the rest class ``"1"``.
    """
    if n < 2 or n % 2:
        raise ValueError(f"n must be a positive even number, got {n}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rng = np.random.Generator(np.random.PCG64(seed))
    a = 2.0 / math.sqrt(dim)
    half = n // 2
    x = rng.standard_normal((n, dim))
    x[:half] += a
    x[half:] -= a
    labels = np.repeat([0, 1], half)
    return Dataset(x, labels, ("0", "1"), f"twonorm-{n}x{dim}")
