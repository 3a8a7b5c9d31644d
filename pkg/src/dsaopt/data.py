"""Ingestion of the four small UCI feature datasets: parsing, encoding,
deterministic splitting and batching.

Loaders operate offline on files in a local data directory.  `fetch_dataset`
downloads the canonical files from the UCI archive and records their
checksums in ``checksums.lock``; where the archive is unreachable,
`bootstrap_sklearn` materializes IRIS and WINE from scikit-learn's bundled
copies (same values, normalized formatting).
"""

from __future__ import annotations

import hashlib
import json
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Rng


class DataError(ValueError):
    """Dataset file missing, malformed, or inconsistent with its plan."""


@dataclass(frozen=True)
class ColumnRule:
    """How one raw column becomes numbers.

    kind 'numeric': parsed as float, width 1.
    kind 'onehot': indicator per category; categories inferred from the file
        when None.  Columns with a single category carry no information and
        get width 0.
    kind 'ordinal': index within the pinned category order, scaled to [0,1].
    """

    kind: str
    categories: tuple[str, ...] | None = None


@dataclass(frozen=True)
class EncodingPlan:
    columns: tuple[ColumnRule, ...]
    label_col: int
    label_classes: tuple[str, ...] | None = None


@dataclass
class LoadedData:
    x: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    column_categories: list[tuple[str, ...] | None]  # as actually used
    column_widths: list[int]

    @property
    def feature_dim(self) -> int:
        return self.x.shape[1]


@dataclass
class DatasetSplit:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    class_names: tuple[str, ...]

    @property
    def feature_dim(self) -> int:
        return self.train_x.shape[1]

    @property
    def class_count(self) -> int:
        return len(self.class_names)


def _read_rows(path: Path) -> list[list[str]]:
    if not path.exists():
        raise DataError(f"missing dataset file: {path}")
    rows = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if line:
            rows.append([f.strip() for f in line.split(",")])
    if not rows:
        raise DataError(f"empty dataset file: {path}")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"ragged rows in {path}: widths {sorted(widths)}")
    return rows


def load_csv(path, plan: EncodingPlan) -> LoadedData:
    """Parse a header-less comma-separated file and encode it per the plan.

    Row order is preserved.  Unseen categories (against pinned category
    lists) and unparsable numerics are errors, not silent NaNs.
    """
    path = Path(path)
    rows = _read_rows(path)
    n_cols = len(rows[0])
    expected = len(plan.columns) + 1
    if n_cols != expected:
        raise DataError(f"{path}: {n_cols} columns, plan expects {expected}")

    raw_cols: list[list[str]] = [[] for _ in range(n_cols)]
    for r in rows:
        for j, v in enumerate(r):
            raw_cols[j].append(v)

    label_raw = raw_cols[plan.label_col]
    feature_raw = [c for j, c in enumerate(raw_cols) if j != plan.label_col]

    if plan.label_classes is not None:
        class_names = plan.label_classes
    else:
        class_names = tuple(sorted(set(label_raw)))
    class_index = {c: i for i, c in enumerate(class_names)}
    try:
        labels = np.array([class_index[v] for v in label_raw], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"{path}: unseen label {exc.args[0]!r}") from None

    blocks: list[np.ndarray] = []
    used_categories: list[tuple[str, ...] | None] = []
    widths: list[int] = []
    for rule, col in zip(plan.columns, feature_raw):
        if rule.kind == "numeric":
            try:
                blocks.append(np.array([float(v) for v in col])[:, None])
            except ValueError:
                bad = next(v for v in col if not _is_float(v))
                raise DataError(f"{path}: unparsable numeric value {bad!r}") from None
            used_categories.append(None)
            widths.append(1)
        elif rule.kind == "onehot":
            cats = rule.categories or tuple(sorted(set(col)))
            cat_index = {c: i for i, c in enumerate(cats)}
            idx = np.empty(len(col), dtype=np.int64)
            for i, v in enumerate(col):
                if v not in cat_index:
                    raise DataError(f"{path}: unseen category {v!r}")
                idx[i] = cat_index[v]
            used_categories.append(cats)
            if len(cats) < 2:
                widths.append(0)  # constant column: no information
                continue
            block = np.zeros((len(col), len(cats)))
            block[np.arange(len(col)), idx] = 1.0
            blocks.append(block)
            widths.append(len(cats))
        elif rule.kind == "ordinal":
            if rule.categories is None:
                raise DataError("ordinal rule requires a pinned category order")
            cats = rule.categories
            denom = max(len(cats) - 1, 1)
            cat_index = {c: i / denom for i, c in enumerate(cats)}
            try:
                blocks.append(np.array([cat_index[v] for v in col])[:, None])
            except KeyError as exc:
                raise DataError(f"{path}: unseen category {exc.args[0]!r}") from None
            used_categories.append(cats)
            widths.append(1)
        else:
            raise DataError(f"unknown column rule kind {rule.kind!r}")

    x = np.hstack(blocks) if blocks else np.zeros((len(rows), 0))
    return LoadedData(x=x, labels=labels, class_names=class_names,
                      column_categories=used_categories, column_widths=widths)


def _is_float(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


def decode_categories(data: LoadedData, plan: EncodingPlan, row: int) -> dict[int, str]:
    """Recover the raw category of every categorical column of one encoded row."""
    out: dict[int, str] = {}
    offset = 0
    for j, (rule, cats, width) in enumerate(
            zip(plan.columns, data.column_categories, data.column_widths)):
        if rule.kind == "onehot":
            if width == 0:
                out[j] = cats[0]
            else:
                block = data.x[row, offset:offset + width]
                out[j] = cats[int(np.argmax(block))]
        elif rule.kind == "ordinal":
            denom = max(len(cats) - 1, 1)
            out[j] = cats[int(round(data.x[row, offset] * denom))]
        offset += width
    return out


def split(data: LoadedData, rng: Rng, train_fraction: float = 0.8,
          train_count: int | None = None) -> DatasetSplit:
    """Seeded shuffle then split; (seed, fraction) fully determine membership."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0,1), got {train_fraction}")
    n = data.x.shape[0]
    n_train = train_count if train_count is not None else int(round(train_fraction * n))
    if n_train < len(data.class_names):
        raise DataError(f"split: {n_train} training rows for {len(data.class_names)} classes")
    if n_train >= n:
        raise DataError(f"split: no test rows left ({n_train} of {n})")
    perm = rng.permutation(n)
    tr, te = perm[:n_train], perm[n_train:]
    return DatasetSplit(train_x=data.x[tr], train_y=data.labels[tr],
                        test_x=data.x[te], test_y=data.labels[te],
                        class_names=data.class_names)


def epoch_batches(split_: DatasetSplit, batch_size: int | None, rng: Rng,
                  shuffle: bool = True):
    """Yield one epoch of (features, labels) batches covering every training
    row exactly once; the last batch may be short.  None means full batch."""
    n = split_.train_x.shape[0]
    if batch_size is None:
        yield split_.train_x, split_.train_y
        return
    if batch_size == 0:
        raise DataError("epoch_batches: zero batch size")
    if batch_size > n:
        raise DataError(f"epoch_batches: batch size {batch_size} exceeds {n} training rows")
    order = rng.permutation(n) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield split_.train_x[idx], split_.train_y[idx]


# --- dataset registry -------------------------------------------------------

UCI_BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"

CAR_ORDERS = (
    ("vhigh", "high", "med", "low"),      # buying
    ("vhigh", "high", "med", "low"),      # maint
    ("2", "3", "4", "5more"),             # doors
    ("2", "4", "more"),                   # persons
    ("small", "med", "big"),              # lug_boot
    ("low", "med", "high"),               # safety
)


@dataclass(frozen=True)
class DatasetInfo:
    id: str
    filename: str
    url: str
    plan: EncodingPlan
    n_rows: int
    feature_dim: int  # encoded width
    class_count: int


DATASETS: dict[str, DatasetInfo] = {
    "iris": DatasetInfo(
        id="iris", filename="iris.data", url=f"{UCI_BASE}/iris/iris.data",
        plan=EncodingPlan(
            columns=tuple(ColumnRule("numeric") for _ in range(4)),
            label_col=4,
            label_classes=("Iris-setosa", "Iris-versicolor", "Iris-virginica")),
        n_rows=150, feature_dim=4, class_count=3),
    "wine": DatasetInfo(
        id="wine", filename="wine.data", url=f"{UCI_BASE}/wine/wine.data",
        plan=EncodingPlan(
            columns=tuple(ColumnRule("numeric") for _ in range(13)),
            label_col=0, label_classes=("1", "2", "3")),
        n_rows=178, feature_dim=13, class_count=3),
    "car": DatasetInfo(
        id="car", filename="car.data", url=f"{UCI_BASE}/car/car.data",
        plan=EncodingPlan(
            columns=tuple(ColumnRule("ordinal", cats) for cats in CAR_ORDERS),
            label_col=6, label_classes=("unacc", "acc", "good", "vgood")),
        n_rows=1728, feature_dim=6, class_count=4),
    "agaricus": DatasetInfo(
        id="agaricus", filename="agaricus-lepiota.data",
        url=f"{UCI_BASE}/mushroom/agaricus-lepiota.data",
        plan=EncodingPlan(
            # 22 categorical attributes; '?' (missing stalk-root) is treated
            # as its own category, and the constant veil-type column drops
            # out, which is what yields the 116-wide encoding.
            columns=tuple(ColumnRule("onehot") for _ in range(22)),
            label_col=0, label_classes=("e", "p")),
        n_rows=8124, feature_dim=116, class_count=2),
}

# Checksums of files this repo can materialize deterministically (the
# scikit-learn bootstrap outputs).  Files fetched from the archive get their
# hashes recorded in checksums.lock instead.
KNOWN_SHA256: dict[str, str] = {
    "iris": "36f668d1cbc29a8c2c1128c5d2f0d400fa04ed4dc62d12246f44ce9360360cc0",
    "wine": "faeff6d849f225d38d97738e50c3d9d60c3691b45d1679b4f01751160e247357",
}


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _lock_path(data_dir: Path) -> Path:
    return Path(data_dir) / "checksums.lock"


def _read_lock(data_dir: Path) -> dict[str, str]:
    p = _lock_path(data_dir)
    if not p.exists():
        return {}
    return json.loads(p.read_text())


def _write_lock(data_dir: Path, entries: dict[str, str]) -> None:
    _lock_path(data_dir).write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n")


def validate_structure(info: DatasetInfo, data: LoadedData) -> None:
    if data.x.shape[0] != info.n_rows:
        raise DataError(f"{info.id}: {data.x.shape[0]} rows, expected {info.n_rows}")
    if data.feature_dim != info.feature_dim:
        raise DataError(
            f"{info.id}: encoded width {data.feature_dim}, expected {info.feature_dim}")
    if len(data.class_names) != info.class_count:
        raise DataError(
            f"{info.id}: {len(data.class_names)} classes, expected {info.class_count}")


def load_dataset(dataset_id: str, data_dir) -> LoadedData:
    """Load and encode a registered dataset from the local data directory."""
    if dataset_id not in DATASETS:
        raise DataError(f"unknown dataset '{dataset_id}'")
    info = DATASETS[dataset_id]
    data_dir = Path(data_dir)
    path = data_dir / info.filename
    lock = _read_lock(data_dir)
    if path.exists():
        digest = sha256_file(path)
        expected = lock.get(info.filename) or KNOWN_SHA256.get(dataset_id)
        if expected is not None and digest != expected:
            raise DataError(f"{info.filename}: checksum mismatch (got {digest[:12]}...)")
    data = load_csv(path, info.plan)
    validate_structure(info, data)
    return data


def load_split(dataset_id: str, data_dir, seed: int,
               train_fraction: float = 0.8) -> DatasetSplit:
    data = load_dataset(dataset_id, data_dir)
    return split(data, Rng(seed).split(), train_fraction)


def dataset_available(dataset_id: str, data_dir) -> bool:
    info = DATASETS.get(dataset_id)
    return info is not None and (Path(data_dir) / info.filename).exists()


def fetch_dataset(dataset_id: str, data_dir, timeout: float = 60.0) -> Path:
    """Download one dataset from the UCI archive, validate it against its
    plan, and record its checksum in checksums.lock."""
    if dataset_id not in DATASETS:
        raise DataError(f"unknown dataset '{dataset_id}'")
    info = DATASETS[dataset_id]
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    path = data_dir / info.filename
    with urllib.request.urlopen(info.url, timeout=timeout) as resp:
        payload = resp.read()
    tmp = path.with_suffix(path.suffix + ".part")
    tmp.write_bytes(payload)
    try:
        validate_structure(info, load_csv(tmp, info.plan))
    except DataError:
        tmp.unlink(missing_ok=True)
        raise
    tmp.replace(path)
    lock = _read_lock(data_dir)
    lock[info.filename] = sha256_file(path)
    _write_lock(data_dir, lock)
    return path


def bootstrap_sklearn(data_dir) -> list[Path]:
    """Write iris.data and wine.data from scikit-learn's bundled copies.

    The values are the UCI datasets; only the text formatting is normalized.
    Requires scikit-learn (an optional dependency)."""
    from sklearn.datasets import load_iris, load_wine

    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    written = []

    iris = load_iris()
    iris_names = {"setosa": "Iris-setosa", "versicolor": "Iris-versicolor",
                  "virginica": "Iris-virginica"}
    lines = []
    for row, target in zip(iris.data, iris.target):
        feats = ",".join(f"{v:.1f}" for v in row)
        lines.append(f"{feats},{iris_names[iris.target_names[target]]}")
    path = data_dir / "iris.data"
    path.write_text("\n".join(lines) + "\n")
    written.append(path)

    wine = load_wine()
    lines = []
    for row, target in zip(wine.data, wine.target):
        feats = ",".join(f"{v:g}" for v in row)
        lines.append(f"{target + 1},{feats}")
    path = data_dir / "wine.data"
    path.write_text("\n".join(lines) + "\n")
    written.append(path)

    lock = _read_lock(data_dir)
    for p in written:
        lock[p.name] = sha256_file(p)
    _write_lock(data_dir, lock)
    return written
