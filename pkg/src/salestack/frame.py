"""Typed column-oriented tables of property sales.

A :class:`Frame` holds one numpy vector per column plus a missing-value mask.
Numeric columns are float64, categorical columns int64 codes and date columns
int64 month keys (``12 * year + month - 1``). Frames are read-only: every
transformation returns a new frame.
"""
import csv
import io
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

REAL = "numeric-real"
CATEGORICAL = "categorical-integer"
MONTH = "date-month"
KINDS = (REAL, CATEGORICAL, MONTH)

TARGET = "price_high_low"
ID_COLUMN = "parid"
CATEGORICAL_FEATURES = ("nbhd", "zip21", "hx_flag", "luc", "mararea")
SOCIO_COLUMNS = ("gdp", "cpi", "ppi", "hpi", "effr")
DERIVED_FEATURES = ("sale_year", "sale_month", "age")

# Table-1 columns that are model inputs. parid, aprtot and sale_date are not:
# the first is an identifier, the second defines the target, the third enters
# through the derived calendar features.
RAW_MARKET_FEATURES = (
    "aprland", "aprblgd", "nbhd", "rmbed", "sfla", "total_area", "yrblt",
    "misc_area", "zip21", "sasd", "nsasd", "stxbl", "nstxbl", "cotxbl",
    "citxbl", "hx_flag", "luc", "mararea",
)
MARKET_FEATURES = RAW_MARKET_FEATURES + DERIVED_FEATURES
STAGE2_FEATURES = MARKET_FEATURES + SOCIO_COLUMNS


class SchemaError(ValueError):
    """Input does not match the declared schema."""


def month_key(year, month):
    return 12 * int(year) + int(month) - 1


def month_str(key):
    key = int(key)
    return f"{key // 12:04d}-{key % 12 + 1:02d}"


def parse_month(text):
    """Parse ``YYYY-MM`` or ``YYYY-MM-DD`` into a month key."""
    parts = text.strip().split("-")
    if len(parts) not in (2, 3) or len(parts[0]) != 4:
        raise ValueError(f"bad date {text!r}")
    year, month = int(parts[0]), int(parts[1])
    if not 1 <= month <= 12:
        raise ValueError(f"bad month in {text!r}")
    if len(parts) == 3 and not 1 <= int(parts[2]) <= 31:
        raise ValueError(f"bad day in {text!r}")
    return month_key(year, month)


def _parse_int(text):
    try:
        return int(text)
    except ValueError:
        v = float(text)
        if not v.is_integer():
            raise
        return int(v)


_PARSERS = {REAL: float, CATEGORICAL: _parse_int, MONTH: parse_month}
_DTYPES = {REAL: np.float64, CATEGORICAL: np.int64, MONTH: np.int64}
_MISSING = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str = REAL
    required: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")
        if not self.name.isidentifier():
            raise ValueError(f"column name {self.name!r} is not an identifier")


@dataclass(frozen=True)
class Schema:
    columns: tuple

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        names = [c.name for c in cols]
        dup = sorted({n for n in names if names.count(n) > 1})
        if dup:
            raise ValueError(f"duplicate column names: {', '.join(dup)}")

    @property
    def names(self):
        return [c.name for c in self.columns]

    def __getitem__(self, name):
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name):
        return name in self.names


def _market_schema():
    cat = set(CATEGORICAL_FEATURES) | {ID_COLUMN}
    cols = [ColumnSpec(ID_COLUMN, CATEGORICAL), ColumnSpec("price"), ColumnSpec("aprtot"),
            ColumnSpec("sale_date", MONTH)]
    cols += [ColumnSpec(n, CATEGORICAL if n in cat else REAL) for n in RAW_MARKET_FEATURES]
    return Schema(tuple(cols))


MARKET_SCHEMA = _market_schema()
SOCIO_SCHEMA = Schema((ColumnSpec("month", MONTH),) + tuple(ColumnSpec(c) for c in SOCIO_COLUMNS))


@dataclass(frozen=True)
class Frame:
    """Read-only columnar table.

    Parameters
    ----------
    columns : dict
        Column name to 1-D array; all the same length.
    kinds : dict
        Column name to one of :data:`KINDS`.
    masks : dict, optional
        Column name to boolean missing-value mask. Absent means fully present.
    encoded : frozenset, optional
        Names of columns already replaced by a target encoding.
    """

    columns: dict
    kinds: dict
    masks: dict = field(default_factory=dict)
    encoded: frozenset = frozenset()

    def __post_init__(self):
        cols, masks = {}, {}
        lengths = set()
        for name, v in self.columns.items():
            kind = self.kinds.get(name)
            if kind not in KINDS:
                raise ValueError(f"column {name!r} has unknown kind {kind!r}")
            a = np.array(v, dtype=_DTYPES[kind])
            if a.ndim != 1:
                raise ValueError(f"column {name!r} must be 1-D")
            a.setflags(write=False)
            cols[name] = a
            lengths.add(a.size)
            m = self.masks.get(name)
            if m is not None and np.any(m):
                m = np.array(m, dtype=bool)
                m.setflags(write=False)
                masks[name] = m
        if len(lengths) > 1:
            raise ValueError(f"columns have unequal lengths {sorted(lengths)}")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "kinds", {k: self.kinds[k] for k in cols})
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "encoded", frozenset(self.encoded) & set(cols))

    @property
    def n_rows(self):
        return next(iter(self.columns.values())).size if self.columns else 0

    @property
    def names(self):
        return list(self.columns)

    def __contains__(self, name):
        return name in self.columns

    def __getitem__(self, name):
        try:
            return self.columns[name]
        except KeyError:
            raise KeyError(f"no column {name!r}") from None

    def mask(self, name):
        m = self.masks.get(name)
        return m if m is not None else np.zeros(self.n_rows, dtype=bool)

    def with_columns(self, kinds=None, encoded=(), **new):
        """Return a frame with columns added or replaced (kind defaults to real).

        Replaced columns lose their encoded tag unless listed in ``encoded``.
        """
        kinds = dict(kinds or {})
        cols = dict(self.columns)
        ks = dict(self.kinds)
        masks = {k: v for k, v in self.masks.items() if k not in new}
        for name, v in new.items():
            cols[name] = v
            ks[name] = kinds.get(name, self.kinds.get(name, REAL))
        tags = (self.encoded - set(new)) | set(encoded)
        return Frame(cols, ks, masks, tags)

    def drop(self, names):
        names = set(names)
        return Frame({k: v for k, v in self.columns.items() if k not in names}, self.kinds,
                     {k: v for k, v in self.masks.items() if k not in names}, self.encoded)

    def select(self, names):
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise KeyError(f"no columns {missing}")
        return Frame({n: self.columns[n] for n in names}, self.kinds,
                     {n: self.masks[n] for n in names if n in self.masks}, self.encoded)

    def take(self, index):
        index = np.asarray(index)
        return Frame({k: v[index] for k, v in self.columns.items()}, self.kinds,
                     {k: v[index] for k, v in self.masks.items()}, self.encoded)

    def matrix(self, names):
        """Stack columns as a float64 ``(n_rows, len(names))`` array."""
        for n in names:
            if n in self.masks:
                raise ValueError(f"column {n!r} has missing values")
        if not names:
            return np.empty((self.n_rows, 0))
        return np.column_stack([self[n].astype(np.float64) for n in names])


def _read_rows(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        raise SchemaError(f"{path}: empty file")
    reader = csv.reader(io.StringIO(text))
    header = [h.strip().lower() for h in next(reader)]
    rows = [r for r in reader if any(c.strip() for c in r)]
    return header, rows


def load_csv(path, schema=MARKET_SCHEMA):
    """Read a comma-separated file into a :class:`Frame` following ``schema``.

    Extra columns are ignored, empty or ``NA`` cells are masked. Raises
    :class:`SchemaError` naming a missing required column or the row and
    column of an unparseable cell.
    """
    header, rows = _read_rows(path)
    pos = {h: i for i, h in enumerate(header)}
    missing = [c.name for c in schema.columns if c.required and c.name not in pos]
    if missing:
        raise SchemaError(f"{path}: missing required column(s): {', '.join(missing)}")
    cols, kinds, masks = {}, {}, {}
    for spec in schema.columns:
        if spec.name not in pos:
            continue
        j = pos[spec.name]
        parse = _PARSERS[spec.kind]
        vals = np.zeros(len(rows), dtype=_DTYPES[spec.kind])
        miss = np.zeros(len(rows), dtype=bool)
        for i, row in enumerate(rows):
            cell = row[j].strip() if j < len(row) else ""
            if cell.lower() in _MISSING:
                miss[i] = True
                continue
            try:
                vals[i] = parse(cell)
            except (ValueError, OverflowError):
                # header is line 1
                raise SchemaError(f"{path}: row {i + 2}, column {spec.name!r}: "
                                  f"cannot parse {cell!r} as {spec.kind}") from None
        cols[spec.name], kinds[spec.name], masks[spec.name] = vals, spec.kind, miss
    return Frame(cols, kinds, masks)


def _format(kind, v):
    if kind == REAL:
        return repr(float(v))
    if kind == MONTH:
        return month_str(v)
    return str(int(v))


def frame_to_csv_text(frame):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(frame.names)
    cols = [(frame[n], frame.kinds[n], frame.mask(n)) for n in frame.names]
    for i in range(frame.n_rows):
        w.writerow(["" if m[i] else _format(k, v[i]) for v, k, m in cols])
    return buf.getvalue()


def atomic_write(path, data):
    """Write text or bytes to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(frame, path):
    """Write ``frame`` so that :func:`load_csv` restores numeric columns bit-exactly."""
    atomic_write(path, frame_to_csv_text(frame))


def frame_schema(frame):
    return Schema(tuple(ColumnSpec(n, frame.kinds[n]) for n in frame.names))


@dataclass(frozen=True)
class SocioTable:
    """Monthly macro series keyed by month; months strictly increasing."""

    months: np.ndarray
    values: dict

    def __post_init__(self):
        months = np.asarray(self.months, dtype=np.int64)
        if months.size and np.any(np.diff(months) <= 0):
            raise ValueError("socio months must be strictly increasing without duplicates")
        vals = {}
        for c in SOCIO_COLUMNS:
            if c not in self.values:
                raise ValueError(f"socio table lacks column {c!r}")
            v = np.asarray(self.values[c], dtype=np.float64)
            if v.shape != months.shape:
                raise ValueError(f"socio column {c!r} has wrong length")
            vals[c] = v
        object.__setattr__(self, "months", months)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_frame(cls, frame):
        for c in ("month",) + SOCIO_COLUMNS:
            if frame.mask(c).any():
                raise SchemaError(f"socio column {c!r} has missing values")
        order = np.argsort(frame["month"], kind="stable")
        return cls(frame["month"][order], {c: frame[c][order] for c in SOCIO_COLUMNS})

    def to_frame(self):
        cols = {"month": self.months, **self.values}
        kinds = {"month": MONTH, **{c: REAL for c in SOCIO_COLUMNS}}
        return Frame(cols, kinds)


def load_socio_csv(path):
    return SocioTable.from_frame(load_csv(path, SOCIO_SCHEMA))


def derive_target(frame):
    """Add ``price_high_low = 1 if price > aprtot else 0``.

    Rows with a missing price or aprtot are dropped. Returns ``(frame, n_rejected)``.
    """
    for c in ("price", "aprtot"):
        if c not in frame:
            raise SchemaError(f"missing required column: {c}")
    bad = frame.mask("price") | frame.mask("aprtot")
    if bad.any():
        frame = frame.take(np.flatnonzero(~bad))
    y = (frame["price"] > frame["aprtot"]).astype(np.int64)
    return frame.with_columns(kinds={TARGET: CATEGORICAL}, **{TARGET: y}), int(bad.sum())


def add_calendar_features(frame):
    """Derive sale_year, sale_month (month of year) and age from sale_date and yrblt."""
    sd = frame["sale_date"]
    year = sd // 12
    miss = frame.mask("sale_date") | frame.mask("yrblt")
    out = frame.with_columns(kinds={"sale_year": REAL, "sale_month": REAL, "age": REAL},
                             sale_year=year, sale_month=sd % 12 + 1,
                             age=year - frame["yrblt"])
    if miss.any():
        masks = dict(out.masks)
        for c in DERIVED_FEATURES:
            masks[c] = miss
        out = Frame(out.columns, out.kinds, masks, out.encoded)
    return out


def join_socio(frame, socio):
    """Append the socio columns matched on the year-month of ``sale_date``."""
    sd = frame["sale_date"]
    idx = np.searchsorted(socio.months, sd)
    idx_c = np.minimum(idx, max(socio.months.size - 1, 0))
    ok = (idx < socio.months.size) & (socio.months[idx_c] == sd) if socio.months.size else np.zeros(sd.size, bool)
    ok |= frame.mask("sale_date")
    if not ok.all():
        absent = sorted(set(sd[~ok].tolist()))
        shown = ", ".join(month_str(m) for m in absent[:12])
        more = f" (+{len(absent) - 12} more)" if len(absent) > 12 else ""
        raise SchemaError(f"socio table lacks sale month(s): {shown}{more}")
    return frame.with_columns(**{c: socio.values[c][idx_c] for c in SOCIO_COLUMNS})


@dataclass(frozen=True)
class PrepareReport:
    n_in: int
    n_out: int
    rejected_target: int
    rejected_by_column: dict

    @property
    def n_rejected(self):
        return self.n_in - self.n_out

    def to_rows(self):
        rows = [("rows_in", self.n_in), ("rows_out", self.n_out),
                ("rejected_target", self.rejected_target)]
        rows += [(f"rejected_missing_{c}", n) for c, n in sorted(self.rejected_by_column.items())]
        return rows


def prepare(frame, socio=None):
    """Derive the target and calendar features, reject incomplete rows, join socio.

    A row is rejected when price/aprtot or any model-input column is missing;
    ``rejected_by_column`` counts each such column (a row may count twice).
    """
    n_in = frame.n_rows
    frame, rej_t = derive_target(frame)
    frame = add_calendar_features(frame)
    need = list(MARKET_FEATURES) + ["sale_date"]
    absent = [c for c in need if c not in frame]
    if absent:
        raise SchemaError(f"missing required column(s): {', '.join(absent)}")
    bad = np.zeros(frame.n_rows, dtype=bool)
    by_col = {}
    for c in need:
        m = frame.mask(c)
        if m.any():
            by_col[c] = int(m.sum())
            bad |= m
    if bad.any():
        frame = frame.take(np.flatnonzero(~bad))
    keep = [c for c in [ID_COLUMN, "price", "aprtot", "sale_date", TARGET, *MARKET_FEATURES]
            if c in frame]
    frame = frame.select(keep)
    if socio is not None:
        frame = join_socio(frame, socio)
    return frame, PrepareReport(n_in, frame.n_rows, rej_t, by_col)


def pearson_matrix(frame, cols):
    """Pearson correlation matrix of numeric columns (two-pass, centred)."""
    X = frame.matrix(list(cols))
    Xc = X - X.mean(axis=0)
    ss = np.sqrt((Xc * Xc).sum(axis=0))
    for j, c in enumerate(cols):
        if ss[j] == 0:
            raise ValueError(f"column {c!r} is constant; correlation undefined")
    P = (Xc.T @ Xc) / np.outer(ss, ss)
    P = np.clip(0.5 * (P + P.T), -1.0, 1.0)
    np.fill_diagonal(P, 1.0)
    return P


def summarize(frame):
    """Per-calendar-year sale counts and target-positive rates.

    Returns a list of ``(year, count, positive_rate)`` sorted by year.
    """
    years = frame["sale_date"] // 12
    y = frame[TARGET]
    out = []
    for yr in np.unique(years):
        sel = years == yr
        out.append((int(yr), int(sel.sum()), float(y[sel].mean())))
    return out
