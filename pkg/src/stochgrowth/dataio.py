"""CSV ingestion, a cached HTTPS fetcher and a synthetic data generator.

CSV layouts (headers are exact):

* GDP: ``date,value`` with ISO dates (``1994-01-01``) or quarters
  (``1994-Q1``, mapped to the first day of the quarter).
* Incomes: ``year,bin_lower,bin_upper,count`` with incomes in thousands;
  an empty ``bin_upper`` marks the open top bin.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import re
import tempfile
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .econometrics import GdpSeries, IncomeHistogram
from .errors import DataIOError, FetchError, OfflineError, ParseError, ValidationError
from .law_lab import GammaLaw

logger = logging.getLogger(__name__)

GDP_HEADER = ["date", "value"]
INCOME_HEADER = ["year", "bin_lower", "bin_upper", "count"]
OFFLINE_ENV = "STOCHGROWTH_OFFLINE"
MAX_ATTEMPTS = 3

_QUARTER = re.compile(r"^(\d{4})-Q([1-4])$")
_ISO = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def _text(data: bytes | str) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from None
    return data


def _rows(data: bytes | str, header: list[str], source: str | None) -> list[tuple[int, list[str]]]:
    reader = csv.reader(io.StringIO(_text(data)))
    try:
        first = next(reader)
    except StopIteration:
        raise ParseError("empty input", line=1, source=source) from None
    if [c.strip() for c in first] != header:
        raise ParseError(f"expected header {','.join(header)!r}, got {','.join(first)!r}", line=1, source=source)
    out = []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num, source=source)
        out.append((reader.line_num, [c.strip() for c in row]))
    return out


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 2**53 else repr(float(v))


# ---------------------------------------------------------------------------
# GDP
# ---------------------------------------------------------------------------


def parse_date(text: str) -> np.datetime64:
    m = _QUARTER.match(text)
    if m:
        month = 3 * (int(m.group(2)) - 1) + 1
        return np.datetime64(f"{m.group(1)}-{month:02d}-01", "D")
    if not _ISO.match(text):
        raise ValueError(f"unrecognised date {text!r}")
    return np.datetime64(text, "D")


def parse_gdp_csv(data: bytes | str, source: str | None = None) -> GdpSeries:
    """Parse ``date,value`` rows into a time-sorted :class:`GdpSeries`."""
    dates, values = [], []
    for lineno, (d, v) in _rows(data, GDP_HEADER, source):
        try:
            dates.append(parse_date(d))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, source=source) from None
        try:
            val = float(v)
        except ValueError:
            raise ParseError(f"value {v!r} is not a number", line=lineno, source=source) from None
        if not np.isfinite(val) or val <= 0:
            raise ValidationError(f"{source or 'gdp'} line {lineno}: value must be positive, got {v}")
        values.append(val)
    if not dates:
        raise ParseError("no data rows", source=source)
    periods = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(periods, kind="stable")
    periods, vals = periods[order], np.array(values)[order]
    dup = periods[1:][np.diff(periods).astype(int) == 0]
    if dup.size:
        raise ValidationError(f"duplicate date(s) {sorted(set(str(d) for d in dup))}")
    return GdpSeries(periods, vals)


def export_gdp_csv(series: GdpSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GDP_HEADER)
    for d, v in zip(series.periods, series.values):
        w.writerow([str(d), repr(float(v))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Incomes
# ---------------------------------------------------------------------------


def parse_income_csv(data: bytes | str, source: str | None = None) -> list[IncomeHistogram]:
    """Parse binned incomes into one histogram per year, sorted by year.

    Counts may be persons or thousands of persons; the Gamma fit does not
    depend on the unit.
    """
    by_year: dict[int, list[tuple[float, float, float]]] = {}
    for lineno, (y, lo, hi, n) in _rows(data, INCOME_HEADER, source):
        try:
            year = int(y)
            lower = float(lo)
            upper = float(hi) if hi != "" else np.inf
            count = float(n)
        except ValueError:
            raise ParseError(f"malformed row {[y, lo, hi, n]!r}", line=lineno, source=source) from None
        if not (np.isfinite(lower) and np.isfinite(count)):
            raise ParseError("bin_lower and count must be finite", line=lineno, source=source)
        by_year.setdefault(year, []).append((lower, upper, count))
    if not by_year:
        raise ParseError("no data rows", source=source)
    out = []
    for year in sorted(by_year):
        bins = sorted(by_year[year])
        arr = np.array(bins, dtype=float)
        for (l0, u0, _), (l1, _, _) in zip(bins, bins[1:]):
            if u0 > l1:
                raise ValidationError(f"{year}: bins [{l0}, {u0}) and [{l1}, ...) overlap")
        out.append(IncomeHistogram(year, arr[:, 0], arr[:, 1], arr[:, 2]))
    return out


def check_contiguous_years(hists: Sequence[IncomeHistogram]) -> list[int]:
    years = [h.year for h in hists]
    if years and years != list(range(years[0], years[0] + len(years))):
        gaps = sorted(set(range(years[0], years[-1] + 1)) - set(years))
        raise ValidationError(f"income years are not contiguous; missing {gaps}")
    return years


def export_income_csv(hists: Sequence[IncomeHistogram]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INCOME_HEADER)
    for h in hists:
        for lo, hi, n in zip(h.lower, h.upper, h.counts):
            w.writerow([h.year, repr(float(lo)), "" if np.isinf(hi) else repr(float(hi)), _fmt(n)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Fetching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesSource:
    kind: str
    location: str
    format_hint: str = "gdp-csv"

    def __post_init__(self) -> None:
        if self.kind not in ("local-file", "remote-url"):
            raise ValidationError(f"source kind must be 'local-file' or 'remote-url', got {self.kind!r}")
        if not self.location:
            raise ValidationError("source location must be non-empty")
        if self.format_hint not in ("gdp-csv", "income-csv"):
            raise ValidationError(f"format_hint must be 'gdp-csv' or 'income-csv', got {self.format_hint!r}")
        if self.kind == "remote-url" and not self.location.lower().startswith("https://"):
            raise ValidationError(f"remote sources must use https: {self.location}")


Transport = Callable[[str, float], tuple[int, bytes]]


def urllib_transport(url: str, timeout: float) -> tuple[int, bytes]:
    """GET ``url``; returns ``(status, body)``.  Network errors raise ``OSError``."""
    req = urllib.request.Request(url, method="GET", headers={"User-Agent": "stochgrowth-fetch"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as exc:
        return exc.code, b""


def url_digest(url: str) -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _offline_default() -> bool:
    return os.environ.get(OFFLINE_ENV, "").strip().lower() in ("1", "true", "yes", "on")


def fetch_series(
    src: SeriesSource,
    timeout: float = 30.0,
    cache_dir: str | os.PathLike | None = None,
    *,
    offline: bool | None = None,
    transport: Transport | None = None,
    sleep: Callable[[float], None] = time.sleep,
    backoff: float = 0.5,
) -> bytes:
    """Return the bytes of a local file or a remote CSV.

    Remote bodies are cached under ``cache_dir`` as ``<sha256(url)>.bin`` with
    a JSON ``.meta`` sidecar and served from there on later calls; cache
    entries never expire.  Offline mode (argument, or the
    ``STOCHGROWTH_OFFLINE`` environment variable) only reads the cache.
    Server errors and network failures are retried up to three attempts in
    total with exponential backoff; client errors (4xx other than 429) fail
    immediately.
    """
    if not timeout > 0:
        raise ValidationError("timeout must be positive")
    if src.kind == "local-file":
        try:
            return Path(src.location).read_bytes()
        except OSError as exc:
            raise DataIOError(f"cannot read {src.location}: {exc}") from None

    cache = Path(cache_dir) if cache_dir is not None else Path.home() / ".cache" / "stochgrowth"
    digest = url_digest(src.location)
    body_path = cache / f"{digest}.bin"
    if body_path.exists():
        logger.debug("cache hit for %s", src.location)
        return body_path.read_bytes()
    if offline if offline is not None else _offline_default():
        raise OfflineError(f"offline mode and no cached copy of {src.location}")

    send = transport or urllib_transport
    status: int | None = None
    last_err = ""
    for attempt in range(1, MAX_ATTEMPTS + 1):
        try:
            status, body = send(src.location, timeout)
        except OSError as exc:
            status, last_err = None, str(exc)
        else:
            if 200 <= status < 300:
                try:
                    cache.mkdir(parents=True, exist_ok=True)
                    _atomic_write(body_path, body)
                    meta = {"url": src.location, "fetched_at": time.time(), "status": status, "bytes": len(body)}
                    _atomic_write(cache / f"{digest}.meta", json.dumps(meta, indent=2).encode())
                except OSError as exc:
                    raise DataIOError(f"cannot write cache in {cache}: {exc}") from None
                return body
            last_err = f"HTTP {status}"
            if 400 <= status < 500 and status != 429:
                break
        if attempt < MAX_ATTEMPTS:
            delay = backoff * 2 ** (attempt - 1)
            logger.info("fetch of %s failed (%s); retrying in %.2fs", src.location, last_err, delay)
            sleep(delay)
    raise FetchError(f"could not fetch {src.location}: {last_err}", status=status)


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


@dataclass
class SynthSpec:
    """Ground truth for a synthetic economy.

    ``laws`` maps year to the cross-sectional income law; ``theta_path``
    has one entry per year transition (``len(years) - 1``), so that
    ``ln m_{t+1} - ln m_t = theta_t + eps1_sd * e1 + eps2_scale * sqrt(beta_t^2 / alpha_t) * e2``.
    """

    laws: dict[int, GammaLaw]
    theta_path: np.ndarray
    seed: int = 0
    m0: float = 28_000.0
    eps1_sd: float = 0.002
    eps2_scale: float = 1.0
    n_income: int = 100_000
    n_bins: int = 40
    g_kind: str = "exponential"
    economy: Any = None

    def __post_init__(self) -> None:
        self.theta_path = np.asarray(self.theta_path, dtype=float)
        years = sorted(self.laws)
        if years != list(range(years[0], years[0] + len(years))):
            raise ValidationError("law years must be contiguous")
        if self.theta_path.shape != (len(years) - 1,):
            raise ValidationError(
                f"theta_path needs {len(years) - 1} entries (one per year transition), got {self.theta_path.size}"
            )
        if self.g_kind != "exponential":
            raise ValidationError("only g_kind='exponential' is supported")
        if self.n_bins < 3 or self.n_income < 1:
            raise ValidationError("need n_bins >= 3 and n_income >= 1")

    @property
    def years(self) -> list[int]:
        return sorted(self.laws)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "years": self.years,
            "alpha": [self.laws[y].alpha for y in self.years],
            "beta": [self.laws[y].beta for y in self.years],
            "theta": self.theta_path.tolist(),
            "seed": self.seed,
            "m0": self.m0,
            "eps1_sd": self.eps1_sd,
            "eps2_scale": self.eps2_scale,
            "n_income": self.n_income,
            "n_bins": self.n_bins,
            "g_kind": self.g_kind,
        }
        if self.economy is not None:
            out["economy"] = self.economy.to_config() if hasattr(self.economy, "to_config") else self.economy
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SynthSpec":
        laws = {int(y): GammaLaw(a, b) for y, a, b in zip(d["years"], d["alpha"], d["beta"])}
        keys = ("seed", "m0", "eps1_sd", "eps2_scale", "n_income", "n_bins", "g_kind")
        return cls(laws, np.asarray(d["theta"], dtype=float), **{k: d[k] for k in keys if k in d})


def default_synth_spec(
    seed: int = 0,
    first_year: int = 1994,
    last_year: int = 2015,
    alpha: float = 2.0,
    beta_start: float = 0.17,
    beta_end: float = 0.12,
    theta_start: float = 0.02,
    theta_end: float = 0.02,
    **kw: Any,
) -> SynthSpec:
    """Linear paths for ``beta`` and ``theta`` over ``first_year .. last_year``."""
    years = list(range(first_year, last_year + 1))
    betas = np.linspace(beta_start, beta_end, len(years))
    laws = {y: GammaLaw(alpha, float(b)) for y, b in zip(years, betas)}
    theta = np.linspace(theta_start, theta_end, len(years) - 1)
    return SynthSpec(laws, theta, seed=seed, **kw)


@dataclass
class SynthData:
    gdp: GdpSeries
    incomes: list[IncomeHistogram]
    truth: dict[str, Any]


def synth_generate(spec: SynthSpec) -> SynthData:
    """Draw a synthetic GDP path and binned income cross-sections.

    Income samples for each year come from that year's Gamma law and are
    binned into ``n_bins`` equal-width bins up to the 99.5th percentile,
    the last bin open.  Log GDP cumulates ``theta`` plus the two noises.
    """
    root = np.random.SeedSequence(spec.seed)
    gdp_ss, inc_ss = root.spawn(2)
    years = spec.years
    rng = np.random.default_rng(gdp_ss)
    alpha = np.array([spec.laws[y].alpha for y in years[:-1]])
    beta = np.array([spec.laws[y].beta for y in years[:-1]])
    e1 = rng.standard_normal(len(years) - 1)
    e2 = rng.standard_normal(len(years) - 1)
    growth = spec.theta_path + spec.eps1_sd * e1 + spec.eps2_scale * np.sqrt(beta**2 / alpha) * e2
    log_m = np.log(spec.m0) + np.concatenate([[0.0], np.cumsum(growth)])
    periods = np.array([f"{y:04d}-01-01" for y in years], dtype="datetime64[D]")
    gdp = GdpSeries(periods, np.exp(log_m))

    incomes = []
    for y, ss in zip(years, inc_ss.spawn(len(years))):
        law = spec.laws[y]
        draws = law.sample(np.random.default_rng(ss), spec.n_income)
        top = float(law.ppf(0.995))
        edges = np.round(np.linspace(0.0, top, spec.n_bins), 6)
        incomes.append(IncomeHistogram.from_samples(y, draws, edges_with_open_top(edges)))
    truth = spec.to_dict()
    truth["growth"] = growth.tolist()
    return SynthData(gdp, incomes, truth)


def edges_with_open_top(edges: np.ndarray) -> np.ndarray:
    """``n`` closed-bin edges plus a final edge standing for the open top bin."""
    return np.append(edges, edges[-1] + (edges[-1] - edges[-2]))
