"""Reading series, serializing fits and writing report files."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import os
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from .core import PARAM_NAMES, CountSeries, FitResult, ModelParams, ValidationError


def data_path(name: str = "") -> Path:
    """Location of a bundled data file."""
    return Path(str(resources.files("underreport") / "data")) / name


def load_regions() -> list:
    return json.loads(data_path("regions.json").read_text(encoding="utf-8"))


def ingest_csv(path, label: str | None = None) -> CountSeries:
    """Read a ``date,count`` CSV with one row per consecutive day."""
    path = Path(path)
    text = path.read_text(encoding="utf-8-sig")
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    if header != ["date", "count"]:
        raise ValidationError(f"{path}: expected header 'date,count', got {','.join(rows[0])!r}")
    dates, counts = [], []
    for number, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ValidationError(f"{path}: row {number}: expected 2 fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[0].strip())
            count = int(row[1].strip())
        except ValueError:
            raise ValidationError(
                f"{path}: row {number}: malformed row {','.join(row)!r}") from None
        if count < 0:
            raise ValidationError(f"{path}: row {number}: negative count {count}")
        if dates:
            step = (day - dates[-1]).days
            if step == 0:
                raise ValidationError(f"{path}: row {number}: duplicated date {day.isoformat()}")
            if step < 0:
                raise ValidationError(f"{path}: row {number}: date {day.isoformat()} out of order")
            if step > 1:
                missing = dates[-1] + dt.timedelta(days=1)
                raise ValidationError(f"{path}: missing date {missing.isoformat()}")
        dates.append(day)
        counts.append(count)
    if not dates:
        raise ValidationError(f"{path}: no data rows")
    return CountSeries(tuple(dates), counts, label or path.stem)


def series_csv(series: CountSeries, latent=None) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", "count"] if latent is None else ["date", "count", "latent"])
    for i, (day, count) in enumerate(zip(series.dates, series.counts)):
        row = [day.isoformat(), int(count)]
        if latent is not None:
            row.append(int(latent[i]))
        writer.writerow(row)
    return out.getvalue()


def rows_csv(rows: list, columns: list) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n",
                            extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if row.get(k) is None else row[k] for k in columns})
    return out.getvalue()


def fit_to_dict(fit: FitResult, series: CountSeries | None = None) -> dict:
    report = {
        "params": fit.params.as_dict(),
        "std_errors": fit.std_errors,
        "free": list(fit.free_names),
        "covariance": None if fit.covariance is None else np.asarray(fit.covariance).tolist(),
        "log_likelihood": fit.log_likelihood,
        "truncation": fit.truncation,
        "converged": fit.converged,
        "fixed": sorted(fit.fixed),
        "initial": fit.initial,
        "message": fit.message,
        "n_evaluations": fit.n_evaluations,
    }
    if series is not None:
        report["series"] = {"label": series.label, "start": series.dates[0].isoformat(),
                            "end": series.dates[-1].isoformat(), "days": len(series),
                            "total": series.total}
    return report


def fit_from_dict(report: dict) -> FitResult:
    try:
        params = ModelParams.from_dict(report["params"])
        fixed = frozenset(report.get("fixed", set(PARAM_NAMES) - set(report.get("free", ()))))
        cov = report.get("covariance")
        return FitResult(params=params, log_likelihood=float(report["log_likelihood"]),
                         converged=bool(report.get("converged", True)),
                         truncation=int(report["truncation"]), fixed=fixed,
                         std_errors=report.get("std_errors"),
                         covariance=None if cov is None else np.asarray(cov, dtype=float),
                         initial=report.get("initial", "poisson"),
                         message=report.get("message", ""),
                         n_evaluations=int(report.get("n_evaluations", 0)))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed fit report: missing or bad field {exc}") from None


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def load_fit(path) -> FitResult:
    return fit_from_dict(load_json(path))


def load_params(path) -> ModelParams:
    """Parameters from a fit report or a flat ``{name: value}`` JSON object."""
    report = load_json(path)
    values = report.get("params", report) if isinstance(report, dict) else None
    if not isinstance(values, dict):
        raise ValidationError(f"{path}: expected a JSON object of parameters")
    try:
        return ModelParams.from_dict(values)
    except TypeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def to_json(obj) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (dt.date, Path)):
            return str(o)
        raise TypeError(f"cannot serialize {type(o).__name__}")
    return json.dumps(obj, indent=2, default=default, allow_nan=True) + "\n"


def write_files(files: dict) -> None:
    """Write every ``{path: text}`` entry, or none of them.

    Each file is staged next to its target and renamed into place only once
    all staging writes have succeeded.
    """
    staged = []
    umask = os.umask(0)
    os.umask(umask)
    try:
        for path, text in files.items():
            path = Path(path)
            fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
            staged.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.chmod(tmp, 0o666 & ~umask)
    except BaseException:
        for tmp, _ in staged:
            Path(tmp).unlink(missing_ok=True)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)
