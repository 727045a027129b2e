"""CSV ingestion, run configuration and report emission.

CSV dialect: comma separated, one header row, UTF-8, ``.`` as decimal mark.
Floats are written with ``repr`` (shortest round-trip form), so a
write/read cycle reproduces every value exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .analysis import AnalysisConfig, ClusterSummary, Comparison, SweepPoint
from .data_model import (
    CONTINUOUS, KINDS, Assignment, Column, Dataset, FeatureTable, NuisanceEstimates, ScoreMatrix,
    SensitiveVector, validate_dataset,
)
from .fair_adjust import AdjustedFeatures
from .scores import aipw_scores, iapo_scores

log = logging.getLogger(__name__)

MAX_GROUPS_QUIET = 32


class ConfigError(ValueError):
    """Bad or inconsistent run configuration (exit code 1)."""


class InputError(ValueError):
    """Unparseable or invalid input data (exit code 1)."""


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_columns(path: Path, columns: dict[str, Any]) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = len(arrays[0]) if arrays else 0
    write_csv(path, names, ([a[i].item() for a in arrays] for i in range(n)))


def read_csv(path: Path) -> dict[str, list[str]]:
    """Read a header-row CSV into raw string columns."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError:
        raise
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise InputError(f"{path}: duplicate column names in header")
        cols: dict[str, list[str]] = {h: [] for h in header}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
            for h, v in zip(header, row):
                cols[h].append(v)
    return cols


def to_float(path: Path, name: str, raw: list[str]) -> np.ndarray:
    out = np.empty(len(raw))
    for i, v in enumerate(raw):
        try:
            out[i] = float(v)
        except ValueError:
            raise InputError(f"{path}: non-numeric value {v!r} in column {name!r} at data row {i + 1}") from None
    return out


@dataclass
class RunConfig:
    """One JSON document describing inputs, column roles and analysis settings."""

    inputs: dict[str, str] = field(default_factory=dict)
    roles: dict[str, Any] = field(default_factory=dict)
    synthetic: dict[str, Any] | None = None
    score_type: str = "aipw"
    depth: int = 3
    n_points: int = 100
    lambdas: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    targets: list[str] = field(default_factory=lambda: ["A", "scores", "both"])
    seed: int = 0
    out: str = "out"
    train_frac: float = 2.0 / 3.0
    prior_concentration: float = 1.0
    kmeans: dict[str, Any] = field(default_factory=lambda: {"k_min": 2, "k_max": 10, "min_share": 0.01})
    base_dir: str = "."

    def __post_init__(self):
        if not 0 <= int(self.depth) <= 3:
            raise ConfigError("depth must lie in 0..3")
        if int(self.n_points) < 1:
            raise ConfigError("n_points must be at least 1")
        if self.seed is None:
            raise ConfigError("seed is required")
        if not self.inputs and self.synthetic is None:
            raise ConfigError("config needs either 'inputs' or a 'synthetic' block")

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc, base_dir=str(path.parent))

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str = ".") -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc, base_dir=base_dir)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def path(self, key: str) -> Path:
        p = Path(self.inputs[key])
        return p if p.is_absolute() else Path(self.base_dir) / p

    def analysis(self) -> AnalysisConfig:
        km = self.kmeans or {}
        try:
            return AnalysisConfig(
                depth=int(self.depth), n_points=int(self.n_points), seed=int(self.seed),
                train_frac=float(self.train_frac), lambdas=tuple(float(x) for x in self.lambdas),
                targets=tuple(self.targets), prior_concentration=float(self.prior_concentration),
                k_min=int(km.get("k_min", 2)), k_max=int(km.get("k_max", 10)),
                min_share=float(km.get("min_share", 0.01)),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _check_roles(roles: dict) -> None:
    seen: dict[str, str] = {}

    def claim(col: str, role: str):
        if col in seen and seen[col] != role:
            raise ConfigError(f"column {col!r} assigned to both {seen[col]!r} and {role!r}")
        if col in seen:
            raise ConfigError(f"column {col!r} listed twice for role {role!r}")
        seen[col] = role

    for col in roles.get("features", {}):
        claim(col, "features")
    for col in roles.get("sensitive", []):
        claim(col, "sensitive")
    for col in roles.get("scores", []):
        claim(col, "scores")
    if roles.get("observed"):
        claim(roles["observed"], "observed")
    nui = roles.get("nuisance", {})
    for key in ("mu", "e"):
        for col in nui.get(key, []):
            claim(col, f"nuisance.{key}")
    for key in ("y", "d_obs"):
        if nui.get(key):
            claim(nui[key], f"nuisance.{key}")


def _pick(path: Path, cols: dict[str, list[str]], wanted: Sequence[str]) -> dict[str, list[str]]:
    missing = [w for w in wanted if w not in cols]
    if missing:
        raise ConfigError(f"{path}: columns {missing} named in the role map are missing from the header")
    return {w: cols[w] for w in wanted}


def load_dataset(config: RunConfig) -> Dataset:
    """Read the configured CSV files (or generate synthetic data) and validate."""
    if config.synthetic is not None and not config.inputs:
        from .synthetic import SyntheticSpec, generate_synthetic
        from . import _rng

        spec = SyntheticSpec(**config.synthetic)
        return generate_synthetic(spec, _rng.stream(config.seed, _rng.SYNTH)).dataset

    roles = config.roles or {}
    _check_roles(roles)

    fpath = config.path("features")
    fcols = read_csv(fpath)
    kinds = roles.get("features") or {name: CONTINUOUS for name in fcols}
    fcols = _pick(fpath, fcols, list(kinds))
    columns = []
    for name, kind in kinds.items():
        spec = kind if isinstance(kind, dict) else {"kind": kind}
        if spec["kind"] not in KINDS:
            raise ConfigError(f"feature {name!r}: unknown kind {spec['kind']!r}")
        values = to_float(fpath, name, fcols[name])
        support = np.asarray(spec["support"], dtype=float) if "support" in spec else None
        columns.append(Column(name, spec["kind"], values, support))
    features = FeatureTable(tuple(columns))

    spath = config.path("sensitive")
    scols = read_csv(spath)
    sens_names = roles.get("sensitive") or list(scols)
    scols = _pick(spath, scols, sens_names)
    sensitive = SensitiveVector.from_attributes({n: np.asarray(scols[n]) for n in sens_names})
    if sensitive.k > MAX_GROUPS_QUIET:
        log.warning("%d sensitive groups; within-group cdfs may be poorly estimated", sensitive.k)

    if "scores" in config.inputs:
        gpath = config.path("scores")
        gcols = read_csv(gpath)
        names = roles.get("scores") or list(gcols)
        gcols = _pick(gpath, gcols, names)
        scores = ScoreMatrix(np.column_stack([to_float(gpath, n, gcols[n]) for n in names]), tuple(names))
    elif "nuisance" in config.inputs:
        scores = nuisance_scores(load_nuisance(config), config.score_type)
    else:
        raise ConfigError("inputs need either 'scores' or 'nuisance'")

    observed = None
    if "observed" in config.inputs:
        opath = config.path("observed")
        ocols = read_csv(opath)
        oname = roles.get("observed") or next(iter(ocols))
        d = to_float(opath, oname, _pick(opath, ocols, [oname])[oname])
        if np.any(d != np.round(d)) or np.any(d < 0) or np.any(d >= scores.n_treatments):
            raise InputError(f"{opath}: observed treatments must be integers in 0..{scores.n_treatments - 1}")
        observed = Assignment(d.astype(np.int64), scores.n_treatments)

    covariates = {}
    if "covariates" in config.inputs:
        cpath = config.path("covariates")
        ccols = read_csv(cpath)
        covariates = {n: to_float(cpath, n, v) for n, v in ccols.items()}

    problems = validate_dataset(features, sensitive, scores)
    if observed is not None and len(observed) != features.n:
        problems.append("observed assignment length differs from features")
    if problems:
        raise InputError("dataset failed validation: " + "; ".join(problems))
    return Dataset(features, sensitive, scores, observed, covariates)


def load_nuisance(config: RunConfig) -> NuisanceEstimates:
    path = config.path("nuisance")
    cols = read_csv(path)
    nui = (config.roles or {}).get("nuisance", {})
    # header order is treatment order
    mu_names = nui.get("mu") or [c for c in cols if c.startswith("mu_")]
    e_names = nui.get("e") or [c for c in cols if c.startswith("e_")]
    if not mu_names:
        raise ConfigError(f"{path}: no outcome-regression columns")
    mu = np.column_stack([to_float(path, n, cols[n]) for n in _pick(path, cols, mu_names)])
    e = y = d = None
    if e_names:
        e = np.column_stack([to_float(path, n, cols[n]) for n in _pick(path, cols, e_names)])
    if nui.get("y", "y") in cols:
        y = to_float(path, "y", cols[nui.get("y", "y")])
    if nui.get("d_obs", "d_obs") in cols:
        d = to_float(path, "d_obs", cols[nui.get("d_obs", "d_obs")]).astype(np.int64)
    names = tuple(n[3:] if n.startswith("mu_") else n for n in mu_names)
    try:
        return NuisanceEstimates(mu, e, y, d, names)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def nuisance_scores(nuisance: NuisanceEstimates, score_type: str) -> ScoreMatrix:
    if score_type == "iapo":
        return iapo_scores(nuisance)
    if score_type == "aipw":
        return aipw_scores(nuisance)
    raise ConfigError(f"unknown score_type {score_type!r}")


def write_dataset(out: Path, data: Dataset, nuisance: NuisanceEstimates | None = None,
                  extra_config: dict | None = None) -> Path:
    """Write a dataset as CSV files plus a config that reloads it."""
    out.mkdir(parents=True, exist_ok=True)
    write_columns(out / "features.csv", {c.name: c.values for c in data.features.columns})
    sens = data.sensitive
    if sens.attributes is not None:
        write_columns(out / "sensitive.csv", {n: sens.attributes[:, j] for j, n in enumerate(sens.attribute_names)})
    else:
        write_columns(out / "sensitive.csv", {"group": sens.labels})
    write_columns(out / "scores.csv", {n: data.scores.values[:, d] for d, n in enumerate(data.scores.treatment_names)})
    inputs = {"features": "features.csv", "sensitive": "sensitive.csv", "scores": "scores.csv"}
    if data.observed is not None:
        write_columns(out / "observed.csv", {"treatment": data.observed.treatments})
        inputs["observed"] = "observed.csv"
    if data.covariates:
        write_columns(out / "covariates.csv", data.covariates)
        inputs["covariates"] = "covariates.csv"
    if nuisance is not None:
        cols = {f"mu_{n}": nuisance.mu[:, d] for d, n in enumerate(nuisance.treatment_names)}
        if nuisance.e is not None:
            cols.update({f"e_{n}": nuisance.e[:, d] for d, n in enumerate(nuisance.treatment_names)})
        if nuisance.y is not None:
            cols["y"] = nuisance.y
        if nuisance.d_obs is not None:
            cols["d_obs"] = nuisance.d_obs
        write_columns(out / "nuisance.csv", cols)
    roles = {
        "features": {c.name: ({"kind": c.kind, "support": c.support.tolist()} if c.support is not None else c.kind)
                     for c in data.features.columns},
        "sensitive": list(sens.attribute_names) if sens.attributes is not None else ["group"],
        "scores": list(data.scores.treatment_names),
    }
    if data.observed is not None:
        roles["observed"] = "treatment"
    doc = {"inputs": inputs, "roles": roles}
    doc.update(extra_config or {})
    cfg = out / "config.json"
    cfg.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return cfg


def write_adjusted(path: Path, adjusted: AdjustedFeatures) -> None:
    cols = {}
    for j, name in enumerate(adjusted.names):
        cols[f"{name}__p"] = adjusted.p_values[:, j]
        cols[f"{name}__adj"] = adjusted.adjusted[:, j]
    write_columns(path, cols)


def read_adjusted(path: Path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    cols = read_csv(path)
    names = [c[:-3] for c in cols if c.endswith("__p")]
    p = np.column_stack([to_float(path, n, cols[f"{n}__p"]) for n in names])
    adj = np.column_stack([to_float(path, n, cols[f"{n}__adj"]) for n in names])
    return p, adj, names


COMPARISON_HEADER = ["policy", "interpretable", "policy_value", "cramers_v", "p_value", "log_bf"]


def comparison_rows(comp: Comparison) -> tuple[list[str], list[list]]:
    m = len(comp.rows[0].program_shares)
    header = COMPARISON_HEADER + [f"share_{d}" for d in range(m)]
    rows = []
    for r in comp.rows:
        f = r.fairness
        rows.append([r.policy, r.interpretable, r.policy_value, f.cramers_v, f.p_value, f.log_bf,
                     *r.program_shares.tolist()])
    return header, rows


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Aligned plain-text table with three decimals for floats."""
    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v))
        if isinstance(v, float):
            if math.isinf(v):
                return "-Inf" if v < 0 else "Inf"
            return f"{v:.3f}"
        return str(v)

    body = [[cell(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(lines)


def _versions() -> dict[str, str]:
    import scipy
    import sklearn

    return {"fairpolicy": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "scikit-learn": sklearn.__version__}


def emit_reports(out: Path, config: RunConfig, comparison: Comparison | None = None,
                 sweep: list[SweepPoint] | None = None, clusters: ClusterSummary | None = None,
                 notes: Sequence[str] = (), figures: bool = True, timestamp: str | None = None) -> list[Path]:
    """Write CSV/text/JSON reports (and figures) for whatever results are given."""
    from .prob_split_tree import render as render_prob

    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written: list[Path] = []
    notes = list(notes)

    if comparison is not None:
        header, rows = comparison_rows(comparison)
        write_csv(out / "comparison.csv", header, rows)
        (out / "comparison.txt").write_text(format_table(header, rows) + "\n", encoding="utf-8")
        written += [out / "comparison.csv", out / "comparison.txt"]
        notes += comparison.notes

        text, doc = [], {"trees": {}, "prob_split": {}}
        for name, tree in comparison.trees.items():
            text += [f"== {name} ({tree.scale} scale) ==", tree.render(), ""]
            doc["trees"][name] = tree.to_dict()
        for name, policy in comparison.prob_policies.items():
            text += [f"== {name} ==", render_prob(policy), ""]
            doc["prob_split"][name] = policy.to_dict()
        (out / "trees.txt").write_text("\n".join(text), encoding="utf-8")
        (out / "trees.json").write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n", encoding="utf-8")
        written += [out / "trees.txt", out / "trees.json"]

    if sweep is not None:
        if sweep:
            write_csv(out / "sweep.csv", ["target", "lambda", "policy_value", "cramers_v"],
                      [[p.target, p.lam, p.policy_value, p.cramers_v] for p in sweep])
            written.append(out / "sweep.csv")
        else:
            notes.append("empty lambda grid; sweep.csv not written")

    if clusters is not None:
        covs = list(clusters.clusters[0].covariate_means) if clusters.clusters else []
        header = ["cluster", "mean_delta", "size", "share"] + covs
        n = sum(c.size for c in clusters.clusters)
        rows = [[i, c.mean_delta, c.size, c.size / n, *(c.covariate_means[k] for k in covs)]
                for i, c in enumerate(clusters.clusters)]
        write_csv(out / "clusters.csv", header, rows)
        written.append(out / "clusters.csv")
        if clusters.flagged:
            notes.append(f"clustering flagged: {clusters.note}")

    if figures:
        from . import plotting

        written += plotting.render_all(out, comparison, sweep, clusters)

    meta = {
        "seed": config.seed,
        "config_hash": config.hash(),
        "config": config.to_dict(),
        "versions": _versions(),
        "streams": "each randomized stage uses its own generator seeded from (seed, stage, index)",
        "log_bf": {"base": "natural log", "prior": "symmetric Dirichlet",
                   "prior_concentration": config.prior_concentration, "sampling": "independent multinomial, rows fixed"},
        "notes": notes,
    }
    if clusters is not None:
        meta["clusters"] = {"k": clusters.k, "silhouette": clusters.silhouette, "flagged": clusters.flagged}
    if timestamp is not None:
        meta["timestamp"] = timestamp
    (out / "run_metadata.json").write_text(json.dumps(meta, indent=2, default=str) + "\n", encoding="utf-8")
    written.append(out / "run_metadata.json")
    return written
