"""File-based pipeline: preprocess, select features, check assumptions, run.

Each stage reads the previous stage's artifacts from the output directory,
so stages can be rerun independently. Artifacts carry no timestamps and
floats are written with ``repr``; identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import estimation as est
from .discovery import DiscoveryConfig, derive_seed, direct_lingam, rcd_discover
from .errors import BudgetError, ConfigError, DataError, DegenerateError, IdentificationError
from .graph import CausalGraph, minimal_backdoor_sets
from .regression import alpha_grid, cv_best_alpha, cv_one_se_alpha, cv_rmse
from .selection import inject_probes, probe_cutoff, rank_features
from .stats_tests import (
    correlation_matrix,
    residual_independence_matrix,
    shapiro_wilk,
    write_labeled_matrix,
)
from .tabular import (
    NOMINAL,
    ORDINAL,
    DEFAULT_MISSING_TOKENS,
    EncodingPlan,
    NumericMatrix,
    Table,
    constant_columns,
    encode,
    impute,
    load_csv,
    standardize,
)

log = logging.getLogger("lingamkit")

ALGORITHMS = ("direct_lingam", "rcd")
ALPHA_RULES = ("one_se", "min")

# artifact file names
CLEANED = "cleaned.csv"
ENCODED = "encoded.csv"
PREPROCESS_LOG = "preprocess_log.txt"
CV_SCORES = "cv_scores.csv"
RANKING = "ranking.csv"
TOP20 = "top20.csv"
SELECTED = "selected.txt"
SELECTION_LOG = "selection_log.txt"
SHAPIRO = "shapiro.csv"
CORRELATION = "correlation.csv"
PVALUES = "pvalues.csv"
ASSUMPTIONS = "assumptions.md"
GRAPH_DOT = "graph.dot"
DISCOVERY_JSON = "discovery.json"
EDGES = "edges.csv"
EFFECTS_CSV = "effects.csv"
EFFECTS_MD = "effects.md"
REFUTATIONS_CSV = "refutations.csv"
REFUTATIONS_MD = "refutations.md"
REPORT = "report.md"


def _split_list(text: str) -> tuple:
    return tuple(s.strip() for s in text.split(",") if s.strip())


@dataclass(frozen=True)
class PipelineConfig:
    input: str = ""
    target: str = ""
    outcome: str = ""  # empty: the target
    treatments: tuple = ()  # empty: discovered parents of the outcome
    drop: tuple = ()  # dropped as irrelevant
    drop_redundant: tuple = ()
    nominal: tuple = ()  # numeric-looking columns to treat as categories
    ordinal: dict = field(default_factory=dict)  # column -> ordered levels
    missing_tokens: tuple = DEFAULT_MISSING_TOKENS
    probes: int = 5
    runs: int = 5
    alphas: tuple = ()  # empty: log grid below alpha_max
    n_alphas: int = 30
    alpha_rule: str = "one_se"
    cv_folds: int = 5
    algorithm: str = "direct_lingam"
    independence_threshold: float = 0.01
    normality_threshold: float = 0.05
    permutations: int = 199
    repetitions: int = 100
    subset_fraction: float = 0.8
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        algo = self.algorithm.replace("-", "_")
        object.__setattr__(self, "algorithm", algo)
        if algo not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.alpha_rule not in ALPHA_RULES:
            raise ConfigError(f"alpha_rule must be one of {ALPHA_RULES}")
        if self.target and self.target in self.drop + self.drop_redundant:
            raise ConfigError(f"target {self.target!r} is in the drop list")
        if self.probes < 1 or self.runs < 1 or self.n_alphas < 1:
            raise ConfigError("probes, runs and n_alphas must be positive")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if any(a < 0 for a in self.alphas):
            raise ConfigError("alphas must be non-negative")
        if not 0 < self.independence_threshold < 1 or not 0 < self.normality_threshold < 1:
            raise ConfigError("thresholds must lie in (0, 1)")
        if self.permutations < 99:
            raise ConfigError("permutations must be >= 99")
        if self.repetitions < est.MIN_REPETITIONS:
            raise ConfigError(f"repetitions must be >= {est.MIN_REPETITIONS}")
        if not 0 < self.subset_fraction < 1:
            raise ConfigError("subset_fraction must lie in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def effect_outcome(self) -> str:
        return self.outcome or self.target

    def require(self, *keys) -> None:
        missing = [k for k in keys if not getattr(self, k)]
        if missing:
            raise ConfigError(f"missing required config keys {missing}")


_LIST_KEYS = {"treatments", "drop", "drop_redundant", "nominal", "missing_tokens"}


def _check_key(key: str) -> str:
    kinds = {f.name: f.type for f in fields(PipelineConfig)}
    if key not in kinds or key == "ordinal":
        raise ConfigError(f"unknown config key {key!r}")
    return kinds[key]


def _convert(key: str, raw: str):
    t = _check_key(key)
    try:
        if key in _LIST_KEYS:
            return _split_list(raw)
        if key == "alphas":
            return tuple(float(a) for a in _split_list(raw))
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}") from None
    return raw.strip()


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` comments; ``ordinal.<column> = L1,L2``."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Merge raw string settings; overrides win over file values, which win over defaults."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    kwargs, ordinal = {}, {}
    for key, raw in merged.items():
        if key.startswith("ordinal."):
            ordinal[key[len("ordinal."):]] = _split_list(str(raw))
        elif isinstance(raw, str):
            kwargs[key] = _convert(key, raw)
        else:
            _check_key(key)
            kwargs[key] = raw
    if ordinal:
        kwargs["ordinal"] = ordinal
    return PipelineConfig(**kwargs)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} not found")
        values = parse_config_text(p.read_text(encoding="utf-8"), str(path))
    return build_config(values, overrides)


# -- helpers ---------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _artifact(cfg: PipelineConfig, name: str, stage: str) -> Path:
    p = cfg.out_dir / name
    if not p.is_file():
        raise ConfigError(f"{p} not found; run `{stage}` first")
    return p


def _csv_rows(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_header(path: str) -> list:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"input file {path} not found")
    with open(p, newline="", encoding="utf-8") as fh:
        try:
            return next(csv.reader(fh))
        except StopIteration:
            raise DataError(f"{path}: empty file") from None


def _encoded(cfg: PipelineConfig) -> NumericMatrix:
    return NumericMatrix.from_csv(_artifact(cfg, ENCODED, "preprocess"))


def _selected(cfg: PipelineConfig) -> list:
    text = _artifact(cfg, SELECTED, "select-features").read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def analysis_variables(cfg: PipelineConfig, m: NumericMatrix) -> list:
    """Selected features plus the target, outcome and any explicit treatments."""
    names = list(_selected(cfg))
    for extra in (cfg.target, cfg.effect_outcome, *cfg.treatments):
        if extra and extra not in names:
            names.append(extra)
    unknown = [n for n in names if n not in m.column_names]
    if unknown:
        raise ConfigError(f"columns {unknown} are not in the encoded matrix")
    return names


# -- stages ----------------------------------------------------------------


def cmd_preprocess(cfg: PipelineConfig) -> dict:
    """Load, impute and encode; drop constant encoded columns. Writes cleaned/encoded CSVs and a log."""
    cfg.require("input", "target")
    header = _read_header(cfg.input)
    referenced = [cfg.target, *cfg.drop, *cfg.drop_redundant, *cfg.nominal, *cfg.ordinal]
    unknown = sorted({c for c in referenced if c not in header})
    if unknown:
        raise ConfigError(f"config refers to columns not in {cfg.input}: {unknown}")
    hints = {c: NOMINAL for c in cfg.nominal}
    hints.update({c: ORDINAL for c in cfg.ordinal})
    table = load_csv(cfg.input, hints, cfg.missing_tokens, cfg.ordinal)
    lines = [f"input: {cfg.input}", f"rows: {table.row_count}", f"columns: {len(table.columns)}"]
    drop = {c: "irrelevant" for c in cfg.drop}
    drop.update({c: "redundant" for c in cfg.drop_redundant})
    for c in table.columns:
        if c.name in drop:
            lines.append(f"drop {c.name}: {drop[c.name]}")
    for c in table.columns:
        if c.n_missing and c.name not in drop:
            how = "mean" if c.kind == "numeric" else "mode"
            lines.append(f"impute {c.name}: {c.n_missing} {how}-imputation{'s' if c.n_missing > 1 else ''}")
    kept = Table(tuple(c for c in table.columns if c.name not in drop))
    cleaned = impute(kept)
    plan = EncodingPlan.default(cleaned)
    for c in cleaned.columns:
        if c.kind == NOMINAL:
            lines.append(f"one-hot {c.name}: {len(plan[c.name].categories)} categories")
        elif c.kind == ORDINAL:
            lines.append(f"ordinal {c.name}: {' < '.join(map(str, c.levels))}")
    m = encode(cleaned, plan)
    if cfg.target not in m.column_names:
        raise DataError(f"target {cfg.target!r} is not numeric or ordinal after encoding")
    const = constant_columns(m)
    if cfg.target in const:
        raise DataError(f"target {cfg.target!r} is constant")
    for c in const:
        lines.append(f"drop {c}: constant after encoding")
    m = m.drop(const)
    lines.append(f"encoded: {m.n_rows} rows x {m.n_cols} columns")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    cleaned.to_csv(cfg.out_dir / CLEANED)
    m.to_csv(cfg.out_dir / ENCODED)
    _write(cfg.out_dir / PREPROCESS_LOG, "\n".join(lines) + "\n")
    return {"table": cleaned, "matrix": m, "log": lines}


def choose_alpha(cfg: PipelineConfig, X: NumericMatrix, y) -> tuple:
    """Alpha by k-fold CV over the configured or automatic grid; returns (alpha, grid, rmse)."""
    grid = list(cfg.alphas) or alpha_grid(X, y, cfg.n_alphas)
    rmse = cv_rmse(X, y, grid, cfg.cv_folds, cfg.seed)
    pick = cv_one_se_alpha if cfg.alpha_rule == "one_se" else cv_best_alpha
    return pick(X, y, grid, cfg.cv_folds, cfg.seed), grid, rmse


def cmd_select(cfg: PipelineConfig) -> dict:
    """Probe-guarded Lasso ranking of all encoded features against the target."""
    cfg.require("target")
    m = _encoded(cfg)
    features = [n for n in m.column_names if n != cfg.target]
    y = m.column(cfg.target)
    lines = [f"target: {cfg.target}", f"features: {len(features)}"]
    if not features:
        raise DataError("no candidate features besides the target")
    X = standardize(m.select(features))
    Xp = inject_probes(X, cfg.probes, cfg.seed)
    alpha, grid, rmse = choose_alpha(cfg, Xp, y)
    _write(cfg.out_dir / CV_SCORES, _csv_rows(["alpha", "rmse"], [(repr(float(a)), repr(float(r))) for a, r in zip(grid, rmse)]))
    ranking = rank_features(Xp, y, alpha, cfg.runs, cfg.seed)
    selected = probe_cutoff(ranking)
    lines += [f"alpha ({cfg.alpha_rule}): {alpha!r}", f"probes: {cfg.probes}", f"runs: {cfg.runs}"]
    lines.append(f"selected: {len(selected)}")
    if not selected:
        msg = "no feature beats the strongest random probe; selection is empty"
        log.warning(msg)
        lines.append(f"warning: {msg}")
    ranking.to_csv(cfg.out_dir / RANKING)
    ranking.bar_data(path=cfg.out_dir / TOP20)
    _write(cfg.out_dir / SELECTED, "".join(f"{s}\n" for s in selected))
    _write(cfg.out_dir / SELECTION_LOG, "\n".join(lines) + "\n")
    return {"ranking": ranking, "selected": selected, "alpha": alpha}


def cmd_check(cfg: PipelineConfig) -> dict:
    """Normality, correlation and residual-independence checks with an algorithm recommendation."""
    m = _encoded(cfg)
    names = analysis_variables(cfg, m)
    Z = standardize(m.select(names))
    sw = [shapiro_wilk(Z.column(n), derive_seed(cfg.seed, k)) for k, n in enumerate(names)]
    rows = [
        (n, repr(r.statistic), repr(r.p_value), "true" if r.p_value > cfg.normality_threshold else "false",
         "true" if r.subsampled else "false")
        for n, r in zip(names, sw)
    ]
    _write(cfg.out_dir / SHAPIRO, _csv_rows(["variable", "W", "p_value", "gaussian", "subsampled"], rows))
    write_labeled_matrix(names, correlation_matrix(Z), cfg.out_dir / CORRELATION)
    gaussian = [n for n, r in zip(names, sw) if r.p_value > cfg.normality_threshold]

    failing = []
    if len(names) >= 2:
        pm = residual_independence_matrix(Z, cfg.permutations, cfg.seed)
        pm.to_csv(cfg.out_dir / PVALUES)
        # one failing direction is expected (the anti-causal regression); a pair
        # failing both ways has no independent-residual direction, the latent signature
        k = len(names)
        failing = [
            (names[i], names[j], float(pm.values[i, j]), float(pm.values[j, i]))
            for i in range(k)
            for j in range(i + 1, k)
            if max(pm.values[i, j], pm.values[j, i]) <= cfg.independence_threshold
        ]
    else:
        write_labeled_matrix(names, np.ones((1, 1)), cfg.out_dir / PVALUES)
    recommendation = "rcd" if failing else "direct_lingam"

    md = ["# Assumption checks", "", f"Variables: {', '.join(names)}", ""]
    md.append(f"## Non-Gaussianity (Shapiro-Wilk, threshold {cfg.normality_threshold})")
    md.append("")
    if gaussian:
        md.append(f"Gaussian-looking variables (violate the non-Gaussian noise assumption): {', '.join(gaussian)}")
    else:
        md.append("All variables reject normality.")
    md += ["", f"## Residual independence (threshold {cfg.independence_threshold})", ""]
    if len(names) < 2:
        md.append("Fewer than two variables; no pairwise tests.")
    elif failing:
        md.append(f"{len(failing)} of {len(names) * (len(names) - 1) // 2} pairs show dependent residuals in both directions:")
        md.append("")
        md += [f"- {a}, {b}: p = {p:.4f} ({a} regressor), {q:.4f} ({b} regressor)" for a, b, p, q in failing]
    else:
        md.append("Every pair has a regression direction with independent residuals.")
    md += ["", f"recommendation: {recommendation}", ""]
    _write(cfg.out_dir / ASSUMPTIONS, "\n".join(md))
    return {"recommendation": recommendation, "gaussian": gaussian, "failing": failing}


def _discover(cfg: PipelineConfig, Z: NumericMatrix):
    dcfg = DiscoveryConfig(
        permutations=cfg.permutations, alpha_ind=cfg.independence_threshold, seed=cfg.seed
    )
    return (rcd_discover if cfg.algorithm == "rcd" else direct_lingam)(Z, dcfg)


def cmd_run(cfg: PipelineConfig) -> dict:
    """Discovery, backdoor identification, effect estimation and refutation."""
    m = _encoded(cfg)
    names = analysis_variables(cfg, m)
    outcome = cfg.effect_outcome
    raw = m.select(names)
    if len(names) >= 2:
        result = _discover(cfg, standardize(raw))
        g = result.to_graph()
        _write(cfg.out_dir / DISCOVERY_JSON, result.to_json())
        order = [names[i] for i in result.order]
    else:
        result = None
        g = CausalGraph(names)
        order = list(names)
        _write(cfg.out_dir / DISCOVERY_JSON, "{}\n")
    _write(cfg.out_dir / GRAPH_DOT, g.to_dot())
    edge_rows = [(u, v, f"{w:.4f}") for (u, v), w in sorted(g.directed.items())]
    _write(cfg.out_dir / EDGES, _csv_rows(["from", "to", "weight"], edge_rows))

    treatments = list(cfg.treatments) or sorted(g.parents(outcome), key=order.index)
    effects, refuted, notes = [], [], []
    for k, t in enumerate(treatments):
        try:
            sets = minimal_backdoor_sets(g, t, outcome)
            if not sets:
                raise IdentificationError(f"no backdoor adjustment set for {t} -> {outcome}")
            e = est.estimate_ate(raw, g, t, outcome, sorted(sets[0]))
        except (IdentificationError, DegenerateError, BudgetError) as exc:
            effects.append((t, outcome, str(exc)))
            notes.append(f"{t} -> {outcome}: unidentifiable ({exc})")
            continue
        effects.append(e)
        refuted.append((e, est.refute_all(raw, g, e, cfg.repetitions, derive_seed(cfg.seed, k), cfg.subset_fraction)))

    est.effects_csv(effects, cfg.out_dir / EFFECTS_CSV)
    est.effects_markdown(effects, cfg.out_dir / EFFECTS_MD)
    est.refutations_csv(refuted, cfg.out_dir / REFUTATIONS_CSV)
    est.refutations_markdown(refuted, cfg.out_dir / REFUTATIONS_MD)

    md = ["# Causal analysis report", "", f"Algorithm: {cfg.algorithm}", f"Outcome: {outcome}"]
    md += [f"Variables: {', '.join(names)}", f"Causal order: {' < '.join(order)}", ""]
    md += ["## Graph", "", "| From | To | Weight (standardized) |", "|---|---|---|"]
    md += [f"| {u} | {v} | {w} |" for u, v, w in edge_rows]
    if g.bidirected:
        pairs = sorted(" <-> ".join(sorted(p)) for p in g.bidirected)
        md += ["", "Latent confounding (bi-directed): " + ", ".join(pairs)]
    md += ["", "## Effects (raw units)", "", est.effects_markdown(effects).rstrip()]
    md += ["", "## Refutations", "", est.refutations_markdown(refuted).rstrip()]
    if notes:
        md += ["", "## Notes", ""] + [f"- {n}" for n in notes]
    if result is not None and result.diagnostics.get("converged") is False:
        md += ["", "- pairwise decisions did not reach a fixed point; unresolved pairs reported as bi-directed"]
    _write(cfg.out_dir / REPORT, "\n".join(md) + "\n")
    return {"result": result, "graph": g, "effects": effects, "refutations": refuted}


def run_all(cfg: PipelineConfig) -> dict:
    out = {"preprocess": cmd_preprocess(cfg)}
    out["select"] = cmd_select(cfg)
    out["check"] = cmd_check(cfg)
    out["run"] = cmd_run(cfg)
    return out
