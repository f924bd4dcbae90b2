"""Yearly informational novelty against the historical pool, with a bootstrap null.

For year t, the new cohort is scored by its mean k-nearest-neighbor cosine
distance to all samples from earlier years. The null baseline resamples the
historical pool (with replacement, self-matches excluded) to estimate the
novelty a merely redundant release would show; the observed/baseline ratio
near 1 flags saturation.
"""
from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import Corpus
from .geometry import mean_knn_distances
from .taxonomy import BlockTable, DEFAULT_ICD_BLOCKS, age_group, fst_group, icd_block

DEFAULT_K = 10
DEFAULT_B = 200
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class YearlyNovelty:
    year: int
    n_new: int
    nu_observed: float
    nu_baseline_mean: float
    ci_low: float
    ci_high: float
    ratio: Optional[float]  # None when the baseline mean is 0


@dataclass(frozen=True)
class NoveltyReport:
    series: list[YearlyNovelty]
    k: int
    B: int
    alpha: float
    seed: int
    n_missing_year: int
    warning: Optional[str] = None


@dataclass(frozen=True)
class GroupNovelty:
    group: str
    n_samples: int
    n_datasets: int
    mean_novelty: float


@dataclass(frozen=True)
class CoveragePoint:
    year: int
    stratum: str
    cumulative_fraction: float
    codes_seen: int


@dataclass(frozen=True)
class OrphanLabel:
    code: str
    description: Optional[str]
    n_samples: int
    first_year: int
    last_year: int


def _years(corpus: Corpus) -> np.ndarray:
    return np.array([r.year if r.year is not None else -1 for r in corpus.records], dtype=int)


def year_split(corpus: Corpus, year: int) -> tuple[np.ndarray, np.ndarray]:
    """Index sets: samples released in ``year`` and the earlier-year historical pool."""
    years = _years(corpus)
    current = np.nonzero(years == year)[0]
    pool = np.nonzero((years >= 0) & (years < year))[0]
    return current, pool


def yearly_novelty(corpus: Corpus, year: int, k: int = DEFAULT_K) -> float:
    """Mean over the year's samples of the mean distance to their k nearest pool samples."""
    current, pool = year_split(corpus, year)
    if current.size == 0:
        raise ValueError(f"no samples released in year {year}")
    if pool.size == 0:
        raise ValueError(f"no historical pool before year {year}")
    if k > pool.size:
        raise ValueError(f"k={k} exceeds pool size {pool.size} for year {year}")
    x = corpus.embeddings.values
    return float(mean_knn_distances(x[current], x[pool], k).mean())


def _draw_rng(seed: int, year: int, b: int) -> np.random.Generator:
    # one substream per (year, draw) so results are independent of series order
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(year, b)))


@dataclass(frozen=True)
class BaselineResult:
    mean: float
    ci_low: float
    ci_high: float
    draws: np.ndarray


def bootstrap_baseline(
    corpus: Corpus,
    year: int,
    k: int = DEFAULT_K,
    B: int = DEFAULT_B,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
) -> BaselineResult:
    """Null-novelty distribution: pool points resampled with replacement, self-matches excluded.

    A pool point's score does not depend on the draw, so each point is scored
    once (k nearest pool neighbors besides itself) and the B draws average
    resampled precomputed scores.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    current, pool = year_split(corpus, year)
    if pool.size < 2:
        raise ValueError(f"historical pool before {year} must hold >= 2 samples")
    if k + 1 > pool.size:
        raise ValueError(f"k={k} needs pool size >= k+1={k + 1}, got {pool.size}")
    n_draw = max(int(current.size), 1)
    x = corpus.embeddings.values[pool]
    pool_scores = mean_knn_distances(x, x, k, exclude_self_indices=np.arange(pool.size))
    draws = np.empty(B, dtype=np.float64)
    for b in range(B):
        rng = _draw_rng(seed, year, b)
        idx = rng.integers(0, pool.size, size=n_draw)
        draws[b] = pool_scores[idx].mean()
    lo, hi = np.quantile(draws, [alpha / 2.0, 1.0 - alpha / 2.0])
    return BaselineResult(mean=float(draws.mean()), ci_low=float(lo), ci_high=float(hi), draws=draws)


def novelty_series(
    corpus: Corpus,
    k: int = DEFAULT_K,
    B: int = DEFAULT_B,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
) -> NoveltyReport:
    """Per-year novelty with bootstrap baseline, years ascending; first year has no pool."""
    years = _years(corpus)
    n_missing = int((years < 0).sum())
    distinct = sorted(int(y) for y in np.unique(years[years >= 0]))
    series: list[YearlyNovelty] = []
    warning = None
    if len(distinct) < 2:
        warning = "corpus spans fewer than two release years; novelty series is empty"
        warnings.warn(warning)
        return NoveltyReport([], k, B, alpha, seed, n_missing, warning)
    for year in distinct[1:]:
        current, pool = year_split(corpus, year)
        if current.size == 0 or pool.size < k + 1:
            continue
        nu = yearly_novelty(corpus, year, k)
        base = bootstrap_baseline(corpus, year, k=k, B=B, alpha=alpha, seed=seed)
        ratio = nu / base.mean if base.mean > 0 else None
        series.append(
            YearlyNovelty(
                year=year,
                n_new=int(current.size),
                nu_observed=nu,
                nu_baseline_mean=base.mean,
                ci_low=base.ci_low,
                ci_high=base.ci_high,
                ratio=ratio,
            )
        )
    return NoveltyReport(series, k, B, alpha, seed, n_missing, warning)


_DERIVED_FIELDS = ("icd_block", "fst_group", "age_group")


def _group_value(record, group_field: str, blocks: BlockTable) -> Optional[str]:
    if group_field == "icd_block":
        return icd_block(record.icd, blocks)
    if group_field == "fst_group":
        return fst_group(record.fst)
    if group_field == "age_group":
        return age_group(record.age)
    value = getattr(record, group_field)
    return None if value is None else str(value)


def per_sample_novelty(corpus: Corpus, k: int = DEFAULT_K) -> dict[int, float]:
    """Novelty score per sample index, scored against its own year's historical pool.

    Samples whose year is absent, first in the corpus, or whose pool holds
    fewer than k members are unscoreable and omitted.
    """
    years = _years(corpus)
    scores: dict[int, float] = {}
    x = corpus.embeddings.values
    for year in sorted(int(y) for y in np.unique(years[years >= 0])):
        current, pool = year_split(corpus, year)
        if current.size == 0 or pool.size < k:
            continue
        vals = mean_knn_distances(x[current], x[pool], k)
        for idx, v in zip(current, vals):
            scores[int(idx)] = float(v)
    return scores


def grouped_novelty(
    corpus: Corpus,
    group_field: str,
    k: int = DEFAULT_K,
    blocks: BlockTable = DEFAULT_ICD_BLOCKS,
) -> list[GroupNovelty]:
    """Mean per-sample novelty by metadata group, with group prevalence counts.

    ``group_field`` may be a raw metadata field or one of the derived
    groupings (icd_block, fst_group, age_group). Groups with no scoreable
    samples are omitted; ordering is by prevalence descending, then name.
    """
    from .corpus import OPTIONAL_FIELDS

    valid = OPTIONAL_FIELDS + _DERIVED_FIELDS
    if group_field not in valid:
        raise ValueError(f"unknown group field {group_field!r}; valid fields: " + ", ".join(valid))
    scores = per_sample_novelty(corpus, k)
    members: dict[str, list[int]] = defaultdict(list)
    for i, record in enumerate(corpus.records):
        g = _group_value(record, group_field, blocks)
        if g is not None:
            members[g].append(i)
    out: list[GroupNovelty] = []
    for group, idxs in members.items():
        scored = [scores[i] for i in idxs if i in scores]
        if not scored:
            continue
        datasets = {corpus.records[i].dataset for i in idxs}
        out.append(
            GroupNovelty(
                group=group,
                n_samples=len(idxs),
                n_datasets=len(datasets),
                mean_novelty=float(np.mean(scored)),
            )
        )
    out.sort(key=lambda g: (-g.n_samples, g.group))
    return out


def cumulative_coverage(
    corpus: Corpus,
    code_field: str = "icd",
    stratify_field: Optional[str] = None,
    blocks: BlockTable = DEFAULT_ICD_BLOCKS,
) -> list[CoveragePoint]:
    """Cumulative fraction of the global code universe seen per stratum and year.

    The universe is stratum-agnostic: every code carried by a dated record.
    An "all" stratum is always emitted; strata curves are evaluated on the
    global year grid so they align, and are non-decreasing by construction.
    """
    dated: list[tuple[int, str, Optional[str]]] = []
    for r in corpus.records:
        code = getattr(r, code_field) if code_field not in _DERIVED_FIELDS else _group_value(r, code_field, blocks)
        if code is None or r.year is None:
            continue
        stratum = _group_value(r, stratify_field, blocks) if stratify_field else None
        dated.append((r.year, str(code), stratum))
    if not dated:
        raise ValueError(f"no dated records carry {code_field!r}")
    universe = {code for _, code, _ in dated}
    years = sorted({y for y, _, _ in dated})
    strata: dict[str, list[tuple[int, str]]] = defaultdict(list)
    for year, code, stratum in dated:
        strata["all"].append((year, code))
        if stratum is not None:
            strata[stratum].append((year, code))
    points: list[CoveragePoint] = []
    for stratum in sorted(strata):
        seen: set[str] = set()
        rows = sorted(strata[stratum])
        j = 0
        for year in years:
            while j < len(rows) and rows[j][0] <= year:
                seen.add(rows[j][1])
                j += 1
            points.append(
                CoveragePoint(
                    year=year,
                    stratum=stratum,
                    cumulative_fraction=len(seen) / len(universe),
                    codes_seen=len(seen),
                )
            )
    return points


def orphan_labels(
    corpus: Corpus,
    code_field: str = "icd",
    last_seen_before: Optional[int] = None,
    descriptions: Optional[dict[str, str]] = None,
) -> list[OrphanLabel]:
    """Codes whose dated presence ends before the cutoff (default: the latest corpus year)."""
    by_code: dict[str, list[int]] = defaultdict(list)
    for r in corpus.records:
        code = getattr(r, code_field)
        if code is None or r.year is None:
            continue
        by_code[str(code)].append(r.year)
    if not by_code:
        return []
    if last_seen_before is None:
        last_seen_before = max(max(v) for v in by_code.values())
    out: list[OrphanLabel] = []
    for code, years in by_code.items():
        last = max(years)
        if last < last_seen_before:
            out.append(
                OrphanLabel(
                    code=code,
                    description=(descriptions or {}).get(code),
                    n_samples=len(years),
                    first_year=min(years),
                    last_year=last,
                )
            )
    out.sort(key=lambda o: (-o.last_year, -o.n_samples, o.code))
    return out
