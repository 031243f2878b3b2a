"""Two-layer glucose predictor and the patient-split experiment loop.

Layer one routes training windows into hypo/eu/hyper clusters by a
5-minute filtered-Legendre forecast and fits one diffusion-geometry
predictor per cluster plus a judge on all training windows. Layer two
picks, per point, the cluster predictor with the best PRED-EGA verdict
against the judge.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import baselines, diffusion, legendre, predega
from .config import ExperimentConfig
from .data import CgmSeries, PatientSplit, SampleWindow, split_patients, windows_for_series
from .predega import PredEgaReport, ZoneTables

logger = logging.getLogger(__name__)

CLUSTERS = ("o", "e", "r")
ROUTING_HORIZON = 5.0  # minutes
ROUTE_BOUNDS = (70.0, 180.0)
ROUTE_CLAMP = (0.0, 450.0)


class TrialError(RuntimeError):
    pass


@dataclass(frozen=True)
class PreparedData:
    """Everything about a cohort that does not depend on the patient split."""

    windows: tuple[SampleWindow, ...]
    points: np.ndarray
    targets: np.ndarray  # training targets, smoothed when smoothing is on
    reference: np.ndarray  # raw readings for evaluation
    times: np.ndarray  # target times, minutes
    patients: np.ndarray
    segments: np.ndarray  # integer key per (patient, segment)
    routing: np.ndarray  # 5-minute forecasts L
    model: diffusion.DiffusionModel
    config: ExperimentConfig

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def patient_ids(self) -> list[str]:
        return sorted(set(self.patients.tolist()))


def prepare(series: Sequence[CgmSeries], config: ExperimentConfig,
            model: diffusion.DiffusionModel | None = None) -> PreparedData:
    ids = {s.patient_id for s in series}
    if len(ids) < 2:
        raise TrialError(f"need at least 2 patients, got {len(ids)}")
    raw = windows_for_series(series, config.d, config.m, config.gap_slack)
    if config.smoothing_enabled:
        used = windows_for_series(series, config.d, config.m, config.gap_slack, config.smoothing_cutoff)
    else:
        used = raw
    if len(used) < 2:
        raise TrialError("fewer than 2 windows after segmentation")
    points = np.array([w.x for w in used], dtype=np.float64)
    seg_keys: dict[tuple, int] = {}
    segments = np.array([seg_keys.setdefault((w.patient_id, w.segment), len(seg_keys)) for w in used])
    if model is None:
        cloud = diffusion.PointCloud(points)
        model = diffusion.build_diffusion_model(
            cloud,
            epsilon=config.diffusion_epsilon,
            mode=config.diffusion_mode,
            k_max=min(config.diffusion_k_max, len(used)),
            seed=config.seed,
        )
    elif model.n_points != len(used):
        raise TrialError("supplied diffusion model does not match the cohort's windows")
    routing = legendre.linear_predict_batch(used, ROUTING_HORIZON, config.legendre_kappa_max)
    return PreparedData(
        windows=tuple(used),
        points=points,
        targets=np.array([w.y for w in used]),
        reference=np.array([w.y for w in raw]),
        times=np.array([w.t_target for w in used]),
        patients=np.array([w.patient_id for w in used]),
        segments=segments,
        routing=routing,
        model=model,
        config=config,
    )


@dataclass(frozen=True)
class ClusterAssignment:
    train_ids: np.ndarray
    clusters: np.ndarray  # 'o' | 'e' | 'r' per training id
    forecasts: np.ndarray

    def members(self, cluster: str) -> np.ndarray:
        return self.train_ids[self.clusters == cluster]


def route(forecast: float) -> str:
    """Cluster for one 5-minute forecast; out-of-range values are clamped first."""
    L = min(max(forecast, ROUTE_CLAMP[0]), ROUTE_CLAMP[1])
    if L <= ROUTE_BOUNDS[0]:
        return "o"
    if L <= ROUTE_BOUNDS[1]:
        return "e"
    return "r"


def cluster_training(train_ids, forecasts) -> ClusterAssignment:
    ids = np.asarray(train_ids, dtype=np.intp)
    if ids.size == 0:
        raise TrialError("empty training set")
    L = np.clip(np.asarray(forecasts, dtype=np.float64), *ROUTE_CLAMP)
    clusters = np.where(L <= ROUTE_BOUNDS[0], "o", np.where(L <= ROUTE_BOUNDS[1], "e", "r"))
    return ClusterAssignment(ids, clusters, np.asarray(forecasts, dtype=np.float64))


@dataclass(frozen=True)
class ClusterPredictors:
    values: dict  # 'o' | 'e' | 'r' | 'J' -> array over all points
    fits: dict  # same keys -> SummabilityWeights, or None for a fallback copy of 'J'

    def stacked(self) -> np.ndarray:
        return np.vstack([self.values[c] for c in CLUSTERS])


def fit_layer1(model: diffusion.DiffusionModel, assignment: ClusterAssignment, targets,
               kappa_max: float = diffusion.DEFAULT_KAPPA_MAX, k_max: int | None = None) -> ClusterPredictors:
    y = np.asarray(targets, dtype=np.float64)

    def fit(ids):
        sw = diffusion.solve_summability_weights(model, ids, kappa_max, k_max)
        return sw, diffusion.evaluate_sigma(model, sw, y[ids])

    sw_j, f_j = fit(assignment.train_ids)
    values, fits = {"J": f_j}, {"J": sw_j}
    for c in CLUSTERS:
        ids = assignment.members(c)
        if ids.size:
            fits[c], values[c] = fit(ids)
        else:
            fits[c], values[c] = None, f_j.copy()
    return ClusterPredictors(values, fits)


@dataclass(frozen=True)
class JudgeSelection:
    values: np.ndarray
    choice: np.ndarray  # index into CLUSTERS
    verdicts: np.ndarray  # [cluster, point] verdict vs the judge
    interior: np.ndarray  # rate defined on both sides


def judge_select(predictors: ClusterPredictors, times, segments=None, tables: ZoneTables | None = None,
                 denominator_factor: float = predega.DEFAULT_DENOMINATOR_FACTOR) -> JudgeSelection:
    """Per point, the cluster output with the best verdict against the judge.

    Ties go to the value nearest the judge, then to the order o < e < r.
    Where no central rate exists, only the distance rule applies.
    """
    f_j = np.asarray(predictors.values["J"], dtype=np.float64)
    stacked = predictors.stacked()
    verdicts = np.empty(stacked.shape, dtype=np.int8)
    interior = None
    for i, f in enumerate(stacked):
        c = predega.classify_sequence(f, f_j, times, tables, segments, denominator_factor)
        verdicts[i] = c.verdicts
        interior = c.rate_zones >= 0
    dist = np.abs(stacked - f_j[None, :])
    best = np.where(interior, verdicts.max(axis=0), 0)
    eligible = np.where(interior[None, :], verdicts == best[None, :], True)
    choice = np.argmin(np.where(eligible, dist, np.inf), axis=0)
    values = stacked[choice, np.arange(stacked.shape[1])]
    return JudgeSelection(values, choice, verdicts, interior)


@dataclass(frozen=True)
class TrialResult:
    seed: int
    split: PatientSplit
    report: PredEgaReport
    predictions: np.ndarray
    eval_mask: np.ndarray = field(repr=False)
    method: str = "deep"
    k_used: dict = field(default_factory=dict)
    predictors: ClusterPredictors | None = field(default=None, repr=False)
    selection: JudgeSelection | None = field(default=None, repr=False)
    cluster_sizes: dict = field(default_factory=dict)

    def to_dict(self, include_predictions: bool = False) -> dict:
        out = {
            "seed": self.seed,
            "method": self.method,
            "split": {
                "train_ids": sorted(self.split.train_ids),
                "test_ids": sorted(self.split.test_ids),
                "train_percent": self.split.fraction,
            },
            "k_used": dict(self.k_used),
            "cluster_sizes": dict(self.cluster_sizes),
            "report": self.report.to_dict(),
        }
        if include_predictions:
            out["predictions"] = [float(v) for v in self.predictions]
        return out


def _split_and_mask(data: PreparedData, seed: int):
    split = split_patients(data.patient_ids, data.config.train_percent, seed)
    train_mask = np.isin(data.patients, sorted(split.train_ids))
    eval_mask = ~train_mask if data.config.eval_test_only else np.ones(data.n_points, dtype=bool)
    return split, train_mask, eval_mask


def run_trial(data: PreparedData | Sequence[CgmSeries], config: ExperimentConfig | None = None,
              seed: int | None = None, tables: ZoneTables | None = None,
              keep_details: bool = False) -> TrialResult:
    """One split: cluster routing, layer-1 fits, judge selection and PRED-EGA scoring."""
    if not isinstance(data, PreparedData):
        data = prepare(data, config or ExperimentConfig())
    cfg = data.config
    seed = cfg.seed if seed is None else seed
    try:
        split, train_mask, eval_mask = _split_and_mask(data, seed)
        train_ids = np.flatnonzero(train_mask)
        if train_ids.size == 0:
            raise TrialError("training patients contributed no windows")
        assignment = cluster_training(train_ids, data.routing[train_ids])
        predictors = fit_layer1(data.model, assignment, data.targets, cfg.diffusion_kappa_max,
                                cfg.diffusion_k_max)
        selection = judge_select(predictors, data.times, data.segments, tables, cfg.rate_denominator_factor)
        report = predega.score_sequence(selection.values, data.reference, data.times, tables,
                                        data.segments, cfg.rate_denominator_factor, eval_mask)
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        raise TrialError(f"trial with seed {seed} failed: {exc}") from exc
    k_used = {c: (sw.k_used if sw is not None else 0) for c, sw in predictors.fits.items()}
    sizes = {c: int(assignment.members(c).size) for c in CLUSTERS}
    return TrialResult(
        seed=seed, split=split, report=report, predictions=selection.values, eval_mask=eval_mask,
        method="deep", k_used=k_used, cluster_sizes=sizes,
        predictors=predictors if keep_details else None,
        selection=selection if keep_details else None,
    )


def run_krr_trial(data: PreparedData, seed: int | None = None, tables: ZoneTables | None = None) -> TrialResult:
    """Kernel ridge baseline on the same split, training data and scoring path."""
    cfg = data.config
    seed = cfg.seed if seed is None else seed
    try:
        split, train_mask, eval_mask = _split_and_mask(data, seed)
        model = baselines.krr_fit(data.points[train_mask], data.targets[train_mask],
                                  cfg.krr_sigma, cfg.krr_gamma, cfg.krr_scale_by_m)
        pred = baselines.krr_predict(model, data.points)
        report = predega.score_sequence(pred, data.reference, data.times, tables, data.segments,
                                        cfg.rate_denominator_factor, eval_mask)
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        raise TrialError(f"baseline trial with seed {seed} failed: {exc}") from exc
    return TrialResult(seed=seed, split=split, report=report, predictions=pred, eval_mask=eval_mask,
                       method="tikhonov")


@dataclass(frozen=True)
class ExperimentResult:
    report: PredEgaReport
    trials: tuple[TrialResult, ...]
    method: str = "deep"

    @property
    def seeds(self) -> list[int]:
        return [t.seed for t in self.trials]


def run_experiment(data: PreparedData | Sequence[CgmSeries], config: ExperimentConfig | None = None,
                   trials: int | None = None, base_seed: int | None = None,
                   tables: ZoneTables | None = None, method: str = "deep",
                   workers: int | None = None, seeds: Sequence[int] | None = None) -> ExperimentResult:
    """``trials`` splits with seeds ``base_seed .. base_seed + trials - 1``; counts are pooled."""
    if not isinstance(data, PreparedData):
        data = prepare(data, config or ExperimentConfig())
    cfg = data.config
    n = cfg.trials if trials is None else trials
    base = cfg.seed if base_seed is None else base_seed
    if seeds is None:
        if n < 1:
            raise ValueError("need at least one trial")
        seeds = [base + i for i in range(n)]
    runner = {"deep": run_trial, "tikhonov": run_krr_trial}[method]

    def one(seed):
        return runner(data, seed=seed, tables=tables)

    n_workers = cfg.workers if workers is None else workers
    if n_workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    for r in results:
        if r.k_used:
            logger.debug("seed %d k_used %s", r.seed, r.k_used)
    return ExperimentResult(PredEgaReport.pooled([r.report for r in results]), tuple(results), method)
