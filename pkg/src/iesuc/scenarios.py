"""Wind scenarios: ARMA(1,1) forecast errors, k-means reduction, power curve."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from sklearn.cluster import KMeans

from .network import HORIZON, IesNetwork, WindFarm


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ArmaParams:
    alpha: float
    beta: float
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if abs(self.alpha) >= 1:
            raise ScenarioError(f"ARMA(1,1) is not stationary for |alpha| = {abs(self.alpha)} >= 1")
        if self.sigma < 0:
            raise ScenarioError("sigma must be >= 0")

    def stationary_variance(self) -> float:
        a, b = self.alpha, self.beta
        return self.sigma**2 * (1 + b * b + 2 * a * b) / (1 - a * a)


def simulate_error_paths(p: ArmaParams, n_paths: int, horizon: int = HORIZON,
                         stream: int = 0) -> np.ndarray:
    """Forecast-error paths ``e[t] = alpha e[t-1] + beta xi[t-1] + xi[t]``, ``e[0] = xi[0] = 0``.

    Path ``i`` draws its noise from a generator seeded with ``(seed, stream, i)``,
    so any subset of paths can be regenerated independently.
    """
    if n_paths < 1:
        raise ScenarioError("n_paths must be >= 1")
    xi = np.empty((n_paths, horizon + 1))
    xi[:, 0] = 0.0
    for i in range(n_paths):
        xi[i, 1:] = np.random.default_rng([p.seed, stream, i]).normal(0.0, 1.0, horizon)
    xi[:, 1:] *= p.sigma
    err = np.zeros((n_paths, horizon + 1))
    for t in range(1, horizon + 1):
        err[:, t] = p.alpha * err[:, t - 1] + p.beta * xi[:, t - 1] + xi[:, t]
    return err[:, 1:]


def compose_realized(forecast, errors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Realized speed ``max(0, forecast + error)`` and the mask of clamped entries."""
    forecast = np.asarray(forecast, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if errors.shape[-1] != forecast.shape[-1]:
        raise ScenarioError(f"shape mismatch: forecast {forecast.shape} vs errors {errors.shape}")
    raw = forecast + errors
    clamped = raw < 0
    return np.where(clamped, 0.0, raw), clamped


@dataclass
class ReducedPaths:
    centroids: np.ndarray  # (k, d)
    probabilities: np.ndarray  # (k,)
    labels: np.ndarray  # (n_paths,)

    def within_cluster_cost(self, paths: np.ndarray) -> float:
        return float(((paths - self.centroids[self.labels]) ** 2).sum())


def reduce_kmeans(paths: np.ndarray, k: int, seed: int = 0) -> ReducedPaths:
    """Lloyd k-means (k-means++ seeding) on path vectors; probability = cluster share."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    n = paths.shape[0]
    if k < 1:
        raise ScenarioError("k must be >= 1")
    if k > n:
        raise ScenarioError(f"k exceeds path count ({k} > {n})")
    if k > 1 and np.unique(paths, axis=0).shape[0] < k:
        raise ScenarioError(f"fewer than k={k} distinct paths")
    if k == 1:
        centroid = paths.mean(axis=0, keepdims=True)
        return ReducedPaths(centroid, np.ones(1), np.zeros(n, dtype=int))
    km = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=300, tol=0.0,
                random_state=seed, algorithm="lloyd").fit(paths)
    labels = km.labels_
    counts = np.bincount(labels, minlength=k)
    # deterministic, readable order: most likely first, then by first member
    first = np.array([np.flatnonzero(labels == c)[0] for c in range(k)])
    order = np.lexsort((first, -counts))
    remap = np.empty(k, dtype=int)
    remap[order] = np.arange(k)
    centroids = np.stack([paths[labels == c].mean(axis=0) for c in order])
    return ReducedPaths(centroids, counts[order] / n, remap[labels])


def speed_to_power(farm: WindFarm, speed) -> np.ndarray:
    """Cubic power curve between cut-in and rated speed, flat to cut-out, zero beyond."""
    v = np.asarray(speed, dtype=float)
    ci, vr, co = farm.v_cut_in, farm.v_rated, farm.v_cut_out
    ramp = farm.capacity * (v**3 - ci**3) / (vr**3 - ci**3)
    out = np.where(v < ci, 0.0, np.where(v < vr, ramp, np.where(v < co, farm.capacity, 0.0)))
    return out if out.ndim else float(out)


@dataclass
class ScenarioSet:
    """Reduced wind scenarios: ``wind[sc, w, t]`` in GW with probability ``probabilities[sc]``."""

    farms: tuple[str, ...]
    probabilities: np.ndarray
    wind: np.ndarray

    def __post_init__(self):
        self.farms = tuple(self.farms)
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        self.wind = np.asarray(self.wind, dtype=float).reshape(
            len(self.probabilities), len(self.farms), -1)
        if np.any(self.probabilities <= 0):
            raise ScenarioError("scenario probabilities must be > 0")
        if abs(self.probabilities.sum() - 1.0) > 1e-9:
            raise ScenarioError(f"probabilities sum to {self.probabilities.sum()!r}, not 1")
        if np.any(self.wind < 0):
            raise ScenarioError("negative wind power")

    def __len__(self) -> int:
        return len(self.probabilities)

    @property
    def horizon(self) -> int:
        return self.wind.shape[2]

    def single(self, sc: int) -> "ScenarioSet":
        """Scenario ``sc`` alone, with probability 1."""
        return ScenarioSet(self.farms, [1.0], self.wind[sc:sc + 1])

    def mean(self) -> "ScenarioSet":
        """Probability-weighted mean wind curve as a one-scenario set."""
        return ScenarioSet(self.farms, [1.0],
                           np.tensordot(self.probabilities, self.wind, axes=1)[None])

    def check_against(self, net: IesNetwork) -> None:
        ids = tuple(w.id for w in net.wind_farms)
        if ids != self.farms:
            raise ScenarioError(f"scenario farms {self.farms} do not match network farms {ids}")
        if self.horizon != net.horizon:
            raise ScenarioError(f"scenario horizon {self.horizon} != network horizon {net.horizon}")
        for k, w in enumerate(net.wind_farms):
            if np.any(self.wind[:, k, :] > w.capacity + 1e-9):
                raise ScenarioError(f"wind farm {w.id}: power above rated capacity")


def save_scenarios(s: ScenarioSet, path: str | Path) -> None:
    doc = {
        "farms": list(s.farms),
        "horizon": s.horizon,
        "scenarios": [
            {"probability": float(p),
             "wind": {f: [float(v) for v in s.wind[k, w]] for w, f in enumerate(s.farms)}}
            for k, p in enumerate(s.probabilities)
        ],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_scenarios(path: str | Path) -> ScenarioSet:
    try:
        doc = yaml.safe_load(Path(path).read_text())
        farms = [str(f) for f in doc["farms"]]
        probs = [float(sc["probability"]) for sc in doc["scenarios"]]
        wind = [[sc["wind"][f] for f in farms] for sc in doc["scenarios"]]
    except (yaml.YAMLError, KeyError, TypeError) as exc:
        raise ScenarioError(f"{path}: malformed scenario file ({exc})") from None
    if not probs:
        raise ScenarioError(f"{path}: no scenarios")
    return ScenarioSet(farms, probs, np.array(wind, dtype=float))


def generate_scenarios(net: IesNetwork, arma: ArmaParams, n_paths: int, k: int,
                       mode: str = "independent") -> tuple[ScenarioSet, ReducedPaths]:
    """Simulate realized speeds for every farm, cluster them jointly, map to power.

    ``mode="independent"`` gives each farm its own error process;
    ``"shared"`` reuses one error path for all farms.
    """
    if mode not in ("independent", "shared"):
        raise ScenarioError(f"unknown error mode {mode!r}")
    if not net.wind_farms:
        raise ScenarioError("network has no wind farm")
    if k > n_paths:
        raise ScenarioError(f"k exceeds path count ({k} > {n_paths})")
    T = net.horizon
    speeds = []
    for f, farm in enumerate(net.wind_farms):
        if len(farm.forecast) != T:
            raise ScenarioError(f"wind farm {farm.id}: forecast must have {T} values")
        errors = simulate_error_paths(arma, n_paths, T, stream=f if mode == "independent" else 0)
        speeds.append(compose_realized(farm.forecast, errors)[0])
    features = np.hstack(speeds)
    reduced = reduce_kmeans(features, k, seed=arma.seed)
    W = len(net.wind_farms)
    cent = reduced.centroids.reshape(k, W, T)
    power = np.stack([[speed_to_power(farm, cent[s, f]) for f, farm in enumerate(net.wind_farms)]
                      for s in range(k)])
    return ScenarioSet(tuple(w.id for w in net.wind_farms), reduced.probabilities, power), reduced
