"""Grid-search inversion of complex permittivity and thickness.

Normalized forward predictions over an exhaustive (thickness, eps', eps'')
grid are compared to normalized measurements with an L1-of-complex-
difference error; the global argmin (lexicographic tie-break on grid
index, thickness axis first) is the estimate.  The prediction sweep is
independent of the measurements, so one sweep serves many noise
realizations in batch runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .go import GoModel

__all__ = [
    "SweepGrid",
    "MeasurementSet",
    "EstimationResult",
    "BatchStatistics",
    "PredictionSweep",
    "select_focus_points",
    "error_function",
    "add_noise",
    "estimate",
    "estimate_batch",
]


@dataclass(frozen=True)
class SweepGrid:
    """Inclusive sweep ranges; every truth value should be a node."""

    eps_real: np.ndarray
    eps_imag: np.ndarray
    thickness_mm: np.ndarray

    def __post_init__(self):
        for name in ("eps_real", "eps_imag", "thickness_mm"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.size == 0:
                raise ValueError(f"{name} axis is empty")
            object.__setattr__(self, name, arr)

    @classmethod
    def from_ranges(
        cls,
        eps_real: tuple[float, float, float] = (2.0, 10.0, 0.25),
        eps_imag: tuple[float, float, float] = (0.0, 0.5, 0.05),
        thickness_mm: tuple[float, float, float] = (0.0, 60.0, 1.0),
    ) -> "SweepGrid":
        def axis(lo: float, hi: float, step: float) -> np.ndarray:
            if step <= 0 or hi < lo:
                raise ValueError("grid ranges need hi >= lo and step > 0")
            n = int(round((hi - lo) / step)) + 1
            return lo + step * np.arange(n)

        return cls(axis(*eps_real), axis(*eps_imag), axis(*thickness_mm))

    @classmethod
    def default(cls) -> "SweepGrid":
        return cls.from_ranges()

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.thickness_mm.size, self.eps_real.size, self.eps_imag.size)

    def halved(self) -> "SweepGrid":
        """Same ranges at half the step (refinement for convergence checks)."""

        def half(arr: np.ndarray) -> np.ndarray:
            if arr.size == 1:
                return arr.copy()
            step = (arr[-1] - arr[0]) / (arr.size - 1) / 2.0
            return arr[0] + step * np.arange(2 * arr.size - 1)

        return SweepGrid(half(self.eps_real), half(self.eps_imag), half(self.thickness_mm))


@dataclass(frozen=True)
class MeasurementSet:
    """Received amplitudes at the focus points plus one calibration
    amplitude taken on the bare reference plane."""

    points: np.ndarray  # (N, 3) focus positions, mm
    values: np.ndarray  # (N,) complex received amplitudes
    cal_point: np.ndarray  # (3,) calibration focus
    cal_value: complex

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=complex).reshape(-1)
        if pts.shape[0] != vals.shape[0] or pts.shape[1] != 3:
            raise ValueError("points must be (N, 3) matching N values")
        if pts.shape[0] < 1:
            raise ValueError("at least one measurement point required")
        if self.cal_value == 0:
            raise ValueError("calibration amplitude must be nonzero")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "cal_point", np.asarray(self.cal_point, dtype=float))

    def scaled(self, factor: complex) -> "MeasurementSet":
        return MeasurementSet(
            points=self.points,
            values=self.values * factor,
            cal_point=self.cal_point,
            cal_value=self.cal_value * factor,
        )


@dataclass(frozen=True)
class EstimationResult:
    eps_real: float
    eps_imag: float
    thickness_mm: float
    min_error: float
    surface: np.ndarray  # (nT, nEr, nEi)
    indices: tuple[int, int, int]  # (iT, iEr, iEi)
    grid: SweepGrid
    runtime_ms: float


@dataclass(frozen=True)
class BatchStatistics:
    results: list[EstimationResult]
    mean: tuple[float, float, float]  # (eps_real, eps_imag, thickness_mm)
    std: tuple[float, float, float]


def select_focus_points(center: np.ndarray, n: int = 3, dz_mm: float = 10.0) -> np.ndarray:
    """Centered axial stencil: z_c + dz*(i - (n+1)/2) for i = 1..n."""
    if n < 1 or n % 2 == 0:
        raise ValueError("n must be a positive odd count")
    center = np.asarray(center, dtype=float)
    i = np.arange(1, n + 1)
    z = center[2] + dz_mm * (i - (n + 1) / 2.0)
    return np.column_stack([np.full(n, center[0]), np.full(n, center[1]), z])


def error_function(pred, pred_cal, meas_values, meas_cal) -> np.ndarray:
    """Sum over focus points of |pred_n/pred_0 - meas_n/meas_0|.

    `pred` may carry leading grid axes; the last axis is the focus index.
    """
    pred = np.asarray(pred, dtype=complex)
    meas = np.asarray(meas_values, dtype=complex).reshape(-1)
    if pred_cal == 0 or meas_cal == 0:
        raise ValueError("calibration amplitudes must be nonzero")
    return np.sum(np.abs(pred / pred_cal - meas / meas_cal), axis=-1)


def add_noise(
    values: np.ndarray, snr_db: float, rng: np.random.Generator
) -> np.ndarray:
    """Additive circular complex Gaussian noise at the given SNR relative
    to the RMS of `values`."""
    values = np.asarray(values, dtype=complex)
    rms = float(np.sqrt(np.mean(np.abs(values) ** 2)))
    sigma = rms / (10.0 ** (snr_db / 20.0))
    noise = sigma * (
        rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape)
    ) / np.sqrt(2.0)
    return values + noise


class PredictionSweep:
    """Normalized forward predictions on every grid node at fixed foci.

    Evaluating the sweep is the expensive step; comparing a measurement
    against it is a cheap broadcast, so batches share one sweep.
    """

    def __init__(
        self,
        model: GoModel,
        foci: np.ndarray,
        grid: SweepGrid,
        gap_mm: float = 0.0,
        cal_xy: np.ndarray | None = None,
    ):
        self.model = model
        self.grid = grid
        self.foci = np.atleast_2d(np.asarray(foci, dtype=float))
        self.gap_mm = gap_mm
        n_t, n_er, n_ei = grid.shape
        n_foci = self.foci.shape[0]
        eps_flat = (
            grid.eps_real[:, None] - 1j * grid.eps_imag[None, :]
        ).reshape(-1)
        self.cal = model.calibration(xy=cal_xy)
        pred = np.empty((n_t, n_er * n_ei, n_foci), dtype=complex)
        for it, t in enumerate(grid.thickness_mm):
            for i_f, focus in enumerate(self.foci):
                pred[it, :, i_f] = model.predict_eps_grid(
                    focus, eps_flat, float(t), gap_mm
                )
        # (nT, nEr, nEi, N), already normalized by the calibration amplitude
        self.normalized = pred.reshape(n_t, n_er, n_ei, n_foci) / self.cal

    def error_surface(self, meas: MeasurementSet) -> np.ndarray:
        m_norm = meas.values / meas.cal_value
        return np.sum(np.abs(self.normalized - m_norm), axis=-1)

    def argmin(self, meas: MeasurementSet) -> EstimationResult:
        t0 = time.perf_counter()
        surface = self.error_surface(meas)
        flat = int(np.argmin(surface))  # C order: first min = lowest (T, er, ei)
        it, ier, iei = np.unravel_index(flat, surface.shape)
        return EstimationResult(
            eps_real=float(self.grid.eps_real[ier]),
            eps_imag=float(self.grid.eps_imag[iei]),
            thickness_mm=float(self.grid.thickness_mm[it]),
            min_error=float(surface[it, ier, iei]),
            surface=surface,
            indices=(int(it), int(ier), int(iei)),
            grid=self.grid,
            runtime_ms=(time.perf_counter() - t0) * 1e3,
        )


def estimate(
    model: GoModel,
    meas: MeasurementSet,
    grid: SweepGrid | None = None,
    gap_mm: float = 0.0,
) -> EstimationResult:
    """Exhaustive grid search for the measurement set's best (T, eps)."""
    grid = grid or SweepGrid.default()
    t0 = time.perf_counter()
    sweep = PredictionSweep(
        model, meas.points, grid, gap_mm=gap_mm, cal_xy=meas.cal_point[:2]
    )
    result = sweep.argmin(meas)
    return EstimationResult(
        eps_real=result.eps_real,
        eps_imag=result.eps_imag,
        thickness_mm=result.thickness_mm,
        min_error=result.min_error,
        surface=result.surface,
        indices=result.indices,
        grid=grid,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
    )


def estimate_batch(
    model: GoModel,
    truth_eps: complex,
    truth_thickness_mm: float,
    foci: np.ndarray,
    grid: SweepGrid | None = None,
    gap_mm: float = 0.0,
    n_runs: int = 38,
    snr_db: float = 20.0,
    seed: int = 0,
    cal_xy: np.ndarray | None = None,
) -> BatchStatistics:
    """Repeated estimation on noisy synthetic measurements.

    Truth measurements come from the forward model itself; each run adds an
    independent noise draw to the focus-point values (the calibration
    amplitude stays noise-free) and re-runs the argmin against the shared
    sweep.
    """
    if n_runs < 2:
        raise ValueError("need at least 2 runs for batch statistics")
    grid = grid or SweepGrid.default()
    foci = np.atleast_2d(np.asarray(foci, dtype=float))
    sweep = PredictionSweep(model, foci, grid, gap_mm=gap_mm, cal_xy=cal_xy)
    clean = np.array(
        [
            model.predict(f, truth_eps, truth_thickness_mm, gap_mm)
            for f in foci
        ]
    )
    cal_point = np.array(
        [
            foci[0, 0] if cal_xy is None else cal_xy[0],
            foci[0, 1] if cal_xy is None else cal_xy[1],
            model.z_bg,
        ]
    )
    rng = np.random.default_rng(seed)
    results = []
    for _ in range(n_runs):
        noisy = add_noise(clean, snr_db, rng)
        meas = MeasurementSet(
            points=foci, values=noisy, cal_point=cal_point, cal_value=sweep.cal
        )
        results.append(sweep.argmin(meas))
    er = np.array([r.eps_real for r in results])
    ei = np.array([r.eps_imag for r in results])
    t = np.array([r.thickness_mm for r in results])
    return BatchStatistics(
        results=results,
        mean=(float(er.mean()), float(ei.mean()), float(t.mean())),
        std=(float(er.std(ddof=1)), float(ei.std(ddof=1)), float(t.std(ddof=1))),
    )
