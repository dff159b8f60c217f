"""Steps 1 -> 2 -> 3 wired together with the default constants."""
from __future__ import annotations

from dataclasses import dataclass

from .angular import AngularValueReport, theta1_hat, theta2_hat
from .bundles import GAP, SUBINTERVAL, BundleSet, compute_bundles
from .models import SystemModel, catalog_get
from .spectrum import MERGE_GAP, SpectrumReport, compute_spectrum


@dataclass(frozen=True)
class PipelineSettings:
    m: int = 2000
    window: int | None = None          # H, defaults to M // 2
    merge_gap: float = MERGE_GAP
    gap: int = GAP
    subinterval: int | None = SUBINTERVAL
    seed: int = 0
    initial_frame: str | None = "generic"
    workers: int | None = 1


@dataclass(eq=False)
class PipelineResult:
    model: SystemModel
    spectrum: SpectrumReport
    bundles: BundleSet
    workers: int | None = 1

    def theta(self, s: int, k: int | None = None, n: int | None = None) -> AngularValueReport:
        if s == 1:
            return theta1_hat(self.bundles, k, n, workers=self.workers)
        if s == 2:
            return theta2_hat(self.bundles, k, n, workers=self.workers)
        raise ValueError("s must be 1 or 2")


def run(model: SystemModel, settings: PipelineSettings = PipelineSettings()) -> PipelineResult:
    """Spectrum and fibers of ``model`` on ``[0, M]``."""
    a = model.matrices(0, settings.m)
    spec = compute_spectrum(model, settings.m, settings.window, settings.merge_gap,
                            matrices=a, initial_frame=settings.initial_frame)
    bundles = compute_bundles(model, spec, settings.m, gap=settings.gap,
                              subinterval=settings.subinterval, seed=settings.seed,
                              matrices=a, workers=settings.workers)
    return PipelineResult(model, spec, bundles, settings.workers)


def run_catalog(name: str, params: dict | None = None, seed: int | None = None,
                **settings) -> PipelineResult:
    """Convenience wrapper: build a catalog model and run the pipeline on it."""
    model = catalog_get(name, params, seed)
    cfg = PipelineSettings(**settings) if settings else PipelineSettings()
    if seed is not None and "seed" not in settings:
        cfg = PipelineSettings(**{**cfg.__dict__, "seed": seed})
    return run(model, cfg)
