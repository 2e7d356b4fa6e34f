"""Pipeline stages that fill a ResultBundle from a Config."""
from __future__ import annotations

from dataclasses import asdict

import numpy as np

from . import __version__
from .bands import (
    band_gaps,
    cell_band_structure,
    check_lemma_a,
    friedrichs_constant,
    spectral_bands,
    symmetry_defect,
)
from .config import Config
from .eigensolve import EigensolveError, SolverOptions
from .errors import ScientificInvariantError
from .floquet import (
    classify_wave,
    floquet_waves,
    group_velocity_check,
    jordan_chain,
    parabola_check,
    wave_packets,
)
from .geometry import DomainMask, build_window_mask
from .results import FieldGrid, ResultBundle, now_stamp
from .strip import (
    StripError,
    check_condition_27,
    check_uniqueness,
    decay_rate,
    dispersion_curve,
    m_sharp,
    strip_eigenpairs,
    waveguide_band,
)
from .trapped import perturbed_ground_state, verify_trapped

STAGES = ("bands", "dispersion", "floquet", "trapped")


class StageFailure(RuntimeError):
    """Solver failure tagged with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"solver failure in stage '{stage}': {cause}")
        self.stage = stage


def field_grid(mask: DomainMask, values: np.ndarray) -> FieldGrid:
    grid = np.asarray(mask.scatter(np.real(values).astype(float), 0.0))
    grid = grid + 0.0  # no negative zeros in the text output
    return FieldGrid(grid, np.asarray(mask.active).copy(), mask.h, mask.x0, mask.y0)


class Pipeline:
    """Runs stages in dependency order, reusing results across them."""

    def __init__(self, cfg: Config, threads: int = 1, seed: int | None = None):
        self.cfg = cfg
        self.threads = max(1, int(threads))
        self.seed = seed
        self.bundle = ResultBundle(cfg.hash, __version__, now_stamp())
        self.violations: list[str] = []
        self._bs = None
        self._curve = None
        self._M1_0 = None
        s = self.bundle.summary
        s["geometry"] = {"l1": cfg.cell.l1, "l2": cfg.cell.l2, "hole": cfg.cell.hole, "h": cfg.grid.h}
        s["strip"] = {"l2": cfg.cell.l2, "J": cfg.J, "K": cfg.K}
        s["M_sharp"] = m_sharp(cfg.cell.l2, cfg.J)

    @property
    def opts(self) -> SolverOptions:
        return self.cfg.solver

    def _stage(self, name, fn):
        try:
            return fn()
        except EigensolveError as exc:
            raise StageFailure(name, exc) from exc

    def run(self, subcommand: str) -> ResultBundle:
        order = STAGES if subcommand == "all" else (subcommand,)
        for name in order:
            self._stage(name, getattr(self, f"_run_{name}"))
        self.bundle.summary["violations"] = list(self.violations)
        return self.bundle

    def _run_bands(self):
        cfg, s = self.cfg, self.bundle.summary
        bs = cell_band_structure(cfg.cell, cfg.grid, cfg.band_sampling, cfg.band_count, self.opts, self.threads)
        self._bs = bs
        self.bundle.band_thetas, self.bundle.band_values = bs.thetas, bs.values
        bands = spectral_bands(bs)
        s["bands"] = [asdict(b) for b in bands]
        s["gaps"] = [{**asdict(g), "is_gap": g.is_gap} for g in band_gaps(bands)]
        s["cutoff"] = bs.cutoff
        s["symmetry_defect"] = symmetry_defect(bs)
        lemma = check_lemma_a(bs)
        s["lemma_a"] = asdict(lemma)
        if not lemma.passed:
            self.violations.append(f"first band not strictly minimal at theta=0 (margin {lemma.margin:.3e})")
        if cfg.cell.hole is not None:
            fr = friedrichs_constant(cfg.cell, cfg.grid, self.opts)
            i0 = bs.index_of(0.0, 0.0)
            lam0 = float(bs.values[i0, 0])
            s["lambda_star"] = fr.lambda_star
            s["friedrichs"] = {"lambda_1_at_0": lam0, "holds": lam0 >= fr.lambda_star - 1e-8}
            if lam0 < fr.lambda_star - 1e-8:
                self.violations.append("Lambda_1(0) < Lambda_*")
            c27 = check_condition_27(cfg.strip, fr)
            s["condition_27"] = asdict(c27)
            if not c27.holds:
                self.violations.append("condition M_sharp < min(pi^2, Lambda_*) does not hold")

    def _dispersion(self):
        if self._curve is None:
            cfg = self.cfg
            self._curve = dispersion_curve(
                cfg.strip, cfg.grid, cfg.dispersion_zetas(), cfg.essential_sampling, self.opts, self.threads
            )
        return self._curve

    def _run_dispersion(self):
        cfg, s = self.cfg, self.bundle.summary
        curve = self._dispersion()
        self.bundle.dispersion = {
            "zeta": [x.zeta for x in curve.samples],
            "M1": [x.M1 for x in curve.samples],
            "ess": [x.ess for x in curve.samples],
            "trapped": [x.trapped for x in curve.samples],
            "M2": [x.M2 for x in curve.samples],
        }
        M0 = curve.M1_at_zero
        self._M1_0 = M0
        s["M1_at_zero"] = M0
        s["ess_at_zero"] = curve.at(0.0).ess
        try:
            slack = check_uniqueness(curve)
            s["uniqueness"] = {"holds": True, "min_slack": min(slack) if slack else None}
        except ScientificInvariantError as exc:
            s["uniqueness"] = {"holds": False, "min_slack": None}
            self.violations.append(str(exc))
        z = curve.zetas
        M = curve.M1
        even = 0.0
        for i, zi in enumerate(z):
            j = np.flatnonzero(np.abs(z + zi) <= 1e-12)
            if j.size:
                even = max(even, abs(M[i] - M[j[0]]))
        trapped_nonzero = [x for x in curve.samples if x.trapped and x.zeta != 0.0]
        s["evenness_defect"] = even
        s["minimum_at_zero"] = all(x.M1 > M0 for x in trapped_nonzero)
        if not s["minimum_at_zero"]:
            self.violations.append("M1(zeta) <= M1(0) at a trapped zeta != 0")
        cutoff = s.get("cutoff")
        wb = waveguide_band(curve, cutoff)
        s["waveguide_band"] = asdict(wb)
        if not curve.at(0.0).trapped:
            self.violations.append("no trapped strip mode at zeta=0")
        else:
            pair = strip_eigenpairs(cfg.strip, cfg.grid, 0.0, 1, self.opts)[0]
            if cfg.K >= 3:
                dec = decay_rate(pair, cfg.strip, cfg.grid)
                s["strip_decay"] = asdict(dec)
            if cutoff is not None and wb.below_cutoff is False:
                self.violations.append("waveguide band overlaps the cell spectrum")

    def _run_floquet(self):
        cfg = self.cfg
        curve = self._dispersion()
        if self.bundle.dispersion is None:
            self._run_dispersion()
        try:
            tight = SolverOptions(tol=min(1e-11, self.opts.tol), max_restarts=self.opts.max_restarts)
            chain = jordan_chain(cfg.strip, cfg.grid, tight, cfg.essential_sampling)
        except StripError as exc:
            raise ScientificInvariantError(str(exc)) from exc
        packets = wave_packets(chain)
        w0 = chain.standing()
        verdicts = {
            "w_plus": classify_wave(packets.w_plus),
            "w_minus": classify_wave(packets.w_minus),
            "w0": classify_wave(w0),
        }
        gv = []
        for z in cfg.group_velocity_zetas:
            wp, _ = floquet_waves(cfg.strip, cfg.grid, z, self.opts)
            gv.append(group_velocity_check(curve, wp, z))
        par = parabola_check(curve, chain)
        fl = {
            "b": chain.b,
            "b_imag": chain.b_imag,
            "norm_W0_sq": chain.norm_W0_sq,
            "curvature": chain.curvature,
            "M0": chain.M0,
            "compatibility": chain.compatibility,
            "chain_residual": chain.residual,
            "packet_q": packets.q,
            "packet_rel_error_diag": packets.rel_error_diag,
            "packet_offdiag_over_b": packets.offdiag_over_b,
            "packets_pass": packets.passed,
            "classifications": {k: asdict(v) for k, v in verdicts.items()},
            "group_velocity": gv,
            "parabola": asdict(par),
        }
        self.bundle.floquet = fl
        self.bundle.fields["W0"] = field_grid(chain.mask, chain.W0)
        self.bundle.summary["jordan"] = {"b": chain.b, "norm_W0_sq": chain.norm_W0_sq, "curvature": chain.curvature}
        self.bundle.summary["classifications"] = {k: v.verdict for k, v in verdicts.items()}
        if not packets.passed:
            self.violations.append("packet flux matrix differs from diag(2ib, -2ib)")
        expected = {"w_plus": "Outgoing", "w_minus": "Incoming", "w0": "Null"}
        for k, v in verdicts.items():
            if v.verdict != expected[k]:
                self.violations.append(f"{k} classified {v.verdict}, expected {expected[k]}")
        if not par.passed:
            self.violations.append("dispersion curvature disagrees with b/||W0||^2")

    def _run_trapped(self):
        cfg = self.cfg
        if self._M1_0 is None:
            self._M1_0 = strip_eigenpairs(cfg.strip, cfg.grid, 0.0, 1, self.opts)[0].value
        layout = cfg.layout
        pair = perturbed_ground_state(layout, cfg.grid, self.opts)
        rep = verify_trapped(layout, cfg.grid, pair, self._M1_0, cfg.cell)
        self.bundle.trapped = {
            "lambda_computed": rep.lambda_computed,
            "lambda_square": rep.lambda_square,
            "rayleigh_u_square": rep.rayleigh_u_square,
            "M1_at_zero": rep.M1_at_zero,
            "verdict": rep.verdict,
            "checks": rep.checks,
            "decay": {k: asdict(v) for k, v in sorted(rep.decay.items())},
            "layout": {
                "J1": layout.J1,
                "J2": layout.J2,
                "guide_length": layout.guide_length,
                "padding": layout.padding,
                "columns": layout.window.columns,
                "rows": layout.window.rows,
            },
        }
        self.bundle.summary["trapped_verdict"] = rep.verdict
        self.bundle.fields["trapped_mode"] = field_grid(build_window_mask(layout.window, cfg.grid), pair.field)
        if rep.verdict == "fail":
            failed = [k for k, v in rep.checks.items() if not v]
            self.violations.append(f"trapped-mode checks failed: {', '.join(failed)}")
