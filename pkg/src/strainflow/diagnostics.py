"""Scalar functionals and identity monitors evaluated on flow snapshots.

All quantities live on the enstrophy side of the bookkeeping: E denotes
the squared L2 norm of the strain (equal to half the squared L2 norm of
the vorticity and of the full gradient).  The budget checked here is

    dE/dt = -2 nu |S|_{H1}^2 - 4 int det(S) + <-lap u, f>,

with the vortex-stretching equivalences

    <S, w x w> = -4 int det(S) = -(4/3) int tr(S^3),

and the middle-eigenvalue machinery: pointwise -det(S) <= |S|^2 l2+ / 2,
the growth inequality dE/dt <= -nu |S|_{H1}^2 + 2 int l2+ |S|^2 + |f|^2/2,
and the q = infinity Gronwall envelope E(t) <= E(0) exp(2 int |l2+|_inf).

Exponent pairs always satisfy 2/p + 3/q = 2, i.e. p = 2q/(2q - 3); the
borderline exponent q = 3/2 is only ever monitored, never integrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import solver, sym3
from .exceptions import InvalidExponentError, InvalidInputError
from .numerics import (check_uniform_spacing, cumulative_trapezoid,
                       fd4_derivative)
from .spectral import Grid, strain_norm_sq, sym_gradient, vorticity

# Coefficient of the cubic enstrophy-growth monitor (whole-space sharp
# Sobolev value; on the torus it is monitored, never asserted).
CUBIC_GROWTH_COEFF = 1.0 / (1458.0 * math.pi ** 4)

# Reference level 3*(pi/2)^(4/3) for the borderline L^{3/2} monitor.
BORDERLINE_REFERENCE = 3.0 * (math.pi / 2.0) ** (4.0 / 3.0)

DEFAULT_Q_LIST = (np.inf, 2.0, 1.5)

CSV_COLUMNS = ("t", "E", "diss_H1", "det_int", "tr3_int", "vortex_stretch",
               "lam2p_Linf", "lam2p_L2", "lam2p_L32", "crit_int_qinf",
               "crit_int_q2", "budget_resid", "vs_ident_resid", "gcon_margin",
               "cubic_margin", "force_term")


@dataclass(frozen=True)
class StrainPointData:
    """Pointwise strain analysis of one snapshot."""

    strain: sym3.TraceFreeSym3          # matrix entries as (n, n, n) arrays
    eig: sym3.EigenTriple               # sorted eigenvalue fields
    det: np.ndarray
    norm_sq: np.ndarray                 # |S(x)|^2


def pointwise_strain_analysis(grid: Grid, u_hat) -> StrainPointData:
    s_hat = sym_gradient(grid, u_hat)
    strain = sym3.TraceFreeSym3.from_components(grid.ifft(s_hat))
    return StrainPointData(strain, sym3.eigenvalues(strain),
                           sym3.det(strain), strain.norm_sq())


def lq_norm(grid: Grid, scalar_field, q) -> float:
    """Discrete L^q norm of a non-negative scalar field.

    q ranges over [3/2, infinity]; q = 3/2 exists solely for the
    borderline monitor, every criterion integral requires q > 3/2.
    """
    if q < 1.5:
        raise InvalidExponentError(f"q must be >= 3/2, got {q}")
    field_arr = np.asarray(scalar_field, dtype=float)
    low = field_arr.min()
    if low < -1e-12 * max(np.abs(field_arr).max(), 1.0):
        raise InvalidInputError("L^q norms here expect a non-negative field")
    field_arr = np.maximum(field_arr, 0.0)
    if np.isinf(q):
        return float(field_arr.max())
    return float(np.sum(field_arr ** q) * grid.quad_weight) ** (1.0 / q)


def criterion_exponent(q) -> float:
    """Time exponent p paired with the space exponent q via 2/p + 3/q = 2."""
    if q <= 1.5:
        raise InvalidExponentError(f"criterion exponent requires q > 3/2, got {q}")
    if np.isinf(q):
        return 1.0
    return 2.0 * q / (2.0 * q - 3.0)


def criterion_integral_series(times, norms, q, p=None):
    """Cumulative trapezoidal integral of the q-norm history to power p."""
    p_expected = criterion_exponent(q)
    if p is not None and abs(p - p_expected) > 1e-9:
        raise InvalidExponentError(
            f"p={p} inconsistent with q={q} (2/p + 3/q = 2 gives p={p_expected})")
    return cumulative_trapezoid(np.asarray(norms, dtype=float) ** p_expected, times)


def criterion_integral(times, norms, q, p=None) -> float:
    return float(criterion_integral_series(times, norms, q, p)[-1])


def enstrophy_budget_residual(times, enstrophy, dissipation, det_integral,
                              force_term=None, viscosity: float = 1.0):
    """Residual series of the determinant form of the enstrophy budget.

    dE/dt is estimated with 4th-order finite differences; the residual
    dE/dt + 2 nu diss + 4 int det - force is reported relative to the
    largest participating term at each record.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 5:
        raise InvalidInputError("budget residual needs at least 5 records")
    h = check_uniform_spacing(times)
    e = np.asarray(enstrophy, dtype=float)
    diss = np.asarray(dissipation, dtype=float)
    det_int = np.asarray(det_integral, dtype=float)
    force = np.zeros_like(e) if force_term is None else np.asarray(force_term, dtype=float)
    dedt = fd4_derivative(e, h)
    resid = dedt + 2.0 * viscosity * diss + 4.0 * det_int - force
    scale = np.maximum.reduce([np.abs(dedt), 2.0 * viscosity * diss,
                               4.0 * np.abs(det_int), np.abs(force)])
    return resid / np.maximum(scale, 1e-300)


def vortex_stretch_identity_residual(vortex_stretch, det_integral, tr3_integral,
                                     cubic_scale: float = 0.0) -> float:
    """Max pairwise relative deviation among <S, w x w>, -4 int det,
    and -(4/3) int tr(S^3).

    cubic_scale (typically int |S|^3) floors the normalization: the
    three integrals can vanish by symmetry while the field is large, in
    which case agreement is judged against the field's natural cubic
    magnitude instead of 0/0 noise.
    """
    values = (float(vortex_stretch), -4.0 * float(det_integral),
              -4.0 / 3.0 * float(tr3_integral))
    scale = max(max(abs(v) for v in values), abs(cubic_scale))
    if scale == 0.0:
        return 0.0
    return (max(values) - min(values)) / scale


def gcon_margins(times, enstrophy, dissipation, lambda2_weighted,
                 force_norm_sq=None, viscosity: float = 1.0):
    """Per-record slack of the middle-eigenvalue growth inequality.

    margin = (-nu diss + 2 int l2+ |S|^2 + |f|^2/2) - dE/dt, which is
    bounded below by nu diss for exact solutions and therefore stays
    positive up to finite-difference noise.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 5:
        raise InvalidInputError("growth-inequality margins need at least 5 records")
    h = check_uniform_spacing(times)
    e = np.asarray(enstrophy, dtype=float)
    f_sq = (np.zeros_like(e) if force_norm_sq is None
            else np.asarray(force_norm_sq, dtype=float))
    dedt = fd4_derivative(e, h)
    rhs = (-viscosity * np.asarray(dissipation, dtype=float)
           + 2.0 * np.asarray(lambda2_weighted, dtype=float) + 0.5 * f_sq)
    return rhs - dedt


def gronwall_envelope(times, enstrophy, linf_norms, q=np.inf, force_norm_sq=None):
    """Enstrophy envelope E(0) exp(2 int |l2+|_inf dt) for q = infinity.

    Only q = infinity carries an explicit constant (2); finite q is
    rejected because no numerical constant is available to assert.
    With a force the base grows by the accumulated |f|^2/2.
    """
    if not np.isinf(q):
        raise InvalidExponentError(
            "envelope constant is only available at q = infinity")
    times = np.asarray(times, dtype=float)
    e = np.asarray(enstrophy, dtype=float)
    base = np.full_like(e, e[0])
    if force_norm_sq is not None:
        base = base + 0.5 * cumulative_trapezoid(np.asarray(force_norm_sq, float), times)
    exponent = 2.0 * cumulative_trapezoid(np.asarray(linf_norms, dtype=float), times)
    return base * np.exp(exponent)


def cubic_growth_margins(times, enstrophy):
    """Monitor-only margins E^3/(1458 pi^4) - dE/dt (whole-space constant;
    emitted, never asserted)."""
    times = np.asarray(times, dtype=float)
    if times.size < 5:
        raise InvalidInputError("cubic growth monitor needs at least 5 records")
    h = check_uniform_spacing(times)
    e = np.asarray(enstrophy, dtype=float)
    return CUBIC_GROWTH_COEFF * e ** 3 - fd4_derivative(e, h)


def borderline_monitor(l32_norms):
    """The L^{3/2} norm history of l2+ next to its reference level
    3 (pi/2)^{4/3}; for comparison plots only."""
    return np.asarray(l32_norms, dtype=float), BORDERLINE_REFERENCE


def directional_criterion(grid: Grid, u_hat, regions, directions, q) -> float:
    """Assemble |S v|_{L^q} over a piecewise-constant direction field.

    regions is a sequence of boolean masks that must partition the grid;
    directions the matching unit vectors.  The result dominates the
    L^q norm of |lambda2| and hence of l2+.
    """
    if len(regions) != len(directions):
        raise InvalidInputError("regions and directions must pair up")
    if q < 1.5:
        raise InvalidExponentError(f"q must be >= 3/2, got {q}")
    cover = np.zeros((grid.n,) * 3, dtype=int)
    for mask in regions:
        mask = np.asarray(mask)
        if mask.shape != cover.shape or mask.dtype != bool:
            raise InvalidInputError("each region must be a boolean grid mask")
        cover += mask
    if cover.min() < 1 or cover.max() > 1:
        raise InvalidInputError("regions must partition the grid (no gaps, no overlap)")
    strain = sym3.TraceFreeSym3.from_components(grid.ifft(sym_gradient(grid, u_hat)))
    total = 0.0
    peak = 0.0
    for mask, v in zip(regions, directions):
        sv = sym3.apply_to_vector(strain, np.asarray(v, dtype=float))
        mag = np.sqrt(sv[0] ** 2 + sv[1] ** 2 + sv[2] ** 2)[mask]
        if np.isinf(q):
            peak = max(peak, float(mag.max(initial=0.0)))
        else:
            total += float(np.sum(mag ** q))
    if np.isinf(q):
        return peak
    return (total * grid.quad_weight) ** (1.0 / q)


@dataclass
class DiagnosticsRecord:
    """One time sample of every scalar functional tracked during a run."""

    t: float
    enstrophy: float                    # |S|_{L2}^2
    dissipation: float                  # |S|_{H1}^2
    det_integral: float
    tr3_integral: float
    vortex_stretch: float               # <S, w x w>
    strain_cubed: float                 # int |S|^3
    lambda2_norms: dict                 # q -> |l2+|_{L^q}
    lambda2_weighted: float             # int l2+ |S|^2
    force_term: float                   # <-lap u, f>
    force_norm_sq: float                # |f|_{L2}^2
    criterion_integrals: dict = field(default_factory=dict)
    budget_residual: float = math.nan
    vortex_stretch_residual: float = math.nan
    gcon_margin: float = math.nan
    cubic_margin: float = math.nan


class RecordCollector:
    """Streaming diagnostics: feed solver states, then finalize().

    Per-snapshot scalars are computed on the fly so full fields never
    accumulate; the series-level columns (budget residual, growth-
    inequality margin, cubic monitor, criterion integrals) are filled in
    by finalize(), which needs at least 5 uniformly spaced records and
    writes NaN otherwise.
    """

    def __init__(self, grid: Grid, q_list=DEFAULT_Q_LIST, force=None,
                 viscosity: float = 1.0):
        self.grid = grid
        self.q_list = tuple(dict.fromkeys(tuple(q_list) + tuple(DEFAULT_Q_LIST)))
        for q in self.q_list:
            if q < 1.5:
                raise InvalidExponentError(f"q must be >= 3/2, got {q}")
        self.force = force
        self.viscosity = viscosity
        self.records: list[DiagnosticsRecord] = []

    def __call__(self, state) -> DiagnosticsRecord:
        grid = self.grid
        s_hat = sym_gradient(grid, state.u_hat)
        data = sym3.TraceFreeSym3.from_components(grid.ifft(s_hat))
        eig = sym3.eigenvalues(data)
        det_field = sym3.det(data)
        tr3_field = sym3.tr_cubed(data)
        norm_sq = data.norm_sq()

        w = grid.ifft(vorticity(grid, state.u_hat))
        stretch = (data.m11 * w[0] ** 2 + data.m22 * w[1] ** 2
                   + data.m33 * w[2] ** 2
                   + 2.0 * (data.m12 * w[0] * w[1] + data.m13 * w[0] * w[2]
                            + data.m23 * w[1] * w[2]))

        force_term = 0.0
        force_sq = 0.0
        if self.force is not None:
            f_hat = self.force(state.t)
            if f_hat is not None:
                force_term = float(np.sum(grid.ksq * np.real(
                    np.conj(state.u_hat) * f_hat))) * grid.spectral_weight
                force_sq = float(np.sum(np.abs(f_hat) ** 2)) * grid.spectral_weight

        record = DiagnosticsRecord(
            t=state.t,
            enstrophy=strain_norm_sq(grid, s_hat, 0.0),
            dissipation=strain_norm_sq(grid, s_hat, 1.0),
            det_integral=grid.integrate(det_field),
            tr3_integral=grid.integrate(tr3_field),
            vortex_stretch=grid.integrate(stretch),
            strain_cubed=grid.integrate(norm_sq ** 1.5),
            lambda2_norms={q: lq_norm(grid, eig.lambda2_plus, q) for q in self.q_list},
            lambda2_weighted=grid.integrate(eig.lambda2_plus * norm_sq),
            force_term=force_term,
            force_norm_sq=force_sq,
        )
        record.vortex_stretch_residual = vortex_stretch_identity_residual(
            record.vortex_stretch, record.det_integral, record.tr3_integral,
            cubic_scale=record.strain_cubed)
        self.records.append(record)
        return record

    def finalize(self) -> list[DiagnosticsRecord]:
        records = self.records
        if not records:
            return records
        times = np.array([r.t for r in records])
        for q in (np.inf, 2.0):
            norms = [r.lambda2_norms[q] for r in records]
            series = criterion_integral_series(times, norms, q)
            for r, value in zip(records, series):
                r.criterion_integrals[q] = float(value)
        try:
            check_uniform_spacing(times)
            uniform = times.size >= 5
        except InvalidInputError:
            uniform = False
        if uniform:
            e = [r.enstrophy for r in records]
            diss = [r.dissipation for r in records]
            det_int = [r.det_integral for r in records]
            force_term = [r.force_term for r in records]
            force_sq = [r.force_norm_sq for r in records]
            weighted = [r.lambda2_weighted for r in records]
            budget = enstrophy_budget_residual(times, e, diss, det_int,
                                               force_term, self.viscosity)
            gcon = gcon_margins(times, e, diss, weighted, force_sq, self.viscosity)
            cubic = cubic_growth_margins(times, e)
            for r, b, g, c in zip(records, budget, gcon, cubic):
                r.budget_residual = float(b)
                r.gcon_margin = float(g)
                r.cubic_margin = float(c)
        return records


def run_with_diagnostics(config, u0_hat, grid: Grid | None = None,
                         q_list=DEFAULT_Q_LIST, keep_states: bool = False):
    """Integrate a configured run with the record collector attached."""
    if grid is None:
        grid = Grid(config.n)
    force = solver.make_force(grid, config.force)
    collector = RecordCollector(grid, q_list=q_list, force=force,
                                viscosity=config.viscosity)
    result = solver.run(config, u0_hat, grid=grid, on_record=collector,
                        keep_states=keep_states)
    return result, collector.finalize()


def _fmt(value: float) -> str:
    return "%.17g" % value


def write_csv(records, path) -> None:
    """Write the per-record CSV with the fixed column contract."""
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        row = (r.t, r.enstrophy, r.dissipation, r.det_integral, r.tr3_integral,
               r.vortex_stretch, r.lambda2_norms[np.inf], r.lambda2_norms[2.0],
               r.lambda2_norms[1.5], r.criterion_integrals.get(np.inf, math.nan),
               r.criterion_integrals.get(2.0, math.nan), r.budget_residual,
               r.vortex_stretch_residual, r.gcon_margin, r.cubic_margin,
               r.force_term)
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
