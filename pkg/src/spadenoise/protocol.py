"""Rotation-group noise decoupling for repeated demultiplexing.

The control group ``G_m`` holds the rotations ``g_j = exp(-i j pi n / m)``,
``j = 0..2m-1``. A protocol passes the state through ``2mN`` noisy
demultiplexer slots; slot ``s`` is assigned a group index ``k_s`` and the
whole sequence realises ``prod_s g_{k_s}^dagger C_s g_{k_s}``. The
demultiplexer itself acts as the identity on the mode space.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .fock import DEFAULT_DIM, GeneratorExponential, annihilation, creation, polynomial_generator
from .noise import PolynomialNoiseModel


class SlotCountMismatch(ValueError):
    pass


class DegenerateGrid(ValueError):
    pass


def _group_phases(j, m, dim):
    """Diagonal of ``g_j`` with the phase index reduced exactly mod 2m."""
    k = (j * np.arange(dim)) % (2 * m)
    if m in (1, 2):
        # multiples of pi/2: exact phases
        table = np.array([1.0, -1.0j, -1.0, 1.0j])
        return table[(k * (2 // m)) % 4]
    return np.exp(-1j * math.pi * k / m)


@dataclass(frozen=True)
class ControlGroup:
    m: int
    dim: int = DEFAULT_DIM

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")

    @property
    def order(self):
        return 2 * self.m

    def phases(self, j):
        return _group_phases(j % self.order, self.m, self.dim)

    def element(self, j):
        return np.diag(self.phases(j))

    @property
    def elements(self):
        return [self.element(j) for j in range(self.order)]

    def conjugate(self, op, j):
        """``g_j^dagger op g_j`` computed as an exact diagonal rescaling."""
        ph = self.phases(j)
        return ph.conj()[:, None] * op * ph[None, :]


def group_average(op, group: ControlGroup):
    """``(1/2m) sum_j g_j^dagger op g_j``."""
    op = np.asarray(op)
    if op.shape != (group.dim, group.dim):
        raise ValueError(f"operator shape {op.shape} does not match group dim {group.dim}")
    total = np.zeros_like(op, dtype=complex)
    for j in range(group.order):
        total += group.conjugate(op, j)
    return total / group.order


def cross_term(p, q, dim=DEFAULT_DIM):
    """``a^p (a^dagger)^q`` on the truncated space."""
    a = annihilation(dim)
    ad = creation(dim)
    return np.linalg.matrix_power(a, p) @ np.linalg.matrix_power(ad, q)


def cross_term_average(p, q, group: ControlGroup):
    """Group average of ``a^p (a^dagger)^q``: zero unless ``p - q`` is a multiple of 2m."""
    if p < 0 or q < 0:
        raise ValueError("powers must be >= 0")
    return group_average(cross_term(p, q, group.dim), group)


@dataclass(frozen=True)
class ProtocolSchedule:
    """Group index per noisy slot plus the control applied before each slot.

    Cycles ``1..N-1`` visit ``g_0, g_1, ..., g_{2m-1}``; cycle ``N`` runs
    ``g_{2m-1}, ..., g_0`` so the sequence ends on the identity. The control
    before slot ``s`` is ``g_{k_s} g_{k_{s-1}}^dagger = g_{k_s - k_{s-1}}``;
    index 0 (identity) is stored as ``None``.
    """

    m: int
    N: int
    slot_indices: tuple
    reversed_last_cycle: bool = True

    @property
    def n_slots(self):
        return len(self.slot_indices)

    @property
    def steps(self):
        """``(control_before, slot)`` pairs in time order."""
        order = 2 * self.m
        out = []
        prev = 0
        for slot, k in enumerate(self.slot_indices):
            ctrl = (k - prev) % order
            out.append((ctrl or None, slot))
            prev = k
        return out

    @property
    def initial_control(self):
        return self.steps[0][0]

    @property
    def between_controls(self):
        """Controls inserted between consecutive noisy slots."""
        return [ctrl for ctrl, _ in self.steps[1:]]

    @property
    def final_control(self):
        """Control needed after the last slot; ``None`` (identity) by construction."""
        return (-self.slot_indices[-1]) % (2 * self.m) or None

    def cycle_of(self, slot):
        return slot // (2 * self.m), slot % (2 * self.m)


def build_schedule(m, N):
    if m < 1 or N < 1:
        raise ValueError("m and N must be >= 1")
    ascending = list(range(2 * m))
    indices = ascending * (N - 1) + ascending[::-1]
    return ProtocolSchedule(int(m), int(N), tuple(indices))


def control_product(schedule: ProtocolSchedule):
    """Net group index of all controls, final one included (telescopes to 0)."""
    total = sum(ctrl or 0 for ctrl, _ in schedule.steps) + (schedule.final_control or 0)
    return total % (2 * schedule.m)


def _slot_unitaries(noise_draws, lam, dim):
    return [GeneratorExponential(polynomial_generator(b, dim))(lam) for b in noise_draws]


def protocol_product(schedule: ProtocolSchedule, noise_draws, lam, dim=DEFAULT_DIM, unitaries=None):
    """Physical operator of the protocol: slots and controls multiplied in time order.

    ``noise_draws[s]`` are the coefficients of slot ``s``; the slot noise is
    ``exp(i lam H(b_s))``. Precomputed slot unitaries may be passed instead.
    """
    if unitaries is None:
        if len(noise_draws) != schedule.n_slots:
            raise SlotCountMismatch(f"{len(noise_draws)} draws for {schedule.n_slots} slots")
        unitaries = _slot_unitaries(noise_draws, lam, dim)
    elif len(unitaries) != schedule.n_slots:
        raise SlotCountMismatch(f"{len(unitaries)} unitaries for {schedule.n_slots} slots")
    group = ControlGroup(schedule.m, dim)
    U = np.eye(dim, dtype=complex)
    for (ctrl, slot) in schedule.steps:
        if ctrl is not None:
            U = group.phases(ctrl)[:, None] * U
        U = unitaries[slot] @ U
    if schedule.final_control is not None:
        U = group.phases(schedule.final_control)[:, None] * U
    return U


def conjugated_product(schedule: ProtocolSchedule, unitaries, dim=DEFAULT_DIM):
    """``prod_s g_{k_s}^dagger C_s g_{k_s}`` in time order (equals :func:`protocol_product`)."""
    group = ControlGroup(schedule.m, dim)
    U = np.eye(dim, dtype=complex)
    for k, C in zip(schedule.slot_indices, unitaries):
        U = group.conjugate(C, k) @ U
    return U


def decoupling_error(product):
    """``min_phi || e^{i phi} B - I ||_2`` over the low-energy block ``B``."""
    product = np.asarray(product)
    h = product.shape[0] // 2
    B = product[:h, :h]
    eye = np.eye(h)

    def dist(phi):
        return np.linalg.norm(np.exp(1j * phi) * B - eye, 2)

    # coarse scan, then Brent refinement around the best bracket
    grid = np.linspace(-math.pi, math.pi, 65)
    guess = -np.angle(np.trace(B)) if np.trace(B) != 0 else 0.0
    candidates = np.append(grid, guess)
    vals = [dist(p) for p in candidates]
    best = float(candidates[int(np.argmin(vals))])
    step = 2 * math.pi / 64
    res = minimize_scalar(dist, bounds=(best - step, best + step), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, min(vals)))


@dataclass
class DecouplingReport:
    m: int
    N: int
    noise_mode: str
    dim: int
    seeds: list
    lambda_grid: list
    errors: list  # median over seeds, aligned with lambda_grid
    rows: list = field(default_factory=list)  # (seed, lambda, error)
    fitted_slope: float = math.nan
    degree: int = 0

    def as_dict(self):
        return {
            "m": self.m,
            "N": self.N,
            "noise_mode": self.noise_mode,
            "degree": self.degree,
            "dim": self.dim,
            "seeds": list(self.seeds),
            "lambda_grid": list(self.lambda_grid),
            "errors": list(self.errors),
            "fitted_slope": self.fitted_slope,
        }


def fit_loglog_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _seed_errors(schedule, model, lambdas, seed, dim):
    draws = [
        model.sample(slot % (2 * schedule.m), slot // (2 * schedule.m), seed)
        for slot in range(schedule.n_slots)
    ]
    cache = {}
    exps = []
    for b in draws:
        key = b.tobytes()
        if key not in cache:
            cache[key] = GeneratorExponential(polynomial_generator(b, dim))
        exps.append(cache[key])
    out = []
    for lam in lambdas:
        U = protocol_product(schedule, None, lam, dim, unitaries=[e(lam) for e in exps])
        out.append(decoupling_error(U))
    return out


def scaling_sweep(m, N, noise_mode, lambda_grid, seeds, dim=DEFAULT_DIM, degree=None,
                  scales=None, n_jobs=1, min_points=5, max_lambda=0.2):
    """Decoupling error of the ``(m, N)`` protocol across noise scalings ``lambda``.

    Raw coefficients come from :class:`PolynomialNoiseModel` (degree ``m``
    unless given) and are rescaled by every lambda, so one seed yields a whole
    curve. ``errors`` holds the median over seeds; ``fitted_slope`` is the
    log-log slope over the positive lambdas.
    """
    lambdas = [float(x) for x in lambda_grid]
    positive = sorted({x for x in lambdas if x > 0})
    if any(x < 0 or x > max_lambda for x in lambdas) or len(positive) < min_points:
        raise DegenerateGrid(
            f"need >= {min_points} distinct lambdas in (0, {max_lambda}], got {lambda_grid!r}"
        )
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise DegenerateGrid("need at least one seed")
    degree = m if degree is None else int(degree)
    model = PolynomialNoiseModel(degree, 1.0, noise_mode, scales)
    schedule = build_schedule(m, N)
    jobs = [(schedule, model, lambdas, seed, dim) for seed in seeds]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            per_seed = list(pool.map(lambda job: _seed_errors(*job), jobs))
    else:
        per_seed = [_seed_errors(*job) for job in jobs]
    rows = [(seed, lam, err) for seed, errs in zip(seeds, per_seed) for lam, err in zip(lambdas, errs)]
    medians = [float(np.median([errs[i] for errs in per_seed])) for i in range(len(lambdas))]
    return DecouplingReport(
        m, N, noise_mode, dim, seeds, lambdas, medians, rows,
        fit_loglog_slope(lambdas, medians), degree,
    )


def parity_effective_displacement(z1, z2, d):
    """Net coherent amplitude after noise ``z1``, parity, noise ``z2`` acting on ``D(d)|0>``."""
    return d - z2 + z1
