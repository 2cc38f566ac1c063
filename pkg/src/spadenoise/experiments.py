"""Experiment drivers behind the command-line subcommands.

Each ``cmd_*`` takes an :class:`~spadenoise.config.ExperimentConfig`, fills in
the defaults for its command and returns plain rows or a report dict; the CLI
layer only handles I/O.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import ConfigError, ExperimentConfig, validate
from .fisher import F_MAX, fisher_bispade_analytic
from .fock import annihilation, creation
from .noise import GaussianDisplacementModel, effective_sigma
from .protocol import ControlGroup, cross_term, group_average, scaling_sweep
from .spade import prob_gaussian_noise, prob_mc

SWEEP_SIGMAS = [0.0, 0.01, 0.1, 0.5]
DECOUPLED_EPSILONS = [0.05, 0.5, math.sqrt(3) / 2, 0.95]
D_SWEEP = [round(0.01 * k, 12) for k in range(301)]
PROB_CHECK_D = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5]
PROTOCOL_LAMBDAS = [0.01, 0.02, 0.04, 0.08, 0.16]
CHECK_THRESHOLD = 1e-12
Z_THRESHOLD = 4.0

FISHER_SCHEMA = [("sigma_tilde", "float"), ("d", "float"), ("fisher", "float"),
                 ("fisher_over_fmax", "float")]
DECOUPLED_SCHEMA = [("epsilon", "float"), ("sigma_eps", "float"), ("d", "float"),
                    ("fisher", "float"), ("fisher_over_fmax", "float")]
PROTOCOL_SCHEMA = [("m", "int"), ("N", "int"), ("noise_mode", "str"), ("lambda", "float"),
                   ("seed", "int"), ("error", "float")]


def _map(fn, items, workers):
    # results come back in submission order, so output order is canonical
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def cmd_fisher_sweep(cfg: ExperimentConfig):
    cfg = validate(cfg.updated(command="fisher-sweep"))
    sigmas = cfg.sigma_tilde or SWEEP_SIGMAS
    ds = cfg.d or D_SWEEP
    points = [(s, d) for s in sigmas for d in ds]

    def row(point):
        s, d = point
        f = fisher_bispade_analytic(d, s)
        return {"sigma_tilde": s, "d": d, "fisher": f, "fisher_over_fmax": f / F_MAX}

    return FISHER_SCHEMA, _map(row, points, cfg.workers)


def cmd_decoupled_fisher_sweep(cfg: ExperimentConfig):
    cfg = validate(cfg.updated(command="decoupled-fisher-sweep"))
    sigma = (cfg.sigma_tilde or [0.5])[0]
    if cfg.sigma_tilde and len(cfg.sigma_tilde) > 1:
        raise ConfigError("decoupled sweep takes a single sigma_tilde", "sigma_tilde")
    eps_grid = cfg.epsilon or DECOUPLED_EPSILONS
    ds = cfg.d or D_SWEEP
    points = [(e, d) for e in eps_grid for d in ds]

    def row(point):
        e, d = point
        s_eps = effective_sigma(sigma, e)
        f = fisher_bispade_analytic(d, s_eps)
        return {"epsilon": e, "sigma_eps": s_eps, "d": d, "fisher": f, "fisher_over_fmax": f / F_MAX}

    return DECOUPLED_SCHEMA, _map(row, points, cfg.workers)


def cmd_prob_check(cfg: ExperimentConfig):
    cfg = validate(cfg.updated(command="prob-check"))
    samples = cfg.samples or 1_000_000
    if samples < 10_000:
        raise ConfigError("prob-check needs at least 10^4 samples", "samples")
    ds = cfg.d or PROB_CHECK_D
    sigmas = cfg.sigma_tilde or [0.1, 0.5]
    ns = cfg.n or [0, 1, 2]
    points = [(s, d, n) for s in sigmas for d in ds for n in ns]

    def check(point):
        s, d, n = point
        closed = prob_gaussian_noise(n, d, s)
        est = prob_mc(n, d, GaussianDisplacementModel(s), samples, "plain", cfg.seed)
        z = est.zscore(closed)
        return {
            "sigma_tilde": s, "d": d, "n": n, "closed_form": closed, "mc_mean": est.mean,
            "mc_se": est.se, "z": z, "pass": bool(abs(z) < Z_THRESHOLD),
        }

    results = _map(check, points, cfg.workers)
    return {
        "samples": samples,
        "threshold": Z_THRESHOLD,
        "points": results,
        "pass_rate": sum(r["pass"] for r in results) / len(results),
        "passed": all(r["pass"] for r in results),
    }


def cmd_protocol_sim(cfg: ExperimentConfig):
    cfg = validate(cfg.updated(command="protocol-sim"))
    lambdas = cfg.lam or PROTOCOL_LAMBDAS
    seeds = cfg.seeds or [cfg.seed]
    mode = cfg.noise_mode or "identical"
    reports = []
    rows = []
    for m in cfg.m or [2]:
        for N in cfg.N or [1]:
            rep = scaling_sweep(m, N, mode, lambdas, seeds, cfg.dim, cfg.degree,
                                n_jobs=cfg.workers, min_points=1)
            reports.append(rep)
            for seed, lam, err in rep.rows:
                rows.append({"m": m, "N": N, "noise_mode": mode, "lambda": lam, "seed": seed,
                             "error": err})
    return PROTOCOL_SCHEMA, rows, [r.as_dict() for r in reports]


def group_residuals(m, dim):
    """Relative residuals of the erasure and preservation identities for ``p, q <= 2m``.

    ``a^p (a^dagger)^q`` with ``p != q`` must average to zero (pairs with
    ``|p - q| = 2m`` are outside the identity and reported as excluded);
    ``p == q`` must come back unchanged. Residuals are Frobenius norms
    relative to the operator, since entries of high powers reach ``dim^p``.
    """
    group = ControlGroup(m, dim)
    erasure, preservation, excluded = [], [], []
    a = annihilation(dim)
    ad = creation(dim)
    for p in range(2 * m + 1):
        for q in range(2 * m + 1):
            if p == 0 and q == 0:
                continue
            op = cross_term(p, q, dim)
            avg = group_average(op, group)
            scale = np.linalg.norm(op)
            if p == q:
                res = np.linalg.norm(avg - op) / scale
                preservation.append({"p": p, "q": q, "residual": float(res)})
            elif abs(p - q) % (2 * m) == 0:
                excluded.append({"p": p, "q": q})
            else:
                res = np.linalg.norm(avg) / scale
                erasure.append({"p": p, "q": q, "residual": float(res)})
    # first-order averages of the ladder operators themselves
    ladder = max(np.linalg.norm(group_average(a, group)), np.linalg.norm(group_average(ad, group)))
    ladder /= np.linalg.norm(a)
    max_erase = max([r["residual"] for r in erasure] + [float(ladder)])
    max_keep = max(r["residual"] for r in preservation)
    return {
        "m": m,
        "dim": dim,
        "ladder_average_residual": float(ladder),
        "erasure": erasure,
        "preservation": preservation,
        "excluded": excluded,
        "max_erasure_residual": max_erase,
        "max_preservation_residual": max_keep,
        "passed": bool(max_erase < CHECK_THRESHOLD and max_keep < CHECK_THRESHOLD),
    }


def cmd_group_check(cfg: ExperimentConfig):
    cfg = validate(cfg.updated(command="group-check"))
    ms = cfg.m or [1, 2, 3]
    for m in ms:
        if cfg.dim < 4 * m:
            raise ConfigError(f"group-check needs dim >= 4m (m={m})", "dim")
    results = [group_residuals(m, cfg.dim) for m in ms]
    return {"threshold": CHECK_THRESHOLD, "groups": results, "passed": all(r["passed"] for r in results)}
