"""``laserlab`` command-line interface.

    laserlab <command> --config FILE.json [--out PATH] [--seed U64] [--self-check]

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 self-check failure.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analytic, config, dynamics, export, spectral, stochastic
from .errors import (ConfigError, DivergenceError, InvariantViolation,
                     QuadratureError, ValidationError)
from .model import DEFAULT_THRESHOLD_TOL, LaserParams, classify_regime
from .streams import rng_metadata

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_SELF_CHECK = 0, 2, 3, 4

#: standard errors allowed in statistical self-checks
SELF_CHECK_NSE = 4.0


class SelfCheckFailed(Exception):
    pass


def _require(ok, message):
    if not ok:
        raise SelfCheckFailed(message)


def _close(a, b, rtol):
    return abs(a - b) <= rtol * max(abs(a), abs(b))


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _check_analytic(params):
    """Closed forms against the linear-algebra steady state and identities."""
    pops = analytic.steady_populations(params)
    solved, mdm, _ = dynamics.steady_state_solve(params)
    for x, y in zip(pops.as_tuple(), solved.as_tuple()):
        _require(_close(x, y, 1e-12), f"populations disagree: {x!r} vs {y!r}")
    _require(_close(mdm / params.n_atoms, pops.na + pops.nb, 1e-12),
             "<m+ m>/N differs from na + nb")
    analytic.photon_variance(params)  # raises on identity failure
    vp, vm = analytic.quadrature_variances(params)
    coh = analytic.coherent_reference_variance(params)
    s, s_out = analytic.quadrature_squeezing(params)
    _require(abs((coh - vm) / coh - s) <= 1e-12, "squeezing pipeline disagrees")
    _require(s_out == s, "output squeezing differs from cavity squeezing")
    _, bound, _ = analytic.quantum_diagnostics(params)
    _require(vp * vm >= bound**2 * (1 - 1e-12), "uncertainty relation violated")
    return {"analytic": "ok"}


def cmd_report(args, cfg, params):
    check = _check_analytic(params) if args.self_check else None
    tol = cfg.get("threshold_tol", DEFAULT_THRESHOLD_TOL)
    payload = analytic.statistics_report(params).to_dict()
    payload["regime"] = str(classify_regime(params, tol))
    payload["derived"] = params.derived_dict()
    meta = export.run_metadata("report", params)
    if check:
        meta["self_check"] = check
    with _output(args.out) as fh:
        export.write_json(fh, {"metadata": meta, "report": payload})


def _sweep_row(params, eta):
    p = LaserParams.from_eta(eta, g=params.g, kappa=params.kappa, n_atoms=params.n_atoms)
    s, _ = analytic.quadrature_squeezing(p)
    nbar = analytic.mean_photon_number(p)
    return (eta, s, nbar / p.n_atoms, analytic.photon_variance(p) / nbar**2), p


def cmd_sweep(args, cfg, params):
    if "sweep" not in cfg:
        raise ConfigError("sweep: block required")
    etas = config.expand(cfg["sweep"]["eta"])
    if not etas:
        raise ConfigError("sweep/eta: empty grid")
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        results = list(pool.map(lambda e: _sweep_row(params, e), etas))
    rows = [r for r, _ in results]
    meta = export.run_metadata("sweep", params)
    if args.self_check:
        for row, p in results:
            vp, vm = analytic.quadrature_variances(p)
            coh = analytic.coherent_reference_variance(p)
            _require(abs((coh - vm) / coh - row[1]) <= 1e-12,
                     f"squeezing pipeline disagrees at eta={row[0]!r}")
            _require(abs(row[3] - 0.25 * (3 * row[0] + 2)) <= 1e-12 * row[3],
                     f"variance ratio disagrees at eta={row[0]!r}")
        meta["self_check"] = {"rows": len(rows)}
    with _output(args.out) as fh:
        export.write_csv(fh, ("eta", "S", "nbar_over_N", "nvar_ratio"), rows, meta)


def _init_state(params, block):
    if not block:
        return None
    b = block.get("b", [0.0, 0.0])
    default = dynamics.MomentState.bottom(params.n_atoms)
    return dynamics.MomentState(
        block.get("na", default.na), block.get("nb", default.nb),
        block.get("nc", default.nc), b=complex(b[0], b[1]),
        mdm=block.get("mdm", 0.0), madma=block.get("madma", 0.0))


def cmd_dynamics(args, cfg, params):
    block = cfg.get("dynamics", {})
    init = _init_state(params, block.get("init"))
    try:
        traj = dynamics.evolve_moments(params, init, block.get("t_end"), block.get("dt"),
                                       block.get("sample_every"))
    except dynamics.LaserLabError as exc:
        if isinstance(exc, DivergenceError):
            raise
        raise ConfigError(str(exc)) from exc
    meta = export.run_metadata("dynamics", params, extra={"trajectory": traj.metadata})
    if args.self_check:
        check = _check_analytic(params)
        total = traj.data[:, :3].real.sum(axis=1)
        n0 = total[0]
        _require(np.max(np.abs(total - n0)) <= 1e-10 * max(n0, 1.0),
                 "population not conserved along the trajectory")
        meta["self_check"] = check
    with _output(args.out) as fh:
        export.write_csv(fh, dynamics.CSV_COLUMNS, traj.rows(), meta)


def cmd_gillespie(args, cfg, params):
    if "gillespie" not in cfg:
        raise ConfigError("gillespie: block required")
    block = cfg["gillespie"]
    t_end = block["t_end"]
    jc = stochastic.JumpConfig(
        n_atoms=params.n_atoms, t_end=t_end,
        burn_in=block.get("burn_in", 0.1 * t_end), seed=args.seed,
        sample_stride=block.get("sample_stride", t_end / 1000.0),
        n_batches=block.get("n_batches", 40))
    res = stochastic.gillespie_populations(params, jc)
    exp_fracs = analytic.steady_populations(params).fractions()
    cfg_echo = res.metadata["config"]
    records = []
    for name, est in zip(("na", "nb", "nc"), res.estimates):
        records.append(stochastic.estimate_record(name, est, cfg_echo))
    for name, est in zip(("frac_a", "frac_b", "frac_c"), res.fractions):
        records.append(stochastic.estimate_record(name, est, cfg_echo))
    meta = export.run_metadata("gillespie", params, args.seed,
                               {"rng": rng_metadata(args.seed), "n_events": res.n_events})
    if args.self_check:
        zs = [e.z_score(v) for e, v in zip(res.fractions, exp_fracs)]
        _require(max(zs) <= SELF_CHECK_NSE,
                 f"level fractions deviate from the closed form by {max(zs):.2f} SE")
        meta["self_check"] = {"max_z": max(zs), "n_se": SELF_CHECK_NSE}
    with _output(args.out) as fh:
        export.write_json(fh, {"metadata": meta, "records": records,
                               "expected_fractions": list(exp_fracs)})


def cmd_langevin(args, cfg, params):
    if "langevin" not in cfg:
        raise ConfigError("langevin: block required")
    block = cfg["langevin"]
    dt = block.get("dt", stochastic.max_langevin_dt(params))
    res = stochastic.langevin_ensemble(
        params, block["n_traj"], block["t_end"], dt, args.seed,
        burn_in=block.get("burn_in"), sample_every=block.get("sample_every", 10),
        n_workers=args.workers)
    meta = export.run_metadata("langevin", params, args.seed, {"rng": rng_metadata(args.seed)})
    if args.self_check:
        z = res["bdb"].z_score(analytic.mean_photon_number(params))
        _require(z <= SELF_CHECK_NSE, f"<b+ b> deviates from the closed form by {z:.2f} SE")
        meta["self_check"] = {"bdb_z": z, "n_se": SELF_CHECK_NSE}
    with _output(args.out) as fh:
        export.write_json(fh, {"metadata": meta, "records": res.records()})


def cmd_correlate(args, cfg, params):
    if "correlate" not in cfg:
        raise ConfigError("correlate: block required")
    block = cfg["correlate"]
    dt = block.get("dt", stochastic.max_langevin_dt(params))
    t_anchor = block.get("t_anchor", 10.0 / min(params.mu, params.kappa))
    res = stochastic.two_time_correlation(
        params, block["n_traj"], t_anchor, config.expand(block["tau"]), dt, args.seed,
        n_anchors=block.get("n_anchors", 1), n_workers=args.workers)
    meta = export.run_metadata("correlate", params, args.seed,
                               {"rng": rng_metadata(args.seed), "bdb_ss": res.bdb_ss,
                                "bdb_slaved": res.bdb_slaved})
    if args.self_check:
        _require(res.max_deviation() <= SELF_CHECK_NSE,
                 f"correlation deviates from the bi-exponential by {res.max_deviation():.2f} SE")
        meta["self_check"] = {"max_z": res.max_deviation(), "n_se": SELF_CHECK_NSE}
    with _output(args.out) as fh:
        export.write_csv(fh, ("tau", "re_corr", "im_corr", "std_error", "model", "deviation_se"),
                         res.rows(), meta)


def cmd_band(args, cfg, params):
    if "band" not in cfg:
        raise ConfigError("band: block required")
    lams = config.expand(cfg["band"]["lambda"])
    reports = [spectral.band_report(params, lam) for lam in lams]
    meta = export.run_metadata("band", params)
    if args.self_check:
        tol = cfg["band"].get("abs_tol", 1e-10)
        s, _ = analytic.quadrature_squeezing(params)
        worst = 0.0
        for rep in reports:
            _require(abs(rep.squeezing_band - s) <= 1e-12, f"band squeezing differs at {rep.lam!r}")
            if rep.lam > 0:
                chk = spectral.verify_band_by_quadrature(params, rep.lam, tol)
                _require(chk.agrees, f"quadrature disagrees at lambda={rep.lam!r}")
                worst = max(worst, abs(chk.difference))
        meta["self_check"] = {"max_quadrature_difference": worst}
    with _output(args.out) as fh:
        export.write_csv(fh, ("lambda", "z", "var_minus_band", "squeezing_band"),
                         (r.row() for r in reports), meta)


def cmd_spectrum(args, cfg, params):
    if "spectrum" not in cfg:
        raise ConfigError("spectrum: block required")
    block = cfg["spectrum"]
    omega = np.linspace(-block["omega_max"], block["omega_max"], block["num"])
    curve = spectral.quadrature_spectrum(params, omega, block.get("quadrature", "minus"))
    meta = export.run_metadata("spectrum", params, extra={"quadrature": curve.quadrature})
    if args.self_check:
        area, var = spectral.spectrum_normalization(params)
        _require(_close(area, var, 1e-6), f"spectrum area {area!r} differs from variance {var!r}")
        meta["self_check"] = {"area": area, "variance": var}
    with _output(args.out) as fh:
        export.write_csv(fh, ("omega", "s_minus"), curve.rows(), meta)


COMMANDS = {
    "report": (cmd_report, "closed-form statistics report (JSON)"),
    "sweep": (cmd_sweep, "squeezing and photon statistics over an eta grid (CSV)"),
    "dynamics": (cmd_dynamics, "moment-equation trajectory (CSV)"),
    "gillespie": (cmd_gillespie, "jump-process population estimates (JSON)"),
    "langevin": (cmd_langevin, "Langevin ensemble moment estimates (JSON)"),
    "correlate": (cmd_correlate, "two-time field correlation (CSV)"),
    "band": (cmd_band, "band-limited variance and squeezing (CSV)"),
    "spectrum": (cmd_spectrum, "quadrature fluctuation spectrum (CSV)"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="laserlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--seed", type=int, default=None,
                       help="unsigned 64-bit seed (overrides the config)")
        p.add_argument("--self-check", action="store_true",
                       help="run oracle comparisons before emitting results")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handler, _ = COMMANDS[args.command]
    try:
        cfg = config.load(args.config)
        params = config.params_of(cfg)
        if args.seed is None:
            args.seed = cfg.get("seed", 0)
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
        handler(args, cfg, params)
    except (ConfigError, ValidationError) as exc:
        print(f"laserlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, QuadratureError) as exc:
        print(f"laserlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (SelfCheckFailed, InvariantViolation) as exc:
        print(f"laserlab: self-check failed: {exc}", file=sys.stderr)
        return EXIT_SELF_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
