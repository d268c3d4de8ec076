"""Command line driver: ``decohist <subcommand> [options]``.

Every artifact embeds the full configuration, the seed and the tolerance
table in force, and contains no timestamps, so reruns are byte-identical.
Exit codes: 0 success, 1 validation/usage error, 2 selftest failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, cosmo, ensembles, histories, oscillator, qops
from . import io as dio
from . import openquantum as oq
from . import tolerances as tol


class UsageError(Exception):
    """Raised instead of exiting, so that ``run`` can map it to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


# ---------------------------------------------------------------- helpers

def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _range(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected a:b:steps")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from None
    if a <= 0 or b <= 0 or n < 1:
        raise argparse.ArgumentTypeError("range ends must be positive and steps >= 1")
    return a, b, n


def _tolerance(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected name=value")
    k, v = text.split("=", 1)
    if k not in tol.DEFAULTS:
        raise argparse.ArgumentTypeError(f"unknown tolerance {k!r}; known: {', '.join(tol.DEFAULTS)}")
    try:
        return k, float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {k} needs a number") from None


def _config(args):
    skip = {"handler", "output", "format"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if k == "tolerance":
            v = {name: val for name, val in v}
        out[k] = v
    return out


def _artifact(args, result):
    return {
        "command": args.command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "config": _config(args),
        "tolerances": tol.snapshot(),
        "result": result,
    }


def _csv_with_header(args, header, rows):
    meta = json.dumps({"command": args.command, "seed": getattr(args, "seed", None),
                       "config": _config(args), "tolerances": tol.snapshot()}, sort_keys=True)
    return f"# {meta}\n" + dio.csv_text(header, rows)


def _emit(args, text):
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _finish(args, result, csv=None):
    """Write JSON (default) or, with --format csv, the (header, rows) table."""
    if args.format == "csv":
        if csv is None:
            raise UsageError(f"{args.command} has no CSV output; use --format json")
        _emit(args, _csv_with_header(args, *csv))
    else:
        _emit(args, dio.dumps(_artifact(args, result)))
    return 0


def _label(lab):
    return "-".join(str(a) for a in lab)


# ---------------------------------------------------------------- model selection

def _add_model_args(p):
    p.add_argument("--model", help="model JSON file {dim, H, channels}")
    p.add_argument("--preset", choices=["qubit-damping", "thermal-oscillator"], default="qubit-damping")
    p.add_argument("--gamma", type=float, default=1.0, help="decay rate (gamma_- for the oscillator)")
    p.add_argument("--omega", type=float, default=None, help="level spacing (default 0 qubit, 1 oscillator)")
    p.add_argument("--beta", type=float, default=1.0, help="inverse temperature (thermal oscillator)")
    p.add_argument("--levels", type=int, default=None, help="oscillator truncation N (default: tail < 1e-8)")
    p.add_argument("--state", help="initial state JSON: operator or {\"ket\": ...}")


def _model(args):
    if args.model:
        return dio.model_from_json(dio.load_json(args.model))
    if args.preset == "qubit-damping":
        return oq.qubit_damping(args.gamma, 0.0 if args.omega is None else args.omega)
    omega = 1.0 if args.omega is None else args.omega
    N = args.levels or oq.truncation_for_tail(omega, args.beta)
    return oq.thermal_oscillator_model(N, omega, args.beta, args.gamma)


def _state(args, model):
    if args.state:
        return dio.state_from_json(dio.load_json(args.state), args.state, model.dim)
    if args.model:
        raise UsageError("--state is required with --model")
    if args.preset == "qubit-damping":
        return np.diag([0.0, 1.0]).astype(complex)
    omega = 1.0 if args.omega is None else args.omega
    return oq.thermal_state(model.dim, omega, args.beta)


# ---------------------------------------------------------------- subcommands

def _functional_csv(D, rep):
    rows = [(_label(lab), p) for lab, p in zip(rep["labels"], rep["probabilities"] or rep["diagonal"])]
    return ["label", "probability" if rep["probabilities"] is not None else "diagonal"], rows


def cmd_oscillator_phase(args):
    osc = oscillator.TruncatedOscillator(args.N, args.omega)
    sched = oscillator.phase_history_schedule(osc, args.steps)
    D = histories.decoherence_functional(sched, qops.ket_to_dm(osc.ground()))
    rep = dio.functional_report(D, args.epsilon)
    rep["step_direction"] = oscillator.STEP_DIRECTION
    rep["successor_chains"] = [list(c) for c in oscillator.successor_chains(osc, args.steps)]
    return _finish(args, rep, _functional_csv(D, rep))


def cmd_oscillator_energy(args):
    osc = oscillator.TruncatedOscillator(args.N, args.omega)
    gen = np.random.default_rng(args.seed)
    times = args.times or sorted(gen.uniform(0, 10, args.steps).tolist())
    if len(times) != args.steps:
        raise UsageError("--times needs one entry per step")
    if args.initial == "ground":
        rho = qops.ket_to_dm(osc.ground())
    else:
        rho = qops.ket_to_dm(ensembles.initial_state("random", args.N, gen))
    D = histories.decoherence_functional(oscillator.energy_history_schedule(osc, args.steps, times), rho)
    rep = dio.functional_report(D, args.epsilon)
    rep["times"] = times
    return _finish(args, rep, _functional_csv(D, rep))


def cmd_mixed_coherence(args):
    rep = oscillator.mixed_basis_coherence_demo(oscillator.TruncatedOscillator(args.N, args.omega), args.events)
    return _finish(args, rep)


def _load_schedule(args):
    sched, rho_i, rho_f, eps = dio.schedule_from_json(dio.load_json(args.schedule))
    return sched, rho_i, rho_f, args.epsilon if args.epsilon is not None else eps


def cmd_functional(args):
    sched, rho_i, rho_f, eps = _load_schedule(args)
    if rho_f is None:
        D = histories.decoherence_functional(sched, rho_i)
    else:
        D = histories.time_symmetric_functional(sched, rho_i, rho_f)
    rep = dio.functional_report(D, eps)
    if sched.n_events >= 2 and rho_f is None:
        rep["sum_rule_violation"] = [histories.sum_rule_violation(sched, rho_i, x)
                                     for x in range(len(sched.families[-1]))]
    return _finish(args, rep, _functional_csv(D, rep))


def cmd_ts_functional(args):
    sched, rho_i, rho_f, eps = _load_schedule(args)
    if rho_f is None:
        raise dio.InputError(f"{args.schedule}:$.final_state", "required for a time-symmetric functional")
    D = histories.time_symmetric_functional(sched, rho_i, rho_f)
    return _finish(args, dio.functional_report(D, eps), _functional_csv(D, dio.functional_report(D, eps)))


def cmd_lindblad_propagate(args):
    model = _model(args)
    rho = _state(args, model)
    times = args.times or [args.time]
    states = [oq.propagate(model, rho, t, method=args.method) for t in times]
    rows = []
    for t, r in zip(times, states):
        for i in range(model.dim):
            for j in range(model.dim):
                rows.append((t, i, j, float(r[i, j].real), float(r[i, j].imag)))
    result = {
        "model": dio.model_to_json(model),
        "initial_state": dio.operator_to_json(rho),
        "times": times,
        "states": [dio.operator_to_json(r) for r in states],
        "traces": [float(np.trace(r).real) for r in states],
        "min_eigenvalues": [float(np.linalg.eigvalsh(r).min()) for r in states],
        "relaxation_time": _safe_relaxation_time(model),
    }
    return _finish(args, result, (["time", "row", "col", "re", "im"], rows))


def _safe_relaxation_time(model):
    try:
        return oq.relaxation_time(model)
    except oq.DegenerateFixedPointError:
        return None


def cmd_jump_ensemble(args):
    model = _model(args)
    rho = _state(args, model)
    res = oq.ensemble_average(model, rho, args.horizon, args.dt, args.trajectories, args.seed,
                              exact=args.exact_oracle == "on", keep_jumps=True)
    rows = []
    for k, js in enumerate(res.jumps):
        for ev in js:
            rows.append((k, ev.time, ev.channel, "jump"))
        rows.append((k, args.horizon, "", "end"))
    result = {
        "n_trajectories": res.n_trajectories,
        "mean_state": dio.operator_to_json(res.mean),
        "stderr_re": res.stderr,
        "statistical_error_vs_discrete_limit": res.statistical_error,
        "statistical_bound": res.statistical_bound,
        "trace_distance_to_exact": res.trace_distance_to_exact,
        "discretization_bias": res.bias,
        "exact_state": None if res.exact is None else dio.operator_to_json(res.exact),
        "mean_jumps_per_trajectory": float(np.mean(res.jump_counts)),
        "threads": oq.unravel.rng.thread_count(),
    }
    return _finish(args, result, (["trajectory_id", "time", "channel", "event"], rows))


def cmd_povm_step_order(args):
    from .acceptance import _fit_slope, one_step_errors

    model = _model(args)
    rho = _state(args, model)
    dts = args.dts
    errs = one_step_errors(model, rho, dts)
    slope = _fit_slope(dts, errs)
    result = {"dts": dts, "errors": errs, "slope": slope, "target_slope": 2.0,
              "within_0.2": abs(slope - 2.0) <= 0.2}
    return _finish(args, result, (["dt", "error"], list(zip(dts, errs))))


def cmd_relaxation(args):
    model = _model(args)
    gen = np.random.default_rng(args.seed)
    d = model.dim
    fams = [ensembles.sample_random_family(d, [1] * d, gen=gen) for _ in range(args.events)]
    rho0 = _state(args, model) if args.state else None
    rep = oq.relaxation_decoherence_experiment(model, fams, args.ratios, rho0=rho0)
    rows = [(r.spacing_over_tau, r.spacing, r.max_ratio, r.max_marginal_deviation) for r in rep.rows]
    result = {
        "relaxation_time": rep.relaxation_time,
        "fixed_point": dio.operator_to_json(rep.fixed_point),
        "fixed_point_probabilities": rep.fixed_point_probabilities,
        "method": rep.method,
        "rows": [{"spacing_over_tau": r.spacing_over_tau, "spacing": r.spacing, "max_ratio": r.max_ratio,
                  "marginals": r.marginals, "max_marginal_deviation": r.max_marginal_deviation,
                  "max_joint_deviation": r.max_joint_deviation} for r in rep.rows],
    }
    return _finish(args, result, (["spacing_over_tau", "spacing", "max_ratio", "max_marginal_deviation"], rows))


def _lambda(value, ell, name):
    if (value is None) == (ell is None):
        raise UsageError(f"give exactly one of --{name} or --ell{name[-1]}")
    return value if value is not None else 3.0 / ell ** 2


def _brain(args):
    if args.brain_dE is None and args.brain_dS is None:
        return None
    return cosmo.FluctuationSpec(args.brain_dE or 0.0, args.brain_dS or 0.0)


def cmd_cosmo(args):
    lam0 = _lambda(args.lambda0, args.ell0, "lambda0")
    brain = _brain(args)
    if args.mode == "point":
        lam1 = _lambda(args.lambda1, args.ell1, "lambda1")
        params = cosmo.ReinflationParams(lam0, lam1, args.C)
        log_tau, pref = cosmo.recurrence_log_time(params)
        row = {"lambda1": lam1, "log_p_reinflate": cosmo.reinflation_log_probability(params), "log_tau1": log_tau}
        result = {
            "high": vars(params.high).copy(), "low": vars(params.low).copy(),
            "reinflation_energy": cosmo.reinflation_energy(params),
            "recurrence_prefactor": pref, **row,
        }
        if brain is not None:
            cmp = cosmo.compare_boltzmann_brain(params, brain)
            row.update(log_p_brain=cmp.log_p_brain, log_odds=cmp.log_odds)
            result["brain"] = vars(cmp).copy()
        rows = [row]
    else:
        if args.lambda1_range is None:
            raise UsageError("cosmo sweep needs --lambda1-range a:b:steps")
        a, b, n = args.lambda1_range
        # geometric spacing: cosmological terms span many decades
        values = np.geomspace(a, b, n).tolist() if n > 1 else [a]
        rows = cosmo.sweep(lam0, values, args.C, brain)
        lp = [r["log_p_reinflate"] for r in rows]
        result = {"lambda0": lam0, "C": args.C, "rows": rows,
                  "summary": {"n": len(rows), "log_p_min": min(lp), "log_p_max": max(lp)}}
    header = ["lambda1", "log_p_reinflate", "log_tau1"] + (["log_p_brain", "log_odds"] if brain else [])
    return _finish(args, result, (header, [[r[h] for h in header] for r in rows]))


def cmd_random_histories(args):
    ranks = ensembles.equal_partition(args.d, args.rank)
    spec = ensembles.RandomScheduleSpec(args.d, args.events, ranks, args.samples, args.seed)
    rep = ensembles.typical_ratio_experiment(spec, initial=args.initial, families=args.families, beta=args.beta)
    result = {"spec": {"d": spec.d, "n_events": spec.n_events, "ranks": spec.ranks,
                       "samples": spec.samples, "seed": spec.seed},
              "initial": args.initial, "families": args.families, "summary": rep.summary()}
    if args.capacity:
        cap = ensembles.information_capacity_check(args.d, args.events, samples=args.samples,
                                                   seed=args.seed, threshold=args.threshold, initial=args.initial)
        result["capacity"] = {"levels": cap.levels, "threshold": cap.threshold,
                              "crossing_history_probability": cap.crossing_probability,
                              "crossing_event_probability": cap.crossing_event_probability,
                              "prediction": cap.prediction, "crossing_factor": cap.crossing_factor}
    rows = [(int(s), f"{_label(pr[0])}|{_label(pr[1])}", p, q, r)
            for s, pr, p, q, r in zip(rep.sample, rep.pairs, rep.p, rep.p_prime, rep.ratio)]
    return _finish(args, result, (["sample", "pair", "p", "p_prime", "ratio"], rows))


def cmd_selftest(args):
    from . import acceptance

    lines = []
    results = acceptance.run_all(set(args.only) if args.only else None, echo=lines.append)
    for line in lines:
        print(line, file=sys.stderr)
    result = {"criteria": [{"number": r.number, "title": r.title, "passed": r.passed,
                            "elapsed": round(r.elapsed, 3), "budget": r.budget,
                            "details": _plain(r.details)} for r in results],
              "all_passed": all(r.passed for r in results)}
    _finish(args, result)
    return 0 if result["all_passed"] else 2


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# ---------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (recorded in every artifact)")
    common.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="NAME=VALUE",
                        help=f"override a named tolerance ({', '.join(tol.DEFAULTS)})")
    common.add_argument("--output", "-o", help="output path (default stdout)")
    common.add_argument("--format", choices=["json", "csv"], default="json")

    parser = _Parser(prog="decohist", description="Decoherent histories and open-system simulation.")
    parser.add_argument("--version", action="version", version=f"decohist {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    def add(name, handler, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(handler=handler)
        return p

    p = add("oscillator-phase", cmd_oscillator_phase, "phase-state histories of the truncated oscillator")
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=None)

    p = add("oscillator-energy", cmd_oscillator_energy, "energy-eigenstate histories at arbitrary times")
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--times", type=_floats, default=None, help="comma-separated event times (default: seeded)")
    p.add_argument("--initial", choices=["random", "ground"], default="random")
    p.add_argument("--epsilon", type=float, default=None)

    p = add("mixed-coherence", cmd_mixed_coherence, "ground -> phase events -> ground: fully coherent")
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--events", type=int, default=3)
    p.add_argument("--omega", type=float, default=1.0)

    for name, handler, help_ in (("functional", cmd_functional, "decoherence functional of a schedule file"),
                                 ("ts-functional", cmd_ts_functional, "time-symmetric functional (final state required)")):
        p = add(name, handler, help_)
        p.add_argument("--schedule", required=True, help="schedule JSON file")
        p.add_argument("--epsilon", type=float, default=None)

    p = add("lindblad-propagate", cmd_lindblad_propagate, "propagate a state under a Lindblad model")
    _add_model_args(p)
    p.add_argument("--time", type=float, default=1.0)
    p.add_argument("--times", type=_floats, default=None)
    p.add_argument("--method", choices=["auto", "expm", "rk"], default="auto")

    p = add("jump-ensemble", cmd_jump_ensemble, "quantum-jump trajectories and their ensemble average")
    _add_model_args(p)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--trajectories", type=int, default=1000)
    p.add_argument("--exact-oracle", choices=["on", "off"], default="on")

    p = add("povm-step-order", cmd_povm_step_order, "one-step error of the measurement+feedback map")
    _add_model_args(p)
    p.add_argument("--dts", type=_floats, default=[1e-1, 1e-2, 1e-3, 1e-4])

    p = add("relaxation", cmd_relaxation, "decoherence of events spaced by multiples of the relaxation time")
    _add_model_args(p)
    p.add_argument("--events", type=int, default=3)
    p.add_argument("--ratios", type=_floats, default=[0.0, 1.0, 5.0, 10.0, 20.0])

    p = add("cosmo", cmd_cosmo, "reinflation / recurrence / Boltzmann-brain log-probabilities")
    p.add_argument("mode", nargs="?", choices=["point", "sweep"], default="point")
    p.add_argument("--lambda0", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--ell0", type=float, help="high-phase horizon length instead of --lambda0")
    p.add_argument("--ell1", type=float, help="low-phase horizon length instead of --lambda1")
    p.add_argument("--lambda1-range", type=_range, help="a:b:steps, geometrically spaced")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--brain-dE", type=float, default=None)
    p.add_argument("--brain-dS", type=float, default=None)

    p = add("random-histories", cmd_random_histories, "typical histories of random coarse-grained projectors")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--events", type=int, default=2)
    p.add_argument("--rank", type=int, default=32, help="projector rank (equal blocks)")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--initial", choices=["random", "ground", "thermal"], default="random")
    p.add_argument("--families", choices=["random", "energy"], default="random")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--capacity", action="store_true", help="also sweep fineness for the capacity crossing")
    p.add_argument("--threshold", type=float, default=0.1)

    p = add("selftest", cmd_selftest, "run the acceptance suite")
    p.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")], default=None,
                   help="comma-separated criterion numbers")
    return parser


def run(argv=None):
    """Parse ``argv`` and execute; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError(build_parser().format_help())
        with tol.override(**dict(args.tolerance)):
            return args.handler(args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except (ValueError, KeyError, LookupError, ArithmeticError) as exc:
        print(f"decohist: error: {exc}", file=sys.stderr)
        return 1


def main():
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()
