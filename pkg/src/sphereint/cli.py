"""Command-line harness: run / converge / compare / oracle.

Scenario descriptions are flat JSON files; results are CSV with
`#`-prefixed header comment lines. Canonical coordinates are printed with
17 significant digits so a written state round-trips bit-exactly. Identical
configs produce bit-identical output except for the two timing comment
lines (wall_clock_s, steps_per_second), which necessarily vary run to run.

Exit codes: 0 ok, 2 config error, 3 numerical error (with the failing step
index on stderr), 4 partial comparison failure, 5 calibration failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import (
    DiagnosticsRow,
    convergence_study,
    diagnose_trajectory,
)
from .errors import CalibrationError, ConfigError, SimulationError
from .hamiltonian import SphereNBodyHamiltonian, SplitHamiltonian
from .integrators import (
    DopriConfig,
    MidpointSolverConfig,
    dopri45_integrate,
    integrate,
)
from .oracle import (
    OracleParams,
    PETAL_ADVANCE,
    build_benchmark_initial_state,
    closure_distance,
    phi_of_t,
    theta_of_t,
)
from .phase import PhaseState, SphereParams, validate_state

METHODS = ("sesi2", "sesi4", "midpoint", "dopri45")
FIXED_STEP_METHODS = ("sesi2", "sesi4", "midpoint")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4
EXIT_CALIBRATION = 5

_ORACLE_SAMPLES_PER_PERIOD = 256
_ORACLE_PERIODS = 6


# --------------------------------------------------------------------------
# scenario parsing


@dataclass(frozen=True)
class ScenarioConfig:
    params: SphereParams
    initial: object  # "benchmark" or tuple of (theta, phi, p_theta, p_phi)
    method: str | None
    methods: tuple[str, ...] | None
    tau: float | None
    n_steps: int | None
    sample_every: int
    taus: tuple[float, ...] | None
    t_final: float | None
    midpoint: MidpointSolverConfig
    dopri: DopriConfig
    raw: dict


_PARAM_KEYS = {"n_bodies", "mass", "radius", "theta0"}
_SOLVER_KEYS = {
    "midpoint_tolerance",
    "midpoint_max_iterations",
    "dopri_rel_tol",
    "dopri_abs_tol",
    "dopri_initial_step",
    "dopri_max_step",
    "dopri_safety",
}
_COMMAND_KEYS = {
    "run": _PARAM_KEYS | _SOLVER_KEYS | {"initial", "method", "tau", "n_steps", "sample_every"},
    "converge": _PARAM_KEYS | _SOLVER_KEYS | {"initial", "method", "taus", "t_final"},
    "compare": _PARAM_KEYS | _SOLVER_KEYS | {"initial", "methods", "tau", "n_steps", "sample_every"},
    "oracle": _PARAM_KEYS | {"initial", "tau"},
}


def _number(raw: dict, key: str, default=None, required=False):
    if key not in raw:
        if required:
            raise ConfigError(f"missing required field {key!r}")
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"field {key!r} must be a number, got {v!r}")
    return float(v)


def _integer(raw: dict, key: str, default=None, required=False):
    if key not in raw:
        if required:
            raise ConfigError(f"missing required field {key!r}")
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"field {key!r} must be an integer, got {v!r}")
    return v


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def parse_scenario(raw: dict, command: str) -> ScenarioConfig:
    allowed = _COMMAND_KEYS[command]
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(
            f"unknown field(s) for {command!r}: {', '.join(sorted(unknown))}"
        )

    initial = raw.get("initial", "benchmark")
    if initial != "benchmark":
        if not (
            isinstance(initial, list)
            and initial
            and all(isinstance(row, list) and len(row) == 4 for row in initial)
        ):
            raise ConfigError(
                'field "initial" must be "benchmark" or a list of '
                "[theta, phi, p_theta, p_phi] rows"
            )
        initial = tuple(tuple(float(v) for v in row) for row in initial)

    n_bodies = _integer(raw, "n_bodies")
    if initial == "benchmark":
        if n_bodies is None:
            n_bodies = 3
        theta0 = _number(raw, "theta0", default=math.pi / 4)
        if n_bodies != 3 or abs(theta0 - math.pi / 4) > 1e-12:
            raise ConfigError("benchmark initial requires n_bodies = 3 and theta0 = pi/4")
    else:
        if n_bodies is None:
            n_bodies = len(initial)
        elif n_bodies != len(initial):
            raise ConfigError(
                f"n_bodies = {n_bodies} does not match {len(initial)} initial rows"
            )
        theta0 = _number(raw, "theta0", default=math.pi / 4)

    try:
        params = SphereParams(
            n_bodies=n_bodies,
            mass=_number(raw, "mass", default=1.0),
            radius=_number(raw, "radius", default=1.0),
            theta0=theta0,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    method = raw.get("method")
    methods = raw.get("methods")
    if command in ("run", "converge"):
        if method not in (METHODS if command == "run" else FIXED_STEP_METHODS):
            choices = METHODS if command == "run" else FIXED_STEP_METHODS
            raise ConfigError(f'field "method" must be one of {choices}, got {method!r}')
    if command == "compare":
        if not (isinstance(methods, list) and len(methods) >= 2):
            raise ConfigError('field "methods" must list at least 2 methods')
        if len(set(methods)) != len(methods):
            raise ConfigError('field "methods" has duplicates')
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown method(s): {bad}")
        methods = tuple(methods)

    tau = _number(raw, "tau", required=command in ("run", "compare"))
    if command == "oracle" and tau is None:
        tau = 0.01
    if tau is not None and not (tau != 0 and math.isfinite(tau)):
        raise ConfigError(f'field "tau" must be a nonzero finite number, got {tau}')

    n_steps = _integer(raw, "n_steps", required=command in ("run", "compare"))
    if n_steps is not None and n_steps < 1:
        raise ConfigError(f'field "n_steps" must be >= 1, got {n_steps}')
    sample_every = _integer(raw, "sample_every", default=1)
    if sample_every < 1:
        raise ConfigError(f'field "sample_every" must be >= 1, got {sample_every}')
    if n_steps is not None and n_steps % sample_every != 0:
        raise ConfigError(
            f"sample_every = {sample_every} must divide n_steps = {n_steps}"
        )

    taus = raw.get("taus")
    t_final = _number(raw, "t_final")
    if command == "converge":
        if not (isinstance(taus, list) and all(isinstance(v, (int, float)) for v in taus)):
            raise ConfigError('field "taus" must be a list of numbers')
        if len(taus) < 3:
            raise ConfigError(f"need at least 3 step sizes, got {len(taus)}")
        taus = tuple(float(v) for v in taus)
        if t_final is None:
            raise ConfigError('missing required field "t_final"')

    try:
        midpoint = MidpointSolverConfig(
            tolerance=_number(raw, "midpoint_tolerance", default=1e-13),
            max_iterations=_integer(raw, "midpoint_max_iterations", default=50),
        )
        dopri = DopriConfig(
            rel_tol=_number(raw, "dopri_rel_tol", default=1e-3),
            abs_tol=_number(raw, "dopri_abs_tol", default=1e-6),
            initial_step=_number(raw, "dopri_initial_step", default=0.01),
            max_step=_number(raw, "dopri_max_step", default=10.0),
            safety=_number(raw, "dopri_safety", default=0.9),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return ScenarioConfig(
        params=params,
        initial=initial,
        method=method,
        methods=methods,
        tau=tau,
        n_steps=n_steps,
        sample_every=sample_every,
        taus=taus,
        t_final=t_final,
        midpoint=midpoint,
        dopri=dopri,
        raw=raw,
    )


def build_initial(
    config: ScenarioConfig,
) -> tuple[PhaseState, SphereNBodyHamiltonian, OracleParams | None]:
    hamiltonian = SphereNBodyHamiltonian(config.params)
    if config.initial == "benchmark":
        state, oracle = build_benchmark_initial_state(config.params)
        return state, hamiltonian, oracle
    rows = config.initial
    state = PhaseState(
        0.0,
        [r[0] for r in rows],
        [r[1] for r in rows],
        [r[2] for r in rows],
        [r[3] for r in rows],
    )
    violation = validate_state(state, config.params)
    if violation is not None:
        raise ConfigError(
            f"initial state invalid at body {violation.body}, "
            f"field {violation.field}: {violation.detail}"
        )
    return state, hamiltonian, None


# --------------------------------------------------------------------------
# integration drivers


class _CountingHamiltonian(SplitHamiltonian):
    """Forwarding proxy that counts interaction-gradient evaluations (one
    per right-hand-side evaluation of the adaptive integrator)."""

    def __init__(self, inner: SplitHamiltonian):
        super().__init__(inner.params)
        self._inner = inner
        self.gradient_calls = 0

    def h1(self, state):
        return self._inner.h1(state)

    def h2(self, state):
        return self._inner.h2(state)

    def h3(self, state):
        return self._inner.h3(state)

    def dh1_dptheta(self, state):
        return self._inner.dh1_dptheta(state)

    def dh2_dpphi(self, state):
        return self._inner.dh2_dpphi(state)

    def dh2_dtheta(self, state):
        return self._inner.dh2_dtheta(state)

    def dh3_dtheta(self, state):
        return self._inner.dh3_dtheta(state)

    def dh3_dphi(self, state):
        return self._inner.dh3_dphi(state)

    def h3_gradients(self, state):
        self.gradient_calls += 1
        return self._inner.h3_gradients(state)


@dataclass
class RunResult:
    samples: list[PhaseState]
    rows: list[DiagnosticsRow]
    wall_clock: float
    steps_per_second: float
    extra_header: tuple[tuple[str, str], ...] = ()


def run_scenario(
    config: ScenarioConfig,
    state: PhaseState,
    hamiltonian: SphereNBodyHamiltonian,
) -> RunResult:
    """Integrate one scenario. Wall clock covers the stepping loop only."""
    method = config.method
    if method == "dopri45":
        counting = _CountingHamiltonian(hamiltonian)
        t_end = state.t + config.n_steps * config.tau
        cadence = config.tau * config.sample_every
        start = time.perf_counter()
        samples = dopri45_integrate(state, counting, t_end, config.dopri, cadence)
        wall = time.perf_counter() - start
        attempted = counting.gradient_calls / 7.0
        rows = diagnose_trajectory(samples, hamiltonian)
        return RunResult(
            samples, rows, wall, attempted / wall if wall > 0 else math.inf,
            extra_header=(("rhs_evaluations", str(counting.gradient_calls)),),
        )
    start = time.perf_counter()
    samples = integrate(
        state, hamiltonian, method, config.tau, config.n_steps,
        sample_every=config.sample_every, midpoint_config=config.midpoint,
    )
    wall = time.perf_counter() - start
    rows = diagnose_trajectory(samples, hamiltonian)
    return RunResult(
        samples, rows, wall,
        config.n_steps / wall if wall > 0 else math.inf,
    )


# --------------------------------------------------------------------------
# CSV emission


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _calibration_lines(oracle: OracleParams | None) -> list[str]:
    if oracle is None:
        return []
    return [
        f"# calibration_e0 = {_fmt(oracle.e0)}",
        f"# calibration_l_reduced = {_fmt(oracle.l_reduced)}",
        f"# calibration_momentum_scale = {_fmt(oracle.momentum_scale)}",
        f"# calibration_energy_scale = {_fmt(oracle.energy_scale)}",
        f"# calibration_time_scale = {_fmt(oracle.time_scale)}",
        f"# calibration_theta_init = {_fmt(math.acos(oracle.psi_center))}",
        f"# calibration_real_period = {_fmt(oracle.real_period)}",
    ]


def _run_header(config: ScenarioConfig, result: RunResult, oracle) -> list[str]:
    lines = ["# sphereint run output"]
    lines.append("# config = " + json.dumps(config.raw, sort_keys=True, separators=(",", ":")))
    if config.tau is not None and config.n_steps is not None:
        lines.append(f"# t_end = {_fmt(config.n_steps * config.tau)}")
    lines.extend(_calibration_lines(oracle))
    for key, value in result.extra_header:
        lines.append(f"# {key} = {value}")
    lines.append(f"# wall_clock_s = {result.wall_clock:.6f}")
    lines.append(f"# steps_per_second = {result.steps_per_second:.1f}")
    return lines


def _run_columns(n_bodies: int) -> list[str]:
    cols = ["t"]
    for i in range(1, n_bodies + 1):
        cols += [f"theta_{i}", f"phi_{i}", f"p_theta_{i}", f"p_phi_{i}"]
    cols += ["E", "dE", "Lx", "Ly", "Lz"]
    for i in range(1, n_bodies + 1):
        cols += [f"x_{i}", f"y_{i}"]
    return cols


def write_run_csv(stream, config: ScenarioConfig, result: RunResult, oracle) -> None:
    for line in _run_header(config, result, oracle):
        print(line, file=stream)
    print(",".join(_run_columns(config.params.n_bodies)), file=stream)
    for state, row in zip(result.samples, result.rows):
        fields = [_fmt(state.t)]
        for i in range(state.n_bodies):
            fields += [
                _fmt(state.theta[i]), _fmt(state.phi[i]),
                _fmt(state.p_theta[i]), _fmt(state.p_phi[i]),
            ]
        fields += [_fmt(row.energy), _fmt(row.delta_e)]
        fields += [_fmt(v) for v in row.l_vec]
        for x, y in row.bodies_xy:
            fields += [_fmt(x), _fmt(y)]
        print(",".join(fields), file=stream)


def _open_out(out):
    if out is None:
        return nullcontext(sys.stdout)
    return open(out, "w")


def _info(quiet: bool, message: str) -> None:
    if not quiet:
        print(message, file=sys.stderr)


# --------------------------------------------------------------------------
# commands


def cmd_run(config_path, out=None, quiet=False) -> int:
    config = parse_scenario(load_config(config_path), "run")
    state, hamiltonian, oracle = build_initial(config)
    result = run_scenario(config, state, hamiltonian)
    with _open_out(out) as stream:
        write_run_csv(stream, config, result, oracle)
    _info(quiet, f"run: {len(result.rows)} rows, {result.wall_clock:.3f}s integration")
    return EXIT_OK


def cmd_converge(config_path, out=None, quiet=False) -> int:
    config = parse_scenario(load_config(config_path), "converge")
    state, hamiltonian, _ = build_initial(config)
    result = convergence_study(
        lambda: (state, hamiltonian),
        config.method,
        config.taus,
        config.t_final,
        midpoint_config=config.midpoint,
    )
    with _open_out(out) as stream:
        print("# sphereint convergence output", file=stream)
        print(
            "# config = " + json.dumps(config.raw, sort_keys=True, separators=(",", ":")),
            file=stream,
        )
        print(f"# slope = {_fmt(result.slope)}", file=stream)
        print("tau,diff", file=stream)
        for tau, diff in result.pairs:
            print(f"{_fmt(tau)},{_fmt(diff)}", file=stream)
    _info(quiet, f"converge: fitted slope {result.slope:.3f}")
    return EXIT_OK


def cmd_compare(config_path, out=None, quiet=False) -> int:
    config = parse_scenario(load_config(config_path), "compare")
    state, hamiltonian, oracle = build_initial(config)

    out_dir = None
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)

    summary_rows = []
    any_failed = False
    for method in config.methods:
        method_config = ScenarioConfig(
            params=config.params, initial=config.initial, method=method,
            methods=None, tau=config.tau, n_steps=config.n_steps,
            sample_every=config.sample_every, taus=None, t_final=None,
            midpoint=config.midpoint, dopri=config.dopri, raw=config.raw,
        )
        try:
            result = run_scenario(method_config, state, hamiltonian)
        except SimulationError as exc:
            any_failed = True
            _info(quiet, f"compare: method {method} failed: {exc}")
            summary_rows.append((method, "failed", *(math.nan,) * 5, str(exc)))
            continue

        times = np.array([row.t for row in result.rows])
        de = np.array([abs(row.delta_e) for row in result.rows])
        l0 = np.array(result.rows[0].l_vec)
        l_drift = np.max(
            np.abs(np.array([row.l_vec for row in result.rows]) - l0), axis=0
        )
        t_mid = 0.5 * (times[0] + times[-1])
        first = float(np.max(de[times <= t_mid]))
        second = float(np.max(de[times >= t_mid]))
        summary_rows.append(
            (
                method, "ok", first, second,
                float(l_drift[0]), float(l_drift[1]), float(l_drift[2]),
                f"{result.wall_clock:.6f}/{result.steps_per_second:.1f}",
            )
        )
        if out_dir is not None:
            with open(out_dir / f"run_{method}.csv", "w") as stream:
                write_run_csv(stream, method_config, result, oracle)
        else:
            print(f"# === run: {method} ===")
            write_run_csv(sys.stdout, method_config, result, oracle)

    summary_lines = ["method,status,max_de_first_half,max_de_second_half,"
                     "l_drift_x,l_drift_y,l_drift_z,wall_clock_s,steps_per_second"]
    for row in summary_rows:
        if row[1] == "ok":
            method, status, first, second, lx, ly, lz, timing = row
            wall, sps = timing.split("/")
            summary_lines.append(
                f"{method},{status},{_fmt(first)},{_fmt(second)},"
                f"{_fmt(lx)},{_fmt(ly)},{_fmt(lz)},{wall},{sps}"
            )
        else:
            method, status = row[0], row[1]
            summary_lines.append(f"{method},{status},nan,nan,nan,nan,nan,nan,nan")

    if out_dir is not None:
        (out_dir / "summary.csv").write_text("\n".join(summary_lines) + "\n")
    else:
        print("# === summary ===")
        for line in summary_lines:
            print(line)
    _info(quiet, f"compare: {len(config.methods)} methods, failed = {any_failed}")
    return EXIT_PARTIAL if any_failed else EXIT_OK


def cmd_oracle(config_path, out=None, quiet=False) -> int:
    config = parse_scenario(load_config(config_path), "oracle")
    if config.initial != "benchmark":
        raise ConfigError("the oracle command requires the benchmark initial state")
    state, hamiltonian, oracle = build_initial(config)

    advance = phi_of_t(oracle, oracle.period)

    # closure check: integrate six radial periods with the order-4 stepper,
    # step size adjusted to land exactly on the final time
    t_total = _ORACLE_PERIODS * oracle.real_period
    n_steps = max(1, round(t_total / config.tau))
    tau = t_total / n_steps
    samples = integrate(state, hamiltonian, "sesi4", tau, n_steps, sample_every=n_steps)
    closure = closure_distance(state, samples[-1], windings=1)

    n_rows = _ORACLE_PERIODS * _ORACLE_SAMPLES_PER_PERIOD
    t_grid = np.arange(n_rows + 1) * (_ORACLE_PERIODS * oracle.period / n_rows)

    with _open_out(out) as stream:
        print("# sphereint oracle output", file=stream)
        print(
            "# config = " + json.dumps(config.raw, sort_keys=True, separators=(",", ":")),
            file=stream,
        )
        for line in _calibration_lines(oracle):
            print(line, file=stream)
        print(f"# period_advance = {_fmt(advance)}", file=stream)
        print(
            f"# period_advance_error = {_fmt(abs(advance - PETAL_ADVANCE))}",
            file=stream,
        )
        print(f"# closure_tau = {_fmt(tau)}", file=stream)
        print(f"# closure_steps = {n_steps}", file=stream)
        print(f"# closure_distance = {_fmt(closure)}", file=stream)
        print("# time column is the reduced clock of the closed-form solution",
              file=stream)
        print("t,theta,phi,x,y", file=stream)
        for t in t_grid:
            theta = theta_of_t(oracle, t)
            phi = phi_of_t(oracle, t)
            st = math.sin(theta)
            x = config.params.radius * st * math.cos(phi)
            y = config.params.radius * st * math.sin(phi)
            print(
                f"{_fmt(t)},{_fmt(theta)},{_fmt(phi)},{_fmt(x)},{_fmt(y)}",
                file=stream,
            )
    _info(
        quiet,
        f"oracle: period advance {advance:.12f}, closure distance {closure:.3e}",
    )
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphereint",
        description="Symplectic integration experiments for bodies on a sphere",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_text in (
        ("run", cmd_run, "integrate one scenario and emit a diagnostics CSV"),
        ("converge", cmd_converge, "step-size convergence study at fixed final time"),
        ("compare", cmd_compare, "run several methods on one scenario"),
        ("oracle", cmd_oracle, "emit the closed-form benchmark trajectory"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to a JSON scenario file")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args.config, args.out, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except SimulationError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
