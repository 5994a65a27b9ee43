"""Experiment runner: figure sweeps, calibration, protocol and attack suites.

Every emission starts with a header block holding the fully resolved
configuration and seed, so a run can be reproduced from its output alone.
Sweeps write CSV (one row per grid point, floats at 12 significant
digits); round reports write JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace

import numpy as np

from .adversary import ALL_KINDS, AttackStrategy, simulate_leaked_f
from .calibrate import CalibrationResult, calibrate_thresholds, optimal_l
from .channels import NOISELESS, NoiseParams
from .encoding import expected_qber_fock
from .errors import ContractError
from .protocol import (
    DEFAULT_KAPPA,
    DEFAULT_NU,
    DEFAULT_OMEGA,
    ProtocolConfig,
    SharedSecret,
    run_round,
)
from .witness import oracle_grid

COMMANDS = (
    "fig1_sweep",
    "fig2_sweep",
    "calibrate",
    "run_rounds",
    "attack_suite",
    "oracle_check",
)

PRESETS = {
    "low": NoiseParams(eta=0.9, gamma=1e-4, lambda_dc=1e-3),
    "estimated": NoiseParams(eta=0.7, gamma=1e-4, lambda_dc=1e-3),
    "high": NoiseParams(eta=0.3, gamma=1e-4, lambda_dc=1e-3),
    "noiseless": NOISELESS,
}
SWEEP_PRESETS = ("low", "estimated", "high")


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved description of one CLI invocation."""

    command: str
    n_min: int
    n_max: int
    scenarios: tuple  # of (label, NoiseParams)
    nu: int
    omega: int
    kappa: float
    mu: float | None
    tau: float | None
    attack: str | None
    rounds: int
    trials: int
    seed: int
    out: str | None
    exact_witness: bool

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ContractError(f"unknown command {self.command!r}")
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ContractError("need 1 <= n-min <= n-max")
        if not self.scenarios:
            raise ContractError("at least one noise scenario is required")

    def config_block(self) -> dict:
        block = {
            "command": self.command,
            "n_min": self.n_min,
            "n_max": self.n_max,
            "nu": self.nu,
            "omega": self.omega,
            "kappa": self.kappa,
            "mu": self.mu,
            "tau": self.tau,
            "attack": self.attack,
            "rounds": self.rounds,
            "trials": self.trials,
            "seed": self.seed,
            "exact_witness": self.exact_witness,
        }
        for label, noise in self.scenarios:
            block[f"noise.{label}"] = (
                f"eta={noise.eta:.12g} gamma={noise.gamma:.12g} "
                f"lambda={noise.lambda_dc:.12g}"
            )
        return block


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hkgsim",
        description="Hybrid key-growing simulator: sweeps, calibration, "
        "protocol rounds and attack suites.",
    )
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--command", choices=COMMANDS)
    p.add_argument("--n-min", type=int, default=1,
                   help="first code order N (also the N used by single-N commands)")
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--preset", choices=tuple(PRESETS),
                   help="named noise scenario; sweeps default to low/estimated/high")
    p.add_argument("--eta", type=float, help="explicit transmittance")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--lambda", dest="lambda_dc", type=float, default=0.0)
    p.add_argument("--distance-km", type=float,
                   help="derive eta from fiber length instead of --eta")
    p.add_argument("--alpha", type=float, default=0.2,
                   help="fiber attenuation in dB/km")
    p.add_argument("--nu", type=int, default=DEFAULT_NU)
    p.add_argument("--omega", type=int, default=DEFAULT_OMEGA)
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--mu", type=float, help="override the calibrated QBER threshold")
    p.add_argument("--tau", type=float, help="override the calibrated witness threshold")
    p.add_argument("--attack", choices=ALL_KINDS)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--trials", type=int, default=100,
                   help="honest rounds used to fit thresholds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path; stdout when omitted")
    p.add_argument("--exact-witness", action="store_true",
                   help="use exact witness expectations instead of sampling")
    return p


def load_config_file(path: str) -> dict:
    """Flat key=value lines; '#' starts a comment; keys mirror the flags."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ContractError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


_FILE_KEY_TYPES = {
    "command": str, "n_min": int, "n_max": int, "preset": str, "eta": float,
    "gamma": float, "lambda": float, "lambda_dc": float, "distance_km": float,
    "alpha": float, "nu": int, "omega": int, "kappa": float, "mu": float,
    "tau": float, "attack": str, "rounds": int, "trials": int, "seed": int,
    "out": str, "exact_witness": lambda s: s.lower() in ("1", "true", "yes"),
}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        file_values = load_config_file(args.config)
        defaults = {}
        for key, raw in file_values.items():
            if key not in _FILE_KEY_TYPES:
                raise ContractError(f"unknown config key {key!r}")
            dest = "lambda_dc" if key == "lambda" else key
            defaults[dest] = _FILE_KEY_TYPES[key](raw)
        parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if args.command is None:
        parser.error("--command is required (flag or config file)")
    return args


def resolve_scenarios(args) -> tuple:
    if args.preset is not None:
        return ((args.preset, PRESETS[args.preset]),)
    if args.eta is not None:
        return (
            ("custom", NoiseParams(args.eta, args.gamma, args.lambda_dc)),
        )
    if args.distance_km is not None:
        noise = NoiseParams.from_distance(
            args.distance_km, args.gamma, args.lambda_dc, args.alpha
        )
        return (("custom", noise),)
    if args.command in ("fig1_sweep", "fig2_sweep"):
        return tuple((name, PRESETS[name]) for name in SWEEP_PRESETS)
    return (("noiseless", NOISELESS),)


def resolve_spec(args) -> ExperimentSpec:
    return ExperimentSpec(
        command=args.command,
        n_min=args.n_min,
        n_max=args.n_max,
        scenarios=resolve_scenarios(args),
        nu=args.nu,
        omega=args.omega,
        kappa=args.kappa,
        mu=args.mu,
        tau=args.tau,
        attack=args.attack,
        rounds=args.rounds,
        trials=args.trials,
        seed=args.seed,
        out=args.out,
        exact_witness=args.exact_witness,
    )


# ---------------------------------------------------------------------------
# output helpers

def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def render_csv(config: dict, columns, rows) -> str:
    lines = [f"# {key} = {_fmt(value)}" for key, value in config.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(cell) for cell in row))
    return "\n".join(lines) + "\n"


def render_json(config: dict, results) -> str:
    return json.dumps({"config": config, "results": results}, indent=2, sort_keys=True)


def emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# commands

def fig1_sweep(spec: ExperimentSpec) -> str:
    """Optimal reference level and cost versus code order, per noise level."""
    rows = []
    for label, noise in sorted(spec.scenarios):
        for n in range(spec.n_min, spec.n_max + 1):
            cal = optimal_l(n, noise)
            rows.append((label, n, cal.l_opt, cal.chi_opt))
    return render_csv(spec.config_block(), ("noise_label", "N", "l_opt", "chi_opt"), rows)


def fig2_sweep(spec: ExperimentSpec) -> str:
    """Optimal cost and expected readout error rate versus code order."""
    rows = []
    for label, noise in sorted(spec.scenarios):
        for n in range(spec.n_min, spec.n_max + 1):
            cal = optimal_l(n, noise)
            qber = expected_qber_fock(n, noise.eta, noise.lambda_dc)
            rows.append((label, n, cal.chi_opt, qber))
    return render_csv(
        spec.config_block(), ("noise_label", "N", "chi_opt", "expected_qber"), rows
    )


def _draft_config(spec: ExperimentSpec, noise: NoiseParams) -> ProtocolConfig:
    return ProtocolConfig(
        n_code=spec.n_min,
        l_ref=0,
        mu=0.249,
        tau=-1e-3,
        nu=spec.nu,
        omega=spec.omega,
        kappa=spec.kappa,
        noise=noise,
        rng_seed=spec.seed,
        exact_witness=spec.exact_witness,
    )


def _calibrated(spec: ExperimentSpec, noise: NoiseParams) -> CalibrationResult:
    draft = _draft_config(spec, noise)
    cal = calibrate_thresholds(spec.n_min, noise, draft, spec.trials, spec.seed)
    if spec.mu is not None or spec.tau is not None:
        cal = replace(
            cal,
            mu=spec.mu if spec.mu is not None else cal.mu,
            tau=spec.tau if spec.tau is not None else cal.tau,
        )
    return cal


def calibrate_cmd(spec: ExperimentSpec) -> str:
    """Emit the cost curve and fitted thresholds for one noise scenario."""
    label, noise = spec.scenarios[0]
    cal = _calibrated(spec, noise)
    config = spec.config_block()
    config.update(
        {
            "noise_label": label,
            "l_opt": cal.l_opt,
            "chi_opt": cal.chi_opt,
            "calibrated_mu": cal.mu,
            "calibrated_tau": cal.tau,
        }
    )
    rows = [(l, chi) for l, chi in cal.chi_curve]
    return render_csv(config, ("l", "chi"), rows)


def _build_adversary(kind: str | None, f: SharedSecret, rng) -> AttackStrategy | None:
    if kind is None:
        return None
    if kind in ("mitm_with_f", "alice_forge_with_stale_f"):
        return AttackStrategy(kind, knowledge=simulate_leaked_f(f, rng))
    return AttackStrategy(kind)


def run_rounds_cmd(spec: ExperimentSpec) -> str:
    """One session of consecutive rounds, threading F through its updates."""
    label, noise = spec.scenarios[0]
    cal = _calibrated(spec, noise)
    cfg = replace(
        _draft_config(spec, noise), l_ref=cal.l_opt, mu=cal.mu, tau=cal.tau
    )
    session_rng = np.random.default_rng(
        np.random.SeedSequence((spec.seed & 0xFFFFFFFFFFFFFFFF, 0x5E55))
    )
    f = SharedSecret.random(cfg.nu, cfg.omega, session_rng)
    f_prev: SharedSecret | None = None
    rounds = []
    accepted = 0
    for k in range(1, spec.rounds + 1):
        if spec.attack in ("mitm_with_f", "alice_forge_with_stale_f"):
            stale = f_prev if f_prev is not None else simulate_leaked_f(f, session_rng)
            adversary = AttackStrategy(spec.attack, knowledge=stale)
        else:
            adversary = _build_adversary(spec.attack, f, session_rng)
        cfg_k = replace(cfg, rng_seed=int(session_rng.integers(2**63)))
        result = run_round(cfg_k, f, round_index=k, adversary=adversary)
        accepted += int(result.accepted)
        rounds.append(
            {
                "round": k,
                "accepted": result.accepted,
                "aborted_phase": result.aborted_phase,
                "mean_segment_qber": float(np.mean(result.per_segment_qber)),
                "w_hat": result.w_hat,
                "key_bits_grown": len(result.final_key or ()),
            }
        )
        f_prev = f
        if result.accepted:
            f = result.f_next
    report = {
        "noise_label": label,
        "l_ref": cal.l_opt,
        "mu": cal.mu,
        "tau": cal.tau,
        "rounds": spec.rounds,
        "accepted": accepted,
        "accept_rate": accepted / spec.rounds,
        "abort_rate": 1.0 - accepted / spec.rounds,
        "per_round": rounds,
    }
    return render_json(spec.config_block(), report)


def attack_suite_cmd(spec: ExperimentSpec) -> str:
    """Independent attacked rounds per strategy, with abort statistics."""
    label, noise = spec.scenarios[0]
    cal = _calibrated(spec, noise)
    cfg = replace(
        _draft_config(spec, noise), l_ref=cal.l_opt, mu=cal.mu, tau=cal.tau
    )
    kinds = (spec.attack,) if spec.attack else ALL_KINDS
    suite = {}
    for kind in kinds:
        rng = np.random.default_rng(
            np.random.SeedSequence(
                (spec.seed & 0xFFFFFFFFFFFFFFFF, ALL_KINDS.index(kind))
            )
        )
        aborts = 0
        qbers = []
        w_hats = []
        for _ in range(spec.rounds):
            f = SharedSecret.random(cfg.nu, cfg.omega, rng)
            adversary = _build_adversary(kind, f, rng)
            cfg_k = replace(cfg, rng_seed=int(rng.integers(2**63)))
            result = run_round(cfg_k, f, round_index=2, adversary=adversary)
            aborts += int(not result.accepted)
            qbers.append(float(np.mean(result.per_segment_qber)))
            if result.w_hat is not None:
                w_hats.append(result.w_hat)
        suite[kind] = {
            "rounds": spec.rounds,
            "aborts": aborts,
            "abort_rate": aborts / spec.rounds,
            "mean_qber": float(np.mean(qbers)),
            "mean_w_hat": float(np.mean(w_hats)) if w_hats else None,
        }
    report = {
        "noise_label": label,
        "mu": cal.mu,
        "tau": cal.tau,
        "l_ref": cal.l_opt,
        "attacks": suite,
    }
    return render_json(spec.config_block(), report)


def oracle_check_cmd(spec: ExperimentSpec) -> tuple[str, int]:
    """Closed form versus Kraus pipeline over the verification grid."""
    report = oracle_grid(n_max=min(spec.n_max, 4))
    text = render_json(spec.config_block(), report)
    return text, 0 if report["passed"] else 1


def main(argv=None) -> int:
    args = parse_args(argv)
    spec = resolve_spec(args)
    status = 0
    if spec.command == "fig1_sweep":
        text = fig1_sweep(spec)
    elif spec.command == "fig2_sweep":
        text = fig2_sweep(spec)
    elif spec.command == "calibrate":
        text = calibrate_cmd(spec)
    elif spec.command == "run_rounds":
        text = run_rounds_cmd(spec)
    elif spec.command == "attack_suite":
        text = attack_suite_cmd(spec)
    else:
        text, status = oracle_check_cmd(spec)
    emit(text, spec.out)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
