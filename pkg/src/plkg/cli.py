"""Experiment runner.

Subcommands: kdr-sweep, ee-sweep, mse-sweep, esr-sweep, validate,
nnbp-train. Every run writes a CSV whose leading '#' comment block
echoes the fully resolved configuration, so reruns with the same config
and seed are byte-identical.

Exit codes: 0 success, 1 config error, 2 validation failure,
3 numerical-convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from .analysis import energy_efficiency, key_rates, outage_probability
from .channel import SystemParams, derive_correlation, parse_kv_file
from .montecarlo import empirical_mse, validate as mc_validate
from .nnbp import TrainConfig, compare_quantization, simulate_and_predict, save_network
from .quantizer import make_quantizer
from .specfun import ConvergenceError, SeriesControl

__all__ = ["main", "ExperimentConfig", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3


class ConfigError(ValueError):
    pass


def _frange(start: float, stop: float, step: float) -> list[float]:
    n = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(n)]


@dataclass
class ExperimentConfig:
    params: SystemParams = field(default_factory=SystemParams)
    pilot_snr_db_list: list[float] = field(default_factory=lambda: _frange(0.0, 30.0, 2.0))
    tau_s_list: list[float] = field(default_factory=lambda: [0.0, 0.010])
    delta_list: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.2])
    a_list: list[float] = field(default_factory=lambda: _frange(0.05, 0.95, 0.05))
    r0_list: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0, 6.0, 8.0])
    n_samples: int = 0
    seed: int = 1
    z_threshold: float = 4.0
    q_mode: str = "empirical"
    convention: str = "pdf"
    sample_interval_s: float = 0.010
    train_len: int = 50_000
    eval_len: int = 10_000
    # NN hyper-parameters (TrainConfig)
    m: int = 5
    n_hidden: int = 10
    eta: float = 0.1
    epsilon: float = 1e-2
    max_epochs: int = 50
    series_tolerance: float = 1e-12
    series_max_terms: int = 4096
    output_path: str = ""

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            m=self.m, n_hidden=self.n_hidden, eta=self.eta,
            epsilon=self.epsilon, max_epochs=self.max_epochs, init_seed=self.seed,
        )

    def series_control(self) -> SeriesControl:
        return SeriesControl(self.series_tolerance, self.series_max_terms)


_LIST_KEYS = {"pilot_snr_db_list", "tau_s_list", "delta_list", "a_list", "r0_list"}
_INT_CFG_KEYS = {"n_samples", "seed", "train_len", "eval_len", "m", "n_hidden",
                 "max_epochs", "series_max_terms"}
_STR_CFG_KEYS = {"q_mode", "convention", "output_path"}
_SYS_INT_KEYS = {"key_bits"}


def build_config(config_path: str | None) -> ExperimentConfig:
    """Defaults overlaid with a flat key=value file (if given)."""
    cfg = ExperimentConfig()
    if config_path is None:
        return cfg
    try:
        raw = parse_kv_file(config_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    sys_keys = {f.name for f in dc_fields(SystemParams)}
    cfg_keys = {f.name for f in dc_fields(ExperimentConfig)} - {"params"}
    sys_kwargs: dict = {}
    for key, value in raw.items():
        try:
            if key in sys_keys:
                sys_kwargs[key] = int(value) if key in _SYS_INT_KEYS else float(value)
            elif key in _LIST_KEYS:
                parsed = [float(tok) for tok in value.split(",") if tok.strip()]
                if not parsed:
                    raise ConfigError(f"config key {key!r} must be a non-empty list")
                if any(b <= a for a, b in zip(parsed, parsed[1:])):
                    raise ConfigError(f"config key {key!r} must be strictly increasing")
                setattr(cfg, key, parsed)
            elif key in cfg_keys:
                if key in _INT_CFG_KEYS:
                    setattr(cfg, key, int(value))
                elif key in _STR_CFG_KEYS:
                    setattr(cfg, key, value)
                else:
                    setattr(cfg, key, float(value))
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    try:
        cfg.params = SystemParams(**sys_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _config_echo(cfg: ExperimentConfig, command: str) -> list[str]:
    lines = [f"# command={command}"]
    for f in dc_fields(SystemParams):
        lines.append(f"# {f.name}={_fmt(getattr(cfg.params, f.name))}")
    for f in dc_fields(ExperimentConfig):
        if f.name == "params":
            continue
        value = getattr(cfg, f.name)
        if isinstance(value, list):
            value = ",".join(_fmt(v) for v in value)
        lines.append(f"# {f.name}={_fmt(value)}")
    return lines


def write_csv(path: str, cfg: ExperimentConfig, command: str,
              header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in _config_echo(cfg, command):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _cell_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def run_kdr_sweep(cfg: ExperimentConfig, out: str) -> int:
    ctl = cfg.series_control()
    header = ["pilot_snr_db", "tau_s", "delta",
              "p1", "p2", "p3", "kdr", "esr", "provenance"]
    mc = cfg.n_samples > 0
    if mc:
        header = header[:-1] + [
            "p1_mc", "p1_se", "p2_mc", "p2_se", "p3_mc", "p3_se",
            "kdr_mc", "kdr_se", "esr_mc", "esr_se", "z_max", "provenance",
        ]
    rows = []
    index = 0
    for snr in cfg.pilot_snr_db_list:
        for tau in cfg.tau_s_list:
            for delta in cfg.delta_list:
                model = derive_correlation(_cell_params(cfg, snr, tau))
                quant = make_quantizer(math.sqrt(model.sigma_hat_sq), delta, cfg.convention)
                cf = key_rates(model, quant, ctl)
                row = [snr, tau, delta, cf.p1, cf.p2, cf.p3, cf.kdr, cf.esr]
                if mc:
                    rep = mc_validate(model, quant, cfg.n_samples,
                                      _cell_rng(cfg.seed, index),
                                      cfg.z_threshold, ctl, closed_form=cf)
                    e = rep.empirical
                    row += [e.p1.value, e.p1.std_error, e.p2.value, e.p2.std_error,
                            e.p3.value, e.p3.std_error, e.kdr.value, e.kdr.std_error,
                            e.esr.value, e.esr.std_error,
                            max(abs(z) for z in rep.z_scores.values())]
                    row.append("closed-form+monte-carlo")
                else:
                    row.append("closed-form")
                rows.append(row)
                index += 1
    write_csv(out, cfg, "kdr-sweep", header, rows)
    return EXIT_OK


def _sys_dict(params: SystemParams) -> dict:
    return {f.name: getattr(params, f.name) for f in dc_fields(SystemParams)}


def _cell_params(cfg: ExperimentConfig, snr: float, tau: float) -> SystemParams:
    d = _sys_dict(cfg.params)
    d["pilot_snr_db"] = snr
    d["tau_s"] = tau
    # the pilot duration only matters for the energy model; keep the
    # tau >= tau0 invariant when sweeping small delays
    d["tau0_s"] = min(d["tau0_s"], tau)
    return SystemParams(**d)


def run_ee_sweep(cfg: ExperimentConfig, out: str) -> int:
    ctl = cfg.series_control()
    delta = cfg.delta_list[min(1, len(cfg.delta_list) - 1)]  # prefer a nonzero guard
    header = ["a", "r0", "delta", "p1", "p_out", "throughput",
              "e_key", "e_data", "e_total", "ee", "is_argmax", "provenance"]
    rows = []
    for r0 in cfg.r0_list:
        base = SystemParams(**{**_sys_dict(cfg.params), "rate_r0": r0})
        reports = []
        for a in cfg.a_list:
            params = base.with_pilot_snr_db(base.pilot_snr_db_for_allocation(a))
            model = derive_correlation(params)
            quant = make_quantizer(math.sqrt(model.sigma_hat_sq), delta, cfg.convention)
            cf = key_rates(model, quant, ctl)
            reports.append(energy_efficiency(base, a, cf.p1))
        best = max(range(len(reports)), key=lambda i: reports[i].ee)
        for i, rep in enumerate(reports):
            rows.append([rep.a, r0, delta, 1.0 * cfg.params.key_bits / rep.n_samples,
                         rep.p_out, rep.throughput, rep.e_key, rep.e_data,
                         rep.e_total, rep.ee, int(i == best), "closed-form"])
    rows.sort(key=lambda r: (r[0], r[1]))
    write_csv(out, cfg, "ee-sweep", header, rows)
    return EXIT_OK


def run_mse_sweep(cfg: ExperimentConfig, out: str) -> int:
    header = ["pilot_snr_db", "tau_s", "mse_raw", "mse_raw_se",
              "mse_nnbp", "mse_nnbp_se", "relative_gain", "provenance"]
    rows = []
    tau = cfg.params.tau_s
    for i, snr in enumerate(cfg.pilot_snr_db_list):
        params = cfg.params.with_pilot_snr_db(snr)
        model = derive_correlation(params)
        pred, ga_c, gb_c, _ = simulate_and_predict(
            model, cfg.train_len, cfg.eval_len, cfg.train_config(),
            seed=cfg.seed + i, sample_interval_s=cfg.sample_interval_s,
        )
        raw = empirical_mse(ga_c, gb_c)
        nn = empirical_mse(pred, gb_c)
        gain = (raw.value - nn.value) / raw.value
        rows.append([snr, tau, raw.value, raw.std_error,
                     nn.value, nn.std_error, gain, "nnbp"])
    write_csv(out, cfg, "mse-sweep", header, rows)
    return EXIT_OK


def run_esr_sweep(cfg: ExperimentConfig, out: str) -> int:
    ctl = cfg.series_control()
    # the guard-band sweep needs to reach the >50% discard regime
    deltas = cfg.delta_list
    if deltas == ExperimentConfig().delta_list:
        deltas = _frange(0.0, 0.8, 0.1)
    header = ["delta", "variant", "esr", "kdr", "provenance"]
    model = derive_correlation(cfg.params)
    pred, ga_c, gb_c, _ = simulate_and_predict(
        model, cfg.train_len, cfg.eval_len, cfg.train_config(),
        seed=cfg.seed, sample_interval_s=cfg.sample_interval_s,
    )
    rows = []
    for delta in deltas:
        quant = make_quantizer(math.sqrt(model.sigma_hat_sq), delta, cfg.convention)
        cf = key_rates(model, quant, ctl)
        rows.append([delta, "gbbq", cf.esr, cf.kdr, "closed-form"])
        nn = compare_quantization(pred, ga_c, gb_c, model, delta,
                                  cfg.q_mode, cfg.convention).nnbp
        rows.append([delta, "gbbq+nnbp", nn.rates.esr, nn.rates.kdr, "monte-carlo"])
    write_csv(out, cfg, "esr-sweep", header, rows)
    return EXIT_OK


_VALIDATE_DEFAULT_SNRS = [6.0, 14.0, 26.0]


def run_validate(cfg: ExperimentConfig, out: str) -> int:
    ctl = cfg.series_control()
    snrs = cfg.pilot_snr_db_list
    if snrs == ExperimentConfig().pilot_snr_db_list:
        snrs = _VALIDATE_DEFAULT_SNRS
    n_samples = cfg.n_samples if cfg.n_samples > 0 else 1_000_000
    header = ["pilot_snr_db", "tau_s", "delta"]
    for name in ("p1", "p2", "p3", "kdr", "esr"):
        header += [f"{name}_cf", f"{name}_mc", f"{name}_se", f"{name}_z"]
    header += ["pass"]
    rows = []
    all_pass = True
    index = 0
    for snr in snrs:
        for tau in cfg.tau_s_list:
            for delta in cfg.delta_list:
                model = derive_correlation(_cell_params(cfg, snr, tau))
                quant = make_quantizer(math.sqrt(model.sigma_hat_sq), delta, cfg.convention)
                rep = mc_validate(model, quant, n_samples,
                                  _cell_rng(cfg.seed, index), cfg.z_threshold, ctl)
                row = [snr, tau, delta]
                emp = rep.empirical
                for name in ("p1", "p2", "p3", "kdr", "esr"):
                    est = getattr(emp, name)
                    row += [getattr(rep.closed_form, name), est.value,
                            est.std_error, rep.z_scores[name]]
                row.append(int(rep.passed))
                all_pass = all_pass and rep.passed
                rows.append(row)
                index += 1
    write_csv(out, cfg, "validate", header, rows)
    return EXIT_OK if all_pass else EXIT_VALIDATION


def run_nnbp_train(cfg: ExperimentConfig, out: str) -> int:
    model = derive_correlation(cfg.params)
    _, _, _, predictor = simulate_and_predict(
        model, cfg.train_len, cfg.eval_len, cfg.train_config(),
        seed=cfg.seed, sample_interval_s=cfg.sample_interval_s,
    )
    save_network(predictor.net_, out)
    status = "converged" if predictor.converged_ else "hit max_epochs"
    print(f"trained in {predictor.n_epochs_} epochs ({status}), "
          f"final epoch cost {predictor.final_cost_:.6g}; network written to {out}")
    return EXIT_OK


_COMMANDS = {
    "kdr-sweep": run_kdr_sweep,
    "ee-sweep": run_ee_sweep,
    "mse-sweep": run_mse_sweep,
    "esr-sweep": run_esr_sweep,
    "validate": run_validate,
    "nnbp-train": run_nnbp_train,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plkg",
        description="Secret-key-generation experiments: closed forms, Monte Carlo and NN prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="master RNG seed")
        p.add_argument("--out", default=None, help="output path")
        p.add_argument("--samples", type=int, default=None, help="Monte Carlo samples per cell")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.samples is not None:
            cfg.n_samples = args.samples
        default_out = "network.txt" if args.command == "nnbp-train" else f"{args.command}.csv"
        out = args.out if args.out is not None else (cfg.output_path or default_out)
        return _COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
