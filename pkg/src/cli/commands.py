"""
命令行入口

每个子命令读取 RunConfig，写出带元数据头的 CSV 与排序 JSON，
并与基准值登记表比较（--bless 时改为写入）。
"""

import functools
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.config.settings import RunConfig, Settings, load_run_config
from src.correlation.asymptotic import asymptotic_formula, crossover_radius, f_constant
from src.correlation.fitting import MIN_POINTS, fit_exponents
from src.correlation.series import CorrelationProfile, geometric_radii, series_profile
from src.charge_flow.c_eta import c2_second_order
from src.cli.pipeline import Pipeline
from src.lattice_green.lattice import LatticeSpec
from src.lattice_green.potential import coulomb_potential, euler_constant, fit_c_E, yukawa_potential
from src.oracle.enumeration import enumerate_Z, enumeration_rho
from src.oracle.identities import verify_gaussian_identities, verify_multiscale_sampling
from src.oracle.sine_gordon import m_scan, sine_gordon_mc, wick_series
from src.covariance.family import build_family
from src.rg_coefficients.continuum import closed_form_limits, compute_asymptotic_continuum
from src.rg_flow.exponents import exponent_table
from src.rg_flow.free_energy import free_energy, increment_envelope
from src.rg_flow.kosterlitz import invariant_drift, phase_diagram, separatrix_slope
from src.utils.errors import BKTError, DomainError
from src.utils.io import MC_SCHEMA, REPORT_SCHEMA, GoldenRegistry, dumps, error_payload, write_csv, write_json
from src.utils.logger import setup_logger

COMMANDS = (
    "potential",
    "covariance",
    "coeffs",
    "separatrix",
    "flow",
    "charge-flow",
    "correlation",
    "phase-diagram",
    "oracle",
    "verify-all",
)


class CommandContext:
    """一次命令运行的配置、路径与输出"""

    def __init__(self, command: str, config: RunConfig, settings: Settings, threads: int):
        self.command = command
        self.config = config
        self.settings = settings
        self.threads = threads
        self.logger = setup_logger(settings)
        base = Path(config.output_dir) if config.output_dir else settings.output_dir
        self.out_dir = base / command
        self.artifacts: List[str] = []

    @functools.cached_property
    def pipeline(self) -> Pipeline:
        return Pipeline(self.config, self.settings)

    def csv(self, name: str, frame: pd.DataFrame) -> None:
        path = write_csv(self.out_dir / name, frame, self.config, self.settings.version, self.command)
        self.artifacts.append(str(path))

    def json(self, name: str, payload: Dict[str, Any], schema: Optional[Dict[str, Any]] = None) -> None:
        path = write_json(self.out_dir / name, payload, schema)
        self.artifacts.append(str(path))

    def extra_list(self, key: str, default: List[float]) -> List[float]:
        raw = self.config.extra.get(key)
        if raw is None:
            return list(default)
        if isinstance(raw, str):
            return [float(v) for v in raw.split(",") if v.strip()]
        return [float(v) for v in raw]


Handler = Callable[[CommandContext], Tuple[Dict[str, Any], Dict[str, float]]]


def _run(command: str, handler: Handler, options: Dict[str, Any]) -> None:
    config_path = options.pop("config", None)
    threads = options.pop("threads", None)
    bless = options.pop("bless", False)
    try:
        settings = Settings()
        overrides = {k: v for k, v in options.items() if v is not None}
        overrides["command"] = command
        try:
            config = load_run_config(Path(config_path) if config_path else None, overrides)
        except ValidationError as e:
            raise DomainError("运行配置校验失败", {"errors": [err["msg"] for err in e.errors()]})
        threads = settings.threads if threads is None else threads
        ctx = CommandContext(command, config, settings, threads)
        ctx.logger.info(f"开始运行命令 {command}: 配置哈希={config.config_hash()}")
        report, values = handler(ctx)
        registry = GoldenRegistry(settings.golden_path)
        if bless:
            registry.bless(command, config, values)
            golden = {"status": "blessed", "drift": {}}
        else:
            golden = registry.compare(command, config, values)
        summary = {
            "command": command,
            "version": settings.version,
            "config": config.model_dump(),
            "passed": bool(report.pop("passed", True)),
            "golden": golden,
            "values": values,
            **report,
        }
        ctx.json("report.json", summary, REPORT_SCHEMA)
        summary["artifacts"] = ctx.artifacts
        click.echo(dumps(summary))
        ctx.logger.info(f"命令 {command} 完成，输出 {len(ctx.artifacts)} 个文件")
    except BKTError as e:
        click.echo(dumps(error_payload(e)))
        sys.exit(1)


def run_options(func: Callable) -> Callable:
    """所有子命令共用的参数，未给出的保持 None 以便配置文件生效"""
    options = [
        click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), help="扁平 key=value 配置文件"),
        click.option("--threads", type=int, default=None, help="线程数"),
        click.option("--bless", is_flag=True, default=False, help="把本次结果写入基准值登记表"),
        click.option("--output-dir", "output_dir", type=str, default=None),
        click.option("--L", "L", type=int, default=None),
        click.option("--R", "R", type=int, default=None),
        click.option("--alpha2", type=float, default=None),
        click.option("--eta", type=float, default=None),
        click.option("--z", "z", type=float, default=None),
        click.option("--jmax", "j_max", type=int, default=None),
        click.option("--tol", type=float, default=None),
        click.option("--cutoff", type=str, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--samples", type=int, default=None),
        click.option("--mass", type=float, default=None),
        click.option("--beta", type=float, default=None),
        click.option("--n-max", "n_max", type=int, default=None),
        click.option("--ell-end", "ell_end", type=float, default=None),
        click.option("--step", type=float, default=None),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group(invoke_without_command=True)
@click.pass_context
def cli(ctx: click.Context):
    """BKT 库仑气体重整化群工具包"""
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())
        ctx.exit(2)


def register(name: str):
    def decorator(handler: Handler) -> Handler:
        @cli.command(name=name, help=handler.__doc__)
        @run_options
        def command(**options):
            _run(name, handler, options)

        return handler

    return decorator


# 各命令 -------------------------------------------------------------------


@register("potential")
def potential_command(ctx: CommandContext):
    """格点库仑势与 Yukawa 势"""
    spec = LatticeSpec(L=ctx.config.L, R=ctx.config.R)
    coulomb = coulomb_potential(spec)
    yukawa = yukawa_potential(spec, ctx.config.mass)
    pts, w = coulomb.centered(min(10, spec.side // 2))
    ctx.csv("potential.csv", pd.DataFrame({"x0": pts[:, 0], "x1": pts[:, 1], "W_coulomb": w, "W_yukawa": yukawa.value(pts)}))
    values = {
        "W10": float(coulomb.value(np.array([1, 0]))[0]),
        "W0_yukawa": float(yukawa.value(np.zeros(2))[0]),
        "zero_mode_sum": yukawa.total(),
    }
    report: Dict[str, Any] = {"c_E_exact": euler_constant(), "mass": ctx.config.mass}
    if spec.side >= 128:
        c_E, residual = fit_c_E(coulomb)
        values["c_E"] = c_E
        report["c_E_residual"] = residual
    report["passed"] = abs(values["zero_mode_sum"] * ctx.config.mass ** 2 - 1.0) < 1e-10
    return report, values


@register("covariance")
def covariance_command(ctx: CommandContext):
    """协方差族 Γ_j 的取值、部分和与尾和"""
    family = ctx.pipeline.family
    radii = geometric_radii(family.L, 0, 2 * family.j_max)
    rows = []
    for j in range(family.j_max + 1):
        for x in radii:
            pt = np.array([[x, 0.0]])
            rows.append({
                "j": j,
                "x": x,
                "kernel": float(family.kernel(j, pt)[0]),
                "kernel_diff": float(family.kernel_diff(j, pt)[0]),
                "tail": float(family.tail_diff(j, pt)[0]),
            })
    ctx.csv("covariance.csv", pd.DataFrame(rows))
    gamma0 = [float(family.kernel(j, np.zeros(2))[0]) for j in range(family.j_max + 1)]
    deviation = max(abs(g - family.gamma0) for g in gamma0)
    values = {"c_tilde_E": family.c_tilde_E_quadrature, "gamma0": family.gamma0}
    report = {
        "gamma0_deviation": deviation,
        "radius": [family.radius(j) for j in range(family.j_max + 1)],
        "finite_range_violation": [family.finite_range_violation(j) for j in range(family.j_max + 1)],
        "passed": deviation <= 1e-10,
    }
    return report, values


@register("coeffs")
def coeffs_command(ctx: CommandContext):
    """逐尺度的流方程系数表"""
    table = ctx.pipeline.coeffs
    ctx.csv("coeffs.csv", table.to_frame())
    family = ctx.pipeline.family
    a_closed, b_closed, m21_closed = closed_form_limits(family)
    a_int, b_int, m21_int = compute_asymptotic_continuum(family.L, ctx.config.alpha2, table.eta, family.cutoff, family)
    values = {"a_last": table.a_limit, "b_last": table.b_limit, "a_continuum": a_int, "b_continuum": b_int}
    report = {
        "closed_form": {"a": a_closed, "b": b_closed, "m21": m21_closed},
        "m21_continuum": m21_int,
        "b_ratio": table.b_limit / (2.0 * math.log(family.L)),
        "passed": True,
    }
    return report, values


@register("separatrix")
def separatrix_command(ctx: CommandContext):
    """打靶求 s(z) 与 β_BKT(z)"""
    result = ctx.pipeline.separatrix
    traj = result.trajectory
    ctx.csv("trajectory.csv", traj.to_frame())
    report = {**result.to_dict(), "a": traj.a, "b": traj.b, "q1": traj.q1, "tag": traj.tag}
    try:
        report["pressure"] = free_energy(traj, result.beta_bkt, result.z)
    except BKTError as e:
        report["pressure_error"] = e.to_dict()
    report["passed"] = result.beta_bkt >= ctx.config.alpha2
    return report, {"s_of_z": result.s_of_z, "beta_bkt": result.beta_bkt}


@register("flow")
def flow_command(ctx: CommandContext):
    """从给定 (s₀, z₀) 迭代耦合流；未给 s0 时从分界线出发"""
    pipe = ctx.pipeline
    raw = ctx.config.extra.get("s0")
    if raw is None:
        traj = pipe.coupling
    else:
        traj = pipe.shooter.classify(float(raw), ctx.config.z, pipe.j_flow)
    ctx.csv("flow.csv", traj.to_frame())
    envelope = increment_envelope(traj)
    report: Dict[str, Any] = {"tag": traj.tag, "s0": traj.s0, "z0": traj.z0, "envelope_C": envelope["C"]}
    try:
        report["pressure"] = free_energy(traj, ctx.config.beta, traj.z0)
    except BKTError as e:
        report["pressure_error"] = e.to_dict()
    last = traj.states[-1]
    return report, {"s_last": last.s, "z_last": last.z}


@register("charge-flow")
def charge_flow_command(ctx: CommandContext):
    """分数电荷重整化 Z_j、Z̄_j"""
    pipe = ctx.pipeline
    charge = pipe.charge
    ctx.csv("charge_flow.csv", charge.to_frame())
    report: Dict[str, Any] = {"q1": charge.q1, "eta": charge.eta}
    if abs(pipe.eta - 0.5) < 1e-15:
        norm = charge.normalized_pm()
        ctx.csv("normalized_pm.csv", norm)
        values = {"drift_plus": float(norm["drift_plus"].iloc[-1]), "drift_minus": float(norm["drift_minus"].iloc[-1])}
    else:
        norm = charge.normalized_dominant(pipe.family)
        ctx.csv("normalized.csv", norm)
        values = {"drift": float(norm["drift"].iloc[-1]), "c_eta": pipe.c_eta_value}
        m_off = pipe.coeffs.m12[0] if pipe.eta < 0.5 else pipe.coeffs.m21[0]
        report["c2"] = c2_second_order(ctx.config.z, pipe.family, ctx.config.alpha2, pipe.eta, pipe.c_eta_value, m_off)
    report["exponent"] = exponent_table(pipe.separatrix.beta_bkt, ctx.config.eta)
    return report, values


@register("correlation")
def correlation_command(ctx: CommandContext):
    """分数电荷关联剖面、闭式渐近公式与指数拟合"""
    pipe = ctx.pipeline
    L = pipe.family.L
    k_min = int(ctx.config.extra.get("k_min", 0))
    k_max = int(ctx.config.extra.get("k_max", 14))
    radii = geometric_radii(L, k_min, k_max)
    profile = series_profile(radii, pipe.charge, pipe.family, ctx.config.alpha2, pipe.eta, ctx.config.z, ctx.threads)
    constants = pipe.constants
    asym = [(x, asymptotic_formula(x, ctx.config.z, pipe.eta, constants, "crossover"), "asymptotic") for x in radii]
    merged = CorrelationProfile(profile.points + asym, profile.metadata)
    ctx.csv("correlation.csv", merged.to_frame())

    f = f_constant(ctx.config.z, constants)
    window = [(x, r) for x, r in profile.branch("total") if float(L) ** 3 <= x <= float(L) ** 7]
    deviation = max((abs(r / asymptotic_formula(x, ctx.config.z, pipe.eta, constants, "crossover") - 1.0) for x, r in window), default=float("nan"))
    report: Dict[str, Any] = {"f": f, "asymptotic_deviation": deviation}
    half = abs(pipe.eta - 0.5) < 1e-15
    windowed = profile.window(float(L) ** 3, float(L) ** 7)
    target = windowed if len(windowed.branch("total")) >= MIN_POINTS else profile
    if half and ctx.config.z > 0:
        fit = fit_exponents(target, "power_log", f, branch="plus")
    else:
        fit = fit_exponents(target, "pure_power")
        if not half:
            report["crossover_radius"] = crossover_radius(ctx.config.z, pipe.eta, constants)
    report["fit"] = fit.report()
    ctx.json("fit.json", fit.report())
    return report, {"power": fit.power, "logexp": fit.logexp}


@register("phase-diagram")
def phase_diagram_command(ctx: CommandContext):
    """Kosterlitz 方程在初值网格上的轨道"""
    s_values = ctx.extra_list("s_values", [-0.02, -0.01, 0.0, 0.01, 0.02, 0.04])
    z_values = ctx.extra_list("z_values", [0.002, 0.005, 0.01])
    slope = separatrix_slope()
    initial = [(s, z) for s in s_values for z in z_values] + [(slope * z, z) for z in z_values]
    record_every = int(ctx.config.extra.get("record_every", 100))
    orbits = phase_diagram(initial, ctx.config.ell_end, ctx.config.step, record_every=record_every, threads=ctx.threads)
    rows = []
    for k, orbit in enumerate(orbits):
        for st in orbit["states"]:
            rows.append({"orbit": k, "separatrix": orbit["separatrix"], "ell": st.ell, "s": st.s, "z": st.z, "invariant": st.invariant})
    ctx.csv("orbits.csv", pd.DataFrame(rows))
    drift = max(invariant_drift(o["states"]) for o in orbits)
    return {"orbits": len(orbits), "invariant_drift": drift, "passed": True}, {"invariant_drift": drift}


@register("oracle")
def oracle_command(ctx: CommandContext):
    """枚举、sine-Gordon 蒙特卡洛与高斯恒等式"""
    c = ctx.config
    spec = LatticeSpec(L=c.L, R=c.R)
    n_max = min(c.n_max, 4)
    checks = []

    wick = wick_series(spec, c.beta, c.mass, c.z, n_max, threads=ctx.threads)
    mc = sine_gordon_mc(spec, c.beta, c.mass, c.z, c.samples, c.seed, threads=ctx.threads, settings=ctx.settings)
    ctx.json("sine_gordon.json", mc.report(), MC_SCHEMA)
    z_mc = abs(mc.mean - wick["value"]) / mc.stderr if mc.stderr > 0 else 0.0
    checks.append({"name": "mc_vs_wick", "passed": z_mc <= 3.0, "zscore": z_mc, "wick": wick["value"]})

    x, y = (0, 0), (1, 0)
    table = coulomb_potential(spec)
    rho0 = enumeration_rho(spec, c.beta, 0.0, c.eta, x, y, n_max, threads=ctx.threads, settings=ctx.settings)
    exact = math.exp(c.beta * c.eta ** 2 * float(table.value(np.array(x) - np.array(y))[0]))
    checks.append({"name": "enumeration_z0", "passed": abs(rho0 - exact) <= 1e-14 * exact, "rho": rho0, "exact": exact})

    enum = enumerate_Z(spec, c.beta, c.z, n_max, threads=ctx.threads, settings=ctx.settings)
    checks.append({"name": "enumeration_series", "passed": enum.series_converged, "Z": enum.Z})

    frame, trend = m_scan(spec, c.beta, c.z, c.samples, c.seed, (c.eta, x, y), threads=ctx.threads, settings=ctx.settings)
    ctx.csv("m_scan.csv", frame)

    id_L = int(c.extra.get("identity_L", 2))
    id_samples = int(c.extra.get("identity_samples", 20000))
    family = build_family(id_L, 2, c.cutoff, c.tol, ctx.settings)
    identities = verify_gaussian_identities(family, 0, 1.0, id_samples, c.seed, threads=ctx.threads, settings=ctx.settings)
    checks.append({"name": "gaussian_identities", "passed": identities["passed"], "failures": identities["failures"]})
    multiscale = verify_multiscale_sampling(family, 1, id_samples // 10, c.seed, threads=ctx.threads, settings=ctx.settings)
    checks.append({"name": "multiscale_sampling", "passed": multiscale["passed"]})

    report = {
        "checks": checks,
        "m_scan_trend": trend,
        "enumeration": enum.report(),
        "identities": identities,
        "multiscale": multiscale,
        "passed": all(ch["passed"] for ch in checks),
    }
    return report, {"mc_mean": mc.mean, "wick": wick["value"], "Z": enum.Z}


@register("verify-all")
def verify_all_command(ctx: CommandContext):
    """运行全部验收检查"""
    from src.cli.verify import run_acceptance

    checks = run_acceptance(ctx.settings, ctx.threads, ctx.config.seed)
    values = {ch["name"]: float(ch.get("value", 0.0)) for ch in checks if isinstance(ch.get("value"), (int, float))}
    return {"checks": checks, "passed": all(ch["passed"] for ch in checks)}, values


def main(argv: Optional[List[str]] = None) -> None:
    cli.main(args=argv, prog_name="bkt", standalone_mode=True)
