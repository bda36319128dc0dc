"""End-to-end runs behind the command line: moments, estimates, grid scans."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import math
import warnings

import numpy as np

from .config import ScanConfig
from .errors import HMomentsError
from .estimators import EstimatorResult, estimate, ite_ratio, krylov_observable, required_order
from .grouping import GroupingPlan, greedy_qwc_grouping
from .models import (HeisenbergParams, Topology, build_ansatz, build_heisenberg,
                     build_magnetization, exact_spectrum)
from .moments import (MomentTable, generalized_moment_matrix, generalized_strings,
                      moments_exact, moments_from_expectations, power_expansions)
from .pauli import PauliString, PauliSum, basis_closure
from .simulator import (CalibrationMatrix, ReadoutNoiseModel, StateVector, build_calibration,
                        calibrate_counts, expectations_from_counts, pauli_expectations, prepare,
                        sample_counts)

SCAN_COLUMNS = ("U", "J", "energy_est", "energy_exact", "mag_est", "mag_exact", "status")


def fmt(x) -> str:
    return f"{float(x):.12g}"


def derive_seed(*key: int) -> int:
    """Stable 32-bit seed for a (run seed, cell, group, ...) key."""
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def hamiltonian(cfg: ScanConfig, U: float, J: float) -> PauliSum:
    return build_heisenberg(HeisenbergParams(J=J, U=U, B=cfg.B, n_sites=cfg.n_sites,
                                             topology=Topology(cfg.topology)))


def trial_state(cfg: ScanConfig) -> StateVector:
    return prepare(build_ansatz(cfg.theta0, cfg.theta1, cfg.n_sites))


def noise_model(cfg: ScanConfig) -> ReadoutNoiseModel | None:
    return ReadoutNoiseModel.uniform(cfg.n_sites, cfg.p01, cfg.p10) if cfg.noisy else None


def calibration_for(cfg: ScanConfig) -> CalibrationMatrix | None:
    """Sampled confusion matrix, shared by every cell of a run."""
    if not (cfg.calibrate and cfg.noisy):
        return None
    shots = cfg.calibration_shots or cfg.shots
    return build_calibration(noise_model(cfg), cfg.n_sites, shots, seed=derive_seed(cfg.seed, 1 << 20))


def moment_order(cfg: ScanConfig) -> int:
    return required_order(cfg.method, cfg.order)


def measured_strings(H: PauliSum, observable: PauliSum | None, order: int) -> list[PauliString]:
    """Non-identity strings needed for H^n moments and, optionally, <H^a O H^b>."""
    strings = set(basis_closure(H).strings)
    if observable is not None:
        strings |= set(generalized_strings(H, observable, order))
    return sorted(s for s in strings if not s.is_identity())


@dataclass
class SampledExpectations:
    values: dict
    plan: GroupingPlan
    shots_per_group: int


def sample_expectations(cfg: ScanConfig, state: StateVector, strings, seed_key: tuple[int, ...],
                        calibration: CalibrationMatrix | None = None) -> SampledExpectations:
    plan = greedy_qwc_grouping(strings, cfg.grouping_policy)
    noise = noise_model(cfg)
    values = {}
    for g, (group, rot) in enumerate(zip(plan.groups, plan.rotations)):
        counts = sample_counts(state, rot, cfg.shots, noise, seed=derive_seed(*seed_key, g))
        if calibration is not None:
            counts = calibrate_counts(calibration, counts)
        values.update(expectations_from_counts(counts, group))
    return SampledExpectations(values, plan, cfg.shots)


def compute_moments(cfg: ScanConfig, U: float, J: float, order: int | None = None,
                    cell: int = 0, calibration: CalibrationMatrix | None = None) -> MomentTable:
    H = hamiltonian(cfg, U, J)
    N = moment_order(cfg) if order is None else order
    state = trial_state(cfg)
    if cfg.source == "exact":
        m = moments_exact(state, H, N)
        return MomentTable(m.values, "exact", {"U": U, "J": J})
    if calibration is None:
        calibration = calibration_for(cfg)
    strings = measured_strings(H, None, N)
    sampled = sample_expectations(cfg, state, strings, (cfg.seed, cell), calibration)
    m = moments_from_expectations(H, N, sampled.values, power_expansions(H, N))
    meta = {"U": U, "J": J, "seed": cfg.seed, "shots_per_group": cfg.shots,
            "groups": len(sampled.plan), "measured_strings": len(strings)}
    return MomentTable(m.values, "pauli-measured", meta)


def run_estimate(cfg: ScanConfig, m: MomentTable) -> EstimatorResult:
    return estimate(cfg.method, m, cfg.order, cfg.tau, cfg.tau_max, cfg.ite_scale)


def exact_ground(H: PauliSum, M: PauliSum, degeneracy_tol: float = 1e-9) -> tuple[float, float]:
    """Ground energy and <M> averaged over the (possibly degenerate) ground space."""
    sp = exact_spectrum(H)
    e0 = sp.ground_energy
    k = int(np.sum(sp.eigenvalues < e0 + degeneracy_tol))
    V = sp.eigenvectors[:, :k]
    mag = float(np.real(np.trace(V.conj().T @ M.to_matrix() @ V))) / k
    return e0, mag


def scan_cell(cfg: ScanConfig, cell: int, U: float, J: float,
              calibration: CalibrationMatrix | None = None) -> dict:
    """One grid point. Estimator failures land in ``status``; the scan carries on."""
    H = hamiltonian(cfg, U, J)
    M = build_magnetization(cfg.n_sites)
    e_exact, m_exact = exact_ground(H, M)
    row = {"U": U, "J": J, "energy_est": math.nan, "energy_exact": e_exact,
           "mag_est": math.nan, "mag_exact": m_exact, "status": "ok"}
    N = moment_order(cfg)
    state = trial_state(cfg)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            if cfg.source == "exact":
                m = moments_exact(state, H, N)
                G = generalized_moment_matrix(H, M, cfg.order, state=state)
            else:
                strings = measured_strings(H, M, cfg.order)
                sampled = sample_expectations(cfg, state, strings, (cfg.seed, cell), calibration)
                m = moments_from_expectations(H, N, sampled.values, power_expansions(H, N))
                G = generalized_moment_matrix(H, M, cfg.order, expectations=sampled.values)
            res = run_estimate(cfg, m)
            row["energy_est"] = res.energy
            if cfg.method == "ite":
                tau = res.params["tau"]
                row["mag_est"] = ite_ratio(G, m, tau, cfg.order, cfg.ite_scale)
            elif cfg.method == "krylov":
                row["mag_est"] = krylov_observable(m, G, cfg.order)
    except HMomentsError as exc:
        row["status"] = type(exc).__name__
    return row


def _scan_worker(args):
    cfg_dict, cell, U, J, calibration = args
    return scan_cell(ScanConfig.from_dict(cfg_dict), cell, U, J, calibration)


def scan_cells(cfg: ScanConfig) -> list[tuple[int, float, float]]:
    cells = []
    for U in cfg.U.values():
        for J in cfg.J.values():
            cells.append((len(cells), float(U), float(J)))
    return cells


def run_scan(cfg: ScanConfig) -> list[dict]:
    """Rows in grid order (U outer, J inner) regardless of worker count."""
    calibration = calibration_for(cfg) if cfg.source == "sampled" else None
    cells = scan_cells(cfg)
    if cfg.workers == 1:
        return [scan_cell(cfg, k, U, J, calibration) for k, U, J in cells]
    payload = [(cfg.to_dict(), k, U, J, calibration) for k, U, J in cells]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_scan_worker, payload))


def scan_mse(rows: list[dict]) -> tuple[float, float]:
    def mse(est, ref):
        d = [(r[est] - r[ref]) ** 2 for r in rows if r["status"] == "ok" and not math.isnan(r[est])]
        return sum(d) / len(d) if d else math.nan
    return mse("energy_est", "energy_exact"), mse("mag_est", "mag_exact")


def scan_csv(cfg: ScanConfig, rows: list[dict]) -> str:
    tau = cfg.tau if isinstance(cfg.tau, str) else fmt(cfg.tau)
    lines = [
        f"# grid U={fmt(cfg.U.min)}..{fmt(cfg.U.max)} ({cfg.U.steps}) "
        f"J={fmt(cfg.J.min)}..{fmt(cfg.J.max)} ({cfg.J.steps}) B={fmt(cfg.B)} "
        f"topology={cfg.topology} ansatz=({fmt(cfg.theta0)},{fmt(cfg.theta1)})",
        f"# source={cfg.source} shots={cfg.shots} noise=({fmt(cfg.p01)},{fmt(cfg.p10)}) "
        f"calibrate={str(cfg.calibrate).lower()} method={cfg.method} order={cfg.order} "
        f"tau={tau} seed={cfg.seed}",
        ",".join(SCAN_COLUMNS),
    ]
    for r in rows:
        lines.append(",".join(r["status"] if c == "status" else fmt(r[c]) for c in SCAN_COLUMNS))
    e, mg = scan_mse(rows)
    lines.append(f"# MSE(energy)={fmt(e)} MSE(magnetization)={fmt(mg)}")
    return "\n".join(lines) + "\n"


def calibrate_demo(cfg: ScanConfig) -> tuple[str, float, float]:
    """Exact, raw and calibrated expectations for every measured string.

    Returns the CSV text and the mean absolute raw and calibrated errors.
    """
    U, J = cfg.single_point()
    H = hamiltonian(cfg, U, J)
    state = trial_state(cfg)
    strings = measured_strings(H, None, moment_order(cfg))
    plan = greedy_qwc_grouping(strings, cfg.grouping_policy)
    exact = pauli_expectations(state, strings)
    noise = noise_model(cfg)
    shots = cfg.calibration_shots or cfg.shots
    cal = build_calibration(noise or ReadoutNoiseModel.uniform(cfg.n_sites, 0.0), cfg.n_sites,
                            shots, seed=derive_seed(cfg.seed, 1 << 20))
    lines = [f"# U={fmt(U)} J={fmt(J)} B={fmt(cfg.B)} shots={cfg.shots} "
             f"noise=({fmt(cfg.p01)},{fmt(cfg.p10)}) groups={len(plan)} repeats={cfg.repeats} seed={cfg.seed}",
             "repeat,group,string,exact,raw,calibrated,abs_err_raw,abs_err_calibrated"]
    err_raw, err_cal = [], []
    for rep in range(cfg.repeats):
        for g, (group, rot) in enumerate(zip(plan.groups, plan.rotations)):
            counts = sample_counts(state, rot, cfg.shots, noise, seed=derive_seed(cfg.seed, rep, g))
            raw = expectations_from_counts(counts, group)
            cal_vals = expectations_from_counts(calibrate_counts(cal, counts), group)
            for s in group:
                a, b = abs(raw[s] - exact[s]), abs(cal_vals[s] - exact[s])
                err_raw.append(a)
                err_cal.append(b)
                lines.append(",".join([str(rep), str(g), s.label, fmt(exact[s]), fmt(raw[s]),
                                       fmt(cal_vals[s]), fmt(a), fmt(b)]))
    mr, mc = float(np.mean(err_raw)), float(np.mean(err_cal))
    lines.append(f"# mean_abs_err_raw={fmt(mr)} mean_abs_err_calibrated={fmt(mc)}")
    return "\n".join(lines) + "\n", mr, mc
