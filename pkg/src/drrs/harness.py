"""Closed-loop scenario execution and the stock robustness sweeps.

One scenario advances a single augmented state vector with RK4 so that the
plant, the estimator filters and data matrices, the parameter update, and the
servo integrator stay synchronous; the feedback law is re-evaluated inside
every derivative call, including RK4 substeps.

Augmented state layout (length 70):

    y[0:4]    plant [phi_v, phi_h, phi_v_dot, phi_h_dot]
    y[4:6]    low-pass state for xi2
    y[6:8]    low-pass state for f1
    y[8:20]   low-pass state for the 2x6 regressor, row-major
    y[20:26]  xi_bar
    y[26:62]  phi_bar, row-major
    y[62:68]  theta_hat
    y[68:70]  servo integrator q (held at zero for harmonic commands)

Runs are deterministic: no randomness anywhere, and identical configs produce
bit-identical traces.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import estimator as est_mod
from . import model
from .controller import EPS_DET, design_servo_gains, design_tracking_gain
from .dynamics import (
    EPS_SING,
    PHI_V_LIMIT,
    PHYSICS_MODES,
    PhysicalParams,
    allocation_matrix,
    default_params,
)
from .errors import SingularityError

try:
    from . import _kernel
except ImportError:  # numba missing; the pure-python path still works
    _kernel = None

N_STATE = 70
TRACE_COLUMNS = (
    "t",
    "phi_v",
    "phi_h",
    "phi_v_dot",
    "phi_h_dot",
    "r_v",
    "r_h",
    "omega_a",
    "omega_b",
    "M_v",
    "M_h",
    "theta_hat_1",
    "theta_hat_2",
    "theta_hat_3",
    "theta_hat_4",
    "theta_hat_5",
    "theta_hat_6",
    "q_1",
    "q_2",
)
N_COLS = len(TRACE_COLUMNS)


@dataclass(frozen=True)
class Command:
    """Reference command: constant set point or harmonic trajectory."""

    kind: str  # "step" | "harmonic"
    r: np.ndarray | None = None   # step set point, rad
    amplitude: float = math.pi / 4
    frequency: float = 0.5        # rad/s

    def __post_init__(self):
        if self.kind not in ("step", "harmonic"):
            raise ValueError(f"command kind must be 'step' or 'harmonic', got {self.kind!r}")
        if self.kind == "step":
            r = np.asarray(
                self.r if self.r is not None else [math.pi / 4, -math.pi / 3], dtype=float
            )
            if r.shape != (2,) or not np.all(np.isfinite(r)):
                raise ValueError("step command needs a finite 2-vector set point")
            object.__setattr__(self, "r", r)
        else:
            if not (math.isfinite(self.amplitude) and math.isfinite(self.frequency)):
                raise ValueError("harmonic amplitude and frequency must be finite")

    def reference(self, t: float) -> np.ndarray:
        if self.kind == "step":
            return self.r.copy()
        w = self.frequency
        return self.amplitude * np.array([math.sin(w * t), math.cos(w * t)])

    def desired_state(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(x_d, x_d_dot) for the tracking law, from the analytic command."""
        w = self.frequency
        r = self.reference(t)
        rd = self.amplitude * w * np.array([math.cos(w * t), -math.sin(w * t)])
        rdd = -(w**2) * r
        return np.concatenate([r, rd]), np.concatenate([rd, rdd])


@dataclass(frozen=True)
class ControllerSettings:
    q_weight: float = 10.0
    r_weight: float = 1.0
    eps_det: float = EPS_DET
    legacy_sign: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.q_weight) and self.q_weight >= 0):
            raise ValueError(f"q_weight must be >= 0, got {self.q_weight!r}")
        if not (math.isfinite(self.r_weight) and self.r_weight > 0):
            raise ValueError(f"r_weight must be > 0, got {self.r_weight!r}")
        if not (math.isfinite(self.eps_det) and self.eps_det > 0):
            raise ValueError(f"eps_det must be > 0, got {self.eps_det!r}")


@dataclass(frozen=True)
class SimSettings:
    dt: float = 1e-3
    t_final: float = 30.0
    physics_mode: str = "corrected"
    log_every: int = 1
    omega_max: float | None = None  # rotor-speed saturation; disabled by default

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if not (math.isfinite(self.t_final) and self.t_final > self.dt):
            raise ValueError(f"t_final must exceed dt, got {self.t_final!r}")
        if self.physics_mode not in PHYSICS_MODES:
            raise ValueError(
                f"physics_mode must be one of {PHYSICS_MODES}, got {self.physics_mode!r}"
            )
        if not (isinstance(self.log_every, int) and self.log_every >= 1):
            raise ValueError(f"log_every must be a positive integer, got {self.log_every!r}")
        if self.omega_max is not None and not (
            math.isfinite(self.omega_max) and self.omega_max > 0
        ):
            raise ValueError(f"omega_max must be > 0 or None, got {self.omega_max!r}")

    @property
    def n_steps(self) -> int:
        return round(self.t_final / self.dt)


@dataclass(frozen=True)
class OutputSettings:
    csv_path: str | None = None
    svg_dir: str | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    params: PhysicalParams = field(default_factory=default_params)
    command: Command = field(default_factory=lambda: Command("step"))
    estimator: est_mod.EstimatorConfig = field(default_factory=est_mod.EstimatorConfig)
    controller: ControllerSettings = field(default_factory=ControllerSettings)
    sim: SimSettings = field(default_factory=SimSettings)
    outputs: OutputSettings = field(default_factory=OutputSettings)


def default_scenario() -> ScenarioConfig:
    """Stock step scenario: bench parameters, set point [pi/4, -pi/3]."""
    return ScenarioConfig()


@dataclass
class Trace:
    """Logged time series plus run-level flags.

    `data` holds one row per logged step with columns TRACE_COLUMNS.  Event
    times record derivative evaluations where the estimated input map was too
    close to singular and the previous control was held (`n_events` may
    exceed len(events) if the event buffer overflowed).
    """

    data: np.ndarray
    events: np.ndarray
    n_events: int
    max_event_time: float
    singularity_hit: bool
    max_lin_residual: float

    def column(self, name: str) -> np.ndarray:
        return self.data[:, TRACE_COLUMNS.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def angles(self) -> np.ndarray:
        return self.data[:, 1:3]

    @property
    def rates(self) -> np.ndarray:
        return self.data[:, 3:5]

    @property
    def references(self) -> np.ndarray:
        return self.data[:, 5:7]

    @property
    def rotor_speeds(self) -> np.ndarray:
        return self.data[:, 7:9]

    @property
    def theta_hat(self) -> np.ndarray:
        return self.data[:, 11:17]

    @property
    def q(self) -> np.ndarray:
        return self.data[:, 17:19]

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]


@dataclass
class RunMetrics:
    """Summary numbers for a completed run (NaN-filled after an abort)."""

    final_error: np.ndarray       # r(t_end) - y(t_end), rad
    rms_error_tail: np.ndarray    # per-channel RMS over the last 20 % of the run
    max_rotor_speed: float        # rad/s
    estimator_final: np.ndarray
    singularity_hit: bool


class ClosedLoop:
    """Reference (pure numpy) closed-loop right-hand side.

    Owns the held control and the singular-authority event log; `probe`, when
    set, is called as probe(t, v, xi2_dot) at every derivative evaluation.
    """

    def __init__(self, cfg: ScenarioConfig, gains):
        self.cfg = cfg
        self.params = cfg.params
        self.C = allocation_matrix(cfg.params)
        self.gains = gains  # ServoGains for step, 2x4 K for harmonic
        self.held_Omega = np.zeros(2)
        self.events: list[float] = []
        self.max_lin_residual = 0.0
        self.probe = None

    def initial_state(self) -> np.ndarray:
        y = np.zeros(N_STATE)
        y[62:68] = self.cfg.estimator.theta_hat0
        return y

    def control(self, t: float, y: np.ndarray):
        """Virtual input and rotor command at (t, y); logs held-control events."""
        cfg = self.cfg
        x = y[0:4]
        if cfg.command.kind == "step":
            v = self.gains.k_x @ x + self.gains.k_q @ y[68:70]
        else:
            x_d, x_d_dot = cfg.command.desired_state(t)
            v = self.gains @ (x - x_d) + x_d_dot[2:4]
        theta = y[62:68]
        mode = cfg.sim.physics_mode
        F1 = model.f1(x, mode)
        drift = F1 + model.f2(x) @ theta[:2]
        w = -(drift + v) if cfg.controller.legacy_sign else -drift + v
        sec = 1.0 / math.cos(y[0])
        b00, b01 = theta[2], theta[3]
        b10, b11 = sec * theta[4], sec * theta[5]
        det = b00 * b11 - b01 * b10
        if abs(det) < cfg.controller.eps_det:
            Omega = self.held_Omega.copy()
            self.events.append(t)
        else:
            Omega = np.array(
                [(b11 * w[0] - b01 * w[1]) / det, (b00 * w[1] - b10 * w[0]) / det]
            )
            self.held_Omega = Omega.copy()
        omega = np.copysign(np.sqrt(np.abs(Omega)), Omega)
        if cfg.sim.omega_max is not None:
            omega = np.clip(omega, -cfg.sim.omega_max, cfg.sim.omega_max)
            Omega = omega * np.abs(omega)
        M = self.C @ Omega
        return v, Omega, omega, M, F1

    def derivative(self, t: float, y: np.ndarray, row: np.ndarray | None = None) -> np.ndarray:
        """Closed-loop derivative; fills a trace `row` when one is passed."""
        cfg = self.cfg
        p = self.params
        pv, ph, pvd, phd = y[0], y[1], y[2], y[3]
        if not abs(pv) < PHI_V_LIMIT:
            raise SingularityError(
                f"|phi_v| = {abs(pv):.6f} rad exceeds the guard pi/2 - {EPS_SING}"
            )
        v, Omega, omega, M, F1 = self.control(t, y)
        sv, cv = math.sin(pv), math.cos(pv)
        pvdd = (M[0] - (p.J3 - p.J1) * sv * cv * phd**2) / p.J2
        if cfg.sim.physics_mode == "corrected":
            transport = sv * pvd * phd
        else:
            transport = sv * phd
        phdd = (M[1] - (p.J1 - p.J2) * sv * pvd * phd + p.J3 * transport) / (p.J3 * cv)
        xi2_dot = np.array([pvdd, phdd])
        resid = float(np.max(np.abs(xi2_dot - v)))
        if resid > self.max_lin_residual:
            self.max_lin_residual = resid
        if self.probe is not None:
            self.probe(t, v, xi2_dot)
        if row is not None:
            row[0] = t
            row[1:5] = y[0:4]
            row[5:7] = cfg.command.reference(t)
            row[7:9] = omega
            row[9:11] = M
            row[11:17] = y[62:68]
            row[17:19] = y[68:70]

        dy = np.zeros(N_STATE)
        dy[0:2] = y[2:4]
        dy[2] = pvdd
        dy[3] = phdd

        gamma = cfg.estimator.gamma
        lpf_phi = y[8:20].reshape(2, 6)
        Phi = model.regressor(y[0:4], Omega)
        dy[4:6] = -gamma * y[4:6] + y[2:4]
        dy[6:8] = -gamma * y[6:8] + F1
        dy[8:20] = (-gamma * lpf_phi + Phi).ravel()

        xi_f = y[2:4] - gamma * y[4:6] - y[6:8]
        lam = cfg.estimator.lam
        phi_bar = y[26:62].reshape(6, 6)
        dy[20:26] = -lam * y[20:26] + lpf_phi.T @ xi_f
        dy[26:62] = (-lam * phi_bar + lpf_phi.T @ lpf_phi).ravel()

        if not cfg.estimator.freeze_theta:
            Xi = phi_bar @ y[62:68] - y[20:26]
            norm = float(np.linalg.norm(Xi))
            if norm >= est_mod.EPS_XI:
                e = cfg.estimator
                dy[62:68] = (
                    -e.c1 / norm ** (1.0 - e.alpha1) - e.c2 / norm ** (1.0 - e.alpha2)
                ) * Xi

        if cfg.command.kind == "step":
            dy[68:70] = cfg.command.r - y[0:2]
        return dy


def _design_gains(cfg: ScenarioConfig):
    if cfg.command.kind == "step":
        return design_servo_gains(cfg.controller.q_weight, cfg.controller.r_weight)
    return design_tracking_gain(cfg.controller.q_weight, cfg.controller.r_weight)


def _trace_rows(n_steps: int, log_every: int) -> int:
    return (n_steps - 1) // log_every + 2


def _run_reference(cfg: ScenarioConfig, loop: ClosedLoop) -> Trace:
    sim = cfg.sim
    n_steps, dt, log_every = sim.n_steps, sim.dt, sim.log_every
    data = np.zeros((_trace_rows(n_steps, log_every), N_COLS))
    y = loop.initial_state()
    rows = 0
    singular = False
    try:
        for step in range(n_steps):
            t = step * dt
            if step % log_every == 0:
                k1 = loop.derivative(t, y, row=data[rows])
                rows += 1
            else:
                k1 = loop.derivative(t, y)
            k2 = loop.derivative(t + 0.5 * dt, y + 0.5 * dt * k1)
            k3 = loop.derivative(t + 0.5 * dt, y + 0.5 * dt * k2)
            k4 = loop.derivative(t + dt, y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    except SingularityError:
        singular = True
    if not singular:
        try:
            loop.derivative(n_steps * dt, y, row=data[rows])
            rows += 1
        except SingularityError:
            singular = True
    events = np.asarray(loop.events, dtype=float)
    return Trace(
        data=data[:rows],
        events=events,
        n_events=len(loop.events),
        max_event_time=float(events.max()) if events.size else math.nan,
        singularity_hit=singular,
        max_lin_residual=loop.max_lin_residual,
    )


def _pack_kernel_params(cfg: ScenarioConfig, gains) -> np.ndarray:
    pk = np.zeros(_kernel.PK_SIZE)
    p = cfg.params
    C = allocation_matrix(p)
    pk[_kernel.PK_J1] = p.J1
    pk[_kernel.PK_J2] = p.J2
    pk[_kernel.PK_J3] = p.J3
    pk[_kernel.PK_C11] = C[0, 0]
    pk[_kernel.PK_C12] = C[0, 1]
    pk[_kernel.PK_C21] = C[1, 0]
    pk[_kernel.PK_C22] = C[1, 1]
    pk[_kernel.PK_MODE] = 0.0 if cfg.sim.physics_mode == "corrected" else 1.0
    pk[_kernel.PK_GUARD] = PHI_V_LIMIT
    e = cfg.estimator
    pk[_kernel.PK_GAMMA] = e.gamma
    pk[_kernel.PK_LAM] = e.lam
    pk[_kernel.PK_C1] = e.c1
    pk[_kernel.PK_C2] = e.c2
    pk[_kernel.PK_ALPHA1] = e.alpha1
    pk[_kernel.PK_ALPHA2] = e.alpha2
    pk[_kernel.PK_EPS_XI] = est_mod.EPS_XI
    pk[_kernel.PK_FREEZE] = 1.0 if e.freeze_theta else 0.0
    pk[_kernel.PK_EPS_DET] = cfg.controller.eps_det
    pk[_kernel.PK_LEGACY_SIGN] = 1.0 if cfg.controller.legacy_sign else 0.0
    pk[_kernel.PK_OMEGA_MAX] = math.inf if cfg.sim.omega_max is None else cfg.sim.omega_max
    if cfg.command.kind == "step":
        pk[_kernel.PK_CMD] = 0.0
        pk[_kernel.PK_CMD_A] = cfg.command.r[0]
        pk[_kernel.PK_CMD_B] = cfg.command.r[1]
        pk[_kernel.PK_KX : _kernel.PK_KX + 8] = gains.k_x.ravel()
        pk[_kernel.PK_KQ : _kernel.PK_KQ + 4] = gains.k_q.ravel()
    else:
        pk[_kernel.PK_CMD] = 1.0
        pk[_kernel.PK_CMD_A] = cfg.command.amplitude
        pk[_kernel.PK_CMD_B] = cfg.command.frequency
        pk[_kernel.PK_KX : _kernel.PK_KX + 8] = np.asarray(gains).ravel()
    return pk


def _run_kernel(cfg: ScenarioConfig, gains) -> Trace:
    sim = cfg.sim
    n_steps, log_every = sim.n_steps, sim.log_every
    pk = _pack_kernel_params(cfg, gains)
    aux = np.zeros(_kernel.AUX_SIZE)
    aux[_kernel.AUX_MAX_EVENT_T] = -math.inf
    y = np.zeros(N_STATE)
    y[62:68] = cfg.estimator.theta_hat0
    data = np.zeros((_trace_rows(n_steps, log_every), _kernel.N_COLS))
    status, _steps, rows = _kernel.integrate(
        y, 0.0, n_steps, sim.dt, log_every, pk, aux, data
    )
    n_events = int(aux[_kernel.AUX_N_EVENTS])
    events = aux[_kernel.AUX_EVENTS : _kernel.AUX_EVENTS + min(n_events, _kernel.EVENTS_CAP)]
    return Trace(
        data=data[:rows],
        events=events.copy(),
        n_events=n_events,
        max_event_time=float(aux[_kernel.AUX_MAX_EVENT_T]) if n_events else math.nan,
        singularity_hit=(status != 0),
        max_lin_residual=float(aux[_kernel.AUX_MAX_RESID]),
    )


def compute_metrics(trace: Trace, command: Command) -> RunMetrics:
    if trace.singularity_hit or trace.n_rows == 0:
        return RunMetrics(
            final_error=np.full(2, math.nan),
            rms_error_tail=np.full(2, math.nan),
            max_rotor_speed=math.nan,
            estimator_final=(
                trace.theta_hat[-1].copy() if trace.n_rows else np.full(6, math.nan)
            ),
            singularity_hit=trace.singularity_hit,
        )
    err = trace.references - trace.angles
    tail = trace.t >= 0.8 * trace.t[-1]
    return RunMetrics(
        final_error=err[-1].copy(),
        rms_error_tail=np.sqrt(np.mean(err[tail] ** 2, axis=0)),
        max_rotor_speed=float(np.max(np.abs(trace.rotor_speeds))),
        estimator_final=trace.theta_hat[-1].copy(),
        singularity_hit=False,
    )


def run_scenario(
    cfg: ScenarioConfig, use_kernel: bool | None = None
) -> tuple[Trace, RunMetrics]:
    """Execute one scenario; returns the logged trace and its summary metrics.

    `use_kernel` forces the compiled or the reference integrator; by default
    the compiled path is used when numba is importable.  A singularity abort
    is reported through `trace.singularity_hit` (with a truncated trace), not
    as an exception.
    """
    if use_kernel is None:
        use_kernel = _kernel is not None
    if use_kernel and _kernel is None:
        raise RuntimeError("compiled kernel requested but numba is not available")
    gains = _design_gains(cfg)
    if use_kernel:
        trace = _run_kernel(cfg, gains)
    else:
        trace = _run_reference(cfg, ClosedLoop(cfg, gains))
    return trace, compute_metrics(trace, cfg.command)


@dataclass
class SweepRun:
    label: str
    value: float
    config: ScenarioConfig
    trace: Trace
    metrics: RunMetrics
    angle_deviation: float  # sup-norm vs the nominal run over the logged grid
    rotor_rms: float        # RMS of both rotor-speed traces combined


@dataclass
class SweepReport:
    kind: str
    nominal: SweepRun
    runs: list[SweepRun]

    @property
    def all_completed(self) -> bool:
        return not any(r.metrics.singularity_hit for r in self.runs)


def _rotor_rms(trace: Trace) -> float:
    return float(np.sqrt(np.mean(trace.rotor_speeds**2)))


def _sweep(kind, labelled_configs, nominal_cfg, use_kernel=None) -> SweepReport:
    nom_trace, nom_metrics = run_scenario(nominal_cfg, use_kernel)
    nominal = SweepRun("nominal", 1.0, nominal_cfg, nom_trace, nom_metrics, 0.0,
                       _rotor_rms(nom_trace))
    runs = []
    for label, value, cfg in labelled_configs:
        trace, metrics = run_scenario(cfg, use_kernel)
        if metrics.singularity_hit or trace.n_rows != nom_trace.n_rows:
            deviation = math.nan
        else:
            deviation = float(np.max(np.abs(trace.angles - nom_trace.angles)))
        runs.append(SweepRun(label, value, cfg, trace, metrics, deviation, _rotor_rms(trace)))
    return SweepReport(kind=kind, nominal=nominal, runs=runs)


INERTIA_SCALES = (0.1, 0.5, 1.5, 2.0)
ROTOR_COEFF_SCALES = (0.5, 10.0, 100.0, 1000.0)
AXIS_ANGLES = (math.pi / 8, math.pi / 6, math.pi / 4, math.pi / 3)


def run_inertia_sweep(use_kernel: bool | None = None) -> SweepReport:
    """Step scenario with J1, J2, J3 scaled; controller/estimator gains fixed."""
    base = default_scenario()
    configs = []
    for a in INERTIA_SCALES:
        p = base.params
        params = replace(p, J1=a * p.J1, J2=a * p.J2, J3=a * p.J3)
        configs.append((f"alpha={a:g}", a, replace(base, params=params)))
    return _sweep("inertia", configs, base, use_kernel)


def run_rotor_coeff_sweep(use_kernel: bool | None = None) -> SweepReport:
    """Step scenario with k_f, k_tau scaled; gains fixed.

    The largest scale multiplies the loop gain through the frozen estimate by
    ~1e3, which pushes the fastest closed-loop mode to ~1e4 rad/s; the sweep
    therefore integrates at dt = 1e-4 (logging every 10th step keeps the
    logged grid identical to the stock 1e-3 runs).
    """
    base = replace(default_scenario(), sim=SimSettings(dt=1e-4, log_every=10))
    configs = []
    for a in ROTOR_COEFF_SCALES:
        p = base.params
        params = replace(p, k_f=a * p.k_f, k_tau=a * p.k_tau)
        configs.append((f"alpha={a:g}", a, replace(base, params=params)))
    return _sweep("rotor", configs, base, use_kernel)


def run_axis_sweep(use_kernel: bool | None = None) -> SweepReport:
    """Step scenario with the rotor tilt swept, beta_b = -beta_a; gains fixed."""
    base = default_scenario()
    configs = []
    for b in AXIS_ANGLES:
        params = replace(base.params, beta_a=b, beta_b=-b)
        configs.append((f"beta_a={b:.6f}", b, replace(base, params=params)))
    return _sweep("axis", configs, base, use_kernel)
