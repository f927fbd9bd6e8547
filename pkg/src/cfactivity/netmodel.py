"""Network scenarios and received-signal synthesis.

Geometry lives on a square torus of side ``area_side`` metres, so every AP and
user sees the same statistical neighbourhood. Large-scale fading follows the
micro-cell law ``-30.5 - 36.7 log10(d) + F`` with i.i.d. log-normal shadowing.

All randomness is drawn from named substreams of a single integer seed (see
:func:`substream`), so placement, shadowing, sequences, activity, channels and
noise can be re-drawn independently of each other.
"""

from __future__ import annotations

import dataclasses
import functools
import io
import zlib
from dataclasses import dataclass, field

import numpy as np

STREAMS = (
    "placement",
    "shadowing",
    "sequences",
    "activity",
    "channels",
    "noise",
    "permutation",
    "calibration",
)

MIN_DISTANCE = 1.0  # metres
CALIBRATION_SAMPLES = 10_000


class ConfigError(ValueError):
    """Raised for parameter sets that violate the model invariants."""


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named random component of ``seed``."""
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    tag = zlib.crc32(name.encode())
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, tag]))


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


@dataclass(frozen=True)
class SimParams:
    """Static configuration of one simulated network.

    ``shadow_var`` is the shadow-fading variance in dB^2; ``noise_dbm`` the
    receiver noise power. With ``colocated`` set, the ``M * N`` antennas are
    gathered into a single array at the centre of the area.

    ``power_policy`` is ``"full"`` (everyone at ``rho_max``) or ``"target"``
    (invert the dominant-AP path gain to reach ``target_snr_db``, capped at
    ``rho_max``). A ``None`` target is calibrated on demand. ``outage``
    decides what devices that cannot reach the target do: ``"max_power"``
    keeps them transmitting at the cap, ``"silent"`` keeps them off the air.
    """

    M: int = 20
    N: int = 2
    K: int = 100
    L: int = 20
    eps: float = 0.1
    area_side: float = 2000.0
    shadow_var: float = 4.0
    noise_dbm: float = -109.0
    rho_max: float = 0.2
    power_policy: str = "target"
    target_snr_db: float | None = None
    colocated: bool = False
    outage: str = "max_power"
    clamp_distance: bool = True

    def __post_init__(self):
        for name in ("M", "N", "K", "L"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigError(f"eps must lie in [0, 1], got {self.eps}")
        if self.area_side <= 0:
            raise ConfigError("area_side must be positive")
        if self.shadow_var < 0:
            raise ConfigError("shadow_var must be non-negative")
        if self.rho_max <= 0:
            raise ConfigError("rho_max must be positive")
        if not np.isfinite(self.noise_dbm):
            raise ConfigError("noise_dbm must be finite")
        if self.power_policy not in ("full", "target"):
            raise ConfigError(f"unknown power policy {self.power_policy!r}")
        if self.outage not in ("max_power", "silent"):
            raise ConfigError(f"unknown outage rule {self.outage!r}")

    @property
    def sigma2(self) -> float:
        return float(dbm_to_watts(self.noise_dbm))

    @property
    def n_aps(self) -> int:
        return 1 if self.colocated else self.M

    @property
    def n_antennas(self) -> int:
        return self.M * self.N if self.colocated else self.N


@dataclass
class Scenario:
    ap_positions: np.ndarray  # (M, 2)
    user_positions: np.ndarray  # (K, 2)
    beta: np.ndarray  # (M, K) linear power gains
    rho: np.ndarray  # (K,) watts
    S: np.ndarray  # (L, K) complex signatures
    sigma2: float
    n_antennas: int
    side: float
    outage: np.ndarray = field(default=None)  # (K,) devices short of the SNR target

    def __post_init__(self):
        if self.outage is None:
            self.outage = np.zeros(self.beta.shape[1], dtype=bool)

    @property
    def M(self) -> int:
        return self.beta.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[1]

    @property
    def L(self) -> int:
        return self.S.shape[0]


@dataclass
class ReceivedBatch:
    activity: np.ndarray  # (K,) bool
    sample_cov: np.ndarray  # (M, L, L) complex Hermitian
    raw_signals: np.ndarray | None = None  # (M, L, N)

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.activity)

    @property
    def n_antennas(self) -> int | None:
        return None if self.raw_signals is None else self.raw_signals.shape[2]


@dataclass
class ClusterMap:
    T: int
    clusters: np.ndarray  # (K, T) AP indices, strongest first

    @property
    def dominant(self) -> np.ndarray:
        return self.clusters[:, 0]


# ---------------------------------------------------------------- geometry


def torus_distance(p, q, side: float) -> float:
    delta = np.abs(np.mod(np.asarray(p, float), side) - np.mod(np.asarray(q, float), side))
    delta = np.minimum(delta, side - delta)
    return float(np.hypot(*delta))


def torus_distances(ap_positions, user_positions, side: float) -> np.ndarray:
    """Pairwise wrapped distances, shape ``(M, K)``."""
    ap = np.mod(np.asarray(ap_positions, float), side)
    ue = np.mod(np.asarray(user_positions, float), side)
    delta = np.abs(ap[:, None, :] - ue[None, :, :])
    delta = np.minimum(delta, side - delta)
    return np.hypot(delta[..., 0], delta[..., 1])


def path_loss_db(d, F=0.0, clamp: bool = True):
    """Large-scale gain in dB at distance ``d`` metres with shadowing ``F`` dB."""
    d = np.asarray(d, dtype=float)
    if clamp:
        d = np.maximum(d, MIN_DISTANCE)
    elif np.any(d <= 0):
        raise ValueError("distance must be positive when clamping is disabled")
    out = -30.5 - 36.7 * np.log10(d) + F
    return float(out) if np.ndim(out) == 0 else out


def large_scale_fading(ap_positions, user_positions, side, shadow_db=0.0, clamp=True) -> np.ndarray:
    d = torus_distances(ap_positions, user_positions, side)
    return 10.0 ** (path_loss_db(d, shadow_db, clamp=clamp) / 10.0)


def _place_aps(params: SimParams, rng: np.random.Generator) -> np.ndarray:
    if params.colocated:
        return np.full((1, 2), params.area_side / 2.0)
    return rng.uniform(0.0, params.area_side, size=(params.M, 2))


def _draw_geometry(params: SimParams, n_users: int, seed: int):
    rng_place = substream(seed, "placement")
    rng_shadow = substream(seed, "shadowing")
    aps = _place_aps(params, rng_place)
    users = rng_place.uniform(0.0, params.area_side, size=(n_users, 2))
    shadow = rng_shadow.normal(0.0, np.sqrt(params.shadow_var), size=(aps.shape[0], n_users))
    beta = large_scale_fading(aps, users, params.area_side, shadow, clamp=params.clamp_distance)
    return aps, users, beta


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


# ------------------------------------------------------------------ powers


def assign_powers(beta, policy: str, rho_max: float, sigma2: float, target_db: float | None = None):
    """Per-device transmit powers in watts.

    Returns ``(rho, outage)``; ``outage`` flags devices whose dominant-AP SNR
    stays below target even at ``rho_max``.
    """
    beta = np.asarray(beta, dtype=float)
    K = beta.shape[1]
    if policy == "full":
        return np.full(K, float(rho_max)), np.zeros(K, dtype=bool)
    if policy != "target":
        raise ConfigError(f"unknown power policy {policy!r}")
    if target_db is None:
        raise ConfigError("target-SNR policy needs a target (see calibrate_snr_target)")
    needed = 10.0 ** (target_db / 10.0) * sigma2 / beta.max(axis=0)
    outage = needed > rho_max
    return np.minimum(needed, rho_max), outage


def sample_dominant_snr_db(params: SimParams, n_samples: int, seed: int) -> np.ndarray:
    """Full-power dominant-AP SNR (dB) of ``n_samples`` users over fresh layouts."""
    out = []
    n_done = 0
    draw = 0
    while n_done < n_samples:
        n_users = min(params.K, n_samples - n_done)
        sub_seed = int(np.random.SeedSequence([int(seed), draw]).generate_state(1)[0])
        _, _, beta = _draw_geometry(params, n_users, sub_seed)
        out.append(10.0 * np.log10(params.rho_max * beta.max(axis=0) / params.sigma2))
        n_done += n_users
        draw += 1
    return np.concatenate(out)


@functools.lru_cache(maxsize=64)
def calibrate_snr_target(params: SimParams, n_samples: int = CALIBRATION_SAMPLES,
                         quantile: float = 0.05, seed: int = 0) -> float:
    """SNR target (dB) reachable at full power by a ``1 - quantile`` fraction of devices."""
    if n_samples < 1000:
        raise ConfigError("calibration needs at least 1000 samples")
    snr = sample_dominant_snr_db(params, n_samples, seed)
    return float(np.quantile(snr, quantile))


def resolve_power_target(params: SimParams, seed: int = 0,
                         n_samples: int = CALIBRATION_SAMPLES) -> SimParams:
    """Copy of ``params`` with a concrete SNR target when the policy needs one."""
    if params.power_policy != "target" or params.target_snr_db is not None:
        return params
    target = calibrate_snr_target(params, n_samples, 0.05, seed)
    return dataclasses.replace(params, target_snr_db=target)


# ------------------------------------------------------- scenario / signals


def generate_scenario(params: SimParams, seed: int) -> Scenario:
    params = resolve_power_target(params)
    aps, users, beta = _draw_geometry(params, params.K, seed)
    S = complex_normal(substream(seed, "sequences"), (params.L, params.K))
    rho, outage = assign_powers(beta, params.power_policy, params.rho_max, params.sigma2,
                                params.target_snr_db)
    return Scenario(
        ap_positions=aps,
        user_positions=users,
        beta=beta,
        rho=rho,
        S=S,
        sigma2=params.sigma2,
        n_antennas=params.n_antennas,
        side=params.area_side,
        outage=outage if params.outage == "silent" else np.zeros_like(outage),
    )


def sample_activity(K: int, eps: float, seed: int):
    if not 0.0 <= eps <= 1.0:
        raise ConfigError(f"eps must lie in [0, 1], got {eps}")
    a = substream(seed, "activity").random(K) < eps
    return a, np.flatnonzero(a)


def synthesize_received(scn: Scenario, activity, seed: int, keep_raw: bool | None = None) -> ReceivedBatch:
    """One coherence block: ``Y_m = S D_a D_rho^1/2 G_m + W_m`` at every AP.

    Devices flagged in ``scn.outage`` do not transmit, so they are removed from
    the returned activity. Raw signals are kept by default when ``L >= N``.
    """
    activity = np.asarray(activity, dtype=bool) & ~scn.outage
    if activity.shape != (scn.K,):
        raise ValueError(f"activity must have length {scn.K}")
    M, K, L, N = scn.M, scn.K, scn.L, scn.n_antennas
    h = complex_normal(substream(seed, "channels"), (M, K, N))
    W = complex_normal(substream(seed, "noise"), (M, L, N), scn.sigma2)
    idx = np.flatnonzero(activity)
    G = np.sqrt(scn.beta[:, idx])[..., None] * h[:, idx, :]
    X = scn.S[:, idx] * np.sqrt(scn.rho[idx])
    Y = np.einsum("lk,mkn->mln", X, G) + W
    if keep_raw is None:
        keep_raw = L >= N
    return ReceivedBatch(
        activity=activity,
        sample_cov=sample_covariance(Y),
        raw_signals=Y if keep_raw else None,
    )


def sample_covariance(Y: np.ndarray) -> np.ndarray:
    return Y @ np.conj(np.swapaxes(Y, -1, -2)) / Y.shape[-1]


def build_clusters(beta, T: int) -> ClusterMap:
    beta = np.asarray(beta, dtype=float)
    M = beta.shape[0]
    if not 1 <= T <= M:
        raise ConfigError(f"cluster size must lie in [1, {M}], got {T}")
    order = np.argsort(-beta, axis=0, kind="stable")[:T]
    return ClusterMap(T=T, clusters=np.ascontiguousarray(order.T))


# ------------------------------------------------------------------ export


def scenario_to_text(scn: Scenario) -> str:
    """Debug dump: one CSV record per AP and per user.

    Columns are ``kind,index,x_m,y_m,rho_dbm,beta_db``. AP rows leave the last
    two empty; user rows list their gains to every AP, space separated, in AP
    order.
    """
    buf = io.StringIO()
    buf.write("kind,index,x_m,y_m,rho_dbm,beta_db\n")
    for m, (x, y) in enumerate(scn.ap_positions):
        buf.write(f"ap,{m},{x:.3f},{y:.3f},,\n")
    beta_db = 10.0 * np.log10(scn.beta)
    rho_dbm = watts_to_dbm(scn.rho)
    for k, (x, y) in enumerate(scn.user_positions):
        gains = " ".join(f"{v:.3f}" for v in beta_db[:, k])
        buf.write(f"user,{k},{x:.3f},{y:.3f},{rho_dbm[k]:.3f},{gains}\n")
    return buf.getvalue()
