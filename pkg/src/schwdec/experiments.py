"""Experiment drivers: charge-density evolution, pointer-state sieve,
Bures-distance decoherence with its control curves, site-local decoherence
maps, and the apparatus/environment size sweep.

Branch trajectories evolve in lockstep (one generator per branch advancing
between shared checkpoint times) and every density-matrix diagnostic is
computed online at the checkpoints, so no trajectory snapshots accumulate.
Every run also records norm, energy and total Schwinger charge per branch
for the conservation checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, derive_seed
from .evolve import EvolutionParams, TrajectoryRecord, iterate_checkpoints
from .probe import (
    build_full_hamiltonian,
    gaussian_packet,
    tripartite_space,
    uniform_state,
)
from .qinfo import (
    bures_distance,
    haar_random_state,
    marginal_distribution,
    mix,
    partial_trace,
    random_density_matrix,
    von_neumann_entropy,
)
from .schwinger import (
    MeasuredRegion,
    build_schwinger,
    charge_pair_state,
    ground_state,
    measured_operator,
)
from .tensor import CompositeSpace, OperatorExpr, StateVector, kron_states

LATE_WINDOW = 0.25  # fraction of the run used for "late-time" averages


@dataclass
class BranchSet:
    """Initial states of the two pointer branches and their superposition."""

    omega: StateVector
    pair: StateVector
    superposition: StateVector

    def as_dict(self) -> dict:
        return {
            "omega": self.omega,
            "pair": self.pair,
            "superposition": self.superposition,
        }


@dataclass
class Model:
    """Everything assembled from a config: operators, states, Hamiltonian."""

    config: ExperimentConfig
    spin_ops: object
    ground: StateVector
    ground_energy: float
    pair: StateVector
    measured: OperatorExpr
    space: CompositeSpace
    hamiltonian: OperatorExpr
    packet: StateVector
    env0: StateVector

    @property
    def n_sites(self) -> int:
        return self.config.schwinger.n_sites

    @property
    def keep_sa(self) -> tuple:
        """Factor axes of the system + apparatus (everything but the environment)."""
        return tuple(range(self.n_sites + 1))

    def sa_space(self) -> CompositeSpace:
        return CompositeSpace(self.space.factors[: self.n_sites + 1])

    def hamiltonian_with(self, g_sa: float) -> OperatorExpr:
        return build_full_hamiltonian(
            self.space,
            self.spin_ops,
            self.measured,
            self.config.particles,
            self.config.couplings,
            g_sa=g_sa,
        )

    def total_charge(self) -> OperatorExpr:
        return self.spin_ops.total_charge.with_space(self.space)

    def product_state(self, spin_amplitudes: np.ndarray) -> StateVector:
        return kron_states(
            self.space,
            [spin_amplitudes, self.packet.amplitudes, self.env0.amplitudes],
        )

    def branch_set(self, phase: complex = 1.0) -> BranchSet:
        sup = (self.ground.amplitudes + phase * self.pair.amplitudes) / math.sqrt(2.0)
        return BranchSet(
            omega=self.product_state(self.ground.amplitudes),
            pair=self.product_state(self.pair.amplitudes),
            superposition=self.product_state(sup),
        )

    def haar_sa_state(self, seed: int) -> StateVector:
        """Haar-random system+apparatus part, environment still delocalized."""
        rand = haar_random_state(self.sa_space(), seed)
        return kron_states(self.space, [rand.amplitudes, self.env0.amplitudes])


def build_model(config: ExperimentConfig, n_points: int | None = None) -> Model:
    config.validate()
    particles = config.particles
    if n_points is not None and n_points != particles.n_points:
        particles = type(particles)(
            n_points=n_points,
            lattice_spacing=particles.lattice_spacing,
            mass_apparatus=particles.mass_apparatus,
            mass_environment=particles.mass_environment,
            boundary=particles.boundary,
        )
        config = type(config)(
            schwinger=config.schwinger,
            particles=particles,
            couplings=config.couplings,
            evolution=config.evolution,
            packet=config.packet,
            seed=config.seed,
            n_random=config.n_random,
            measured_region=config.measured_region,
            sweep=config.sweep,
            probe_time=config.probe_time,
        )
    spin_ops = build_schwinger(config.schwinger)
    ground, energy = ground_state(
        spin_ops, seed=derive_seed(config.seed, "ground-start")
    )
    pair = charge_pair_state(spin_ops, ground)
    measured = measured_operator(spin_ops, ground, config.measured_region)
    space = tripartite_space(config.schwinger.n_sites, particles)
    h = build_full_hamiltonian(space, spin_ops, measured, particles, config.couplings)
    packet = gaussian_packet(
        particles,
        center=config.packet.center,
        width=config.packet.width,
        momentum=config.packet.momentum,
    )
    env0 = uniform_state(particles)
    return Model(
        config=config,
        spin_ops=spin_ops,
        ground=ground,
        ground_energy=energy,
        pair=pair,
        measured=measured,
        space=space,
        hamiltonian=h,
        packet=packet,
        env0=env0,
    )


def _run_lockstep(
    h_by_branch: dict,
    states: dict,
    evolution: EvolutionParams,
    on_checkpoint,
    charge_op: OperatorExpr | None = None,
):
    """Advance all branches between shared checkpoints, recording conservation.

    ``on_checkpoint(t, states)`` is called at every checkpoint with the
    current StateVectors.  Norm, energy and (when ``charge_op`` is given)
    total Schwinger charge are recorded per branch.  Returns
    (times, conservation TrajectoryRecord).
    """
    iters = {
        label: iterate_checkpoints(h_by_branch[label], state, evolution)
        for label, state in states.items()
    }
    times = []
    cons: dict = {}
    while True:
        points = {}
        stopped = False
        for label, it in iters.items():
            try:
                points[label] = next(it)
            except StopIteration:
                stopped = True
        if stopped:
            break
        t = next(iter(points.values()))[0]
        now = {label: p[1] for label, p in points.items()}
        for label, psi in now.items():
            cons.setdefault(f"norm_{label}", []).append(psi.norm)
            cons.setdefault(f"energy_{label}", []).append(
                h_by_branch[label].expectation(psi)
            )
            if charge_op is not None:
                cons.setdefault(f"charge_{label}", []).append(
                    charge_op.expectation(psi)
                )
        times.append(t)
        on_checkpoint(t, now)
    times = np.asarray(times)
    record = TrajectoryRecord(times, {k: np.asarray(v) for k, v in cons.items()})
    return times, record


def _late_slice(n: int) -> slice:
    start = max(0, int(math.ceil(n * (1.0 - LATE_WINDOW))))
    return slice(min(start, n - 1), n)


# ---------------------------------------------------------------------------
# charge-density evolution (three initial states; densities and positions)
# ---------------------------------------------------------------------------


@dataclass
class ChargeEvolutionResult:
    branches: dict  # label -> TrajectoryRecord


def run_charge_density_evolution(config: ExperimentConfig) -> ChargeEvolutionResult:
    """Per-site charge density plus apparatus/environment position
    distributions for the vacuum, charge-pair and superposition branches."""
    model = build_model(config)
    n = model.n_sites
    a_ax, e_ax = n, n + 1
    q_ops = [op.with_space(model.space) for op in model.spin_ops.charge_density]
    total_q = model.total_charge()
    branches = model.branch_set()
    records = {}
    for label, psi0 in branches.as_dict().items():
        rows = []
        times = []
        for t, psi in iterate_checkpoints(model.hamiltonian, psi0, config.evolution):
            row = {
                "norm": psi.norm,
                "energy": model.hamiltonian.expectation(psi),
                "charge_total": total_q.expectation(psi),
            }
            for site, q in enumerate(q_ops, start=1):
                row[f"q{site}"] = q.expectation(psi)
            for j, val in enumerate(marginal_distribution(psi, a_ax)):
                row[f"xa{j:02d}"] = float(val)
            for j, val in enumerate(marginal_distribution(psi, e_ax)):
                row[f"xe{j:02d}"] = float(val)
            times.append(t)
            rows.append(row)
        series = {k: np.array([r[k] for r in rows]) for k in rows[0]}
        records[label] = TrajectoryRecord(np.array(times), series)
    return ChargeEvolutionResult(branches=records)


# ---------------------------------------------------------------------------
# pointer-state predictability sieve
# ---------------------------------------------------------------------------


@dataclass
class SieveResult:
    entropy: TrajectoryRecord
    conservation: TrajectoryRecord
    sweep: TrajectoryRecord | None


def _sieve_series(model: Model, n_random: int):
    branches = model.branch_set()
    states = {"omega": branches.omega, "pair": branches.pair}
    for i in range(n_random):
        states[f"random_{i}"] = model.haar_sa_state(
            derive_seed(model.config.seed, f"sieve-random-{i}")
        )
    h_by_branch = {label: model.hamiltonian for label in states}
    keep = model.keep_sa
    entropy_rows = {f"S_{label}": [] for label in states}

    def on_checkpoint(t, now):
        for label, psi in now.items():
            entropy_rows[f"S_{label}"].append(
                von_neumann_entropy(partial_trace(psi, keep))
            )

    times, cons = _run_lockstep(
        h_by_branch, states, model.config.evolution, on_checkpoint,
        charge_op=model.total_charge(),
    )
    entropy = TrajectoryRecord(times, {k: np.asarray(v) for k, v in entropy_rows.items()})
    return entropy, cons


def sieve_gap(entropy: TrajectoryRecord) -> dict:
    """Late-time separation between random and pointer entropies."""
    late = _late_slice(len(entropy.times))
    pointer = max(
        float(np.mean(entropy.series["S_omega"][late])),
        float(np.mean(entropy.series["S_pair"][late])),
    )
    randoms = [
        float(np.mean(v[late]))
        for k, v in entropy.series.items()
        if k.startswith("S_random_")
    ]
    rand_min = min(randoms)
    return {
        "pointer_late": pointer,
        "random_late_min": rand_min,
        "entropy_gap": rand_min - pointer,
    }


def run_pointer_sieve(config: ExperimentConfig, n_random: int | None = None) -> SieveResult:
    """Entropy histories of the pointer branches against Haar-random states."""
    n_random = config.n_random if n_random is None else n_random
    if n_random < 3:
        raise ValueError("pointer sieve needs n_random >= 3")
    model = build_model(config)
    entropy, cons = _sieve_series(model, n_random)
    sweep_record = None
    if config.sweep:
        rows = []
        for size in config.sweep:
            if size == model.config.particles.n_points:
                ent = entropy
            else:
                ent, _ = _sieve_series(build_model(config, n_points=size), n_random)
            rows.append({"n_points": size, **sieve_gap(ent)})
        sweep_record = TrajectoryRecord(
            np.array([r["n_points"] for r in rows], dtype=float),
            {
                k: np.array([r[k] for r in rows])
                for k in ("entropy_gap", "pointer_late", "random_late_min")
            },
            index_name="n_points",
        )
    return SieveResult(entropy=entropy, conservation=cons, sweep=sweep_record)


# ---------------------------------------------------------------------------
# decoherence distance with control curves
# ---------------------------------------------------------------------------


@dataclass
class DecoherenceResult:
    distances: TrajectoryRecord
    charge_top: TrajectoryRecord
    conservation: TrajectoryRecord
    sweep: TrajectoryRecord | None
    initial_distance: float
    min_distance: float
    t_min: float


def _decoherence_series(model: Model, n_random: int, branches: BranchSet | None = None):
    """Five Fig.-style distance curves plus the top-region charge signal."""
    config = model.config
    if branches is None:
        branches = model.branch_set()
    states = dict(branches.as_dict())
    keep = model.keep_sa
    with_controls = n_random > 0
    if with_controls:
        if n_random < 2:
            raise ValueError("control curves need n_random >= 2 (or 0 to disable)")
        states["tilde_a"] = model.haar_sa_state(derive_seed(config.seed, "tilde-a"))
        states["tilde_b"] = model.haar_sa_state(derive_seed(config.seed, "tilde-b"))
        amps = (
            states["tilde_a"].amplitudes + states["tilde_b"].amplitudes
        )
        states["tilde_super"] = StateVector(model.space, amps, normalize=True)
        refs = [
            random_density_matrix(
                model.space, keep, derive_seed(config.seed, f"reference-dm-{i}")
            )
            for i in range(n_random)
        ]
        d_rand_rand = bures_distance(refs[0], refs[1])

    n = model.n_sites
    top_sites = range(max(0, n - 6), n)  # top six (0-based axes)
    q_ops = [op.with_space(model.space) for op in model.spin_ops.charge_density]
    h_by_branch = {label: model.hamiltonian for label in states}

    curves = {k: [] for k in (
        "dB_rho_rhoD", "dB_rho_random", "dB_random_random", "dB_rho_rho0", "dB_tilde"
    )}
    charge_top = []
    rho0_holder = {}

    def on_checkpoint(t, now):
        rho = partial_trace(now["superposition"], keep)
        rho_d = mix(
            [partial_trace(now["omega"], keep), partial_trace(now["pair"], keep)],
            [0.5, 0.5],
        )
        if t == 0.0:
            rho0_holder["rho0"] = rho
        curves["dB_rho_rhoD"].append(bures_distance(rho, rho_d))
        if with_controls:
            curves["dB_rho_random"].append(bures_distance(rho, refs[0]))
            curves["dB_random_random"].append(d_rand_rand)
            curves["dB_rho_rho0"].append(bures_distance(rho, rho0_holder["rho0"]))
            rho_t = partial_trace(now["tilde_super"], keep)
            rho_td = mix(
                [partial_trace(now["tilde_a"], keep), partial_trace(now["tilde_b"], keep)],
                [0.5, 0.5],
            )
            curves["dB_tilde"].append(bures_distance(rho_t, rho_td))
        charge_top.append(
            float(np.mean([q_ops[i].expectation(now["superposition"]) for i in top_sites]))
        )

    times, cons = _run_lockstep(
        h_by_branch, states, config.evolution, on_checkpoint,
        charge_op=model.total_charge(),
    )
    series = {k: np.asarray(v) for k, v in curves.items() if v}
    distances = TrajectoryRecord(times, series)
    charge_rec = TrajectoryRecord(times, {"charge_top": np.asarray(charge_top)})
    return distances, charge_rec, cons


def run_decoherence_distance(
    config: ExperimentConfig, n_random: int = 2, branches: BranchSet | None = None
) -> DecoherenceResult:
    """Bures distance between the traced state and the decohered mixture,
    with the four control curves and the top-region charge signal."""
    model = build_model(config)
    distances, charge_rec, cons = _decoherence_series(model, n_random, branches)
    blue = distances.series["dB_rho_rhoD"]
    i_min = int(np.argmin(blue))
    sweep_record = None
    if config.sweep:
        rows = []
        for size in config.sweep:
            if size == model.config.particles.n_points:
                d = distances
            else:
                d, _, _ = _decoherence_series(build_model(config, n_points=size), 0)
            b = d.series["dB_rho_rhoD"]
            j = int(np.argmin(b))
            probe = config.probe_time
            if probe is None:
                j_probe = j
            else:
                j_probe = int(np.argmin(np.abs(d.times - probe)))
            rows.append(
                {
                    "n_points": size,
                    "min_dB": float(b[j]),
                    "t_min": float(d.times[j]),
                    "dB_probe": float(b[j_probe]),
                }
            )
        sweep_record = TrajectoryRecord(
            np.array([r["n_points"] for r in rows], dtype=float),
            {k: np.array([r[k] for r in rows]) for k in ("min_dB", "t_min", "dB_probe")},
            index_name="n_points",
        )
    return DecoherenceResult(
        distances=distances,
        charge_top=charge_rec,
        conservation=cons,
        sweep=sweep_record,
        initial_distance=float(blue[0]),
        min_distance=float(blue[i_min]),
        t_min=float(distances.times[i_min]),
    )


# ---------------------------------------------------------------------------
# site-local decoherence map
# ---------------------------------------------------------------------------


@dataclass
class LocalMapResult:
    map_record: TrajectoryRecord  # long format: site, dB, dB_gsa0, diff, logdiff
    conservation: TrajectoryRecord
    times: np.ndarray
    sites: np.ndarray
    coupled: np.ndarray  # (n_times, n_sites)
    uncoupled: np.ndarray


def run_local_decoherence_map(config: ExperimentConfig) -> LocalMapResult:
    """d_B(rho_x, rho_{x,D}) per Schwinger site, with and without the
    measurement coupling, plus their difference maps."""
    if config.measured_region is not MeasuredRegion.TOP_TWO:
        raise ValueError("local map requires measured_region = top_two")
    model = build_model(config)
    n = model.n_sites
    h1 = model.hamiltonian
    h0 = model.hamiltonian_with(0.0)
    base = model.branch_set().as_dict()
    states = {}
    h_by_branch = {}
    for label, psi in base.items():
        states[label] = psi
        h_by_branch[label] = h1
        states[f"{label}_gsa0"] = psi
        h_by_branch[f"{label}_gsa0"] = h0

    maps = {"": [], "_gsa0": []}

    def on_checkpoint(t, now):
        for suffix, rows in maps.items():
            row = np.empty(n)
            for x in range(n):
                rho_x = partial_trace(now[f"superposition{suffix}"], (x,))
                rho_xd = mix(
                    [
                        partial_trace(now[f"omega{suffix}"], (x,)),
                        partial_trace(now[f"pair{suffix}"], (x,)),
                    ],
                    [0.5, 0.5],
                )
                row[x] = bures_distance(rho_x, rho_xd)
            rows.append(row)

    times, cons = _run_lockstep(
        h_by_branch, states, config.evolution, on_checkpoint,
        charge_op=model.total_charge(),
    )
    coupled = np.asarray(maps[""])
    uncoupled = np.asarray(maps["_gsa0"])
    diff = coupled - uncoupled
    logdiff = np.log10(np.maximum(np.abs(diff), 1e-16))

    long_t, long_site = [], []
    cols = {"dB": [], "dB_gsa0": [], "diff": [], "logdiff": []}
    for i, t in enumerate(times):
        for x in range(n):
            long_t.append(t)
            long_site.append(x + 1)
            cols["dB"].append(coupled[i, x])
            cols["dB_gsa0"].append(uncoupled[i, x])
            cols["diff"].append(diff[i, x])
            cols["logdiff"].append(logdiff[i, x])
    series = {"site": np.array(long_site, dtype=float)}
    series.update({k: np.array(v) for k, v in cols.items()})
    map_record = TrajectoryRecord(np.array(long_t), series)
    return LocalMapResult(
        map_record=map_record,
        conservation=cons,
        times=times,
        sites=np.arange(1, n + 1),
        coupled=coupled,
        uncoupled=uncoupled,
    )


def spread_extent(times: np.ndarray, absmap: np.ndarray, threshold: float = 0.1):
    """Support extent of a (time, site) map relative to its seed region.

    A site is active at time t when its value is at least ``threshold`` times
    the running maximum of the map up to t.  The seed region is the active
    set at the first activation time; the extent is the largest distance (in
    sites) from the seed.  Returns (times_after_seed, extents, fitted_speed),
    the speed in sites per unit time from a least-squares fit over the
    growth phase.
    """
    absmap = np.abs(absmap)
    running = np.maximum.accumulate(absmap.max(axis=1))
    active = absmap >= threshold * np.maximum(running, 1e-300)[:, None]
    has = np.nonzero(active.any(axis=1))[0]
    if has.size == 0:
        return np.array([]), np.array([]), 0.0
    first = has[0]
    seed_sites = np.nonzero(active[first])[0]
    n_sites = absmap.shape[1]
    dist = np.array([np.min(np.abs(seed_sites - x)) for x in range(n_sites)], dtype=float)
    ts, exts = [], []
    for i in range(first, absmap.shape[0]):
        if active[i].any():
            ts.append(times[i])
            exts.append(float(dist[active[i]].max()))
    ts = np.array(ts)
    exts = np.array(exts)
    if exts.max() <= 0:
        return ts, exts, 0.0
    i_top = int(np.argmax(exts >= exts.max()))
    grow_t, grow_e = ts[: i_top + 1], exts[: i_top + 1]
    if len(grow_t) < 2 or grow_t[-1] == grow_t[0]:
        return ts, exts, math.inf
    slope = float(np.polyfit(grow_t - grow_t[0], grow_e, 1)[0])
    return ts, exts, slope


# ---------------------------------------------------------------------------
# combined size sweep (entropy gap and minimum distance per lattice size)
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    table: TrajectoryRecord  # index n_points


def run_size_sweep(config: ExperimentConfig, n_random: int | None = None) -> SweepResult:
    """Late-time sieve gap and minimum decoherence distance per lattice size."""
    n_random = config.n_random if n_random is None else n_random
    sizes = config.sweep or (8, 12, 16, 20)
    rows = []
    for size in sizes:
        model = build_model(config, n_points=size)
        branches = model.branch_set()
        states = dict(branches.as_dict())
        for i in range(n_random):
            states[f"random_{i}"] = model.haar_sa_state(
                derive_seed(model.config.seed, f"sieve-random-{i}")
            )
        keep = model.keep_sa
        h_by_branch = {label: model.hamiltonian for label in states}
        entropies = {label: [] for label in states if label != "superposition"}
        blues = []

        def on_checkpoint(t, now):
            rho = partial_trace(now["superposition"], keep)
            rho_d = mix(
                [partial_trace(now["omega"], keep), partial_trace(now["pair"], keep)],
                [0.5, 0.5],
            )
            blues.append(bures_distance(rho, rho_d))
            for label in entropies:
                entropies[label].append(
                    von_neumann_entropy(partial_trace(now[label], keep))
                )

        times, _ = _run_lockstep(h_by_branch, states, config.evolution, on_checkpoint)
        ent_record = TrajectoryRecord(
            times, {f"S_{k}": np.asarray(v) for k, v in entropies.items()}
        )
        gap = sieve_gap(ent_record)
        blues = np.asarray(blues)
        j = int(np.argmin(blues))
        rows.append(
            {
                "n_points": size,
                "entropy_gap": gap["entropy_gap"],
                "pointer_late": gap["pointer_late"],
                "random_late_min": gap["random_late_min"],
                "min_dB": float(blues[j]),
                "t_min": float(times[j]),
                "initial_dB": float(blues[0]),
            }
        )
    table = TrajectoryRecord(
        np.array([r["n_points"] for r in rows], dtype=float),
        {
            k: np.array([r[k] for r in rows])
            for k in (
                "entropy_gap",
                "pointer_late",
                "random_late_min",
                "min_dB",
                "t_min",
                "initial_dB",
            )
        },
        index_name="n_points",
    )
    return SweepResult(table=table)
