"""Exact path simulation of marked multivariate Hawkes processes.

The simulator superposes two exact streams: per-component immigrant
arrivals (homogeneous Poisson, sampled by inverse-transform gaps from
dedicated substreams) and offspring arrivals (inhomogeneous, sampled by
Ogata thinning of the excitation intensity, whose current value majorizes
the future because every kernel is nonincreasing). For all-exponential
kernels the excitation state is a d x d recursion updated in O(d^2) per
event; tabulated kernels fall back to history scans.

Per-component compensators are accumulated exactly along the way (closed
form for exponential kernels, kernel partial integrals otherwise), which
is what the random-time-change diagnostics and the likelihood ratio need.

RNG: counter-based Philox streams derived from a single seed, with
substreams split by role (immigrants per component / thinning / marks /
claims), so identical (spec, seed, horizon) give bit-identical paths and
any run can be re-executed in isolation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ExplosionGuard
from .model import ExponentialKernel, ModelSpec, validate_stability
from .transforms import PgfSolution  # noqa: F401  (re-exported type neighbors)


def _generator(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_seq))


class _BufferedStream:
    """Block-buffered standard-exponential and uniform draws.

    Consumption order is identical to per-call draws from the same
    generator, so buffering does not change any simulated path.
    """

    __slots__ = ("_rng", "_exp", "_uni", "_ei", "_ui", "_block")

    def __init__(self, rng: np.random.Generator, block: int = 1024):
        self._rng = rng
        self._block = block
        self._exp = rng.standard_exponential(block)
        self._uni = rng.random(block)
        self._ei = 0
        self._ui = 0

    def exponential(self) -> float:
        i = self._ei
        if i >= self._block:
            self._exp = self._rng.standard_exponential(self._block)
            i = 0
        self._ei = i + 1
        return self._exp[i]

    def exponential_vector(self, n: int) -> np.ndarray:
        i = self._ei
        if i + n > self._block:
            self._exp = self._rng.standard_exponential(self._block)
            i = 0
        self._ei = i + n
        return self._exp[i : i + n]

    def uniform(self) -> float:
        i = self._ui
        if i >= self._block:
            self._uni = self._rng.random(self._block)
            i = 0
        self._ui = i + 1
        return self._uni[i]


def derive_run_seed(master_seed: int, run_index: int) -> np.random.SeedSequence:
    """Substream seed for one run, reproducible in isolation."""
    return np.random.SeedSequence(master_seed, spawn_key=(run_index,))


@dataclass(frozen=True)
class Event:
    time: float
    component: int
    mark: np.ndarray
    claim: np.ndarray


@dataclass
class PathSample:
    """A simulated trajectory with full mark/claim records.

    Events are stored as parallel arrays; compensators[r, j] is the
    component-j compensator at the r-th event time.
    """

    times: np.ndarray
    components: np.ndarray
    marks: np.ndarray
    claims: np.ndarray
    horizon: float
    seed: object
    counts: np.ndarray
    compound: np.ndarray
    compensators: np.ndarray
    _events: list = field(default=None, repr=False)

    @property
    def events(self) -> list:
        if self._events is None:
            self._events = [
                Event(float(t), int(c), m, u)
                for t, c, m, u in zip(self.times, self.components, self.marks, self.claims)
            ]
        return self._events

    def compound_at(self, t: float) -> np.ndarray:
        """Z(t) from the recorded claims."""
        mask = self.times <= t
        return self.claims[mask].sum(axis=0) if mask.any() else np.zeros_like(self.compound)

    def to_csv(self, path) -> None:
        """Event-log dump: time, component, mark_1.., claim_1.. columns."""
        import csv

        d = self.marks.shape[1]
        dstar = self.claims.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["time", "component"]
                + [f"mark_{k + 1}" for k in range(d)]
                + [f"claim_{k + 1}" for k in range(dstar)]
            )
            for r in range(self.times.shape[0]):
                writer.writerow(
                    [f"{self.times[r]:.17g}", int(self.components[r])]
                    + [f"{v:.17g}" for v in self.marks[r]]
                    + [f"{v:.17g}" for v in self.claims[r]]
                )


@dataclass(frozen=True)
class ClusterSample:
    origin_component: int
    total_counts: np.ndarray
    generations: int


class _Excitation:
    """Excitation intensity state for all-exponential kernels."""

    def __init__(self, spec: ModelSpec):
        d = spec.dims.d
        self.alpha = np.array(
            [[spec.kernels[l][j].alpha for j in range(d)] for l in range(d)]
        )
        self.amp = np.array(
            [[spec.kernels[l][j].scale for j in range(d)] for l in range(d)]
        )
        self.state = np.zeros((d, d))  # state[l, j]: intensity into l from past j-events
        self._buf = np.empty((d, d))

    def advance(self, dt: float) -> np.ndarray:
        """Decay by dt; returns per-component compensator increments."""
        decay = np.multiply(self.alpha, -dt, out=self._buf)
        np.exp(decay, out=decay)
        increments = ((1.0 - decay) / self.alpha * self.state).sum(axis=1)
        self.state *= decay
        return increments

    def add_event(self, j: int, mark: np.ndarray) -> None:
        self.state[:, j] += mark * self.amp[:, j]

    def per_component(self) -> np.ndarray:
        return self.state.sum(axis=1)

    def total(self) -> float:
        return float(self.state.sum())


class _GenericExcitation:
    """History-scan excitation for arbitrary nonincreasing kernels."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.d = spec.dims.d
        self.t = 0.0
        self.times = []
        self.comps = []
        self.marks = []

    def advance(self, dt: float) -> np.ndarray:
        t0, t1 = self.t, self.t + dt
        inc = np.zeros(self.d)
        for r, (te, j) in enumerate(zip(self.times, self.comps)):
            m = self.marks[r]
            for l in range(self.d):
                k = self.spec.kernels[l][j]
                inc[l] += m[l] * (k.partial_integral(t1 - te) - k.partial_integral(t0 - te))
        self.t = t1
        return inc

    def add_event(self, j: int, mark: np.ndarray) -> None:
        self.times.append(self.t)
        self.comps.append(j)
        self.marks.append(mark)

    def per_component(self) -> np.ndarray:
        out = np.zeros(self.d)
        for r, (te, j) in enumerate(zip(self.times, self.comps)):
            m = self.marks[r]
            for l in range(self.d):
                out[l] += m[l] * self.spec.kernels[l][j].value(self.t - te)
        return out

    def total(self) -> float:
        return float(self.per_component().sum())


class HawkesSimulator:
    """Incremental event generator; one instance per run, single-threaded."""

    def __init__(self, spec: ModelSpec, seed, explosion_cap: int = 10**7):
        validate_stability(spec)
        self.spec = spec
        self.d = spec.dims.d
        self.dstar = spec.dims.dstar
        self.cap = int(explosion_cap)
        self.seed_record = seed
        seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        imm_seq, thin_seq, mark_seq, claim_seq = seq.spawn(4)
        self._rng_imm = [_BufferedStream(_generator(s), 256) for s in imm_seq.spawn(self.d)]
        self._rng_thin = _BufferedStream(_generator(thin_seq), 256)
        mark_stream = _BufferedStream(_generator(mark_seq), 256)
        claim_stream = _BufferedStream(_generator(claim_seq), 256)
        self._mark_draw = [self._law_sampler(law, mark_stream) for law in spec.marks]
        self._claim_draw = [self._law_sampler(law, claim_stream) for law in spec.claims]

        all_exp = all(
            isinstance(spec.kernels[l][j], ExponentialKernel)
            for l in range(self.d)
            for j in range(self.d)
        )
        self.exc = _Excitation(spec) if all_exp else _GenericExcitation(spec)

        self.t = 0.0
        self.lam = spec.lambda_bar
        self.next_imm = np.array(
            [
                self.t + self._rng_imm[j].exponential() / self.lam[j]
                if self.lam[j] > 0
                else np.inf
                for j in range(self.d)
            ]
        )
        self.compens = np.zeros(self.d)
        self.counts = np.zeros(self.d, dtype=np.int64)
        self.compound = np.zeros(self.dstar)
        self.rec_times: list = []
        self.rec_comps: list = []
        self.rec_marks: list = []
        self.rec_claims: list = []
        self.rec_compens: list = []

    @staticmethod
    def _law_sampler(law, stream: _BufferedStream):
        """Per-column draw fast path preserving one-stream determinism."""
        from .model import DeterministicLaw, ExponentialLaw

        if isinstance(law, ExponentialLaw):
            scales = law.mean()
            n = law.dim

            def draw():
                return stream.exponential_vector(n) * scales

            return draw
        if isinstance(law, DeterministicLaw):
            values = law.values
            return lambda: values
        gen = stream._rng
        return lambda: np.asarray(law.sample(gen), dtype=float)

    def _advance(self, dt: float) -> None:
        if dt <= 0.0:
            return
        self.compens += self.lam * dt + self.exc.advance(dt)
        self.t += dt

    def _emit(self, j: int) -> Event:
        mark = self._mark_draw[j]()
        claim = self._claim_draw[j]()
        self.exc.add_event(j, mark)
        self.counts[j] += 1
        self.compound += claim
        self.rec_times.append(self.t)
        self.rec_comps.append(j)
        self.rec_marks.append(mark)
        self.rec_claims.append(claim)
        self.rec_compens.append(self.compens.copy())
        if len(self.rec_times) > self.cap:
            raise ExplosionGuard(f"event count exceeded cap {self.cap}")
        return Event(self.t, j, mark, claim)

    def step(self, limit: float) -> Optional[Event]:
        """Advance to the next accepted event at time <= limit.

        Returns None (with state advanced exactly to `limit`) when no
        further event occurs before the limit.
        """
        while True:
            bound = self.exc.total()
            t_off = (
                self.t + self._rng_thin.exponential() / bound if bound > 0.0 else np.inf
            )
            j_imm = int(self.next_imm.argmin())
            t_imm = self.next_imm[j_imm]
            if min(t_off, t_imm) > limit:
                self._advance(limit - self.t)
                return None
            if t_imm <= t_off:
                self._advance(t_imm - self.t)
                self.next_imm[j_imm] = (
                    self.t + self._rng_imm[j_imm].exponential() / self.lam[j_imm]
                )
                return self._emit(j_imm)
            # offspring candidate: thin against the current excitation bound
            self._advance(t_off - self.t)
            per_comp = self.exc.per_component()
            total = per_comp.sum()
            if self._rng_thin.uniform() * bound <= total:
                pick = self._rng_thin.uniform() * total
                acc = 0.0
                i = self.d - 1
                for k in range(self.d):
                    acc += per_comp[k]
                    if pick < acc:
                        i = k
                        break
                return self._emit(i)

    def path(self, horizon: float) -> PathSample:
        return PathSample(
            times=np.array(self.rec_times, dtype=float),
            components=np.array(self.rec_comps, dtype=np.int64),
            marks=(
                np.array(self.rec_marks, dtype=float)
                if self.rec_marks
                else np.zeros((0, self.d))
            ),
            claims=(
                np.array(self.rec_claims, dtype=float)
                if self.rec_claims
                else np.zeros((0, self.dstar))
            ),
            horizon=horizon,
            seed=self.seed_record,
            counts=self.counts.copy(),
            compound=self.compound.copy(),
            compensators=(
                np.array(self.rec_compens, dtype=float)
                if self.rec_compens
                else np.zeros((0, self.d))
            ),
        )


def simulate_hawkes(
    spec: ModelSpec, horizon: float, seed, explosion_cap: int = 10**7
) -> PathSample:
    """Simulate the marked process with claims on [0, horizon]."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    sim = HawkesSimulator(spec, seed, explosion_cap)
    while sim.step(horizon) is not None:
        pass
    return sim.path(horizon)


def simulate_until_ruin(
    spec: ModelSpec,
    i: int,
    u: float,
    seed,
    time_cap: float = 1e6,
    explosion_cap: int = 10**7,
) -> tuple[Optional[float], PathSample]:
    """Run until Y_i(t) = Z_i(t) - r_i t exceeds u, or until the time cap.

    Ruin can only occur at claim arrivals because Y_i decreases between
    events. Returns (tau, path); tau is None when the run was censored at
    the cap, which is expected under P for large u and is a bug under a
    ruin twist (positive drift makes ruin certain).
    """
    if u <= 0:
        raise ValueError("ruin level must be positive")
    if not 0 <= i < spec.dims.dstar:
        raise IndexError(f"component {i} outside [0, {spec.dims.dstar})")
    rate = float(spec.premium[i])
    sim = HawkesSimulator(spec, seed, explosion_cap)
    while True:
        ev = sim.step(time_cap)
        if ev is None:
            return None, sim.path(time_cap)
        if sim.compound[i] - rate * ev.time > u:
            return ev.time, sim.path(ev.time)


def simulate_cluster(spec: ModelSpec, j: int, rng) -> ClusterSample:
    """Total per-component counts of one cluster rooted in component j.

    Breadth-first Galton-Watson on counts only: an event of component m
    with mark b spawns Poisson(b_l c_lm) children into component l. Child
    times are not needed for total counts.
    """
    validate_stability(spec)
    if not 0 <= j < spec.dims.d:
        raise IndexError(f"component {j} outside [0, {spec.dims.d})")
    if not isinstance(rng, np.random.Generator):
        rng = _generator(np.random.SeedSequence(rng))
    d = spec.dims.d
    cmat = spec.c_matrix
    totals = np.zeros(d, dtype=np.int64)
    totals[j] = 1
    generation = np.zeros(d, dtype=np.int64)
    generation[j] = 1
    gen_count = 0
    cap = 10**6
    while generation.any():
        nxt = np.zeros(d, dtype=np.int64)
        for m in range(d):
            for _ in range(int(generation[m])):
                mark = spec.marks[m].sample(rng)
                nxt += rng.poisson(mark * cmat[:, m])
        totals += nxt
        if totals.sum() > cap:
            raise ExplosionGuard(f"cluster size exceeded cap {cap}")
        generation = nxt
        gen_count += 1
    return ClusterSample(j, totals, gen_count - 1 if gen_count > 0 else 0)


def compensator(spec: ModelSpec, path: PathSample, j: int, t: float) -> float:
    """Integral of the component-j intensity over [0, t] along a path.

    Uses the spec's own base rate and kernels, so it can price a path
    sampled under a different (twisted) measure.
    """
    if t > path.horizon + 1e-12:
        raise ValueError("t exceeds the path horizon")
    if not 0 <= j < spec.dims.d:
        raise IndexError(f"component {j} outside [0, {spec.dims.d})")
    total = float(spec.lambda_bar[j]) * t
    for l in range(spec.dims.d):
        mask = (path.components == l) & (path.times <= t)
        if not mask.any():
            continue
        ages = t - path.times[mask]
        total += float(
            np.dot(path.marks[mask, j], spec.kernels[j][l].partial_integral(ages))
        )
    return total
