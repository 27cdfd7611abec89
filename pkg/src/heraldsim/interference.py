"""Two-source signal interference on a fibre beam splitter.

Signals of source 1 enter input 1, signals of source 2 enter input 2 after a
variable delay.  Within a pulse, signals of different sources are matched one
to one (equal Schmidt modes first).  With probability equal to the effective
overlap at the current delay a matched pair interferes: both photons leave
port A or both leave port B, each with probability 2RT, and one leaves each
port with probability (R - T)^2, which vanishes for a balanced splitter.
Otherwise, and for every unmatched photon, the splitter acts on each photon
independently.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from ._pykernels import _pair_signals
from .errors import ConfigError
from .source import ARM_SIGNAL, PhotonBatch

PORT_A = 0
PORT_B = 1
TO_IDLER_DETECTOR = 2
BLOCKED = 3


@dataclass(frozen=True)
class NetworkConfig:
    delay: float = 0.0
    reflectivity: float = 0.5
    extra_distinguishability: float = 0.0
    overlap_delays: np.ndarray | None = field(default=None, repr=False)
    overlap_values: np.ndarray | None = field(default=None, repr=False)
    blocked_signals: frozenset = frozenset()

    def __post_init__(self):
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ConfigError("reflectivity", f"must lie in [0, 1], got {self.reflectivity!r}")
        if not 0.0 <= self.extra_distinguishability <= 1.0:
            raise ConfigError("extra_distinguishability",
                              f"must lie in [0, 1], got {self.extra_distinguishability!r}")
        if (self.overlap_delays is None) != (self.overlap_values is None):
            raise ConfigError("overlap_values", "delays and values must be given together")
        object.__setattr__(self, "blocked_signals", frozenset(int(s) for s in self.blocked_signals))
        if not self.blocked_signals <= {1, 2}:
            raise ConfigError("blocked_signals", f"unknown source in {sorted(self.blocked_signals)}")

    @classmethod
    def from_density_matrices(cls, rho1, rho2, half_range=40e-12, n=801, **kw):
        from .schmidt import overlap_table

        tau, values = overlap_table(rho1, rho2, half_range, n)
        return cls(overlap_delays=tau, overlap_values=values, **kw)

    def with_delay(self, delay):
        return replace(self, delay=float(delay))

    def blocking(self, *sources):
        return replace(self, blocked_signals=frozenset(sources))


def effective_overlap(delay, config):
    """(1 - extra distinguishability) * Tr[rho1 rho2(delay)], tabulated and
    linearly interpolated.  Without a table the sources are taken as identical
    and pure (overlap 1 at every delay)."""
    if config.overlap_values is None:
        base = 1.0
    else:
        lo, hi = config.overlap_delays[0], config.overlap_delays[-1]
        if not lo <= delay <= hi:
            raise ValueError(f"delay {delay:.4g} s outside the overlap table [{lo:.4g}, {hi:.4g}] s")
        base = float(np.interp(delay, config.overlap_delays, config.overlap_values))
    return (1.0 - config.extra_distinguishability) * base


@dataclass
class RoutedPhotons:
    batch: PhotonBatch
    output: np.ndarray

    def __len__(self):
        return self.output.size


def route_batch(batch, config, rng):
    """Routing decision for every photon of a batch (three uniforms per signal)."""
    output = np.full(len(batch), TO_IDLER_DETECTOR, dtype=np.int8)
    sig = batch.arm == ARM_SIGNAL
    blocked = sig & np.isin(batch.source, list(config.blocked_signals))
    live = np.flatnonzero(sig & ~blocked)
    output[blocked] = BLOCKED
    if live.size:
        u = rng.random((live.size, 3))
        output[live] = kernels.route_signals(batch.pulse[live], batch.source[live], batch.mode[live], u,
                                             effective_overlap(config.delay, config), config.reflectivity)
    return RoutedPhotons(batch, output)


def route(pulse_event, config, rng):
    """Route a single PulseEvent; returns RoutedPhotons over its photons."""
    return route_batch(PhotonBatch.from_pulses([pulse_event]), config, rng)


def _independent_port(source, transmitted):
    if source == 1:
        return PORT_A if transmitted else PORT_B
    return PORT_B if transmitted else PORT_A


def route_outcomes(sources, modes, config):
    """Exact distribution of output ports for the unblocked signals of one pulse.

    ``sources``/``modes`` describe the signals (any order).  Returns a list of
    (probability, ports) with ports aligned to the input order.
    """
    sources = list(sources)
    modes = list(modes)
    n = len(sources)
    live = [i for i in range(n) if sources[i] not in config.blocked_signals]
    one = sorted((i for i in live if sources[i] == 1), key=lambda i: modes[i])
    two = sorted((i for i in live if sources[i] == 2), key=lambda i: modes[i])
    pairs = [(one[a], two[b]) for a, b in _pair_signals([modes[i] for i in one], [modes[i] for i in two])]
    paired = {i for p in pairs for i in p}
    loners = [i for i in live if i not in paired]
    o = effective_overlap(config.delay, config)
    t = 1.0 - config.reflectivity
    base = [BLOCKED] * n
    out = {}
    same = 2.0 * config.reflectivity * t
    # each pair: interfere (both to A, both to B, split) or two independent choices
    pair_options = []
    for a, b in pairs:
        opts = [(o * same, {a: PORT_A, b: PORT_A}), (o * same, {a: PORT_B, b: PORT_B}),
                (o * (1 - 2 * same), {a: PORT_A, b: PORT_B})]
        for ta, tb in itertools.product((True, False), repeat=2):
            p = (1 - o) * (t if ta else 1 - t) * (t if tb else 1 - t)
            opts.append((p, {a: _independent_port(1, ta), b: _independent_port(2, tb)}))
        pair_options.append(opts)
    loner_options = [[(t, {i: _independent_port(sources[i], True)}),
                      (1 - t, {i: _independent_port(sources[i], False)})] for i in loners]
    for combo in itertools.product(*(pair_options + loner_options)):
        p = 1.0
        ports = list(base)
        for prob, assign in combo:
            p *= prob
            for i, port in assign.items():
                ports[i] = port
        if p > 0:
            key = tuple(ports)
            out[key] = out.get(key, 0.0) + p
    return [(p, k) for k, p in out.items()]


def port_counts(routed):
    """Number of photons at each port (A, B) among routed signals."""
    return (int(np.count_nonzero(routed.output == PORT_A)),
            int(np.count_nonzero(routed.output == PORT_B)))

