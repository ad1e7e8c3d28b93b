"""Energy-flow optimization over a series string with converter edges.

A pack is a series string of modules: one shared string charge passes
through every module, and battery-to-battery converter edges move a bounded
amount of energy between modules over the discharge horizon.  Deliverable
energy is found by a small LP:

    maximize   sum_j q * V_j                     (energy into the output bus)
    subject to q * V_j + outflow_j - inflow_j <= E_j   for every module j,
               |f_e| <= cap_e                          for every edge e,
               q >= 0.

The per-module inequality is the singular-depletion rule: a module may not
be driven past its own usable energy even if its neighbours still hold
charge.  Networks built for dedicated per-module converters (no series
string; ``output_caps`` set) bypass the LP with the closed form
``sum_j min(E_j, cap_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from besspp.simplex import (
    BoundedLp,
    LpInfeasible,
    solve_bounded_lp,
)
from besspp.supply import BatteryModule

__all__ = [
    "ConverterEdge",
    "FlowNetwork",
    "FlowSolution",
    "InfeasibleFlowError",
    "max_deliverable_energy",
    "min_peak_flow",
    "fpp_deliverable",
]


class InfeasibleFlowError(Exception):
    """Raised when a requested output cannot be met by any feasible flow."""


@dataclass(frozen=True)
class ConverterEdge:
    """Directed tag of a bidirectional converter between two modules.

    ``energy_cap_kwh`` bounds ``|flow|`` over the horizon; it may be
    ``math.inf`` while a sparse layer is being designed.  Positive flow moves
    energy from ``from_battery`` to ``to_battery``.
    """

    from_battery: int
    to_battery: int
    energy_cap_kwh: float
    layer: int = 1


@dataclass(frozen=True)
class FlowNetwork:
    """Pack plus converter wiring.

    ``output_caps`` switches the network to dedicated per-module output
    converters (one per module, no series string); it must then cover every
    module and ``converter_edges`` must be empty.
    """

    batteries: tuple[BatteryModule, ...]
    converter_edges: tuple[ConverterEdge, ...] = ()
    horizon_h: float = 1.0
    output_caps: tuple[float, ...] | None = None

    @property
    def total_capacity_kwh(self) -> float:
        return sum(b.capacity_kwh for b in self.batteries)


@dataclass(frozen=True)
class FlowSolution:
    """Optimal energy bookkeeping for one network over the horizon.

    ``string_energy`` is the per-module energy pushed through the series
    string (``q * V_j``); for dedicated-converter networks it is the direct
    per-module delivery.  ``extraction`` is what each module actually gives
    up, string plus net converter outflow.
    """

    string_energy: tuple[float, ...]
    edge_flows: tuple[float, ...]
    extraction: tuple[float, ...]
    total_output: float


def _check_network(net: FlowNetwork) -> None:
    from besspp.architectures import validate_network

    problems = validate_network(net)
    if problems:
        raise ValueError("invalid flow network: " + "; ".join(problems))


def _fpp_solution(net: FlowNetwork) -> FlowSolution:
    taken = tuple(
        float(min(b.capacity_kwh, cap))
        for b, cap in zip(net.batteries, net.output_caps)
    )
    return FlowSolution(
        string_energy=taken,
        edge_flows=(),
        extraction=taken,
        total_output=float(sum(taken)),
    )


def max_deliverable_energy(net: FlowNetwork) -> FlowSolution:
    """Maximize the energy delivered to the output bus over the horizon."""
    _check_network(net)
    if net.output_caps is not None:
        return _fpp_solution(net)

    n = len(net.batteries)
    n_edges = len(net.converter_edges)
    volts = np.array([b.voltage_v for b in net.batteries])
    caps = np.array([b.capacity_kwh for b in net.batteries])

    # Columns: [q, flows..., slacks...]; rows: one extraction bound per module.
    n_vars = 1 + n_edges + n
    a = np.zeros((n, n_vars))
    a[:, 0] = volts
    for k, edge in enumerate(net.converter_edges):
        a[edge.from_battery, 1 + k] = 1.0
        a[edge.to_battery, 1 + k] = -1.0
    a[:, 1 + n_edges :] = np.eye(n)

    lower = np.zeros(n_vars)
    upper = np.full(n_vars, np.inf)
    for k, edge in enumerate(net.converter_edges):
        cap = edge.energy_cap_kwh
        lower[1 + k] = -cap if math.isfinite(cap) else -np.inf
        upper[1 + k] = cap if math.isfinite(cap) else np.inf

    c = np.zeros(n_vars)
    c[0] = volts.sum()

    sol = solve_bounded_lp(BoundedLp(c, a, caps, lower, upper))
    return _assemble(net, float(sol.x[0]), sol.x[1 : 1 + n_edges])


def min_peak_flow(net: FlowNetwork, required_output_kwh: float) -> FlowSolution:
    """Meet a required output while minimizing the largest converter flow.

    The string charge is fixed by the required output; the LP chooses edge
    flows.  A first pass minimizes the peak ``max_e |f_e|`` and a second pass
    minimizes total moved energy at that peak, which pins the flow vector
    for reporting and rating purposes.
    """
    _check_network(net)
    if net.output_caps is not None:
        raise ValueError("min_peak_flow applies to series-string networks only")
    if required_output_kwh < 0:
        raise ValueError("required_output_kwh must be nonnegative")

    n = len(net.batteries)
    volts = np.array([b.voltage_v for b in net.batteries])
    caps = np.array([b.capacity_kwh for b in net.batteries])
    string = volts * (required_output_kwh / volts.sum())

    edges = net.converter_edges
    n_edges = len(edges)
    if n_edges == 0:
        if np.any(string > caps + 1e-9 * (1 + caps.max(initial=0.0))):
            raise InfeasibleFlowError(
                "required output exceeds the stringwise deliverable energy"
            )
        return _assemble(net, float(required_output_kwh / volts.sum()), np.zeros(0))

    peak = _solve_peak_pass(edges, string, caps)
    flows = _solve_movement_pass(edges, string, caps, peak)
    return _assemble(net, float(required_output_kwh / volts.sum()), flows)


def fpp_deliverable(
    batteries: tuple[BatteryModule, ...], energy_cap_kwh: float
) -> float:
    """Deliverable energy with one dedicated converter per module."""
    if energy_cap_kwh < 0:
        raise ValueError("energy_cap_kwh must be nonnegative")
    return float(sum(min(b.capacity_kwh, energy_cap_kwh) for b in batteries))


def _split_flow_rows(
    edges: tuple[ConverterEdge, ...], string: np.ndarray, caps: np.ndarray
):
    """Battery rows over split flow variables ``f+ - f-`` with slacks."""
    n = len(string)
    n_edges = len(edges)
    a = np.zeros((n, 2 * n_edges))
    for k, edge in enumerate(edges):
        a[edge.from_battery, 2 * k] = 1.0
        a[edge.to_battery, 2 * k] = -1.0
        a[edge.from_battery, 2 * k + 1] = -1.0
        a[edge.to_battery, 2 * k + 1] = 1.0
    return a, caps - string


def _solve_peak_pass(
    edges: tuple[ConverterEdge, ...], string: np.ndarray, caps: np.ndarray
) -> float:
    n, n_edges = len(string), len(edges)
    flow_rows, room = _split_flow_rows(edges, string, caps)
    # Columns: [t, f+-, pair slacks, battery slacks].
    n_vars = 1 + 2 * n_edges + n_edges + n
    a = np.zeros((n_edges + n, n_vars))
    b = np.zeros(n_edges + n)
    for k in range(n_edges):  # f+ + f- - t + w_k = 0
        a[k, 1 + 2 * k] = 1.0
        a[k, 1 + 2 * k + 1] = 1.0
        a[k, 0] = -1.0
        a[k, 1 + 2 * n_edges + k] = 1.0
    a[n_edges:, 1 : 1 + 2 * n_edges] = flow_rows
    a[n_edges:, 1 + 2 * n_edges + n_edges :] = np.eye(n)
    b[n_edges:] = room

    lower = np.zeros(n_vars)
    upper = np.full(n_vars, np.inf)
    for k, edge in enumerate(edges):
        if math.isfinite(edge.energy_cap_kwh):
            upper[1 + 2 * k] = edge.energy_cap_kwh
            upper[1 + 2 * k + 1] = edge.energy_cap_kwh

    c = np.zeros(n_vars)
    c[0] = -1.0  # minimize the peak
    try:
        sol = solve_bounded_lp(BoundedLp(c, a, b, lower, upper))
    except LpInfeasible as exc:
        raise InfeasibleFlowError(
            "required output exceeds the deliverable energy of this network"
        ) from exc
    return float(sol.x[0])


def _solve_movement_pass(
    edges: tuple[ConverterEdge, ...],
    string: np.ndarray,
    caps: np.ndarray,
    peak: float,
) -> np.ndarray:
    n, n_edges = len(string), len(edges)
    flow_rows, room = _split_flow_rows(edges, string, caps)
    peak_bound = peak * (1 + 1e-9) + 1e-12
    # Columns: [f+-, pair slacks, battery slacks].
    n_vars = 2 * n_edges + n_edges + n
    a = np.zeros((n_edges + n, n_vars))
    b = np.zeros(n_edges + n)
    for k, edge in enumerate(edges):  # f+ + f- + w_k = min(cap, peak)
        a[k, 2 * k] = 1.0
        a[k, 2 * k + 1] = 1.0
        a[k, 2 * n_edges + k] = 1.0
        b[k] = min(edge.energy_cap_kwh, peak_bound)
    a[n_edges:, : 2 * n_edges] = flow_rows
    a[n_edges:, 2 * n_edges + n_edges :] = np.eye(n)
    b[n_edges:] = room

    lower = np.zeros(n_vars)
    upper = np.full(n_vars, np.inf)
    c = np.zeros(n_vars)
    c[: 2 * n_edges] = -1.0  # minimize total moved energy
    try:
        sol = solve_bounded_lp(BoundedLp(c, a, b, lower, upper))
    except LpInfeasible as exc:  # pragma: no cover - pass 1 already succeeded
        raise InfeasibleFlowError("movement pass infeasible") from exc
    split = sol.x[: 2 * n_edges]
    return split[0::2] - split[1::2]


def _assemble(net: FlowNetwork, q: float, flows: np.ndarray) -> FlowSolution:
    volts = np.array([b.voltage_v for b in net.batteries])
    string = q * volts
    extraction = string.copy()
    for k, edge in enumerate(net.converter_edges):
        extraction[edge.from_battery] += flows[k]
        extraction[edge.to_battery] -= flows[k]
    return FlowSolution(
        string_energy=tuple(float(v) for v in string),
        edge_flows=tuple(float(v) for v in flows),
        extraction=tuple(float(v) for v in extraction),
        total_output=float(string.sum()),
    )
