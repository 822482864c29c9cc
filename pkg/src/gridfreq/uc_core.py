"""Two-stage stochastic unit-commitment MILP.

Builds the day-ahead commitment / real-time recourse model over a DC
network with joint wind and outage scenarios, optionally extended with
frequency-security rows (RoCoF, nadir surrogate, quasi-steady-state).
The nadir surrogate comes either as per-contingency variable bounds or as
max-affine epigraph rows.

Aggregate frequency quantities are linear in the commitment binaries, so
the model substitutes them directly instead of carrying the intermediate
per-unit gain variables; the solution extractor reconstructs those from
their defining identities.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .freq_dynamics import fleet_damping
from .nadir_linearization import NadirBounds, PwlFit
from .scenarios import ContingencyModel, ScenarioTree, build_tree, ingest_wind
from .solver import INF, SolveResult, SolverModel, get_backend
from .system import (ConverterFleet, FrequencyLimits,
                     SynchronousUnit, load_system,
                     system_from_dict)

FREQ_MODES = ("off", "bounds", "pwl")


class UcModelError(ValueError):
    pass


class InstanceTooLargeError(UcModelError):
    pass


@dataclass
class Line:
    node_from: str
    node_to: str
    susceptance: float    # MW per rad in the DC approximation
    capacity: float       # MW


@dataclass
class WindFarm:
    id: str
    bus: str
    capacity: float


@dataclass
class Network:
    nodes: list[str]
    lines: list[Line]
    demand: dict[str, list[float]]   # node -> MW per hour
    value_of_lost_load: float
    farms: list[WindFarm]

    def validate(self, horizon: int) -> None:
        nodeset = set(self.nodes)
        if len(nodeset) != len(self.nodes):
            raise UcModelError("duplicate node ids")
        for ln in self.lines:
            if ln.node_from not in nodeset or ln.node_to not in nodeset:
                raise UcModelError(
                    f"line {ln.node_from}-{ln.node_to} references unknown node")
            if ln.capacity <= 0:
                raise UcModelError(
                    f"line {ln.node_from}-{ln.node_to} capacity must be > 0")
        for node, series in self.demand.items():
            if node not in nodeset:
                raise UcModelError(f"demand at unknown node {node!r}")
            if len(series) < horizon:
                raise UcModelError(
                    f"demand series at {node} shorter than horizon {horizon}")
            if any(d < 0 for d in series):
                raise UcModelError(f"negative demand at node {node}")
        for farm in self.farms:
            if farm.bus not in nodeset:
                raise UcModelError(f"farm {farm.id} at unknown bus {farm.bus}")

    def components(self) -> list[list[str]]:
        """Connected components, each listing nodes in input order."""
        parent = {n: n for n in self.nodes}

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for ln in self.lines:
            ra, rb = find(ln.node_from), find(ln.node_to)
            if ra != rb:
                parent[rb] = ra
        groups: dict[str, list[str]] = {}
        for n in self.nodes:
            groups.setdefault(find(n), []).append(n)
        return list(groups.values())


@dataclass
class InitialState:
    """Carried-over state from the previous scheduling day."""

    commitment: dict[str, int] = field(default_factory=dict)
    power: dict[str, float] = field(default_factory=dict)
    min_up_left: dict[str, int] = field(default_factory=dict)
    min_down_left: dict[str, int] = field(default_factory=dict)


@dataclass
class UcInstance:
    network: Network
    units: list[SynchronousUnit]
    fleet: ConverterFleet
    tree: ScenarioTree
    limits: FrequencyLimits
    horizon: int
    t_turbine: float = 7.0
    freq_mode: str = "off"
    nadir_bounds: dict[str, NadirBounds] | None = None   # per outage unit
    pwl_fits: dict[str, PwlFit] | None = None            # per outage unit
    initial: InitialState = field(default_factory=InitialState)

    @property
    def s_base(self) -> float:
        return (sum(u.p_max for u in self.units)
                + self.fleet.vsm_capacity + self.fleet.droop_capacity)

    @property
    def m_v(self) -> float:
        return (2.0 * self.fleet.vsm_inertia_h * self.fleet.vsm_gain
                * self.fleet.vsm_capacity / self.s_base)

    def validate(self) -> None:
        if self.freq_mode not in FREQ_MODES:
            raise UcModelError(f"freq_mode must be one of {FREQ_MODES}")
        self.network.validate(self.horizon)
        if self.tree.horizon != self.horizon:
            raise UcModelError("scenario tree horizon != instance horizon")
        if self.tree.unit_ids != [u.id for u in self.units]:
            raise UcModelError("scenario tree built for different units")
        buses = set(self.network.nodes)
        for u in self.units:
            if u.bus not in buses:
                raise UcModelError(f"unit {u.id} at unknown bus {u.bus}")
        farm_ids = {f.id for f in self.network.farms}
        for s in self.tree.scenarios:
            if set(s.realization) != farm_ids:
                raise UcModelError(
                    f"scenario {s.id} wind farms do not match the network")
        if self.freq_mode in ("bounds", "pwl"):
            needed = {s.outage_unit for s in self.tree.scenarios
                      if s.outage_unit is not None}
            table = (self.nadir_bounds if self.freq_mode == "bounds"
                     else self.pwl_fits)
            have = set(table or {})
            if not needed <= have:
                raise UcModelError(
                    f"freq_mode={self.freq_mode} missing nadir surrogates "
                    f"for contingencies {sorted(needed - have)}")


@dataclass
class VarMap:
    u: np.ndarray          # (I, T)
    y: np.ndarray
    z: np.ndarray
    p: np.ndarray          # (I, T)
    w: np.ndarray          # (J, T)
    delta_da: np.ndarray   # (N, T)
    delta_rt: np.ndarray   # (N, S, T)
    r_up: np.ndarray       # (I, S, T)
    r_dn: np.ndarray       # (I, S, T)
    spill: np.ndarray      # (J, S, T)
    shed: np.ndarray       # (N, S, T)
    t3: dict[tuple[int, int], int] = field(default_factory=dict)


@dataclass
class BuiltModel:
    model: SolverModel
    vars: VarMap
    instance: UcInstance


@dataclass
class UcSolution:
    status: str
    objective: float | None
    mip_gap: float | None
    u: np.ndarray | None = None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    p: np.ndarray | None = None
    w: np.ndarray | None = None
    delta_da: np.ndarray | None = None
    delta_rt: np.ndarray | None = None
    r_up: np.ndarray | None = None
    r_dn: np.ndarray | None = None
    spill: np.ndarray | None = None
    shed: np.ndarray | None = None
    k: np.ndarray | None = None       # (I, S, T) scaled gains
    f_sys: np.ndarray | None = None   # (S, T) aggregate turbine fraction
    r_sys: np.ndarray | None = None   # (S, T) aggregate droop
    m_sys: np.ndarray | None = None   # (S, T) synchronous inertia
    cost_breakdown: dict | None = None
    max_residual: float | None = None

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "timeout") and self.u is not None


def _freq_constants(instance: UcInstance):
    s_base = instance.s_base
    c = np.array([u.p_max * u.gain_k / s_base for u in instance.units])
    r_w = c / np.array([u.droop for u in instance.units])
    f_w = np.array([u.turbine_fraction for u in instance.units]) * r_w
    m_w = 2.0 * np.array([u.inertia_h for u in instance.units]) * c
    d_const = fleet_damping(instance.units, instance.fleet, s_base)
    return r_w, f_w, m_w, d_const


def build_model(instance: UcInstance) -> BuiltModel:
    """Assemble the full two-stage MILP for one scheduling day."""
    instance.validate()
    net, units, tree = instance.network, instance.units, instance.tree
    T = instance.horizon
    I, J, N = len(units), len(net.farms), len(net.nodes)
    S = len(tree.scenarios)
    node_idx = {n: k for k, n in enumerate(net.nodes)}
    alpha = tree.availability    # (S, I, T)
    pi = np.array([s.probability for s in tree.scenarios])
    demand = np.array([net.demand[n][:T] for n in net.nodes])   # (N, T)
    wind = np.zeros((J, S, T))
    for s, scen in enumerate(tree.scenarios):
        for j, farm in enumerate(net.farms):
            wind[j, s, :] = scen.realization[farm.id][:T]

    m = SolverModel()
    u = m.add_vars(I * T, 0, 1, binary=True, name="u").reshape(I, T)
    # startup/shutdown indicators relax exactly: with positive costs and
    # the switching rows they take 0/1 values whenever u is integral
    y = m.add_vars(I * T, 0, 1, name="y").reshape(I, T)
    z = m.add_vars(I * T, 0, 1, name="z").reshape(I, T)
    p = m.add_vars(I * T, 0, INF, name="p").reshape(I, T)
    w = m.add_vars(J * T, 0, INF, name="w").reshape(J, T)
    delta_da = m.add_vars(N * T, -INF, INF, name="da").reshape(N, T)
    delta_rt = m.add_vars(N * S * T, -INF, INF, name="rt").reshape(N, S, T)
    r_up = m.add_vars(I * S * T, 0, INF, name="rp").reshape(I, S, T)
    r_dn = m.add_vars(I * S * T, 0, INF, name="rm").reshape(I, S, T)
    spill = m.add_vars(J * S * T, 0, INF, name="sp").reshape(J, S, T)
    shed = m.add_vars(N * S * T, 0, INF, name="sh").reshape(N, S, T)
    vm = VarMap(u, y, z, p, w, delta_da, delta_rt, r_up, r_dn, spill, shed)

    # simple variable bounds standing in for pure box constraints
    for j in range(J):
        cap = net.farms[j].capacity
        for t in range(T):
            m.ub[w[j, t]] = cap
    for i in range(I):
        up, dn = units[i].res_up_cap, units[i].res_down_cap
        for s in range(S):
            for t in range(T):
                m.ub[r_up[i, s, t]] = up * alpha[s, i, t]
                m.ub[r_dn[i, s, t]] = dn * alpha[s, i, t]
    for j in range(J):
        for s in range(S):
            for t in range(T):
                m.ub[spill[j, s, t]] = wind[j, s, t]
    for n in range(N):
        for s in range(S):
            for t in range(T):
                m.ub[shed[n, s, t]] = demand[n, t]

    # reference angle per connected component, both stages
    for comp in net.components():
        ref = node_idx[comp[0]]
        for t in range(T):
            m.lb[delta_da[ref, t]] = m.ub[delta_da[ref, t]] = 0.0
            for s in range(S):
                m.lb[delta_rt[ref, s, t]] = m.ub[delta_rt[ref, s, t]] = 0.0

    units_at = {n: [] for n in range(N)}
    for i, unit in enumerate(units):
        units_at[node_idx[unit.bus]].append(i)
    farms_at = {n: [] for n in range(N)}
    for j, farm in enumerate(net.farms):
        farms_at[node_idx[farm.bus]].append(j)
    lines_at = {n: [] for n in range(N)}   # (line index, sign-from-node)
    for e, ln in enumerate(net.lines):
        lines_at[node_idx[ln.node_from]].append((e, +1))
        lines_at[node_idx[ln.node_to]].append((e, -1))

    u0 = {u_.id: int(instance.initial.commitment.get(u_.id, 0))
          for u_ in units}
    p0 = {u_.id: float(instance.initial.power.get(u_.id, 0.0))
          for u_ in units}

    # day-ahead nodal balance and flow limits
    for n in range(N):
        for t in range(T):
            entries = [(p[i, t], 1.0) for i in units_at[n]]
            entries += [(w[j, t], 1.0) for j in farms_at[n]]
            for e, sign in lines_at[n]:
                ln = net.lines[e]
                a, b = node_idx[ln.node_from], node_idx[ln.node_to]
                entries.append((delta_da[a, t], -sign * ln.susceptance))
                entries.append((delta_da[b, t], sign * ln.susceptance))
            m.add_eq(entries, demand[n, t], tag=f"bal_da[{n},{t}]")
    for e, ln in enumerate(net.lines):
        a, b = node_idx[ln.node_from], node_idx[ln.node_to]
        for t in range(T):
            m.add_row([(delta_da[a, t], ln.susceptance),
                       (delta_da[b, t], -ln.susceptance)],
                      -ln.capacity, ln.capacity, tag=f"flow_da[{e},{t}]")

    # commitment logic: startup/shutdown and strengthened min up/down
    for i, unit in enumerate(units):
        # residual obligations carried over from the previous day
        for t in range(min(instance.initial.min_up_left.get(unit.id, 0), T)):
            m.lb[u[i, t]] = 1.0
        for t in range(min(instance.initial.min_down_left.get(unit.id, 0), T)):
            m.ub[u[i, t]] = 0.0
        for t in range(T):
            if t == 0:
                m.add_ge([(y[i, t], 1.0), (u[i, t], -1.0)], -u0[unit.id],
                         tag=f"su[{i},{t}]")
                m.add_ge([(z[i, t], 1.0), (u[i, t], 1.0)], u0[unit.id],
                         tag=f"sd[{i},{t}]")
            else:
                m.add_ge([(y[i, t], 1.0), (u[i, t], -1.0),
                          (u[i, t - 1], 1.0)], 0.0, tag=f"su[{i},{t}]")
                m.add_ge([(z[i, t], 1.0), (u[i, t], 1.0),
                          (u[i, t - 1], -1.0)], 0.0, tag=f"sd[{i},{t}]")
            for tau in range(t, min(t + unit.min_up - 1, T - 1) + 1):
                if tau == t:
                    continue
                if t == 0:
                    m.add_ge([(u[i, tau], 1.0), (u[i, t], -1.0)],
                             -u0[unit.id], tag=f"minup[{i},{t},{tau}]")
                else:
                    m.add_ge([(u[i, tau], 1.0), (u[i, t], -1.0),
                              (u[i, t - 1], 1.0)], 0.0,
                             tag=f"minup[{i},{t},{tau}]")
            for tau in range(t, min(t + unit.min_down - 1, T - 1) + 1):
                if tau == t:
                    continue
                if t == 0:
                    m.add_le([(u[i, tau], 1.0), (u[i, t], -1.0)],
                             1.0 - u0[unit.id], tag=f"mindn[{i},{t},{tau}]")
                else:
                    m.add_le([(u[i, tau], 1.0), (u[i, t], -1.0),
                              (u[i, t - 1], 1.0)], 1.0,
                             tag=f"mindn[{i},{t},{tau}]")

    # real-time balance, capacity, ramping and flow limits
    for s in range(S):
        for n in range(N):
            for t in range(T):
                entries = []
                rhs = 0.0
                for i in units_at[n]:
                    entries.append((r_up[i, s, t], 1.0))
                    entries.append((r_dn[i, s, t], -1.0))
                    out = 1.0 - alpha[s, i, t]
                    if out:
                        entries.append((p[i, t], -out))
                for e, sign in lines_at[n]:
                    ln = net.lines[e]
                    a, b = node_idx[ln.node_from], node_idx[ln.node_to]
                    su = sign * ln.susceptance
                    entries += [(delta_da[a, t], su), (delta_rt[a, s, t], -su),
                                (delta_da[b, t], -su), (delta_rt[b, s, t], su)]
                for j in farms_at[n]:
                    rhs -= wind[j, s, t]
                    entries.append((w[j, t], -1.0))
                    entries.append((spill[j, s, t], -1.0))
                entries.append((shed[n, s, t], 1.0))
                m.add_eq(entries, rhs, tag=f"bal_rt[{n},{s},{t}]")
        for i, unit in enumerate(units):
            for t in range(T):
                m.add_le([(p[i, t], 1.0), (r_up[i, s, t], 1.0),
                          (u[i, t], -unit.p_max)], 0.0,
                         tag=f"pmax[{i},{s},{t}]")
                m.add_ge([(p[i, t], 1.0), (r_dn[i, s, t], -1.0),
                          (u[i, t], -unit.p_min)], 0.0,
                         tag=f"pmin[{i},{s},{t}]")
                if t == 0:
                    m.add_le([(p[i, t], 1.0), (r_up[i, s, t], 1.0)],
                             unit.ramp_up + p0[unit.id],
                             tag=f"rampup[{i},{s},{t}]")
                    m.add_ge([(p[i, t], 1.0), (r_dn[i, s, t], -1.0)],
                             p0[unit.id] - unit.ramp_down,
                             tag=f"rampdn[{i},{s},{t}]")
                else:
                    m.add_le([(p[i, t], 1.0), (p[i, t - 1], -1.0),
                              (r_up[i, s, t], 1.0), (r_up[i, s, t - 1], -1.0)],
                             unit.ramp_up, tag=f"rampup[{i},{s},{t}]")
                    m.add_ge([(p[i, t], 1.0), (p[i, t - 1], -1.0),
                              (r_dn[i, s, t], -1.0), (r_dn[i, s, t - 1], 1.0)],
                             -unit.ramp_down, tag=f"rampdn[{i},{s},{t}]")
        for e, ln in enumerate(net.lines):
            a, b = node_idx[ln.node_from], node_idx[ln.node_to]
            for t in range(T):
                m.add_row([(delta_rt[a, s, t], ln.susceptance),
                           (delta_rt[b, s, t], -ln.susceptance)],
                          -ln.capacity, ln.capacity,
                          tag=f"flow_rt[{e},{s},{t}]")

    if instance.freq_mode != "off":
        _add_frequency_rows(m, vm, instance)

    obj: dict[int, float] = {}
    for i, unit in enumerate(units):
        for t in range(T):
            obj[y[i, t]] = unit.cost_startup
            obj[z[i, t]] = unit.cost_shutdown
            obj[p[i, t]] = unit.cost_energy
            for s in range(S):
                obj[r_up[i, s, t]] = pi[s] * unit.cost_res_up
                obj[r_dn[i, s, t]] = -pi[s] * unit.cost_res_down
    voll = net.value_of_lost_load
    for n in range(N):
        for s in range(S):
            for t in range(T):
                obj[shed[n, s, t]] = pi[s] * voll
    m.set_objective(obj)
    return BuiltModel(model=m, vars=vm, instance=instance)


def _add_frequency_rows(m: SolverModel, vm: VarMap,
                        instance: UcInstance) -> None:
    """RoCoF, quasi-steady-state and nadir-surrogate rows.

    The aggregate turbine fraction, droop and inertia are affine in the
    commitment binaries (availability is a parameter), so the rows are
    written directly on u.
    """
    units, tree, limits = instance.units, instance.tree, instance.limits
    r_w, f_w, m_w, d_const = _freq_constants(instance)
    m_v = instance.m_v
    alpha = tree.availability
    f_b = limits.f_base
    S, T = len(tree.scenarios), instance.horizon
    outage_of = [s.outage_unit for s in tree.scenarios]

    for s in range(S):
        for t in range(T):
            dp = tree.outage_size[s, t]
            a = alpha[s, :, t]
            m_entries = [(vm.u[i, t], m_w[i]) for i in range(len(units))
                         if a[i]]
            r_entries = [(vm.u[i, t], r_w[i]) for i in range(len(units))
                         if a[i]]
            f_entries = [(vm.u[i, t], f_w[i]) for i in range(len(units))
                         if a[i]]
            # RoCoF: (rocof_lim/f_b) * (M + M_v) >= dP
            m.add_ge(m_entries, dp * f_b / limits.rocof_lim - m_v,
                     tag=f"rocof[{s},{t}]")
            # quasi steady state: (ss_lim/f_b) * (D + R) >= dP
            m.add_ge(r_entries, dp * f_b / limits.ss_lim - d_const,
                     tag=f"qss[{s},{t}]")
            if dp <= 0:
                continue
            if instance.freq_mode == "bounds":
                bounds = instance.nadir_bounds[outage_of[s]]
                m.add_ge(f_entries, bounds.f_lim, tag=f"nadir_f[{s},{t}]")
                m.add_ge(r_entries, bounds.r_lim, tag=f"nadir_r[{s},{t}]")
                m.add_ge(m_entries, bounds.m_lim - m_v,
                         tag=f"nadir_m[{s},{t}]")
            else:
                fit = instance.pwl_fits[outage_of[s]]
                t3 = m.add_var(-INF, INF, name=f"t3[{s},{t}]")
                vm.t3[(s, t)] = t3
                for v, seg in enumerate(fit.segments):
                    entries = [(t3, -1.0)]
                    entries += [(idx, seg.a * coef) for idx, coef in r_entries]
                    entries += [(idx, seg.b * coef) for idx, coef in f_entries]
                    entries += [(idx, seg.c * coef) for idx, coef in m_entries]
                    m.add_le(entries, -(seg.d + seg.c * m_v),
                             tag=f"nadir_pwl[{s},{t},{v}]")
                m.add_le([(t3, 1.0)], limits.nadir_lim,
                         tag=f"nadir_cap[{s},{t}]")


def _extract(built: BuiltModel, res: SolveResult) -> UcSolution:
    if not res.has_solution:
        return UcSolution(status=res.status, objective=None, mip_gap=None)
    inst, vm = built.instance, built.vars
    x = res.x
    u = np.rint(x[vm.u]).astype(int)
    y = np.rint(x[vm.y]).astype(int)
    z = np.rint(x[vm.z]).astype(int)
    r_w, f_w, m_w, _ = _freq_constants(inst)
    s_base = inst.s_base
    c = np.array([un.p_max * un.gain_k / s_base for un in inst.units])
    alpha = inst.tree.availability
    # k_{i,s,t} = c_i * u_{i,t} * alpha_{s,i,t}, reshaped to (I, S, T)
    k = (c[None, :, None] * u[None, :, :] * alpha).transpose(1, 0, 2)
    ualpha = u[None, :, :] * alpha     # (S, I, T)
    f_sys = np.einsum("sit,i->st", ualpha, f_w)
    r_sys = np.einsum("sit,i->st", ualpha, r_w)
    m_sys = np.einsum("sit,i->st", ualpha, m_w)

    sol = UcSolution(
        status=res.status, objective=res.objective, mip_gap=res.mip_gap,
        u=u, y=y, z=z, p=x[vm.p], w=x[vm.w],
        delta_da=x[vm.delta_da], delta_rt=x[vm.delta_rt],
        r_up=x[vm.r_up], r_dn=x[vm.r_dn],
        spill=x[vm.spill], shed=x[vm.shed],
        k=k, f_sys=f_sys, r_sys=r_sys, m_sys=m_sys,
    )
    sol.cost_breakdown = cost_breakdown(sol, inst)
    residuals = built.model.residuals(x)
    sol.max_residual = float(residuals.max()) if len(residuals) else 0.0
    return sol


def solve(built: BuiltModel, mip_gap: float = 1e-4,
          time_limit: float = 600.0, backend=None) -> UcSolution:
    """Optimize a built model and extract the solution with diagnostics."""
    backend = backend or get_backend()
    res = backend.solve(built.model, mip_gap=mip_gap, time_limit=time_limit)
    return _extract(built, res)


def residual_scale(instance: UcInstance) -> float:
    return max(1.0, max(max(series[:instance.horizon], default=0.0)
                        for series in instance.network.demand.values()))


def cost_breakdown(sol: UcSolution, instance: UcInstance) -> dict:
    """Objective split into startup, operation, reserve and shed parts."""
    units = instance.units
    pi = np.array([s.probability for s in instance.tree.scenarios])
    c_su = np.array([u.cost_startup for u in units])
    c_sd = np.array([u.cost_shutdown for u in units])
    c_e = np.array([u.cost_energy for u in units])
    c_rp = np.array([u.cost_res_up for u in units])
    c_rm = np.array([u.cost_res_down for u in units])
    startup = float(c_su @ sol.y.sum(axis=1) + c_sd @ sol.z.sum(axis=1))
    operation = float(c_e @ sol.p.sum(axis=1))
    reserves = float(np.einsum("s,ist,i->", pi, sol.r_up, c_rp)
                     - np.einsum("s,ist,i->", pi, sol.r_dn, c_rm))
    shed = float(instance.network.value_of_lost_load
                 * np.einsum("s,nst->", pi, sol.shed))
    total = startup + operation + reserves + shed
    return {"total": total, "startup": startup, "operation": operation,
            "reserves": reserves, "shed": shed}


def brute_force_uc(instance: UcInstance, backend=None) -> UcSolution:
    """Exhaustive commitment enumeration as a testing oracle.

    Fixes every u (and the implied y, z) pattern and solves the remaining
    continuous problem with the same model builder, keeping the best
    feasible solution.
    """
    I, T = len(instance.units), instance.horizon
    if I * T > 16:
        raise InstanceTooLargeError(
            f"{I * T} binary decisions exceed the brute-force limit of 16")
    built = build_model(instance)
    m, vm = built.model, built.vars
    backend = backend or get_backend()
    u0 = {u.id: int(instance.initial.commitment.get(u.id, 0))
          for u in instance.units}

    base_lb = list(m.lb)
    base_ub = list(m.ub)
    best: UcSolution | None = None
    for pattern in itertools.product((0, 1), repeat=I * T):
        u = np.array(pattern).reshape(I, T)
        m.lb = list(base_lb)
        m.ub = list(base_ub)
        feasible = True
        for i, unit in enumerate(instance.units):
            prev = u0[unit.id]
            for t in range(T):
                if base_lb[vm.u[i, t]] > u[i, t] or base_ub[vm.u[i, t]] < u[i, t]:
                    feasible = False
                yv = max(0, u[i, t] - prev)
                zv = max(0, prev - u[i, t])
                m.lb[vm.u[i, t]] = m.ub[vm.u[i, t]] = float(u[i, t])
                m.lb[vm.y[i, t]] = m.ub[vm.y[i, t]] = float(yv)
                m.lb[vm.z[i, t]] = m.ub[vm.z[i, t]] = float(zv)
                prev = u[i, t]
        if not feasible:
            continue
        res = backend.solve(m, mip_gap=1e-9, time_limit=60.0)
        if res.status != "optimal":
            continue
        if best is None or res.objective < best.objective:
            best = _extract(built, res)
    m.lb = base_lb
    m.ub = base_ub
    if best is None:
        return UcSolution(status="infeasible", objective=None, mip_gap=None)
    return best


# ---------------------------------------------------------------------------
# instance file IO and solution dumps

def instance_from_dict(data: dict, base_dir: Path | None = None,
                       freq_mode: str | None = None) -> UcInstance:
    base_dir = base_dir or Path(".")

    def resolve(name):
        path = Path(data[name])
        return path if path.is_absolute() else base_dir / path

    if "system_file" in data:
        system = load_system(resolve("system_file"))
    else:
        system = system_from_dict(data["system"])
    netd = data["network"]
    network = Network(
        nodes=list(netd["nodes"]),
        lines=[Line(ln["from"], ln["to"], float(ln["susceptance"]),
                    float(ln["capacity"])) for ln in netd["lines"]],
        demand={n: [float(v) for v in series]
                for n, series in netd["demand"].items()},
        value_of_lost_load=float(netd["value_of_lost_load"]),
        farms=[WindFarm(f["id"], f["bus"], float(f["capacity"]))
               for f in netd.get("farms", [])],
    )
    horizon = int(data.get("horizon", 24))
    wind = ingest_wind(resolve("wind_csv"))
    cont = data.get("contingency", {})
    model = ContingencyModel(
        credible_outages=list(cont.get("credible_outages", [])),
        contingency_hour=int(cont.get("contingency_hour", 1)) - 1,
        lam=1.0 / float(cont.get("mttf", 1000.0)),
        tau=float(cont.get("tau", 1.0)),
    )
    tree = build_tree(wind, model, system.units, system.s_base, horizon)
    instance = UcInstance(
        network=network, units=system.units, fleet=system.fleet,
        tree=tree, limits=system.limits, horizon=horizon,
        t_turbine=system.t_turbine,
        freq_mode=freq_mode or data.get("freq_mode", "off"),
    )
    return instance


def load_instance(path: str | Path,
                  freq_mode: str | None = None) -> UcInstance:
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    return instance_from_dict(data, base_dir=path.parent,
                              freq_mode=freq_mode)


def dump_solution(sol: UcSolution, instance: UcInstance,
                  out_dir: str | Path) -> None:
    """CSV dump per variable family plus costs.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    units = instance.units
    net = instance.network
    with open(out / "commitment.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["unit", "hour", "u", "y", "z"])
        for i, unit in enumerate(units):
            for t in range(instance.horizon):
                wr.writerow([unit.id, t + 1, sol.u[i, t], sol.y[i, t],
                             sol.z[i, t]])
    with open(out / "dispatch.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["asset", "hour", "mw"])
        for i, unit in enumerate(units):
            for t in range(instance.horizon):
                wr.writerow([unit.id, t + 1, f"{sol.p[i, t]:.6f}"])
        for j, farm in enumerate(net.farms):
            for t in range(instance.horizon):
                wr.writerow([farm.id, t + 1, f"{sol.w[j, t]:.6f}"])
    with open(out / "reserves.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["unit", "scenario", "hour", "r_up_mw", "r_dn_mw"])
        for i, unit in enumerate(units):
            for s, scen in enumerate(instance.tree.scenarios):
                for t in range(instance.horizon):
                    wr.writerow([unit.id, scen.id, t + 1,
                                 f"{sol.r_up[i, s, t]:.6f}",
                                 f"{sol.r_dn[i, s, t]:.6f}"])
    node_idx = {n: k for k, n in enumerate(net.nodes)}
    with open(out / "flows.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["line", "stage", "scenario", "hour", "mw"])
        for ln in net.lines:
            a, b = node_idx[ln.node_from], node_idx[ln.node_to]
            name = f"{ln.node_from}-{ln.node_to}"
            for t in range(instance.horizon):
                flow = ln.susceptance * (sol.delta_da[a, t]
                                         - sol.delta_da[b, t])
                wr.writerow([name, "da", "", t + 1, f"{flow:.6f}"])
            for s, scen in enumerate(instance.tree.scenarios):
                for t in range(instance.horizon):
                    flow = ln.susceptance * (sol.delta_rt[a, s, t]
                                             - sol.delta_rt[b, s, t])
                    wr.writerow([name, "rt", scen.id, t + 1, f"{flow:.6f}"])
    with open(out / "costs.json", "w") as fh:
        json.dump({"objective": sol.objective, "status": sol.status,
                   "mip_gap": sol.mip_gap,
                   "breakdown": sol.cost_breakdown}, fh, indent=2)
        fh.write("\n")
