"""Fixed-step scenario runner.

Each step evaluates the references, runs the base pose controller and the
joint servos with inverse-dynamics feedforward, saturates the command,
accumulates impulse and advances the coupled integrator. The whole loop is
compiled so a 500 s run at 1 ms finishes in seconds.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .control import pid_kernel, pose_kernel
from .ehs_dynamics import system_terms
from .errors import SimulationFault
from .results import COLUMNS, Event, RunSummary, Telemetry
from .scenario import (
    JOINT_MODE_ACTUATION,
    JOINT_MODE_EXTENSION,
    JOINT_MODE_HOLD,
    JOINT_MODE_RAMP,
    Scenario,
)
from .scissor import extension_kernel, jacobian_kernel
from .spatial_math import cross, quat_conj, quat_log, quat_mul, quat_to_euler_xyz, quat_to_matrix, skew
from .trajectory import actuation_ref_kernel, extension_ref_kernel, pose_ref_kernel, trapezoid_kernel
from .vehicle import coupled_step, saturate_kernel, wrap_pi

EVENT_SATURATION, EVENT_STROKE_STOP, EVENT_STRUCTURAL = 0, 1, 2
EVENT_KINDS = ("saturation_onset", "stroke_stop", "structural_limit")
SATURATION_CHANNELS = (
    "force_x", "force_y", "force_z", "torque_x", "torque_y", "torque_z", "pan", "pitch", "actuation",
)
MAX_EVENTS = 4096
N_COLUMNS = len(COLUMNS)


@njit(cache=True)
def _joint_reference(mode, t, start, goal, t_total, t_accel, t_start, rate, half_link, lb, le, pairs, y_lo, y_hi):
    """(q_ref, q_rate_ref, q_acc_ref, x_ref, x_rate_ref) for one unit."""
    q = start.copy()
    dq = np.zeros(3)
    ddq = np.zeros(3)
    if mode == JOINT_MODE_ACTUATION or mode == JOINT_MODE_EXTENSION:
        s, ds, dds = trapezoid_kernel(1.0, t_total, t_accel, t - t_start)
        for j in range(2):
            delta = wrap_pi(goal[j] - start[j])
            q[j] = wrap_pi(start[j] + delta * s)
            dq[j] = delta * ds
            ddq[j] = delta * dds
        if mode == JOINT_MODE_ACTUATION:
            delta = goal[2] - start[2]
            q[2] = start[2] + delta * s
            dq[2] = delta * ds
            ddq[2] = delta * dds
            x, dx, _ = actuation_ref_kernel(q[2], dq[2], ddq[2], half_link, lb, le, pairs)
            return q, dq, ddq, x, dx
        x0 = extension_kernel(start[2], half_link, lb, le, pairs)
        x1 = extension_kernel(goal[2], half_link, lb, le, pairs)
        x = x0 + (x1 - x0) * s
        dx = (x1 - x0) * ds
        q[2], dq[2], ddq[2] = extension_ref_kernel(x, dx, (x1 - x0) * dds, half_link, lb, le, pairs)
        return q, dq, ddq, x, dx
    if mode == JOINT_MODE_RAMP:
        x_lo = extension_kernel(y_hi, half_link, lb, le, pairs)
        x_hi = extension_kernel(y_lo, half_link, lb, le, pairs)
        x0 = extension_kernel(start[2], half_link, lb, le, pairs)
        x = x0 + rate * max(t - t_start, 0.0)
        dx = rate if t >= t_start else 0.0
        if x >= x_hi:
            x, dx = x_hi, 0.0
        elif x <= x_lo:
            x, dx = x_lo, 0.0
        q[2], dq[2], ddq[2] = extension_ref_kernel(x, dx, 0.0, half_link, lb, le, pairs)
        return q, dq, ddq, x, dx
    x = extension_kernel(start[2], half_link, lb, le, pairs)
    return q, dq, ddq, x, 0.0


@njit(cache=True)
def _simulate(
    xb, quat, vb, omega_b, joints, rates,
    mass, a0, a1, b, half_link, base_mass, base_inertia, mount_pos, mount_rot,
    lb, le, pairs, y_lo, y_hi, friction, limits,
    pos_gains, att_gains, pan_gains, pitch_gains, act_gains,
    schedule, jac_floor, base_control, reaction_ff, joint_ff,
    pose_p0, pose_p1, pose_q0, pose_slew, pose_T, pose_ta, pose_t0,
    j_mode, j_start, j_goal, j_T, j_ta, j_t0, j_rate,
    dt, n_steps, sample_every, probe_levels,
):
    n_units = joints.shape[0]
    nq = 3 * n_units
    m_tot = base_mass + n_units * mass.sum()
    n_samples = n_steps // sample_every + 1
    rows = np.zeros((n_samples, N_COLUMNS))
    ev_time = np.zeros(MAX_EVENTS)
    ev_kind = np.zeros(MAX_EVENTS, dtype=np.int64)
    ev_chan = np.zeros(MAX_EVENTS, dtype=np.int64)
    n_ev = 0
    # [max|F| x3, max|T| x3, max eff x3, max cmd eff x3, max pos err, max att err, max joint err x3]
    stats = np.zeros(17)
    imp_u = np.zeros(3)
    imp_n = np.zeros(3)
    pose_int = np.zeros(6)
    joint_int = np.zeros((n_units, 3))
    prev_flags = 0
    prev_struct = np.zeros(n_units, dtype=np.int64)
    prev_hits = np.zeros(n_units, dtype=np.int64)
    probes = np.full(probe_levels.shape[0], np.nan)
    fault_time = np.nan
    final_jerr = np.zeros(3)

    R0 = quat_to_matrix(quat)
    _, _, P0, L0, smr0 = system_terms(
        xb, quat, vb, R0 @ omega_b, joints, rates, mass, a0, a1, b, half_link,
        base_mass, base_inertia, mount_pos, mount_rot,
    )
    mom0 = np.zeros(9)
    mom0[:3] = P0
    mom0[3:6] = L0 + cross(xb, P0)
    mom0[6:] = xb + smr0 / m_tot

    for k in range(n_steps + 1):
        t = k * dt
        R = quat_to_matrix(quat)
        omega = R @ omega_b

        ref_p, ref_q, ref_v, ref_w, ref_a, ref_alpha = pose_ref_kernel(
            pose_p0, pose_p1, pose_q0, pose_slew, pose_T, pose_ta, t - pose_t0
        )
        q_ref, dq_ref, ddq_ref, x_ref, dx_ref = _joint_reference(
            j_mode, t, j_start, j_goal, j_T, j_ta, j_t0, j_rate, half_link, lb, le, pairs, y_lo, y_hi
        )
        rates_ref = np.empty((n_units, 3))
        for u in range(n_units):
            rates_ref[u] = dq_ref

        M, h, _, _, smr = system_terms(
            xb, quat, vb, omega, joints, rates_ref, mass, a0, a1, b, half_link,
            base_mass, base_inertia, mount_pos, mount_rot,
        )
        d = smr / m_tot
        sd = skew(d)
        inertia_c = M[3:6, 3:6] - m_tot * (sd.T @ sd)
        acc_ref = np.zeros(6 + nq)
        acc_ref[:3] = ref_a
        acc_ref[3:6] = ref_alpha
        for u in range(n_units):
            acc_ref[6 + 3 * u:9 + 3 * u] = ddq_ref
        gen = M @ acc_ref + h

        force = np.zeros(3)
        torque = np.zeros(3)
        if base_control:
            force, torque, pose_int = pose_kernel(
                xb, quat, vb, omega, ref_p, ref_q, ref_v, ref_w,
                pose_int, pos_gains, att_gains, m_tot, inertia_c, dt,
            )
            if reaction_ff:
                f_ff = gen[:3].copy()
                force = force + f_ff
                torque = torque + gen[3:6] - cross(d, f_ff)
            else:
                force = force + m_tot * ref_a
                torque = torque + inertia_c @ ref_alpha

        efforts = np.zeros((n_units, 3))
        for u in range(n_units):
            pan, pitch, y = joints[u, 0], joints[u, 1], joints[u, 2]
            efforts[u, 0], joint_int[u, 0] = pid_kernel(
                joint_int[u, 0], wrap_pi(q_ref[0] - pan), dq_ref[0] - rates[u, 0], dt, pan_gains
            )
            efforts[u, 1], joint_int[u, 1] = pid_kernel(
                joint_int[u, 1], wrap_pi(q_ref[1] - pitch), dq_ref[1] - rates[u, 1], dt, pitch_gains
            )
            jac = jacobian_kernel(y, half_link, pairs)
            e_x = x_ref - extension_kernel(y, half_link, lb, le, pairs)
            ed_x = dx_ref - jac * rates[u, 2]
            g = act_gains.copy()
            if schedule:
                f = 1.0 / max(abs(jac), jac_floor)
                g[0] *= f
                g[2] *= f
            u_x, joint_int[u, 2] = pid_kernel(joint_int[u, 2], e_x, ed_x, dt, g)
            # dx/dy < 0 over the whole stroke, so extension grows when y is pushed down
            efforts[u, 2] = -u_x
            if joint_ff:
                for j in range(3):
                    efforts[u, j] += gen[6 + 3 * u + j] + friction[j] * dq_ref[j]
            if u == 0:
                final_jerr[0] = wrap_pi(q_ref[0] - pan)
                final_jerr[1] = wrap_pi(q_ref[1] - pitch)
                final_jerr[2] = e_x

        f_app, t_app, e_app, flags = saturate_kernel(force, torque, efforts, limits)

        # bookkeeping
        for bit in range(9):
            mask = 1 << bit
            if (flags & mask) and not (prev_flags & mask) and n_ev < MAX_EVENTS:
                ev_time[n_ev] = t
                ev_kind[n_ev] = EVENT_SATURATION
                ev_chan[n_ev] = bit
                n_ev += 1
        prev_flags = flags
        for u in range(n_units):
            over = 1 if abs(e_app[u, 2]) > limits[5] else 0
            if over and not prev_struct[u] and n_ev < MAX_EVENTS:
                ev_time[n_ev] = t
                ev_kind[n_ev] = EVENT_STRUCTURAL
                ev_chan[n_ev] = u
                n_ev += 1
            prev_struct[u] = over
        for j in range(3):
            stats[j] = max(stats[j], abs(f_app[j]))
            stats[3 + j] = max(stats[3 + j], abs(t_app[j]))
            for u in range(n_units):
                stats[6 + j] = max(stats[6 + j], abs(e_app[u, j]))
                stats[9 + j] = max(stats[9 + j], abs(efforts[u, j]))
            stats[14 + j] = max(stats[14 + j], abs(final_jerr[j]))
        stats[12] = max(stats[12], np.linalg.norm(ref_p - xb))
        att_err = np.linalg.norm(quat_log(quat_mul(ref_q, quat_conj(quat))))
        stats[13] = max(stats[13], att_err)

        if k % sample_every == 0:
            r = rows[k // sample_every]
            r[0] = t
            r[1:4] = xb
            r[4:8] = quat
            r[8:11] = vb
            r[11:14] = omega_b
            r[14:17] = joints[0]
            r[17:20] = rates[0]
            r[20:23] = force
            r[23:26] = torque
            r[26:29] = f_app
            r[29:32] = t_app
            r[32:35] = e_app[0]
            r[35] = flags
            r[36:39] = imp_u
            r[39:42] = imp_n

        if k == n_steps:
            break

        for j in range(3):
            imp_u[j] += abs(f_app[j]) * dt
            imp_n[j] += f_app[j] * dt

        y_prev = joints[0, 2]
        xb, quat, vb, omega_b, joints, rates, hits = coupled_step(
            xb, quat, vb, omega_b, joints, rates, f_app, t_app, e_app, friction, dt, y_lo, y_hi,
            mass, a0, a1, b, half_link, base_mass, base_inertia, mount_pos, mount_rot,
        )
        ok = np.all(np.isfinite(xb)) and np.all(np.isfinite(quat)) and np.all(np.isfinite(vb))
        ok = ok and np.all(np.isfinite(omega_b)) and np.all(np.isfinite(joints)) and np.all(np.isfinite(rates))
        if not ok:
            fault_time = t + dt
            break
        for u in range(n_units):
            if hits[u] and not prev_hits[u] and n_ev < MAX_EVENTS:
                ev_time[n_ev] = t + dt
                ev_kind[n_ev] = EVENT_STROKE_STOP
                ev_chan[n_ev] = u
                n_ev += 1
            prev_hits[u] = hits[u]
        y_now = joints[0, 2]
        for i in range(probe_levels.shape[0]):
            lvl = probe_levels[i]
            if np.isnan(probes[i]) and (y_prev - lvl) * (y_now - lvl) <= 0.0 and y_prev != y_now:
                # extension error against the reference one step on
                _, _, _, xr, _ = _joint_reference(
                    j_mode, t + dt, j_start, j_goal, j_T, j_ta, j_t0, j_rate,
                    half_link, lb, le, pairs, y_lo, y_hi,
                )
                probes[i] = xr - extension_kernel(y_now, half_link, lb, le, pairs)

    R = quat_to_matrix(quat)
    _, _, P1, L1, smr1 = system_terms(
        xb, quat, vb, R @ omega_b, joints, rates, mass, a0, a1, b, half_link,
        base_mass, base_inertia, mount_pos, mount_rot,
    )
    mom1 = np.zeros(9)
    mom1[:3] = P1
    mom1[3:6] = L1 + cross(xb, P1)
    mom1[6:] = xb + smr1 / m_tot
    return (
        rows, stats, imp_u, imp_n, xb, quat, vb, omega_b, joints, rates, final_jerr,
        ev_time[:n_ev].copy(), ev_kind[:n_ev].copy(), ev_chan[:n_ev].copy(),
        probes, fault_time, mom0, mom1,
    )


def _pose_args(sc: Scenario) -> tuple:
    base = sc.initial_base
    p0 = base.position.copy()
    q0 = base.attitude.q.copy()
    man = sc.pose_maneuver
    if man is None:
        return p0, p0.copy(), q0, np.zeros(3), 1.0, 0.25, 0.0
    slew = quat_log(quat_mul(man.goal.attitude.q, quat_conj(q0)))
    return p0, man.goal.position.copy(), q0, slew, man.t_total, man.t_accel, man.t_start


def _joint_args(sc: Scenario) -> tuple:
    start = sc.initial_joints.positions()
    man = sc.joint_maneuver
    if man is None:
        return JOINT_MODE_HOLD, start, start.copy(), 1.0, 0.25, 0.0, 0.0
    t_total = man.t_total if man.mode != JOINT_MODE_RAMP else 1.0
    t_accel = man.t_accel if man.mode != JOINT_MODE_RAMP else 0.25
    return man.mode, start, man.goal.positions(), t_total, t_accel, man.t_start, man.extension_rate


def run(scenario: Scenario) -> tuple[Telemetry, RunSummary]:
    """Simulate ``scenario`` from its initial state to ``duration``.

    Raises :class:`SimulationFault` carrying the time stamp of the first
    non-finite state.
    """
    sc = scenario
    model = sc.model
    p = model.params
    ctl = sc.controller
    base = sc.initial_base
    n = model.n_units
    j0 = sc.initial_joints
    joints = np.tile(j0.positions(), (n, 1))
    rates = np.tile(j0.rates(), (n, 1))
    probe_levels = np.array(sc.probe_fractions, dtype=np.float64) * p.half_link_length

    out = _simulate(
        base.position, base.attitude.q, base.linear_velocity, base.angular_velocity, joints, rates,
        *model.kernel_args(),
        p.base_offset, p.effector_offset, p.pair_count, p.y_min, p.y_max,
        np.asarray(model.friction, dtype=np.float64), model.vehicle.limits.as_array(),
        ctl.position.as_array(), ctl.attitude.as_array(), ctl.pan.as_array(),
        ctl.pitch.as_array(), ctl.actuation.as_array(),
        ctl.schedule_actuation, ctl.jacobian_floor, ctl.base_control,
        ctl.reaction_feedforward, ctl.joint_feedforward,
        *_pose_args(sc), *_joint_args(sc),
        sc.dt, sc.n_steps, sc.sample_every, probe_levels,
    )
    (rows, stats, imp_u, imp_n, xb, quat, _vb, _wb, joints, _rates, jerr,
     ev_t, ev_k, ev_c, probes, fault_time, mom0, mom1) = out
    if not math.isnan(fault_time):
        raise SimulationFault(f"non-finite state at t = {fault_time:.6f} s", time=float(fault_time))

    goal_p, goal_q = _final_pose_goal(sc)
    events = [
        Event(float(t), EVENT_KINDS[k], SATURATION_CHANNELS[c] if k == EVENT_SATURATION else f"unit{c}")
        for t, k, c in zip(ev_t, ev_k, ev_c)
    ]
    probe_list = [float(v) for v in probes]
    finite = [abs(v) for v in probe_list if math.isfinite(v)]
    spread = None
    if probe_list and len(finite) == len(probe_list) and min(finite) > 0:
        spread = max(finite) / min(finite)
    y_final = float(joints[0, 2])
    summary = RunSummary(
        scenario=sc.name,
        duration_s=sc.duration,
        dt_s=sc.dt,
        final_position_m=[float(v) for v in xb],
        final_euler_rad=[float(v) for v in quat_to_euler_xyz(quat)],
        final_position_error_m=float(np.linalg.norm(goal_p - xb)),
        final_attitude_error_rad=float(np.linalg.norm(quat_log(quat_mul(goal_q, quat_conj(quat))))),
        max_position_error_m=float(stats[12]),
        max_attitude_error_rad=float(stats[13]),
        max_abs_force_n=stats[0:3].tolist(),
        max_abs_torque_nm=stats[3:6].tolist(),
        impulse_unsigned_ns=imp_u.tolist(),
        impulse_net_ns=imp_n.tolist(),
        max_joint_effort=stats[6:9].tolist(),
        max_joint_effort_commanded=stats[9:12].tolist(),
        final_joints=[float(v) for v in joints[0]],
        final_extension_m=float(extension_kernel(y_final, p.half_link_length, p.base_offset, p.effector_offset, p.pair_count)),
        final_joint_error=jerr.tolist(),
        max_joint_error=stats[14:17].tolist(),
        linear_momentum_change_ns=float(np.linalg.norm(mom1[:3] - mom0[:3])),
        angular_momentum_change_nms=float(np.linalg.norm(mom1[3:6] - mom0[3:6])),
        com_displacement_m=float(np.linalg.norm(mom1[6:] - mom0[6:])),
        extension_error_probes=probe_list,
        extension_error_spread=spread,
        events=events,
    )
    return Telemetry(rows), summary


def _final_pose_goal(sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    if sc.pose_maneuver is None:
        return sc.initial_base.position, sc.initial_base.attitude.q
    return sc.pose_maneuver.goal.position, sc.pose_maneuver.goal.attitude.q


def station_ramp_errors(
    source,
    fractions,
    settle_s: float = 20.0,
    overrides: dict | None = None,
) -> list[float]:
    """Steady extension error of a ramp scenario at several stroke stations.

    For each actuation fraction ``f`` the scenario is re-run starting
    ``settle_s`` seconds of ramp before ``y = f * L_L``, already moving at the
    ramp rate, and the extension error is read as ``y`` crosses the station.
    Short per-station runs keep a slow ramp affordable; at slow rates the
    error is dominated by the velocity-proportional load, which is what gain
    scheduling is meant to even out.
    """
    from .scenario import load_scenario
    from .scissor import extension_from_actuation

    base = load_scenario(source, overrides)
    if base.joint_maneuver is None or base.joint_maneuver.mode != JOINT_MODE_RAMP:
        raise ValueError("station_ramp_errors needs a ramp scenario")
    p = base.model.params
    rate = base.joint_maneuver.extension_rate
    errors = []
    for f in fractions:
        x = extension_from_actuation(float(f) * p.half_link_length, p)
        ov = dict(overrides or {})
        ov.update({
            "initial.joints.extension_m": x - rate * settle_s,
            "initial.joints.actuation_m": None,
            "initial.joints.extension_rate_mps": rate,
            "sim.duration_s": round((settle_s + 1.0) / base.dt) * base.dt,
            "probes.actuation_fractions": [float(f)],
        })
        _, summary = run(load_scenario(source, ov))
        errors.append(summary.extension_error_probes[0])
    return errors
