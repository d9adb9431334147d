"""Inner loops of the surrogate tabletop world.

These are written in scalar style so that the same source runs under numba
and as plain Python. ``sweep`` is the compiled entry point when numba is
available; ``python_impl(sweep)`` always gives the interpreted version.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import maybe_njit

_EPS = 1e-12


@maybe_njit
def _inside(q, pos, dims, i):
    # Strict interior in x/y; z from the plane up to (not including) the top face.
    return (
        abs(q[0] - pos[i, 0]) < 0.5 * dims[i, 0]
        and abs(q[1] - pos[i, 1]) < 0.5 * dims[i, 1]
        and q[2] >= 0.0
        and q[2] < dims[i, 2]
    )


@maybe_njit
def _exit_distance(q, pos, dims, i, ux, uy):
    """Distance the box must travel along (ux, uy) so that q sits on its trailing face."""
    best = math.inf
    if abs(ux) > _EPS:
        if ux > 0.0:
            t = (q[0] - pos[i, 0] + 0.5 * dims[i, 0]) / ux
        else:
            t = (q[0] - pos[i, 0] - 0.5 * dims[i, 0]) / ux
        best = min(best, t)
    if abs(uy) > _EPS:
        if uy > 0.0:
            t = (q[1] - pos[i, 1] + 0.5 * dims[i, 1]) / uy
        else:
            t = (q[1] - pos[i, 1] - 0.5 * dims[i, 1]) / uy
        best = min(best, t)
    return max(best, 0.0)


@maybe_njit
def _clamp_xy(pos, i, half_extent):
    pos[i, 0] = min(max(pos[i, 0], -half_extent), half_extent)
    pos[i, 1] = min(max(pos[i, 1], -half_extent), half_extent)


@maybe_njit
def _can_grasp(q, pos, dims, hollow, i, grasp_radius, rim_lo, rim_hi):
    dx = q[0] - pos[i, 0]
    dy = q[1] - pos[i, 1]
    dz = q[2] - pos[i, 2]
    if math.sqrt(dx * dx + dy * dy + dz * dz) > grasp_radius:
        return False
    if hollow[i]:
        rim = 0.5 * min(dims[i, 0], dims[i, 1])
        r = math.sqrt(dx * dx + dy * dy)
        return rim_lo * rim <= r <= rim_hi * rim
    return True


@maybe_njit
def _rest_on_tops(q, pos, dims, m):
    # Approach from above: a waypoint inside an object stops on its top face.
    for _ in range(m + 1):
        moved = False
        for i in range(m):
            if _inside(q, pos, dims, i):
                q[2] = dims[i, 2]
                moved = True
        if not moved:
            break


@maybe_njit
def sweep(dims, hollow, pos, target, offsets, closed, grasp_radius, resolution, rim_lo, rim_hi, half_extent):
    """Run one three-waypoint gripper trajectory in place.

    ``pos`` (m, 3) is modified in place. ``offsets`` (3, 3) are waypoints
    relative to the target's centre after settling; ``closed`` (3,) holds the
    gripper command applied on arrival at each waypoint.

    Returns ``(max_lift, attached)``: the largest height of the target above
    its resting height during the motion, and whether it is still held.
    """
    m = pos.shape[0]
    for i in range(m):
        pos[i, 2] = 0.5 * dims[i, 2]

    anchor_x = pos[target, 0]
    anchor_y = pos[target, 1]
    anchor_z = pos[target, 2]

    q = np.empty(3)
    q[0] = anchor_x + offsets[0, 0]
    q[1] = anchor_y + offsets[0, 1]
    q[2] = max(anchor_z + offsets[0, 2], 0.0)
    _rest_on_tops(q, pos, dims, m)

    attached = False
    off_x = 0.0
    off_y = 0.0
    off_z = 0.0
    max_lift = 0.0
    prev = np.empty(3)

    for w in range(3):
        if w > 0:
            ax = q[0]
            ay = q[1]
            az = q[2]
            bx = anchor_x + offsets[w, 0]
            by = anchor_y + offsets[w, 1]
            bz = max(anchor_z + offsets[w, 2], 0.0)
            length = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2 + (bz - az) ** 2)
            n = int(math.ceil(length / resolution))
            for s in range(1, n + 1):
                frac = s / n
                prev[0] = q[0]
                prev[1] = q[1]
                prev[2] = q[2]
                q[0] = ax + (bx - ax) * frac
                q[1] = ay + (by - ay) * frac
                q[2] = az + (bz - az) * frac
                # A gripper resting on a top face cannot sink back into it.
                if q[2] < prev[2]:
                    for i in range(m):
                        if attached and i == target:
                            continue
                        if prev[2] >= dims[i, 2] and _inside(q, pos, dims, i):
                            q[2] = dims[i, 2]
                ux = q[0] - prev[0]
                uy = q[1] - prev[1]
                norm = math.sqrt(ux * ux + uy * uy)
                for i in range(m):
                    if attached and i == target:
                        continue
                    if not _inside(q, pos, dims, i):
                        continue
                    if norm <= _EPS:
                        q[2] = dims[i, 2]
                        continue
                    t = _exit_distance(q, pos, dims, i, ux / norm, uy / norm)
                    pos[i, 0] += t * ux / norm
                    pos[i, 1] += t * uy / norm
                    _clamp_xy(pos, i, half_extent)
                if attached:
                    pos[target, 0] = q[0] + off_x
                    pos[target, 1] = q[1] + off_y
                    pos[target, 2] = max(q[2] + off_z, 0.5 * dims[target, 2])
                    _clamp_xy(pos, target, half_extent)
                    lift = pos[target, 2] - 0.5 * dims[target, 2]
                    if lift > max_lift:
                        max_lift = lift

        if closed[w]:
            if not attached and _can_grasp(q, pos, dims, hollow, target, grasp_radius, rim_lo, rim_hi):
                attached = True
                off_x = pos[target, 0] - q[0]
                off_y = pos[target, 1] - q[1]
                off_z = pos[target, 2] - q[2]
        elif attached:
            attached = False
            pos[target, 2] = 0.5 * dims[target, 2]

    return max_lift, attached
