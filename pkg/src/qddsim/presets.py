"""Built-in experiments, one per hardware test of the hand.

Each function returns a plain config dict so ``qddsim presets --show NAME``
can print an editable starting point.  Lengths are metres, angles radians.
"""

from __future__ import annotations

import math

from .scenarios import preset


# tangential contact spring for held or pressed contacts: viscous stiction alone creeps
STICK = 1000.0
STICK_DAMPING = 5.0


def box(x0, x1, y0, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def circle_config(name, K, description):
    return {
        "name": name,
        "description": description,
        "duration": 1.0 + 2 * math.pi,
        "controller": {"K": [K, K], "B": [2.0, 2.0]},
        "fingers": [
            {"initial_tip": [0.02, 0.06],
             "trajectory": {"kind": "Circle", "center": [0.0, 0.06], "radius": 0.02, "rate": 1.0}},
            {"initial_tip": [0.0, 0.06]},
        ],
        "success": {"kind": "tracking", "transient": 1.0, "max_error": 0.01},
    }


@preset("motor_torque", "locked-rotor torque vs measured i_q over 10 setpoints")
def motor_torque():
    return {
        "name": "motor_torque",
        "description": "Torque/current linearity on a locked rotor.",
        "kind": "motor_bench",
        "duration": 1.0,
        "bench": {"mode": "linearity", "setpoints": [0.02 * k for k in range(1, 11)], "segment": 0.1},
        "success": {"kind": "motor_linearity"},
    }


@preset("foc_ablation", "i_d regulation with both PI loops vs U_d held at zero")
def foc_ablation():
    return {
        "name": "foc_ablation",
        "description": "Constant torque on a locked rotor, with and without the i_d loop.",
        "kind": "motor_bench",
        "duration": 0.4,
        "bench": {"mode": "ablation", "setpoints": [0.1], "segment": 0.2},
        "success": {"kind": "foc_ablation"},
    }


@preset("press", "fingertip pushing up into a stiff scale; force vs commanded displacement")
def press():
    # tip starts touching the underside of the scale plate; 4 cm set-point
    # ramp at K=100 N/m, then K=1000 N/m to reach the current limit
    return {
        "name": "press",
        "description": "Force output against a scale: slope K, then saturation.",
        "duration": 2.6,
        "plant": {"contact": {"k_stick": STICK}},
        "controller": {"K": [100.0, 100.0], "B": [2.0, 2.0]},
        "fingers": [
            {"initial_tip": [0.0, 0.045],
             "trajectory": {"kind": "PiecewiseLinear",
                            "waypoints": [[0.0, 0.0, 0.045], [0.1, 0.0, 0.045],
                                          [2.1, 0.0, 0.085], [2.6, 0.0, 0.085]]}},
            {"initial_tip": [0.0, 0.06]},
        ],
        "gain_schedule": [{"label": "saturate", "at": 2.2, "K": [1000.0, 1000.0]}],
        "environment": [{"tag": "scale", "vertices": box(0.02, 0.06, 0.053, 0.063), "mu": 0.3,
                         "kn": 2e4, "dn": 20.0}],
        "success": {"kind": "press", "axis": "y", "displacement_range": [0.0, 0.04],
                    "slope_tolerance": 0.05, "min_force": 8.2},
    }


@preset("circle_2cm", "2 cm circle at 1 rad/s, K=100 N/m")
def circle_2cm():
    return circle_config("circle_2cm", 100.0, "Circle tracking at K=100 N/m.")


@preset("circle_k50", "circle tracking at K=50 N/m")
def circle_k50():
    return circle_config("circle_k50", 50.0, "Circle tracking at K=50 N/m.")


@preset("circle_k100", "circle tracking at K=100 N/m")
def circle_k100():
    return circle_config("circle_k100", 100.0, "Circle tracking at K=100 N/m.")


@preset("circle_k200", "circle tracking at K=200 N/m")
def circle_k200():
    return circle_config("circle_k200", 200.0, "Circle tracking at K=200 N/m.")


@preset("rectangle", "3 x 2 cm rectangle at 2 cm/s, K=100 N/m")
def rectangle():
    c = [[0.015, 0.05], [0.015, 0.07], [-0.015, 0.07], [-0.015, 0.05]]
    return {
        "name": "rectangle",
        "description": "Rectangle tracking at K=100 N/m.",
        "duration": 6.0,
        "controller": {"K": [100.0, 100.0], "B": [2.0, 2.0]},
        "fingers": [
            {"initial_tip": c[0],
             "trajectory": {"kind": "Rectangle", "corners": c, "speed": 0.02}},
            {"initial_tip": [0.0, 0.06]},
        ],
        "success": {"kind": "tracking", "transient": 1.0, "max_error": 0.01},
    }


# the per-axis force cap sits below the object's limit to absorb contact
# ripple from current noise and encoder quantisation
FORCE_CAP_DERATE = 0.9


def pinch_config(name, description, obj, close_to, f_max=None, K=100.0, B=2.0, duration=5.0,
                 success=None, disturbances=None):
    # tips start open at x = +/-0.04 and close at 1 cm/s while the object
    # floats; gravity takes over once the grasp has formed
    y = obj["position"][1]
    paths = []
    for sx in (1.0, -1.0):
        paths.append({"initial_tip": [sx * 0.04, y], "initial_frame": "hand",
                      "trajectory": {"kind": "PiecewiseLinear", "frame": "hand",
                                     "waypoints": [[0.0, sx * 0.04, y], [0.2, sx * 0.04, y],
                                                   [0.2 + (0.04 - close_to) / 0.01, sx * close_to, y],
                                                   [duration, sx * close_to, y]]}})
    cfg = {
        "name": name,
        "description": description,
        "duration": duration,
        "plant": {"contact": {"k_stick": STICK, "k_visc": STICK_DAMPING}},
        "controller": {"K": [K, K], "B": [B, B],
                       "f_max": None if f_max is None else FORCE_CAP_DERATE * f_max},
        "fingers": paths,
        "object": dict(obj, gravity_start=0.2 + (0.04 - close_to) / 0.01 + 0.3),
        "success": success or {"kind": "grasp", "f_max": f_max, "min_normal_force": 0.2},
    }
    if disturbances:
        cfg["disturbances"] = disturbances
    return cfg


BALL = {"shape": "Disk", "radius": 0.02, "mass": 0.02, "position": [0.0, 0.06], "mu": 0.8}


@preset("force_closure_grasp", "antipodal two-finger pinch of a 2 cm ball")
def force_closure_grasp():
    return pinch_config("force_closure_grasp", "Frictional pinch of a ball, checked for force closure.",
                        BALL, 0.01, success={"kind": "closure", "closure": "force"})


@preset("card", "thin card pinched with the closing force capped at 0.3 N")
def card():
    obj = {"shape": "ConvexPolygon", "vertices": box(-0.002, 0.002, -0.025, 0.025), "mass": 0.002,
           "position": [0.0, 0.06], "mu": 0.8}
    return pinch_config("card", "Fragile pinch of a card (F_max 0.3 N).", obj, 0.0, f_max=0.3)


@preset("chip", "hexagonal chip pinched with the closing force capped at 0.5 N")
def chip():
    r = 0.015
    verts = [[r * math.cos(math.radians(30 + 60 * k)), r * math.sin(math.radians(30 + 60 * k))]
             for k in range(6)]
    obj = {"shape": "ConvexPolygon", "vertices": verts, "mass": 0.003, "position": [0.0, 0.06], "mu": 0.8}
    return pinch_config("chip", "Fragile pinch of a chip (F_max 0.5 N).", obj, 0.0, f_max=0.5)


@preset("egg", "egg-sized disk pinched with the closing force capped at 2 N")
def egg():
    obj = {"shape": "Disk", "radius": 0.022, "mass": 0.05, "position": [0.0, 0.06], "mu": 0.8}
    return pinch_config("egg", "Fragile pinch of an egg (F_max 2 N).", obj, 0.0, f_max=2.0)


@preset("disturbance", "ball grasp hit by a 0.5 N sideways pulse for 0.2 s")
def disturbance():
    return pinch_config("disturbance", "Grasp retention under an external force pulse.", BALL, 0.01,
                        duration=6.0, disturbances=[{"start": 4.5, "duration": 0.2, "force": [0.5, 0.0]}])


@preset("form_closure_grasp", "block on the palm caged by both fingers' links under joint control")
def form_closure_grasp():
    open_, shut = [math.pi / 2 - 0.3, math.pi / 2], [math.pi / 2 + 0.1, math.pi / 2]
    finger = {"initial_theta": open_,
              "trajectory": {"kind": "PiecewiseLinear",
                             "waypoints": [[0.0] + open_, [0.2] + open_, [1.7] + shut, [2.5] + shut]}}
    return {
        "name": "form_closure_grasp",
        "description": "Enveloping grasp: palm plus link faces immobilise a block.",
        "duration": 2.5,
        "controller": {"space": "Joint", "K": [0.5, 0.3], "B": [0.01, 0.005]},
        "fingers": [finger, finger],
        "object": {"shape": "ConvexPolygon", "vertices": box(-0.033, 0.033, -0.021, 0.021),
                   "mass": 0.02, "position": [0.0, 0.021], "mu": 0.5},
        "success": {"kind": "closure", "closure": "form"},
    }


def snatch_config(name, description, obj, peak_speed, f_max=None, success_f_max=None, B=2.0):
    # hand upside down above a table; fingers are limp (K=0) until the ball
    # deflects one of them by 1 cm, then they stiffen and close on it
    open_y = 0.07
    cfg = {
        "name": name,
        "description": description,
        "duration": 0.0,
        "plant": {"contact": {"k_stick": STICK, "k_visc": STICK_DAMPING}},
        "controller": {"K": [0.0, 0.0], "B": [0.3, 0.3], "f_max": f_max},
        "fingers": [{"initial_tip": [sx * 0.035, open_y], "initial_frame": "hand",
                     "trajectory": {"kind": "Hold", "frame": "hand", "point": [sx * 0.035, open_y]}}
                    for sx in (1.0, -1.0)],
        "gain_schedule": [{"label": "contact", "when": {"axis": "y", "threshold": 0.01, "fingers": "any"},
                           "K": [100.0, 100.0], "B": [B, B],
                           "targets": [[0.0, 0.045], [0.0, 0.045]]}],
        "object": obj,
        "environment": [{"tag": "table", "vertices": box(-0.2, 0.2, -0.02, 0.0), "mu": 0.5}],
        "base_motion": {"kind": "CosineDip", "position": [0.0, 0.11], "rotation": math.pi,
                        "depth": 0.05, "peak_speed": peak_speed, "start": 0.05},
        "success": {"kind": "grasp", "min_normal_force": 0.2, "min_object_rise": 0.01,
                    "trigger_threshold": 0.01, "no_pause": True, "f_max": success_f_max},
    }
    period = math.pi * 0.05 / peak_speed
    cfg["duration"] = round(0.05 + period + 0.5, 3)
    return cfg


@preset("snatch_ball", "smack-and-snatch: limp fingers stiffen on contact during a 5 cm dip at 0.5 m/s")
def snatch_ball():
    obj = {"shape": "Disk", "radius": 0.02, "mass": 0.01, "position": [0.0, 0.02], "mu": 0.8}
    return snatch_config("snatch_ball", "Dynamic grasp of a ball off a table without stopping.", obj, 0.5)


@preset("snatch_egg", "smack-and-snatch on an egg at a gentler 0.2 m/s with a 2 N cap")
def snatch_egg():
    obj = {"shape": "Disk", "radius": 0.022, "mass": 0.05, "position": [0.0, 0.022], "mu": 0.8}
    return snatch_config("snatch_egg", "Dynamic fragile grasp off a table.", obj, 0.2,
                         f_max=FORCE_CAP_DERATE * 2.0, success_f_max=2.0, B=10.0)


def in_hand_paths(moves, t_move=(1.2, 2.2), y=0.06, duration=2.8):
    """Close from x=+/-0.03 to +/-0.01 over 1 s, then shift each tip by ``moves[i]``."""
    fingers = []
    for sx, (dx, dy) in zip((1.0, -1.0), moves):
        w = [[0.0, sx * 0.03, y], [0.2, sx * 0.03, y], [1.2, sx * 0.01, y],
             [t_move[0], sx * 0.01, y], [t_move[1], sx * 0.01 + dx, y + dy], [duration, sx * 0.01 + dx, y + dy]]
        w = [p for k, p in enumerate(w) if k == 0 or p[0] > w[k - 1][0]]
        fingers.append({"initial_tip": [sx * 0.03, y], "initial_frame": "hand",
                        "trajectory": {"kind": "PiecewiseLinear", "frame": "hand", "waypoints": w}})
    return fingers


@preset("inhand_rotation", "rolling a pinched ball by moving the tips in opposite directions")
def inhand_rotation():
    return {
        "name": "inhand_rotation",
        "description": "In-hand rotation: finger 0 up, finger 1 down by 5 mm.",
        "duration": 2.8,
        "gravity": [0.0, 0.0],
        "plant": {"contact": {"k_stick": STICK, "k_visc": STICK_DAMPING}},
        "fingers": in_hand_paths([(0.0, 0.005), (0.0, -0.005)]),
        "object": BALL,
        "success": {"kind": "in_hand", "start": 1.2, "min_rotation": 0.2},
    }


@preset("inhand_translation", "sliding a pinched ball 1 cm sideways by shifting both set-points")
def inhand_translation():
    return {
        "name": "inhand_translation",
        "description": "In-hand translation: both set-points move 1 cm in +x.",
        "duration": 2.8,
        "gravity": [0.0, 0.0],
        "plant": {"contact": {"k_stick": STICK, "k_visc": STICK_DAMPING}},
        "fingers": in_hand_paths([(0.01, 0.0), (0.01, 0.0)]),
        "object": BALL,
        "success": {"kind": "in_hand", "start": 1.2, "target": [0.01, 0.0], "tolerance": 0.003},
    }


@preset("palm_push", "regrasp: push a pencil into the palm while the grip is relaxed")
def palm_push():
    y = 0.055
    fingers = []
    for sx in (1.0, -1.0):
        w = [[0.0, sx * 0.018, y], [0.2, sx * 0.018, y], [0.8, 0.0, y], [1.2, 0.0, y],
             [2.4, 0.0, 0.03], [3.2, 0.0, 0.03]]
        fingers.append({"initial_tip": [sx * 0.018, y], "initial_frame": "hand",
                        "trajectory": {"kind": "PiecewiseLinear", "frame": "hand", "waypoints": w}})
    return {
        "name": "palm_push",
        "description": "Fingertips slide down a pinched pencil that is stopped by the palm.",
        "duration": 3.2,
        "gravity": [0.0, 0.0],
        "plant": {"contact": {"k_stick": STICK, "k_visc": STICK_DAMPING}},
        "fingers": fingers,
        "gain_schedule": [
            {"label": "push", "at": 1.2, "K": [50.0, 100.0]},
            {"label": "regrip", "at": 2.6, "K": [100.0, 100.0]},
        ],
        "object": {"shape": "ConvexPolygon", "vertices": box(-0.008, 0.008, -0.038, 0.038), "mass": 0.01,
                   "position": [0.0, 0.043], "mu": 0.5},
        "success": {"kind": "palm_push", "start": 1.2, "min_relative_rise": 0.004,
                    "min_normal_force": 0.2},
    }


@preset("coin_slide", "slide a coin off a table edge with one finger, then pinch it")
def coin_slide():
    # the hand sits beside a vertical table face (x <= -0.001); gravity
    # points into the table, so the coin lies on that face
    f0 = [[0.0, 0.009, 0.072], [0.3, -0.001, 0.072], [0.5, -0.001, 0.072],
          [1.0, -0.001, 0.0625], [3.0, -0.001, 0.0625]]
    f1 = [[0.0, -0.025, 0.0505], [1.5, -0.025, 0.0505], [2.2, 0.005, 0.0505], [3.0, 0.005, 0.0505]]
    return {
        "name": "coin_slide",
        "description": "Coin pickup: press-and-slide past the edge, then pinch from below.",
        "duration": 3.0,
        "gravity": [-9.81, 0.0],
        "plant": {"contact": {"k_stick": STICK, "k_visc": STICK_DAMPING}},
        "fingers": [
            {"initial_tip": [0.009, 0.072], "initial_frame": "hand",
             "trajectory": {"kind": "PiecewiseLinear", "frame": "hand", "waypoints": f0,
                            "K": [100.0, 300.0]}},
            {"initial_tip": [-0.025, 0.0505], "initial_frame": "hand",
             "trajectory": {"kind": "PiecewiseLinear", "frame": "hand", "waypoints": f1}},
        ],
        "object": {"shape": "ConvexPolygon", "vertices": box(-0.001, 0.001, -0.014, 0.014), "mass": 0.005,
                   "position": [0.0, 0.072], "mu": 1.0},
        "environment": [{"tag": "table", "vertices": box(-0.06, -0.001, 0.06, 0.12), "mu": 0.3}],
        "success": {"kind": "grasp", "min_normal_force": 0.2},
    }
