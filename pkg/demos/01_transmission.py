"""Differential transmission and finger kinematics.

Two motors drive two joints: their sum bends the distal joint and their
difference swings the proximal one. This walk-through shows the angle and
torque maps, the fingertip Jacobian and the reachable workspace.
"""
# %%
import numpy as np

from qddsim.transmission import (FingerGeometry, TorqueMapMode, TransmissionParams,
                                 forward_kinematics, jacobian, joint_to_motor,
                                 joint_torque_to_motor_torque, motor_to_joint, sample_workspace)

tx = TransmissionParams(2.57, 1.0)
print("motor (2.57, -2.57) rad ->", motor_to_joint((2.57, -2.57), tx), "joint rad")
print("joint (0, 2) rad        ->", joint_to_motor((0.0, 2.0), tx), "motor rad")

# %% The literal torque map is twice the power-consistent one.
energy = TransmissionParams(2.57, 1.0, TorqueMapMode.ENERGY_CONSISTENT)
print("literal map:\n", tx.torque_matrix())
print("energy-consistent map:\n", energy.torque_matrix())
print("1 N m on joint 1 needs", joint_torque_to_motor_torque((1.0, 0.0), tx), "N m at the motors")

# %% Tip position and Jacobian for l1 = 5 cm, l2 = 4 cm.
geom = FingerGeometry()
theta = np.array([np.pi / 3, np.pi / 4])
print("tip", forward_kinematics(theta, geom), "m")
print("J\n", jacobian(theta, geom))

# %% Sampled workspace: inside the annulus |l1 - l2| .. l1 + l2, trimmed by the joint limits.
pts = sample_workspace(geom, 60)
r = np.hypot(pts[:, 0], pts[:, 1])
print(f"{len(pts)} samples, radius {r.min():.4f} .. {r.max():.4f} m")
