"""Force and form closure of planar grasps.

Two frictional contacts close a grasp when the line between them lies inside
both friction cones. Form closure ignores friction and needs at least four
contacts whose unit wrenches positively span the plane's wrench space.
"""
# %%
from qddsim.closure import force_closure_2contact, form_closure
from qddsim.contact import ContactPoint

for mu in (0.0, 0.1, 0.3):
    a = ContactPoint((0.02, 0.0), (-1.0, 0.0), mu)
    b = ContactPoint((-0.02, 0.003), (1.0, 0.0), mu)
    print(f"pinch with mu = {mu}: force closure {force_closure_2contact(a, b)}")

# %% Square midpoints cannot resist a pure torque, five well-placed contacts can.
midpoints = [ContactPoint((1, 0), (-1, 0)), ContactPoint((-1, 0), (1, 0)),
             ContactPoint((0, 1), (0, -1)), ContactPoint((0, -1), (0, 1))]
five = [ContactPoint((1, -1), (0, 1)), ContactPoint((-1, -1), (0, 1)),
        ContactPoint((1, 0.5), (-1, 0)), ContactPoint((-0.5, 1), (0, -1)),
        ContactPoint((-1, 0), (1, 0))]
print("square midpoints:", bool(form_closure(midpoints)))
res = form_closure(five)
print("five contacts:", bool(res), "certificate", res.certificate.round(4))
