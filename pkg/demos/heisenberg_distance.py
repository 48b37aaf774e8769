# Carnot-Caratheodory distance on the first Heisenberg group H_1.
# Compares the closed form with a direct geodesic minimisation and shows
# where the Kaplan norm's horizontal gradient vanishes.
import numpy as np

from coercive import geometry as G

H1 = G.Space.heisenberg(1)

# distance to points on the center axis grows like sqrt(4 pi |z|)
for z in (0.01, 0.1, 1.0):
    d = float(G.cc_distance(H1, np.array([0.0, 0.0, z])))
    print(f"z={z:5.2f}  d={d:.6f}  sqrt(4 pi z)={np.sqrt(4 * np.pi * z):.6f}")

# closed form vs. numerical oracle at a generic point
g = np.array([0.3, -0.7, 0.4])
print("closed form", float(G.cc_distance(H1, g)))
print("oracle     ", G.cc_distance_oracle(H1, g))

# |grad_H d| = 1 away from the center axis; |grad_H N_K| can be zero
_, gd = G.distance_gradient(H1, g)
print("|grad d|   ", float(np.linalg.norm(gd)))
scan = G.gradient_vanishing_scan(H1, norm="kaplan")
print("kaplan scan", scan)
