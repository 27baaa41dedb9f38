"""
Parabolic cylinder functions
============================

Near a linear turning point the dual problems are solved by parabolic
cylinder functions U(a, x) and V(a, x).  Plain values leave double precision
quickly, so the solver works with scaled pairs U e^{x^2/4}, V e^{-x^2/4}
and keeps the exponents separately.
"""

import math

from tpgfem.pcf import asymptotic_switch, pcf_eval, pcf_scaled

for a in (-1.5, 0.0, 0.7, 3.0):
    c0 = asymptotic_switch(a)
    print(f"a = {a:5.2f}: asymptotic forms from x = {c0:.2f}")
    for x in (-2.0, 0.0, 1.0, 5.0, c0 + 1.0):
        v = pcf_eval(a, x)
        w = v.u * v.dv - v.du * v.v
        print(f"   x = {x:6.2f}  U = {v.u: .6e}  V = {v.v: .6e}  W - sqrt(2/pi) = "
              f"{w - math.sqrt(2 / math.pi): .1e}  [{v.regime}]")

# far out only the scaled representation is finite
s = pcf_scaled(0.3, 400.0)
print("log U(0.3, 400) =", math.log(s.u) + s.u_exp)
