# Invariant exterior calculus on su(2) + u(1), extended by dt.
#
# The five basis one-forms are e1..e4 on the group and dt on the
# interval; the derivative is fixed by de1 = -e23 (cyclically) and
# de4 = 0 = d(dt).  Everything here is exact when the coefficients are.

from fractions import Fraction as F

from esasaki.exterior import DT, E1, E2, E3, E4, d_invariant, monomial, wedge

print("structure equations:")
for name, form in (("e1", E1), ("e2", E2), ("e3", E3), ("e4", E4), ("dt", DT)):
    print(f"  d{name} = {d_invariant(form)}")

# wedge products are graded-antisymmetric and associative
a = F(1, 3) * E1 + E4
b = wedge(E2, E3)
print("\n(e1/3 + e4) ^ e23 =", wedge(a, b))
print("e23 ^ (e1/3 + e4) =", wedge(b, a), "  (2-form and 1-form commute)")
print("e1 ^ e1 =", wedge(E1, E1))

# the derivative is a complex: d(d(anything)) = 0 exactly
w = wedge(E1 + 2 * E2, E3 + F(1, 7) * E4) + monomial(2, 4)
print("\nw        =", w)
print("dw       =", d_invariant(w))
print("d(dw)    =", d_invariant(d_invariant(w)))

# the graded Leibniz rule, checked on a sample pair
lhs = d_invariant(wedge(a, w))
rhs = wedge(d_invariant(a), w) + (-1) ** a.degree * wedge(a, d_invariant(w))
print("\nLeibniz defect:", (lhs - rhs).norm())

# forms serialize with the lexicographic monomial order, dt indexed last
print("\nJSON:", w.dumps())
