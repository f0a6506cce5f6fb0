"""Optimal barrier as a function of c, q and mu.

beta* is the first level where v'_beta(beta-) falls to 1. We scan the three
parameters of the rational cost example and print the curves; the same data
is produced by `dualdiv sweep` as CSV.
"""
from dualdiv import find_beta_star, gamma, table1_params

print("c      beta*")
for c in (1.0, 1.4, 1.6, 2.0, 2.6, 3.0, 4.0, 4.5):
    print(f"{c:<6} {find_beta_star(table1_params(c=c)).beta_star:8.3f}")

print("\nq      beta*")
for q in (0.08, 0.09, 0.1, 0.12, 0.14, 0.15, 0.17):
    print(f"{q:<6} {find_beta_star(table1_params(q=q)).beta_star:8.3f}")

print("\nmu     beta*")
for mu in (0.005, 0.007, 0.01, 0.015, 0.017, 0.02, 0.025, 0.027, 0.27):
    rep = find_beta_star(table1_params(mu=mu))
    tag = "  (pay everything at once)" if rep.zero_barrier else ""
    print(f"{mu:<6} {rep.beta_star:8.3f}{tag}")

# the gamma curve behind one of the roots
params = table1_params()
print("\nbeta   gamma(beta)   (c=2)")
for b in (0.0, 5.0, 10.0, 20.0, 30.0, 32.0, 34.0, 37.1, 40.0):
    print(f"{b:6.2f} {gamma(params, b):9.4f}")
