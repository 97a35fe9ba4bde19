"""From a coframe to its classifying algebroid.

theta1 = dx, theta2 = x dy has one invariant h = 1/x.  The structure
function and its coframe derivatives are rewritten in terms of h, and the
result is checked against the coframe.
Run with ``python demos/coframe_invariants.py``.
"""

from cartan import symexpr as sx
from cartan.coframe import derive_classifying_algebroid, invariant_tower, structure_functions, verify_classifying_data
from cartan.catalog import rank2_coframe
from cartan.mcform import AValuedOneForm, mc_check


def main():
    theta = rank2_coframe()
    C = structure_functions(theta)
    print("C^2_12 =", C[1][0][1])

    tower = invariant_tower(theta, s_max=2)
    print("ranks by order:", tower.ranks, " invariants:", [str(g) for g in tower.generators])

    A, cert = derive_classifying_algebroid(theta, tower, h_names=["h"])
    print("bracket C^2_12 =", A.C[1][0][1], " anchor F =", [str(e) for e in A.F[0]])
    print("certificate:", cert.status)

    chk = verify_classifying_data(theta, tower.generators, A)
    print("classifying data residuals:", chk.structure.verdict, chk.anchor.verdict)

    # the same data read as an A-valued form solving the Maurer-Cartan equation
    eta = AValuedOneForm(theta.chart, tower.generators, theta.a)
    print("Maurer-Cartan check:", mc_check(eta, A).status)
    bad = eta.mutate(1, 1, sx.parse_expr("y"))
    rep = mc_check(bad, A)
    print("after a mutation:", rep.status, "witness", rep.residual.witness)


if __name__ == "__main__":
    main()
