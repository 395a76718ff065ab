"""Validation suite: every criterion the toolkit promises, with pinned
tolerances.  Each criterion returns a structured record so the CLI and
the test suite share one implementation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import compose, corpus, exprlang, oracle
from . import almost_analytic as aa
from . import phase as ph
from . import stationary as st
from . import symbol as sy
from .branch import branched_inv_sqrt_det
from .bumps import Bump
from .parallel import parallel_map


@dataclass
class CriterionResult:
    cid: int
    title: str
    passed: bool
    details: dict
    elapsed: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.cid}: {self.title}"

    def as_dict(self) -> dict:
        # elapsed excluded: reports must be byte-identical across runs
        return {"id": self.cid, "title": self.title, "passed": self.passed,
                "details": self.details}


def _plateau_cutoff(r_in=2.0, r_out=4.0):
    return Bump(center=(0.0,), r_in=r_in, r_out=r_out)


def criterion_1() -> CriterionResult:
    """Gaussian exactness at t = 100."""
    lay = exprlang.VarLayout.make(x=1)
    p = st.SPProblem(exprlang.parse("i*x1^2/2"), lay, _plateau_cutoff())
    exp = st.leading_term(p)
    t = 100.0
    want = np.sqrt(2 * np.pi / t)
    lead = exp.leading(t)
    spec = oracle.QuadratureSpec(box=p.oracle_box())
    val = oracle.osc_integral(p.F, p.cutoff, t, spec, layout=p.x_layout())
    lead_err = abs(lead - want) / want
    orc_err = abs(val - lead) / abs(lead)
    return CriterionResult(
        1, "gaussian leading term and oracle at t=1e2",
        bool(lead_err <= 1e-12 and orc_err <= 1e-8),
        {"leading": complex(lead), "closed_form": float(want),
         "leading_rel_err": lead_err, "oracle_rel_err": orc_err})


def criterion_2() -> CriterionResult:
    """Fresnel branch factors e^{+-i pi/4} and oracle agreement at t=1e3."""
    t = 1e3
    details = {}
    ok = True
    for sign, name in ((1.0, "plus"), (-1.0, "minus")):
        lay = exprlang.VarLayout.make(x=1)
        src = "x1^2/2" if sign > 0 else "-x1^2/2"
        p = st.SPProblem(exprlang.parse(src), lay, _plateau_cutoff())
        exp = st.leading_term(p)
        factor = exp.C0 / np.sqrt(2 * np.pi)
        want = np.exp(sign * 1j * np.pi / 4)
        branch_err = abs(factor - want)
        spec = oracle.QuadratureSpec(box=p.oracle_box())
        val = oracle.osc_integral(p.F, p.cutoff, t, spec, layout=p.x_layout())
        orc_err = abs(val - exp.leading(t)) / abs(exp.leading(t))
        details[name] = {"branch_factor": complex(factor),
                         "branch_err": branch_err, "oracle_rel_err": orc_err}
        ok = ok and branch_err <= 1e-10 and orc_err <= 2e-2
    return CriterionResult(2, "fresnel branch factors at t=1e3", bool(ok),
                           details)


def criterion_3() -> CriterionResult:
    """Remainder order -(n/2+1) for three n=1 phases."""
    cases = [
        ("real", "x1^2/2 + x1^3/6", _plateau_cutoff(1.0, 2.0)),
        ("damping", "i*x1^2/2",
         Bump(center=(0.0,), r_in=1.5, r_out=3.0, profile="gauss",
              scale=0.75)),
        ("mixed", "(1+i)*x1^2/2 + x1^3/6", _plateau_cutoff(1.0, 2.0)),
    ]

    def run(case):
        name, src, cutoff = case
        lay = exprlang.VarLayout.make(x=1)
        p = st.SPProblem(exprlang.parse(src), lay, cutoff)
        rep = st.remainder_order(p)
        return name, rep

    details = {}
    ok = True
    for name, rep in parallel_map(run, cases):
        slope = rep.fit.slope if rep.fit else None
        good = (not rep.at_noise_floor and slope is not None
                and abs(slope - rep.expected_slope) <= 0.15)
        details[name] = {"slope": slope, "expected": rep.expected_slope,
                         "at_noise_floor": rep.at_noise_floor}
        ok = ok and good
    return CriterionResult(3, "remainder order -(n/2+1) on three phases",
                           bool(ok), details)


def criterion_4() -> CriterionResult:
    """d-bar flatness slopes >= K - 0.1 for exp/sin at K in {4, 6, 8}."""
    lay = exprlang.VarLayout.make(x=1)
    details = {}
    ok = True
    for src in ("exp(x1)", "sin(x1)"):
        for K in (4, 6, 8):
            rep = aa.dbar_order(aa.extend(exprlang.parse(src), lay, K=K),
                                [0.3])
            good = rep.passed(K - 0.1)
            details[f"{src}/K={K}"] = {"exact": rep.exact, "slope": rep.slope}
            ok = ok and good
    return CriterionResult(4, "dbar flatness slope >= K - 0.1", bool(ok),
                           details)


def criterion_5() -> CriterionResult:
    """Branch invariants on random valid Hessians."""
    rng = np.random.default_rng(17)

    def rand_h(k):
        S = rng.normal(size=(k, k))
        S = 0.5 * (S + S.T)
        R = rng.normal(size=(k, k))
        return S + 1j * (R @ R.T + (0.3 + rng.uniform()) * np.eye(k))

    worst_inv = 0.0
    for _ in range(100):
        H = rand_h(int(rng.integers(1, 7)))
        worst_inv = max(worst_inv, branched_inv_sqrt_det(H).verify())
    worst_conj = 0.0
    worst_block = 0.0
    for _ in range(50):
        H = rand_h(int(rng.integers(1, 5)))
        a = branched_inv_sqrt_det(H).value
        b = branched_inv_sqrt_det(-np.conj(H)).value
        worst_conj = max(worst_conj, abs(b - np.conj(a)) / abs(a))
        H2 = rand_h(int(rng.integers(1, 4)))
        k1, k2 = H.shape[0], H2.shape[0]
        HB = np.zeros((k1 + k2, k1 + k2), dtype=complex)
        HB[:k1, :k1] = H
        HB[k1:, k1:] = H2
        prod = a * branched_inv_sqrt_det(H2).value
        worst_block = max(worst_block,
                          abs(branched_inv_sqrt_det(HB).value - prod)
                          / abs(prod))
    ok = worst_inv <= 1e-10 and worst_conj <= 1e-10 and worst_block <= 1e-10
    return CriterionResult(
        5, "branch invariants (inverse-square, conjugation, blocks)",
        bool(ok), {"worst_inverse_square": worst_inv,
                   "worst_conjugation": worst_conj,
                   "worst_block_additivity": worst_block})


def criterion_6() -> CriterionResult:
    """Pairing consistency for phi = x theta across psi choices."""
    lay = exprlang.VarLayout.make(x=1, theta=1)
    patch = ph.ConicPatch(x_box=((-0.5, 0.5),), theta_direction=(1.0,),
                          theta_angle=0.2, theta_radius=(0.5, 2.0))
    phi = ph.PhaseFunction(exprlang.parse("x1*theta1"), lay, patch)
    cp = ph.find_critical(phi)
    cls = ph.classify(phi, [cp])
    amp = sy.Amplitude(exprlang.parse("1"), 0.0)
    cutoff = Bump(center=(0.0,), r_in=0.25, r_out=0.45)
    t_grid = (1e2, 10**2.33, 10**2.66, 1e3)

    def run(lam):
        psi = sy.make_psi(phi, cp, lam=lam, classification=cls)
        rep = sy.pairing_T(phi, amp, psi, cutoff, t_grid, classification=cls)
        return lam, rep

    details = {}
    ok = True
    sqrt_vals = {}
    for lam, rep in parallel_map(run, (0.5, 1.0, 2.0)):
        good = all(rel <= 10.0 / t for t, rel in zip(t_grid, rep.rel_errors))
        details[f"lambda={lam}"] = {
            "rel_errors": list(rep.rel_errors),
            "fitted_order": rep.fitted_order,
            "predicted_order": rep.predicted_order}
        sqrt_vals[lam] = rep.sqrt_dphi_value
        ok = ok and good
    # transition determinant identity across two psi choices
    psis = {lam: sy.make_psi(phi, cp, lam=lam, classification=cls)
            for lam in (0.5, 2.0)}
    sqs = {lam: sy.sqrt_dphi(phi, cls, cp, p) for lam, p in psis.items()}
    ident = ((sqs[0.5].value / sqs[2.0].value) ** 2
             * np.linalg.det(sqs[0.5].matrix) / np.linalg.det(sqs[2.0].matrix))
    trans_err = abs(ident - 1.0)
    details["transition_identity_err"] = trans_err
    ok = ok and trans_err <= 1e-10
    return CriterionResult(6, "pairing matches oracle within 10/t; "
                              "transition identity", bool(ok), details)


def criterion_7() -> CriterionResult:
    """Excess detection: e=0 pseudodiff, e=1 pushforward and dummy pairs."""
    details = {}
    ok = True
    for name, maker, want in (("pseudodiff", corpus.pseudodiff_pair, 0),
                              ("pushforward_pullback",
                               corpus.pushforward_pullback_pair, 1),
                              ("dummy_frequency",
                               corpus.dummy_frequency_pair, 1)):
        plan = maker()
        cls = compose.intersection_excess(plan, n_random=10)
        stable = len(set(cls.ranks)) == 1
        details[name] = {"excess": cls.excess, "ranks": list(cls.ranks),
                         "kind": cls.kind}
        ok = ok and cls.excess == want and stable
    return CriterionResult(7, "excess detection stable over 10 samples",
                           bool(ok), details)


def criterion_8(t_grid=(30.0, 56.0, 100.0, 178.0, 316.0)) -> CriterionResult:
    """Composed order m1 + m2 + e/2 from oracle decay fits."""
    def run(maker):
        plan = maker()
        compose.intersection_excess(plan)
        cp = plan.stationary_points[0]
        rep = compose.pairing_decay(plan, cp, t_grid)
        fitted_order = rep.fit.slope + plan.n / 4
        return plan, rep, fitted_order

    details = {}
    ok = True
    for name, maker in (("pseudodiff_e0", corpus.pseudodiff_pair),
                        ("pushforward_pullback_e1",
                         corpus.pushforward_pullback_pair),
                        ("dummy_frequency_e1", corpus.dummy_frequency_pair)):
        plan, rep, fitted = run(maker)
        want = compose.composed_order(plan.m1, plan.m2,
                                      plan.classification.excess)
        details[name] = {"fitted_order": fitted, "predicted_order": want,
                         "slope": rep.fit.slope}
        ok = ok and abs(fitted - want) <= 0.15
    return CriterionResult(8, "composed order m1+m2+e/2 within 0.15",
                           bool(ok), details)


def criterion_9() -> CriterionResult:
    """Transverse/clean agreement and the chi-ratio test."""
    plan = corpus.pseudodiff_pair()
    cls = compose.intersection_excess(plan)
    cp = plan.stationary_points[0]
    psi = sy.make_psi(plan.phi, cp, classification=cls)
    direct = sy.principal_symbol(plan.phi, plan.amplitude, cls, cp, psi)
    fiber = sy.principal_symbol(plan.phi, plan.amplitude, cls, cp, psi,
                                force_fiber_path=True)
    path_err = abs(direct.value - fiber.value) / abs(direct.value)

    plan_a = corpus.pushforward_pullback_pair(chi_width=0.6)
    plan_b = corpus.pushforward_pullback_pair(chi_width=0.3)
    va = compose.composed_symbol(
        plan_a,
        compose.intersection_excess(plan_a) and plan_a.stationary_points[0],
        fiber_box={"y2": (-0.75, 0.75)})
    vb = compose.composed_symbol(
        plan_b,
        compose.intersection_excess(plan_b) and plan_b.stationary_points[0],
        fiber_box={"y2": (-0.75, 0.75)})
    ratio_err = abs(va.value / vb.value - 2.0)
    ok = path_err <= 1e-10 and ratio_err <= 1e-6
    return CriterionResult(
        9, "transverse/clean code paths agree; chi ratio 2:1", bool(ok),
        {"two_path_rel_err": path_err, "chi_ratio_err": ratio_err,
         "sigma_identity_like": complex(direct.value)})


def criterion_10() -> CriterionResult:
    """Determinism: identical pipeline twice, byte-identical report."""
    from . import reports
    from .service import handlers

    cfg = """
[phase]
expr = x1*theta1 + i*norm(theta)*x1^2/2
layout = x:1, theta:1
x_box = -0.5..0.5
theta_direction = 1
"""
    outs = []
    for _ in range(2):
        code, report = handlers.run_command("analyze", cfg, seed=0, threads=1)
        outs.append(reports.canonical_json(report))
    same = outs[0] == outs[1]
    return CriterionResult(10, "byte-identical reports on identical input",
                           bool(same), {"bytes": len(outs[0]),
                                        "identical": same})


ALL_CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10,
}


def run_criteria(ids=None) -> list[CriterionResult]:
    ids = sorted(ids) if ids else sorted(ALL_CRITERIA)
    out = []
    for cid in ids:
        if cid not in ALL_CRITERIA:
            raise KeyError(f"no criterion {cid}")
        start = time.perf_counter()
        res = ALL_CRITERIA[cid]()
        res.elapsed = time.perf_counter() - start
        out.append(res)
    return out
