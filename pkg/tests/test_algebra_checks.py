import json

import numpy as np
import pytest

from monopole_algebra.algebra_checks import (BuildContext, GridSpec, Identity, IdentitySuite, Mutation, SuiteError,
                                             builtin_suites, get_suites, run_suite, run_suites)
from monopole_algebra.fields import make_grid
from monopole_algebra.monopole import PhysicalParams
from monopole_algebra.operators import SLOTS, coefficient_values, cross

COARSE = GridSpec(6, 12)

# every operator label a builder can hand out
MUTATION_TARGETS = (
    [f"grad_{a}" for a in "xyz"] + [f"grad_par_{a}" for a in "xyz"] + [f"grad_par_sym_{a}" for a in "xyz"]
    + [f"grad_perp_{a}" for a in "xyz"] + [f"grad_perp_sym_{a}" for a in "xyz"]
    + [f"Pi_{a}" for a in "xyz"] + [f"Pi(A)_{a}" for a in "xyz"] + [f"L(A)_{a}" for a in "xyz"]
    + [f"L_{a}" for a in "xyz"] + [f"rPi_{a}" for a in "xyz"] + [f"A_{a}" for a in "xyz"]
    + ["Lz_north", "Lz_south", "r^2", "Lambda"]
)


def _suite(name):
    return get_suites([name])[0]


def test_builtin_suites_cover_the_identities_once():
    suites = builtin_suites()
    assert len(suites) >= 6
    labels = [i.label for s in suites for i in s.identities]
    assert len(labels) == len(set(labels))
    for s in suites:
        assert s.identities
        assert all(i.paper_eq.startswith("Eq.") for i in s.identities)


def test_decomposition_suite_compares_gradient_componentwise():
    s = _suite("decomposition")
    labels = [i.label for i in s.identities if i.label.startswith("grad == ")]
    assert labels == ["grad == grad_par + grad_perp_x", "grad == grad_par + grad_perp_y",
                      "grad == grad_par + grad_perp_z"]
    rep = run_suite(s)
    assert rep.passed and len(rep.entries) == len(s.identities)


def test_so3_without_monopole_passes():
    rep = run_suite(_suite("so3"), mus=[0.0])
    assert rep.passed and len(rep.entries) == 3 * 2


def test_so31_monopole_half_north():
    rep = run_suite(_suite("so31_monopole"), mus=[0.5], gauges=["north"])
    assert rep.passed
    assert len(rep.entries) == 15
    assert max(e.report.max_abs_residual for e in rep.entries) <= 1e-9


def test_default_sweep_shape():
    s = _suite("transversality")
    rep = run_suite(s)
    assert len(rep.entries) == len(s.identities) * 4 * 2
    mus = sorted({e.report.params["mu"] for e in rep.entries})
    assert mus == [0.0, 0.5, 1.0, 1.5]


def test_corrupted_identity_fails_by_the_corruption():
    params = PhysicalParams.from_mu(0.0)
    ident = Identity("L x L == 1.01 i hbar L", lambda c: cross(c.ang(), c.ang())[2],
                     lambda c: c.ang()[2] * (1.01j * c.hbar), "Eq. (16)")
    rep = run_suite(IdentitySuite("corrupt", [ident], [params], (None,)))
    assert not rep.passed
    ctx = BuildContext(params)
    g = make_grid(20, 40)
    vals = coefficient_values(ctx.ang()[2], g.points)
    size = max(np.abs(v).max() for v in vals.values())
    assert rep.entries[0].report.max_abs_residual == pytest.approx(0.01 * size, rel=1e-9)


def test_builder_failure_is_a_failed_entry():
    def broken(ctx):
        raise RuntimeError("boom")
    ident = Identity("broken", broken, broken, "Eq. (0)")
    rep = run_suite(IdentitySuite("b", [ident], [PhysicalParams()], (None,)))
    e = rep.entries[0]
    assert not e.passed and "boom" in e.report.error
    # a gauged operator without a patch is a builder failure too
    ident = Identity("needs gauge", lambda c: c.pi()[0], lambda c: c.pi()[0], "Eq. (0)")
    rep = run_suite(IdentitySuite("g", [ident], [PhysicalParams.from_mu(0.5)], (None,)))
    assert "GaugeError" in rep.entries[0].report.error


def test_reports_are_deterministic_and_sorted():
    a = run_suites(get_suites(["so3", "lz_forms"]), grid=COARSE)
    b = run_suites(get_suites(["lz_forms", "so3"]), grid=COARSE)
    ja = json.dumps(a.to_dict(), sort_keys=True)
    assert ja == json.dumps(b.to_dict(), sort_keys=True)
    keys = [e.sort_key() for e in a.entries]
    assert keys == sorted(keys)


def test_tolerance_floor_demonstration():
    rep = run_suite(_suite("so31_monopole"), mus=[1.5], gauges=["north"], tolerance=1e-15)
    assert not rep.passed
    assert all(np.isfinite(e.report.max_abs_residual) for e in rep.failures())


def test_get_suites():
    assert len(get_suites(["all"])) == len(builtin_suites())
    assert [s.name for s in get_suites(["so3", "so3"])] == ["so3"]
    with pytest.raises(SuiteError):
        get_suites(["so32"])


def test_mutation_parse():
    m = Mutation.parse("Pi(A)_x:theta:1e-4")
    assert (m.target, m.slot, m.eps) == ("Pi(A)_x", "theta", 1e-4)
    assert Mutation.parse("r^2").slot == "mult"
    with pytest.raises(SuiteError):
        Mutation.parse("Pi_x:psi")
    with pytest.raises(SuiteError):
        Mutation.parse(":theta")


@pytest.mark.parametrize("target", MUTATION_TARGETS)
def test_every_single_coefficient_mutation_is_caught(target):
    suites = builtin_suites()
    for slot in SLOTS:
        mut = Mutation(target, slot, 1e-3)
        caught = any(not run_suite(s, mus=[0.5], gauges=["north"], grid=COARSE, mutation=mut).passed
                     for s in suites)
        assert caught, (target, slot)


def test_unmutated_coarse_run_passes():
    assert run_suites(builtin_suites(), mus=[0.5], grid=COARSE).passed
