from fractions import Fraction as Fr

import pytest

from ssmcert.branching import BranchingMatrix
from ssmcert.certify import (CertificationFailure, WsmFailsCert, WsmHoldsCert, dh_closed_form,
                             find_test_vector, jacobian_majorant, perron_bound, threshold_estimate,
                             verify_wsm_fails, verify_wsm_holds, wsm_certify, wsm_refute)
from ssmcert.errors import InvalidParameterError
from ssmcert.recurrence import Cuboid, GridVector

DG_V = (Fr("0.685"), Fr("0.49"), Fr("0.5"))
DP_V = tuple(Fr(x) for x in (".537", ".422", ".456", ".337", ".385", ".069", ".128", ".201"))
DG_CUBOIDS = (
    Cuboid(GridVector.from_strings(["0.5483975", "0.4870566", "0.4178331"]),
           GridVector.from_strings(["0.5489575", "0.4874566", "0.4182131"])),
    Cuboid(GridVector.from_strings(["0.6927559", "0.5906225", "0.5236103"]),
           GridVector.from_strings(["0.6933359", "0.5910425", "0.5240703"])),
)


def test_majorant_entries(dg, dprime):
    assert jacobian_majorant(dg).symbolic(0, 1) == "2*x1^3*x2"
    assert jacobian_majorant(dprime).symbolic(7, 1) == "x8^2"
    assert jacobian_majorant(BranchingMatrix([[3]])).symbolic(0, 0) == "3*x1^4"
    assert jacobian_majorant(dg).symbolic(0, 2) == "0"


def test_perron_bound_basics():
    eye = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert perron_bound(eye, (1, 1, 1)) == 1
    with pytest.raises(InvalidParameterError):
        perron_bound(eye, (1, 0, 1))
    zero = [[0, 0], [0, 0]]
    v = find_test_vector(zero)
    assert all(x > 0 for x in v) and perron_bound(zero, v) == 0


def test_dg_certificate_with_reference_vector(dg):
    cert = wsm_certify(dg, "3.3", N=1000, test_vector=DG_V)
    assert isinstance(cert, WsmHoldsCert)
    assert cert.x_L.to_strings() == ["0.6234082", "0.5418325", "0.4728517"]
    assert cert.x_R.to_strings() == ["0.6234525", "0.5418642", "0.4728841"]
    assert cert.bound < Fr("0.9998")
    assert verify_wsm_holds(cert)


def test_dprime_certificate(dprime):
    cert = wsm_certify(dprime, "3.1", N=1000, test_vector=DP_V)
    assert cert and cert.bound < Fr("0.999")
    assert cert.x_L.to_strings()[:2] == ["0.6403710", "0.5012248"]
    auto = wsm_certify(dprime, "3.1")
    assert auto and auto.bound < 1


def test_found_vectors_work(dg, dh):
    assert wsm_certify(dg, "3.3").bound < 1
    assert wsm_certify(dh, "2.0")


def test_certificate_round_trip(dg):
    cert = wsm_certify(dg, "3.3")
    again = WsmHoldsCert.from_dict(cert.to_dict())
    assert again == cert and verify_wsm_holds(again)


def test_failure_is_structured(dh):
    res = wsm_certify(dh, "3.0")
    assert isinstance(res, CertificationFailure) and not res
    assert res.check in {"perron-bound", "invariant-box"}


def test_dg_refutation_with_reference_boxes(dg):
    cert = wsm_refute(dg, "3.4", cuboids=DG_CUBOIDS)
    assert isinstance(cert, WsmFailsCert)
    assert cert.left == DG_CUBOIDS[0]
    assert verify_wsm_fails(cert)
    assert WsmFailsCert.from_dict(cert.to_dict()) == cert


def test_auto_refutations(dg, dh):
    assert verify_wsm_fails(wsm_refute(dg, "3.4"))
    assert verify_wsm_fails(wsm_refute(dh, "3.4"))


def test_refutation_impossible_where_mixing_holds(dg):
    assert not wsm_refute(dg, "3.3")
    assert not wsm_refute(dg, "3.3", cuboids=DG_CUBOIDS)


def test_overlapping_boxes_rejected(dg):
    left = DG_CUBOIDS[0]
    res = wsm_refute(dg, "3.4", cuboids=(left, left))
    assert not res and res.check == "disjoint cuboids"


@pytest.mark.parametrize("lam,cls", [("3", "equal_1"), ("2", "below_1"), ("4", "above_1"),
                                     ("2.9", "below_1"), ("3.1", "above_1")])
def test_closed_form_classification(lam, cls):
    assert dh_closed_form(lam).classification == cls


def test_closed_form_at_three():
    cf = dh_closed_form(3)
    assert cf.x0 == Fr(2, 3) and cf.y0 == Fr(1, 2)


def test_closed_form_domain():
    with pytest.raises(InvalidParameterError):
        dh_closed_form(1)


def test_threshold_brackets(dh, dg):
    est = threshold_estimate(dh, "2.5", "3.5", "0.01")
    assert est.contains(3) and est.width <= Fr(2, 100)
    est = threshold_estimate(dg, "3.0", "3.5", "0.05")
    assert Fr("3.3") <= est.lo and est.hi <= Fr("3.4")
    assert est.lo_certified and est.hi_refuted
