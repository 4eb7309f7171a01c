from dataclasses import replace

import numpy as np
import pytest

from conftest import NAMES
from impgap.model import ProblemSpec, integrate
from impgap.qualifications import (
    QualificationOptions,
    active_window,
    check_all,
    check_cna,
    check_cqn,
    contact_nodes,
    no_gap_verdict,
)

EXPECTED = {
    "example-4.1": {"CNa": "holds", "CQn_b": "holds", "TQn_b": "holds"},
    "example-4.2": {"CNa": "holds", "CQn_b": "fails", "CQn_f": "fails", "TQn_b": "fails", "TQn_f": "fails"},
    "example-4.3": {"CNa": "fails"},
}


def _wall_problem(drift_sign=-1.0):
    """Scalar state below the wall ``x <= 1``; the drift ``drift_sign * a`` with ``a in {0, 1}``."""
    return ProblemSpec.from_json(
        {
            "n": 1,
            "m": 1,
            "q": 1,
            "drift": [{"terms": [[drift_sign, [0, 0, 1]]]}],
            "impulse": [[{"const": 1.0}]],
            "constraints": [{"smooth": {"terms": [[1.0, [0, 1]], [-1.0, [0, 0]]]}}],
            "cost": {"const": 0.0},
            "target": {"box": {"lo": [0, 0, None, None], "hi": [0, 0, None, None]}},
            "cone": {"full": 1},
            "controls": {"finite": [[0.0], [1.0]]},
        }
    )


def _climb_and_rest(problem, M=40, x0=0.0):
    """Impulse up to the wall on ``[0, 1]``, then rest on it with ``a = 0``."""
    s = np.linspace(0, 2, M + 1)
    w0 = np.where(s[:-1] < 1, 0.0, 1.0)
    return integrate(problem, s, w0, (1 - w0)[:, None], np.zeros((M, 1)), 0.0, [x0])


@pytest.mark.parametrize("name", NAMES)
def test_fixture_statuses(results, name):
    rep = results.qualifications(name)
    for key, status in EXPECTED[name].items():
        assert rep[key].status == status, (key, rep[key].to_json())
    for entry in rep.entries.values():
        assert entry.status in ("holds", "fails", "inconclusive")
        if entry.status == "holds":
            assert entry.margin > QualificationOptions().delta


def test_third_fixture_fails_everything(results):
    rep = results.qualifications("example-4.3")
    assert all(e.status == "fails" for e in rep.entries.values())


def test_verdicts(results):
    v1 = no_gap_verdict(results.problem("example-4.1"), results.reference("example-4.1"), results.qualifications("example-4.1"))
    assert (v1.verdict, v1.route) == ("NO-GAP-CERTIFIED", "qualifications-b")
    assert set(v1.premises) == {"CNa", "CQn_b", "TQn_b"}
    assert all(p["status"] == "holds" for p in v1.premises.values())

    pb2, ref2 = results.problem("example-4.2"), results.reference("example-4.2")
    assert no_gap_verdict(pb2, ref2, results.qualifications("example-4.2")).verdict == "INCONCLUSIVE"
    v2 = no_gap_verdict(pb2, ref2, results.qualifications("example-4.2"), results.classified("example-4.2"))
    assert (v2.verdict, v2.route) == ("NO-GAP-CERTIFIED", "normality")

    v3 = no_gap_verdict(results.problem("example-4.3"), results.reference("example-4.3"), results.qualifications("example-4.3"), results.classified("example-4.3"))
    assert v3.verdict == "GAP-POSSIBLE"
    assert v3.certificate is not None and v3.certificate["lam"] == 0.0


@pytest.mark.parametrize("name", NAMES)
def test_window_positivity_at_contacts(results, name):
    pb, ref = results.problem(name), results.reference(name)
    opts = QualificationOptions()
    for k in contact_nodes(pb, ref, opts.contact_tol):
        if k == 0:
            continue
        for d in opts.eps_divisors:
            cells = active_window(pb, ref, ref.s[k], ref.S / d, "backward")
            assert ref.ds[cells].sum() > 0, (name, k, d)


def test_interior_trajectory_holds_vacuously():
    pb = _wall_problem()
    M = 20
    proc = integrate(pb, np.linspace(0, 1, M + 1), np.ones(M), np.zeros((M, 1)), np.zeros((M, 1)), 0.0, [0.0])
    assert contact_nodes(pb, proc).size == 0
    for direction in ("backward", "forward"):
        for variant in ("full", "primed", "smooth"):
            e = check_cqn(pb, proc, direction, variant)
            assert e.status == "holds" and e.margin == float("inf")
            assert e.witnesses == {"contacts": []}
    cna = check_cna(pb, proc)
    assert cna.holds


def test_smooth_variant_implies_full_variant():
    for sign in (-1.0, 1.0):
        pb = _wall_problem(sign)
        proc = _climb_and_rest(pb)
        for direction in ("backward", "forward"):
            smooth = check_cqn(pb, proc, direction, "smooth")
            full = check_cqn(pb, proc, direction, "full")
            if smooth.holds:
                assert full.holds
    rep = check_all(_wall_problem(), _climb_and_rest(_wall_problem()))
    assert rep["CQn_b_smooth"].holds and rep["CQn_b"].holds and rep["CQn_b_primed"].holds


def test_raising_the_margin_threshold_only_removes_holds():
    pb = _wall_problem()
    proc = _climb_and_rest(pb)
    previous = None
    for delta in (1e-6, 1e-4, 0.5, 0.99, 1.5, 10.0):
        rep = check_all(pb, proc, replace(QualificationOptions(), delta=delta))
        holds = {k for k, e in rep.entries.items() if e.holds}
        if previous is not None:
            assert holds <= previous
        previous = holds
    assert "CQn_b" not in previous


def test_window_is_nonempty_below_the_cell_width():
    pb = _wall_problem()
    proc = _climb_and_rest(pb)
    k = int(np.argmin(np.abs(proc.s - 1.0)))
    cells = active_window(pb, proc, proc.s[k], 0.1 * proc.ds[0], "backward")
    assert cells.size == 1 and cells[0] == k - 1
