from kirlab.verify import CHECKS, check_fixtures, check_infrastructure, check_nonexistence, run_verify


def test_fixture_check():
    passed, details = check_fixtures()
    assert passed
    assert set(details) == {"two_branch", "supercritical", "resonant", "tangent"}


def test_infrastructure_check():
    passed, details = check_infrastructure()
    assert passed, details


def test_run_selected_checks():
    passed, results = run_verify(only=["closed_form_roots", "regime_classification"])
    assert passed
    assert [r["name"] for r in results] == ["regime_classification", "closed_form_roots"]
    assert len(CHECKS) == 9


def test_nonexistence_check_has_converging_control():
    passed, details = check_nonexistence()
    assert passed, details
    converged = [cell for cell in details.values() if cell["outcome"] == "converged"]
    assert len(converged) == 1
    assert converged[0]["roots"] == 2
    assert converged[0]["branch_error"] <= 1e-6
