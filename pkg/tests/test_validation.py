import pytest

from vblastlab import analytic as an
from vblastlab import validation as val
from vblastlab.analytic import BFSK, BPSK


class TestCheck:
    @pytest.mark.parametrize("value, threshold, relation, passed", [
        (1e-13, 1e-12, "<=", True), (1e-11, 1e-12, "<=", False),
        (0.5, 0.1, ">", True), (0.1, 0.1, ">", False),
        (1.0, (0.95, 1.05), "in", True), (1.1, (0.95, 1.05), "in", False),
    ])
    def test_verdict(self, value, threshold, relation, passed):
        assert val.Check("c", value, threshold, relation).passed is passed

    def test_unknown_relation(self):
        with pytest.raises(ValueError):
            val.Check("c", 1.0, 1.0, "==")


class TestOracles:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_order_statistic_cdf(self, n):
        for x in (0.0, 0.3, 2.0):
            assert val.step1_cdf_order_statistic(n, x) == pytest.approx(
                an.outage_cdf_step1(n, x), abs=1e-10)

    @pytest.mark.parametrize("mod", [BFSK, BPSK])
    def test_quadrature_mrc(self, mod):
        for n in (1, 3):
            ref = val.quadrature_ber(mod, lambda x: an.mrc_outage_cdf(n, x), 10.0)
            assert ref == pytest.approx(an.ber_mrc(mod, n, 10.0), abs=1e-10)


def test_report_serialization():
    report = val.run_validation(statistical=False)
    clone = val.ValidationReport.from_json(report.to_json())
    assert clone.to_dict() == report.to_dict()
    assert report.passed and not report.failures


def test_fault_injection_detected():
    c = an.coefficients(2)
    report = val.run_validation(overrides={2: c.with_a(1, c.a[1] + 1e-3)}, statistical=False)
    failed = {ch.name for ch in report.failures}
    assert "step1_cdf_order_statistic_n2" in failed
    assert "bpsk_n2_step1_explicit_form" in failed
    assert not any("_n3" in name for name in failed)


@pytest.mark.slow
def test_default_run_passes():
    report = val.run_validation()
    assert report.trials == val.DEFAULT_TRIALS
    assert report.passed, [(c.name, c.value, c.threshold) for c in report.failures]
