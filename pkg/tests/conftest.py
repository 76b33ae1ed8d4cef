import pytest

from fibrekit.verify import SuiteConfig, run_suite

SUITE_FAMILIES = ("abelian:k=1", "abelian:k=2", "hermitian:line-gaussian", "incomplete", "disk-nonholomorphic",
                  "flat-quotient:lambda=2")


@pytest.fixture(scope="session")
def suite_reports():
    """One run of every catalog suite, shared by the report and acceptance tests."""
    return {f: run_suite(SuiteConfig(f, samples=4, seed=13)) for f in SUITE_FAMILIES}
