import pytest

from qpseries.cancel import DenominatorData
from qpseries.model import (FrequencyVector, OperatorInstance, PotentialSpec,
                            golden_frequency, laplacian_kernel)


@pytest.fixture(scope="session")
def golden():
    return golden_frequency()


@pytest.fixture(scope="session")
def maryland(golden):
    return OperatorInstance(PotentialSpec("maryland_tan"), golden, 0.1, 0.05,
                            laplacian_kernel(1))


@pytest.fixture(scope="session")
def maryland_data(golden):
    return DenominatorData(beta=0.12, c_safe=1.0, frequency=golden)


@pytest.fixture(scope="session")
def engineered5():
    """Level-1 small denominator at site 5 (omega = 0.61), safedist 3."""
    fq = FrequencyVector.fit((0.61,), n_check=6)
    inst = OperatorInstance(PotentialSpec("maryland_tan"), fq, 0.05, 0.05,
                            laplacian_kernel(1), n_check=6)
    data = DenominatorData(beta=0.15, c_safe=3.0, frequency=fq)
    return inst, data


@pytest.fixture(scope="session")
def engineered3():
    """Small denominator at site 3 (omega = 0.335); classes appear at order 8."""
    fq = FrequencyVector.fit((0.335,), n_check=8)
    inst = OperatorInstance(PotentialSpec("maryland_tan"), fq, 0.07, 0.05,
                            laplacian_kernel(1), n_check=8)
    data = DenominatorData(beta=0.12, c_safe=0.375, frequency=fq)
    return inst, data


@pytest.fixture(scope="session")
def tiny5():
    """||5 omega|| = 1e-6: the cancellation showcase."""
    fq = FrequencyVector.fit((0.6 + 2e-7,), n_check=6)
    inst = OperatorInstance(PotentialSpec("maryland_tan"), fq, 0.05, 0.05,
                            laplacian_kernel(1), n_check=6)
    data = DenominatorData(beta=0.15, c_safe=0.8, frequency=fq)
    return inst, data


@pytest.fixture(scope="session")
def flat_instance(golden):
    spec = PotentialSpec("flat_segment", {"a": 0.0, "h": 0.012, "h1": 0.005})
    return OperatorInstance(spec, golden, 0.0, 0.05, laplacian_kernel(1))
