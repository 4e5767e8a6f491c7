import numpy as np
import pytest

from qpkdv.lattice import FrequencyVector, TruncationBox

SQRT2 = "1.4142135623730950488016887242096980785696718753769480731766797379907324784621070388503875343276415727"
SQRT3 = "1.7320508075688772935274463415058723669428052538102380140710129633656312311687982731182430742609798839"


@pytest.fixture(scope="session")
def alpha2():
    return FrequencyVector(["1", SQRT2])


@pytest.fixture(scope="session")
def alpha1():
    return FrequencyVector(["1"])


@pytest.fixture(scope="session")
def box2_m4(alpha2):
    return TruncationBox(alpha2, 4)


@pytest.fixture(scope="session")
def box2_m8(alpha2):
    return TruncationBox(alpha2, 8)


def brute_convolve(u_coeff, v_coeff, box):
    """Double-loop convolution oracle truncated to the box (k=0 dropped)."""
    out = {}
    for ki, ci in u_coeff.items():
        for kj, cj in v_coeff.items():
            ks = tuple(a + b for a, b in zip(ki, kj))
            if any(ks) and ks in box:
                out[ks] = out.get(ks, 0j) + ci * cj
    return out


def random_coeff(box, seed, nmodes):
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(box), size=nmodes, replace=False)
    return {
        box.indices[i]: complex(rng.normal(), rng.normal()) for i in idx
    }
