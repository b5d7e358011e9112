"""The six example operators on [0, 1] and cached interval / spectrum results."""

from disconj.eigensolve import disconjugacy_interval, spectrum
from disconj.odecore import ProblemDef

# The six example operators on [0, 1]: (order, a_1..a_n, reference M)
CATALOG = {
    "second": (2, ["0", "0"], 0.0),
    "third": (3, ["0", "0", "0"], 0.0),
    "fourth": (4, ["0", "0", "0", "0"], 0.0),
    "fourth_50": (4, ["0", "50", "0", "0"], 200.0),
    "third_cos": (3, ["cos(10*t)", "0", "0"], 0.0),
    "sixth": (6, ["0", "0", "-8", "0", "0", "0"], 0.0),
}


def make(name: str) -> ProblemDef:
    n, coeffs, m_ref = CATALOG[name]
    return ProblemDef.from_strings(n, coeffs, [0.0, 1.0], m_ref)


_intervals: dict = {}
_spectra: dict = {}


def cached_interval(name: str):
    if name not in _intervals:
        _intervals[name] = disconjugacy_interval(make(name))
    return _intervals[name]


def cached_spectrum(name: str):
    if name not in _spectra:
        _spectra[name] = spectrum(make(name))
    return _spectra[name]

