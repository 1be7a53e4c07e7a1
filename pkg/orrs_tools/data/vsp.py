from collections import namedtuple

import numpy as np

from orrs_tools.data.exceptions import VspDomainException


VspCoefficients = namedtuple('VspCoefficients', ('a1', 'a2', 'a3', 'g', 'description'))

# Light-duty vehicle parameterization (Jimenez-Palacios).
LIGHT_DUTY = VspCoefficients(
    a1=1.1, a2=0.132, a3=0.000302, g=9.81,
    description="Light-duty: mass factor 1.1, rolling 0.132 m/s^2, aerodynamic 0.000302 1/m"
)

KMH_TO_MS = 1.0 / 3.6


def compute_vsp(velocity, acceleration, grade=0.0, coefficients=LIGHT_DUTY):
    """Vehicle specific power in kW/t from velocity (km/h), acceleration (m/s^2) and road grade.

    Accepts scalars or array-likes; scalars in, float out.
    """
    v_kmh = np.asarray(velocity, dtype=float)
    if np.any(v_kmh < 0) or not np.all(np.isfinite(v_kmh)):
        raise VspDomainException("Velocity must be finite and non-negative, got {0}".format(velocity))
    v = v_kmh * KMH_TO_MS
    a = np.asarray(acceleration, dtype=float)
    c = coefficients
    vsp = v * (c.a1 * a + c.g * np.asarray(grade, dtype=float) + c.a2) + c.a3 * v ** 3
    if np.ndim(vsp) == 0:
        return float(vsp)
    return vsp
