"""Butcher tableaus for the explicit Runge-Kutta family.

Coefficients are stored as plain floats. Methods with an embedded pair keep
both weight vectors; the error estimate uses ``b - b_hat``.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from src.core.errors import ValidationError


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    c: Tuple[float, ...]
    a: Tuple[Tuple[float, ...], ...]
    b: Tuple[float, ...]
    b_hat: Optional[Tuple[float, ...]]
    order: int
    embedded_order: Optional[int]

    @property
    def stages(self) -> int:
        return len(self.c)

    @property
    def is_adaptive(self) -> bool:
        return self.b_hat is not None

    @property
    def error_weights(self) -> Tuple[float, ...]:
        if self.b_hat is None:
            return ()
        return tuple(bi - bhi for bi, bhi in zip(self.b, self.b_hat))

    @property
    def error_order(self) -> int:
        """Local order of the embedded estimate, used by the step controller"""
        return (self.embedded_order if self.embedded_order is not None else self.order) + 1

    def validate(self, tol: float = 1e-10) -> "ButcherTableau":
        s = self.stages
        if len(self.a) != s or len(self.b) != s or (self.b_hat is not None and len(self.b_hat) != s):
            raise ValidationError(f"{self.name}: inconsistent stage counts")
        for i, row in enumerate(self.a):
            if len(row) != i:
                raise ValidationError(f"{self.name}: row {i} of a is not strictly lower-triangular")
            if abs(sum(row) - self.c[i]) > tol:
                raise ValidationError(f"{self.name}: row {i} of a does not sum to c[{i}]")
        if abs(sum(self.b) - 1.0) > tol:
            raise ValidationError(f"{self.name}: b does not sum to 1")
        if self.b_hat is not None and abs(sum(self.b_hat) - 1.0) > tol:
            raise ValidationError(f"{self.name}: b_hat does not sum to 1")
        return self


EULER = ButcherTableau(
    name="euler",
    c=(0.0,),
    a=((),),
    b=(1.0,),
    b_hat=None,
    order=1,
    embedded_order=None,
)

# Heun's method with the Euler step as embedded estimate.
HEUN = ButcherTableau(
    name="heun",
    c=(0.0, 1.0),
    a=((), (1.0,)),
    b=(0.5, 0.5),
    b_hat=(1.0, 0.0),
    order=2,
    embedded_order=1,
)

DOPRI5 = ButcherTableau(
    name="dopri5",
    c=(0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0),
    a=(
        (),
        (1 / 5,),
        (3 / 40, 9 / 40),
        (44 / 45, -56 / 15, 32 / 9),
        (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
        (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
    ),
    b=(35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0),
    b_hat=(5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40),
    order=5,
    embedded_order=4,
)

_TSIT5_B = (
    0.09646076681806523,
    0.01,
    0.4798896504144996,
    1.379008574103742,
    -3.290069515436081,
    2.324710524099774,
    0.0,
)
# b - b_hat
_TSIT5_BTILDE = (
    -0.00178001105222577714,
    -0.0008164344596567469,
    0.007880878010261995,
    -0.1447110071732629,
    0.5823571654525552,
    -0.45808210592918697,
    1 / 66,
)

TSIT5 = ButcherTableau(
    name="tsit5",
    c=(0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0),
    a=(
        (),
        (0.161,),
        (-0.008480655492356989, 0.335480655492357),
        (2.897153057105493, -6.359448489975075, 4.3622954328695815),
        (5.325864828439257, -11.748883564062828, 7.4955393428898365, -0.09249506636175525),
        (5.86145544294642, -12.92096931784711, 8.159367898576159, -0.071584973281401, -0.028269050394068383),
        _TSIT5_B[:6],
    ),
    b=_TSIT5_B,
    b_hat=tuple(b - e for b, e in zip(_TSIT5_B, _TSIT5_BTILDE)),
    order=5,
    embedded_order=4,
)

TABLEAUS: Dict[str, ButcherTableau] = {t.name: t for t in (EULER, HEUN, DOPRI5, TSIT5)}


def get_tableau(name: str) -> ButcherTableau:
    try:
        return TABLEAUS[name.lower()]
    except KeyError:
        raise ValidationError(f"unknown solver '{name}', expected one of {sorted(TABLEAUS)}")
