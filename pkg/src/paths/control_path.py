"""Control paths X(s) over forecast knots.

Values carry any leading batch dimensions, ``(..., K, C)``, over a shared
1-D knot grid ``(K,)``. Each segment stores cubic coefficients in the local
variable ``u = s - t_i``::

    X(s) = a + b*u + c*u**2 + d*u**3
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import torch

from src.core.errors import ValidationError
from src.core.tensor import ArrayLike, as_tensor

logger = logging.getLogger(__name__)


class Interpolation(str, Enum):
    HERMITE = "hermite"
    LINEAR = "linear"

    @classmethod
    def _missing_(cls, value):
        if value == "hermite_backward":
            return cls.HERMITE
        return None


@dataclass(frozen=True)
class ControlPath:
    times: torch.Tensor
    values: torch.Tensor
    scheme: Interpolation
    a: torch.Tensor
    b: torch.Tensor
    c: torch.Tensor
    d: torch.Tensor

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    def __call__(self, s: float) -> torch.Tensor:
        return eval_path(self, s)

    def derivative(self, s: float) -> torch.Tensor:
        return eval_path_derivative(self, s)


def with_time_channel(times: ArrayLike, values: ArrayLike) -> torch.Tensor:
    """Append the knot times as a final channel: ``(..., K, D) -> (..., K, D+1)``"""
    times, values = as_tensor(times), as_tensor(values)
    if values.dim() < 2 or values.shape[-2] != times.shape[0]:
        raise ValidationError(f"values {tuple(values.shape)} do not match {times.shape[0]} knot times")
    t = times.reshape(*([1] * (values.dim() - 2)), -1, 1).expand(*values.shape[:-1], 1)
    return torch.cat([values, t], dim=-1)


def fit_path(times: ArrayLike, values: ArrayLike, scheme: Union[Interpolation, str] = Interpolation.HERMITE) -> ControlPath:
    """Fit a path through ``(times[i], values[..., i, :])``.

    Hermite slopes are backward differences ``m_i = (x_i - x_{i-1}) / (t_i - t_{i-1})``
    with ``m_0 = m_1``; a channel that is linear in time is reproduced exactly.
    """
    scheme = Interpolation(scheme)
    times, values = as_tensor(times), as_tensor(values)
    if times.dim() != 1:
        raise ValidationError(f"knot times must be 1-D, got shape {tuple(times.shape)}")
    if times.shape[0] < 2:
        raise ValidationError(f"a control path needs at least 2 knots, got {times.shape[0]}")
    if values.dim() < 2 or values.shape[-2] != times.shape[0]:
        raise ValidationError(f"values {tuple(values.shape)} do not match {times.shape[0]} knot times")
    dt = times[1:] - times[:-1]
    if not bool((dt > 0).all()):
        raise ValidationError("knot times must be strictly increasing")

    h = dt.unsqueeze(-1)  # (K-1, 1), broadcasts over channels and batch
    p0 = values[..., :-1, :]
    p1 = values[..., 1:, :]
    secant = (p1 - p0) / h

    if scheme is Interpolation.LINEAR:
        zeros = torch.zeros_like(p0)
        return ControlPath(times, values, scheme, a=p0, b=secant, c=zeros, d=zeros)

    # backward differences: slope at knot i+1 is the secant of segment i
    m = torch.cat([secant[..., :1, :], secant], dim=-2)
    m0 = m[..., :-1, :]
    m1 = m[..., 1:, :]
    c = (3.0 * secant - 2.0 * m0 - m1) / h
    d = (m0 + m1 - 2.0 * secant) / (h * h)
    return ControlPath(times, values, scheme, a=p0, b=m0, c=c, d=d)


def _segment(path: ControlPath, s: float):
    start, end = path.start, path.end
    tol = 1e-9 * max(1.0, end - start)
    if not (start - tol <= s <= end + tol):
        raise ValidationError(f"s={s} outside path domain [{start}, {end}]")
    s = min(max(s, start), end)
    # right segment at interior knots, last segment at the final knot
    idx = int(torch.searchsorted(path.times, torch.tensor([s], dtype=path.times.dtype), right=True)[0]) - 1
    idx = min(max(idx, 0), path.times.shape[0] - 2)
    return idx, s - float(path.times[idx])


def eval_path(path: ControlPath, s: float) -> torch.Tensor:
    idx, u = _segment(path, float(s))
    a, b, c, d = (coef[..., idx, :] for coef in (path.a, path.b, path.c, path.d))
    return a + u * (b + u * (c + u * d))


def eval_path_derivative(path: ControlPath, s: float) -> torch.Tensor:
    idx, u = _segment(path, float(s))
    b, c, d = (coef[..., idx, :] for coef in (path.b, path.c, path.d))
    return b + u * (2.0 * c + 3.0 * u * d)
