from __future__ import annotations

from typing import Mapping

import numpy as np
import torch
from torch import nn

from ..exceptions import ContractError


def _blend(old, new, alpha):
    if tuple(old.shape) != tuple(new.shape):
        raise ContractError(f"shape mismatch {tuple(old.shape)} vs {tuple(new.shape)}")
    return alpha * old + (1.0 - alpha) * new


def ema_update(teacher, student, alpha: float, previous_student=None):
    """Exponential moving average of student weights into the teacher.

    ``teacher`` and ``student`` are either two modules of the same
    architecture (teacher is updated in place and returned) or two mappings
    of arrays/tensors (a new mapping is returned).

    When ``previous_student`` is given, the blend starts from it instead of
    the teacher history: ``alpha * previous_student + (1 - alpha) * student``.
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if isinstance(teacher, nn.Module):
        return _ema_modules(teacher, student, alpha, previous_student)
    if not isinstance(teacher, Mapping):
        return _blend(np.asarray(previous_student if previous_student is not None else teacher),
                      np.asarray(student), alpha)
    base = previous_student if previous_student is not None else teacher
    if set(base) != set(student):
        raise ContractError("teacher and student parameter names differ")
    return {k: _blend(base[k], student[k], alpha) for k in student}


@torch.no_grad()
def _ema_modules(teacher: nn.Module, student: nn.Module, alpha, previous_student):
    t_state = teacher.state_dict()
    s_state = student.state_dict()
    if set(t_state) != set(s_state):
        raise ContractError("teacher and student parameter names differ")
    base = previous_student if previous_student is not None else t_state
    for name, t in t_state.items():
        s = s_state[name]
        if t.shape != s.shape:
            raise ContractError(f"{name}: shape mismatch {tuple(t.shape)} vs {tuple(s.shape)}")
        if not t.dtype.is_floating_point:
            t.copy_(s)
            continue
        t.copy_(_blend(base[name].to(t.dtype), s, alpha))
    return teacher


def snapshot(model: nn.Module) -> dict[str, torch.Tensor]:
    return {k: v.detach().clone() for k, v in model.state_dict().items()}
