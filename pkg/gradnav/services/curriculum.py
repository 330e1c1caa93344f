"""
Rolling multi-scene curriculum.

Training visits the scenes in a fixed cyclic order, ``epochs_per_pass`` epochs
at a time, until every scene has been visited ``passes`` times.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

from gradnav.schemas.config import CurriculumConfig

logger = logging.getLogger(__name__)


class CurriculumStep(NamedTuple):
    scene_index: int
    lr_reset: bool


@dataclass(frozen=True)
class CurriculumSchedule:
    n_scenes: int
    passes: int = 5
    epochs_per_pass: int = 100
    lr_reset: bool = True

    def __post_init__(self):
        if self.n_scenes < 1 or self.passes < 1 or self.epochs_per_pass < 1:
            raise ValueError(
                f"curriculum needs at least one scene, pass and epoch per pass "
                f"(got {self.n_scenes}, {self.passes}, {self.epochs_per_pass})"
            )

    @classmethod
    def from_config(cls, config: CurriculumConfig, n_scenes: int) -> "CurriculumSchedule":
        return cls(
            n_scenes=n_scenes,
            passes=config.passes,
            epochs_per_pass=config.epochs_per_pass,
            lr_reset=config.lr_reset,
        )

    @property
    def total_epochs(self) -> int:
        return self.n_scenes * self.passes * self.epochs_per_pass

    @property
    def transitions(self) -> int:
        return self.n_scenes * self.passes

    def next(self, epoch: int) -> CurriculumStep:
        """
        Scene for ``epoch`` and whether the learning rate resets there.

        Raises:
            ValueError: if ``epoch`` lies outside [0, total_epochs)
        """
        if not 0 <= epoch < self.total_epochs:
            raise ValueError(f"epoch {epoch} outside the curriculum range [0, {self.total_epochs})")
        block, offset = divmod(epoch, self.epochs_per_pass)
        return CurriculumStep(scene_index=block % self.n_scenes, lr_reset=self.lr_reset and offset == 0)

    def is_transition(self, epoch: int) -> bool:
        return 0 <= epoch < self.total_epochs and epoch % self.epochs_per_pass == 0


def curriculum_next(schedule: CurriculumSchedule, epoch: int) -> CurriculumStep:
    return schedule.next(epoch)
