"""
Tests for the rolling multi-scene curriculum.
"""
import pytest

from gradnav.schemas.config import CurriculumConfig
from gradnav.services.curriculum import CurriculumSchedule, curriculum_next


def test_default_schedule_over_three_scenes():
    """Test that three scenes give 1500 epochs and 15 transitions."""
    schedule = CurriculumSchedule.from_config(CurriculumConfig(enabled=True), n_scenes=3)
    assert schedule.total_epochs == 1500
    assert schedule.transitions == 15
    assert sum(schedule.is_transition(e) for e in range(schedule.total_epochs)) == 15


def test_scene_order_is_cyclic():
    """Test that blocks of epochs visit the scenes in order and wrap around."""
    schedule = CurriculumSchedule(n_scenes=3, passes=2, epochs_per_pass=10)
    assert [curriculum_next(schedule, e).scene_index for e in (0, 9, 10, 25, 30, 59)] == [0, 0, 1, 2, 0, 2]


def test_lr_reset_only_at_block_starts():
    """Test that the learning-rate reset fires at the first epoch of each block."""
    schedule = CurriculumSchedule(n_scenes=2, passes=1, epochs_per_pass=5)
    flags = [schedule.next(e).lr_reset for e in range(10)]
    assert flags == [True, False, False, False, False, True, False, False, False, False]
    quiet = CurriculumSchedule(n_scenes=2, passes=1, epochs_per_pass=5, lr_reset=False)
    assert not any(quiet.next(e).lr_reset for e in range(10))


def test_epoch_out_of_range():
    """Test that epochs outside the schedule raise ValueError."""
    schedule = CurriculumSchedule(n_scenes=1, passes=1, epochs_per_pass=3)
    with pytest.raises(ValueError):
        schedule.next(3)
    with pytest.raises(ValueError):
        schedule.next(-1)


def test_invalid_schedule():
    """Test that an empty schedule is refused."""
    with pytest.raises(ValueError):
        CurriculumSchedule(n_scenes=0)
