from .study import (DEFAULT_VERSIONS, RatingRecord, Session, SessionItem,
                    Study, StudyPlan, aggregate_mos)

__all__ = [
    "DEFAULT_VERSIONS",
    "RatingRecord",
    "Session",
    "SessionItem",
    "Study",
    "StudyPlan",
    "aggregate_mos",
]
