"""Generalized second-price slot assignment.

Winners take slots in descending bid order; each pays the next-highest bid,
floored at the reserve, and the bottom winner (no next bid) pays the reserve.
All money is integer micro-units per click.
"""

from __future__ import annotations

from dataclasses import dataclass

from .matcher import Candidate


@dataclass(frozen=True)
class SlotAssignment:
    slot_index: int  # 0 = most attractive, top of page
    ad_id: int
    price_micros: int


def gsp_assign(candidates: list[Candidate], slots: int,
               reserve_micros: int = 0) -> list[SlotAssignment]:
    """Assign the bid-descending candidate list to ``slots`` positions.

    Candidates bidding below the reserve are excluded before assignment.
    The input must already be sorted by bid descending (the matcher's
    contract); anything else is a caller bug and raises.
    """
    if slots < 1:
        raise ValueError("slots must be >= 1")
    if reserve_micros < 0:
        raise ValueError("reserve must be >= 0")
    bids = [c.bid_micros for c in candidates]
    if any(bids[i] < bids[i + 1] for i in range(len(bids) - 1)):
        raise ValueError("candidates must be sorted by bid descending")

    pool = [c for c in candidates if c.bid_micros >= reserve_micros]
    assignments = []
    for i, winner in enumerate(pool[:slots]):
        if i + 1 < len(pool):
            price = max(pool[i + 1].bid_micros, reserve_micros)
        else:
            price = reserve_micros
        assignments.append(SlotAssignment(slot_index=i, ad_id=winner.ad.id,
                                          price_micros=price))
    return assignments
