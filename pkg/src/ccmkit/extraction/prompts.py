"""Two-part prompt construction for the extraction pipeline.

The system prompt carries the analyst role framing, report exemplars, the
category table, and the full field schema; the user prompt is the single
entry to read. Both builders are byte-stable for identical inputs so runs
are reproducible and the system-prompt hash only moves when the taxonomy
or the exemplars change.
"""
from __future__ import annotations

import hashlib
import json

from ..taxonomy import Taxonomy

#: Report entry shown to the model so it learns the source layout.
DEFAULT_EXEMPLAR_ENTRIES = (
    {
        "index": "X.D.2.",
        "category": "Inward direct investment",
        "code": "172",
        "status": "yes",
        "description": (
            "Investments require prior approval and are administered by the "
            "Investment Committee. The law stipulates that foreign investment in "
            "the Islamic State of Afghanistan can take place only through joint "
            "ventures, with foreign participation not exceeding 49 percent, and "
            "that an investment approved by the Investment Committee requires no "
            "further license in order to operate. The Foreign and Domestic Private "
            "Investment Law includes the following provisions: (1) income tax "
            "exemption for four years, beginning with the date of the first sale "
            "of products resulting from the new investment; (2) exemption from "
            "import duties on essential imports, mainly for capital goods."
        ),
    },
)

_ACTION_SCHEMA = """\
- "action": Classify the policy's primary regulatory move into one of the
  following 10 fixed categories. Choose the most important action described in
  the text. If multiple actions are present, select the one with the greatest
  policy impact. Return only one of the following values:
    - prohibit: Explicitly bans a type of transaction or capital flow.
      Example: "Residents are prohibited from acquiring foreign bonds."
    - limit: Imposes a cap or threshold on volume, frequency, or eligible entities.
      Example: "A ceiling was placed on foreign portfolio investment."
    - suspend: Temporarily halts or freezes an activity that was previously allowed.
      Example: "Licensing of outward investments was suspended."
    - require approval: Allows the activity only if prior approval or registration
      is granted.
      Example: "All real estate purchases by nonresidents require prior approval."
    - subject to quota: Allows the activity but restricts it under a quota or
      allocation.
      Example: "Foreign exchange purchases for education are subject to quota."
    - permit: Explicitly authorizes or legalizes an activity that was previously
      restricted.
      Example: "Corporates are permitted to invest abroad in joint ventures."
    - remove: Cancels a previous restriction or approval requirement.
      Example: "The requirement for prior approval was removed."
    - ease: Makes an existing restriction more flexible (e.g., expanding coverage,
      simplifying approval).
      Example: "Approval procedures were eased for investment abroad."
    - amend: Modifies the wording or scope of existing regulation without clearly
      changing its restrictiveness.
      Example: "The regulation was amended to update procedural definitions."
    - clarify: Provides clarification or interpretation of existing rules without
      changing legal effect.
      Example: "The scope of 'resident' was clarified to include offshore
      subsidiaries."
"""

_FIELD_SCHEMA = """\
- "action_intensity": classify only into the following categories based on meaning:
    - restrictive: the policy limits or prohibits cross-border transactions.
      Common cues: prohibit, ban, restrict, suspend, limit, impose, freeze.
    - liberalizing: the policy removes, relaxes, or eases controls.
      Cues: allow, remove, lift, permit, ease, liberalize.
    - conditional: the policy allows actions only under specific conditions
      (approval, quota, limits).
    - neutral: the change is administrative or its direction is unclear.
- "action_direction": classify only as:
    - inward: affects inflows into the country.
    - outward: affects outflows from the country.
    - both: simultaneously affects inward and outward flows.
    - undefined: direction not specified or unclear.
- "action_level": classify only as:
    - supranational: decision made by a regional or international body (e.g., EU).
    - national: implemented by central government.
    - subnational: implemented by local or provincial authority.
    - undefined: level of authority not specified.
- "instrument": the policy tool involved (e.g., foreign exchange, bank credit,
  reserve requirement), or null.
- "actor": the policy maker implementing the measure (e.g., central bank,
  government, commercial banks), or null.
- "beneficiary": the group of investors the policy aims at (e.g., exporters,
  travelers), or null.
- "condition": "with" when an additional requirement applies (e.g., subject to
  approval, only on request), "without" when the text states none applies, else
  null. Put the requirement text itself in "condition_detail".
- "target_country": the country targeted by the policy, or null.
- "target_industry": the industry targeted by the policy, or null.
- "limit_threshold": the numeric limit or threshold of the policy, or null.
- "is_trade_policy": true if the measure affects trade in goods or tariffs
  (e.g., mentions imports, exports, quotas, tariffs).
- "is_sanction": true if the measure involves bans, freezes, or disallowing
  actions typically against countries or individuals.
- "is_national_security": true if the justification or mechanism refers to
  security, terrorism, or national interest.
- "retroactive_date": the date on which the policy is cancelled or rolled back,
  if one is stated, else null.
- "llm_reasoning": a brief justification for the classification, citing the
  decisive phrase from the description.
"""


def render_category_table(taxonomy: Taxonomy) -> str:
    lines = []
    for node in taxonomy:
        code = f" [{node.short_code}]" if node.short_code else ""
        lines.append(f"{node.index}: {node.name}{code}")
    return "\n".join(lines)


def build_system_prompt(taxonomy: Taxonomy, exemplar_entries=None) -> str:
    """Render the full extraction system prompt.

    Byte-stable for identical taxonomy and exemplars. Contains the role
    framing, the report exemplar block, the category table, and the field
    schema with the per-field source-sentence requirement.
    """
    exemplars = exemplar_entries if exemplar_entries is not None else DEFAULT_EXEMPLAR_ENTRIES
    exemplar_block = "\n\n".join(
        json.dumps(entry, ensure_ascii=False, sort_keys=True) for entry in exemplars
    )
    parts = [
        "You are a senior policy analyst. Your job is to extract structured "
        "information from IMF Exchange Arrangements and Exchange Restrictions "
        "(AREAER) reports. Each report entry describes a capital control policy "
        "of one country, organized by category index, category name, a textual "
        "description, and a binary status indicator. An example entry looks like "
        "this:",
        exemplar_block,
        "The capital-control category hierarchy is:",
        render_category_table(taxonomy),
        "Return all results as a JSON object with the fields defined below. Use "
        "precise and short terms. If a field is not explicitly mentioned, return "
        "null or false. For each extracted field, also include a field named "
        "'<field>_source_sentence' containing the exact sentence from the "
        "original description that supports your extraction.",
        _ACTION_SCHEMA,
        _FIELD_SCHEMA,
    ]
    return "\n\n".join(part.rstrip() for part in parts) + "\n"


def build_user_prompt(entry) -> str:
    """Render one entry as the user message (deterministic key order)."""
    body = {
        "country": entry.country,
        "year": entry.year,
        "index": getattr(entry, "index", None),
        "category": entry.category,
        "description": entry.description,
    }
    effective = getattr(entry, "effective_date", None)
    if effective is not None:
        body["effective_date"] = effective.isoformat()
    status = getattr(entry, "status", None)
    if status is not None:
        body["status"] = status
    return json.dumps(body, ensure_ascii=False, sort_keys=True)


def system_prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()
