"""Capital control measures toolkit.

Subpackages and modules:

- taxonomy: the 45-entry category hierarchy, dotted-index parsing,
  prefix matching, and flow directions.
- corpus: ingestion, country-name canonicalization, merging, statistics.
- extraction: two-part prompt pipeline over a pluggable chat backend.
- finetune_data: training-pair construction, chat formatting, splits.
- evaluation: binary / status / hierarchical accuracy and report tables.
- eventstudy: flow panels, event frames, two-way FE estimation.
- aggregates: stylized-fact tables over extracted events.
- cli: the `ccm` command.
"""

__version__ = "0.1.0"
