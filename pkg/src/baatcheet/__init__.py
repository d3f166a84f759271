"""baatcheet: a self-contained conversational engine for Roman Urdu QA.

Corpus parsing, sparse-feature intent classification with entity
extraction, topic-model intent mining, a policy cascade for dialog
management, knowledge-graph question answering, evaluation tooling, an
HTTP server and a CLI.
"""

__version__ = "0.1.0"
