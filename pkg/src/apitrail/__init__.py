"""apitrail: execution-driven, retrieval-augmented code generation.

Solves multi-API programming problems over unfamiliar libraries by planning
API-invocation subtasks, retrieving and reranking documentation for each,
probing candidate usages in a sandbox, chaining successful execution
experience forward, and generating final solutions. Ships the evaluation
harness (pass@k / success@k) used to measure it.
"""

__version__ = "0.1.0"
