from audiocascade.bench.dataset import DatasetRecord, load_dataset
from audiocascade.bench.report import RunReport, breakdown, compare_policies, score

__all__ = ["DatasetRecord", "RunReport", "breakdown", "compare_policies", "load_dataset", "score"]
