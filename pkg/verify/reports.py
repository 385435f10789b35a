"""
Rapports de vérification: verdict, valeur mesurée et tolérance utilisée.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List


@dataclass
class CheckReport:
    """
    Résultat d'un contrôle numérique. Un rapport ne revendique jamais une propriété exacte:
    il compare une mesure à une tolérance.

    Attributes:
        name: nom du contrôle
        passed: verdict
        measured: valeur mesurée
        tolerance: tolérance utilisée
        details: mesures complémentaires
    """
    name: str
    passed: bool
    measured: float
    tolerance: float
    details: Dict[str, Any] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'passed': self.passed,
            'measured': self.measured,
            'tolerance': self.tolerance,
            'details': self.details,
        }


@dataclass
class VerificationSummary:
    """Rapports regroupés d'une vérification complète."""
    reports: List[CheckReport] = field(default_factory=list)

    def add(self, report: CheckReport) -> CheckReport:
        self.reports.append(report)
        return report

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports)

    @property
    def failed(self) -> List[str]:
        return [report.name for report in self.reports if not report.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'passed': self.passed,
            'failed': self.failed,
            'checks': {report.name: report.to_dict() for report in self.reports},
        }
