"""
Mixins partagés par les modèles d'enregistrement des exécutions.
"""

from typing import Any, Dict, Iterable

from django.db import models


class TimeStampedMixin(models.Model):
    """
    Horodatage de création et de modification d'un enregistrement.

    Ces valeurs ne sont jamais recopiées dans les rapports JSON.
    """
    created_at = models.DateTimeField(
        auto_now_add=True,
        verbose_name="Date de création"
    )
    updated_at = models.DateTimeField(
        auto_now=True,
        verbose_name="Dernière modification"
    )

    TIMESTAMP_FIELDS = ('created_at', 'updated_at')

    class Meta:
        abstract = True


class SerializableMixin:
    """Conversion d'un enregistrement en dictionnaire déterministe."""

    def to_dict(self, exclude: Iterable[str] = ()) -> Dict[str, Any]:
        """
        Valeurs des champs, clés triées, sans les champs exclus.

        Args:
            exclude: Noms des champs à ignorer (par ex. les horodatages)

        Returns:
            Dict des valeurs JSON-compatibles
        """
        skipped = set(exclude)
        data = {}
        for model_field in sorted(self._meta.concrete_fields, key=lambda f: f.name):
            if model_field.name in skipped:
                continue
            value = getattr(self, model_field.attname)
            if hasattr(value, 'isoformat'):
                value = value.isoformat()
            elif not isinstance(value, (dict, list, str, int, float, bool)) and value is not None:
                value = str(value)
            data[model_field.name] = value
        return data
