from django.apps import AppConfig


class InvariantSetConfig(AppConfig):
    name = 'invariant_set'
