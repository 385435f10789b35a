from django.apps import AppConfig


class ConesConfig(AppConfig):
    name = 'cones'
