from django.apps import AppConfig


class ProjectiveLiftConfig(AppConfig):
    name = 'projective_lift'
