from django.apps import AppConfig


class WhitneySurfaceConfig(AppConfig):
    name = 'whitney_surface'
