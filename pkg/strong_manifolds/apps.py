from django.apps import AppConfig


class StrongManifoldsConfig(AppConfig):
    name = 'strong_manifolds'
